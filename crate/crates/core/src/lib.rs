pub mod bilevel;
pub mod config;
pub mod fba;
pub mod lp;
pub mod model;
pub mod reactor;
