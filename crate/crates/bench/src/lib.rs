//! Fixtures shared by the benchmarks.

use bioknock::fba::{ExchangeRoles, FluxModel};
use bioknock::model::{parse_model, MetabolicModel, ModelConfig};

pub const CORE_MODEL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/e_coli_core.json");

pub fn core_model() -> MetabolicModel {
    let bytes = std::fs::read(CORE_MODEL).expect("core model file");
    parse_model(&bytes, &ModelConfig::default()).expect("core model parses")
}

pub fn flux_model(model: &MetabolicModel, product: &str) -> FluxModel {
    let roles = ExchangeRoles {
        product: product.into(),
        ..Default::default()
    };
    FluxModel::new(model, roles, Default::default()).expect("wild type grows")
}
