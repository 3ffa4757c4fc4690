//! Wild-type growth of a genome-scale model: `cargo run --release --example gem_wild_type -- MODEL.json BIOMASS_ID`
use bioknock::fba::{ExchangeRoles, FluxModel, KineticsParams};
use bioknock::model::{parse_model, IonAnnotation, ModelConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let bytes = std::fs::read(&args[1]).expect("model file");
    let cfg = ModelConfig {
        biomass_id: args.get(2).cloned(),
        ..Default::default()
    };
    let t = Instant::now();
    let model = parse_model(&bytes, &cfg).expect("parse");
    let roles = ExchangeRoles {
        ions: IonAnnotation::default(),
        ..Default::default()
    };
    let fm = FluxModel::new(&model, roles, KineticsParams::default()).expect("fba");
    println!(
        "{} reactions, {} columns, growth {:.6} in {:.2?}",
        model.reactions.len(),
        fm.irr.num_columns(),
        fm.wild_type_growth(),
        t.elapsed()
    );
}
