use bioknock::fba::{FluxModel, GrowthOutcome, KnockoutSet};
use bioknock::model::{parse_model, ModelConfig};

const GEM: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/iJO1366.json");

#[test]
fn genome_scale_wild_type_grows() {
    let bytes = std::fs::read(GEM).unwrap();
    let cfg = ModelConfig {
        biomass_id: Some("BIOMASS_Ec_iJO1366_core_53p95M".into()),
        ..Default::default()
    };
    let m = parse_model(&bytes, &cfg).unwrap();
    assert_eq!(m.reactions.len(), 2583);
    let fm = FluxModel::new(&m, Default::default(), Default::default()).unwrap();
    // reference growth rates from an independent sparse LP solver
    let g = fm.wild_type_growth();
    assert!((g - 0.966984017).abs() < 1e-6, "{g}");
    let wt = fm.wild_type();
    let glc = m.reaction_index("EX_glc__D_e").unwrap();
    assert!((wt.fluxes[glc] + 10.0).abs() < 1e-6);

    for (id, want) in [("GLCptspp", 0.956614882), ("ENO", 0.888996486)] {
        match fm.max_growth(&KnockoutSet::new([id])).unwrap() {
            GrowthOutcome::Feasible { growth, .. } => assert!((growth - want).abs() < 1e-6, "{id}: {growth}"),
            other => panic!("{id}: {other:?}"),
        }
    }
    // lysine synthesis has no bypass
    assert!(!matches!(
        fm.max_growth(&KnockoutSet::new(["DHDPS"])).unwrap(),
        GrowthOutcome::Feasible { .. }
    ));
}
