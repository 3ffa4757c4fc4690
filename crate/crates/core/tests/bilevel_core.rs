use bioknock::bilevel::{
    classify_outcome, solve_optknock, solve_sequential, solve_simultaneous, OutcomeClass, Problem,
    ProblemSpec, SearchConfig, SearchStrategy, SecondStage, SolutionStatus,
};
use bioknock::fba::{ExchangeRoles, KnockoutSet};
use bioknock::model::{parse_model, MetabolicModel, ModelConfig};
use bioknock::reactor::{acid_form_molar_mass, CostParams};

const CORE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/e_coli_core.json");

/// Small candidate pool mixing growth-coupling, lethal and neutral deletions.
const POOL: [&str; 10] = [
    "ACKr", "ATPS4r", "CYTBD", "GLCpts", "NADH16", "PFL", "PGI", "PPC", "PTAr", "PYK",
];

fn core() -> MetabolicModel {
    parse_model(&std::fs::read(CORE).unwrap(), &ModelConfig::default()).unwrap()
}

fn spec(product: &str, kappa: usize, strategy: Option<SearchStrategy>) -> ProblemSpec {
    ProblemSpec {
        exchanges: ExchangeRoles {
            product: product.into(),
            ..Default::default()
        },
        max_knockouts: kappa,
        capacity: 1e3,
        kinetics: Default::default(),
        reactor: Default::default(),
        costs: CostParams {
            product_molar_mass: acid_form_molar_mass(product).unwrap(),
            ..Default::default()
        },
        search: SearchConfig {
            strategy,
            ..Default::default()
        },
        flux_selection: Default::default(),
    }
}

fn small(model: &MetabolicModel, product: &str, kappa: usize, strategy: SearchStrategy) -> Problem {
    let mut p = Problem::new(model, spec(product, kappa, Some(strategy))).unwrap();
    p.candidates = POOL.iter().map(|s| s.to_string()).collect();
    p
}

#[test]
fn no_product_is_feasible_without_knockouts() {
    let m = core();
    for product in ["EX_for_e", "EX_ac_e", "EX_succ_e"] {
        let p = Problem::new(&m, spec(product, 0, None)).unwrap();
        let s = solve_simultaneous(&p).unwrap();
        assert_eq!(s.status, SolutionStatus::Infeasible, "{product}");
        assert_eq!(s.visits.evaluated, 1);
        assert!(p.flux.wild_type_growth() >= p.spec.kinetics.max_growth_at_optimal_ph);
        // OptKnock with no budget keeps the wild type, which the reactor rejects
        let seq = solve_sequential(&p).unwrap();
        assert!(seq.optknock.knockouts.is_empty());
        assert!(matches!(seq.second_stage, SecondStage::Infeasible { .. }));
        assert_eq!(classify_outcome(&s, &seq).unwrap(), OutcomeClass::E);
    }
}

#[test]
fn formate_single_knockout_is_atp_synthase() {
    let m = core();
    let p = Problem::new(&m, spec("EX_for_e", 1, None)).unwrap();
    let s = solve_simultaneous(&p).unwrap();
    assert_eq!(s.status, SolutionStatus::Optimal);
    assert_eq!(s.knockouts, KnockoutSet::new(["ATPS4r"]));
    assert_eq!(s.visits.evaluated, 1 + p.candidates.len());
    p.verify(&s).unwrap();
    let d = s.design.as_ref().unwrap();
    assert!(d.max_growth > s.flux.as_ref().unwrap().growth);
    let c = s.cost.as_ref().unwrap();
    let total: f64 = c.per_kg().iter().filter(|r| r.0 != "total").map(|r| r.1).sum();
    assert!((total - c.specific_cost).abs() <= 1e-9 * c.specific_cost);
}

#[test]
fn wide_beam_and_pruning_match_exhaustive() {
    let m = core();
    let ex = solve_simultaneous(&small(&m, "EX_for_e", 2, SearchStrategy::Exhaustive)).unwrap();
    assert_eq!(ex.visits.evaluated, 1 + 10 + 45);
    for strategy in [
        SearchStrategy::Pruned,
        SearchStrategy::Beam {
            width: 1000,
            exact_levels: 0,
        },
    ] {
        let s = solve_simultaneous(&small(&m, "EX_for_e", 2, strategy)).unwrap();
        assert_eq!(s.knockouts, ex.knockouts, "{strategy:?}");
        assert_eq!(s.cost, ex.cost, "{strategy:?}");
        assert!(s.visits.evaluated <= ex.visits.evaluated);
    }
}

#[test]
fn cost_falls_with_budget_and_beats_sequential() {
    let m = core();
    let mut last = f64::INFINITY;
    for kappa in 1..=3 {
        let p = small(&m, "EX_ac_e", kappa, SearchStrategy::Exhaustive);
        let sim = solve_simultaneous(&p).unwrap();
        let cost = sim.specific_cost().unwrap_or(f64::INFINITY);
        assert!(cost <= last * (1.0 + 1e-12), "kappa {kappa}: {cost} after {last}");
        last = cost;
        let seq = solve_sequential(&p).unwrap();
        if let (Some(a), Some(b)) = (sim.hourly_cost(), seq.solution().and_then(|s| s.hourly_cost())) {
            assert!(a <= b * (1.0 + 1e-6));
        }
        classify_outcome(&sim, &seq).unwrap();
    }
}

#[test]
fn optknock_budget_nests() {
    let m = core();
    let p = small(&m, "EX_ac_e", 2, SearchStrategy::Exhaustive);
    let zero = solve_optknock(&p.flux, &p.candidates, 0, SearchStrategy::Exhaustive).unwrap();
    assert!(zero.knockouts.is_empty());
    assert!((zero.growth - p.flux.wild_type_growth()).abs() < 1e-12);
    let mut last = zero.product;
    for kappa in 1..=2 {
        let r = solve_optknock(&p.flux, &p.candidates, kappa, SearchStrategy::Exhaustive).unwrap();
        assert!(r.product >= last - 1e-9);
        last = r.product;
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let m = core();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let p = small(
                &m,
                "EX_for_e",
                2,
                SearchStrategy::Beam {
                    width: 4,
                    exact_levels: 1,
                },
            );
            let s = solve_simultaneous(&p).unwrap();
            let q = solve_sequential(&p).unwrap();
            (
                serde_json::to_string(&s).unwrap(),
                s.search_log_csv(),
                serde_json::to_string(&q).unwrap(),
            )
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn search_log_lists_every_evaluation() {
    let m = core();
    let s = solve_simultaneous(&small(&m, "EX_for_e", 1, SearchStrategy::Exhaustive)).unwrap();
    let csv = s.search_log_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "knockout_ids;status;v_bio;v_P;best_hourly_cost;reason"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 11);
    assert!(rows[0].starts_with(";design_infeasible;"));
    assert!(rows.iter().any(|r| r.starts_with("GLCpts;no_growth;")));
    assert!(rows.iter().all(|r| r.split(';').count() == 6));
}
