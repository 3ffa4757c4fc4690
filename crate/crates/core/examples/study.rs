//! Runs the simultaneous and sequential searches for one product and budget.
//!
//! usage: study MODEL PRODUCT KAPPA [CAPACITY]

use bioknock::bilevel::{classify_outcome, solve_sequential, solve_simultaneous, Problem, ProblemSpec};
use bioknock::fba::ExchangeRoles;
use bioknock::model::{parse_model, ModelConfig};
use bioknock::reactor::{acid_form_molar_mass, CostParams};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let model = parse_model(&std::fs::read(&args[1]).unwrap(), &ModelConfig::default()).unwrap();
    let product = args[2].clone();
    let kappa: usize = args[3].parse().unwrap();
    let capacity: f64 = args.get(4).map_or(1e3, |c| c.parse().unwrap());
    let spec = ProblemSpec {
        exchanges: ExchangeRoles {
            product: product.clone(),
            ..Default::default()
        },
        max_knockouts: kappa,
        capacity,
        kinetics: Default::default(),
        reactor: Default::default(),
        costs: CostParams {
            product_molar_mass: acid_form_molar_mass(&product).unwrap_or(46.025),
            ..Default::default()
        },
        search: Default::default(),
        flux_selection: Default::default(),
    };
    let t = Instant::now();
    let p = Problem::new(&model, spec).unwrap();
    let sim = solve_simultaneous(&p).unwrap();
    println!(
        "sim {:?} {{{}}} specific {:?} visits {:?} ({:.1}s)",
        sim.status,
        sim.knockouts.label(),
        sim.specific_cost(),
        sim.visits,
        t.elapsed().as_secs_f64()
    );
    if let (Some(d), Some(c), Some(f)) = (&sim.design, &sim.cost, &sim.flux) {
        println!(
            "  growth {:.4} vP {:.3} vO2 {:.3} pH {:.3} cbio {:.3} nR {} VR {:.5} P/V {:.1} W/m3 OUR {:.4} mol/L/h substrate share {:.3}",
            f.growth,
            f.product_secretion,
            f.oxygen_uptake,
            d.design_point.ph,
            d.design_point.biomass_concentration,
            d.design_point.reactors,
            d.reactor_volume,
            d.specific_power,
            d.oxygen_uptake_rate / 31.998,
            c.substrate_share()
        );
    }
    let seq = solve_sequential(&p).unwrap();
    println!(
        "seq optknock {{{}}} vP {:.3} -> {:?} class {:?} ({:.1}s)",
        seq.optknock.knockouts.label(),
        seq.optknock.product,
        seq.solution().map(|s| s.specific_cost()),
        classify_outcome(&sim, &seq),
        t.elapsed().as_secs_f64()
    );
}
