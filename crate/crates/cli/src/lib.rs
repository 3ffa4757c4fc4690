//! Command-line front end: loads a run config, runs one study and writes
//! JSON/CSV reports into the output directory.

use bioknock::bilevel::{
    classify_outcome, solve_sequential, solve_simultaneous, BilevelError, OutcomeClass, Problem,
    SearchStrategy, SequentialResult, Solution,
};
use bioknock::config::{ConfigError, RunConfig};
use bioknock::fba::{FbaError, FluxBundle, FluxModel, GrowthOutcome, KnockoutSet};
use bioknock::model::{knockout_candidates, ModelError};
use bioknock::reactor::CostBreakdown;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SOLUTION_FILE: &str = "solution.json";
pub const SEARCH_LOG_FILE: &str = "search_log.csv";
pub const COST_FILE: &str = "cost_breakdown.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_JSON: &str = "sweep.json";
pub const FBA_JSON: &str = "fba.json";
pub const FLUX_CSV: &str = "fluxes.csv";
pub const DELETION_CSV: &str = "single_deletions.csv";

pub const KNOCKOUT_SWEEP: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
pub const CAPACITY_SWEEP: [f64; 5] = [1e2, 1e3, 1e4, 1e5, 1e6];

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bilevel(#[from] BilevelError),
    #[error(transparent)]
    Fba(#[from] FbaError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("malformed run output: {0}")]
    Report(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "bioknock",
    version,
    about = "Knockout search with bioreactor cost design"
)]
pub struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` of the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for candidate evaluation.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[arg(long, global = true, default_value_t = 50)]
    pub beam_width: usize,
    /// Budget levels the beam enumerates completely before narrowing.
    #[arg(long, global = true, default_value_t = 0)]
    pub beam_exact_levels: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Exhaustive,
    Pruned,
    Beam,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Knockouts,
    Capacity,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Wild-type FBA, one knockout set and all single deletions.
    Fba {
        /// Comma-separated reaction ids to delete.
        #[arg(long, value_delimiter = ',')]
        knockouts: Vec<String>,
    },
    /// Simultaneous knockout and reactor optimization.
    Optimize,
    /// OptKnock followed by reactor design, compared with the simultaneous run.
    Sequential,
    /// Repeat the optimization over knockout budgets or capacities.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values replacing the default range.
        #[arg(long, value_delimiter = ',')]
        points: Vec<f64>,
        /// Also run the sequential approach and classify each point.
        #[arg(long)]
        with_sequential: bool,
    },
    /// Cost breakdown per kg from a finished optimize or sequential run.
    Report { run_dir: PathBuf },
}

/// Parses `args` and runs the command; infeasible studies still return Ok.
pub fn run_with_args<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Ok(e.to_string().trim_end().to_string())
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| dispatch(cli)),
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<String, CliError> {
    if let Command::Report { run_dir } = &cli.command {
        return cmd_report(run_dir);
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(s) = cli.strategy {
        cfg.search.strategy = Some(match s {
            StrategyArg::Exhaustive => SearchStrategy::Exhaustive,
            StrategyArg::Pruned => SearchStrategy::Pruned,
            StrategyArg::Beam => SearchStrategy::Beam {
                width: cli.beam_width,
                exact_levels: cli.beam_exact_levels,
            },
        });
    }
    cfg.validate()?;
    match &cli.command {
        Command::Fba { knockouts } => cmd_fba(&cfg, knockouts),
        Command::Optimize => cmd_optimize(&cfg),
        Command::Sequential => cmd_sequential(&cfg),
        Command::Sweep {
            axis,
            points,
            with_sequential,
        } => cmd_sweep(&cfg, *axis, points, *with_sequential),
        Command::Report { .. } => unreachable!(),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: dir.join(name),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join(name), text).map_err(io)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

#[derive(Serialize)]
struct FluxSummary {
    knockouts: KnockoutSet,
    status: &'static str,
    growth: Option<f64>,
    substrate_uptake: Option<f64>,
    product_secretion: Option<f64>,
    oxygen_uptake: Option<f64>,
}

impl FluxSummary {
    fn new(k: KnockoutSet, outcome: &GrowthOutcome, bundle: Option<&FluxBundle>) -> Self {
        let status = match outcome {
            GrowthOutcome::Feasible { .. } => "feasible",
            GrowthOutcome::BelowThreshold { .. } => "below_threshold",
            GrowthOutcome::Infeasible => "no_growth",
        };
        FluxSummary {
            knockouts: k,
            status,
            growth: bundle.map(|b| b.growth),
            substrate_uptake: bundle.map(|b| b.substrate_uptake),
            product_secretion: bundle.map(|b| b.product_secretion),
            oxygen_uptake: bundle.map(|b| b.oxygen_uptake),
        }
    }
}

#[derive(Serialize)]
struct FbaReport {
    model: String,
    product: String,
    wild_type: FluxSummary,
    knockout: FluxSummary,
}

pub fn cmd_fba(cfg: &RunConfig, knockouts: &[String]) -> Result<String, CliError> {
    let model = cfg.load_model()?;
    let fm = FluxModel::new(&model, cfg.exchanges(), cfg.kinetics.clone())?;
    let k = KnockoutSet::new(knockouts.iter().cloned());
    for id in &k.deleted_ids {
        if model.reaction_index(id).is_none() {
            return Err(ModelError::UnknownReaction(id.clone()).into());
        }
    }
    let wt = fm.wild_type().clone();
    let outcome = fm.max_growth(&k)?;
    let knocked = fm.growth_bundle(&k)?;
    let report = FbaReport {
        model: model.id.clone(),
        product: cfg.product.clone(),
        wild_type: FluxSummary::new(
            KnockoutSet::empty(),
            &fm.max_growth(&KnockoutSet::empty())?,
            Some(&wt),
        ),
        knockout: FluxSummary::new(k.clone(), &outcome, knocked.as_ref()),
    };
    let mut flux_csv = String::from("reaction_id;wild_type;knockout\n");
    for (i, r) in model.reactions.iter().enumerate() {
        let _ = writeln!(
            flux_csv,
            "{};{};{}",
            r.id,
            wt.fluxes[i],
            fmt_opt(knocked.as_ref().map(|b| b.fluxes[i]))
        );
    }
    let mut deletions = String::from("reaction_id;status;v_bio\n");
    for id in knockout_candidates(&model, &cfg.search.candidates)?.candidate_ids {
        let (status, growth) = match fm.max_growth(&KnockoutSet::new([id.clone()]))? {
            GrowthOutcome::Feasible { growth, .. } => ("feasible", Some(growth)),
            GrowthOutcome::BelowThreshold { growth } => ("below_threshold", Some(growth)),
            GrowthOutcome::Infeasible => ("no_growth", None),
        };
        let _ = writeln!(deletions, "{id};{status};{}", fmt_opt(growth));
    }
    let dir = &cfg.output_dir;
    write(dir, FBA_JSON, &to_json(&report))?;
    write(dir, FLUX_CSV, &flux_csv)?;
    write(dir, DELETION_CSV, &deletions)?;
    Ok(format!(
        "wild-type growth {:.6} 1/h; {{{}}} -> {}",
        wt.growth,
        k.label(),
        match (&outcome, &knocked) {
            (_, Some(b)) => format!("growth {:.6} 1/h", b.growth),
            (GrowthOutcome::Infeasible, _) => "no steady state".into(),
            _ => "below growth threshold".into(),
        }
    ))
}

/// `category;USD_per_kg` rows grouped as investment, raw materials and utilities.
pub fn cost_csv(cost: Option<&CostBreakdown>) -> String {
    let mut out = String::from("category;USD_per_kg\n");
    if let Some(c) = cost {
        for (name, v) in c.per_kg() {
            let _ = writeln!(out, "{name};{v}");
        }
    }
    out
}

fn summary(s: &Solution) -> String {
    match s.specific_cost() {
        Some(c) => format!(
            "{:?}: knockouts {{{}}}, {:.4} USD/kg ({} sets evaluated)",
            s.status,
            s.knockouts.label(),
            c,
            s.visits.evaluated
        ),
        None => format!("infeasible ({} sets evaluated)", s.visits.evaluated),
    }
}

pub fn cmd_optimize(cfg: &RunConfig) -> Result<String, CliError> {
    let model = cfg.load_model()?;
    let p = Problem::new(&model, cfg.spec())?;
    let s = solve_simultaneous(&p)?;
    let dir = &cfg.output_dir;
    write(dir, SOLUTION_FILE, &to_json(&s))?;
    write(dir, SEARCH_LOG_FILE, &s.search_log_csv())?;
    write(dir, COST_FILE, &cost_csv(s.cost.as_ref()))?;
    Ok(summary(&s))
}

/// Outcome class, or the reason the pair contradicts the search guarantees.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Class(OutcomeClass),
    Inconsistent(String),
}

impl Outcome {
    fn classify(sim: &Solution, seq: &SequentialResult) -> Result<Outcome, CliError> {
        match classify_outcome(sim, seq) {
            Ok(c) => Ok(Outcome::Class(c)),
            Err(BilevelError::Inconsistent(m)) => Ok(Outcome::Inconsistent(m)),
            Err(e) => Err(e.into()),
        }
    }

    fn label(&self) -> String {
        match self {
            Outcome::Class(c) => format!("{c:?}"),
            Outcome::Inconsistent(_) => "inconsistent".into(),
        }
    }
}

#[derive(Serialize)]
pub struct Comparison<'a> {
    pub simultaneous: &'a Solution,
    pub sequential: &'a SequentialResult,
    pub outcome: Outcome,
}

pub fn cmd_sequential(cfg: &RunConfig) -> Result<String, CliError> {
    let model = cfg.load_model()?;
    let p = Problem::new(&model, cfg.spec())?;
    let sim = solve_simultaneous(&p)?;
    let seq = solve_sequential(&p)?;
    let outcome = Outcome::classify(&sim, &seq)?;
    let label = outcome.label();
    let dir = &cfg.output_dir;
    let report = Comparison {
        simultaneous: &sim,
        sequential: &seq,
        outcome,
    };
    write(dir, SOLUTION_FILE, &to_json(&report))?;
    write(dir, SEARCH_LOG_FILE, &sim.search_log_csv())?;
    write(
        dir,
        COST_FILE,
        &cost_csv(seq.solution().and_then(|s| s.cost.as_ref())),
    )?;
    Ok(format!(
        "sequential {{{}}} -> {}; simultaneous {}; outcome {}",
        seq.optknock.knockouts.label(),
        match seq.solution() {
            Some(s) => format!("{:.4} USD/kg", s.specific_cost().unwrap_or(f64::NAN)),
            None => "second stage infeasible".into(),
        },
        summary(&sim),
        label
    ))
}

#[derive(Serialize)]
struct SweepPoint {
    value: f64,
    simultaneous: Solution,
    #[serde(skip_serializing_if = "Option::is_none")]
    sequential: Option<SequentialResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome: Option<Outcome>,
}

const COST_COLUMNS: [&str; 6] = [
    "investment_reactor",
    "investment_compressor",
    "raw_materials_substrate",
    "raw_materials_ph_control",
    "utilities_cooling_agent",
    "utilities_power",
];

pub fn cmd_sweep(
    cfg: &RunConfig,
    axis: Axis,
    points: &[f64],
    with_sequential: bool,
) -> Result<String, CliError> {
    let values: Vec<f64> = match (points.is_empty(), axis) {
        (false, _) => points.to_vec(),
        (true, Axis::Knockouts) => KNOCKOUT_SWEEP.to_vec(),
        (true, Axis::Capacity) => CAPACITY_SWEEP.to_vec(),
    };
    if axis == Axis::Knockouts && values.iter().any(|v| !(v.fract() == 0.0 && *v >= 0.0)) {
        return Err(CliError::Usage(
            "knockout budgets must be non-negative integers".into(),
        ));
    }
    let model = cfg.load_model()?;
    let mut base = Problem::new(&model, cfg.spec())?;
    let mut rows = Vec::with_capacity(values.len());
    for &v in &values {
        // budget sweeps reuse evaluations; capacity sweeps only the flux caches
        let p = match axis {
            Axis::Knockouts => {
                base.spec.max_knockouts = v as usize;
                None
            }
            Axis::Capacity => Some(base.at_capacity(v)?),
        };
        let p = p.as_ref().unwrap_or(&base);
        let sim = solve_simultaneous(p)?;
        let (seq, outcome) = if with_sequential {
            let seq = solve_sequential(p)?;
            let class = Outcome::classify(&sim, &seq)?;
            (Some(seq), Some(class))
        } else {
            (None, None)
        };
        rows.push(SweepPoint {
            value: v,
            simultaneous: sim,
            sequential: seq,
            outcome,
        });
    }
    let axis_name = match axis {
        Axis::Knockouts => "max_knockouts",
        Axis::Capacity => "capacity",
    };
    let mut csv = format!("{axis_name};status;knockouts;specific_cost");
    for c in COST_COLUMNS {
        let _ = write!(csv, ";{c}");
    }
    csv.push_str(";substrate_share");
    if with_sequential {
        csv.push_str(";seq_knockouts;seq_status;seq_specific_cost;outcome");
    }
    csv.push('\n');
    for r in &rows {
        let s = &r.simultaneous;
        let status = serde_json::to_value(s.status).unwrap();
        let _ = write!(
            csv,
            "{};{};{};{}",
            r.value,
            status.as_str().unwrap(),
            s.knockouts.label(),
            fmt_opt(s.specific_cost())
        );
        let per_kg = s.cost.as_ref().map(|c| c.per_kg());
        for (i, _) in COST_COLUMNS.iter().enumerate() {
            let _ = write!(csv, ";{}", fmt_opt(per_kg.as_ref().map(|p| p[i].1)));
        }
        let _ = write!(csv, ";{}", fmt_opt(s.cost.as_ref().map(|c| c.substrate_share())));
        if let (Some(seq), Some(class)) = (&r.sequential, &r.outcome) {
            let (status, cost) = match seq.solution() {
                Some(q) => ("feasible", q.specific_cost()),
                None => ("infeasible", None),
            };
            let _ = write!(
                csv,
                ";{};{};{};{}",
                seq.optknock.knockouts.label(),
                status,
                fmt_opt(cost),
                class.label()
            );
        }
        csv.push('\n');
    }
    let dir = &cfg.output_dir;
    write(dir, SWEEP_CSV, &csv)?;
    write(dir, SWEEP_JSON, &to_json(&rows))?;
    let mut msg = String::new();
    for r in &rows {
        let _ = writeln!(msg, "{axis_name} {}: {}", r.value, summary(&r.simultaneous));
    }
    Ok(msg.trim_end().to_string())
}

pub fn cmd_report(run_dir: &Path) -> Result<String, CliError> {
    let path = run_dir.join(SOLUTION_FILE);
    let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io { path, source })?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Report(e.to_string()))?;
    // optimize writes a Solution; sequential nests the second-stage solution
    let cost = if v.get("cost").is_some() {
        v.get("cost")
    } else if let Some(seq) = v.get("sequential") {
        seq.pointer("/second_stage/solution/cost")
    } else {
        return Err(CliError::Report(format!(
            "{} holds no solution",
            run_dir.display()
        )));
    };
    let cost: Option<CostBreakdown> = match cost {
        None | Some(serde_json::Value::Null) => None,
        Some(c) => Some(serde_json::from_value(c.clone()).map_err(|e| CliError::Report(e.to_string()))?),
    };
    write(run_dir, COST_FILE, &cost_csv(cost.as_ref()))?;
    Ok(match cost {
        Some(c) => format!(
            "{:.4} USD/kg, substrate share {:.3}",
            c.specific_cost,
            c.substrate_share()
        ),
        None => "no feasible design; empty cost breakdown".into(),
    })
}
