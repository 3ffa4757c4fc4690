//! Knockout search over the decomposed bilevel problem.
//!
//! Each knockout set is evaluated independently: growth LP, flux selection at
//! the growth optimum, then the cheapest reactor design per flux state. Sets
//! are evaluated in parallel and reduced sequentially in enumeration order, so
//! the result does not depend on the thread count.

use crate::fba::{
    ExchangeRoles, FbaError, FluxBundle, FluxModel, FluxSelection, GrowthOutcome, KineticsParams, KnockoutSet,
};
use crate::model::{knockout_candidates, CandidateConfig, MetabolicModel, ModelError};
use crate::reactor::{
    cost_breakdown, evaluate_design, optimize_design, CostBreakdown, CostParams, OptimizedDesign,
    ReactorDesign, ReactorError, ReactorParams,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::{Arc, RwLock};

/// Relative tolerance for "same objective value".
pub const OBJECTIVE_REL_TOL: f64 = 1e-6;
pub const SEARCH_LOG_HEADER: &str = "knockout_ids;status;v_bio;v_P;best_hourly_cost;reason";

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum BilevelError {
    #[error(transparent)]
    Fba(#[from] FbaError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Reactor(#[from] ReactorError),
    #[error("invalid problem: {0}")]
    Spec(String),
    #[error("inconsistent comparison: {0}")]
    Inconsistent(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SearchStrategy {
    /// Every subset up to the budget.
    Exhaustive,
    /// Exhaustive, skipping supersets of sets that cannot grow enough.
    Pruned,
    /// Pruned enumeration up to `exact_levels` knockouts, then level-wise
    /// expansion of the `width` best sets of the previous level.
    Beam {
        width: usize,
        #[serde(default)]
        exact_levels: usize,
    },
}

impl SearchStrategy {
    pub fn default_for(max_knockouts: usize) -> SearchStrategy {
        match max_knockouts {
            0..=2 => SearchStrategy::Exhaustive,
            3 => SearchStrategy::Pruned,
            _ => SearchStrategy::Beam {
                width: 50,
                exact_levels: 3,
            },
        }
    }

    /// Whether a finished search with this budget has seen every admissible set.
    pub fn is_complete(&self, max_knockouts: usize) -> bool {
        match self {
            SearchStrategy::Beam { exact_levels, .. } => *exact_levels >= max_knockouts,
            _ => true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// None picks by budget: exhaustive up to 2, pruned at 3, beam above.
    pub strategy: Option<SearchStrategy>,
    pub candidates: CandidateConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub exchanges: ExchangeRoles,
    pub max_knockouts: usize,
    /// [kg/a]
    pub capacity: f64,
    pub kinetics: KineticsParams,
    pub reactor: ReactorParams,
    pub costs: CostParams,
    pub search: SearchConfig,
    pub flux_selection: FluxSelection,
}

impl ProblemSpec {
    pub fn strategy(&self) -> SearchStrategy {
        self.search
            .strategy
            .unwrap_or_else(|| SearchStrategy::default_for(self.max_knockouts))
    }

    pub fn validate(&self) -> Result<(), BilevelError> {
        if !(self.capacity.is_finite() && self.capacity > 0.0) {
            return Err(BilevelError::Spec(format!(
                "capacity must be positive, got {}",
                self.capacity
            )));
        }
        if let Some(SearchStrategy::Beam { width: 0, .. }) = self.search.strategy {
            return Err(BilevelError::Spec("beam width must be positive".into()));
        }
        if let FluxSelection::Scan { points: 0 } = self.flux_selection {
            return Err(BilevelError::Spec("scan needs at least one point".into()));
        }
        self.kinetics.validate()?;
        self.reactor.validate()?;
        self.costs.validate()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStatus {
    Feasible,
    DesignInfeasible,
    BelowThreshold,
    NoGrowth,
    NumericalFailure,
}

impl EvalStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvalStatus::Feasible => "feasible",
            EvalStatus::DesignInfeasible => "design_infeasible",
            EvalStatus::BelowThreshold => "below_threshold",
            EvalStatus::NoGrowth => "no_growth",
            EvalStatus::NumericalFailure => "numerical_failure",
        }
    }

    /// Growth cannot recover by deleting more reactions.
    fn is_dead(&self) -> bool {
        matches!(self, EvalStatus::BelowThreshold | EvalStatus::NoGrowth)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub flux: FluxBundle,
    pub design: ReactorDesign,
    pub cost: CostBreakdown,
}

/// Outcome of one knockout set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub knockouts: KnockoutSet,
    pub status: EvalStatus,
    pub growth: Option<f64>,
    pub product: Option<f64>,
    pub reason: String,
    pub best: Option<Box<Candidate>>,
}

impl Evaluation {
    pub fn hourly_cost(&self) -> Option<f64> {
        self.best.as_ref().map(|c| c.cost.hourly_total)
    }

    fn csv_row(&self, out: &mut String) {
        let num = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{};{};{};{};{};{}",
            self.knockouts.label(),
            self.status.as_str(),
            num(self.growth),
            num(self.product),
            num(self.hourly_cost()),
            self.reason.replace(';', ",")
        );
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitCounts {
    pub evaluated: usize,
    pub pruned: usize,
    pub levels: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionStatus {
    Optimal,
    Feasible,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub product: String,
    pub max_knockouts: usize,
    pub capacity: f64,
    pub strategy: SearchStrategy,
    pub status: SolutionStatus,
    pub knockouts: KnockoutSet,
    pub flux: Option<FluxBundle>,
    pub design: Option<ReactorDesign>,
    pub cost: Option<CostBreakdown>,
    pub visits: VisitCounts,
    /// Evaluated sets per status / reason.
    pub reasons: BTreeMap<String, usize>,
    #[serde(skip)]
    pub search_log: Vec<Evaluation>,
}

impl Solution {
    pub fn is_feasible(&self) -> bool {
        self.status != SolutionStatus::Infeasible
    }

    pub fn hourly_cost(&self) -> Option<f64> {
        self.cost.as_ref().map(|c| c.hourly_total)
    }

    pub fn specific_cost(&self) -> Option<f64> {
        self.cost.as_ref().map(|c| c.specific_cost)
    }

    pub fn search_log_csv(&self) -> String {
        search_log_csv(&self.search_log)
    }
}

pub fn search_log_csv(log: &[Evaluation]) -> String {
    let mut out = String::with_capacity(64 * (log.len() + 1));
    out.push_str(SEARCH_LOG_HEADER);
    out.push('\n');
    for e in log {
        e.csv_row(&mut out);
    }
    out
}

/// A network, a target product and everything needed to cost a knockout set.
#[derive(Debug)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub flux: Arc<FluxModel>,
    pub candidates: Vec<String>,
    reactor: ReactorParams,
    /// Evaluations do not depend on the knockout budget, so budget sweeps share them.
    evaluations: RwLock<HashMap<KnockoutSet, Evaluation>>,
}

impl Problem {
    pub fn new(model: &MetabolicModel, spec: ProblemSpec) -> Result<Problem, BilevelError> {
        spec.validate()?;
        let flux = FluxModel::new(model, spec.exchanges.clone(), spec.kinetics.clone())?;
        let candidates = knockout_candidates(model, &spec.search.candidates)?.candidate_ids;
        let reactor = spec.reactor.for_capacity(spec.capacity);
        Ok(Problem {
            spec,
            flux: Arc::new(flux),
            candidates,
            reactor,
            evaluations: RwLock::new(HashMap::new()),
        })
    }

    /// Same network and candidates at another capacity; flux caches are shared.
    pub fn at_capacity(&self, capacity: f64) -> Result<Problem, BilevelError> {
        let mut spec = self.spec.clone();
        spec.capacity = capacity;
        spec.validate()?;
        Ok(Problem {
            reactor: spec.reactor.for_capacity(capacity),
            spec,
            flux: Arc::clone(&self.flux),
            candidates: self.candidates.clone(),
            evaluations: RwLock::new(HashMap::new()),
        })
    }

    /// Reactor parameters after the capacity-dependent size limits.
    pub fn reactor_params(&self) -> &ReactorParams {
        &self.reactor
    }

    fn kinetics(&self) -> &KineticsParams {
        &self.flux.kinetics
    }

    fn check_knockouts(&self, k: &KnockoutSet) -> Result<(), BilevelError> {
        if k.len() > self.spec.max_knockouts {
            return Err(BilevelError::Spec(format!(
                "{} knockouts exceed the budget of {}",
                k.len(),
                self.spec.max_knockouts
            )));
        }
        for id in &k.deleted_ids {
            if self.candidates.binary_search(id).is_err() {
                return Err(BilevelError::Spec(format!("{id} is not a knockout candidate")));
            }
        }
        Ok(())
    }

    fn failure(k: &KnockoutSet, e: impl std::fmt::Display) -> Evaluation {
        Evaluation {
            knockouts: k.clone(),
            status: EvalStatus::NumericalFailure,
            growth: None,
            product: None,
            reason: e.to_string(),
            best: None,
        }
    }

    /// Cheapest design over the selected flux states of `k`.
    pub fn evaluate(&self, k: &KnockoutSet) -> Evaluation {
        if let Some(e) = self.evaluations.read().unwrap().get(k) {
            return e.clone();
        }
        let e = self.evaluate_uncached(k);
        self.evaluations.write().unwrap().insert(k.clone(), e.clone());
        e
    }

    fn evaluate_uncached(&self, k: &KnockoutSet) -> Evaluation {
        let mut ev = Evaluation {
            knockouts: k.clone(),
            status: EvalStatus::NoGrowth,
            growth: None,
            product: None,
            reason: String::new(),
            best: None,
        };
        let growth = match self.flux.max_growth(k) {
            Err(e) => return Self::failure(k, e),
            Ok(GrowthOutcome::Infeasible) => {
                ev.reason = "no steady state".into();
                return ev;
            }
            Ok(GrowthOutcome::BelowThreshold { growth }) => {
                ev.status = EvalStatus::BelowThreshold;
                ev.growth = Some(growth);
                ev.reason = "growth below threshold".into();
                return ev;
            }
            Ok(GrowthOutcome::Feasible { growth, .. }) => growth,
        };
        ev.growth = Some(growth);
        ev.status = EvalStatus::DesignInfeasible;
        let kin = self.kinetics();
        // growth too fast at every pH: no flux state can change that
        let best_gamma = crate::reactor::cpm_gamma(
            self.reactor
                .ph_opt
                .clamp(self.reactor.ph_lower, self.reactor.ph_upper),
            &self.reactor,
        );
        if let Ok(g) = best_gamma {
            if !(growth < kin.max_growth_at_optimal_ph * g) {
                ev.reason = ReactorError::Infeasible(crate::reactor::InfeasibleReason::GrowthAboveMaximum)
                    .to_string();
                return ev;
            }
        }
        let bundles = match self.flux.select_fluxes(k, growth, self.spec.flux_selection) {
            Ok(b) => b,
            Err(e) => return Self::failure(k, e),
        };
        ev.product = bundles.first().map(|b| b.product_secretion);
        let mut first_reason: Option<String> = None;
        for b in bundles {
            match optimize_design(&b, kin, &self.reactor, &self.spec.costs, self.spec.capacity) {
                Ok(OptimizedDesign { design, cost }) => {
                    if ev.hourly_cost().map_or(true, |c| cost.hourly_total < c) {
                        ev.product = Some(b.product_secretion);
                        ev.best = Some(Box::new(Candidate {
                            flux: b,
                            design,
                            cost,
                        }));
                    }
                }
                Err(e) => {
                    first_reason.get_or_insert_with(|| e.to_string());
                }
            }
        }
        if ev.best.is_some() {
            ev.status = EvalStatus::Feasible;
        } else {
            ev.reason = first_reason.unwrap_or_default();
        }
        ev
    }

    fn evaluate_all(&self, sets: &[KnockoutSet]) -> Vec<Evaluation> {
        sets.par_iter().map(|k| self.evaluate(k)).collect()
    }

    /// Re-derives the design and cost of `s` from its flux state and design point.
    pub fn verify(&self, s: &Solution) -> Result<(), BilevelError> {
        let (Some(flux), Some(design), Some(cost)) = (&s.flux, &s.design, &s.cost) else {
            return Ok(());
        };
        let again = evaluate_design(
            flux,
            &design.design_point,
            self.kinetics(),
            &self.reactor,
            &self.spec.costs,
            self.spec.capacity,
        )?;
        if &again != design || &cost_breakdown(&again, &self.spec.costs) != cost {
            return Err(BilevelError::Inconsistent(format!(
                "design for {{{}}} does not re-evaluate to the reported values",
                s.knockouts.label()
            )));
        }
        if flux.growth >= design.max_growth {
            return Err(BilevelError::Inconsistent(
                "growth above inhibited maximum".into(),
            ));
        }
        Ok(())
    }
}

fn combinations(items: &[String], size: usize, mut f: impl FnMut(KnockoutSet)) {
    let n = items.len();
    if size > n {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        f(KnockoutSet::new(idx.iter().map(|&i| items[i].clone())));
        let mut i = size;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - size {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn has_dead_subset(k: &KnockoutSet, dead: &HashSet<KnockoutSet>) -> bool {
    if dead.is_empty() {
        return false;
    }
    k.deleted_ids.iter().any(|id| {
        let mut sub = k.clone();
        sub.deleted_ids.remove(id);
        dead.contains(&sub)
    })
}

/// Level-wise enumeration shared by the design search and OptKnock.
/// `rank` orders seeds for the beam (smaller is better, None drops the set).
fn search<T, E, R>(
    candidates: &[String],
    max_knockouts: usize,
    strategy: SearchStrategy,
    eval: E,
    is_dead: impl Fn(&T) -> bool,
    rank: R,
) -> (Vec<T>, VisitCounts)
where
    T: Send,
    E: Fn(&[KnockoutSet]) -> Vec<T>,
    R: Fn(&T) -> Option<(u8, f64)>,
    T: AsRef<KnockoutSet>,
{
    let mut log: Vec<T> = Vec::new();
    let mut visits = VisitCounts::default();
    let mut dead: HashSet<KnockoutSet> = HashSet::new();
    let mut seeds: Vec<KnockoutSet> = Vec::new();
    for level in 0..=max_knockouts {
        let mut sets: Vec<KnockoutSet> = Vec::new();
        match strategy {
            SearchStrategy::Exhaustive => combinations(candidates, level, |k| sets.push(k)),
            SearchStrategy::Pruned => combinations(candidates, level, |k| {
                if has_dead_subset(&k, &dead) {
                    dead.insert(k);
                    visits.pruned += 1;
                } else {
                    sets.push(k);
                }
            }),
            SearchStrategy::Beam { exact_levels, .. } => {
                if level <= exact_levels {
                    combinations(candidates, level, |k| {
                        if has_dead_subset(&k, &dead) {
                            dead.insert(k);
                            visits.pruned += 1;
                        } else {
                            sets.push(k);
                        }
                    })
                } else {
                    let mut next: BTreeSet<KnockoutSet> = BTreeSet::new();
                    for s in &seeds {
                        for c in candidates {
                            if !s.deleted_ids.contains(c) {
                                next.insert(s.with(c));
                            }
                        }
                    }
                    for k in next {
                        if has_dead_subset(&k, &dead) {
                            dead.insert(k);
                            visits.pruned += 1;
                        } else {
                            sets.push(k);
                        }
                    }
                }
            }
        }
        if sets.is_empty() {
            break;
        }
        visits.levels = level + 1;
        visits.evaluated += sets.len();
        let results = eval(&sets);
        if let SearchStrategy::Beam { width, .. } = strategy {
            let mut ranked: Vec<((u8, f64), &KnockoutSet)> = results
                .iter()
                .filter_map(|r| rank(r).map(|key| (key, r.as_ref())))
                .collect();
            ranked.sort_by(|a, b| {
                a.0 .0
                    .cmp(&b.0 .0)
                    .then(a.0 .1.total_cmp(&b.0 .1))
                    .then_with(|| a.1.cmp(b.1))
            });
            seeds = ranked.into_iter().take(width).map(|r| r.1.clone()).collect();
        }
        for r in &results {
            if is_dead(r) {
                dead.insert(r.as_ref().clone());
            }
        }
        log.extend(results);
    }
    (log, visits)
}

impl AsRef<KnockoutSet> for Evaluation {
    fn as_ref(&self) -> &KnockoutSet {
        &self.knockouts
    }
}

fn reason_histogram(log: &[Evaluation]) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for e in log {
        let key = if e.reason.is_empty() {
            e.status.as_str().to_string()
        } else {
            format!("{}: {}", e.status.as_str(), e.reason)
        };
        *h.entry(key).or_insert(0) += 1;
    }
    h
}

fn solution_from(
    p: &Problem,
    strategy: SearchStrategy,
    log: Vec<Evaluation>,
    visits: VisitCounts,
) -> Solution {
    // log order is (size, lexicographic ids), so a strict comparison keeps
    // the smaller and lexicographically first set among equal costs
    let mut best: Option<&Evaluation> = None;
    for e in &log {
        if let Some(c) = e.hourly_cost() {
            if best.map_or(true, |b| c < b.hourly_cost().unwrap()) {
                best = Some(e);
            }
        }
    }
    let status = match (best, strategy.is_complete(p.spec.max_knockouts)) {
        (None, _) => SolutionStatus::Infeasible,
        (Some(_), true) => SolutionStatus::Optimal,
        (Some(_), false) => SolutionStatus::Feasible,
    };
    let (knockouts, cand) = match best {
        Some(e) => (e.knockouts.clone(), e.best.as_deref().cloned()),
        None => (KnockoutSet::empty(), None),
    };
    Solution {
        product: p.spec.exchanges.product.clone(),
        max_knockouts: p.spec.max_knockouts,
        capacity: p.spec.capacity,
        strategy,
        status,
        knockouts,
        flux: cand.as_ref().map(|c| c.flux.clone()),
        design: cand.as_ref().map(|c| c.design.clone()),
        cost: cand.map(|c| c.cost),
        visits,
        reasons: reason_histogram(&log),
        search_log: log,
    }
}

/// Minimum hourly cost over knockout sets within the budget.
pub fn solve_simultaneous(p: &Problem) -> Result<Solution, BilevelError> {
    let strategy = p.spec.strategy();
    let (log, visits) = search(
        &p.candidates,
        p.spec.max_knockouts,
        strategy,
        |sets| p.evaluate_all(sets),
        |e: &Evaluation| e.status.is_dead(),
        |e: &Evaluation| match (e.status, e.hourly_cost(), e.growth) {
            (EvalStatus::Feasible, Some(c), _) => Some((0, c)),
            // closer to the inhibited growth limit ranks higher
            (EvalStatus::DesignInfeasible, _, Some(g)) => Some((1, g)),
            _ => None,
        },
    );
    let s = solution_from(p, strategy, log, visits);
    p.verify(&s)?;
    Ok(s)
}

/// Growth and best product flux of one OptKnock candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductEvaluation {
    pub knockouts: KnockoutSet,
    pub status: EvalStatus,
    pub growth: Option<f64>,
    pub product: Option<f64>,
}

impl AsRef<KnockoutSet> for ProductEvaluation {
    fn as_ref(&self) -> &KnockoutSet {
        &self.knockouts
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptKnockResult {
    pub knockouts: KnockoutSet,
    pub growth: f64,
    pub product: f64,
    pub visits: VisitCounts,
}

fn product_evaluation(fm: &FluxModel, k: &KnockoutSet) -> ProductEvaluation {
    let mut out = ProductEvaluation {
        knockouts: k.clone(),
        status: EvalStatus::NumericalFailure,
        growth: None,
        product: None,
    };
    match fm.max_growth(k) {
        Ok(GrowthOutcome::Infeasible) => out.status = EvalStatus::NoGrowth,
        Ok(GrowthOutcome::BelowThreshold { growth }) => {
            out.status = EvalStatus::BelowThreshold;
            out.growth = Some(growth);
        }
        Ok(GrowthOutcome::Feasible { growth, .. }) => {
            out.growth = Some(growth);
            if let Ok((_, hi)) = fm.flux_range(k, &fm.roles.product, growth) {
                out.status = EvalStatus::Feasible;
                out.product = Some(hi);
            }
        }
        Err(_) => {}
    }
    out
}

/// Knockouts maximising product flux among growth-optimal states.
pub fn solve_optknock(
    fm: &FluxModel,
    candidates: &[String],
    max_knockouts: usize,
    strategy: SearchStrategy,
) -> Result<OptKnockResult, BilevelError> {
    let (log, visits) = search(
        candidates,
        max_knockouts,
        strategy,
        |sets| sets.par_iter().map(|k| product_evaluation(fm, k)).collect(),
        |e: &ProductEvaluation| e.status.is_dead(),
        |e: &ProductEvaluation| e.product.map(|v| (0, -v)),
    );
    let mut best: Option<&ProductEvaluation> = None;
    for e in &log {
        if let (Some(v), Some(_)) = (e.product, e.growth) {
            let better = match best.and_then(|b| b.product) {
                None => true,
                Some(b) => v > b + 1e-9 * b.abs().max(1.0),
            };
            if better {
                best = Some(e);
            }
        }
    }
    let best = best.ok_or_else(|| {
        BilevelError::Fba(FbaError::WildTypeInfeasible(
            "no knockout set keeps growth".into(),
        ))
    })?;
    Ok(OptKnockResult {
        knockouts: best.knockouts.clone(),
        growth: best.growth.unwrap(),
        product: best.product.unwrap(),
        visits,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SecondStage {
    Feasible { solution: Box<Solution> },
    Infeasible { knockouts: KnockoutSet, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequentialResult {
    pub optknock: OptKnockResult,
    pub second_stage: SecondStage,
}

impl SequentialResult {
    pub fn solution(&self) -> Option<&Solution> {
        match &self.second_stage {
            SecondStage::Feasible { solution } => Some(solution),
            SecondStage::Infeasible { .. } => None,
        }
    }
}

/// OptKnock first, then the cheapest design for those knockouts.
pub fn solve_sequential(p: &Problem) -> Result<SequentialResult, BilevelError> {
    let strategy = p.spec.strategy();
    let optknock = solve_optknock(&p.flux, &p.candidates, p.spec.max_knockouts, strategy)?;
    p.check_knockouts(&optknock.knockouts)?;
    let ev = p.evaluate(&optknock.knockouts);
    let visits = VisitCounts {
        evaluated: 1,
        pruned: 0,
        levels: 1,
    };
    let second_stage = if ev.status == EvalStatus::Feasible {
        let mut s = solution_from(p, SearchStrategy::Exhaustive, vec![ev], visits);
        s.strategy = strategy;
        p.verify(&s)?;
        SecondStage::Feasible {
            solution: Box::new(s),
        }
    } else {
        SecondStage::Infeasible {
            knockouts: ev.knockouts.clone(),
            reason: if ev.reason.is_empty() {
                ev.status.as_str().to_string()
            } else {
                ev.reason.clone()
            },
        }
    };
    Ok(SequentialResult {
        optknock,
        second_stage,
    })
}

/// Comparison classes of a simultaneous and a sequential run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeClass {
    /// Same knockouts.
    A,
    /// Different knockouts, same objective value.
    B,
    /// Different knockouts, simultaneous cheaper.
    C,
    /// Sequential second stage infeasible, simultaneous feasible.
    D,
    /// Both infeasible.
    E,
}

pub fn classify_outcome(sim: &Solution, seq: &SequentialResult) -> Result<OutcomeClass, BilevelError> {
    match (sim.is_feasible(), seq.solution()) {
        (false, None) => Ok(OutcomeClass::E),
        (true, None) => Ok(OutcomeClass::D),
        (false, Some(_)) => Err(BilevelError::Inconsistent(
            "sequential feasible while simultaneous is infeasible".into(),
        )),
        (true, Some(s)) => {
            if s.knockouts == sim.knockouts {
                return Ok(OutcomeClass::A);
            }
            let (a, b) = (sim.hourly_cost().unwrap(), s.hourly_cost().unwrap());
            if (a - b).abs() <= OBJECTIVE_REL_TOL * a.abs().max(b.abs()) {
                Ok(OutcomeClass::B)
            } else if a < b {
                Ok(OutcomeClass::C)
            } else {
                Err(BilevelError::Inconsistent(format!(
                    "sequential cost {b} below simultaneous cost {a}"
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn combinations_in_lexicographic_order() {
        let items = ids(&["a", "b", "c", "d"]);
        let mut got = Vec::new();
        combinations(&items, 2, |k| got.push(k.label()));
        assert_eq!(got, ["a,b", "a,c", "a,d", "b,c", "b,d", "c,d"]);
        let mut n = 0;
        combinations(&items, 0, |k| {
            assert!(k.is_empty());
            n += 1
        });
        assert_eq!(n, 1);
        combinations(&items, 4, |_| n += 1);
        assert_eq!(n, 2);
        combinations(&items, 5, |_| n += 1);
        assert_eq!(n, 2);
    }

    #[derive(Debug)]
    struct Toy(KnockoutSet, bool, f64);
    impl AsRef<KnockoutSet> for Toy {
        fn as_ref(&self) -> &KnockoutSet {
            &self.0
        }
    }

    fn toy_eval(sets: &[KnockoutSet]) -> Vec<Toy> {
        sets.iter()
            .map(|k| {
                let dead = k.deleted_ids.contains("a");
                let score = k.deleted_ids.iter().map(|s| s.as_bytes()[0] as f64).sum();
                Toy(k.clone(), dead, score)
            })
            .collect()
    }

    #[test]
    fn budget_one_over_three_candidates() {
        let c = ids(&["a", "b", "c"]);
        let (log, v) = search(
            &c,
            1,
            SearchStrategy::Exhaustive,
            toy_eval,
            |t| t.1,
            |t| Some((0, t.2)),
        );
        assert_eq!(log.len(), 4);
        assert_eq!(v.evaluated, 4);
    }

    #[test]
    fn pruning_skips_supersets_of_dead_sets() {
        let c = ids(&["a", "b", "c"]);
        let (log, v) = search(
            &c,
            3,
            SearchStrategy::Pruned,
            toy_eval,
            |t| t.1,
            |t| Some((0, t.2)),
        );
        assert!(log
            .iter()
            .all(|t| t.0.len() <= 1 || !t.0.deleted_ids.contains("a")));
        assert_eq!(v.pruned, 3);
        assert_eq!(log.len(), 8 - 3);
    }

    #[test]
    fn wide_beam_matches_pruned_visits() {
        let c = ids(&["a", "b", "c", "d", "e"]);
        let key = |t: &Toy| if t.1 { None } else { Some((0, t.2)) };
        let (pruned, _) = search(&c, 3, SearchStrategy::Pruned, toy_eval, |t| t.1, key);
        let (beam, _) = search(
            &c,
            3,
            SearchStrategy::Beam {
                width: 1000,
                exact_levels: 0,
            },
            toy_eval,
            |t| t.1,
            key,
        );
        let a: BTreeSet<_> = pruned.iter().map(|t| t.0.clone()).collect();
        let b: BTreeSet<_> = beam.iter().map(|t| t.0.clone()).collect();
        assert_eq!(a, b);
        let (narrow, v) = search(
            &c,
            3,
            SearchStrategy::Beam {
                width: 1,
                exact_levels: 0,
            },
            toy_eval,
            |t| t.1,
            key,
        );
        assert!(narrow.len() < beam.len());
        assert_eq!(v.levels, 4);
        let (mixed, _) = search(
            &c,
            3,
            SearchStrategy::Beam {
                width: 1,
                exact_levels: 2,
            },
            toy_eval,
            |t| t.1,
            key,
        );
        let small = |l: &[Toy]| {
            l.iter()
                .filter(|t| t.0.len() <= 2)
                .map(|t| t.0.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(small(&mixed), small(&pruned));
        assert!(mixed.len() < pruned.len());
        assert!(!SearchStrategy::Beam {
            width: 1,
            exact_levels: 2
        }
        .is_complete(3));
        assert!(SearchStrategy::Beam {
            width: 1,
            exact_levels: 3
        }
        .is_complete(3));
    }

    #[test]
    fn default_strategy_by_budget() {
        assert_eq!(SearchStrategy::default_for(2), SearchStrategy::Exhaustive);
        assert_eq!(SearchStrategy::default_for(3), SearchStrategy::Pruned);
        assert_eq!(
            SearchStrategy::default_for(4),
            SearchStrategy::Beam {
                width: 50,
                exact_levels: 3
            }
        );
    }
}
