//! Flux balance analysis on the irreversible model.

use crate::lp::{
    duality_gap, solve_lp_from, Basis, LpError, LpProblem, LpSolution, LpStatus, RowKind, ToleranceSet,
};
use crate::model::{split_reversible, IonAnnotation, IrreversibleModel, MetabolicModel, ModelError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

/// Uptake floor used when minimising oxygen so that aerobic optima are preferred.
pub const OXYGEN_FLOOR: f64 = 1e-6;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum FbaError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("wild-type model is infeasible ({0})")]
    WildTypeInfeasible(String),
    #[error("growth pinned at {0} is infeasible")]
    InfeasiblePin(f64),
    #[error("invalid kinetics: {0}")]
    Kinetics(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KineticsParams {
    /// Monod constant, g/L.
    pub monod_constant: f64,
    /// Maximum growth rate at optimal pH, 1/h.
    pub max_growth_at_optimal_ph: f64,
    /// Knockout designs must keep this fraction of wild-type growth.
    pub growth_threshold_fraction: f64,
    /// mmol/gCDW/h.
    pub max_substrate_uptake: f64,
    /// Lower bound on maintenance ATP, mmol/gCDW/h.
    pub min_maintenance_atp: f64,
    /// Filled from the wild-type solve.
    #[serde(skip_deserializing, skip_serializing_if = "Option::is_none")]
    pub wild_type_growth: Option<f64>,
}

impl Default for KineticsParams {
    fn default() -> Self {
        KineticsParams {
            monod_constant: 0.044,
            max_growth_at_optimal_ph: 0.73,
            growth_threshold_fraction: 0.1,
            max_substrate_uptake: 10.0,
            min_maintenance_atp: 6.86,
            wild_type_growth: None,
        }
    }
}

impl KineticsParams {
    pub fn validate(&self) -> Result<(), FbaError> {
        let checks = [
            ("monod_constant", self.monod_constant),
            ("max_growth_at_optimal_ph", self.max_growth_at_optimal_ph),
            ("growth_threshold_fraction", self.growth_threshold_fraction),
            ("max_substrate_uptake", self.max_substrate_uptake),
            ("min_maintenance_atp", self.min_maintenance_atp),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(FbaError::Kinetics(format!("{name} must be positive, got {v}")));
            }
        }
        if self.growth_threshold_fraction >= 1.0 {
            return Err(FbaError::Kinetics(
                "growth_threshold_fraction must be below 1".into(),
            ));
        }
        Ok(())
    }
}

/// Canonical, ordered set of deleted reactions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KnockoutSet {
    pub deleted_ids: BTreeSet<String>,
}

impl KnockoutSet {
    pub fn new<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        KnockoutSet {
            deleted_ids: ids.into_iter().map(Into::into).collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.deleted_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deleted_ids.is_empty()
    }

    pub fn label(&self) -> String {
        self.deleted_ids.iter().cloned().collect::<Vec<_>>().join(",")
    }

    pub fn with(&self, id: &str) -> Self {
        let mut k = self.clone();
        k.deleted_ids.insert(id.to_string());
        k
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxBundle {
    /// Net flux per source reaction, mmol/gCDW/h.
    pub fluxes: Vec<f64>,
    pub growth: f64,
    pub substrate_uptake: f64,
    pub product_secretion: f64,
    pub oxygen_uptake: f64,
    pub ion_net: f64,
    pub knockouts: KnockoutSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FluxSelection {
    MaxProduct,
    Scan { points: usize },
}

impl Default for FluxSelection {
    fn default() -> Self {
        FluxSelection::Scan { points: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GrowthOutcome {
    Feasible { growth: f64, columns: Vec<f64> },
    Infeasible,
    BelowThreshold { growth: f64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExchangeRoles {
    pub substrate: String,
    pub oxygen: String,
    pub product: String,
    pub ions: IonAnnotation,
}

impl Default for ExchangeRoles {
    fn default() -> Self {
        ExchangeRoles {
            substrate: "EX_glc__D_e".into(),
            oxygen: "EX_o2_e".into(),
            product: "EX_for_e".into(),
            ions: IonAnnotation::core_defaults(),
        }
    }
}

/// Running record of duality gaps over every optimal solve.
#[derive(Debug, Default)]
pub struct LpAudit {
    solves: AtomicUsize,
    over_tolerance: AtomicUsize,
    max_gap_bits: AtomicU64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditSummary {
    pub optimal_solves: usize,
    pub over_tolerance: usize,
    pub max_gap: f64,
}

impl LpAudit {
    fn record(&self, gap: f64, tol: f64) {
        self.solves.fetch_add(1, Ordering::Relaxed);
        if !(gap <= tol) {
            self.over_tolerance.fetch_add(1, Ordering::Relaxed);
        }
        // non-negative floats order like their bit patterns
        self.max_gap_bits.fetch_max(gap.to_bits(), Ordering::Relaxed);
    }

    pub fn summary(&self) -> AuditSummary {
        AuditSummary {
            optimal_solves: self.solves.load(Ordering::Relaxed),
            over_tolerance: self.over_tolerance.load(Ordering::Relaxed),
            max_gap: f64::from_bits(self.max_gap_bits.load(Ordering::Relaxed)),
        }
    }
}

pub struct FluxModel {
    pub irr: IrreversibleModel,
    pub kinetics: KineticsParams,
    pub roles: ExchangeRoles,
    pub tolerances: ToleranceSet,
    base_lp: LpProblem,
    biomass: usize,
    substrate: usize,
    oxygen: usize,
    product: usize,
    acids: Vec<usize>,
    bases: Vec<usize>,
    wild_type: FluxBundle,
    wild_type_basis: Option<Arc<Basis>>,
    /// Growth outcome and optimal basis per knockout set.
    cache: RwLock<HashMap<KnockoutSet, (GrowthOutcome, Option<Arc<Basis>>)>>,
    /// Flux ranges keyed by knockout set, reaction and pinned growth bits.
    ranges: RwLock<HashMap<(KnockoutSet, usize, u64), (f64, f64)>>,
    audit: LpAudit,
}

impl std::fmt::Debug for FluxModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FluxModel")
            .field("model", &self.irr.base.id)
            .field("product", &self.roles.product)
            .field("wild_type_growth", &self.wild_type.growth)
            .finish()
    }
}

fn source_index(model: &MetabolicModel, id: &str) -> Result<usize, FbaError> {
    model
        .reaction_index(id)
        .ok_or_else(|| FbaError::Model(ModelError::UnknownReaction(id.to_string())))
}

impl FluxModel {
    /// Applies uptake and maintenance bounds, splits the model and solves the
    /// wild type (stored in `kinetics.wild_type_growth`).
    pub fn new(
        model: &MetabolicModel,
        roles: ExchangeRoles,
        kinetics: KineticsParams,
    ) -> Result<Self, FbaError> {
        Self::with_tolerances(model, roles, kinetics, ToleranceSet::default())
    }

    pub fn with_tolerances(
        model: &MetabolicModel,
        roles: ExchangeRoles,
        kinetics: KineticsParams,
        tolerances: ToleranceSet,
    ) -> Result<Self, FbaError> {
        kinetics.validate()?;
        roles.ions.validate(model)?;
        let mut m = model.clone();
        let sub = m.reaction(&roles.substrate)?.clone();
        m.set_bounds(
            &roles.substrate,
            -kinetics.max_substrate_uptake,
            sub.upper_bound.max(-kinetics.max_substrate_uptake),
        )?;
        let atpm_id = m.atpm_reaction_id.clone();
        let atpm = m.reaction(&atpm_id)?.clone();
        m.set_bounds(
            &atpm_id,
            kinetics.min_maintenance_atp,
            atpm.upper_bound.max(kinetics.min_maintenance_atp),
        )?;
        for id in [&roles.oxygen, &roles.product] {
            if !m.exchange_ids.contains(id.as_str()) {
                return Err(FbaError::Model(ModelError::Config(format!(
                    "{id} is not an exchange reaction"
                ))));
            }
        }
        let biomass = source_index(&m, &m.biomass_reaction_id)?;
        let substrate = source_index(&m, &roles.substrate)?;
        let oxygen = source_index(&m, &roles.oxygen)?;
        let product = source_index(&m, &roles.product)?;
        let acids = roles
            .ions
            .strong_acid_exchanges
            .iter()
            .map(|id| source_index(&m, id))
            .collect::<Result<_, _>>()?;
        let bases = roles
            .ions
            .strong_base_exchanges
            .iter()
            .map(|id| source_index(&m, id))
            .collect::<Result<_, _>>()?;
        let irr = split_reversible(Arc::new(m));
        let rows = irr.stoich.nrows();
        let base_lp = LpProblem::new(
            vec![0.0; irr.num_columns()],
            irr.stoich.clone(),
            vec![RowKind::Eq; rows],
            vec![0.0; rows],
            irr.lower(),
            irr.upper(),
        )?;
        let mut fm = FluxModel {
            irr,
            kinetics,
            roles,
            tolerances,
            base_lp,
            biomass,
            substrate,
            oxygen,
            product,
            acids,
            bases,
            wild_type: FluxBundle {
                fluxes: Vec::new(),
                growth: 0.0,
                substrate_uptake: 0.0,
                product_secretion: 0.0,
                oxygen_uptake: 0.0,
                ion_net: 0.0,
                knockouts: KnockoutSet::empty(),
            },
            wild_type_basis: None,
            cache: RwLock::new(HashMap::new()),
            ranges: RwLock::new(HashMap::new()),
            audit: LpAudit::default(),
        };
        let wt = fm.solve_growth(&KnockoutSet::empty())?;
        let (growth, columns, basis) = match wt {
            Some(v) => v,
            None => {
                return Err(FbaError::WildTypeInfeasible(
                    "no steady state meets the maintenance and uptake bounds".into(),
                ))
            }
        };
        if growth <= 0.0 {
            return Err(FbaError::WildTypeInfeasible("wild type cannot grow".into()));
        }
        fm.wild_type = fm.bundle(&columns, KnockoutSet::empty());
        fm.wild_type_basis = basis;
        fm.kinetics.wild_type_growth = Some(growth);
        Ok(fm)
    }

    /// Same network and wild type, different target product.
    pub fn for_product(&self, product: &str) -> Result<FluxModel, FbaError> {
        let mut roles = self.roles.clone();
        roles.product = product.to_string();
        let mut k = self.kinetics.clone();
        k.wild_type_growth = None;
        FluxModel::with_tolerances(&self.irr.base, roles, k, self.tolerances)
    }

    pub fn wild_type(&self) -> &FluxBundle {
        &self.wild_type
    }

    pub fn wild_type_growth(&self) -> f64 {
        self.wild_type.growth
    }

    pub fn growth_threshold(&self) -> f64 {
        self.kinetics.growth_threshold_fraction * self.wild_type.growth
    }

    pub fn audit(&self) -> AuditSummary {
        self.audit.summary()
    }

    pub fn biomass_index(&self) -> usize {
        self.biomass
    }

    pub fn product_index(&self) -> usize {
        self.product
    }

    fn solve(&self, p: &LpProblem, start: Option<&Basis>) -> Result<LpSolution, FbaError> {
        let s = solve_lp_from(p, &self.tolerances, start)?;
        if s.status == LpStatus::Optimal {
            let gap = duality_gap(p, &s)?;
            self.audit.record(gap, self.tolerances.gap_tol);
        }
        Ok(s)
    }

    /// Bounds of the irreversible model with `k` removed.
    pub fn apply_knockouts(&self, k: &KnockoutSet) -> Result<IrreversibleModel, FbaError> {
        let mut out = self.irr.clone();
        for id in &k.deleted_ids {
            let i = source_index(&out.base, id)?;
            for (col, _) in self.irr.net_terms(i) {
                out.columns[col].lower = 0.0;
                out.columns[col].upper = 0.0;
            }
        }
        Ok(out)
    }

    fn knocked_lp(&self, k: &KnockoutSet) -> Result<LpProblem, FbaError> {
        let mut p = self.base_lp.clone();
        for id in &k.deleted_ids {
            let i = source_index(&self.irr.base, id)?;
            for (col, _) in self.irr.net_terms(i) {
                p.lower[col] = 0.0;
                p.upper[col] = 0.0;
            }
        }
        Ok(p)
    }

    fn set_objective(&self, p: &mut LpProblem, source: usize, sign: f64) {
        p.objective.iter_mut().for_each(|c| *c = 0.0);
        for (col, s) in self.irr.net_terms(source) {
            p.objective[col] = sign * s;
        }
    }

    /// Returns false when the pin lies outside the biomass bounds.
    fn pin_growth(&self, p: &mut LpProblem, growth: f64) -> bool {
        let band = 1e-9 * growth.abs().max(1.0);
        let terms = self.irr.net_terms(self.biomass);
        if let [(col, s)] = terms.as_slice() {
            if *s > 0.0 {
                let lo = p.lower[*col].max(growth - band);
                let hi = p.upper[*col].min(growth + band);
                if lo > hi {
                    return false;
                }
                p.lower[*col] = lo;
                p.upper[*col] = hi;
                return true;
            }
        }
        p.push_row(&terms, RowKind::Ge, growth - band);
        p.push_row(&terms, RowKind::Le, growth + band);
        true
    }

    /// Growth LP warm-started from the wild-type basis.
    fn solve_growth(&self, k: &KnockoutSet) -> Result<Option<(f64, Vec<f64>, Option<Arc<Basis>>)>, FbaError> {
        let mut p = self.knocked_lp(k)?;
        self.set_objective(&mut p, self.biomass, 1.0);
        let s = self.solve(&p, self.wild_type_basis.as_deref())?;
        Ok(match s.status {
            LpStatus::Optimal => Some((s.objective_value, s.primal, s.basis.map(Arc::new))),
            _ => None,
        })
    }

    fn growth_entry(&self, k: &KnockoutSet) -> Result<(GrowthOutcome, Option<Arc<Basis>>), FbaError> {
        if let Some(hit) = self.cache.read().unwrap().get(k) {
            return Ok(hit.clone());
        }
        let out = match self.solve_growth(k)? {
            None => (GrowthOutcome::Infeasible, None),
            Some((g, _, b)) if g < self.growth_threshold() => {
                (GrowthOutcome::BelowThreshold { growth: g }, b)
            }
            Some((g, cols, b)) => (
                GrowthOutcome::Feasible {
                    growth: g,
                    columns: cols,
                },
                b,
            ),
        };
        self.cache.write().unwrap().insert(k.clone(), out.clone());
        Ok(out)
    }

    /// Growth-maximal flux with `k` deleted; cached per knockout set.
    pub fn max_growth(&self, k: &KnockoutSet) -> Result<GrowthOutcome, FbaError> {
        Ok(self.growth_entry(k)?.0)
    }

    /// Starting basis for pinned-growth LPs of `k`.
    fn pinned_start(&self, k: &KnockoutSet) -> Result<Option<Arc<Basis>>, FbaError> {
        Ok(self.growth_entry(k)?.1.or_else(|| self.wild_type_basis.clone()))
    }

    /// Growth-maximal bundle (fluxes as returned by the growth LP).
    pub fn growth_bundle(&self, k: &KnockoutSet) -> Result<Option<FluxBundle>, FbaError> {
        Ok(match self.max_growth(k)? {
            GrowthOutcome::Feasible { columns, .. } => Some(self.bundle(&columns, k.clone())),
            _ => None,
        })
    }

    pub fn bundle(&self, columns: &[f64], knockouts: KnockoutSet) -> FluxBundle {
        let v = self.irr.net_fluxes(columns);
        let ion_net =
            self.acids.iter().map(|&i| v[i]).sum::<f64>() - self.bases.iter().map(|&i| v[i]).sum::<f64>();
        FluxBundle {
            growth: v[self.biomass],
            substrate_uptake: -v[self.substrate],
            product_secretion: v[self.product],
            oxygen_uptake: -v[self.oxygen],
            ion_net,
            fluxes: v,
            knockouts,
        }
    }

    /// Min and max net flux of `reaction_id` with growth pinned.
    pub fn flux_range(
        &self,
        k: &KnockoutSet,
        reaction_id: &str,
        fixed_growth: f64,
    ) -> Result<(f64, f64), FbaError> {
        let i = source_index(&self.irr.base, reaction_id)?;
        let key = (k.clone(), i, fixed_growth.to_bits());
        if let Some(r) = self.ranges.read().unwrap().get(&key) {
            return Ok(*r);
        }
        let mut p = self.knocked_lp(k)?;
        if !self.pin_growth(&mut p, fixed_growth) {
            return Err(FbaError::InfeasiblePin(fixed_growth));
        }
        let start = self.pinned_start(k)?;
        self.set_objective(&mut p, i, 1.0);
        let hi = self.solve(&p, start.as_deref())?;
        if hi.status != LpStatus::Optimal {
            return Err(FbaError::InfeasiblePin(fixed_growth));
        }
        self.set_objective(&mut p, i, -1.0);
        let lo = self.solve(&p, hi.basis.as_ref())?;
        if lo.status != LpStatus::Optimal {
            return Err(FbaError::InfeasiblePin(fixed_growth));
        }
        let (a, b) = (-lo.objective_value, hi.objective_value);
        let r = (a.min(b), b.max(a));
        self.ranges.write().unwrap().insert(key, r);
        Ok(r)
    }

    /// Least oxygen uptake with growth and product flux pinned; aerobic if possible.
    fn min_oxygen_bundle(
        &self,
        k: &KnockoutSet,
        growth: f64,
        product_target: f64,
    ) -> Result<Option<FluxBundle>, FbaError> {
        let mut p = self.knocked_lp(k)?;
        if !self.pin_growth(&mut p, growth) {
            return Ok(None);
        }
        let band = 1e-9 * product_target.abs().max(1.0);
        let prod = self.irr.net_terms(self.product);
        p.push_row(&prod, RowKind::Ge, product_target - band);
        p.push_row(&prod, RowKind::Le, product_target + band);
        // maximise the net exchange = minimise uptake
        self.set_objective(&mut p, self.oxygen, 1.0);
        let start = self.pinned_start(k)?;
        let mut floored = p.clone();
        floored.push_row(&self.irr.net_terms(self.oxygen), RowKind::Le, -OXYGEN_FLOOR);
        let s = self.solve(&floored, start.as_deref())?;
        let s = if s.status == LpStatus::Optimal {
            s
        } else {
            self.solve(&p, start.as_deref())?
        };
        Ok(match s.status {
            LpStatus::Optimal => Some(self.bundle(&s.primal, k.clone())),
            _ => None,
        })
    }

    /// Candidate flux states at growth `v_bio_star`, highest product flux first.
    pub fn select_fluxes(
        &self,
        k: &KnockoutSet,
        v_bio_star: f64,
        strategy: FluxSelection,
    ) -> Result<Vec<FluxBundle>, FbaError> {
        let product_id = self.roles.product.clone();
        let (lo, hi) = self.flux_range(k, &product_id, v_bio_star)?;
        let targets: Vec<f64> = match strategy {
            FluxSelection::MaxProduct | FluxSelection::Scan { points: 0 | 1 } => vec![hi],
            FluxSelection::Scan { points } => {
                let n = points;
                let mut t: Vec<f64> = (0..n)
                    .map(|i| hi - (hi - lo) * i as f64 / (n - 1) as f64)
                    .collect();
                t[n - 1] = lo;
                t.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * a.abs().max(1.0));
                t
            }
        };
        let mut out = Vec::with_capacity(targets.len());
        for t in targets {
            if let Some(b) = self.min_oxygen_bundle(k, v_bio_star, t)? {
                out.push(b);
            }
        }
        if out.is_empty() {
            return Err(FbaError::InfeasiblePin(v_bio_star));
        }
        Ok(out)
    }

    /// Largest product flux among growth-optimal states (OptKnock inner problem).
    pub fn max_product_at_optimal_growth(&self, k: &KnockoutSet) -> Result<Option<(f64, f64)>, FbaError> {
        match self.max_growth(k)? {
            GrowthOutcome::Feasible { growth, .. } => {
                let (_, hi) = self.flux_range(k, &self.roles.product.clone(), growth)?;
                Ok(Some((growth, hi)))
            }
            _ => Ok(None),
        }
    }
}
