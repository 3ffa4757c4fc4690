//! Metabolic model parsing, the irreversible split and knockout candidates.

use crate::lp::{solve_lp, CscMatrix, LpProblem, RowKind, ToleranceSet};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed model JSON at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("invalid model: {0}")]
    Validation(String),
    #[error("model configuration: {0}")]
    Config(String),
    #[error("unknown reaction {0}")]
    UnknownReaction(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metabolite {
    pub id: String,
    #[serde(default)]
    pub compartment: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    pub id: String,
    #[serde(rename = "metabolites")]
    pub stoichiometry: BTreeMap<String, f64>,
    pub lower_bound: f64,
    pub upper_bound: f64,
    #[serde(default, rename = "gene_reaction_rule")]
    pub gene_rule: String,
}

impl Reaction {
    pub fn reversible(&self) -> bool {
        self.lower_bound < 0.0
    }
}

/// How biomass and maintenance reactions are found.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub biomass_id: Option<String>,
    /// Case-insensitive substring used when `biomass_id` is unset.
    pub biomass_marker: String,
    pub atpm_id: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            biomass_id: None,
            biomass_marker: "biomass".into(),
            atpm_id: "ATPM".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetabolicModel {
    pub id: String,
    pub metabolites: Vec<Metabolite>,
    pub reactions: Vec<Reaction>,
    pub biomass_reaction_id: String,
    pub atpm_reaction_id: String,
    pub exchange_ids: BTreeSet<String>,
    met_index: HashMap<String, usize>,
    rxn_index: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct RawModel {
    #[serde(default)]
    id: String,
    metabolites: Vec<Metabolite>,
    reactions: Vec<Reaction>,
}

#[derive(Serialize)]
struct RawModelOut<'a> {
    id: &'a str,
    metabolites: &'a [Metabolite],
    reactions: &'a [Reaction],
}

fn byte_offset(text: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (n, l) in text.split(|b| *b == b'\n').enumerate() {
        if n + 1 == line {
            return (offset + column.saturating_sub(1)).min(text.len());
        }
        offset += l.len() + 1;
    }
    text.len()
}

pub fn parse_model(bytes: &[u8], config: &ModelConfig) -> Result<MetabolicModel, ModelError> {
    let raw: RawModel = serde_json::from_slice(bytes).map_err(|e| ModelError::Parse {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    MetabolicModel::from_parts(raw.id, raw.metabolites, raw.reactions, config)
}

impl MetabolicModel {
    pub fn from_parts(
        id: String,
        metabolites: Vec<Metabolite>,
        reactions: Vec<Reaction>,
        config: &ModelConfig,
    ) -> Result<Self, ModelError> {
        let mut met_index = HashMap::new();
        for (i, m) in metabolites.iter().enumerate() {
            if met_index.insert(m.id.clone(), i).is_some() {
                return Err(ModelError::Validation(format!(
                    "duplicate metabolite id {}",
                    m.id
                )));
            }
        }
        let mut rxn_index = HashMap::new();
        for (i, r) in reactions.iter().enumerate() {
            if r.id.is_empty() {
                return Err(ModelError::Validation(format!("reaction #{i} has an empty id")));
            }
            if rxn_index.insert(r.id.clone(), i).is_some() {
                return Err(ModelError::Validation(format!("duplicate reaction id {}", r.id)));
            }
            for met in r.stoichiometry.keys() {
                if !met_index.contains_key(met) {
                    return Err(ModelError::Validation(format!(
                        "reaction {} references unknown metabolite {}",
                        r.id, met
                    )));
                }
            }
            if !(r.lower_bound.is_finite() && r.upper_bound.is_finite()) || r.lower_bound > r.upper_bound {
                return Err(ModelError::Validation(format!(
                    "reaction {} has bounds [{}, {}]",
                    r.id, r.lower_bound, r.upper_bound
                )));
            }
        }
        let biomass_reaction_id = match &config.biomass_id {
            Some(id) if rxn_index.contains_key(id) => id.clone(),
            Some(id) => return Err(ModelError::Config(format!("biomass reaction {id} not in model"))),
            None => {
                let marker = config.biomass_marker.to_lowercase();
                let hits: Vec<&Reaction> = reactions
                    .iter()
                    .filter(|r| r.id.to_lowercase().contains(&marker))
                    .collect();
                match hits.as_slice() {
                    [one] => one.id.clone(),
                    [] => {
                        return Err(ModelError::Config(format!(
                            "no reaction id contains biomass marker {:?}",
                            config.biomass_marker
                        )))
                    }
                    many => {
                        let ids: Vec<&str> = many.iter().map(|r| r.id.as_str()).collect();
                        return Err(ModelError::Config(format!(
                            "biomass marker {:?} is ambiguous: {}",
                            config.biomass_marker,
                            ids.join(", ")
                        )));
                    }
                }
            }
        };
        if !rxn_index.contains_key(&config.atpm_id) {
            return Err(ModelError::Config(format!(
                "maintenance reaction {} not in model",
                config.atpm_id
            )));
        }
        let exchange_ids = reactions
            .iter()
            .filter(|r| r.stoichiometry.len() == 1)
            .map(|r| r.id.clone())
            .collect();
        Ok(MetabolicModel {
            id,
            metabolites,
            reactions,
            biomass_reaction_id,
            atpm_reaction_id: config.atpm_id.clone(),
            exchange_ids,
            met_index,
            rxn_index,
        })
    }

    pub fn reaction_index(&self, id: &str) -> Option<usize> {
        self.rxn_index.get(id).copied()
    }

    pub fn metabolite_index(&self, id: &str) -> Option<usize> {
        self.met_index.get(id).copied()
    }

    pub fn reaction(&self, id: &str) -> Result<&Reaction, ModelError> {
        self.reaction_index(id)
            .map(|i| &self.reactions[i])
            .ok_or_else(|| ModelError::UnknownReaction(id.to_string()))
    }

    pub fn set_bounds(&mut self, id: &str, lower: f64, upper: f64) -> Result<(), ModelError> {
        let i = self
            .reaction_index(id)
            .ok_or_else(|| ModelError::UnknownReaction(id.to_string()))?;
        if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
            return Err(ModelError::Validation(format!(
                "reaction {id} would get bounds [{lower}, {upper}]"
            )));
        }
        self.reactions[i].lower_bound = lower;
        self.reactions[i].upper_bound = upper;
        Ok(())
    }

    /// Dense-free stoichiometric matrix of the source reactions.
    pub fn stoichiometry(&self) -> CscMatrix {
        let mut trip = Vec::new();
        for (j, r) in self.reactions.iter().enumerate() {
            for (m, v) in &r.stoichiometry {
                trip.push((self.met_index[m], j, *v));
            }
        }
        CscMatrix::from_triplets(self.metabolites.len(), self.reactions.len(), &trip)
    }

    /// Canonical JSON emission read back by [`parse_model`].
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawModelOut {
            id: &self.id,
            metabolites: &self.metabolites,
            reactions: &self.reactions,
        })
        .expect("model serialises")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub source: usize,
    pub direction: Direction,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrreversibleModel {
    pub base: Arc<MetabolicModel>,
    pub columns: Vec<Column>,
    pub stoich: CscMatrix,
    /// n columns x r source reactions, 0/1.
    pub mapping: CscMatrix,
    /// (forward, backward) column of each source reaction.
    pub source_columns: Vec<(Option<usize>, Option<usize>)>,
}

pub fn split_reversible(model: Arc<MetabolicModel>) -> IrreversibleModel {
    let mut columns = Vec::new();
    let mut source_columns = Vec::with_capacity(model.reactions.len());
    let mut trip = Vec::new();
    let mut map_trip = Vec::new();
    for (i, r) in model.reactions.iter().enumerate() {
        let (lo, up) = (r.lower_bound, r.upper_bound);
        let mut push = |dir: Direction, lower: f64, upper: f64, sign: f64| {
            let j = columns.len();
            columns.push(Column {
                source: i,
                direction: dir,
                lower,
                upper,
            });
            for (m, v) in &r.stoichiometry {
                trip.push((model.metabolite_index(m).unwrap(), j, sign * v));
            }
            map_trip.push((j, i, 1.0));
            j
        };
        if lo >= 0.0 {
            let f = push(Direction::Forward, lo, up, 1.0);
            source_columns.push((Some(f), None));
        } else {
            let f = push(Direction::Forward, 0.0, up.max(0.0), 1.0);
            let b = push(Direction::Backward, (-up).max(0.0), -lo, -1.0);
            source_columns.push((Some(f), Some(b)));
        }
    }
    let n = columns.len();
    IrreversibleModel {
        stoich: CscMatrix::from_triplets(model.metabolites.len(), n, &trip),
        mapping: CscMatrix::from_triplets(n, model.reactions.len(), &map_trip),
        base: model,
        columns,
        source_columns,
    }
}

impl IrreversibleModel {
    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    /// Net source flux (forward minus backward) from a column vector.
    pub fn net_fluxes(&self, w: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.base.reactions.len()];
        for (j, c) in self.columns.iter().enumerate() {
            match c.direction {
                Direction::Forward => v[c.source] += w[j],
                Direction::Backward => v[c.source] -= w[j],
            }
        }
        v
    }

    /// (column, +1/-1) pairs whose weighted sum is the net flux of `source`.
    pub fn net_terms(&self, source: usize) -> Vec<(usize, f64)> {
        let (f, b) = self.source_columns[source];
        let mut t = Vec::new();
        if let Some(f) = f {
            t.push((f, 1.0));
        }
        if let Some(b) = b {
            t.push((b, -1.0));
        }
        t
    }

    pub fn lower(&self) -> Vec<f64> {
        self.columns.iter().map(|c| c.lower).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.columns.iter().map(|c| c.upper).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IonAnnotation {
    pub strong_acid_exchanges: BTreeSet<String>,
    pub strong_base_exchanges: BTreeSet<String>,
}

impl IonAnnotation {
    pub fn core_defaults() -> Self {
        IonAnnotation {
            strong_acid_exchanges: ["EX_for_e", "EX_ac_e", "EX_succ_e"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            strong_base_exchanges: ["EX_nh4_e"].iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn validate(&self, model: &MetabolicModel) -> Result<(), ModelError> {
        if let Some(id) = self
            .strong_acid_exchanges
            .intersection(&self.strong_base_exchanges)
            .next()
        {
            return Err(ModelError::Config(format!(
                "{id} is listed as both strong acid and strong base"
            )));
        }
        for id in self
            .strong_acid_exchanges
            .iter()
            .chain(&self.strong_base_exchanges)
        {
            if !model.exchange_ids.contains(id) {
                return Err(ModelError::Config(format!(
                    "strong-ion entry {id} is not an exchange reaction"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandidateConfig {
    pub exclude: Vec<String>,
    /// Drop reactions whose gene rule holds with only these genes present.
    pub spontaneous_genes: Vec<String>,
    pub prune_blocked: bool,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        CandidateConfig {
            exclude: Vec::new(),
            spontaneous_genes: vec!["s0001".into()],
            prune_blocked: false,
        }
    }
}

impl CandidateConfig {
    /// No filtering beyond the structural exclusions.
    pub fn unfiltered() -> Self {
        CandidateConfig {
            exclude: Vec::new(),
            spontaneous_genes: Vec::new(),
            prune_blocked: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnockoutCandidates {
    pub candidate_ids: Vec<String>,
}

pub fn knockout_candidates(
    model: &MetabolicModel,
    config: &CandidateConfig,
) -> Result<KnockoutCandidates, ModelError> {
    for id in &config.exclude {
        model.reaction(id)?;
    }
    let spontaneous: BTreeSet<&str> = config.spontaneous_genes.iter().map(|s| s.as_str()).collect();
    let mut ids: Vec<String> = model
        .reactions
        .iter()
        .filter(|r| {
            r.id != model.biomass_reaction_id
                && r.id != model.atpm_reaction_id
                && !model.exchange_ids.contains(&r.id)
                && !config.exclude.contains(&r.id)
        })
        .filter(|r| {
            spontaneous.is_empty()
                || r.gene_rule.trim().is_empty()
                || !gene_rule_holds(&r.gene_rule, &spontaneous)
        })
        .map(|r| r.id.clone())
        .collect();
    if config.prune_blocked {
        let blocked = blocked_reactions(model)?;
        ids.retain(|id| !blocked.contains(id));
    }
    ids.sort();
    Ok(KnockoutCandidates { candidate_ids: ids })
}

/// Reactions that carry no flux in either direction under the model's bounds.
pub fn blocked_reactions(model: &MetabolicModel) -> Result<BTreeSet<String>, ModelError> {
    let irr = split_reversible(Arc::new(model.clone()));
    let n = irr.num_columns();
    let m = irr.stoich.nrows();
    let base = LpProblem::new(
        vec![0.0; n],
        irr.stoich.clone(),
        vec![RowKind::Eq; m],
        vec![0.0; m],
        irr.lower(),
        irr.upper(),
    )
    .map_err(|e| ModelError::Validation(e.to_string()))?;
    let tol = ToleranceSet::default();
    let mut blocked = BTreeSet::new();
    for (i, r) in model.reactions.iter().enumerate() {
        let mut carries = false;
        for (col, _) in irr.net_terms(i) {
            let mut p = base.clone();
            p.objective[col] = 1.0;
            let s = solve_lp(&p, &tol).map_err(|e| ModelError::Validation(e.to_string()))?;
            if s.is_optimal() && s.objective_value > 1e-9 {
                carries = true;
                break;
            }
        }
        if !carries {
            blocked.insert(r.id.clone());
        }
    }
    Ok(blocked)
}

/// Evaluates a boolean gene rule (`and`/`or`/parentheses) with `present` genes true.
pub fn gene_rule_holds(rule: &str, present: &BTreeSet<&str>) -> bool {
    let spaced = rule.replace('(', " ( ").replace(')', " ) ");
    let tokens: Vec<&str> = spaced.split_whitespace().collect();
    let mut pos = 0;
    let v = parse_or(&tokens, &mut pos, present);
    v && pos == tokens.len()
}

fn parse_or(t: &[&str], pos: &mut usize, present: &BTreeSet<&str>) -> bool {
    let mut v = parse_and(t, pos, present);
    while *pos < t.len() && t[*pos].eq_ignore_ascii_case("or") {
        *pos += 1;
        let rhs = parse_and(t, pos, present);
        v = v || rhs;
    }
    v
}

fn parse_and(t: &[&str], pos: &mut usize, present: &BTreeSet<&str>) -> bool {
    let mut v = parse_atom(t, pos, present);
    while *pos < t.len() && t[*pos].eq_ignore_ascii_case("and") {
        *pos += 1;
        let rhs = parse_atom(t, pos, present);
        v = v && rhs;
    }
    v
}

fn parse_atom(t: &[&str], pos: &mut usize, present: &BTreeSet<&str>) -> bool {
    match t.get(*pos) {
        Some(&"(") => {
            *pos += 1;
            let v = parse_or(t, pos, present);
            if t.get(*pos) == Some(&")") {
                *pos += 1;
            }
            v
        }
        Some(gene) => {
            *pos += 1;
            present.contains(gene)
        }
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"{
      "metabolites": [{"id": "a", "compartment": "c"}, {"id": "b", "compartment": "c"}],
      "reactions": [
        {"id": "EX_a", "metabolites": {"a": -1}, "lower_bound": -10, "upper_bound": 10},
        {"id": "R1", "metabolites": {"a": -1, "b": 1}, "lower_bound": 0, "upper_bound": 1000,
         "gene_reaction_rule": "g1 or s0001"},
        {"id": "R2", "metabolites": {"b": -1}, "lower_bound": 2, "upper_bound": 5},
        {"id": "biomass_x", "metabolites": {"b": -1}, "lower_bound": 0, "upper_bound": 1000},
        {"id": "ATPM", "metabolites": {"b": -1}, "lower_bound": 0, "upper_bound": 1000}
      ]
    }"#;

    fn tiny() -> MetabolicModel {
        parse_model(TINY.as_bytes(), &ModelConfig::default()).unwrap()
    }

    #[test]
    fn parses_and_detects_exchanges() {
        let m = tiny();
        assert_eq!(m.biomass_reaction_id, "biomass_x");
        assert_eq!(
            m.exchange_ids.iter().collect::<Vec<_>>(),
            vec!["ATPM", "EX_a", "R2", "biomass_x"]
        );
    }

    #[test]
    fn unknown_metabolite_named() {
        let bad = TINY.replace(r#"{"b": -1}, "lower_bound": 2"#, r#"{"x": -1}, "lower_bound": 2"#);
        let err = parse_model(bad.as_bytes(), &ModelConfig::default()).unwrap_err();
        assert!(matches!(&err, ModelError::Validation(s) if s.contains("unknown metabolite x")));
    }

    #[test]
    fn duplicate_reaction_named() {
        let bad = TINY.replace(r#""id": "R2""#, r#""id": "R1""#);
        let err = parse_model(bad.as_bytes(), &ModelConfig::default()).unwrap_err();
        assert_eq!(err, ModelError::Validation("duplicate reaction id R1".into()));
    }

    #[test]
    fn malformed_json_reports_offset() {
        let text = "{\"metabolites\": [}";
        match parse_model(text.as_bytes(), &ModelConfig::default()) {
            Err(ModelError::Parse { offset, .. }) => assert_eq!(offset, 17),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn biomass_marker_must_be_unique() {
        let two = TINY.replace("\"R2\"", "\"biomass_y\"");
        assert!(matches!(
            parse_model(two.as_bytes(), &ModelConfig::default()),
            Err(ModelError::Config(_))
        ));
        let cfg = ModelConfig {
            biomass_id: Some("biomass_y".into()),
            ..Default::default()
        };
        assert_eq!(
            parse_model(two.as_bytes(), &cfg).unwrap().biomass_reaction_id,
            "biomass_y"
        );
    }

    #[test]
    fn missing_atpm_is_config_error() {
        let cfg = ModelConfig {
            atpm_id: "NGAM".into(),
            ..Default::default()
        };
        assert!(matches!(
            parse_model(TINY.as_bytes(), &cfg),
            Err(ModelError::Config(_))
        ));
    }

    #[test]
    fn split_columns_and_mapping() {
        let irr = split_reversible(Arc::new(tiny()));
        assert_eq!(irr.num_columns(), 6);
        assert_eq!(irr.columns[0].lower, 0.0);
        assert_eq!(irr.columns[0].upper, 10.0);
        assert_eq!(irr.columns[1].direction, Direction::Backward);
        assert_eq!(irr.columns[1].upper, 10.0);
        assert_eq!(irr.stoich.get(0, 1), 1.0);
        // positive lower bound keeps a single forward column
        let c = &irr.columns[irr.source_columns[2].0.unwrap()];
        assert_eq!((c.lower, c.upper), (2.0, 5.0));
        assert!(irr.source_columns[2].1.is_none());
        for (j, col) in irr.columns.iter().enumerate() {
            for i in 0..irr.base.reactions.len() {
                let want = if col.source == i { 1.0 } else { 0.0 };
                assert_eq!(irr.mapping.get(j, i), want);
            }
        }
    }

    #[test]
    fn spontaneous_rules_filtered() {
        let m = tiny();
        let c = knockout_candidates(&m, &CandidateConfig::default()).unwrap();
        assert!(c.candidate_ids.is_empty());
        let c = knockout_candidates(&m, &CandidateConfig::unfiltered()).unwrap();
        assert_eq!(c.candidate_ids, vec!["R1"]);
    }

    #[test]
    fn gene_rules() {
        let s: BTreeSet<&str> = ["s0001"].into_iter().collect();
        assert!(gene_rule_holds("s0001", &s));
        assert!(gene_rule_holds("(b1 and b2) or s0001", &s));
        assert!(!gene_rule_holds("b1 and s0001", &s));
        assert!(!gene_rule_holds("(b1 or b2)", &s));
    }

    #[test]
    fn exclusion_of_unknown_id_fails() {
        let cfg = CandidateConfig {
            exclude: vec!["NOPE".into()],
            ..CandidateConfig::unfiltered()
        };
        assert_eq!(
            knockout_candidates(&tiny(), &cfg).unwrap_err(),
            ModelError::UnknownReaction("NOPE".into())
        );
    }
}
