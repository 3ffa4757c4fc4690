//! JSON run configuration. Every physical parameter can be overridden; missing
//! fields take the tabulated defaults.

use crate::bilevel::{BilevelError, ProblemSpec, SearchConfig};
use crate::fba::{ExchangeRoles, FluxSelection, KineticsParams};
use crate::model::{parse_model, IonAnnotation, MetabolicModel, ModelConfig, ModelError};
use crate::reactor::{acid_form_molar_mass, CostParams, ReactorParams};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Relative paths resolve against the config file's directory.
    pub model_path: PathBuf,
    pub model: ModelConfig,
    pub product: String,
    pub substrate: String,
    pub oxygen: String,
    pub ions: IonAnnotation,
    pub max_knockouts: usize,
    /// [kg/a]
    pub capacity: f64,
    pub kinetics: KineticsParams,
    pub reactor: ReactorParams,
    /// `product_molar_mass` defaults to the acid form of `product` when omitted.
    pub costs: CostParams,
    pub search: SearchConfig,
    pub flux_selection: FluxSelection,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let roles = ExchangeRoles::default();
        RunConfig {
            model_path: PathBuf::from("data/e_coli_core.json"),
            model: ModelConfig::default(),
            product: roles.product,
            substrate: roles.substrate,
            oxygen: roles.oxygen,
            ions: roles.ions,
            max_knockouts: 1,
            capacity: 1e3,
            kinetics: KineticsParams::default(),
            reactor: ReactorParams::default(),
            costs: CostParams {
                product_molar_mass: acid_form_molar_mass("EX_for_e").unwrap(),
                ..Default::default()
            },
            search: SearchConfig::default(),
            flux_selection: FluxSelection::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Defaults for `product`, costed with its acid-form molar mass.
    pub fn for_product(product: &str) -> Result<RunConfig, ConfigError> {
        let mut c = RunConfig {
            product: product.to_string(),
            ..Default::default()
        };
        c.costs.product_molar_mass = default_molar_mass(product)?;
        Ok(c)
    }

    pub fn from_json(text: &str) -> Result<RunConfig, ConfigError> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let mut c: RunConfig = serde_json::from_value(raw.clone())?;
        if raw.pointer("/costs/product_molar_mass").is_none() {
            c.costs.product_molar_mass = default_molar_mass(&c.product)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut c = RunConfig::from_json(&text)?;
        if c.model_path.is_relative() {
            if let Some(dir) = path.parent() {
                c.model_path = dir.join(&c.model_path);
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.product.is_empty() {
            return Err(ConfigError::Invalid("product exchange id is empty".into()));
        }
        self.spec().validate().map_err(|e| match e {
            BilevelError::Spec(m) => ConfigError::Invalid(m),
            other => ConfigError::Invalid(other.to_string()),
        })
    }

    pub fn exchanges(&self) -> ExchangeRoles {
        ExchangeRoles {
            substrate: self.substrate.clone(),
            oxygen: self.oxygen.clone(),
            product: self.product.clone(),
            ions: self.ions.clone(),
        }
    }

    pub fn spec(&self) -> ProblemSpec {
        ProblemSpec {
            exchanges: self.exchanges(),
            max_knockouts: self.max_knockouts,
            capacity: self.capacity,
            kinetics: self.kinetics.clone(),
            reactor: self.reactor.clone(),
            costs: self.costs.clone(),
            search: self.search.clone(),
            flux_selection: self.flux_selection,
        }
    }

    pub fn load_model(&self) -> Result<MetabolicModel, ConfigError> {
        let bytes = std::fs::read(&self.model_path).map_err(|source| ConfigError::Io {
            path: self.model_path.clone(),
            source,
        })?;
        Ok(parse_model(&bytes, &self.model)?)
    }
}

fn default_molar_mass(product: &str) -> Result<f64, ConfigError> {
    acid_form_molar_mass(product).ok_or_else(|| {
        ConfigError::Invalid(format!(
            "no default molar mass for {product}; set costs.product_molar_mass"
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.costs.substrate_cost, 0.79);
        assert_eq!(c.reactor.ph_opt, 7.0);
        assert_eq!(c.kinetics.max_growth_at_optimal_ph, 0.73);
    }

    #[test]
    fn product_sets_molar_mass_unless_given() {
        let c = RunConfig::from_json(r#"{"product": "EX_succ_e"}"#).unwrap();
        assert_eq!(c.costs.product_molar_mass, 118.088);
        let c = RunConfig::from_json(r#"{"product": "EX_succ_e", "costs": {"product_molar_mass": 116.07}}"#)
            .unwrap();
        assert_eq!(c.costs.product_molar_mass, 116.07);
        assert!(RunConfig::from_json(r#"{"product": "EX_unknown"}"#).is_err());
    }

    #[test]
    fn overrides_are_validated() {
        assert!(RunConfig::from_json(r#"{"capacity": -1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"reactor": {"ph_opt": 12}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"costs": {"power_cost": -0.1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"search": {"strategy": {"kind": "beam", "width": 0}}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"no_such_field": 1}"#).is_err());
        let c = RunConfig::from_json(
            r#"{"reactor": {"max_reactors": 3}, "search": {"strategy": {"kind": "pruned"}}}"#,
        )
        .unwrap();
        assert_eq!(c.reactor.max_reactors, 3);
        assert_eq!(c.spec().strategy(), crate::bilevel::SearchStrategy::Pruned);
    }

    #[test]
    fn round_trips_through_json() {
        let c = RunConfig::for_product("EX_ac_e").unwrap();
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
