//! Continuous stirred-tank reactor sizing and hourly production cost.
//!
//! A design is fixed by pH, biomass concentration and the number of parallel
//! reactors; everything else (feed, volumes, aeration, powers, cooling, pH
//! agents) follows analytically from the flux state and the capacity.
//! Geometry is per reactor. Flows, powers and heat loads are plant totals.

use crate::fba::{FluxBundle, KineticsParams, OXYGEN_FLOOR};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Product flux at or below this is treated as no production.
pub const PRODUCT_FLOOR: f64 = 1e-9;
const AIR_OXYGEN_FRACTION: f64 = 0.21;
const PH_GRID_POINTS: usize = 13;
const BIOMASS_GRID_POINTS: usize = 31;
const BIOMASS_RANGE: (f64, f64) = (0.1, 100.0);
const MIN_HALVINGS: u32 = 6;
const REFINE_REL_TOL: f64 = 1e-4;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum ReactorError {
    #[error("pH {ph} outside the open interval ({min}, {max})")]
    PhDomain { ph: f64, min: f64, max: f64 },
    #[error("invalid design point: {0}")]
    DesignPoint(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("infeasible design: {0}")]
    Infeasible(InfeasibleReason),
}

/// Which requirement a design violates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibleReason {
    GrowthAboveMaximum,
    NoProduct,
    NoOxygenUptake,
    OxygenUptakeBound,
    GasHoldup,
    ReactorVolume,
}

impl std::fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InfeasibleReason::GrowthAboveMaximum => "growth exceeds pH-inhibited maximum",
            InfeasibleReason::NoProduct => "no product secretion",
            InfeasibleReason::NoOxygenUptake => "no oxygen uptake",
            InfeasibleReason::OxygenUptakeBound => "OUR bound",
            InfeasibleReason::GasHoldup => "holdup",
            InfeasibleReason::ReactorVolume => "reactor volume bound",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReactorParams {
    /// Reactor volume over aerated culture volume.
    pub headspace_factor: f64,
    pub height_to_diameter: f64,
    /// Metabolic heat per mol O2 consumed [kWh/mol].
    pub metabolic_heat: f64,
    /// Dissolved O2 as a fraction of saturation.
    pub dissolved_oxygen_fraction: f64,
    pub polytropic_exponent: f64,
    pub compressor_efficiency: f64,
    pub pump_efficiency: f64,
    /// [kg/m3]
    pub cooling_water_density: f64,
    /// [kg/m3]
    pub culture_density: f64,
    /// [kg/m3]
    pub oxygen_density: f64,
    /// O2 solubility [g/L].
    pub oxygen_solubility: f64,
    /// [J/kg/K]
    pub cooling_heat_capacity: f64,
    /// [K]
    pub cooling_inlet_temperature: f64,
    /// [K]
    pub cooling_outlet_temperature: f64,
    /// [Pa]
    pub atmospheric_pressure: f64,
    /// [Pa]
    pub air_pressure: f64,
    /// [m/s2]
    pub gravity: f64,
    /// [mmol/L/h]
    pub max_oxygen_uptake: f64,
    pub max_reactors: u32,
    /// [m3]
    pub max_reactor_volume: f64,
    pub ph_min: f64,
    pub ph_lower: f64,
    pub ph_opt: f64,
    pub ph_upper: f64,
    pub ph_max: f64,
    /// Gas holdup must stay below this.
    pub holdup_cap: f64,
}

impl Default for ReactorParams {
    fn default() -> Self {
        ReactorParams {
            headspace_factor: 1.2,
            height_to_diameter: 2.5,
            metabolic_heat: 0.13,
            dissolved_oxygen_fraction: 0.3,
            polytropic_exponent: 1.4,
            compressor_efficiency: 0.7,
            pump_efficiency: 0.7,
            cooling_water_density: 1000.0,
            culture_density: 1000.0,
            oxygen_density: 1.27,
            oxygen_solubility: 0.0068,
            cooling_heat_capacity: 4184.0,
            cooling_inlet_temperature: 288.15,
            cooling_outlet_temperature: 298.15,
            atmospheric_pressure: 1e5,
            air_pressure: 2.5e5,
            gravity: 9.81,
            max_oxygen_uptake: 250.0,
            max_reactors: 10,
            max_reactor_volume: 10.0,
            ph_min: 4.0,
            ph_lower: 4.5,
            ph_opt: 7.0,
            ph_upper: 7.5,
            ph_max: 9.0,
            holdup_cap: 0.5,
        }
    }
}

impl ReactorParams {
    /// Large plants may number up to 100 reactors of up to 100 m3.
    pub fn for_capacity(&self, capacity: f64) -> ReactorParams {
        let mut p = self.clone();
        if capacity >= 1e6 {
            p.max_reactors = p.max_reactors.max(100);
            p.max_reactor_volume = p.max_reactor_volume.max(100.0);
        }
        p
    }

    pub fn validate(&self) -> Result<(), ReactorError> {
        let bad = |m: String| Err(ReactorError::Parameter(m));
        let positive = [
            ("height_to_diameter", self.height_to_diameter),
            ("metabolic_heat", self.metabolic_heat),
            ("polytropic_exponent", self.polytropic_exponent),
            ("cooling_water_density", self.cooling_water_density),
            ("culture_density", self.culture_density),
            ("oxygen_density", self.oxygen_density),
            ("oxygen_solubility", self.oxygen_solubility),
            ("cooling_heat_capacity", self.cooling_heat_capacity),
            ("atmospheric_pressure", self.atmospheric_pressure),
            ("air_pressure", self.air_pressure),
            ("gravity", self.gravity),
            ("max_oxygen_uptake", self.max_oxygen_uptake),
            ("max_reactor_volume", self.max_reactor_volume),
            ("holdup_cap", self.holdup_cap),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.polytropic_exponent <= 1.0 {
            return bad("polytropic_exponent must exceed 1".into());
        }
        if !(self.headspace_factor >= 1.0) {
            return bad(format!(
                "headspace_factor must be >= 1, got {}",
                self.headspace_factor
            ));
        }
        let phi = self.dissolved_oxygen_fraction;
        if !(phi > 0.0 && phi < 1.0) {
            return bad(format!("dissolved_oxygen_fraction must lie in (0, 1), got {phi}"));
        }
        for (name, v) in [
            ("compressor_efficiency", self.compressor_efficiency),
            ("pump_efficiency", self.pump_efficiency),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        if !(self.holdup_cap < 1.0) {
            return bad("holdup_cap must be below 1".into());
        }
        if self.max_reactors == 0 {
            return bad("max_reactors must be at least 1".into());
        }
        let ph = [
            self.ph_min,
            self.ph_lower,
            self.ph_opt,
            self.ph_upper,
            self.ph_max,
        ];
        if !ph.windows(2).all(|w| w[0] < w[1]) {
            return bad(format!("pH cardinal values must increase strictly, got {ph:?}"));
        }
        if self.cooling_inlet_temperature == self.cooling_outlet_temperature {
            return bad("cooling water temperatures must differ".into());
        }
        Ok(())
    }
}

/// How reactor investment scales with volume.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapexRule {
    /// C_ref * (V/V_ref)^0.6 at every size.
    #[default]
    PowerLaw,
    /// Below V_ref the cost stays at C_ref.
    Floored,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    /// [USD/kg]
    pub substrate_cost: f64,
    /// [USD/kg]
    pub acid_cost: f64,
    /// [USD/kg]
    pub base_cost: f64,
    /// [USD/m3]
    pub cooling_water_cost: f64,
    /// [USD/kWh]
    pub power_cost: f64,
    /// [USD]
    pub reference_reactor_cost: f64,
    /// [m3]
    pub reference_reactor_volume: f64,
    pub scale_exponent: f64,
    pub capex_rule: CapexRule,
    /// Compressor cost = coefficient * P[kW]^exponent [USD].
    pub compressor_cost_coefficient: f64,
    pub compressor_cost_exponent: f64,
    /// [h/a]
    pub annual_hours: f64,
    /// [a]
    pub amortization_years: f64,
    /// [g/mol]
    pub substrate_molar_mass: f64,
    /// [g/mol]
    pub product_molar_mass: f64,
    /// [g/mol]
    pub oxygen_molar_mass: f64,
    /// [g/mol]
    pub acid_molar_mass: f64,
    /// [g/mol]
    pub base_molar_mass: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            substrate_cost: 0.79,
            acid_cost: 0.064,
            base_cost: 0.29,
            cooling_water_cost: 0.17,
            power_cost: 0.06,
            reference_reactor_cost: 40_000.0,
            reference_reactor_volume: 0.5,
            scale_exponent: 0.6,
            capex_rule: CapexRule::PowerLaw,
            compressor_cost_coefficient: 5840.0,
            compressor_cost_exponent: 0.82,
            annual_hours: 8400.0,
            amortization_years: 15.0,
            substrate_molar_mass: 180.156,
            product_molar_mass: 46.025,
            oxygen_molar_mass: 31.998,
            acid_molar_mass: 98.1,
            base_molar_mass: 40.0,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), ReactorError> {
        let all = [
            ("substrate_cost", self.substrate_cost),
            ("acid_cost", self.acid_cost),
            ("base_cost", self.base_cost),
            ("cooling_water_cost", self.cooling_water_cost),
            ("power_cost", self.power_cost),
            ("reference_reactor_cost", self.reference_reactor_cost),
            ("reference_reactor_volume", self.reference_reactor_volume),
            ("scale_exponent", self.scale_exponent),
            ("compressor_cost_coefficient", self.compressor_cost_coefficient),
            ("compressor_cost_exponent", self.compressor_cost_exponent),
            ("annual_hours", self.annual_hours),
            ("amortization_years", self.amortization_years),
            ("substrate_molar_mass", self.substrate_molar_mass),
            ("product_molar_mass", self.product_molar_mass),
            ("oxygen_molar_mass", self.oxygen_molar_mass),
            ("acid_molar_mass", self.acid_molar_mass),
            ("base_molar_mass", self.base_molar_mass),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(ReactorError::Parameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Molar mass of the free acid for the organic acid exchanges of the core network.
pub fn acid_form_molar_mass(exchange_id: &str) -> Option<f64> {
    match exchange_id {
        "EX_for_e" => Some(46.025),
        "EX_ac_e" => Some(60.052),
        "EX_succ_e" => Some(118.088),
        "EX_lac__D_e" | "EX_lac__L_e" => Some(90.078),
        "EX_pyr_e" => Some(88.062),
        "EX_akg_e" => Some(146.098),
        "EX_etoh_e" => Some(46.068),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub ph: f64,
    /// [gCDW/L]
    pub biomass_concentration: f64,
    pub reactors: u32,
}

/// Fully evaluated reactor state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReactorDesign {
    pub design_point: DesignPoint,
    pub growth_inhibition: f64,
    /// [1/h]
    pub max_growth: f64,
    /// [g/L]
    pub residual_substrate: f64,
    /// [g/L]
    pub feed_substrate: f64,
    /// [g/L]
    pub product_concentration: f64,
    /// Total feed [m3/h].
    pub feed_rate: f64,
    /// Per reactor [m3].
    pub culture_volume: f64,
    pub gas_volume: f64,
    pub reactor_volume: f64,
    /// [m]
    pub diameter: f64,
    pub culture_height: f64,
    pub gas_height: f64,
    /// [m2]
    pub cross_section: f64,
    /// [m/s]
    pub superficial_velocity: f64,
    /// [1/s]
    pub kla: f64,
    /// Transfer rate kLa*(1-phi)*c_sat [g/L/h].
    pub oxygen_transfer_rate: f64,
    pub gas_holdup: f64,
    /// [g/L/h]
    pub oxygen_uptake_rate: f64,
    /// [m3/h]
    pub oxygen_flow: f64,
    pub air_flow: f64,
    /// Agitation power input per culture volume [W/m3].
    pub specific_power: f64,
    /// [kW]
    pub agitation_power: f64,
    pub compressor_power: f64,
    pub cooling_pump_power: f64,
    pub heat_load: f64,
    pub metabolic_heat: f64,
    pub agitation_heat: f64,
    /// [kg/h]
    pub cooling_water_flow: f64,
    /// [mol/L]
    pub proton_concentration: f64,
    pub acid_concentration: f64,
    pub base_concentration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// [USD/h]
    pub hourly_investment_reactor: f64,
    pub hourly_investment_compressor: f64,
    pub hourly_substrate: f64,
    pub hourly_ph_control: f64,
    pub hourly_cooling_agent: f64,
    pub hourly_power: f64,
    pub hourly_total: f64,
    /// [USD/kg product]
    pub specific_cost: f64,
    /// [USD]
    pub capex_reactor_total: f64,
    pub capex_compressor_total: f64,
}

impl CostBreakdown {
    /// (category, USD/kg) rows grouped as investment, raw materials and utilities.
    pub fn per_kg(&self) -> Vec<(&'static str, f64)> {
        let kg_per_h = self.hourly_total / self.specific_cost;
        let f = |v: f64| v / kg_per_h;
        vec![
            ("investment_reactor", f(self.hourly_investment_reactor)),
            ("investment_compressor", f(self.hourly_investment_compressor)),
            ("raw_materials_substrate", f(self.hourly_substrate)),
            ("raw_materials_ph_control", f(self.hourly_ph_control)),
            ("utilities_cooling_agent", f(self.hourly_cooling_agent)),
            ("utilities_power", f(self.hourly_power)),
            ("total", self.specific_cost),
        ]
    }

    pub fn substrate_share(&self) -> f64 {
        self.hourly_substrate / self.hourly_total
    }
}

/// Cardinal pH growth factor, 1 at the optimum and 0 at the cardinal limits.
pub fn cpm_gamma(ph: f64, rp: &ReactorParams) -> Result<f64, ReactorError> {
    if !(ph > rp.ph_min && ph < rp.ph_max) {
        return Err(ReactorError::PhDomain {
            ph,
            min: rp.ph_min,
            max: rp.ph_max,
        });
    }
    let a = (ph - rp.ph_min) * (ph - rp.ph_max);
    let d = ph - rp.ph_opt;
    Ok(a / (a - d * d))
}

/// Acid and base dosing [mol/L] that hold `ph` given the strong-ion secretion.
/// Returns (acid, base, proton concentration).
pub fn ph_agents(ph: f64, flux: &FluxBundle, biomass_concentration: f64) -> (f64, f64, f64) {
    let c_h = 10f64.powf(-ph);
    // mmol/gCDW/h * gCDW/L * h -> mol/L
    let offset = biomass_concentration / flux.growth * flux.ion_net / 1000.0;
    let need = c_h - offset;
    if need >= 0.0 {
        (need, 0.0, c_h)
    } else {
        (0.0, -need, c_h)
    }
}

/// kLa [1/s] from specific power [W/m3] and superficial velocity [m/s].
pub fn van_riet_kla(specific_power: f64, superficial_velocity: f64) -> f64 {
    0.002 * specific_power.powf(0.7) * superficial_velocity.powf(0.2)
}

/// Specific power [W/m3] needed for `kla` at the given superficial velocity.
pub fn specific_power_for_kla(kla: f64, superficial_velocity: f64) -> f64 {
    if kla <= 0.0 {
        return 0.0;
    }
    (kla / (0.002 * superficial_velocity.powf(0.2))).powf(1.0 / 0.7)
}

/// Gas holdup from mass-specific power [W/kg] and superficial velocity [m/s].
pub fn gas_holdup(power_per_mass: f64, superficial_velocity: f64) -> f64 {
    1.12 * power_per_mass.powf(0.29) * superficial_velocity.powf(0.6)
}

/// Adiabatic compression power [kW] for `air_flow` [m3/h].
pub fn compressor_power(air_flow: f64, rp: &ReactorParams) -> f64 {
    let a = rp.polytropic_exponent;
    let ratio = rp.air_pressure / rp.atmospheric_pressure;
    let watts = rp.atmospheric_pressure * (air_flow / 3600.0) / rp.compressor_efficiency
        * (a / (a - 1.0))
        * (ratio.powf((a - 1.0) / a) - 1.0);
    watts / 1000.0
}

/// Cooling water [kg/h] that removes `heat` [kW].
pub fn cooling_water_flow(heat: f64, rp: &ReactorParams) -> f64 {
    let dt = (rp.cooling_outlet_temperature - rp.cooling_inlet_temperature).abs();
    heat * 3.6e6 / (rp.cooling_heat_capacity * dt)
}

fn check_point(dp: &DesignPoint, rp: &ReactorParams) -> Result<(), ReactorError> {
    if !(dp.ph >= rp.ph_lower && dp.ph <= rp.ph_upper) {
        return Err(ReactorError::DesignPoint(format!(
            "pH {} outside [{}, {}]",
            dp.ph, rp.ph_lower, rp.ph_upper
        )));
    }
    if !(dp.biomass_concentration.is_finite() && dp.biomass_concentration > 0.0) {
        return Err(ReactorError::DesignPoint(format!(
            "biomass concentration must be positive, got {}",
            dp.biomass_concentration
        )));
    }
    if dp.reactors == 0 || dp.reactors > rp.max_reactors {
        return Err(ReactorError::DesignPoint(format!(
            "reactor count {} outside 1..={}",
            dp.reactors, rp.max_reactors
        )));
    }
    Ok(())
}

/// Evaluates the design cascade; capacity in kg product per year.
pub fn evaluate_design(
    flux: &FluxBundle,
    dp: &DesignPoint,
    kinetics: &KineticsParams,
    rp: &ReactorParams,
    cp: &CostParams,
    capacity: f64,
) -> Result<ReactorDesign, ReactorError> {
    check_point(dp, rp)?;
    if !(capacity.is_finite() && capacity > 0.0) {
        return Err(ReactorError::Parameter(format!(
            "capacity must be positive, got {capacity}"
        )));
    }
    if !(flux.growth > 0.0) {
        return Err(ReactorError::DesignPoint(format!(
            "growth must be positive, got {}",
            flux.growth
        )));
    }
    let infeasible = |r| Err(ReactorError::Infeasible(r));
    let v_bio = flux.growth;
    let c_bio = dp.biomass_concentration;
    let n_r = dp.reactors as f64;

    let gamma = cpm_gamma(dp.ph, rp)?;
    let max_growth = kinetics.max_growth_at_optimal_ph * gamma;
    if !(v_bio < max_growth) {
        return infeasible(InfeasibleReason::GrowthAboveMaximum);
    }
    let residual_substrate = kinetics.monod_constant * v_bio / (max_growth - v_bio);
    let feed_substrate =
        residual_substrate + flux.substrate_uptake * cp.substrate_molar_mass / 1000.0 * c_bio / v_bio;

    if flux.product_secretion <= PRODUCT_FLOOR {
        return infeasible(InfeasibleReason::NoProduct);
    }
    let product_concentration = flux.product_secretion * cp.product_molar_mass / 1000.0 * c_bio / v_bio;

    // kg/a / (h/a * kg/m3)
    let feed_rate = capacity / (cp.annual_hours * product_concentration);
    let culture_volume = feed_rate / (v_bio * n_r);

    let q = rp.height_to_diameter;
    let diameter = (4.0 * culture_volume / (PI * q)).cbrt();
    let culture_height = q * diameter;
    let cross_section = PI / 4.0 * diameter * diameter;

    if flux.oxygen_uptake < OXYGEN_FLOOR * (1.0 - 1e-6) {
        return infeasible(InfeasibleReason::NoOxygenUptake);
    }
    let our = flux.oxygen_uptake * cp.oxygen_molar_mass / 1000.0 * c_bio;
    if our > rp.max_oxygen_uptake * cp.oxygen_molar_mass / 1000.0 {
        return infeasible(InfeasibleReason::OxygenUptakeBound);
    }

    // g/L/h == kg/m3/h
    let oxygen_flow_each = our * culture_volume / rp.oxygen_density;
    let air_flow_each = oxygen_flow_each / AIR_OXYGEN_FRACTION;
    let superficial_velocity = air_flow_each / (3600.0 * cross_section);

    let kla = our / ((1.0 - rp.dissolved_oxygen_fraction) * rp.oxygen_solubility) / 3600.0;
    let specific_power = specific_power_for_kla(kla, superficial_velocity);
    let agitation_each_w = specific_power * culture_volume;

    let holdup = gas_holdup(specific_power / rp.culture_density, superficial_velocity);
    if !(holdup < rp.holdup_cap) {
        return infeasible(InfeasibleReason::GasHoldup);
    }
    let gas_volume = holdup * culture_volume / (1.0 - holdup);
    let gas_height = gas_volume / cross_section;

    let reactor_volume = rp.headspace_factor * (culture_volume + gas_volume);
    if reactor_volume > rp.max_reactor_volume {
        return infeasible(InfeasibleReason::ReactorVolume);
    }

    let air_flow = air_flow_each * n_r;
    let compressor_power = compressor_power(air_flow, rp);

    // g/h -> mol/h
    let oxygen_mol_each = our * culture_volume * 1000.0 / cp.oxygen_molar_mass;
    let metabolic_each = rp.metabolic_heat * oxygen_mol_each;
    let agitation_each = agitation_each_w / 1000.0;
    let heat_each = metabolic_each + agitation_each;
    let water_each = cooling_water_flow(heat_each, rp);
    let pump_each_w = water_each / 3600.0 * rp.gravity * (culture_height + gas_height) / rp.pump_efficiency;

    let (acid, base, c_h) = ph_agents(dp.ph, flux, c_bio);

    Ok(ReactorDesign {
        design_point: *dp,
        growth_inhibition: gamma,
        max_growth,
        residual_substrate,
        feed_substrate,
        product_concentration,
        feed_rate,
        culture_volume,
        gas_volume,
        reactor_volume,
        diameter,
        culture_height,
        gas_height,
        cross_section,
        superficial_velocity,
        kla,
        oxygen_transfer_rate: kla * 3600.0 * (1.0 - rp.dissolved_oxygen_fraction) * rp.oxygen_solubility,
        gas_holdup: holdup,
        oxygen_uptake_rate: our,
        oxygen_flow: oxygen_flow_each * n_r,
        air_flow,
        specific_power,
        agitation_power: agitation_each * n_r,
        compressor_power,
        cooling_pump_power: pump_each_w / 1000.0 * n_r,
        heat_load: heat_each * n_r,
        metabolic_heat: metabolic_each * n_r,
        agitation_heat: agitation_each * n_r,
        cooling_water_flow: water_each * n_r,
        proton_concentration: c_h,
        acid_concentration: acid,
        base_concentration: base,
    })
}

/// Investment of one reactor of volume `v` [USD].
pub fn reactor_capex(v: f64, cp: &CostParams) -> f64 {
    let ratio = v / cp.reference_reactor_volume;
    let ratio = match cp.capex_rule {
        CapexRule::PowerLaw => ratio,
        CapexRule::Floored => ratio.max(1.0),
    };
    cp.reference_reactor_cost * ratio.powf(cp.scale_exponent)
}

pub fn cost_breakdown(d: &ReactorDesign, cp: &CostParams) -> CostBreakdown {
    let capex_reactor_total = d.design_point.reactors as f64 * reactor_capex(d.reactor_volume, cp);
    let capex_compressor_total = if d.compressor_power > 0.0 {
        cp.compressor_cost_coefficient * d.compressor_power.powf(cp.compressor_cost_exponent)
    } else {
        0.0
    };
    let hours = cp.annual_hours * cp.amortization_years;
    let hourly_investment_reactor = capex_reactor_total / hours;
    let hourly_investment_compressor = capex_compressor_total / hours;
    let hourly_substrate = d.feed_rate * cp.substrate_cost * d.feed_substrate;
    // mol/L * g/mol = kg/m3
    let hourly_ph_control = d.feed_rate
        * (cp.acid_cost * cp.acid_molar_mass * d.acid_concentration
            + cp.base_cost * cp.base_molar_mass * d.base_concentration);
    let hourly_cooling_agent = d.cooling_water_flow / 1000.0 * cp.cooling_water_cost;
    let hourly_power = cp.power_cost * (d.compressor_power + d.agitation_power + d.cooling_pump_power);
    let hourly_total = hourly_investment_reactor
        + hourly_investment_compressor
        + hourly_substrate
        + hourly_ph_control
        + hourly_cooling_agent
        + hourly_power;
    CostBreakdown {
        hourly_investment_reactor,
        hourly_investment_compressor,
        hourly_substrate,
        hourly_ph_control,
        hourly_cooling_agent,
        hourly_power,
        hourly_total,
        specific_cost: hourly_total / (d.feed_rate * d.product_concentration),
        capex_reactor_total,
        capex_compressor_total,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizedDesign {
    pub design: ReactorDesign,
    pub cost: CostBreakdown,
}

struct Evaluator<'a> {
    flux: &'a FluxBundle,
    kinetics: &'a KineticsParams,
    rp: &'a ReactorParams,
    cp: &'a CostParams,
    capacity: f64,
    reasons: Vec<(InfeasibleReason, usize)>,
    last: Option<InfeasibleReason>,
}

impl Evaluator<'_> {
    fn count(&mut self, r: InfeasibleReason, n: usize) {
        match self.reasons.iter_mut().find(|e| e.0 == r) {
            Some(e) => e.1 += n,
            None => self.reasons.push((r, n)),
        }
    }

    /// Hourly cost at (pH, log10 c_bio), or None when infeasible.
    fn eval(&mut self, ph: f64, log_c: f64, reactors: u32) -> Result<Option<OptimizedDesign>, ReactorError> {
        let dp = DesignPoint {
            ph,
            biomass_concentration: 10f64.powf(log_c),
            reactors,
        };
        match evaluate_design(self.flux, &dp, self.kinetics, self.rp, self.cp, self.capacity) {
            Ok(design) => {
                let cost = cost_breakdown(&design, self.cp);
                Ok(Some(OptimizedDesign { design, cost }))
            }
            Err(ReactorError::Infeasible(r)) => {
                self.count(r, 1);
                self.last = Some(r);
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    fn dominant(&self) -> InfeasibleReason {
        self.reasons
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|e| e.0)
            .unwrap_or(InfeasibleReason::GrowthAboveMaximum)
    }
}

fn cost_of(d: &Option<OptimizedDesign>) -> f64 {
    d.as_ref().map_or(f64::INFINITY, |d| d.cost.hourly_total)
}

/// Cheapest design over reactor count, pH and biomass concentration.
///
/// Grid search per reactor count followed by compass search in
/// (pH, log10 c_bio). Ties keep the smaller reactor count, then the lower pH.
pub fn optimize_design(
    flux: &FluxBundle,
    kinetics: &KineticsParams,
    rp: &ReactorParams,
    cp: &CostParams,
    capacity: f64,
) -> Result<OptimizedDesign, ReactorError> {
    let mut ev = Evaluator {
        flux,
        kinetics,
        rp,
        cp,
        capacity,
        reasons: Vec::new(),
        last: None,
    };
    // every pH shares the same inhibition bound, so test the best case first
    let best_gamma = cpm_gamma(rp.ph_opt.clamp(rp.ph_lower, rp.ph_upper), rp)?;
    if !(flux.growth < kinetics.max_growth_at_optimal_ph * best_gamma) {
        return Err(ReactorError::Infeasible(InfeasibleReason::GrowthAboveMaximum));
    }
    let (lc_lo, lc_hi) = (BIOMASS_RANGE.0.log10(), BIOMASS_RANGE.1.log10());
    let ph_step = (rp.ph_upper - rp.ph_lower) / (PH_GRID_POINTS - 1) as f64;
    let lc_step = (lc_hi - lc_lo) / (BIOMASS_GRID_POINTS - 1) as f64;
    let mut best: Option<OptimizedDesign> = None;
    for reactors in 1..=rp.max_reactors {
        let mut local: Option<(f64, f64, OptimizedDesign)> = None;
        for i in 0..PH_GRID_POINTS {
            let ph = rp.ph_lower + ph_step * i as f64;
            for j in 0..BIOMASS_GRID_POINTS {
                let lc = lc_lo + lc_step * j as f64;
                match ev.eval(ph, lc, reactors)? {
                    Some(d) => {
                        if local
                            .as_ref()
                            .map_or(true, |l| d.cost.hourly_total < l.2.cost.hourly_total)
                        {
                            local = Some((ph, lc, d));
                        }
                    }
                    None => {
                        // these checks fail for every larger c_bio as well
                        let r = ev.last.unwrap();
                        if matches!(
                            r,
                            InfeasibleReason::GrowthAboveMaximum
                                | InfeasibleReason::NoProduct
                                | InfeasibleReason::NoOxygenUptake
                                | InfeasibleReason::OxygenUptakeBound
                        ) {
                            ev.count(r, BIOMASS_GRID_POINTS - 1 - j);
                            break;
                        }
                    }
                }
            }
        }
        let Some((mut ph, mut lc, mut here)) = local else {
            continue;
        };
        let (mut sp, mut sc) = (ph_step, lc_step);
        let mut halvings = 0u32;
        let mut cost_at_halving = here.cost.hourly_total;
        loop {
            let mut moved = false;
            let mut pick: Option<(f64, f64, OptimizedDesign)> = None;
            for (dp, dc) in [(-sp, 0.0), (sp, 0.0), (0.0, -sc), (0.0, sc)] {
                let p = (ph + dp).clamp(rp.ph_lower, rp.ph_upper);
                let c = (lc + dc).clamp(lc_lo, lc_hi);
                if p == ph && c == lc {
                    continue;
                }
                let trial = ev.eval(p, c, reactors)?;
                let t = cost_of(&trial);
                let bar = pick
                    .as_ref()
                    .map_or(here.cost.hourly_total, |x| x.2.cost.hourly_total);
                if t < bar {
                    pick = Some((p, c, trial.unwrap()));
                }
            }
            if let Some((p, c, d)) = pick {
                ph = p;
                lc = c;
                here = d;
                moved = true;
            }
            if !moved {
                sp *= 0.5;
                sc *= 0.5;
                halvings += 1;
                let now = here.cost.hourly_total;
                if halvings >= MIN_HALVINGS && cost_at_halving - now <= REFINE_REL_TOL * now {
                    break;
                }
                if halvings >= 60 {
                    break;
                }
                cost_at_halving = now;
            }
        }
        if best
            .as_ref()
            .map_or(true, |b| here.cost.hourly_total < b.cost.hourly_total)
        {
            best = Some(here);
        }
    }
    best.ok_or_else(|| ReactorError::Infeasible(ev.dominant()))
}
