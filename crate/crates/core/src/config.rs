//! Scenario configuration.
//!
//! A config file is TOML with five sections. Every field has a default, so an
//! empty file describes the reference scenario (5 users, 10 eavesdroppers,
//! 10 antennas, 10 reflecting elements, 0 dBm budget, epsilon = 0.1).
//!
//! | key | unit | default |
//! |-----|------|---------|
//! | `system.n_antennas` | count | 10 |
//! | `system.n_elements` | count | 10 |
//! | `system.n_users` | count | 5 |
//! | `system.n_eves` | count | 10 |
//! | `system.p_max_dbm` | dBm | 0 |
//! | `system.eta` | unitless, (0,1] | 0.311 |
//! | `system.ignore_transmit_power` | bool; sets 1/eta = 0 | false |
//! | `system.p_a_dbm` | dBm | 39 |
//! | `system.p_c_dbm` | dBm | 20 |
//! | `system.p_s_dbm` | dBm | 10 |
//! | `system.sop_bound` | probability, scalar or per-user list | 0.1 |
//! | `system.noise_psd_dbm_per_hz` | dBm/Hz (users) | -96 |
//! | `system.eve_noise_psd_dbm_per_hz` | dBm/Hz (eavesdroppers) | -96 |
//! | `system.bandwidth_hz` | Hz | 1e7 |
//! | `system.quantization_levels` | `"continuous"` or integer >= 2 | `"continuous"` |
//! | `geometry.bs_position` | m, [x, y] | [0, 0] |
//! | `geometry.ris_position` | m | [50, 0] |
//! | `geometry.user_center` | m | [50, 20] |
//! | `geometry.user_radius` | m | 5 |
//! | `geometry.eve_ris_distance` | m, [min, max] | [1, 10] |
//! | `pathloss.ref_loss_db` | dB at the reference distance | 30 |
//! | `pathloss.ref_distance_m` | m | 1 |
//! | `pathloss.exp_bs_ris` | unitless | 2.2 |
//! | `pathloss.exp_ris_user` | unitless | 2.2 |
//! | `pathloss.exp_ris_eve` | unitless | 2.2 |
//! | `pathloss.exp_bs_user` | unitless | 3.5 |
//! | `pathloss.exp_bs_eve` | unitless | 3.5 |
//! | `pathloss.eve_var_ris` | small-scale variance of RIS-Eve links | 1 |
//! | `pathloss.eve_var_direct` | small-scale variance of BS-Eve links | 1 |
//! | `solver.tolerance` | relative objective change, every layer | 1e-4 |
//! | `solver.max_am_rounds` | count | 50 |
//! | `solver.max_pfp_rounds` | count | 50 |
//! | `solver.max_qt_rounds` | count | 50 |
//! | `solver.max_pg_iters` | count | 500 |
//! | `solver.max_manifold_iters` | count | 500 |
//! | `solver.armijo_initial_step` | | 1.0 |
//! | `solver.armijo_shrink` | | 0.5 |
//! | `solver.armijo_slope` | | 1e-4 |
//! | `solver.armijo_max_backtracks` | | 40 |
//! | `solver.manifold_beta` | shrinkage, > 0 | 0.1 |
//! | `solver.manifold_step_fraction` | step = fraction / L_g, in (0,1) | 0.9 |
//! | `solver.phase_init` | `"ones"` or `"random"` | `"ones"` |
//! | `run.rng_seed` | u64 | 1 |
//! | `run.trials` | count | 500 |
//! | `run.workers` | threads, 0 = all cores | 0 |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::Q2Options;
use crate::orchestrator::AmOptions;
use crate::pg::{ArmijoOptions, D1Options};
use crate::units::{dbm_to_watts, noise_power_watts};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RawConfig {
    pub system: SystemSection,
    pub geometry: GeometrySection,
    pub pathloss: PathlossSection,
    pub solver: SolverSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SopBound {
    Common(f64),
    PerUser(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuantizationLevels {
    Levels(u32),
    Named(Continuous),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Continuous {
    Continuous,
}

impl QuantizationLevels {
    pub fn levels(self) -> Option<u32> {
        match self {
            QuantizationLevels::Levels(l) => Some(l),
            QuantizationLevels::Named(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PhaseInit {
    #[default]
    Ones,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub n_antennas: usize,
    pub n_elements: usize,
    pub n_users: usize,
    pub n_eves: usize,
    pub p_max_dbm: f64,
    pub eta: f64,
    pub ignore_transmit_power: bool,
    pub p_a_dbm: f64,
    pub p_c_dbm: f64,
    pub p_s_dbm: f64,
    pub sop_bound: SopBound,
    pub noise_psd_dbm_per_hz: f64,
    pub eve_noise_psd_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
    pub quantization_levels: QuantizationLevels,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            n_antennas: 10,
            n_elements: 10,
            n_users: 5,
            n_eves: 10,
            p_max_dbm: 0.0,
            eta: 0.311,
            ignore_transmit_power: false,
            p_a_dbm: 39.0,
            p_c_dbm: 20.0,
            p_s_dbm: 10.0,
            sop_bound: SopBound::Common(0.1),
            noise_psd_dbm_per_hz: -96.0,
            eve_noise_psd_dbm_per_hz: -96.0,
            bandwidth_hz: 10e6,
            quantization_levels: QuantizationLevels::Named(Continuous::Continuous),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub bs_position: [f64; 2],
    pub ris_position: [f64; 2],
    pub user_center: [f64; 2],
    pub user_radius: f64,
    pub eve_ris_distance: [f64; 2],
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            bs_position: [0.0, 0.0],
            ris_position: [50.0, 0.0],
            user_center: [50.0, 20.0],
            user_radius: 5.0,
            eve_ris_distance: [1.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathlossSection {
    pub ref_loss_db: f64,
    pub ref_distance_m: f64,
    pub exp_bs_ris: f64,
    pub exp_ris_user: f64,
    pub exp_ris_eve: f64,
    pub exp_bs_user: f64,
    pub exp_bs_eve: f64,
    pub eve_var_ris: f64,
    pub eve_var_direct: f64,
}

impl Default for PathlossSection {
    fn default() -> Self {
        Self {
            ref_loss_db: 30.0,
            ref_distance_m: 1.0,
            exp_bs_ris: 2.2,
            exp_ris_user: 2.2,
            exp_ris_eve: 2.2,
            exp_bs_user: 3.5,
            exp_bs_eve: 3.5,
            eve_var_ris: 1.0,
            eve_var_direct: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tolerance: f64,
    pub max_am_rounds: usize,
    pub max_pfp_rounds: usize,
    pub max_qt_rounds: usize,
    pub max_pg_iters: usize,
    pub max_manifold_iters: usize,
    pub armijo_initial_step: f64,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    pub armijo_max_backtracks: usize,
    pub manifold_beta: f64,
    pub manifold_step_fraction: f64,
    pub phase_init: PhaseInit,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_am_rounds: 50,
            max_pfp_rounds: 50,
            max_qt_rounds: 50,
            max_pg_iters: 500,
            max_manifold_iters: 500,
            armijo_initial_step: 1.0,
            armijo_shrink: 0.5,
            armijo_slope: 1e-4,
            armijo_max_backtracks: 40,
            manifold_beta: 0.1,
            manifold_step_fraction: 0.9,
            phase_init: PhaseInit::Ones,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub rng_seed: u64,
    pub trials: usize,
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            rng_seed: 1,
            trials: 500,
            workers: 0,
        }
    }
}

/// Node positions in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub bs: [f64; 2],
    pub ris: [f64; 2],
    pub user_center: [f64; 2],
    pub user_radius: f64,
    pub eve_ris_min: f64,
    pub eve_ris_max: f64,
}

/// Log-distance path-loss parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PathlossModel {
    pub ref_loss_db: f64,
    pub ref_distance: f64,
    pub exp_bs_ris: f64,
    pub exp_ris_user: f64,
    pub exp_ris_eve: f64,
    pub exp_bs_user: f64,
    pub exp_bs_eve: f64,
    pub eve_var_ris: f64,
    pub eve_var_direct: f64,
}

/// Validated scenario, all powers in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n_antennas: usize,
    pub n_elements: usize,
    pub n_users: usize,
    pub n_eves: usize,
    pub p_max: f64,
    pub eta: f64,
    /// `1/eta`, or 0 in spectral-efficiency mode.
    pub inv_eta: f64,
    pub p_a: f64,
    pub p_c: f64,
    pub p_s: f64,
    /// One bound per user.
    pub sop_bounds: Vec<f64>,
    pub sigma2_user: f64,
    pub sigma2_eve: f64,
    pub bandwidth_hz: f64,
    pub geometry: Geometry,
    pub pathloss: PathlossModel,
    pub quantization: QuantizationLevels,
    pub phase_init: PhaseInit,
    pub am: AmOptions,
    pub rng_seed: u64,
    pub trials: usize,
    pub workers: usize,
}

impl RawConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<SystemConfig> {
        validate_config(self)
    }
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite and > 0, got {x}")))
    }
}

fn finite(field: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, "must be finite"))
    }
}

fn at_least_one(field: &str, n: usize) -> Result<()> {
    if n >= 1 {
        Ok(())
    } else {
        Err(Error::config(field, "must be >= 1"))
    }
}

/// Checks every range constraint and converts to linear units.
pub fn validate_config(raw: &RawConfig) -> Result<SystemConfig> {
    let s = &raw.system;
    at_least_one("system.n_antennas", s.n_antennas)?;
    at_least_one("system.n_elements", s.n_elements)?;
    at_least_one("system.n_users", s.n_users)?;
    at_least_one("system.n_eves", s.n_eves)?;
    finite("system.p_max_dbm", s.p_max_dbm)?;
    if !(s.eta > 0.0 && s.eta <= 1.0) {
        return Err(Error::config("system.eta", format!("must lie in (0,1], got {}", s.eta)));
    }
    for (name, v) in [
        ("system.p_a_dbm", s.p_a_dbm),
        ("system.p_c_dbm", s.p_c_dbm),
        ("system.p_s_dbm", s.p_s_dbm),
        ("system.noise_psd_dbm_per_hz", s.noise_psd_dbm_per_hz),
        ("system.eve_noise_psd_dbm_per_hz", s.eve_noise_psd_dbm_per_hz),
    ] {
        finite(name, v)?;
    }
    positive("system.bandwidth_hz", s.bandwidth_hz)?;

    let sop_bounds = match &s.sop_bound {
        SopBound::Common(e) => vec![*e; s.n_users],
        SopBound::PerUser(v) => {
            if v.len() != s.n_users {
                return Err(Error::config(
                    "system.sop_bound",
                    format!("expected {} entries, got {}", s.n_users, v.len()),
                ));
            }
            v.clone()
        }
    };
    if let Some(e) = sop_bounds.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Error::config(
            "system.sop_bound",
            format!("sop_bound out of (0,1): {e}"),
        ));
    }
    if let QuantizationLevels::Levels(l) = s.quantization_levels {
        if l < 2 {
            return Err(Error::config("system.quantization_levels", "must be >= 2"));
        }
    }

    let g = &raw.geometry;
    for (name, p) in [
        ("geometry.bs_position", g.bs_position),
        ("geometry.ris_position", g.ris_position),
        ("geometry.user_center", g.user_center),
    ] {
        if !p.iter().all(|c| c.is_finite()) {
            return Err(Error::config(name, "coordinates must be finite"));
        }
    }
    if !(g.user_radius.is_finite() && g.user_radius >= 0.0) {
        return Err(Error::config("geometry.user_radius", "must be finite and >= 0"));
    }
    let [dmin, dmax] = g.eve_ris_distance;
    if !(dmin.is_finite() && dmax.is_finite() && dmin > 0.0 && dmin <= dmax) {
        return Err(Error::config(
            "geometry.eve_ris_distance",
            "must satisfy 0 < min <= max",
        ));
    }

    let p = &raw.pathloss;
    finite("pathloss.ref_loss_db", p.ref_loss_db)?;
    positive("pathloss.ref_distance_m", p.ref_distance_m)?;
    for (name, v) in [
        ("pathloss.exp_bs_ris", p.exp_bs_ris),
        ("pathloss.exp_ris_user", p.exp_ris_user),
        ("pathloss.exp_ris_eve", p.exp_ris_eve),
        ("pathloss.exp_bs_user", p.exp_bs_user),
        ("pathloss.exp_bs_eve", p.exp_bs_eve),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::config(name, "must be finite and >= 0"));
        }
    }
    positive("pathloss.eve_var_ris", p.eve_var_ris)?;
    positive("pathloss.eve_var_direct", p.eve_var_direct)?;

    let sv = &raw.solver;
    positive("solver.tolerance", sv.tolerance)?;
    for (name, n) in [
        ("solver.max_am_rounds", sv.max_am_rounds),
        ("solver.max_pfp_rounds", sv.max_pfp_rounds),
        ("solver.max_qt_rounds", sv.max_qt_rounds),
        ("solver.max_pg_iters", sv.max_pg_iters),
        ("solver.max_manifold_iters", sv.max_manifold_iters),
    ] {
        at_least_one(name, n)?;
    }
    positive("solver.armijo_initial_step", sv.armijo_initial_step)?;
    if !(sv.armijo_shrink > 0.0 && sv.armijo_shrink < 1.0) {
        return Err(Error::config("solver.armijo_shrink", "must lie in (0,1)"));
    }
    if !(sv.armijo_slope > 0.0 && sv.armijo_slope < 1.0) {
        return Err(Error::config("solver.armijo_slope", "must lie in (0,1)"));
    }
    positive("solver.manifold_beta", sv.manifold_beta)?;
    if !(sv.manifold_step_fraction > 0.0 && sv.manifold_step_fraction < 1.0) {
        return Err(Error::config("solver.manifold_step_fraction", "must lie in (0,1)"));
    }
    at_least_one("run.trials", raw.run.trials)?;

    let armijo = ArmijoOptions {
        initial_step: sv.armijo_initial_step,
        shrink: sv.armijo_shrink,
        slope: sv.armijo_slope,
        max_backtracks: sv.armijo_max_backtracks,
    };
    let am = AmOptions {
        tolerance: sv.tolerance,
        max_rounds: sv.max_am_rounds,
        d1: D1Options {
            tolerance: sv.tolerance,
            max_pfp_rounds: sv.max_pfp_rounds,
            max_qt_rounds: sv.max_qt_rounds,
            max_inner_iters: sv.max_pg_iters,
            armijo,
            momentum: true,
        },
        q2: Q2Options {
            tolerance: sv.tolerance,
            max_pfp_rounds: sv.max_pfp_rounds,
            max_inner_iters: sv.max_manifold_iters,
            beta: sv.manifold_beta,
            step_fraction: sv.manifold_step_fraction,
            max_backtracks: sv.armijo_max_backtracks,
        },
    };

    Ok(SystemConfig {
        n_antennas: s.n_antennas,
        n_elements: s.n_elements,
        n_users: s.n_users,
        n_eves: s.n_eves,
        p_max: dbm_to_watts(s.p_max_dbm),
        eta: s.eta,
        inv_eta: if s.ignore_transmit_power { 0.0 } else { 1.0 / s.eta },
        p_a: dbm_to_watts(s.p_a_dbm),
        p_c: dbm_to_watts(s.p_c_dbm),
        p_s: dbm_to_watts(s.p_s_dbm),
        sop_bounds,
        sigma2_user: noise_power_watts(s.noise_psd_dbm_per_hz, s.bandwidth_hz),
        sigma2_eve: noise_power_watts(s.eve_noise_psd_dbm_per_hz, s.bandwidth_hz),
        bandwidth_hz: s.bandwidth_hz,
        geometry: Geometry {
            bs: g.bs_position,
            ris: g.ris_position,
            user_center: g.user_center,
            user_radius: g.user_radius,
            eve_ris_min: dmin,
            eve_ris_max: dmax,
        },
        pathloss: PathlossModel {
            ref_loss_db: p.ref_loss_db,
            ref_distance: p.ref_distance_m,
            exp_bs_ris: p.exp_bs_ris,
            exp_ris_user: p.exp_ris_user,
            exp_ris_eve: p.exp_ris_eve,
            exp_bs_user: p.exp_bs_user,
            exp_bs_eve: p.exp_bs_eve,
            eve_var_ris: p.eve_var_ris,
            eve_var_direct: p.eve_var_direct,
        },
        quantization: s.quantization_levels,
        phase_init: sv.phase_init,
        am,
        rng_seed: raw.run.rng_seed,
        trials: raw.run.trials,
        workers: raw.run.workers,
    })
}

impl SystemConfig {
    /// The reference scenario with every default in place.
    pub fn reference() -> Self {
        validate_config(&RawConfig::default()).expect("defaults are valid")
    }
}
