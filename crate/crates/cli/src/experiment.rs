//! Experiment definitions: which config keys each figure pins, what it sweeps
//! and which schemes it compares.

use anyhow::{anyhow, bail, Result};
use clap::ValueEnum;
use risee::SchemeKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    /// Beamformer-subproblem convergence at several power budgets.
    Fig5a,
    /// Phase-subproblem convergence at several power budgets.
    Fig5b,
    /// Alternating-maximization convergence at several power budgets.
    Fig5c,
    /// Quantized phases versus power budget.
    Fig6,
    /// Schemes versus outage bound.
    Fig7a,
    /// Schemes versus power budget.
    Fig7b,
    /// Per-iteration wall time versus antennas and elements.
    Scaling,
    /// The config as given, with optional sweeps and schemes.
    Custom,
}

/// One swept key and its values, applied as `key=value` overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<f64>,
}

impl Sweep {
    /// Parses `section.key=v1,v2,...`.
    pub fn parse(text: &str) -> Result<Self> {
        let (key, list) = text
            .split_once('=')
            .ok_or_else(|| anyhow!("sweep `{text}` is not of the form section.key=v1,v2,..."))?;
        let values = list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| anyhow!("sweep value `{v}`: {e}")))
            .collect::<Result<Vec<_>>>()?;
        let sweep = Sweep {
            key: key.trim().to_string(),
            values,
        };
        sweep.check()?;
        Ok(sweep)
    }

    pub fn check(&self) -> Result<()> {
        if self.values.is_empty() {
            bail!("sweep `{}` has no values", self.key);
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            bail!("sweep `{}` has a non-finite value", self.key);
        }
        if self.values.windows(2).any(|p| p[1] <= p[0]) {
            bail!("sweep `{}` values must be strictly increasing", self.key);
        }
        Ok(())
    }

    fn new(key: &str, values: &[f64]) -> Self {
        Sweep {
            key: key.to_string(),
            values: values.to_vec(),
        }
    }
}

/// What a run does, apart from the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment: ExperimentId,
    /// Run one after another; an empty list means a single point.
    pub sweeps: Vec<Sweep>,
    pub schemes: Vec<String>,
    /// Whether wall-clock columns are measured or written as zero.
    pub timing: bool,
}

impl ExperimentSpec {
    pub fn scheme_kinds(&self) -> Result<Vec<SchemeKind>> {
        self.schemes.iter().map(|s| s.parse::<SchemeKind>().map_err(|e| anyhow!(e))).collect()
    }

    pub fn check(&self) -> Result<()> {
        if self.schemes.is_empty() {
            bail!("no schemes selected");
        }
        self.scheme_kinds()?;
        self.sweeps.iter().try_for_each(Sweep::check)
    }
}

const POWER_DBM: [f64; 5] = [-10.0, -5.0, 0.0, 5.0, 10.0];

/// Config keys the experiment fixes, its default sweeps and schemes.
pub struct Preset {
    pub pins: Vec<String>,
    pub sweeps: Vec<Sweep>,
    pub schemes: Vec<SchemeKind>,
}

fn pins(list: &[(&str, &str)]) -> Vec<String> {
    list.iter().map(|(k, v)| format!("{k}={v}")).collect()
}

pub fn preset(id: ExperimentId) -> Preset {
    let dense = [
        ("system.n_antennas", "10"),
        ("system.n_elements", "10"),
        ("system.n_users", "5"),
        ("system.n_eves", "10"),
        ("system.sop_bound", "0.1"),
    ];
    let single = [
        ("system.n_antennas", "10"),
        ("system.n_elements", "10"),
        ("system.n_users", "1"),
        ("system.n_eves", "1"),
    ];
    let all_schemes = vec![
        SchemeKind::Proposed,
        SchemeKind::Fps,
        SchemeKind::Rps,
        SchemeKind::IgnoreUncertainty,
    ];
    match id {
        ExperimentId::Fig5a | ExperimentId::Fig5b | ExperimentId::Fig5c => Preset {
            pins: pins(&dense),
            sweeps: vec![Sweep::new("system.p_max_dbm", &[-10.0, 0.0, 10.0])],
            schemes: vec![SchemeKind::Proposed],
        },
        ExperimentId::Fig6 => {
            let mut p = dense.to_vec();
            p[1] = ("system.n_elements", "8");
            Preset {
                pins: pins(&p),
                sweeps: vec![Sweep::new("system.p_max_dbm", &POWER_DBM)],
                schemes: vec![
                    SchemeKind::Quantized(2),
                    SchemeKind::Quantized(4),
                    SchemeKind::Quantized(8),
                    SchemeKind::Proposed,
                ],
            }
        }
        ExperimentId::Fig7a => {
            let mut p = single.to_vec();
            p.push(("system.p_max_dbm", "0"));
            Preset {
                pins: pins(&p),
                sweeps: vec![Sweep::new(
                    "system.sop_bound",
                    &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
                )],
                schemes: all_schemes,
            }
        }
        ExperimentId::Fig7b => {
            let mut p = single.to_vec();
            p.push(("system.sop_bound", "0.5"));
            Preset {
                pins: pins(&p),
                sweeps: vec![Sweep::new("system.p_max_dbm", &POWER_DBM)],
                schemes: all_schemes,
            }
        }
        ExperimentId::Scaling => Preset {
            pins: pins(&[
                ("system.n_antennas", "10"),
                ("system.n_elements", "10"),
                ("system.n_users", "5"),
                ("system.n_eves", "10"),
                ("system.sop_bound", "0.5"),
                ("system.p_max_dbm", "0"),
            ]),
            sweeps: vec![
                Sweep::new("system.n_antennas", &[16.0, 32.0, 64.0, 128.0]),
                Sweep::new("system.n_elements", &[16.0, 32.0, 64.0, 128.0]),
            ],
            schemes: vec![SchemeKind::Proposed],
        },
        ExperimentId::Custom => Preset {
            pins: Vec::new(),
            sweeps: Vec::new(),
            schemes: vec![SchemeKind::Proposed],
        },
    }
}
