//! Run configuration: JSON, unknown keys rejected, defaults filled on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::barriers::BarrierSpec;
use crate::error::{Error, Result};
use crate::front::{SimParams, DEFAULT_LEVEL};
use crate::pde::InitialData;
use crate::reaction::NonlinearitySpec;
use crate::spectral::SpectralOptions;
use crate::tree::{TreeSpec, DEFAULT_EDGE_BUDGET};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spectrum,
    Barriers,
    ValidateBarriers,
    Simulate,
    SimulateTree,
    Scan,
    Speed,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Barriers => "barriers",
            ExperimentKind::ValidateBarriers => "validate-barriers",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::SimulateTree => "simulate-tree",
            ExperimentKind::Scan => "scan",
            ExperimentKind::Speed => "speed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    pub tol: f64,
    pub l_max: usize,
    pub truncations: Vec<usize>,
    pub cells_per_edge: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        let o = SpectralOptions::default();
        SpectralConfig {
            tol: o.tol,
            l_max: o.l_max,
            truncations: o.truncations,
            cells_per_edge: o.cells_per_edge,
        }
    }
}

impl SpectralConfig {
    pub fn options(&self) -> SpectralOptions {
        SpectralOptions {
            tol: self.tol,
            l_max: self.l_max,
            truncations: self.truncations.clone(),
            cells_per_edge: self.cells_per_edge,
        }
    }
}

fn default_level() -> f64 {
    DEFAULT_LEVEL
}

fn default_quad() -> usize {
    64
}

fn default_budget() -> usize {
    DEFAULT_EDGE_BUDGET
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// May be left out when the subcommand names the experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    pub tree: TreeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<NonlinearitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<InitialData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimParams>,
    #[serde(default = "default_budget")]
    pub edge_budget: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub barriers: Vec<BarrierSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub a_values: Vec<f64>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_quad")]
    pub quad_points: usize,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub plots: bool,
}

fn located(path: &str, e: serde_json::Error) -> Error {
    Error::Config(format!("{path}:{}:{}: {e}", e.line(), e.column()))
}

fn missing(field: &str, kind: ExperimentKind) -> Error {
    Error::Config(format!(
        "field `{field}`: required by the {} experiment",
        kind.as_str()
    ))
}

/// Parse a JSON run configuration and check its cross-field consistency.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: cannot read: {e}", path.display())))?;
    parse_config_str(&text, &path.display().to_string())
}

pub fn parse_config_str(text: &str, origin: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| located(origin, e))?;
    if let Some(kind) = cfg.experiment {
        cfg.validate(kind)?;
    }
    Ok(cfg)
}

impl RunConfig {
    /// Pin the experiment kind; a conflicting kind in the file is an error.
    pub fn resolve(mut self, kind: ExperimentKind) -> Result<RunConfig> {
        match self.experiment {
            Some(k) if k != kind => {
                return Err(Error::Config(format!(
                    "field `experiment`: file says {} but {} was requested",
                    k.as_str(),
                    kind.as_str()
                )))
            }
            _ => self.experiment = Some(kind),
        }
        self.validate(kind)?;
        Ok(self)
    }

    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        let tree = self
            .tree
            .build()
            .map_err(|e| Error::Config(format!("field `tree`: {e}")))?;
        if let Some(f) = &self.f {
            f.build()
                .map_err(|e| Error::Config(format!("field `f`: {e}")))?;
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!(
                "field `level`: {} not in (0, 1)",
                self.level
            )));
        }
        use ExperimentKind::*;
        if kind != Spectrum && self.f.is_none() {
            return Err(missing("f", kind));
        }
        if matches!(kind, Simulate | SimulateTree | Scan | Speed) {
            if self.u0.is_none() {
                return Err(missing("u0", kind));
            }
            if self.sim.is_none() {
                return Err(missing("sim", kind));
            }
        }
        if kind == Barriers && self.barriers.is_empty() {
            return Err(missing("barriers", kind));
        }
        if kind == Scan && self.a_values.is_empty() {
            return Err(missing("a_values", kind));
        }
        if kind == SimulateTree {
            let g = self.sim.as_ref().map_or(0, |s| s.generations);
            let mut edges = 0.0;
            for n in 0..g {
                edges += tree
                    .product(n)
                    .map_err(|e| Error::Config(format!("field `sim.generations`: {e}")))?;
            }
            if edges > self.edge_budget as f64 {
                return Err(Error::Config(format!(
                    "field `sim.generations`: {g} generations need {edges} edges, over edge_budget = {}",
                    self.edge_budget
                )));
            }
        }
        Ok(())
    }
}
