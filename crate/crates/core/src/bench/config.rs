//! Experiment configuration (JSON, same conventions as system files).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::balancing::DEFAULT_RANK_TOL;
use crate::bench::hinf::MIN_GRID;
use crate::bench::random::{DEFAULT_A_BOUNDS, DEFAULT_BC_BOUNDS};
use crate::error::{Error, Result};
use crate::projection::ProjectionVariant;
use crate::system::Time;

/// Reduction method compared in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Square-root balancing of the exact lifted Gramians.
    #[serde(rename = "exact")]
    Exact,
    /// Snapshot balancing with the full adjoint campaign (Tq simulations).
    #[serde(rename = "snapshot")]
    Snapshot,
    /// Balanced POD with a T-periodic output projection.
    #[serde(rename = "bpod-periodic")]
    BpodPeriodic,
    /// Balanced POD with one output projection for the whole period.
    #[serde(rename = "bpod-single")]
    BpodSingle,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Exact, Mode::Snapshot, Mode::BpodPeriodic, Mode::BpodSingle];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Snapshot => "snapshot",
            Mode::BpodPeriodic => "bpod-periodic",
            Mode::BpodSingle => "bpod-single",
        }
    }

    pub fn projection_variant(self) -> Option<ProjectionVariant> {
        match self {
            Mode::BpodPeriodic => Some(ProjectionVariant::Periodic),
            Mode::BpodSingle => Some(ProjectionVariant::Single),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown mode {s:?}; expected exact, snapshot, bpod-periodic or bpod-single"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    #[serde(rename = "T")]
    pub period: usize,
    pub base_time: Time,
    pub m_c: usize,
    pub m_o: usize,
    pub r_op: Vec<usize>,
    pub modes: Vec<Mode>,
    /// Error curves run over `r = 1..=min(a, max_order)`.
    pub max_order: usize,
    pub hinf_grid: usize,
    pub rank_tol: f64,
    pub a_bounds: (f64, f64),
    pub bc_bounds: (f64, f64),
    /// Number of extra periods `s` of impulse-response data used to fit the
    /// output projection; defaults to the most the controllability campaign
    /// provides, `m_c/T - 1`.
    pub projection_horizon: Option<usize>,
    /// Load the system from this file instead of generating it.
    pub system: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n: 30,
            p: 1,
            q: 30,
            period: 5,
            base_time: 1,
            m_c: 10,
            m_o: 10,
            r_op: vec![1, 2, 6, 10],
            modes: Mode::ALL.to_vec(),
            max_order: 25,
            hinf_grid: 1024,
            rank_tol: DEFAULT_RANK_TOL,
            a_bounds: DEFAULT_A_BOUNDS,
            bc_bounds: DEFAULT_BC_BOUNDS,
            projection_horizon: None,
            system: None,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn uses_projection(&self) -> bool {
        self.modes.iter().any(|m| m.projection_variant().is_some())
    }

    /// Periods of impulse-response data for the output projection.
    pub fn horizon(&self) -> usize {
        self.projection_horizon
            .unwrap_or_else(|| (self.m_c / self.period.max(1)).saturating_sub(1))
    }

    /// Checks the configuration; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 || self.p == 0 || self.q == 0 || self.period == 0 {
            return bad("n, p, q and T must all be positive".into());
        }
        if self.m_c == 0 || self.m_o == 0 {
            return bad("m_c and m_o must be positive".into());
        }
        if self.modes.is_empty() {
            return bad("no modes selected".into());
        }
        if self.max_order == 0 {
            return bad("max_order must be positive".into());
        }
        if self.hinf_grid < MIN_GRID {
            return bad(format!("hinf_grid must be at least {MIN_GRID}"));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return bad(format!("rank_tol must lie in (0, 1), got {}", self.rank_tol));
        }
        let (lo, hi) = self.a_bounds;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return bad(format!("a_bounds must satisfy 0 < lo <= hi < 1, got [{lo}, {hi}]"));
        }
        let (lo, hi) = self.bc_bounds;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("bc_bounds must be finite with lo <= hi, got [{lo}, {hi}]"));
        }
        if self.uses_projection() {
            if self.r_op.is_empty() {
                return bad("bpod modes need at least one r_op".into());
            }
            if let Some(r) = self.r_op.iter().find(|&&r| r == 0 || r > self.q) {
                return bad(format!("r_op = {r} outside 1..={}", self.q));
            }
            let need = (self.horizon() + 1) * self.period;
            if self.m_c < need {
                return bad(format!(
                    "output projection with s = {} needs m_c >= (s+1)T = {need}, got {}",
                    self.horizon(),
                    self.m_c
                ));
            }
        }
        let mut warnings = Vec::new();
        for (name, m) in [("m_c", self.m_c), ("m_o", self.m_o)] {
            if m % self.period != 0 {
                warnings.push(format!(
                    "{name} = {m} is not a multiple of T = {}; snapshot coverage is uneven over the period",
                    self.period
                ));
            }
        }
        Ok(warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ExperimentConfig::default();
        assert!(cfg.validate().unwrap().is_empty());
        assert_eq!(cfg.horizon(), 1);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"seed": 4, "T": 3, "modes": ["exact"]}"#).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.period, 3);
        assert_eq!(cfg.modes, vec![Mode::Exact]);
        assert_eq!(cfg.n, 30);
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_fields_and_bad_values_are_config_errors() {
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"sed": 1}"#),
            Err(Error::Config(_))
        ));
        let cfg = ExperimentConfig {
            r_op: vec![31],
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = ExperimentConfig {
            m_c: 4,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn uneven_horizon_warns() {
        let cfg = ExperimentConfig {
            m_o: 7,
            ..Default::default()
        };
        assert_eq!(cfg.validate().unwrap().len(), 1);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert!("bpod".parse::<Mode>().is_err());
    }
}
