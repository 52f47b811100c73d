//! Full comparison run: Hankel spectra and relative H∞ error curves for
//! exact balanced truncation, snapshot balancing, and balanced POD with
//! output projection.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balancing::{
    balance, exact_balanced_basis, exact_balanced_truncation, reduce, BalancedBasis, ReducedModel,
};
use crate::bench::config::{ExperimentConfig, Mode};
use crate::bench::hinf::{HinfEstimator, StateSpace};
use crate::bench::random::random_system;
use crate::error::{Error, Result};
use crate::gramians::{observability_factor, ControllabilityCampaign, SnapshotFactor};
use crate::io::{csv_table, fmt_f64, write_text};
use crate::lifting::{lift, ImpulseResponseBlocks, LiftedSystem};
use crate::projection::pod_output_projection;
use crate::system::PeriodicSystem;

pub const LOWER_BOUND_LABEL: &str = "lower-bound";

/// One reduction method of the comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodResult {
    /// `exact`, `snapshot`, or `bpod-<variant>-r<r_op>`.
    pub label: String,
    pub mode: Mode,
    pub r_op: Option<usize>,
    pub hankel: Vec<f64>,
    pub rank: usize,
    pub primal_simulations: usize,
    pub adjoint_simulations: usize,
    /// Fraction of impulse-response energy kept by the output projection, per offset.
    pub captured_energy: Option<Vec<f64>>,
    /// Relative H∞ errors on the report's order grid.
    pub errors: Vec<f64>,
    /// Relative H∞ error of the order-`rank` model.
    pub full_rank_error: f64,
    pub seconds: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub monodromy_spectral_radius: f64,
    /// Estimate of `‖G̃‖∞` for the full lifted system.
    pub hinf_full: f64,
    /// Exact Hankel singular values.
    pub exact_hankel: Vec<f64>,
    /// Shared reduced-order grid `r = 1..=min(a, max_order)`.
    pub orders: Vec<usize>,
    /// `σ_{r+1}/‖G̃‖∞` from the exact Hankel values (zero past the rank).
    pub lower_bound: Vec<f64>,
    pub methods: Vec<MethodResult>,
    pub total_seconds: f64,
    pub warnings: Vec<String>,
}

struct Method {
    label: String,
    mode: Mode,
    r_op: Option<usize>,
}

fn methods(config: &ExperimentConfig) -> Vec<Method> {
    let mut out = Vec::new();
    for &mode in &config.modes {
        match mode.projection_variant() {
            None => out.push(Method {
                label: mode.name().to_string(),
                mode,
                r_op: None,
            }),
            Some(_) => out.extend(config.r_op.iter().map(|&r| Method {
                label: format!("{}-r{r}", mode.name()),
                mode,
                r_op: Some(r),
            })),
        }
    }
    out
}

/// Builds the system described by `config` (loaded or generated).
pub fn experiment_system(config: &ExperimentConfig) -> Result<PeriodicSystem> {
    match &config.system {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            PeriodicSystem::from_json(&text).map_err(|e| e.context(path.display().to_string()))
        }
        None => random_system(
            config.seed,
            config.n,
            config.p,
            config.q,
            config.period,
            config.a_bounds,
            config.bc_bounds,
        )
        .map_err(|e| Error::Config(e.to_string())),
    }
}

/// Validates `config`, builds its system and runs the comparison.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let sys = experiment_system(config)?;
    run_experiment_on(&sys, config)
}

/// Shared state for all methods: snapshot campaign, lifted system, exact
/// balancing and the cached frequency responses of `G̃`.
struct Setup<'a> {
    sys: &'a PeriodicSystem,
    config: &'a ExperimentConfig,
    lifted: LiftedSystem,
    campaign: Option<ControllabilityCampaign>,
    blocks: Option<ImpulseResponseBlocks>,
    exact: BalancedBasis,
}

struct Built {
    basis: BalancedBasis,
    model: ReducedModel,
    primal: usize,
    adjoint: usize,
    captured_energy: Option<Vec<f64>>,
    warnings: Vec<String>,
}

/// Snapshot balancing for one method, given the shared primal campaign.
fn snapshot_basis(
    sys: &PeriodicSystem,
    config: &ExperimentConfig,
    campaign: &ControllabilityCampaign,
    blocks: Option<&ImpulseResponseBlocks>,
    method: &Method,
) -> Result<Built> {
    let ctx = |step: &str| format!("mode {}, {step}", method.label);
    let x: SnapshotFactor = campaign.factor();
    let mut warnings = Vec::new();
    let mut captured_energy = None;
    let projection = match (method.mode.projection_variant(), method.r_op, blocks) {
        (Some(variant), Some(r_op), Some(blocks)) => {
            let proj = pod_output_projection(blocks, r_op, variant)
                .map_err(|e| e.context(ctx("output projection")))?;
            warnings.extend(proj.warnings.iter().cloned());
            captured_energy = Some(proj.captured_energy.clone());
            Some(proj)
        }
        (Some(_), _, _) => {
            return Err(Error::Config(format!(
                "{} needs r_op and impulse-response blocks",
                method.label
            )))
        }
        _ => None,
    };
    let y = observability_factor(sys, config.base_time, config.m_o, projection.as_ref())
        .map_err(|e| e.context(ctx("adjoint snapshots")))?;
    let basis = balance(&x, &y, config.rank_tol).map_err(|e| e.context(ctx("balancing")))?;
    let model = reduce(sys, &basis, basis.rank()).map_err(|e| e.context(ctx("reduction")))?;
    Ok(Built {
        primal: x.simulations,
        adjoint: y.simulations,
        basis,
        model,
        captured_energy,
        warnings,
    })
}

impl Setup<'_> {
    fn build(&self, method: &Method) -> Result<Built> {
        if method.mode == Mode::Exact {
            let model = ReducedModel::from_lifted(&self.lifted, &self.exact, self.exact.rank())
                .map_err(|e| e.context(format!("mode {}, reduction", method.label)))?;
            return Ok(Built {
                basis: self.exact.clone(),
                model,
                primal: 0,
                adjoint: 0,
                captured_energy: None,
                warnings: Vec::new(),
            });
        }
        let campaign = self.campaign.as_ref().expect("campaign runs for snapshot modes");
        snapshot_basis(self.sys, self.config, campaign, self.blocks.as_ref(), method)
    }
}

/// Balancing basis and order-`order` model for a single method, using the
/// base time, horizons, projection horizon and rank tolerance of `config`.
pub fn reduce_with_mode(
    sys: &PeriodicSystem,
    config: &ExperimentConfig,
    mode: Mode,
    r_op: Option<usize>,
    order: usize,
) -> Result<(BalancedBasis, ReducedModel)> {
    let j = config.base_time;
    if mode == Mode::Exact {
        return exact_balanced_truncation(&lift(sys, j), order).map_err(|e| e.context("mode exact"));
    }
    let label = match r_op {
        Some(r) if mode.projection_variant().is_some() => format!("{mode}-r{r}"),
        _ => mode.name().to_string(),
    };
    let campaign =
        ControllabilityCampaign::run(sys, j, config.m_c).map_err(|e| e.context("controllability snapshots"))?;
    let blocks = match mode.projection_variant() {
        Some(_) => Some(
            campaign
                .impulse_response_blocks(sys, config.horizon())
                .map_err(|e| e.context("impulse-response reuse"))?,
        ),
        None => None,
    };
    let method = Method { label, mode, r_op };
    let built = snapshot_basis(sys, config, &campaign, blocks.as_ref(), &method)?;
    let model = built.model.truncate(order)?;
    Ok((built.basis, model))
}

/// Runs every configured method on `sys` (the config's generation fields
/// are ignored).
pub fn run_experiment_on(sys: &PeriodicSystem, config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let mut warnings = config.validate()?;
    if config.uses_projection() && config.r_op.iter().any(|&r| r > sys.outputs()) {
        return Err(Error::Config(format!(
            "r_op exceeds the number of outputs q = {}",
            sys.outputs()
        )));
    }
    sys.ensure_stable().map_err(|e| e.context("system check"))?;
    let j = config.base_time;
    let lifted = lift(sys, j);
    let exact = exact_balanced_basis(&lifted).map_err(|e| e.context("exact Hankel values"))?;
    let estimator = HinfEstimator::new(StateSpace::from_lifted(&lifted), config.hinf_grid)?;
    warnings.extend(estimator.norm().warnings());
    let hinf_full = estimator.norm().value;
    if !(hinf_full > 0.0) {
        return Err(Error::EmptyBasis.context("full system has a zero transfer function"));
    }

    let needs_campaign = config.modes.iter().any(|&m| m != Mode::Exact);
    let campaign = if needs_campaign {
        Some(
            ControllabilityCampaign::run(sys, j, config.m_c)
                .map_err(|e| e.context("controllability snapshots"))?,
        )
    } else {
        None
    };
    let blocks = match (&campaign, config.uses_projection()) {
        (Some(c), true) => Some(
            c.impulse_response_blocks(sys, config.horizon())
                .map_err(|e| e.context("impulse-response reuse"))?,
        ),
        _ => None,
    };
    let setup = Setup {
        sys,
        config,
        lifted,
        campaign,
        blocks,
        exact,
    };

    let methods = methods(config);
    let built: Vec<(Result<Built>, f64)> = methods
        .par_iter()
        .map(|m| {
            let t = Instant::now();
            let b = setup.build(m);
            (b, t.elapsed().as_secs_f64())
        })
        .collect();
    let mut ok = Vec::with_capacity(built.len());
    for (b, secs) in built {
        ok.push((b?, secs));
    }

    let max_rank = ok
        .iter()
        .map(|(b, _)| b.basis.rank())
        .min()
        .unwrap_or(0)
        .min(config.max_order);
    let orders: Vec<usize> = (1..=max_rank).collect();
    let exact_hankel = setup.exact.hankel.clone();
    let lower_bound = orders
        .iter()
        .map(|&r| exact_hankel.get(r).copied().unwrap_or(0.0) / hinf_full)
        .collect();

    let relative_error = |model: &ReducedModel, r: usize| -> Result<f64> {
        let truncated = model.truncate(r)?;
        Ok(estimator.error_norm(&StateSpace::from_reduced(&truncated))?.value / hinf_full)
    };
    let mut results = Vec::with_capacity(methods.len());
    for (method, (b, secs)) in methods.iter().zip(ok) {
        let t = Instant::now();
        let errors = orders
            .par_iter()
            .map(|&r| relative_error(&b.model, r))
            .collect::<Result<Vec<f64>>>()
            .map_err(|e| e.context(format!("mode {}, error curve", method.label)))?;
        let full_rank_error = relative_error(&b.model, b.basis.rank())
            .map_err(|e| e.context(format!("mode {}, error curve", method.label)))?;
        let mut method_warnings = b.warnings;
        for w in &b.model.warnings {
            method_warnings.push(w.clone());
        }
        results.push(MethodResult {
            label: method.label.clone(),
            mode: method.mode,
            r_op: method.r_op,
            rank: b.basis.rank(),
            hankel: b.basis.hankel,
            primal_simulations: b.primal,
            adjoint_simulations: b.adjoint,
            captured_energy: b.captured_energy,
            errors,
            full_rank_error,
            seconds: secs + t.elapsed().as_secs_f64(),
            warnings: method_warnings,
        });
    }

    Ok(ExperimentReport {
        config: config.clone(),
        monodromy_spectral_radius: sys.spectral_radius(),
        hinf_full,
        exact_hankel,
        orders,
        lower_bound,
        methods: results,
        total_seconds: started.elapsed().as_secs_f64(),
        warnings,
    })
}

impl ExperimentReport {
    pub fn method(&self, label: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.label == label)
    }

    /// Hankel singular values, `r,quantity,mode` (exact values under `exact`
    /// even when the exact mode was not run).
    pub fn hankel_csv(&self) -> String {
        let mut rows = Vec::new();
        let exact_run = self.method(Mode::Exact.name()).is_some();
        if !exact_run {
            for (i, s) in self.exact_hankel.iter().enumerate() {
                rows.push(vec![(i + 1).to_string(), fmt_f64(*s), "exact".into()]);
            }
        }
        for m in &self.methods {
            for (i, s) in m.hankel.iter().enumerate() {
                rows.push(vec![(i + 1).to_string(), fmt_f64(*s), m.label.clone()]);
            }
        }
        csv_table(&["r", "quantity", "mode"], &rows)
    }

    /// Relative H∞ errors and the lower-bound curve, `r,quantity,mode`.
    pub fn errors_csv(&self) -> String {
        let mut rows = Vec::new();
        for m in &self.methods {
            for (r, e) in self.orders.iter().zip(&m.errors) {
                rows.push(vec![r.to_string(), fmt_f64(*e), m.label.clone()]);
            }
        }
        for (r, lb) in self.orders.iter().zip(&self.lower_bound) {
            rows.push(vec![r.to_string(), fmt_f64(*lb), LOWER_BOUND_LABEL.into()]);
        }
        csv_table(&["r", "quantity", "mode"], &rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `hankel.csv`, `errors.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join("hankel.csv"), &self.hankel_csv())?;
        write_text(&dir.join("errors.csv"), &self.errors_csv())?;
        write_text(&dir.join("report.json"), &self.to_json()?)
    }
}
