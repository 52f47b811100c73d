//! Hankel spectra as a function of the base time within one period.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balancing::{balance, exact_balanced_basis};
use crate::error::{Error, Result};
use crate::gramians::{controllability_factor, observability_factor};
use crate::io::{csv_table, fmt_f64};
use crate::lifting::lift;
use crate::system::{PeriodicSystem, Time};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub base_time: Time,
    /// Snapshot-method Hankel values.
    pub hankel: Vec<f64>,
    pub exact_hankel: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestBaseTime {
    pub order: usize,
    pub base_time: Time,
    /// `σ_{r+1}(j)` at the chosen base time (zero past the numerical rank).
    pub next_hankel: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub m_c: usize,
    pub m_o: usize,
    pub entries: Vec<SweepEntry>,
    pub best: Vec<BestBaseTime>,
}

/// Runs the snapshot pipeline at every base time `j = 1..T` and, for each
/// order r, reports the base time minimizing `σ_{r+1}(j)` (ties go to the
/// earliest j). With `exact`, the exact Hankel values are computed as well.
pub fn base_time_sweep(
    sys: &PeriodicSystem,
    m_c: usize,
    m_o: usize,
    orders: &[usize],
    exact: bool,
    rank_tol: f64,
) -> Result<SweepReport> {
    if orders.contains(&0) {
        return Err(Error::InvalidArgument("orders must be positive".into()));
    }
    let entries = (1..=sys.period() as Time)
        .into_par_iter()
        .map(|j| {
            let ctx = |step: &str| format!("base time {j}, {step}");
            let x = controllability_factor(sys, j, m_c).map_err(|e| e.context(ctx("controllability")))?;
            let y = observability_factor(sys, j, m_o, None).map_err(|e| e.context(ctx("observability")))?;
            let hankel = balance(&x, &y, rank_tol).map_err(|e| e.context(ctx("balancing")))?.hankel;
            let exact_hankel = if exact {
                Some(
                    exact_balanced_basis(&lift(sys, j))
                        .map_err(|e| e.context(ctx("exact Hankel values")))?
                        .hankel,
                )
            } else {
                None
            };
            Ok(SweepEntry {
                base_time: j,
                hankel,
                exact_hankel,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = orders
        .iter()
        .map(|&r| {
            let next = |e: &SweepEntry| e.hankel.get(r).copied().unwrap_or(0.0);
            let winner = entries
                .iter()
                .min_by(|a, b| next(a).total_cmp(&next(b)))
                .expect("period is positive");
            BestBaseTime {
                order: r,
                base_time: winner.base_time,
                next_hankel: next(winner),
            }
        })
        .collect();
    Ok(SweepReport {
        m_c,
        m_o,
        entries,
        best,
    })
}

impl SweepReport {
    /// `j,r,quantity,mode` with mode `snapshot` or `exact`.
    pub fn to_csv(&self) -> String {
        let mut rows = Vec::new();
        for e in &self.entries {
            let mut push = |values: &[f64], mode: &str| {
                for (i, s) in values.iter().enumerate() {
                    rows.push(vec![
                        e.base_time.to_string(),
                        (i + 1).to_string(),
                        fmt_f64(*s),
                        mode.to_string(),
                    ]);
                }
            };
            push(&e.hankel, "snapshot");
            if let Some(exact) = &e.exact_hankel {
                push(exact, "exact");
            }
        }
        csv_table(&["j", "r", "quantity", "mode"], &rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
