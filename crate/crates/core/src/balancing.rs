//! Balancing transformation from snapshot factors, reduced lifted models,
//! and the exact square-root balanced truncation used as an oracle.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gramians::{solve_stein, SnapshotFactor};
use crate::io::{matrix, matrix_list};
use crate::lifting::{input_maps_by_simulation, LiftedSystem};
use crate::linalg::{self, sorted_svd, vstack};
use crate::system::{PeriodicSystem, Time, STABILITY_MARGIN};

/// Singular values of `YᵀX` at or below this fraction of the largest are
/// treated as zero Hankel singular values.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Relative gap `(σ_r − σ_{r+1})/σ_1` below which a truncation is flagged.
const BOUNDARY_GAP_WARN: f64 = 1e-10;

/// Leading balancing modes: `Φ` (direct), `Ψ` (adjoint) with `ΨᵀΦ = I`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BalancedBasis {
    pub base_time: Time,
    #[serde(with = "matrix")]
    pub direct: DMatrix<f64>,
    #[serde(with = "matrix")]
    pub adjoint: DMatrix<f64>,
    /// Nonzero Hankel singular values, descending.
    pub hankel: Vec<f64>,
    pub rank_tol: f64,
}

impl BalancedBasis {
    /// Numerical rank `a`.
    pub fn rank(&self) -> usize {
        self.hankel.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Hankel singular values as CSV: `index,value` (1-based index).
    pub fn hankel_csv(&self) -> String {
        let mut out = String::from("index,value\n");
        for (i, s) in self.hankel.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, crate::io::fmt_f64(*s)));
        }
        out
    }
}

/// Method-of-snapshots balancing: `YᵀX = UΣVᵀ`, `Φ = XVΣ^{-1/2}`,
/// `Ψ = YUΣ^{-1/2}`.
pub fn balance(x: &SnapshotFactor, y: &SnapshotFactor, rank_tol: f64) -> Result<BalancedBasis> {
    if x.base_time != y.base_time {
        return Err(Error::InvalidArgument(format!(
            "factors anchored at different base times ({} and {})",
            x.base_time, y.base_time
        )));
    }
    balance_factors(&x.matrix, &y.matrix, x.base_time, rank_tol)
}

/// [`balance`] on raw factor matrices.
pub fn balance_factors(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    base_time: Time,
    rank_tol: f64,
) -> Result<BalancedBasis> {
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "factors have {} and {} rows",
            x.nrows(),
            y.nrows()
        )));
    }
    let svd = sorted_svd(&y.tr_mul(x));
    let top = svd.singular_values.first().copied().unwrap_or(0.0);
    if !(top > 0.0) || !top.is_finite() {
        return Err(Error::EmptyBasis);
    }
    let rank = svd
        .singular_values
        .iter()
        .take_while(|&&s| s > rank_tol * top)
        .count();
    let hankel: Vec<f64> = svd.singular_values[..rank].to_vec();
    let scale = DMatrix::from_diagonal(&DVector::from_iterator(
        rank,
        hankel.iter().map(|s| 1.0 / s.sqrt()),
    ));
    let direct = x * svd.v.columns(0, rank) * &scale;
    let adjoint = y * svd.u.columns(0, rank) * &scale;
    Ok(BalancedBasis {
        base_time,
        direct,
        adjoint,
        hankel,
        rank_tol,
    })
}

/// Order-r reduced lifted model, with the output map unlifted per time step:
///
/// `z̃(t+1) = A_r z̃(t) + B_r ũ(t)`,
/// `y(j+tT+i-1) = C_out(i) z̃(t) + Σ_k D̃(i,k) u(j+tT+k-1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedModel {
    pub order: usize,
    pub base_time: Time,
    pub period: usize,
    pub p: usize,
    pub q: usize,
    #[serde(with = "matrix")]
    pub a: DMatrix<f64>,
    #[serde(with = "matrix")]
    pub b: DMatrix<f64>,
    /// `C_out(i) = C(j+i-1) F(j+i-1, j) Φ₁`, `i = 1..T` (stored 0-based).
    #[serde(with = "matrix_list")]
    pub c_out: Vec<DMatrix<f64>>,
    /// Lifted feedthrough `D̃` (Tq×Tp, strictly block lower triangular).
    #[serde(with = "matrix")]
    pub d: DMatrix<f64>,
    pub hankel: Vec<f64>,
    pub warnings: Vec<String>,
}

fn check_order(basis: &BalancedBasis, r: usize) -> Result<()> {
    if r == 0 || r > basis.rank() {
        return Err(Error::OrderOutOfRange {
            requested: r,
            available: basis.rank(),
        });
    }
    Ok(())
}

fn boundary_warnings(s: &[f64], r: usize) -> Vec<String> {
    match s.get(r) {
        Some(&next) if s[r - 1] - next < BOUNDARY_GAP_WARN * s[0] => vec![format!(
            "σ_{r} − σ_{} = {:e} is below tolerance; truncated subspace is not unique",
            r + 1,
            s[r - 1] - next
        )],
        _ => Vec::new(),
    }
}

/// Builds the order-r model by applying `Φ₁`, `Ψ₁` through periodic
/// simulations: each column of `Φ₁` is propagated one period (giving
/// `ÃΦ₁` and the unlifted output rows), and `B̃`, `D̃` come from `Tp`
/// one-period impulse responses.
pub fn reduce(sys: &PeriodicSystem, basis: &BalancedBasis, r: usize) -> Result<ReducedModel> {
    check_order(basis, r)?;
    if basis.direct.nrows() != sys.states() {
        return Err(Error::Dimension(format!(
            "basis has {} states, system has {}",
            basis.direct.nrows(),
            sys.states()
        )));
    }
    let j = basis.base_time;
    let period = sys.period();
    let q = sys.outputs();
    let phi = basis.direct.columns(0, r).into_owned();
    let psi = basis.adjoint.columns(0, r);

    let propagated: Vec<(DVector<f64>, Vec<DVector<f64>>)> = (0..r)
        .into_par_iter()
        .map(|c| {
            let traj = sys
                .free_response(j, &phi.column(c).into_owned(), period)
                .expect("basis column has state dimension");
            (traj.states[period].clone(), traj.outputs)
        })
        .collect();
    let mut a_phi = DMatrix::zeros(sys.states(), r);
    let mut c_out = vec![DMatrix::zeros(q, r); period];
    for (c, (end, outputs)) in propagated.iter().enumerate() {
        a_phi.set_column(c, end);
        for (i, y) in outputs.iter().enumerate() {
            c_out[i].set_column(c, y);
        }
    }
    let (b_lift, d) = input_maps_by_simulation(sys, j);
    Ok(ReducedModel {
        order: r,
        base_time: j,
        period,
        p: sys.inputs(),
        q,
        a: psi.tr_mul(&a_phi),
        b: psi.tr_mul(&b_lift),
        c_out,
        d,
        hankel: basis.hankel.clone(),
        warnings: boundary_warnings(&basis.hankel, r),
    })
}

impl ReducedModel {
    /// Projection of explicit lifted matrices: `Ψ₁ᵀÃΦ₁`, `Ψ₁ᵀB̃`, `C̃Φ₁`, `D̃`.
    pub fn from_lifted(lifted: &LiftedSystem, basis: &BalancedBasis, r: usize) -> Result<Self> {
        check_order(basis, r)?;
        let phi = basis.direct.columns(0, r);
        let psi = basis.adjoint.columns(0, r);
        let c_phi = &lifted.c * phi;
        let q = lifted.q;
        Ok(ReducedModel {
            order: r,
            base_time: lifted.base_time,
            period: lifted.period,
            p: lifted.p,
            q,
            a: psi.tr_mul(&(&lifted.a * phi)),
            b: psi.tr_mul(&lifted.b),
            c_out: (0..lifted.period)
                .map(|i| c_phi.rows(i * q, q).into_owned())
                .collect(),
            d: lifted.d.clone(),
            hankel: basis.hankel.clone(),
            warnings: boundary_warnings(&basis.hankel, r),
        })
    }

    /// The order-`r` model for the same basis: since the bases are nested,
    /// this is the leading part of every reduced matrix.
    pub fn truncate(&self, r: usize) -> Result<ReducedModel> {
        if r == 0 || r > self.order {
            return Err(Error::OrderOutOfRange {
                requested: r,
                available: self.order,
            });
        }
        Ok(ReducedModel {
            order: r,
            a: self.a.view((0, 0), (r, r)).into_owned(),
            b: self.b.rows(0, r).into_owned(),
            c_out: self.c_out.iter().map(|c| c.columns(0, r).into_owned()).collect(),
            warnings: boundary_warnings(&self.hankel, r),
            ..self.clone()
        })
    }

    /// Stacked output map `C̃Φ₁`.
    pub fn c_lifted(&self) -> DMatrix<f64> {
        vstack(&self.c_out)
    }

    /// Block `(i, k)` of `D̃`, 1-based.
    pub fn d_block(&self, i: usize, k: usize) -> DMatrix<f64> {
        self.d
            .view(((i - 1) * self.q, (k - 1) * self.p), (self.q, self.p))
            .into_owned()
    }

    /// Reduced lifted Markov parameter `G̃_r(t)`.
    pub fn markov(&self, t: usize) -> DMatrix<f64> {
        if t == 0 {
            return self.d.clone();
        }
        let mut ab = self.b.clone();
        for _ in 1..t {
            ab = &self.a * ab;
        }
        self.c_lifted() * ab
    }

    /// Outputs `y(j), …, y(j+steps-1)` from rest, for inputs `u(j), …`.
    pub fn simulate(&self, inputs: &[DVector<f64>], steps: usize) -> Result<Vec<DVector<f64>>> {
        if inputs.len() < steps {
            return Err(Error::Dimension(format!(
                "{} inputs supplied for {steps} steps",
                inputs.len()
            )));
        }
        if let Some(bad) = inputs.iter().find(|u| u.len() != self.p) {
            return Err(Error::Dimension(format!(
                "input has length {}, expected {}",
                bad.len(),
                self.p
            )));
        }
        let period = self.period;
        let c_lift = self.c_lifted();
        let mut z = DVector::zeros(self.order);
        let mut outputs = Vec::with_capacity(steps);
        let mut t = 0;
        while outputs.len() < steps {
            let mut u = DVector::zeros(period * self.p);
            for k in 0..period {
                if let Some(v) = inputs.get(t * period + k) {
                    u.rows_mut(k * self.p, self.p).copy_from(v);
                }
            }
            let y = &c_lift * &z + &self.d * &u;
            for i in 0..period {
                if outputs.len() == steps {
                    break;
                }
                outputs.push(y.rows(i * self.q, self.q).into_owned());
            }
            z = &self.a * &z + &self.b * &u;
            t += 1;
        }
        Ok(outputs)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// See [`ReducedModel::simulate`].
pub fn simulate_reduced(
    model: &ReducedModel,
    inputs: &[DVector<f64>],
    steps: usize,
) -> Result<Vec<DVector<f64>>> {
    model.simulate(inputs, steps)
}

/// Square-root balancing of the exact lifted Gramians.
///
/// The Gramians are obtained in factored form `W = L Lᵀ` from the doubling
/// iteration, and the factors are balanced exactly like snapshot factors.
pub fn exact_balanced_basis(lifted: &LiftedSystem) -> Result<BalancedBasis> {
    let radius = linalg::spectral_radius(&lifted.a);
    if !(radius < 1.0 - STABILITY_MARGIN) {
        return Err(Error::Unstable { radius });
    }
    let lc = solve_stein(&lifted.a, &lifted.b)?;
    let lo = solve_stein(&lifted.a.transpose(), &lifted.c.transpose())?;
    balance_factors(&lc.factor, &lo.factor, lifted.base_time, DEFAULT_RANK_TOL)
}

/// Exact balanced truncation of the lifted system to order `r`.
pub fn exact_balanced_truncation(
    lifted: &LiftedSystem,
    r: usize,
) -> Result<(BalancedBasis, ReducedModel)> {
    let basis = exact_balanced_basis(lifted)?;
    let model = ReducedModel::from_lifted(lifted, &basis, r)?;
    Ok((basis, model))
}
