//! Frequency-grid H∞ norm estimates for lifted (time-invariant) systems.
//!
//! The estimate is the maximum of `σ_max(C(zI − A)⁻¹B + D)` over
//! `z = e^{iθ}` on an N-point grid of `θ ∈ [0, π]` (real systems are
//! conjugate-symmetric), refined by golden-section search around the
//! largest grid peaks. Being a maximum over sampled points it never exceeds
//! the true norm.

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balancing::ReducedModel;
use crate::error::{Error, Result};
use crate::lifting::LiftedSystem;

pub type CMatrix = DMatrix<Complex<f64>>;

pub const MIN_GRID: usize = 64;
/// Relative pivot size below which `zI − A` is treated as singular.
const RESOLVENT_TOL: f64 = 1e-13;
const REFINED_PEAKS: usize = 3;
const GOLDEN_ITERATIONS: usize = 60;

fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex::new(x, 0.0))
}

/// `σ_max(M)` from the largest eigenvalue of the smaller Gram matrix.
fn largest_singular_value(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = if m.nrows() >= m.ncols() {
        m.ad_mul(m)
    } else {
        m * m.adjoint()
    };
    gram.symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// Discrete LTI system `(A, B, C, D)`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n
            || b.nrows() != n
            || c.ncols() != n
            || d.nrows() != c.nrows()
            || d.ncols() != b.ncols()
        {
            return Err(Error::Dimension(format!(
                "state space with A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn from_lifted(lifted: &LiftedSystem) -> Self {
        Self {
            a: lifted.a.clone(),
            b: lifted.b.clone(),
            c: lifted.c.clone(),
            d: lifted.d.clone(),
        }
    }

    pub fn from_reduced(model: &ReducedModel) -> Self {
        Self {
            a: model.a.clone(),
            b: model.b.clone(),
            c: model.c_lifted(),
            d: model.d.clone(),
        }
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    /// `C(zI − A)⁻¹B + D` at `z = e^{iθ}`, or `None` if the resolvent is
    /// numerically singular there.
    pub fn response(&self, theta: f64) -> Option<CMatrix> {
        let d = complexify(&self.d);
        let n = self.states();
        if n == 0 {
            return Some(d);
        }
        let z = Complex::from_polar(1.0, theta);
        let shifted = CMatrix::from_diagonal_element(n, n, z) - complexify(&self.a);
        let lu = shifted.lu();
        let pivots = lu.u().diagonal().map(|x| x.norm());
        if pivots.min() <= RESOLVENT_TOL * pivots.max().max(1.0) {
            return None;
        }
        let x = lu.solve(&complexify(&self.b))?;
        Some(complexify(&self.c) * x + d)
    }
}

/// Anything whose largest singular value can be sampled on the unit circle.
pub trait TransferEvaluator: Sync {
    /// `σ_max` of the frequency response at `z = e^{iθ}`.
    fn gain(&self, theta: f64) -> Option<f64>;
}

impl TransferEvaluator for StateSpace {
    fn gain(&self, theta: f64) -> Option<f64> {
        self.response(theta).map(|g| largest_singular_value(&g))
    }
}

/// Difference `G₁ − G₂` of two systems with matching input/output sizes.
pub struct Difference<'a> {
    pub first: &'a StateSpace,
    pub second: &'a StateSpace,
}

impl TransferEvaluator for Difference<'_> {
    fn gain(&self, theta: f64) -> Option<f64> {
        let g1 = self.first.response(theta)?;
        let g2 = self.second.response(theta)?;
        Some(largest_singular_value(&(g1 - g2)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HinfEstimate {
    pub value: f64,
    /// Frequency of the maximum, in `[0, π]`.
    pub theta: f64,
    pub grid: usize,
    /// Grid frequencies where the resolvent was singular.
    pub skipped: Vec<f64>,
}

impl HinfEstimate {
    pub fn warnings(&self) -> Vec<String> {
        if self.skipped.is_empty() {
            Vec::new()
        } else {
            vec![format!(
                "skipped {} of {} frequencies with a near-singular resolvent",
                self.skipped.len(),
                self.grid
            )]
        }
    }
}

pub fn grid_frequencies(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| std::f64::consts::PI * k as f64 / (n - 1) as f64)
        .collect()
}

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERATIONS {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Grid maximum refined around the largest local peaks.
fn maximize(
    gains: &[Option<f64>],
    thetas: &[f64],
    eval: &(impl Fn(f64) -> Option<f64> + Sync),
) -> Result<HinfEstimate> {
    let skipped: Vec<f64> = gains
        .iter()
        .zip(thetas)
        .filter(|(g, _)| g.is_none())
        .map(|(_, &t)| t)
        .collect();
    let values: Vec<f64> = gains.iter().map(|g| g.unwrap_or(f64::NEG_INFINITY)).collect();
    let n = values.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&k| {
            values[k].is_finite()
                && (k == 0 || values[k] >= values[k - 1])
                && (k + 1 == n || values[k] >= values[k + 1])
        })
        .collect();
    if peaks.is_empty() {
        return Err(Error::InvalidArgument(
            "frequency response is undefined at every grid point".into(),
        ));
    }
    peaks.sort_by(|&x, &y| values[y].total_cmp(&values[x]).then(x.cmp(&y)));
    peaks.truncate(REFINED_PEAKS);

    let f = |t: f64| eval(t).unwrap_or(f64::NEG_INFINITY);
    let (mut theta, mut value) = (thetas[peaks[0]], values[peaks[0]]);
    for (t, v) in peaks
        .par_iter()
        .map(|&k| golden_max(&f, thetas[k.saturating_sub(1)], thetas[(k + 1).min(n - 1)]))
        .collect::<Vec<_>>()
    {
        if v > value {
            (theta, value) = (t, v);
        }
    }
    Ok(HinfEstimate {
        value,
        theta,
        grid: n,
        skipped,
    })
}

/// H∞ norm estimate of `eval` on an N-point grid, `N ≥ 64`.
pub fn hinf_norm(eval: &impl TransferEvaluator, grid: usize) -> Result<HinfEstimate> {
    check_grid(grid)?;
    let thetas = grid_frequencies(grid);
    let gains: Vec<Option<f64>> = thetas.par_iter().map(|&t| eval.gain(t)).collect();
    maximize(&gains, &thetas, &|t| eval.gain(t))
}

fn check_grid(grid: usize) -> Result<()> {
    if grid < MIN_GRID {
        return Err(Error::InvalidArgument(format!(
            "H∞ grid needs at least {MIN_GRID} points, got {grid}"
        )));
    }
    Ok(())
}

/// Estimator for a fixed full system that caches its grid responses, so
/// error norms `‖G − G_r‖∞` for many reduced models reuse them.
pub struct HinfEstimator {
    full: StateSpace,
    thetas: Vec<f64>,
    responses: Vec<Option<CMatrix>>,
    norm: HinfEstimate,
}

impl HinfEstimator {
    pub fn new(full: StateSpace, grid: usize) -> Result<Self> {
        check_grid(grid)?;
        let thetas = grid_frequencies(grid);
        let responses: Vec<Option<CMatrix>> =
            thetas.par_iter().map(|&t| full.response(t)).collect();
        let gains: Vec<Option<f64>> = responses
            .iter()
            .map(|g| g.as_ref().map(largest_singular_value))
            .collect();
        let norm = maximize(&gains, &thetas, &|t| full.gain(t))?;
        Ok(Self {
            full,
            thetas,
            responses,
            norm,
        })
    }

    pub fn full(&self) -> &StateSpace {
        &self.full
    }

    /// Estimate of `‖G‖∞` for the full system.
    pub fn norm(&self) -> &HinfEstimate {
        &self.norm
    }

    /// Estimate of `‖G − G_r‖∞`.
    pub fn error_norm(&self, reduced: &StateSpace) -> Result<HinfEstimate> {
        if reduced.b.ncols() != self.full.b.ncols() || reduced.c.nrows() != self.full.c.nrows() {
            return Err(Error::Dimension(format!(
                "reduced system is {}×{}, full system is {}×{}",
                reduced.c.nrows(),
                reduced.b.ncols(),
                self.full.c.nrows(),
                self.full.b.ncols()
            )));
        }
        let gains: Vec<Option<f64>> = self
            .responses
            .par_iter()
            .zip(&self.thetas)
            .map(|(g, &t)| {
                let g = g.as_ref()?;
                Some(largest_singular_value(&(g - reduced.response(t)?)))
            })
            .collect();
        let diff = Difference {
            first: &self.full,
            second: reduced,
        };
        maximize(&gains, &self.thetas, &|t| diff.gain(t))
    }
}
