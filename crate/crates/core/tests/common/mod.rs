//! Shared fixtures and independent oracles for the integration tests.
//!
//! The oracles below are deliberately naive (explicit loops over the
//! defining sums and products) so they share no code paths with the
//! library's simulation-based implementations.
#![allow(dead_code)]

use ltp_bpod::bench::random::{random_system, Sampler, DEFAULT_A_BOUNDS, DEFAULT_BC_BOUNDS};
use ltp_bpod::{PeriodicSystem, Time};
use nalgebra::{DMatrix, DVector};

/// Member of the validation family: T=5, n=30, p=1, q=30, diagonal A(k)
/// with entries in [0.16, 0.96], B and C entries in [0, 1].
pub fn family_system(seed: u64) -> PeriodicSystem {
    random_system(seed, 30, 1, 30, 5, DEFAULT_A_BOUNDS, DEFAULT_BC_BOUNDS).unwrap()
}

pub fn small_system(seed: u64, n: usize, p: usize, q: usize, period: usize) -> PeriodicSystem {
    random_system(seed, n, p, q, period, DEFAULT_A_BOUNDS, DEFAULT_BC_BOUNDS).unwrap()
}

/// Random system with dense (non-diagonal) A(k) scaled so that the
/// monodromy matrix is comfortably stable.
pub fn dense_system(seed: u64, n: usize, p: usize, q: usize, period: usize) -> PeriodicSystem {
    let mut rng = Sampler::new(seed);
    let a = (0..period)
        .map(|_| {
            let m = rng.matrix(n, n, -1.0, 1.0);
            let norm = m.clone().svd(false, false).singular_values.max();
            m * (0.9 / norm)
        })
        .collect();
    let b = (0..period).map(|_| rng.matrix(n, p, -1.0, 1.0)).collect();
    let c = (0..period).map(|_| rng.matrix(q, n, -1.0, 1.0)).collect();
    PeriodicSystem::new(a, b, c).unwrap()
}

/// `F(j_end, j_start)` by an explicit left-multiplication loop.
pub fn transition_oracle(sys: &PeriodicSystem, j_end: Time, j_start: Time) -> DMatrix<f64> {
    let mut f = DMatrix::identity(sys.states(), sys.states());
    let mut k = j_start;
    while k < j_end {
        f = sys.a(k) * f;
        k += 1;
    }
    f
}

/// `Σ_{i=j-m}^{j-1} F(j,i+1) B(i) B(i)ᵀ F(j,i+1)ᵀ`.
pub fn controllability_sum(sys: &PeriodicSystem, j: Time, m: usize) -> DMatrix<f64> {
    let n = sys.states();
    let mut w = DMatrix::zeros(n, n);
    for i in (j - m as Time)..j {
        let fb = transition_oracle(sys, j, i + 1) * sys.b(i);
        w += &fb * fb.transpose();
    }
    w
}

/// `Σ_{i=j}^{j+m-1} F(i,j)ᵀ C(i)ᵀ C(i) F(i,j)`.
pub fn observability_sum(sys: &PeriodicSystem, j: Time, m: usize) -> DMatrix<f64> {
    let n = sys.states();
    let mut w = DMatrix::zeros(n, n);
    for i in j..(j + m as Time) {
        let cf = sys.c(i) * transition_oracle(sys, i, j);
        w += cf.transpose() * &cf;
    }
    w
}

/// Explicit lifted matrices from their block formulas.
pub struct LiftedOracle {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

pub fn lifted_oracle(sys: &PeriodicSystem, j: Time) -> LiftedOracle {
    let period = sys.period();
    let (n, p, q) = (sys.states(), sys.inputs(), sys.outputs());
    let t = period as Time;
    let a = transition_oracle(sys, j + t, j);
    let mut b = DMatrix::zeros(n, period * p);
    let mut c = DMatrix::zeros(period * q, n);
    let mut d = DMatrix::zeros(period * q, period * p);
    for k in 1..=period {
        let kk = k as Time;
        let blk = transition_oracle(sys, j + t, j + kk) * sys.b(j + kk - 1);
        b.view_mut((0, (k - 1) * p), (n, p)).copy_from(&blk);
    }
    for i in 1..=period {
        let ii = i as Time;
        let blk = sys.c(j + ii - 1) * transition_oracle(sys, j + ii - 1, j);
        c.view_mut(((i - 1) * q, 0), (q, n)).copy_from(&blk);
        for k in 1..i {
            let kk = k as Time;
            let blk = sys.c(j + ii - 1) * transition_oracle(sys, j + ii - 1, j + kk) * sys.b(j + kk - 1);
            d.view_mut(((i - 1) * q, (k - 1) * p), (q, p)).copy_from(&blk);
        }
    }
    LiftedOracle { a, b, c, d }
}

/// Lifted Markov parameter `G̃(t)` from explicit matrices.
pub fn markov_oracle(l: &LiftedOracle, t: usize) -> DMatrix<f64> {
    if t == 0 {
        return l.d.clone();
    }
    let mut m = l.b.clone();
    for _ in 1..t {
        m = &l.a * m;
    }
    &l.c * m
}

pub fn rel_fro(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

pub fn random_inputs(rng: &mut Sampler, len: usize, p: usize) -> Vec<DVector<f64>> {
    (0..len).map(|_| rng.vector(p, -1.0, 1.0)).collect()
}

/// Random matrix with orthonormal columns (QR of a uniform random matrix).
pub fn random_orthonormal(rng: &mut Sampler, rows: usize, cols: usize) -> DMatrix<f64> {
    rng.matrix(rows, cols, -1.0, 1.0).qr().q()
}

/// Off-diagonal Frobenius mass of a square matrix.
pub fn off_diagonal(m: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// `W_ce(j; m)` by backward accumulation of `F(j, i+1) B(i)`.
pub fn controllability_series(sys: &PeriodicSystem, j: Time, m: usize) -> DMatrix<f64> {
    let n = sys.states();
    let mut w = DMatrix::zeros(n, n);
    let mut f = DMatrix::identity(n, n);
    for i in ((j - m as Time)..j).rev() {
        let fb = &f * sys.b(i);
        w += &fb * fb.transpose();
        f *= sys.a(i);
    }
    w
}

/// `W_oe(j; m)` by forward accumulation of `C(i) F(i, j)`.
pub fn observability_series(sys: &PeriodicSystem, j: Time, m: usize) -> DMatrix<f64> {
    let n = sys.states();
    let mut w = DMatrix::zeros(n, n);
    let mut f = DMatrix::identity(n, n);
    for i in j..(j + m as Time) {
        let cf = sys.c(i) * &f;
        w += cf.transpose() * &cf;
        f = sys.a(i) * f;
    }
    w
}
