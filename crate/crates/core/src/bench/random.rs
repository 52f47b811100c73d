//! Seeded random LTP systems.
//!
//! The generator is ChaCha8 seeded through `SeedableRng::seed_from_u64`.
//! A uniform draw on `[lo, hi]` is `lo + (hi - lo)·u` with
//! `u = (next_u64() >> 11)·2⁻⁵³`. For each `k = 1..T` in turn, the diagonal
//! of `A(k)` is drawn first, then `B(k)` row by row, then `C(k)` row by row.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::system::PeriodicSystem;

pub const DEFAULT_A_BOUNDS: (f64, f64) = (0.16, 0.96);
pub const DEFAULT_BC_BOUNDS: (f64, f64) = (0.0, 1.0);

/// Portable uniform sampler.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn vector(&mut self, len: usize, lo: f64, hi: f64) -> DVector<f64> {
        DVector::from_iterator(len, (0..len).map(|_| self.uniform(lo, hi)))
    }

    /// Matrix filled row by row.
    pub fn matrix(&mut self, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
        let data: Vec<f64> = (0..rows * cols).map(|_| self.uniform(lo, hi)).collect();
        DMatrix::from_row_slice(rows, cols, &data)
    }
}

/// Random system with diagonal `A(k)` (entries uniform in `a_bounds`) and
/// dense `B(k)`, `C(k)` (entries uniform in `bc_bounds`).
pub fn random_system(
    seed: u64,
    n: usize,
    p: usize,
    q: usize,
    period: usize,
    a_bounds: (f64, f64),
    bc_bounds: (f64, f64),
) -> Result<PeriodicSystem> {
    let (a_lo, a_hi) = a_bounds;
    if !(0.0 < a_lo && a_lo <= a_hi && a_hi < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "A bounds must satisfy 0 < lo <= hi < 1, got [{a_lo}, {a_hi}]"
        )));
    }
    let (bc_lo, bc_hi) = bc_bounds;
    if !(bc_lo.is_finite() && bc_hi.is_finite() && bc_lo <= bc_hi) {
        return Err(Error::InvalidArgument(format!(
            "B/C bounds must be finite with lo <= hi, got [{bc_lo}, {bc_hi}]"
        )));
    }
    if n == 0 || p == 0 || q == 0 || period == 0 {
        return Err(Error::InvalidArgument(
            "n, p, q and T must all be positive".into(),
        ));
    }
    let mut rng = Sampler::new(seed);
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..period {
        a.push(DMatrix::from_diagonal(&rng.vector(n, a_lo, a_hi)));
        b.push(rng.matrix(n, p, bc_lo, bc_hi));
        c.push(rng.matrix(q, n, bc_lo, bc_hi));
    }
    PeriodicSystem::new(a, b, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_system() {
        let s1 = random_system(7, 4, 2, 3, 3, DEFAULT_A_BOUNDS, DEFAULT_BC_BOUNDS).unwrap();
        let s2 = random_system(7, 4, 2, 3, 3, DEFAULT_A_BOUNDS, DEFAULT_BC_BOUNDS).unwrap();
        assert_eq!(s1.a_matrices(), s2.a_matrices());
        assert_eq!(s1.b_matrices(), s2.b_matrices());
        assert_eq!(s1.c_matrices(), s2.c_matrices());
        let s3 = random_system(8, 4, 2, 3, 3, DEFAULT_A_BOUNDS, DEFAULT_BC_BOUNDS).unwrap();
        assert_ne!(s1.b_matrices(), s3.b_matrices());
    }

    #[test]
    fn degenerate_bounds_give_scaled_identity() {
        let sys = random_system(1, 3, 1, 1, 2, (0.4, 0.4), DEFAULT_BC_BOUNDS).unwrap();
        for a in sys.a_matrices() {
            assert_eq!(a, &(DMatrix::identity(3, 3) * 0.4));
        }
    }

    #[test]
    fn entries_stay_in_bounds() {
        let sys = random_system(3, 6, 2, 4, 5, DEFAULT_A_BOUNDS, (-1.0, 2.0)).unwrap();
        for a in sys.a_matrices() {
            assert!(a.diagonal().iter().all(|&x| (0.16..=0.96).contains(&x)));
            assert_eq!((a - DMatrix::from_diagonal(&a.diagonal())).norm(), 0.0);
        }
        for m in sys.b_matrices().iter().chain(sys.c_matrices()) {
            assert!(m.iter().all(|&x| (-1.0..=2.0).contains(&x)));
        }
    }

    #[test]
    fn invalid_bounds_are_rejected() {
        for bounds in [(0.0, 0.5), (0.5, 0.4), (0.2, 1.0)] {
            assert!(random_system(0, 2, 1, 1, 1, bounds, DEFAULT_BC_BOUNDS).is_err());
        }
        assert!(random_system(0, 2, 1, 1, 1, DEFAULT_A_BOUNDS, (1.0, 0.0)).is_err());
    }
}
