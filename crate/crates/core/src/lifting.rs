//! Lifted time-invariant form of a periodic system at a base time, and its
//! impulse-response blocks.
//!
//! At base time `j` the lifted state is `x(j+tT)`, and one lifted step
//! consumes the stacked inputs `u(j+tT), …, u(j+tT+T-1)` and emits the
//! stacked outputs `y(j+tT), …, y(j+tT+T-1)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, matrix};
use crate::linalg::{hstack, vstack};
use crate::system::{PeriodicSystem, Time};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiftedSystem {
    pub base_time: Time,
    pub period: usize,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    #[serde(with = "matrix")]
    pub a: DMatrix<f64>,
    #[serde(with = "matrix")]
    pub b: DMatrix<f64>,
    #[serde(with = "matrix")]
    pub c: DMatrix<f64>,
    #[serde(with = "matrix")]
    pub d: DMatrix<f64>,
}

/// Builds the lifted matrices explicitly from state-transition products.
///
/// Intended for desk-scale use; the snapshot pipeline never forms them.
pub fn lift(sys: &PeriodicSystem, j: Time) -> LiftedSystem {
    let period = sys.period();
    let t = period as Time;
    let (n, p, q) = (sys.states(), sys.inputs(), sys.outputs());
    let tr = |end: Time, start: Time| sys.transition(end, start).expect("forward range");

    let a = tr(j + t, j);
    let b = hstack(
        &(1..=t)
            .map(|k| tr(j + t, j + k) * sys.b(j + k - 1))
            .collect::<Vec<_>>(),
    );
    let c = vstack(
        &(1..=t)
            .map(|i| sys.c(j + i - 1) * tr(j + i - 1, j))
            .collect::<Vec<_>>(),
    );
    let mut d = DMatrix::zeros(period * q, period * p);
    for i in 1..=t {
        for k in 1..i {
            let block = sys.c(j + i - 1) * tr(j + i - 1, j + k) * sys.b(j + k - 1);
            d.view_mut(((i as usize - 1) * q, (k as usize - 1) * p), (q, p))
                .copy_from(&block);
        }
    }
    LiftedSystem {
        base_time: j,
        period,
        n,
        p,
        q,
        a,
        b,
        c,
        d,
    }
}

impl LiftedSystem {
    /// Lifted Markov parameter: `D̃` for `t = 0`, `C̃ Ã^(t-1) B̃` otherwise.
    pub fn markov(&self, t: usize) -> DMatrix<f64> {
        if t == 0 {
            return self.d.clone();
        }
        let mut ab = self.b.clone();
        for _ in 1..t {
            ab = &self.a * ab;
        }
        &self.c * ab
    }

    /// Block `(i, k)` of `D̃` (1-based, q×p).
    pub fn d_block(&self, i: usize, k: usize) -> DMatrix<f64> {
        self.d
            .view(((i - 1) * self.q, (k - 1) * self.p), (self.q, self.p))
            .into_owned()
    }

    /// Lifted simulation from `x̃(0) = x0` with stacked inputs; returns the
    /// lifted states (one more than inputs) and stacked outputs.
    pub fn simulate(
        &self,
        x0: &DVector<f64>,
        inputs: &[DVector<f64>],
    ) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
        if x0.len() != self.n {
            return Err(Error::Dimension(format!(
                "lifted state has length {}, expected {}",
                x0.len(),
                self.n
            )));
        }
        let mut x = x0.clone();
        let mut states = vec![x.clone()];
        let mut outputs = Vec::with_capacity(inputs.len());
        for u in inputs {
            if u.len() != self.period * self.p {
                return Err(Error::Dimension(format!(
                    "lifted input has length {}, expected {}",
                    u.len(),
                    self.period * self.p
                )));
            }
            outputs.push(&self.c * &x + &self.d * u);
            x = &self.a * &x + &self.b * u;
            states.push(x.clone());
        }
        Ok((states, outputs))
    }
}

/// Periodic impulse-response matrices `G(j+tT+i, j)`, `t = 0..=s`,
/// `i = 0..T-1`, each q×(Tp). Column `b·p + c` of `G(j+tT+i, j)` is the
/// output at time `j+tT+i` to a unit impulse on channel `c` at time `j+b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponseBlocks {
    base_time: Time,
    period: usize,
    p: usize,
    q: usize,
    horizon: usize,
    blocks: Vec<DMatrix<f64>>,
}

impl ImpulseResponseBlocks {
    /// Wraps precomputed blocks, ordered `t`-major: `blocks[t·T + i]`.
    pub fn from_blocks(
        base_time: Time,
        period: usize,
        p: usize,
        q: usize,
        blocks: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        if period == 0 || blocks.is_empty() || !blocks.len().is_multiple_of(period) {
            return Err(Error::Dimension(format!(
                "{} blocks do not cover whole periods of length {period}",
                blocks.len()
            )));
        }
        if let Some(bad) = blocks.iter().find(|b| b.shape() != (q, period * p)) {
            return Err(Error::Dimension(format!(
                "impulse-response block is {:?}, expected ({q}, {})",
                bad.shape(),
                period * p
            )));
        }
        Ok(Self {
            base_time,
            period,
            p,
            q,
            horizon: blocks.len() / period - 1,
            blocks,
        })
    }

    pub fn base_time(&self) -> Time {
        self.base_time
    }
    pub fn period(&self) -> usize {
        self.period
    }
    pub fn inputs(&self) -> usize {
        self.p
    }
    pub fn outputs(&self) -> usize {
        self.q
    }
    /// Largest lifted time index `s`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `G(j+tT+i, j)`.
    pub fn block(&self, t: usize, i: usize) -> &DMatrix<f64> {
        &self.blocks[t * self.period + i]
    }

    /// All blocks for time offset `i` within the period, `t = 0..=s`.
    pub fn offset_blocks(&self, i: usize) -> impl Iterator<Item = &DMatrix<f64>> {
        (0..=self.horizon).map(move |t| self.block(t, i))
    }

    /// Lifted impulse response `G̃_j(t)`: the T blocks of lifted step t stacked.
    pub fn lifted(&self, t: usize) -> DMatrix<f64> {
        vstack(
            &(0..self.period)
                .map(|i| self.block(t, i).clone())
                .collect::<Vec<_>>(),
        )
    }

    /// Total energy `Σ ‖G‖²_F`.
    pub fn energy(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum()
    }

    /// Long-format CSV: `t,i,output,input,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,i,output,input,value\n");
        for t in 0..=self.horizon {
            for i in 0..self.period {
                let g = self.block(t, i);
                for r in 0..g.nrows() {
                    for c in 0..g.ncols() {
                        out.push_str(&format!("{t},{i},{r},{c},{}\n", fmt_f64(g[(r, c)])));
                    }
                }
            }
        }
        out
    }
}

/// Impulse-response blocks over `s+1` lifted steps, obtained by `Tp`
/// periodic impulse simulations of `(s+1)T` steps each.
pub fn lifted_impulse_response(
    sys: &PeriodicSystem,
    j: Time,
    s: usize,
) -> ImpulseResponseBlocks {
    let period = sys.period();
    let (p, q) = (sys.inputs(), sys.outputs());
    let end = j + ((s + 1) * period) as Time;
    let columns: Vec<Vec<DVector<f64>>> = (0..period * p)
        .into_par_iter()
        .map(|col| {
            let (b, c) = (col / p, col % p);
            let k0 = j + b as Time;
            let states = sys.impulse_states(k0, c, end);
            // states[idx] = x(k0 + 1 + idx); outputs start at j.
            (0..(s + 1) * period)
                .map(|step| {
                    let k = j + step as Time;
                    if k <= k0 {
                        DVector::zeros(q)
                    } else {
                        sys.c(k) * &states[(k - k0 - 1) as usize]
                    }
                })
                .collect()
        })
        .collect();
    let blocks = (0..(s + 1) * period)
        .map(|step| {
            DMatrix::from_fn(q, period * p, |r, col| columns[col][step][r])
        })
        .collect();
    ImpulseResponseBlocks::from_blocks(j, period, p, q, blocks).expect("consistent shapes")
}

/// `B̃` and `D̃` at base time `j`, from `Tp` one-period impulse simulations.
pub(crate) fn input_maps_by_simulation(
    sys: &PeriodicSystem,
    j: Time,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let period = sys.period();
    let (n, p, q) = (sys.states(), sys.inputs(), sys.outputs());
    let end = j + period as Time;
    let mut b_lift = DMatrix::zeros(n, period * p);
    let mut d_lift = DMatrix::zeros(period * q, period * p);
    for col in 0..period * p {
        let (b, c) = (col / p, col % p);
        let k0 = j + b as Time;
        let states = sys.impulse_states(k0, c, end);
        for (idx, x) in states.iter().enumerate() {
            let k = k0 + 1 + idx as Time;
            if k < end {
                let i = (k - j) as usize;
                d_lift
                    .view_mut((i * q, col), (q, 1))
                    .copy_from(&(sys.c(k) * x));
            }
        }
        b_lift.set_column(col, states.last().expect("at least one step"));
    }
    (b_lift, d_lift)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: &[f64], b: &[f64], c: &[f64]) -> PeriodicSystem {
        let m = |v: &[f64]| v.iter().map(|&x| DMatrix::from_element(1, 1, x)).collect();
        PeriodicSystem::new(m(a), m(b), m(c)).unwrap()
    }

    #[test]
    fn scalar_two_periodic_lift_matches_hand_expansion() {
        let (a1, a2, b1, b2, c1, c2) = (0.5, 0.4, 2.0, 3.0, 5.0, 7.0);
        let sys = scalar(&[a1, a2], &[b1, b2], &[c1, c2]);
        let l = lift(&sys, 1);
        assert!((l.a[(0, 0)] - a2 * a1).abs() < 1e-15);
        assert_eq!(l.b, DMatrix::from_row_slice(1, 2, &[a2 * b1, b2]));
        assert_eq!(l.c, DMatrix::from_row_slice(2, 1, &[c1, c2 * a1]));
        assert_eq!(l.d, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, c2 * b1, 0.0]));
    }

    #[test]
    fn period_one_lift_is_the_lti_system() {
        let sys = scalar(&[0.3], &[2.0], &[4.0]);
        let l = lift(&sys, 5);
        assert_eq!(l.a[(0, 0)], 0.3);
        assert_eq!(l.b[(0, 0)], 2.0);
        assert_eq!(l.c[(0, 0)], 4.0);
        assert_eq!(l.d[(0, 0)], 0.0);
        let g = lifted_impulse_response(&sys, 5, 3);
        assert_eq!(g.block(0, 0)[(0, 0)], 0.0);
        for t in 1..=3 {
            let expected = 4.0 * 0.3f64.powi(t as i32 - 1) * 2.0;
            assert!((g.block(t, 0)[(0, 0)] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_input_matrices_give_zero_blocks() {
        let sys = scalar(&[0.3, 0.2], &[0.0, 0.0], &[4.0, 1.0]);
        let g = lifted_impulse_response(&sys, 1, 2);
        assert_eq!(g.energy(), 0.0);
    }

    #[test]
    fn simulated_input_maps_match_explicit_lift() {
        let sys = scalar(&[0.5, 0.4, 0.9], &[2.0, 3.0, 1.0], &[5.0, 7.0, 1.5]);
        for j in [-2, 1, 2] {
            let l = lift(&sys, j);
            let (b, d) = input_maps_by_simulation(&sys, j);
            assert!((b - &l.b).norm() < 1e-14);
            assert!((d - &l.d).norm() < 1e-14);
        }
    }

    #[test]
    fn csv_has_one_row_per_entry() {
        let sys = scalar(&[0.5, 0.4], &[2.0, 3.0], &[5.0, 7.0]);
        let g = lifted_impulse_response(&sys, 1, 1);
        let csv = g.to_csv();
        assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
        assert!(csv.starts_with("t,i,output,input,value"));
    }
}
