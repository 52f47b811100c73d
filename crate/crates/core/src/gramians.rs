//! Exact Gramians (lifted discrete Lyapunov equations) and empirical Gramian
//! factors assembled from impulse-response snapshot campaigns.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::matrix;
use crate::lifting::{lift, ImpulseResponseBlocks};
use crate::linalg::{self, compress_factor, hstack, symmetrize};
use crate::projection::OutputProjection;
use crate::system::{PeriodicSystem, Time};

/// Relative update size below which the doubling iteration stops.
pub const LYAPUNOV_TOL: f64 = 1e-14;
pub const LYAPUNOV_MAX_ITER: usize = 100;
/// Largest condition number accepted when inverting a controllability Gramian.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Controllability,
    Observability,
}

/// Tall snapshot matrix whose outer product is an empirical Gramian.
///
/// Columns are channel-major, offset-minor: column `d·m + l` belongs to
/// channel `d`. For controllability, offset `l` is the impulse at time
/// `j-m+l`, so the last column of each channel is `B(j-1)` column `d`. For
/// observability, offset `l` is the adjoint impulse started at `j+l`, whose
/// snapshot is `F(j+m-1-l, j)ᵀ C(j+m-1-l)ᵀ` column `d` (projected if
/// applicable).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotFactor {
    #[serde(with = "matrix")]
    pub matrix: DMatrix<f64>,
    pub base_time: Time,
    pub horizon: usize,
    pub kind: FactorKind,
    pub channels: usize,
    /// True when the adjoint campaign ran through an output projection.
    pub projected: bool,
    /// Impulse-response simulations actually run.
    pub simulations: usize,
    /// Total simulation steps.
    pub steps: usize,
}

impl SnapshotFactor {
    /// `(channel, offset)` of a column.
    pub fn column_origin(&self, col: usize) -> (usize, usize) {
        (col / self.horizon, col % self.horizon)
    }

    pub fn gramian(&self) -> DMatrix<f64> {
        &self.matrix * self.matrix.transpose()
    }

    pub fn states(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Stored trajectories of the primal impulse campaign at base time `j`.
///
/// For each input channel only `min(m, T)` simulations are run: the one
/// started at `j-m+o` also provides, by periodicity, the snapshots of the
/// impulses at `j-m+o+T`, `j-m+o+2T`, ….
#[derive(Debug, Clone)]
pub struct ControllabilityCampaign {
    base_time: Time,
    horizon: usize,
    period: usize,
    inputs: usize,
    // trajectories[d * sims + o][idx] = x(j - m + o + 1 + idx)
    trajectories: Vec<Vec<DVector<f64>>>,
    sims_per_channel: usize,
}

impl ControllabilityCampaign {
    pub fn run(sys: &PeriodicSystem, j: Time, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("snapshot horizon m_c must be >= 1".into()));
        }
        sys.ensure_stable()?;
        let period = sys.period();
        let p = sys.inputs();
        let sims = m.min(period);
        let trajectories = (0..p * sims)
            .into_par_iter()
            .map(|idx| {
                let (d, o) = (idx / sims, idx % sims);
                let start = j - m as Time + o as Time;
                sys.impulse_states(start, d, j)
            })
            .collect();
        Ok(Self {
            base_time: j,
            horizon: m,
            period,
            inputs: p,
            trajectories,
            sims_per_channel: sims,
        })
    }

    pub fn base_time(&self) -> Time {
        self.base_time
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn simulations(&self) -> usize {
        self.trajectories.len()
    }
    pub fn steps(&self) -> usize {
        self.trajectories.iter().map(Vec::len).sum()
    }

    /// State at absolute time `k` of the simulation for channel `d`, offset `o`.
    fn state(&self, d: usize, o: usize, k: Time) -> &DVector<f64> {
        let start = self.base_time - self.horizon as Time + o as Time;
        &self.trajectories[d * self.sims_per_channel + o][(k - start - 1) as usize]
    }

    /// `X(j; m)` with `X·Xᵀ = W_ce(j; m)`.
    pub fn factor(&self) -> SnapshotFactor {
        let m = self.horizon;
        let n = self.trajectories[0][0].len();
        let mut x = DMatrix::zeros(n, self.inputs * m);
        for d in 0..self.inputs {
            for l in 0..m {
                let (o, r) = (l % self.sims_per_channel, l / self.sims_per_channel);
                let k = self.base_time - (r * self.period) as Time;
                x.set_column(d * m + l, self.state(d, o, k));
            }
        }
        SnapshotFactor {
            matrix: x,
            base_time: self.base_time,
            horizon: m,
            kind: FactorKind::Controllability,
            channels: self.inputs,
            projected: false,
            simulations: self.simulations(),
            steps: self.steps(),
        }
    }

    /// Impulse-response blocks `G(j+tT+i, j)`, `t = 0..=s`, read off the
    /// stored trajectories. Requires `m ≥ (s+1)T`.
    pub fn impulse_response_blocks(
        &self,
        sys: &PeriodicSystem,
        s: usize,
    ) -> Result<ImpulseResponseBlocks> {
        let period = self.period;
        if self.horizon < (s + 1) * period {
            return Err(Error::InvalidArgument(format!(
                "snapshot reuse needs m_c >= (s+1)T = {}, got m_c = {}",
                (s + 1) * period,
                self.horizon
            )));
        }
        let (p, q) = (self.inputs, sys.outputs());
        let j = self.base_time;
        let m = self.horizon;
        let mut blocks = Vec::with_capacity((s + 1) * period);
        for t in 0..=s {
            for i in 0..period {
                let mut g = DMatrix::zeros(q, period * p);
                let step = t * period + i;
                for b in 0..period {
                    if step <= b {
                        continue;
                    }
                    // Simulation started at j-m+o ≡ j+b (mod T), shifted back w periods.
                    let o = (b + m) % period;
                    let w = (b + m - o) / period;
                    let k = j + step as Time - (w * period) as Time;
                    for c in 0..p {
                        let y = sys.c(k) * self.state(c, o, k);
                        g.set_column(b * p + c, &y);
                    }
                }
                blocks.push(g);
            }
        }
        ImpulseResponseBlocks::from_blocks(j, period, p, q, blocks)
    }
}

/// `X(j; m_c)` from `Tp` primal impulse simulations (fewer when `m_c < T`).
pub fn controllability_factor(sys: &PeriodicSystem, j: Time, m_c: usize) -> Result<SnapshotFactor> {
    Ok(ControllabilityCampaign::run(sys, j, m_c)?.factor())
}

/// `Y(j; m_o)` from `Tq` adjoint impulse simulations, or `T·r_op` when an
/// output projection is supplied (then `Y·Yᵀ = W_oPe(j; m_o)`).
pub fn observability_factor(
    sys: &PeriodicSystem,
    j: Time,
    m_o: usize,
    projection: Option<&OutputProjection>,
) -> Result<SnapshotFactor> {
    if m_o == 0 {
        return Err(Error::InvalidArgument("snapshot horizon m_o must be >= 1".into()));
    }
    sys.ensure_stable()?;
    let adjoint = sys.adjoint(j, m_o, projection)?;
    let period = sys.period();
    let channels = adjoint.input_dim();
    let sims = m_o.min(period);
    let end = j + m_o as Time;
    let trajectories: Vec<Vec<DVector<f64>>> = (0..channels * sims)
        .into_par_iter()
        .map(|idx| {
            let (d, o) = (idx / sims, idx % sims);
            adjoint.impulse_states(j + o as Time, d, end)
        })
        .collect();
    let n = sys.states();
    let mut y = DMatrix::zeros(n, channels * m_o);
    for d in 0..channels {
        for l in 0..m_o {
            let (o, r) = (l % sims, l / sims);
            // trajectory[idx] = z(j + o + 1 + idx); snapshot at z(j + m - rT).
            let idx = m_o - r * period - o - 1;
            y.set_column(d * m_o + l, &trajectories[d * sims + o][idx]);
        }
    }
    Ok(SnapshotFactor {
        matrix: y,
        base_time: j,
        horizon: m_o,
        kind: FactorKind::Observability,
        channels,
        projected: projection.is_some(),
        simulations: trajectories.len(),
        steps: trajectories.iter().map(Vec::len).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    Exact,
    Empirical { m_c: usize, m_o: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramianPair {
    #[serde(with = "matrix")]
    pub controllability: DMatrix<f64>,
    #[serde(with = "matrix")]
    pub observability: DMatrix<f64>,
    /// `L_c` with `L_c L_cᵀ = W_c`.
    #[serde(with = "matrix")]
    pub controllability_factor: DMatrix<f64>,
    /// `L_o` with `L_o L_oᵀ = W_o`.
    #[serde(with = "matrix")]
    pub observability_factor: DMatrix<f64>,
    pub base_time: Time,
    pub provenance: Provenance,
}

impl GramianPair {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Solution of the Stein equation `W = A W Aᵀ + F Fᵀ` in factored form.
#[derive(Debug, Clone)]
pub struct SteinSolution {
    /// `L` with `L Lᵀ = W`, at most n columns.
    pub factor: DMatrix<f64>,
    pub iterations: usize,
}

impl SteinSolution {
    pub fn gramian(&self) -> DMatrix<f64> {
        symmetrize(&(&self.factor * self.factor.transpose()))
    }
}

/// Squared Smith iteration on the factor: `L ← [L, A_k L]`, `A_{k+1} = A_k²`.
///
/// After `k` doublings `L Lᵀ` holds the first `2^k` terms of
/// `Σ Aⁱ F Fᵀ (Aⁱ)ᵀ`. The factor is recompressed to at most n columns after
/// each step with an exact QR-based compression, so no information is dropped.
pub fn solve_stein(a: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<SteinSolution> {
    let n = a.nrows();
    if a.ncols() != n || f.nrows() != n {
        return Err(Error::Dimension(format!(
            "Stein equation with A {:?} and F {:?}",
            a.shape(),
            f.shape()
        )));
    }
    let mut power = a.clone();
    let mut factor = compress_factor(f);
    for iteration in 1..=LYAPUNOV_MAX_ITER {
        let update = &power * &factor;
        // ‖U Uᵀ‖_F = ‖Uᵀ U‖_F; same for the accumulated factor.
        let update_norm = (update.tr_mul(&update)).norm();
        let total_norm = (factor.tr_mul(&factor)).norm();
        factor = compress_factor(&hstack(&[factor, update]));
        if update_norm <= LYAPUNOV_TOL * total_norm || total_norm == 0.0 {
            return Ok(SteinSolution {
                factor,
                iterations: iteration,
            });
        }
        power = &power * &power;
        if !power.iter().all(|x| x.is_finite()) {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: LYAPUNOV_MAX_ITER,
    })
}

/// Exact `W_c(j)`, `W_o(j)` from the lifted Lyapunov equations
/// `Ã W Ãᵀ − W + B̃ B̃ᵀ = 0` and `Ãᵀ W Ã − W + C̃ᵀ C̃ = 0`.
pub fn exact_gramians(sys: &PeriodicSystem, j: Time) -> Result<GramianPair> {
    sys.ensure_stable()?;
    let lifted = lift(sys, j);
    let wc = solve_stein(&lifted.a, &lifted.b)?;
    let wo = solve_stein(&lifted.a.transpose(), &lifted.c.transpose())?;
    Ok(GramianPair {
        controllability: wc.gramian(),
        observability: wo.gramian(),
        controllability_factor: wc.factor,
        observability_factor: wo.factor,
        base_time: j,
        provenance: Provenance::Exact,
    })
}

/// Empirical Gramians `W_ce(j; m_c)`, `W_oe(j; m_o)` from snapshot factors.
pub fn empirical_gramians(
    sys: &PeriodicSystem,
    j: Time,
    m_c: usize,
    m_o: usize,
) -> Result<GramianPair> {
    let x = controllability_factor(sys, j, m_c)?;
    let y = observability_factor(sys, j, m_o, None)?;
    Ok(GramianPair {
        controllability: x.gramian(),
        observability: y.gramian(),
        controllability_factor: x.matrix,
        observability_factor: y.matrix,
        base_time: j,
        provenance: Provenance::Empirical { m_c, m_o },
    })
}

/// `‖F(j+T, j)^l‖₂²`, the relative truncation bound for `W_ce(j; lT)`.
pub fn truncation_bound(sys: &PeriodicSystem, j: Time, l: usize) -> f64 {
    let mono = sys.monodromy(j);
    let mut power = DMatrix::identity(sys.states(), sys.states());
    for _ in 0..l {
        power = &mono * power;
    }
    linalg::spectral_norm(&power).powi(2)
}

fn check_len(sys: &PeriodicSystem, x: &DVector<f64>) -> Result<()> {
    if x.len() != sys.states() {
        return Err(Error::Dimension(format!(
            "state has length {}, expected {}",
            x.len(),
            sys.states()
        )));
    }
    Ok(())
}

/// `⟨x, W_o(j) x⟩`: energy of the zero-input output from `x(j) = x`.
pub fn output_energy(sys: &PeriodicSystem, j: Time, x: &DVector<f64>) -> Result<f64> {
    check_len(sys, x)?;
    let g = exact_gramians(sys, j)?;
    Ok(x.dot(&(&g.observability * x)))
}

/// `⟨x, W_c(j)⁻¹ x⟩`: least input energy that steers the state from rest
/// in the far past to `x(j) = x`.
pub fn min_input_energy(sys: &PeriodicSystem, j: Time, x: &DVector<f64>) -> Result<f64> {
    check_len(sys, x)?;
    let g = exact_gramians(sys, j)?;
    let eig = g.controllability.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Unreachable { condition });
    }
    let coords = eig.eigenvectors.tr_mul(x);
    Ok(coords
        .iter()
        .zip(eig.eigenvalues.iter())
        .map(|(c, l)| c * c / l)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: &[f64], b: &[f64], c: &[f64]) -> PeriodicSystem {
        let m = |v: &[f64]| v.iter().map(|&x| DMatrix::from_element(1, 1, x)).collect();
        PeriodicSystem::new(m(a), m(b), m(c)).unwrap()
    }

    #[test]
    fn scalar_lti_gramian_is_geometric_series() {
        let (a, b) = (0.7, 1.5);
        let sys = scalar(&[a], &[b], &[1.0]);
        let g = exact_gramians(&sys, 1).unwrap();
        assert!((g.controllability[(0, 0)] - b * b / (1.0 - a * a)).abs() < 1e-13);
        assert!((g.observability[(0, 0)] - 1.0 / (1.0 - a * a)).abs() < 1e-13);
    }

    #[test]
    fn zero_input_or_output_matrices_give_zero_gramians() {
        let sys = scalar(&[0.5, 0.3], &[0.0, 0.0], &[0.0, 0.0]);
        let g = exact_gramians(&sys, 1).unwrap();
        assert_eq!(g.controllability[(0, 0)], 0.0);
        assert_eq!(g.observability[(0, 0)], 0.0);
    }

    #[test]
    fn unstable_system_is_rejected() {
        let sys = scalar(&[1.5, 0.9], &[1.0, 1.0], &[1.0, 1.0]);
        assert!(matches!(exact_gramians(&sys, 1), Err(Error::Unstable { .. })));
        assert!(matches!(
            controllability_factor(&sys, 1, 4),
            Err(Error::Unstable { .. })
        ));
        // Boundary: radius exactly one.
        let marginal = scalar(&[1.0], &[1.0], &[1.0]);
        assert!(marginal.ensure_stable().is_err());
    }

    #[test]
    fn one_step_factors() {
        let sys = scalar(&[0.5, 0.4], &[2.0, 3.0], &[5.0, 7.0]);
        // X(j; 1) = B(j-1), Y(j; 1) = C(j)ᵀ.
        let x = controllability_factor(&sys, 2, 1).unwrap();
        assert_eq!(x.matrix, DMatrix::from_element(1, 1, 2.0));
        let y = observability_factor(&sys, 2, 1, None).unwrap();
        assert_eq!(y.matrix, DMatrix::from_element(1, 1, 7.0));
    }

    #[test]
    fn scalar_factor_columns_match_hand_products() {
        // p=1, T=2, m_c=4 at j=1:
        // [F(1,-2)B(-3), F(1,-1)B(-2), F(1,0)B(-1), B(0)].
        let (a1, a2, b1, b2) = (0.5, 0.4, 2.0, 3.0);
        let sys = scalar(&[a1, a2], &[b1, b2], &[1.0, 1.0]);
        let x = controllability_factor(&sys, 1, 4).unwrap();
        // A(-2)=A(2)... times -3..0 map to slots: -3→A(1)? slot((k-1) mod 2).
        let a = |k: i64| sys.a(k)[(0, 0)];
        let b = |k: i64| sys.b(k)[(0, 0)];
        let expected = [
            a(0) * a(-1) * a(-2) * b(-3),
            a(0) * a(-1) * b(-2),
            a(0) * b(-1),
            b(0),
        ];
        for (l, e) in expected.iter().enumerate() {
            assert!((x.matrix[(0, l)] - e).abs() < 1e-15, "column {l}");
        }
        assert_eq!(x.simulations, 2);
        assert_eq!(x.column_origin(3), (0, 3));
    }

    #[test]
    fn truncation_bound_scalar() {
        let sys = scalar(&[0.5], &[1.0], &[1.0]);
        assert_eq!(truncation_bound(&sys, 1, 0), 1.0);
        assert!((truncation_bound(&sys, 1, 3) - 0.015625).abs() < 1e-16);
    }

    #[test]
    fn energies_vanish_at_origin() {
        let sys = scalar(&[0.5, 0.4], &[2.0, 3.0], &[5.0, 7.0]);
        let zero = DVector::zeros(1);
        assert_eq!(output_energy(&sys, 1, &zero).unwrap(), 0.0);
        assert_eq!(min_input_energy(&sys, 1, &zero).unwrap(), 0.0);
    }

    #[test]
    fn singular_controllability_gramian_is_reported() {
        let a = vec![DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.3]))];
        let b = vec![DMatrix::from_column_slice(2, 1, &[1.0, 0.0])];
        let c = vec![DMatrix::from_row_slice(1, 2, &[1.0, 1.0])];
        let sys = PeriodicSystem::new(a, b, c).unwrap();
        let err = min_input_energy(&sys, 1, &DVector::from_vec(vec![1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::Unreachable { .. }));
    }
}
