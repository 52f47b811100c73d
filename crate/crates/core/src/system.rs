//! T-periodic discrete-time systems, state-transition products, and forward
//! and adjoint simulation.
//!
//! Times are absolute integers. The stored matrices are `A(1), …, A(T)` and
//! lookups reduce any time cyclically, so `A(0) = A(T)` and `A(T+1) = A(1)`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::projection::{InputProjection, OutputProjection};

/// Absolute discrete time.
pub type Time = i64;

/// Systems whose monodromy spectral radius reaches `1 - STABILITY_MARGIN`
/// are rejected by every operation that needs a convergent Gramian series.
pub const STABILITY_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct PeriodicSystem {
    a: Vec<DMatrix<f64>>,
    b: Vec<DMatrix<f64>>,
    c: Vec<DMatrix<f64>>,
    n: usize,
    p: usize,
    q: usize,
    radius: OnceLock<f64>,
}

impl PeriodicSystem {
    /// Builds a system from one period of matrices, `A(1)..A(T)` etc.
    pub fn new(
        a: Vec<DMatrix<f64>>,
        b: Vec<DMatrix<f64>>,
        c: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let period = a.len();
        if period == 0 {
            return Err(Error::Dimension("period must be at least 1".into()));
        }
        if b.len() != period || c.len() != period {
            return Err(Error::Dimension(format!(
                "sequence lengths differ: A has {}, B has {}, C has {}",
                period,
                b.len(),
                c.len()
            )));
        }
        let n = a[0].nrows();
        let p = b[0].ncols();
        let q = c[0].nrows();
        if n == 0 || p == 0 || q == 0 {
            return Err(Error::Dimension("n, p and q must be positive".into()));
        }
        for k in 0..period {
            if a[k].shape() != (n, n) {
                return Err(Error::Dimension(format!(
                    "A[{k}] is {:?}, expected ({n}, {n})",
                    a[k].shape()
                )));
            }
            if b[k].shape() != (n, p) {
                return Err(Error::Dimension(format!(
                    "B[{k}] is {:?}, expected ({n}, {p})",
                    b[k].shape()
                )));
            }
            if c[k].shape() != (q, n) {
                return Err(Error::Dimension(format!(
                    "C[{k}] is {:?}, expected ({q}, {n})",
                    c[k].shape()
                )));
            }
        }
        Ok(Self {
            a,
            b,
            c,
            n,
            p,
            q,
            radius: OnceLock::new(),
        })
    }

    pub fn period(&self) -> usize {
        self.a.len()
    }
    pub fn states(&self) -> usize {
        self.n
    }
    pub fn inputs(&self) -> usize {
        self.p
    }
    pub fn outputs(&self) -> usize {
        self.q
    }

    /// Storage slot of absolute time `k`.
    pub fn slot(&self, k: Time) -> usize {
        (k - 1).rem_euclid(self.period() as Time) as usize
    }

    pub fn a(&self, k: Time) -> &DMatrix<f64> {
        &self.a[self.slot(k)]
    }
    pub fn b(&self, k: Time) -> &DMatrix<f64> {
        &self.b[self.slot(k)]
    }
    pub fn c(&self, k: Time) -> &DMatrix<f64> {
        &self.c[self.slot(k)]
    }

    pub fn a_matrices(&self) -> &[DMatrix<f64>] {
        &self.a
    }
    pub fn b_matrices(&self) -> &[DMatrix<f64>] {
        &self.b
    }
    pub fn c_matrices(&self) -> &[DMatrix<f64>] {
        &self.c
    }

    /// State-transition matrix `F(j_end, j_start) = A(j_end-1)···A(j_start)`,
    /// with `F(i, i) = I`.
    pub fn transition(&self, j_end: Time, j_start: Time) -> Result<DMatrix<f64>> {
        if j_end < j_start {
            return Err(Error::TimeRange {
                end: j_end,
                start: j_start,
            });
        }
        let mut f = DMatrix::identity(self.n, self.n);
        for k in j_start..j_end {
            f = self.a(k) * f;
        }
        Ok(f)
    }

    /// One-period monodromy matrix `F(j+T, j)`.
    pub fn monodromy(&self, j: Time) -> DMatrix<f64> {
        self.transition(j + self.period() as Time, j)
            .expect("forward range")
    }

    pub fn monodromy_spectral_radius(&self, j: Time) -> f64 {
        linalg::spectral_radius(&self.monodromy(j))
    }

    /// Spectral radius of the monodromy matrix, computed once per system.
    pub fn spectral_radius(&self) -> f64 {
        *self.radius.get_or_init(|| self.monodromy_spectral_radius(1))
    }

    /// Fails with [`Error::Unstable`] unless `ρ(F(j+T, j)) < 1 - STABILITY_MARGIN`.
    pub fn ensure_stable(&self) -> Result<()> {
        let radius = self.spectral_radius();
        if radius.is_finite() && radius < 1.0 - STABILITY_MARGIN {
            Ok(())
        } else {
            Err(Error::Unstable { radius })
        }
    }

    fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!(
                "state has length {}, expected {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Runs the recursion from `x(j0) = x0` for `inputs.len()` steps.
    pub fn simulate(
        &self,
        j0: Time,
        x0: &DVector<f64>,
        inputs: &[DVector<f64>],
    ) -> Result<Trajectory> {
        self.check_state(x0)?;
        let mut states = Vec::with_capacity(inputs.len() + 1);
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut x = x0.clone();
        for (step, u) in inputs.iter().enumerate() {
            if u.len() != self.p {
                return Err(Error::Dimension(format!(
                    "input {step} has length {}, expected {}",
                    u.len(),
                    self.p
                )));
            }
            let k = j0 + step as Time;
            outputs.push(self.c(k) * &x);
            let next = self.a(k) * &x + self.b(k) * u;
            states.push(std::mem::replace(&mut x, next));
        }
        states.push(x);
        Ok(Trajectory {
            start: j0,
            states,
            outputs,
        })
    }

    /// Zero-input response: `steps` outputs starting from `x(j0) = x0`.
    pub fn free_response(&self, j0: Time, x0: &DVector<f64>, steps: usize) -> Result<Trajectory> {
        let zero = vec![DVector::zeros(self.p); steps];
        self.simulate(j0, x0, &zero)
    }

    /// States `x(k0+1), …, x(k_end)` after a unit impulse on input channel
    /// `channel` at time `k0`, starting from rest.
    pub fn impulse_states(&self, k0: Time, channel: usize, k_end: Time) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity((k_end - k0).max(0) as usize);
        if k_end <= k0 {
            return out;
        }
        let mut x = self.b(k0).column(channel).into_owned();
        out.push(x.clone());
        for k in (k0 + 1)..k_end {
            x = self.a(k) * x;
            out.push(x.clone());
        }
        out
    }

    /// Adjoint system over `m` steps anchored at base time `j`, optionally
    /// driven through a T-periodic output projection.
    pub fn adjoint<'a>(
        &'a self,
        j: Time,
        m: usize,
        projection: Option<&'a OutputProjection>,
    ) -> Result<AdjointSystem<'a>> {
        adjoint_of(self, j, m, projection)
    }

    /// The system with inputs restricted by a T-periodic input projection:
    /// `B(k) ← B(k)·Θ_in(k)`.
    pub fn with_input_projection(&self, projection: &InputProjection) -> Result<PeriodicSystem> {
        if projection.period() != self.period() || projection.inputs() != self.p {
            return Err(Error::ProjectionMismatch(format!(
                "input projection has period {} over {} inputs; system has period {} and {} inputs",
                projection.period(),
                projection.inputs(),
                self.period(),
                self.p
            )));
        }
        let period = self.period() as Time;
        let b = (1..=period)
            .map(|k| self.b(k) * projection.basis_at(k))
            .collect();
        PeriodicSystem::new(self.a.clone(), b, self.c.clone())
    }

    /// The time-reversed transposed ("dual") system reflected about `center`:
    /// `A'(k) = A(center-k)ᵀ`, `B'(k) = C(center-k)ᵀ`, `C'(k) = B(center-k)ᵀ`.
    ///
    /// The response of the dual at time `center - k0` to an impulse at
    /// `center - k1` is the transpose of the original response at `k1` to an
    /// impulse at `k0`.
    pub fn dual(&self, center: Time) -> PeriodicSystem {
        let period = self.period() as Time;
        let mut a = Vec::with_capacity(self.period());
        let mut b = Vec::with_capacity(self.period());
        let mut c = Vec::with_capacity(self.period());
        for k in 1..=period {
            a.push(self.a(center - k).transpose());
            b.push(self.c(center - k).transpose());
            c.push(self.b(center - k).transpose());
        }
        PeriodicSystem::new(a, b, c).expect("transposed dimensions are consistent")
    }

    pub fn to_document(&self) -> SystemDocument {
        SystemDocument {
            period: self.period(),
            n: self.n,
            p: self.p,
            q: self.q,
            a: self.a.iter().map(crate::io::to_rows).collect(),
            b: self.b.iter().map(crate::io::to_rows).collect(),
            c: self.c.iter().map(crate::io::to_rows).collect(),
        }
    }

    pub fn from_document(doc: &SystemDocument) -> Result<Self> {
        let convert = |mats: &[Vec<Vec<f64>>], rows: usize, cols: usize, name: &str| {
            if mats.len() != doc.period {
                return Err(Error::Dimension(format!(
                    "{name} lists {} matrices for period {}",
                    mats.len(),
                    doc.period
                )));
            }
            mats.iter()
                .enumerate()
                .map(|(k, m)| {
                    crate::io::from_rows(m, rows, cols)
                        .map_err(|e| e.context(format!("{name}[{k}]")))
                })
                .collect::<Result<Vec<_>>>()
        };
        let a = convert(&doc.a, doc.n, doc.n, "A")?;
        let b = convert(&doc.b, doc.n, doc.p, "B")?;
        let c = convert(&doc.c, doc.q, doc.n, "C")?;
        PeriodicSystem::new(a, b, c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SystemDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }
}

impl PartialEq for PeriodicSystem {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b && self.c == other.c
    }
}

/// Interchange format for a periodic system. Matrices are row-major nested
/// arrays; the k-th entry of each list is the matrix at time k+1.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemDocument {
    #[serde(rename = "T")]
    pub period: usize,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<Vec<f64>>>,
}

/// Result of [`PeriodicSystem::simulate`]: `states[i] = x(start+i)` for
/// `i = 0..=m` and `outputs[i] = y(start+i)` for `i = 0..m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: Time,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.outputs.len()
    }

    pub fn output_energy(&self) -> f64 {
        self.outputs.iter().map(|y| y.norm_squared()).sum()
    }
}

/// Time-reversed transposed system used for observability snapshots,
///
/// `z(k+1) = Â(k) z(k) + Ĉ(k) v(k)`, `k = j..j+m-1`, with
/// `Â(k) = A(2j+m-k-1)ᵀ` and `Ĉ(k) = C(2j+m-k-1)ᵀ`, or
/// `Ĉ_P(k) = C(2j+m-k-1)ᵀ Θ(2j+m-k-1)` when projected.
///
/// Matrices are not materialized; the adjoint borrows the primal system and
/// applies transposes on the fly.
#[derive(Debug, Clone, Copy)]
pub struct AdjointSystem<'a> {
    system: &'a PeriodicSystem,
    base_time: Time,
    horizon: usize,
    projection: Option<&'a OutputProjection>,
}

/// See [`PeriodicSystem::adjoint`].
pub fn adjoint_of<'a>(
    sys: &'a PeriodicSystem,
    j: Time,
    m: usize,
    projection: Option<&'a OutputProjection>,
) -> Result<AdjointSystem<'a>> {
    if m == 0 {
        return Err(Error::InvalidArgument("adjoint horizon must be >= 1".into()));
    }
    if let Some(proj) = projection {
        if proj.period() != sys.period() || proj.outputs() != sys.outputs() {
            return Err(Error::ProjectionMismatch(format!(
                "output projection has period {} over {} outputs; system has period {} and {} outputs",
                proj.period(),
                proj.outputs(),
                sys.period(),
                sys.outputs()
            )));
        }
    }
    Ok(AdjointSystem {
        system: sys,
        base_time: j,
        horizon: m,
        projection,
    })
}

impl<'a> AdjointSystem<'a> {
    pub fn base_time(&self) -> Time {
        self.base_time
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn projection(&self) -> Option<&'a OutputProjection> {
        self.projection
    }

    /// Number of adjoint input channels: q, or r_op when projected.
    pub fn input_dim(&self) -> usize {
        self.projection
            .map_or(self.system.outputs(), |p| p.rank())
    }

    /// Primal time mirrored onto adjoint time `k`: `2j + m - k - 1`.
    pub fn source_time(&self, k: Time) -> Time {
        2 * self.base_time + self.horizon as Time - k - 1
    }

    pub fn a_hat(&self, k: Time) -> DMatrix<f64> {
        self.system.a(self.source_time(k)).transpose()
    }

    pub fn c_hat(&self, k: Time) -> DMatrix<f64> {
        let src = self.source_time(k);
        let ct = self.system.c(src).transpose();
        match self.projection {
            Some(proj) => ct * proj.basis_at(src),
            None => ct,
        }
    }

    fn c_hat_column(&self, k: Time, channel: usize) -> DVector<f64> {
        let src = self.source_time(k);
        let c = self.system.c(src);
        match self.projection {
            Some(proj) => c.tr_mul(&proj.basis_at(src).column(channel).into_owned()),
            None => c.row(channel).transpose(),
        }
    }

    /// Adjoint states `z(k0+1), …, z(k_end)` after a unit impulse on channel
    /// `channel` at adjoint time `k0`, starting from rest.
    pub fn impulse_states(&self, k0: Time, channel: usize, k_end: Time) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity((k_end - k0).max(0) as usize);
        if k_end <= k0 {
            return out;
        }
        let mut z = self.c_hat_column(k0, channel);
        out.push(z.clone());
        for k in (k0 + 1)..k_end {
            z = self.system.a(self.source_time(k)).tr_mul(&z);
            out.push(z.clone());
        }
        out
    }

    /// Snapshot `z(j+m)` of the impulse started at `z(j+offset) = 0`.
    pub fn impulse_snapshot(&self, offset: usize, channel: usize) -> DVector<f64> {
        let end = self.base_time + self.horizon as Time;
        self.impulse_states(self.base_time + offset as Time, channel, end)
            .pop()
            .unwrap_or_else(|| DVector::zeros(self.system.states()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_system(a: &[f64], b: &[f64], c: &[f64]) -> PeriodicSystem {
        let m = |v: &[f64]| v.iter().map(|&x| DMatrix::from_element(1, 1, x)).collect();
        PeriodicSystem::new(m(a), m(b), m(c)).unwrap()
    }

    #[test]
    fn transition_identity_and_scalar_product() {
        let sys = scalar_system(&[0.5, 0.4], &[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(sys.transition(7, 7).unwrap(), DMatrix::identity(1, 1));
        assert!((sys.transition(3, 1).unwrap()[(0, 0)] - 0.2).abs() < 1e-15);
        assert!(matches!(
            sys.transition(1, 3),
            Err(Error::TimeRange { end: 1, start: 3 })
        ));
    }

    #[test]
    fn cyclic_lookup_covers_negative_times() {
        let sys = scalar_system(&[0.1, 0.2, 0.3], &[1.0; 3], &[1.0; 3]);
        assert_eq!(sys.a(1)[(0, 0)], 0.1);
        assert_eq!(sys.a(3)[(0, 0)], 0.3);
        assert_eq!(sys.a(0)[(0, 0)], 0.3);
        assert_eq!(sys.a(-2)[(0, 0)], 0.1);
        assert_eq!(sys.a(4)[(0, 0)], 0.1);
    }

    #[test]
    fn spectral_radius_scalar() {
        let sys = scalar_system(&[0.5, 0.4], &[1.0, 1.0], &[1.0, 1.0]);
        assert!((sys.monodromy_spectral_radius(1) - 0.2).abs() < 1e-15);
        assert!((sys.monodromy_spectral_radius(2) - 0.2).abs() < 1e-15);
        sys.ensure_stable().unwrap();
        let unstable = scalar_system(&[2.0], &[1.0], &[1.0]);
        assert!(matches!(
            unstable.ensure_stable(),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        let a = vec![DMatrix::identity(2, 2)];
        let b = vec![DMatrix::zeros(3, 1)];
        let c = vec![DMatrix::zeros(1, 2)];
        assert!(matches!(
            PeriodicSystem::new(a.clone(), b, c.clone()),
            Err(Error::Dimension(_))
        ));
        assert!(PeriodicSystem::new(a, vec![], c).is_err());
    }

    #[test]
    fn simulate_rejects_wrong_input_length() {
        let sys = scalar_system(&[0.5], &[1.0], &[1.0]);
        let err = sys
            .simulate(1, &DVector::zeros(1), &[DVector::zeros(2)])
            .unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn adjoint_scalar_impulse() {
        // z(j+m) = F(j+m-1, j)ᵀ C(j+m-1)ᵀ for the impulse at z(j).
        let sys = scalar_system(&[0.5, 0.4, 0.8], &[1.0; 3], &[2.0, 3.0, 5.0]);
        let j = 1;
        let m = 4;
        let adj = sys.adjoint(j, m, None).unwrap();
        let z = adj.impulse_snapshot(0, 0);
        // F(4,1) = A(3)A(2)A(1) = 0.8*0.4*0.5, C(4) = C(1) = 2.
        assert!((z[0] - 0.16 * 2.0).abs() < 1e-15);
        assert!(matches!(sys.adjoint(j, 0, None), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn adjoint_matrices_mirror_time() {
        let sys = scalar_system(&[0.5, 0.4, 0.8], &[1.0; 3], &[2.0, 3.0, 5.0]);
        let adj = sys.adjoint(2, 5, None).unwrap();
        for k in 2..7 {
            let src = 2 * 2 + 5 - k - 1;
            assert_eq!(adj.a_hat(k), sys.a(src).transpose());
            assert_eq!(adj.c_hat(k), sys.c(src).transpose());
        }
    }

    #[test]
    fn document_round_trip() {
        let sys = scalar_system(&[0.5, 0.1 + 0.2], &[1.0, -3.25], &[1e-300, 7.0]);
        let back = PeriodicSystem::from_json(&sys.to_json().unwrap()).unwrap();
        assert_eq!(sys, back);
        let text = sys.to_json().unwrap();
        assert!(text.contains("\"T\": 2"));
    }
}
