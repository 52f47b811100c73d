//! POD output projections for the lifted system, restricted to
//! block-diagonal (T-periodic) or single time-invariant form, and the dual
//! input projection.
//!
//! With `P̃ = diag(P(j), …, P(j+T-1))` the lifted Frobenius objective
//! `Σ_t ‖G̃(t) − P̃ G̃(t)‖²` splits into T independent problems, one per time
//! offset, each solved by the leading left singular vectors of the stacked
//! impulse-response snapshots at that offset.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::matrix_list;
use crate::lifting::{lifted_impulse_response, ImpulseResponseBlocks};
use crate::linalg::{block_diag, complete_orthonormal, hstack, sorted_svd};
use crate::system::{PeriodicSystem, Time};

/// Singular values below this fraction of the largest count as zero when
/// estimating the rank of a snapshot set.
const SNAPSHOT_RANK_TOL: f64 = 1e-12;
/// Relative eigenvalue gap at the cut below which the subspace is flagged.
const GAP_WARN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionVariant {
    /// One basis per time step along the period.
    Periodic,
    /// A single basis shared by every time step.
    Single,
}

impl std::fmt::Display for ProjectionVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProjectionVariant::Periodic => write!(f, "periodic"),
            ProjectionVariant::Single => write!(f, "single"),
        }
    }
}

/// Orthonormal bases `Θ(k) ∈ ℝ^{q×r}` with `P(k) = Θ(k)Θ(k)ᵀ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputProjection {
    pub variant: ProjectionVariant,
    pub base_time: Time,
    pub period: usize,
    pub rank: usize,
    /// `Θ(j+i)` for `i = 0..T-1`, or one matrix for the single variant.
    #[serde(with = "matrix_list")]
    pub bases: Vec<DMatrix<f64>>,
    /// Eigenvalues of `R(j+i)` (or pooled `R`), descending.
    pub spectra: Vec<Vec<f64>>,
    /// Fraction of snapshot energy captured by the retained directions.
    pub captured_energy: Vec<f64>,
    /// `λ_r − λ_{r+1}` at the cut; `None` when `r = q`.
    pub spectral_gaps: Vec<Option<f64>>,
    pub snapshot_ranks: Vec<usize>,
    pub warnings: Vec<String>,
}

impl OutputProjection {
    /// Wraps given orthonormal bases (one per offset, or one for `Single`).
    pub fn from_bases(
        variant: ProjectionVariant,
        base_time: Time,
        period: usize,
        bases: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let expected = match variant {
            ProjectionVariant::Periodic => period,
            ProjectionVariant::Single => 1,
        };
        if bases.len() != expected || period == 0 {
            return Err(Error::ProjectionMismatch(format!(
                "{variant} projection over period {period} needs {expected} bases, got {}",
                bases.len()
            )));
        }
        let (q, rank) = bases[0].shape();
        if bases.iter().any(|b| b.shape() != (q, rank)) {
            return Err(Error::ProjectionMismatch("bases differ in shape".into()));
        }
        for b in &bases {
            let defect = (b.tr_mul(b) - DMatrix::identity(rank, rank)).norm();
            if defect > 1e-10 {
                return Err(Error::ProjectionMismatch(format!(
                    "basis columns are not orthonormal (defect {defect:e})"
                )));
            }
        }
        let n = bases.len();
        Ok(Self {
            variant,
            base_time,
            period,
            rank,
            bases,
            spectra: vec![Vec::new(); n],
            captured_energy: vec![f64::NAN; n],
            spectral_gaps: vec![None; n],
            snapshot_ranks: vec![0; n],
            warnings: Vec::new(),
        })
    }

    /// `Θ(k) = I_q` at every step.
    pub fn identity(base_time: Time, period: usize, q: usize) -> Self {
        Self::from_bases(
            ProjectionVariant::Periodic,
            base_time,
            period,
            vec![DMatrix::identity(q, q); period],
        )
        .expect("identity is orthonormal")
    }

    pub fn period(&self) -> usize {
        self.period
    }
    pub fn outputs(&self) -> usize {
        self.bases[0].nrows()
    }
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `Θ(k)` for absolute time `k`.
    pub fn basis_at(&self, k: Time) -> &DMatrix<f64> {
        match self.variant {
            ProjectionVariant::Single => &self.bases[0],
            ProjectionVariant::Periodic => {
                &self.bases[(k - self.base_time).rem_euclid(self.period as Time) as usize]
            }
        }
    }

    pub fn projector_at(&self, k: Time) -> DMatrix<f64> {
        let th = self.basis_at(k);
        th * th.transpose()
    }

    /// Basis for each offset `i = 0..T-1`, expanding the single variant.
    pub fn offset_bases(&self) -> Vec<DMatrix<f64>> {
        (0..self.period as Time)
            .map(|i| self.basis_at(self.base_time + i).clone())
            .collect()
    }

    /// Block-diagonal lifted projector `P̃_j`.
    pub fn lifted_projector(&self) -> DMatrix<f64> {
        block_diag(
            &(0..self.period as Time)
                .map(|i| self.projector_at(self.base_time + i))
                .collect::<Vec<_>>(),
        )
    }

    /// Per-offset bases and eigenvalue spectra as CSV:
    /// `kind,offset,row,col,value` with `kind` either `basis` or `eigenvalue`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,offset,row,col,value\n");
        for (i, b) in self.bases.iter().enumerate() {
            for r in 0..b.nrows() {
                for c in 0..b.ncols() {
                    out.push_str(&format!("basis,{i},{r},{c},{}\n", crate::io::fmt_f64(b[(r, c)])));
                }
            }
        }
        for (i, s) in self.spectra.iter().enumerate() {
            for (l, v) in s.iter().enumerate() {
                out.push_str(&format!("eigenvalue,{i},{l},0,{}\n", crate::io::fmt_f64(*v)));
            }
        }
        out
    }
}

struct PodBasis {
    basis: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    rank: usize,
    gap: Option<f64>,
    captured: f64,
}

/// Leading `r` left singular vectors of a snapshot matrix (method of
/// snapshots for `R = S Sᵀ`), completed to `r` columns if needed.
fn pod_basis(snapshots: &DMatrix<f64>, r: usize) -> PodBasis {
    let q = snapshots.nrows();
    let svd = sorted_svd(snapshots);
    let eigenvalues: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    let top = svd.singular_values.first().copied().unwrap_or(0.0);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| top > 0.0 && s > SNAPSHOT_RANK_TOL * top)
        .count();
    let keep = r.min(svd.u.ncols()).min(rank);
    let leading = svd.u.columns(0, keep).into_owned();
    let basis = if keep < r {
        complete_orthonormal(&leading, r)
    } else {
        leading
    };
    let total: f64 = eigenvalues.iter().sum();
    let captured = if total > 0.0 {
        eigenvalues.iter().take(r).sum::<f64>() / total
    } else {
        1.0
    };
    let gap = (r < q).then(|| {
        let lo = eigenvalues.get(r).copied().unwrap_or(0.0);
        let hi = eigenvalues.get(r - 1).copied().unwrap_or(0.0);
        hi - lo
    });
    debug_assert_eq!(basis.ncols(), r);
    PodBasis {
        basis,
        eigenvalues,
        rank,
        gap,
        captured,
    }
}

/// T-periodic (or single) rank-`r_op` output projection minimizing the
/// Frobenius impulse-response error over the given blocks.
pub fn pod_output_projection(
    blocks: &ImpulseResponseBlocks,
    r_op: usize,
    variant: ProjectionVariant,
) -> Result<OutputProjection> {
    let q = blocks.outputs();
    if r_op == 0 || r_op > q {
        return Err(Error::InvalidArgument(format!(
            "projection rank {r_op} outside 1..={q}"
        )));
    }
    let period = blocks.period();
    let stacked = |i: usize| hstack(&blocks.offset_blocks(i).cloned().collect::<Vec<_>>());
    let pods: Vec<PodBasis> = match variant {
        ProjectionVariant::Periodic => (0..period)
            .into_par_iter()
            .map(|i| pod_basis(&stacked(i), r_op))
            .collect(),
        ProjectionVariant::Single => {
            let all = hstack(&(0..period).map(stacked).collect::<Vec<_>>());
            vec![pod_basis(&all, r_op)]
        }
    };
    let mut warnings = Vec::new();
    for (i, pod) in pods.iter().enumerate() {
        if pod.rank < r_op && r_op < q {
            warnings.push(format!(
                "offset {i}: snapshot rank {} is below r_op = {r_op}; trailing directions are arbitrary",
                pod.rank
            ));
        }
        if let (Some(gap), Some(&top)) = (pod.gap, pod.eigenvalues.first()) {
            if pod.rank >= r_op && gap < GAP_WARN * top {
                warnings.push(format!(
                    "offset {i}: eigenvalue gap {gap:e} at the cut; projection is not unique"
                ));
            }
        }
    }
    Ok(OutputProjection {
        variant,
        base_time: blocks.base_time(),
        period,
        rank: r_op,
        spectra: pods.iter().map(|p| p.eigenvalues.clone()).collect(),
        captured_energy: pods.iter().map(|p| p.captured).collect(),
        spectral_gaps: pods.iter().map(|p| p.gap).collect(),
        snapshot_ranks: pods.iter().map(|p| p.rank).collect(),
        bases: pods.into_iter().map(|p| p.basis).collect(),
        warnings,
    })
}

/// Value of the output-projection objective in periodic and lifted form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionObjective {
    /// `Σ_i Σ_t ‖G(j+tT+i, j) − P(j+i) G(j+tT+i, j)‖²_F`.
    pub total: f64,
    /// The inner sum for each offset `i`.
    pub per_offset: Vec<f64>,
    /// `Σ_t ‖G̃_j(t) − P̃_j G̃_j(t)‖²_F`.
    pub lifted: f64,
}

pub fn projection_objective(
    blocks: &ImpulseResponseBlocks,
    proj: &OutputProjection,
) -> ProjectionObjective {
    objective_for_bases(blocks, &proj.offset_bases())
}

/// Objective for arbitrary orthonormal per-offset bases (`bases[i]` is q×r;
/// r may be zero). A single basis is applied at every offset.
pub fn objective_for_bases(
    blocks: &ImpulseResponseBlocks,
    bases: &[DMatrix<f64>],
) -> ProjectionObjective {
    let period = blocks.period();
    let basis = |i: usize| if bases.len() == 1 { &bases[0] } else { &bases[i] };
    let per_offset: Vec<f64> = (0..period)
        .map(|i| {
            let th = basis(i);
            blocks
                .offset_blocks(i)
                .map(|g| (g - th * th.tr_mul(g)).norm_squared())
                .sum()
        })
        .collect();
    let projector = block_diag(
        &(0..period)
            .map(|i| basis(i) * basis(i).transpose())
            .collect::<Vec<_>>(),
    );
    let lifted = (0..=blocks.horizon())
        .map(|t| {
            let g = blocks.lifted(t);
            (&g - &projector * &g).norm_squared()
        })
        .sum();
    ProjectionObjective {
        total: per_offset.iter().sum(),
        per_offset,
        lifted,
    }
}

/// T-periodic orthonormal input bases `Θ_in(k) ∈ ℝ^{p×r}`; the projected
/// system uses `B(k)Θ_in(k)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputProjection {
    pub base_time: Time,
    pub period: usize,
    pub rank: usize,
    /// `Θ_in(j+b)` for `b = 0..T-1`.
    #[serde(with = "matrix_list")]
    pub bases: Vec<DMatrix<f64>>,
    pub spectra: Vec<Vec<f64>>,
    pub captured_energy: Vec<f64>,
    pub warnings: Vec<String>,
}

impl InputProjection {
    pub fn period(&self) -> usize {
        self.period
    }
    pub fn inputs(&self) -> usize {
        self.bases[0].nrows()
    }
    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn basis_at(&self, k: Time) -> &DMatrix<f64> {
        &self.bases[(k - self.base_time).rem_euclid(self.period as Time) as usize]
    }
}

/// Input projection from the role-swapped problem: the output-projection
/// pipeline applied to the dual (time-reversed, transposed) system, whose
/// impulse responses are the adjoint responses of the original.
///
/// Minimizes `Σ_t ‖G̃(t) − G̃(t) P̃_in‖²_F` over block-diagonal `P̃_in`,
/// truncated after `horizon + 1` lifted steps.
pub fn dual_input_projection(
    sys: &PeriodicSystem,
    j: Time,
    r_ip: usize,
    horizon: usize,
) -> Result<InputProjection> {
    let p = sys.inputs();
    if r_ip == 0 || r_ip > p {
        return Err(Error::InvalidArgument(format!(
            "input projection rank {r_ip} outside 1..={p}"
        )));
    }
    let period = sys.period();
    // Reflecting about 2j+T-1 maps original times j..j+T-1 onto dual times
    // j+T-1..j, so dual offset i pairs with original offset T-1-i.
    let center = 2 * j + period as Time - 1;
    let dual = sys.dual(center);
    let blocks = lifted_impulse_response(&dual, j, horizon);
    let proj = pod_output_projection(&blocks, r_ip, ProjectionVariant::Periodic)?;
    let reorder = |i: usize| period - 1 - i;
    Ok(InputProjection {
        base_time: j,
        period,
        rank: r_ip,
        bases: (0..period).map(|b| proj.bases[reorder(b)].clone()).collect(),
        spectra: (0..period).map(|b| proj.spectra[reorder(b)].clone()).collect(),
        captured_energy: (0..period).map(|b| proj.captured_energy[reorder(b)]).collect(),
        warnings: proj.warnings,
    })
}
