//! Small dense linear-algebra helpers shared by the reduction pipeline.

use nalgebra::{DMatrix, DVector};

/// Thin SVD with singular values sorted in descending order.
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// Computes a thin SVD and reorders it so that singular values descend.
///
/// Each left singular vector is flipped so its largest-magnitude entry is
/// positive, with the matching right vector flipped along with it. This
/// makes the factorization reproducible across runs.
pub fn sorted_svd(m: &DMatrix<f64>) -> SortedSvd {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return SortedSvd {
            u: DMatrix::zeros(rows, 0),
            singular_values: Vec::new(),
            v: DMatrix::zeros(cols, 0),
        };
    }
    let svd = m.clone().svd(true, true);
    let u_raw = svd.u.expect("u requested");
    let v_raw = svd.v_t.expect("v_t requested").transpose();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut u = DMatrix::zeros(rows, k);
    let mut v = DMatrix::zeros(cols, k);
    let mut singular_values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let sign = dominant_sign(&u_raw.column(src).into_owned());
        u.set_column(dst, &(u_raw.column(src) * sign));
        v.set_column(dst, &(v_raw.column(src) * sign));
        singular_values.push(svd.singular_values[src]);
    }
    SortedSvd {
        u,
        singular_values,
        v,
    }
}

/// Sign (+1 or -1) that makes the largest-magnitude entry positive.
/// Ties go to the lowest index.
pub fn dominant_sign(v: &DVector<f64>) -> f64 {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = if x < 0.0 { -1.0 } else { 1.0 };
        }
    }
    sign
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Eigenvalue moduli of a square matrix, sorted descending.
pub fn eigenvalue_moduli(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    out.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    out
}

pub fn hstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack: row mismatch");
        out.view_mut((0, c0), b.shape()).copy_from(b);
        c0 += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack: column mismatch");
        out.view_mut((r0, 0), b.shape()).copy_from(b);
        r0 += b.nrows();
    }
    out
}

pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r0, c0), b.shape()).copy_from(b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// Extends the orthonormal columns of `basis` to `target` orthonormal columns.
///
/// Candidates are the canonical unit vectors; at each step the one with the
/// largest component outside the current span is taken (two Gram-Schmidt
/// passes), so the completion is deterministic.
pub fn complete_orthonormal(basis: &DMatrix<f64>, target: usize) -> DMatrix<f64> {
    let dim = basis.nrows();
    assert!(target <= dim, "cannot complete beyond the ambient dimension");
    let mut cols: Vec<DVector<f64>> = basis.column_iter().map(|c| c.into_owned()).collect();
    while cols.len() < target {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for e in 0..dim {
            let mut v = DVector::zeros(dim);
            v[e] = 1.0;
            for _ in 0..2 {
                for c in &cols {
                    let proj = c.dot(&v);
                    v -= c * proj;
                }
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|(b, _)| norm > *b + 1e-12) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("ambient dimension is nonzero");
        let mut v = v / norm;
        v *= dominant_sign(&v);
        cols.push(v);
    }
    DMatrix::from_columns(&cols)
}

/// Symmetric part `(M + Mᵀ)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Compresses a tall-or-wide factor `Z` into an equivalent factor with at
/// most `Z.nrows()` columns: the result `L` satisfies `L Lᵀ = Z Zᵀ`.
pub fn compress_factor(z: &DMatrix<f64>) -> DMatrix<f64> {
    if z.ncols() <= z.nrows() {
        return z.clone();
    }
    let r = z.transpose().qr().r();
    r.transpose()
}
