//! Small dense-subspace utilities shared by the splitting and tube modules.
//!
//! Subspaces are handled as lists of coordinate vectors. Rank decisions use a
//! singular-value gap with a relative threshold, so callers get the same
//! answer for the same inputs.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold for rank decisions.
pub const RANK_RTOL: f64 = 1e-8;

/// Columns of `vs` assembled into a matrix (n x k). Empty lists produce an
/// n x 0 matrix.
pub fn columns(n: usize, vs: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, vs.len());
    for (j, v) in vs.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// Numerical rank of `m` with the relative threshold `rtol`.
pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * max).count()
}

/// Orthonormal basis of the kernel of `m` (right null space), via SVD.
///
/// Returns the basis vectors and the singular-value gap `smallest kept /
/// largest dropped` (`f64::INFINITY` when one side is empty).
pub fn kernel_with_gap(m: &DMatrix<f64>, rtol: f64) -> (Vec<DVector<f64>>, f64) {
    let ncols = m.ncols();
    if ncols == 0 {
        return (Vec::new(), f64::INFINITY);
    }
    if m.nrows() == 0 {
        let basis = (0..ncols)
            .map(|j| DVector::from_fn(ncols, |i, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        return (basis, f64::INFINITY);
    }
    // Pad wide matrices with zero rows so the thin SVD still produces a full
    // set of right singular vectors.
    let work = if m.nrows() < ncols {
        let mut p = DMatrix::zeros(ncols, ncols);
        p.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = work.svd(false, true);
    let v_t = svd.v_t.expect("svd requested v_t");
    let sv = &svd.singular_values;
    let max = sv.max();
    // Singular values are sorted descending; columns of V beyond the numerical
    // rank span the kernel. nalgebra only returns min(nrows, ncols) singular
    // values, so any extra columns of V correspond to exact kernel directions.
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (i, &s) in sv.iter().enumerate() {
        if max > 0.0 && s > rtol * max {
            kept.push((i, s));
        } else {
            dropped.push((i, s));
        }
    }
    let gap = match (kept.last(), dropped.first()) {
        (Some(&(_, lo)), Some(&(_, hi))) if hi > 0.0 => lo / hi,
        _ => f64::INFINITY,
    };
    let mut basis: Vec<DVector<f64>> = dropped
        .iter()
        .map(|&(i, _)| v_t.row(i).transpose())
        .collect();
    for j in sv.len()..ncols {
        basis.push(v_t.row(j).transpose());
    }
    (basis, gap)
}

/// Gram–Schmidt with respect to the inner product `metric`, dropping
/// numerically dependent vectors.
pub fn metric_orthonormalize(
    vs: &[DVector<f64>],
    metric: &DMatrix<f64>,
    rtol: f64,
) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let scale = vs
        .iter()
        .map(|v| (v.dot(&(metric * v))).abs().sqrt())
        .fold(0.0_f64, f64::max);
    for v in vs {
        let mut w = v.clone();
        for b in &basis {
            let c = b.dot(&(metric * &w));
            w -= b * c;
        }
        let norm = w.dot(&(metric * &w)).max(0.0).sqrt();
        if norm > rtol.max(1e-13) * scale.max(1.0) {
            basis.push(w / norm);
        }
    }
    basis
}

/// Metric-orthogonal complement of `span(vs)` inside `span(ambient)`.
///
/// Both inputs are coordinate vectors in the same n-dimensional space; the
/// result is a metric-orthonormal basis of the complement.
pub fn metric_complement_in(
    vs: &[DVector<f64>],
    ambient: &[DVector<f64>],
    metric: &DMatrix<f64>,
) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = metric_orthonormalize(vs, metric, RANK_RTOL);
    let target = metric_orthonormalize(ambient, metric, RANK_RTOL).len();
    let mut complement = Vec::new();
    for v in ambient {
        if basis.len() >= target {
            break;
        }
        let mut w = v.clone();
        for b in &basis {
            let c = b.dot(&(metric * &w));
            w -= b * c;
        }
        let norm = w.dot(&(metric * &w)).max(0.0).sqrt();
        if norm > 1e-10 {
            let u = w / norm;
            basis.push(u.clone());
            complement.push(u);
        }
    }
    complement
}

/// Intersection of two subspaces given by spanning sets, as an orthonormal
/// basis (dot product). Computed from the kernel of the stacked system
/// `A x = B y`.
pub fn intersection(a: &[DVector<f64>], b: &[DVector<f64>], n: usize) -> Vec<DVector<f64>> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let ma = columns(n, a);
    let mb = columns(n, b);
    let mut stacked = DMatrix::zeros(n, a.len() + b.len());
    stacked.view_mut((0, 0), (n, a.len())).copy_from(&ma);
    stacked
        .view_mut((0, a.len()), (n, b.len()))
        .copy_from(&(-&mb));
    let (ker, _) = kernel_with_gap(&stacked, RANK_RTOL);
    let vecs: Vec<DVector<f64>> = ker
        .iter()
        .map(|k| {
            let x = k.rows(0, a.len()).into_owned();
            &ma * x
        })
        .collect();
    metric_orthonormalize(&vecs, &DMatrix::identity(n, n), RANK_RTOL)
}

/// Largest principal angle (radians) between two subspaces of the same
/// dimension, via singular values of `Qa^T Qb`.
pub fn subspace_angle(a: &[DVector<f64>], b: &[DVector<f64>], n: usize) -> f64 {
    if a.len() != b.len() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.is_empty() {
        return 0.0;
    }
    let id = DMatrix::identity(n, n);
    let qa = columns(n, &metric_orthonormalize(a, &id, RANK_RTOL));
    let qb = columns(n, &metric_orthonormalize(b, &id, RANK_RTOL));
    let m = qa.transpose() * qb;
    let sv = m.singular_values();
    let cos = sv.min().clamp(-1.0, 1.0);
    cos.acos()
}

/// Solve the least-squares problem `A x = b` via SVD with the default rank
/// threshold.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    lstsq_with(a, b, RANK_RTOL * 1e-3)
}

/// Least squares with an explicit relative singular-value cutoff. Jacobians
/// assembled by finite differences carry noise of order `step^2`; dropping
/// their near-null directions keeps Gauss-Newton steps out of the noise.
pub fn lstsq_with(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    svd.solve(b, rcond * max_sv.max(1e-300)).expect("svd solve")
}
