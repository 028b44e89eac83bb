//! Adapted splittings of the Lie algebra and symplectic-slice data.
//!
//! For a covector `mu` and a compact subalgebra `h` with `[h,h]` annihilating
//! `mu`, the algebra splits as `g = g_mu + o + l + n`, block-diagonalizing the
//! antisymmetric form `Omega^mu(x,y) = -<mu,[x,y]>`:
//!
//! - `l = h ∩ g_mu^perp` and `n` are isotropic, paired nondegenerately;
//! - `Omega^mu` restricted to `o` is nondegenerate;
//! - `o` is `Omega^mu`-orthogonal to `l + n`.
//!
//! The construction uses invariant-metric complements, a kernel computation
//! for `o`, and takes `n` as the image of `l` under the polar complex
//! structure of the restricted form. Every splitting is re-certified
//! numerically before it is returned.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::lie::{
    self, bracket, coad, diamond, exp, pairing, AlgebraVector, CoalgebraVector, GroupDescriptor,
    LieError, Representation,
};
use crate::linalg;

/// Residual bound for splitting certification.
pub const CERT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SplittingError {
    #[error("ill-conditioned kernel: singular-value gap {gap:.3e} below 1e3 (mu too close to a stratum boundary)")]
    IllConditionedKernel { gap: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("certification failed: {invariant} (residual {residual:.3e})")]
    CertificationFailed { invariant: String, residual: f64 },
    #[error("sigma map is singular (smallest/largest singular value {ratio:.3e})")]
    SingularSigma { ratio: f64 },
    #[error(transparent)]
    Lie(#[from] LieError),
}

/// The antisymmetric form `Omega^mu` on the declared basis.
#[derive(Debug, Clone)]
pub struct OmegaForm {
    pub matrix: DMatrix<f64>,
}

/// Assemble `Omega^mu[i][j] = -<mu, [e_i, e_j]>`.
pub fn omega_form(mu: &CoalgebraVector) -> OmegaForm {
    let n = mu.descriptor.dim;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += mu.coords[k] * mu.descriptor.structure[k][(i, j)];
            }
            m[(i, j)] = -s;
        }
    }
    OmegaForm { matrix: m }
}

impl OmegaForm {
    /// Evaluate on coordinate vectors.
    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.matrix * y)[(0, 0)]
    }
}

/// Orthonormal basis of the isotropy algebra `g_mu = ker(xi -> coad(xi, mu))`.
///
/// Fails when the singular values of the coadjoint map show no clear rank gap.
pub fn isotropy_algebra(mu: &CoalgebraVector) -> Result<Vec<AlgebraVector>, SplittingError> {
    let desc = &mu.descriptor;
    let n = desc.dim;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let e_i = AlgebraVector::new(desc.clone(), unit(n, i));
        k.set_column(i, &coad(&e_i, mu)?.coords);
    }
    let (kernel, gap) = linalg::kernel_with_gap(&k, linalg::RANK_RTOL);
    if gap < 1e3 {
        return Err(SplittingError::IllConditionedKernel { gap });
    }
    Ok(kernel
        .into_iter()
        .map(|v| AlgebraVector::new(desc.clone(), v))
        .collect())
}

fn unit(n: usize, k: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 })
}

/// An `Ad_H`-invariant inner product on the algebra.
///
/// SO(3) gets the bi-invariant dot product. Otherwise the coordinate dot
/// product is averaged over sampled elements of the connected subgroup
/// generated by `h` (64 uniform circle samples for one-dimensional `h`,
/// pseudo-random exponentials for larger `h`).
pub fn invariant_metric(
    descriptor: &Arc<GroupDescriptor>,
    h_basis: &[AlgebraVector],
) -> Result<DMatrix<f64>, SplittingError> {
    let n = descriptor.dim;
    let base = DMatrix::identity(n, n);
    if h_basis.is_empty() || descriptor.name == "so3" {
        return Ok(base);
    }
    let samples = sample_subgroup(descriptor, h_basis, 64)?;
    let mut acc = DMatrix::zeros(n, n);
    let count = samples.len() as f64;
    for g in &samples {
        let a = lie::ad_matrix(g);
        acc += a.transpose() * &base * a;
    }
    acc /= count;
    Ok((&acc + acc.transpose()) * 0.5)
}

/// Sample elements of the connected subgroup generated by `h_basis`.
pub fn sample_subgroup(
    descriptor: &Arc<GroupDescriptor>,
    h_basis: &[AlgebraVector],
    count: usize,
) -> Result<Vec<lie::GroupElement>, SplittingError> {
    if h_basis.is_empty() {
        return Ok(vec![lie::GroupElement::identity(descriptor.clone())]);
    }
    if h_basis.len() == 1 {
        let gen = normalize_compact_generator(&h_basis[0])?;
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            let scaled = AlgebraVector::new(descriptor.clone(), &gen.coords * theta);
            out.push(exp(&scaled));
        }
        return Ok(out);
    }
    // higher-dimensional compact subgroups: pseudo-random exponentials
    let mut state = 0x9e3779b97f4a7c15_u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v = DVector::zeros(descriptor.dim);
        for b in h_basis {
            v += &b.coords * ((next() * 2.0 - 1.0) * std::f64::consts::PI);
        }
        out.push(exp(&AlgebraVector::new(descriptor.clone(), v)));
    }
    Ok(out)
}

/// Rescale a generator of a compact one-parameter subgroup so that
/// `exp(2 pi u) = e`, using the largest imaginary eigenvalue of its matrix.
pub fn normalize_compact_generator(xi: &AlgebraVector) -> Result<AlgebraVector, SplittingError> {
    let m = xi.matrix();
    let eigs = m.complex_eigenvalues();
    let omega = eigs.iter().map(|z| z.im.abs()).fold(0.0_f64, f64::max);
    if omega < 1e-12 * xi.norm().max(1e-300) {
        return Err(SplittingError::Precondition(format!(
            "subalgebra generator of {} does not generate a compact subgroup",
            xi.descriptor.name
        )));
    }
    Ok(AlgebraVector::new(
        xi.descriptor.clone(),
        &xi.coords / omega,
    ))
}

/// Certified bases for the adapted splitting, plus the auxiliary splitting
/// `g_mu = h_mu + p`.
#[derive(Debug, Clone)]
pub struct AdaptedSplitting {
    pub descriptor: Arc<GroupDescriptor>,
    pub mu: CoalgebraVector,
    /// Invariant inner product used for all complements (Gram matrix).
    pub metric: DMatrix<f64>,
    pub g_mu: Vec<AlgebraVector>,
    pub o: Vec<AlgebraVector>,
    pub l: Vec<AlgebraVector>,
    pub n: Vec<AlgebraVector>,
    pub h: Vec<AlgebraVector>,
    pub h_mu: Vec<AlgebraVector>,
    /// Metric complement of `h_mu` in `g_mu`.
    pub p: Vec<AlgebraVector>,
    pub omega: OmegaForm,
}

/// Construct and certify the adapted splitting.
pub fn adapted_splitting(
    descriptor: &Arc<GroupDescriptor>,
    h_basis: &[AlgebraVector],
    mu: &CoalgebraVector,
    metric: &DMatrix<f64>,
) -> Result<AdaptedSplitting, SplittingError> {
    let n_dim = descriptor.dim;
    let scale = mu.norm().max(1.0);

    // h must be a subalgebra
    for (i, a) in h_basis.iter().enumerate() {
        for b in h_basis.iter().skip(i + 1) {
            let br = bracket(a, b)?;
            let residual = subspace_residual(&br.coords, h_basis, metric);
            if residual > 1e-9 * br.norm().max(1.0) {
                return Err(SplittingError::Precondition(format!(
                    "h is not closed under the bracket (residual {residual:.3e})"
                )));
            }
            // [h,h] must annihilate mu
            let ann = pairing(mu, &br).abs();
            if ann > 1e-9 * scale {
                return Err(SplittingError::Precondition(format!(
                    "[h,h] does not annihilate mu (residual {ann:.3e})"
                )));
            }
        }
    }
    // mu itself must annihilate h (the momentum of a point with isotropy H),
    // otherwise h need not split as h_mu + (h ∩ g_mu^perp)
    for eta in h_basis {
        let v = pairing(mu, eta).abs();
        if v > 1e-9 * scale {
            return Err(SplittingError::Precondition(format!(
                "mu does not annihilate h (<mu, eta> = {v:.3e})"
            )));
        }
    }

    // metric must be Ad_H-invariant (sampled)
    let h_samples = sample_subgroup(descriptor, h_basis, 16)?;
    for g in &h_samples {
        let a = lie::ad_matrix(g);
        let residual = (a.transpose() * metric * &a - metric).norm();
        if residual > 1e-8 * metric.norm() {
            return Err(SplittingError::Precondition(format!(
                "metric is not Ad_H-invariant (sampled residual {residual:.3e})"
            )));
        }
    }

    let omega = omega_form(mu);
    let g_mu_raw = isotropy_algebra(mu)?;
    let g_mu = relabel(
        descriptor,
        linalg::metric_orthonormalize(&coords(&g_mu_raw), metric, linalg::RANK_RTOL),
    );

    let full: Vec<DVector<f64>> = (0..n_dim).map(|i| unit(n_dim, i)).collect();
    let g_mu_perp = linalg::metric_complement_in(&coords(&g_mu), &full, metric);

    // l = h ∩ g_mu^perp
    let l_vecs = linalg::intersection(&coords(h_basis), &g_mu_perp, n_dim);
    let l = relabel(
        descriptor,
        linalg::metric_orthonormalize(&l_vecs, metric, linalg::RANK_RTOL),
    );

    // h_mu = h ∩ g_mu and p = metric complement of h_mu in g_mu
    let h_mu_vecs = linalg::intersection(&coords(h_basis), &coords(&g_mu), n_dim);
    let h_mu = relabel(
        descriptor,
        linalg::metric_orthonormalize(&h_mu_vecs, metric, linalg::RANK_RTOL),
    );
    let p = relabel(
        descriptor,
        linalg::metric_complement_in(&coords(&h_mu), &coords(&g_mu), metric),
    );

    // o = { v in g_mu^perp ∩ h^perp : <mu, [v, eta]> = 0 for all eta in h }
    let h_perp = linalg::metric_complement_in(&coords(h_basis), &full, metric);
    let w_space = linalg::intersection(&g_mu_perp, &h_perp, n_dim);
    let o = if w_space.is_empty() {
        Vec::new()
    } else if h_basis.is_empty() {
        relabel(
            descriptor,
            linalg::metric_orthonormalize(&w_space, metric, linalg::RANK_RTOL),
        )
    } else {
        let mut cond = DMatrix::zeros(h_basis.len(), w_space.len());
        for (i, w) in w_space.iter().enumerate() {
            let wv = AlgebraVector::new(descriptor.clone(), w.clone());
            for (j, eta) in h_basis.iter().enumerate() {
                cond[(j, i)] = pairing(mu, &bracket(&wv, eta)?);
            }
        }
        let (ker, _) = linalg::kernel_with_gap(&cond, linalg::RANK_RTOL);
        let vecs: Vec<DVector<f64>> = ker
            .iter()
            .map(|k| {
                let mut v = DVector::zeros(n_dim);
                for (i, w) in w_space.iter().enumerate() {
                    v += w * k[i];
                }
                v
            })
            .collect();
        relabel(
            descriptor,
            linalg::metric_orthonormalize(&vecs, metric, linalg::RANK_RTOL),
        )
    };

    // n = image of l under the polar complex structure of Omega restricted to
    // the Omega-orthogonal complement of o inside g_mu^perp
    let n_space = if l.is_empty() {
        Vec::new()
    } else {
        let o_omega: Vec<DVector<f64>> = if o.is_empty() {
            g_mu_perp.clone()
        } else {
            let basis = &g_mu_perp;
            let mut cond = DMatrix::zeros(o.len(), basis.len());
            for (i, w) in basis.iter().enumerate() {
                for (j, ov) in o.iter().enumerate() {
                    cond[(j, i)] = omega.eval(&ov.coords, w);
                }
            }
            let (ker, _) = linalg::kernel_with_gap(&cond, linalg::RANK_RTOL);
            ker.iter()
                .map(|k| {
                    let mut v = DVector::zeros(n_dim);
                    for (i, w) in basis.iter().enumerate() {
                        v += w * k[i];
                    }
                    v
                })
                .collect()
        };
        let v_basis = linalg::metric_orthonormalize(&o_omega, metric, linalg::RANK_RTOL);
        let dim_v = v_basis.len();
        let mut a = DMatrix::zeros(dim_v, dim_v);
        for i in 0..dim_v {
            for j in 0..dim_v {
                a[(i, j)] = omega.eval(&v_basis[i], &v_basis[j]);
            }
        }
        // polar factor J = A (A^T A)^{-1/2}: orthogonal, antisymmetric, and
        // commutes with the H_mu action because A and the frame do
        let ata = a.transpose() * &a;
        let eig = ata.symmetric_eigen();
        let mut inv_sqrt = DMatrix::zeros(dim_v, dim_v);
        for (k, val) in eig.eigenvalues.iter().enumerate() {
            let col = eig.eigenvectors.column(k);
            inv_sqrt += col * col.transpose() / val.max(1e-300).sqrt();
        }
        let j_mat = &a * inv_sqrt;
        let mut out = Vec::new();
        for lv in &l {
            let coords_v = DVector::from_fn(dim_v, |i, _| {
                (v_basis[i].transpose() * metric * &lv.coords)[(0, 0)]
            });
            let jl = &j_mat * coords_v;
            let mut vec = DVector::zeros(n_dim);
            for (i, vb) in v_basis.iter().enumerate() {
                vec += vb * jl[i];
            }
            out.push(vec);
        }
        linalg::metric_orthonormalize(&out, metric, linalg::RANK_RTOL)
    };
    let n = relabel(descriptor, n_space);

    let splitting = AdaptedSplitting {
        descriptor: descriptor.clone(),
        mu: mu.clone(),
        metric: metric.clone(),
        g_mu,
        o,
        l,
        n,
        h: h_basis.to_vec(),
        h_mu,
        p,
        omega,
    };
    splitting.certify()?;
    Ok(splitting)
}

fn coords(vs: &[AlgebraVector]) -> Vec<DVector<f64>> {
    vs.iter().map(|v| v.coords.clone()).collect()
}

fn relabel(descriptor: &Arc<GroupDescriptor>, vs: Vec<DVector<f64>>) -> Vec<AlgebraVector> {
    vs.into_iter()
        .map(|v| AlgebraVector::new(descriptor.clone(), v))
        .collect()
}

/// Distance from `v` to the span of `basis` in the given metric.
fn subspace_residual(v: &DVector<f64>, basis: &[AlgebraVector], metric: &DMatrix<f64>) -> f64 {
    let on = linalg::metric_orthonormalize(&coords(basis), metric, linalg::RANK_RTOL);
    let mut w = v.clone();
    for b in &on {
        let c = (b.transpose() * metric * &w)[(0, 0)];
        w -= b * c;
    }
    (w.transpose() * metric * &w)[(0, 0)].max(0.0).sqrt()
}

impl AdaptedSplitting {
    /// Re-verify every splitting invariant.
    pub fn certify(&self) -> Result<(), SplittingError> {
        let n_dim = self.descriptor.dim;
        let scale = self.mu.norm().max(1.0);

        let mut all = coords(&self.g_mu);
        all.extend(coords(&self.o));
        all.extend(coords(&self.l));
        all.extend(coords(&self.n));
        if all.len() != n_dim
            || linalg::rank(&linalg::columns(n_dim, &all), linalg::RANK_RTOL) != n_dim
        {
            return Err(SplittingError::CertificationFailed {
                invariant: format!(
                    "direct sum g_mu({}) + o({}) + l({}) + n({}) must span dimension {}",
                    self.g_mu.len(),
                    self.o.len(),
                    self.l.len(),
                    self.n.len(),
                    n_dim
                ),
                residual: f64::NAN,
            });
        }

        for v in &self.g_mu {
            let residual = (&self.omega.matrix * &v.coords).norm() / scale;
            if residual > CERT_TOL {
                return Err(SplittingError::CertificationFailed {
                    invariant: "g_mu spans the kernel of Omega^mu".into(),
                    residual,
                });
            }
        }

        let mut h_built = coords(&self.h_mu);
        h_built.extend(coords(&self.l));
        let h_rank = linalg::rank(&linalg::columns(n_dim, &coords(&self.h)), linalg::RANK_RTOL);
        if h_built.len() != h_rank {
            return Err(SplittingError::CertificationFailed {
                invariant: "h = h_mu + l (dimension mismatch)".into(),
                residual: f64::NAN,
            });
        }
        if !h_built.is_empty() {
            let angle = linalg::subspace_angle(&h_built, &coords(&self.h), n_dim);
            if angle > CERT_TOL {
                return Err(SplittingError::CertificationFailed {
                    invariant: "h = h_mu + l".into(),
                    residual: angle,
                });
            }
        }

        for (name, space) in [
            ("o", coords(&self.o)),
            ("l + n", {
                let mut v = coords(&self.l);
                v.extend(coords(&self.n));
                v
            }),
        ] {
            if space.is_empty() {
                continue;
            }
            let k = space.len();
            let mut m = DMatrix::zeros(k, k);
            for i in 0..k {
                for j in 0..k {
                    m[(i, j)] = self.omega.eval(&space[i], &space[j]);
                }
            }
            let sv = m.singular_values();
            let ratio = sv.min() / sv.max().max(1e-300);
            if ratio.is_nan() || ratio <= 1e-8 {
                return Err(SplittingError::CertificationFailed {
                    invariant: format!("Omega^mu nondegenerate on {name}"),
                    residual: ratio,
                });
            }
        }

        for (name, space) in [("l", &self.l), ("n", &self.n)] {
            for a in space.iter() {
                for b in space.iter() {
                    let r = self.omega.eval(&a.coords, &b.coords).abs() / scale;
                    if r > CERT_TOL {
                        return Err(SplittingError::CertificationFailed {
                            invariant: format!("{name} is Omega^mu-isotropic"),
                            residual: r,
                        });
                    }
                }
            }
        }

        for a in &self.o {
            for b in self.l.iter().chain(self.n.iter()) {
                let r = self.omega.eval(&a.coords, &b.coords).abs() / scale;
                if r > CERT_TOL {
                    return Err(SplittingError::CertificationFailed {
                        invariant: "Omega^mu(o, l + n) = 0".into(),
                        residual: r,
                    });
                }
            }
        }

        // H_mu-invariance of each subspace (sampled)
        let h_mu_samples = sample_subgroup(&self.descriptor, &self.h_mu, 8)
            .unwrap_or_else(|_| vec![lie::GroupElement::identity(self.descriptor.clone())]);
        for g in &h_mu_samples {
            let a = lie::ad_matrix(g);
            for (name, space) in [
                ("g_mu", &self.g_mu),
                ("o", &self.o),
                ("l", &self.l),
                ("n", &self.n),
                ("p", &self.p),
            ] {
                for v in space.iter() {
                    let moved = &a * &v.coords;
                    let r = subspace_residual(&moved, space, &self.metric);
                    if r > 1e-7 {
                        return Err(SplittingError::CertificationFailed {
                            invariant: format!("Ad(H_mu)-invariance of {name}"),
                            residual: r,
                        });
                    }
                }
            }
        }

        Ok(())
    }

    /// Matrix of the pairing `sigma(z) = coad(z, mu)|_l` from `n`-coordinates
    /// to `l`-coordinates, with its conditioning certified.
    pub fn sigma_matrix(&self) -> Result<DMatrix<f64>, SplittingError> {
        let rows = self.l.len();
        let cols = self.n.len();
        let mut s = DMatrix::zeros(rows, cols);
        for (j, z) in self.n.iter().enumerate() {
            let c = coad(z, &self.mu)?;
            for (i, lv) in self.l.iter().enumerate() {
                s[(i, j)] = pairing(&c, lv);
            }
        }
        if rows > 0 && cols > 0 {
            let sv = s.singular_values();
            let ratio = sv.min() / sv.max().max(1e-300);
            if ratio.is_nan() || ratio <= 1e-8 {
                return Err(SplittingError::SingularSigma { ratio });
            }
        }
        Ok(s)
    }

    /// Embed covector coordinates on a subspace basis into the full dual,
    /// annihilating the metric complement.
    pub fn embed_covector(
        &self,
        basis: &[AlgebraVector],
        coords: &DVector<f64>,
    ) -> CoalgebraVector {
        embed_covector(&self.metric, basis, coords)
    }

    /// Restrict a full covector to coordinates on a subspace basis.
    pub fn restrict_covector(&self, nu: &CoalgebraVector, basis: &[AlgebraVector]) -> DVector<f64> {
        restrict_covector(nu, basis)
    }
}

/// Covector with coordinates `c` on a (metric-orthonormal) `basis`, extended
/// by zero on the metric complement.
pub fn embed_covector(
    metric: &DMatrix<f64>,
    basis: &[AlgebraVector],
    coords: &DVector<f64>,
) -> CoalgebraVector {
    let desc = basis
        .first()
        .map(|b| b.descriptor.clone())
        .expect("embed_covector needs a nonempty basis");
    let mut out = DVector::zeros(desc.dim);
    for (i, b) in basis.iter().enumerate() {
        out += metric * &b.coords * coords[i];
    }
    CoalgebraVector::new(desc, out)
}

/// Coordinates `<nu, basis_i>` of a covector on a subspace basis.
pub fn restrict_covector(nu: &CoalgebraVector, basis: &[AlgebraVector]) -> DVector<f64> {
    DVector::from_fn(basis.len(), |i, _| nu.coords.dot(&basis[i].coords))
}

/// Slice momentum `J_N(lambda, a, beta)` on a subalgebra basis:
/// `J_N = 1/2 lambda ⋄ coad(lambda, mu) + a ⋄ beta`, the first diamond taken
/// in the adjoint representation.
pub fn slice_momentum(
    mu: &CoalgebraVector,
    lambda: &AlgebraVector,
    rep: &Representation,
    a: &DVector<f64>,
    beta: &DVector<f64>,
    subspace: &[AlgebraVector],
) -> Result<DVector<f64>, SplittingError> {
    let ad_mu = coad(lambda, mu)?;
    let mut out = DVector::zeros(subspace.len());
    for (k, z) in subspace.iter().enumerate() {
        // <lambda ⋄ w, z> = <w, [z, lambda]>
        out[k] = 0.5 * pairing(&ad_mu, &bracket(z, lambda)?);
    }
    out += diamond(rep, a, beta, subspace)?;
    Ok(out)
}

/// Slice data at a cotangent-bundle point: the subspace `B` of the linear
/// slice annihilated by `h_mu · alpha`, a `G_z`-invariant complement `C`, the
/// induced `B*`, and the isotropy split `h_mu = g_z + s`.
#[derive(Debug, Clone)]
pub struct SymplecticSliceData {
    /// Basis of the linear slice `S` inside the ambient representation space.
    pub s_basis: Vec<DVector<f64>>,
    /// `alpha` as an ambient covector supported on `S`.
    pub alpha: DVector<f64>,
    pub b_basis: Vec<DVector<f64>>,
    pub c_basis: Vec<DVector<f64>>,
    /// Basis of `B*` inside `S*` (annihilator of `C` under the dot pairing).
    pub b_star_basis: Vec<DVector<f64>>,
    /// Isotropy algebra of the center point: `g_z = { xi in h_mu : xi·alpha = 0 }`.
    pub g_z: Vec<AlgebraVector>,
    /// Metric complement of `g_z` in `h_mu`.
    pub s_complement: Vec<AlgebraVector>,
}

/// Build the slice data for a representation, slice subspace, and covector.
pub fn slice_data(
    rep: &Representation,
    splitting: &AdaptedSplitting,
    s_basis: &[DVector<f64>],
    alpha: &DVector<f64>,
) -> Result<SymplecticSliceData, SplittingError> {
    let dim_v = rep.space_dim;
    let span_from = |ker: &[DVector<f64>], basis: &[DVector<f64>]| -> Vec<DVector<f64>> {
        ker.iter()
            .map(|k| {
                let mut v = DVector::zeros(dim_v);
                for (i, s) in basis.iter().enumerate() {
                    v += s * k[i];
                }
                v
            })
            .collect()
    };
    let id_v = DMatrix::identity(dim_v, dim_v);

    // g_z: kernel of xi -> xi·alpha over h_mu, via <xi·alpha, s> = -<alpha, xi·s>
    let g_z = if splitting.h_mu.is_empty() {
        Vec::new()
    } else {
        let mut m = DMatrix::zeros(s_basis.len(), splitting.h_mu.len());
        for (j, xi) in splitting.h_mu.iter().enumerate() {
            for (i, s) in s_basis.iter().enumerate() {
                m[(i, j)] = alpha.dot(&rep.act(xi, s));
            }
        }
        let (ker, _) = linalg::kernel_with_gap(&m, linalg::RANK_RTOL);
        let vecs: Vec<DVector<f64>> = ker
            .iter()
            .map(|k| {
                let mut v = DVector::zeros(splitting.descriptor.dim);
                for (j, xi) in splitting.h_mu.iter().enumerate() {
                    v += &xi.coords * k[j];
                }
                v
            })
            .collect();
        relabel(
            &splitting.descriptor,
            linalg::metric_orthonormalize(&vecs, &splitting.metric, linalg::RANK_RTOL),
        )
    };
    let s_complement = relabel(
        &splitting.descriptor,
        linalg::metric_complement_in(&coords(&g_z), &coords(&splitting.h_mu), &splitting.metric),
    );

    // B = annihilator of h_mu · alpha inside S
    let b_basis = if splitting.h_mu.is_empty() {
        s_basis.to_vec()
    } else {
        let mut m = DMatrix::zeros(splitting.h_mu.len(), s_basis.len());
        for (i, s) in s_basis.iter().enumerate() {
            for (j, xi) in splitting.h_mu.iter().enumerate() {
                m[(j, i)] = -alpha.dot(&rep.act(xi, s));
            }
        }
        let (ker, _) = linalg::kernel_with_gap(&m, linalg::RANK_RTOL);
        linalg::metric_orthonormalize(&span_from(&ker, s_basis), &id_v, linalg::RANK_RTOL)
    };

    // C: metric-orthogonal complement of B in S. The slice metrics in use are
    // H_mu-invariant already (ambient dot for the built-in models), so C is
    // G_z-invariant; certified below.
    let c_basis = linalg::metric_complement_in(&b_basis, s_basis, &id_v);

    // B* = annihilator of C inside span(S)
    let b_star_basis = if c_basis.is_empty() {
        b_basis.clone()
    } else {
        let mut m = DMatrix::zeros(c_basis.len(), s_basis.len());
        for (i, s) in s_basis.iter().enumerate() {
            for (j, c) in c_basis.iter().enumerate() {
                m[(j, i)] = c.dot(s);
            }
        }
        let (ker, _) = linalg::kernel_with_gap(&m, linalg::RANK_RTOL);
        linalg::metric_orthonormalize(&span_from(&ker, s_basis), &id_v, linalg::RANK_RTOL)
    };

    let data = SymplecticSliceData {
        s_basis: s_basis.to_vec(),
        alpha: alpha.clone(),
        b_basis,
        c_basis,
        b_star_basis,
        g_z,
        s_complement,
    };

    // certify: B direct-sum C spans S, and C is invariant under sampled G_z
    let mut bc = data.b_basis.clone();
    bc.extend(data.c_basis.iter().cloned());
    if linalg::rank(&linalg::columns(dim_v, &bc), linalg::RANK_RTOL)
        != linalg::rank(&linalg::columns(dim_v, s_basis), linalg::RANK_RTOL)
    {
        return Err(SplittingError::CertificationFailed {
            invariant: "S = B + C".into(),
            residual: f64::NAN,
        });
    }
    for gen in &data.g_z {
        for theta in [0.37, 1.9, -2.4] {
            let xi = AlgebraVector::new(splitting.descriptor.clone(), &gen.coords * theta);
            let gm = rep.group_act_matrix(&xi);
            for c in &data.c_basis {
                let moved = &gm * c;
                let mut w = moved.clone();
                for b in &data.c_basis {
                    w -= b * b.dot(&moved);
                }
                if w.norm() > 1e-7 * moved.norm().max(1.0) {
                    return Err(SplittingError::CertificationFailed {
                        invariant: "C is G_z-invariant (sampled)".into(),
                        residual: w.norm(),
                    });
                }
            }
        }
    }

    Ok(data)
}

/// Serializable form of a splitting (bases as coordinate arrays).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplittingJson {
    pub group: String,
    pub mu: Vec<f64>,
    pub metric: Vec<Vec<f64>>,
    pub g_mu: Vec<Vec<f64>>,
    pub o: Vec<Vec<f64>>,
    pub l: Vec<Vec<f64>>,
    pub n: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub h_mu: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

impl SplittingJson {
    pub fn from_splitting(s: &AdaptedSplitting) -> Self {
        let dump = |vs: &[AlgebraVector]| -> Vec<Vec<f64>> {
            vs.iter()
                .map(|v| v.coords.iter().cloned().collect())
                .collect()
        };
        SplittingJson {
            group: s.descriptor.name.clone(),
            mu: s.mu.coords.iter().cloned().collect(),
            metric: s
                .metric
                .row_iter()
                .map(|r| r.iter().cloned().collect())
                .collect(),
            g_mu: dump(&s.g_mu),
            o: dump(&s.o),
            l: dump(&s.l),
            n: dump(&s.n),
            h: dump(&s.h),
            h_mu: dump(&s.h_mu),
            p: dump(&s.p),
        }
    }

    /// Rebuild and re-certify against a descriptor.
    pub fn into_splitting(
        &self,
        descriptor: &Arc<GroupDescriptor>,
    ) -> Result<AdaptedSplitting, SplittingError> {
        let n = descriptor.dim;
        let lift = |rows: &Vec<Vec<f64>>| -> Vec<AlgebraVector> {
            rows.iter()
                .map(|r| AlgebraVector::new(descriptor.clone(), DVector::from_column_slice(r)))
                .collect()
        };
        let metric = DMatrix::from_fn(n, n, |i, j| self.metric[i][j]);
        let mu = CoalgebraVector::new(descriptor.clone(), DVector::from_column_slice(&self.mu));
        let splitting = AdaptedSplitting {
            descriptor: descriptor.clone(),
            omega: omega_form(&mu),
            mu,
            metric,
            g_mu: lift(&self.g_mu),
            o: lift(&self.o),
            l: lift(&self.l),
            n: lift(&self.n),
            h: lift(&self.h),
            h_mu: lift(&self.h_mu),
            p: lift(&self.p),
        };
        splitting.certify()?;
        Ok(splitting)
    }
}
