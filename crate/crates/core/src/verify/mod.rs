//! Finite-difference verification engine.
//!
//! Tube contracts (symplectomorphism, equivariance, momentum normal form,
//! linearization) are turned into numeric residuals at sampled points and
//! collected into machine-readable reports. Differentials are approximated by
//! central differences in chart coordinates; group directions move along
//! `g exp(t xi)` and tangents in `T*G` are read back through the left
//! trivialization.

pub mod suites;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;
use std::sync::Arc;

use crate::gtube::{
    act_left, act_twist, momentum_left, CotangentGroupPoint, RestrictedTube, SimpleTube, TubeError,
};
use crate::lie::{
    bracket, coad, exp, pairing, AlgebraVector, CoalgebraVector, GroupDescriptor, GroupElement,
};

/// Central-difference configuration.
#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    pub step: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { step: 1e-5 }
    }
}

/// One check at one sampled point.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub point: usize,
    pub check: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Point skipped (for example an FD stencil leaving the tube domain).
    pub skipped: bool,
}

/// Residual records plus a per-check summary.
#[derive(Debug, Clone, Default, Serialize)]
pub struct VerificationReport {
    pub records: Vec<CheckRecord>,
    pub summary: Vec<CheckSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub check: String,
    pub max_residual: f64,
    pub threshold: f64,
    pub passed: usize,
    pub skipped: usize,
    pub total: usize,
}

impl VerificationReport {
    pub fn push(&mut self, point: usize, check: &str, residual: f64, threshold: f64) {
        self.records.push(CheckRecord {
            point,
            check: check.to_string(),
            residual,
            threshold,
            pass: residual < threshold,
            skipped: false,
        });
    }

    pub fn push_skipped(&mut self, point: usize, check: &str, threshold: f64) {
        self.records.push(CheckRecord {
            point,
            check: check.to_string(),
            residual: f64::NAN,
            threshold,
            pass: true,
            skipped: true,
        });
    }

    /// Record a check whose pass condition is "residual must EXCEED the
    /// threshold" (negative controls).
    pub fn push_negative_control(&mut self, point: usize, check: &str, residual: f64, floor: f64) {
        self.records.push(CheckRecord {
            point,
            check: check.to_string(),
            residual,
            threshold: floor,
            pass: residual > floor,
            skipped: false,
        });
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.records.extend(other.records);
        self.rebuild_summary();
    }

    pub fn rebuild_summary(&mut self) {
        let mut names: Vec<String> = Vec::new();
        for r in &self.records {
            if !names.contains(&r.check) {
                names.push(r.check.clone());
            }
        }
        self.summary = names
            .into_iter()
            .map(|name| {
                let rows: Vec<&CheckRecord> =
                    self.records.iter().filter(|r| r.check == name).collect();
                CheckSummary {
                    check: name,
                    max_residual: rows
                        .iter()
                        .filter(|r| !r.skipped)
                        .map(|r| r.residual)
                        .fold(0.0, f64::max),
                    threshold: rows.first().map(|r| r.threshold).unwrap_or(f64::NAN),
                    passed: rows.iter().filter(|r| r.pass).count(),
                    skipped: rows.iter().filter(|r| r.skipped).count(),
                    total: rows.len(),
                }
            })
            .collect();
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn max_residual(&self, check: &str) -> f64 {
        self.records
            .iter()
            .filter(|r| r.check == check && !r.skipped)
            .map(|r| r.residual)
            .fold(0.0, f64::max)
    }
}

/// Max residual of `omega_target(J u_i, J u_j) - omega_model(u_i, u_j)` over
/// chart direction pairs, with `J` the central-difference Jacobian of the
/// map along `eval(dir, t)`.
///
/// Returns `Err(())`-like `None` when the FD stencil leaves the map's domain.
pub fn fd_pullback_residual(
    dim_domain: usize,
    cfg: &FdConfig,
    eval: &dyn Fn(usize, f64) -> Result<DVector<f64>, TubeError>,
    model_form: &dyn Fn(usize, usize) -> f64,
    target_form: &dyn Fn(&DVector<f64>, &DVector<f64>) -> f64,
) -> Result<f64, TubeError> {
    let h = cfg.step;
    let mut cols = Vec::with_capacity(dim_domain);
    for i in 0..dim_domain {
        let plus = eval(i, h)?;
        let minus = eval(i, -h)?;
        cols.push((plus - minus) / (2.0 * h));
    }
    let mut worst = 0.0_f64;
    for i in 0..dim_domain {
        for j in (i + 1)..dim_domain {
            let lhs = target_form(&cols[i], &cols[j]);
            let rhs = model_form(i, j);
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Flatten a `T*G` point to `[matrix entries..., covector coords...]`.
pub fn flatten_group_point(pt: &CotangentGroupPoint) -> DVector<f64> {
    let m = &pt.g.matrix;
    let n = pt.nu.coords.len();
    let mut out = DVector::zeros(m.len() + n);
    for (i, v) in m.iter().enumerate() {
        out[i] = *v;
    }
    for i in 0..n {
        out[m.len() + i] = pt.nu.coords[i];
    }
    out
}

/// The canonical two-form of `T*G` at a flattened center point, evaluated on
/// flattened tangent columns:
/// `<b2, x1> - <b1, x2> + <nu, [x1, x2]>` after left-trivializing the group
/// components.
pub fn tstar_group_form<'a>(
    descriptor: &'a Arc<GroupDescriptor>,
    center: &'a CotangentGroupPoint,
) -> impl Fn(&DVector<f64>, &DVector<f64>) -> f64 + 'a {
    let m = descriptor.matrix_size;
    let n = descriptor.dim;
    let g_inv = center.g.inverse().matrix;
    move |u: &DVector<f64>, v: &DVector<f64>| {
        let unpack = |w: &DVector<f64>| {
            let gdot = DMatrix::from_iterator(m, m, w.iter().take(m * m).cloned());
            let xi = descriptor.coords_of_matrix(&(&g_inv * gdot));
            let beta = DVector::from_iterator(n, w.iter().skip(m * m).take(n).cloned());
            (xi, beta)
        };
        let (x1, b1) = unpack(u);
        let (x2, b2) = unpack(v);
        let xi1 = AlgebraVector::new(descriptor.clone(), x1);
        let xi2 = AlgebraVector::new(descriptor.clone(), x2);
        let br = bracket(&xi1, &xi2).expect("same descriptor");
        b2.dot(&xi1.coords) - b1.dot(&xi2.coords) + center.nu.coords.dot(&br.coords)
    }
}

/// Randomly sampled algebra vector with coordinates in `[-scale, scale]`.
pub fn random_algebra(
    rng: &mut impl Rng,
    descriptor: &Arc<GroupDescriptor>,
    scale: f64,
) -> AlgebraVector {
    let v = DVector::from_fn(descriptor.dim, |_, _| rng.gen_range(-scale..scale));
    AlgebraVector::new(descriptor.clone(), v)
}

/// Sample a tube-domain point `(g, nu, lambda)` within the configured radii.
pub fn sample_simple_domain(
    rng: &mut impl Rng,
    tube: &SimpleTube,
    shrink: f64,
) -> (GroupElement, CoalgebraVector, AlgebraVector) {
    let g = exp(&random_algebra(rng, &tube.descriptor, 0.8));
    let nu_radius = if tube.radii.nu.is_finite() {
        tube.radii.nu
    } else {
        0.4 * tube.mu.norm().max(1.0)
    };
    let lam_radius = if tube.radii.lambda.is_finite() {
        tube.radii.lambda
    } else {
        0.4
    };
    let dim_m = tube.iota.ncols();
    let nu_coords = DVector::from_fn(dim_m, |_, _| {
        rng.gen_range(-1.0..1.0) * nu_radius * shrink / (dim_m.max(1) as f64).sqrt()
    });
    let nu = tube.embed_isotropy_covector(&nu_coords);
    let mut lam = DVector::zeros(tube.descriptor.dim);
    for q in &tube.q_basis {
        lam += &q.coords
            * (rng.gen_range(-1.0..1.0) * lam_radius * shrink
                / (tube.q_basis.len().max(1) as f64).sqrt());
    }
    (g, nu, AlgebraVector::new(tube.descriptor.clone(), lam))
}

/// FD pullback residual of a simple tube at one domain point, with the
/// scaling factor multiplied by `m1_scale` (1 = the tube itself).
pub fn simple_tube_pullback_residual(
    tube: &SimpleTube,
    g: &GroupElement,
    nu: &CoalgebraVector,
    lambda: &AlgebraVector,
    cfg: &FdConfig,
    m1_scale: f64,
) -> Result<f64, TubeError> {
    let desc = &tube.descriptor;
    let n = desc.dim;
    let dim_m = tube.iota.ncols();
    let dim_q = tube.q_basis.len();
    let dim = n + dim_m + dim_q;
    let center = tube.eval_scaled(g, nu, lambda, m1_scale)?;

    let eval = |i: usize, t: f64| -> Result<DVector<f64>, TubeError> {
        let (gp, nup, lamp) = perturb_simple_chart(tube, g, nu, lambda, i, t);
        Ok(flatten_group_point(
            &tube.eval_scaled(&gp, &nup, &lamp, m1_scale)?,
        ))
    };

    // model two-form on chart directions
    let nu_full_plus_mu = CoalgebraVector::new(desc.clone(), &nu.coords + &tube.mu.coords);
    let model = |i: usize, j: usize| -> f64 {
        let (xi1, nud1, lamd1) = chart_direction(tube, i);
        let (xi2, nud2, lamd2) = chart_direction(tube, j);
        let mut val = 0.0;
        if let (Some(x1), Some(x2)) = (&xi1, &xi2) {
            let br = bracket(x1, x2).expect("same descriptor");
            val += pairing(&nu_full_plus_mu, &br);
        }
        if let (Some(x1), Some(nd2)) = (&xi1, &nud2) {
            val += nd2.coords.dot(&x1.coords);
        }
        if let (Some(nd1), Some(x2)) = (&nud1, &xi2) {
            val -= nd1.coords.dot(&x2.coords);
        }
        if let (Some(l1), Some(l2)) = (&lamd1, &lamd2) {
            let br = bracket(l1, l2).expect("same descriptor");
            val -= pairing(&tube.mu, &br);
        }
        val
    };

    let form = tstar_group_form(desc, &center);
    fd_pullback_residual(dim, cfg, &eval, &model, &form)
}

fn perturb_simple_chart(
    tube: &SimpleTube,
    g: &GroupElement,
    nu: &CoalgebraVector,
    lambda: &AlgebraVector,
    dir: usize,
    t: f64,
) -> (GroupElement, CoalgebraVector, AlgebraVector) {
    let desc = &tube.descriptor;
    let n = desc.dim;
    let dim_m = tube.iota.ncols();
    if dir < n {
        let mut step = DVector::zeros(n);
        step[dir] = t;
        let gp = g
            .compose(&exp(&AlgebraVector::new(desc.clone(), step)))
            .expect("same descriptor");
        (gp, nu.clone(), lambda.clone())
    } else if dir < n + dim_m {
        let j = dir - n;
        let col: DVector<f64> = tube.iota.column(j).into();
        (
            g.clone(),
            CoalgebraVector::new(desc.clone(), &nu.coords + col * t),
            lambda.clone(),
        )
    } else {
        let j = dir - n - dim_m;
        (
            g.clone(),
            nu.clone(),
            AlgebraVector::new(desc.clone(), &lambda.coords + &tube.q_basis[j].coords * t),
        )
    }
}

/// The (xi, nu-dot, lambda-dot) components of a simple-tube chart direction.
fn chart_direction(
    tube: &SimpleTube,
    dir: usize,
) -> (
    Option<AlgebraVector>,
    Option<CoalgebraVector>,
    Option<AlgebraVector>,
) {
    let desc = &tube.descriptor;
    let n = desc.dim;
    let dim_m = tube.iota.ncols();
    if dir < n {
        let mut v = DVector::zeros(n);
        v[dir] = 1.0;
        (Some(AlgebraVector::new(desc.clone(), v)), None, None)
    } else if dir < n + dim_m {
        let col: DVector<f64> = tube.iota.column(dir - n).into();
        (None, Some(CoalgebraVector::new(desc.clone(), col)), None)
    } else {
        (None, None, Some(tube.q_basis[dir - n - dim_m].clone()))
    }
}

/// Max linearization residual of a simple tube at the center:
/// the FD directional derivative of `Theta` at `(e,0,0)` against
/// `(xi + lambda-dot, nu-dot + coad(lambda-dot, mu))`.
pub fn linearization_residual(tube: &SimpleTube, cfg: &FdConfig) -> Result<f64, TubeError> {
    let desc = &tube.descriptor;
    let n = desc.dim;
    let dim_m = tube.iota.ncols();
    let dim_q = tube.q_basis.len();
    let e = GroupElement::identity(desc.clone());
    let zero_nu = CoalgebraVector::zero(desc.clone());
    let zero_lam = AlgebraVector::zero(desc.clone());
    let h = cfg.step;
    let mut worst = 0.0_f64;
    for dir in 0..(n + dim_m + dim_q) {
        let eval = |t: f64| -> Result<DVector<f64>, TubeError> {
            let (gp, nup, lamp) = perturb_simple_chart(tube, &e, &zero_nu, &zero_lam, dir, t);
            Ok(flatten_group_point(&tube.eval(&gp, &nup, &lamp)?))
        };
        let fd = (eval(h)? - eval(-h)?) / (2.0 * h);
        // expected tangent at (e, mu), left-trivialized
        let (xi, nud, lamd) = chart_direction(tube, dir);
        let mut exp_xi = DVector::zeros(n);
        let mut exp_beta = DVector::zeros(n);
        if let Some(x) = &xi {
            exp_xi += &x.coords;
        }
        if let Some(nd) = &nud {
            exp_beta += &nd.coords;
        }
        if let Some(ld) = &lamd {
            exp_xi += &ld.coords;
            exp_beta += &coad(ld, &tube.mu)?.coords;
        }
        // group block of the FD column is dG/dt at e: trivialize directly
        let m = desc.matrix_size;
        let gdot = DMatrix::from_iterator(m, m, fd.iter().take(m * m).cloned());
        let got_xi = desc.coords_of_matrix(&gdot);
        let got_beta = DVector::from_iterator(n, fd.iter().skip(m * m).take(n).cloned());
        worst = worst.max((got_xi - exp_xi).norm());
        worst = worst.max((got_beta - exp_beta).norm());
    }
    Ok(worst)
}

/// Max equivariance residual of a simple tube under sampled left
/// translations.
pub fn left_equivariance_residual(
    tube: &SimpleTube,
    g: &GroupElement,
    nu: &CoalgebraVector,
    lambda: &AlgebraVector,
    rng: &mut impl Rng,
    samples: usize,
) -> Result<f64, TubeError> {
    let desc = &tube.descriptor;
    let out = tube.eval(g, nu, lambda)?;
    let mut left = 0.0_f64;
    for _ in 0..samples {
        let gp = exp(&random_algebra(rng, desc, 0.7));
        let lhs = tube.eval(&gp.compose(g)?, nu, lambda)?;
        let rhs = act_left(&gp, &out)?;
        left = left.max(point_distance(&lhs, &rhs));
    }
    Ok(left)
}

/// Max twist-equivariance residual of a simple tube under sampled elements
/// of the isotropy subgroup of `mu`. Only meaningful when that subgroup
/// normalizes `q` (compact isotropy orbits).
pub fn twist_equivariance_residual(
    tube: &SimpleTube,
    g: &GroupElement,
    nu: &CoalgebraVector,
    lambda: &AlgebraVector,
    rng: &mut impl Rng,
    samples: usize,
) -> Result<f64, TubeError> {
    let desc = &tube.descriptor;
    let out = tube.eval(g, nu, lambda)?;
    let mut twist = 0.0_f64;
    for _ in 0..samples {
        let mut v = DVector::zeros(desc.dim);
        for b in &tube.g_mu_basis {
            v += &b.coords * rng.gen_range(-1.0..1.0);
        }
        let h = exp(&AlgebraVector::new(desc.clone(), v));
        let hinv = h.inverse();
        let lhs = tube.eval(
            &g.compose(&hinv)?,
            &crate::lie::adstar(&hinv, nu)?,
            &crate::lie::ad(&h, lambda)?,
        )?;
        let rhs = act_twist(&h, &out)?;
        twist = twist.max(point_distance(&lhs, &rhs));
    }
    Ok(twist)
}

/// Frobenius-plus-coordinate distance between `T*G` points.
pub fn point_distance(a: &CotangentGroupPoint, b: &CotangentGroupPoint) -> f64 {
    (&a.g.matrix - &b.g.matrix).norm() + (&a.nu.coords - &b.nu.coords).norm()
}

/// Residual of the isotropy-momentum identity of a simple tube on a
/// subalgebra basis `h_mu`:
/// `(Adstar(E)(nu+mu))|_h_mu = (nu+mu)|_h_mu - 1/2 (lambda ⋄ coad(lambda,mu))|_h_mu`.
pub fn hmu_momentum_residual(
    tube: &SimpleTube,
    h_mu_basis: &[AlgebraVector],
    g: &GroupElement,
    nu: &CoalgebraVector,
    lambda: &AlgebraVector,
) -> Result<f64, TubeError> {
    let out = tube.eval(g, nu, lambda)?;
    let ad_mu = coad(lambda, &tube.mu)?;
    let mut worst = 0.0_f64;
    for eta in h_mu_basis {
        let lhs = out.nu.coords.dot(&eta.coords);
        let diamond = pairing(&ad_mu, &bracket(eta, lambda)?);
        let rhs = (nu.coords.dot(&eta.coords) + tube.mu.coords.dot(&eta.coords)) - 0.5 * diamond;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Momentum conservation of a simple tube: `J_L(Theta(g,nu,lambda)) =
/// Adstar(g^{-1})(nu + mu)`.
pub fn left_momentum_residual(
    tube: &SimpleTube,
    g: &GroupElement,
    nu: &CoalgebraVector,
    lambda: &AlgebraVector,
) -> Result<f64, TubeError> {
    let out = tube.eval(g, nu, lambda)?;
    let jl = momentum_left(&out)?;
    let expected = crate::lie::adstar(
        &g.inverse(),
        &CoalgebraVector::new(tube.descriptor.clone(), &nu.coords + &tube.mu.coords),
    )?;
    Ok((jl.coords - expected.coords).norm())
}

/// FD pullback residual of a restricted tube at one domain point against the
/// restricted model form (no contribution from the eps directions).
pub fn restricted_tube_pullback_residual(
    tube: &RestrictedTube,
    g: &GroupElement,
    nu: &CoalgebraVector,
    lambda: &AlgebraVector,
    eps: &DVector<f64>,
    cfg: &FdConfig,
) -> Result<f64, TubeError> {
    let desc = &tube.simple.descriptor;
    let n = desc.dim;
    let dim_m = tube.simple.iota.ncols();
    let dim_o = tube.splitting.o.len();
    let dim_l = tube.splitting.l.len();
    let dim = n + dim_m + dim_o + dim_l;
    let center = tube.eval(g, nu, lambda, eps)?;

    let eval = |i: usize, t: f64| -> Result<DVector<f64>, TubeError> {
        let mut gp = g.clone();
        let mut nup = nu.clone();
        let mut lamp = lambda.clone();
        let mut epsp = eps.clone();
        if i < n {
            let mut step = DVector::zeros(n);
            step[i] = t;
            gp = g.compose(&exp(&AlgebraVector::new(desc.clone(), step)))?;
        } else if i < n + dim_m {
            let col: DVector<f64> = tube.simple.iota.column(i - n).into();
            nup = CoalgebraVector::new(desc.clone(), &nu.coords + col * t);
        } else if i < n + dim_m + dim_o {
            let j = i - n - dim_m;
            lamp = AlgebraVector::new(
                desc.clone(),
                &lambda.coords + &tube.splitting.o[j].coords * t,
            );
        } else {
            let j = i - n - dim_m - dim_o;
            epsp[j] += t;
        }
        Ok(flatten_group_point(&tube.eval(&gp, &nup, &lamp, &epsp)?))
    };

    let nu_full_plus_mu = CoalgebraVector::new(desc.clone(), &nu.coords + &tube.simple.mu.coords);
    let model = |i: usize, j: usize| -> f64 {
        let dir = |k: usize| -> (
            Option<AlgebraVector>,
            Option<CoalgebraVector>,
            Option<AlgebraVector>,
        ) {
            if k < n {
                let mut v = DVector::zeros(n);
                v[k] = 1.0;
                (Some(AlgebraVector::new(desc.clone(), v)), None, None)
            } else if k < n + dim_m {
                let col: DVector<f64> = tube.simple.iota.column(k - n).into();
                (None, Some(CoalgebraVector::new(desc.clone(), col)), None)
            } else if k < n + dim_m + dim_o {
                (None, None, Some(tube.splitting.o[k - n - dim_m].clone()))
            } else {
                (None, None, None) // eps directions do not enter the form
            }
        };
        let (xi1, nud1, lamd1) = dir(i);
        let (xi2, nud2, lamd2) = dir(j);
        let mut val = 0.0;
        if let (Some(x1), Some(x2)) = (&xi1, &xi2) {
            let br = bracket(x1, x2).expect("same descriptor");
            val += pairing(&nu_full_plus_mu, &br);
        }
        if let (Some(x1), Some(nd2)) = (&xi1, &nud2) {
            val += nd2.coords.dot(&x1.coords);
        }
        if let (Some(nd1), Some(x2)) = (&nud1, &xi2) {
            val -= nd1.coords.dot(&x2.coords);
        }
        if let (Some(l1), Some(l2)) = (&lamd1, &lamd2) {
            let br = bracket(l1, l2).expect("same descriptor");
            val -= pairing(&tube.simple.mu, &br);
        }
        val
    };

    let form = tstar_group_form(desc, &center);
    fd_pullback_residual(dim, cfg, &eval, &model, &form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gtube::{sl2_simple_tube, so3_simple_tube, TubeRadii};
    use crate::lie::{sl2r, so3};
    use crate::splitting::{adapted_splitting, invariant_metric};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn so3_simple_tube_is_a_symplectomorphism() {
        let mu = CoalgebraVector::from_slice(&so3(), &[0.0, 0.0, 1.0]);
        let tube = so3_simple_tube(&mu).unwrap();
        let cfg = FdConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let (g, nu, lam) = sample_simple_domain(&mut rng, &tube, 0.8);
            let r = simple_tube_pullback_residual(&tube, &g, &nu, &lam, &cfg, 1.0).unwrap();
            assert!(r < 1e-6, "pullback residual {r}");
        }
        // negative control: a 1% scaling error must be visible
        let (g, nu, lam) = sample_simple_domain(&mut rng, &tube, 0.8);
        let r = simple_tube_pullback_residual(&tube, &g, &nu, &lam, &cfg, 1.01).unwrap();
        assert!(r > 1e-3, "negative control residual {r}");
    }

    #[test]
    fn sl2_tubes_are_symplectomorphisms() {
        let g = sl2r();
        let cfg = FdConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // elliptic
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.2, -1.2, 0.0]);
        let mu = g.coalgebra_from_matrix(&rot).unwrap();
        let tube = sl2_simple_tube(&mu).unwrap();
        for _ in 0..10 {
            let (gg, nu, lam) = sample_simple_domain(&mut rng, &tube, 0.7);
            let r = simple_tube_pullback_residual(&tube, &gg, &nu, &lam, &cfg, 1.0).unwrap();
            assert!(r < 1e-6, "elliptic pullback residual {r}");
        }
        // nilpotent, with a conjugated representative
        let conj = exp(&AlgebraVector::from_slice(&g, &[0.4, -0.2, 0.6]));
        let up = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        for m_mat in [up.clone(), &conj.matrix * &up * conj.inverse().matrix] {
            let mu_n = g.coalgebra_from_matrix(&m_mat).unwrap();
            let tube_n = sl2_simple_tube(&mu_n).unwrap();
            for _ in 0..10 {
                let (gg, nu, lam) = sample_simple_domain(&mut rng, &tube_n, 0.7);
                let r = simple_tube_pullback_residual(&tube_n, &gg, &nu, &lam, &cfg, 1.0).unwrap();
                assert!(r < 1e-6, "nilpotent pullback residual {r}");
            }
        }
        // hyperbolic orbit, sampled inside the scaling domain
        let hyp = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, -0.9]);
        let mu_h = g.coalgebra_from_matrix(&hyp).unwrap();
        let tube_h = sl2_simple_tube(&mu_h).unwrap();
        let mut checked = 0;
        while checked < 10 {
            let (gg, nu, lam) = sample_simple_domain(&mut rng, &tube_h, 0.5);
            match simple_tube_pullback_residual(&tube_h, &gg, &nu, &lam, &cfg, 1.0) {
                Ok(r) => {
                    assert!(r < 1e-6, "hyperbolic pullback residual {r}");
                    checked += 1;
                }
                // the indefinite form lets samples leave the arcsin domain
                Err(TubeError::DomainExit(_)) => continue,
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn restricted_tube_with_trivial_h_is_the_simple_tube() {
        // h = {0}: the adapted splitting has a two-dimensional o, no l or n,
        // and the restricted tube reduces to the simple tube over o
        let g = sl2r();
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.2, -1.2, 0.0]);
        let mu = g.coalgebra_from_matrix(&rot).unwrap();
        let metric = invariant_metric(&g, &[]).unwrap();
        let splitting = adapted_splitting(&g, &[], &mu, &metric).unwrap();
        assert_eq!(splitting.o.len(), 2);
        let tube = crate::gtube::RestrictedTube::build(splitting, TubeRadii::for_scale(mu.norm()))
            .unwrap();
        let cfg = FdConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..6 {
            let gg = exp(&random_algebra(&mut rng, &g, 0.6));
            let nu = tube
                .simple
                .embed_isotropy_covector(&DVector::from_column_slice(&[rng.gen_range(-0.2..0.2)]));
            let mut lam = DVector::zeros(3);
            for ob in &tube.splitting.o {
                lam += &ob.coords * rng.gen_range(-0.2..0.2);
            }
            let lam = AlgebraVector::new(g.clone(), lam);
            let eps = DVector::zeros(0);
            let r = restricted_tube_pullback_residual(&tube, &gg, &nu, &lam, &eps, &cfg).unwrap();
            assert!(r < 1e-6, "restricted pullback residual {r}");
            let out = tube.eval(&gg, &nu, &lam, &eps).unwrap();
            let direct = tube.simple.eval(&gg, &nu, &lam).unwrap();
            assert!(point_distance(&out, &direct) < 1e-13);
        }
    }

    #[test]
    fn linearization_at_center() {
        let mu = CoalgebraVector::from_slice(&so3(), &[0.0, 0.0, 1.0]);
        let tube = so3_simple_tube(&mu).unwrap();
        let r = linearization_residual(&tube, &FdConfig::default()).unwrap();
        assert!(r < 1e-7, "linearization residual {r}");
    }

    #[test]
    fn equivariance_and_momentum_identities() {
        let mu = CoalgebraVector::from_slice(&so3(), &[0.0, 0.0, 1.0]);
        let tube = so3_simple_tube(&mu).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (g, nu, lam) = sample_simple_domain(&mut rng, &tube, 0.8);
        let left = left_equivariance_residual(&tube, &g, &nu, &lam, &mut rng, 10).unwrap();
        let twist = twist_equivariance_residual(&tube, &g, &nu, &lam, &mut rng, 10).unwrap();
        assert!(left < 1e-10, "left equivariance {left}");
        assert!(twist < 1e-10, "twist equivariance {twist}");
        // corrected isotropy momentum identity on h_mu = g_mu (circle about mu)
        let r = hmu_momentum_residual(&tube, &tube.g_mu_basis.clone(), &g, &nu, &lam).unwrap();
        assert!(r < 1e-12, "h_mu momentum identity {r}");
        let r = left_momentum_residual(&tube, &g, &nu, &lam).unwrap();
        assert!(r < 1e-12, "left momentum {r}");
    }

    #[test]
    fn restricted_pullback_and_momentum() {
        let g = so3();
        let mu = CoalgebraVector::from_slice(&g, &[0.0, 0.0, 1.0]);
        let xi_h = AlgebraVector::from_slice(&g, &[1.0, 0.0, 0.0]);
        let metric = invariant_metric(&g, std::slice::from_ref(&xi_h)).unwrap();
        let splitting = adapted_splitting(&g, &[xi_h], &mu, &metric).unwrap();
        let tube =
            crate::gtube::RestrictedTube::build(splitting, TubeRadii::for_scale(1.0)).unwrap();
        let cfg = FdConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let gg = exp(&random_algebra(&mut rng, &g, 0.6));
            let nu = tube
                .simple
                .embed_isotropy_covector(&DVector::from_column_slice(&[rng.gen_range(-0.2..0.2)]));
            let lam = AlgebraVector::zero(g.clone());
            let eps = DVector::from_column_slice(&[rng.gen_range(-0.2..0.2)]);
            let r = restricted_tube_pullback_residual(&tube, &gg, &nu, &lam, &eps, &cfg).unwrap();
            assert!(r < 1e-6, "restricted pullback residual {r}");
            let out = tube.eval(&gg, &nu, &lam, &eps).unwrap();
            let jr = tube.right_momentum_on_l(&out);
            assert!((jr + eps.clone()).norm() < 1e-10);
        }
    }
}
