//! The explicit Hamiltonian tube for SO(3) acting on `T*R^3`.
//!
//! At a center `(q, p)` with angular momentum `mu = q x p != 0` the isotropy
//! of `q` is the circle about `q`, the linear slice is `S = span q`, and the
//! general tube collapses to the closed form
//!
//! ```text
//! (g, nu, a, b) -> ( g (q + a),  g ((nu + mu) x (q + a) / |q + a|^2 + b + alpha) )
//! ```
//!
//! with `nu` along `mu`, `a` and `b` along `q`, and `alpha` the restriction
//! of `p` to `S` (the projection `<p, q^> q^`). The zero-centered variant
//! drops `alpha`. Inversion is analytic: `|Q|` fixes `a`, `|Q x P|` fixes
//! `nu`, and frame alignment fixes `g`.

use nalgebra::{DMatrix, DVector};

use super::{CotangentModel, ModelError, ModelPoint, ModelRadii, RepPoint};
use crate::lie::{AlgebraVector, CoalgebraVector, GroupElement, Representation};

/// Model data for the SO(3) action on `T*R^3` at `(q, p)`.
#[derive(Debug, Clone)]
pub struct So3R3Model {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
    /// `mu = q x p`.
    pub mu: DVector<f64>,
    /// `alpha = <p, q^> q^` (the slice component of `p`).
    pub alpha: DVector<f64>,
    pub radii: ModelRadii,
    /// The same center assembled through the generic machinery, for
    /// cross-checks between the closed form and the composed tube.
    pub generic: CotangentModel,
}

/// A point of `T*R^3`.
#[derive(Debug, Clone)]
pub struct PhasePointR3 {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

fn cross(u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    DVector::from_column_slice(&[
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ])
}

impl So3R3Model {
    pub fn build(q: &DVector<f64>, p: &DVector<f64>) -> Result<Self, ModelError> {
        let mu = cross(q, p);
        if mu.norm() < 1e-12 {
            return Err(ModelError::Inconsistent(
                "the center needs nonzero angular momentum q x p".into(),
            ));
        }
        let desc = crate::lie::so3();
        let rep = Representation::new(desc.clone(), desc.basis.clone()).map_err(ModelError::Lie)?;
        let q_hat = q / q.norm();
        let h = vec![AlgebraVector::new(desc.clone(), q_hat.clone())];
        let mu_cov = CoalgebraVector::new(desc.clone(), mu.clone());
        let s_basis = vec![q_hat.clone()];
        let alpha = &q_hat * p.dot(&q_hat);
        let radii = ModelRadii {
            a: 0.3 * q.norm(),
            ..ModelRadii::for_scales(mu.norm(), q.norm())
        };
        let generic = CotangentModel::build(desc, rep, &h, mu_cov, &s_basis, alpha.clone(), radii)?;
        Ok(So3R3Model {
            q: q.clone(),
            p: p.clone(),
            mu,
            alpha,
            radii,
            generic,
        })
    }

    fn q_hat(&self) -> DVector<f64> {
        &self.q / self.q.norm()
    }

    fn mu_hat(&self) -> DVector<f64> {
        &self.mu / self.mu.norm()
    }

    fn check_coords(&self, nu: f64, a: f64, b: f64) -> Result<(), ModelError> {
        if nu.abs() > self.radii.nu {
            return Err(ModelError::DomainExit(format!(
                "|nu| = {:.3e} exceeds the configured radius {:.3e}",
                nu.abs(),
                self.radii.nu
            )));
        }
        // hard slice bound |a| < |q| before the configured radius
        if a.abs() >= self.q.norm() {
            return Err(ModelError::DomainExit(format!(
                "|a| = {:.3e} reaches the slice radius |q| = {:.3e}",
                a.abs(),
                self.q.norm()
            )));
        }
        if a.abs() > self.radii.a {
            return Err(ModelError::DomainExit(format!(
                "|a| = {:.3e} exceeds the configured radius {:.3e}",
                a.abs(),
                self.radii.a
            )));
        }
        if b.abs() > self.radii.b {
            return Err(ModelError::DomainExit(format!(
                "|b| = {:.3e} exceeds the configured radius {:.3e}",
                b.abs(),
                self.radii.b
            )));
        }
        Ok(())
    }

    /// The general tube in closed form. Coordinates: `nu` along `mu^`, `a`
    /// and `b` along `q^`.
    pub fn eval(
        &self,
        g: &GroupElement,
        nu: f64,
        a: f64,
        b: f64,
    ) -> Result<PhasePointR3, ModelError> {
        self.eval_inner(g, nu, a, b, true)
    }

    /// The zero-centered tube (no `alpha` shift); centers at `(q, p_perp)`.
    pub fn eval_tube0(
        &self,
        g: &GroupElement,
        nu: f64,
        a: f64,
        b: f64,
    ) -> Result<PhasePointR3, ModelError> {
        self.eval_inner(g, nu, a, b, false)
    }

    fn eval_inner(
        &self,
        g: &GroupElement,
        nu: f64,
        a: f64,
        b: f64,
        with_alpha: bool,
    ) -> Result<PhasePointR3, ModelError> {
        self.check_coords(nu, a, b)?;
        let q_hat = self.q_hat();
        let base = &self.q + &q_hat * a;
        let w = &self.mu + &self.mu_hat() * nu; // nu + mu as a vector
        let mut fiber = cross(&w, &base) / base.norm_squared() + &q_hat * b;
        if with_alpha {
            fiber += &self.alpha;
        }
        Ok(PhasePointR3 {
            q: &g.matrix * base,
            p: &g.matrix * fiber,
        })
    }

    /// Push a generic-machinery representative through the slice
    /// parametrization `[g, a] -> g(q + a)` to a `T*R^3` point.
    pub fn rep_to_phase(&self, rep: &RepPoint) -> PhasePointR3 {
        let q_hat = self.q_hat();
        let a_coord = rep.a.dot(&q_hat);
        let base = &self.q + &q_hat * a_coord;
        let fiber = cross(&rep.nu.coords, &base) / base.norm_squared() + &q_hat * rep.b.dot(&q_hat);
        PhasePointR3 {
            q: &rep.g.matrix * base,
            p: &rep.g.matrix * fiber,
        }
    }

    /// Angular momentum `Q x P` of a phase point.
    pub fn angular_momentum(&self, z: &PhasePointR3) -> DVector<f64> {
        cross(&z.q, &z.p)
    }

    /// Analytic inversion of the general tube; fails with a domain exit when
    /// the phase point leaves the tube image.
    pub fn invert(&self, z: &PhasePointR3) -> Result<(GroupElement, f64, f64, f64), ModelError> {
        self.invert_inner(z, true)
    }

    /// Analytic inversion of the zero-centered tube.
    pub fn invert_tube0(
        &self,
        z: &PhasePointR3,
    ) -> Result<(GroupElement, f64, f64, f64), ModelError> {
        self.invert_inner(z, false)
    }

    fn invert_inner(
        &self,
        z: &PhasePointR3,
        with_alpha: bool,
    ) -> Result<(GroupElement, f64, f64, f64), ModelError> {
        let qn = self.q.norm();
        let a = z.q.norm() - qn;
        if a.abs() >= qn {
            return Err(ModelError::DomainExit(format!(
                "|a| = {:.3e} reaches the slice radius |q| = {qn:.3e}",
                a.abs()
            )));
        }
        let ang = cross(&z.q, &z.p);
        if ang.norm() < 1e-12 {
            return Err(ModelError::DomainExit(
                "phase point has zero angular momentum".into(),
            ));
        }
        let nu = ang.norm() - self.mu.norm();
        // frame alignment: q^ -> Q^, mu^ -> L^
        let q_hat = self.q_hat();
        let mu_hat = self.mu_hat();
        let f1 = frame(&q_hat, &mu_hat);
        let f2 = frame(&(&z.q / z.q.norm()), &(&ang / ang.norm()));
        let g_mat = f2 * f1.transpose();
        let g = GroupElement::new(crate::lie::so3(), g_mat).map_err(ModelError::Lie)?;
        let gp = g.matrix.transpose() * &z.p;
        let mut b = gp.dot(&q_hat);
        if with_alpha {
            b -= self.alpha.dot(&q_hat);
        }
        // consistency: forward maps back to z
        let fwd = self.eval_inner(&g, nu, a, b, with_alpha)?;
        let residual = (&fwd.q - &z.q).norm() + (&fwd.p - &z.p).norm();
        if residual > 1e-9 * (1.0 + z.p.norm() + z.q.norm()) {
            return Err(ModelError::InversionDiverged { residual });
        }
        Ok((g, nu, a, b))
    }

    /// Momentum-level membership predicate for the zero-centered tube:
    /// `g` preserves `mu`, `nu = 0` (the `h_mu` slice condition is empty for
    /// this model). When it holds, the forward image lies in the `mu` level.
    pub fn bates_lerman_predicate(
        &self,
        g: &GroupElement,
        nu: f64,
        a: f64,
        b: f64,
        tol: f64,
    ) -> Result<super::PredicateReport, ModelError> {
        let g_residual = (&g.matrix * &self.mu - &self.mu).norm();
        let nu_residual = nu.abs();
        let in_set = g_residual <= tol && nu_residual <= tol;
        let momentum_residual = if in_set {
            let z = self.eval_tube0(g, nu, a, b)?;
            Some((self.angular_momentum(&z) - &self.mu).norm())
        } else {
            None
        };
        Ok(super::PredicateReport {
            in_set,
            g_residual,
            nu_residual,
            slice_residual: 0.0,
            momentum_residual,
        })
    }

    /// Evaluate the same model point through the generic machinery (Gamma
    /// shift, restricted tube, slice representatives) and push to `T*R^3`.
    pub fn eval_generic_path(
        &self,
        g: &GroupElement,
        nu: f64,
        a: f64,
        b: f64,
    ) -> Result<PhasePointR3, ModelError> {
        let m = &self.generic;
        let q_hat = self.q_hat();
        // model coordinates: nu on the p basis, a on B, b on B*
        let nu_p = if m.splitting.p.is_empty() {
            DVector::zeros(0)
        } else {
            // p basis is +/- mu^; express nu mu^-flat in it
            let sign = m.splitting.p[0].coords.dot(&self.mu_hat());
            DVector::from_column_slice(&[nu * sign])
        };
        let pt = ModelPoint {
            g: g.clone(),
            nu_s: DVector::zeros(m.slice.s_complement.len()),
            nu_p,
            lambda: AlgebraVector::zero(m.descriptor.clone()),
            a: &q_hat * a,
            b: &q_hat * b,
        };
        let rep = m.general_tube_eval(&pt)?;
        Ok(self.rep_to_phase(&rep))
    }
}

/// Right-handed orthonormal frame with the first two axes given.
fn frame(u: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let w = cross(u, v);
    let mut f = DMatrix::zeros(3, 3);
    f.set_column(0, u);
    f.set_column(1, v);
    f.set_column(2, &w);
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{exp, so3, AlgebraVector};

    fn model() -> So3R3Model {
        So3R3Model::build(
            &DVector::from_column_slice(&[1.0, 0.0, 0.0]),
            &DVector::from_column_slice(&[0.0, 1.0, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn center_maps_to_qp() {
        let m = model();
        let e = GroupElement::identity(so3());
        let z = m.eval(&e, 0.0, 0.0, 0.0).unwrap();
        assert!((z.q.clone() - m.q.clone()).norm() < 1e-14);
        assert!((z.p.clone() - m.p.clone()).norm() < 1e-14);
        // zero-centered tube centers on (q, p_perp)
        let z0 = m.eval_tube0(&e, 0.0, 0.0, 0.0).unwrap();
        let p_perp = &m.p - &m.alpha;
        assert!((z0.p.clone() - p_perp).norm() < 1e-14);
    }

    #[test]
    fn center_with_nonperpendicular_p() {
        // p with a component along q: alpha is the q-projection of p
        let q = DVector::from_column_slice(&[1.2, -0.3, 0.4]);
        let p = DVector::from_column_slice(&[0.5, 1.1, 0.2]);
        let m = So3R3Model::build(&q, &p).unwrap();
        let e = GroupElement::identity(so3());
        let z = m.eval(&e, 0.0, 0.0, 0.0).unwrap();
        assert!((z.q.clone() - q.clone()).norm() < 1e-12, "Q residual");
        assert!(
            (z.p.clone() - p.clone()).norm() < 1e-12,
            "P residual {}",
            (z.p.clone() - p).norm()
        );
    }

    #[test]
    fn momentum_is_rotated_mu_plus_nu() {
        let m = model();
        let g = exp(&AlgebraVector::from_slice(&so3(), &[0.3, -0.2, 0.5]));
        let z = m.eval(&g, 0.12, 0.0, 0.0).unwrap();
        let ang = m.angular_momentum(&z);
        let expected = &g.matrix * (&m.mu + &m.mu * 0.12 / m.mu.norm());
        assert!((ang - expected).norm() < 1e-12);
    }

    #[test]
    fn frozen_radial_example() {
        // q = e1, p = e2, a = 0.1: Q = (1.1, 0, 0), P = (0, 1/1.1, 0)
        let m = model();
        let e = GroupElement::identity(so3());
        let radii_wide = So3R3Model {
            radii: ModelRadii { a: 0.5, ..m.radii },
            ..m
        };
        let z = radii_wide.eval(&e, 0.0, 0.1, 0.0).unwrap();
        assert!((z.q.clone() - DVector::from_column_slice(&[1.1, 0.0, 0.0])).norm() < 1e-14);
        assert!((z.p.clone() - DVector::from_column_slice(&[0.0, 1.0 / 1.1, 0.0])).norm() < 1e-13);
    }

    #[test]
    fn inversion_round_trip_and_domain_exit() {
        let m = model();
        let g = exp(&AlgebraVector::from_slice(&so3(), &[0.4, 0.1, -0.2]));
        let z = m.eval(&g, 0.1, 0.15, -0.08).unwrap();
        let (gi, nu, a, b) = m.invert(&z).unwrap();
        let z2 = m.eval(&gi, nu, a, b).unwrap();
        assert!((z2.q.clone() - z.q.clone()).norm() + (z2.p.clone() - z.p.clone()).norm() < 1e-10);
        assert!((nu - 0.1).abs() < 1e-10);
        assert!((a - 0.15).abs() < 1e-10);
        assert!((b + 0.08).abs() < 1e-10);

        // |Q| >= 2|q| leaves the Palais annulus
        let far = PhasePointR3 {
            q: DVector::from_column_slice(&[2.5, 0.0, 0.0]),
            p: DVector::from_column_slice(&[0.0, 0.4, 0.0]),
        };
        assert!(matches!(m.invert(&far), Err(ModelError::DomainExit(_))));
    }

    #[test]
    fn closed_form_matches_generic_machinery() {
        let m = model();
        let g = exp(&AlgebraVector::from_slice(&so3(), &[0.2, -0.4, 0.3]));
        for (nu, a, b) in [(0.0, 0.0, 0.0), (0.1, 0.12, -0.05), (-0.15, -0.2, 0.2)] {
            let direct = m.eval(&g, nu, a, b).unwrap();
            let composed = m.eval_generic_path(&g, nu, a, b).unwrap();
            let d = (direct.q.clone() - composed.q.clone()).norm()
                + (direct.p.clone() - composed.p.clone()).norm();
            assert!(d < 1e-10, "paths disagree by {d} at ({nu}, {a}, {b})");
        }
    }

    #[test]
    fn predicate_points_land_in_the_momentum_level() {
        let m = model();
        // g in the circle about mu, nu = 0
        let g = exp(&AlgebraVector::new(so3(), &m.mu / m.mu.norm() * 0.9));
        let report = m.bates_lerman_predicate(&g, 0.0, 0.1, -0.12, 1e-9).unwrap();
        assert!(report.in_set);
        assert!(report.momentum_residual.unwrap() < 1e-12);
        // nu != 0 fails
        let report = m
            .bates_lerman_predicate(&g, 0.05, 0.1, -0.12, 1e-9)
            .unwrap();
        assert!(!report.in_set);
    }
}
