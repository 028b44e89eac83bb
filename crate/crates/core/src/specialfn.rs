//! Scalar kernels for tube scaling factors.
//!
//! `eval_e(x)` returns the positive analytic solution of
//! `exp(-x E) = 1 - x E + x^2/2` with `E(0) = 1`; `eval_f(x)` is the
//! `arcsin(sqrt(x))/sqrt(x)` ratio continued through 0 by the hyperbolic
//! branch; `solve_m1` solves the scalar scaling equation `h(m lambda, nu) m^2
//! = 1/2` that determines a two-dimensional simple tube.

use thiserror::Error;

use crate::lie::{bracket, dexp_right, pairing, AlgebraVector, CoalgebraVector, LieError};

#[derive(Debug, Error)]
pub enum SpecialFnError {
    #[error("argument {x} outside the domain of {function} ({bound})")]
    Domain {
        function: &'static str,
        x: f64,
        bound: &'static str,
    },
    #[error("scalar solve did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("degenerate probe: the scaling equation has no usable direction")]
    DegenerateProbe,
    #[error(transparent)]
    Lie(#[from] LieError),
}

/// Newton/bisection configuration for the scalar solvers.
#[derive(Debug, Clone, Copy)]
pub struct ScalarSolveConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub bracketing_fallback: bool,
}

impl Default for ScalarSolveConfig {
    fn default() -> Self {
        ScalarSolveConfig {
            tolerance: 1e-14,
            max_iterations: 100,
            bracketing_fallback: true,
        }
    }
}

/// The implicit scaling function: the unique positive analytic solution of
/// `exp(-t) = 1 - t + x^2/2` with `t = x E(x)` carrying the sign of `x`.
pub fn eval_e(x: f64) -> f64 {
    eval_e_with(x, &ScalarSolveConfig::default()).expect("eval_e converges for finite input")
}

pub fn eval_e_with(x: f64, cfg: &ScalarSolveConfig) -> Result<f64, SpecialFnError> {
    if x == 0.0 {
        return Ok(1.0);
    }
    if !x.is_finite() {
        return Err(SpecialFnError::Domain {
            function: "E",
            x,
            bound: "finite",
        });
    }
    let t = solve_e_parameter(x, cfg)?;
    Ok(t / x)
}

/// Solve for `t = x E(x)`.
///
/// The defining equation `exp(-t) + t - 1 = x^2/2` degenerates quadratically
/// at the origin, so for small `|x|` Newton runs on the rescaled equation
/// `sign(t) sqrt(2(exp(-t) - 1 + t)) = x`, whose derivative is close to 1.
fn solve_e_parameter(x: f64, cfg: &ScalarSolveConfig) -> Result<f64, SpecialFnError> {
    // phi(t) = 2(exp(-t) - 1 + t), evaluated by series near 0 to dodge
    // catastrophic cancellation.
    let phi = |t: f64| -> f64 {
        if t.abs() < 0.1 {
            let t2 = t * t;
            t2 * (1.0 - t / 3.0 + t2 / 12.0 - t2 * t / 60.0 + t2 * t2 / 360.0
                - t2 * t2 * t / 2520.0
                + t2 * t2 * t2 / 20160.0)
        } else {
            2.0 * ((-t).exp() - 1.0 + t)
        }
    };
    let dphi = |t: f64| 2.0 * (1.0 - (-t).exp());

    if x.abs() < 0.9 {
        // psi(t) = sign(t) sqrt(phi(t)) - x, psi'(t) ~ 1 near the root
        let mut t = x;
        for _ in 0..cfg.max_iterations {
            let p = phi(t).max(0.0);
            let s = p.sqrt().copysign(t);
            let residual = s - x;
            if residual.abs() < 1e-16 * (1.0 + x.abs()) {
                return Ok(t);
            }
            let d = if s.abs() > 1e-300 {
                dphi(t) / (2.0 * s)
            } else {
                1.0
            };
            t -= residual / d;
        }
        let p = phi(t).max(0.0);
        if (p.sqrt().copysign(t) - x).abs() < 1e-13 {
            return Ok(t);
        }
        return Err(SpecialFnError::NonConvergence {
            iterations: cfg.max_iterations,
            residual: p.sqrt().copysign(t) - x,
        });
    }

    // g(t) = phi(t) - x^2 with a safeguarded Newton on the branch sign(t) = sign(x)
    let target = x * x;
    let g = |t: f64| phi(t) - target;
    let (mut lo, mut hi) = if x > 0.0 {
        (0.0, target / 2.0 + 2.0)
    } else {
        (-(2.0 + target / 2.0).ln() - 2.0, 0.0)
    };
    let mut t = if x > 0.0 {
        target / 2.0 + 1.0
    } else {
        -((1.0 + target / 2.0).ln())
    };
    let mut residual = g(t);
    for _ in 0..cfg.max_iterations {
        if residual.abs() < 4e-16 * (1.0 + target) {
            return Ok(t);
        }
        if residual > 0.0 {
            if x > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
        } else if x > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let d = dphi(t);
        let mut next = if d.abs() > 1e-300 {
            t - residual / d
        } else {
            t
        };
        if !(next > lo && next < hi) && cfg.bracketing_fallback {
            next = 0.5 * (lo + hi);
        }
        t = next;
        residual = g(t);
    }
    if residual.abs() < 1e-12 * (1.0 + target) {
        return Ok(t);
    }
    Err(SpecialFnError::NonConvergence {
        iterations: cfg.max_iterations,
        residual,
    })
}

/// Residual of the defining identity `exp(-xE) - 1 + xE - x^2/2` at the
/// computed value; diagnostic for reports.
pub fn e_identity_residual(x: f64, e: f64) -> f64 {
    let t = x * e;
    (-t).exp() - 1.0 + t - x * x / 2.0
}

/// `arcsin(sqrt(x))/sqrt(x)` for `x > 0`, `arcsinh(sqrt(-x))/sqrt(-x)` for
/// `x < 0`, continued by `F(0) = 1`; domain `x <= 1` with `F(1) = pi/2`.
pub fn eval_f(x: f64) -> Result<f64, SpecialFnError> {
    if x.is_nan() || x > 1.0 {
        return Err(SpecialFnError::Domain {
            function: "F",
            x,
            bound: "x <= 1",
        });
    }
    if x.abs() < 1e-4 {
        // common analytic series: 1 + x/6 + 3x^2/40 + 15x^3/336
        return Ok(1.0 + x / 6.0 + 3.0 * x * x / 40.0 + 15.0 * x * x * x / 336.0);
    }
    if x > 0.0 {
        let s = x.sqrt();
        Ok(s.asin() / s)
    } else {
        let s = (-x).sqrt();
        Ok(s.asinh() / s)
    }
}

/// Inputs pinning down the two-dimensional scaling equation on a splitting
/// `g = g_mu + q` with `dim q = 2`.
pub struct ScalingProblem<'a> {
    /// Base covector of the tube.
    pub mu: &'a CoalgebraVector,
    /// Covector offset already embedded in the annihilator of `q`.
    pub nu: &'a CoalgebraVector,
    /// Direction being scaled.
    pub lambda: &'a AlgebraVector,
    /// A vector of `q` spanning it together with `lambda`.
    pub probe: &'a AlgebraVector,
}

/// Evaluate `h(lambda, nu)` from its defining relation
/// `<mu+nu, M(lambda) w> - <mu, w> = h <mu, [lambda, w]>` with `w` the probe.
pub fn h_value(p: &ScalingProblem<'_>) -> Result<f64, SpecialFnError> {
    let m_w = dexp_right(p.lambda, p.probe)?;
    let mu_plus_nu = CoalgebraVector::new(p.mu.descriptor.clone(), &p.mu.coords + &p.nu.coords);
    let lhs = pairing(&mu_plus_nu, &m_w) - pairing(p.mu, p.probe);
    let denom = pairing(p.mu, &bracket(p.lambda, p.probe)?);
    if denom.abs() < 1e-14 * p.mu.norm().max(1.0) * p.lambda.norm() * p.probe.norm() {
        return Err(SpecialFnError::DegenerateProbe);
    }
    Ok(lhs / denom)
}

/// Solve `h(m lambda, nu) m^2 = 1/2` for the scaling factor `m > 0`.
///
/// `initial` seeds the Newton iteration (closed forms when a caller has one,
/// `1.0` otherwise). Returns `1.0` immediately for `lambda = 0`, where the
/// scaling is irrelevant.
pub fn solve_m1(
    p: &ScalingProblem<'_>,
    initial: f64,
    cfg: &ScalarSolveConfig,
) -> Result<f64, SpecialFnError> {
    if p.lambda.norm() == 0.0 {
        return Ok(1.0);
    }
    let f = |m: f64| -> Result<f64, SpecialFnError> {
        let scaled = AlgebraVector::new(p.lambda.descriptor.clone(), &p.lambda.coords * m);
        let problem = ScalingProblem {
            mu: p.mu,
            nu: p.nu,
            lambda: &scaled,
            probe: p.probe,
        };
        Ok(h_value(&problem)? * m * m - 0.5)
    };

    let mut m = if initial.is_finite() && initial > 0.0 {
        initial
    } else {
        1.0
    };
    let mut bracket_lo: Option<(f64, f64)> = None;
    let mut bracket_hi: Option<(f64, f64)> = None;
    let mut value = f(m)?;
    for it in 0..cfg.max_iterations {
        if value.abs() < cfg.tolerance {
            return Ok(m);
        }
        if value < 0.0 {
            bracket_lo = Some((m, value));
        } else {
            bracket_hi = Some((m, value));
        }
        let delta = 1e-6 * m.max(1e-3);
        let d = (f(m + delta)? - f(m - delta)?) / (2.0 * delta);
        // the residual bottoms out at the rounding noise of the pairing
        // evaluations; accept once the Newton update stops moving
        if d.abs() > 1e-300 && (value / d).abs() < 1e-13 * m.max(1.0) && value.abs() < 1e-10 {
            return Ok(m);
        }
        let mut next = if d.abs() > 1e-300 {
            m - value / d
        } else {
            -1.0
        };
        let inside_bracket = match (bracket_lo, bracket_hi) {
            (Some((lo, _)), Some((hi, _))) => {
                let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
                next > a && next < b
            }
            _ => next > 0.0 && next.is_finite(),
        };
        if !inside_bracket {
            if cfg.bracketing_fallback {
                next = match (bracket_lo, bracket_hi) {
                    (Some((lo, _)), Some((hi, _))) => 0.5 * (lo + hi),
                    // expand away from the known side
                    (Some((lo, _)), None) => lo * 1.5 + 0.1,
                    (None, Some((hi, _))) => hi * 0.5,
                    (None, None) => 1.0,
                };
            } else {
                return Err(SpecialFnError::NonConvergence {
                    iterations: it,
                    residual: value,
                });
            }
        }
        if !(next.is_finite() && next > 0.0) {
            return Err(SpecialFnError::NonConvergence {
                iterations: it,
                residual: value,
            });
        }
        m = next;
        value = f(m)?;
    }
    if value.abs() < 1e-10 {
        return Ok(m);
    }
    Err(SpecialFnError::NonConvergence {
        iterations: cfg.max_iterations,
        residual: value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent oracle: bisect `exp(-t) + t = 1 + x^2/2` on the branch
    /// with `sign(t) = sign(x)`, then `E = t/x`.
    fn e_oracle(x: f64) -> f64 {
        if x == 0.0 {
            return 1.0;
        }
        let target = 1.0 + x * x / 2.0;
        let g = |t: f64| (-t).exp() + t - target;
        let (mut lo, mut hi) = if x > 0.0 {
            (0.0, target + 2.0)
        } else {
            let mut lo = -1.0;
            while g(lo) < 0.0 {
                lo *= 2.0;
            }
            (lo, 0.0)
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let gm = g(mid);
            // g < 0 between the two roots, > 0 outside
            let positive_side = if x > 0.0 { gm > 0.0 } else { gm > 0.0 };
            if x > 0.0 {
                if positive_side {
                    hi = mid;
                } else {
                    lo = mid;
                }
            } else if positive_side {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi) / x
    }

    #[test]
    fn e_matches_bisection_oracle() {
        for &x in &[
            -10.0, -5.0, -2.0, -0.5, -1e-3, 1e-3, 0.5, 1.0, 2.0, 5.0, 10.0,
        ] {
            let e = eval_e(x);
            let oracle = e_oracle(x);
            // the bisection oracle solves in t-space, so compare t = x E there
            assert!(
                (x * e - x * oracle).abs() < 1e-11 * (1.0 + (x * oracle).abs()),
                "x={x}: {e} vs oracle {oracle}"
            );
            assert!(e > 0.0);
        }
        // frozen from the oracle: t ~ 2.9475 solves exp(-t)+t = 3, E = t/2
        assert_abs_diff_eq!(eval_e(2.0), 1.4737654512711426, epsilon = 1e-12);
    }

    #[test]
    fn e_identity_and_anchors() {
        assert_abs_diff_eq!(eval_e(0.0), 1.0, epsilon = 1e-15);
        for k in 0..=200 {
            let x = -10.0 + k as f64 * 0.1;
            let e = eval_e(x);
            assert!(
                e_identity_residual(x, e).abs() < 1e-12,
                "identity residual at {x}"
            );
        }
    }

    #[test]
    fn e_monotone_and_decaying() {
        let mut prev = eval_e(-20.0);
        for k in 1..=1000 {
            let x = -20.0 + k as f64 * 0.04;
            let e = eval_e(x);
            assert!(e > prev, "strictly increasing at {x}");
            prev = e;
        }
        // logarithmic decay toward -infinity
        let e50 = eval_e(-50.0);
        assert_abs_diff_eq!(e50, 0.14274775284919617, epsilon = 1e-12);
        assert!((e50 - e_oracle(-50.0)).abs() < 1e-11);
        assert!(eval_e(-1e6) < 1e-4);
        // asymptotic to x/2 for large positive x
        assert!((eval_e(40.0) - 20.0).abs() < 0.1);
    }

    #[test]
    fn f_anchors() {
        assert_abs_diff_eq!(
            eval_f(1.0).unwrap(),
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            eval_f(-1.0).unwrap(),
            (1.0 + 2.0_f64.sqrt()).ln(),
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(eval_f(1e-12).unwrap(), 1.0, epsilon = 1e-10);
        assert!(eval_f(1.0 + 1e-9).is_err());
        // continuity across the branch point
        let left = eval_f(-1e-9).unwrap();
        let right = eval_f(1e-9).unwrap();
        assert!((left - right).abs() < 1e-9);
        // series matches direct evaluation at the series boundary
        for &x in &[9.9e-5_f64, -9.9e-5, 1.01e-4, -1.01e-4] {
            let series = 1.0 + x / 6.0 + 3.0 * x * x / 40.0 + 15.0 * x * x * x / 336.0;
            let direct = if x > 0.0 {
                x.sqrt().asin() / x.sqrt()
            } else {
                (-x).sqrt().asinh() / (-x).sqrt()
            };
            assert!((series - direct).abs() < 1e-14);
            assert!((eval_f(x).unwrap() - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn f_monotone_positive() {
        let mut prev = eval_f(-25.0).unwrap();
        assert!(prev > 0.0);
        let steps = 2600;
        for k in 1..=steps {
            let x = -25.0 + k as f64 * (26.0 / steps as f64);
            if x > 1.0 {
                break;
            }
            let v = eval_f(x).unwrap();
            assert!(v > prev, "monotone increasing at {x}");
            prev = v;
        }
    }
}
