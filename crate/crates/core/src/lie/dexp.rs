//! Right-trivialized differential of the group exponential.
//!
//! `dexp_right(lambda, v)` evaluates `M(lambda) v = sum_{n>=0} ad_lambda^n v / (n+1)!`,
//! which satisfies `d/dt exp(lambda + t v)|_0 = (M(lambda) v)^ · exp(lambda)` in
//! matrix form. Groups that declare an `ad^3 + a(xi) ad = 0` recurrence get a
//! three-term closed form; everything else uses the series with a relative
//! cutoff of 1e-16 and a hard cap of 40 terms.

use super::{bracket, AlgebraVector, LieError};

const SERIES_CAP: usize = 40;
const SERIES_RTOL: f64 = 1e-16;

/// Apply `M(lambda)` to `v`.
pub fn dexp_right(lambda: &AlgebraVector, v: &AlgebraVector) -> Result<AlgebraVector, LieError> {
    if let Some(form) = &lambda.descriptor.ad_cubed_form {
        let a = (lambda.coords.transpose() * form * &lambda.coords)[(0, 0)];
        return closed_form(lambda, v, a);
    }
    series(lambda, v)
}

fn series(lambda: &AlgebraVector, v: &AlgebraVector) -> Result<AlgebraVector, LieError> {
    let mut term = v.clone();
    let mut acc = v.coords.clone();
    let scale = v.norm().max(1e-300);
    for n in 1..=SERIES_CAP {
        term = bracket(lambda, &term)?;
        let coeff = 1.0 / factorial(n + 1);
        acc += &term.coords * coeff;
        if term.norm() * coeff < SERIES_RTOL * scale {
            break;
        }
    }
    Ok(AlgebraVector::new(lambda.descriptor.clone(), acc))
}

/// With `ad^3 = -a ad` on the whole algebra:
/// `M = I + A1(a) ad + A2(a) ad^2`,
/// `A1(x) = (1 - cos sqrt(x))/x`, `A2(x) = (sqrt(x) - sin sqrt(x))/x^(3/2)`,
/// continued to `x <= 0` by the hyperbolic branch.
fn closed_form(
    lambda: &AlgebraVector,
    v: &AlgebraVector,
    a: f64,
) -> Result<AlgebraVector, LieError> {
    let ad_v = bracket(lambda, v)?;
    let ad2_v = bracket(lambda, &ad_v)?;
    let out = &v.coords + &ad_v.coords * coeff_a1(a) + &ad2_v.coords * coeff_a2(a);
    Ok(AlgebraVector::new(lambda.descriptor.clone(), out))
}

pub(crate) fn coeff_a1(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        // 1/2 - x/24 + x^2/720
        0.5 - x / 24.0 + x * x / 720.0
    } else if x > 0.0 {
        let s = x.sqrt();
        (1.0 - s.cos()) / x
    } else {
        let s = (-x).sqrt();
        (1.0 - s.cosh()) / x
    }
}

pub(crate) fn coeff_a2(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        // 1/6 - x/120 + x^2/5040
        1.0 / 6.0 - x / 120.0 + x * x / 5040.0
    } else if x > 0.0 {
        let s = x.sqrt();
        (s - s.sin()) / (x * s)
    } else {
        let s = (-x).sqrt();
        (s.sinh() - s) / (-x * s)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}
