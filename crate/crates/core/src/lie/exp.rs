//! Matrix exponential paths.
//!
//! The general path is Padé scaling-and-squaring (nalgebra). For SO(3) the
//! Rodrigues formula is kept as an independent cross-check used by the test
//! suite.

use nalgebra::{DMatrix, DVector};

/// Matrix exponential (Padé scaling-and-squaring).
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.exp()
}

/// Rodrigues rotation formula: `exp` of the hat matrix of `axis_angle`.
pub fn rodrigues_so3(axis_angle: &DVector<f64>) -> DMatrix<f64> {
    assert_eq!(axis_angle.len(), 3);
    let theta = axis_angle.norm();
    let id = DMatrix::identity(3, 3);
    if theta < 1e-100 {
        return id;
    }
    let k = axis_angle / theta;
    let hat = DMatrix::from_row_slice(
        3,
        3,
        &[0.0, -k[2], k[1], k[2], 0.0, -k[0], -k[1], k[0], 0.0],
    );
    &id + &hat * theta.sin() + &hat * &hat * (1.0 - theta.cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pade_matches_rodrigues() {
        for (x, y, z) in [(0.3, -0.2, 0.9), (2.5, 1.0, -1.5), (0.0, 0.0, 3.1)] {
            let v = DVector::from_column_slice(&[x, y, z]);
            let hat = DMatrix::from_row_slice(
                3,
                3,
                &[0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0],
            );
            let a = expm(&hat);
            let b = rodrigues_so3(&v);
            assert!((a - b).norm() < 1e-12);
        }
    }
}
