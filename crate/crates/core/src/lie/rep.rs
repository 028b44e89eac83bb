//! Linear representations and the diamond product.

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

use super::{AlgebraVector, GroupDescriptor, LieError};

/// A linear action of the algebra on a real vector space `V = R^m`, given by
/// one action matrix per declared basis element.
#[derive(Debug, Clone)]
pub struct Representation {
    pub descriptor: Arc<GroupDescriptor>,
    /// Dimension of `V`.
    pub space_dim: usize,
    /// `action[i]` is the matrix of the basis element `B_i` on `V`.
    pub action: Vec<DMatrix<f64>>,
}

impl Representation {
    /// Validate the commutator relations `[rho_i, rho_j] = rho([B_i, B_j])`
    /// and wrap the action matrices.
    pub fn new(
        descriptor: Arc<GroupDescriptor>,
        action: Vec<DMatrix<f64>>,
    ) -> Result<Self, LieError> {
        if action.len() != descriptor.dim {
            return Err(LieError::DimensionMismatch {
                expected: descriptor.dim,
                got: action.len(),
            });
        }
        let m = action.first().map(|a| a.nrows()).unwrap_or(0);
        for a in &action {
            if a.nrows() != m || a.ncols() != m {
                return Err(LieError::InvalidDescriptor(
                    "action matrices must be square and of equal size".into(),
                ));
            }
        }
        let rep = Representation {
            descriptor,
            space_dim: m,
            action,
        };
        let res = rep.commutator_residual();
        if res > 1e-10 {
            return Err(LieError::InvalidDescriptor(format!(
                "action matrices violate the bracket relations (residual {res:.3e})"
            )));
        }
        Ok(rep)
    }

    /// Max residual of `[rho_i, rho_j] - rho([B_i, B_j])` over basis pairs.
    pub fn commutator_residual(&self) -> f64 {
        let n = self.descriptor.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let comm = &self.action[i] * &self.action[j] - &self.action[j] * &self.action[i];
                let mut expected = DMatrix::zeros(self.space_dim, self.space_dim);
                for k in 0..n {
                    expected += &self.action[k] * self.descriptor.structure[k][(i, j)];
                }
                worst = worst.max((comm - expected).norm());
            }
        }
        worst
    }

    /// Matrix of the action of an arbitrary algebra vector.
    pub fn act_matrix(&self, xi: &AlgebraVector) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.space_dim, self.space_dim);
        for (i, a) in self.action.iter().enumerate() {
            m += a * xi.coords[i];
        }
        m
    }

    /// `xi · v` for `v` in `V`.
    pub fn act(&self, xi: &AlgebraVector, v: &DVector<f64>) -> DVector<f64> {
        self.act_matrix(xi) * v
    }

    /// Matrix of the group action on `V` obtained by exponentiating the
    /// algebra action.
    pub fn group_act_matrix(&self, xi: &AlgebraVector) -> DMatrix<f64> {
        super::expm(&self.act_matrix(xi))
    }
}

/// Diamond product restricted to a subspace of the algebra.
///
/// For `a` in `V` and `b` in `V*` (as an ambient vector paired by the dot
/// product), the j-th coordinate of the result is `<b, xi_j · a>` over the
/// given subspace basis.
pub fn diamond(
    rep: &Representation,
    a: &DVector<f64>,
    b: &DVector<f64>,
    subspace: &[AlgebraVector],
) -> Result<DVector<f64>, LieError> {
    if a.len() != rep.space_dim || b.len() != rep.space_dim {
        return Err(LieError::DimensionMismatch {
            expected: rep.space_dim,
            got: a.len().max(b.len()),
        });
    }
    Ok(DVector::from_fn(subspace.len(), |j, _| {
        b.dot(&rep.act(&subspace[j], a))
    }))
}
