//! Lie group/algebra kernels for concrete matrix groups.
//!
//! A [`GroupDescriptor`] pins down a matrix group by an ordered basis of its
//! Lie algebra, the induced structure constants, a pairing convention for the
//! dual, and membership tolerances for the group's defining equations.
//! Algebra and coalgebra elements are coordinate vectors in the declared
//! basis and its dual basis; all operations below are pure.

mod builtin;
mod dexp;
mod exp;
mod rep;

pub use builtin::{sl2r, so3, DescriptorConfig};
pub use dexp::dexp_right;
pub use exp::{expm, rodrigues_so3};
pub use rep::{diamond, Representation};

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error)]
pub enum LieError {
    #[error("descriptor mismatch: operands belong to different groups ({0} vs {1})")]
    DescriptorMismatch(String, String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not a valid {group} element: membership residual {residual:.3e} exceeds {tolerance:.3e}")]
    InvalidGroupElement {
        group: String,
        residual: f64,
        tolerance: f64,
    },
    #[error("descriptor validation failed: {0}")]
    InvalidDescriptor(String),
    #[error("vector does not lie in the required subspace (residual {residual:.3e})")]
    NotInSubspace { residual: f64 },
}

/// How coalgebra coordinates pair with algebra coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum PairingKind {
    /// `<mu, xi> = sum_i mu_i xi_i` in the declared basis and its dual basis.
    DualCoordinates,
    /// Dual coordinates as above, plus an identification of matrices with
    /// covectors through the bilinear form `<A,B> = scale * trace(A B)`.
    TraceForm { scale: f64 },
}

/// Defining equations a matrix must satisfy to belong to the group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MembershipKind {
    /// `G^T G = I` and `det G = 1`.
    SpecialOrthogonal,
    /// `det G = 1`.
    UnitDeterminant,
}

/// A concrete matrix Lie group with a declared algebra basis.
#[derive(Debug, Clone)]
pub struct GroupDescriptor {
    pub name: String,
    /// Dimension of the Lie algebra.
    pub dim: usize,
    /// Size of the realizing matrices.
    pub matrix_size: usize,
    /// Ordered basis of the algebra as real matrices.
    pub basis: Vec<DMatrix<f64>>,
    /// Structure constants `c[k][(i,j)]` with `[B_i, B_j] = sum_k c^k_ij B_k`.
    pub structure: Vec<DMatrix<f64>>,
    pub pairing: PairingKind,
    pub membership: MembershipKind,
    /// Tolerance for the group's defining equations.
    pub tolerance: f64,
    /// Optional quadratic form `A` with `ad_xi^3 + (xi^T A xi) ad_xi = 0`;
    /// enables closed recurrences for `dexp` and tube scaling factors.
    pub ad_cubed_form: Option<DMatrix<f64>>,
    /// Gram matrix of the trace form on the basis (when `pairing` declares one).
    pub trace_gram: Option<DMatrix<f64>>,
    /// Pseudo-inverse data for expressing algebra matrices in coordinates.
    basis_flat: DMatrix<f64>,
}

impl GroupDescriptor {
    /// Build a descriptor from a basis, deriving structure constants.
    pub fn new(
        name: &str,
        basis: Vec<DMatrix<f64>>,
        pairing: PairingKind,
        membership: MembershipKind,
        tolerance: f64,
        ad_cubed_form: Option<DMatrix<f64>>,
    ) -> Result<Arc<Self>, LieError> {
        let dim = basis.len();
        if dim == 0 {
            return Err(LieError::InvalidDescriptor("empty basis".into()));
        }
        let m = basis[0].nrows();
        for b in &basis {
            if b.nrows() != m || b.ncols() != m {
                return Err(LieError::InvalidDescriptor(
                    "basis matrices must be square and of equal size".into(),
                ));
            }
        }
        // Flatten basis matrices to columns for coordinate extraction.
        let mut basis_flat = DMatrix::zeros(m * m, dim);
        for (j, b) in basis.iter().enumerate() {
            for (idx, &val) in b.iter().enumerate() {
                basis_flat[(idx, j)] = val;
            }
        }
        if linalg::rank(&basis_flat, linalg::RANK_RTOL) != dim {
            return Err(LieError::InvalidDescriptor(
                "basis matrices are linearly dependent".into(),
            ));
        }

        let trace_gram = match pairing {
            PairingKind::TraceForm { scale } => {
                let mut g = DMatrix::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        g[(i, j)] = scale * (&basis[i] * &basis[j]).trace();
                    }
                }
                if linalg::rank(&g, linalg::RANK_RTOL) != dim {
                    return Err(LieError::InvalidDescriptor(
                        "declared bilinear form is degenerate on the basis".into(),
                    ));
                }
                Some(g)
            }
            PairingKind::DualCoordinates => None,
        };

        let mut desc = GroupDescriptor {
            name: name.to_string(),
            dim,
            matrix_size: m,
            basis,
            structure: Vec::new(),
            pairing,
            membership,
            tolerance,
            ad_cubed_form,
            trace_gram,
            basis_flat,
        };

        // Structure constants from matrix commutators of the basis.
        let mut structure = vec![DMatrix::zeros(dim, dim); dim];
        for i in 0..dim {
            for j in 0..dim {
                let comm = &desc.basis[i] * &desc.basis[j] - &desc.basis[j] * &desc.basis[i];
                let coords = desc.coords_of_matrix_checked(&comm)?;
                for k in 0..dim {
                    structure[k][(i, j)] = coords[k];
                }
            }
        }
        desc.structure = structure;

        let jac = desc.jacobi_residual();
        if jac > 1e-12 {
            return Err(LieError::InvalidDescriptor(format!(
                "structure constants violate the Jacobi identity (residual {jac:.3e})"
            )));
        }
        Ok(Arc::new(desc))
    }

    /// Max residual of antisymmetry and the Jacobi identity over basis triples.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst =
                        worst.max((self.structure[k][(i, j)] + self.structure[k][(j, i)]).abs());
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut total = DVector::zeros(n);
                    for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                        // [[a,b],c]
                        let inner = self.bracket_basis(a, b);
                        total += self.bracket_vec(&inner, &Self::unit(n, c));
                    }
                    worst = worst.max(total.amax());
                }
            }
        }
        worst
    }

    fn unit(n: usize, k: usize) -> DVector<f64> {
        DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 })
    }

    fn bracket_basis(&self, i: usize, j: usize) -> DVector<f64> {
        DVector::from_fn(self.dim, |k, _| self.structure[k][(i, j)])
    }

    fn bracket_vec(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        DVector::from_fn(n, |k, _| {
            let mut s = 0.0;
            for i in 0..n {
                if x[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    s += self.structure[k][(i, j)] * x[i] * y[j];
                }
            }
            s
        })
    }

    /// Coordinates of an algebra matrix in the declared basis (least squares).
    pub fn coords_of_matrix(&self, m: &DMatrix<f64>) -> DVector<f64> {
        let flat = DVector::from_iterator(m.nrows() * m.ncols(), m.iter().cloned());
        linalg::lstsq(&self.basis_flat, &flat)
    }

    fn coords_of_matrix_checked(&self, m: &DMatrix<f64>) -> Result<DVector<f64>, LieError> {
        let coords = self.coords_of_matrix(m);
        let rebuilt = self.matrix_of_coords(&coords);
        let residual = (m - rebuilt).norm();
        let scale = m.norm().max(1.0);
        if residual > 1e-9 * scale {
            return Err(LieError::NotInSubspace {
                residual: residual / scale,
            });
        }
        Ok(coords)
    }

    /// The matrix `sum_i x_i B_i`.
    pub fn matrix_of_coords(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.matrix_size, self.matrix_size);
        for (i, b) in self.basis.iter().enumerate() {
            m += b * x[i];
        }
        m
    }

    /// Membership residual of `g` under the group's defining equations.
    pub fn membership_residual(&self, g: &DMatrix<f64>) -> f64 {
        match self.membership {
            MembershipKind::SpecialOrthogonal => {
                let m = self.matrix_size;
                let ortho = (g.transpose() * g - DMatrix::identity(m, m)).norm();
                let det = (g.determinant() - 1.0).abs();
                ortho.max(det)
            }
            MembershipKind::UnitDeterminant => (g.determinant() - 1.0).abs(),
        }
    }

    /// Convert a matrix into a coalgebra vector through the declared bilinear
    /// form (trace-form groups only): the covector `<M, .>`.
    pub fn coalgebra_from_matrix(
        self: &Arc<Self>,
        m: &DMatrix<f64>,
    ) -> Result<CoalgebraVector, LieError> {
        let gram = self.trace_gram.as_ref().ok_or_else(|| {
            LieError::InvalidDescriptor(format!(
                "group {} declares no bilinear-form identification",
                self.name
            ))
        })?;
        let coords = self.coords_of_matrix_checked(m)?;
        Ok(CoalgebraVector::new(self.clone(), gram * coords))
    }

    /// Matrix realizing a coalgebra vector through the declared bilinear form.
    pub fn matrix_from_coalgebra(
        self: &Arc<Self>,
        mu: &CoalgebraVector,
    ) -> Result<DMatrix<f64>, LieError> {
        let gram = self.trace_gram.as_ref().ok_or_else(|| {
            LieError::InvalidDescriptor(format!(
                "group {} declares no bilinear-form identification",
                self.name
            ))
        })?;
        let coords = linalg::lstsq(gram, &mu.coords);
        Ok(self.matrix_of_coords(&coords))
    }
}

fn check_same(a: &Arc<GroupDescriptor>, b: &Arc<GroupDescriptor>) -> Result<(), LieError> {
    if Arc::ptr_eq(a, b) || a.name == b.name {
        Ok(())
    } else {
        Err(LieError::DescriptorMismatch(a.name.clone(), b.name.clone()))
    }
}

/// Element of the Lie algebra in declared-basis coordinates.
#[derive(Debug, Clone)]
pub struct AlgebraVector {
    pub descriptor: Arc<GroupDescriptor>,
    pub coords: DVector<f64>,
}

impl AlgebraVector {
    pub fn new(descriptor: Arc<GroupDescriptor>, coords: DVector<f64>) -> Self {
        assert_eq!(descriptor.dim, coords.len(), "algebra coordinate length");
        AlgebraVector { descriptor, coords }
    }

    pub fn zero(descriptor: Arc<GroupDescriptor>) -> Self {
        let n = descriptor.dim;
        AlgebraVector::new(descriptor, DVector::zeros(n))
    }

    pub fn from_slice(descriptor: &Arc<GroupDescriptor>, coords: &[f64]) -> Self {
        AlgebraVector::new(descriptor.clone(), DVector::from_column_slice(coords))
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        self.descriptor.matrix_of_coords(&self.coords)
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

/// Element of the dual algebra in dual-basis coordinates.
#[derive(Debug, Clone)]
pub struct CoalgebraVector {
    pub descriptor: Arc<GroupDescriptor>,
    pub coords: DVector<f64>,
}

impl CoalgebraVector {
    pub fn new(descriptor: Arc<GroupDescriptor>, coords: DVector<f64>) -> Self {
        assert_eq!(descriptor.dim, coords.len(), "coalgebra coordinate length");
        CoalgebraVector { descriptor, coords }
    }

    pub fn zero(descriptor: Arc<GroupDescriptor>) -> Self {
        let n = descriptor.dim;
        CoalgebraVector::new(descriptor, DVector::zeros(n))
    }

    pub fn from_slice(descriptor: &Arc<GroupDescriptor>, coords: &[f64]) -> Self {
        CoalgebraVector::new(descriptor.clone(), DVector::from_column_slice(coords))
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

/// Group element as a realizing matrix.
#[derive(Debug, Clone)]
pub struct GroupElement {
    pub descriptor: Arc<GroupDescriptor>,
    pub matrix: DMatrix<f64>,
}

impl GroupElement {
    /// Validate membership and wrap the matrix.
    pub fn new(descriptor: Arc<GroupDescriptor>, matrix: DMatrix<f64>) -> Result<Self, LieError> {
        let residual = descriptor.membership_residual(&matrix);
        if residual > descriptor.tolerance {
            return Err(LieError::InvalidGroupElement {
                group: descriptor.name.clone(),
                residual,
                tolerance: descriptor.tolerance,
            });
        }
        Ok(GroupElement { descriptor, matrix })
    }

    pub fn identity(descriptor: Arc<GroupDescriptor>) -> Self {
        let m = descriptor.matrix_size;
        GroupElement {
            descriptor,
            matrix: DMatrix::identity(m, m),
        }
    }

    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement, LieError> {
        check_same(&self.descriptor, &other.descriptor)?;
        Ok(GroupElement {
            descriptor: self.descriptor.clone(),
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn inverse(&self) -> GroupElement {
        let inv = match self.descriptor.membership {
            MembershipKind::SpecialOrthogonal => self.matrix.transpose(),
            MembershipKind::UnitDeterminant => self
                .matrix
                .clone()
                .try_inverse()
                .expect("group element is invertible"),
        };
        GroupElement {
            descriptor: self.descriptor.clone(),
            matrix: inv,
        }
    }

    pub fn membership_residual(&self) -> f64 {
        self.descriptor.membership_residual(&self.matrix)
    }
}

/// Dual pairing `<mu, xi>`.
pub fn pairing(mu: &CoalgebraVector, xi: &AlgebraVector) -> f64 {
    mu.coords.dot(&xi.coords)
}

/// Lie bracket from the structure constants.
pub fn bracket(x: &AlgebraVector, y: &AlgebraVector) -> Result<AlgebraVector, LieError> {
    check_same(&x.descriptor, &y.descriptor)?;
    Ok(AlgebraVector::new(
        x.descriptor.clone(),
        x.descriptor.bracket_vec(&x.coords, &y.coords),
    ))
}

/// Coadjoint operator with the convention `<coad(xi, mu), eta> = <mu, [xi, eta]>`.
pub fn coad(xi: &AlgebraVector, mu: &CoalgebraVector) -> Result<CoalgebraVector, LieError> {
    check_same(&xi.descriptor, &mu.descriptor)?;
    let n = xi.descriptor.dim;
    let out = DVector::from_fn(n, |j, _| {
        let mut s = 0.0;
        for i in 0..n {
            if xi.coords[i] == 0.0 {
                continue;
            }
            for k in 0..n {
                s += mu.coords[k] * xi.descriptor.structure[k][(i, j)] * xi.coords[i];
            }
        }
        s
    });
    Ok(CoalgebraVector::new(mu.descriptor.clone(), out))
}

/// Matrix of the adjoint representation of `g` in the declared basis.
pub fn ad_matrix(g: &GroupElement) -> DMatrix<f64> {
    let desc = &g.descriptor;
    let n = desc.dim;
    let inv = g.inverse();
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let conj = &g.matrix * &desc.basis[j] * &inv.matrix;
        let coords = desc.coords_of_matrix(&conj);
        a.set_column(j, &coords);
    }
    a
}

/// Adjoint action `Ad(g) xi` (matrix conjugation in coordinates).
pub fn ad(g: &GroupElement, xi: &AlgebraVector) -> Result<AlgebraVector, LieError> {
    check_same(&g.descriptor, &xi.descriptor)?;
    Ok(AlgebraVector::new(
        xi.descriptor.clone(),
        ad_matrix(g) * &xi.coords,
    ))
}

/// Coadjoint pairing-dual `Adstar(g)` with `<Adstar(g) nu, xi> = <nu, Ad(g) xi>`.
pub fn adstar(g: &GroupElement, nu: &CoalgebraVector) -> Result<CoalgebraVector, LieError> {
    check_same(&g.descriptor, &nu.descriptor)?;
    Ok(CoalgebraVector::new(
        nu.descriptor.clone(),
        ad_matrix(g).transpose() * &nu.coords,
    ))
}

/// Group exponential of the algebra vector.
pub fn exp(xi: &AlgebraVector) -> GroupElement {
    let m = expm(&xi.matrix());
    GroupElement {
        descriptor: xi.descriptor.clone(),
        matrix: m,
    }
}
