//! Numerical Hamiltonian tubes for cotangent-lifted Lie group actions.
//!
//! This crate constructs explicit symplectic normal forms (Marle–Guillemin–
//! Sternberg models) around group orbits in cotangent bundles, for concrete
//! matrix groups:
//!
//! - [`lie`] — Lie group/algebra kernels for SO(3), SL(2,R) and custom matrix
//!   groups: brackets, exponentials, adjoints, the right-trivialized
//!   differential of `exp`, pairings and diamond products.
//! - [`splitting`] — the adapted splitting `g = g_mu + o + l + n` that
//!   block-diagonalizes the form `Omega^mu(x,y) = -<mu,[x,y]>`, plus the
//!   symplectic-slice data built from it.
//! - [`specialfn`] — the scalar kernels behind tube scaling factors: the
//!   implicit function `E` with `exp(-xE) = 1 - xE + x^2/2`, the
//!   `arcsin/arcsinh` ratio `F`, and the generic scaling-factor solver.
//! - [`gtube`] — simple and restricted G-tubes on `T*G`: closed forms for
//!   SO(3) and SL(2,R), a generic two-dimensional path, and the Newton-based
//!   restricted tube.
//! - [`cotangent`] — the cotangent-bundle tubes proper: the Gamma map, the
//!   zero-section-centered tube, the general tube, the explicit SO(3)-on-T*R3
//!   tube, numeric inversion and the momentum-level membership predicate.
//! - [`verify`] — a finite-difference verification engine that certifies the
//!   symplectomorphism, equivariance, momentum and linearization contracts at
//!   sampled points and emits machine-readable reports.
//!
//! All operations are pure functions of immutable inputs; constructed objects
//! (descriptors, splittings, tubes, models) are safe to share across threads.
//!
//! ```
//! use hamtube_core::gtube::{momentum_left, so3_simple_tube};
//! use hamtube_core::lie::{so3, AlgebraVector, CoalgebraVector, GroupElement};
//!
//! // the tube for T*SO(3) at mu = (0, 0, 1): (g, nu, lambda) -> T*SO(3)
//! let mu = CoalgebraVector::from_slice(&so3(), &[0.0, 0.0, 1.0]);
//! let tube = so3_simple_tube(&mu)?;
//! let out = tube.eval(
//!     &GroupElement::identity(so3()),
//!     &tube.embed_isotropy_covector(&nalgebra::DVector::from_column_slice(&[0.1])),
//!     &AlgebraVector::from_slice(&so3(), &[0.2, 0.1, 0.0]),
//! )?;
//! // the lifted-left-action momentum is conserved: J_L = nu + mu
//! let j = momentum_left(&out)?;
//! assert!((j.coords - mu.coords * 1.1).norm() < 1e-12);
//! # Ok::<(), hamtube_core::gtube::TubeError>(())
//! ```

pub mod cotangent;
pub mod gtube;
pub mod lie;
pub mod linalg;
pub mod specialfn;
pub mod splitting;
pub mod verify;

pub use lie::{AlgebraVector, CoalgebraVector, GroupDescriptor, GroupElement, Representation};
