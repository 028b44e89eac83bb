//! Built-in group descriptors and the JSON descriptor format.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

use super::{GroupDescriptor, LieError, MembershipKind, PairingKind};

/// SO(3) with the hat-map basis: coordinates are axis vectors in R^3, the
/// bracket is the cross product, and the pairing is the dot product.
pub fn so3() -> Arc<GroupDescriptor> {
    static CACHE: OnceLock<Arc<GroupDescriptor>> = OnceLock::new();
    CACHE
        .get_or_init(|| {
            let basis = vec![
                DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]),
                DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0]),
                DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            ];
            GroupDescriptor::new(
                "so3",
                basis,
                PairingKind::DualCoordinates,
                MembershipKind::SpecialOrthogonal,
                1e-9,
                // a(xi) = |xi|^2 realizes ad^3 + a ad = 0
                Some(DMatrix::identity(3, 3)),
            )
            .expect("so3 descriptor")
        })
        .clone()
}

/// SL(2,R) with basis (D, U, L):
/// `D = [[1,0],[0,-1]]`, `U = [[0,1],[0,0]]`, `L = [[0,0],[1,0]]`,
/// and the bilinear form `<A,B> = -2 trace(AB)` exposed as the matrix
/// identification of covectors.
pub fn sl2r() -> Arc<GroupDescriptor> {
    static CACHE: OnceLock<Arc<GroupDescriptor>> = OnceLock::new();
    CACHE
        .get_or_init(|| {
            let basis = vec![
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
                DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]),
            ];
            // ad_xi^2 eta = <xi,eta> xi - <xi,xi> eta for the trace form, so
            // ad^3 + a ad = 0 with a(xi) = <xi,xi> = xi^T P xi.
            let trace_gram = {
                let mut g = DMatrix::zeros(3, 3);
                for (i, a) in basis.iter().enumerate() {
                    for (j, b) in basis.iter().enumerate() {
                        g[(i, j)] = -2.0 * (a * b).trace();
                    }
                }
                g
            };
            GroupDescriptor::new(
                "sl2r",
                basis,
                PairingKind::TraceForm { scale: -2.0 },
                MembershipKind::UnitDeterminant,
                1e-9,
                Some(trace_gram),
            )
            .expect("sl2r descriptor")
        })
        .clone()
}

/// JSON-loadable descriptor document.
///
/// ```json
/// {
///   "name": "so3",
///   "basis": [[[0,0,0],[0,0,-1],[0,1,0]], ...],
///   "pairing": {"kind": "dual"},
///   "membership": {"kind": "special_orthogonal"},
///   "tolerance": 1e-9
/// }
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescriptorConfig {
    pub name: String,
    pub basis: Vec<Vec<Vec<f64>>>,
    pub pairing: PairingConfig,
    pub membership: MembershipConfig,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairingConfig {
    Dual,
    TraceForm { scale: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MembershipConfig {
    SpecialOrthogonal,
    UnitDeterminant,
}

impl DescriptorConfig {
    pub fn build(&self) -> Result<Arc<GroupDescriptor>, LieError> {
        let basis: Vec<DMatrix<f64>> = self
            .basis
            .iter()
            .map(|rows| {
                let n = rows.len();
                let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
                if flat.len() != n * n {
                    return Err(LieError::InvalidDescriptor(
                        "basis matrices must be square".into(),
                    ));
                }
                Ok(DMatrix::from_row_slice(n, n, &flat))
            })
            .collect::<Result<_, _>>()?;
        let pairing = match self.pairing {
            PairingConfig::Dual => PairingKind::DualCoordinates,
            PairingConfig::TraceForm { scale } => PairingKind::TraceForm { scale },
        };
        let membership = match self.membership {
            MembershipConfig::SpecialOrthogonal => MembershipKind::SpecialOrthogonal,
            MembershipConfig::UnitDeterminant => MembershipKind::UnitDeterminant,
        };
        GroupDescriptor::new(&self.name, basis, pairing, membership, self.tolerance, None)
    }

    /// Resolve a group by name: the built-ins need no file, anything else is
    /// treated as a path to a descriptor JSON document.
    pub fn resolve(name_or_path: &str) -> Result<Arc<GroupDescriptor>, LieError> {
        match name_or_path {
            "so3" => Ok(so3()),
            "sl2r" => Ok(sl2r()),
            path => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    LieError::InvalidDescriptor(format!("cannot read descriptor {path}: {e}"))
                })?;
                let cfg: DescriptorConfig = serde_json::from_str(&text).map_err(|e| {
                    LieError::InvalidDescriptor(format!("cannot parse descriptor {path}: {e}"))
                })?;
                cfg.build()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_structure_constants_are_certified() {
        assert!(so3().jacobi_residual() < 1e-12);
        assert!(sl2r().jacobi_residual() < 1e-12);
    }

    #[test]
    fn sl2_gram_is_nondegenerate() {
        let g = sl2r();
        let gram = g.trace_gram.as_ref().unwrap();
        assert!(gram.determinant().abs() > 1.0);
    }

    #[test]
    fn descriptor_json_round_trip() {
        let cfg = DescriptorConfig {
            name: "so3-custom".to_string(),
            basis: vec![
                vec![
                    vec![0.0, 0.0, 0.0],
                    vec![0.0, 0.0, -1.0],
                    vec![0.0, 1.0, 0.0],
                ],
                vec![
                    vec![0.0, 0.0, 1.0],
                    vec![0.0, 0.0, 0.0],
                    vec![-1.0, 0.0, 0.0],
                ],
                vec![
                    vec![0.0, -1.0, 0.0],
                    vec![1.0, 0.0, 0.0],
                    vec![0.0, 0.0, 0.0],
                ],
            ],
            pairing: PairingConfig::Dual,
            membership: MembershipConfig::SpecialOrthogonal,
            tolerance: 1e-9,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: DescriptorConfig = serde_json::from_str(&text).unwrap();
        let desc = back.build().unwrap();
        assert_eq!(desc.dim, 3);
        assert!(desc.jacobi_residual() < 1e-12);
    }
}
