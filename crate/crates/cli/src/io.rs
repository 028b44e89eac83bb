//! JSON schemas for CLI inputs and outputs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use hamtube_core::cotangent::ModelRadii;
use hamtube_core::gtube::TubeRadii;

/// A command failure with its process exit code.
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn schema(msg: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: msg.into(),
        }
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: msg.into(),
        }
    }
    pub fn verification(msg: impl Into<String>) -> Self {
        CliError {
            code: 4,
            message: msg.into(),
        }
    }
    pub fn internal(msg: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: msg.into(),
        }
    }
}

/// Classify core errors onto exit codes.
pub fn classify(err: hamtube_core::gtube::TubeError) -> CliError {
    use hamtube_core::gtube::TubeError;
    match &err {
        TubeError::DomainExit(_) => CliError::domain(err.to_string()),
        TubeError::InputSubspace { .. } => CliError::schema(err.to_string()),
        _ => CliError::internal(err.to_string()),
    }
}

pub fn classify_model(err: hamtube_core::cotangent::ModelError) -> CliError {
    use hamtube_core::cotangent::ModelError;
    match &err {
        ModelError::DomainExit(_) => CliError::domain(err.to_string()),
        ModelError::InversionDiverged { .. } => CliError::domain(err.to_string()),
        ModelError::Inconsistent(_) => CliError::schema(err.to_string()),
        _ => CliError::internal(err.to_string()),
    }
}

/// Model configuration document (`--model`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_group")]
    pub group: String,
    /// Base point of the explicit `T*R^3` model.
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    /// Momentum covector (dual coordinates) for tube families.
    #[serde(default)]
    pub mu: Option<Vec<f64>>,
    /// Momentum entered as a matrix through the declared bilinear form.
    #[serde(default)]
    pub mu_matrix: Option<Vec<Vec<f64>>>,
    /// Generator of the isotropy circle (restricted tubes, splittings).
    #[serde(default)]
    pub h_generator: Option<Vec<f64>>,
    #[serde(default)]
    pub radii: Option<RadiiConfig>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_group() -> String {
    "so3".to_string()
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RadiiConfig {
    #[serde(default = "default_radius")]
    pub nu: f64,
    #[serde(default = "default_radius")]
    pub lambda: f64,
    #[serde(default = "default_radius")]
    pub a: f64,
    #[serde(default = "default_radius")]
    pub b: f64,
    #[serde(default = "default_radius")]
    pub eps: f64,
}

fn default_radius() -> f64 {
    0.3
}

impl RadiiConfig {
    pub fn tube_radii(&self) -> TubeRadii {
        TubeRadii {
            nu: self.nu,
            lambda: self.lambda,
            eps: self.eps,
        }
    }
    pub fn model_radii(&self) -> ModelRadii {
        ModelRadii {
            nu: self.nu,
            lambda: self.lambda,
            a: self.a,
            b: self.b,
        }
    }
}

/// Tube-domain point (`--point`): group element plus coordinates. Fields not
/// used by a tube kind are ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointConfig {
    /// Group element as a matrix; identity when omitted.
    #[serde(default)]
    pub g: Option<Vec<Vec<f64>>>,
    /// Full dual coordinates of `nu` (must lie in the embedded isotropy dual).
    #[serde(default)]
    pub nu: Option<Vec<f64>>,
    /// Abstract isotropy-dual coordinates (embedded by the tube).
    #[serde(default)]
    pub nu_coords: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda: Option<Vec<f64>>,
    /// Coordinates of `eps` on the `l` basis (restricted tubes).
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    /// Scalar coordinates of the explicit `T*R^3` model.
    #[serde(default)]
    pub nu_scalar: Option<f64>,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
}

/// A `T*R^3` phase point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct CotangentPointOut {
    pub g: Vec<Vec<f64>>,
    pub nu: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct PhaseOut {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct InvertOut {
    pub g: Vec<Vec<f64>>,
    pub nu: f64,
    pub a: f64,
    pub b: f64,
    pub round_trip_residual: f64,
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
    if flat.len() != n * n {
        return Err(CliError::schema("matrix rows must be square"));
    }
    Ok(DMatrix::from_row_slice(n, n, &flat))
}

pub fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Read a JSON value from either an inline string or a file path.
pub fn read_json_arg<T: for<'de> Deserialize<'de>>(arg: &str) -> Result<T, CliError> {
    let text = if arg.trim_start().starts_with('{') || arg.trim_start().starts_with('[') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg)
            .map_err(|e| CliError::schema(format!("cannot read {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::schema(format!("invalid JSON: {e}")))
}

pub fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::internal(format!("serialization failed: {e}")))?;
    println!("{text}");
    Ok(())
}
