//! Density-matrix reconstruction: closed-form linear inversion,
//! least-squares MLE over a Cholesky parametrization, and a projective
//! tomography reference.

mod linear;
mod mle;
mod optim;
mod projective;

pub use linear::{
    invert_numerical, invert_single_qubit, invert_two_qubit, linear_inversion, project_physical,
    stokes_to_spectrum_map, LinearEstimate,
};
pub use mle::{fit_model, mle_fit, InitialGuess, MeasurementModel, MleConfig};
pub use projective::{
    projective_model, projective_tomography, projector_labels, reconstruct_projective, simulate_projective,
    ProjectiveData,
};

use crate::error::{Error, Result};
use crate::forward::AngleScan;
use crate::qmat::DensityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linear,
    Mle,
    Projective,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Linear => "linear",
            Method::Mle => "mle",
            Method::Projective => "projective",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Method::Linear),
            "mle" => Ok(Method::Mle),
            "projective" => Ok(Method::Projective),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    pub method: Method,
    /// `Σ (measured − fit)²` at the returned state, in the data's units.
    pub cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Fitted intensity scale for counts data.
    pub scale: Option<f64>,
    /// Divisor applied before linear inversion.
    pub normalization: Option<f64>,
}

/// Linear inversion followed by projection onto physical states.
pub fn linear_reconstruct(scan: &AngleScan) -> Result<ReconstructionResult> {
    let est = linear_inversion(scan)?;
    let rho = project_physical(&est.raw)?;
    let model = MeasurementModel::for_scan(scan);
    let p = model.probabilities(&rho);
    let scale = match scan.kind() {
        crate::forward::ValueKind::Counts => est.normalization,
        crate::forward::ValueKind::Probability => 1.0,
    };
    let cost = scan.values().iter().zip(&p).map(|(y, p)| (y - scale * p).powi(2)).sum();
    Ok(ReconstructionResult {
        rho,
        method: Method::Linear,
        cost,
        initial_cost: cost,
        iterations: 0,
        converged: true,
        scale: (scan.kind() == crate::forward::ValueKind::Counts).then_some(scale),
        normalization: Some(est.normalization),
    })
}

/// Reconstruct with the requested method.
pub fn reconstruct(scan: &AngleScan, method: Method, config: &MleConfig) -> Result<ReconstructionResult> {
    match method {
        Method::Linear => linear_reconstruct(scan),
        Method::Mle => mle_fit(scan, config),
        Method::Projective => Err(Error::invalid("angle scans cannot be reconstructed projectively")),
    }
}
