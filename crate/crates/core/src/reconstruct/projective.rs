//! Standard projective tomography in the `{H, V, D, L}^{⊗n}` bases, used as
//! an independent cross-check of the Fourier method.

use nalgebra::DMatrix;

use super::mle::{fit_model, MeasurementModel, MleConfig};
use super::{Method, ReconstructionResult};
use crate::error::{Error, Result};
use crate::forward::{poisson_counts, ValueKind};
use crate::qmat::{pauli_basis, states, trace_product, ComplexMatrix, DensityMatrix, Ket};
use crate::seeding::stream_rng;

fn single_qubit_projectors() -> [Ket; 4] {
    [states::h(), states::v(), states::d(), states::l()]
}

/// Projector labels in measurement order, e.g. `"HD"`.
pub fn projector_labels(n_qubits: usize) -> Vec<String> {
    (0..1usize << (2 * n_qubits))
        .map(|k| {
            crate::qmat::stokes_indices(k, n_qubits)
                .iter()
                .map(|&i| ['H', 'V', 'D', 'L'][i])
                .collect()
        })
        .collect()
}

fn projectors(n_qubits: usize) -> Vec<ComplexMatrix> {
    let single = single_qubit_projectors();
    (0..1usize << (2 * n_qubits))
        .map(|k| {
            let kets: Vec<Ket> = crate::qmat::stokes_indices(k, n_qubits)
                .iter()
                .map(|&i| single[i].clone())
                .collect();
            let psi = states::product(&kets);
            &psi * psi.adjoint()
        })
        .collect()
}

/// Measurement model with `p_k = Tr[ρ Π_k]`.
pub fn projective_model(n_qubits: usize) -> MeasurementModel {
    let paulis = pauli_basis(n_qubits);
    let d = (1usize << n_qubits) as f64;
    let proj = projectors(n_qubits);
    let design = DMatrix::from_fn(proj.len(), paulis.len(), |k, j| {
        trace_product(&proj[k], &paulis[j]).re / d
    });
    MeasurementModel::new(n_qubits, design).expect("4^n projectors")
}

/// Counts (or probabilities) for every projector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveData {
    pub n_qubits: usize,
    pub values: Vec<f64>,
    pub kind: ValueKind,
}

impl ProjectiveData {
    pub fn new(n_qubits: usize, values: Vec<f64>, kind: ValueKind) -> Result<Self> {
        let expected = 1usize << (2 * n_qubits);
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("projective values must be non-negative"));
        }
        Ok(Self { n_qubits, values, kind })
    }
}

/// Simulated projective measurement of `rho`: Poisson counts at
/// `intensity` per basis, or exact probabilities when `intensity` is `None`.
pub fn simulate_projective(rho: &DensityMatrix, intensity: Option<f64>, seed: u64) -> Result<ProjectiveData> {
    let model = projective_model(rho.n_qubits());
    let p: Vec<f64> = model.probabilities(rho).iter().map(|x| x.max(0.0)).collect();
    match intensity {
        Some(i) => {
            let mut rng = stream_rng(seed, 0);
            ProjectiveData::new(rho.n_qubits(), poisson_counts(&p, i, &mut rng)?, ValueKind::Counts)
        }
        None => ProjectiveData::new(rho.n_qubits(), p, ValueKind::Probability),
    }
}

/// Same cost and optimizer as the Fourier reconstruction, with projector
/// probabilities as `p_fit`.
pub fn reconstruct_projective(data: &ProjectiveData, config: &MleConfig) -> Result<ReconstructionResult> {
    let model = projective_model(data.n_qubits);
    let mut out = fit_model(&model, &data.values, data.kind, config)?;
    out.method = Method::Projective;
    Ok(out)
}

/// Simulate and reconstruct a two-qubit projective tomography run.
pub fn projective_tomography(
    rho_true: &DensityMatrix,
    intensity: Option<f64>,
    seed: u64,
) -> Result<ReconstructionResult> {
    if rho_true.dim() != 4 {
        return Err(Error::Dimension {
            expected: 4,
            actual: rho_true.dim(),
        });
    }
    let data = simulate_projective(rho_true, intensity, seed)?;
    reconstruct_projective(&data, &MleConfig::default())
}
