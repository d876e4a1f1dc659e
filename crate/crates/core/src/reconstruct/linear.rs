//! Closed-form linear inversion from harmonic coefficients.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::forward::{design_matrix, uniform_grid, AngleScan, WaveplateConfig};
use crate::harmonics::{frequency_set, frequency_set_for, project, FrequencySet, HarmonicSpectrum};
use crate::qmat::{
    c, density_from_stokes, from_eigen, hermitian_eigen, hermitian_part, max_abs_diff, trace, ComplexMatrix,
    DensityMatrix, StokesTensor, I,
};

fn require_set(spec: &HarmonicSpectrum, multipliers: &[u32]) -> Result<()> {
    let expected = frequency_set(multipliers)?;
    if spec.frequency_set() != &expected {
        return Err(Error::FrequencySetMismatch(format!(
            "closed-form inversion needs the offset-free set for multipliers {multipliers:?}"
        )));
    }
    Ok(())
}

/// Single-qubit density matrix entries from `A0, A4, B2, B4`. The trace is
/// `2 A0 − 2 A4` and is not forced to one.
pub fn invert_single_qubit(spec: &HarmonicSpectrum) -> Result<ComplexMatrix> {
    require_set(spec, &[1])?;
    let (a0, a4, b2, b4) = (spec.a0, spec.a(4), spec.b(2), spec.b(4));
    let p11 = c(a0 + a4, 0.0);
    let p12 = (c(b2, 0.0) + I * 2.0 * b4) / I;
    let p21 = (c(b2, 0.0) - I * 2.0 * b4) / (-I);
    let p22 = c(a0 - 3.0 * a4, 0.0);
    Ok(ComplexMatrix::from_row_slice(2, 2, &[p11, p12, p21, p22]))
}

/// Two-qubit density matrix from the coincidence spectrum with multipliers
/// `(1, 5)`; `a_k`/`b_k` is the harmonic `k` of the slow-waveplate angle.
pub fn invert_two_qubit(spec: &HarmonicSpectrum) -> Result<ComplexMatrix> {
    require_set(spec, &[1, 5])?;
    let a = |k| c(spec.a(k), 0.0);
    let b = |k| c(spec.b(k), 0.0);
    let a0 = c(spec.a0, 0.0);
    let q = 0.25;

    let mut p = ComplexMatrix::zeros(4, 4);
    p[(0, 0)] = a0 + a(4) + a(20) + a(16) + a(24);
    p[(0, 1)] = -I * b(10) - 2.0 * I * b(14) + 2.0 * b(20) + 2.0 * b(16) + 2.0 * b(24);
    p[(0, 2)] = -2.0 * b(16) + 2.0 * I * b(18) - I * b(2) + 2.0 * b(24) + 2.0 * b(4);
    p[(0, 3)] = q * (8.0 * a(12) + 16.0 * a(16) - 16.0 * I * a(18) - 16.0 * a(24) - 16.0 * I * a(6));
    p[(1, 0)] = I * b(10) + 2.0 * I * b(14) + 2.0 * b(20) + 2.0 * b(16) + 2.0 * b(24);
    p[(1, 1)] = a0 + a(4) - 3.0 * a(20) - 3.0 * a(16) - 3.0 * a(24);
    p[(1, 2)] = q * (-8.0 * a(12) + 16.0 * a(16) - 16.0 * I * a(18) - 16.0 * a(24) + 16.0 * I * a(6));
    p[(1, 3)] = 6.0 * b(16) - 6.0 * I * b(18) - I * b(2) - 6.0 * b(24) + 2.0 * b(4);
    p[(2, 0)] = -2.0 * b(16) - 2.0 * I * b(18) + I * b(2) + 2.0 * b(24) + 2.0 * b(4);
    p[(2, 1)] = q * (-8.0 * a(12) + 16.0 * a(16) + 16.0 * I * a(18) - 16.0 * a(24) - 16.0 * I * a(6));
    p[(2, 2)] = a0 - 3.0 * a(16) + a(20) - 3.0 * a(24) - 3.0 * a(4);
    p[(2, 3)] = -I * b(10) + 6.0 * I * b(14) + 2.0 * b(20) - 6.0 * b(16) - 6.0 * b(24);
    p[(3, 0)] = q * (8.0 * a(12) + 16.0 * a(16) + 16.0 * I * a(18) - 16.0 * a(24) + 16.0 * I * a(6));
    p[(3, 1)] = 6.0 * b(16) + 6.0 * I * b(18) + I * b(2) - 6.0 * b(24) + 2.0 * b(4);
    p[(3, 2)] = I * b(10) - 6.0 * I * b(14) + 2.0 * b(20) - 6.0 * b(16) - 6.0 * b(24);
    p[(3, 3)] = a0 + 9.0 * a(16) - 3.0 * a(20) + 9.0 * a(24) - 3.0 * a(4);

    let herm = max_abs_diff(&p, &p.adjoint());
    if herm > 1e-9 * (1.0 + p.iter().map(|z| z.norm()).fold(0.0, f64::max)) {
        return Err(Error::SelfCheck(format!(
            "two-qubit inversion is not Hermitian ({herm:e})"
        )));
    }
    Ok(p)
}

/// Linear map from Stokes parameters to the coefficient vector
/// `[a0, a_f..., b_f...]`, built by pushing each Pauli basis element through
/// the forward model and projecting onto `fset`.
pub fn stokes_to_spectrum_map(
    waveplates: &[WaveplateConfig],
    fset: &FrequencySet,
    n_samples: usize,
) -> Result<DMatrix<f64>> {
    let grid = uniform_grid(n_samples);
    let design = design_matrix(waveplates, &grid);
    let mut map = DMatrix::zeros(fset.coefficient_count(), design.ncols());
    for j in 0..design.ncols() {
        let column: Vec<f64> = design.column(j).iter().copied().collect();
        let spec = project(&grid, &column, fset)?;
        map.set_column(j, &DVector::from_vec(spec.to_vec()));
    }
    Ok(map)
}

/// Inversion of [`stokes_to_spectrum_map`] by least squares; valid for any
/// register size and waveplate configuration with an injective map.
pub fn invert_numerical(spec: &HarmonicSpectrum, waveplates: &[WaveplateConfig]) -> Result<ComplexMatrix> {
    let fset = spec.frequency_set();
    let map = stokes_to_spectrum_map(waveplates, fset, fset.nyquist_minimum().max(16))?;
    let cols = map.ncols();
    let svd = map.svd(true, true);
    let rank = svd.rank(1e-10 * svd.singular_values.max());
    if rank < cols {
        return Err(Error::FrequencySetMismatch(format!(
            "harmonics determine only {rank} of {cols} Stokes parameters"
        )));
    }
    let s = svd
        .solve(&DVector::from_vec(spec.to_vec()), 1e-12)
        .map_err(|e| Error::SelfCheck(e.to_string()))?;
    let stokes = StokesTensor::new(waveplates.len(), s.iter().copied().collect())?;
    Ok(density_from_stokes(&stokes))
}

/// Hermitize, clamp negative eigenvalues to zero and renormalize.
pub fn project_physical(raw: &ComplexMatrix) -> Result<DensityMatrix> {
    if !raw.is_square() {
        return Err(Error::invalid("raw estimate is not square"));
    }
    let skew = max_abs_diff(raw, &raw.adjoint());
    if skew >= 0.5 {
        return Err(Error::invalid(format!("raw estimate is far from Hermitian ({skew})")));
    }
    let (values, vectors) = hermitian_eigen(&hermitian_part(raw));
    let clamped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("estimate has no positive eigenvalue".into()));
    }
    let normalized: Vec<f64> = clamped.iter().map(|v| v / total).collect();
    DensityMatrix::normalized(from_eigen(&normalized, &vectors))
}

/// Raw linear estimate with unit trace.
#[derive(Debug, Clone)]
pub struct LinearEstimate {
    pub raw: ComplexMatrix,
    /// Divisor `ŝ` applied to the scan values so the raw matrix has unit
    /// trace (≈ counts per sample for counts data, ≈ 1 for probabilities).
    pub normalization: f64,
    /// Whether the tabulated closed-form formulas were used.
    pub closed_form: bool,
}

fn closed_form_applies(waveplates: &[WaveplateConfig]) -> bool {
    let quarter = waveplates
        .iter()
        .all(|w| (w.retardance - FRAC_PI_2).abs() < 1e-12 && w.offset == 0.0);
    let mult: Vec<u32> = waveplates.iter().map(|w| w.multiplier).collect();
    quarter && (mult == [1] || mult == [1, 5])
}

/// Linear inversion of a scan. Counts and probabilities are both accepted;
/// values are divided by `ŝ` chosen so the estimate has unit trace.
pub fn linear_inversion(scan: &AngleScan) -> Result<LinearEstimate> {
    if scan.values().iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("scan is all zeros".into()));
    }
    let fset = frequency_set_for(scan.waveplates())?;
    let spec = project(scan.angles(), scan.values(), &fset)?;
    let closed_form = closed_form_applies(scan.waveplates());
    let raw = if closed_form {
        match scan.n_qubits() {
            1 => invert_single_qubit(&spec)?,
            _ => invert_two_qubit(&spec)?,
        }
    } else {
        invert_numerical(&spec, scan.waveplates())?
    };
    let normalization = trace(&raw).re;
    if !(normalization > 0.0 && normalization.is_finite()) {
        return Err(Error::Degenerate(format!("raw estimate has trace {normalization}")));
    }
    Ok(LinearEstimate {
        raw: raw.unscale(normalization),
        normalization,
        closed_form,
    })
}
