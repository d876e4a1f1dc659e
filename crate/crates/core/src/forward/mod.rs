//! Forward model of the rotating-waveplate polarimeter.
//!
//! The independent variable is the mechanical angle `θ` of the slowest
//! waveplate. Mode `m` sits at `r_m·θ + offset_m`. On the Bloch sphere the
//! fast axis sweeps at `2θ`, tracing `cos(2θ) σ_z + sin(2θ) σ_x`.

mod scan;
mod source;

pub use scan::{nyquist_minimum, poisson_counts, sample_counts, simulate_scan, uniform_grid, AngleScan, ValueKind};
pub use source::{
    apply_virtual_waveplate, qd_state, time_bin_grid, virtual_waveplate, werner_psi_minus, EmittedState, SourceModel,
    HBAR_UEV_PS,
};

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{
    c, pauli, stokes_from_density, stokes_indices, tensor, trace_product, ComplexMatrix, DensityMatrix, I,
};

/// One rotating waveplate in front of a fixed horizontal polarizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveplateConfig {
    /// Phase delay between fast and slow axes, radians.
    pub retardance: f64,
    /// Rotation rate relative to the slowest waveplate.
    pub multiplier: u32,
    /// Mechanical angle offset, radians.
    pub offset: f64,
}

impl WaveplateConfig {
    pub fn quarter(multiplier: u32) -> Self {
        Self {
            retardance: FRAC_PI_2,
            multiplier,
            offset: 0.0,
        }
    }

    /// Mechanical angle of this waveplate when the slowest one is at `theta`.
    pub fn angle(&self, theta: f64) -> f64 {
        self.multiplier as f64 * theta + self.offset
    }
}

/// Quarter waveplates at rates `1, 5, 25, ...`.
pub fn standard_waveplates(n_qubits: usize) -> Vec<WaveplateConfig> {
    (0..n_qubits)
        .map(|m| WaveplateConfig::quarter(5u32.pow(m as u32)))
        .collect()
}

pub fn validate_waveplates(waveplates: &[WaveplateConfig]) -> Result<()> {
    if waveplates.is_empty() || waveplates.len() > crate::qmat::MAX_QUBITS {
        return Err(Error::invalid(format!(
            "expected 1..={} waveplates, got {}",
            crate::qmat::MAX_QUBITS,
            waveplates.len()
        )));
    }
    for (m, w) in waveplates.iter().enumerate() {
        if !(w.retardance > 0.0 && w.retardance < 2.0 * PI) {
            return Err(Error::invalid(format!(
                "waveplate {} retardance {} outside (0, 2π)",
                m + 1,
                w.retardance
            )));
        }
        if w.multiplier == 0 {
            return Err(Error::invalid(format!("waveplate {} has zero multiplier", m + 1)));
        }
        if !w.offset.is_finite() {
            return Err(Error::invalid(format!("waveplate {} offset is not finite", m + 1)));
        }
    }
    if waveplates.windows(2).any(|p| p[1].multiplier <= p[0].multiplier) {
        return Err(Error::invalid("waveplate multipliers must be strictly increasing"));
    }
    Ok(())
}

/// `U = cos(β/2) σ_0 − i sin(β/2) [cos(2θ) σ_z + sin(2θ) σ_x]`.
pub fn waveplate_unitary(theta: f64, retardance: f64) -> ComplexMatrix {
    let (s, co) = (retardance / 2.0).sin_cos();
    let (s2, c2) = (2.0 * theta).sin_cos();
    let diag = c(co, 0.0) - I * s * c2;
    let off = -I * s * s2;
    let diag_lo = c(co, 0.0) + I * s * c2;
    ComplexMatrix::from_row_slice(2, 2, &[diag, off, off, diag_lo])
}

/// `M = U† |H><H| U`.
pub fn measurement_operator(theta: f64, retardance: f64) -> ComplexMatrix {
    let u = waveplate_unitary(theta, retardance);
    // |H><H| U keeps only the first row of U
    let row = u.row(0);
    ComplexMatrix::from_fn(2, 2, |i, j| row[i].conj() * row[j])
}

/// `χ_i(θ) = Tr[σ_i M(θ)]`.
pub fn chi(i: usize, theta: f64, retardance: f64) -> Result<f64> {
    let p = pauli(i)?;
    Ok(trace_product(&p, &measurement_operator(theta, retardance)).re)
}

fn chi_all(theta: f64, retardance: f64) -> [f64; 4] {
    let m = measurement_operator(theta, retardance);
    // Tr[σ_i M] for a Hermitian 2x2 M
    [
        (m[(0, 0)] + m[(1, 1)]).re,
        2.0 * m[(0, 1)].re,
        -2.0 * m[(0, 1)].im,
        (m[(0, 0)] - m[(1, 1)]).re,
    ]
}

/// `M_1(θ_1) ⊗ … ⊗ M_n(θ_n)` at slow-waveplate angle `theta`.
pub fn detector_operator(waveplates: &[WaveplateConfig], theta: f64) -> ComplexMatrix {
    waveplates.iter().fold(ComplexMatrix::identity(1, 1), |acc, w| {
        tensor(&acc, &measurement_operator(w.angle(theta), w.retardance))
    })
}

/// Real `N x 4^n` matrix mapping Stokes parameters to detection
/// probabilities: entry `(k, j) = 2^{-n} Π_m χ_{m, i_m}(θ_k)`.
pub fn design_matrix(waveplates: &[WaveplateConfig], grid: &[f64]) -> DMatrix<f64> {
    let n = waveplates.len();
    let cols = 1usize << (2 * n);
    let norm = (1usize << n) as f64;
    let mut out = DMatrix::zeros(grid.len(), cols);
    for (k, &theta) in grid.iter().enumerate() {
        let chis: Vec<[f64; 4]> = waveplates
            .iter()
            .map(|w| chi_all(w.angle(theta), w.retardance))
            .collect();
        for j in 0..cols {
            let prod: f64 = stokes_indices(j, n).iter().zip(&chis).map(|(&i, ch)| ch[i]).product();
            out[(k, j)] = prod / norm;
        }
    }
    out
}

fn check_register(rho: &DensityMatrix, waveplates: &[WaveplateConfig]) -> Result<()> {
    validate_waveplates(waveplates)?;
    if rho.n_qubits() != waveplates.len() {
        return Err(Error::Dimension {
            expected: waveplates.len(),
            actual: rho.n_qubits(),
        });
    }
    Ok(())
}

/// Detection probabilities through the generalized Stokes expansion.
pub fn signal_via_stokes(rho: &DensityMatrix, waveplates: &[WaveplateConfig], grid: &[f64]) -> Result<Vec<f64>> {
    check_register(rho, waveplates)?;
    let s = nalgebra::DVector::from_column_slice(stokes_from_density(rho).values());
    Ok((design_matrix(waveplates, grid) * s).iter().copied().collect())
}

/// Detection probabilities as `Tr[ρ (M_1 ⊗ … ⊗ M_n)]`.
pub fn signal_via_operator(rho: &DensityMatrix, waveplates: &[WaveplateConfig], grid: &[f64]) -> Result<Vec<f64>> {
    check_register(rho, waveplates)?;
    Ok(grid
        .iter()
        .map(|&theta| trace_product(rho.matrix(), &detector_operator(waveplates, theta)).re)
        .collect())
}

/// Tolerance between the two evaluation routes of [`probability_signal`].
pub const DUAL_ROUTE_TOL: f64 = 1e-12;

/// Detection probability at every grid angle. Both evaluation routes are
/// computed and must agree to [`DUAL_ROUTE_TOL`].
pub fn probability_signal(rho: &DensityMatrix, waveplates: &[WaveplateConfig], grid: &[f64]) -> Result<Vec<f64>> {
    let stokes = signal_via_stokes(rho, waveplates, grid)?;
    let direct = signal_via_operator(rho, waveplates, grid)?;
    let worst = stokes
        .iter()
        .zip(&direct)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if worst > DUAL_ROUTE_TOL {
        return Err(Error::SelfCheck(format!(
            "Stokes and operator signals differ by {worst:e}"
        )));
    }
    Ok(direct.into_iter().map(|p| p.clamp(0.0, 1.0)).collect())
}
