use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::qmat::{c, n_qubits_for_dim, states, ComplexMatrix, DensityMatrix, Ket};

use super::waveplate_unitary;

/// Reduced Planck constant in µeV·ps.
pub const HBAR_UEV_PS: f64 = 658.211_956_9;

/// `(|HH> + e^{iφ(t)} |VV>)/√2` with `φ(t) = t·FSS/ħ`; `t` in ps, FSS in µeV.
pub fn qd_state(t_ps: f64, fss_uev: f64) -> DensityMatrix {
    let phase = t_ps * fss_uev / HBAR_UEV_PS;
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = Ket::zeros(4);
    psi[0] = c(amp, 0.0);
    psi[3] = num_complex::Complex64::from_polar(amp, phase);
    DensityMatrix::from_pure(&psi).expect("normalized Bell-like state")
}

/// `p |Ψ−><Ψ−| + (1 − p) I/4` with `p` chosen so the fidelity to `|Ψ−>` is
/// `fidelity`.
pub fn werner_psi_minus(fidelity: f64) -> Result<DensityMatrix> {
    if !(0.25..=1.0).contains(&fidelity) {
        return Err(Error::invalid(format!("Werner fidelity {fidelity} outside [0.25, 1]")));
    }
    let p = (4.0 * fidelity - 1.0) / 3.0;
    let psi = states::bell_psi_minus();
    let m = (&psi * psi.adjoint()).scale(p) + ComplexMatrix::identity(4, 4).scale((1.0 - p) / 4.0);
    DensityMatrix::normalized(m)
}

/// Quarter waveplate turned by `theta` from its home position, followed by
/// the phase retarder `diag(1, e^{iφ})`. `(0, 0)` is the identity.
pub fn virtual_waveplate(theta: f64, phi: f64) -> ComplexMatrix {
    let mut phase = ComplexMatrix::identity(2, 2);
    phase[(1, 1)] = num_complex::Complex64::from_polar(1.0, phi);
    let home = waveplate_unitary(0.0, FRAC_PI_2).adjoint();
    phase * waveplate_unitary(theta, FRAC_PI_2) * home
}

/// `(V_1 ⊗ … ⊗ V_n) ρ (V_1 ⊗ … ⊗ V_n)†` with one `(θ, φ)` pair per qubit.
pub fn apply_virtual_waveplate(rho: &DensityMatrix, corrections: &[(f64, f64)]) -> Result<DensityMatrix> {
    if corrections.len() != rho.n_qubits() {
        return Err(Error::Dimension {
            expected: rho.n_qubits(),
            actual: corrections.len(),
        });
    }
    let v = corrections.iter().fold(ComplexMatrix::identity(1, 1), |acc, &(t, p)| {
        acc.kronecker(&virtual_waveplate(t, p))
    });
    rho.conjugate(&v)
}

/// Bin centres `(k + ½)·span/n` for `k = 0..n`.
pub fn time_bin_grid(n_bins: usize, span_ps: f64) -> Vec<f64> {
    let width = span_ps / n_bins as f64;
    (0..n_bins).map(|k| (k as f64 + 0.5) * width).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceModel {
    PureState(Ket),
    /// Biexciton cascade with fine-structure splitting in µeV. With a
    /// lifetime, bin `t` is weighted by `exp(−t/τ)`.
    QdCascade {
        fss_uev: f64,
        lifetime_ps: Option<f64>,
        time_bins_ps: Vec<f64>,
    },
    /// Werner-like `|Ψ−>` with the given fidelity.
    Spdc {
        fidelity: f64,
    },
    Custom(DensityMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedState {
    pub time_bin_ps: Option<f64>,
    pub rho: DensityMatrix,
    /// Multiplies the nominal intensity for this state.
    pub relative_intensity: f64,
}

impl SourceModel {
    pub fn n_qubits(&self) -> Result<usize> {
        match self {
            SourceModel::PureState(k) => n_qubits_for_dim(k.len()),
            SourceModel::QdCascade { .. } | SourceModel::Spdc { .. } => Ok(2),
            SourceModel::Custom(rho) => Ok(rho.n_qubits()),
        }
    }

    /// Ideal pure state the source aims for, if it has one.
    pub fn target(&self) -> Option<Ket> {
        match self {
            SourceModel::PureState(k) => Some(k.unscale(k.norm())),
            SourceModel::QdCascade { .. } => Some(states::bell_phi_plus()),
            SourceModel::Spdc { .. } => Some(states::bell_psi_minus()),
            SourceModel::Custom(_) => None,
        }
    }

    pub fn emit(&self) -> Result<Vec<EmittedState>> {
        let single = |rho| {
            vec![EmittedState {
                time_bin_ps: None,
                rho,
                relative_intensity: 1.0,
            }]
        };
        match self {
            SourceModel::PureState(k) => Ok(single(DensityMatrix::from_pure(k)?)),
            SourceModel::Spdc { fidelity } => Ok(single(werner_psi_minus(*fidelity)?)),
            SourceModel::Custom(rho) => Ok(single(rho.clone())),
            SourceModel::QdCascade {
                fss_uev,
                lifetime_ps,
                time_bins_ps,
            } => {
                if time_bins_ps.is_empty() {
                    return Err(Error::invalid("quantum-dot source needs at least one time bin"));
                }
                if time_bins_ps.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("time bins must be strictly increasing"));
                }
                if let Some(tau) = lifetime_ps {
                    if !(*tau > 0.0) {
                        return Err(Error::invalid(format!("lifetime {tau} ps must be positive")));
                    }
                }
                Ok(time_bins_ps
                    .iter()
                    .map(|&t| EmittedState {
                        time_bin_ps: Some(t),
                        rho: qd_state(t, *fss_uev),
                        relative_intensity: lifetime_ps.map_or(1.0, |tau| (-t / tau).exp()),
                    })
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{concurrence, fidelity_to_pure, max_abs_diff, random};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn qd_state_at_zero_is_phi_plus() {
        let phi = DensityMatrix::from_pure(&states::bell_phi_plus()).unwrap();
        assert!(max_abs_diff(qd_state(0.0, 5.44).matrix(), phi.matrix()) < 1e-15);
        assert!(max_abs_diff(qd_state(321.0, 0.0).matrix(), phi.matrix()) < 1e-15);
    }

    #[test]
    fn qd_phase_period() {
        let period = 2.0 * PI * HBAR_UEV_PS / 5.44;
        assert!((period - 760.2).abs() < 0.1, "{period}");
        let back = qd_state(period, 5.44);
        let f = fidelity_to_pure(&back, &states::bell_phi_plus()).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
        let half = qd_state(period / 2.0, 5.44);
        let f = fidelity_to_pure(&half, &states::bell_phi_plus()).unwrap();
        assert!(f.abs() < 1e-12);
    }

    #[test]
    fn identity_correction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random::density(2, &mut rng);
        let out = apply_virtual_waveplate(&rho, &[(0.0, 0.0), (0.0, 0.0)]).unwrap();
        assert!(max_abs_diff(out.matrix(), rho.matrix()) < 1e-15);
        assert!(apply_virtual_waveplate(&rho, &[(0.0, 0.0)]).is_err());
    }

    #[test]
    fn correction_preserves_spectrum_and_concurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let rho = random::density(2, &mut rng);
            let corr: Vec<(f64, f64)> = (0..2)
                .map(|_| (rng.random_range(-PI..PI), rng.random_range(-PI..PI)))
                .collect();
            let out = apply_virtual_waveplate(&rho, &corr).unwrap();
            for (a, b) in rho.eigenvalues().iter().zip(out.eigenvalues()) {
                assert!((a - b).abs() < 1e-12);
            }
            let (ca, cb) = (concurrence(&rho).unwrap(), concurrence(&out).unwrap());
            assert!((ca - cb).abs() < 1e-9);
        }
    }

    #[test]
    fn werner_fidelity_and_concurrence() {
        let rho = werner_psi_minus(0.94).unwrap();
        let f = fidelity_to_pure(&rho, &states::bell_psi_minus()).unwrap();
        assert!((f - 0.94).abs() < 1e-14);
        // p = 0.92, C = (3p − 1)/2
        assert!((concurrence(&rho).unwrap() - 0.88).abs() < 1e-7);
        assert!(werner_psi_minus(0.1).is_err());
    }

    #[test]
    fn qd_source_emits_one_state_per_bin() {
        let src = SourceModel::QdCascade {
            fss_uev: 5.44,
            lifetime_ps: Some(400.0),
            time_bins_ps: time_bin_grid(40, 800.0),
        };
        let out = src.emit().unwrap();
        assert_eq!(out.len(), 40);
        assert!(out.windows(2).all(|w| w[1].time_bin_ps > w[0].time_bin_ps));
        assert!(out
            .windows(2)
            .all(|w| w[1].relative_intensity < w[0].relative_intensity));
        let bad = SourceModel::QdCascade {
            fss_uev: 1.0,
            lifetime_ps: None,
            time_bins_ps: vec![10.0, 5.0],
        };
        assert!(bad.emit().is_err());
    }
}
