use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{probability_signal, validate_waveplates, WaveplateConfig};
use crate::error::{Error, Result};
use crate::qmat::DensityMatrix;
use crate::seeding::stream_rng;

/// Relative tolerance on the angle grid spacing.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Counts,
    Probability,
}

impl ValueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::Counts => "counts",
            ValueKind::Probability => "probability",
        }
    }
}

impl std::str::FromStr for ValueKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "counts" => Ok(ValueKind::Counts),
            "probability" => Ok(ValueKind::Probability),
            other => Err(Error::invalid(format!("unknown value kind '{other}'"))),
        }
    }
}

/// `θ_k = kπ/N` for `k = 0..N`.
pub fn uniform_grid(n_samples: usize) -> Vec<f64> {
    (0..n_samples).map(|k| k as f64 * PI / n_samples as f64).collect()
}

/// Highest harmonic (in units of the slow-waveplate angle) any state can
/// produce: each mode contributes at most `4 r_m`.
pub(crate) fn max_harmonic(waveplates: &[WaveplateConfig]) -> u32 {
    waveplates.iter().map(|w| 4 * w.multiplier).sum()
}

/// Smallest uniform sample count that resolves every harmonic, `2 f_max + 1`.
pub fn nyquist_minimum(waveplates: &[WaveplateConfig]) -> usize {
    2 * max_harmonic(waveplates) as usize + 1
}

/// A full sweep of the slow waveplate over `[0, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleScan {
    waveplates: Vec<WaveplateConfig>,
    angles: Vec<f64>,
    values: Vec<f64>,
    kind: ValueKind,
    time_bin_ps: Option<f64>,
}

impl AngleScan {
    /// Checks waveplate settings, even spacing `π/N`, the sampling minimum and
    /// non-negative finite values.
    pub fn new(waveplates: Vec<WaveplateConfig>, angles: Vec<f64>, values: Vec<f64>, kind: ValueKind) -> Result<Self> {
        validate_waveplates(&waveplates)?;
        if angles.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} angles but {} values",
                angles.len(),
                values.len()
            )));
        }
        let required = nyquist_minimum(&waveplates);
        if angles.len() < required {
            return Err(Error::Nyquist {
                samples: angles.len(),
                required,
                max_harmonic: max_harmonic(&waveplates),
            });
        }
        let step = PI / angles.len() as f64;
        let start = angles[0];
        if !(start > -GRID_TOL && start < step * (1.0 - GRID_TOL)) {
            return Err(Error::UnevenSpacing { index: 0 });
        }
        for (k, &t) in angles.iter().enumerate() {
            if (t - start - k as f64 * step).abs() > GRID_TOL * PI {
                return Err(Error::UnevenSpacing { index: k });
            }
        }
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!("sample {k} has invalid value {}", values[k])));
        }
        Ok(Self {
            waveplates,
            angles,
            values,
            kind,
            time_bin_ps: None,
        })
    }

    pub fn with_time_bin(mut self, t_ps: f64) -> Self {
        self.time_bin_ps = Some(t_ps);
        self
    }

    /// Same grid and settings with new values (e.g. a noisy resample).
    pub fn with_values(&self, values: Vec<f64>, kind: ValueKind) -> Result<Self> {
        let mut out = Self::new(self.waveplates.clone(), self.angles.clone(), values, kind)?;
        out.time_bin_ps = self.time_bin_ps;
        Ok(out)
    }

    pub fn n_qubits(&self) -> usize {
        self.waveplates.len()
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn waveplates(&self) -> &[WaveplateConfig] {
        &self.waveplates
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn time_bin_ps(&self) -> Option<f64> {
        self.time_bin_ps
    }

    pub fn multipliers(&self) -> Vec<u32> {
        self.waveplates.iter().map(|w| w.multiplier).collect()
    }

    pub fn has_offsets(&self) -> bool {
        self.waveplates.iter().any(|w| w.offset != 0.0)
    }
}

/// Poisson draws with mean `mean_intensity · p` for each probability.
pub fn poisson_counts<R: Rng + ?Sized>(probabilities: &[f64], mean_intensity: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(mean_intensity > 0.0 && mean_intensity.is_finite()) {
        return Err(Error::invalid(format!(
            "mean intensity {mean_intensity} must be positive"
        )));
    }
    probabilities
        .iter()
        .map(|&p| {
            let lambda = mean_intensity * p;
            if lambda <= 0.0 {
                return Ok(0.0);
            }
            let dist = Poisson::new(lambda).map_err(|e| Error::invalid(format!("Poisson mean {lambda}: {e}")))?;
            Ok(dist.sample(rng))
        })
        .collect()
}

/// Replace the probabilities of `scan` by Poisson counts. Deterministic for
/// a fixed `seed`.
pub fn sample_counts(scan: &AngleScan, mean_intensity: f64, seed: u64) -> Result<AngleScan> {
    if scan.kind() != ValueKind::Probability {
        return Err(Error::invalid("sample_counts expects a probability scan"));
    }
    let mut rng = stream_rng(seed, 0);
    let counts = poisson_counts(scan.values(), mean_intensity, &mut rng)?;
    scan.with_values(counts, ValueKind::Counts)
}

/// Noiseless probability scan of `rho`, or Poisson counts when `intensity`
/// is given.
pub fn simulate_scan(
    rho: &DensityMatrix,
    waveplates: &[WaveplateConfig],
    n_samples: usize,
    intensity: Option<f64>,
    seed: u64,
) -> Result<AngleScan> {
    let grid = uniform_grid(n_samples);
    validate_waveplates(waveplates)?;
    if n_samples < nyquist_minimum(waveplates) {
        return Err(Error::Nyquist {
            samples: n_samples,
            required: nyquist_minimum(waveplates),
            max_harmonic: max_harmonic(waveplates),
        });
    }
    let p = probability_signal(rho, waveplates, &grid)?;
    let scan = AngleScan::new(waveplates.to_vec(), grid, p, ValueKind::Probability)?;
    match intensity {
        Some(i) => sample_counts(&scan, i, seed),
        None => Ok(scan),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::standard_waveplates;

    #[test]
    fn nyquist_minimums() {
        assert_eq!(nyquist_minimum(&standard_waveplates(1)), 9);
        assert_eq!(nyquist_minimum(&standard_waveplates(2)), 49);
        let rho = DensityMatrix::maximally_mixed(2);
        let err = simulate_scan(&rho, &standard_waveplates(2), 48, None, 0).unwrap_err();
        assert!(matches!(err, Error::Nyquist { required: 49, .. }));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn uneven_grid_rejected() {
        let wp = standard_waveplates(1);
        let mut grid = uniform_grid(20);
        grid[7] += 1e-4;
        let err = AngleScan::new(wp.clone(), grid, vec![0.5; 20], ValueKind::Probability).unwrap_err();
        assert!(matches!(err, Error::UnevenSpacing { index: 7 }));
        // [0, 2π) with N points has the wrong step
        let wide: Vec<f64> = (0..20).map(|k| k as f64 * 2.0 * PI / 20.0).collect();
        assert!(AngleScan::new(wp, wide, vec![0.5; 20], ValueKind::Probability).is_err());
    }

    #[test]
    fn zero_probability_gives_zero_counts() {
        let mut rng = stream_rng(1, 0);
        let c = poisson_counts(&[0.0; 10], 900.0, &mut rng).unwrap();
        assert!(c.iter().all(|&x| x == 0.0));
        assert!(poisson_counts(&[0.5], 0.0, &mut rng).is_err());
    }

    #[test]
    fn poisson_mean_within_three_sigma() {
        let mut rng = stream_rng(2, 0);
        let (intensity, p) = (900.0, 0.37);
        let n = 10_000;
        let draws = poisson_counts(&vec![p; n], intensity, &mut rng).unwrap();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let lambda = intensity * p;
        let sigma_of_mean = (lambda / n as f64).sqrt();
        assert!((mean - lambda).abs() < 3.0 * sigma_of_mean, "{mean} vs {lambda}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let rho = DensityMatrix::maximally_mixed(1);
        let wp = standard_waveplates(1);
        let a = simulate_scan(&rho, &wp, 400, Some(900.0), 42).unwrap();
        let b = simulate_scan(&rho, &wp, 400, Some(900.0), 42).unwrap();
        let c = simulate_scan(&rho, &wp, 400, Some(900.0), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.kind(), ValueKind::Counts);
    }
}
