//! Frequency sets and Fourier-coefficient extraction for angle scans.
//!
//! All harmonics are integers in units of the slow-waveplate angle `θ`, so
//! mode `m` with multiplier `r_m` contributes `{0, 2r_m, 4r_m}`.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::forward::{AngleScan, ValueKind, WaveplateConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Parity {
    Cos,
    Sin,
}

/// DC plus the cosine and sine harmonics a scan can contain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencySet {
    multipliers: Vec<u32>,
    cos: Vec<u32>,
    sin: Vec<u32>,
}

impl FrequencySet {
    pub fn n_qubits(&self) -> usize {
        self.multipliers.len()
    }

    pub fn multipliers(&self) -> &[u32] {
        &self.multipliers
    }

    pub fn cos(&self) -> &[u32] {
        &self.cos
    }

    pub fn sin(&self) -> &[u32] {
        &self.sin
    }

    pub fn max_harmonic(&self) -> u32 {
        self.cos.iter().chain(&self.sin).copied().max().unwrap_or(0)
    }

    /// `2 f_max + 1`.
    pub fn nyquist_minimum(&self) -> usize {
        2 * self.max_harmonic() as usize + 1
    }

    /// Number of real coefficients, DC included.
    pub fn coefficient_count(&self) -> usize {
        1 + self.cos.len() + self.sin.len()
    }

    /// Enough coefficients for the `4^n − 1` free Stokes parameters plus
    /// normalization.
    pub fn has_enough_coefficients(&self) -> bool {
        self.coefficient_count() >= 1 << (2 * self.n_qubits())
    }
}

fn check_multipliers(multipliers: &[u32]) -> Result<()> {
    if multipliers.is_empty() || multipliers.len() > crate::qmat::MAX_QUBITS {
        return Err(Error::invalid(format!("unsupported mode count {}", multipliers.len())));
    }
    if multipliers[0] == 0 || multipliers.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!(
            "multipliers {multipliers:?} must be strictly increasing positive integers"
        )));
    }
    Ok(())
}

/// Build the frequency set by expanding the product of per-mode `χ`
/// harmonics. A term with an odd number of sine factors lands in the sine
/// list, otherwise in the cosine list.
pub fn frequency_set(multipliers: &[u32]) -> Result<FrequencySet> {
    check_multipliers(multipliers)?;
    let per_mode: Vec<[(u32, Parity); 4]> = multipliers
        .iter()
        .map(|&r| {
            [
                (0, Parity::Cos),
                (4 * r, Parity::Cos),
                (2 * r, Parity::Sin),
                (4 * r, Parity::Sin),
            ]
        })
        .collect();
    let (mut cos, mut sin) = (BTreeSet::new(), BTreeSet::new());
    let n = multipliers.len();
    for choice in 0..4usize.pow(n as u32) {
        let picks: Vec<(u32, Parity)> = (0..n).map(|m| per_mode[m][(choice >> (2 * m)) & 3]).collect();
        let sines = picks.iter().filter(|p| p.1 == Parity::Sin).count();
        for signs in 0..1u32 << n {
            let f: i64 = picks
                .iter()
                .enumerate()
                .map(|(m, p)| if signs >> m & 1 == 1 { -(p.0 as i64) } else { p.0 as i64 })
                .sum();
            let f = f.unsigned_abs() as u32;
            if f == 0 {
                continue;
            }
            if sines % 2 == 0 {
                cos.insert(f);
            } else {
                sin.insert(f);
            }
        }
    }
    Ok(FrequencySet {
        multipliers: multipliers.to_vec(),
        cos: cos.into_iter().collect(),
        sin: sin.into_iter().collect(),
    })
}

/// Frequency set for a concrete waveplate configuration. Non-zero angle
/// offsets mix cosine and sine content, so every harmonic then carries both.
pub fn frequency_set_for(waveplates: &[WaveplateConfig]) -> Result<FrequencySet> {
    let multipliers: Vec<u32> = waveplates.iter().map(|w| w.multiplier).collect();
    let mut set = frequency_set(&multipliers)?;
    if waveplates.iter().any(|w| w.offset != 0.0) {
        let all: BTreeSet<u32> = set.cos.iter().chain(&set.sin).copied().collect();
        set.cos = all.iter().copied().collect();
        set.sin = set.cos.clone();
    }
    Ok(set)
}

/// Two distinct harmonic combinations that land on the same frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collision {
    pub harmonic: u32,
    /// Per-mode signed orders `k_m ∈ {−2..2}`; the frequency is
    /// `|Σ 2 k_m r_m|`.
    pub first: Vec<i32>,
    pub second: Vec<i32>,
}

/// Enumerate every combination of per-mode orders `k_m ∈ {−2, …, 2}` and
/// report pairs (not related by overall sign) that share a frequency.
pub fn harmonic_collisions(multipliers: &[u32]) -> Result<Vec<Collision>> {
    check_multipliers(multipliers)?;
    let n = multipliers.len();
    let mut seen: BTreeMap<u32, Vec<i32>> = BTreeMap::new();
    let mut out = Vec::new();
    for code in 0..5usize.pow(n as u32) {
        let mut rest = code;
        let orders: Vec<i32> = (0..n)
            .map(|_| {
                let k = (rest % 5) as i32 - 2;
                rest /= 5;
                k
            })
            .collect();
        // keep one representative of each ±pair: first non-zero order positive
        match orders.iter().find(|&&k| k != 0) {
            Some(&k) if k < 0 => continue,
            _ => {}
        }
        let f: i64 = orders
            .iter()
            .zip(multipliers)
            .map(|(&k, &r)| 2 * k as i64 * r as i64)
            .sum();
        let f = f.unsigned_abs() as u32;
        match seen.get(&f) {
            Some(prev) => out.push(Collision {
                harmonic: f,
                first: prev.clone(),
                second: orders,
            }),
            None => {
                seen.insert(f, orders);
            }
        }
    }
    Ok(out)
}

/// Fourier coefficients of a scan over a [`FrequencySet`].
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSpectrum {
    fset: FrequencySet,
    pub a0: f64,
    a: BTreeMap<u32, f64>,
    b: BTreeMap<u32, f64>,
}

impl HarmonicSpectrum {
    /// All listed harmonics must be in the frequency set; missing ones are
    /// zero.
    pub fn new(fset: FrequencySet, a0: f64, a: &[(u32, f64)], b: &[(u32, f64)]) -> Result<Self> {
        let mut cos: BTreeMap<u32, f64> = fset.cos.iter().map(|&f| (f, 0.0)).collect();
        let mut sin: BTreeMap<u32, f64> = fset.sin.iter().map(|&f| (f, 0.0)).collect();
        for &(f, v) in a {
            *cos.get_mut(&f)
                .ok_or_else(|| Error::FrequencySetMismatch(format!("cosine harmonic {f} not in set")))? = v;
        }
        for &(f, v) in b {
            *sin.get_mut(&f)
                .ok_or_else(|| Error::FrequencySetMismatch(format!("sine harmonic {f} not in set")))? = v;
        }
        Ok(Self {
            fset,
            a0,
            a: cos,
            b: sin,
        })
    }

    pub fn frequency_set(&self) -> &FrequencySet {
        &self.fset
    }

    /// Cosine coefficient, zero for harmonics outside the set.
    pub fn a(&self, f: u32) -> f64 {
        self.a.get(&f).copied().unwrap_or(0.0)
    }

    /// Sine coefficient, zero for harmonics outside the set.
    pub fn b(&self, f: u32) -> f64 {
        self.b.get(&f).copied().unwrap_or(0.0)
    }

    pub fn cos_terms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.a.iter().map(|(&f, &v)| (f, v))
    }

    pub fn sin_terms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.b.iter().map(|(&f, &v)| (f, v))
    }

    /// All coefficients as `[a0, a_f..., b_f...]` in set order.
    pub fn to_vec(&self) -> Vec<f64> {
        std::iter::once(self.a0)
            .chain(self.a.values().copied())
            .chain(self.b.values().copied())
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            fset: self.fset.clone(),
            a0: self.a0 * factor,
            a: self.a.iter().map(|(&f, &v)| (f, v * factor)).collect(),
            b: self.b.iter().map(|(&f, &v)| (f, v * factor)).collect(),
        }
    }
}

/// Rectangle-rule projection of `values` sampled at `angles` (evenly spaced
/// over `[0, π)`) onto the harmonics of `fset`.
pub fn project(angles: &[f64], values: &[f64], fset: &FrequencySet) -> Result<HarmonicSpectrum> {
    let n = angles.len();
    if n != values.len() {
        return Err(Error::invalid("angle and value lengths differ"));
    }
    if n < fset.nyquist_minimum() {
        return Err(Error::Nyquist {
            samples: n,
            required: fset.nyquist_minimum(),
            max_harmonic: fset.max_harmonic(),
        });
    }
    let scale = 2.0 / n as f64;
    let inner = |f: u32, trig: fn(f64) -> f64| -> f64 {
        scale
            * angles
                .iter()
                .zip(values)
                .map(|(&t, &p)| p * trig(f as f64 * t))
                .sum::<f64>()
    };
    Ok(HarmonicSpectrum {
        fset: fset.clone(),
        a0: values.iter().sum::<f64>() / n as f64,
        a: fset.cos.iter().map(|&f| (f, inner(f, f64::cos))).collect(),
        b: fset.sin.iter().map(|&f| (f, inner(f, f64::sin))).collect(),
    })
}

/// `a0 = (1/N) Σ p_k`, `a_f = (2/N) Σ p_k cos(fθ_k)`, `b_f = (2/N) Σ p_k
/// sin(fθ_k)`. Exact for signals band-limited to `fset`.
pub fn extract_coefficients(scan: &AngleScan, fset: &FrequencySet) -> Result<HarmonicSpectrum> {
    if scan.kind() != ValueKind::Probability {
        return Err(Error::invalid(
            "harmonic extraction needs probabilities; normalize counts first",
        ));
    }
    if scan.multipliers() != fset.multipliers {
        return Err(Error::FrequencySetMismatch(format!(
            "scan multipliers {:?} vs frequency set {:?}",
            scan.multipliers(),
            fset.multipliers
        )));
    }
    project(scan.angles(), scan.values(), fset)
}

/// `a0 + Σ a_f cos(fθ) + Σ b_f sin(fθ)`.
pub fn evaluate_series(spectrum: &HarmonicSpectrum, theta: f64) -> f64 {
    spectrum.a0
        + spectrum
            .a
            .iter()
            .map(|(&f, &v)| v * (f as f64 * theta).cos())
            .sum::<f64>()
        + spectrum
            .b
            .iter()
            .map(|(&f, &v)| v * (f as f64 * theta).sin())
            .sum::<f64>()
}
