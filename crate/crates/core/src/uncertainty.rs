//! Monte Carlo propagation of counting noise into density-matrix and metric
//! uncertainties.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{AngleScan, ValueKind};
use crate::qmat::{c, concurrence, fidelity_to_pure, ComplexMatrix, DensityMatrix, Ket};
use crate::reconstruct::{project_physical, ProjectiveData, ReconstructionResult};
use crate::seeding::stream_rng;

pub const DEFAULT_SAMPLES: usize = 100;

/// Measured counts that can be perturbed and re-reconstructed.
pub trait CountData: Sized + Sync {
    fn counts(&self) -> Result<&[f64]>;
    fn with_counts(&self, counts: Vec<f64>) -> Result<Self>;
}

impl CountData for AngleScan {
    fn counts(&self) -> Result<&[f64]> {
        match self.kind() {
            ValueKind::Counts => Ok(self.values()),
            ValueKind::Probability => Err(Error::invalid("Monte Carlo resampling needs counts")),
        }
    }

    fn with_counts(&self, counts: Vec<f64>) -> Result<Self> {
        self.with_values(counts, ValueKind::Counts)
    }
}

impl CountData for ProjectiveData {
    fn counts(&self) -> Result<&[f64]> {
        match self.kind {
            ValueKind::Counts => Ok(&self.values),
            ValueKind::Probability => Err(Error::invalid("Monte Carlo resampling needs counts")),
        }
    }

    fn with_counts(&self, counts: Vec<f64>) -> Result<Self> {
        ProjectiveData::new(self.n_qubits, counts, ValueKind::Counts)
    }
}

/// Each count `c` becomes a draw from `Normal(c, √max(c, 1))`, clamped at 0.
pub fn resample_counts<R: Rng + ?Sized>(counts: &[f64], rng: &mut R) -> Vec<f64> {
    counts
        .iter()
        .map(|&c| {
            let normal = Normal::new(c, c.max(1.0).sqrt()).expect("finite width");
            normal.sample(rng).max(0.0)
        })
        .collect()
}

pub fn resample<D: CountData>(data: &D, seed: u64) -> Result<D> {
    let mut rng = stream_rng(seed, 0);
    data.with_counts(resample_counts(data.counts()?, &mut rng))
}

pub fn resample_scan(scan: &AngleScan, seed: u64) -> Result<AngleScan> {
    resample(scan, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub sigma: f64,
}

impl MetricSummary {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            sigma: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    /// Requested resamples, including excluded ones.
    pub n_samples: usize,
    /// Resamples whose reconstruction failed or did not converge.
    pub n_excluded: usize,
    pub seed: u64,
    pub mean: ComplexMatrix,
    pub sigma_re: DMatrix<f64>,
    pub sigma_im: DMatrix<f64>,
    /// Fidelity to the target state, when one was given.
    pub fidelity: Option<MetricSummary>,
    /// Present for two-qubit data.
    pub concurrence: Option<MetricSummary>,
}

impl MonteCarloReport {
    pub fn n_used(&self) -> usize {
        self.n_samples - self.n_excluded
    }

    /// Element-wise mean projected onto the physical states.
    pub fn mean_density(&self) -> Result<DensityMatrix> {
        project_physical(&self.mean)
    }
}

/// Resample `data` `n_samples` times with sub-seeds derived from `seed`,
/// reconstruct each copy and aggregate. Runs in parallel; the report does not
/// depend on the thread count.
pub fn monte_carlo<D, F>(
    data: &D,
    n_samples: usize,
    reconstruct: F,
    target: Option<&Ket>,
    seed: u64,
) -> Result<MonteCarloReport>
where
    D: CountData,
    F: Fn(&D) -> Result<ReconstructionResult> + Sync,
{
    if n_samples < 2 {
        return Err(Error::invalid("Monte Carlo needs at least two samples"));
    }
    let counts = data.counts()?;
    let runs: Vec<Option<DensityMatrix>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let copy = data.with_counts(resample_counts(counts, &mut rng)).ok()?;
            match reconstruct(&copy) {
                Ok(r) if r.converged => Some(r.rho),
                _ => None,
            }
        })
        .collect();
    let used: Vec<DensityMatrix> = runs.into_iter().flatten().collect();
    if used.len() < 2 {
        return Err(Error::NonConvergence(format!(
            "only {} of {n_samples} Monte Carlo reconstructions converged",
            used.len()
        )));
    }
    let n_excluded = n_samples - used.len();
    let d = used[0].dim();
    let n = used.len() as f64;

    let mut mean = ComplexMatrix::zeros(d, d);
    for rho in &used {
        mean += rho.matrix();
    }
    mean.unscale_mut(n);
    let mut var_re = DMatrix::<f64>::zeros(d, d);
    let mut var_im = DMatrix::<f64>::zeros(d, d);
    for rho in &used {
        for (k, z) in rho.matrix().iter().enumerate() {
            let diff = z - mean[k];
            var_re[k] += diff.re * diff.re;
            var_im[k] += diff.im * diff.im;
        }
    }
    let sigma_re = var_re.map(|v| (v / (n - 1.0)).sqrt());
    let sigma_im = var_im.map(|v| (v / (n - 1.0)).sqrt());

    let fidelity = match target {
        Some(psi) => {
            let values = used
                .iter()
                .map(|r| fidelity_to_pure(r, psi))
                .collect::<Result<Vec<_>>>()?;
            Some(MetricSummary::of(&values))
        }
        None => None,
    };
    let concurrence = if d == 4 {
        let values = used.iter().map(concurrence).collect::<Result<Vec<_>>>()?;
        Some(MetricSummary::of(&values))
    } else {
        None
    };
    // tidy exact zeros on the diagonal imaginary part
    for i in 0..d {
        mean[(i, i)] = c(mean[(i, i)].re, 0.0);
    }
    Ok(MonteCarloReport {
        n_samples,
        n_excluded,
        seed,
        mean,
        sigma_re,
        sigma_im,
        fidelity,
        concurrence,
    })
}
