//! Time-binned fidelity curves, fine-structure-splitting fits and
//! cross-method comparison.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::forward::HBAR_UEV_PS;
use crate::qmat::{concurrence, fidelity_to_pure, DensityMatrix, Ket};
use crate::reconstruct::ReconstructionResult;
use crate::uncertainty::MonteCarloReport;

pub const MIN_BINS: usize = 6;
/// Grid used to seed the frequency, in µeV.
pub const FSS_SEARCH_RANGE: (f64, f64) = (0.1, 20.0);
const FSS_SEARCH_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeBin {
    pub t_ps: f64,
    pub rho: DensityMatrix,
    pub fidelity: f64,
    pub fidelity_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeBinSeries {
    bins: Vec<TimeBin>,
}

impl TimeBinSeries {
    pub fn new(bins: Vec<TimeBin>) -> Result<Self> {
        for w in bins.windows(2) {
            if !(w[1].t_ps > w[0].t_ps) {
                return Err(Error::invalid("time bins must be strictly increasing"));
            }
        }
        for b in &bins {
            if !(b.t_ps.is_finite() && (-1e-9..=1.0 + 1e-9).contains(&b.fidelity)) {
                return Err(Error::invalid(format!("fidelity {} outside [0, 1]", b.fidelity)));
            }
            if !(b.fidelity_sigma >= 0.0) {
                return Err(Error::invalid("fidelity sigma must be non-negative"));
            }
        }
        Ok(Self { bins })
    }

    /// One bin per reconstruction, fidelity taken against `target`.
    pub fn from_states(times_ps: &[f64], states: &[DensityMatrix], sigmas: &[f64], target: &Ket) -> Result<Self> {
        if times_ps.len() != states.len() || sigmas.len() != states.len() {
            return Err(Error::invalid("times, states and sigmas differ in length"));
        }
        let bins = times_ps
            .iter()
            .zip(states)
            .zip(sigmas)
            .map(|((&t_ps, rho), &fidelity_sigma)| {
                Ok(TimeBin {
                    t_ps,
                    rho: rho.clone(),
                    fidelity: fidelity_to_pure(rho, target)?,
                    fidelity_sigma,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bins)
    }

    pub fn bins(&self) -> &[TimeBin] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.t_ps).collect()
    }

    pub fn fidelities(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.fidelity).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FssErrors {
    pub fss: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub phase0: f64,
}

/// `F(t) = offset + amplitude · cos(fss · t / ħ + phase0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FssFitResult {
    /// µeV.
    pub fss: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// Radians, in (−π, π].
    pub phase0: f64,
    pub residual_rms: f64,
    pub std_errors: FssErrors,
    /// Set when the curve shows no oscillation; `fss` is then 0.
    pub degenerate: bool,
    pub iterations: usize,
}

impl FssFitResult {
    pub fn evaluate(&self, t_ps: f64) -> f64 {
        self.offset + self.amplitude * (self.fss * t_ps / HBAR_UEV_PS + self.phase0).cos()
    }
}

pub fn fss_fit(series: &TimeBinSeries) -> Result<FssFitResult> {
    fit_oscillation(&series.times(), &series.fidelities())
}

fn wrap_phase(phi: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = phi.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w - two_pi
    } else {
        w
    }
}

/// Linear fit of `offset + a cos ωt + b sin ωt`; returns `(offset, a, b, rss)`.
fn linear_sinusoid(t: &[f64], y: &[f64], omega: f64) -> Option<(f64, f64, f64, f64)> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for (&t, &y) in t.iter().zip(y) {
        let row = Vector3::new(1.0, (omega * t).cos(), (omega * t).sin());
        ata += row * row.transpose();
        aty += row * y;
    }
    let x = ata.cholesky()?.solve(&aty);
    let rss = t
        .iter()
        .zip(y)
        .map(|(&t, &y)| (y - x[0] - x[1] * (omega * t).cos() - x[2] * (omega * t).sin()).powi(2))
        .sum();
    Some((x[0], x[1], x[2], rss))
}

/// Nonlinear least-squares fit of a single cosine to `(t_ps, values)`.
pub fn fit_oscillation(t_ps: &[f64], values: &[f64]) -> Result<FssFitResult> {
    if t_ps.len() != values.len() {
        return Err(Error::invalid("times and values differ in length"));
    }
    let n = t_ps.len();
    if n < MIN_BINS {
        return Err(Error::invalid(format!("need at least {MIN_BINS} time bins, got {n}")));
    }
    // work on centred times; the phase is shifted back at the end
    let t_mid = t_ps.iter().sum::<f64>() / n as f64;
    let t: Vec<f64> = t_ps.iter().map(|v| v - t_mid).collect();
    let span = t_ps.iter().cloned().fold(f64::MIN, f64::max) - t_ps.iter().cloned().fold(f64::MAX, f64::min);

    let mean = values.iter().sum::<f64>() / n as f64;
    let steps = ((FSS_SEARCH_RANGE.1 - FSS_SEARCH_RANGE.0) / FSS_SEARCH_STEP).round() as usize;
    let mut best: Option<(f64, f64, f64, f64, f64)> = None;
    for k in 0..=steps {
        let omega = (FSS_SEARCH_RANGE.0 + k as f64 * FSS_SEARCH_STEP) / HBAR_UEV_PS;
        if let Some((o, a, b, rss)) = linear_sinusoid(&t, values, omega) {
            if best.is_none_or(|bst| rss < bst.4) {
                best = Some((omega, o, a, b, rss));
            }
        }
    }
    let (omega0, o0, a0, b0, _) = best.ok_or_else(|| Error::invalid("time bins do not support a sinusoid fit"))?;
    let amp0 = a0.hypot(b0);
    if amp0 <= 1e-9 * (1.0 + mean.abs()) {
        let rms = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        return Ok(FssFitResult {
            fss: 0.0,
            amplitude: 0.0,
            offset: mean,
            phase0: 0.0,
            residual_rms: rms,
            std_errors: FssErrors::default(),
            degenerate: true,
            iterations: 0,
        });
    }

    // parameters: offset, amplitude, omega, phase
    let mut p = Vector4::new(o0, amp0, omega0, (-b0).atan2(a0));
    let residuals = |p: &Vector4<f64>| -> Vec<f64> {
        t.iter()
            .zip(values)
            .map(|(&t, &y)| y - p[0] - p[1] * (p[2] * t + p[3]).cos())
            .collect()
    };
    let jacobian = |p: &Vector4<f64>| -> Vec<Vector4<f64>> {
        t.iter()
            .map(|&t| {
                let arg = p[2] * t + p[3];
                let (s, c) = arg.sin_cos();
                Vector4::new(1.0, c, -p[1] * t * s, -p[1] * s)
            })
            .collect()
    };
    let rss_of = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut lambda = 1e-3;
    let mut rss = rss_of(&residuals(&p));
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 500 {
        iterations += 1;
        let rows = jacobian(&p);
        let r = residuals(&p);
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (row, &ri) in rows.iter().zip(&r) {
            jtj += row * row.transpose();
            jtr += row * ri;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = jtj;
            for i in 0..4 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-30);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&jtr);
            let trial = p + step;
            let trial_rss = rss_of(&residuals(&trial));
            if trial_rss <= rss {
                let small = step
                    .iter()
                    .zip(p.iter())
                    .all(|(s, v)| s.abs() <= 1e-13 * (v.abs() + 1e-13));
                let gain = rss - trial_rss;
                p = trial;
                rss = trial_rss;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if small || gain <= 1e-15 * rss.max(1e-300) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no step lowers the residual: already at the minimum
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence("FSS fit did not converge".into()));
    }

    if p[1] < 0.0 {
        p[1] = -p[1];
        p[3] += std::f64::consts::PI;
    }
    if p[2] < 0.0 {
        p[2] = -p[2];
        p[3] = -p[3];
    }
    if span * p[2] < std::f64::consts::PI {
        return Err(Error::invalid(format!(
            "time bins span {span} ps, less than half an oscillation period"
        )));
    }

    let dof = (n - 4).max(1) as f64;
    let sigma2 = rss / dof;
    let mut jtj = Matrix4::<f64>::zeros();
    for row in jacobian(&p) {
        jtj += row * row.transpose();
    }
    let errors = match jtj.try_inverse() {
        Some(cov) => {
            let e = |i: usize| (sigma2 * cov[(i, i)]).max(0.0).sqrt();
            FssErrors {
                offset: e(0),
                amplitude: e(1),
                fss: e(2) * HBAR_UEV_PS,
                phase0: e(3),
            }
        }
        None => FssErrors {
            offset: f64::NAN,
            amplitude: f64::NAN,
            fss: f64::NAN,
            phase0: f64::NAN,
        },
    };

    Ok(FssFitResult {
        fss: p[2] * HBAR_UEV_PS,
        amplitude: p[1],
        offset: p[0],
        phase0: wrap_phase(p[3] - p[2] * t_mid),
        residual_rms: (rss / n as f64).sqrt(),
        std_errors: errors,
        degenerate: false,
        iterations,
    })
}

/// A point estimate with Monte Carlo error bars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodEstimate {
    pub fidelity: f64,
    pub fidelity_sigma: f64,
    /// `(value, sigma)` for two-qubit states.
    pub concurrence: Option<(f64, f64)>,
}

impl MethodEstimate {
    pub fn new(fidelity: f64, fidelity_sigma: f64) -> Self {
        Self {
            fidelity,
            fidelity_sigma,
            concurrence: None,
        }
    }

    /// Point metrics from `point`, spreads from `mc`.
    pub fn from_reports(point: &ReconstructionResult, mc: &MonteCarloReport, target: &Ket) -> Result<Self> {
        let fidelity = fidelity_to_pure(&point.rho, target)?;
        let fidelity_sigma = mc
            .fidelity
            .ok_or_else(|| Error::invalid("Monte Carlo report has no fidelity statistics"))?
            .sigma;
        let concurrence = match mc.concurrence {
            Some(stats) => Some((concurrence(&point.rho)?, stats.sigma)),
            None => None,
        };
        Ok(Self {
            fidelity,
            fidelity_sigma,
            concurrence,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricComparison {
    pub delta: f64,
    pub combined_sigma: f64,
    /// `delta ≤ 2 · combined_sigma`.
    pub agree: bool,
}

impl MetricComparison {
    fn between(a: (f64, f64), b: (f64, f64)) -> Self {
        let delta = (a.0 - b.0).abs();
        let combined_sigma = a.1.hypot(b.1);
        Self {
            delta,
            combined_sigma,
            agree: delta <= 2.0 * combined_sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub fidelity: MetricComparison,
    pub concurrence: Option<MetricComparison>,
}

pub fn compare_methods(a: &MethodEstimate, b: &MethodEstimate) -> Comparison {
    Comparison {
        fidelity: MetricComparison::between((a.fidelity, a.fidelity_sigma), (b.fidelity, b.fidelity_sigma)),
        concurrence: match (a.concurrence, b.concurrence) {
            (Some(x), Some(y)) => Some(MetricComparison::between(x, y)),
            _ => None,
        },
    }
}
