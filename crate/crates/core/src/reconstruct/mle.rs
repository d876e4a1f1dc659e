//! Least-squares maximum-likelihood fit over the Cholesky parametrization
//! `ρ = T T† / Tr(T T†)`.

use nalgebra::{DMatrix, DVector};

use super::linear::project_physical;
use super::optim::{self, central_difference};
use super::{Method, ReconstructionResult};
use crate::error::{Error, Result};
use crate::forward::{design_matrix, AngleScan, ValueKind};
use crate::qmat::{
    c, density_from_cholesky, density_from_stokes, from_eigen, hermitian_eigen, lower_from_values, pauli_basis, trace,
    trace_product, CholeskyParams, ComplexMatrix, DensityMatrix, StokesTensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    LinearInversion,
    MaximallyMixed,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MleConfig {
    pub max_iterations: usize,
    /// Convergence threshold on the per-step cost decrease, in probability
    /// units.
    pub tolerance: f64,
    /// Use the closed-form gradient; otherwise central differences with
    /// `gradient_step`.
    pub analytic_gradient: bool,
    pub gradient_step: f64,
    pub initial: InitialGuess,
    /// Fit a multiplicative intensity scale. Required for counts data;
    /// probability data always uses scale 1.
    pub fit_scale: bool,
    /// Eigenvalue floor applied to the initial estimate before factoring.
    pub eigen_floor: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-10,
            analytic_gradient: true,
            gradient_step: 1e-6,
            initial: InitialGuess::LinearInversion,
            fit_scale: true,
            eigen_floor: 1e-6,
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if !(self.gradient_step > 0.0) {
            return Err(Error::invalid("gradient_step must be positive"));
        }
        if !(self.eigen_floor > 0.0 && self.eigen_floor < 0.1) {
            return Err(Error::invalid("eigen_floor must lie in (0, 0.1)"));
        }
        Ok(())
    }
}

/// Linear map from Stokes parameters to the probability of each measured
/// setting.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    n_qubits: usize,
    design: DMatrix<f64>,
    paulis: Vec<ComplexMatrix>,
}

impl MeasurementModel {
    /// `design[(k, j)]` is the probability contribution of `S_j` at
    /// setting `k`.
    pub fn new(n_qubits: usize, design: DMatrix<f64>) -> Result<Self> {
        if design.ncols() != 1 << (2 * n_qubits) {
            return Err(Error::Dimension {
                expected: 1 << (2 * n_qubits),
                actual: design.ncols(),
            });
        }
        Ok(Self {
            n_qubits,
            design,
            paulis: pauli_basis(n_qubits),
        })
    }

    pub fn for_scan(scan: &AngleScan) -> Self {
        Self::new(scan.n_qubits(), design_matrix(scan.waveplates(), scan.angles()))
            .expect("design matrix has 4^n columns")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_settings(&self) -> usize {
        self.design.nrows()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    fn stokes_of(&self, rho: &ComplexMatrix) -> DVector<f64> {
        DVector::from_iterator(self.paulis.len(), self.paulis.iter().map(|p| trace_product(rho, p).re))
    }

    pub fn probabilities(&self, rho: &DensityMatrix) -> Vec<f64> {
        (&self.design * self.stokes_of(rho.matrix())).iter().copied().collect()
    }

    /// Least-squares Stokes estimate rescaled so `S_0…0 = 1`. Returns the raw
    /// (possibly unphysical) matrix and the scale that was divided out.
    pub fn least_squares_estimate(&self, values: &[f64]) -> Result<(ComplexMatrix, f64)> {
        let y = DVector::from_column_slice(values);
        let svd = self.design.clone().svd(true, true);
        let s = svd
            .solve(&y, 1e-12 * svd.singular_values.max())
            .map_err(|e| Error::SelfCheck(e.to_string()))?;
        let norm = s[0];
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Degenerate(format!("least-squares trace {norm}")));
        }
        let stokes = StokesTensor::new(self.n_qubits, s.iter().map(|v| v / norm).collect())?;
        Ok((density_from_stokes(&stokes), norm))
    }
}

/// Cost `Σ (y_k − s p_k)²` as a function of the Cholesky parameters, with
/// the scale `s` profiled out when enabled.
struct Problem<'a> {
    model: &'a MeasurementModel,
    data: Vec<f64>,
    fit_scale: bool,
}

struct Evaluation {
    cost: f64,
    scale: f64,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        1 << self.model.n_qubits
    }

    fn evaluate(&self, params: &[f64], grad: Option<&mut [f64]>) -> Evaluation {
        let d = self.dim();
        let t = lower_from_values(d, params);
        let a = &t * t.adjoint();
        let tau = trace(&a).re;
        if !(tau > 0.0) {
            if let Some(g) = grad {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
            return Evaluation {
                cost: f64::INFINITY,
                scale: 0.0,
            };
        }
        let rho = a.unscale(tau);
        let stokes = self.model.stokes_of(&rho);
        let p = &self.model.design * &stokes;
        let scale = if self.fit_scale {
            let pp = p.dot(&p);
            if pp > 0.0 {
                (p.iter().zip(&self.data).map(|(a, b)| a * b).sum::<f64>() / pp).max(0.0)
            } else {
                0.0
            }
        } else {
            1.0
        };
        let resid: Vec<f64> = self.data.iter().zip(p.iter()).map(|(y, p)| y - scale * p).collect();
        let cost = resid.iter().map(|r| r * r).sum();

        if let Some(g) = grad {
            // dC/dS_j; the scale sits at its optimum so it contributes nothing
            let w = DVector::from_iterator(resid.len(), resid.iter().map(|r| -2.0 * scale * r));
            let gs = self.model.design.tr_mul(&w);
            let mut gmat = ComplexMatrix::zeros(d, d);
            for (pauli, &gj) in self.model.paulis.iter().zip(gs.iter()) {
                if gj != 0.0 {
                    gmat += pauli.scale(gj);
                }
            }
            let g_rho = gs.dot(&stokes);
            for i in 0..d {
                gmat[(i, i)] -= c(g_rho, 0.0);
            }
            let wmat = (gmat * &t).unscale(tau);
            for i in 0..d {
                g[i] = 2.0 * wmat[(i, i)].re;
            }
            let mut k = d;
            for i in 1..d {
                for j in 0..i {
                    g[k] = 2.0 * wmat[(i, j)].re;
                    g[k + 1] = 2.0 * wmat[(i, j)].im;
                    k += 2;
                }
            }
        }
        Evaluation { cost, scale }
    }
}

/// Cholesky parameters of `rho` after flooring its eigenvalues.
fn initial_params(rho: &ComplexMatrix, floor: f64) -> Result<Vec<f64>> {
    let (values, vectors) = hermitian_eigen(rho);
    let floored: Vec<f64> = values.iter().map(|v| v.max(floor)).collect();
    let total: f64 = floored.iter().sum();
    let floored: Vec<f64> = floored.iter().map(|v| v / total).collect();
    let m = from_eigen(&floored, &vectors);
    let chol = nalgebra::Cholesky::new(crate::qmat::hermitian_part(&m))
        .ok_or_else(|| Error::SelfCheck("floored estimate is not positive definite".into()))?;
    Ok(CholeskyParams::from_lower(&chol.l())?.into_values())
}

/// Fit `values` measured under `model`. Counts data is rescaled internally
/// so the convergence tolerance is in probability units; the reported cost
/// and scale are in the original units.
pub fn fit_model(
    model: &MeasurementModel,
    values: &[f64],
    kind: ValueKind,
    config: &MleConfig,
) -> Result<ReconstructionResult> {
    config.validate()?;
    if values.len() != model.n_settings() {
        return Err(Error::Dimension {
            expected: model.n_settings(),
            actual: values.len(),
        });
    }
    if values.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("all measured values are zero".into()));
    }
    let counts = kind == ValueKind::Counts;
    if counts && !config.fit_scale {
        return Err(Error::invalid("counts data needs the intensity scale enabled"));
    }
    // rough intensity: total counts over total probability of I/d
    let unit = if counts {
        values.iter().sum::<f64>() / model.design.column(0).sum()
    } else {
        1.0
    };
    let problem = Problem {
        model,
        data: values.iter().map(|v| v / unit).collect(),
        fit_scale: counts,
    };

    let start = match config.initial {
        InitialGuess::LinearInversion => {
            let (raw, _) = model.least_squares_estimate(&problem.data)?;
            project_physical(&raw)?.into_matrix()
        }
        InitialGuess::MaximallyMixed => DensityMatrix::maximally_mixed(model.n_qubits).into_matrix(),
    };
    let x0 = initial_params(&start, config.eigen_floor)?;

    let settings = optim::Settings {
        max_iterations: config.max_iterations,
        tolerance: config.tolerance,
    };
    let outcome = if config.analytic_gradient {
        let mut f = |x: &[f64], g: &mut [f64]| problem.evaluate(x, Some(g)).cost;
        optim::bfgs(&mut f, x0, settings)
    } else {
        let step = config.gradient_step;
        let mut f = |x: &[f64], g: &mut [f64]| {
            central_difference(|p| problem.evaluate(p, None).cost, x, step, g);
            problem.evaluate(x, None).cost
        };
        optim::bfgs(&mut f, x0, settings)
    };

    let eval = problem.evaluate(&outcome.x, None);
    let rho = density_from_cholesky(&CholeskyParams::new(model.n_qubits, outcome.x)?)?;
    Ok(ReconstructionResult {
        rho,
        method: Method::Mle,
        cost: eval.cost * unit * unit,
        initial_cost: outcome.initial_value * unit * unit,
        iterations: outcome.iterations,
        converged: outcome.converged,
        scale: counts.then_some(eval.scale * unit),
        normalization: None,
    })
}

/// Maximum-likelihood reconstruction of a waveplate scan with the forward
/// model as `p_fit`.
pub fn mle_fit(scan: &AngleScan, config: &MleConfig) -> Result<ReconstructionResult> {
    let model = MeasurementModel::for_scan(scan);
    fit_model(&model, scan.values(), scan.kind(), config)
}

#[cfg(test)]
pub(crate) fn cost_and_gradient(
    model: &MeasurementModel,
    data: &[f64],
    fit_scale: bool,
    params: &[f64],
) -> (f64, Vec<f64>) {
    let problem = Problem {
        model,
        data: data.to_vec(),
        fit_scale,
    };
    let mut g = vec![0.0; params.len()];
    let cost = problem.evaluate(params, Some(&mut g)).cost;
    (cost, g)
}
