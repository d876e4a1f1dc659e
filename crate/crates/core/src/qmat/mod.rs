//! Complex-matrix and quantum-state core.
//!
//! Basis convention: `|H> = (1, 0)`, `|V> = (0, 1)`. Multi-qubit operators
//! are built with the leftmost tensor factor belonging to qubit 1, which is
//! the arm with the slowest waveplate.

pub mod random;
pub mod states;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type Ket = DVector<Complex64>;

/// Hermiticity tolerance for [`DensityMatrix`] construction.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Unit-trace tolerance for [`DensityMatrix`] construction.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest eigenvalue still accepted as positive semidefinite.
pub const EIGEN_FLOOR: f64 = -1e-10;

/// Largest supported register.
pub const MAX_QUBITS: usize = 4;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Pauli matrix `sigma_i`, with `sigma_0` the identity and 1, 2, 3 = x, y, z.
pub fn pauli(i: usize) -> Result<ComplexMatrix> {
    let (o, l) = (c(0.0, 0.0), c(1.0, 0.0));
    let m = match i {
        0 => [l, o, o, l],
        1 => [o, l, l, o],
        2 => [o, -I, I, o],
        3 => [l, o, o, -l],
        _ => return Err(Error::invalid(format!("pauli index {i} out of range 0..=3"))),
    };
    Ok(ComplexMatrix::from_row_slice(2, 2, &m))
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// `sigma_{i1} ⊗ ... ⊗ sigma_{in}`.
pub fn pauli_string(indices: &[usize]) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::identity(1, 1);
    for &i in indices {
        out = tensor(&out, &pauli(i)?);
    }
    Ok(out)
}

/// Decompose a flat Stokes index into per-qubit Pauli indices (qubit 1 first).
pub fn stokes_indices(flat: usize, n_qubits: usize) -> Vec<usize> {
    (0..n_qubits).map(|m| (flat >> (2 * (n_qubits - 1 - m))) & 3).collect()
}

/// All `4^n` Pauli strings in flat Stokes order.
pub fn pauli_basis(n_qubits: usize) -> Vec<ComplexMatrix> {
    (0..1usize << (2 * n_qubits))
        .map(|k| pauli_string(&stokes_indices(k, n_qubits)).expect("indices in range"))
        .collect()
}

pub(crate) fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `Tr[a b]` without forming the product.
pub(crate) fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let mut acc = c(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub(crate) fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub(crate) fn n_qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::invalid(format!("dimension {dim} is not a power of two")));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::invalid(format!(
            "{n} qubits exceeds the supported maximum of {MAX_QUBITS}"
        )));
    }
    Ok(n)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub(crate) fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Rebuild `V diag(values) V†`.
pub(crate) fn from_eigen(values: &[f64], vectors: &ComplexMatrix) -> ComplexMatrix {
    let d = ComplexMatrix::from_diagonal(&DVector::from_iterator(values.len(), values.iter().map(|&v| c(v, 0.0))));
    vectors * d * vectors.adjoint()
}

/// A physical `2^n x 2^n` density matrix: Hermitian, unit trace, positive
/// semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validate `matrix` against the Hermitian, trace and eigenvalue
    /// tolerances.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotPhysical(format!(
                "matrix is {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n_qubits = n_qubits_for_dim(matrix.nrows())?;
        let herm = max_abs_diff(&matrix, &matrix.adjoint());
        if herm > HERMITIAN_TOL {
            return Err(Error::NotPhysical(format!("max |rho - rho†| = {herm:e}")));
        }
        let tr = trace(&matrix);
        if (tr - c(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::NotPhysical(format!("trace {tr}")));
        }
        let matrix = hermitian_part(&matrix);
        let (values, _) = hermitian_eigen(&matrix);
        if values[0] < EIGEN_FLOOR {
            return Err(Error::NotPhysical(format!("eigenvalue {:e}", values[0])));
        }
        Ok(Self { n_qubits, matrix })
    }

    /// Hermitize, then rescale to unit trace before validating. Use this for
    /// matrices that are physical up to floating-point drift.
    pub fn normalized(matrix: ComplexMatrix) -> Result<Self> {
        let h = hermitian_part(&matrix);
        let tr = trace(&h).re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::Degenerate(format!("trace {tr} cannot be normalized")));
        }
        Self::new(h.unscale(tr))
    }

    pub fn from_pure(psi: &Ket) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::Degenerate("zero state vector".into()));
        }
        let psi = psi.unscale(norm);
        Self::new(&psi * psi.adjoint())
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        Self {
            n_qubits,
            matrix: ComplexMatrix::identity(d, d).unscale(d as f64),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Eigenvalues in ascending order; values in `[-1e-10, 0)` are clamped
    /// to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let (values, _) = hermitian_eigen(&self.matrix);
        values
            .into_iter()
            .map(|v| if (EIGEN_FLOOR..0.0).contains(&v) { 0.0 } else { v })
            .collect()
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.matrix, &self.matrix).re
    }

    /// `½ ‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let (values, _) = hermitian_eigen(&(&self.matrix - &other.matrix));
        Ok(0.5 * values.iter().map(|v| v.abs()).sum::<f64>())
    }

    /// `U ρ U†` for a unitary `U`.
    pub fn conjugate(&self, unitary: &ComplexMatrix) -> Result<Self> {
        if unitary.nrows() != self.dim() || !unitary.is_square() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: unitary.nrows(),
            });
        }
        Self::normalized(unitary * &self.matrix * unitary.adjoint())
    }
}

/// Generalized Stokes parameters `S_{i1..in} = Tr[ρ σ_{i1} ⊗ … ⊗ σ_{in}]`
/// in flat order (qubit 1 is the most significant base-4 digit).
#[derive(Debug, Clone, PartialEq)]
pub struct StokesTensor {
    n_qubits: usize,
    values: Vec<f64>,
}

impl StokesTensor {
    pub fn new(n_qubits: usize, values: Vec<f64>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!("unsupported qubit count {n_qubits}")));
        }
        let expected = 1 << (2 * n_qubits);
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self { n_qubits, values })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value for per-qubit indices, e.g. `get(&[1, 1])` is `S_{xx}`.
    pub fn get(&self, indices: &[usize]) -> Option<f64> {
        if indices.len() != self.n_qubits || indices.iter().any(|&i| i > 3) {
            return None;
        }
        let flat = indices.iter().fold(0, |acc, &i| acc * 4 + i);
        Some(self.values[flat])
    }
}

/// Stokes parameters of any Hermitian matrix.
pub fn stokes_from_matrix(m: &ComplexMatrix) -> Result<StokesTensor> {
    let n = n_qubits_for_dim(m.nrows())?;
    let herm = max_abs_diff(m, &m.adjoint());
    if herm > HERMITIAN_TOL {
        return Err(Error::NotPhysical(format!(
            "non-Hermitian input, max |m - m†| = {herm:e}"
        )));
    }
    let values = pauli_basis(n).iter().map(|p| trace_product(m, p).re).collect();
    StokesTensor::new(n, values)
}

pub fn stokes_from_density(rho: &DensityMatrix) -> StokesTensor {
    stokes_from_matrix(rho.matrix()).expect("density matrices are Hermitian")
}

/// `ρ = 2^{-n} Σ S_{i1..in} σ_{i1} ⊗ … ⊗ σ_{in}`. The result is only a
/// physical state when `s` came from one.
pub fn density_from_stokes(s: &StokesTensor) -> ComplexMatrix {
    let d = 1usize << s.n_qubits;
    let mut out = ComplexMatrix::zeros(d, d);
    for (p, &v) in pauli_basis(s.n_qubits).iter().zip(&s.values) {
        if v != 0.0 {
            out += p.scale(v);
        }
    }
    out.unscale(d as f64)
}

/// Real parametrization of a lower-triangular `T` with real diagonal.
///
/// Layout: the `d` diagonal entries first, then each strictly-lower entry
/// in row-major order as a `(re, im)` pair, `4^n` reals in total.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyParams {
    n_qubits: usize,
    values: Vec<f64>,
}

impl CholeskyParams {
    pub fn new(n_qubits: usize, values: Vec<f64>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!("unsupported qubit count {n_qubits}")));
        }
        let expected = 1 << (2 * n_qubits);
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self { n_qubits, values })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Parameters of an existing lower-triangular matrix; the upper triangle
    /// and the imaginary part of the diagonal are ignored.
    pub fn from_lower(t: &ComplexMatrix) -> Result<Self> {
        let n = n_qubits_for_dim(t.nrows())?;
        let d = t.nrows();
        let mut values = Vec::with_capacity(d * d);
        values.extend((0..d).map(|i| t[(i, i)].re));
        for i in 1..d {
            for j in 0..i {
                values.push(t[(i, j)].re);
                values.push(t[(i, j)].im);
            }
        }
        Self::new(n, values)
    }

    pub fn to_lower(&self) -> ComplexMatrix {
        lower_from_values(1 << self.n_qubits, &self.values)
    }
}

pub(crate) fn lower_from_values(d: usize, values: &[f64]) -> ComplexMatrix {
    let mut t = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        t[(i, i)] = c(values[i], 0.0);
    }
    let mut k = d;
    for i in 1..d {
        for j in 0..i {
            t[(i, j)] = c(values[k], values[k + 1]);
            k += 2;
        }
    }
    t
}

/// `ρ = T T† / Tr(T T†)`.
pub fn density_from_cholesky(params: &CholeskyParams) -> Result<DensityMatrix> {
    let t = params.to_lower();
    let a = &t * t.adjoint();
    let tr = trace(&a).re;
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::Degenerate("Cholesky parameters are all zero".into()));
    }
    Ok(DensityMatrix {
        n_qubits: params.n_qubits,
        matrix: hermitian_part(&a).unscale(tr),
    })
}

/// `⟨ψ|ρ|ψ⟩` for a normalized pure target.
pub fn fidelity_to_pure(rho: &DensityMatrix, psi: &Ket) -> Result<f64> {
    if psi.len() != rho.dim() {
        return Err(Error::Dimension {
            expected: rho.dim(),
            actual: psi.len(),
        });
    }
    let norm = psi.norm_squared();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("target state has norm² {norm}")));
    }
    let f = (psi.adjoint() * rho.matrix() * psi)[(0, 0)].re;
    Ok(f.clamp(0.0, 1.0))
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::Dimension {
            expected: 4,
            actual: rho.dim(),
        });
    }
    let yy = tensor(&pauli(2)?, &pauli(2)?);
    let flipped = &yy * rho.matrix().map(|z| z.conj()) * &yy;

    // eigenvalues of ρ ρ̃ equal those of √ρ ρ̃ √ρ, which is Hermitian
    let (values, vectors) = hermitian_eigen(rho.matrix());
    let roots: Vec<f64> = values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let sqrt_rho = from_eigen(&roots, &vectors);
    let r = &sqrt_rho * flipped * &sqrt_rho;
    let (mut lambdas, _) = hermitian_eigen(&r);
    for l in lambdas.iter_mut() {
        *l = l.max(0.0).sqrt();
    }
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let c = lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3];
    Ok(c.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::states;
    use super::*;
    use approx::assert_abs_diff_eq;

    fn werner(p: f64) -> DensityMatrix {
        let phi = states::bell_phi_plus();
        let pure = &phi * phi.adjoint();
        let m = pure.scale(p) + ComplexMatrix::identity(4, 4).scale((1.0 - p) / 4.0);
        DensityMatrix::new(m).unwrap()
    }

    #[test]
    fn pauli_basics() {
        assert_eq!(pauli(0).unwrap(), ComplexMatrix::identity(2, 2));
        let z = pauli(3).unwrap();
        assert_eq!(z[(0, 0)], c(1.0, 0.0));
        assert_eq!(z[(1, 1)], c(-1.0, 0.0));
        assert_eq!(z[(0, 1)], c(0.0, 0.0));
        assert!(pauli(4).is_err());
    }

    #[test]
    fn pauli_orthogonality_table() {
        for i in 0..4 {
            for j in 0..4 {
                let t = trace_product(&pauli(i).unwrap(), &pauli(j).unwrap());
                let expected = if i == j { 2.0 } else { 0.0 };
                assert_abs_diff_eq!(t.re, expected, epsilon = 1e-15);
                assert_abs_diff_eq!(t.im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn tensor_products() {
        let id = ComplexMatrix::identity(2, 2);
        assert_eq!(tensor(&id, &id), ComplexMatrix::identity(4, 4));
        let zz = tensor(&pauli(3).unwrap(), &pauli(3).unwrap());
        let diag: Vec<f64> = zz.diagonal().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn stokes_examples() {
        let s = stokes_from_density(&DensityMatrix::maximally_mixed(2));
        assert_abs_diff_eq!(s.values()[0], 1.0, epsilon = 1e-15);
        assert!(s.values()[1..].iter().all(|v| v.abs() < 1e-15));

        let h = DensityMatrix::from_pure(&states::h()).unwrap();
        let s = stokes_from_density(&h);
        assert_eq!(s.values(), &[1.0, 0.0, 0.0, 1.0]);

        let phi = DensityMatrix::from_pure(&states::bell_phi_plus()).unwrap();
        let s = stokes_from_density(&phi);
        for k in 0..16 {
            let idx = stokes_indices(k, 2);
            let expected = match (idx[0], idx[1]) {
                (0, 0) | (1, 1) | (3, 3) => 1.0,
                (2, 2) => -1.0,
                _ => 0.0,
            };
            assert_abs_diff_eq!(s.values()[k], expected, epsilon = 1e-14);
        }
        assert_eq!(s.get(&[2, 2]), Some(s.values()[10]));
    }

    #[test]
    fn stokes_rejects_non_hermitian() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(stokes_from_matrix(&m).is_err());
    }

    #[test]
    fn density_from_stokes_examples() {
        let mixed = density_from_stokes(&StokesTensor::new(1, vec![1.0, 0.0, 0.0, 0.0]).unwrap());
        assert_abs_diff_eq!(max_abs_diff(&mixed, DensityMatrix::maximally_mixed(1).matrix()), 0.0);
        let h = density_from_stokes(&StokesTensor::new(1, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let expected = DensityMatrix::from_pure(&states::h()).unwrap();
        assert!(max_abs_diff(&h, expected.matrix()) < 1e-15);
    }

    #[test]
    fn cholesky_examples() {
        let d = 4;
        let mut v = vec![0.0; 16];
        v[..d].iter_mut().for_each(|x| *x = 0.5);
        let rho = density_from_cholesky(&CholeskyParams::new(2, v).unwrap()).unwrap();
        assert!(max_abs_diff(rho.matrix(), DensityMatrix::maximally_mixed(2).matrix()) < 1e-15);

        let mut v = vec![0.0; 16];
        v[0] = 0.3;
        let rho = density_from_cholesky(&CholeskyParams::new(2, v).unwrap()).unwrap();
        let hh = DensityMatrix::from_pure(&states::parse_ket("HH").unwrap()).unwrap();
        assert!(max_abs_diff(rho.matrix(), hh.matrix()) < 1e-15);

        let zero = CholeskyParams::new(1, vec![0.0; 4]).unwrap();
        assert!(matches!(density_from_cholesky(&zero), Err(Error::Degenerate(_))));
        assert!(CholeskyParams::new(1, vec![0.0; 3]).is_err());
    }

    #[test]
    fn cholesky_layout_round_trip() {
        let values: Vec<f64> = (0..16).map(|k| k as f64 * 0.1 - 0.4).collect();
        let p = CholeskyParams::new(2, values.clone()).unwrap();
        let back = CholeskyParams::from_lower(&p.to_lower()).unwrap();
        assert_eq!(back.values(), &values[..]);
    }

    #[test]
    fn fidelity_examples() {
        let h = DensityMatrix::from_pure(&states::h()).unwrap();
        assert_abs_diff_eq!(fidelity_to_pure(&h, &states::h()).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fidelity_to_pure(&h, &states::v()).unwrap(), 0.0, epsilon = 1e-15);
        let mixed = DensityMatrix::maximally_mixed(2);
        let f = fidelity_to_pure(&mixed, &states::bell_phi_plus()).unwrap();
        assert_abs_diff_eq!(f, 0.25, epsilon = 1e-15);
        let unnormalized = states::h().scale(2.0);
        assert!(fidelity_to_pure(&h, &unnormalized).is_err());
    }

    #[test]
    fn concurrence_examples() {
        for name in ["phi+", "phi-", "psi+", "psi-"] {
            let bell = DensityMatrix::from_pure(&states::parse_ket(name).unwrap()).unwrap();
            assert_abs_diff_eq!(concurrence(&bell).unwrap(), 1.0, epsilon = 1e-7);
        }
        assert_abs_diff_eq!(concurrence(&DensityMatrix::maximally_mixed(2)).unwrap(), 0.0);
        assert_abs_diff_eq!(concurrence(&werner(0.8)).unwrap(), 0.7, epsilon = 1e-7);
        assert!(concurrence(&DensityMatrix::maximally_mixed(1)).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let bad_trace = ComplexMatrix::identity(2, 2);
        assert!(matches!(DensityMatrix::new(bad_trace), Err(Error::NotPhysical(_))));
        let negative = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1.1, 0.0), c(-0.1, 0.0)]));
        assert!(matches!(DensityMatrix::new(negative), Err(Error::NotPhysical(_))));
        assert!(DensityMatrix::new(ComplexMatrix::identity(3, 3).unscale(3.0)).is_err());
    }

    #[test]
    fn trace_distance_of_orthogonal_states() {
        let h = DensityMatrix::from_pure(&states::h()).unwrap();
        let v = DensityMatrix::from_pure(&states::v()).unwrap();
        assert_abs_diff_eq!(h.trace_distance(&v).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(h.trace_distance(&h).unwrap(), 0.0, epsilon = 1e-14);
    }
}
