//! Random states and unitaries for tests, examples and benchmarks.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{c, ComplexMatrix, DensityMatrix, Ket};

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-random pure state on `n_qubits`.
pub fn pure_state<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Ket {
    let d = 1 << n_qubits;
    let v = DVector::from_fn(d, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let n = v.norm();
    v.unscale(n)
}

/// Full-rank random mixed state `G G† / Tr(G G†)` with Ginibre `G`.
pub fn density<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> DensityMatrix {
    let d = 1 << n_qubits;
    let g = ginibre(d, d, rng);
    DensityMatrix::normalized(&g * g.adjoint()).expect("Ginibre product is positive definite")
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let qr = ginibre(dim, dim, rng).qr();
    let (q, r) = qr.unpack();
    // fix column phases so the distribution is Haar
    let phases = ComplexMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                c(1.0, 0.0)
            }
        } else {
            c(0.0, 0.0)
        }
    });
    q * phases
}
