//! Undo a systematic polarization rotation in software.

use std::f64::consts::{PI, TAU};

use ftqst::forward::{apply_virtual_waveplate, simulate_scan, standard_waveplates, virtual_waveplate};
use ftqst::qmat::{concurrence, fidelity_to_pure, states, ComplexMatrix, DensityMatrix};
use ftqst::reconstruct::{mle_fit, MleConfig};

fn main() -> ftqst::Result<()> {
    let psi = states::bell_phi_plus();
    let ideal = DensityMatrix::from_pure(&psi)?;
    // birefringent fibre on the second photon
    let fibre = ComplexMatrix::identity(2, 2).kronecker(&virtual_waveplate(0.507, -0.270).adjoint());
    let rotated = ideal.conjugate(&fibre)?;

    let scan = simulate_scan(&rotated, &standard_waveplates(2), 100, Some(5000.0), 3)?;
    let raw = mle_fit(&scan, &MleConfig::default())?.rho;
    println!(
        "raw:       F {:.4}, C {:.4}",
        fidelity_to_pure(&raw, &psi)?,
        concurrence(&raw)?
    );

    // coarse grid, then a finer one around the best point
    let score = |t: f64, p: f64| fidelity_to_pure(&apply_virtual_waveplate(&raw, &[(0.0, 0.0), (t, p)])?, &psi);
    let mut best = (0.0, 0.0, 0.0);
    for (centre, width) in [((PI / 2.0, 0.0), (PI, TAU)), ((0.0, 0.0), (0.2, 0.2))] {
        let c = if width.0 < 1.0 { (best.0, best.1) } else { centre };
        for i in 0..=40 {
            for j in 0..=40 {
                let t = c.0 + width.0 * (i as f64 / 40.0 - 0.5);
                let p = c.1 + width.1 * (j as f64 / 40.0 - 0.5);
                let f = score(t, p)?;
                if f > best.2 {
                    best = (t, p, f);
                }
            }
        }
    }
    let fixed = apply_virtual_waveplate(&raw, &[(0.0, 0.0), (best.0, best.1)])?;
    println!(
        "corrected: F {:.4}, C {:.4} at θ = {:.3}, φ = {:.3}",
        best.2,
        concurrence(&fixed)?,
        best.0,
        best.1
    );
    Ok(())
}
