//! Two-qubit scans with waveplates at rates 1 and 5: the closed-form
//! inversion, MLE, and the entanglement of the four Bell states.

use ftqst::forward::{simulate_scan, standard_waveplates};
use ftqst::qmat::{concurrence, fidelity_to_pure, states, DensityMatrix};
use ftqst::reconstruct::{linear_inversion, mle_fit, MleConfig};

fn main() -> ftqst::Result<()> {
    let wp = standard_waveplates(2);
    let bells = [
        ("Phi+", states::bell_phi_plus()),
        ("Phi-", states::bell_phi_minus()),
        ("Psi+", states::bell_psi_plus()),
        ("Psi-", states::bell_psi_minus()),
    ];
    for (name, psi) in bells {
        let rho = DensityMatrix::from_pure(&psi)?;
        let scan = simulate_scan(&rho, &wp, 100, Some(2000.0), 7)?;
        let lin = linear_inversion(&scan)?;
        let min_eig = lin.raw.clone().symmetric_eigenvalues().min();
        let fit = mle_fit(&scan, &MleConfig::default())?;
        println!(
            "{name}: closed form {}, F {:.4}, C {:.4}, {} iterations",
            lin.closed_form,
            fidelity_to_pure(&fit.rho, &psi)?,
            concurrence(&fit.rho)?,
            fit.iterations
        );
        println!("  smallest eigenvalue of the raw linear estimate {min_eig:+.2e}");
    }

    let psi = states::bell_psi_minus();
    let scan = simulate_scan(&DensityMatrix::from_pure(&psi)?, &wp, 100, None, 0)?;
    let raw = linear_inversion(&scan)?.raw;
    println!("noiseless Psi- by closed form:\n{:.3}", raw.map(|z| z.re));
    Ok(())
}
