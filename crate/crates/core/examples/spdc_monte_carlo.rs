//! Werner-like Psi- state from an SPDC source: point estimate with Monte
//! Carlo error bars at several count levels.

use ftqst::forward::{simulate_scan, standard_waveplates, werner_psi_minus};
use ftqst::qmat::{concurrence, fidelity_to_pure, states};
use ftqst::reconstruct::{mle_fit, MleConfig};
use ftqst::uncertainty::monte_carlo;

fn main() -> ftqst::Result<()> {
    let psi = states::bell_psi_minus();
    let rho = werner_psi_minus(0.94)?;
    let config = MleConfig::default();
    println!("true C = {:.4}", concurrence(&rho)?);
    for intensity in [500.0, 2000.0, 10000.0, 100000.0] {
        let scan = simulate_scan(&rho, &standard_waveplates(2), 100, Some(intensity), 0)?;
        let fit = mle_fit(&scan, &config)?;
        let mc = monte_carlo(&scan, 100, |s| mle_fit(s, &config), Some(&psi), 0)?;
        let (f, c) = (mc.fidelity.unwrap(), mc.concurrence.unwrap());
        println!(
            "{intensity:>8}: F = {:.4} ± {:.4}, C = {:.4} ± {:.4}, {} of {} samples used",
            fidelity_to_pure(&fit.rho, &psi)?,
            f.sigma,
            concurrence(&fit.rho)?,
            c.sigma,
            mc.n_used(),
            mc.n_samples
        );
    }
    Ok(())
}
