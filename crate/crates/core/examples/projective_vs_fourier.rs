//! Fourier and 16-setting projective tomography of the same random states at
//! equal total counts, compared within Monte Carlo error bars.

use ftqst::analysis::{compare_methods, MethodEstimate};
use ftqst::forward::{simulate_scan, standard_waveplates};
use ftqst::qmat::{random, DensityMatrix};
use ftqst::reconstruct::{mle_fit, projector_labels, reconstruct_projective, simulate_projective, MleConfig};
use ftqst::uncertainty::monte_carlo;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ftqst::Result<()> {
    println!("projectors: {}", projector_labels(2).join(" "));
    let config = MleConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..6u64 {
        let psi = random::pure_state(2, &mut rng);
        let pure = &psi * psi.adjoint();
        let rho =
            DensityMatrix::normalized(pure.scale(0.85) + ftqst::qmat::ComplexMatrix::identity(4, 4).scale(0.15 / 4.0))?;

        let scan = simulate_scan(&rho, &standard_waveplates(2), 100, Some(1000.0), k)?;
        let a = mle_fit(&scan, &config)?;
        let amc = monte_carlo(&scan, 30, |s| mle_fit(s, &config), Some(&psi), k)?;
        let data = simulate_projective(&rho, Some(6250.0), k)?;
        let b = reconstruct_projective(&data, &config)?;
        let bmc = monte_carlo(&data, 30, |d| reconstruct_projective(d, &config), Some(&psi), k)?;

        let ea = MethodEstimate::from_reports(&a, &amc, &psi)?;
        let eb = MethodEstimate::from_reports(&b, &bmc, &psi)?;
        let cmp = compare_methods(&ea, &eb);
        println!(
            "state {k}: Fourier {:.4} ± {:.4}, projective {:.4} ± {:.4}, agree {}",
            ea.fidelity, ea.fidelity_sigma, eb.fidelity, eb.fidelity_sigma, cmp.fidelity.agree
        );
    }
    Ok(())
}
