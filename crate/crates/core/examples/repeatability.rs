//! Repeated noisy |V> scans: spread of the MLE fidelity over many runs.

use ftqst::forward::{simulate_scan, standard_waveplates};
use ftqst::qmat::{fidelity_to_pure, states, DensityMatrix};
use ftqst::reconstruct::{mle_fit, MleConfig};

fn main() -> ftqst::Result<()> {
    let psi = states::v();
    let rho = DensityMatrix::from_pure(&psi)?;
    let wp = standard_waveplates(1);
    let config = MleConfig::default();
    for intensity in [30.0, 90.0, 300.0, 900.0, 4500.0] {
        let f = (0..200u64)
            .map(|seed| {
                let scan = simulate_scan(&rho, &wp, 400, Some(intensity), seed)?;
                fidelity_to_pure(&mle_fit(&scan, &config)?.rho, &psi)
            })
            .collect::<ftqst::Result<Vec<_>>>()?;
        let n = f.len() as f64;
        let mean = f.iter().sum::<f64>() / n;
        let sigma = (f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        println!("{intensity:>7} counts/sample: F = {mean:.5} ± {sigma:.5} over 200 runs");
    }
    Ok(())
}
