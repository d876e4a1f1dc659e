//! Noiseless and noisy single-qubit scans of the six cardinal states,
//! reconstructed by linear inversion and by MLE.

use ftqst::forward::{simulate_scan, standard_waveplates};
use ftqst::harmonics::{extract_coefficients, frequency_set};
use ftqst::qmat::{fidelity_to_pure, states};
use ftqst::reconstruct::{linear_reconstruct, mle_fit, MleConfig};

fn main() -> ftqst::Result<()> {
    let wp = standard_waveplates(1);
    let fset = frequency_set(&[1])?;
    println!("harmonics: cos {:?} sin {:?}", fset.cos(), fset.sin());

    let kets = [
        ("H", states::h()),
        ("V", states::v()),
        ("D", states::d()),
        ("A", states::a()),
        ("L", states::l()),
        ("R", states::r()),
    ];
    println!(
        "{:>5} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10}",
        "state", "a0", "a4", "b2", "b4", "F linear", "F MLE"
    );
    for (name, psi) in kets {
        let rho = ftqst::qmat::DensityMatrix::from_pure(&psi)?;
        let clean = simulate_scan(&rho, &wp, 400, None, 0)?;
        let spec = extract_coefficients(&clean, &fset)?;
        // 30 kcps for 30 ms per angle
        let noisy = simulate_scan(&rho, &wp, 400, Some(900.0), 1)?;
        let lin = fidelity_to_pure(&linear_reconstruct(&noisy)?.rho, &psi)?;
        let mle = fidelity_to_pure(&mle_fit(&noisy, &MleConfig::default())?.rho, &psi)?;
        println!(
            "{name:>5} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {lin:>10.5} {mle:>10.5}",
            spec.a0,
            spec.a(4),
            spec.b(2),
            spec.b(4)
        );
    }
    Ok(())
}
