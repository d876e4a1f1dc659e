//! Which waveplate rate ratios keep every combined harmonic distinct.

use ftqst::harmonics::{frequency_set, harmonic_collisions};

fn main() -> ftqst::Result<()> {
    for m in [[1u32, 2], [1, 3], [1, 4], [1, 5], [1, 6], [2, 5]] {
        let set = frequency_set(&m)?;
        let collisions = harmonic_collisions(&m)?;
        println!(
            "{m:?}: {} coefficients, enough for 16 parameters: {}, {} collisions",
            set.coefficient_count(),
            set.has_enough_coefficients(),
            collisions.len()
        );
        if let Some(c) = collisions.first() {
            println!(
                "    e.g. harmonic {}: orders {:?} and {:?}",
                c.harmonic, c.first, c.second
            );
        }
    }
    let set = frequency_set(&[1, 5])?;
    println!("(1,5) cos {:?}", set.cos());
    println!("(1,5) sin {:?}", set.sin());
    Ok(())
}
