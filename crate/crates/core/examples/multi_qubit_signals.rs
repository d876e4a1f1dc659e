//! Signals of |V...V> for one to four modes and their harmonic content.

use ftqst::forward::{nyquist_minimum, probability_signal, standard_waveplates, uniform_grid};
use ftqst::harmonics::{frequency_set, project};
use ftqst::qmat::{states, DensityMatrix};

fn main() -> ftqst::Result<()> {
    for n in 1..=4 {
        let wp = standard_waveplates(n);
        let mult: Vec<u32> = wp.iter().map(|w| w.multiplier).collect();
        let set = frequency_set(&mult)?;
        let rho = DensityMatrix::from_pure(&states::product(&vec![states::v(); n]))?;
        let samples = nyquist_minimum(&wp);
        let grid = uniform_grid(samples);
        let p = probability_signal(&rho, &wp, &grid)?;
        let spec = project(&grid, &p, &set)?;
        let strongest = spec
            .cos_terms()
            .chain(spec.sin_terms())
            .fold(
                (0, 0.0f64),
                |best, (f, v)| if v.abs() > best.1.abs() { (f, v) } else { best },
            );
        println!(
            "n = {n}: rates {mult:?}, {} cos + {} sin harmonics, Nyquist {samples} samples, mean {:.4}, strongest {} ({:+.4})",
            set.cos().len(),
            set.sin().len(),
            spec.a0,
            strongest.0,
            strongest.1
        );
    }
    Ok(())
}
