//! Acceptance gate. Prints one line per criterion and fails if any is red.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ftqst::analysis::{compare_methods, fss_fit, MethodEstimate, TimeBinSeries};
use ftqst::forward::{
    apply_virtual_waveplate, qd_state, simulate_scan, standard_waveplates, time_bin_grid, uniform_grid,
    werner_psi_minus,
};
use ftqst::harmonics::{extract_coefficients, frequency_set, harmonic_collisions, HarmonicSpectrum};
use ftqst::qmat::{
    concurrence, fidelity_to_pure, max_abs_diff, random, states, stokes_from_density, DensityMatrix, Ket,
};
use ftqst::reconstruct::{
    invert_numerical, invert_two_qubit, linear_reconstruct, mle_fit, reconstruct_projective, simulate_projective,
    stokes_to_spectrum_map, MleConfig,
};
use ftqst::uncertainty::monte_carlo;
use nalgebra::DVector;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn mean_sigma(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn mixed(psi: &Ket, p: f64) -> DensityMatrix {
    let d = psi.len();
    let m = (psi * psi.adjoint()).scale(p) + ftqst::qmat::ComplexMatrix::identity(d, d).scale((1.0 - p) / d as f64);
    DensityMatrix::normalized(m).unwrap()
}

fn single_qubit_round_trip() -> Outcome {
    let start = Instant::now();
    let wp = standard_waveplates(1);
    let mut worst = 1.0f64;
    for (name, psi) in [
        ("H", states::h()),
        ("V", states::v()),
        ("D", states::d()),
        ("L", states::l()),
    ] {
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let scan = simulate_scan(&rho, &wp, 400, None, 0).unwrap();
        let lin = fidelity_to_pure(&linear_reconstruct(&scan).unwrap().rho, &psi).unwrap();
        let mle = fidelity_to_pure(&mle_fit(&scan, &MleConfig::default()).unwrap().rho, &psi).unwrap();
        if lin.min(mle) < 0.9999 {
            return Err(format!("{name}: linear {lin:.6}, MLE {mle:.6}"));
        }
        worst = worst.min(lin).min(mle);
    }
    let t = start.elapsed();
    check(within(t, 5.0), format!("min F {worst:.8}, {:.2} s", t.as_secs_f64()))
}

fn repeatability() -> Outcome {
    let start = Instant::now();
    let psi = states::v();
    let rho = DensityMatrix::from_pure(&psi).unwrap();
    let wp = standard_waveplates(1);
    let f: Vec<f64> = (0..200u64)
        .map(|seed| {
            let scan = simulate_scan(&rho, &wp, 400, Some(900.0), seed).unwrap();
            fidelity_to_pure(&mle_fit(&scan, &MleConfig::default()).unwrap().rho, &psi).unwrap()
        })
        .collect();
    let (m, s) = mean_sigma(&f);
    let t = start.elapsed();
    check(
        m >= 0.99 && s <= 0.005 && within(t, 300.0),
        format!("mean F {m:.5}, σ {s:.5}, {:.2} s", t.as_secs_f64()),
    )
}

fn two_qubit_inversion() -> Outcome {
    let wp = standard_waveplates(2);
    let fset = frequency_set(&[1, 5]).unwrap();
    let map = stokes_to_spectrum_map(&wp, &fset, 100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    // random Hermitian matrices, physical or not, pushed through the forward map
    for k in 0..200 {
        let s: Vec<f64> = if k % 2 == 0 {
            stokes_from_density(&random::density(2, &mut rng)).values().to_vec()
        } else {
            (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let coeffs = &map * DVector::from_column_slice(&s);
        let n_cos = fset.cos().len();
        let cos: Vec<(u32, f64)> = fset
            .cos()
            .iter()
            .enumerate()
            .map(|(i, &f)| (f, coeffs[1 + i]))
            .collect();
        let sin: Vec<(u32, f64)> = fset
            .sin()
            .iter()
            .enumerate()
            .map(|(i, &f)| (f, coeffs[1 + n_cos + i]))
            .collect();
        let spec = HarmonicSpectrum::new(fset.clone(), coeffs[0], &cos, &sin).unwrap();
        let closed = invert_two_qubit(&spec).unwrap();
        let numeric = invert_numerical(&spec, &wp).unwrap();
        worst = worst.max(max_abs_diff(&closed, &numeric));
    }
    if worst > 1e-9 {
        return Err(format!("closed form vs numerical {worst:e}"));
    }
    let mut min_f = 1.0f64;
    for psi in [
        states::bell_phi_plus(),
        states::bell_psi_minus(),
        states::product(&[states::h(), states::h()]),
    ] {
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let scan = simulate_scan(&rho, &wp, 100, None, 0).unwrap();
        min_f = min_f
            .min(fidelity_to_pure(&linear_reconstruct(&scan).unwrap().rho, &psi).unwrap())
            .min(fidelity_to_pure(&mle_fit(&scan, &MleConfig::default()).unwrap().rho, &psi).unwrap());
    }
    check(
        min_f >= 1.0 - 1e-6,
        format!("max entry diff {worst:.1e}, min F {min_f:.9}"),
    )
}

fn spdc_werner() -> Outcome {
    let start = Instant::now();
    let psi = states::bell_psi_minus();
    let rho = werner_psi_minus(0.94).unwrap();
    let scan = simulate_scan(&rho, &standard_waveplates(2), 100, Some(500.0), 0).unwrap();
    let config = MleConfig::default();
    let point = mle_fit(&scan, &config).map_err(|e| e.to_string())?;
    let f = fidelity_to_pure(&point.rho, &psi).unwrap();
    let c = concurrence(&point.rho).unwrap();
    let mc = monte_carlo(&scan, 100, |s| mle_fit(s, &config), Some(&psi), 0).map_err(|e| e.to_string())?;
    let fs = mc.fidelity.unwrap();
    let cs = mc.concurrence.unwrap();
    let t = start.elapsed();
    check(
        (f - 0.94).abs() <= 2.0 * fs.sigma && fs.sigma <= 0.02 && within(t, 600.0),
        format!(
            "F {f:.4} ± {:.4} (MC mean {:.4}), C {c:.4} ± {:.4}, {} excluded, {:.2} s",
            fs.sigma,
            fs.mean,
            cs.sigma,
            mc.n_excluded,
            t.as_secs_f64()
        ),
    )
}

fn fss_series(intensity: Option<f64>, seed: u64) -> Result<(f64, f64), String> {
    let times = time_bin_grid(40, 800.0);
    let target = states::bell_phi_plus();
    let wp = standard_waveplates(2);
    let config = MleConfig::default();
    let (mut ft, mut proj) = (Vec::new(), Vec::new());
    for (k, &t) in times.iter().enumerate() {
        let rho = qd_state(t, 5.44);
        let s = seed.wrapping_mul(1000) + k as u64;
        let scan = simulate_scan(&rho, &wp, 100, intensity, s).map_err(|e| e.to_string())?;
        ft.push(mle_fit(&scan, &config).map_err(|e| e.to_string())?.rho);
        let data = simulate_projective(&rho, intensity, s).map_err(|e| e.to_string())?;
        proj.push(reconstruct_projective(&data, &config).map_err(|e| e.to_string())?.rho);
    }
    let zeros = vec![0.0; times.len()];
    let fit = |states: &[DensityMatrix]| -> Result<f64, String> {
        let series = TimeBinSeries::from_states(&times, states, &zeros, &target).map_err(|e| e.to_string())?;
        Ok(fss_fit(&series).map_err(|e| e.to_string())?.fss)
    };
    Ok((fit(&ft)?, fit(&proj)?))
}

fn fss_recovery() -> Outcome {
    let (a, b) = fss_series(None, 0)?;
    let clean = (a - 5.44).abs() <= 0.05 && (b - 5.44).abs() <= 0.05 && (a - b).abs() <= 0.02;
    let (na, nb) = fss_series(Some(200.0), 1)?;
    let noisy = (na - 5.44).abs() <= 0.15 && (nb - 5.44).abs() <= 0.15;
    check(
        clean && noisy,
        format!("noiseless FT {a:.4} / projective {b:.4}; noisy FT {na:.4} / projective {nb:.4} µeV"),
    )
}

fn cross_method() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let config = MleConfig::default();
    let wp = standard_waveplates(2);
    let mut agree = 0;
    for k in 0..20u64 {
        let psi = random::pure_state(2, &mut rng);
        let rho = mixed(&psi, rng.random_range(0.7..0.95));
        let scan = simulate_scan(&rho, &wp, 100, Some(1000.0), k).unwrap();
        let a = mle_fit(&scan, &config).map_err(|e| e.to_string())?;
        let amc = monte_carlo(&scan, 30, |s| mle_fit(s, &config), Some(&psi), k).map_err(|e| e.to_string())?;
        let data = simulate_projective(&rho, Some(6250.0), k).unwrap();
        let b = reconstruct_projective(&data, &config).map_err(|e| e.to_string())?;
        let bmc =
            monte_carlo(&data, 30, |d| reconstruct_projective(d, &config), Some(&psi), k).map_err(|e| e.to_string())?;
        let ea = MethodEstimate::from_reports(&a, &amc, &psi).unwrap();
        let eb = MethodEstimate::from_reports(&b, &bmc, &psi).unwrap();
        if compare_methods(&ea, &eb).fidelity.agree {
            agree += 1;
        }
    }
    check(agree >= 18, format!("{agree}/20 agree"))
}

/// Oracle for the collision test: the distinct frequencies reachable by the
/// products of per-mode harmonics, enumerated without reference to the crate.
fn distinct_harmonics(multipliers: &[u32]) -> usize {
    let mut freqs = std::collections::BTreeSet::new();
    for code in 0..5i64.pow(multipliers.len() as u32) {
        let mut rest = code;
        let mut f = 0i64;
        for &r in multipliers {
            f += 2 * (rest % 5 - 2) * r as i64;
            rest /= 5;
        }
        freqs.insert(f.abs());
    }
    // DC contributes one real parameter, every other frequency two.
    freqs.iter().map(|&f| if f == 0 { 1 } else { 2 }).sum()
}

fn frequency_ratio() -> Outcome {
    let start = Instant::now();
    let good = harmonic_collisions(&[1, 5]).unwrap().is_empty() && distinct_harmonics(&[1, 5]) >= 16;
    let mut bad = Vec::new();
    for m in [[1u32, 2], [1, 3]] {
        let collisions = harmonic_collisions(&m).unwrap().len();
        let params = distinct_harmonics(&m);
        bad.push((m, collisions, params));
    }
    let rejected = bad.iter().all(|&(_, c, p)| c > 0 || p < 16);
    let t = start.elapsed();
    check(
        good && rejected && within(t, 1.0),
        format!(
            "(1,5) clean; {}; {:.3} s",
            bad.iter()
                .map(|(m, c, p)| format!("{m:?}: {c} collisions, {p} parameters"))
                .collect::<Vec<_>>()
                .join("; "),
            t.as_secs_f64()
        ),
    )
}

fn band_limited() -> Outcome {
    let mut worst = 0.0f64;
    let mut planner = FftPlanner::<f64>::new();
    for n in 1..=4usize {
        let wp = standard_waveplates(n);
        let mult: Vec<u32> = wp.iter().map(|w| w.multiplier).collect();
        let fset = frequency_set(&mult).unwrap();
        let psi = states::product(&vec![states::v(); n]);
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let size = 4096;
        let p = ftqst::forward::probability_signal(&rho, &wp, &uniform_grid(size)).unwrap();
        let mut buf: Vec<Complex64> = p.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        planner.plan_fft_forward(size).process(&mut buf);
        let (mut total, mut outside) = (0.0, 0.0);
        for (j, z) in buf.iter().enumerate().take(size / 2 + 1) {
            // bin j holds harmonic 2j of θ
            let f = 2 * j as u32;
            let (c, s) = (z.re.powi(2), z.im.powi(2));
            total += c + s;
            if f != 0 && !fset.cos().contains(&f) {
                outside += c;
            }
            if !fset.sin().contains(&f) {
                outside += s;
            }
        }
        worst = worst.max(outside / total);
    }
    check(worst < 1e-18, format!("max out-of-set power {worst:.1e}"))
}

fn runner() -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases: 64,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    )
}

fn invariants() -> Outcome {
    let mut passed = Vec::new();
    let mut run = |name: &str, result: Result<(), String>| -> Result<(), String> {
        result.map_err(|e| format!("{name}: {e}"))?;
        passed.push(name.to_string());
        Ok(())
    };

    run(
        "round trip",
        runner()
            .run(&(any::<u64>(), 1usize..=2), |(seed, n)| {
                let rho = random::density(n, &mut ChaCha8Rng::seed_from_u64(seed));
                let scan = simulate_scan(&rho, &standard_waveplates(n), 400, None, 0).unwrap();
                let est = linear_reconstruct(&scan).unwrap();
                prop_assert!(est.rho.trace_distance(&rho).unwrap() < 1e-9);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    )?;

    run(
        "Parseval",
        runner()
            .run(&(any::<u64>(), 1usize..=2), |(seed, n)| {
                let rho = random::density(n, &mut ChaCha8Rng::seed_from_u64(seed));
                let wp = standard_waveplates(n);
                let scan = simulate_scan(&rho, &wp, 200, None, 0).unwrap();
                let fset = frequency_set(&wp.iter().map(|w| w.multiplier).collect::<Vec<_>>()).unwrap();
                let spec = extract_coefficients(&scan, &fset).unwrap();
                let lhs = scan.values().iter().map(|p| p * p).sum::<f64>() / scan.len() as f64;
                let rhs = spec.a0.powi(2)
                    + 0.5
                        * spec
                            .cos_terms()
                            .chain(spec.sin_terms())
                            .map(|(_, v)| v * v)
                            .sum::<f64>();
                prop_assert!((lhs - rhs).abs() < 1e-12, "{} vs {}", lhs, rhs);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    )?;

    run(
        "virtual waveplate",
        runner()
            .run(
                &(any::<u64>(), prop::collection::vec((0.0..3.2f64, 0.0..6.3f64), 2)),
                |(seed, corr)| {
                    let rho = random::density(2, &mut ChaCha8Rng::seed_from_u64(seed));
                    let out = apply_virtual_waveplate(&rho, &corr).unwrap();
                    let (a, b) = (rho.eigenvalues(), out.eigenvalues());
                    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    prop_assert!(diff < 1e-12);
                    prop_assert!((concurrence(&rho).unwrap() - concurrence(&out).unwrap()).abs() < 1e-9);
                    Ok(())
                },
            )
            .map_err(|e| e.to_string()),
    )?;

    run(
        "Monte Carlo determinism",
        runner()
            .run(&any::<u64>(), |seed| {
                let psi = states::d();
                let rho = mixed(&psi, 0.9);
                let scan = simulate_scan(&rho, &standard_waveplates(1), 100, Some(2000.0), seed).unwrap();
                let config = MleConfig::default();
                let first = monte_carlo(&scan, 8, |s| mle_fit(s, &config), Some(&psi), seed).unwrap();
                let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
                let second = pool.install(|| monte_carlo(&scan, 8, |s| mle_fit(s, &config), Some(&psi), seed).unwrap());
                prop_assert_eq!(first, second);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    )?;

    let psi = states::d();
    let rho = mixed(&psi, 0.8);
    let config = MleConfig::default();
    let intensities = [1e3, 1e4, 1e5];
    let mut sigmas = Vec::new();
    for &i in &intensities {
        let scan = simulate_scan(&rho, &standard_waveplates(1), 400, Some(i), 9).unwrap();
        let mc = monte_carlo(&scan, 100, |s| mle_fit(s, &config), Some(&psi), 9).map_err(|e| e.to_string())?;
        sigmas.push(mc.fidelity.unwrap().sigma);
    }
    let xs: Vec<f64> = intensities.iter().map(|i: &f64| i.ln()).collect();
    let ys: Vec<f64> = sigmas.iter().map(|s| s.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    run(
        "σ slope",
        if (slope + 0.5).abs() <= 0.15 {
            Ok(())
        } else {
            Err(format!("slope {slope:.3}"))
        },
    )?;
    Ok(format!("{} suites, σ slope {slope:.3}", passed.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("single-qubit round trip", single_qubit_round_trip),
        ("repeatability", repeatability),
        ("two-qubit inversion", two_qubit_inversion),
        ("Werner state with Monte Carlo", spdc_werner),
        ("FSS recovery", fss_recovery),
        ("cross-method agreement", cross_method),
        ("frequency ratio", frequency_ratio),
        ("band limit", band_limited),
        ("invariant suites", invariants),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", k + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
