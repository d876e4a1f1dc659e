use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ftqst::io::{
    parse_scan, read_scan, read_text, scan_to_string, FssFitRecord, Manifest, MonteCarloRecord, ResultRecord, Table,
};

fn ftqst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftqst"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ftqst(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    ftqst(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files_with(dir: &Path, prefix: &str, suffix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            let name = p.file_name().unwrap().to_str().unwrap();
            name.starts_with(prefix) && name.ends_with(suffix)
        })
        .collect();
    v.sort();
    v
}

/// Re-parsing and re-writing any emitted file must give the same bytes.
fn assert_canonical(path: &Path) {
    let text = read_text(path).unwrap();
    let header = text.lines().next().unwrap();
    let again = if header.starts_with("# ftqst-scan") {
        scan_to_string(&parse_scan(&text, path).unwrap())
    } else if header.starts_with("# ftqst-result") {
        ResultRecord::parse(&text, path).unwrap().to_text()
    } else if header.starts_with("# ftqst-montecarlo") {
        MonteCarloRecord::parse(&text, path).unwrap().to_text()
    } else if header.starts_with("# ftqst-fssfit") {
        FssFitRecord::parse(&text, path).unwrap().to_text()
    } else if header.starts_with("# ftqst-manifest") {
        Manifest::parse(&text, path).unwrap().to_text()
    } else {
        Table::parse(&text, path).unwrap().to_text()
    };
    assert_eq!(again, text, "{}", path.display());
}

fn assert_dir_canonical(dir: &Path) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "txt") {
            assert_canonical(&p);
        }
    }
}

#[test]
fn horizontal_state_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--source", "pure", "--state", "H", "--out-dir", s(d)]);
    let scan = read_scan(&d.join("scan.txt")).unwrap();
    assert_eq!(scan.len(), 400);
    for (&t, &v) in scan.angles().iter().zip(scan.values()) {
        assert!((v - (3.0 + (4.0 * t).cos()) / 4.0).abs() < 1e-12);
    }
    for method in ["linear", "mle"] {
        let out = d.join(method);
        ok(&[
            "reconstruct",
            s(&d.join("scan.txt")),
            "--method",
            method,
            "--target",
            "H",
            "--out-dir",
            s(&out),
        ]);
        let rec = ResultRecord::read(&out.join("scan.result.txt")).unwrap();
        assert!(rec.fidelity.unwrap() >= 0.9999, "{method}");
        assert_eq!(rec.method, method);
    }
    ok(&[
        "export-plotdata",
        s(&d.join("scan.txt")),
        s(&d.join("mle/scan.result.txt")),
        "--out-dir",
        s(&d.join("plots")),
    ]);
    let signal = Table::parse(&read_text(&d.join("plots/scan.signal.txt")).unwrap(), Path::new("x")).unwrap();
    assert_eq!(signal.rows.len(), 400);
    for row in &signal.rows {
        assert!((row[1] - row[2]).abs() < 1e-12);
    }
    let matrix = Table::parse(
        &read_text(&d.join("plots/scan.result.matrix.txt")).unwrap(),
        Path::new("x"),
    )
    .unwrap();
    assert_eq!(matrix.rows.len(), 4);
    assert_dir_canonical(d);
    assert_dir_canonical(&d.join("mle"));
    assert_dir_canonical(&d.join("plots"));
}

#[test]
fn fourier_overlay_matches_noisy_counts_fit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "simulate",
        "--state",
        "L",
        "--intensity",
        "900",
        "--seed",
        "4",
        "--out-dir",
        s(d),
    ]);
    ok(&["export-plotdata", s(&d.join("scan.txt")), "--out-dir", s(d)]);
    let signal = Table::parse(&read_text(&d.join("scan.signal.txt")).unwrap(), Path::new("x")).unwrap();
    let scan = read_scan(&d.join("scan.txt")).unwrap();
    let norm: f64 = signal
        .fields
        .iter()
        .find(|(k, _)| k == "normalization")
        .unwrap()
        .1
        .parse()
        .unwrap();
    let fset = ftqst::harmonics::frequency_set_for(scan.waveplates()).unwrap();
    let measured: Vec<f64> = scan.values().iter().map(|v| v / norm).collect();
    let spectrum = ftqst::harmonics::project(scan.angles(), &measured, &fset).unwrap();
    for (row, &theta) in signal.rows.iter().zip(scan.angles()) {
        assert!((row[2] - ftqst::harmonics::evaluate_series(&spectrum, theta)).abs() < 1e-12);
    }
}

#[test]
fn bell_state_concurrence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--state", "psi-", "--out-dir", s(d)]);
    assert_eq!(read_scan(&d.join("scan.txt")).unwrap().len(), 100);
    ok(&["reconstruct", s(&d.join("scan.txt")), "--target", "psi-"]);
    let rec = ResultRecord::read(&d.join("scan.result.txt")).unwrap();
    assert!(rec.concurrence.unwrap() >= 0.999);
    assert!(rec.fidelity.unwrap() >= 0.999);
}

#[test]
fn simulation_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        ok(&[
            "simulate",
            "--source",
            "spdc",
            "--intensity",
            "500",
            "--seed",
            "11",
            "--out-dir",
            s(d),
        ]);
    }
    for name in ["scan.txt", "truth.txt", "manifest.txt"] {
        assert_eq!(
            read_text(&a.path().join(name)).unwrap(),
            read_text(&b.path().join(name)).unwrap()
        );
    }
    let c = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "--source",
        "spdc",
        "--intensity",
        "500",
        "--seed",
        "12",
        "--out-dir",
        s(c.path()),
    ]);
    assert_ne!(
        read_text(&a.path().join("scan.txt")).unwrap(),
        read_text(&c.path().join("scan.txt")).unwrap()
    );
}

#[test]
fn quantum_dot_series_and_fss_fit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "simulate",
        "--source",
        "qd",
        "--fss",
        "5.44",
        "--bins",
        "40",
        "--span-ps",
        "800",
        "--out-dir",
        s(d),
    ]);
    let scans = files_with(d, "scan_bin", ".txt");
    assert_eq!(scans.len(), 40);
    let times: Vec<f64> = scans
        .iter()
        .map(|p| read_scan(p).unwrap().time_bin_ps().unwrap())
        .collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]));

    let mut args = vec!["reconstruct", "--target", "phi+", "--out-dir"];
    let res_dir = d.join("res");
    args.push(s(&res_dir));
    args.extend(scans.iter().map(|p| s(p)));
    ok(&args);
    let results = files_with(&res_dir, "scan_bin", ".result.txt");
    assert_eq!(results.len(), 40);

    let mut fit_args = vec!["fss-fit", "--out-dir", s(&res_dir)];
    fit_args.extend(results.iter().map(|p| s(p)));
    ok(&fit_args);
    let fit = FssFitRecord::parse(&read_text(&res_dir.join("fssfit.txt")).unwrap(), Path::new("x")).unwrap();
    assert!((fit.fit.fss - 5.44).abs() < 0.05, "{}", fit.fit.fss);
    assert_eq!(fit.n_bins, 40);

    // shift every time label by 1 ns
    let shifted = d.join("shifted");
    std::fs::create_dir_all(&shifted).unwrap();
    for p in &results {
        let mut rec = ResultRecord::read(p).unwrap();
        rec.time_bin_ps = rec.time_bin_ps.map(|t| t + 1000.0);
        rec.write(&shifted.join(p.file_name().unwrap())).unwrap();
    }
    let mut shift_args = vec!["fss-fit", "--out-dir", s(&shifted)];
    let shifted_files = files_with(&shifted, "scan_bin", ".txt");
    shift_args.extend(shifted_files.iter().map(|p| s(p)));
    ok(&shift_args);
    let fit2 = FssFitRecord::parse(&read_text(&shifted.join("fssfit.txt")).unwrap(), Path::new("x")).unwrap();
    assert!((fit2.fit.fss - fit.fit.fss).abs() < 1e-6);

    let mut few = vec!["fss-fit", "--out-dir", s(&shifted)];
    few.extend(results[..5].iter().map(|p| s(p)));
    assert_eq!(code(&few), 2);

    let mut export = vec!["export-plotdata", "--out-dir"];
    let plots = d.join("plots");
    export.push(s(&plots));
    export.extend(results.iter().map(|p| s(p)));
    ok(&export);
    let series = Table::parse(&read_text(&plots.join("series.txt")).unwrap(), Path::new("x")).unwrap();
    assert_eq!(series.columns, ["t_ps", "fidelity", "fidelity_sigma"]);
    assert_eq!(series.rows.len(), 40);
    assert_dir_canonical(d);
    assert_dir_canonical(&res_dir);
    assert_dir_canonical(&plots);
}

#[test]
fn montecarlo_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "simulate",
        "--state",
        "D",
        "--intensity",
        "1000000",
        "--seed",
        "2",
        "--out-dir",
        s(d),
    ]);
    let scan = s(&d.join("scan.txt")).to_string();
    assert_eq!(code(&["montecarlo", &scan, "--samples", "1"]), 2);
    ok(&[
        "montecarlo",
        &scan,
        "--samples",
        "40",
        "--seed",
        "5",
        "--target",
        "D",
        "--out-dir",
        s(&d.join("a")),
    ]);
    ok(&[
        "montecarlo",
        &scan,
        "--samples",
        "40",
        "--seed",
        "5",
        "--target",
        "D",
        "--out-dir",
        s(&d.join("b")),
    ]);
    let a = read_text(&d.join("a/scan.mc.txt")).unwrap();
    assert_eq!(a, read_text(&d.join("b/scan.mc.txt")).unwrap());
    let rec = MonteCarloRecord::parse(&a, Path::new("x")).unwrap();
    assert!(rec.fidelity.unwrap().sigma < 0.001);
    assert!(rec.sigma.iter().all(|z| z.re < 0.001 && z.im < 0.001));
    assert!(a.contains(" ± "));

    ok(&[
        "compare",
        s(&d.join("a/scan.mc.txt")),
        s(&d.join("b/scan.mc.txt")),
        "--out-dir",
        s(d),
    ]);
    let cmp = Table::parse(&read_text(&d.join("comparison.txt")).unwrap(), Path::new("x")).unwrap();
    let get = |k: &str| cmp.fields.iter().find(|(key, _)| key == k).unwrap().1.clone();
    assert_eq!(get("fidelity_delta"), "0");
    assert_eq!(get("fidelity_agree"), "true");
    assert_dir_canonical(d);
    assert_dir_canonical(&d.join("a"));
}

#[test]
fn montecarlo_needs_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--state", "H", "--out-dir", s(d)]);
    assert_eq!(code(&["montecarlo", s(&d.join("scan.txt")), "--samples", "10"]), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Nyquist: a single qubit needs at least 9 samples
    assert_eq!(code(&["simulate", "--samples", "5", "--out-dir", s(d)]), 4);
    assert!(!d.join("scan.txt").exists());
    assert_eq!(
        code(&["simulate", "--state", "psi-", "--samples", "40", "--out-dir", s(d)]),
        4
    );
    assert_eq!(code(&["simulate", "--state", "Q", "--out-dir", s(d)]), 2);
    assert_eq!(code(&["reconstruct", s(&d.join("missing.txt"))]), 2);

    ok(&["simulate", "--state", "HV", "--intensity", "300", "--out-dir", s(d)]);
    let text = read_text(&d.join("scan.txt")).unwrap();
    let broken = d.join("broken.txt");
    std::fs::write(&broken, text.replace("multipliers 1 5", "multipliers 1 five")).unwrap();
    let out = ftqst(&["reconstruct", s(&broken)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.txt:4:"));

    let cfg = d.join("cap.toml");
    std::fs::write(
        &cfg,
        "method = \"mle\"\n[mle]\nmax_iterations = 1\ninitial = \"maximally-mixed\"\n",
    )
    .unwrap();
    assert_eq!(code(&["reconstruct", s(&d.join("scan.txt")), "--config", s(&cfg)]), 3);

    assert_eq!(code(&["reconstruct", s(&d.join("scan.txt")), "--method", "fast"]), 2);
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("run.toml");
    std::fs::write(
        &cfg,
        format!("samples = 60\nstate = \"V\"\nout_dir = \"{}\"\n", s(&d.join("out"))),
    )
    .unwrap();
    ok(&["simulate", "--samples", "50", "--state", "H", "--config", s(&cfg)]);
    let scan = read_scan(&d.join("out/scan.txt")).unwrap();
    assert_eq!(scan.len(), 60);
    // |V> gives (1 - cos 4θ)/4
    assert!(scan.values()[0].abs() < 1e-12);

    std::fs::write(&cfg, "sample = 60\n").unwrap();
    let out = ftqst(&["simulate", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.toml:1:"));
}

#[test]
fn virtual_waveplate_correction() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--state", "HH", "--out-dir", s(d)]);
    let cfg = d.join("vw.toml");
    std::fs::write(&cfg, "virtual_waveplates = [[0.0, 0.0], [0.0, 0.0]]\n").unwrap();
    ok(&[
        "reconstruct",
        s(&d.join("scan.txt")),
        "--target",
        "HH",
        "--config",
        s(&cfg),
    ]);
    let rec = ResultRecord::read(&d.join("scan.result.txt")).unwrap();
    assert!(rec.fidelity.unwrap() > 0.9999);
}

#[test]
fn help_lists_commands() {
    let out = ok(&["--help"]);
    for cmd in [
        "simulate",
        "reconstruct",
        "montecarlo",
        "fss-fit",
        "compare",
        "export-plotdata",
    ] {
        assert!(out.contains(cmd), "{cmd}");
    }
}
