//! Command-line workflows. Each command validates its whole configuration
//! before touching any data and writes its outputs atomically.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::RngCore;
use rayon::prelude::*;
use serde::Deserialize;

use crate::analysis::{compare_methods, fss_fit, MethodEstimate, TimeBin, TimeBinSeries};
use crate::error::{Error, Result};
use crate::forward::{
    apply_virtual_waveplate, nyquist_minimum, simulate_scan, standard_waveplates, time_bin_grid, AngleScan,
    SourceModel, ValueKind, WaveplateConfig,
};
use crate::harmonics::{evaluate_series, frequency_set_for, project};
use crate::io::{
    read_scan, read_text, write_scan, FssFitRecord, Manifest, ManifestEntry, MonteCarloRecord, ResultRecord, Table,
};
use crate::qmat::{fidelity_to_pure, states, DensityMatrix};
use crate::reconstruct::{linear_inversion, project_physical, reconstruct, Method, MleConfig};
use crate::seeding::stream_rng;
use crate::uncertainty::{monte_carlo, DEFAULT_SAMPLES};

#[derive(Debug, Parser)]
#[command(name = "ftqst", version, about = "Fourier-transform quantum state tomography")]
pub struct Cli {
    /// TOML file whose entries override command-line flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate waveplate scans from a source model.
    Simulate(SimulateArgs),
    /// Reconstruct density matrices from scan files.
    Reconstruct(ReconstructArgs),
    /// Monte Carlo error bars for one counts scan.
    Montecarlo(MonteCarloArgs),
    /// Fit the fine-structure splitting to a time-binned fidelity series.
    FssFit(FileArgs),
    /// Compare two Monte Carlo reports of the same state.
    Compare(CompareArgs),
    /// Write plot-ready tables for scans, results and series.
    ExportPlotdata(FileArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Expected counts per sample at unit probability; omit for noiseless
    /// probabilities.
    #[arg(long)]
    pub intensity: Option<f64>,
    /// Angle samples (simulate) or resamples (montecarlo).
    #[arg(long)]
    pub samples: Option<usize>,
    /// `linear` or `mle`.
    #[arg(long)]
    pub method: Option<String>,
    /// Target state label, e.g. `H`, `HV`, `phi+`, `psi-`.
    #[arg(long)]
    pub target: Option<String>,
    /// Comma-separated waveplate rate multipliers.
    #[arg(long, value_delimiter = ',')]
    pub multipliers: Option<Vec<u32>>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `pure`, `qd` or `spdc`.
    #[arg(long)]
    pub source: Option<String>,
    /// Pure-state label for `--source pure`.
    #[arg(long)]
    pub state: Option<String>,
    /// Fine-structure splitting in µeV for `--source qd`.
    #[arg(long)]
    pub fss: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub span_ps: Option<f64>,
    #[arg(long)]
    pub lifetime_ps: Option<f64>,
    /// Fidelity to |Ψ−> for `--source spdc`.
    #[arg(long)]
    pub fidelity: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct FileArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    pub first: PathBuf,
    pub second: PathBuf,
}

/// Settings shared by all commands. Loaded from flags, then overridden by
/// any entries present in the `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub intensity: Option<f64>,
    pub samples: Option<usize>,
    pub method: Option<String>,
    pub target: Option<String>,
    pub multipliers: Option<Vec<u32>>,
    pub out_dir: Option<PathBuf>,
    pub source: Option<String>,
    pub state: Option<String>,
    pub fss: Option<f64>,
    pub bins: Option<usize>,
    pub span_ps: Option<f64>,
    pub lifetime_ps: Option<f64>,
    pub fidelity: Option<f64>,
    /// `[θ, φ]` pairs per qubit applied to every reconstructed state.
    pub virtual_waveplates: Option<Vec<[f64; 2]>>,
    pub mle: Option<MleConfig>,
}

macro_rules! overlay {
    ($base:ident, $over:ident, $($f:ident),*) => {
        $( if $over.$f.is_some() { $base.$f = $over.$f; } )*
    };
}

impl RunConfig {
    fn from_common(c: &CommonArgs) -> Self {
        Self {
            seed: c.seed,
            intensity: c.intensity,
            samples: c.samples,
            method: c.method.clone(),
            target: c.target.clone(),
            multipliers: c.multipliers.clone(),
            out_dir: c.out_dir.clone(),
            ..Self::default()
        }
    }

    pub fn parse_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e
                .span()
                .map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1),
            message: e.message().to_string(),
        })
    }

    /// Entries set in `other` replace those in `self`.
    pub fn overridden_by(mut self, other: RunConfig) -> Self {
        overlay!(
            self,
            other,
            seed,
            intensity,
            samples,
            method,
            target,
            multipliers,
            out_dir,
            source,
            state,
            fss,
            bins,
            span_ps,
            lifetime_ps,
            fidelity,
            virtual_waveplates,
            mle
        );
        self
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn mle(&self) -> MleConfig {
        self.mle.clone().unwrap_or_default()
    }

    fn method(&self) -> Result<Method> {
        match self.method.as_deref().unwrap_or("mle").parse()? {
            Method::Projective => Err(Error::invalid("scan files support --method linear or mle")),
            m => Ok(m),
        }
    }

    fn corrections(&self) -> Vec<(f64, f64)> {
        self.virtual_waveplates
            .iter()
            .flatten()
            .map(|[t, p]| (*t, *p))
            .collect()
    }

    /// Checks every field the commands may read.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.intensity {
            if !(i > 0.0 && i.is_finite()) {
                return Err(Error::invalid("intensity must be positive"));
            }
        }
        if self.samples == Some(0) {
            return Err(Error::invalid("samples must be positive"));
        }
        self.method()?;
        if let Some(t) = &self.target {
            states::parse_ket(t)?;
        }
        if let Some(m) = &self.multipliers {
            if m.is_empty() || m.contains(&0) {
                return Err(Error::invalid("multipliers must be positive"));
            }
        }
        for (key, v) in [
            ("fss", self.fss),
            ("span_ps", self.span_ps),
            ("lifetime_ps", self.lifetime_ps),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(format!("{key} must be non-negative")));
                }
            }
        }
        if self.bins == Some(0) {
            return Err(Error::invalid("bins must be positive"));
        }
        if let Some(f) = self.fidelity {
            if !(0.25..=1.0).contains(&f) {
                return Err(Error::invalid("fidelity must lie in [0.25, 1]"));
            }
        }
        for [t, p] in self.virtual_waveplates.iter().flatten() {
            if !(t.is_finite() && p.is_finite()) {
                return Err(Error::invalid("virtual waveplate angles must be finite"));
            }
        }
        if let Some(m) = &self.mle {
            m.validate()?;
        }
        Ok(())
    }
}

fn load_config(cli_path: Option<&Path>, flags: RunConfig) -> Result<RunConfig> {
    let cfg = match cli_path {
        Some(p) => flags.overridden_by(RunConfig::parse_toml(&read_text(p)?, p)?),
        None => flags,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command and returns a human-readable summary.
pub fn run(cli: Cli) -> Result<String> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Simulate(a) => {
            let mut flags = RunConfig::from_common(&a.common);
            flags.source = a.source;
            flags.state = a.state;
            flags.fss = a.fss;
            flags.bins = a.bins;
            flags.span_ps = a.span_ps;
            flags.lifetime_ps = a.lifetime_ps;
            flags.fidelity = a.fidelity;
            cmd_simulate(&load_config(config, flags)?)
        }
        Command::Reconstruct(a) => cmd_reconstruct(&a.files, &load_config(config, RunConfig::from_common(&a.common))?),
        Command::Montecarlo(a) => cmd_montecarlo(&a.file, &load_config(config, RunConfig::from_common(&a.common))?),
        Command::FssFit(a) => cmd_fss_fit(&a.files, &load_config(config, RunConfig::from_common(&a.common))?),
        Command::Compare(a) => cmd_compare(
            &a.first,
            &a.second,
            &load_config(config, RunConfig::from_common(&a.common))?,
        ),
        Command::ExportPlotdata(a) => {
            cmd_export_plotdata(&a.files, &load_config(config, RunConfig::from_common(&a.common))?)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned())
}

fn output_dir(cfg: &RunConfig, input: &Path) -> PathBuf {
    match &cfg.out_dir {
        Some(d) => d.clone(),
        None => input.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf),
    }
}

/// First error in input order, so failures are reported deterministically.
fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

pub fn source_model(cfg: &RunConfig) -> Result<SourceModel> {
    match cfg.source.as_deref().unwrap_or("pure") {
        "pure" => Ok(SourceModel::PureState(states::parse_ket(
            cfg.state.as_deref().unwrap_or("H"),
        )?)),
        "qd" => Ok(SourceModel::QdCascade {
            fss_uev: cfg.fss.unwrap_or(5.44),
            lifetime_ps: cfg.lifetime_ps,
            time_bins_ps: time_bin_grid(cfg.bins.unwrap_or(40), cfg.span_ps.unwrap_or(800.0)),
        }),
        "spdc" => Ok(SourceModel::Spdc {
            fidelity: cfg.fidelity.unwrap_or(0.94),
        }),
        other => Err(Error::invalid(format!("unknown source '{other}'"))),
    }
}

fn waveplates_for(cfg: &RunConfig, n_qubits: usize) -> Result<Vec<WaveplateConfig>> {
    match &cfg.multipliers {
        None => Ok(standard_waveplates(n_qubits)),
        Some(m) if m.len() == n_qubits => Ok(m.iter().map(|&r| WaveplateConfig::quarter(r)).collect()),
        Some(m) => Err(Error::invalid(format!(
            "{} multipliers given for {n_qubits} qubits",
            m.len()
        ))),
    }
}

fn default_samples(waveplates: &[WaveplateConfig]) -> usize {
    match waveplates.len() {
        1 => 400,
        2 => 100,
        _ => nyquist_minimum(waveplates).max(100),
    }
}

fn source_label(model: &SourceModel) -> &'static str {
    match model {
        SourceModel::PureState(_) => "pure",
        SourceModel::QdCascade { .. } => "qd",
        SourceModel::Spdc { .. } => "spdc",
        SourceModel::Custom(_) => "custom",
    }
}

fn target_label(cfg: &RunConfig, model: &SourceModel) -> Option<String> {
    if let Some(t) = &cfg.target {
        return Some(t.clone());
    }
    match (model, source_label(model)) {
        (SourceModel::PureState(_), _) => Some(cfg.state.clone().unwrap_or_else(|| "H".into())),
        (_, "qd") => Some("phi+".into()),
        (_, "spdc") => Some("psi-".into()),
        _ => None,
    }
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<String> {
    let model = source_model(cfg)?;
    let n = model.n_qubits()?;
    let waveplates = waveplates_for(cfg, n)?;
    let samples = cfg.samples.unwrap_or_else(|| default_samples(&waveplates));
    let required = nyquist_minimum(&waveplates);
    if samples < required {
        return Err(Error::Nyquist {
            samples,
            required,
            max_harmonic: ((required - 1) / 2) as u32,
        });
    }
    let target = target_label(cfg, &model);
    let emitted = model.emit()?;
    let seed = cfg.seed();
    let binned = emitted.len() > 1 || emitted[0].time_bin_ps.is_some();

    let outputs = emitted
        .par_iter()
        .enumerate()
        .map(|(k, state)| {
            let sub_seed = stream_rng(seed, k as u64).next_u64();
            let intensity = cfg.intensity.map(|i| i * state.relative_intensity);
            let mut scan = simulate_scan(&state.rho, &waveplates, samples, intensity, sub_seed)?;
            if let Some(t) = state.time_bin_ps {
                scan = scan.with_time_bin(t);
            }
            let truth = ResultRecord::with_metrics("truth", state.rho.clone(), state.time_bin_ps, target.as_deref())?;
            let (scan_file, truth_file) = if binned {
                (format!("scan_bin{k:03}.txt"), format!("truth_bin{k:03}.txt"))
            } else {
                ("scan.txt".to_string(), "truth.txt".to_string())
            };
            Ok((scan, truth, scan_file, truth_file, state.time_bin_ps))
        })
        .collect::<Vec<Result<_>>>();
    let outputs = first_error(outputs)?;

    let dir = cfg.out_dir();
    create_dir(&dir)?;
    let mut entries = Vec::new();
    for (scan, truth, scan_file, truth_file, t) in outputs {
        write_scan(&dir.join(&scan_file), &scan)?;
        truth.write(&dir.join(&truth_file))?;
        entries.push(ManifestEntry {
            scan_file,
            truth_file,
            time_bin_ps: t,
        });
    }
    let manifest = Manifest {
        source: source_label(&model).into(),
        n_qubits: n,
        n_samples: samples,
        intensity: cfg.intensity,
        seed,
        target,
        entries,
    };
    crate::io::write_atomic(&dir.join("manifest.txt"), &manifest.to_text())?;
    Ok(format!(
        "wrote {} scan file(s) with {samples} samples to {}",
        manifest.entries.len(),
        dir.display()
    ))
}

fn corrected(rho: DensityMatrix, cfg: &RunConfig) -> Result<DensityMatrix> {
    let corrections = cfg.corrections();
    if corrections.is_empty() {
        Ok(rho)
    } else {
        apply_virtual_waveplate(&rho, &corrections)
    }
}

pub fn cmd_reconstruct(files: &[PathBuf], cfg: &RunConfig) -> Result<String> {
    let method = cfg.method()?;
    let mle = cfg.mle();
    let results = files
        .par_iter()
        .map(|path| {
            let scan = read_scan(path)?;
            let mut result = reconstruct(&scan, method, &mle)?;
            result.rho = corrected(result.rho, cfg)?;
            let record = ResultRecord::from_result(&result, scan.time_bin_ps(), cfg.target.as_deref())?;
            let dir = output_dir(cfg, path);
            create_dir(&dir)?;
            let out = dir.join(format!("{}.result.txt", file_stem(path)));
            record.write(&out)?;
            if !record.converged {
                return Err(Error::NonConvergence(format!(
                    "{} did not converge in {} iterations (result written to {})",
                    path.display(),
                    record.iterations,
                    out.display()
                )));
            }
            Ok(match record.fidelity {
                Some(f) => format!("{} -> {} (fidelity {f:.6})", path.display(), out.display()),
                None => format!("{} -> {}", path.display(), out.display()),
            })
        })
        .collect::<Vec<_>>();
    Ok(first_error(results)?.join("\n"))
}

pub fn cmd_montecarlo(file: &Path, cfg: &RunConfig) -> Result<String> {
    let method = cfg.method()?;
    let mle = cfg.mle();
    let n_samples = cfg.samples.unwrap_or(DEFAULT_SAMPLES);
    if n_samples < 2 {
        return Err(Error::invalid("Monte Carlo needs at least two samples"));
    }
    let scan = read_scan(file)?;
    if scan.kind() != ValueKind::Counts {
        return Err(Error::invalid(format!(
            "{} holds probabilities, not counts",
            file.display()
        )));
    }
    let target_ket = cfg.target.as_deref().map(states::parse_ket).transpose()?;
    let mut point = reconstruct(&scan, method, &mle)?;
    point.rho = corrected(point.rho, cfg)?;
    if !point.converged {
        return Err(Error::NonConvergence(format!("{} did not converge", file.display())));
    }
    let reconstructor = |s: &AngleScan| {
        let mut r = reconstruct(s, method, &mle)?;
        r.rho = corrected(r.rho, cfg)?;
        Ok(r)
    };
    let report = monte_carlo(&scan, n_samples, reconstructor, target_ket.as_ref(), cfg.seed())?;
    let record = MonteCarloRecord::new(&point, &report, scan.time_bin_ps(), cfg.target.as_deref())?;
    let dir = output_dir(cfg, file);
    create_dir(&dir)?;
    let out = dir.join(format!("{}.mc.txt", file_stem(file)));
    record.write(&out)?;
    let mut summary = format!(
        "{} -> {} ({} of {} samples used)",
        file.display(),
        out.display(),
        report.n_used(),
        n_samples
    );
    if let Some(f) = record.fidelity {
        summary.push_str(&format!("\nfidelity {f}"));
    }
    if let Some(c) = record.concurrence {
        summary.push_str(&format!("\nconcurrence {c}"));
    }
    Ok(summary)
}

/// A result or Monte Carlo file, told apart by its header line.
enum Loaded {
    Scan(AngleScan),
    Result(ResultRecord),
    MonteCarlo(MonteCarloRecord),
}

fn load_any(path: &Path) -> Result<Loaded> {
    let text = read_text(path)?;
    let header = text.lines().next().unwrap_or("");
    if header.starts_with("# ftqst-scan ") {
        crate::io::parse_scan(&text, path).map(Loaded::Scan)
    } else if header.starts_with("# ftqst-result ") {
        ResultRecord::parse(&text, path).map(Loaded::Result)
    } else if header.starts_with("# ftqst-montecarlo ") {
        MonteCarloRecord::parse(&text, path).map(Loaded::MonteCarlo)
    } else {
        Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unrecognized header '{header}'"),
        })
    }
}

/// Time-binned fidelity series from result and Monte Carlo files.
fn series_from_files(files: &[PathBuf], cfg: &RunConfig) -> Result<TimeBinSeries> {
    let target = cfg.target.as_deref().map(states::parse_ket).transpose()?;
    let mut bins = Vec::new();
    for path in files {
        let missing = |what: &str| Error::invalid(format!("{} has no {what}", path.display()));
        let bin = match load_any(path)? {
            Loaded::Result(r) => {
                let fidelity = match (&target, r.fidelity) {
                    (Some(t), _) => fidelity_to_pure(&r.rho, t)?,
                    (None, Some(f)) => f,
                    (None, None) => return Err(missing("fidelity (pass --target)")),
                };
                TimeBin {
                    t_ps: r.time_bin_ps.ok_or_else(|| missing("time bin"))?,
                    rho: r.rho,
                    fidelity,
                    fidelity_sigma: 0.0,
                }
            }
            Loaded::MonteCarlo(m) => {
                let rho = project_physical(&m.mean)?;
                let stats = m.fidelity.ok_or_else(|| missing("fidelity statistics"))?;
                let fidelity = match (&target, m.point_fidelity) {
                    (Some(t), _) => fidelity_to_pure(&rho, t)?,
                    (None, Some(f)) => f,
                    (None, None) => stats.mean,
                };
                TimeBin {
                    t_ps: m.time_bin_ps.ok_or_else(|| missing("time bin"))?,
                    rho,
                    fidelity,
                    fidelity_sigma: stats.sigma,
                }
            }
            Loaded::Scan(_) => {
                return Err(Error::invalid(format!(
                    "{} is a scan; reconstruct it first",
                    path.display()
                )))
            }
        };
        bins.push(bin);
    }
    bins.sort_by(|a, b| a.t_ps.total_cmp(&b.t_ps));
    TimeBinSeries::new(bins)
}

pub fn cmd_fss_fit(files: &[PathBuf], cfg: &RunConfig) -> Result<String> {
    let series = series_from_files(files, cfg)?;
    let fit = fss_fit(&series)?;
    let record = FssFitRecord {
        n_bins: series.len(),
        fit,
    };
    let dir = cfg.out_dir();
    create_dir(&dir)?;
    let out = dir.join("fssfit.txt");
    crate::io::write_atomic(&out, &record.to_text())?;
    Ok(if fit.degenerate {
        format!(
            "no oscillation found over {} bins; fss reported as 0 ({})",
            series.len(),
            out.display()
        )
    } else {
        format!(
            "fss {:.4} ± {:.4} µeV over {} bins ({})",
            fit.fss,
            fit.std_errors.fss,
            series.len(),
            out.display()
        )
    })
}

fn estimate_from(path: &Path) -> Result<MethodEstimate> {
    let m = MonteCarloRecord::read(path)?;
    let missing = |what: &str| Error::invalid(format!("{} has no {what}", path.display()));
    let stats = m
        .fidelity
        .ok_or_else(|| missing("fidelity statistics (run montecarlo with --target)"))?;
    let mut est = MethodEstimate::new(m.point_fidelity.unwrap_or(stats.mean), stats.sigma);
    if let (Some(c), Some(s)) = (m.point_concurrence, m.concurrence) {
        est.concurrence = Some((c, s.sigma));
    }
    Ok(est)
}

pub fn cmd_compare(first: &Path, second: &Path, cfg: &RunConfig) -> Result<String> {
    let a = estimate_from(first)?;
    let b = estimate_from(second)?;
    let cmp = compare_methods(&a, &b);
    let mut table = Table::new("comparison", &[])
        .field("first", first.display())
        .field("second", second.display())
        .field("fidelity_delta", cmp.fidelity.delta)
        .field("fidelity_combined_sigma", cmp.fidelity.combined_sigma)
        .field("fidelity_agree", cmp.fidelity.agree);
    let mut summary = format!(
        "fidelity: Δ = {:.4}, combined σ = {:.4}, {}",
        cmp.fidelity.delta,
        cmp.fidelity.combined_sigma,
        if cmp.fidelity.agree { "agree" } else { "disagree" }
    );
    if let Some(c) = cmp.concurrence {
        table = table
            .field("concurrence_delta", c.delta)
            .field("concurrence_combined_sigma", c.combined_sigma)
            .field("concurrence_agree", c.agree);
        summary.push_str(&format!(
            "\nconcurrence: Δ = {:.4}, combined σ = {:.4}, {}",
            c.delta,
            c.combined_sigma,
            if c.agree { "agree" } else { "disagree" }
        ));
    }
    let dir = cfg.out_dir();
    create_dir(&dir)?;
    table.write(&dir.join("comparison.txt"))?;
    Ok(summary)
}

/// Signal table: measured values normalized to probabilities next to the
/// band-limited Fourier fit.
pub fn signal_table(scan: &AngleScan) -> Result<Table> {
    let norm = match scan.kind() {
        ValueKind::Counts => linear_inversion(scan)?.normalization,
        ValueKind::Probability => 1.0,
    };
    let measured: Vec<f64> = scan.values().iter().map(|v| v / norm).collect();
    let fset = frequency_set_for(scan.waveplates())?;
    let spectrum = project(scan.angles(), &measured, &fset)?;
    let mut table = Table::new("signal", &["theta_rad", "measured", "fourier_fit"])
        .field("n_qubits", scan.n_qubits())
        .field("normalization", norm);
    for (&theta, &m) in scan.angles().iter().zip(&measured) {
        table.push(vec![theta, m, evaluate_series(&spectrum, theta)]);
    }
    Ok(table)
}

pub fn matrix_table(rec: &ResultRecord) -> Table {
    let m = rec.rho.matrix();
    let mut table = Table::new("matrix", &["row", "col", "re", "im"]).field("method", &rec.method);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            table.push(vec![i as f64, j as f64, m[(i, j)].re, m[(i, j)].im]);
        }
    }
    table
}

fn mc_matrix_table(rec: &MonteCarloRecord) -> Table {
    let mut table =
        Table::new("matrix", &["row", "col", "re", "im", "sigma_re", "sigma_im"]).field("method", &rec.method);
    for i in 0..rec.mean.nrows() {
        for j in 0..rec.mean.ncols() {
            let (m, s) = (rec.mean[(i, j)], rec.sigma[(i, j)]);
            table.push(vec![i as f64, j as f64, m.re, m.im, s.re, s.im]);
        }
    }
    table
}

pub fn series_table(series: &TimeBinSeries) -> Table {
    let mut table = Table::new("series", &["t_ps", "fidelity", "fidelity_sigma"]);
    for b in series.bins() {
        table.push(vec![b.t_ps, b.fidelity, b.fidelity_sigma]);
    }
    table
}

pub fn cmd_export_plotdata(files: &[PathBuf], cfg: &RunConfig) -> Result<String> {
    let mut written = Vec::new();
    let mut timed = Vec::new();
    for path in files {
        let dir = output_dir(cfg, path);
        create_dir(&dir)?;
        let stem = file_stem(path);
        let (table, suffix) = match load_any(path)? {
            Loaded::Scan(scan) => (signal_table(&scan)?, "signal"),
            Loaded::Result(r) => {
                if r.time_bin_ps.is_some() {
                    timed.push(path.clone());
                }
                (matrix_table(&r), "matrix")
            }
            Loaded::MonteCarlo(m) => {
                if m.time_bin_ps.is_some() {
                    timed.push(path.clone());
                }
                (mc_matrix_table(&m), "matrix")
            }
        };
        let out = dir.join(format!("{stem}.{suffix}.txt"));
        table.write(&out)?;
        written.push(out);
    }
    if timed.len() >= 2 {
        let series = series_from_files(&timed, cfg)?;
        let out = cfg.out_dir().join("series.txt");
        create_dir(&cfg.out_dir())?;
        series_table(&series).write(&out)?;
        written.push(out);
    }
    Ok(written
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_overrides_flags() {
        let flags = RunConfig {
            seed: Some(1),
            samples: Some(400),
            ..RunConfig::default()
        };
        let file = RunConfig::parse_toml("seed = 7\n[mle]\nmax_iterations = 50\n", Path::new("c.toml")).unwrap();
        let merged = flags.overridden_by(file);
        assert_eq!(merged.seed, Some(7));
        assert_eq!(merged.samples, Some(400));
        assert_eq!(merged.mle.unwrap().max_iterations, 50);
    }

    #[test]
    fn config_errors_carry_line() {
        let err = RunConfig::parse_toml("seed = 1\nbogus = 2\n", Path::new("c.toml")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn validation_runs_before_work() {
        let bad = RunConfig {
            target: Some("XYZ".into()),
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RunConfig {
            method: Some("projective".into()),
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn cli_parses() {
        let cli = Cli::try_parse_from([
            "ftqst",
            "simulate",
            "--source",
            "qd",
            "--multipliers",
            "1,5",
            "--seed",
            "3",
            "--out-dir",
            "x",
        ])
        .unwrap();
        match cli.command {
            Command::Simulate(a) => {
                assert_eq!(a.common.multipliers, Some(vec![1, 5]));
                assert_eq!(a.source.as_deref(), Some("qd"));
            }
            _ => panic!(),
        }
    }
}
