//! Plain-text file formats. Every file starts with `# ftqst-<kind> v1`,
//! followed by `key value` lines, a `# column ...` line and whitespace
//! separated rows. Floats use the shortest round-trip form except angles,
//! which carry 12 significant digits.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::FssFitResult;
use crate::error::{Error, Result};
use crate::forward::{AngleScan, ValueKind, WaveplateConfig};
use crate::qmat::{c, concurrence, fidelity_to_pure, states, ComplexMatrix, DensityMatrix};
use crate::reconstruct::ReconstructionResult;
use crate::uncertainty::MonteCarloReport;

pub const FORMAT_VERSION: u32 = 1;

/// Write `contents` to a temporary file beside `path`, then rename it into
/// place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn format_angle(theta: f64) -> String {
    format!("{theta:.11e}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn format_list<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

/// Builder for the common layout.
#[derive(Debug)]
struct DocWriter {
    text: String,
}

impl DocWriter {
    fn new(kind: &str) -> Self {
        Self {
            text: format!("# ftqst-{kind} v{FORMAT_VERSION}\n"),
        }
    }

    fn field(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        writeln!(self.text, "{key} {value}").unwrap();
        self
    }

    fn columns(&mut self, names: &[&str]) -> &mut Self {
        writeln!(self.text, "# {}", names.join(" ")).unwrap();
        self
    }

    fn row(&mut self, cells: &[String]) -> &mut Self {
        writeln!(self.text, "{}", cells.join(" ")).unwrap();
        self
    }

    fn finish(&mut self) -> String {
        std::mem::take(&mut self.text)
    }
}

#[derive(Debug)]
struct Field {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug)]
struct Row {
    cells: Vec<String>,
    line: usize,
}

/// Parsed generic layout with line numbers kept for error messages.
#[derive(Debug)]
struct Document {
    path: PathBuf,
    fields: Vec<Field>,
    columns: Vec<String>,
    columns_line: usize,
    rows: Vec<Row>,
}

impl Document {
    fn read_doc(text: &str, path: &Path, kind: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let expected = format!("# ftqst-{kind} v{FORMAT_VERSION}");
        match lines.next() {
            Some((_, l)) if l.trim_end() == expected => {}
            Some((n, l)) => return Err(err(n, format!("expected header '{expected}', found '{l}'"))),
            None => return Err(err(1, "empty file".into())),
        }
        let mut doc = Document {
            path: path.to_path_buf(),
            fields: Vec::new(),
            columns: Vec::new(),
            columns_line: 0,
            rows: Vec::new(),
        };
        for (n, raw) in lines {
            let l = raw.trim();
            if l.is_empty() {
                continue;
            }
            if let Some(cols) = l.strip_prefix('#') {
                if doc.columns_line != 0 {
                    return Err(err(n, "second column header".into()));
                }
                doc.columns = cols.split_whitespace().map(str::to_string).collect();
                doc.columns_line = n;
                continue;
            }
            if doc.columns_line == 0 {
                let (key, value) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
                if doc.fields.iter().any(|f| f.key == key) {
                    return Err(err(n, format!("duplicate key '{key}'")));
                }
                doc.fields.push(Field {
                    key: key.to_string(),
                    value: value.trim().to_string(),
                    line: n,
                });
            } else {
                let cells: Vec<String> = l.split_whitespace().map(str::to_string).collect();
                if cells.len() != doc.columns.len() {
                    return Err(err(
                        n,
                        format!("expected {} columns, found {}", doc.columns.len(), cells.len()),
                    ));
                }
                doc.rows.push(Row { cells, line: n });
            }
        }
        if doc.columns_line == 0 {
            return Err(err(text.lines().count().max(1), "missing column header".into()));
        }
        Ok(doc)
    }

    fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn expect_columns(&self, names: &[&str]) -> Result<()> {
        if self.columns != names {
            return Err(self.error(self.columns_line, format!("expected columns '{}'", names.join(" "))));
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Result<(&str, usize)> {
        self.fields
            .iter()
            .find(|f| f.key == key)
            .map(|f| (f.value.as_str(), f.line))
            .ok_or_else(|| self.error(self.columns_line, format!("missing key '{key}'")))
    }

    fn has(&self, key: &str) -> bool {
        self.fields.iter().any(|f| f.key == key)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let (v, line) = self.raw(key)?;
        v.parse()
            .map_err(|e| self.error(line, format!("bad value for '{key}': {e}")))
    }

    fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let (v, _) = self.raw(key)?;
        if v == "none" {
            Ok(None)
        } else {
            self.parse(key).map(Some)
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let (v, line) = self.raw(key)?;
        v.split_whitespace()
            .map(|s| {
                s.parse()
                    .map_err(|e| self.error(line, format!("bad entry in '{key}': {e}")))
            })
            .collect()
    }

    fn cell<T: std::str::FromStr>(&self, row: &Row, col: usize) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        row.cells[col]
            .parse()
            .map_err(|e| self.error(row.line, format!("bad {}: {e}", self.columns[col])))
    }

    /// Reads `row col re im ...` rows into square matrices, one per pair of
    /// value columns after the indices.
    fn matrices(&self, dim: usize) -> Result<Vec<ComplexMatrix>> {
        let pairs = (self.columns.len() - 2) / 2;
        let mut out = vec![ComplexMatrix::zeros(dim, dim); pairs];
        if self.rows.len() != dim * dim {
            let line = self.rows.last().map_or(self.columns_line, |r| r.line);
            return Err(self.error(
                line,
                format!("expected {} matrix rows, found {}", dim * dim, self.rows.len()),
            ));
        }
        for (k, row) in self.rows.iter().enumerate() {
            let (i, j): (usize, usize) = (self.cell(row, 0)?, self.cell(row, 1)?);
            if (i, j) != (k / dim, k % dim) {
                return Err(self.error(row.line, format!("expected entry ({}, {})", k / dim, k % dim)));
            }
            for (p, m) in out.iter_mut().enumerate() {
                m[(i, j)] = c(self.cell(row, 2 + 2 * p)?, self.cell(row, 3 + 2 * p)?);
            }
        }
        Ok(out)
    }
}

fn matrix_rows(w: &mut DocWriter, mats: &[&ComplexMatrix]) {
    let dim = mats[0].nrows();
    for i in 0..dim {
        for j in 0..dim {
            let mut cells = vec![i.to_string(), j.to_string()];
            for m in mats {
                cells.push(m[(i, j)].re.to_string());
                cells.push(m[(i, j)].im.to_string());
            }
            w.row(&cells);
        }
    }
}

// --- scans -----------------------------------------------------------------

pub fn scan_to_string(scan: &AngleScan) -> String {
    let wp = scan.waveplates();
    let mut w = DocWriter::new("scan");
    w.field("n_qubits", scan.n_qubits())
        .field("value_kind", scan.kind().as_str())
        .field("multipliers", format_list(&scan.multipliers()))
        .field(
            "retardances",
            format_list(&wp.iter().map(|w| w.retardance).collect::<Vec<_>>()),
        )
        .field("offsets", format_list(&wp.iter().map(|w| w.offset).collect::<Vec<_>>()));
    if let Some(t) = scan.time_bin_ps() {
        w.field("time_bin_ps", t);
    }
    w.columns(&["angle_rad", "value"]);
    for (a, v) in scan.angles().iter().zip(scan.values()) {
        w.row(&[format_angle(*a), v.to_string()]);
    }
    w.finish()
}

pub fn parse_scan(text: &str, path: &Path) -> Result<AngleScan> {
    let doc = Document::read_doc(text, path, "scan")?;
    doc.expect_columns(&["angle_rad", "value"])?;
    let n: usize = doc.parse("n_qubits")?;
    let kind: ValueKind = doc.parse("value_kind")?;
    let multipliers: Vec<u32> = doc.list("multipliers")?;
    let retardances: Vec<f64> = doc.list("retardances")?;
    let offsets: Vec<f64> = doc.list("offsets")?;
    for (key, len) in [
        ("multipliers", multipliers.len()),
        ("retardances", retardances.len()),
        ("offsets", offsets.len()),
    ] {
        if len != n {
            let (_, line) = doc.raw(key)?;
            return Err(doc.error(line, format!("'{key}' has {len} entries for {n} qubits")));
        }
    }
    let waveplates: Vec<WaveplateConfig> = (0..n)
        .map(|m| WaveplateConfig {
            retardance: retardances[m],
            multiplier: multipliers[m],
            offset: offsets[m],
        })
        .collect();
    let mut angles = Vec::with_capacity(doc.rows.len());
    let mut values = Vec::with_capacity(doc.rows.len());
    for row in &doc.rows {
        angles.push(doc.cell::<f64>(row, 0)?);
        values.push(doc.cell::<f64>(row, 1)?);
    }
    // stored angles are rounded; put them back on the exact grid
    let n_rows = angles.len();
    if n_rows > 0 {
        let start = angles[0];
        for (k, a) in angles.iter_mut().enumerate() {
            let exact = start + k as f64 * std::f64::consts::PI / n_rows as f64;
            if (*a - exact).abs() <= 1e-9 {
                *a = exact;
            }
        }
    }
    let scan = AngleScan::new(waveplates, angles, values, kind).map_err(|e| match e {
        Error::Nyquist { .. } => e,
        Error::UnevenSpacing { index } => doc.error(doc.rows[index].line, e.to_string()),
        _ => doc.error(doc.columns_line, e.to_string()),
    })?;
    Ok(match doc.has("time_bin_ps") {
        true => scan.with_time_bin(doc.parse("time_bin_ps")?),
        false => scan,
    })
}

pub fn read_scan(path: &Path) -> Result<AngleScan> {
    parse_scan(&read_text(path)?, path)
}

pub fn write_scan(path: &Path, scan: &AngleScan) -> Result<()> {
    write_atomic(path, &scan_to_string(scan))
}

// --- reconstruction results ------------------------------------------------

/// A density matrix with its fit diagnostics and optional metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    /// `linear`, `mle`, `projective` or `truth`.
    pub method: String,
    pub converged: bool,
    pub iterations: usize,
    pub cost: f64,
    pub scale: Option<f64>,
    pub normalization: Option<f64>,
    pub time_bin_ps: Option<f64>,
    /// State label understood by [`states::parse_ket`].
    pub target: Option<String>,
    pub fidelity: Option<f64>,
    pub concurrence: Option<f64>,
    pub rho: DensityMatrix,
}

impl ResultRecord {
    /// Fills the metrics from `rho`: fidelity when `target` is given,
    /// concurrence for two qubits.
    pub fn with_metrics(
        method: &str,
        rho: DensityMatrix,
        time_bin_ps: Option<f64>,
        target: Option<&str>,
    ) -> Result<Self> {
        let fidelity = match target {
            Some(t) => Some(fidelity_to_pure(&rho, &states::parse_ket(t)?)?),
            None => None,
        };
        let concurrence = if rho.dim() == 4 { Some(concurrence(&rho)?) } else { None };
        Ok(Self {
            method: method.to_string(),
            converged: true,
            iterations: 0,
            cost: 0.0,
            scale: None,
            normalization: None,
            time_bin_ps,
            target: target.map(str::to_string),
            fidelity,
            concurrence,
            rho,
        })
    }

    pub fn from_result(result: &ReconstructionResult, time_bin_ps: Option<f64>, target: Option<&str>) -> Result<Self> {
        let mut rec = Self::with_metrics(result.method.as_str(), result.rho.clone(), time_bin_ps, target)?;
        rec.converged = result.converged;
        rec.iterations = result.iterations;
        rec.cost = result.cost;
        rec.scale = result.scale;
        rec.normalization = result.normalization;
        Ok(rec)
    }

    pub fn to_text(&self) -> String {
        let mut w = DocWriter::new("result");
        w.field("method", &self.method)
            .field("n_qubits", self.rho.n_qubits())
            .field("converged", self.converged)
            .field("iterations", self.iterations)
            .field("cost", self.cost)
            .field("scale", format_opt(self.scale))
            .field("normalization", format_opt(self.normalization))
            .field("time_bin_ps", format_opt(self.time_bin_ps))
            .field("target", self.target.as_deref().unwrap_or("none"))
            .field("fidelity", format_opt(self.fidelity))
            .field("concurrence", format_opt(self.concurrence))
            .columns(&["row", "col", "re", "im"]);
        matrix_rows(&mut w, &[self.rho.matrix()]);
        w.finish()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let doc = Document::read_doc(text, path, "result")?;
        doc.expect_columns(&["row", "col", "re", "im"])?;
        let n: usize = doc.parse("n_qubits")?;
        if n == 0 || n > crate::qmat::MAX_QUBITS {
            let (_, line) = doc.raw("n_qubits")?;
            return Err(doc.error(line, format!("unsupported qubit count {n}")));
        }
        let m = doc.matrices(1 << n)?.remove(0);
        let rho = DensityMatrix::new(m).map_err(|e| doc.error(doc.columns_line, e.to_string()))?;
        let target: String = doc.parse("target")?;
        Ok(Self {
            method: doc.parse("method")?,
            converged: doc.parse("converged")?,
            iterations: doc.parse("iterations")?,
            cost: doc.parse("cost")?,
            scale: doc.opt("scale")?,
            normalization: doc.opt("normalization")?,
            time_bin_ps: doc.opt("time_bin_ps")?,
            target: (target != "none").then_some(target),
            fidelity: doc.opt("fidelity")?,
            concurrence: doc.opt("concurrence")?,
            rho,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_text())
    }
}

// --- Monte Carlo reports ---------------------------------------------------

/// Metric summary stored with four decimals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlusMinus {
    pub mean: f64,
    pub sigma: f64,
}

impl PlusMinus {
    fn rounded(mean: f64, sigma: f64) -> Self {
        let r = |v: f64| format!("{v:.4}").parse::<f64>().unwrap();
        Self {
            mean: r(mean),
            sigma: r(sigma),
        }
    }
}

impl std::fmt::Display for PlusMinus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.sigma)
    }
}

impl std::str::FromStr for PlusMinus {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once('±').ok_or("expected 'mean ± sigma'")?;
        let mean = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
        let sigma = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
        Ok(Self::rounded(mean, sigma))
    }
}

/// File form of a Monte Carlo run: the point estimate's metrics plus the
/// resampling statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloRecord {
    pub method: String,
    pub n_qubits: usize,
    pub n_samples: usize,
    pub n_excluded: usize,
    pub seed: u64,
    pub time_bin_ps: Option<f64>,
    pub target: Option<String>,
    pub point_fidelity: Option<f64>,
    pub point_concurrence: Option<f64>,
    pub fidelity: Option<PlusMinus>,
    pub concurrence: Option<PlusMinus>,
    pub mean: ComplexMatrix,
    pub sigma: ComplexMatrix,
}

impl MonteCarloRecord {
    pub fn new(
        point: &ReconstructionResult,
        report: &MonteCarloReport,
        time_bin_ps: Option<f64>,
        target: Option<&str>,
    ) -> Result<Self> {
        let point_rec = ResultRecord::from_result(point, time_bin_ps, target)?;
        let sigma = ComplexMatrix::from_fn(report.mean.nrows(), report.mean.ncols(), |i, j| {
            c(report.sigma_re[(i, j)], report.sigma_im[(i, j)])
        });
        Ok(Self {
            method: point.method.as_str().to_string(),
            n_qubits: point.rho.n_qubits(),
            n_samples: report.n_samples,
            n_excluded: report.n_excluded,
            seed: report.seed,
            time_bin_ps,
            target: target.map(str::to_string),
            point_fidelity: point_rec.fidelity,
            point_concurrence: point_rec.concurrence,
            fidelity: report.fidelity.map(|m| PlusMinus::rounded(m.mean, m.sigma)),
            concurrence: report.concurrence.map(|m| PlusMinus::rounded(m.mean, m.sigma)),
            mean: report.mean.clone(),
            sigma,
        })
    }

    pub fn to_text(&self) -> String {
        let opt_pm = |v: Option<PlusMinus>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
        let mut w = DocWriter::new("montecarlo");
        w.field("method", &self.method)
            .field("n_qubits", self.n_qubits)
            .field("n_samples", self.n_samples)
            .field("n_excluded", self.n_excluded)
            .field("seed", self.seed)
            .field("time_bin_ps", format_opt(self.time_bin_ps))
            .field("target", self.target.as_deref().unwrap_or("none"))
            .field("point_fidelity", format_opt(self.point_fidelity))
            .field("point_concurrence", format_opt(self.point_concurrence))
            .field("fidelity", opt_pm(self.fidelity))
            .field("concurrence", opt_pm(self.concurrence))
            .columns(&["row", "col", "mean_re", "mean_im", "sigma_re", "sigma_im"]);
        matrix_rows(&mut w, &[&self.mean, &self.sigma]);
        w.finish()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let doc = Document::read_doc(text, path, "montecarlo")?;
        doc.expect_columns(&["row", "col", "mean_re", "mean_im", "sigma_re", "sigma_im"])?;
        let n_qubits: usize = doc.parse("n_qubits")?;
        if n_qubits == 0 || n_qubits > crate::qmat::MAX_QUBITS {
            let (_, line) = doc.raw("n_qubits")?;
            return Err(doc.error(line, format!("unsupported qubit count {n_qubits}")));
        }
        let mut mats = doc.matrices(1 << n_qubits)?;
        let sigma = mats.pop().unwrap();
        let mean = mats.pop().unwrap();
        let target: String = doc.parse("target")?;
        Ok(Self {
            method: doc.parse("method")?,
            n_qubits,
            n_samples: doc.parse("n_samples")?,
            n_excluded: doc.parse("n_excluded")?,
            seed: doc.parse("seed")?,
            time_bin_ps: doc.opt("time_bin_ps")?,
            target: (target != "none").then_some(target),
            point_fidelity: doc.opt("point_fidelity")?,
            point_concurrence: doc.opt("point_concurrence")?,
            fidelity: doc.opt("fidelity")?,
            concurrence: doc.opt("concurrence")?,
            mean,
            sigma,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_text())
    }
}

// --- fit and comparison reports ---------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct FssFitRecord {
    pub n_bins: usize,
    pub fit: FssFitResult,
}

impl FssFitRecord {
    pub fn to_text(&self) -> String {
        let f = &self.fit;
        let mut w = DocWriter::new("fssfit");
        w.field("n_bins", self.n_bins)
            .field("fss_uev", f.fss)
            .field("fss_sigma_uev", f.std_errors.fss)
            .field("amplitude", f.amplitude)
            .field("amplitude_sigma", f.std_errors.amplitude)
            .field("offset", f.offset)
            .field("offset_sigma", f.std_errors.offset)
            .field("phase0_rad", f.phase0)
            .field("phase0_sigma_rad", f.std_errors.phase0)
            .field("residual_rms", f.residual_rms)
            .field("degenerate", f.degenerate)
            .field("iterations", f.iterations)
            .columns(&[]);
        w.finish()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let doc = Document::read_doc(text, path, "fssfit")?;
        Ok(Self {
            n_bins: doc.parse("n_bins")?,
            fit: FssFitResult {
                fss: doc.parse("fss_uev")?,
                amplitude: doc.parse("amplitude")?,
                offset: doc.parse("offset")?,
                phase0: doc.parse("phase0_rad")?,
                residual_rms: doc.parse("residual_rms")?,
                std_errors: crate::analysis::FssErrors {
                    fss: doc.parse("fss_sigma_uev")?,
                    amplitude: doc.parse("amplitude_sigma")?,
                    offset: doc.parse("offset_sigma")?,
                    phase0: doc.parse("phase0_sigma_rad")?,
                },
                degenerate: doc.parse("degenerate")?,
                iterations: doc.parse("iterations")?,
            },
        })
    }
}

// --- generic tables ---------------------------------------------------------

/// Named columns of numbers. Columns whose name ends in `_rad` are written
/// with 12 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub kind: String,
    pub fields: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        Self {
            kind: kind.to_string(),
            fields: Vec::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn field(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_text(&self) -> String {
        let mut w = DocWriter::new("table");
        w.field("table", &self.kind);
        for (k, v) in &self.fields {
            w.field(k, v);
        }
        let cols: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        w.columns(&cols);
        let angle: Vec<bool> = self.columns.iter().map(|c| c.ends_with("_rad")).collect();
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&angle)
                .map(|(v, &a)| if a { format_angle(*v) } else { v.to_string() })
                .collect();
            w.row(&cells);
        }
        w.finish()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let doc = Document::read_doc(text, path, "table")?;
        let kind: String = doc.parse("table")?;
        let fields = doc
            .fields
            .iter()
            .filter(|f| f.key != "table")
            .map(|f| (f.key.clone(), f.value.clone()))
            .collect();
        let rows = doc
            .rows
            .iter()
            .map(|r| {
                (0..doc.columns.len())
                    .map(|k| doc.cell(r, k))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            kind,
            fields,
            columns: doc.columns.clone(),
            rows,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_text())
    }
}

// --- simulation manifests ---------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub scan_file: String,
    pub truth_file: String,
    pub time_bin_ps: Option<f64>,
}

/// Lists the files written by one simulation run and how they were made.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub source: String,
    pub n_qubits: usize,
    pub n_samples: usize,
    pub intensity: Option<f64>,
    pub seed: u64,
    pub target: Option<String>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut w = DocWriter::new("manifest");
        w.field("source", &self.source)
            .field("n_qubits", self.n_qubits)
            .field("n_samples", self.n_samples)
            .field("intensity", format_opt(self.intensity))
            .field("seed", self.seed)
            .field("target", self.target.as_deref().unwrap_or("none"))
            .columns(&["scan_file", "truth_file", "time_bin_ps"]);
        for e in &self.entries {
            w.row(&[e.scan_file.clone(), e.truth_file.clone(), format_opt(e.time_bin_ps)]);
        }
        w.finish()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let doc = Document::read_doc(text, path, "manifest")?;
        doc.expect_columns(&["scan_file", "truth_file", "time_bin_ps"])?;
        let target: String = doc.parse("target")?;
        let entries = doc
            .rows
            .iter()
            .map(|r| {
                Ok(ManifestEntry {
                    scan_file: r.cells[0].clone(),
                    truth_file: r.cells[1].clone(),
                    time_bin_ps: match r.cells[2].as_str() {
                        "none" => None,
                        _ => Some(doc.cell(r, 2)?),
                    },
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            source: doc.parse("source")?,
            n_qubits: doc.parse("n_qubits")?,
            n_samples: doc.parse("n_samples")?,
            intensity: doc.opt("intensity")?,
            seed: doc.parse("seed")?,
            target: (target != "none").then_some(target),
            entries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{simulate_scan, standard_waveplates};
    use crate::qmat::random;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p() -> &'static Path {
        Path::new("test.txt")
    }

    #[test]
    fn scan_round_trip() {
        let rho = DensityMatrix::from_pure(&states::bell_psi_minus()).unwrap();
        let scan = simulate_scan(&rho, &standard_waveplates(2), 100, Some(500.0), 3)
            .unwrap()
            .with_time_bin(12.5);
        let text = scan_to_string(&scan);
        let back = parse_scan(&text, p()).unwrap();
        assert_eq!(back, scan);
        assert_eq!(scan_to_string(&back), text);
    }

    #[test]
    fn corrupted_header_names_line() {
        let rho = DensityMatrix::from_pure(&states::h()).unwrap();
        let scan = simulate_scan(&rho, &standard_waveplates(1), 40, None, 0).unwrap();
        let text = scan_to_string(&scan).replace("value_kind probability", "value_kind photons");
        match parse_scan(&text, p()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = scan_to_string(&scan).replace("# ftqst-scan v1", "# ftqst-scan v9");
        assert!(matches!(parse_scan(&text, p()), Err(Error::Parse { line: 1, .. })));
        let original = scan_to_string(&scan);
        let mut lines: Vec<&str> = original.lines().collect();
        lines[20] = "0.5 oops";
        let text = lines.join("\n");
        assert!(matches!(parse_scan(&text, p()), Err(Error::Parse { line: 21, .. })));
    }

    #[test]
    fn undersampled_scan_file_is_nyquist_error() {
        let rho = DensityMatrix::from_pure(&states::h()).unwrap();
        let scan = simulate_scan(&rho, &standard_waveplates(1), 40, None, 0).unwrap();
        let text: String = scan_to_string(&scan)
            .lines()
            .take(7 + 5)
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(parse_scan(&text, p()), Err(Error::Nyquist { .. })));
    }

    #[test]
    fn result_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random::density(2, &mut rng);
        let rec = ResultRecord::with_metrics("truth", rho, Some(10.0), Some("phi+")).unwrap();
        let text = rec.to_text();
        let back = ResultRecord::parse(&text, p()).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn plus_minus_format() {
        let pm = PlusMinus::rounded(0.94123, 0.00612);
        assert_eq!(pm.to_string(), "0.9412 ± 0.0061");
        assert_eq!(pm.to_string().parse::<PlusMinus>().unwrap(), pm);
    }

    #[test]
    fn table_round_trip() {
        let mut t = Table::new("signal", &["theta_rad", "measured", "fourier_fit"]).field("n_qubits", 1);
        for k in 0..10 {
            let th = k as f64 * std::f64::consts::PI / 10.0;
            t.push(vec![th, th.cos() / 3.0, th.sin()]);
        }
        let text = t.to_text();
        let back = Table::parse(&text, p()).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.column("measured"), t.column("measured"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, "one").unwrap();
        write_atomic(&path, "two").unwrap();
        assert_eq!(read_text(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn scan_text_is_stable(seed in 0u64..1000, n in 1usize..=2, counts in proptest::bool::ANY) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random::density(n, &mut rng);
            let samples = if n == 1 { 9 + (seed as usize % 50) } else { 49 + (seed as usize % 60) };
            let intensity = counts.then_some(300.0);
            let scan = simulate_scan(&rho, &standard_waveplates(n), samples, intensity, seed).unwrap();
            let text = scan_to_string(&scan);
            let back = parse_scan(&text, p()).unwrap();
            prop_assert_eq!(scan_to_string(&back), text);
            prop_assert_eq!(back.values(), scan.values());
        }
    }
}
