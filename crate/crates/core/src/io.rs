//! Run configuration, data ingestion and CSV/manifest output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{EigenSolution, SolverOptions};
use crate::fourier::Spectrum;
use crate::grid::{Grid1D, GriddedFunction};
use crate::model::{DivisionRate, GrowthLaw};
use crate::pipeline::{Band, OracleCurve, Quantity, StudyPoint};
use crate::sample::{DividingCell, DividingSample, SizeSample};

/// Bumped whenever a default below changes.
pub const DEFAULTS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub run: RunSection,
    pub regularization: RegularizationConfig,
    pub data: DataConfig,
}

/// Growth `g(x) = tau x` or a table `x,g`; division rate `a^gamma` or a table `a,b`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth_table: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub a_max: f64,
    pub x_max: f64,
    pub step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { a_max: 3.0, x_max: 6.0, step: 6.0 / 500.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub cfl: f64,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self { tol: d.tol, cfl: d.cfl, max_steps: d.max_steps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub protocol: u8,
    pub n: usize,
    /// Dividing cells drawn by `sample`; none when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_dividing: Option<usize>,
    pub m: usize,
    pub seed: u64,
    pub n_grid: Vec<usize>,
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            protocol: 4,
            n: 2000,
            n_dividing: None,
            m: 20,
            seed: 0,
            n_grid: vec![500, 2000, 8000, 32000],
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizationConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h1: Option<f64>,
    /// Fixed `h2`; otherwise `h2 = h1^h2_power`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h2: Option<f64>,
    pub h2_power: f64,
    /// Fixed spectral cutoff `1/h3`; otherwise the oracle when a truth exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h3: Option<f64>,
    /// Survival floor; `1/n` for samples and 1e-9 for exact inputs when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub varpi: Option<f64>,
    pub xi_floor: f64,
    /// Bandwidth of the direct estimator from dividing cells.
    pub h_d: f64,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        Self { h1: None, h2: None, h2_power: 0.6, h3: None, varpi: None, xi_floor: 0.0, h_d: 0.167 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizes: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dividing: Option<PathBuf>,
    /// Directory holding `study_*.csv` files for `slopes`; the output directory when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study: Option<PathBuf>,
}

fn bad(key: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {why}"))
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.tau.is_some() && m.growth_table.is_some() {
            return Err(bad("model.tau", "give either tau or growth_table, not both"));
        }
        if m.gamma.is_some() && m.rate_table.is_some() {
            return Err(bad("model.gamma", "give either gamma or rate_table, not both"));
        }
        if let Some(t) = m.tau {
            positive("model.tau", t)?;
        }
        if let Some(g) = m.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(bad("model.gamma", format!("must be nonnegative, got {g}")));
            }
        }
        positive("grid.a_max", self.grid.a_max)?;
        positive("grid.x_max", self.grid.x_max)?;
        positive("grid.step", self.grid.step)?;
        self.increment_grid()?;
        self.size_grid()?;
        positive("solver.tol", self.solver.tol)?;
        if !(self.solver.cfl > 0.0 && self.solver.cfl <= 1.0) {
            return Err(bad("solver.cfl", format!("must lie in (0, 1], got {}", self.solver.cfl)));
        }
        if self.solver.max_steps == 0 {
            return Err(bad("solver.max_steps", "must be at least 1"));
        }
        let r = &self.run;
        if !(1..=4).contains(&r.protocol) {
            return Err(bad("run.protocol", format!("must be 1, 2, 3 or 4, got {}", r.protocol)));
        }
        if r.n < 2 {
            return Err(bad("run.n", format!("must be at least 2, got {}", r.n)));
        }
        if r.n_dividing == Some(0) {
            return Err(bad("run.n_dividing", "must be at least 1"));
        }
        if r.m < 2 {
            return Err(bad("run.m", format!("must be at least 2, got {}", r.m)));
        }
        if r.n_grid.is_empty() || r.n_grid.iter().any(|n| *n < 2) {
            return Err(bad("run.n_grid", "needs sizes of at least 2"));
        }
        let g = &self.regularization;
        for (key, v) in [("regularization.h1", g.h1), ("regularization.h2", g.h2), ("regularization.h3", g.h3)] {
            if let Some(v) = v {
                positive(key, v)?;
            }
        }
        positive("regularization.h2_power", g.h2_power)?;
        positive("regularization.h_d", g.h_d)?;
        if let Some(v) = g.varpi {
            if !(v > 0.0 && v < 1.0) {
                return Err(bad("regularization.varpi", format!("must lie in (0, 1), got {v}")));
            }
        }
        if !(g.xi_floor >= 0.0 && g.xi_floor.is_finite()) {
            return Err(bad("regularization.xi_floor", format!("must be nonnegative, got {}", g.xi_floor)));
        }
        Ok(())
    }

    pub fn increment_grid(&self) -> Result<Grid1D> {
        Grid1D::cells(0.0, self.grid.a_max, self.grid.step).map_err(|e| bad("grid.a_max", e))
    }

    pub fn size_grid(&self) -> Result<Grid1D> {
        Grid1D::cells(0.0, self.grid.x_max, self.grid.step).map_err(|e| bad("grid.x_max", e))
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            cfl: self.solver.cfl,
            max_steps: self.solver.max_steps,
            ..SolverOptions::default()
        }
    }

    pub fn growth(&self) -> Result<GrowthLaw> {
        match (&self.model.growth_table, self.model.tau) {
            (Some(path), _) => GrowthLaw::tabulated(read_table(path, "x", "g")?),
            (None, tau) => GrowthLaw::linear(tau.unwrap_or(1.0)),
        }
    }

    pub fn rate(&self) -> Result<DivisionRate> {
        match (&self.model.rate_table, self.model.gamma) {
            (Some(path), _) => DivisionRate::tabulated(read_table(path, "a", "b")?),
            (None, gamma) => DivisionRate::power_law(gamma.unwrap_or(2.0)),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Read and validate a TOML run configuration. Relative table and data paths
/// are resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: RunConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |p: &mut Option<PathBuf>| {
        if let Some(p) = p.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
    };
    resolve(&mut cfg.model.growth_table);
    resolve(&mut cfg.model.rate_table);
    resolve(&mut cfg.data.sizes);
    resolve(&mut cfg.data.dividing);
    resolve(&mut cfg.data.study);
    cfg.validate()?;
    Ok(cfg)
}

fn ingest_err(path: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::Ingest { path: path.to_path_buf(), row, message: message.into() }
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| ingest_err(path, 0, format!("cannot open: {e}")))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(ingest_err(path, 1, format!("expected header `{}`, found `{}`", header.join(","), found.join(","))));
    }
    Ok(rdr)
}

fn parse_field(path: &Path, row: usize, name: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ingest_err(path, row, format!("{name} `{raw}` is not a number")))
}

/// Rows of a headed CSV as numbers, tagged with their data-row number
/// (the first row after the header is row 1).
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rdr = open_csv(path, header)?;
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| ingest_err(path, row, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(ingest_err(path, row, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let vals = header
            .iter()
            .zip(rec.iter())
            .map(|(name, raw)| parse_field(path, row, name, raw))
            .collect::<Result<Vec<f64>>>()?;
        rows.push((row, vals));
    }
    if rows.is_empty() {
        return Err(ingest_err(path, 1, "no data rows"));
    }
    Ok(rows)
}

/// Sizes from a CSV with the single column `size`.
pub fn ingest_sizes(path: &Path) -> Result<SizeSample> {
    let rows = read_rows(path, &["size"])?;
    let mut sizes = Vec::with_capacity(rows.len());
    for (row, v) in rows {
        if !(v[0] > 0.0) {
            return Err(ingest_err(path, row, format!("size {} is not positive", v[0])));
        }
        sizes.push(v[0]);
    }
    log::info!("{}: {} sizes", path.display(), sizes.len());
    SizeSample::new(sizes)
}

/// Dividing cells from a CSV with columns `increment,size`.
pub fn ingest_dividing(path: &Path) -> Result<DividingSample> {
    let rows = read_rows(path, &["increment", "size"])?;
    let mut cells = Vec::with_capacity(rows.len());
    for (row, v) in rows {
        let (a, x) = (v[0], v[1]);
        if !(x > 0.0) {
            return Err(ingest_err(path, row, format!("size {x} is not positive")));
        }
        if a < 0.0 {
            return Err(ingest_err(path, row, format!("increment {a} is negative")));
        }
        if a > x {
            return Err(ingest_err(path, row, format!("increment {a} exceeds size {x}")));
        }
        cells.push(DividingCell { increment: a, size: x });
    }
    log::info!("{}: {} dividing cells", path.display(), cells.len());
    DividingSample::new(cells)
}

/// Two-column table on a uniform grid.
pub fn read_table(path: &Path, x: &str, y: &str) -> Result<GriddedFunction> {
    let rows = read_rows(path, &[x, y])?;
    if rows.len() < 2 {
        return Err(ingest_err(path, 1, "a table needs at least two rows"));
    }
    let x0 = rows[0].1[0];
    let step = rows[1].1[0] - x0;
    if !(step > 0.0) {
        return Err(ingest_err(path, 2, "nodes must increase"));
    }
    for (k, (row, v)) in rows.iter().enumerate() {
        let expect = x0 + k as f64 * step;
        if (v[0] - expect).abs() > 1e-6 * step.max(expect.abs()) {
            return Err(ingest_err(path, *row, format!("node {} breaks the uniform spacing {step}", v[0])));
        }
    }
    let grid = Grid1D::from_parts(x0, step, rows.len())?;
    GriddedFunction::new(grid, rows.into_iter().map(|(_, v)| v[1]).collect())
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

fn write_rows<const K: usize>(
    path: &Path,
    header: [&str; K],
    rows: impl IntoIterator<Item = [f64; K]>,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve(path: &Path, x: &str, y: &str, f: &GriddedFunction) -> Result<()> {
    write_rows(path, [x, y], f.iter().map(|(a, v)| [a, v]))
}

/// Curves sharing one grid, one column each.
pub fn write_curves(path: &Path, x: &str, curves: &[(&str, &GriddedFunction)]) -> Result<()> {
    let Some((_, first)) = curves.first() else {
        return Err(Error::Shape("no curves to write".into()));
    };
    let grid = *first.grid();
    if let Some((name, _)) = curves.iter().find(|(_, c)| !c.grid().same_as(&grid)) {
        return Err(Error::Shape(format!("curve {name} is on a different grid")));
    }
    let mut w = writer(path)?;
    w.write_record(std::iter::once(x).chain(curves.iter().map(|c| c.0)))?;
    for (j, node) in grid.nodes().enumerate() {
        w.write_record(
            std::iter::once(node.to_string()).chain(curves.iter().map(|c| c.1.values()[j].to_string())),
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectrum(path: &Path, s: &Spectrum) -> Result<()> {
    write_rows(path, ["xi", "re", "im"], s.iter().map(|(xi, z)| [xi, z.re, z.im]))
}

/// Dense eigenfunction: header row of size nodes, first column increments.
pub fn write_density_matrix(path: &Path, sol: &EigenSolution) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(std::iter::once("a\\x".to_owned()).chain(sol.sizes().nodes().map(|x| x.to_string())))?;
    for (ia, a) in sol.increments().nodes().enumerate() {
        w.write_record(std::iter::once(a.to_string()).chain(sol.row(ia).iter().map(|v| v.to_string())))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sizes(path: &Path, s: &SizeSample) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["size"])?;
    for x in s.values() {
        w.write_record([x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dividing(path: &Path, d: &DividingSample) -> Result<()> {
    write_rows(path, ["increment", "size"], d.cells().iter().map(|c| [c.increment, c.size]))
}

pub fn write_band(path: &Path, band: &Band) -> Result<()> {
    let rows = (0..band.grid.len()).map(|j| [band.grid.node(j), band.mean[j], band.lo[j], band.hi[j]]);
    write_rows(path, ["x", "mean", "lo", "hi"], rows)
}

pub fn write_oracle(path: &Path, curve: &OracleCurve) -> Result<()> {
    write_rows(path, ["inv_h", "error"], curve.inv_h.iter().zip(&curve.errors).map(|(c, e)| [*c, *e]))
}

pub fn write_errors(path: &Path, errors: &BTreeMap<Quantity, f64>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["quantity", "error"])?;
    for (q, e) in errors {
        w.write_record([q.key().to_owned(), e.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean relative error of `q` and its 95% interval across repeats, per `n`.
pub fn write_study(path: &Path, points: &[StudyPoint], q: Quantity) -> Result<()> {
    let rows: Vec<[f64; 4]> = points
        .iter()
        .filter_map(|p| {
            let mean = p.mean_error(q)?;
            let (lo, hi) = p.error_interval(q)?;
            Some([p.n as f64, mean, lo, hi])
        })
        .collect();
    write_rows(path, ["n", "mean_error", "ci_lo", "ci_hi"], rows)
}

/// `(n, mean_error)` pairs from a file written by [`write_study`].
pub fn read_study(path: &Path) -> Result<Vec<(usize, f64)>> {
    read_rows(path, &["n", "mean_error", "ci_lo", "ci_hi"])?
        .into_iter()
        .map(|(row, v)| {
            if v[0] < 1.0 || v[0].fract() != 0.0 {
                return Err(ingest_err(path, row, format!("n {} is not a positive integer", v[0])));
            }
            Ok((v[0] as usize, v[1]))
        })
        .collect()
}

/// Everything needed to rerun a command: the resolved configuration, the
/// seed, headline numbers and every file written (relative to the output
/// directory). Maps keep their keys sorted.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub defaults_version: u32,
    pub seed: u64,
    pub config: RunConfig,
    pub results: BTreeMap<String, f64>,
    pub notes: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            defaults_version: DEFAULTS_VERSION,
            seed: config.run.seed,
            config: config.clone(),
            results: BTreeMap::new(),
            notes: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn result(&mut self, key: &str, value: f64) {
        self.results.insert(key.to_owned(), value);
    }

    pub fn note(&mut self, key: &str, value: impl Into<String>) {
        self.notes.insert(key.to_owned(), value.into());
    }

    pub fn output(&mut self, key: &str, file: &str) {
        self.outputs.insert(key.to_owned(), file.to_owned());
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("manifest.toml");
        fs::write(&path, self.to_toml()?)?;
        Ok(path)
    }
}
