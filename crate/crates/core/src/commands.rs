//! The subcommands behind the `adder` binary. Each writes its files under
//! the configured output directory and returns the manifest it wrote.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forward::{sample_dividing, sample_sizes, solve_eigenpair};
use crate::fourier::default_frequency_grid;
use crate::grid::{Grid1D, GriddedFunction};
use crate::io::{self, Manifest, RunConfig};
use crate::model::{relative_l2_error, GrowthLaw, SURVIVAL_TRUNCATION};
use crate::pipeline::{
    direct_dividing_estimator, monte_carlo, repeat_seed, run_protocol, slopes_from_means, study_grid,
    weighted_kde, Bandwidth, ErrorMode, H2Rule, PipelineSettings, ProtocolInputs, ProtocolRegistry,
    Quantity, SeedScheme, SlopeTable, Truth,
};
use crate::sample::SizeSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Sample,
    Reconstruct,
    Mc,
    Slopes,
    Experimental,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Simulate,
        Command::Sample,
        Command::Reconstruct,
        Command::Mc,
        Command::Slopes,
        Command::Experimental,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sample => "sample",
            Command::Reconstruct => "reconstruct",
            Command::Mc => "mc",
            Command::Slopes => "slopes",
            Command::Experimental => "experimental",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown subcommand `{s}`")))
    }
}

/// Defaults of the experimental workflow for its own dataset.
pub const EXPERIMENTAL_H1: f64 = 0.125;

pub fn run_command(cmd: Command, cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let out = cfg.run.out.clone();
    fs::create_dir_all(&out)?;
    let mut m = Manifest::new(cmd.name(), cfg);
    match cmd {
        Command::Simulate => simulate(cfg, &out, &mut m)?,
        Command::Sample => sample(cfg, &out, &mut m)?,
        Command::Reconstruct => reconstruct(cfg, &out, &mut m)?,
        Command::Mc => mc(cfg, &out, &mut m)?,
        Command::Slopes => slopes(cfg, &out, &mut m)?,
        Command::Experimental => experimental(cfg, &out, &mut m)?,
    }
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    m.output("config", "config.toml");
    m.write(&out)?;
    Ok(m)
}

pub fn settings(cfg: &RunConfig) -> PipelineSettings {
    let r = &cfg.regularization;
    PipelineSettings {
        xi_floor: r.xi_floor,
        varpi: r.varpi,
        h1: r.h1,
        h2: match r.h2 {
            Some(h) => H2Rule::Fixed(h),
            None => H2Rule::Power(r.h2_power),
        },
        ..PipelineSettings::default()
    }
}

pub fn bandwidth(cfg: &RunConfig) -> Bandwidth {
    match cfg.regularization.h3 {
        Some(h) => Bandwidth::Fixed(h),
        None => Bandwidth::Oracle,
    }
}

/// Solve the direct problem of the configured model.
pub fn solve_truth(cfg: &RunConfig) -> Result<Truth> {
    let growth = cfg.growth()?;
    let rate = cfg.rate()?;
    if !rate.covered_by(cfg.grid.a_max) {
        log::warn!("survival at a_max = {} is above {SURVIVAL_TRUNCATION}; the increment axis truncates the law", cfg.grid.a_max);
    }
    let sol = solve_eigenpair(&growth, &rate, cfg.increment_grid()?, cfg.size_grid()?, &cfg.solver_options())?;
    log::info!("eigenpair: lambda {:.6} after {} steps", sol.lambda, sol.steps);
    Truth::new(sol, growth, rate, &default_frequency_grid())
}

fn save(m: &mut Manifest, out: &Path, key: &str, file: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    write(&out.join(file))?;
    m.output(key, file);
    Ok(())
}

fn simulate(cfg: &RunConfig, out: &Path, m: &mut Manifest) -> Result<()> {
    let t = solve_truth(cfg)?;
    let sol = &t.solution;
    let c = &t.curves;
    m.result("lambda", sol.lambda);
    m.result("lambda_used", t.lambda);
    m.result("steps", sol.steps as f64);
    m.result("final_change", sol.final_change);
    m.result("time_step", sol.time_step);
    m.result("mass", sol.mass());
    m.result("l_b_mass", c.l_b.integral());
    m.result("mass_above_diagonal", sol.mass_above_diagonal());
    save(m, out, "u", "u.csv", |p| io::write_density_matrix(p, sol))?;
    save(m, out, "u_x", "u_x.csv", |p| io::write_curve(p, "x", "u_x", &c.u_x))?;
    save(m, out, "l_b", "l_b.csv", |p| io::write_curve(p, "x", "l_b", &c.l_b))?;
    save(m, out, "g_b", "g_b.csv", |p| io::write_curve(p, "y", "g_b", &c.g_b))?;
    save(m, out, "n_b", "n_b.csv", |p| io::write_curve(p, "y", "n_b", &c.n_b))?;
    Ok(())
}

fn dividing_seed(seed: u64, n: usize) -> u64 {
    repeat_seed(seed, 0, n, 0)
}

fn sample(cfg: &RunConfig, out: &Path, m: &mut Manifest) -> Result<()> {
    let t = solve_truth(cfg)?;
    let sizes = sample_sizes(&t.curves.u_x, cfg.run.n, cfg.run.seed)?;
    m.result("lambda", t.solution.lambda);
    m.result("n", sizes.len() as f64);
    save(m, out, "sizes", "sizes.csv", |p| io::write_sizes(p, &sizes))?;
    if let Some(nd) = cfg.run.n_dividing {
        let div = sample_dividing(&t.solution, &t.growth, &t.rate, nd, dividing_seed(cfg.run.seed, nd))?;
        m.result("n_dividing", div.len() as f64);
        save(m, out, "dividing", "dividing.csv", |p| io::write_dividing(p, &div))?;
    }
    Ok(())
}

fn record_params(m: &mut Manifest, p: &crate::model::RegularizationParams) {
    for (k, v) in [("h1", p.h1), ("h2", p.h2), ("h4", p.h4), ("x_bar", p.x_bar)] {
        if let Some(v) = v {
            m.result(k, v);
        }
    }
    m.result("h3", p.h3);
    m.result("varpi", p.varpi);
    m.result("xi_floor", p.xi_floor);
    m.result("omega_kept", p.omega_kept as f64);
    m.result("omega_total", p.omega_total as f64);
}

fn record_reconstruction(m: &mut Manifest, rec: &crate::pipeline::Reconstruction) {
    m.result("f_star_at_cutoff", rec.f_star_at_cutoff);
    m.result("imaginary_residue", rec.imaginary_residue);
    if let Some(a) = rec.floor_from {
        m.result("floor_from", a);
    }
}

fn reconstruct(cfg: &RunConfig, out: &Path, m: &mut Manifest) -> Result<()> {
    let t = solve_truth(cfg)?;
    let registry = ProtocolRegistry::standard();
    let protocol = registry
        .by_id(cfg.run.protocol)
        .ok_or_else(|| Error::Config(format!("run.protocol: no protocol {}", cfg.run.protocol)))?;
    let sample = if protocol.uses_sample() {
        Some(sample_sizes(&t.curves.u_x, cfg.run.n, cfg.run.seed)?)
    } else {
        None
    };
    let inputs = ProtocolInputs::from_truth(&t, sample.as_ref());
    let settings = settings(cfg);
    let res = run_protocol(protocol, &inputs, &settings, bandwidth(cfg), Some(&t), ErrorMode::SingleRun)?;
    m.note("protocol", protocol.name());
    m.result("protocol", protocol.id() as f64);
    m.result("lambda", t.solution.lambda);
    record_params(m, &res.params);
    for (q, e) in &res.errors {
        m.result(&format!("error_{}", q.key()), *e);
    }
    let rec = &res.reconstruction;
    record_reconstruction(m, rec);
    let og = *rec.f.grid();
    let (tf, ts, tb) = (t.density_on(og), t.survival_on(og), t.rate_on(og));
    save(m, out, "increment_curves", "increment_curves.csv", |p| {
        io::write_curves(
            p,
            "a",
            &[("f", &rec.f), ("f_true", &tf), ("s", &rec.s), ("s_true", &ts), ("b", &rec.b), ("b_true", &tb)],
        )
    })?;
    let i = &res.intermediates;
    let mut size_cols: Vec<(&str, &GriddedFunction)> = Vec::new();
    let pairs = [
        ("u_x", i.u_x.as_ref(), &t.curves.u_x),
        ("d", i.d.as_ref(), &t.d),
        ("l_b", i.l_b.as_ref(), &t.curves.l_b),
        ("g_b", Some(&i.g_b), &t.curves.g_b),
    ];
    for (name, est, truth) in pairs {
        if let Some(e) = est.filter(|e| e.grid().same_as(truth.grid())) {
            size_cols.push((name, e));
            size_cols.push((truth_name(name), truth));
        }
    }
    save(m, out, "size_curves", "size_curves.csv", |p| io::write_curves(p, "x", &size_cols))?;
    save(m, out, "f_star", "f_star.csv", |p| io::write_spectrum(p, &rec.f_star.spectrum))?;
    save(m, out, "f_star_true", "f_star_true.csv", |p| io::write_spectrum(p, &t.f_star))?;
    save(m, out, "g_star", "g_star.csv", |p| io::write_spectrum(p, &i.g_star))?;
    save(m, out, "n_star", "n_star.csv", |p| io::write_spectrum(p, &i.n_star))?;
    save(m, out, "errors", "errors.csv", |p| io::write_errors(p, &res.errors))?;
    if let Some(curve) = &res.oracle {
        save(m, out, "oracle", "oracle.csv", |p| io::write_oracle(p, curve))?;
    }
    if let Some(s) = &sample {
        save(m, out, "sizes", "sizes.csv", |p| io::write_sizes(p, s))?;
    }
    Ok(())
}

fn truth_name(name: &str) -> &'static str {
    match name {
        "u_x" => "u_x_true",
        "d" => "d_true",
        "l_b" => "l_b_true",
        _ => "g_b_true",
    }
}

fn mc(cfg: &RunConfig, out: &Path, m: &mut Manifest) -> Result<()> {
    let t = solve_truth(cfg)?;
    let registry = ProtocolRegistry::standard();
    let protocol = registry
        .by_id(cfg.run.protocol)
        .ok_or_else(|| Error::Config(format!("run.protocol: no protocol {}", cfg.run.protocol)))?;
    if !protocol.uses_sample() {
        return Err(Error::Config(format!(
            "run.protocol: Monte Carlo needs a sample-based protocol (3 or 4), got {}",
            protocol.id()
        )));
    }
    let settings = settings(cfg);
    let study = monte_carlo(
        protocol,
        &t,
        &cfg.run.n_grid,
        cfg.run.m,
        cfg.run.seed,
        &settings,
        bandwidth(cfg),
        SeedScheme::PerRepeat,
    )?;
    m.note("protocol", protocol.name());
    m.result("protocol", protocol.id() as f64);
    m.result("m", cfg.run.m as f64);
    for q in Quantity::ALL {
        if study.points.iter().any(|p| p.mean_error(q).is_some()) {
            let file = format!("study_{}.csv", q.key());
            save(m, out, &format!("study_{}", q.key()), &file, |p| io::write_study(p, &study.points, q))?;
        }
    }
    for p in &study.points {
        m.result(&format!("failures_n{}", p.n), p.failures.len() as f64);
        if !p.h3s.is_empty() {
            m.result(&format!("mean_h3_n{}", p.n), p.h3s.iter().sum::<f64>() / p.h3s.len() as f64);
        }
        for (q, band) in &p.bands {
            let file = format!("band_{}_n{}.csv", q.key(), p.n);
            save(m, out, &format!("band_{}_n{}", q.key(), p.n), &file, |path| io::write_band(path, band))?;
        }
        for q in Quantity::ALL {
            if let Some(e) = p.mean_error(q) {
                m.result(&format!("mean_error_{}_n{}", q.key(), p.n), e);
            }
        }
    }
    Ok(())
}

/// Slope table from the `study_*.csv` files in `dir`.
pub fn slopes_from_dir(dir: &Path) -> Result<SlopeTable> {
    let mut means = BTreeMap::new();
    for q in Quantity::ALL {
        let path = dir.join(format!("study_{}.csv", q.key()));
        if path.exists() {
            means.insert(q, io::read_study(&path)?);
        }
    }
    if means.is_empty() {
        return Err(Error::MissingInput(format!("no study_*.csv files in {}", dir.display())));
    }
    Ok(slopes_from_means(&means))
}

fn slopes(cfg: &RunConfig, out: &Path, m: &mut Manifest) -> Result<()> {
    let dir: PathBuf = cfg.data.study.clone().unwrap_or_else(|| out.to_path_buf());
    let table = slopes_from_dir(&dir)?;
    m.note("study", dir.display().to_string());
    for (q, fit) in &table.fits {
        match fit {
            Ok(f) => m.result(&format!("slope_{}", q.key()), f.slope),
            Err(e) => m.note(&format!("slope_{}", q.key()), e.to_string()),
        }
    }
    save(m, out, "slopes", "slopes.csv", |p| write_slopes(p, &table))?;
    print!("{}", table.to_text());
    Ok(())
}

fn write_slopes(path: &Path, table: &SlopeTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["quantity", "slope", "intercept", "used_n", "dropped_n", "error"])?;
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    for (q, fit) in &table.fits {
        match fit {
            Ok(f) => w.write_record([
                q.key().to_owned(),
                f.slope.to_string(),
                f.intercept.to_string(),
                join(&f.used),
                join(&f.dropped),
                String::new(),
            ])?,
            Err(e) => w.write_record([q.key(), "", "", "", "", &e.to_string()])?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Size grid for observed data: cells of the configured mesh covering the
/// sample plus four kernel widths.
pub fn data_size_grid(sizes: &SizeSample, h1: f64, step: f64) -> Result<Grid1D> {
    let cells = ((sizes.max() + 4.0 * h1) / step).ceil().max(2.0);
    Grid1D::cells(0.0, cells * step, step)
}

/// Increment grid for reconstructions from data: mesh 0.01 up to the larger
/// of 5 and the size range.
pub fn data_increment_grid(size_grid: &Grid1D) -> Result<Grid1D> {
    let hi = (size_grid.max() + 0.5 * size_grid.step()).ceil().max(5.0);
    Grid1D::new(0.0, hi, 0.01)
}

fn experimental(cfg: &RunConfig, out: &Path, m: &mut Manifest) -> Result<()> {
    let tau = cfg
        .model
        .tau
        .ok_or_else(|| Error::Config("model.tau: the experimental workflow needs the measured growth rate (--tau)".into()))?;
    let h3 = cfg
        .regularization
        .h3
        .ok_or_else(|| Error::Config("regularization.h3: the experimental workflow needs a fixed h3 (no oracle without a truth)".into()))?;
    let sizes_path = cfg
        .data
        .sizes
        .as_ref()
        .ok_or_else(|| Error::Config("data.sizes: the experimental workflow needs a size sample (--sizes)".into()))?;
    let sizes = io::ingest_sizes(sizes_path)?;
    let growth = GrowthLaw::linear(tau)?;
    let mut settings = settings(cfg);
    let h1 = cfg.regularization.h1.unwrap_or(EXPERIMENTAL_H1);
    settings.h1 = Some(h1);
    let size_grid = data_size_grid(&sizes, h1, cfg.grid.step)?;
    settings.output_grid = data_increment_grid(&size_grid)?;
    let inputs = ProtocolInputs { exact: None, sample: Some(&sizes), growth: &growth, lambda: tau, size_grid };
    let registry = ProtocolRegistry::standard();
    let p4 = registry.by_id(4).ok_or_else(|| Error::Config("protocol 4 is not registered".into()))?;
    let res = run_protocol(p4, &inputs, &settings, Bandwidth::Fixed(h3), None, ErrorMode::SingleRun)?;
    m.result("n", sizes.len() as f64);
    m.result("tau", tau);
    record_params(m, &res.params);
    let i = &res.intermediates;
    let rec = &res.reconstruction;
    record_reconstruction(m, rec);
    let u_x = i.u_x.as_ref().ok_or_else(|| Error::MissingInput("size density estimate".into()))?;
    let l_b = i.l_b.as_ref().ok_or_else(|| Error::MissingInput("dividing-size estimate".into()))?;
    let mut size_cols: Vec<(&str, &GriddedFunction)> = vec![("u_x", u_x), ("l_b", l_b)];
    let mut inc_cols: Vec<(&str, &GriddedFunction)> = vec![("f", &rec.f), ("s", &rec.s), ("b", &rec.b)];
    let direct;
    let l_direct;
    let f_increments;
    if let Some(path) = &cfg.data.dividing {
        let div = io::ingest_dividing(path)?;
        let h_d = cfg.regularization.h_d;
        let varpi_d = cfg.regularization.varpi.unwrap_or(1.0 / div.len() as f64);
        direct = direct_dividing_estimator(&div, h_d, &settings.output_grid, varpi_d)?;
        let sizes_d: Vec<(f64, f64)> = div.cells().iter().map(|c| (c.size, 1.0)).collect();
        let incs: Vec<(f64, f64)> = div.cells().iter().map(|c| (c.increment, 1.0)).collect();
        l_direct = weighted_kde(&sizes_d, h_d, &size_grid);
        f_increments = weighted_kde(&incs, h_d, &settings.output_grid);
        size_cols.push(("l_direct", &l_direct));
        inc_cols.extend([
            ("f_direct", &direct.f),
            ("f_increments", &f_increments),
            ("s_direct", &direct.s),
            ("b_direct", &direct.b),
        ]);
        m.result("n_dividing", div.len() as f64);
        m.result("h_d", h_d);
        m.result("varpi_direct", varpi_d);
        m.result("direct_raw_mass", direct.raw_mass);
        let narrow = study_grid(2.0, settings.output_grid.step());
        let b_direct = direct.b.resample(narrow);
        if let Ok(e) = relative_l2_error(&rec.b.resample(narrow), &b_direct) {
            m.result("b_relative_distance", e);
        }
        save(m, out, "b_overlay", "b_overlay.csv", |p| {
            io::write_curves(p, "a", &[("b", &rec.b), ("b_direct", &direct.b)])
        })?;
    }
    save(m, out, "size_curves", "size_curves.csv", |p| io::write_curves(p, "x", &size_cols))?;
    save(m, out, "increment_curves", "increment_curves.csv", |p| io::write_curves(p, "a", &inc_cols))?;
    save(m, out, "g_star", "g_star.csv", |p| io::write_spectrum(p, &i.g_star))?;
    save(m, out, "n_star", "n_star.csv", |p| io::write_spectrum(p, &i.n_star))?;
    save(m, out, "f_star", "f_star.csv", |p| io::write_spectrum(p, &rec.f_star.spectrum))?;
    Ok(())
}
