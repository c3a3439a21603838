//! The four reconstruction protocols behind a common trait, and the shared
//! deconvolution stage.

use std::collections::BTreeMap;

use crate::dilation::{invert_dilation, DilationSolution};
use crate::error::{Error, Result};
use crate::forward::{make_g, DerivedCurves};
use crate::fourier::{
    division_rate_quotient, empirical_n_star, f_star_estimate, fourier_quadrature,
    inverse_fourier_truncated, positivity_projection, survival_from_density, FStar, Spectrum,
};
use crate::grid::{Grid1D, GriddedFunction};
use crate::model::{relative_l2_error, GrowthLaw, RegularizationParams};
use crate::sample::SizeSample;

use super::kernel::{kde, kde_derivative, kde_derivative_weighted, silverman_bandwidth, KernelSpec};
use super::oracle::{oracle_bandwidth, OracleCurve};
use super::{study_grid, ErrorMode, PipelineSettings, Quantity, Truth, EXACT_VARPI};

/// What a protocol may draw on. Which fields are required depends on the protocol.
#[derive(Debug, Clone, Copy)]
pub struct ProtocolInputs<'a> {
    pub exact: Option<&'a DerivedCurves>,
    pub sample: Option<&'a SizeSample>,
    pub growth: &'a GrowthLaw,
    pub lambda: f64,
    /// Size grid on which kernel estimates and the dilation inverse live.
    pub size_grid: Grid1D,
}

impl<'a> ProtocolInputs<'a> {
    pub fn from_truth(truth: &'a Truth, sample: Option<&'a SizeSample>) -> Self {
        Self {
            exact: Some(&truth.curves),
            sample,
            growth: &truth.growth,
            lambda: truth.lambda,
            size_grid: truth.size_grid(),
        }
    }

    fn exact(&self, protocol: u8, what: &str) -> Result<&'a DerivedCurves> {
        self.exact.ok_or_else(|| Error::MissingInput(format!("protocol {protocol} needs the exact {what}")))
    }

    fn sample(&self, protocol: u8) -> Result<&'a SizeSample> {
        self.sample.ok_or_else(|| Error::MissingInput(format!("protocol {protocol} needs a size sample")))
    }
}

/// Everything upstream of the spectral cutoff.
#[derive(Debug, Clone)]
pub struct Intermediates {
    pub u_x: Option<GriddedFunction>,
    pub u_x_prime: Option<GriddedFunction>,
    pub d: Option<GriddedFunction>,
    pub dilation: Option<DilationSolution>,
    pub l_b: Option<GriddedFunction>,
    pub g_b: GriddedFunction,
    pub g_star: Spectrum,
    pub n_star: Spectrum,
    pub h1: Option<f64>,
    pub h2: Option<f64>,
    pub sample_size: Option<usize>,
    /// Quantities estimated here rather than copied from exact inputs.
    pub estimated: Vec<Quantity>,
}

pub trait Protocol: Send + Sync {
    fn id(&self) -> u8;
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn uses_sample(&self) -> bool;
    fn prepare(&self, inputs: &ProtocolInputs<'_>, settings: &PipelineSettings) -> Result<Intermediates>;
}

/// Exact `U_x` and exact `L_B`.
#[derive(Debug, Default)]
pub struct ExactInputs;

/// Exact `U_x`; `L_B` from the dilation inverse.
#[derive(Debug, Default)]
pub struct ExactSizes;

/// Sample-based `N*`, exact `L_B`.
#[derive(Debug, Default)]
pub struct SampleWithExactDividing;

/// Everything from the sample.
#[derive(Debug, Default)]
pub struct SampleOnly;

fn sample_bandwidths(sample: &SizeSample, settings: &PipelineSettings) -> Result<(f64, f64)> {
    let h1 = match settings.h1 {
        Some(h) => h,
        None => silverman_bandwidth(sample)?,
    };
    Ok((h1, settings.h2.apply(h1)))
}

impl Protocol for ExactInputs {
    fn id(&self) -> u8 {
        1
    }
    fn name(&self) -> &'static str {
        "exact"
    }
    fn summary(&self) -> &'static str {
        "exact size marginal and exact dividing-size distribution"
    }
    fn uses_sample(&self) -> bool {
        false
    }
    fn prepare(&self, inputs: &ProtocolInputs<'_>, settings: &PipelineSettings) -> Result<Intermediates> {
        let exact = inputs.exact(1, "size marginal and dividing-size distribution")?;
        Ok(Intermediates {
            u_x: None,
            u_x_prime: None,
            d: None,
            dilation: None,
            l_b: None,
            g_star: fourier_quadrature(&exact.g_b, &settings.xi_grid),
            n_star: fourier_quadrature(&exact.n_b, &settings.xi_grid),
            g_b: exact.g_b.clone(),
            h1: None,
            h2: None,
            sample_size: None,
            estimated: vec![],
        })
    }
}

impl Protocol for ExactSizes {
    fn id(&self) -> u8 {
        2
    }
    fn name(&self) -> &'static str {
        "exact-sizes"
    }
    fn summary(&self) -> &'static str {
        "exact size marginal; dividing-size distribution by dilation inversion"
    }
    fn uses_sample(&self) -> bool {
        false
    }
    fn prepare(&self, inputs: &ProtocolInputs<'_>, settings: &PipelineSettings) -> Result<Intermediates> {
        let exact = inputs.exact(2, "size marginal")?;
        let d = super::dilation_data(&exact.u_x, inputs.growth, inputs.lambda);
        let dil = invert_dilation(&d)?;
        let l_b = dil.concatenated.clone();
        let g_b = make_g(&l_b, inputs.growth, inputs.lambda);
        Ok(Intermediates {
            u_x: None,
            u_x_prime: None,
            d: Some(d),
            dilation: Some(dil),
            g_star: fourier_quadrature(&g_b, &settings.xi_grid),
            n_star: fourier_quadrature(&exact.n_b, &settings.xi_grid),
            l_b: Some(l_b),
            g_b,
            h1: None,
            h2: None,
            sample_size: None,
            estimated: vec![Quantity::L, Quantity::G, Quantity::GStar],
        })
    }
}

impl Protocol for SampleWithExactDividing {
    fn id(&self) -> u8 {
        3
    }
    fn name(&self) -> &'static str {
        "sample-exact-dividing"
    }
    fn summary(&self) -> &'static str {
        "size sample for N*; exact dividing-size distribution"
    }
    fn uses_sample(&self) -> bool {
        true
    }
    fn prepare(&self, inputs: &ProtocolInputs<'_>, settings: &PipelineSettings) -> Result<Intermediates> {
        let exact = inputs.exact(3, "dividing-size distribution")?;
        let sample = inputs.sample(3)?;
        let (h1, _) = sample_bandwidths(sample, settings)?;
        let spec = KernelSpec { kernel: settings.kernel, h: h1 };
        Ok(Intermediates {
            u_x: Some(kde(sample, &spec, &inputs.size_grid)),
            u_x_prime: None,
            d: None,
            dilation: None,
            l_b: None,
            g_star: fourier_quadrature(&exact.g_b, &settings.xi_grid),
            n_star: empirical_n_star(sample, inputs.growth, inputs.lambda, &settings.xi_grid),
            g_b: exact.g_b.clone(),
            h1: Some(h1),
            h2: None,
            sample_size: Some(sample.len()),
            estimated: vec![Quantity::U, Quantity::NStar],
        })
    }
}

impl Protocol for SampleOnly {
    fn id(&self) -> u8 {
        4
    }
    fn name(&self) -> &'static str {
        "sample"
    }
    fn summary(&self) -> &'static str {
        "everything estimated from the size sample"
    }
    fn uses_sample(&self) -> bool {
        true
    }
    fn prepare(&self, inputs: &ProtocolInputs<'_>, settings: &PipelineSettings) -> Result<Intermediates> {
        let sample = inputs.sample(4)?;
        let (h1, h2) = sample_bandwidths(sample, settings)?;
        let grid = inputs.size_grid;
        let s1 = KernelSpec { kernel: settings.kernel, h: h1 };
        let s2 = KernelSpec { kernel: settings.kernel, h: h2 };
        let u_x = kde(sample, &s1, &grid);
        let flux_deriv = kde_derivative_weighted(sample, inputs.growth, &s2, &grid);
        let values = u_x
            .values()
            .iter()
            .zip(flux_deriv.values())
            .map(|(u, d)| inputs.lambda * u + d)
            .collect();
        let d = GriddedFunction::new(grid, values)?;
        let dil = invert_dilation(&d)?;
        let l_b = dil.concatenated.clone();
        let g_b = make_g(&l_b, inputs.growth, inputs.lambda);
        Ok(Intermediates {
            u_x_prime: Some(kde_derivative(sample, &s2, &grid)),
            u_x: Some(u_x),
            d: Some(d),
            dilation: Some(dil),
            g_star: fourier_quadrature(&g_b, &settings.xi_grid),
            n_star: empirical_n_star(sample, inputs.growth, inputs.lambda, &settings.xi_grid),
            l_b: Some(l_b),
            g_b,
            h1: Some(h1),
            h2: Some(h2),
            sample_size: Some(sample.len()),
            estimated: vec![
                Quantity::U,
                Quantity::UPrime,
                Quantity::D,
                Quantity::L,
                Quantity::G,
                Quantity::GStar,
                Quantity::NStar,
            ],
        })
    }
}

/// Protocols by id (`"1"`..`"4"`) or name.
pub struct ProtocolRegistry {
    entries: Vec<Box<dyn Protocol>>,
}

impl ProtocolRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(ExactInputs));
        r.register(Box::new(ExactSizes));
        r.register(Box::new(SampleWithExactDividing));
        r.register(Box::new(SampleOnly));
        r
    }

    /// Later registrations shadow earlier ones with the same id or name.
    pub fn register(&mut self, p: Box<dyn Protocol>) {
        self.entries.retain(|e| e.id() != p.id() && e.name() != p.name());
        self.entries.push(p);
        self.entries.sort_by_key(|e| e.id());
    }

    pub fn get(&self, key: &str) -> Option<&dyn Protocol> {
        let key = key.trim();
        self.entries
            .iter()
            .find(|e| e.name() == key || e.id().to_string() == key)
            .map(|b| b.as_ref())
    }

    pub fn by_id(&self, id: u8) -> Option<&dyn Protocol> {
        self.entries.iter().find(|e| e.id() == id).map(|b| b.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Protocol> {
        self.entries.iter().map(|b| b.as_ref())
    }
}

impl Default for ProtocolRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

/// Output of the deconvolution stage at one cutoff.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub h3: f64,
    pub f_star: FStar,
    /// Real part of the truncated inverse, before projection.
    pub f_raw: GriddedFunction,
    pub f: GriddedFunction,
    pub s: GriddedFunction,
    pub b: GriddedFunction,
    pub floor_from: Option<f64>,
    pub imaginary_residue: f64,
    /// `|f*(1/h3)|`; small when the constant term of the estimate has cancelled.
    pub f_star_at_cutoff: f64,
}

/// `f* -> f -> S -> B` at cutoff `1/h3`.
pub fn reconstruct(
    inter: &Intermediates,
    h3: f64,
    settings: &PipelineSettings,
    varpi: f64,
) -> Result<Reconstruction> {
    let f_star = f_star_estimate(&inter.n_star, &inter.g_star, settings.xi_floor)?;
    let inv = inverse_fourier_truncated(&f_star.spectrum, h3, &settings.output_grid)?;
    let f = if settings.project { positivity_projection(&inv.values)? } else { inv.values.clone() };
    let s = survival_from_density(&f);
    let q = division_rate_quotient(&f, &s, varpi)?;
    let f_star_at_cutoff = f_star.spectrum.eval(1.0 / h3).norm();
    Ok(Reconstruction {
        h3,
        f_star_at_cutoff,
        f_star,
        f_raw: inv.values,
        f,
        s,
        b: q.rate,
        floor_from: q.floor_from,
        imaginary_residue: inv.imaginary_residue,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    Oracle,
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub protocol: u8,
    pub params: RegularizationParams,
    pub intermediates: Intermediates,
    pub reconstruction: Reconstruction,
    pub errors: BTreeMap<Quantity, f64>,
    pub oracle: Option<OracleCurve>,
}

impl ReconstructionResult {
    pub fn error(&self, q: Quantity) -> Option<f64> {
        self.errors.get(&q).copied()
    }
}

fn f_grid(mode: ErrorMode, settings: &PipelineSettings) -> Grid1D {
    match mode {
        ErrorMode::SingleRun => settings.output_grid,
        ErrorMode::Study { n } => study_grid(2.25, 1.0 / (n as f64).sqrt()),
    }
}

fn error_on(estimate: &GriddedFunction, truth: &GriddedFunction) -> Result<f64> {
    relative_l2_error(&estimate.resample(*truth.grid()), truth)
}

/// Relative errors of every estimated quantity on the declared grids.
pub fn error_table(
    inter: &Intermediates,
    rec: &Reconstruction,
    truth: &Truth,
    mode: ErrorMode,
    settings: &PipelineSettings,
) -> Result<BTreeMap<Quantity, f64>> {
    let mut t = BTreeMap::new();
    let spectral_width = match mode {
        ErrorMode::SingleRun => f64::INFINITY,
        ErrorMode::Study { .. } => 10.0,
    };
    for q in &inter.estimated {
        let e = match q {
            Quantity::U => inter.u_x.as_ref().map(|u| error_on(u, &truth.curves.u_x)),
            Quantity::UPrime => inter.u_x_prime.as_ref().map(|u| error_on(u, &truth.u_x_prime)),
            Quantity::D => inter.d.as_ref().map(|d| error_on(d, &truth.d)),
            Quantity::L => inter.l_b.as_ref().map(|l| error_on(l, &truth.curves.l_b)),
            Quantity::G => Some(error_on(&inter.g_b, &truth.curves.g_b)),
            Quantity::GStar => Some(inter.g_star.relative_error(&truth.g_star, spectral_width)),
            Quantity::NStar => Some(inter.n_star.relative_error(&truth.n_star, spectral_width)),
            _ => None,
        };
        if let Some(e) = e {
            t.insert(*q, e?);
        }
    }
    let f_width = match mode {
        ErrorMode::SingleRun => 1.0 / rec.h3,
        ErrorMode::Study { .. } => 10.0,
    };
    t.insert(Quantity::FStar, rec.f_star.spectrum.relative_error(&truth.f_star, f_width)?);
    let fg = f_grid(mode, settings);
    t.insert(Quantity::F, error_on(&rec.f, &truth.density_on(fg))?);
    t.insert(Quantity::S, error_on(&rec.s, &truth.survival_on(fg))?);
    match mode {
        ErrorMode::SingleRun => {
            let step = settings.output_grid.step();
            let narrow = study_grid(2.0, step);
            let wide = study_grid(2.5, step);
            t.insert(Quantity::B, error_on(&rec.b, &truth.rate_on(narrow))?);
            t.insert(Quantity::BWide, error_on(&rec.b, &truth.rate_on(wide))?);
        }
        ErrorMode::Study { n } => {
            let grid = study_grid(2.0, 1.0 / (n as f64).sqrt());
            t.insert(Quantity::B, error_on(&rec.b, &truth.rate_on(grid))?);
        }
    }
    Ok(t)
}

/// Run one protocol end to end. With a truth, errors are tabulated and the
/// oracle cutoff is available.
pub fn run_protocol(
    protocol: &dyn Protocol,
    inputs: &ProtocolInputs<'_>,
    settings: &PipelineSettings,
    bandwidth: Bandwidth,
    truth: Option<&Truth>,
    mode: ErrorMode,
) -> Result<ReconstructionResult> {
    let inter = protocol.prepare(inputs, settings)?;
    let varpi = match (settings.varpi, inter.sample_size) {
        (Some(v), _) => v,
        (None, Some(n)) => 1.0 / n as f64,
        (None, None) => EXACT_VARPI,
    };
    let (rec, oracle) = match bandwidth {
        Bandwidth::Fixed(h3) => (reconstruct(&inter, h3, settings, varpi)?, None),
        Bandwidth::Oracle => {
            let fg = f_grid(mode, settings);
            let target = truth.map(|t| t.density_on(fg));
            let (h3, curve) = oracle_bandwidth(&settings.oracle_grid, target.as_ref(), |h| {
                Ok(reconstruct(&inter, h, settings, varpi)?.f)
            })?;
            (reconstruct(&inter, h3, settings, varpi)?, Some(curve))
        }
    };
    let errors = match truth {
        Some(t) => error_table(&inter, &rec, t, mode, settings)?,
        None => BTreeMap::new(),
    };
    let params = RegularizationParams {
        h1: inter.h1,
        h2: inter.h2,
        h3: rec.h3,
        h4: None,
        varpi,
        xi_floor: settings.xi_floor,
        x_bar: inter.dilation.as_ref().map(|d| d.x_bar),
        omega_kept: rec.f_star.omega_kept,
        omega_total: rec.f_star.omega_total,
    };
    Ok(ReconstructionResult {
        protocol: protocol.id(),
        params,
        intermediates: inter,
        reconstruction: rec,
        errors,
        oracle,
    })
}
