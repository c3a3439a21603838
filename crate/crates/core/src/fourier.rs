//! Quadrature Fourier transforms and the deconvolution step.
//!
//! Convention: `f*(xi) = int f(x) e^{i x xi} dx`, inverse
//! `(1 / 2 pi) int F(xi) e^{-i a xi} dxi`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GriddedFunction};
use crate::model::{right_tail_integral, GrowthLaw};
use crate::sample::SizeSample;

const RESEED: usize = 64;

/// Complex values on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid1D,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for a frequency grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> Complex64) -> Self {
        Self { grid, values: grid.nodes().map(f).collect() }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.grid.nodes().zip(self.values.iter().copied())
    }

    /// Linear interpolation, zero outside the grid.
    pub fn eval(&self, xi: f64) -> Complex64 {
        let p = self.grid.position(xi);
        let last = (self.grid.len() - 1) as f64;
        if !(p >= -1e-9 && p <= last + 1e-9) {
            return Complex64::new(0.0, 0.0);
        }
        let p = p.clamp(0.0, last);
        let i = (p.floor() as usize).min(self.grid.len() - 2);
        let t = p - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Largest `|F(-xi) - conj F(xi)|` over the grid.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let n = self.values.len();
        (0..n).map(|i| (self.values[n - 1 - i] - self.values[i].conj()).norm()).fold(0.0, f64::max)
    }

    /// Relative L2 distance restricted to `|xi| <= half_width`.
    pub fn relative_error(&self, truth: &Spectrum, half_width: f64) -> Result<f64> {
        if !self.grid.same_as(&truth.grid) {
            return Err(Error::Shape("spectra on different frequency grids".into()));
        }
        let (mut num, mut den) = (0.0, 0.0);
        for ((xi, e), t) in self.iter().zip(&truth.values) {
            if xi.abs() <= half_width + 1e-9 {
                num += (e - t).norm_sqr();
                den += t.norm_sqr();
            }
        }
        if den == 0.0 {
            return Err(Error::UndefinedMetric);
        }
        Ok((num / den).sqrt())
    }
}

/// `[-50, 50]` with step 0.05.
pub fn default_frequency_grid() -> Grid1D {
    Grid1D::symmetric(50.0, 0.05).expect("static grid")
}

// out[m] = sum_j w_j exp(i sign x_j nu_m) for the uniform grid nu_m, by
// angle-addition recurrence re-seeded every RESEED nodes.
fn phase_sums(points: &[(f64, f64)], grid: &Grid1D, first: usize, sign: f64) -> Vec<Complex64> {
    let len = grid.len() - first;
    let nu0 = grid.node(first);
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for &(x, w) in points {
        if w == 0.0 {
            continue;
        }
        let r = Complex64::from_polar(1.0, sign * x * grid.step());
        for (block, chunk) in out.chunks_mut(RESEED).enumerate() {
            let nu = nu0 + (block * RESEED) as f64 * grid.step();
            let mut z = Complex64::from_polar(w, sign * x * nu);
            for o in chunk {
                *o += z;
                z *= r;
            }
        }
    }
    out
}

// Transform of real weighted points onto a frequency grid, mirrored with
// conjugate symmetry when the grid is symmetric.
fn real_transform(points: &[(f64, f64)], grid: &Grid1D) -> Spectrum {
    const PARTS: usize = 8;
    let first = if grid.is_symmetric() { grid.len() / 2 } else { 0 };
    let chunk = points.len().div_ceil(PARTS).max(1);
    let partial: Vec<Vec<Complex64>> =
        points.par_chunks(chunk).map(|p| phase_sums(p, grid, first, 1.0)).collect();
    let mut half = vec![Complex64::new(0.0, 0.0); grid.len() - first];
    for p in &partial {
        for (h, v) in half.iter_mut().zip(p) {
            *h += v;
        }
    }
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    values[first..].copy_from_slice(&half);
    mirror_conjugate(&mut values, grid);
    Spectrum { grid: *grid, values }
}

// On a symmetric grid, overwrite the negative half with the conjugate of the
// positive half and make the value at 0 real.
fn mirror_conjugate(values: &mut [Complex64], grid: &Grid1D) {
    if !grid.is_symmetric() {
        return;
    }
    let n = values.len();
    let mid = n / 2;
    for i in 0..mid {
        values[i] = values[n - 1 - i].conj();
    }
    values[mid].im = 0.0;
}

/// Trapezoidal transform of `f`, read as zero outside its grid.
pub fn fourier_quadrature(f: &GriddedFunction, xi: &Grid1D) -> Spectrum {
    let n = f.grid().len();
    let step = f.grid().step();
    let points: Vec<(f64, f64)> = f
        .iter()
        .enumerate()
        .map(|(i, (x, v))| (x, if i == 0 || i == n - 1 { 0.5 * step * v } else { step * v }))
        .collect();
    real_transform(&points, xi)
}

/// `(1/n) sum g(X) e^{lambda G(X)} e^{i X xi}`; linear growth uses `tau X^2`.
pub fn empirical_n_star(
    sample: &SizeSample,
    growth: &GrowthLaw,
    lambda: f64,
    xi: &Grid1D,
) -> Spectrum {
    let n = sample.len() as f64;
    let points: Vec<(f64, f64)> = sample
        .values()
        .iter()
        .map(|&x| {
            let w = match growth {
                GrowthLaw::Linear { tau } => tau * x * x,
                _ => growth.speed(x) * growth.dilation_weight(lambda, x),
            };
            (x, w / n)
        })
        .collect();
    real_transform(&points, xi)
}

/// Estimated transform of the increment density and its frequency set.
#[derive(Debug, Clone)]
pub struct FStar {
    pub spectrum: Spectrum,
    pub omega_kept: usize,
    pub omega_total: usize,
}

/// `1 + i xi N*/G*` where `|G*| >= xi_floor` (and `G* != 0`), 1 elsewhere.
pub fn f_star_estimate(n_star: &Spectrum, g_star: &Spectrum, xi_floor: f64) -> Result<FStar> {
    if !n_star.grid.same_as(&g_star.grid) {
        return Err(Error::Shape("N* and G* on different frequency grids".into()));
    }
    let mut kept = 0;
    let mut values: Vec<Complex64> = n_star
        .iter()
        .zip(&g_star.values)
        .map(|((xi, n), g)| {
            let mag = g.norm();
            if mag >= xi_floor && mag > 0.0 {
                kept += 1;
                Complex64::new(1.0, 0.0) + Complex64::new(0.0, xi) * n / g
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    if kept == 0 {
        return Err(Error::DegenerateSpectrum { threshold: xi_floor });
    }
    mirror_conjugate(&mut values, &n_star.grid);
    Ok(FStar {
        spectrum: Spectrum { grid: n_star.grid, values },
        omega_kept: kept,
        omega_total: n_star.grid.len(),
    })
}

/// Real part of a truncated inverse transform and the relative size of the
/// discarded imaginary part.
#[derive(Debug, Clone)]
pub struct Inverse {
    pub values: GriddedFunction,
    pub imaginary_residue: f64,
}

/// `(1 / 2 pi) int_{-1/h}^{1/h} F(xi) e^{-i a xi} dxi` by the trapezoid rule.
pub fn inverse_fourier_truncated(spectrum: &Spectrum, h: f64, out: &Grid1D) -> Result<Inverse> {
    if !(h > 0.0) {
        return Err(Error::Domain { what: "bandwidth", value: h });
    }
    let cutoff = 1.0 / h;
    let grid = spectrum.grid;
    let available = grid.max().min(-grid.min());
    if cutoff > available * (1.0 + 1e-9) {
        return Err(Error::Bandwidth { h, needed: cutoff, available });
    }
    // Trapezoid weights on the nodes inside [-c, c], plus interpolated end pieces.
    let mut nodes: Vec<(f64, Complex64, f64)> = Vec::new();
    let lo = grid.position(-cutoff);
    let hi = grid.position(cutoff);
    let i0 = (lo - 1e-9).ceil().max(0.0) as usize;
    let i1 = ((hi + 1e-9).floor() as usize).min(grid.len() - 1);
    let step = grid.step();
    for i in i0..=i1 {
        let w = if i == i0 || i == i1 { 0.5 * step } else { step };
        nodes.push((grid.node(i), spectrum.values[i], w));
    }
    for (edge, inner) in [(-cutoff, i0), (cutoff, i1)] {
        let gap = (edge - grid.node(inner)).abs();
        if gap > 1e-9 * step {
            let v = spectrum.eval(edge);
            nodes.push((edge, v, 0.5 * gap));
            let last = nodes.iter_mut().find(|n| (n.0 - grid.node(inner)).abs() < 1e-12).unwrap();
            last.2 += 0.5 * gap;
        }
    }

    let len = out.len();
    let first = out.min();
    let (re, im): (Vec<f64>, Vec<f64>) = {
        let mut acc = vec![Complex64::new(0.0, 0.0); len];
        for &(xi, f, w) in &nodes {
            let r = Complex64::from_polar(1.0, -xi * out.step());
            for (block, chunk) in acc.chunks_mut(RESEED).enumerate() {
                let a = first + (block * RESEED) as f64 * out.step();
                let mut z = f * w * Complex64::from_polar(1.0, -xi * a);
                for o in chunk {
                    *o += z;
                    z *= r;
                }
            }
        }
        let scale = 1.0 / (2.0 * std::f64::consts::PI);
        acc.iter().map(|c| (c.re * scale, c.im * scale)).unzip()
    };
    let peak = re.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let residue = im.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(Inverse {
        values: GriddedFunction::new(*out, re)?,
        imaginary_residue: if peak > 0.0 { residue / peak } else { residue },
    })
}

/// `S(a) = int_a^inf f`, right-tail trapezoid; zero at the last node.
pub fn survival_from_density(f: &GriddedFunction) -> GriddedFunction {
    let values = right_tail_integral(f.values(), f.grid().step());
    GriddedFunction::new(*f.grid(), values).expect("grid length")
}

/// Survival by inverting `N*/G*` directly. Not guaranteed to be monotone,
/// nor to equal 1 at zero.
pub fn survival_spectral(
    n_star: &Spectrum,
    g_star: &Spectrum,
    h4: f64,
    xi_floor: f64,
    out: &Grid1D,
) -> Result<GriddedFunction> {
    if !n_star.grid.same_as(&g_star.grid) {
        return Err(Error::Shape("N* and G* on different frequency grids".into()));
    }
    let mut kept = 0;
    let values = n_star
        .values
        .iter()
        .zip(&g_star.values)
        .map(|(n, g)| {
            if g.norm() >= xi_floor && g.norm() > 0.0 {
                kept += 1;
                n / g
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    if kept == 0 {
        return Err(Error::DegenerateSpectrum { threshold: xi_floor });
    }
    let ratio = Spectrum { grid: n_star.grid, values };
    Ok(inverse_fourier_truncated(&ratio, h4, out)?.values)
}

/// Floored quotient `f / max(S, varpi)`.
#[derive(Debug, Clone)]
pub struct Quotient {
    pub rate: GriddedFunction,
    /// First abscissa where the survival estimate drops below the floor.
    pub floor_from: Option<f64>,
}

pub fn division_rate_quotient(
    f: &GriddedFunction,
    s: &GriddedFunction,
    varpi: f64,
) -> Result<Quotient> {
    if !(varpi > 0.0) {
        return Err(Error::Domain { what: "survival floor", value: varpi });
    }
    if !f.grid().same_as(s.grid()) {
        return Err(Error::Shape("density and survival on different grids".into()));
    }
    let floor_from = s.iter().find(|(_, v)| *v < varpi).map(|(a, _)| a);
    let values = f.values().iter().zip(s.values()).map(|(f, s)| f / s.max(varpi)).collect();
    Ok(Quotient { rate: GriddedFunction::new(*f.grid(), values)?, floor_from })
}

/// Clamp negative values to zero and rescale to unit trapezoidal mass.
pub fn positivity_projection(f: &GriddedFunction) -> Result<GriddedFunction> {
    let clamped = f.map(|_, v| v.max(0.0));
    let mass = clamped.integral();
    if !(mass > 0.0) {
        return Err(Error::Projection);
    }
    Ok(clamped.scaled(1.0 / mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DivisionRate;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gaussian(mu: f64, sigma: f64) -> GriddedFunction {
        let grid = Grid1D::new(0.0, 10.0, 0.01).unwrap();
        GriddedFunction::from_fn(grid, |x| {
            (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp()
                / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        })
    }

    fn gaussian_spectrum(mu: f64, sigma: f64, grid: Grid1D) -> Spectrum {
        Spectrum::from_fn(grid, |xi| {
            Complex64::from_polar((-sigma * sigma * xi * xi / 2.0).exp(), mu * xi)
        })
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let f = gaussian(5.0, 0.5);
        let s = fourier_quadrature(&f, &default_frequency_grid());
        let exact = gaussian_spectrum(5.0, 0.5, default_frequency_grid());
        for ((xi, v), e) in s.iter().zip(exact.values()) {
            if xi.abs() <= 10.0 {
                assert!((v - e).norm() < 1e-6, "xi {xi}: {v} vs {e}");
            }
        }
        assert_relative_eq!(s.eval(0.0).re, 1.0, epsilon = 1e-9);
        assert!(s.conjugate_asymmetry() < 1e-12);
    }

    #[test]
    fn recurrence_matches_direct_evaluation() {
        let grid = default_frequency_grid();
        let sample = SizeSample::new(vec![0.3, 1.7, 2.9, 5.5]).unwrap();
        let s = empirical_n_star(&sample, &GrowthLaw::linear(1.3).unwrap(), 1.3, &grid);
        for (xi, v) in s.iter() {
            let direct: Complex64 = sample
                .values()
                .iter()
                .map(|x| Complex64::from_polar(1.3 * x * x / 4.0, x * xi))
                .sum();
            assert!((v - direct).norm() < 1e-12, "xi {xi}");
        }
    }

    #[test]
    fn empirical_n_star_trivial_values() {
        let grid = default_frequency_grid();
        let one = SizeSample::new(vec![2.0]).unwrap();
        let s = empirical_n_star(&one, &GrowthLaw::linear(1.0).unwrap(), 1.0, &grid);
        for (xi, v) in s.iter() {
            assert!((v - Complex64::from_polar(4.0, 2.0 * xi)).norm() < 1e-12);
        }
        let sample = SizeSample::new(vec![1.0, 2.0, 4.0]).unwrap();
        let s = empirical_n_star(&sample, &GrowthLaw::linear(2.0).unwrap(), 2.0, &grid);
        assert_relative_eq!(s.eval(0.0).re, 2.0 * 21.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn f_star_is_exactly_conjugate_symmetric_where_g_is_tiny() {
        let grid = default_frequency_grid();
        let g_star = gaussian_spectrum(2.0, 0.4, grid);
        let n_star = gaussian_spectrum(2.3, 0.1, grid);
        let f = f_star_estimate(&n_star, &g_star, 0.0).unwrap();
        assert!(f.spectrum.values().iter().any(|v| v.norm() > 1e6));
        assert_eq!(f.spectrum.conjugate_asymmetry(), 0.0);
    }

    #[test]
    fn f_star_identity_and_origin() {
        let grid = default_frequency_grid();
        let s_star = gaussian_spectrum(1.0, 0.3, grid);
        let g_star = gaussian_spectrum(2.0, 0.4, grid);
        let n_values = s_star.values().iter().zip(g_star.values()).map(|(s, g)| s * g).collect();
        let n_star = Spectrum::new(grid, n_values).unwrap();
        let f = f_star_estimate(&n_star, &g_star, 0.0).unwrap();
        assert_eq!(f.spectrum.eval(0.0), Complex64::new(1.0, 0.0));
        for ((xi, v), s) in f.spectrum.iter().zip(s_star.values()) {
            if g_star.eval(xi).norm() > 0.0 {
                let expect = Complex64::new(1.0, 0.0) + Complex64::new(0.0, xi) * s;
                assert!((v - expect).norm() < 1e-9 * (1.0 + expect.norm()), "xi {xi}");
            }
        }
        let zero = Spectrum::zeros(grid);
        assert!(matches!(
            f_star_estimate(&n_star, &zero, 0.0),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn inverse_round_trip_of_a_gaussian() {
        let out = Grid1D::new(0.0, 5.0, 0.01).unwrap();
        let spec = gaussian_spectrum(2.5, 0.5, default_frequency_grid());
        let inv = inverse_fourier_truncated(&spec, 1.0 / 20.0, &out).unwrap();
        let truth = GriddedFunction::from_fn(out, |a| {
            (-(a - 2.5f64).powi(2) / 0.5).exp() / (0.5 * (2.0 * std::f64::consts::PI).sqrt())
        });
        let sup = inv
            .values
            .values()
            .iter()
            .zip(truth.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(sup < 1e-3, "sup error {sup}");
        assert!(inv.imaginary_residue < 1e-9);
    }

    #[test]
    fn inverse_rejects_cutoff_beyond_grid() {
        let out = Grid1D::new(0.0, 5.0, 0.01).unwrap();
        let spec = Spectrum::zeros(default_frequency_grid());
        assert!(matches!(
            inverse_fourier_truncated(&spec, 0.01, &out),
            Err(Error::Bandwidth { .. })
        ));
        let zero = inverse_fourier_truncated(&spec, 0.25, &out).unwrap();
        assert!(zero.values.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn off_grid_cutoff_is_integrated_to_the_edge() {
        // A constant spectrum integrates to 2c / 2 pi at a = 0.
        let out = Grid1D::new(0.0, 1.0, 0.5).unwrap();
        let spec = Spectrum::from_fn(default_frequency_grid(), |_| Complex64::new(1.0, 0.0));
        let c = 4.3217;
        let inv = inverse_fourier_truncated(&spec, 1.0 / c, &out).unwrap();
        assert_relative_eq!(
            inv.values.values()[0],
            c / std::f64::consts::PI,
            epsilon = 1e-12
        );
    }

    #[test]
    fn exact_density_round_trip_at_the_reference_bandwidth() {
        // Truncation alone costs about 1% at h = 1/4.75 on [0, 5].
        let rate = DivisionRate::power_law(2.0).unwrap();
        let fine = Grid1D::new(0.0, 6.0, 0.001).unwrap();
        let f = rate.tabulate_density(fine);
        let spec = fourier_quadrature(&f, &default_frequency_grid());
        let out = crate::model::default_increment_grid();
        let inv = inverse_fourier_truncated(&spec, 1.0 / 4.75, &out).unwrap();
        let truth = rate.tabulate_density(out);
        let err = crate::model::relative_l2_error(&inv.values, &truth).unwrap();
        assert!(err > 0.005 && err < 0.03, "err {err}");
    }

    #[test]
    fn survival_of_the_exact_density() {
        let rate = DivisionRate::power_law(2.0).unwrap();
        let grid = Grid1D::new(0.0, 5.0, 0.001).unwrap();
        let s = survival_from_density(&rate.tabulate_density(grid));
        assert_relative_eq!(s.values()[0], 1.0, epsilon = 1e-6);
        assert_eq!(*s.values().last().unwrap(), 0.0);
    }

    #[test]
    fn spectral_survival_with_exact_inputs() {
        let rate = DivisionRate::power_law(2.0).unwrap();
        let fine = Grid1D::new(0.0, 6.0, 0.001).unwrap();
        let grid = default_frequency_grid();
        let s_star = fourier_quadrature(&rate.tabulate_survival(fine), &grid);
        let g_star = gaussian_spectrum(2.0, 0.3, grid);
        let n_values = s_star.values().iter().zip(g_star.values()).map(|(s, g)| s * g).collect();
        let n_star = Spectrum::new(grid, n_values).unwrap();
        let out = Grid1D::new(0.0, 3.0, 0.01).unwrap();
        let s = survival_spectral(&n_star, &g_star, 1.0 / 40.0, 0.0, &out).unwrap();
        let truth = rate.tabulate_survival(out);
        // S jumps at 0 (extended by zero), so the error is a Gibbs layer there.
        let inner = Grid1D::new(0.5, 3.0, 0.01).unwrap();
        let err = crate::model::relative_l2_error(&s.resample(inner), &truth.resample(inner)).unwrap();
        assert!(err < 0.02, "relative error on [0.5, 3]: {err}");
        let zero = survival_spectral(&Spectrum::zeros(grid), &g_star, 0.25, 0.0, &out).unwrap();
        assert!(zero.values().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn quotient_trivial_cases() {
        let rate = DivisionRate::power_law(2.0).unwrap();
        let grid = Grid1D::new(0.0, 2.0, 0.01).unwrap();
        let q = division_rate_quotient(
            &rate.tabulate_density(grid),
            &rate.tabulate_survival(grid),
            1e-9,
        )
        .unwrap();
        assert_relative_eq!(q.rate.eval_or_zero(1.0), 1.0, epsilon = 1e-12);
        assert!(q.floor_from.is_none());

        let f = GriddedFunction::from_fn(grid, |_| 0.3);
        let tiny = GriddedFunction::from_fn(grid, |_| 1e-12);
        let q = division_rate_quotient(&f, &tiny, 0.01).unwrap();
        assert!(q.rate.values().iter().all(|v| (*v - 30.0).abs() < 1e-9));
        assert_eq!(q.floor_from, Some(0.0));
    }

    #[test]
    fn projection_contract() {
        let rate = DivisionRate::power_law(2.0).unwrap();
        let grid = Grid1D::new(0.0, 5.0, 0.001).unwrap();
        let f = rate.tabulate_density(grid).scaled(1.0 / rate.tabulate_density(grid).integral());
        let p = positivity_projection(&f).unwrap();
        for (a, b) in p.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let lobe = f.map(|a, v| v - 0.05 * (-(a - 3.0f64).powi(2)).exp());
        let p = positivity_projection(&lobe).unwrap();
        assert!(p.values().iter().all(|v| *v >= 0.0));
        assert_relative_eq!(p.integral(), 1.0, epsilon = 1e-12);
        let neg = GriddedFunction::from_fn(grid, |_| -1.0);
        assert!(matches!(positivity_projection(&neg), Err(Error::Projection)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn empirical_spectra_are_conjugate_symmetric(
            xs in prop::collection::vec(0.01f64..6.0, 1..40),
            tau in 0.2f64..3.0,
        ) {
            let grid = Grid1D::symmetric(10.0, 0.05).unwrap();
            let s = empirical_n_star(&SizeSample::new(xs).unwrap(), &GrowthLaw::linear(tau).unwrap(), tau, &grid);
            prop_assert!(s.conjugate_asymmetry() <= 1e-12);
        }

        #[test]
        fn f_star_is_one_at_the_origin(
            xs in prop::collection::vec(0.01f64..6.0, 1..20),
            ys in prop::collection::vec(0.01f64..6.0, 1..20),
        ) {
            let grid = Grid1D::symmetric(10.0, 0.05).unwrap();
            let lin = GrowthLaw::linear(1.0).unwrap();
            let n = empirical_n_star(&SizeSample::new(xs).unwrap(), &lin, 1.0, &grid);
            let g = empirical_n_star(&SizeSample::new(ys).unwrap(), &lin, 1.0, &grid);
            let f = f_star_estimate(&n, &g, 0.0).unwrap();
            prop_assert_eq!(f.spectrum.eval(0.0), Complex64::new(1.0, 0.0));
        }

        #[test]
        fn truncated_inverse_is_linear_and_bounded(
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            mu in 0.5f64..4.0,
            inv_h in 2.0f64..10.0,
        ) {
            let grid = Grid1D::symmetric(10.0, 0.05).unwrap();
            let out = Grid1D::new(-20.0, 20.0, 0.02).unwrap();
            let s1 = gaussian_spectrum(mu, 0.4, grid);
            let s2 = gaussian_spectrum(1.0, 0.7, grid);
            let comb = Spectrum::new(
                grid,
                s1.values().iter().zip(s2.values()).map(|(x, y)| x * a + y * b).collect(),
            ).unwrap();
            let h = 1.0 / inv_h;
            let i1 = inverse_fourier_truncated(&s1, h, &out).unwrap().values;
            let i2 = inverse_fourier_truncated(&s2, h, &out).unwrap().values;
            let ic = inverse_fourier_truncated(&comb, h, &out).unwrap().values;
            for ((c, x), y) in ic.values().iter().zip(i1.values()).zip(i2.values()) {
                prop_assert!((c - (a * x + b * y)).abs() <= 1e-10);
            }
            // Parseval: the real part carries at most the spectral energy in the band.
            let band: f64 = s1
                .iter()
                .filter(|(xi, _)| xi.abs() <= inv_h)
                .map(|(_, v)| v.norm_sqr())
                .sum::<f64>() * grid.step() / (2.0 * std::f64::consts::PI);
            let energy = i1.l2_norm().powi(2);
            prop_assert!(energy <= band * (1.0 + 1e-2) + 1e-9, "{} > {}", energy, band);
        }
    }
}
