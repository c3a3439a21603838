//! Kernel density estimates of the size marginal and of `(g U_x)'`.

use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GriddedFunction};
use crate::model::GrowthLaw;
use crate::sample::SizeSample;

/// A symmetric smoothing kernel of unit mass.
pub trait Kernel: Debug + Send + Sync {
    fn name(&self) -> &'static str;
    fn value(&self, u: f64) -> f64;
    fn derivative(&self, u: f64) -> f64;
    /// Contributions beyond this many bandwidths are dropped.
    fn radius(&self) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Gaussian;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl Kernel for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn value(&self, u: f64) -> f64 {
        INV_SQRT_2PI * (-0.5 * u * u).exp()
    }

    fn derivative(&self, u: f64) -> f64 {
        -u * self.value(u)
    }

    fn radius(&self) -> f64 {
        9.0
    }
}

pub static GAUSSIAN: Gaussian = Gaussian;

#[derive(Debug, Clone, Copy)]
pub struct KernelSpec {
    pub kernel: &'static dyn Kernel,
    pub h: f64,
}

impl KernelSpec {
    pub fn gaussian(h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Domain { what: "kernel bandwidth", value: h });
        }
        Ok(Self { kernel: &GAUSSIAN, h })
    }
}

/// Silverman's rule of thumb `1.06 sigma n^{-1/5}`.
pub fn silverman_bandwidth(sample: &SizeSample) -> Result<f64> {
    let sd = sample.std_dev();
    if !(sd > 0.0) {
        return Err(Error::Sampling("sample has no spread; bandwidth undefined".into()));
    }
    Ok(1.06 * sd * (sample.len() as f64).powf(-0.2))
}

// sum_j w(X_j) k((y - X_j) / h) over the sorted sample, restricted to the
// kernel window around each node.
fn kernel_sum(
    sample: &SizeSample,
    spec: &KernelSpec,
    grid: &Grid1D,
    weight: impl Fn(f64) -> f64,
    k: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let xs = sample.values();
    let reach = spec.kernel.radius() * spec.h;
    let weights: Vec<f64> = xs.iter().map(|x| weight(*x)).collect();
    grid.nodes()
        .map(|y| {
            let lo = xs.partition_point(|x| *x < y - reach);
            let hi = xs.partition_point(|x| *x <= y + reach);
            (lo..hi).map(|j| weights[j] * k((y - xs[j]) / spec.h)).sum()
        })
        .collect()
}

/// `(1/n) sum K_h(y - X_j)` on the grid nodes.
pub fn kde(sample: &SizeSample, spec: &KernelSpec, grid: &Grid1D) -> GriddedFunction {
    let scale = 1.0 / (sample.len() as f64 * spec.h);
    let v = kernel_sum(sample, spec, grid, |_| 1.0, |u| spec.kernel.value(u));
    GriddedFunction::new(*grid, v.into_iter().map(|s| s * scale).collect()).expect("grid length")
}

/// `(1/n) sum g(X_j) K'_h(y - X_j)`, an estimate of `(g U_x)'`.
pub fn kde_derivative_weighted(
    sample: &SizeSample,
    growth: &GrowthLaw,
    spec: &KernelSpec,
    grid: &Grid1D,
) -> GriddedFunction {
    let scale = 1.0 / (sample.len() as f64 * spec.h * spec.h);
    let v = kernel_sum(sample, spec, grid, |x| growth.speed(x), |u| spec.kernel.derivative(u));
    GriddedFunction::new(*grid, v.into_iter().map(|s| s * scale).collect()).expect("grid length")
}

/// `(1/n) sum K'_h(y - X_j)`, an estimate of `U_x'`.
pub fn kde_derivative(sample: &SizeSample, spec: &KernelSpec, grid: &Grid1D) -> GriddedFunction {
    let scale = 1.0 / (sample.len() as f64 * spec.h * spec.h);
    let v = kernel_sum(sample, spec, grid, |_| 1.0, |u| spec.kernel.derivative(u));
    GriddedFunction::new(*grid, v.into_iter().map(|s| s * scale).collect()).expect("grid length")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn single_point_gives_the_kernel() {
        let grid = Grid1D::new(0.0, 4.0, 0.01).unwrap();
        let spec = KernelSpec::gaussian(0.3).unwrap();
        let est = kde(&SizeSample::new(vec![2.0]).unwrap(), &spec, &grid);
        for (y, v) in est.iter() {
            assert_relative_eq!(v, GAUSSIAN.value((y - 2.0) / 0.3) / 0.3, epsilon = 1e-12);
        }
        let unit = GrowthLaw::tabulated(GriddedFunction::from_fn(grid, |_| 1.0)).unwrap();
        let d = kde_derivative_weighted(&SizeSample::new(vec![2.0]).unwrap(), &unit, &spec, &grid);
        for (y, v) in d.iter() {
            let expect = GAUSSIAN.derivative((y - 2.0) / 0.3) / 0.09;
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_is_antisymmetric_for_a_symmetric_sample() {
        let grid = Grid1D::new(0.0, 4.0, 0.01).unwrap();
        let spec = KernelSpec::gaussian(0.2).unwrap();
        let s = SizeSample::new(vec![1.5, 1.8, 2.0, 2.2, 2.5]).unwrap();
        let d = kde_derivative(&s, &spec, &grid);
        for k in 0..=200 {
            let (l, r) = (d.values()[200 - k], d.values()[200 + k]);
            assert!((l + r).abs() < 1e-12, "k {k}: {l} {r}");
        }
    }

    #[test]
    fn silverman_needs_spread() {
        let s = SizeSample::new(vec![1.0, 1.0]).unwrap();
        assert!(silverman_bandwidth(&s).is_err());
        let s = SizeSample::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(silverman_bandwidth(&s).unwrap(), 1.06 * 3f64.powf(-0.2), epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn estimate_has_unit_mass(
            xs in prop::collection::vec(2.0f64..6.0, 1..50),
            h in 0.05f64..0.5,
        ) {
            let grid = Grid1D::new(-2.0, 10.0, 0.005).unwrap();
            let est = kde(&SizeSample::new(xs).unwrap(), &KernelSpec::gaussian(h).unwrap(), &grid);
            prop_assert!((est.integral() - 1.0).abs() <= 1e-3);
        }
    }
}
