//! Increment density estimated directly from dividing cells.

use crate::error::{Error, Result};
use crate::fourier::{division_rate_quotient, survival_from_density};
use crate::grid::{Grid1D, GriddedFunction};
use crate::sample::DividingSample;

use super::kernel::{Kernel, GAUSSIAN};

#[derive(Debug, Clone)]
pub struct DirectEstimate {
    pub f: GriddedFunction,
    pub s: GriddedFunction,
    pub b: GriddedFunction,
    /// Integral of the size-weighted kernel sum before renormalization.
    pub raw_mass: f64,
    pub floor_from: Option<f64>,
}

/// `(1/n) sum w_j K_h(y - p_j)` for `(p_j, w_j)` pairs, Gaussian kernel.
pub fn weighted_kde(points: &[(f64, f64)], h: f64, grid: &Grid1D) -> GriddedFunction {
    let n = points.len().max(1) as f64;
    let reach = GAUSSIAN.radius() * h;
    GriddedFunction::from_fn(*grid, |y| {
        points
            .iter()
            .filter(|(p, _)| (y - p).abs() <= reach)
            .map(|(p, w)| GAUSSIAN.value((y - p) / h) * w)
            .sum::<f64>()
            / (n * h)
    })
}

/// `f(a) ~ (1/n) sum K_h(a - A_j) X_j`, renormalized to unit mass, then the
/// survival integral and the floored quotient.
pub fn direct_dividing_estimator(
    div: &DividingSample,
    h_d: f64,
    grid: &Grid1D,
    varpi: f64,
) -> Result<DirectEstimate> {
    if !(h_d > 0.0) {
        return Err(Error::Domain { what: "direct-estimator bandwidth", value: h_d });
    }
    let points: Vec<(f64, f64)> = div.cells().iter().map(|c| (c.increment, c.size)).collect();
    let raw = weighted_kde(&points, h_d, grid);
    let raw_mass = raw.integral();
    if !(raw_mass > 0.0) {
        return Err(Error::Projection);
    }
    let f = raw.scaled(1.0 / raw_mass);
    let s = survival_from_density(&f);
    let q = division_rate_quotient(&f, &s, varpi)?;
    Ok(DirectEstimate { f, s, b: q.rate, raw_mass, floor_from: q.floor_from })
}
