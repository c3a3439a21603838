//! Repeated sampling of the benchmark population.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::sample_sizes;
use crate::grid::{Grid1D, GriddedFunction};

use super::protocol::{run_protocol, Bandwidth, Protocol, ProtocolInputs, ReconstructionResult};
use super::{ErrorMode, PipelineSettings, Quantity, Truth};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedScheme {
    /// A distinct seed per (protocol, n, repeat), derived from the master seed.
    PerRepeat,
    /// Every repeat draws with the same seed.
    Constant(u64),
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of repeat `r` at sample size `n`.
pub fn repeat_seed(master: u64, protocol: u8, n: usize, r: usize) -> u64 {
    [protocol as u64, n as u64, r as u64]
        .into_iter()
        .fold(splitmix64(master), |acc, v| splitmix64(acc ^ v))
}

/// Pointwise mean and 95% envelope over repeats.
#[derive(Debug, Clone)]
pub struct Band {
    pub grid: Grid1D,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Band {
    fn from_curves(curves: &[GriddedFunction]) -> Option<Self> {
        let grid = *curves.first()?.grid();
        let k = curves.len() as f64;
        let mut mean = Vec::with_capacity(grid.len());
        let mut lo = Vec::with_capacity(grid.len());
        let mut hi = Vec::with_capacity(grid.len());
        let mut column = Vec::with_capacity(curves.len());
        for j in 0..grid.len() {
            column.clear();
            column.extend(curves.iter().map(|c| c.values()[j]));
            mean.push(column.iter().sum::<f64>() / k);
            column.sort_by(f64::total_cmp);
            lo.push(quantile(&column, 0.025));
            hi.push(quantile(&column, 0.975));
        }
        Some(Self { grid, mean, lo, hi })
    }

    /// Fraction of `curve` nodes inside the envelope, after resampling onto
    /// the band grid.
    pub fn coverage(&self, curve: &GriddedFunction) -> f64 {
        let c = curve.resample(self.grid);
        let inside = c
            .values()
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .filter(|(v, (l, h))| *l <= *v && *v <= *h)
            .count();
        inside as f64 / self.grid.len() as f64
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let h = (len - 1) as f64 * p;
            let i = h.floor() as usize;
            let j = (i + 1).min(len - 1);
            sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyPoint {
    pub n: usize,
    pub errors: BTreeMap<Quantity, Vec<f64>>,
    pub failures: Vec<String>,
    pub bands: BTreeMap<Quantity, Band>,
    pub h3s: Vec<f64>,
}

impl StudyPoint {
    pub fn mean_error(&self, q: Quantity) -> Option<f64> {
        let e = self.errors.get(&q).filter(|e| !e.is_empty())?;
        Some(e.iter().sum::<f64>() / e.len() as f64)
    }

    /// 2.5% and 97.5% quantiles of the repeat errors.
    pub fn error_interval(&self, q: Quantity) -> Option<(f64, f64)> {
        let mut e = self.errors.get(&q).filter(|e| !e.is_empty())?.clone();
        e.sort_by(f64::total_cmp);
        Some((quantile(&e, 0.025), quantile(&e, 0.975)))
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloStudy {
    pub protocol: u8,
    pub m: usize,
    pub master_seed: u64,
    pub points: Vec<StudyPoint>,
}

impl MonteCarloStudy {
    pub fn mean_error(&self, n: usize, q: Quantity) -> Option<f64> {
        self.points.iter().find(|p| p.n == n)?.mean_error(q)
    }
}

fn curves_of(res: &ReconstructionResult) -> Vec<(Quantity, GriddedFunction)> {
    let i = &res.intermediates;
    let r = &res.reconstruction;
    let mut out = Vec::new();
    if let Some(u) = &i.u_x {
        out.push((Quantity::U, u.clone()));
    }
    if let Some(d) = &i.d {
        out.push((Quantity::D, d.clone()));
    }
    if let Some(l) = &i.l_b {
        out.push((Quantity::L, l.clone()));
    }
    out.push((Quantity::G, i.g_b.clone()));
    out.push((Quantity::F, r.f.clone()));
    out.push((Quantity::S, r.s.clone()));
    out.push((Quantity::B, r.b.clone()));
    out
}

/// `m` independent samples of each size in `ns` drawn from the exact size
/// marginal, each reconstructed with `protocol`. Repeats run in parallel;
/// results are collected in repeat order, so the study does not depend on
/// the thread count.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo(
    protocol: &dyn Protocol,
    truth: &Truth,
    ns: &[usize],
    m: usize,
    master_seed: u64,
    settings: &PipelineSettings,
    bandwidth: Bandwidth,
    seeds: SeedScheme,
) -> Result<MonteCarloStudy> {
    if m < 2 {
        return Err(Error::Domain { what: "repeat count M", value: m as f64 });
    }
    if !protocol.uses_sample() {
        return Err(Error::Domain { what: "Monte Carlo protocol id", value: protocol.id() as f64 });
    }
    if let Some(n) = ns.iter().find(|n| **n < 2) {
        return Err(Error::Domain { what: "sample size n", value: *n as f64 });
    }
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let runs: Vec<Result<ReconstructionResult>> = (0..m)
            .into_par_iter()
            .map(|r| {
                let seed = match seeds {
                    SeedScheme::PerRepeat => repeat_seed(master_seed, protocol.id(), n, r),
                    SeedScheme::Constant(s) => s,
                };
                let sample = sample_sizes(&truth.curves.u_x, n, seed)?;
                let inputs = ProtocolInputs::from_truth(truth, Some(&sample));
                run_protocol(protocol, &inputs, settings, bandwidth, Some(truth), ErrorMode::Study { n })
            })
            .collect();
        let mut errors: BTreeMap<Quantity, Vec<f64>> = BTreeMap::new();
        let mut curves: BTreeMap<Quantity, Vec<GriddedFunction>> = BTreeMap::new();
        let mut failures = Vec::new();
        let mut h3s = Vec::new();
        for (r, run) in runs.into_iter().enumerate() {
            match run {
                Ok(res) => {
                    for (q, e) in &res.errors {
                        errors.entry(*q).or_default().push(*e);
                    }
                    for (q, c) in curves_of(&res) {
                        curves.entry(q).or_default().push(c);
                    }
                    h3s.push(res.reconstruction.h3);
                }
                Err(e) => {
                    log::warn!("n={n} repeat {r}: {e}");
                    failures.push(format!("repeat {r}: {e}"));
                }
            }
        }
        let bands = curves
            .iter()
            .filter_map(|(q, c)| Band::from_curves(c).map(|b| (*q, b)))
            .collect();
        log::info!("n={n}: {} of {m} repeats succeeded", m - failures.len());
        points.push(StudyPoint { n, errors, failures, bands, h3s });
    }
    Ok(MonteCarloStudy { protocol: protocol.id(), m, master_seed, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v: Vec<f64> = (0..=40).map(f64::from).collect();
        assert_eq!(quantile(&v, 0.025), 1.0);
        assert_eq!(quantile(&v, 0.975), 39.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
    }

    #[test]
    fn seeds_differ_across_all_coordinates() {
        let base = repeat_seed(7, 4, 500, 0);
        assert_eq!(base, repeat_seed(7, 4, 500, 0));
        assert_ne!(base, repeat_seed(8, 4, 500, 0));
        assert_ne!(base, repeat_seed(7, 3, 500, 0));
        assert_ne!(base, repeat_seed(7, 4, 501, 0));
        assert_ne!(base, repeat_seed(7, 4, 500, 1));
    }

    #[test]
    fn band_of_identical_curves_is_degenerate() {
        let grid = Grid1D::new(0.0, 1.0, 0.25).unwrap();
        let c = GriddedFunction::from_fn(grid, |x| x * x);
        let band = Band::from_curves(&[c.clone(), c.clone(), c.clone()]).unwrap();
        assert_eq!(band.lo, band.hi);
        assert_eq!(band.coverage(&c), 1.0);
    }
}
