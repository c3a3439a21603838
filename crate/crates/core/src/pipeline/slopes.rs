//! Empirical convergence rates from a Monte Carlo study.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::montecarlo::MonteCarloStudy;
use super::Quantity;

/// A point counts as saturated once the error drops by less than this fraction.
pub const SATURATION: f64 = 0.02;
pub const MIN_POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub used: Vec<usize>,
    pub dropped: Vec<usize>,
}

/// Least-squares slope of `log(error)` against `log(n)`, dropping every point
/// from the first one where the error stops decreasing by at least 2%.
pub fn fit_slope(ns: &[usize], errors: &[f64]) -> Result<SlopeFit> {
    if ns.len() != errors.len() {
        return Err(Error::Shape(format!("{} sizes for {} errors", ns.len(), errors.len())));
    }
    let mut pts: Vec<(usize, f64)> = ns.iter().copied().zip(errors.iter().copied()).collect();
    pts.sort_by_key(|p| p.0);
    if let Some(bad) = pts.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite())) {
        return Err(Error::Domain { what: "mean error", value: bad.1 });
    }
    let mut keep = pts.len();
    for i in 1..pts.len() {
        if (pts[i - 1].1 - pts[i].1) / pts[i - 1].1 < SATURATION {
            keep = i;
            break;
        }
    }
    if keep < MIN_POINTS {
        return Err(Error::TooFewPoints { needed: MIN_POINTS, found: keep });
    }
    let (used, dropped) = pts.split_at(keep);
    let xs: Vec<f64> = used.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        used: used.iter().map(|p| p.0).collect(),
        dropped: dropped.iter().map(|p| p.0).collect(),
    })
}

#[derive(Debug)]
pub struct SlopeTable {
    pub fits: BTreeMap<Quantity, Result<SlopeFit>>,
}

impl SlopeTable {
    pub fn slope(&self, q: Quantity) -> Option<f64> {
        self.fits.get(&q).and_then(|r| r.as_ref().ok()).map(|f| f.slope)
    }

    /// Plain-text table, one quantity per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("quantity\tslope\tused_n\tdropped_n\n");
        for (q, fit) in &self.fits {
            match fit {
                Ok(f) => {
                    let _ = writeln!(out, "{}\t{:.4}\t{:?}\t{:?}", q.label(), f.slope, f.used, f.dropped);
                }
                Err(e) => {
                    let _ = writeln!(out, "{}\tNA\t{e}", q.label());
                }
            }
        }
        out
    }
}

/// Slopes for every quantity with a mean error at each `n` of the study.
pub fn convergence_slopes(study: &MonteCarloStudy) -> SlopeTable {
    let mut means: BTreeMap<Quantity, Vec<(usize, f64)>> = BTreeMap::new();
    for q in Quantity::ALL {
        for p in &study.points {
            if let Some(e) = p.mean_error(q) {
                means.entry(q).or_default().push((p.n, e));
            }
        }
    }
    slopes_from_means(&means)
}

/// Slopes from `(n, mean error)` pairs per quantity.
pub fn slopes_from_means(means: &BTreeMap<Quantity, Vec<(usize, f64)>>) -> SlopeTable {
    let fits = means
        .iter()
        .filter(|(_, pts)| !pts.is_empty())
        .map(|(q, pts)| {
            let (ns, es): (Vec<usize>, Vec<f64>) = pts.iter().copied().unzip();
            (*q, fit_slope(&ns, &es))
        })
        .collect();
    SlopeTable { fits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let ns = [500, 2000, 8000, 32000];
        let es: Vec<f64> = ns.iter().map(|n| 3.0 * (*n as f64).powf(-0.5)).collect();
        let fit = fit_slope(&ns, &es).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-10);
        assert!(fit.dropped.is_empty());
    }

    #[test]
    fn saturated_tail_is_dropped() {
        let ns = [500, 1000, 2000, 4000, 8000];
        let es = [0.4, 0.2, 0.1, 0.099, 0.5];
        let fit = fit_slope(&ns, &es).unwrap();
        assert_eq!(fit.used, vec![500, 1000, 2000]);
        assert_eq!(fit.dropped, vec![4000, 8000]);
        assert!((fit.slope + 1.0).abs() < 1e-10);
    }

    #[test]
    fn too_few_points() {
        let r = fit_slope(&[500, 2000, 8000], &[0.1, 0.1, 0.05]);
        assert!(matches!(r, Err(Error::TooFewPoints { needed: 3, found: 1 })));
    }

    proptest! {
        #[test]
        fn recovers_any_decreasing_power_law(p in 0.05f64..1.5, c in 0.01f64..10.0) {
            let ns = [100, 400, 1600, 6400];
            let es: Vec<f64> = ns.iter().map(|n| c * (*n as f64).powf(-p)).collect();
            let fit = fit_slope(&ns, &es).unwrap();
            prop_assert!((fit.slope + p).abs() < 1e-9);
        }
    }
}
