//! Bandwidth chosen against the known density.

use crate::error::{Error, Result};
use crate::grid::GriddedFunction;
use crate::model::relative_l2_error;

/// Error of the estimate at every candidate cutoff `1/h`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCurve {
    pub inv_h: Vec<f64>,
    pub errors: Vec<f64>,
    pub best: usize,
}

/// Minimize the relative error over the candidate cutoffs `1/h`; ties go to
/// the larger `h`. The estimate is compared on the truth's grid.
pub fn oracle_bandwidth(
    inv_h: &[f64],
    truth: Option<&GriddedFunction>,
    mut estimate: impl FnMut(f64) -> Result<GriddedFunction>,
) -> Result<(f64, OracleCurve)> {
    let truth = truth.ok_or(Error::OracleUnavailable)?;
    if inv_h.is_empty() {
        return Err(Error::Config("empty oracle bandwidth grid".into()));
    }
    let mut cutoffs = inv_h.to_vec();
    cutoffs.sort_by(f64::total_cmp);
    let mut errors = Vec::with_capacity(cutoffs.len());
    let mut best = 0;
    for (k, c) in cutoffs.iter().enumerate() {
        if !(*c > 0.0) {
            return Err(Error::Domain { what: "oracle cutoff", value: *c });
        }
        let est = estimate(1.0 / c)?;
        let e = relative_l2_error(&est.resample(*truth.grid()), truth)?;
        if e < errors.get(best).copied().unwrap_or(f64::INFINITY) {
            best = k;
        }
        errors.push(e);
    }
    Ok((1.0 / cutoffs[best], OracleCurve { inv_h: cutoffs, errors, best }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;

    #[test]
    fn picks_the_minimum_and_breaks_ties_towards_smoothing() {
        let grid = Grid1D::new(0.0, 1.0, 0.1).unwrap();
        let truth = GriddedFunction::from_fn(grid, |_| 1.0);
        // Error |c - 5| floored at 1 for c in [4, 6]: a plateau.
        let (h, curve) = oracle_bandwidth(&[7.0, 4.0, 5.0, 6.0, 3.0], Some(&truth), |h| {
            let c: f64 = 1.0 / h;
            let off = (c - 5.0).abs().max(1.0);
            Ok(GriddedFunction::from_fn(grid, |_| 1.0 + off))
        })
        .unwrap();
        assert_eq!(h, 1.0 / 4.0);
        assert_eq!(curve.inv_h, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(curve.best, 1);
    }

    #[test]
    fn unavailable_without_truth() {
        let r = oracle_bandwidth(&[2.0], None, |_| unreachable!());
        assert!(matches!(r, Err(Error::OracleUnavailable)));
    }
}
