//! Inverse of the dilation operator `L -> 4 L(2x) - L(x)`.
//!
//! Two explicit series solve the equation:
//! `A(x) = sum_{k>=1} 4^{-k} D(x / 2^k)` (the square-integrable branch) and
//! `B(x) = -sum_{k>=0} 4^k D(2^k x)` (square-integrable against `x^4 dx`).
//! The estimate follows A up to the first crossing after its peak, then B.

use log::warn;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::{empirical_n_star, Spectrum};
use crate::grid::GriddedFunction;
use crate::model::GrowthLaw;
use crate::sample::SizeSample;

const SERIES_CUTOFF: f64 = 1e-14;
const RESIDUAL_TOL: f64 = 1e-8;
const SUPPORT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Series in `D(x / 2^k)`.
    Contracting,
    /// Series in `D(2^k x)`.
    Expanding,
}

#[derive(Debug, Clone)]
pub struct DilationSolution {
    /// Branch used on `x <= x_bar`.
    pub left: GriddedFunction,
    /// Branch used on `x > x_bar`.
    pub right: GriddedFunction,
    pub left_branch: Branch,
    pub x_bar: f64,
    pub x0_max: f64,
    pub concatenated: GriddedFunction,
    /// `|D(x_max)| / max|D|` when the data is not supported inside the grid.
    pub boundary_ratio: Option<f64>,
    /// Largest functional-equation residual of each branch, relative to `max|D|`.
    pub residuals: (f64, f64),
}

impl DilationSolution {
    pub fn contracting(&self) -> &GriddedFunction {
        match self.left_branch {
            Branch::Contracting => &self.left,
            Branch::Expanding => &self.right,
        }
    }

    pub fn expanding(&self) -> &GriddedFunction {
        match self.left_branch {
            Branch::Contracting => &self.right,
            Branch::Expanding => &self.left,
        }
    }
}

// D at any point: linear interpolation, zero beyond the grid, and below the
// first node the chord from the origin (where D is taken as 0).
fn eval_d(d: &GriddedFunction, x: f64) -> f64 {
    let g = d.grid();
    if x >= g.min() {
        return d.eval_or_zero(x);
    }
    if x <= 0.0 || g.min() <= 0.0 {
        return 0.0;
    }
    d.values()[0] * x / g.min()
}

fn contracting_at(d: &GriddedFunction, terms: usize, x: f64) -> f64 {
    let mut s = 0.0;
    let mut w = 1.0;
    let mut y = x;
    for _ in 0..terms {
        w *= 0.25;
        y *= 0.5;
        s += w * eval_d(d, y);
    }
    s
}

fn expanding_at(d: &GriddedFunction, x: f64) -> f64 {
    if x <= 0.0 {
        return eval_d(d, 0.0) / 3.0;
    }
    let top = d.grid().max() * (1.0 + 1e-12);
    let mut s = 0.0;
    let mut w = 1.0;
    let mut y = x;
    while y <= top {
        s += w * eval_d(d, y);
        w *= 4.0;
        y *= 2.0;
    }
    -s
}

fn negative_fraction(values: &[f64]) -> f64 {
    let total: f64 = values.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return 0.0;
    }
    let neg: f64 = values.iter().filter(|v| **v < 0.0).map(|v| v * v).sum();
    (neg / total).sqrt()
}

/// Solve `4 L(2x) - L(x) = D(x)` on the grid of `d`.
pub fn invert_dilation(d: &GriddedFunction) -> Result<DilationSolution> {
    let grid = *d.grid();
    if grid.len() < 2 {
        return Err(Error::Shape("dilation data needs at least two nodes".into()));
    }
    let sup = d.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut terms = 0;
    while sup > 0.0 && 0.25f64.powi(terms as i32) * sup >= SERIES_CUTOFF {
        terms += 1;
    }

    let boundary = d.values()[grid.len() - 1].abs();
    let boundary_ratio = (sup > 0.0 && boundary > SUPPORT_TOL * sup).then(|| boundary / sup);
    if let Some(r) = boundary_ratio {
        warn!("dilation data is not supported inside the grid; |D| at the edge is {r:.2e} of its peak");
    }

    let a = GriddedFunction::from_fn(grid, |x| contracting_at(d, terms, x));
    let b = GriddedFunction::from_fn(grid, |x| expanding_at(d, x));

    let residual = |f: &dyn Fn(f64) -> f64| {
        let mut worst = 0.0f64;
        for (x, dv) in d.iter() {
            if 2.0 * x > grid.max() * (1.0 + 1e-12) {
                break;
            }
            worst = worst.max((4.0 * f(2.0 * x) - f(x) - dv).abs());
        }
        if sup > 0.0 {
            worst / sup
        } else {
            worst
        }
    };
    let res_a = residual(&|x| contracting_at(d, terms, x));
    let res_b = residual(&|x| expanding_at(d, x));
    if res_a > RESIDUAL_TOL && res_b > RESIDUAL_TOL {
        return Err(Error::Inversion(format!(
            "both series violate the equation (relative residuals {res_a:.2e}, {res_b:.2e})"
        )));
    }
    for (name, r) in [("contracting", res_a), ("expanding", res_b)] {
        if r > RESIDUAL_TOL {
            warn!("{name} dilation series has relative residual {r:.2e}");
        }
    }

    // The square-integrable branch is the one with the nonnegative bulk.
    let (left, right, left_branch) = if negative_fraction(b.values()) < negative_fraction(a.values())
    {
        (b, a, Branch::Expanding)
    } else {
        (a, b, Branch::Contracting)
    };

    let peak = left.argmax();
    let mut cross = peak;
    let mut best = f64::INFINITY;
    for j in peak..grid.len() {
        let gap = (right.values()[j] - left.values()[j]).abs();
        if gap < best {
            best = gap;
            cross = j;
        }
    }
    let values = (0..grid.len())
        .map(|j| if j <= cross { left.values()[j] } else { right.values()[j] })
        .collect();

    Ok(DilationSolution {
        x_bar: grid.node(cross),
        x0_max: grid.node(peak),
        concatenated: GriddedFunction::new(grid, values)?,
        left,
        right,
        left_branch,
        boundary_ratio,
        residuals: (res_a, res_b),
    })
}

/// `Gamma(xi) = (i tau xi / n) sum X^2 e^{i X xi}`.
pub fn gamma_transform(sample: &SizeSample, tau: f64, xi: &crate::grid::Grid1D) -> Result<Spectrum> {
    let growth = GrowthLaw::linear(tau)?;
    let n_star = empirical_n_star(sample, &growth, tau, xi);
    let values = n_star.iter().map(|(x, v)| Complex64::new(0.0, x) * v).collect();
    Spectrum::new(*xi, values)
}

/// Truncated series `-sum_{k=0}^{terms} Gamma(2^k xi)`; `Gamma` is read as
/// zero off its grid. Experimental.
pub fn solve_spectral_dilation(gamma: &Spectrum, terms: usize) -> Spectrum {
    Spectrum::from_fn(*gamma.grid(), |xi| {
        let mut s = Complex64::new(0.0, 0.0);
        let mut y = xi;
        for _ in 0..=terms {
            s -= gamma.eval(y);
            y *= 2.0;
        }
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;
    use proptest::prelude::*;

    fn bump(x: f64) -> f64 {
        // Smooth, supported in [0.5, 2].
        if x <= 0.5 || x >= 2.0 {
            return 0.0;
        }
        let t = (x - 0.5) / 1.5;
        (-1.0 / (t * (1.0 - t))).exp() * 50.0
    }

    fn manufactured(grid: Grid1D) -> GriddedFunction {
        GriddedFunction::from_fn(grid, |x| 4.0 * bump(2.0 * x) - bump(x))
    }

    fn l2_on(f: &GriddedFunction, g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (x, v) in f.iter() {
            if (lo..=hi).contains(&x) {
                num += (v - g(x)).powi(2);
                den += g(x).powi(2);
            }
        }
        (num / den).sqrt()
    }

    #[test]
    fn zero_data_gives_zero() {
        let grid = Grid1D::new(0.0, 6.0, 0.012).unwrap();
        let sol = invert_dilation(&GriddedFunction::zeros(grid)).unwrap();
        assert!(sol.concatenated.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bump_round_trip() {
        let grid = Grid1D::new(0.0, 6.0, 1e-4).unwrap();
        let sol = invert_dilation(&manufactured(grid)).unwrap();
        let err = l2_on(&sol.concatenated, bump, 0.5, 2.0);
        assert!(err <= 1e-6, "round-trip error {err}");
        assert!(sol.residuals.0 <= 1e-8 && sol.residuals.1 <= 1e-8, "{:?}", sol.residuals);
        assert!(sol.x_bar >= sol.x0_max);
        assert!(sol.boundary_ratio.is_none());
    }

    #[test]
    fn round_trip_on_a_cell_centred_grid() {
        let grid = Grid1D::cells(0.0, 6.0, 6.0 / 500.0).unwrap();
        let sol = invert_dilation(&manufactured(grid)).unwrap();
        let err = l2_on(&sol.concatenated, bump, 0.5, 2.0);
        assert!(err <= 1e-3, "round-trip error {err}");
        assert!(sol.residuals.0 <= 1e-8 && sol.residuals.1 <= 1e-8, "{:?}", sol.residuals);
    }

    #[test]
    fn concatenation_follows_each_branch() {
        let grid = Grid1D::new(0.0, 6.0, 0.01).unwrap();
        let sol = invert_dilation(&manufactured(grid)).unwrap();
        for (j, x) in grid.nodes().enumerate() {
            let v = sol.concatenated.values()[j];
            if x <= sol.x_bar {
                assert_eq!(v, sol.left.values()[j]);
            } else {
                assert_eq!(v, sol.right.values()[j]);
            }
        }
    }

    #[test]
    fn data_below_the_first_node_falls_linearly_to_zero() {
        let grid = Grid1D::new(0.5, 4.0, 0.5).unwrap();
        let d = GriddedFunction::from_fn(grid, |_| 2.0);
        assert_eq!(eval_d(&d, 0.25), 1.0);
        assert_eq!(eval_d(&d, 0.0), 0.0);
        assert_eq!(eval_d(&d, -1.0), 0.0);
        assert_eq!(eval_d(&d, 4.5), 0.0);
    }

    #[test]
    fn unsupported_data_is_flagged() {
        let grid = Grid1D::new(0.0, 2.0, 0.01).unwrap();
        let d = GriddedFunction::from_fn(grid, |x| x);
        let sol = invert_dilation(&d).unwrap();
        assert!(sol.boundary_ratio.unwrap() > 0.5);
    }

    #[test]
    fn mass_identity_for_the_contracting_branch() {
        let grid = Grid1D::new(0.0, 6.0, 0.001).unwrap();
        let d = manufactured(grid);
        let sol = invert_dilation(&d).unwrap();
        let lhs = sol.contracting().integral();
        assert!((lhs - d.integral()).abs() < 1e-6 * bump(1.25), "{lhs} vs {}", d.integral());
    }

    #[test]
    fn gamma_transform_trivial_values() {
        let grid = Grid1D::symmetric(10.0, 0.05).unwrap();
        let g = gamma_transform(&SizeSample::new(vec![1.0]).unwrap(), 1.0, &grid).unwrap();
        assert_eq!(g.eval(0.0), Complex64::new(0.0, 0.0));
        for (xi, v) in g.iter() {
            let expect = Complex64::new(0.0, xi) * Complex64::from_polar(1.0, xi);
            assert!((v - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn spectral_series_recovers_a_decaying_transform() {
        let grid = Grid1D::symmetric(50.0, 0.05).unwrap();
        let g_star = |xi: f64| Complex64::from_polar((-xi * xi / 2.0).exp(), 1.5 * xi);
        let gamma = Spectrum::from_fn(grid, |xi| g_star(2.0 * xi) - g_star(xi));
        let rec = solve_spectral_dilation(&gamma, 12);
        for (xi, v) in rec.iter() {
            if xi != 0.0 && xi.abs() <= 10.0 {
                // Linear interpolation of gamma at 2^k xi costs O(step^2).
                assert!((v - g_star(xi)).norm() < 2e-3, "xi {xi}: {v}");
            }
        }
        let zero = solve_spectral_dilation(&Spectrum::zeros(grid), 5);
        assert!(zero.values().iter().all(|v| v.norm() == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn branches_are_linear(
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
            c1 in 0.6f64..2.0,
            c2 in 0.6f64..2.0,
        ) {
            let grid = Grid1D::new(0.0, 6.0, 0.02).unwrap();
            let d1 = GriddedFunction::from_fn(grid, |x| (-(x - c1).powi(2) * 8.0).exp() * (x < 5.0) as u8 as f64);
            let d2 = GriddedFunction::from_fn(grid, |x| (x - c2) * (-(x - c2).powi(2) * 4.0).exp() * (x < 5.0) as u8 as f64);
            let dc = GriddedFunction::new(
                grid,
                d1.values().iter().zip(d2.values()).map(|(a, b)| alpha * a + beta * b).collect(),
            ).unwrap();
            let (s1, s2, sc) = (invert_dilation(&d1).unwrap(), invert_dilation(&d2).unwrap(), invert_dilation(&dc).unwrap());
            for j in 0..grid.len() {
                let ea = alpha * s1.contracting().values()[j] + beta * s2.contracting().values()[j];
                let eb = alpha * s1.expanding().values()[j] + beta * s2.expanding().values()[j];
                prop_assert!((sc.contracting().values()[j] - ea).abs() <= 1e-9 * (1.0 + ea.abs()));
                prop_assert!((sc.expanding().values()[j] - eb).abs() <= 1e-9 * (1.0 + eb.abs()));
            }
        }
    }
}
