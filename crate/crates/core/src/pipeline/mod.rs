//! Protocols 1 to 4, bandwidth selection, Monte Carlo studies and slopes.

pub mod direct;
pub mod kernel;
pub mod montecarlo;
pub mod oracle;
pub mod protocol;
pub mod slopes;

use std::fmt;

use crate::error::Result;
use crate::forward::{DerivedCurves, EigenSolution};
use crate::fourier::{default_frequency_grid, fourier_quadrature, Spectrum};
use crate::grid::{Grid1D, GriddedFunction};
use crate::model::{default_increment_grid, DivisionRate, GrowthLaw};

pub use direct::{direct_dividing_estimator, weighted_kde, DirectEstimate};
pub use kernel::{kde, kde_derivative, kde_derivative_weighted, silverman_bandwidth, Gaussian, Kernel, KernelSpec};
pub use montecarlo::{monte_carlo, repeat_seed, Band, MonteCarloStudy, SeedScheme, StudyPoint};
pub use oracle::{oracle_bandwidth, OracleCurve};
pub use protocol::{
    run_protocol, Bandwidth, Intermediates, Protocol, ProtocolInputs, ProtocolRegistry,
    Reconstruction, ReconstructionResult,
};
pub use slopes::{convergence_slopes, fit_slope, slopes_from_means, SlopeFit, SlopeTable};

/// Quantities whose errors are tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quantity {
    U,
    UPrime,
    D,
    L,
    G,
    GStar,
    NStar,
    FStar,
    F,
    S,
    B,
    BWide,
}

impl Quantity {
    pub const ALL: [Quantity; 12] = [
        Quantity::U,
        Quantity::UPrime,
        Quantity::D,
        Quantity::L,
        Quantity::G,
        Quantity::GStar,
        Quantity::NStar,
        Quantity::FStar,
        Quantity::F,
        Quantity::S,
        Quantity::B,
        Quantity::BWide,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Quantity::U => "U_x",
            Quantity::UPrime => "U_x'",
            Quantity::D => "D",
            Quantity::L => "L_B",
            Quantity::G => "G_B",
            Quantity::GStar => "G*",
            Quantity::NStar => "N*",
            Quantity::FStar => "f*",
            Quantity::F => "f",
            Quantity::S => "S",
            Quantity::B => "B[0,2]",
            Quantity::BWide => "B[0,2.5]",
        }
    }

    /// File-name friendly key.
    pub fn key(self) -> &'static str {
        match self {
            Quantity::U => "u_x",
            Quantity::UPrime => "u_x_prime",
            Quantity::D => "d",
            Quantity::L => "l_b",
            Quantity::G => "g_b",
            Quantity::GStar => "g_star",
            Quantity::NStar => "n_star",
            Quantity::FStar => "f_star",
            Quantity::F => "f",
            Quantity::S => "s",
            Quantity::B => "b",
            Quantity::BWide => "b_wide",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.key() == key || q.label() == key)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// How `h2` follows from `h1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum H2Rule {
    /// `h2 = h1^p`.
    Power(f64),
    Fixed(f64),
}

impl H2Rule {
    pub fn apply(self, h1: f64) -> f64 {
        match self {
            H2Rule::Power(p) => h1.powf(p),
            H2Rule::Fixed(h) => h,
        }
    }
}

/// Error grids: the fixed single-run tables or the `n`-dependent study grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorMode {
    SingleRun,
    Study { n: usize },
}

/// Settings shared by every protocol.
#[derive(Debug, Clone)]
pub struct PipelineSettings {
    pub xi_grid: Grid1D,
    pub output_grid: Grid1D,
    pub xi_floor: f64,
    /// Survival floor; `None` picks 1e-9 for exact inputs and `1/n` for samples.
    pub varpi: Option<f64>,
    pub project: bool,
    pub h1: Option<f64>,
    pub h2: H2Rule,
    pub kernel: &'static dyn Kernel,
    /// Candidate cutoffs `1/h3` for the oracle.
    pub oracle_grid: Vec<f64>,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            xi_grid: default_frequency_grid(),
            output_grid: default_increment_grid(),
            xi_floor: 0.0,
            varpi: None,
            project: true,
            h1: None,
            h2: H2Rule::Power(0.6),
            kernel: &kernel::GAUSSIAN,
            oracle_grid: default_oracle_grid(),
        }
    }
}

/// `1/h` in `{2, 2.25, ..., 8}`.
pub fn default_oracle_grid() -> Vec<f64> {
    (0..=24).map(|k| 2.0 + 0.25 * k as f64).collect()
}

pub const EXACT_VARPI: f64 = 1e-9;

/// Nodes `0, step, 2 step, ...` up to `hi`.
pub fn study_grid(hi: f64, step: f64) -> Grid1D {
    let len = (hi / step + 1e-9).floor() as usize + 1;
    Grid1D::from_parts(0.0, step, len.max(2)).expect("positive step")
}

/// Centred differences inside, one-sided at the ends.
pub fn gradient(f: &GriddedFunction) -> GriddedFunction {
    let v = f.values();
    let n = v.len();
    let h = f.grid().step();
    let values = (0..n)
        .map(|j| match j {
            0 => (v[1] - v[0]) / h,
            _ if j == n - 1 => (v[n - 1] - v[n - 2]) / h,
            _ => (v[j + 1] - v[j - 1]) / (2.0 * h),
        })
        .collect();
    GriddedFunction::new(*f.grid(), values).expect("grid length")
}

/// `lambda U_x + (g U_x)'` with a centred-difference derivative.
pub fn dilation_data(u_x: &GriddedFunction, growth: &GrowthLaw, lambda: f64) -> GriddedFunction {
    let deriv = gradient(&u_x.map(|x, u| growth.speed(x) * u));
    let values = u_x.values().iter().zip(deriv.values()).map(|(u, d)| lambda * u + d).collect();
    GriddedFunction::new(*u_x.grid(), values).expect("grid length")
}

/// Known model and every exact curve and transform a protocol may consume
/// or be scored against.
#[derive(Debug, Clone)]
pub struct Truth {
    pub growth: GrowthLaw,
    pub rate: DivisionRate,
    /// Growth rate used by the estimators (`tau` for linear growth).
    pub lambda: f64,
    pub solution: EigenSolution,
    pub curves: DerivedCurves,
    pub u_x_prime: GriddedFunction,
    pub d: GriddedFunction,
    pub g_star: Spectrum,
    pub n_star: Spectrum,
    pub f_star: Spectrum,
}

impl Truth {
    pub fn new(
        solution: EigenSolution,
        growth: GrowthLaw,
        rate: DivisionRate,
        xi_grid: &Grid1D,
    ) -> Result<Self> {
        let curves = DerivedCurves::from_solution(&solution, &growth, &rate);
        let lambda = growth.tau().unwrap_or(solution.lambda);
        let fine = Grid1D::new(0.0, 12.0, 0.001)?;
        Ok(Self {
            u_x_prime: gradient(&curves.u_x),
            d: dilation_data(&curves.u_x, &growth, lambda),
            g_star: fourier_quadrature(&curves.g_b, xi_grid),
            n_star: fourier_quadrature(&curves.n_b, xi_grid),
            f_star: fourier_quadrature(&rate.tabulate_density(fine), xi_grid),
            growth,
            rate,
            lambda,
            solution,
            curves,
        })
    }

    pub fn size_grid(&self) -> Grid1D {
        *self.solution.sizes()
    }

    pub fn density_on(&self, grid: Grid1D) -> GriddedFunction {
        self.rate.tabulate_density(grid)
    }

    pub fn survival_on(&self, grid: Grid1D) -> GriddedFunction {
        self.rate.tabulate_survival(grid)
    }

    pub fn rate_on(&self, grid: Grid1D) -> GriddedFunction {
        self.rate.tabulate_rate(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gradient_is_exact_on_quadratics_inside() {
        let grid = Grid1D::new(0.0, 1.0, 0.1).unwrap();
        let f = GriddedFunction::from_fn(grid, |x| x * x);
        let d = gradient(&f);
        for (x, v) in d.iter().skip(1).take(9) {
            assert_relative_eq!(v, 2.0 * x, epsilon = 1e-12);
        }
        assert_relative_eq!(d.values()[0], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn study_grid_stops_below_the_bound() {
        let g = study_grid(2.25, 1.0 / 500f64.sqrt());
        assert!(g.max() <= 2.25 + 1e-12);
        assert!(g.max() + g.step() > 2.25);
        assert_eq!(g.min(), 0.0);
    }

    #[test]
    fn oracle_grid_spans_two_to_eight() {
        let g = default_oracle_grid();
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], 2.0);
        assert_eq!(g[24], 8.0);
    }

    #[test]
    fn quantity_keys_round_trip() {
        for q in Quantity::ALL {
            assert_eq!(Quantity::from_key(q.key()), Some(q));
        }
    }
}
