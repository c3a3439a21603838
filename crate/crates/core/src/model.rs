//! Growth and division laws, closed-form lifetime quantities, and the error
//! metric shared by the rest of the crate.

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GriddedFunction};

/// Survival level below which truncating the increment axis is considered harmless.
pub const SURVIVAL_TRUNCATION: f64 = 1e-3;

/// Individual growth speed `g(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum GrowthLaw {
    /// `g(x) = tau * x` (exponential growth).
    Linear { tau: f64 },
    /// Tabulated `g` on a size grid, interpolated linearly and frozen beyond the grid.
    Tabulated(TabulatedGrowth),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedGrowth {
    speed: GriddedFunction,
    // Trapezoidal cumulative of 1/g, zero at the first node.
    antiderivative: GriddedFunction,
}

impl GrowthLaw {
    pub fn linear(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain { what: "growth rate tau", value: tau });
        }
        Ok(GrowthLaw::Linear { tau })
    }

    pub fn tabulated(speed: GriddedFunction) -> Result<Self> {
        if let Some(&bad) = speed.values().iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain { what: "tabulated growth speed", value: bad });
        }
        let step = speed.grid().step();
        let inv: Vec<f64> = speed.values().iter().map(|g| 1.0 / g).collect();
        let mut cumulative = Vec::with_capacity(inv.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in inv.windows(2) {
            acc += 0.5 * step * (w[0] + w[1]);
            cumulative.push(acc);
        }
        let antiderivative = GriddedFunction::new(*speed.grid(), cumulative)?;
        Ok(GrowthLaw::Tabulated(TabulatedGrowth { speed, antiderivative }))
    }

    /// `g(x)`.
    pub fn speed(&self, x: f64) -> f64 {
        match self {
            GrowthLaw::Linear { tau } => tau * x,
            GrowthLaw::Tabulated(t) => t.speed.eval_clamped(x),
        }
    }

    pub fn tau(&self) -> Option<f64> {
        match self {
            GrowthLaw::Linear { tau } => Some(*tau),
            GrowthLaw::Tabulated(_) => None,
        }
    }

    /// An antiderivative `G` of `1/g`: `ln(x)/tau` for linear growth, the
    /// trapezoidal cumulative anchored at the first node for tabulated growth.
    pub fn antiderivative(&self, x: f64) -> Result<f64> {
        match self {
            GrowthLaw::Linear { tau } => {
                if !(x > 0.0) {
                    return Err(Error::Domain { what: "size for ln(x)/tau", value: x });
                }
                Ok(x.ln() / tau)
            }
            GrowthLaw::Tabulated(t) => {
                let grid = t.antiderivative.grid();
                let (lo, hi) = (grid.min(), grid.max());
                // Frozen speed outside the table: G continues linearly.
                Ok(if x < lo {
                    (x - lo) / t.speed.values()[0]
                } else if x > hi {
                    t.antiderivative.values()[grid.len() - 1]
                        + (x - hi) / t.speed.values()[grid.len() - 1]
                } else {
                    t.antiderivative.eval_clamped(x)
                })
            }
        }
    }

    /// `exp(lambda * G(x))`, with the `x -> 0` limit (0) for linear growth.
    pub fn dilation_weight(&self, lambda: f64, x: f64) -> f64 {
        match self {
            GrowthLaw::Linear { tau } => {
                if x > 0.0 {
                    (lambda / tau * x.ln()).exp()
                } else if lambda > 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            GrowthLaw::Tabulated(_) => match self.antiderivative(x) {
                Ok(big_g) => (lambda * big_g).exp(),
                Err(_) => 0.0,
            },
        }
    }
}

/// Division rate per unit of growth, as a function of the increment `a`.
#[derive(Debug, Clone, PartialEq)]
pub enum DivisionRate {
    /// `B(a) = a^gamma`.
    PowerLaw { gamma: f64 },
    Tabulated(TabulatedRate),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedRate {
    rate: GriddedFunction,
    // Lambda at each node, including the frozen stretch [0, first node].
    cumulative: Vec<f64>,
}

impl DivisionRate {
    pub fn power_law(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Domain { what: "division-rate exponent gamma", value: gamma });
        }
        Ok(DivisionRate::PowerLaw { gamma })
    }

    pub fn tabulated(rate: GriddedFunction) -> Result<Self> {
        let grid = *rate.grid();
        if grid.min() < 0.0 {
            return Err(Error::Domain { what: "first increment node", value: grid.min() });
        }
        if let Some(&bad) = rate.values().iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain { what: "tabulated division rate", value: bad });
        }
        let v = rate.values();
        let mut cumulative = Vec::with_capacity(v.len());
        let mut acc = v[0] * grid.min();
        cumulative.push(acc);
        for w in v.windows(2) {
            acc += 0.5 * grid.step() * (w[0] + w[1]);
            cumulative.push(acc);
        }
        Ok(DivisionRate::Tabulated(TabulatedRate { rate, cumulative }))
    }

    /// `B(a)` for `a >= 0`.
    pub fn rate(&self, a: f64) -> f64 {
        match self {
            DivisionRate::PowerLaw { gamma } => a.powf(*gamma),
            DivisionRate::Tabulated(t) => t.rate.eval_clamped(a),
        }
    }

    /// `Lambda(a) = int_0^a B`.
    pub fn cumulative(&self, a: f64) -> f64 {
        match self {
            DivisionRate::PowerLaw { gamma } => a.powf(gamma + 1.0) / (gamma + 1.0),
            DivisionRate::Tabulated(t) => {
                let grid = t.rate.grid();
                let v = t.rate.values();
                let last = grid.len() - 1;
                if a <= grid.min() {
                    v[0] * a
                } else if a >= grid.max() {
                    t.cumulative[last] + v[last] * (a - grid.max())
                } else {
                    let p = grid.position(a);
                    let i = (p.floor() as usize).min(last - 1);
                    let s = a - grid.node(i);
                    let b = t.rate.eval_clamped(a);
                    t.cumulative[i] + 0.5 * s * (v[i] + b)
                }
            }
        }
    }

    /// Probability density of the division increment, `B(a) exp(-Lambda(a))`.
    pub fn density(&self, a: f64) -> Result<f64> {
        check_increment(a)?;
        Ok(self.rate(a) * (-self.cumulative(a)).exp())
    }

    /// Survival function of the division increment, `exp(-Lambda(a))`.
    pub fn survival(&self, a: f64) -> Result<f64> {
        check_increment(a)?;
        Ok((-self.cumulative(a)).exp())
    }

    /// Whether `[0, a_max]` holds all but [`SURVIVAL_TRUNCATION`] of the increment law.
    pub fn covered_by(&self, a_max: f64) -> bool {
        (-self.cumulative(a_max)).exp() < SURVIVAL_TRUNCATION
    }

    pub fn tabulate_density(&self, grid: Grid1D) -> GriddedFunction {
        GriddedFunction::from_fn(grid, |a| self.rate(a.max(0.0)) * (-self.cumulative(a.max(0.0))).exp())
    }

    pub fn tabulate_survival(&self, grid: Grid1D) -> GriddedFunction {
        GriddedFunction::from_fn(grid, |a| (-self.cumulative(a.max(0.0))).exp())
    }

    pub fn tabulate_rate(&self, grid: Grid1D) -> GriddedFunction {
        GriddedFunction::from_fn(grid, |a| self.rate(a.max(0.0)))
    }
}

fn check_increment(a: f64) -> Result<()> {
    if a >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { what: "increment", value: a })
    }
}

/// `f_B(a)`; see [`DivisionRate::density`].
pub fn eval_f_b(rate: &DivisionRate, a: f64) -> Result<f64> {
    rate.density(a)
}

/// `S_B(a)`; see [`DivisionRate::survival`].
pub fn eval_s_b(rate: &DivisionRate, a: f64) -> Result<f64> {
    rate.survival(a)
}

/// Increment grid on which lifetime quantities are reported: `[0, 5]`, mesh 0.01.
pub fn default_increment_grid() -> Grid1D {
    Grid1D::new(0.0, 5.0, 0.01).expect("static grid")
}

/// `||estimate - truth|| / ||truth||` in the discrete L2 norm of the shared grid.
pub fn relative_l2_error(estimate: &GriddedFunction, truth: &GriddedFunction) -> Result<f64> {
    if !estimate.grid().same_as(truth.grid()) {
        return Err(Error::Shape(format!(
            "estimate grid {:?} differs from reference grid {:?}",
            estimate.grid(),
            truth.grid()
        )));
    }
    relative_l2_error_values(estimate.values(), truth.values())
}

pub(crate) fn relative_l2_error_values(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::Shape(format!("{} vs {} samples", estimate.len(), truth.len())));
    }
    let den: f64 = truth.iter().map(|t| t * t).sum();
    if den == 0.0 || !den.is_finite() {
        return Err(Error::UndefinedMetric);
    }
    let num: f64 = estimate.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).sum();
    Ok((num / den).sqrt())
}

/// Right-tail cumulative integral `int_x^max` by the trapezoidal rule; zero at the last node.
pub(crate) fn right_tail_integral(values: &[f64], step: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for i in (0..values.len().saturating_sub(1)).rev() {
        out[i] = out[i + 1] + 0.5 * step * (values[i] + values[i + 1]);
    }
    out
}

/// Regularization parameters used by one reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationParams {
    /// Bandwidth of the size-density kernel estimate.
    pub h1: Option<f64>,
    /// Bandwidth of the derivative kernel estimate.
    pub h2: Option<f64>,
    /// Spectral cutoff is `1/h3`.
    pub h3: f64,
    /// Cutoff of the alternative spectral survival estimate.
    pub h4: Option<f64>,
    /// Floor of the survival denominator.
    pub varpi: f64,
    /// Frequencies with `|G*| < xi_floor` are dropped.
    pub xi_floor: f64,
    /// Concatenation abscissa of the dilation inverse.
    pub x_bar: Option<f64>,
    /// Frequencies kept in the deconvolution set, out of the grid total.
    pub omega_kept: usize,
    pub omega_total: usize,
}
