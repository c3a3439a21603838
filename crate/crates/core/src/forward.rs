//! Dominant eigenpair of the increment-and-size transport-renewal problem.
//!
//! The density `u(t, a, x)` is advanced with a first-order upwind finite-volume
//! scheme on cell-centred grids (transport explicit, division loss implicit),
//! renormalized to unit mass after every step. The per-step growth of the
//! unnormalized mass gives the eigenvalue, the fixed point gives `U`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GriddedFunction};
use crate::model::{DivisionRate, GrowthLaw};
use crate::sample::{DividingCell, DividingSample, SizeSample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once the L1 change between normalized iterates, per unit time, drops below this.
    pub tol: f64,
    /// Fraction of the positivity-preserving time step actually used.
    pub cfl: f64,
    pub max_steps: usize,
    /// Number of trailing steps averaged into the eigenvalue estimate.
    pub lambda_window: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-4, cfl: 1.0, max_steps: 2_000_000, lambda_window: 100 }
    }
}

/// Discrete eigenpair on the (increment x size) cell grid.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub lambda: f64,
    increments: Grid1D,
    sizes: Grid1D,
    // Row-major: increment index outer, size index inner.
    density: Vec<f64>,
    pub steps: usize,
    pub final_change: f64,
    pub time_step: f64,
}

impl EigenSolution {
    /// Wrap an existing density; it is renormalized to unit mass.
    pub fn from_density(
        lambda: f64,
        increments: Grid1D,
        sizes: Grid1D,
        mut density: Vec<f64>,
    ) -> Result<Self> {
        if density.len() != increments.len() * sizes.len() {
            return Err(Error::Shape(format!(
                "{} values for a {}x{} grid",
                density.len(),
                increments.len(),
                sizes.len()
            )));
        }
        let m: f64 = density.iter().sum::<f64>() * increments.step() * sizes.step();
        if !(m > 0.0) {
            return Err(Error::Sampling("eigenfunction has no mass".into()));
        }
        density.iter_mut().for_each(|v| *v /= m);
        Ok(Self { lambda, increments, sizes, density, steps: 0, final_change: 0.0, time_step: 0.0 })
    }

    pub fn increments(&self) -> &Grid1D {
        &self.increments
    }

    pub fn sizes(&self) -> &Grid1D {
        &self.sizes
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn value(&self, ia: usize, jx: usize) -> f64 {
        self.density[ia * self.sizes.len() + jx]
    }

    pub fn row(&self, ia: usize) -> &[f64] {
        let nx = self.sizes.len();
        &self.density[ia * nx..(ia + 1) * nx]
    }

    /// Cell-quadrature mass; equal to 1 up to round-off.
    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.increments.step() * self.sizes.step()
    }

    /// Mass carried by cells whose increment exceeds their size (should be ~0).
    pub fn mass_above_diagonal(&self) -> f64 {
        let cell = self.increments.step() * self.sizes.step();
        let mut m = 0.0;
        for ia in 0..self.increments.len() {
            let a = self.increments.node(ia);
            for (jx, x) in self.sizes.nodes().enumerate() {
                if a > x + 1e-12 {
                    m += self.value(ia, jx) * cell;
                }
            }
        }
        m
    }
}

/// Size marginal of the eigenfunction, by cell quadrature over increments.
pub fn size_marginal(sol: &EigenSolution) -> GriddedFunction {
    let da = sol.increments.step();
    let nx = sol.sizes.len();
    let mut out = vec![0.0; nx];
    for ia in 0..sol.increments.len() {
        for (o, v) in out.iter_mut().zip(sol.row(ia)) {
            *o += da * v;
        }
    }
    GriddedFunction::new(sol.sizes, out).expect("grid length")
}

/// Size distribution of dividing cells, `g(x) int_0^x B(a) U(a, x) da`.
pub fn dividing_size_distribution(
    sol: &EigenSolution,
    growth: &GrowthLaw,
    rate: &DivisionRate,
) -> GriddedFunction {
    let da = sol.increments.step();
    let rates: Vec<f64> = sol.increments.nodes().map(|a| rate.rate(a)).collect();
    let values = sol
        .sizes
        .nodes()
        .enumerate()
        .map(|(jx, x)| {
            let top = match sol.increments.last_node_at_or_below(x) {
                Some(i) => i,
                None => return 0.0,
            };
            let s: f64 = (0..=top).map(|ia| rates[ia] * sol.value(ia, jx)).sum();
            growth.speed(x) * da * s
        })
        .collect();
    GriddedFunction::new(sol.sizes, values).expect("grid length")
}

/// `N_B(y) = g(y) e^{lambda G(y)} U_x(y)`; for linear growth `tau y^2 U_x(y)`.
pub fn make_n(u_x: &GriddedFunction, growth: &GrowthLaw, lambda: f64) -> GriddedFunction {
    match growth {
        GrowthLaw::Linear { tau } => u_x.map(|y, u| if y > 0.0 { tau * y * y * u } else { 0.0 }),
        _ => u_x.map(|y, u| {
            if y > 0.0 {
                growth.speed(y) * growth.dilation_weight(lambda, y) * u
            } else {
                0.0
            }
        }),
    }
}

/// `G_B(y) = 4 e^{lambda G(y)} L_B(2y)`; for linear growth `4 y L_B(2y)`.
/// `L_B` is interpolated linearly and read as zero beyond its grid.
pub fn make_g(l_b: &GriddedFunction, growth: &GrowthLaw, lambda: f64) -> GriddedFunction {
    match growth {
        GrowthLaw::Linear { .. } => {
            l_b.map(|y, _| if y > 0.0 { 4.0 * y * l_b.eval_or_zero(2.0 * y) } else { 0.0 })
        }
        _ => l_b.map(|y, _| {
            if y > 0.0 {
                4.0 * growth.dilation_weight(lambda, y) * l_b.eval_or_zero(2.0 * y)
            } else {
                0.0
            }
        }),
    }
}

/// Both intermediate functions of the deconvolution problem.
pub fn make_g_n(
    u_x: &GriddedFunction,
    l_b: &GriddedFunction,
    growth: &GrowthLaw,
    lambda: f64,
) -> (GriddedFunction, GriddedFunction) {
    (make_g(l_b, growth, lambda), make_n(u_x, growth, lambda))
}

/// Ground-truth curves derived from an eigenpair.
#[derive(Debug, Clone)]
pub struct DerivedCurves {
    pub u_x: GriddedFunction,
    pub l_b: GriddedFunction,
    pub g_b: GriddedFunction,
    pub n_b: GriddedFunction,
}

impl DerivedCurves {
    pub fn from_solution(sol: &EigenSolution, growth: &GrowthLaw, rate: &DivisionRate) -> Self {
        let u_x = size_marginal(sol);
        let l_b = dividing_size_distribution(sol, growth, rate);
        let lambda = growth.tau().unwrap_or(sol.lambda);
        let (g_b, n_b) = make_g_n(&u_x, &l_b, growth, lambda);
        Self { u_x, l_b, g_b, n_b }
    }
}

/// Solve for the dominant eigenpair on the given cell-centred grids.
pub fn solve_eigenpair(
    growth: &GrowthLaw,
    rate: &DivisionRate,
    increments: Grid1D,
    sizes: Grid1D,
    opts: &SolverOptions,
) -> Result<EigenSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::Domain { what: "solver tolerance", value: opts.tol });
    }
    if !(opts.cfl > 0.0 && opts.cfl <= 1.0) {
        return Err(Error::Domain { what: "CFL fraction", value: opts.cfl });
    }
    let (na, nx) = (increments.len(), sizes.len());
    let (da, dx) = (increments.step(), sizes.step());

    let b: Vec<f64> = increments.nodes().map(|a| rate.rate(a)).collect();
    let g_centre: Vec<f64> = sizes.nodes().map(|x| growth.speed(x)).collect();
    let g_face: Vec<f64> = sizes.nodes().map(|x| growth.speed(x + 0.5 * dx)).collect();
    let g_max = g_centre.iter().chain(&g_face).fold(0.0f64, |m, g| m.max(*g));
    if !(g_max > 0.0) {
        return Err(Error::Domain { what: "maximum growth speed", value: g_max });
    }
    // Keeps the explicit transport part a convex combination.
    let dt = opts.cfl / (g_max * (1.0 / da + 1.0 / dx));

    // Renewal inflow reads u(a, 2x) by linear interpolation along sizes; the
    // doubled sizes still on the grid form a prefix of it.
    let mut doubled: Vec<(usize, f64)> = Vec::new();
    let mut doubled_speed: Vec<f64> = Vec::new();
    for x in sizes.nodes() {
        let p = sizes.position(2.0 * x);
        if p < 0.0 || p > (nx - 1) as f64 + 1e-9 {
            break;
        }
        let k = (p.floor() as usize).min(nx.saturating_sub(2));
        doubled.push((k, (p - k as f64).min(1.0)));
        doubled_speed.push(growth.speed(2.0 * x));
    }

    let mut u = initial_density(growth, rate, &increments, &sizes);
    let cell = da * dx;
    let total: f64 = u.iter().sum::<f64>() * cell;
    u.iter_mut().for_each(|v| *v /= total);

    // Per-cell coefficients of the update.
    let keep: Vec<f64> =
        (0..nx).map(|j| 1.0 - dt / da * g_centre[j] - dt / dx * g_face[j]).collect();
    let from_below: Vec<f64> = g_centre.iter().map(|g| dt / da * g).collect();
    let from_left: Vec<f64> =
        (0..nx).map(|j| if j > 0 { dt / dx * g_face[j - 1] } else { 0.0 }).collect();
    let inv_decay: Vec<f64> = b
        .iter()
        .flat_map(|bi| g_centre.iter().map(move |g| 1.0 / (1.0 + dt * g * bi)))
        .collect();

    let mut next = vec![0.0; na * nx];
    let mut inflow = vec![0.0; doubled.len()];
    let mut inflow_scaled = vec![0.0; nx];
    let ones = vec![1.0; nx];
    let mut lambdas: Vec<f64> = Vec::with_capacity(opts.lambda_window);
    let mut change = f64::INFINITY;

    for step in 1..=opts.max_steps {
        inflow.iter_mut().for_each(|v| *v = 0.0);
        for (row, bi) in u.chunks_exact(nx).zip(&b) {
            for (slot, &(k, t)) in inflow.iter_mut().zip(&doubled) {
                *slot += bi * (row[k] * (1.0 - t) + row[k + 1] * t);
            }
        }
        for ((out, s), g2) in inflow_scaled.iter_mut().zip(&inflow).zip(&doubled_speed) {
            *out = 4.0 * dt * g2 * s;
        }

        next.par_chunks_mut(nx).enumerate().for_each(|(ia, out)| {
            let here = &u[ia * nx..(ia + 1) * nx];
            let decay = &inv_decay[ia * nx..(ia + 1) * nx];
            let below = if ia == 0 { &inflow_scaled[..] } else { &u[(ia - 1) * nx..ia * nx] };
            let lift = if ia == 0 { &ones[..] } else { &from_below[..] };
            out[0] = (here[0] * keep[0] + below[0] * lift[0]) * decay[0];
            let rows = out[1..].iter_mut().zip(&here[1..]).zip(&here[..nx - 1]);
            let coefs = keep[1..].iter().zip(&from_left[1..]).zip(&decay[1..]);
            let srcs = below[1..].iter().zip(&lift[1..]);
            for (((o, h), l), (((k, fl), d), (bl, fb))) in rows.zip(coefs.zip(srcs)) {
                *o = (h * k + l * fl + bl * fb) * d;
            }
        });

        let (sum, low, peak) = lane_stats(&next);
        let mass = sum * cell;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Scheme { step, value: mass });
        }
        if low < -1e-12 * peak {
            return Err(Error::Scheme { step, value: low / mass });
        }

        change = scale_and_l1_change(&mut next, &u, 1.0 / mass) * cell / dt;
        if lambdas.len() == opts.lambda_window {
            lambdas.remove(0);
        }
        lambdas.push(mass.ln() / dt);
        std::mem::swap(&mut u, &mut next);

        if change < opts.tol && step >= opts.lambda_window {
            let lambda = lambdas.iter().sum::<f64>() / lambdas.len() as f64;
            return Ok(EigenSolution {
                lambda,
                increments,
                sizes,
                density: u,
                steps: step,
                final_change: change,
                time_step: dt,
            });
        }
    }
    Err(Error::Convergence { steps: opts.max_steps, last_change: change })
}

const LANES: usize = 8;

// Sum, minimum and maximum with fixed-order lane accumulators.
fn lane_stats(values: &[f64]) -> (f64, f64, f64) {
    let mut sum = [0.0; LANES];
    let mut low = [0.0f64; LANES];
    let mut high = [0.0f64; LANES];
    let chunks = values.chunks_exact(LANES);
    let rest = chunks.remainder();
    for c in chunks {
        for k in 0..LANES {
            sum[k] += c[k];
            low[k] = if c[k] < low[k] { c[k] } else { low[k] };
            high[k] = if c[k] > high[k] { c[k] } else { high[k] };
        }
    }
    let mut s: f64 = sum.iter().sum();
    let mut lo = low.iter().fold(0.0f64, |m, v| m.min(*v));
    let mut hi = high.iter().fold(0.0f64, |m, v| m.max(*v));
    for v in rest {
        s += v;
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    (s, lo, hi)
}

// Scales `next` in place and returns `sum |next - prev|`.
fn scale_and_l1_change(next: &mut [f64], prev: &[f64], factor: f64) -> f64 {
    let mut acc = [0.0; LANES];
    let mut n_chunks = next.chunks_exact_mut(LANES);
    let mut p_chunks = prev.chunks_exact(LANES);
    for (n, p) in (&mut n_chunks).zip(&mut p_chunks) {
        for k in 0..LANES {
            n[k] *= factor;
            acc[k] += (n[k] - p[k]).abs();
        }
    }
    let mut total: f64 = acc.iter().sum();
    for (n, p) in n_chunks.into_remainder().iter_mut().zip(p_chunks.remainder()) {
        *n *= factor;
        total += (*n - p).abs();
    }
    total
}

// A smooth bump below the diagonal; the fixed point does not depend on it.
fn initial_density(
    growth: &GrowthLaw,
    rate: &DivisionRate,
    increments: &Grid1D,
    sizes: &Grid1D,
) -> Vec<f64> {
    let _ = growth;
    let birth = 0.25 * (sizes.max() + 0.5 * sizes.step());
    let mut u = Vec::with_capacity(increments.len() * sizes.len());
    for a in increments.nodes() {
        let survival = (-rate.cumulative(a)).exp();
        for x in sizes.nodes() {
            let y = x - a;
            u.push(if y > 0.0 { (-(y - birth).powi(2) / 0.2).exp() * survival } else { 0.0 });
        }
    }
    u
}

/// Draw `n` sizes by inverting the piecewise-linear CDF of `density`.
/// The same `(density, n, seed)` always yields the same sorted sample.
pub fn sample_sizes(density: &GriddedFunction, n: usize, seed: u64) -> Result<SizeSample> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let grid = density.grid();
    if let Some(&bad) = density.values().iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Sampling(format!("negative density value {bad}")));
    }
    let mut cdf = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    cdf.push(0.0);
    for w in density.values().windows(2) {
        acc += 0.5 * grid.step() * (w[0] + w[1]);
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::Sampling("density has zero mass".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = (0..n)
        .map(|_| {
            let target = rng.random::<f64>() * acc;
            let k = cdf.partition_point(|c| *c <= target).clamp(1, cdf.len() - 1);
            let t = (target - cdf[k - 1]) / (cdf[k] - cdf[k - 1]);
            let x = grid.node(k - 1) + t.clamp(0.0, 1.0) * grid.step();
            x.max(f64::MIN_POSITIVE)
        })
        .collect();
    SizeSample::new(draws)
}

/// Dividing cells drawn from the division flux `g(x) B(a) U(a, x)` of an
/// eigenpair, placed uniformly inside the chosen cell with `a <= x`.
pub fn sample_dividing(
    sol: &EigenSolution,
    growth: &GrowthLaw,
    rate: &DivisionRate,
    n: usize,
    seed: u64,
) -> Result<DividingSample> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let (ag, xg) = (sol.increments, sol.sizes);
    let mut cells = Vec::new();
    let mut cdf = Vec::new();
    let mut acc = 0.0;
    for ia in 0..ag.len() {
        let a = ag.node(ia);
        for (jx, x) in xg.nodes().enumerate() {
            if a > x + 1e-12 {
                continue;
            }
            let w = growth.speed(x) * rate.rate(a) * sol.value(ia, jx);
            if w > 0.0 {
                acc += w;
                cells.push((a, x));
                cdf.push(acc);
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::Sampling("division flux vanishes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ha, hx) = (0.5 * ag.step(), 0.5 * xg.step());
    let out = (0..n)
        .map(|_| {
            let target = rng.random::<f64>() * acc;
            let k = cdf.partition_point(|c| *c <= target).min(cells.len() - 1);
            let (a, x) = cells[k];
            let size = (x + (2.0 * rng.random::<f64>() - 1.0) * hx).max(f64::MIN_POSITIVE);
            let increment = (a + (2.0 * rng.random::<f64>() - 1.0) * ha).clamp(0.0, size);
            DividingCell { increment, size }
        })
        .collect();
    DividingSample::new(out)
}
