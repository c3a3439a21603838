//! Uniform one-dimensional grids and real functions sampled on them.

use crate::error::{Error, Result};

const MESH_RTOL: f64 = 1e-9;

/// A uniform grid `min, min + step, ..., min + (len - 1) * step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    min: f64,
    step: f64,
    len: usize,
}

impl Grid1D {
    /// Nodes from `min` to `max` inclusive. `(max - min) / step` must be an integer.
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || max <= min {
            return Err(Error::Domain { what: "grid extent", value: max - min });
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Domain { what: "grid mesh", value: step });
        }
        let intervals = (max - min) / step;
        let rounded = intervals.round();
        if rounded < 1.0 || (intervals - rounded).abs() > MESH_RTOL * intervals.max(1.0) {
            return Err(Error::Shape(format!(
                "extent {} is not a whole number of meshes {step}",
                max - min
            )));
        }
        Ok(Self { min, step, len: rounded as usize + 1 })
    }

    /// Centres of the cells `[lo + k step, lo + (k + 1) step]` covering `[lo, hi]`.
    pub fn cells(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let edges = Self::new(lo, hi, step)?;
        Ok(Self { min: lo + 0.5 * step, step, len: edges.len - 1 })
    }

    /// Symmetric grid `[-half_width, half_width]`, containing 0 as a node.
    pub fn symmetric(half_width: f64, step: f64) -> Result<Self> {
        Self::new(-half_width, half_width, step)
    }

    pub fn from_parts(min: f64, step: f64, len: usize) -> Result<Self> {
        if len < 2 || !(step > 0.0) || !min.is_finite() {
            return Err(Error::Shape(format!("invalid grid: min {min}, step {step}, len {len}")));
        }
        Ok(Self { min, step, len })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.node(self.len - 1)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn node(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.node(i))
    }

    /// Fractional index of `x`; integer values are exactly the nodes.
    pub fn position(&self, x: f64) -> f64 {
        (x - self.min) / self.step
    }

    /// Whether the grid is symmetric about zero with 0 at the middle node.
    pub fn is_symmetric(&self) -> bool {
        self.len % 2 == 1 && (self.min + self.max()).abs() <= MESH_RTOL * self.step
    }

    pub fn same_as(&self, other: &Grid1D) -> bool {
        self.len == other.len
            && (self.step - other.step).abs() <= MESH_RTOL * self.step
            && (self.min - other.min).abs() <= MESH_RTOL * self.step.max(self.min.abs())
    }

    /// Largest index whose node is `<= x` (within round-off), if any.
    pub fn last_node_at_or_below(&self, x: f64) -> Option<usize> {
        let p = self.position(x) + MESH_RTOL;
        if p < 0.0 {
            None
        } else {
            Some((p.floor() as usize).min(self.len - 1))
        }
    }
}

/// Real values on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedFunction {
    grid: Grid1D,
    values: Vec<f64>,
}

impl GriddedFunction {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.nodes().zip(self.values.iter().copied())
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.iter().map(|(x, v)| f(x, v)).collect();
        Self { grid: self.grid, values }
    }

    /// Linear interpolation, zero outside `[min, max]`.
    pub fn eval_or_zero(&self, x: f64) -> f64 {
        let p = self.grid.position(x);
        let last = (self.grid.len() - 1) as f64;
        if !(p >= -MESH_RTOL && p <= last + MESH_RTOL) {
            return 0.0;
        }
        self.lerp(p.clamp(0.0, last))
    }

    /// Linear interpolation, frozen at the end values outside the grid.
    pub fn eval_clamped(&self, x: f64) -> f64 {
        let last = (self.grid.len() - 1) as f64;
        self.lerp(self.grid.position(x).clamp(0.0, last))
    }

    fn lerp(&self, p: f64) -> f64 {
        let i = (p.floor() as usize).min(self.grid.len() - 2);
        let t = p - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.grid.step())
    }

    /// Discrete L2 norm `sqrt(step * sum v^2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.step() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Resample onto another grid by linear interpolation (zero outside).
    pub fn resample(&self, grid: Grid1D) -> Self {
        Self::from_fn(grid, |x| self.eval_or_zero(x))
    }

    /// Index of the largest value; ties go to the smallest abscissa.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|_, v| c * v)
    }
}

/// Trapezoidal rule on uniformly spaced samples.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => step * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_counts_nodes_and_cells() {
        let g = Grid1D::new(0.0, 6.0, 6.0 / 500.0).unwrap();
        assert_eq!(g.len(), 501);
        assert_relative_eq!(g.max(), 6.0, epsilon = 1e-12);

        let c = Grid1D::cells(0.0, 6.0, 6.0 / 500.0).unwrap();
        assert_eq!(c.len(), 500);
        assert_relative_eq!(c.min(), 0.006, epsilon = 1e-15);
        assert_relative_eq!(c.max(), 5.994, epsilon = 1e-12);
    }

    #[test]
    fn grid_rejects_fractional_mesh() {
        assert!(Grid1D::new(0.0, 1.0, 0.3).is_err());
        assert!(Grid1D::new(1.0, 1.0, 0.1).is_err());
        assert!(Grid1D::new(0.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn symmetric_grid_has_zero_in_the_middle() {
        let g = Grid1D::symmetric(50.0, 0.05).unwrap();
        assert_eq!(g.len(), 2001);
        assert!(g.is_symmetric());
        assert_relative_eq!(g.node(1000), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn interpolation_policies() {
        let g = Grid1D::new(0.0, 2.0, 1.0).unwrap();
        let f = GriddedFunction::new(g, vec![0.0, 2.0, 4.0]).unwrap();
        assert_relative_eq!(f.eval_or_zero(0.5), 1.0);
        assert_relative_eq!(f.eval_or_zero(2.0), 4.0);
        assert_eq!(f.eval_or_zero(2.5), 0.0);
        assert_eq!(f.eval_or_zero(-0.1), 0.0);
        assert_relative_eq!(f.eval_clamped(7.0), 4.0);
        assert_relative_eq!(f.eval_clamped(-3.0), 0.0);
    }

    #[test]
    fn trapezoid_is_exact_for_linear_data() {
        let g = Grid1D::new(0.0, 1.0, 0.1).unwrap();
        let f = GriddedFunction::from_fn(g, |x| 3.0 * x + 1.0);
        assert_relative_eq!(f.integral(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn argmax_prefers_smallest_abscissa_on_ties() {
        let g = Grid1D::new(0.0, 3.0, 1.0).unwrap();
        let f = GriddedFunction::new(g, vec![1.0, 5.0, 5.0, 2.0]).unwrap();
        assert_eq!(f.argmax(), 1);
    }
}
