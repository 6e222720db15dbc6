//! Uniform time grids and grid-sampled functions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Uniform grid `t_i = i * T / N`, `i = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter("time horizon must be finite and > 0"));
        }
        if steps < 2 {
            return Err(Error::InvalidParameter("time grid needs at least 2 steps"));
        }
        Ok(Self { horizon, steps })
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps `N`; the grid has `N + 1` nodes.
    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.steps + 1
    }

    /// Spacing `delta = T / N`.
    #[inline]
    pub fn delta(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.delta()
    }
}

/// Real values attached to every node of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::GridMismatch("value vector length must be steps + 1"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            values: vec![0.0; grid.num_nodes()],
            grid,
        }
    }

    /// Sample a scalar function of time on the grid nodes.
    pub fn sample(grid: TimeGrid, mut f: impl FnMut(f64) -> f64) -> Self {
        let values = (0..grid.num_nodes()).map(|i| f(grid.node(i))).collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_input() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
        assert!(TimeGrid::new(f64::NAN, 10).is_err());
    }

    #[test]
    fn nodes_are_uniform() {
        let g = TimeGrid::new(2.0, 4).unwrap();
        assert_eq!(g.delta(), 0.5);
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(4), 2.0);
        assert_eq!(g.num_nodes(), 5);
    }

    #[test]
    fn grid_function_length_checked() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert!(GridFunction::new(g, vec![0.0; 4]).is_err());
        assert!(GridFunction::new(g, vec![0.0; 5]).is_ok());
    }
}
