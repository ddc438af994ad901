use num_complex::Complex64;

use super::grid::SpatialGrid;
use crate::error::{Error, Result};

/// Complex amplitude `ψ` on a grid, with the financial masses of each price
/// coordinate and the price scaling constant `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveField {
    grid: SpatialGrid,
    values: Vec<Complex64>,
    masses: Vec<f64>,
    h: f64,
}

impl WaveField {
    pub fn new(grid: SpatialGrid, values: Vec<Complex64>, masses: Vec<f64>, h: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "wave has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if masses.len() != grid.dims() {
            return Err(Error::Config(format!(
                "expected {} financial masses, got {}",
                grid.dims(),
                masses.len()
            )));
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::Config(format!("financial mass must be positive, got {m}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Config(format!("h must be positive, got {h}")));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Config("wave values must be finite".into()));
        }
        Ok(Self {
            grid,
            values,
            masses,
            h,
        })
    }

    /// Samples `f` at every grid node.
    pub fn from_fn(
        grid: SpatialGrid,
        masses: Vec<f64>,
        h: f64,
        f: impl Fn(&[f64]) -> Complex64,
    ) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self::new(grid, values, masses, h)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `|ψ|²` at every node.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// L2 norm `(∫|ψ|²)^{1/2}` by trapezoidal quadrature.
    pub fn norm(&self) -> f64 {
        self.grid.integrate(&self.density()).sqrt()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scaled(1.0 / n))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn same_grid(&self, other: &SpatialGrid) -> bool {
        &self.grid == other
    }
}
