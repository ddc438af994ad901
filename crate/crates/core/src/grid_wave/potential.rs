use serde::{Deserialize, Serialize};

use super::grid::{Interpolation, SpatialGrid};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    /// Classical ("hard") potential `V`.
    Classical,
    /// Quantum (mental) potential `U`.
    Quantum,
}

/// Scalar potential sampled on a grid. `flagged` marks nodes whose value was
/// computed from a regularized amplitude.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialGrid {
    pub grid: SpatialGrid,
    pub values: Vec<f64>,
    pub kind: PotentialKind,
    pub flagged: Vec<bool>,
}

impl PotentialGrid {
    pub fn classical(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "potential has {} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("classical potential must be finite".into()));
        }
        let n = values.len();
        Ok(Self {
            grid,
            values,
            kind: PotentialKind::Classical,
            flagged: vec![false; n],
        })
    }

    pub fn zero(grid: &SpatialGrid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
            kind: PotentialKind::Classical,
            flagged: vec![false; grid.len()],
        }
    }
}

/// Vector field on a grid (mental force, guidance velocity, ...), one
/// component array per dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: SpatialGrid,
    pub components: Vec<Vec<f64>>,
    pub flagged: Vec<bool>,
}

/// The quantum force `g = −∇U` on the grid.
pub type ForceGrid = VectorField;

/// Value of a vector field at an off-grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    pub value: Vec<f64>,
    /// The enclosing cell has at least one flagged corner.
    pub flagged: bool,
}

impl VectorField {
    pub fn zeros(grid: &SpatialGrid) -> Self {
        Self {
            grid: grid.clone(),
            components: vec![vec![0.0; grid.len()]; grid.dims()],
            flagged: vec![false; grid.len()],
        }
    }

    /// Interpolates every component at `x`; `None` if `x` is off the grid.
    pub fn probe(&self, x: &[f64], method: Interpolation) -> Option<Probe> {
        let corners = self.grid.cell_corners(x)?;
        let value = self
            .components
            .iter()
            .map(|c| self.grid.interpolate(c, x, method))
            .collect::<Option<Vec<f64>>>()?;
        let flagged = corners.iter().any(|&i| self.flagged[i]);
        Some(Probe { value, flagged })
    }

    /// Pointwise `(1 − w)·self + w·other` on identical grids.
    pub fn lerp(&self, other: &VectorField, w: f64) -> VectorField {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y).collect())
            .collect();
        let flagged = self
            .flagged
            .iter()
            .zip(&other.flagged)
            .map(|(a, b)| *a || *b)
            .collect();
        VectorField {
            grid: self.grid.clone(),
            components,
            flagged,
        }
    }
}
