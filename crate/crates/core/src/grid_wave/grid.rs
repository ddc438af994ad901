use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest number of nodes accepted along any axis.
pub const MIN_POINTS: usize = 16;

/// One uniformly sampled price axis `[lo, hi]` with `n` nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        // Pin the last node to `hi` so that symmetric windows stay symmetric.
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }
}

/// Off-grid interpolation scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    #[default]
    Linear,
    /// Catmull–Rom cubic per axis; falls back to linear in the outermost cells.
    Cubic,
}

/// Configuration price space sampled on a uniform 1D or 2D grid.
///
/// Nodes are stored row-major: in 2D the flat index is `i0 * n1 + i1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct SpatialGrid {
    axes: Vec<Axis>,
}

#[derive(Deserialize)]
struct RawGrid {
    axes: Vec<Axis>,
}

impl TryFrom<RawGrid> for SpatialGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        Self::new(raw.axes)
    }
}

impl SpatialGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::Config(format!(
                "grid must have 1 or 2 dimensions, got {}",
                axes.len()
            )));
        }
        for (d, a) in axes.iter().enumerate() {
            if a.n < MIN_POINTS {
                return Err(Error::Config(format!(
                    "grid axis {d} has {} points, need at least {MIN_POINTS}",
                    a.n
                )));
            }
            if !(a.lo.is_finite() && a.hi.is_finite() && a.lo < a.hi) {
                return Err(Error::Config(format!(
                    "grid axis {d} needs finite lo < hi, got [{}, {}]",
                    a.lo, a.hi
                )));
            }
        }
        Ok(Self { axes })
    }

    pub fn line(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![Axis::new(lo, hi, n)])
    }

    pub fn plane(x: Axis, y: Axis) -> Result<Self> {
        Self::new(vec![x, y])
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, d: usize) -> &Axis {
        &self.axes[d]
    }

    pub fn spacing(&self, d: usize) -> f64 {
        self.axes[d].spacing()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Distance in the flat array between neighbours along axis `d`.
    pub fn stride(&self, d: usize) -> usize {
        self.axes[d + 1..].iter().map(|a| a.n).product()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .enumerate()
            .map(|(d, &i)| i * self.stride(d))
            .sum()
    }

    /// Per-axis indices of a flat index; unused trailing entries are zero.
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        match self.dims() {
            1 => [flat, 0],
            _ => {
                let n1 = self.axes[1].n;
                [flat / n1, flat % n1]
            }
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mi = self.multi_index(flat);
        (0..self.dims()).map(|d| self.axes[d].coord(mi[d])).collect()
    }

    /// Composite-trapezoid quadrature weight of a node.
    pub fn trapezoid_weight(&self, flat: usize) -> f64 {
        let mi = self.multi_index(flat);
        (0..self.dims())
            .map(|d| {
                let a = &self.axes[d];
                let edge = mi[d] == 0 || mi[d] + 1 == a.n;
                if edge {
                    0.5 * a.spacing()
                } else {
                    a.spacing()
                }
            })
            .product()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        f.iter()
            .enumerate()
            .map(|(i, v)| self.trapezoid_weight(i) * v)
            .sum()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims()
            && self
                .axes
                .iter()
                .zip(x)
                .all(|(a, &v)| v >= a.lo && v <= a.hi)
    }

    /// Every grid line along axis `d`, as `(first flat index, stride)`.
    pub fn lines(&self, d: usize) -> Vec<(usize, usize)> {
        let stride = self.stride(d);
        match (self.dims(), d) {
            (1, _) => vec![(0, 1)],
            (_, 0) => (0..self.axes[1].n).map(|j| (j, stride)).collect(),
            _ => (0..self.axes[0].n)
                .map(|i| (i * self.axes[1].n, stride))
                .collect(),
        }
    }

    /// Lower-corner cell indices and fractional offsets of `x`, or `None` if
    /// `x` is outside the grid.
    pub fn locate(&self, x: &[f64]) -> Option<([usize; 2], [f64; 2])> {
        if !self.contains(x) {
            return None;
        }
        let mut cell = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for (d, a) in self.axes.iter().enumerate() {
            let s = (x[d] - a.lo) / a.spacing();
            let i = (s.floor() as usize).min(a.n - 2);
            cell[d] = i;
            frac[d] = s - i as f64;
        }
        Some((cell, frac))
    }

    /// Flat indices of the corners of the cell containing `x`.
    pub fn cell_corners(&self, x: &[f64]) -> Option<Vec<usize>> {
        let (cell, _) = self.locate(x)?;
        Some(match self.dims() {
            1 => vec![cell[0], cell[0] + 1],
            _ => {
                let mut v = Vec::with_capacity(4);
                for a in 0..2 {
                    for b in 0..2 {
                        v.push(self.flat_index(&[cell[0] + a, cell[1] + b]));
                    }
                }
                v
            }
        })
    }

    /// Evaluates a nodal field at an off-grid point.
    pub fn interpolate(&self, field: &[f64], x: &[f64], method: Interpolation) -> Option<f64> {
        let (cell, frac) = self.locate(x)?;
        let weights: Vec<Vec<(usize, f64)>> = (0..self.dims())
            .map(|d| axis_weights(self.axes[d].n, cell[d], frac[d], method))
            .collect();
        let value = match self.dims() {
            1 => weights[0].iter().map(|&(i, w)| w * field[i]).sum(),
            _ => {
                let n1 = self.axes[1].n;
                let mut acc = 0.0;
                for &(i, wi) in &weights[0] {
                    for &(j, wj) in &weights[1] {
                        acc += wi * wj * field[i * n1 + j];
                    }
                }
                acc
            }
        };
        Some(value)
    }
}

fn axis_weights(n: usize, i: usize, t: f64, method: Interpolation) -> Vec<(usize, f64)> {
    let cubic_ok = method == Interpolation::Cubic && i >= 1 && i + 2 < n;
    if !cubic_ok {
        return vec![(i, 1.0 - t), (i + 1, t)];
    }
    let t2 = t * t;
    let t3 = t2 * t;
    vec![
        (i - 1, 0.5 * (-t3 + 2.0 * t2 - t)),
        (i, 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0)),
        (i + 1, 0.5 * (-3.0 * t3 + 4.0 * t2 + t)),
        (i + 2, 0.5 * (t3 - t2)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_inverted_axes() {
        assert!(SpatialGrid::line(0.0, 1.0, 15).is_err());
        assert!(SpatialGrid::line(1.0, 0.0, 32).is_err());
        assert!(SpatialGrid::new(vec![Axis::new(0.0, 1.0, 16); 3]).is_err());
        assert!(SpatialGrid::line(0.0, 1.0, 16).is_ok());
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let g = SpatialGrid::line(-1.0, 3.0, 41).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|i| 2.0 * g.point(i)[0] + 1.0).collect();
        assert!((g.integrate(&f) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn plane_indexing_round_trips() {
        let g = SpatialGrid::plane(Axis::new(0.0, 1.0, 16), Axis::new(-2.0, 2.0, 20)).unwrap();
        assert_eq!(g.len(), 320);
        let flat = g.flat_index(&[3, 7]);
        assert_eq!(g.multi_index(flat), [3, 7]);
        let p = g.point(flat);
        assert!((p[0] - 3.0 / 15.0).abs() < 1e-15);
        assert!((p[1] - (-2.0 + 7.0 * 4.0 / 19.0)).abs() < 1e-15);
        assert_eq!(g.lines(0).len(), 20);
        assert_eq!(g.lines(1).len(), 16);
    }

    #[test]
    fn bilinear_is_exact_for_bilinear_fields() {
        let g = SpatialGrid::plane(Axis::new(-1.0, 1.0, 17), Axis::new(0.0, 2.0, 21)).unwrap();
        let f: Vec<f64> = (0..g.len())
            .map(|i| {
                let p = g.point(i);
                1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1]
            })
            .collect();
        let x = [0.3137, 1.234];
        let exact = 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
        let v = g.interpolate(&f, &x, Interpolation::Linear).unwrap();
        assert!((v - exact).abs() < 1e-12);
        assert!(g.interpolate(&f, &[1.5, 1.0], Interpolation::Linear).is_none());
    }

    #[test]
    fn cubic_is_exact_for_cubics_in_the_interior() {
        let g = SpatialGrid::line(-2.0, 2.0, 33).unwrap();
        let f: Vec<f64> = (0..g.len())
            .map(|i| {
                let q = g.point(i)[0];
                q * q * q - q
            })
            .collect();
        let q = 0.377;
        let v = g.interpolate(&f, &[q], Interpolation::Cubic).unwrap();
        // Catmull–Rom is third-order accurate.
        assert!((v - (q * q * q - q)).abs() < 1e-3);
    }
}
