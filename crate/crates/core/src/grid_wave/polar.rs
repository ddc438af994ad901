//! Amplitude/phase split of the wave and the forces derived from it.
//!
//! With `ψ = R·exp(iS/h)` the quantum potential is
//! `U = −Σ_j (h²/2m_j)·(∂²_j R)/R` and the mental force is `g = −∇U`.
//! Both are invariant under `ψ → cψ`, so the normalization of the wave does
//! not matter.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::field::WaveField;
use super::grid::SpatialGrid;
use super::potential::{ForceGrid, PotentialGrid, PotentialKind, VectorField};
use super::stencil;

/// Nodes with `R < NODAL_FLOOR_FRACTION · max R` are treated as nodal.
pub const NODAL_FLOOR_FRACTION: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct PolarDecomposition {
    pub grid: SpatialGrid,
    pub h: f64,
    /// `R = |ψ|`
    pub amplitude: Vec<f64>,
    /// Unwrapped phase action `S`, in units of `h`·radians.
    pub phase: Vec<f64>,
    pub nodal_mask: Vec<bool>,
    pub floor: f64,
}

impl PolarDecomposition {
    /// `R·exp(iS/h)` at node `i`.
    pub fn reconstruct(&self, i: usize) -> Complex64 {
        Complex64::from_polar(self.amplitude[i], self.phase[i] / self.h)
    }

    /// Amplitude with nodal values lifted to the floor.
    pub fn floored_amplitude(&self) -> Vec<f64> {
        self.amplitude.iter().map(|r| r.max(self.floor)).collect()
    }

    pub fn nodal_count(&self) -> usize {
        self.nodal_mask.iter().filter(|m| **m).count()
    }

    /// `∇S` on the grid.
    pub fn phase_gradient(&self) -> VectorField {
        gradient(&self.grid, &self.phase, &self.nodal_mask)
    }
}

/// Splits `ψ` into amplitude and unwrapped phase.
///
/// Phases are unwrapped line by line from the domain centre outward so that
/// adjacent nodes differ by at most `πh`; the gauge puts `S` at the centre
/// node in `[0, 2πh)`.
pub fn polar_decompose(psi: &WaveField) -> PolarDecomposition {
    let grid = psi.grid().clone();
    let h = psi.h();
    let amplitude: Vec<f64> = psi.values().iter().map(|v| v.norm()).collect();
    let max_r = amplitude.iter().cloned().fold(0.0, f64::max);
    let floor = NODAL_FLOOR_FRACTION * max_r;
    let nodal_mask = amplitude.iter().map(|&r| r < floor).collect();
    let raw: Vec<f64> = psi.values().iter().map(|v| h * v.arg()).collect();
    let phase = unwrap(&grid, &raw, h);
    PolarDecomposition {
        grid,
        h,
        amplitude,
        phase,
        nodal_mask,
        floor,
    }
}

fn unwrap(grid: &SpatialGrid, raw: &[f64], h: f64) -> Vec<f64> {
    let period = 2.0 * PI * h;
    let mut out = raw.to_vec();
    let centre = |d: usize| (grid.axis(d).n - 1) / 2;
    let c0 = centre(0);
    let first = grid.stride(0);
    let anchor_idx = match grid.dims() {
        1 => c0,
        _ => grid.flat_index(&[c0, centre(1)]),
    };
    out[anchor_idx] = raw[anchor_idx].rem_euclid(period);

    // 1D: the single line. 2D: the line along axis 0 through the centre,
    // then every line along axis 1 anchored on it.
    match grid.dims() {
        1 => unwrap_line(&mut out, raw, 0, 1, grid.axis(0).n, c0, period),
        _ => {
            let c1 = centre(1);
            unwrap_line(&mut out, raw, c1, first, grid.axis(0).n, c0, period);
            let n1 = grid.axis(1).n;
            for i in 0..grid.axis(0).n {
                let start = i * n1;
                unwrap_line(&mut out, raw, start, 1, n1, c1, period);
            }
        }
    }
    out
}

/// Unwraps the line `(start, stride, n)` outward from position `anchor`,
/// whose value in `out` is already fixed.
fn unwrap_line(
    out: &mut [f64],
    raw: &[f64],
    start: usize,
    stride: usize,
    n: usize,
    anchor: usize,
    period: f64,
) {
    let idx = |k: usize| start + k * stride;
    let fix = |prev: f64, value: f64| value + period * ((prev - value) / period).round();
    for k in anchor + 1..n {
        out[idx(k)] = fix(out[idx(k - 1)], raw[idx(k)]);
    }
    for k in (0..anchor).rev() {
        out[idx(k)] = fix(out[idx(k + 1)], raw[idx(k)]);
    }
}

/// Central-difference gradient; a node is flagged when its stencil touches a
/// flagged input node.
fn gradient(grid: &SpatialGrid, f: &[f64], mask: &[bool]) -> VectorField {
    let mut components = Vec::with_capacity(grid.dims());
    let mut flagged = vec![false; grid.len()];
    for d in 0..grid.dims() {
        let n = grid.axis(d).n;
        let dx = grid.spacing(d);
        let mut out = vec![0.0; grid.len()];
        for (start, stride) in grid.lines(d) {
            stencil::first_derivative(f, start, stride, n, dx, &mut out);
            propagate_mask(mask, &mut flagged, start, stride, n, 1);
        }
        components.push(out);
    }
    VectorField {
        grid: grid.clone(),
        components,
        flagged,
    }
}

fn propagate_mask(
    mask: &[bool],
    flagged: &mut [bool],
    start: usize,
    stride: usize,
    n: usize,
    order: usize,
) {
    for i in 0..n {
        let (a, b) = stencil::span(i, n, order);
        if (a..b).any(|k| mask[start + k * stride]) {
            flagged[start + i * stride] = true;
        }
    }
}

/// `U = −Σ_j (h²/2m_j)·(∂²_j R)/R` with `R` replaced by `max(R, floor)`.
///
/// Nodes that are nodal, or whose stencil reaches a nodal node, are flagged.
pub fn quantum_potential(decomp: &PolarDecomposition, masses: &[f64], h: f64) -> PotentialGrid {
    let grid = &decomp.grid;
    let r = decomp.floored_amplitude();
    let mut values = vec![0.0; grid.len()];
    let mut flagged = decomp.nodal_mask.clone();
    let mut second = vec![0.0; grid.len()];
    for d in 0..grid.dims() {
        let n = grid.axis(d).n;
        let dx = grid.spacing(d);
        let coeff = h * h / (2.0 * masses[d]);
        for (start, stride) in grid.lines(d) {
            stencil::second_derivative(&r, start, stride, n, dx, &mut second);
            propagate_mask(&decomp.nodal_mask, &mut flagged, start, stride, n, 2);
        }
        for i in 0..grid.len() {
            values[i] -= coeff * second[i] / r[i];
        }
    }
    PotentialGrid {
        grid: grid.clone(),
        values,
        kind: PotentialKind::Quantum,
        flagged,
    }
}

/// `g = −∇U`; flags propagate from `U` through the stencil.
pub fn mental_force(u: &PotentialGrid) -> ForceGrid {
    let mut g = gradient(&u.grid, &u.values, &u.flagged);
    for c in &mut g.components {
        c.iter_mut().for_each(|v| *v = -*v);
    }
    g
}

/// Guidance velocity `∇S / m`.
pub fn guidance_velocity(decomp: &PolarDecomposition, masses: &[f64]) -> VectorField {
    let mut v = decomp.phase_gradient();
    for (c, m) in v.components.iter_mut().zip(masses) {
        c.iter_mut().for_each(|x| *x /= m);
    }
    v
}

/// Max-node residual of `∂(R²)/∂t + Σ_j (1/m_j) ∂_j(R² ∂_j S)`, with a
/// forward difference in time and second-order centred differences in space
/// evaluated on `psi_before`.
///
/// Boundary nodes and nodes within two cells of a nodal node are skipped.
pub fn continuity_residual(psi_before: &WaveField, psi_after: &WaveField, dt: f64) -> f64 {
    let grid = psi_before.grid();
    debug_assert!(psi_after.same_grid(grid));
    let before = polar_decompose(psi_before);
    let after = polar_decompose(psi_after);
    let rho_b: Vec<f64> = before.amplitude.iter().map(|r| r * r).collect();
    let rho_a: Vec<f64> = after.amplitude.iter().map(|r| r * r).collect();

    let mut residual: Vec<f64> = rho_a.iter().zip(&rho_b).map(|(a, b)| (a - b) / dt).collect();
    let mut skip = vec![false; grid.len()];
    for d in 0..grid.dims() {
        let n = grid.axis(d).n;
        let dx = grid.spacing(d);
        let m = psi_before.masses()[d];
        for (start, stride) in grid.lines(d) {
            let at = |k: usize| start + k * stride;
            let mut flux = vec![0.0; n];
            for k in 1..n - 1 {
                let ds = (before.phase[at(k + 1)] - before.phase[at(k - 1)]) / (2.0 * dx);
                flux[k] = rho_b[at(k)] * ds / m;
            }
            for k in 0..n {
                if k < 2 || k + 2 >= n {
                    skip[at(k)] = true;
                    continue;
                }
                residual[at(k)] += (flux[k + 1] - flux[k - 1]) / (2.0 * dx);
                let near_node = (k - 2..=k + 2)
                    .any(|j| before.nodal_mask[at(j)] || after.nodal_mask[at(j)]);
                if near_node {
                    skip[at(k)] = true;
                }
            }
        }
    }
    residual
        .iter()
        .zip(&skip)
        .filter(|(_, s)| !**s)
        .map(|(r, _)| r.abs())
        .fold(0.0, f64::max)
}
