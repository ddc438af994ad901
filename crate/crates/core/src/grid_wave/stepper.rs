//! Crank–Nicolson evolution of `ih ∂ψ/∂t = −Σ (h²/2m_j) ∂²_j ψ + Vψ`.
//!
//! Each step applies a Cayley transform `(1 + iτH)⁻¹(1 − iτH)` with
//! homogeneous Dirichlet boundaries, which is exactly unitary for the
//! discrete Hamiltonian. In 2D the Hamiltonian is split as
//! `H = (T₀ + V/2) + (T₁ + V/2)` and the two Cayley factors are applied in
//! Strang order, each being a batch of tridiagonal solves.

use num_complex::Complex64;

use super::field::WaveField;
use super::grid::SpatialGrid;
use super::potential::PotentialGrid;
use crate::error::{Error, Result};

/// Relative norm drift at which a run is declared unstable.
pub const NORM_DRIFT_LIMIT: f64 = 1e-3;

/// Pre-factored Cayley transform for one grid line.
#[derive(Clone, Debug)]
struct CayleyLine {
    /// Off-diagonal of `1 + iτH` (constant along the line).
    off: Complex64,
    /// Diagonal of `1 − iτH` for the interior unknowns.
    rhs_diag: Vec<Complex64>,
    /// Thomas-algorithm factors of `1 + iτH`.
    c_prime: Vec<Complex64>,
    inv_denom: Vec<Complex64>,
}

impl CayleyLine {
    /// `kinetic = h²/(2m dx²)`, `tau = dt_sub/(2h)`, `w` = on-site potential
    /// along the full line (boundary entries ignored).
    fn new(kinetic: f64, tau: f64, w: &[f64]) -> Self {
        let n = w.len() - 2;
        let i = Complex64::i();
        let off = -i * tau * kinetic;
        let lhs_diag: Vec<Complex64> = (1..=n)
            .map(|k| 1.0 + i * tau * (2.0 * kinetic + w[k]))
            .collect();
        let rhs_diag = (1..=n)
            .map(|k| 1.0 - i * tau * (2.0 * kinetic + w[k]))
            .collect();
        let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
        let mut inv_denom = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let denom = if k == 0 {
                lhs_diag[0]
            } else {
                lhs_diag[k] - off * c_prime[k - 1]
            };
            inv_denom[k] = 1.0 / denom;
            c_prime[k] = off * inv_denom[k];
        }
        Self {
            off,
            rhs_diag,
            c_prime,
            inv_denom,
        }
    }

    /// In-place `line ← (1 + iτH)⁻¹(1 − iτH) line`; `line` includes the two
    /// boundary nodes, which are set to zero.
    fn apply(&self, line: &mut [Complex64], rhs: &mut [Complex64]) {
        let n = self.rhs_diag.len();
        for k in 0..n {
            rhs[k] = self.rhs_diag[k] * line[k + 1] - self.off * (line[k] + line[k + 2]);
        }
        // Forward sweep, then back substitution.
        rhs[0] *= self.inv_denom[0];
        for k in 1..n {
            rhs[k] = (rhs[k] - self.off * rhs[k - 1]) * self.inv_denom[k];
        }
        for k in (0..n - 1).rev() {
            let next = rhs[k + 1];
            rhs[k] -= self.c_prime[k] * next;
        }
        line[0] = Complex64::new(0.0, 0.0);
        line[n + 1] = Complex64::new(0.0, 0.0);
        line[1..=n].copy_from_slice(&rhs[..n]);
    }
}

#[derive(Clone, Debug)]
enum Sweeps {
    Line(CayleyLine),
    Plane {
        half_axis0: Vec<CayleyLine>,
        full_axis1: Vec<CayleyLine>,
    },
}

/// Reusable Schrödinger time stepper bound to one grid, potential and `dt`.
#[derive(Clone, Debug)]
pub struct SchrodingerStepper {
    grid: SpatialGrid,
    masses: Vec<f64>,
    h: f64,
    dt: f64,
    sweeps: Sweeps,
    line_buf: Vec<Complex64>,
    rhs_buf: Vec<Complex64>,
}

impl SchrodingerStepper {
    pub fn new(psi: &WaveField, potential: &PotentialGrid, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let grid = psi.grid().clone();
        if potential.grid != grid {
            return Err(Error::Config(
                "potential and wave are defined on different grids".into(),
            ));
        }
        let h = psi.h();
        let masses = psi.masses().to_vec();
        let kinetic = |d: usize| h * h / (2.0 * masses[d] * grid.spacing(d).powi(2));
        let v = &potential.values;
        let sweeps = match grid.dims() {
            1 => Sweeps::Line(CayleyLine::new(kinetic(0), dt / (2.0 * h), v)),
            _ => {
                let build = |d: usize, sub_dt: f64| -> Vec<CayleyLine> {
                    grid.lines(d)
                        .into_iter()
                        .map(|(start, stride)| {
                            let w: Vec<f64> = (0..grid.axis(d).n)
                                .map(|k| 0.5 * v[start + k * stride])
                                .collect();
                            CayleyLine::new(kinetic(d), sub_dt / (2.0 * h), &w)
                        })
                        .collect()
                };
                Sweeps::Plane {
                    half_axis0: build(0, 0.5 * dt),
                    full_axis1: build(1, dt),
                }
            }
        };
        let longest = grid.axes().iter().map(|a| a.n).max().unwrap_or(0);
        Ok(Self {
            grid,
            masses,
            h,
            dt,
            sweeps,
            line_buf: vec![Complex64::new(0.0, 0.0); longest],
            rhs_buf: vec![Complex64::new(0.0, 0.0); longest],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn check_compatible(&self, psi: &WaveField) -> Result<()> {
        if !psi.same_grid(&self.grid) || psi.masses() != self.masses.as_slice() || psi.h() != self.h {
            return Err(Error::Config(
                "wave field does not match the stepper's grid, masses or h".into(),
            ));
        }
        Ok(())
    }

    fn sweep(
        values: &mut [Complex64],
        lines: &[(usize, usize)],
        n: usize,
        ops: &[CayleyLine],
        line_buf: &mut [Complex64],
        rhs_buf: &mut [Complex64],
    ) {
        for (&(start, stride), op) in lines.iter().zip(ops) {
            for k in 0..n {
                line_buf[k] = values[start + k * stride];
            }
            op.apply(&mut line_buf[..n], rhs_buf);
            for k in 0..n {
                values[start + k * stride] = line_buf[k];
            }
        }
    }

    /// Advances `psi` by one time step.
    pub fn step(&mut self, psi: &mut WaveField) -> Result<()> {
        self.check_compatible(psi)?;
        let values = psi.values_mut();
        match &self.sweeps {
            Sweeps::Line(op) => {
                let n = values.len();
                op.apply(values, &mut self.rhs_buf[..n]);
            }
            Sweeps::Plane {
                half_axis0,
                full_axis1,
            } => {
                let l0 = self.grid.lines(0);
                let l1 = self.grid.lines(1);
                let n0 = self.grid.axis(0).n;
                let n1 = self.grid.axis(1).n;
                Self::sweep(values, &l0, n0, half_axis0, &mut self.line_buf, &mut self.rhs_buf);
                Self::sweep(values, &l1, n1, full_axis1, &mut self.line_buf, &mut self.rhs_buf);
                Self::sweep(values, &l0, n0, half_axis0, &mut self.line_buf, &mut self.rhs_buf);
            }
        }
        Ok(())
    }

    /// Advances `psi` by `steps` steps, failing if the norm drifts by more
    /// than [`NORM_DRIFT_LIMIT`] relative to its starting value.
    pub fn evolve(&mut self, psi: &mut WaveField, steps: usize) -> Result<()> {
        let reference = psi.norm();
        for k in 1..=steps {
            self.step(psi)?;
            let norm = psi.norm();
            if !norm.is_finite() || (norm - reference).abs() > NORM_DRIFT_LIMIT * reference {
                return Err(Error::Numerical {
                    step: k,
                    reason: format!("norm drifted from {reference} to {norm}"),
                });
            }
        }
        Ok(())
    }
}

/// `ψ(t + steps·dt)` for a time-independent classical potential.
pub fn evolve_schrodinger(
    psi: &WaveField,
    potential: &PotentialGrid,
    dt: f64,
    steps: usize,
) -> Result<WaveField> {
    let mut stepper = SchrodingerStepper::new(psi, potential, dt)?;
    let mut out = psi.clone();
    stepper.evolve(&mut out, steps)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_wave::families::WaveSpec;
    use crate::grid_wave::grid::Axis;

    fn gaussian_1d(n: usize) -> WaveField {
        WaveSpec::Gaussian {
            center: vec![0.0],
            width: vec![1.0],
            momentum: vec![0.5],
        }
        .build(&SpatialGrid::line(-15.0, 15.0, n).unwrap(), &[1.0], 1.0)
        .unwrap()
    }

    #[test]
    fn zero_steps_is_identity() {
        let psi = gaussian_1d(301);
        let v = PotentialGrid::zero(psi.grid());
        assert_eq!(evolve_schrodinger(&psi, &v, 0.01, 0).unwrap(), psi);
    }

    #[test]
    fn grid_mismatch_is_a_config_error() {
        let psi = gaussian_1d(301);
        let other = SpatialGrid::line(-15.0, 15.0, 300).unwrap();
        let v = PotentialGrid::zero(&other);
        assert!(matches!(
            evolve_schrodinger(&psi, &v, 0.01, 1),
            Err(Error::Config(_))
        ));
        assert!(evolve_schrodinger(&psi, &PotentialGrid::zero(psi.grid()), -1.0, 1).is_err());
    }

    #[test]
    fn unitary_in_one_and_two_dimensions() {
        let psi = gaussian_1d(401);
        let v: Vec<f64> = (0..psi.grid().len())
            .map(|i| 0.3 * psi.grid().point(i)[0].powi(2))
            .collect();
        let v = PotentialGrid::classical(psi.grid().clone(), v).unwrap();
        let out = evolve_schrodinger(&psi, &v, 0.01, 1000).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-8);

        let g = SpatialGrid::plane(Axis::new(-6.0, 6.0, 81), Axis::new(-6.0, 6.0, 97)).unwrap();
        let psi2 = WaveSpec::Entangled2d {
            coupling: 1.0,
            envelope: 0.5,
        }
        .build(&g, &[1.0, 2.0], 1.0)
        .unwrap();
        let v2: Vec<f64> = (0..g.len())
            .map(|i| {
                let p = g.point(i);
                p[0] * p[0] + 0.5 * p[1] * p[1]
            })
            .collect();
        let v2 = PotentialGrid::classical(g, v2).unwrap();
        let out2 = evolve_schrodinger(&psi2, &v2, 0.01, 200).unwrap();
        assert!((out2.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn separable_2d_evolution_matches_1d_product() {
        // With V = 0 the axes commute, so n Strang steps equal 2n half steps
        // along axis 0 times n full steps along axis 1.
        let ax = Axis::new(-8.0, 8.0, 65);
        let g2 = SpatialGrid::plane(ax.clone(), ax.clone()).unwrap();
        let g1 = SpatialGrid::new(vec![ax]).unwrap();
        let spec1 = WaveSpec::Gaussian {
            center: vec![0.5],
            width: vec![1.0],
            momentum: vec![0.3],
        };
        let spec2 = WaveSpec::Gaussian {
            center: vec![0.5, 0.5],
            width: vec![1.0, 1.0],
            momentum: vec![0.3, 0.3],
        };
        let a = spec1.build(&g1, &[1.0], 1.0).unwrap();
        let b = spec2.build(&g2, &[1.0, 1.0], 1.0).unwrap();
        let ax0 = evolve_schrodinger(&a, &PotentialGrid::zero(&g1), 0.01, 40).unwrap();
        let ax1 = evolve_schrodinger(&a, &PotentialGrid::zero(&g1), 0.02, 20).unwrap();
        let b1 = evolve_schrodinger(&b, &PotentialGrid::zero(&g2), 0.02, 20).unwrap();
        for i in 0..65 {
            for j in 0..65 {
                let prod = ax0.values()[i] * ax1.values()[j];
                assert!((b1.values()[i * 65 + j] - prod).norm() < 1e-12);
            }
        }
    }
}
