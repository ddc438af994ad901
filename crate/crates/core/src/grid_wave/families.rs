//! Named initial waves used by scenarios and tests.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::WaveField;
use super::grid::SpatialGrid;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum WaveSpec {
    /// Product Gaussian `Π exp(−(q−c)²/(4σ²))` with position spread `σ`
    /// of `|ψ|²`, optionally modulated by `exp(i k·q / h)`.
    Gaussian {
        center: Vec<f64>,
        width: Vec<f64>,
        #[serde(default)]
        momentum: Vec<f64>,
    },
    /// Same as `gaussian`; kept as a separate name because the carrier
    /// momentum is mandatory here.
    PlaneModulatedGaussian {
        center: Vec<f64>,
        width: Vec<f64>,
        momentum: Vec<f64>,
    },
    /// Ground state of `−Σ (h²/2m)∂² + stiffness·Σ q²`.
    HarmonicGround {
        #[serde(default = "one")]
        stiffness: f64,
    },
    /// Real polynomial-type amplitudes in one dimension.
    PolynomialAmplitude { shape: PolynomialShape },
    /// `exp(i·coupling·q₁q₂/h)·exp(−envelope·(q₁²+q₂²))` on a 2D grid.
    #[serde(rename = "entangled-2d")]
    Entangled2d {
        #[serde(default = "one")]
        coupling: f64,
        #[serde(default = "one")]
        envelope: f64,
    },
    /// Constant amplitude.
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolynomialShape {
    /// `R = q² + d`
    QuadraticPlus { d: f64 },
    /// `R = q⁴ + b`
    QuarticPlus { b: f64 },
    /// `ψ = (q+1)² exp(−q²/2)`
    ShiftedSquareGaussian,
}

fn one() -> f64 {
    1.0
}

impl PolynomialShape {
    pub fn amplitude(&self, q: f64) -> f64 {
        match *self {
            PolynomialShape::QuadraticPlus { d } => q * q + d,
            PolynomialShape::QuarticPlus { b } => q.powi(4) + b,
            PolynomialShape::ShiftedSquareGaussian => (q + 1.0).powi(2) * (-q * q / 2.0).exp(),
        }
    }
}

impl WaveSpec {
    pub fn dims_required(&self) -> Option<usize> {
        match self {
            WaveSpec::Gaussian { center, .. } | WaveSpec::PlaneModulatedGaussian { center, .. } => {
                Some(center.len())
            }
            WaveSpec::PolynomialAmplitude { .. } => Some(1),
            WaveSpec::Entangled2d { .. } => Some(2),
            WaveSpec::HarmonicGround { .. } | WaveSpec::Constant { .. } => None,
        }
    }

    /// Samples the family on `grid` and normalizes it.
    pub fn build(&self, grid: &SpatialGrid, masses: &[f64], h: f64) -> Result<WaveField> {
        let dims = grid.dims();
        if let Some(d) = self.dims_required() {
            if d != dims {
                return Err(Error::Config(format!(
                    "wave family needs a {d}-dimensional grid, got {dims}"
                )));
            }
        }
        let wave = match self {
            WaveSpec::Gaussian {
                center,
                width,
                momentum,
            }
            | WaveSpec::PlaneModulatedGaussian {
                center,
                width,
                momentum,
            } => {
                if width.len() != dims || width.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::Config("gaussian width must be positive per dimension".into()));
                }
                let k: Vec<f64> = if momentum.is_empty() {
                    vec![0.0; dims]
                } else if momentum.len() == dims {
                    momentum.clone()
                } else {
                    return Err(Error::Config("gaussian momentum has wrong dimension".into()));
                };
                WaveField::from_fn(grid.clone(), masses.to_vec(), h, |q| {
                    let mut env = 0.0;
                    let mut phase = 0.0;
                    for d in 0..dims {
                        let z = q[d] - center[d];
                        env -= z * z / (4.0 * width[d] * width[d]);
                        phase += k[d] * q[d] / h;
                    }
                    Complex64::from_polar(env.exp(), phase)
                })?
            }
            WaveSpec::HarmonicGround { stiffness } => {
                if !(*stiffness > 0.0) {
                    return Err(Error::Config("harmonic stiffness must be positive".into()));
                }
                WaveField::from_fn(grid.clone(), masses.to_vec(), h, |q| {
                    let mut e = 0.0;
                    for d in 0..dims {
                        let omega = (2.0 * stiffness / masses[d]).sqrt();
                        e -= masses[d] * omega * q[d] * q[d] / (2.0 * h);
                    }
                    Complex64::new(e.exp(), 0.0)
                })?
            }
            WaveSpec::PolynomialAmplitude { shape } => {
                WaveField::from_fn(grid.clone(), masses.to_vec(), h, |q| {
                    Complex64::new(shape.amplitude(q[0]), 0.0)
                })?
            }
            WaveSpec::Entangled2d { coupling, envelope } => {
                WaveField::from_fn(grid.clone(), masses.to_vec(), h, |q| {
                    let env = (-envelope * (q[0] * q[0] + q[1] * q[1])).exp();
                    Complex64::from_polar(env, coupling * q[0] * q[1] / h)
                })?
            }
            WaveSpec::Constant { value } => {
                WaveField::from_fn(grid.clone(), masses.to_vec(), h, |_| Complex64::new(*value, 0.0))?
            }
        };
        wave.normalize()
    }
}
