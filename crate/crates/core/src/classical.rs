//! Classical price phase space: states, financial energy and Hamiltonian
//! dynamics `q̇ = p/m`, `ṗ = −∂V/∂q` under "hard" economic potentials.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_wave::{Interpolation, PotentialGrid, SpatialGrid};
use crate::trajectory::Trajectory;

/// A point `(q, p)` of the price phase space at model time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl MarketState {
    pub fn new(t: f64, q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::Config(format!(
                "price and momentum dimensions differ ({} vs {})",
                q.len(),
                p.len()
            )));
        }
        if q.iter().chain(&p).any(|v| !v.is_finite()) || !t.is_finite() {
            return Err(Error::Config("market state must be finite".into()));
        }
        Ok(Self { t, q, p })
    }

    pub fn at_rest(q: Vec<f64>) -> Self {
        let p = vec![0.0; q.len()];
        Self { t: 0.0, q, p }
    }

    pub fn dims(&self) -> usize {
        self.q.len()
    }
}

/// Financial masses `m_j > 0`, one per asset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FinancialMass(Vec<f64>);

impl FinancialMass {
    pub fn new(m: Vec<f64>) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::Config("at least one financial mass is required".into()));
        }
        if let Some(bad) = m.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Config(format!("financial mass must be positive, got {bad}")));
        }
        Ok(Self(m))
    }

    pub fn uniform(m: f64, dims: usize) -> Result<Self> {
        Self::new(vec![m; dims])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for FinancialMass {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FinancialMass> for Vec<f64> {
    fn from(m: FinancialMass) -> Self {
        m.0
    }
}

/// Scalar function of time used to modulate potentials and masses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    Constant { value: f64 },
    Linear { offset: f64, slope: f64 },
    /// `offset + amplitude·sin(omega·t + phase)`
    Sine {
        offset: f64,
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `before` for `t < at`, `after` from `at` on.
    Step { at: f64, before: f64, after: f64 },
}

impl Schedule {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Schedule::Constant { value } => value,
            Schedule::Linear { offset, slope } => offset + slope * t,
            Schedule::Sine {
                offset,
                amplitude,
                omega,
                phase,
            } => offset + amplitude * (omega * t + phase).sin(),
            Schedule::Step { at, before, after } => {
                if t < at {
                    before
                } else {
                    after
                }
            }
        }
    }

    /// Lower bound of the schedule over `[t0, t1]`.
    pub fn lower_bound(&self, t0: f64, t1: f64) -> f64 {
        match *self {
            Schedule::Constant { value } => value,
            Schedule::Linear { .. } => self.eval(t0).min(self.eval(t1)),
            Schedule::Sine {
                offset,
                amplitude,
                omega,
                ..
            } => {
                if omega.abs() * (t1 - t0) >= 2.0 * PI {
                    offset - amplitude.abs()
                } else {
                    // Dense sampling is enough for a floor check on a short window.
                    (0..=1000)
                        .map(|k| self.eval(t0 + (t1 - t0) * k as f64 / 1000.0))
                        .fold(f64::INFINITY, f64::min)
                }
            }
            Schedule::Step { before, after, at } => {
                if at <= t0 {
                    after
                } else if at > t1 {
                    before
                } else {
                    before.min(after)
                }
            }
        }
    }
}

fn unit() -> Schedule {
    Schedule::Constant { value: 1.0 }
}

fn zero() -> Schedule {
    Schedule::Constant { value: 0.0 }
}

/// Classical ("hard") financial potential `V(t, q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ClassicalPotential {
    /// `V ≡ 0`
    Free,
    /// `V = Σ_j q_j²`
    Quadratic,
    /// `V = Σ_{i<j} (q_i − q_j)²`
    PairwiseSpread,
    /// Values on a grid, interpolated multilinearly.
    Tabulated { grid: SpatialGrid, values: Vec<f64> },
    /// `V(t, q) = scale(t) · base(q − shift(t))`, shift applied to every price.
    TimeDependent {
        base: Box<ClassicalPotential>,
        #[serde(default = "unit")]
        scale: Schedule,
        #[serde(default = "zero")]
        shift: Schedule,
    },
}

impl ClassicalPotential {
    pub fn tag(&self) -> &'static str {
        match self {
            ClassicalPotential::Free => "free",
            ClassicalPotential::Quadratic => "quadratic",
            ClassicalPotential::PairwiseSpread => "pairwise-spread",
            ClassicalPotential::Tabulated { .. } => "tabulated",
            ClassicalPotential::TimeDependent { .. } => "time-dependent",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassicalPotential::Tabulated { grid, values } => {
                if values.len() != grid.len() {
                    return Err(Error::Config(format!(
                        "tabulated potential has {} values for {} nodes",
                        values.len(),
                        grid.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("tabulated potential must be finite".into()));
                }
                Ok(())
            }
            ClassicalPotential::TimeDependent { base, .. } => base.validate(),
            _ => Ok(()),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, ClassicalPotential::TimeDependent { .. })
    }

    pub fn value(&self, t: f64, q: &[f64]) -> Result<f64> {
        Ok(match self {
            ClassicalPotential::Free => 0.0,
            ClassicalPotential::Quadratic => q.iter().map(|x| x * x).sum(),
            ClassicalPotential::PairwiseSpread => {
                let mut v = 0.0;
                for i in 0..q.len() {
                    for j in i + 1..q.len() {
                        v += (q[i] - q[j]).powi(2);
                    }
                }
                v
            }
            ClassicalPotential::Tabulated { grid, values } => grid
                .interpolate(values, q, Interpolation::Linear)
                .ok_or_else(|| Error::Domain {
                    position: q.to_vec(),
                })?,
            ClassicalPotential::TimeDependent { base, scale, shift } => {
                let s = shift.eval(t);
                let shifted: Vec<f64> = q.iter().map(|x| x - s).collect();
                scale.eval(t) * base.value(t, &shifted)?
            }
        })
    }

    /// Newton force `f_j = −∂V/∂q_j`.
    pub fn force(&self, t: f64, q: &[f64]) -> Result<Vec<f64>> {
        Ok(match self {
            ClassicalPotential::Free => vec![0.0; q.len()],
            ClassicalPotential::Quadratic => q.iter().map(|x| -2.0 * x).collect(),
            ClassicalPotential::PairwiseSpread => (0..q.len())
                .map(|k| -2.0 * q.iter().map(|x| q[k] - x).sum::<f64>())
                .collect(),
            ClassicalPotential::Tabulated { grid, values } => {
                if !grid.contains(q) {
                    return Err(Error::Domain {
                        position: q.to_vec(),
                    });
                }
                let mut f = Vec::with_capacity(q.len());
                for d in 0..q.len() {
                    let dx = grid.spacing(d);
                    let axis = grid.axis(d);
                    let mut hi = q.to_vec();
                    let mut lo = q.to_vec();
                    hi[d] = (q[d] + dx).min(axis.hi);
                    lo[d] = (q[d] - dx).max(axis.lo);
                    let vh = grid.interpolate(values, &hi, Interpolation::Linear).unwrap();
                    let vl = grid.interpolate(values, &lo, Interpolation::Linear).unwrap();
                    f.push(-(vh - vl) / (hi[d] - lo[d]));
                }
                f
            }
            ClassicalPotential::TimeDependent { base, scale, shift } => {
                let s = shift.eval(t);
                let shifted: Vec<f64> = q.iter().map(|x| x - s).collect();
                let c = scale.eval(t);
                base.force(t, &shifted)?.into_iter().map(|f| c * f).collect()
            }
        })
    }

    /// Samples `V(t, ·)` on `grid` for the Schrödinger stepper.
    pub fn tabulate(&self, grid: &SpatialGrid, t: f64) -> Result<PotentialGrid> {
        let values = (0..grid.len())
            .map(|i| self.value(t, &grid.point(i)))
            .collect::<Result<Vec<f64>>>()?;
        PotentialGrid::classical(grid.clone(), values)
    }
}

/// Newton force `−∂V/∂q` at `(t, q)`.
pub fn newton_force(potential: &ClassicalPotential, q: &[f64], t: f64) -> Result<Vec<f64>> {
    potential.force(t, q)
}

/// Financial energy `½ Σ p_j²/m_j + V(t, q)`.
pub fn financial_energy(
    state: &MarketState,
    masses: &FinancialMass,
    potential: &ClassicalPotential,
) -> Result<f64> {
    check_dims(state, masses)?;
    let kinetic: f64 = state
        .p
        .iter()
        .zip(masses.as_slice())
        .map(|(p, m)| 0.5 * p * p / m)
        .sum();
    Ok(kinetic + potential.value(state.t, &state.q)?)
}

fn check_dims(state: &MarketState, masses: &FinancialMass) -> Result<()> {
    if state.q.len() != masses.len() || state.p.len() != masses.len() {
        return Err(Error::Config(format!(
            "state has dimension {} but {} masses were given",
            state.q.len(),
            masses.len()
        )));
    }
    Ok(())
}

/// One kick–drift–kick leapfrog step. Time-dependent potentials are evaluated
/// at the step midpoint for both kicks, so a step with `−dt` undoes a step
/// with `dt`.
pub fn hamiltonian_step(
    state: &MarketState,
    masses: &FinancialMass,
    potential: &ClassicalPotential,
    dt: f64,
) -> Result<MarketState> {
    check_dims(state, masses)?;
    let t_mid = state.t + 0.5 * dt;
    let m = masses.as_slice();
    let f0 = potential.force(t_mid, &state.q)?;
    let p_half: Vec<f64> = state.p.iter().zip(&f0).map(|(p, f)| p + 0.5 * dt * f).collect();
    let q: Vec<f64> = state
        .q
        .iter()
        .zip(&p_half)
        .zip(m)
        .map(|((q, p), m)| q + dt * p / m)
        .collect();
    let f1 = potential.force(t_mid, &q)?;
    let p = p_half.iter().zip(&f1).map(|(p, f)| p + 0.5 * dt * f).collect();
    Ok(MarketState {
        t: state.t + dt,
        q,
        p,
    })
}

/// Integrates `steps` leapfrog steps, recording every `stride`-th state (the
/// initial and final states are always recorded).
pub fn integrate_recorded(
    state: &MarketState,
    masses: &FinancialMass,
    potential: &ClassicalPotential,
    dt: f64,
    steps: usize,
    stride: usize,
) -> Result<Trajectory> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let stride = stride.max(1);
    let mut tr = Trajectory::new(0);
    tr.push(state.t, &state.q, &state.p);
    let mut s = state.clone();
    for k in 1..=steps {
        s = hamiltonian_step(&s, masses, potential, dt)?;
        if k % stride == 0 || k == steps {
            tr.push(s.t, &s.q, &s.p);
        }
    }
    Ok(tr)
}

pub fn integrate(
    state: &MarketState,
    masses: &FinancialMass,
    potential: &ClassicalPotential,
    dt: f64,
    steps: usize,
) -> Result<Trajectory> {
    integrate_recorded(state, masses, potential, dt, steps, 1)
}
