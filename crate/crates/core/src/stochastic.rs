//! Stochastic dynamics: Wiener increments, GBM, Bohm–Vigier paths, random
//! initial conditions, random financial masses and a log-variance
//! stochastic-volatility baseline.
//!
//! Every path draws from its own ChaCha stream (see [`crate::rng`]), so
//! outputs are pure functions of configuration and seed.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bohm::{sample_born, BohmianConfig, BohmianRun, Dynamics, EnsembleResult, InitialMomentum};
use crate::classical::{MarketState, Schedule};
use crate::error::{Error, Result};
use crate::grid_wave::WaveField;
use crate::rng::{self, standard_normal};

/// Key offset separating volatility drivers from price drivers.
const VOL_STREAM_KEY: u64 = 0x9E37_79B9_7F4A_7C15;
/// Key offset for random initial conditions.
const INITIAL_STREAM_KEY: u64 = 0xD1B5_4A32_D192_ED03;
/// Key offset for random mass paths.
const MASS_STREAM_KEY: u64 = 0x94D0_49BB_1331_11EB;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Wiener,
    Zero,
}

/// Additive price noise `dξ_j = σ_j dw_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseProcess {
    pub kind: NoiseKind,
    pub sigma: Vec<f64>,
    pub seed: u64,
    pub dt: f64,
}

impl NoiseProcess {
    pub fn wiener(sigma: Vec<f64>, seed: u64, dt: f64) -> Self {
        Self {
            kind: NoiseKind::Wiener,
            sigma,
            seed,
            dt,
        }
    }

    pub fn zero(dims: usize, dt: f64) -> Self {
        Self {
            kind: NoiseKind::Zero,
            sigma: vec![0.0; dims],
            seed: 0,
            dt,
        }
    }

    pub fn validate(&self, dims: usize) -> Result<()> {
        if self.sigma.len() != dims {
            return Err(Error::Config(format!(
                "noise needs {dims} volatility scales, got {}",
                self.sigma.len()
            )));
        }
        if self.sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config("noise volatility must be non-negative".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config("noise dt must be positive".into()));
        }
        Ok(())
    }

    /// Increments for `steps` steps of stream `stream`, one row per step.
    pub fn increments(&self, stream: u64, steps: usize) -> Vec<Vec<f64>> {
        let dims = self.sigma.len();
        match self.kind {
            NoiseKind::Zero => vec![vec![0.0; dims]; steps],
            NoiseKind::Wiener => {
                let mut r = rng::stream(self.seed, stream);
                let sq = self.dt.sqrt();
                (0..steps)
                    .map(|_| {
                        (0..dims)
                            .map(|d| self.sigma[d] * sq * standard_normal(&mut r))
                            .collect()
                    })
                    .collect()
            }
        }
    }
}

fn wiener_rows(r: &mut ChaCha8Rng, dims: usize, dt: f64, steps: usize) -> Vec<Vec<f64>> {
    let sq = dt.sqrt();
    (0..steps)
        .map(|_| (0..dims).map(|_| sq * standard_normal(r)).collect())
        .collect()
}

/// Standard Wiener increments `Δw ~ N(0, dt)`, one row of `dims` per step.
pub fn wiener_path(dims: usize, dt: f64, steps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    Ok(wiener_rows(&mut rng::stream(seed, 0), dims, dt, steps))
}

/// Running sum of increments, starting at zero.
pub fn cumulative(increments: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for x in increments {
        acc += x;
        out.push(acc);
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GbmScheme {
    /// `S_t = S₀ exp((u − v²/2)t + v w_t)` sampled on the mesh.
    #[default]
    Exact,
    /// `S_{k+1} = S_k (1 + u dt + v Δw)`, for discretization-error studies.
    Euler,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub s0: f64,
    /// Percentage drift `u`.
    pub drift: f64,
    /// Percentage volatility `v`.
    pub volatility: f64,
}

fn gbm_from_stream(
    params: &GbmParams,
    dt: f64,
    steps: usize,
    r: &mut ChaCha8Rng,
    scheme: GbmScheme,
) -> Vec<f64> {
    let GbmParams {
        s0,
        drift: u,
        volatility: v,
    } = *params;
    let dw = wiener_rows(r, 1, dt, steps);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(s0);
    match scheme {
        GbmScheme::Exact => {
            let mut w = 0.0;
            for (k, row) in dw.iter().enumerate() {
                w += row[0];
                let t = (k + 1) as f64 * dt;
                out.push(s0 * ((u - 0.5 * v * v) * t + v * w).exp());
            }
        }
        GbmScheme::Euler => {
            let mut s = s0;
            for row in &dw {
                s *= 1.0 + u * dt + v * row[0];
                out.push(s);
            }
        }
    }
    out
}

fn check_gbm(params: &GbmParams, dt: f64) -> Result<()> {
    if !(params.s0 > 0.0 && params.s0.is_finite()) {
        return Err(Error::Config(format!("GBM needs S0 > 0, got {}", params.s0)));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

/// One GBM price path of `steps + 1` samples via the exact solution.
pub fn gbm_path(s0: f64, u: f64, v: f64, dt: f64, steps: usize, seed: u64) -> Result<Vec<f64>> {
    let params = GbmParams {
        s0,
        drift: u,
        volatility: v,
    };
    gbm_path_with(&params, dt, steps, seed, GbmScheme::Exact)
}

pub fn gbm_path_with(
    params: &GbmParams,
    dt: f64,
    steps: usize,
    seed: u64,
    scheme: GbmScheme,
) -> Result<Vec<f64>> {
    check_gbm(params, dt)?;
    Ok(gbm_from_stream(params, dt, steps, &mut rng::stream(seed, 0), scheme))
}

/// `count` independent GBM paths; path `i` uses stream `i`, so path 0 equals
/// [`gbm_path`] with the same seed.
pub fn gbm_paths(
    params: &GbmParams,
    dt: f64,
    steps: usize,
    count: usize,
    seed: u64,
    scheme: GbmScheme,
) -> Result<Vec<Vec<f64>>> {
    use rayon::prelude::*;
    check_gbm(params, dt)?;
    Ok((0..count)
        .into_par_iter()
        .map(|i| gbm_from_stream(params, dt, steps, &mut rng::stream(seed, i as u64), scheme))
        .collect())
}

/// Bohm–Vigier ensemble: guidance drift plus additive Wiener noise, with
/// `ψ` evolved noise-free. `config.dynamics` must be [`Dynamics::BohmVigier`].
pub fn bohm_vigier_path(
    config: BohmianConfig,
    wave: WaveField,
    initial: Vec<MarketState>,
    steps: usize,
) -> Result<EnsembleResult> {
    if !matches!(config.dynamics, Dynamics::BohmVigier { .. }) {
        return Err(Error::Config("Bohm–Vigier paths need bohm-vigier dynamics".into()));
    }
    BohmianRun::new(config, Some(wave), initial)?.run(steps)
}

/// Law of an initial price or momentum vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum InitialDist {
    Point { value: Vec<f64> },
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    /// Positions drawn from `|ψ₀|²`; only meaningful for prices.
    Born,
}

impl InitialDist {
    fn dims(&self) -> Option<usize> {
        match self {
            InitialDist::Point { value } => Some(value.len()),
            InitialDist::Gaussian { mean, .. } => Some(mean.len()),
            InitialDist::Born => None,
        }
    }

    fn draw(&self, r: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            InitialDist::Point { value } => value.clone(),
            InitialDist::Gaussian { mean, std } => mean
                .iter()
                .zip(std)
                .map(|(m, s)| m + s * standard_normal(r))
                .collect(),
            InitialDist::Born => unreachable!("Born draws are handled by sample_born"),
        }
    }
}

/// Random initial conditions `(q(0, ω), p(0, ω))`. Without a momentum law,
/// quantum dynamics start from the guidance momentum and classical dynamics
/// start at rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomInitials {
    pub position: InitialDist,
    #[serde(default)]
    pub momentum: Option<InitialDist>,
}

impl RandomInitials {
    pub fn validate(&self, dims: usize) -> Result<()> {
        for (name, d) in [("position", Some(&self.position)), ("momentum", self.momentum.as_ref())] {
            let Some(d) = d else { continue };
            if let Some(n) = d.dims() {
                if n != dims {
                    return Err(Error::Config(format!(
                        "initial {name} law has dimension {n}, expected {dims}"
                    )));
                }
            }
            if let InitialDist::Gaussian { mean, std } = d {
                if mean.len() != std.len() || std.iter().any(|s| !(*s >= 0.0)) {
                    return Err(Error::Config(format!(
                        "initial {name} gaussian needs one non-negative std per mean"
                    )));
                }
            }
        }
        if matches!(self.momentum, Some(InitialDist::Born)) {
            return Err(Error::Config("momenta cannot be Born-sampled".into()));
        }
        Ok(())
    }

    /// Draws `count` initial states.
    pub fn sample(&self, wave: Option<&WaveField>, dims: usize, count: usize, seed: u64) -> Result<Vec<MarketState>> {
        self.validate(dims)?;
        let born = match (&self.position, wave) {
            (InitialDist::Born, Some(w)) => Some(sample_born(w, count, seed)?),
            (InitialDist::Born, None) => {
                return Err(Error::Config("Born initial prices need a pilot wave".into()));
            }
            _ => None,
        };
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let mut r = rng::stream(seed.wrapping_add(INITIAL_STREAM_KEY), i as u64);
            let q = match &born {
                Some(b) => b[i].clone(),
                None => self.position.draw(&mut r),
            };
            let p = match &self.momentum {
                Some(m) => m.draw(&mut r),
                None => vec![0.0; dims],
            };
            out.push(MarketState::new(0.0, q, p)?);
        }
        Ok(out)
    }
}

/// Ensemble from random initial conditions under any supported dynamics.
pub fn random_initial_ensemble(
    initials: &RandomInitials,
    mut config: BohmianConfig,
    wave: Option<WaveField>,
    count: usize,
    seed: u64,
    steps: usize,
) -> Result<EnsembleResult> {
    let dims = config.masses.len();
    let states = initials.sample(wave.as_ref(), dims, count, seed)?;
    if initials.momentum.is_some() {
        config.initial_momentum = InitialMomentum::Supplied;
    }
    BohmianRun::new(config, wave, states)?.run(steps)
}

/// Per-asset law of the financial mass `m_j(t, ω)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum MassLaw {
    Constant { value: f64 },
    Deterministic { schedule: Schedule },
    /// `ln m` follows `d ln m = κ(ln base − ln m)dt + vol dw`, started at `base`.
    LogGaussian {
        base: f64,
        volatility: f64,
        #[serde(default)]
        reversion: f64,
    },
}

/// Financial masses with hard floors `ε_j > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassSchedule {
    pub laws: Vec<MassLaw>,
    pub floors: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl MassSchedule {
    pub fn validate(&self, dims: usize) -> Result<()> {
        if self.laws.len() != dims || self.floors.len() != dims {
            return Err(Error::Config(format!(
                "mass schedule needs {dims} laws and floors, got {} and {}",
                self.laws.len(),
                self.floors.len()
            )));
        }
        for (j, (law, &floor)) in self.laws.iter().zip(&self.floors).enumerate() {
            if !(floor.is_finite() && floor > 0.0) {
                return Err(Error::Contract(format!("mass floor {j} must be positive, got {floor}")));
            }
            match law {
                MassLaw::Constant { value } if *value < floor => {
                    return Err(Error::Contract(format!(
                        "constant mass {value} of asset {j} is below its floor {floor}"
                    )));
                }
                MassLaw::LogGaussian { base, volatility, .. }
                    if !(*base >= floor && *volatility >= 0.0) => {
                        return Err(Error::Contract(format!(
                            "log-gaussian mass of asset {j} needs base >= floor and volatility >= 0"
                        )));
                    }
                _ => {}
            }
        }
        Ok(())
    }

    /// Checks deterministic schedules against their floors on `[0, t_end]`.
    pub fn check_horizon(&self, t_end: f64) -> Result<()> {
        for (j, (law, &floor)) in self.laws.iter().zip(&self.floors).enumerate() {
            if let MassLaw::Deterministic { schedule } = law {
                let low = schedule.lower_bound(0.0, t_end);
                if low < floor {
                    return Err(Error::Contract(format!(
                        "mass schedule of asset {j} drops to {low} below its floor {floor}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mass state of path `stream` at `t = 0`.
    pub fn start(&self, stream: u64) -> MassState {
        let log: Vec<f64> = self
            .laws
            .iter()
            .map(|l| match l {
                MassLaw::LogGaussian { base, .. } => base.ln(),
                _ => 0.0,
            })
            .collect();
        let mut s = MassState {
            laws: self.laws.clone(),
            floors: self.floors.clone(),
            log,
            current: vec![0.0; self.laws.len()],
            t: 0.0,
            rng: rng::stream(self.seed.wrapping_add(MASS_STREAM_KEY), stream),
        };
        s.refresh();
        s
    }
}

/// Per-path mass process.
#[derive(Clone, Debug)]
pub struct MassState {
    laws: Vec<MassLaw>,
    floors: Vec<f64>,
    log: Vec<f64>,
    current: Vec<f64>,
    t: f64,
    rng: ChaCha8Rng,
}

impl MassState {
    pub fn current(&self) -> &[f64] {
        &self.current
    }

    fn refresh(&mut self) {
        for j in 0..self.laws.len() {
            let m = match &self.laws[j] {
                MassLaw::Constant { value } => *value,
                MassLaw::Deterministic { schedule } => schedule.eval(self.t),
                MassLaw::LogGaussian { .. } => self.log[j].exp(),
            };
            self.current[j] = m.max(self.floors[j]);
        }
    }

    /// Moves the mass process forward by `dt` and returns the new masses.
    pub fn advance(&mut self, dt: f64) -> &[f64] {
        self.t += dt;
        for j in 0..self.laws.len() {
            if let MassLaw::LogGaussian {
                base,
                volatility,
                reversion,
            } = self.laws[j]
            {
                let z = standard_normal(&mut self.rng);
                self.log[j] += reversion * (base.ln() - self.log[j]) * dt + volatility * dt.sqrt() * z;
            }
        }
        self.refresh();
        &self.current
    }
}

/// Newton dynamics `q̈_j = (f_j + g_j)/m_j(t, ω)` with a mass schedule.
/// Trajectories record the masses, so capitalization `m_j q_j` is available
/// through [`crate::Trajectory::capitalization`].
pub fn random_mass_path(
    schedule: &MassSchedule,
    mut config: BohmianConfig,
    wave: Option<WaveField>,
    initial: Vec<MarketState>,
    steps: usize,
) -> Result<EnsembleResult> {
    let dims = config.masses.len();
    schedule.validate(dims)?;
    schedule.check_horizon(steps as f64 * config.dt)?;
    if !matches!(config.dynamics, Dynamics::Classical | Dynamics::BohmNewton) {
        return Err(Error::Config(
            "random masses apply to second-order (classical or Bohm–Newton) dynamics".into(),
        ));
    }
    config.mass_schedule = Some(schedule.clone());
    BohmianRun::new(config, wave, initial)?.run(steps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VolDrift {
    Zero,
    /// `α(t, Δ) = κ(θ − Δ)`
    MeanReverting { kappa: f64, theta: f64 },
}

impl VolDrift {
    fn eval(&self, delta: f64) -> f64 {
        match *self {
            VolDrift::Zero => 0.0,
            VolDrift::MeanReverting { kappa, theta } => kappa * (theta - delta),
        }
    }
}

/// `dq = q(μ dt + σ dw^ε)`, `dΔ = α(Δ)dt + b dw^δ` with `Δ = ln σ²` and
/// independent drivers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticVolModel {
    pub q0: f64,
    pub mu: f64,
    /// Initial log-variance `Δ₀`.
    pub delta0: f64,
    pub drift: VolDrift,
    /// Vol-of-log-variance `b`.
    pub vol_of_vol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SvPath {
    pub times: Vec<f64>,
    pub price: Vec<f64>,
    pub sigma: Vec<f64>,
    pub delta: Vec<f64>,
    /// Price driver increments `Δw^ε`.
    pub price_driver: Vec<f64>,
    /// Volatility driver increments `Δw^δ`.
    pub vol_driver: Vec<f64>,
}

fn sv_from_streams(
    model: &StochasticVolModel,
    dt: f64,
    steps: usize,
    price_rng: &mut ChaCha8Rng,
    vol_rng: &mut ChaCha8Rng,
) -> SvPath {
    let price_driver: Vec<f64> = wiener_rows(price_rng, 1, dt, steps).into_iter().map(|r| r[0]).collect();
    let vol_driver: Vec<f64> = wiener_rows(vol_rng, 1, dt, steps).into_iter().map(|r| r[0]).collect();

    // Volatility first, then the price on top of it.
    let mut delta = Vec::with_capacity(steps + 1);
    delta.push(model.delta0);
    for dw in &vol_driver {
        let d = *delta.last().unwrap();
        delta.push(d + model.drift.eval(d) * dt + model.vol_of_vol * dw);
    }
    let sigma: Vec<f64> = delta.iter().map(|d| (0.5 * d).exp()).collect();
    let mut price = Vec::with_capacity(steps + 1);
    price.push(model.q0);
    let mut log_q = model.q0.ln();
    for (k, dw) in price_driver.iter().enumerate() {
        let s = sigma[k];
        log_q += (model.mu - 0.5 * s * s) * dt + s * dw;
        price.push(log_q.exp());
    }
    SvPath {
        times: (0..=steps).map(|k| k as f64 * dt).collect(),
        price,
        sigma,
        delta,
        price_driver,
        vol_driver,
    }
}

fn check_sv(model: &StochasticVolModel, dt: f64) -> Result<()> {
    if !(model.q0 > 0.0 && model.q0.is_finite()) {
        return Err(Error::Config(format!("stochastic volatility needs q0 > 0, got {}", model.q0)));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

/// One stochastic-volatility path. Its price driver is the same stream
/// [`gbm_path`] uses for the same seed.
pub fn stochastic_volatility_path(model: &StochasticVolModel, dt: f64, steps: usize, seed: u64) -> Result<SvPath> {
    check_sv(model, dt)?;
    Ok(sv_from_streams(
        model,
        dt,
        steps,
        &mut rng::stream(seed, 0),
        &mut rng::stream(seed.wrapping_add(VOL_STREAM_KEY), 0),
    ))
}

pub fn stochastic_volatility_paths(
    model: &StochasticVolModel,
    dt: f64,
    steps: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<SvPath>> {
    use rayon::prelude::*;
    check_sv(model, dt)?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| {
            sv_from_streams(
                model,
                dt,
                steps,
                &mut rng::stream(seed, i),
                &mut rng::stream(seed.wrapping_add(VOL_STREAM_KEY), i),
            )
        })
        .collect())
}
