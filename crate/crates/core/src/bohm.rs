//! Bohmian price trajectories driven by an evolving pilot wave.
//!
//! Each step first advances `ψ` (the wave is never influenced by prices),
//! recomputes the quantum force and guidance velocity on the grid, and then
//! moves every particle with those fields frozen:
//!
//! * Bohm–Newton: leapfrog for `m q̈ = f(t, q) + g(t, q)`;
//! * guidance: explicit midpoint for `q̇ = ∇S(q)/m`;
//! * Bohm–Vigier: the guidance step plus an additive Wiener increment.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{hamiltonian_step, ClassicalPotential, FinancialMass, MarketState};
use crate::diagnostics::{ensemble_moments, Moments};
use crate::error::{Error, Result};
use crate::grid_wave::{
    guidance_velocity, mental_force, polar_decompose, quantum_potential, ForceGrid, Interpolation,
    PotentialGrid, SchrodingerStepper, VectorField, WaveField,
};
use crate::rng;
use crate::stochastic::{MassSchedule, MassState, NoiseKind, NoiseProcess};
use crate::trajectory::Trajectory;

/// Tolerance on `‖ψ‖ = 1` required before Born sampling.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Dynamics {
    /// `ṗ = f` only; no wave is needed.
    Classical,
    /// `ṗ = f + g`.
    BohmNewton,
    /// `q̇ = ∇S/m`.
    Guidance,
    /// `dq = (∇S/m) dt + dξ`.
    BohmVigier { noise: NoiseProcess },
}

impl Dynamics {
    pub fn needs_wave(&self) -> bool {
        !matches!(self, Dynamics::Classical)
    }

    fn second_order(&self) -> bool {
        matches!(self, Dynamics::Classical | Dynamics::BohmNewton)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveEvolution {
    /// Evolve `ψ` with the Schrödinger equation under the classical potential.
    #[default]
    Schrodinger,
    /// Keep `ψ` fixed (static pilot wave).
    Frozen,
}

/// How Bohm–Newton particles get their initial momentum when none is given.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialMomentum {
    /// `p₀ = ∇S(q₀)`, which makes Bohm–Newton and guidance agree.
    #[default]
    Guidance,
    /// Use the momentum supplied with each initial state.
    Supplied,
}

#[derive(Clone, Debug)]
pub struct BohmianConfig {
    pub potential: ClassicalPotential,
    pub masses: FinancialMass,
    pub dynamics: Dynamics,
    pub dt: f64,
    pub record_stride: usize,
    pub evolution: WaveEvolution,
    pub interpolation: Interpolation,
    pub initial_momentum: InitialMomentum,
    pub mass_schedule: Option<MassSchedule>,
}

impl BohmianConfig {
    pub fn new(potential: ClassicalPotential, masses: FinancialMass, dynamics: Dynamics, dt: f64) -> Self {
        Self {
            potential,
            masses,
            dynamics,
            dt,
            record_stride: 1,
            evolution: WaveEvolution::default(),
            interpolation: Interpolation::default(),
            initial_momentum: InitialMomentum::default(),
            mass_schedule: None,
        }
    }
}

/// Quantum fields derived from `ψ` at one instant.
#[derive(Clone, Debug)]
pub struct WaveForces {
    pub potential: PotentialGrid,
    pub force: ForceGrid,
    pub velocity: VectorField,
}

impl WaveForces {
    pub fn from_wave(psi: &WaveField) -> Self {
        let polar = polar_decompose(psi);
        let potential = quantum_potential(&polar, psi.masses(), psi.h());
        let force = mental_force(&potential);
        let velocity = guidance_velocity(&polar, psi.masses());
        Self {
            potential,
            force,
            velocity,
        }
    }
}

/// Guidance velocity `∇S/m` of `psi` at an off-grid point.
pub fn guidance_velocity_at(psi: &WaveField, q: &[f64], method: Interpolation) -> Option<Vec<f64>> {
    let polar = polar_decompose(psi);
    guidance_velocity(&polar, psi.masses())
        .probe(q, method)
        .map(|p| p.value)
}

/// The wave and its stepper, plus forces at the current and previous step.
#[derive(Clone, Debug)]
pub struct PilotWave {
    wave: WaveField,
    potential: ClassicalPotential,
    stepper: Option<SchrodingerStepper>,
    evolution: WaveEvolution,
    dt: f64,
    time: f64,
    current: WaveForces,
    previous: WaveForces,
}

impl PilotWave {
    pub fn new(
        wave: WaveField,
        potential: &ClassicalPotential,
        dt: f64,
        evolution: WaveEvolution,
    ) -> Result<Self> {
        let stepper = match evolution {
            WaveEvolution::Frozen => None,
            WaveEvolution::Schrodinger => {
                let v = potential.tabulate(wave.grid(), 0.5 * dt)?;
                Some(SchrodingerStepper::new(&wave, &v, dt)?)
            }
        };
        let current = WaveForces::from_wave(&wave);
        Ok(Self {
            previous: current.clone(),
            current,
            wave,
            potential: potential.clone(),
            stepper,
            evolution,
            dt,
            time: 0.0,
        })
    }

    pub fn wave(&self) -> &WaveField {
        &self.wave
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn forces(&self) -> &WaveForces {
        &self.current
    }

    pub fn previous_forces(&self) -> &WaveForces {
        &self.previous
    }

    /// Advances `ψ` by one step and refreshes the cached forces.
    pub fn advance(&mut self, step: usize) -> Result<()> {
        self.time += self.dt;
        if self.evolution == WaveEvolution::Frozen {
            return Ok(());
        }
        if self.potential.is_time_dependent() {
            let v = self
                .potential
                .tabulate(self.wave.grid(), self.time - 0.5 * self.dt)?;
            self.stepper = Some(SchrodingerStepper::new(&self.wave, &v, self.dt)?);
        }
        let stepper = self.stepper.as_mut().expect("evolving wave has a stepper");
        stepper.step(&mut self.wave)?;
        let norm = self.wave.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > crate::grid_wave::NORM_DRIFT_LIMIT {
            return Err(Error::Numerical {
                step,
                reason: format!("wave norm drifted to {norm}"),
            });
        }
        let next = WaveForces::from_wave(&self.wave);
        self.previous = std::mem::replace(&mut self.current, next);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// The particle left the grid (or a tabulated potential's domain) and was
    /// terminated.
    LeftDomain,
    /// The particle entered a cell with a regularized (nodal) corner.
    EnteredNodalCell,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParticleEvent {
    pub particle: usize,
    pub step: usize,
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EventCounts {
    pub left_domain: usize,
    pub entered_nodal_cell: usize,
}

#[derive(Clone, Debug)]
struct Particle {
    state: MarketState,
    alive: bool,
    in_nodal: bool,
    trajectory: Trajectory,
    noise_rng: Option<ChaCha8Rng>,
    mass: Option<MassState>,
    events: Vec<ParticleEvent>,
}

impl Particle {
    fn masses_now(&self, fixed: &[f64]) -> Vec<f64> {
        match &self.mass {
            Some(m) => m.current().to_vec(),
            None => fixed.to_vec(),
        }
    }

    fn terminate(&mut self, step: usize, time: f64) {
        self.alive = false;
        self.events.push(ParticleEvent {
            particle: self.trajectory.id,
            step,
            time,
            kind: EventKind::LeftDomain,
        });
    }

    fn note_nodal(&mut self, flagged: bool, step: usize, time: f64) {
        if flagged && !self.in_nodal {
            self.events.push(ParticleEvent {
                particle: self.trajectory.id,
                step,
                time,
                kind: EventKind::EnteredNodalCell,
            });
        }
        self.in_nodal = flagged;
    }

    fn record(&mut self) {
        self.trajectory.push(self.state.t, &self.state.q, &self.state.p);
        if let Some(m) = &self.mass {
            self.trajectory.push_masses(m.current());
        }
    }
}

/// Result of an ensemble run.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleResult {
    pub trajectories: Vec<Trajectory>,
    /// Per-time mean and dispersion of `q`; `None` for fewer than 2 members.
    pub moments: Option<Moments>,
    pub events: Vec<ParticleEvent>,
    pub event_counts: EventCounts,
    pub terminated: usize,
}

/// A set of particles moving under shared wave evolution.
#[derive(Clone, Debug)]
pub struct BohmianRun {
    config: BohmianConfig,
    wave: Option<PilotWave>,
    particles: Vec<Particle>,
    step: usize,
}

impl BohmianRun {
    /// `initial` holds one state per particle; momenta are used only for
    /// second-order dynamics with [`InitialMomentum::Supplied`] (and always
    /// for classical dynamics).
    pub fn new(config: BohmianConfig, wave: Option<WaveField>, initial: Vec<MarketState>) -> Result<Self> {
        if !(config.dt.is_finite() && config.dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {}", config.dt)));
        }
        config.potential.validate()?;
        let dims = config.masses.len();
        if initial.iter().any(|s| s.dims() != dims) {
            return Err(Error::Config(format!(
                "every initial state must have dimension {dims}"
            )));
        }
        let wave = match (config.dynamics.needs_wave(), wave) {
            (true, None) => {
                return Err(Error::Config("quantum dynamics need a pilot wave".into()));
            }
            (true, Some(w)) => {
                if w.grid().dims() != dims {
                    return Err(Error::Config(format!(
                        "particle dimension {dims} differs from wave grid dimension {}",
                        w.grid().dims()
                    )));
                }
                if w.masses() != config.masses.as_slice() {
                    return Err(Error::Config("wave masses differ from the run masses".into()));
                }
                Some(PilotWave::new(w, &config.potential, config.dt, config.evolution)?)
            }
            (false, _) => None,
        };
        if let Dynamics::BohmVigier { noise } = &config.dynamics {
            noise.validate(dims)?;
            if (noise.dt - config.dt).abs() > 1e-15 * config.dt {
                return Err(Error::Precondition(format!(
                    "noise dt {} differs from wave dt {}",
                    noise.dt, config.dt
                )));
            }
        }
        if let Some(s) = &config.mass_schedule {
            s.validate(dims)?;
        }

        let mut particles = Vec::with_capacity(initial.len());
        for (id, mut state) in initial.into_iter().enumerate() {
            let mut alive = true;
            let mut in_nodal = false;
            if let Some(w) = &wave {
                match w.forces().velocity.probe(&state.q, config.interpolation) {
                    None => alive = false,
                    Some(probe) => {
                        in_nodal = probe.flagged;
                        let use_guidance = !config.dynamics.second_order()
                            || config.initial_momentum == InitialMomentum::Guidance;
                        if use_guidance {
                            state.p = probe
                                .value
                                .iter()
                                .zip(config.masses.as_slice())
                                .map(|(v, m)| v * m)
                                .collect();
                        }
                    }
                }
            }
            let noise_rng = match &config.dynamics {
                Dynamics::BohmVigier { noise } => Some(rng::stream(noise.seed, id as u64)),
                _ => None,
            };
            let mass = config.mass_schedule.as_ref().map(|s| s.start(id as u64));
            let mut p = Particle {
                state,
                alive,
                in_nodal,
                trajectory: Trajectory::new(id),
                noise_rng,
                mass,
                events: Vec::new(),
            };
            if !alive {
                p.terminate(0, 0.0);
            }
            p.record();
            particles.push(p);
        }
        Ok(Self {
            config,
            wave,
            particles,
            step: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn wave(&self) -> Option<&PilotWave> {
        self.wave.as_ref()
    }

    pub fn states(&self) -> Vec<&MarketState> {
        self.particles.iter().map(|p| &p.state).collect()
    }

    pub fn alive(&self) -> Vec<bool> {
        self.particles.iter().map(|p| p.alive).collect()
    }

    /// One step with the configured dynamics.
    pub fn step(&mut self) -> Result<()> {
        if let Some(w) = &mut self.wave {
            w.advance(self.step + 1)?;
        }
        self.step += 1;
        let step = self.step;
        let cfg = &self.config;
        let wave = self.wave.as_ref();
        let record = step.is_multiple_of(cfg.record_stride.max(1));
        let results: Vec<Result<()>> = self
            .particles
            .par_iter_mut()
            .filter(|p| p.alive)
            .map(|p| {
                match &cfg.dynamics {
                    Dynamics::Classical | Dynamics::BohmNewton => newton_update(p, cfg, wave, step)?,
                    Dynamics::Guidance => guidance_update(p, cfg, wave.unwrap(), step, None),
                    Dynamics::BohmVigier { noise } => {
                        guidance_update(p, cfg, wave.unwrap(), step, Some(noise))
                    }
                }
                if record && p.alive {
                    p.record();
                }
                Ok(())
            })
            .collect();
        results.into_iter().collect()
    }

    /// Bohm–Newton step; errors if the run was configured otherwise.
    pub fn bohm_newton_step(&mut self) -> Result<()> {
        if self.config.dynamics != Dynamics::BohmNewton {
            return Err(Error::Config("run is not in Bohm–Newton mode".into()));
        }
        self.step()
    }

    /// Guidance step; errors if the run was configured otherwise.
    pub fn guidance_step(&mut self) -> Result<()> {
        if self.config.dynamics != Dynamics::Guidance {
            return Err(Error::Config("run is not in guidance mode".into()));
        }
        self.step()
    }

    /// Runs `steps` steps and collects trajectories, moments and events.
    pub fn run(mut self, steps: usize) -> Result<EnsembleResult> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> EnsembleResult {
        let stride = self.config.record_stride.max(1);
        let last = self.step;
        let mut trajectories = Vec::with_capacity(self.particles.len());
        let mut events = Vec::new();
        let mut terminated = 0;
        for mut p in self.particles {
            if p.alive && !last.is_multiple_of(stride) {
                p.record();
            }
            if !p.alive {
                terminated += 1;
            }
            events.append(&mut p.events);
            trajectories.push(p.trajectory);
        }
        events.sort_by_key(|e| (e.step, e.particle));
        let mut counts = EventCounts::default();
        for e in &events {
            match e.kind {
                EventKind::LeftDomain => counts.left_domain += 1,
                EventKind::EnteredNodalCell => counts.entered_nodal_cell += 1,
            }
        }
        let moments = ensemble_moments(&trajectories).ok();
        EnsembleResult {
            trajectories,
            moments,
            events,
            event_counts: counts,
            terminated,
        }
    }
}

/// Leapfrog for `m q̈ = f + g`. With constant masses this is the classical
/// kick–drift–kick in momentum form; with a mass schedule it runs in
/// velocity form with `m(t)` at each kick.
fn newton_update(p: &mut Particle, cfg: &BohmianConfig, wave: Option<&PilotWave>, step: usize) -> Result<()> {
    let dt = cfg.dt;
    let t0 = p.state.t;
    let t_mid = t0 + 0.5 * dt;

    if wave.is_none() && p.mass.is_none() {
        return match hamiltonian_step(&p.state, &cfg.masses, &cfg.potential, dt) {
            Ok(s) => {
                p.state = s;
                Ok(())
            }
            Err(Error::Domain { .. }) => {
                p.terminate(step, t0 + dt);
                Ok(())
            }
            Err(e) => Err(e),
        };
    }

    let total_force = |forces: Option<&WaveForces>, q: &[f64]| -> Result<Option<(Vec<f64>, bool)>> {
        let mut f = match cfg.potential.force(t_mid, q) {
            Ok(f) => f,
            Err(Error::Domain { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let mut flagged = false;
        if let Some(w) = forces {
            match w.force.probe(q, cfg.interpolation) {
                None => return Ok(None),
                Some(g) => {
                    flagged = g.flagged;
                    f.iter_mut().zip(&g.value).for_each(|(a, b)| *a += b);
                }
            }
        }
        Ok(Some((f, flagged)))
    };

    let (prev, next) = match wave {
        Some(w) => (Some(w.previous_forces()), Some(w.forces())),
        None => (None, None),
    };
    let Some((f0, _)) = total_force(prev, &p.state.q)? else {
        p.terminate(step, t0 + dt);
        return Ok(());
    };

    let fixed = cfg.masses.as_slice();
    let m0 = p.masses_now(fixed);
    let m1 = match &mut p.mass {
        Some(m) => m.advance(dt).to_vec(),
        None => fixed.to_vec(),
    };
    let dims = p.state.q.len();
    let mut q = p.state.q.clone();
    let mut half = vec![0.0; dims];
    if p.mass.is_none() {
        for d in 0..dims {
            half[d] = p.state.p[d] + 0.5 * dt * f0[d];
            q[d] += dt * half[d] / m0[d];
        }
    } else {
        for d in 0..dims {
            half[d] = p.state.p[d] / m0[d] + 0.5 * dt * f0[d] / m0[d];
            q[d] += dt * half[d];
        }
    }
    let Some((f1, flagged)) = total_force(next, &q)? else {
        p.state.q = q;
        p.terminate(step, t0 + dt);
        return Ok(());
    };
    let mom: Vec<f64> = if p.mass.is_none() {
        (0..dims).map(|d| half[d] + 0.5 * dt * f1[d]).collect()
    } else {
        (0..dims)
            .map(|d| m1[d] * (half[d] + 0.5 * dt * f1[d] / m1[d]))
            .collect()
    };
    p.state = MarketState {
        t: t0 + dt,
        q,
        p: mom,
    };
    p.note_nodal(flagged, step, t0 + dt);
    Ok(())
}

/// Explicit midpoint for `q̇ = ∇S/m`, with the velocity at the half step
/// taken as the average of the fields before and after the wave step.
/// An additive noise increment is applied when `noise` is given.
fn guidance_update(
    p: &mut Particle,
    cfg: &BohmianConfig,
    wave: &PilotWave,
    step: usize,
    noise: Option<&NoiseProcess>,
) {
    let dt = cfg.dt;
    let t1 = p.state.t + dt;
    let prev = &wave.previous_forces().velocity;
    let next = &wave.forces().velocity;
    let method = cfg.interpolation;
    let Some(v0) = prev.probe(&p.state.q, method) else {
        p.terminate(step, t1);
        return;
    };
    let mid: Vec<f64> = p
        .state
        .q
        .iter()
        .zip(&v0.value)
        .map(|(q, v)| q + 0.5 * dt * v)
        .collect();
    let (Some(a), Some(b)) = (prev.probe(&mid, method), next.probe(&mid, method)) else {
        p.terminate(step, t1);
        return;
    };
    let mut q: Vec<f64> = p
        .state
        .q
        .iter()
        .zip(a.value.iter().zip(&b.value))
        .map(|(q, (va, vb))| q + dt * 0.5 * (va + vb))
        .collect();
    if let (Some(noise), Some(rng)) = (noise, p.noise_rng.as_mut()) {
        if noise.kind == NoiseKind::Wiener {
            for (d, x) in q.iter_mut().enumerate() {
                *x += noise.sigma[d] * dt.sqrt() * rng::standard_normal(rng);
            }
        }
    }
    let Some(v1) = next.probe(&q, method) else {
        p.state.q = q;
        p.terminate(step, t1);
        return;
    };
    let masses = cfg.masses.as_slice();
    let mom = v1.value.iter().zip(masses).map(|(v, m)| v * m).collect();
    p.state = MarketState { t: t1, q, p: mom };
    p.note_nodal(v1.flagged, step, t1);
}

/// i.i.d. samples from the grid density `|ψ|²`.
///
/// The density is taken piecewise linear between nodes (bilinear in 2D) and
/// inverted exactly cell by cell; 2D samples draw the first coordinate from
/// the marginal and the second from the conditional line density.
pub fn sample_born(psi: &WaveField, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    use rand::Rng;
    if count == 0 {
        return Err(Error::Precondition("sample count must be at least 1".into()));
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Precondition(format!(
            "Born sampling needs a normalized wave, norm is {norm}"
        )));
    }
    let grid = psi.grid();
    let rho = psi.density();
    let mut rng = rng::stream(seed, 0);
    let a0 = grid.axis(0);
    match grid.dims() {
        1 => {
            let table = LineCdf::new(&rho, a0.lo, a0.spacing());
            Ok((0..count).map(|_| vec![table.invert(rng.random())]).collect())
        }
        _ => {
            let a1 = grid.axis(1);
            let n1 = a1.n;
            let dy = a1.spacing();
            let marginal: Vec<f64> = (0..a0.n)
                .map(|i| {
                    let row = &rho[i * n1..(i + 1) * n1];
                    trapezoid(row, dy)
                })
                .collect();
            let table = LineCdf::new(&marginal, a0.lo, a0.spacing());
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let x = table.invert(rng.random());
                let s = (x - a0.lo) / a0.spacing();
                let i = (s.floor() as usize).min(a0.n - 2);
                let w = s - i as f64;
                let line: Vec<f64> = (0..n1)
                    .map(|j| (1.0 - w) * rho[i * n1 + j] + w * rho[(i + 1) * n1 + j])
                    .collect();
                let y = LineCdf::new(&line, a1.lo, dy).invert(rng.random());
                out.push(vec![x, y]);
            }
            Ok(out)
        }
    }
}

fn trapezoid(f: &[f64], dx: f64) -> f64 {
    let inner: f64 = f.iter().sum();
    dx * (inner - 0.5 * (f[0] + f[f.len() - 1]))
}

/// Cumulative distribution of a piecewise-linear density on a uniform line.
pub(crate) struct LineCdf<'a> {
    density: &'a [f64],
    cumulative: Vec<f64>,
    lo: f64,
    dx: f64,
}

impl<'a> LineCdf<'a> {
    pub(crate) fn new(density: &'a [f64], lo: f64, dx: f64) -> Self {
        let mut cumulative = Vec::with_capacity(density.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in density.windows(2) {
            acc += 0.5 * dx * (w[0] + w[1]);
            cumulative.push(acc);
        }
        Self {
            density,
            cumulative,
            lo,
            dx,
        }
    }

    pub(crate) fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Normalized CDF at `x`.
    pub(crate) fn cdf(&self, x: f64) -> f64 {
        let n = self.density.len();
        let s = (x - self.lo) / self.dx;
        if s <= 0.0 {
            return 0.0;
        }
        if s >= (n - 1) as f64 {
            return 1.0;
        }
        let i = s.floor() as usize;
        let u = (s - i as f64) * self.dx;
        let (a, b) = (self.density[i], self.density[i + 1]);
        let partial = a * u + 0.5 * (b - a) / self.dx * u * u;
        (self.cumulative[i] + partial) / self.total()
    }

    /// Position whose normalized CDF equals `u ∈ [0, 1)`.
    pub(crate) fn invert(&self, u: f64) -> f64 {
        let target = u * self.total();
        let n = self.density.len();
        let i = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&target).unwrap())
        {
            Ok(k) => k.min(n - 2),
            Err(k) => k.saturating_sub(1).min(n - 2),
        };
        // Skip empty cells so the sample lands where the mass is.
        let mut i = i;
        while i + 1 < n - 1 && self.cumulative[i + 1] <= target {
            i += 1;
        }
        let r = target - self.cumulative[i];
        if r <= 0.0 {
            return self.lo + i as f64 * self.dx;
        }
        let (a, b) = (self.density[i], self.density[i + 1]);
        let slope = (b - a) / self.dx;
        let u = if slope.abs() < 1e-14 * (a.abs() + b.abs()).max(f64::MIN_POSITIVE) {
            if a > 0.0 {
                r / a
            } else {
                0.5 * self.dx
            }
        } else {
            // Solve a·u + ½·slope·u² = r for the root inside the cell.
            let disc = (a * a + 2.0 * slope * r).max(0.0);
            2.0 * r / (a + disc.sqrt())
        };
        self.lo + i as f64 * self.dx + u.clamp(0.0, self.dx)
    }
}

/// Born-distributed initial positions followed by a run of `steps` steps.
pub fn run_ensemble(
    config: BohmianConfig,
    wave: WaveField,
    count: usize,
    seed: u64,
    steps: usize,
) -> Result<EnsembleResult> {
    let positions = sample_born(&wave, count, seed)?;
    let initial = positions.into_iter().map(MarketState::at_rest).collect();
    BohmianRun::new(config, Some(wave), initial)?.run(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_wave::{SpatialGrid, WaveSpec};
    use num_complex::Complex64;

    fn line_wave(spec: WaveSpec, lo: f64, hi: f64, n: usize) -> WaveField {
        spec.build(&SpatialGrid::line(lo, hi, n).unwrap(), &[1.0], 1.0).unwrap()
    }

    fn gaussian(center: f64, width: f64, k: f64) -> WaveSpec {
        WaveSpec::Gaussian {
            center: vec![center],
            width: vec![width],
            momentum: vec![k],
        }
    }

    #[test]
    fn born_samples_match_gaussian_moments() {
        let psi = line_wave(gaussian(0.0, 1.0, 0.0), -10.0, 10.0, 2001);
        let n = 100_000;
        let xs = sample_born(&psi, n, 11).unwrap();
        let mean = xs.iter().map(|x| x[0]).sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x[0] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn born_single_node_density_stays_local() {
        let g = SpatialGrid::line(0.0, 1.0, 101).unwrap();
        let mut values = vec![Complex64::new(0.0, 0.0); 101];
        values[40] = Complex64::new(1.0, 0.0);
        let psi = WaveField::new(g, values, vec![1.0], 1.0).unwrap().normalize().unwrap();
        for x in sample_born(&psi, 1000, 3).unwrap() {
            assert!((x[0] - 0.4).abs() <= 0.01 + 1e-12);
        }
    }

    #[test]
    fn born_two_bumps_have_expected_occupancy() {
        // Bump weights 1 : 3 (amplitudes 1 and √3, equal widths).
        let g = SpatialGrid::line(-10.0, 10.0, 4001).unwrap();
        let psi = WaveField::from_fn(g, vec![1.0], 1.0, |q| {
            let a = (-(q[0] + 4.0).powi(2) / 2.0).exp();
            let b = 3f64.sqrt() * (-(q[0] - 4.0).powi(2) / 2.0).exp();
            Complex64::new(a + b, 0.0)
        })
        .unwrap()
        .normalize()
        .unwrap();
        let n = 20_000;
        let left = sample_born(&psi, n, 5)
            .unwrap()
            .iter()
            .filter(|x| x[0] < 0.0)
            .count() as f64
            / n as f64;
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((left - 0.25).abs() < 3.0 * se, "left fraction {left}");
    }

    #[test]
    fn born_sampling_requires_normalization() {
        let psi = line_wave(gaussian(0.0, 1.0, 0.0), -10.0, 10.0, 401).scaled(2.0);
        assert!(matches!(sample_born(&psi, 10, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn born_sampling_is_deterministic_per_seed() {
        let psi = line_wave(gaussian(0.0, 1.0, 0.0), -10.0, 10.0, 401);
        assert_eq!(sample_born(&psi, 50, 9).unwrap(), sample_born(&psi, 50, 9).unwrap());
        assert_ne!(sample_born(&psi, 50, 9).unwrap(), sample_born(&psi, 50, 10).unwrap());
    }

    #[test]
    fn real_wave_leaves_guidance_particles_static() {
        let psi = line_wave(WaveSpec::HarmonicGround { stiffness: 1.0 }, -8.0, 8.0, 801);
        let cfg = BohmianConfig::new(
            ClassicalPotential::Quadratic,
            FinancialMass::new(vec![1.0]).unwrap(),
            Dynamics::Guidance,
            0.01,
        );
        let init = vec![MarketState::at_rest(vec![0.3]), MarketState::at_rest(vec![-1.2])];
        let mut frozen = cfg.clone();
        frozen.evolution = WaveEvolution::Frozen;
        let res = BohmianRun::new(frozen, Some(psi.clone()), init.clone()).unwrap().run(50).unwrap();
        for (tr, q0) in res.trajectories.iter().zip([0.3, -1.2]) {
            assert!(tr.q.iter().all(|q| q[0] == q0));
        }
        // Evolved, the continuum ground state is only nearly stationary on the grid.
        let res = BohmianRun::new(cfg, Some(psi), init).unwrap().run(50).unwrap();
        for (tr, q0) in res.trajectories.iter().zip([0.3, -1.2]) {
            let worst = tr.q.iter().map(|q| (q[0] - q0).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-4, "moved {worst}");
        }
    }

    #[test]
    fn plane_wave_velocity_at_packet_centre() {
        let k = 0.8;
        let psi = line_wave(gaussian(0.0, 1.0, k), -10.0, 10.0, 2001);
        let v = guidance_velocity_at(&psi, &[0.0], Interpolation::Linear).unwrap();
        assert!((v[0] - k).abs() < 1e-6);
    }

    #[test]
    fn particles_leaving_the_grid_are_terminated() {
        let psi = line_wave(gaussian(0.0, 1.0, 5.0), -3.0, 3.0, 301);
        let mut cfg = BohmianConfig::new(
            ClassicalPotential::Free,
            FinancialMass::new(vec![1.0]).unwrap(),
            Dynamics::Guidance,
            0.01,
        );
        cfg.evolution = WaveEvolution::Frozen;
        let init = vec![MarketState::at_rest(vec![2.5]), MarketState::at_rest(vec![5.0])];
        let res = BohmianRun::new(cfg, Some(psi), init).unwrap().run(40).unwrap();
        assert_eq!(res.terminated, 2);
        assert_eq!(res.event_counts.left_domain, 2);
        // The particle that started inside moved at v = 5 until it left.
        let tr = &res.trajectories[0];
        assert!(tr.q.last().unwrap()[0] > 2.9);
    }

    #[test]
    fn mode_specific_steps_check_the_mode() {
        let psi = line_wave(gaussian(0.0, 1.0, 0.0), -8.0, 8.0, 201);
        let cfg = BohmianConfig::new(
            ClassicalPotential::Free,
            FinancialMass::new(vec![1.0]).unwrap(),
            Dynamics::Guidance,
            0.01,
        );
        let mut run = BohmianRun::new(cfg, Some(psi), vec![MarketState::at_rest(vec![0.0])]).unwrap();
        assert!(run.bohm_newton_step().is_err());
        assert!(run.guidance_step().is_ok());
    }

    #[test]
    fn line_cdf_inverts_exactly() {
        let density = [0.0, 1.0, 3.0, 2.0, 0.5, 0.0];
        let cdf = LineCdf::new(&density, -1.0, 0.5);
        for u in [0.0, 0.1, 0.33, 0.5, 0.77, 0.999] {
            let x = cdf.invert(u);
            assert!((cdf.cdf(x) - u).abs() < 1e-12, "u = {u}");
        }
    }
}
