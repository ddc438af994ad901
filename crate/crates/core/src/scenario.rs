//! Scenario files and the run driver.
//!
//! A scenario is a JSON document tagged with [`SCHEMA_ID`]. [`validate`]
//! reports every violation at once; [`run`] executes the scenario and writes
//! a fixed set of files plus `manifest.json` into one output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bohm::{BohmianConfig, BohmianRun, Dynamics, EnsembleResult, InitialMomentum, WaveEvolution};
use crate::classical::{ClassicalPotential, FinancialMass};
use crate::diagnostics::{
    lognormality_check, martingale_drift_test, quadratic_variation, trajectory_qv, wave_moments, DriftTestConfig,
    PartitionSpec, QvReport,
};
use crate::error::{Error, Result};
use crate::grid_wave::{polar_decompose, wave_csv, Axis, Interpolation, SpatialGrid, WaveField, WaveSpec};
use crate::output::{trajectories_csv, Csv};
use crate::picard::{contraction_diagnostics, phase_space_lift, picard_solve, ForceField, PicardConfig};
use crate::stochastic::{
    gbm_paths, stochastic_volatility_paths, GbmParams, GbmScheme, InitialDist, MassSchedule, NoiseProcess,
    RandomInitials, StochasticVolModel, VolDrift,
};

pub const SCHEMA_ID: &str = "pilotwave-scenario/1";

/// Seed offsets so every random component of a run draws from its own key.
const NOISE_SEED_KEY: u64 = 0x5851_F42D_4C95_7F2D;
const MASS_SEED_KEY: u64 = 0x1405_7B7E_F767_814F;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Classical,
    BohmNewton,
    Guidance,
    BohmVigier,
    Gbm,
    StochasticVol,
    Picard,
    DiagnosticsOnly,
}

impl ScenarioKind {
    fn trajectories(self) -> bool {
        matches!(
            self,
            ScenarioKind::Classical | ScenarioKind::BohmNewton | ScenarioKind::Guidance | ScenarioKind::BohmVigier
        )
    }

    fn needs_wave(self) -> bool {
        matches!(
            self,
            ScenarioKind::BohmNewton | ScenarioKind::Guidance | ScenarioKind::BohmVigier | ScenarioKind::DiagnosticsOnly
        )
    }

    fn timed(self) -> bool {
        !matches!(self, ScenarioKind::Picard | ScenarioKind::DiagnosticsOnly)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub count: usize,
    /// Defaults to Born-distributed prices for wave-driven kinds.
    #[serde(default)]
    pub initial: Option<RandomInitials>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbmSpec {
    pub s0: f64,
    pub drift: f64,
    pub volatility: f64,
    pub paths: usize,
    #[serde(default)]
    pub scheme: GbmScheme,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticVolSpec {
    pub q0: f64,
    pub mu: f64,
    pub delta0: f64,
    pub drift: VolDrift,
    pub vol_of_vol: f64,
    pub paths: usize,
}

/// Named right-hand sides for the Picard solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum PicardForceSpec {
    /// `F = rate · x`
    Linear { rate: f64 },
    /// `F = height · 1{t ≥ at}`, independent of `x`.
    Heaviside { at: f64, height: f64 },
    /// `F = sin(x) + cos(t)`
    SineCosine,
    /// `x = (q, p)`, `q̇ = p/m`, `ṗ = −∇V(q)` scaled by `regime` after
    /// `switch_at` when given.
    Lift {
        potential: ClassicalPotential,
        masses: Vec<f64>,
        #[serde(default)]
        switch_at: Option<f64>,
        #[serde(default = "one")]
        regime: f64,
    },
}

impl PicardForceSpec {
    fn dims(&self) -> usize {
        match self {
            PicardForceSpec::Lift { masses, .. } => 2 * masses.len(),
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSpec {
    pub force: PicardForceSpec,
    /// Declared sup bound `K`.
    #[serde(default)]
    pub bound: Option<f64>,
    /// Declared Lipschitz constant `c`.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    #[serde(default)]
    pub domain: Option<Vec<(f64, f64)>>,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    pub config: PicardConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    /// Quadratic variation of the first price coordinate.
    #[serde(default)]
    pub qv: Option<PartitionSpec>,
    #[serde(default)]
    pub drift_test: Option<DriftTestConfig>,
    /// Log-normality of GBM returns at the final time.
    #[serde(default)]
    pub lognormal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub h: f64,
    #[serde(default)]
    pub masses: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: Option<Vec<Axis>>,
    #[serde(default)]
    pub wave: Option<WaveSpec>,
    #[serde(default)]
    pub potential: Option<ClassicalPotential>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default = "one_usize")]
    pub record_stride: usize,
    #[serde(default)]
    pub evolution: WaveEvolution,
    #[serde(default)]
    pub interpolation: Interpolation,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default)]
    pub mass_schedule: Option<MassSchedule>,
    #[serde(default)]
    pub gbm: Option<GbmSpec>,
    #[serde(default)]
    pub stochastic_vol: Option<StochasticVolSpec>,
    #[serde(default)]
    pub picard: Option<PicardSpec>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Every static violation, or an empty list.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let kind = self.kind;
        if self.schema != SCHEMA_ID {
            v.push(format!("schema: expected \"{SCHEMA_ID}\", got \"{}\"", self.schema));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            v.push(format!("h: must be positive, got {}", self.h));
        }
        if self.record_stride == 0 {
            v.push("record_stride: must be at least 1".into());
        }

        if kind.timed() {
            match self.dt {
                None => v.push(format!("dt: required for kind {}", kind_name(kind))),
                Some(dt) if !(dt.is_finite() && dt > 0.0) => v.push(format!("dt: must be positive, got {dt}")),
                _ => {}
            }
            match self.steps {
                None => v.push(format!("steps: required for kind {}", kind_name(kind))),
                Some(0) => v.push("steps: dt·steps must be positive".into()),
                _ => {}
            }
        }

        let needs_masses = kind.trajectories() || kind == ScenarioKind::DiagnosticsOnly;
        let masses = self.masses.as_deref();
        if needs_masses {
            match masses {
                None => v.push(format!("masses: required for kind {}", kind_name(kind))),
                Some(m) if m.is_empty() || m.iter().any(|x| !(x.is_finite() && *x > 0.0)) => {
                    v.push("masses: every financial mass must be positive".into())
                }
                _ => {}
            }
        }

        let mut grid_dims = None;
        if kind.needs_wave() {
            match &self.grid {
                None => v.push(format!("grid: required for kind {}", kind_name(kind))),
                Some(axes) => match SpatialGrid::new(axes.clone()) {
                    Ok(g) => grid_dims = Some(g.dims()),
                    Err(e) => v.push(format!("grid: {e}")),
                },
            }
            match &self.wave {
                None => v.push(format!("wave: required for kind {}", kind_name(kind))),
                Some(w) => {
                    if let (Some(need), Some(have)) = (w.dims_required(), grid_dims) {
                        if need != have {
                            v.push(format!("wave: family needs a {need}-dimensional grid, grid has {have}"));
                        }
                    }
                }
            }
            if let (Some(m), Some(d)) = (masses, grid_dims) {
                if m.len() != d {
                    v.push(format!("masses: {} given for a {d}-dimensional grid", m.len()));
                }
            }
        }

        if kind.trajectories() {
            if let Some(p) = &self.potential {
                if let Err(e) = p.validate() {
                    v.push(format!("potential: {e}"));
                }
            } else if kind == ScenarioKind::Classical {
                v.push("potential: required for kind classical".into());
            }
            match &self.ensemble {
                None => v.push(format!("ensemble: required for kind {}", kind_name(kind))),
                Some(e) => {
                    if e.count == 0 {
                        v.push("ensemble.count: must be at least 1".into());
                    }
                    match (&e.initial, masses) {
                        (None, _) if kind == ScenarioKind::Classical => {
                            v.push("ensemble.initial: classical runs need an explicit initial law".into())
                        }
                        (Some(init), Some(m)) => {
                            if let Err(err) = init.validate(m.len()) {
                                v.push(format!("ensemble.initial: {err}"));
                            }
                            if kind == ScenarioKind::Classical && init.position == InitialDist::Born {
                                v.push("ensemble.initial: Born prices need a wave-driven kind".into());
                            }
                        }
                        _ => {}
                    }
                }
            }
        }

        if kind == ScenarioKind::BohmVigier {
            match (&self.noise, masses) {
                (None, _) => v.push("noise: required for kind bohm-vigier".into()),
                (Some(n), Some(m))
                    if (n.sigma.len() != m.len() || n.sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0))) => {
                        v.push("noise.sigma: one non-negative volatility per asset".into());
                    }
                _ => {}
            }
        }

        if let Some(ms) = &self.mass_schedule {
            if !matches!(kind, ScenarioKind::Classical | ScenarioKind::BohmNewton) {
                v.push("mass_schedule: only second-order kinds (classical, bohm-newton) take random masses".into());
            } else if let Some(m) = masses {
                if let Err(e) = ms.validate(m.len()) {
                    v.push(format!("mass_schedule: {e}"));
                } else if let (Some(dt), Some(steps)) = (self.dt, self.steps) {
                    if let Err(e) = ms.check_horizon(dt * steps as f64) {
                        v.push(format!("mass_schedule: {e}"));
                    }
                }
            }
        }

        if kind == ScenarioKind::Gbm {
            match &self.gbm {
                None => v.push("gbm: required for kind gbm".into()),
                Some(g) => {
                    if !(g.s0.is_finite() && g.s0 > 0.0) {
                        v.push("gbm.s0: must be positive".into());
                    }
                    if !(g.volatility.is_finite() && g.volatility >= 0.0) {
                        v.push("gbm.volatility: must be non-negative".into());
                    }
                    if g.paths == 0 {
                        v.push("gbm.paths: must be at least 1".into());
                    }
                }
            }
        }

        if kind == ScenarioKind::StochasticVol {
            match &self.stochastic_vol {
                None => v.push("stochastic_vol: required for kind stochastic-vol".into()),
                Some(s) => {
                    if !(s.q0.is_finite() && s.q0 > 0.0) {
                        v.push("stochastic_vol.q0: must be positive".into());
                    }
                    if s.paths == 0 {
                        v.push("stochastic_vol.paths: must be at least 1".into());
                    }
                }
            }
        }

        if kind == ScenarioKind::Picard {
            match &self.picard {
                None => v.push("picard: required for kind picard".into()),
                Some(p) => {
                    match p.bound {
                        None => v.push("picard.bound: the force bound K must be declared".into()),
                        Some(k) if !(k.is_finite() && k >= 0.0) => v.push("picard.bound: must be finite and >= 0".into()),
                        _ => {}
                    }
                    match p.lipschitz {
                        None => v.push("picard.lipschitz: the Lipschitz constant c must be declared".into()),
                        Some(c) if !(c.is_finite() && c >= 0.0) => {
                            v.push("picard.lipschitz: must be finite and >= 0".into())
                        }
                        _ => {}
                    }
                    if !(p.t_end > p.t0) {
                        v.push(format!("picard.t_end: must exceed t0, got [{}, {}]", p.t0, p.t_end));
                    }
                    if p.x0.len() != p.force.dims() {
                        v.push(format!(
                            "picard.x0: force has {} components, x0 has {}",
                            p.force.dims(),
                            p.x0.len()
                        ));
                    }
                    if !(p.config.mesh.is_finite() && p.config.mesh > 0.0) {
                        v.push("picard.config.mesh: must be positive".into());
                    }
                    if let PicardForceSpec::Lift { masses, .. } = &p.force {
                        if masses.is_empty() || masses.iter().any(|m| !(*m > 0.0)) {
                            v.push("picard.force.masses: must be positive".into());
                        }
                    }
                }
            }
        }

        if let Some(qv) = &self.diagnostics.qv {
            if let (Some(steps), true) = (self.steps, self.record_stride > 0) {
                let samples = steps / self.record_stride;
                let exact = steps % self.record_stride == 0;
                for n in qv.intervals() {
                    if n == 0 || !exact || n > samples || !samples.is_multiple_of(n) {
                        v.push(format!(
                            "diagnostics.qv: {n} intervals not resolvable from {samples} recorded intervals"
                        ));
                        break;
                    }
                }
            }
            if !(kind.trajectories() || kind == ScenarioKind::Gbm || kind == ScenarioKind::StochasticVol) {
                v.push("diagnostics.qv: needs a kind that produces price paths".into());
            }
        }
        if self.diagnostics.lognormal && kind != ScenarioKind::Gbm {
            v.push("diagnostics.lognormal: only applies to kind gbm".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    fn grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.grid.clone().unwrap_or_default())
    }

    fn build_wave(&self) -> Result<WaveField> {
        let grid = self.grid()?;
        self.wave
            .as_ref()
            .ok_or_else(|| Error::Config("wave missing".into()))?
            .build(&grid, self.masses.as_deref().unwrap_or(&[]), self.h)
    }
}

fn kind_name(kind: ScenarioKind) -> String {
    serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

/// Parses and validates a scenario file.
pub fn validate(path: &Path) -> Result<ScenarioConfig> {
    let cfg = ScenarioConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub schema: String,
    pub name: String,
    pub kind: ScenarioKind,
    pub code_version: String,
    pub seed: u64,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
    pub config: ScenarioConfig,
    pub files: Vec<FileEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
            violations: match e {
                Error::Validation(v) => v.clone(),
                _ => Vec::new(),
            },
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files produced by a run, in emission order.
#[derive(Default)]
struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn text(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body.into_bytes()));
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, body);
        Ok(())
    }
}

/// Result of a successful run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub directory: PathBuf,
    pub manifest: RunManifest,
}

/// Runs `config`, writing artifacts to `out`. On failure an `error.json`
/// record is left in `out` and the error is returned.
pub fn run(config: &ScenarioConfig, out: &Path) -> Result<RunOutcome> {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    fs::create_dir_all(out)?;
    let result = config.validate().and_then(|_| execute(config));
    let artifacts = match result {
        Ok(a) => a,
        Err(e) => {
            let mut body = serde_json::to_string_pretty(&ErrorRecord::from(&e))?;
            body.push('\n');
            fs::write(out.join("error.json"), body)?;
            return Err(e);
        }
    };
    let stale = out.join("error.json");
    if stale.exists() {
        fs::remove_file(stale)?;
    }
    let mut files = Vec::with_capacity(artifacts.files.len());
    for (name, bytes) in &artifacts.files {
        fs::write(out.join(name), bytes)?;
        files.push(FileEntry {
            name: name.clone(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
    }
    let manifest = RunManifest {
        schema: SCHEMA_ID.to_string(),
        name: config.name.clone(),
        kind: config.kind,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        config: config.clone(),
        files,
    };
    let mut body = serde_json::to_string_pretty(&manifest)?;
    body.push('\n');
    fs::write(out.join("manifest.json"), body)?;
    Ok(RunOutcome {
        directory: out.to_path_buf(),
        manifest,
    })
}

fn execute(cfg: &ScenarioConfig) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    match cfg.kind {
        ScenarioKind::DiagnosticsOnly => {
            let psi = cfg.build_wave()?;
            emit_wave(&mut art, "wave", &psi, 0.0)?;
            let (mean, variance) = wave_moments(&psi);
            let polar = polar_decompose(&psi);
            let mut diag = BTreeMap::new();
            diag.insert("density_mean", serde_json::to_value(mean)?);
            diag.insert("density_variance", serde_json::to_value(variance)?);
            diag.insert("nodal_nodes", serde_json::to_value(polar.nodal_count())?);
            art.json("diagnostics.json", &diag)?;
        }
        ScenarioKind::Classical | ScenarioKind::BohmNewton | ScenarioKind::Guidance | ScenarioKind::BohmVigier => {
            run_trajectories(cfg, &mut art)?;
        }
        ScenarioKind::Gbm => run_gbm(cfg, &mut art)?,
        ScenarioKind::StochasticVol => run_sv(cfg, &mut art)?,
        ScenarioKind::Picard => run_picard(cfg, &mut art)?,
    }
    Ok(art)
}

fn emit_wave(art: &mut Artifacts, stem: &str, psi: &WaveField, time: f64) -> Result<()> {
    let (csv, header) = wave_csv(psi, time);
    art.text(&format!("{stem}.csv"), csv);
    art.json(&format!("{stem}.json"), &header)
}

fn run_trajectories(cfg: &ScenarioConfig, art: &mut Artifacts) -> Result<()> {
    let masses = FinancialMass::new(cfg.masses.clone().unwrap_or_default())?;
    let dims = masses.len();
    let dt = cfg.dt.unwrap_or_default();
    let steps = cfg.steps.unwrap_or_default();
    let dynamics = match cfg.kind {
        ScenarioKind::Classical => Dynamics::Classical,
        ScenarioKind::BohmNewton => Dynamics::BohmNewton,
        ScenarioKind::Guidance => Dynamics::Guidance,
        _ => {
            let sigma = cfg.noise.as_ref().map(|n| n.sigma.clone()).unwrap_or_default();
            Dynamics::BohmVigier {
                noise: NoiseProcess::wiener(sigma, cfg.seed.wrapping_add(NOISE_SEED_KEY), dt),
            }
        }
    };
    let mut bc = BohmianConfig::new(
        cfg.potential.clone().unwrap_or(ClassicalPotential::Free),
        masses,
        dynamics,
        dt,
    );
    bc.record_stride = cfg.record_stride;
    bc.evolution = cfg.evolution;
    bc.interpolation = cfg.interpolation;
    if let Some(ms) = &cfg.mass_schedule {
        let mut ms = ms.clone();
        ms.seed = cfg.seed.wrapping_add(MASS_SEED_KEY);
        bc.mass_schedule = Some(ms);
    }

    let wave = if cfg.kind.needs_wave() {
        Some(cfg.build_wave()?)
    } else {
        None
    };
    if let Some(w) = &wave {
        emit_wave(art, "wave", w, 0.0)?;
    }
    let ensemble = cfg.ensemble.as_ref().ok_or_else(|| Error::Config("ensemble missing".into()))?;
    let initials = ensemble.initial.clone().unwrap_or(RandomInitials {
        position: InitialDist::Born,
        momentum: None,
    });
    let states = initials.sample(wave.as_ref(), dims, ensemble.count, cfg.seed)?;
    if initials.momentum.is_some() {
        bc.initial_momentum = InitialMomentum::Supplied;
    }
    let mut runner = BohmianRun::new(bc, wave, states)?;
    for _ in 0..steps {
        runner.step()?;
    }
    let final_wave = match (cfg.evolution, runner.wave()) {
        (WaveEvolution::Schrodinger, Some(pw)) => Some((pw.wave().clone(), pw.time())),
        _ => None,
    };
    let result = runner.finish();
    if let Some((w, t)) = final_wave {
        emit_wave(art, "wave_final", &w, t)?;
    }

    let mut csv = trajectories_csv(&result.trajectories, dims);
    if let Some(p) = &cfg.potential {
        csv = csv.comment(format!("potential={}", p.tag()));
    }
    csv = csv.comment(format!(
        "masses={}",
        cfg.masses
            .as_deref()
            .unwrap_or(&[])
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(";")
    ));
    art.text("trajectories.csv", csv.render());
    ensemble_json(art, &result)?;

    let mut diag = BTreeMap::new();
    let paths: Vec<Vec<f64>> = result.trajectories.iter().map(|t| t.prices(0)).collect();
    if let Some(spec) = &cfg.diagnostics.qv {
        let first = trajectory_qv(&result.trajectories[0], 0, spec)?;
        let mean = mean_qv(&result.trajectories.iter().map(|t| t.times.clone()).collect::<Vec<_>>(), &paths, spec)?;
        art.text("qv.csv", first.to_csv().render());
        diag.insert("qv_first_path", serde_json::to_value(&first)?);
        diag.insert("qv_ensemble_mean", serde_json::to_value(&mean)?);
    }
    if let Some(dc) = &cfg.diagnostics.drift_test {
        diag.insert("drift_test", serde_json::to_value(martingale_drift_test(&paths, dc)?)?);
    }
    art.json("diagnostics.json", &diag)
}

fn ensemble_json(art: &mut Artifacts, result: &EnsembleResult) -> Result<()> {
    #[derive(Serialize)]
    struct EnsembleRecord<'a> {
        members: usize,
        terminated: usize,
        event_counts: &'a crate::bohm::EventCounts,
        events: &'a [crate::bohm::ParticleEvent],
        moments: &'a Option<crate::diagnostics::Moments>,
    }
    art.json(
        "ensemble.json",
        &EnsembleRecord {
            members: result.trajectories.len(),
            terminated: result.terminated,
            event_counts: &result.event_counts,
            events: &result.events,
            moments: &result.moments,
        },
    )
}

/// Per-level QV averaged over paths that survived the whole run.
fn mean_qv(times: &[Vec<f64>], paths: &[Vec<f64>], spec: &PartitionSpec) -> Result<QvReport> {
    let full = paths.iter().map(Vec::len).max().unwrap_or(0);
    let mut reports = Vec::new();
    for (t, p) in times.iter().zip(paths) {
        if p.len() == full {
            reports.push(quadratic_variation(t, p, spec)?);
        }
    }
    if reports.is_empty() {
        return Err(Error::Precondition("no complete path for quadratic variation".into()));
    }
    let mut mean = reports[0].clone();
    for (l, level) in mean.levels.iter_mut().enumerate() {
        level.qv = reports.iter().map(|r| r.levels[l].qv).sum::<f64>() / reports.len() as f64;
    }
    mean.ratios = mean.levels.windows(2).map(|w| w[0].qv / w[1].qv).collect();
    Ok(mean)
}

fn price_paths_csv(paths: &[Vec<f64>], dt: f64, extra: &[(&str, Vec<&[f64]>)]) -> Csv {
    let mut cols = vec!["id".to_string(), "t".to_string(), "q_1".to_string()];
    cols.extend(extra.iter().map(|(n, _)| n.to_string()));
    let mut csv = Csv::new(&cols);
    let mut row = Vec::with_capacity(cols.len());
    for (i, p) in paths.iter().enumerate() {
        for (k, q) in p.iter().enumerate() {
            row.clear();
            row.extend([i as f64, k as f64 * dt, *q]);
            row.extend(extra.iter().map(|(_, cols)| cols[i][k]));
            csv.row(&row);
        }
    }
    csv
}

fn path_times(dt: f64, len: usize) -> Vec<f64> {
    (0..len).map(|k| k as f64 * dt).collect()
}

fn run_gbm(cfg: &ScenarioConfig, art: &mut Artifacts) -> Result<()> {
    let g = cfg.gbm.as_ref().ok_or_else(|| Error::Config("gbm missing".into()))?;
    let dt = cfg.dt.unwrap_or_default();
    let steps = cfg.steps.unwrap_or_default();
    let params = GbmParams {
        s0: g.s0,
        drift: g.drift,
        volatility: g.volatility,
    };
    let paths = gbm_paths(&params, dt, steps, g.paths, cfg.seed, g.scheme)?;
    let stride = cfg.record_stride;
    let recorded: Vec<Vec<f64>> = paths.iter().map(|p| p.iter().step_by(stride).copied().collect()).collect();
    art.text("trajectories.csv", price_paths_csv(&recorded, dt * stride as f64, &[]).render());
    let mut diag = BTreeMap::new();
    if cfg.diagnostics.lognormal {
        let rep = lognormality_check(&paths, steps, dt * steps as f64, g.drift, g.volatility, 0.01)?;
        diag.insert("lognormality", serde_json::to_value(rep)?);
    }
    path_diagnostics(cfg, art, &mut diag, &recorded, dt * stride as f64)?;
    art.json("diagnostics.json", &diag)
}

fn run_sv(cfg: &ScenarioConfig, art: &mut Artifacts) -> Result<()> {
    let s = cfg
        .stochastic_vol
        .as_ref()
        .ok_or_else(|| Error::Config("stochastic_vol missing".into()))?;
    let dt = cfg.dt.unwrap_or_default();
    let steps = cfg.steps.unwrap_or_default();
    let model = StochasticVolModel {
        q0: s.q0,
        mu: s.mu,
        delta0: s.delta0,
        drift: s.drift.clone(),
        vol_of_vol: s.vol_of_vol,
    };
    let sv = stochastic_volatility_paths(&model, dt, steps, s.paths, cfg.seed)?;
    let stride = cfg.record_stride;
    let pick = |v: &Vec<f64>| v.iter().step_by(stride).copied().collect::<Vec<f64>>();
    let prices: Vec<Vec<f64>> = sv.iter().map(|p| pick(&p.price)).collect();
    let sigma: Vec<Vec<f64>> = sv.iter().map(|p| pick(&p.sigma)).collect();
    let delta: Vec<Vec<f64>> = sv.iter().map(|p| pick(&p.delta)).collect();
    let extra = [
        ("sigma", sigma.iter().map(Vec::as_slice).collect()),
        ("delta", delta.iter().map(Vec::as_slice).collect()),
    ];
    art.text("trajectories.csv", price_paths_csv(&prices, dt * stride as f64, &extra).render());
    let mut diag = BTreeMap::new();
    path_diagnostics(cfg, art, &mut diag, &prices, dt * stride as f64)?;
    art.json("diagnostics.json", &diag)
}

fn path_diagnostics(
    cfg: &ScenarioConfig,
    art: &mut Artifacts,
    diag: &mut BTreeMap<&'static str, serde_json::Value>,
    paths: &[Vec<f64>],
    dt: f64,
) -> Result<()> {
    if let Some(spec) = &cfg.diagnostics.qv {
        let times: Vec<Vec<f64>> = paths.iter().map(|p| path_times(dt, p.len())).collect();
        let first = quadratic_variation(&times[0], &paths[0], spec)?;
        art.text("qv.csv", first.to_csv().render());
        diag.insert("qv_first_path", serde_json::to_value(&first)?);
        diag.insert("qv_ensemble_mean", serde_json::to_value(mean_qv(&times, paths, spec)?)?);
    }
    if let Some(dc) = &cfg.diagnostics.drift_test {
        diag.insert("drift_test", serde_json::to_value(martingale_drift_test(paths, dc)?)?);
    }
    Ok(())
}

fn build_force(spec: &PicardSpec) -> Result<ForceField> {
    let bound = spec.bound.ok_or_else(|| Error::Config("picard.bound missing".into()))?;
    let lipschitz = spec
        .lipschitz
        .ok_or_else(|| Error::Config("picard.lipschitz missing".into()))?;
    let mut field = match &spec.force {
        PicardForceSpec::Linear { rate } => {
            let rate = *rate;
            ForceField::new(1, bound, lipschitz, move |_, x| vec![rate * x[0]])
        }
        PicardForceSpec::Heaviside { at, height } => {
            let (at, height) = (*at, *height);
            ForceField::new(1, bound, lipschitz, move |t, _| vec![if t >= at { height } else { 0.0 }])
                .with_breakpoints(vec![at])
        }
        PicardForceSpec::SineCosine => ForceField::new(1, bound, lipschitz, |t, x| vec![x[0].sin() + t.cos()]),
        PicardForceSpec::Lift {
            potential,
            masses,
            switch_at,
            regime,
        } => {
            potential.validate()?;
            let pot = potential.clone();
            let (switch, regime) = (*switch_at, *regime);
            let f = move |t: f64, q: &[f64]| {
                let scale = match switch {
                    Some(s) if t >= s => regime,
                    _ => 1.0,
                };
                pot.force(t, q)
                    .map(|v| v.into_iter().map(|x| scale * x).collect())
                    .unwrap_or_else(|_| vec![f64::NAN; q.len()])
            };
            let lift = phase_space_lift(f, |_, q: &[f64]| vec![0.0; q.len()], masses, bound, lipschitz)?;
            match switch {
                Some(s) => lift.with_breakpoints(vec![s]),
                None => lift,
            }
        }
    };
    if let Some(d) = &spec.domain {
        field = field.with_domain(d.clone());
    }
    Ok(field)
}

fn run_picard(cfg: &ScenarioConfig, art: &mut Artifacts) -> Result<()> {
    let spec = cfg.picard.as_ref().ok_or_else(|| Error::Config("picard missing".into()))?;
    let force = build_force(spec)?;
    let mut pc = spec.config.clone();
    pc.seed = cfg.seed;
    let sol = picard_solve(&force, &spec.x0, spec.t0, spec.t_end, &pc)?;
    art.text("solution.csv", sol.to_csv().render());
    let mut diag = BTreeMap::new();
    diag.insert("segments", serde_json::to_value(&sol.segments)?);
    diag.insert("contraction", serde_json::to_value(contraction_diagnostics(&sol))?);
    diag.insert("final", serde_json::to_value(sol.at_end())?);
    art.json("diagnostics.json", &diag)
}

macro_rules! library {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../scenarios/", $name, ".json")))),*]
    };
}

/// Built-in scenarios as `(name, JSON text)`.
pub const LIBRARY: &[(&str, &str)] = library!(
    "example-1-constant-amplitude",
    "example-2-speculation",
    "example-3-turning-point",
    "singular-wave",
    "entangled-2d",
    "born-free-gaussian",
    "classical-oscillator",
    "random-mass",
    "gbm-baseline",
    "stochastic-vol",
    "bohm-vigier-white-noise",
    "picard-exponential",
    "picard-heaviside",
);

pub fn builtin(name: &str) -> Result<ScenarioConfig> {
    let text = LIBRARY
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Config(format!("no built-in scenario named {name}")))?;
    ScenarioConfig::from_json(text)
}
