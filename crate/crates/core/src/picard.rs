//! Picard fixed-point iteration for `x(t) = x₀ + ∫ F(s, x(s)) ds` with forces
//! bounded and measurable in `t`, Lipschitz in `x`.
//!
//! The interval is cut into segments of length `γ/c`, so the integral map is
//! a contraction with factor `α = c·(segment length)` on each one. Declared
//! discontinuities of `F` in `t` become segment boundaries.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::Csv;
use crate::rng;

pub type Evaluator = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Continuity {
    #[default]
    Smooth,
    DiscontinuousInT,
}

/// Right-hand side `F(t, x)` with caller-declared sup bound `K` and Lipschitz
/// constant `c`.
#[derive(Clone)]
pub struct ForceField {
    dims: usize,
    evaluator: Evaluator,
    bound: f64,
    lipschitz: f64,
    continuity: Continuity,
    breakpoints: Vec<f64>,
    domain: Option<Vec<(f64, f64)>>,
}

impl fmt::Debug for ForceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForceField")
            .field("dims", &self.dims)
            .field("bound", &self.bound)
            .field("lipschitz", &self.lipschitz)
            .field("continuity", &self.continuity)
            .field("breakpoints", &self.breakpoints)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl ForceField {
    pub fn new(
        dims: usize,
        bound: f64,
        lipschitz: f64,
        evaluator: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dims,
            evaluator: Arc::new(evaluator),
            bound,
            lipschitz,
            continuity: Continuity::Smooth,
            breakpoints: Vec::new(),
            domain: None,
        }
    }

    /// Marks `F` as discontinuous in `t` at the given times.
    pub fn with_breakpoints(mut self, mut times: Vec<f64>) -> Self {
        times.sort_by(f64::total_cmp);
        times.dedup();
        self.continuity = Continuity::DiscontinuousInT;
        self.breakpoints = times;
        self
    }

    /// Box on which the declared bound holds; enables random probing.
    pub fn with_domain(mut self, domain: Vec<(f64, f64)>) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Evaluates `F` and checks the result against the declared bound.
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let v = (self.evaluator)(t, x);
        if v.len() != self.dims {
            return Err(Error::Contract(format!(
                "force returned {} components, declared {}",
                v.len(),
                self.dims
            )));
        }
        let sup = v.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        if !sup.is_finite() {
            return Err(Error::Contract(format!("force is not finite at t={t}, x={x:?}")));
        }
        if sup > self.bound * (1.0 + 1e-12) {
            return Err(Error::Contract(format!(
                "|F(t={t}, x={x:?})| = {sup} exceeds declared bound {}",
                self.bound
            )));
        }
        Ok(v)
    }

    fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::Config("force field needs at least one component".into()));
        }
        if !(self.bound.is_finite() && self.bound >= 0.0) {
            return Err(Error::Config(format!("declared bound K must be finite and >= 0, got {}", self.bound)));
        }
        if !(self.lipschitz.is_finite() && self.lipschitz >= 0.0) {
            return Err(Error::Config(format!(
                "declared Lipschitz constant c must be finite and >= 0, got {}",
                self.lipschitz
            )));
        }
        if let Some(d) = &self.domain {
            if d.len() != self.dims || d.iter().any(|(lo, hi)| !(lo <= hi)) {
                return Err(Error::Config("probe domain must give one lo <= hi pair per component".into()));
            }
        }
        Ok(())
    }

    /// Random spot checks of the declared bound on `[t0, t1] × domain`.
    pub fn probe(&self, t0: f64, t1: f64, count: usize, seed: u64) -> Result<()> {
        let Some(domain) = &self.domain else {
            return Ok(());
        };
        let mut r = rng::stream(seed, 0);
        let mut x = vec![0.0; self.dims];
        for _ in 0..count {
            let t = t0 + (t1 - t0) * r.random::<f64>();
            for (xi, (lo, hi)) in x.iter_mut().zip(domain) {
                *xi = lo + (hi - lo) * r.random::<f64>();
            }
            self.eval(t, &x)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterationNorm {
    #[default]
    Sup,
    L2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    /// Target contraction factor per segment, `α = γ`.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub norm: IterationNorm,
    /// Quadrature sub-mesh spacing (upper bound; segments are split evenly).
    pub mesh: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_gamma() -> f64 {
    0.5
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    200
}

fn default_probes() -> usize {
    256
}

impl PicardConfig {
    pub fn new(mesh: f64) -> Self {
        Self {
            gamma: default_gamma(),
            tol: default_tol(),
            norm: IterationNorm::Sup,
            mesh,
            max_iter: default_max_iter(),
            probes: default_probes(),
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if !(self.mesh.is_finite() && self.mesh > 0.0) {
            return Err(Error::Config(format!("mesh must be positive, got {}", self.mesh)));
        }
        if self.max_iter < 2 {
            return Err(Error::Config("max_iter must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentStats {
    pub t_start: f64,
    pub t_end: f64,
    /// Declared contraction factor `c·(t_end − t_start)`.
    pub alpha: f64,
    pub iterations: usize,
    /// Norm of `x_k − x_{k−1}` for each iteration.
    pub differences: Vec<f64>,
    /// Fixed-point residual of the converged iterate.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PicardSolution {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Segment id of each mesh node; shared boundary nodes belong to the
    /// earlier segment.
    pub segment: Vec<usize>,
    pub segments: Vec<SegmentStats>,
    pub norm: IterationNorm,
}

impl PicardSolution {
    pub fn at_end(&self) -> &[f64] {
        self.values.last().unwrap()
    }

    pub fn component(&self, d: usize) -> Vec<f64> {
        self.values.iter().map(|x| x[d]).collect()
    }

    /// `t, x_1..x_n, segment`.
    pub fn to_csv(&self) -> Csv {
        let dims = self.values[0].len();
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=dims).map(|d| format!("x_{d}")));
        cols.push("segment".into());
        let mut csv = Csv::new(&cols);
        let mut row = Vec::with_capacity(dims + 2);
        for k in 0..self.times.len() {
            row.clear();
            row.push(self.times[k]);
            row.extend_from_slice(&self.values[k]);
            row.push(self.segment[k] as f64);
            csv.row(&row);
        }
        csv
    }
}

fn segment_bounds(force: &ForceField, t0: f64, t1: f64, gamma: f64) -> Vec<f64> {
    let mut cuts: Vec<f64> = force
        .breakpoints
        .iter()
        .copied()
        .filter(|b| *b > t0 && *b < t1)
        .collect();
    cuts.push(t0);
    cuts.push(t1);
    cuts.sort_by(f64::total_cmp);
    if force.lipschitz == 0.0 {
        return cuts;
    }
    let len = gamma / force.lipschitz;
    let mut out = vec![t0];
    for w in cuts.windows(2) {
        let pieces = ((w[1] - w[0]) / len).ceil().max(1.0) as usize;
        for k in 1..pieces {
            out.push(w[0] + (w[1] - w[0]) * k as f64 / pieces as f64);
        }
        out.push(w[1]);
    }
    out
}

fn distance(a: &[Vec<f64>], b: &[Vec<f64>], dt: f64, norm: IterationNorm) -> f64 {
    match norm {
        IterationNorm::Sup => a
            .iter()
            .zip(b)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
            .fold(0.0, f64::max),
        IterationNorm::L2 => {
            let n = a.len();
            let s: f64 = a
                .iter()
                .zip(b)
                .enumerate()
                .map(|(i, (x, y))| {
                    let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
                    w * x.iter().zip(y).map(|(u, v)| (u - v).powi(2)).sum::<f64>()
                })
                .sum();
            (s * dt).sqrt()
        }
    }
}

struct Segment<'a> {
    force: &'a ForceField,
    times: Vec<f64>,
    /// Evaluation time per node; the end node of a segment closed by a
    /// declared jump sees the left limit.
    eval_times: Vec<f64>,
    dt: f64,
    x0: Vec<f64>,
}

impl Segment<'_> {
    /// One application of the integral map `G`.
    fn apply(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(x.len());
        out.push(self.x0.clone());
        let mut prev = self.force.eval(self.eval_times[0], &x[0])?;
        let mut acc = self.x0.clone();
        for i in 1..x.len() {
            let next = self.force.eval(self.eval_times[i], &x[i])?;
            for d in 0..acc.len() {
                acc[d] += 0.5 * self.dt * (prev[d] + next[d]);
            }
            out.push(acc.clone());
            prev = next;
        }
        Ok(out)
    }
}

/// Solves `x(t) = x₀ + ∫_{t0}^{t} F(s, x(s)) ds` on `[t0, t1]`.
pub fn picard_solve(force: &ForceField, x0: &[f64], t0: f64, t1: f64, config: &PicardConfig) -> Result<PicardSolution> {
    force.validate()?;
    config.validate()?;
    if x0.len() != force.dims {
        return Err(Error::Config(format!(
            "initial value has {} components, force has {}",
            x0.len(),
            force.dims
        )));
    }
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::Config(format!("need t0 < T, got [{t0}, {t1}]")));
    }
    force.probe(t0, t1, config.probes, config.seed)?;

    let bounds = segment_bounds(force, t0, t1, config.gamma);
    let mut sol = PicardSolution {
        times: vec![t0],
        values: vec![x0.to_vec()],
        segment: vec![0],
        segments: Vec::new(),
        norm: config.norm,
    };
    let mut start = x0.to_vec();
    for (s, w) in bounds.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let n = ((b - a) / config.mesh).round().max(1.0) as usize;
        let dt = (b - a) / n as f64;
        let times: Vec<f64> = (0..=n).map(|i| if i == n { b } else { a + i as f64 * dt }).collect();
        let mut eval_times = times.clone();
        if force.breakpoints.contains(&b) {
            eval_times[n] = b.next_down();
        }
        let seg = Segment {
            force,
            times,
            eval_times,
            dt,
            x0: start.clone(),
        };
        let alpha = force.lipschitz * (b - a);

        let mut x = vec![start.clone(); n + 1];
        let mut differences = Vec::new();
        let mut converged = false;
        for _ in 0..config.max_iter {
            let next = seg.apply(&x)?;
            let d = distance(&next, &x, dt, config.norm);
            differences.push(d);
            x = next;
            if d < config.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            let observed = empirical_ratio(&differences);
            return Err(Error::Divergence {
                segment: s,
                iterations: differences.len(),
                observed,
                declared: alpha,
            });
        }
        let residual = distance(&seg.apply(&x)?, &x, dt, config.norm);
        sol.segments.push(SegmentStats {
            t_start: a,
            t_end: b,
            alpha,
            iterations: differences.len(),
            differences,
            residual,
        });
        for i in 1..=n {
            sol.times.push(seg.times[i]);
            sol.values.push(x[i].clone());
            sol.segment.push(s);
        }
        start = x[n].clone();
    }
    Ok(sol)
}

/// Largest quotient `d_{k+1}/d_k` of successive iterate differences, ignoring
/// differences already at rounding level.
fn empirical_ratio(d: &[f64]) -> f64 {
    let scale = d.first().copied().unwrap_or(0.0);
    let floor = 1e-10 * scale.max(f64::MIN_POSITIVE);
    d.windows(2)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentContraction {
    pub segment: usize,
    pub alpha: f64,
    pub ratio: f64,
    pub iterations: usize,
    pub within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionReport {
    pub segments: Vec<SegmentContraction>,
    /// Every segment satisfies `ratio ≤ 1.1·α`.
    pub within_bound: bool,
}

pub fn contraction_diagnostics(solution: &PicardSolution) -> ContractionReport {
    let segments: Vec<SegmentContraction> = solution
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let ratio = empirical_ratio(&s.differences);
            SegmentContraction {
                segment: i,
                alpha: s.alpha,
                ratio,
                iterations: s.iterations,
                within_bound: ratio <= 1.1 * s.alpha,
            }
        })
        .collect();
    let within_bound = segments.iter().all(|s| s.within_bound);
    ContractionReport { segments, within_bound }
}

/// First-order system `x = (q, p)`, `q̇ = p/m`, `ṗ = f(t, q) + g(t, q)`.
///
/// `bound` and `lipschitz` are the declared constants of the lifted field.
pub fn phase_space_lift(
    f: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    g: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    masses: &[f64],
    bound: f64,
    lipschitz: f64,
) -> Result<ForceField> {
    if masses.is_empty() || masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::Config("phase-space lift needs positive masses".into()));
    }
    let m = masses.to_vec();
    let n = m.len();
    Ok(ForceField::new(2 * n, bound, lipschitz, move |t, x| {
        let (q, p) = x.split_at(n);
        let fq = f(t, q);
        let gq = g(t, q);
        let mut out = Vec::with_capacity(2 * n);
        out.extend(p.iter().zip(&m).map(|(p, m)| p / m));
        out.extend(fq.iter().zip(&gq).map(|(a, b)| a + b));
        out
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_field() -> ForceField {
        ForceField::new(1, 3.0, 1.0, |_, x| vec![x[0]])
    }

    #[test]
    fn exponential_growth() {
        let sol = picard_solve(&exp_field(), &[1.0], 0.0, 1.0, &PicardConfig::new(1e-4)).unwrap();
        assert!((sol.at_end()[0] - std::f64::consts::E).abs() < 1e-6);
        assert_eq!(sol.segments.len(), 2);
        assert!(sol.segments.iter().all(|s| s.residual < 1e-11));
    }

    #[test]
    fn mesh_halving_is_second_order() {
        let err = |h: f64| {
            let sol = picard_solve(&exp_field(), &[1.0], 0.0, 1.0, &PicardConfig::new(h)).unwrap();
            (sol.at_end()[0] - std::f64::consts::E).abs()
        };
        assert!(err(0.02) / err(0.01) >= 3.0);
    }

    #[test]
    fn heaviside_in_time() {
        let f = ForceField::new(1, 1.0, 0.0, |t, _| vec![if t >= 0.5 { 1.0 } else { 0.0 }]).with_breakpoints(vec![0.5]);
        let sol = picard_solve(&f, &[0.0], 0.0, 1.0, &PicardConfig::new(1.0 / 1024.0)).unwrap();
        assert_eq!(sol.at_end()[0], 0.5);
        for (t, x) in sol.times.iter().zip(&sol.values) {
            assert!((x[0] - (t - 0.5).max(0.0)).abs() < 1e-15);
        }
        assert_eq!(sol.segments[0].iterations, 1);
        assert_eq!(sol.segments[1].iterations, 2);
        let jumps = sol.values.windows(2).map(|w| (w[1][0] - w[0][0]).abs()).fold(0.0, f64::max);
        assert!(jumps <= 1.0 / 1024.0 + 1e-15);
    }

    #[test]
    fn contraction_ratio_bounded_and_scales() {
        let cfg = PicardConfig::new(1e-4);
        let sol = picard_solve(&exp_field(), &[1.0], 0.0, 1.0, &cfg).unwrap();
        let rep = contraction_diagnostics(&sol);
        assert!(rep.within_bound);
        assert!(rep.segments.iter().all(|s| s.ratio <= 0.55));
        let half = PicardConfig { gamma: 0.25, ..cfg };
        let rep2 = contraction_diagnostics(&picard_solve(&exp_field(), &[1.0], 0.0, 1.0, &half).unwrap());
        assert!(rep.segments[0].ratio / rep2.segments[0].ratio >= 1.8);
    }

    #[test]
    fn l2_norm_also_converges() {
        let cfg = PicardConfig {
            norm: IterationNorm::L2,
            ..PicardConfig::new(1e-3)
        };
        let sol = picard_solve(&exp_field(), &[1.0], 0.0, 1.0, &cfg).unwrap();
        assert!((sol.at_end()[0] - std::f64::consts::E).abs() < 1e-5);
    }

    fn rk4(f: impl Fn(f64, f64) -> f64, x0: f64, t1: f64, n: usize) -> f64 {
        let h = t1 / n as f64;
        let mut x = x0;
        for k in 0..n {
            let t = k as f64 * h;
            let k1 = f(t, x);
            let k2 = f(t + h / 2.0, x + h / 2.0 * k1);
            let k3 = f(t + h / 2.0, x + h / 2.0 * k2);
            let k4 = f(t + h, x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        x
    }

    #[test]
    fn smooth_sine_force_against_rk4() {
        let f = ForceField::new(1, 2.0, 1.0, |t, x| vec![x[0].sin() + t.cos()]).with_domain(vec![(-10.0, 10.0)]);
        let sol = picard_solve(&f, &[0.0], 0.0, 2.0, &PicardConfig::new(1e-4)).unwrap();
        let reference = rk4(|t, x| x.sin() + t.cos(), 0.0, 2.0, 20_000);
        assert!((sol.at_end()[0] - reference).abs() < 1e-6);
    }

    #[test]
    fn bound_violation_is_contract_error() {
        let f = ForceField::new(1, 0.5, 1.0, |_, x| vec![x[0]]).with_domain(vec![(-2.0, 2.0)]);
        assert!(matches!(
            picard_solve(&f, &[1.0], 0.0, 1.0, &PicardConfig::new(1e-2)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn understated_lipschitz_diverges() {
        // True c = 50 but declared 1: segments of length 0.5 do not contract.
        let f = ForceField::new(1, 1e30, 1.0, |_, x| vec![50.0 * x[0]]);
        let cfg = PicardConfig {
            max_iter: 20,
            ..PicardConfig::new(1e-2)
        };
        assert!(matches!(
            picard_solve(&f, &[1.0], 0.0, 1.0, &cfg),
            Err(Error::Divergence { segment: 0, .. })
        ));
    }

    #[test]
    fn free_lift_is_uniform_motion() {
        let lift = phase_space_lift(|_, q| vec![0.0; q.len()], |_, q| vec![0.0; q.len()], &[2.0], 10.0, 0.5).unwrap();
        let sol = picard_solve(&lift, &[1.0, 3.0], 0.0, 2.0, &PicardConfig::new(1e-3)).unwrap();
        for (t, x) in sol.times.iter().zip(&sol.values) {
            assert!((x[0] - (1.0 + 1.5 * t)).abs() < 1e-12);
            assert_eq!(x[1], 3.0);
        }
    }

    #[test]
    fn switched_force_keeps_price_c1() {
        // q̇ = p, ṗ = −1 before t=1 and +1 after: q is C¹, p has a kink.
        let lift = phase_space_lift(
            |t, _| vec![if t < 1.0 { -1.0 } else { 1.0 }],
            |_, _| vec![0.0],
            &[1.0],
            5.0,
            1.0,
        )
        .unwrap()
        .with_breakpoints(vec![1.0]);
        let h = 1.0 / 512.0;
        let sol = picard_solve(&lift, &[0.0, 1.0], 0.0, 2.0, &PicardConfig::new(h)).unwrap();
        let k = sol.times.iter().position(|t| *t == 1.0).unwrap();
        let q = sol.component(0);
        let p = sol.component(1);
        let dq_left = (q[k] - q[k - 1]) / h;
        let dq_right = (q[k + 1] - q[k]) / h;
        assert!((dq_left - dq_right).abs() < 2.0 * h);
        let dp_left = (p[k] - p[k - 1]) / h;
        let dp_right = (p[k + 1] - p[k]) / h;
        assert!((dp_left + 1.0).abs() < 1e-9 && (dp_right - 1.0).abs() < 1e-9);
        // Piecewise-analytic: q(1) = 1 − 1/2, p(1) = 0.
        assert!((q[k] - 0.5).abs() < 1e-12 && p[k].abs() < 1e-12);
    }
}
