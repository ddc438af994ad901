//! Diagnostics on generated trajectories: ensemble moments, quadratic
//! variation, the binned fair-game drift test, log-normality of GBM returns
//! and KS distances to grid densities.
//!
//! Everything here is a pure function of its inputs.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::bohm::LineCdf;
use crate::error::{Error, Result};
use crate::grid_wave::WaveField;
use crate::output::Csv;
use crate::trajectory::Trajectory;

/// Per-time ensemble mean and unbiased variance, one entry per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub times: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub dispersion: Vec<Vec<f64>>,
    /// Members contributing at each time.
    pub members: Vec<usize>,
}

/// Moments over all members still recorded at each sample time. Stops at the
/// first time fewer than two members remain.
pub fn ensemble_moments(ensemble: &[Trajectory]) -> Result<Moments> {
    if ensemble.len() < 2 {
        return Err(Error::Precondition(format!(
            "ensemble moments need at least 2 members, got {}",
            ensemble.len()
        )));
    }
    let dims = ensemble[0].dims();
    let longest = ensemble.iter().map(Trajectory::len).max().unwrap_or(0);
    let mut out = Moments {
        times: Vec::new(),
        mean: Vec::new(),
        dispersion: Vec::new(),
        members: Vec::new(),
    };
    for k in 0..longest {
        let live: Vec<&Trajectory> = ensemble.iter().filter(|t| t.len() > k).collect();
        if live.len() < 2 {
            break;
        }
        let n = live.len() as f64;
        let mut mean = vec![0.0; dims];
        for t in &live {
            for d in 0..dims {
                mean[d] += t.q[k][d];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dims];
        for t in &live {
            for d in 0..dims {
                var[d] += (t.q[k][d] - mean[d]).powi(2);
            }
        }
        var.iter_mut().for_each(|v| *v /= n - 1.0);
        out.times.push(live[0].times[k]);
        out.mean.push(mean);
        out.dispersion.push(var);
        out.members.push(live.len());
    }
    Ok(out)
}

/// Mean and variance of each coordinate under the grid density `|ψ|²`.
pub fn wave_moments(psi: &WaveField) -> (Vec<f64>, Vec<f64>) {
    let grid = psi.grid();
    let rho = psi.density();
    let total = grid.integrate(&rho);
    let dims = grid.dims();
    let mut mean = vec![0.0; dims];
    let mut second = vec![0.0; dims];
    for (i, r) in rho.iter().enumerate() {
        let w = grid.trapezoid_weight(i) * r / total;
        for (d, x) in grid.point(i).into_iter().enumerate() {
            mean[d] += w * x;
            second[d] += w * x * x;
        }
    }
    let var = mean.iter().zip(&second).map(|(m, s)| s - m * m).collect();
    (mean, var)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PartitionSpec {
    Uniform { intervals: usize },
    /// `coarsest`, `2·coarsest`, … intervals over `levels` levels.
    Dyadic { coarsest: usize, levels: usize },
}

impl PartitionSpec {
    pub fn intervals(&self) -> Vec<usize> {
        match *self {
            PartitionSpec::Uniform { intervals } => vec![intervals],
            PartitionSpec::Dyadic { coarsest, levels } => (0..levels).map(|l| coarsest << l).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QvLevel {
    pub intervals: usize,
    pub mesh: f64,
    pub qv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QvReport {
    pub levels: Vec<QvLevel>,
    /// `qv[l] / qv[l + 1]` across successive levels.
    pub ratios: Vec<f64>,
}

impl QvReport {
    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&["intervals", "mesh", "qv"]);
        for l in &self.levels {
            csv.row(&[l.intervals as f64, l.mesh, l.qv]);
        }
        csv
    }
}

/// `Σ (u(t_{k+1}) − u(t_k))²` on each partition level. The series must be
/// sampled on a uniform mesh whose interval count is a multiple of every
/// level's interval count.
pub fn quadratic_variation(times: &[f64], values: &[f64], partition: &PartitionSpec) -> Result<QvReport> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::Precondition(
            "quadratic variation needs matching time and value series with at least 2 samples".into(),
        ));
    }
    let available = times.len() - 1;
    let span = times[available] - times[0];
    let mut levels = Vec::new();
    for n in partition.intervals() {
        if n == 0 || n > available || !available.is_multiple_of(n) {
            return Err(Error::Resolution {
                requested: n,
                available,
            });
        }
        let stride = available / n;
        let qv = (0..n)
            .map(|k| (values[(k + 1) * stride] - values[k * stride]).powi(2))
            .sum();
        levels.push(QvLevel {
            intervals: n,
            mesh: span / n as f64,
            qv,
        });
    }
    let ratios = levels.windows(2).map(|w| w[0].qv / w[1].qv).collect();
    Ok(QvReport { levels, ratios })
}

pub fn trajectory_qv(trajectory: &Trajectory, coordinate: usize, partition: &PartitionSpec) -> Result<QvReport> {
    quadratic_variation(&trajectory.times, &trajectory.prices(coordinate), partition)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftTestConfig {
    #[serde(default = "default_lags")]
    pub lags: Vec<usize>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_significance")]
    pub significance: f64,
}

fn default_lags() -> Vec<usize> {
    vec![1]
}

fn default_bins() -> usize {
    10
}

fn default_significance() -> f64 {
    0.01
}

impl Default for DriftTestConfig {
    fn default() -> Self {
        Self {
            lags: default_lags(),
            bins: default_bins(),
            significance: default_significance(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub drift: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LagReport {
    pub lag: usize,
    pub increments: usize,
    pub bins: Vec<DriftBin>,
    /// Self-normalized z of the pooled mean increment.
    pub z: f64,
    pub z_p_value: f64,
    /// `Σ (drift_b / se_b)²` over the bins.
    pub chi_square: f64,
    pub chi_square_p_value: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftTestReport {
    pub significance: f64,
    pub lags: Vec<LagReport>,
    /// Largest absolute pooled z across lags.
    pub z: f64,
    /// Smallest p-value across lags and statistics, Bonferroni-adjusted.
    pub p_value: f64,
    pub rejected: bool,
}

fn mean_and_var(x: &[f64]) -> (f64, f64) {
    if x.windows(2).all(|w| w[0] == w[1]) {
        return (x.first().copied().unwrap_or(0.0), 0.0);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 {
        x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

fn two_sided_normal_p(z: f64) -> f64 {
    if z.is_infinite() {
        return 0.0;
    }
    let n = Normal::new(0.0, 1.0).unwrap();
    2.0 * n.sf(z.abs())
}

/// Running quantile of each sample among the path's own history (itself
/// included, ties counted half).
fn running_quantiles(path: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = path.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut tree = vec![0usize; sorted.len() + 1];
    let prefix = |tree: &[usize], mut i: usize| {
        let mut s = 0;
        while i > 0 {
            s += tree[i];
            i &= i - 1;
        }
        s
    };
    path.iter()
        .enumerate()
        .map(|(t, &v)| {
            let k = sorted.partition_point(|x| x.total_cmp(&v).is_lt());
            let mut i = k + 1;
            while i < tree.len() {
                tree[i] += 1;
                i += i & i.wrapping_neg();
            }
            let below = prefix(&tree, k) as f64;
            let equal = prefix(&tree, k + 1) as f64 - below;
            (below + 0.5 * equal) / (t + 1) as f64
        })
        .collect()
}

fn lag_report(paths: &[Vec<f64>], lag: usize, bins: usize) -> LagReport {
    let mut members: Vec<Vec<(f64, f64)>> = vec![Vec::new(); bins];
    let mut increments = Vec::new();
    for path in paths {
        let u = running_quantiles(path);
        let mut t = 0;
        while t + lag < path.len() {
            let d = path[t + lag] - path[t];
            let b = ((u[t] * bins as f64) as usize).min(bins - 1);
            members[b].push((path[t], d));
            increments.push(d);
            t += lag;
        }
    }
    let n = increments.len();
    let (mean, _) = mean_and_var(&increments);
    let centered: f64 = increments.iter().map(|d| (d - mean).powi(2)).sum();
    let sum: f64 = increments.iter().sum();
    let z = if centered > 0.0 {
        sum / centered.sqrt()
    } else if sum == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(sum)
    };

    let mut report_bins = Vec::with_capacity(bins);
    let mut chi_square = 0.0;
    let mut dof = 0usize;
    for chunk in members.iter().filter(|c| c.len() >= 2) {
        let d: Vec<f64> = chunk.iter().map(|p| p.1).collect();
        let (drift, var) = mean_and_var(&d);
        let se = (var / d.len() as f64).sqrt();
        chi_square += if se > 0.0 {
            (drift / se).powi(2)
        } else if drift == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        dof += 1;
        report_bins.push(DriftBin {
            lower: chunk.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
            upper: chunk.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
            count: d.len(),
            drift,
            std_error: se,
        });
    }
    let levels = {
        let mut q: Vec<f64> = paths.iter().flatten().copied().collect();
        q.sort_by(f64::total_cmp);
        q.dedup();
        q.len()
    };
    let chi_square_p_value = if chi_square.is_infinite() {
        0.0
    } else if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).unwrap().sf(chi_square)
    };
    LagReport {
        lag,
        increments: n,
        bins: report_bins,
        z,
        z_p_value: two_sided_normal_p(z),
        chi_square,
        chi_square_p_value,
        degenerate: levels < 2,
    }
}

/// Fair-game test `E(q_{t+L} − q_t | past) = 0`, binning each `q_t` by its
/// running quantile within its own path.
///
/// Each lag contributes a pooled z and a per-bin chi-square statistic; the
/// hypothesis is rejected when any of the `2·lags` p-values falls below the
/// Bonferroni-adjusted significance.
pub fn martingale_drift_test(paths: &[Vec<f64>], config: &DriftTestConfig) -> Result<DriftTestReport> {
    if config.lags.is_empty() || config.lags.contains(&0) {
        return Err(Error::Config("drift test lags must be positive".into()));
    }
    if config.bins == 0 || !(config.significance > 0.0 && config.significance < 1.0) {
        return Err(Error::Config("drift test needs bins >= 1 and significance in (0, 1)".into()));
    }
    let mut lags = Vec::with_capacity(config.lags.len());
    for &lag in &config.lags {
        let r = lag_report(paths, lag, config.bins);
        if r.increments < 100 {
            return Err(Error::Precondition(format!(
                "drift test needs at least 100 increments at lag {lag}, got {}",
                r.increments
            )));
        }
        lags.push(r);
    }
    let tests = 2.0 * lags.len() as f64;
    let p_min = lags
        .iter()
        .flat_map(|l| [l.z_p_value, l.chi_square_p_value])
        .fold(1.0_f64, f64::min);
    let p_value = (p_min * tests).min(1.0);
    let z = lags.iter().map(|l| l.z.abs()).fold(0.0, f64::max);
    Ok(DriftTestReport {
        significance: config.significance,
        lags,
        z,
        p_value,
        rejected: p_value < config.significance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KsReport {
    pub samples: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov tail `P(D_n > d)` with the Stephens correction.
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1.0_f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// One-sample KS distance of `samples` to the continuous CDF `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsReport {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let f = cdf(*v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    KsReport {
        samples: x.len(),
        statistic: d,
        p_value: kolmogorov_p_value(d, x.len()),
    }
}

/// KS distance between 1D positions and the piecewise-linear grid density
/// `|ψ|²`.
pub fn ks_against_wave(positions: &[f64], psi: &WaveField) -> Result<KsReport> {
    if psi.grid().dims() != 1 {
        return Err(Error::Precondition("KS against a wave density needs a 1D grid".into()));
    }
    let axis = psi.grid().axis(0);
    let rho = psi.density();
    let table = LineCdf::new(&rho, axis.lo, axis.spacing());
    Ok(ks_statistic(positions, |x| table.cdf(x)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LognormalityReport {
    pub paths: usize,
    pub t: f64,
    pub mean: f64,
    pub expected_mean: f64,
    pub mean_std_error: f64,
    pub variance: f64,
    pub expected_variance: f64,
    /// KS distance of standardized log-returns to N(0, 1); absent when the
    /// sample variance is zero.
    pub ks: Option<KsReport>,
    pub normality_rejected: bool,
}

/// Normality statistics of `log(S_t / S_0)` at sample index `index`, against
/// mean `(u − v²/2)t` and variance `v²t`.
pub fn lognormality_check(
    paths: &[Vec<f64>],
    index: usize,
    t: f64,
    drift: f64,
    volatility: f64,
    significance: f64,
) -> Result<LognormalityReport> {
    if paths.len() < 2 {
        return Err(Error::Precondition("log-normality check needs at least 2 paths".into()));
    }
    let mut r = Vec::with_capacity(paths.len());
    for p in paths {
        let (Some(s0), Some(st)) = (p.first(), p.get(index)) else {
            return Err(Error::Precondition(format!("path shorter than sample index {index}")));
        };
        if !(*s0 > 0.0 && *st > 0.0) {
            return Err(Error::Precondition("log-returns need positive prices".into()));
        }
        r.push((st / s0).ln());
    }
    let (mean, variance) = mean_and_var(&r);
    let ks = (variance > 0.0).then(|| {
        let sd = variance.sqrt();
        let z: Vec<f64> = r.iter().map(|x| (x - mean) / sd).collect();
        let n = Normal::new(0.0, 1.0).unwrap();
        ks_statistic(&z, |x| n.cdf(x))
    });
    let normality_rejected = ks.as_ref().is_some_and(|k| k.p_value < significance);
    Ok(LognormalityReport {
        paths: r.len(),
        t,
        mean,
        expected_mean: (drift - 0.5 * volatility * volatility) * t,
        mean_std_error: (variance / r.len() as f64).sqrt(),
        variance,
        expected_variance: volatility * volatility * t,
        ks,
        normality_rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn traj(id: usize, q: &[f64]) -> Trajectory {
        let mut t = Trajectory::new(id);
        for (k, v) in q.iter().enumerate() {
            t.push(k as f64, &[*v], &[0.0]);
        }
        t
    }

    #[test]
    fn moments_by_hand() {
        let m = ensemble_moments(&[traj(0, &[0.0, 0.0]), traj(1, &[2.0, 2.0])]).unwrap();
        assert_eq!(m.mean[1], vec![1.0]);
        assert_eq!(m.dispersion[1], vec![2.0]);
        let same = ensemble_moments(&[traj(0, &[3.0]), traj(1, &[3.0]), traj(2, &[3.0])]).unwrap();
        assert_eq!(same.dispersion[0], vec![0.0]);
        assert!(ensemble_moments(&[traj(0, &[1.0])]).is_err());
    }

    #[test]
    fn moments_stop_when_members_drop_out() {
        let m = ensemble_moments(&[traj(0, &[0.0, 1.0, 2.0]), traj(1, &[0.0, 1.0]), traj(2, &[0.0])]).unwrap();
        assert_eq!(m.members, vec![3, 2]);
    }

    #[test]
    fn qv_of_linear_function() {
        let n = 1000;
        let t: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let rep = quadratic_variation(&t, &t, &PartitionSpec::Dyadic { coarsest: 125, levels: 4 }).unwrap();
        for l in &rep.levels {
            assert!((l.qv - 1.0 / l.intervals as f64).abs() < 1e-14);
        }
        for r in &rep.ratios {
            assert!((r - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn qv_resolution_error() {
        let t = vec![0.0, 0.5, 1.0];
        let e = quadratic_variation(&t, &t, &PartitionSpec::Uniform { intervals: 4 });
        assert!(matches!(e, Err(Error::Resolution { requested: 4, available: 2 })));
    }

    fn random_walk(seed: u64, steps: usize) -> Vec<f64> {
        use rand::Rng;
        let mut r = rng::stream(seed, 0);
        let mut q = vec![0.0];
        for _ in 0..steps {
            let s = if r.random::<bool>() { 1.0 } else { -1.0 };
            q.push(q.last().unwrap() + s);
        }
        q
    }

    #[test]
    fn increasing_path_is_rejected() {
        let q: Vec<f64> = (0..1000).map(|k| k as f64).collect();
        let rep = martingale_drift_test(&[q], &DriftTestConfig::default()).unwrap();
        assert!(rep.rejected);
        assert!(rep.z.is_infinite());
    }

    #[test]
    fn constant_path_is_degenerate_not_fatal() {
        let rep = martingale_drift_test(&[vec![1.0; 500]], &DriftTestConfig::default()).unwrap();
        assert!(rep.lags[0].degenerate);
        assert!(!rep.rejected);
    }

    #[test]
    fn drift_test_needs_data() {
        assert!(matches!(
            martingale_drift_test(&[vec![0.0; 50]], &DriftTestConfig::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn drift_test_is_location_equivariant() {
        let q = random_walk(3, 20_000);
        let shifted: Vec<f64> = q.iter().map(|x| x + 1000.0).collect();
        let a = martingale_drift_test(&[q], &DriftTestConfig::default()).unwrap();
        let b = martingale_drift_test(&[shifted], &DriftTestConfig::default()).unwrap();
        assert!((a.z - b.z).abs() < 1e-9);
        assert!((a.lags[0].chi_square - b.lags[0].chi_square).abs() < 1e-7);
        assert_eq!(a.rejected, b.rejected);
        for (x, y) in a.lags[0].bins.iter().zip(&b.lags[0].bins) {
            assert_eq!(x.count, y.count);
            assert!((x.drift - y.drift).abs() < 1e-9);
        }
    }

    #[test]
    fn multiple_lags() {
        let q = random_walk(9, 50_000);
        let cfg = DriftTestConfig {
            lags: vec![1, 5, 25],
            ..DriftTestConfig::default()
        };
        let rep = martingale_drift_test(&[q], &cfg).unwrap();
        assert_eq!(rep.lags.len(), 3);
        assert_eq!(rep.lags[1].increments, 10_000);
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        // Q(1.36) ≈ 0.0494, Q(1.63) ≈ 0.0098 for large n.
        assert!((kolmogorov_p_value(1.36 / 1000.0, 1_000_000) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_p_value(1.63 / 1000.0, 1_000_000) - 0.0098).abs() < 5e-4);
        assert_eq!(kolmogorov_p_value(0.0, 100), 1.0);
    }

    #[test]
    fn ks_of_uniform_grid_samples() {
        let x: Vec<f64> = (0..1000).map(|k| (k as f64 + 0.5) / 1000.0).collect();
        let rep = ks_statistic(&x, |v| v.clamp(0.0, 1.0));
        assert!((rep.statistic - 0.0005).abs() < 1e-12);
    }

    #[test]
    fn degenerate_lognormal() {
        let paths: Vec<Vec<f64>> = (0..10).map(|_| vec![1.0, 0.05_f64.exp()]).collect();
        let rep = lognormality_check(&paths, 1, 1.0, 0.05, 0.0, 0.01).unwrap();
        assert_eq!(rep.variance, 0.0);
        assert!((rep.mean - 0.05).abs() < 1e-15);
        assert!(rep.ks.is_none());
    }

    #[test]
    fn running_quantiles_use_only_the_past() {
        let u = running_quantiles(&[0.0, 1.0, -1.0, 1.0, 5.0]);
        assert_eq!(u, vec![0.5, 0.75, 1.0 / 6.0, 0.75, 0.9]);
        let mut longer = vec![0.0, 1.0, -1.0, 1.0, 5.0, -9.0, 9.0];
        assert_eq!(running_quantiles(&longer)[..5], u[..]);
        longer.truncate(3);
        assert_eq!(running_quantiles(&longer)[..], u[..3]);
    }
}
