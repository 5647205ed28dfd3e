//! Monte Carlo harness and trajectory-quality metrics.
//!
//! Trial `i` draws its initial configuration from a ChaCha8 generator seeded
//! with the master seed on stream `i`, so every trial is reproducible on its
//! own and the batch does not depend on scheduling.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::controller::{ControlParams, ANTIPODAL_TOLERANCE};
use crate::error::{CvfError, Result};
use crate::format::fmt17;
use crate::geometry::{wrap_angle, Configuration, Vec2};
use crate::simulator::{simulate_with, SimConfig, Trajectory};
use crate::vfield::{polyline_length, CurveTracer, CvfParams};

/// Relative slack on the curvature bound when judging traced curves.
pub const CURVATURE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `v_min = 0`: the robot comes to rest at the target.
    Converge,
    /// `v_min > 0`: the robot loiters on the limit cycle.
    Loiter,
}

impl Variant {
    pub fn of(ctrl: &ControlParams) -> Self {
        if ctrl.v_min > 0.0 {
            Variant::Loiter
        } else {
            Variant::Converge
        }
    }
}

/// Targets spaced evenly on the circle `|p - center| = r2`, each heading
/// counter-clockwise along the circle, so every target shares the singular
/// point `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSet {
    pub count: usize,
    /// Polar angle of the first target, rad.
    pub phase: f64,
    pub center: Vec2,
}

impl Default for TargetSet {
    fn default() -> Self {
        TargetSet {
            count: 4,
            phase: 0.0,
            center: Vec2::ZERO,
        }
    }
}

impl TargetSet {
    pub fn targets(&self, r2: f64) -> Vec<Configuration> {
        (0..self.count)
            .map(|k| {
                let phi = self.phase + TAU * k as f64 / self.count as f64;
                Configuration::from_parts(self.center + Vec2::from_angle(phi) * r2, phi + FRAC_PI_2)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloConfig {
    pub n_trials: usize,
    pub targets: TargetSet,
    /// Initial positions are uniform on `[-half_width, half_width]^2`.
    pub half_width: f64,
    /// Distance at which a traced curve counts as reaching the target.
    pub passage_tolerance: f64,
    pub arc_step: f64,
    pub max_curve_length: f64,
}

impl MonteCarloConfig {
    /// `15 rho` initial box, `1e-2 rho` passage tolerance, `rho / 100` arc step.
    pub fn for_params(cvf: &CvfParams, n_trials: usize) -> Self {
        let rho = cvf.rho();
        MonteCarloConfig {
            n_trials,
            targets: TargetSet::default(),
            half_width: 15.0 * rho,
            passage_tolerance: 1e-2 * rho,
            arc_step: rho / 100.0,
            max_curve_length: 200.0 * cvf.r3(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSpec {
    pub index: usize,
    pub seed: u64,
    pub g0: Configuration,
    pub target: Configuration,
    pub variant: Variant,
    /// Number of discarded draws that landed on the singular or
    /// non-converging set.
    pub redraws: u32,
}

/// Draws the initial configuration of trial `index`.
pub fn trial_spec(
    index: usize,
    master_seed: u64,
    cvf: &CvfParams,
    ctrl: &ControlParams,
    mc: &MonteCarloConfig,
) -> TrialSpec {
    let targets = mc.targets.targets(cvf.r2());
    let target = targets[index % targets.len()];
    let params = cvf.with_target(target);
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    let w = mc.half_width;
    let mut redraws = 0;
    loop {
        let g0 = Configuration::new(
            rng.random_range(-w..=w),
            rng.random_range(-w..=w),
            rng.random_range(0.0..TAU),
        );
        let admissible = params.geometry(g0.p).is_ok_and(|geom| {
            (wrap_angle(g0.theta - geom.theta_r).abs() - PI).abs() > ANTIPODAL_TOLERANCE
        });
        if admissible {
            return TrialSpec {
                index,
                seed: master_seed,
                g0,
                target,
                variant: Variant::of(ctrl),
                redraws,
            };
        }
        log::warn!("trial {index}: initial draw on the non-converging set, redrawing");
        redraws += 1;
    }
}

/// Distance from `q` to segment `ab` and the fraction along it of the
/// closest point.
fn segment_distance(a: Vec2, b: Vec2, q: Vec2) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let s = if len2 > 0.0 {
        ((q - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((a + ab * s).distance(q), s)
}

/// Arc length along `points` to the first local minimum of the distance to
/// `target` that falls below `tolerance`, or `None`.
pub fn passage_length(points: &[Vec2], target: Vec2, tolerance: f64) -> Option<f64> {
    let mut arc = 0.0;
    let mut best: Option<f64> = None;
    let mut best_arc = 0.0;
    if points.len() == 1 && points[0].distance(target) < tolerance {
        return Some(0.0);
    }
    for w in points.windows(2) {
        let seg = w[0].distance(w[1]);
        let (d, s) = segment_distance(w[0], w[1], target);
        if d < tolerance {
            if best.is_none_or(|b| d < b) {
                best = Some(d);
                best_arc = arc + s * seg;
            }
        } else if best.is_some() {
            return Some(best_arc);
        }
        arc += seg;
    }
    best.map(|_| best_arc)
}

/// `L / |p_d - p0|` where `L` is the length of `curve` up to its first
/// passage within `tolerance` of `p_d`.
pub fn relative_length(curve: &[Vec2], p0: Vec2, p_d: Vec2, tolerance: f64) -> Result<f64> {
    let chord = p0.distance(p_d);
    if !(chord > 0.0) {
        return Err(CvfError::Domain("start and target coincide".into()));
    }
    passage_length(curve, p_d, tolerance)
        .map(|l| l / chord)
        .ok_or(CvfError::NoPassage {
            tolerance,
            length: polyline_length(curve),
        })
}

/// Root mean square of successive differences of `omega`.
pub fn omega_rmse(traj: &Trajectory) -> Result<f64> {
    let omegas: Vec<f64> = traj.samples.iter().map(|s| s.out.omega).collect();
    omega_rmse_of(&omegas)
}

pub fn omega_rmse_of(omegas: &[f64]) -> Result<f64> {
    if omegas.len() < 2 {
        return Err(CvfError::InsufficientData(
            "omega RMSE needs at least two samples".into(),
        ));
    }
    let sum: f64 = omegas.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok((sum / (omegas.len() - 1) as f64).sqrt())
}

/// Per-trial outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub spec: TrialSpec,
    /// Largest curvature along the traced integral curve.
    pub curve_max_kappa: f64,
    pub curvature_ok: bool,
    pub relative_length: Option<f64>,
    /// Every sample satisfied `|omega| <= v_x kappa_max`.
    pub input_ok: bool,
    /// Time-average of `|omega| / v_x` over samples with `v_x > 0`.
    pub avg_curvature: f64,
    pub converge_time: Option<f64>,
    pub omega_rmse: f64,
    pub saturated_outside_s: usize,
}

fn fraction(batch: &[TrialResult], pred: impl Fn(&TrialResult) -> bool) -> Result<f64> {
    if batch.is_empty() {
        return Err(CvfError::InsufficientData("empty batch".into()));
    }
    Ok(batch.iter().filter(|t| pred(t)).count() as f64 / batch.len() as f64)
}

fn mean_of(batch: &[TrialResult], f: impl Fn(&TrialResult) -> Option<f64>, what: &str) -> Result<f64> {
    if batch.is_empty() {
        return Err(CvfError::InsufficientData("empty batch".into()));
    }
    let (sum, n) = batch
        .iter()
        .filter_map(f)
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(CvfError::InsufficientData(format!("no trial produced {what}")));
    }
    Ok(sum / n as f64)
}

pub fn pct_curvature_ok(batch: &[TrialResult]) -> Result<f64> {
    fraction(batch, |t| t.curvature_ok)
}

pub fn pct_input_ok(batch: &[TrialResult]) -> Result<f64> {
    fraction(batch, |t| t.input_ok)
}

pub fn avg_curvature(batch: &[TrialResult]) -> Result<f64> {
    mean_of(batch, |t| Some(t.avg_curvature), "a curvature average")
}

/// Mean convergence time over the trials that converged.
pub fn avg_time(batch: &[TrialResult]) -> Result<f64> {
    mean_of(batch, |t| t.converge_time, "a convergence time")
}

/// Runs one trial: traces the integral curve from `g0` and simulates the
/// closed loop.
pub fn run_trial(
    spec: &TrialSpec,
    cvf: &CvfParams,
    ctrl: &ControlParams,
    sim: &SimConfig,
    mc: &MonteCarloConfig,
) -> Result<TrialResult> {
    let params = cvf.with_target(spec.target);
    let kappa_max = params.kappa_max();

    let n_max = (mc.max_curve_length / mc.arc_step).floor() as usize + 1;
    let mut points = Vec::new();
    let mut curve_max_kappa: f64 = 0.0;
    for p in CurveTracer::new(&params, spec.g0.p, mc.arc_step)?.take(n_max) {
        curve_max_kappa = curve_max_kappa.max(params.curvature(p)?);
        points.push(p);
        if passage_length(&points[points.len().saturating_sub(3)..], spec.target.p, mc.passage_tolerance)
            .is_some()
            && points.last().unwrap().distance(spec.target.p) >= mc.passage_tolerance
        {
            break;
        }
    }
    let relative_length = relative_length(&points, spec.g0.p, spec.target.p, mc.passage_tolerance).ok();

    let mut input_ok = true;
    let mut kappa_sum = 0.0;
    let mut moving = 0usize;
    let mut prev_omega: Option<f64> = None;
    let mut diff_sq = 0.0;
    let mut n = 0usize;
    let mut saturated_outside_s = 0;
    let rho = params.rho();
    let report = simulate_with(&spec.g0, &params, ctrl, sim, |s| {
        let o = &s.out;
        if o.omega.abs() > o.v_x * kappa_max {
            input_ok = false;
        }
        if o.v_x > 0.0 {
            kappa_sum += o.omega.abs() / o.v_x;
            moving += 1;
        }
        if o.saturated && o.r_delta >= rho {
            saturated_outside_s += 1;
        }
        if let Some(prev) = prev_omega {
            diff_sq += (o.omega - prev).powi(2);
        }
        prev_omega = Some(o.omega);
        n += 1;
    })?;

    Ok(TrialResult {
        spec: *spec,
        curve_max_kappa,
        curvature_ok: curve_max_kappa <= kappa_max * (1.0 + CURVATURE_SLACK),
        relative_length,
        input_ok,
        avg_curvature: if moving > 0 { kappa_sum / moving as f64 } else { 0.0 },
        converge_time: report.t_converge,
        omega_rmse: if n > 1 { (diff_sq / (n - 1) as f64).sqrt() } else { 0.0 },
        saturated_outside_s,
    })
}

/// Batch summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub n_trials: usize,
    pub master_seed: u64,
    pub pct_curvature_ok: f64,
    /// Mean relative length over trials whose curve reached the target.
    pub relative_length: f64,
    pub pct_input_ok: f64,
    pub avg_curvature: f64,
    /// Mean convergence time over converged trials.
    pub avg_time: f64,
    pub omega_rmse: f64,
    pub n_converged: usize,
    pub n_passage: usize,
    pub n_saturated_outside_s: usize,
}

impl MetricsReport {
    pub fn from_trials(batch: &[TrialResult], master_seed: u64) -> Result<Self> {
        Ok(MetricsReport {
            n_trials: batch.len(),
            master_seed,
            pct_curvature_ok: pct_curvature_ok(batch)?,
            relative_length: mean_of(batch, |t| t.relative_length, "a relative length")
                .unwrap_or(f64::NAN),
            pct_input_ok: pct_input_ok(batch)?,
            avg_curvature: avg_curvature(batch)?,
            avg_time: avg_time(batch).unwrap_or(f64::NAN),
            omega_rmse: mean_of(batch, |t| Some(t.omega_rmse), "an omega RMSE")?,
            n_converged: batch.iter().filter(|t| t.converge_time.is_some()).count(),
            n_passage: batch.iter().filter(|t| t.relative_length.is_some()).count(),
            n_saturated_outside_s: batch.iter().map(|t| t.saturated_outside_s).sum(),
        })
    }

    const KEYS: [&'static str; 11] = [
        "n_trials",
        "master_seed",
        "pct_curvature_ok",
        "relative_length",
        "pct_input_ok",
        "avg_curvature",
        "avg_time_s",
        "omega_rmse_rad_per_s",
        "n_converged",
        "n_passage",
        "n_saturated_outside_s",
    ];

    fn values(&self) -> [String; 11] {
        [
            self.n_trials.to_string(),
            self.master_seed.to_string(),
            fmt17(self.pct_curvature_ok),
            fmt17(self.relative_length),
            fmt17(self.pct_input_ok),
            fmt17(self.avg_curvature),
            fmt17(self.avg_time),
            fmt17(self.omega_rmse),
            self.n_converged.to_string(),
            self.n_passage.to_string(),
            self.n_saturated_outside_s.to_string(),
        ]
    }

    /// `key = value` lines.
    pub fn write_kv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in Self::KEYS.iter().zip(self.values()) {
            writeln!(out, "{k} = {v}")?;
        }
        Ok(())
    }

    /// Header line and a single data row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", Self::KEYS.join(","))?;
        writeln!(out, "{}", self.values().join(","))?;
        Ok(())
    }

    pub fn read_kv<R: BufRead>(input: R) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(CvfError::Parse {
                line: i + 1,
                column: 1,
                message: "expected `key = value`".into(),
            })?;
            map.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
        let get = |key: &str| -> Result<(usize, String)> {
            map.get(key).cloned().ok_or(CvfError::Parse {
                line: map.len() + 1,
                column: 1,
                message: format!("missing key `{key}`"),
            })
        };
        let float = |key: &str| -> Result<f64> {
            let (line, v) = get(key)?;
            v.parse().map_err(|e| CvfError::Parse {
                line,
                column: 1,
                message: format!("{key}: {e}"),
            })
        };
        let int = |key: &str| -> Result<u64> {
            let (line, v) = get(key)?;
            v.parse().map_err(|e| CvfError::Parse {
                line,
                column: 1,
                message: format!("{key}: {e}"),
            })
        };
        Ok(MetricsReport {
            n_trials: int("n_trials")? as usize,
            master_seed: int("master_seed")?,
            pct_curvature_ok: float("pct_curvature_ok")?,
            relative_length: float("relative_length")?,
            pct_input_ok: float("pct_input_ok")?,
            avg_curvature: float("avg_curvature")?,
            avg_time: float("avg_time_s")?,
            omega_rmse: float("omega_rmse_rad_per_s")?,
            n_converged: int("n_converged")? as usize,
            n_passage: int("n_passage")? as usize,
            n_saturated_outside_s: int("n_saturated_outside_s")? as usize,
        })
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        self.write_kv(&mut buf).map_err(|_| fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}

/// Runs `mc.n_trials` trials in parallel and aggregates them in trial order.
pub fn run_monte_carlo_trials(
    cvf: &CvfParams,
    ctrl: &ControlParams,
    sim: &SimConfig,
    mc: &MonteCarloConfig,
    master_seed: u64,
) -> Result<Vec<TrialResult>> {
    if mc.n_trials == 0 {
        return Err(CvfError::InsufficientData("at least one trial is required".into()));
    }
    if mc.targets.count == 0 {
        return Err(CvfError::InvalidParams("target set is empty".into()));
    }
    (0..mc.n_trials)
        .into_par_iter()
        .map(|i| {
            let spec = trial_spec(i, master_seed, cvf, ctrl, mc);
            run_trial(&spec, cvf, ctrl, sim, mc)
        })
        .collect()
}

pub fn run_monte_carlo(
    cvf: &CvfParams,
    ctrl: &ControlParams,
    sim: &SimConfig,
    mc: &MonteCarloConfig,
    master_seed: u64,
) -> Result<MetricsReport> {
    let trials = run_monte_carlo_trials(cvf, ctrl, sim, mc, master_seed)?;
    MetricsReport::from_trials(&trials, master_seed)
}
