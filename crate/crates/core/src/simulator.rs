//! Closed-loop unicycle simulation under the saturated controller.

use std::io::{BufRead, Write};

use crate::controller::{control, ControlOutput, ControlParams};
use crate::error::{CvfError, Result};
use crate::format::fmt17;
use crate::geometry::{wrap_angle, Configuration, Vec2};
use crate::vfield::CvfParams;

pub const TRAJECTORY_HEADER: &str =
    "t,x,y,theta,v_x,omega,omega_unsat,k_omega,theta_e,r_delta,saturated,kappa";

/// One-step method for the kinematics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

/// How the control input is applied during a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlHold {
    /// Computed once at the start of the step and held.
    ZeroOrder,
    /// Re-evaluated at every stage of the one-step method, so the step
    /// integrates the closed-loop vector field itself.
    #[default]
    PerStage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub convergence_eps_pos: f64,
    pub convergence_eps_ang: f64,
    pub integrator: Integrator,
    pub hold: ControlHold,
    /// Split steps where `r_delta` crosses `rho`, `r1`, `r2` or `r3`, the
    /// radii at which the closed-loop field loses smoothness.
    pub split_at_boundaries: bool,
    pub stop_on_convergence: bool,
}

impl SimConfig {
    /// Defaults scaled to the turning radius: `dt = 1e-3`, thresholds
    /// `1e-2 rho` and `1e-2` rad.
    pub fn for_params(cvf: &CvfParams, t_max: f64) -> Self {
        SimConfig {
            dt: 1e-3,
            t_max,
            convergence_eps_pos: 1e-2 * cvf.rho(),
            convergence_eps_ang: 1e-2,
            integrator: Integrator::Rk4,
            hold: ControlHold::PerStage,
            split_at_boundaries: true,
            stop_on_convergence: true,
        }
    }

    /// Largest step that still resolves the minimum turning circle.
    pub fn max_dt(cvf: &CvfParams, ctrl: &ControlParams) -> f64 {
        cvf.rho() / (10.0 * ctrl.v_max)
    }

    pub fn validate(&self, cvf: &CvfParams, ctrl: &ControlParams) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CvfError::InvalidParams(format!("dt = {} must be positive", self.dt)));
        }
        let max_dt = Self::max_dt(cvf, ctrl);
        if self.dt > max_dt {
            return Err(CvfError::InvalidParams(format!(
                "dt = {} exceeds rho / (10 v_max) = {max_dt}",
                self.dt
            )));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(CvfError::InvalidParams("t_max must be finite and non-negative".into()));
        }
        if !(self.convergence_eps_pos > 0.0 && self.convergence_eps_ang > 0.0) {
            return Err(CvfError::InvalidParams("convergence thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Advances the unicycle `x' = v cos(theta)`, `y' = v sin(theta)`,
/// `theta' = omega` with `u = (v_x, omega)` held over `dt`.
pub fn step(g: &Configuration, u: (f64, f64), dt: f64, integrator: Integrator) -> Configuration {
    let (v, w) = u;
    match integrator {
        Integrator::Euler => Configuration::from_parts(g.p + g.heading() * (v * dt), g.theta + w * dt),
        Integrator::Rk4 => {
            let h2 = 0.5 * dt;
            let th1 = g.theta;
            let th2 = th1 + h2 * w;
            let th4 = th1 + dt * w;
            let d1 = Vec2::from_angle(th1);
            let d2 = Vec2::from_angle(th2);
            let d4 = Vec2::from_angle(th4);
            // stages two and three share the heading when omega is held
            let dp = (d1 + d2 * 4.0 + d4) * (v * dt / 6.0);
            Configuration::from_parts(g.p + dp, g.theta + w * dt)
        }
    }
}

/// Limit-set error `(d_e, theta_gap)` with `d_e = r_delta - r2` (negative
/// inside the cycle) and `theta_gap = theta - theta_r` wrapped.
pub fn distance_to_limit_set(g: &Configuration, cvf: &CvfParams) -> Result<(f64, f64)> {
    let geom = cvf.geometry(g.p)?;
    Ok((geom.r_delta - cvf.r2(), wrap_angle(g.theta - geom.theta_r)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub g: Configuration,
    pub out: ControlOutput,
}

impl TrajectorySample {
    pub fn kappa(&self) -> f64 {
        self.out.curvature()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.samples.iter().map(|s| s.g.p).collect()
    }

    pub fn max_kappa(&self) -> f64 {
        self.samples.iter().map(TrajectorySample::kappa).fold(0.0, f64::max)
    }

    pub fn final_time(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub converged: bool,
    /// First sample time meeting the convergence thresholds.
    pub t_converge: Option<f64>,
    /// Position and heading error to the target at the final sample.
    pub final_config_error: (f64, f64),
    /// `r_delta - r2` at the final sample.
    pub d_limit_set: f64,
    /// Largest per-step increase of `|theta_e|`; non-positive when the
    /// orientation error never grew.
    pub max_theta_e_increase: f64,
    /// Closed time ranges `[first, last]` of consecutive saturated samples.
    pub saturation_intervals: Vec<(f64, f64)>,
    /// Largest `r_delta` at which a saturated sample was seen.
    pub max_saturated_r_delta: Option<f64>,
    pub steps: usize,
}

impl ConvergenceReport {
    /// Whether the last saturation interval closed before the final sample.
    pub fn saturation_ended(&self, final_time: f64) -> bool {
        self.saturation_intervals.last().is_none_or(|&(_, end)| end < final_time)
    }

    /// `key = value` lines; saturation intervals as `start:end` pairs
    /// separated by `;`.
    pub fn write_kv<W: Write>(&self, mut out: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), fmt17);
        let intervals: Vec<String> = self
            .saturation_intervals
            .iter()
            .map(|&(a, b)| format!("{}:{}", fmt17(a), fmt17(b)))
            .collect();
        writeln!(out, "converged = {}", self.converged)?;
        writeln!(out, "t_converge_s = {}", opt(self.t_converge))?;
        writeln!(out, "final_position_error_m = {}", fmt17(self.final_config_error.0))?;
        writeln!(out, "final_heading_error_rad = {}", fmt17(self.final_config_error.1))?;
        writeln!(out, "d_limit_set_m = {}", fmt17(self.d_limit_set))?;
        writeln!(out, "max_theta_e_increase_rad = {}", fmt17(self.max_theta_e_increase))?;
        writeln!(out, "saturation_interval_count = {}", self.saturation_intervals.len())?;
        writeln!(out, "saturation_intervals_s = {}", intervals.join(";"))?;
        writeln!(out, "max_saturated_r_delta_m = {}", opt(self.max_saturated_r_delta))?;
        writeln!(out, "steps = {}", self.steps)?;
        Ok(())
    }
}

struct Closure<'a> {
    cvf: &'a CvfParams,
    ctrl: &'a ControlParams,
    cfg: &'a SimConfig,
}

fn derivative(c: &Closure, g: &Configuration, t: f64) -> Result<(Vec2, f64)> {
    let out = control(g, c.cvf, c.ctrl, t)?;
    Ok((g.heading() * out.v_x, out.omega))
}

fn advance_once(c: &Closure, g: &Configuration, t: f64, dt: f64) -> Result<Configuration> {
    match (c.cfg.hold, c.cfg.integrator) {
        (ControlHold::ZeroOrder, integrator) => {
            let out = control(g, c.cvf, c.ctrl, t)?;
            Ok(step(g, (out.v_x, out.omega), dt, integrator))
        }
        (ControlHold::PerStage, Integrator::Euler) => {
            let (dp, dth) = derivative(c, g, t)?;
            Ok(Configuration::from_parts(g.p + dp * dt, g.theta + dth * dt))
        }
        (ControlHold::PerStage, Integrator::Rk4) => {
            let h2 = 0.5 * dt;
            let at = |dp: Vec2, dth: f64, h: f64| {
                Configuration::from_parts(g.p + dp * h, g.theta + dth * h)
            };
            let (p1, w1) = derivative(c, g, t)?;
            let (p2, w2) = derivative(c, &at(p1, w1, h2), t + h2)?;
            let (p3, w3) = derivative(c, &at(p2, w2, h2), t + h2)?;
            let (p4, w4) = derivative(c, &at(p3, w3, dt), t + dt)?;
            let dp = (p1 + p2 * 2.0 + p3 * 2.0 + p4) * (dt / 6.0);
            let dth = (w1 + 2.0 * w2 + 2.0 * w3 + w4) * (dt / 6.0);
            Ok(Configuration::from_parts(g.p + dp, g.theta + dth))
        }
    }
}

const MAX_SPLITS: usize = 4;
const BISECTION_ITERS: usize = 60;

fn advance(c: &Closure, g: &Configuration, t: f64, dt: f64, depth: usize) -> Result<Configuration> {
    let end = advance_once(c, g, t, dt)?;
    if !c.cfg.split_at_boundaries || depth >= MAX_SPLITS {
        return Ok(end);
    }
    let center = c.cvf.singular_point();
    let r_start = g.p.distance(center);
    let r_end = end.p.distance(center);
    let skip = 1e-10 * c.cvf.r2();
    let crossing = [c.cvf.rho(), c.cvf.r1(), c.cvf.r2(), c.cvf.r3()]
        .into_iter()
        .filter(|&b| (r_start - b) * (r_end - b) < 0.0)
        .filter(|&b| (r_start - b).abs() > skip || (r_end - b).abs() > skip)
        .min_by(|a, b| (r_start - a).abs().total_cmp(&(r_start - b).abs()));
    let Some(boundary) = crossing else {
        return Ok(end);
    };
    let side = (r_start - boundary).signum();
    let (mut lo, mut hi) = (0.0, dt);
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = advance_once(c, g, t, mid)?.p.distance(center);
        if (r - boundary) * side > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi >= dt {
        return Ok(end);
    }
    let crossed = advance_once(c, g, t, hi)?;
    advance(c, &crossed, t + hi, dt - hi, depth + 1)
}

/// Runs the closed loop from `g0`, handing every sample to `sink` instead of
/// storing it.
pub fn simulate_with<F: FnMut(&TrajectorySample)>(
    g0: &Configuration,
    cvf: &CvfParams,
    ctrl: &ControlParams,
    cfg: &SimConfig,
    mut sink: F,
) -> Result<ConvergenceReport> {
    cfg.validate(cvf, ctrl)?;
    ctrl.validate()?;
    let closure = Closure { cvf, ctrl, cfg };
    let target = cvf.target();
    let n_steps = (cfg.t_max / cfg.dt).floor() as usize;

    let mut g = *g0;
    let mut out = control(&g, cvf, ctrl, 0.0)?;
    let mut report = ConvergenceReport {
        converged: false,
        t_converge: None,
        final_config_error: (0.0, 0.0),
        d_limit_set: 0.0,
        max_theta_e_increase: f64::NEG_INFINITY,
        saturation_intervals: Vec::new(),
        max_saturated_r_delta: None,
        steps: 0,
    };
    let mut saturation_start: Option<f64> = None;
    let mut last_t = 0.0;

    for i in 0..=n_steps {
        let t = i as f64 * cfg.dt;
        if i > 0 {
            let prev_abs = out.theta_e.abs();
            g = advance(&closure, &g, last_t, t - last_t, 0)?;
            if g.p.distance(cvf.singular_point()) <= cvf.guard_radius() {
                return Err(CvfError::Singular {
                    r_delta: g.p.distance(cvf.singular_point()),
                    guard: cvf.guard_radius(),
                });
            }
            out = control(&g, cvf, ctrl, t)?;
            report.max_theta_e_increase = report.max_theta_e_increase.max(out.theta_e.abs() - prev_abs);
            report.steps = i;
        }
        let sample = TrajectorySample { t, g, out };
        sink(&sample);

        if out.saturated {
            saturation_start.get_or_insert(t);
            let r = report.max_saturated_r_delta.map_or(out.r_delta, |m| m.max(out.r_delta));
            report.max_saturated_r_delta = Some(r);
        } else if let Some(start) = saturation_start.take() {
            report.saturation_intervals.push((start, last_t));
        }
        last_t = t;

        let converged = if ctrl.v_min > 0.0 {
            (out.r_delta - cvf.r2()).abs() < cfg.convergence_eps_pos
                && out.theta_e.abs() < cfg.convergence_eps_ang
        } else {
            g.p.distance(target.p) < cfg.convergence_eps_pos
                && out.theta_e.abs() < cfg.convergence_eps_ang
                && wrap_angle(g.theta - target.theta).abs() < cfg.convergence_eps_ang
        };
        if converged && !report.converged {
            report.converged = true;
            report.t_converge = Some(t);
            if cfg.stop_on_convergence {
                break;
            }
        }
    }
    if let Some(start) = saturation_start {
        report.saturation_intervals.push((start, last_t));
    }
    if report.steps == 0 {
        report.max_theta_e_increase = 0.0;
    }
    report.final_config_error = (
        g.p.distance(target.p),
        wrap_angle(g.theta - target.theta).abs(),
    );
    report.d_limit_set = out.r_delta - cvf.r2();
    Ok(report)
}

/// Runs the closed loop from `g0` and records every sample.
pub fn simulate(
    g0: &Configuration,
    cvf: &CvfParams,
    ctrl: &ControlParams,
    cfg: &SimConfig,
) -> Result<(Trajectory, ConvergenceReport)> {
    let mut samples = Vec::with_capacity(((cfg.t_max / cfg.dt) as usize + 1).min(1 << 22));
    let report = simulate_with(g0, cvf, ctrl, cfg, |s| samples.push(*s))?;
    Ok((Trajectory { samples }, report))
}

/// Times at which the configuration distance to `g_d` reaches a local
/// minimum below `eps`, one per excursion into the `eps` neighbourhood.
pub fn passage_events(traj: &Trajectory, g_d: &Configuration, eps: f64) -> Vec<f64> {
    let mut events = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for s in &traj.samples {
        let d = s.g.distance(g_d);
        if d < eps {
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, s.t));
            }
        } else if let Some((_, t)) = best.take() {
            events.push(t);
        }
    }
    if let Some((_, t)) = best {
        events.push(t);
    }
    events
}

/// Writes the trajectory CSV (header line, then one row per sample).
pub fn write_trajectory_csv<W: Write>(mut out: W, traj: &Trajectory) -> Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for s in &traj.samples {
        let o = &s.out;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt17(s.t),
            fmt17(s.g.p.x),
            fmt17(s.g.p.y),
            fmt17(s.g.theta),
            fmt17(o.v_x),
            fmt17(o.omega),
            fmt17(o.omega_unsat),
            fmt17(o.k_omega),
            fmt17(o.theta_e),
            fmt17(o.r_delta),
            u8::from(o.saturated),
            fmt17(s.kappa()),
        )?;
    }
    Ok(())
}

/// Reads a trajectory CSV. The feedforward is recovered as
/// `omega_unsat + k_omega theta_e`; `k_r` and `cos_dtheta` are not stored and
/// come back as NaN.
pub fn read_trajectory_csv<R: BufRead>(input: R) -> Result<Trajectory> {
    let mut lines = input.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).transpose()?;
    match header {
        Some(line) if line.trim() == TRAJECTORY_HEADER => {}
        _ => {
            return Err(CvfError::Parse {
                line: 1,
                column: 1,
                message: format!("expected header `{TRAJECTORY_HEADER}`"),
            })
        }
    }
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = Vec::with_capacity(12);
        let mut column = 1;
        for field in line.split(',') {
            let value = match field.trim() {
                "nan" => Ok(f64::NAN),
                other => other.parse::<f64>(),
            };
            fields.push(value.map_err(|e| CvfError::Parse {
                line: idx + 1,
                column,
                message: format!("bad number `{field}`: {e}"),
            })?);
            column += field.len() + 1;
        }
        if fields.len() != 12 {
            return Err(CvfError::Parse {
                line: idx + 1,
                column: 1,
                message: format!("expected 12 fields, found {}", fields.len()),
            });
        }
        let out = ControlOutput {
            v_x: fields[4],
            omega: fields[5],
            omega_unsat: fields[6],
            omega_ff: fields[6] + fields[7] * fields[8],
            k_omega: fields[7],
            theta_e: fields[8],
            saturated: fields[10] != 0.0,
            r_delta: fields[9],
            k_r: f64::NAN,
            cos_dtheta: f64::NAN,
        };
        samples.push(TrajectorySample {
            t: fields[0],
            g: Configuration::from_parts(Vec2::new(fields[1], fields[2]), fields[3]),
            out,
        });
    }
    Ok(Trajectory { samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn straight_line_step() {
        let g = Configuration::new(0.0, 0.0, 0.0);
        for integrator in [Integrator::Euler, Integrator::Rk4] {
            let n = step(&g, (1.0, 0.0), 0.1, integrator);
            assert!((n.p.x - 0.1).abs() < 1e-15);
            assert_eq!(n.p.y, 0.0);
            assert_eq!(n.theta, 0.0);
        }
    }

    #[test]
    fn unit_circle_returns_to_start() {
        let mut g = Configuration::new(0.0, 0.0, 0.0);
        let dt = 1e-3;
        let n = (2.0 * PI / dt).round() as usize;
        let rem = 2.0 * PI - n as f64 * dt;
        for _ in 0..n {
            g = step(&g, (1.0, 1.0), dt, Integrator::Rk4);
        }
        g = step(&g, (1.0, 1.0), rem, Integrator::Rk4);
        assert!(g.p.norm() < 1e-6);
        assert!(wrap_angle(g.theta).abs() < 1e-9);
    }

    #[test]
    fn at_rest_is_fixed_point() {
        let g = Configuration::new(1.0, 2.0, 0.5);
        assert_eq!(step(&g, (0.0, 0.0), 0.3, Integrator::Rk4), g);
    }

    fn params() -> (CvfParams, ControlParams) {
        (
            CvfParams::new(Vec2::new(-8.0, 0.0), -PI / 2.0, 4.0, 8.0, 12.0, 1.0).unwrap(),
            ControlParams::new(0.0, 1.0, 12.0, PI, 1.0, 0.0).unwrap(),
        )
    }

    #[test]
    fn limit_set_distance() {
        let (cvf, _) = params();
        let (d, gap) = distance_to_limit_set(&cvf.target(), &cvf).unwrap();
        assert!(d.abs() < 1e-12 && gap.abs() < 1e-12);
        let far = Configuration::from_parts(cvf.singular_point() + Vec2::new(16.0, 0.0), 0.0);
        assert!((distance_to_limit_set(&far, &cvf).unwrap().0 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn sample_count_and_times() {
        let (cvf, ctrl) = params();
        let mut cfg = SimConfig::for_params(&cvf, 0.5);
        cfg.dt = 0.01;
        let (traj, _) = simulate(&Configuration::new(5.0, 5.0, 0.0), &cvf, &ctrl, &cfg).unwrap();
        assert_eq!(traj.len(), 51);
        assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn oversized_step_rejected() {
        let (cvf, ctrl) = params();
        let mut cfg = SimConfig::for_params(&cvf, 1.0);
        cfg.dt = 0.2;
        assert!(simulate(&Configuration::new(5.0, 5.0, 0.0), &cvf, &ctrl, &cfg).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let (cvf, ctrl) = params();
        let mut cfg = SimConfig::for_params(&cvf, 0.2);
        cfg.dt = 0.01;
        let (traj, _) = simulate(&Configuration::new(3.0, -2.0, 1.0), &cvf, &ctrl, &cfg).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        let back = read_trajectory_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), traj.len());
        for (a, b) in traj.samples.iter().zip(&back.samples) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.g, b.g);
            assert_eq!(a.out.omega, b.out.omega);
            assert_eq!(a.out.saturated, b.out.saturated);
            assert_eq!(a.kappa(), b.kappa());
        }
    }

    #[test]
    fn empty_trajectory_is_header_only() {
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &Trajectory::default()).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{TRAJECTORY_HEADER}\n"));
    }

    #[test]
    fn passage_events_group_excursions() {
        let g_d = Configuration::new(0.0, 0.0, 0.0);
        let xs = [3.0, 0.5, 0.2, 0.6, 3.0, 0.4, 0.1];
        let samples = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| TrajectorySample {
                t: i as f64,
                g: Configuration::new(x, 0.0, 0.0),
                out: ControlOutput::default(),
            })
            .collect();
        let events = passage_events(&Trajectory { samples }, &g_d, 1.0);
        assert_eq!(events, vec![2.0, 6.0]);
        assert!(passage_events(&Trajectory::default(), &g_d, 1.0).is_empty());
    }
}
