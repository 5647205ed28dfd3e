//! Scenario files: sectioned `key = value` text with units in key names.
//! `#` starts a comment that runs to the end of the line.
//!
//! ```text
//! name = unicycle_run2
//!
//! [target]
//! x_m = -8
//! y_m = 0
//! theta_rad = -pi/2
//!
//! [field]
//! r1_m = 4
//! r2_m = 8
//! r3_m = 12
//! kappa_max_per_m = 1
//!
//! [control]
//! v_min_m_per_s = 0
//! v_max_m_per_s = 1
//! c_p_m = 12
//! c_theta_rad = pi
//! k_omega_max_per_s = 1
//!
//! [initial]
//! x_m = -1.2
//! y_m = 0
//! theta_rad = -pi/6
//! ```
//!
//! Numeric values are arithmetic expressions over `+ - * / ^`, parentheses,
//! `pi` and `sqrt(..)`; a number directly followed by a name or a
//! parenthesis multiplies it, so `5pi/4` and `4 sqrt(3)` are accepted.
//! Lines starting with `#` are comments. Sections `[sim]`, `[uav]` and
//! either `[initial]` or `[batch]` complete the file; see the bundled
//! scenarios for every key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::controller::ControlParams;
use crate::error::{CvfError, Result};
use crate::fixedwing::{write_setpoints_csv, DragModel, Setpoint, UavParams};
use crate::geometry::{Configuration, Vec2};
use crate::metrics::{MetricsReport, MonteCarloConfig, TargetSet, Variant};
use crate::simulator::{
    read_trajectory_csv, write_trajectory_csv, ControlHold, ConvergenceReport, Integrator, SimConfig, Trajectory,
};
use crate::vfield::{check_curvature_condition, check_stabilization_condition, CvfParams, FeasibilityReport};

/// Default horizon for single runs, s.
pub const DEFAULT_T_MAX: f64 = 4000.0;

/// Evaluates a scenario value expression.
pub fn eval_expression(text: &str) -> std::result::Result<f64, (usize, String)> {
    let chars: Vec<char> = text.chars().collect();
    let mut p = ExprParser { chars: &chars, pos: 0 };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos < chars.len() {
        return Err((p.pos, format!("unexpected `{}`", chars[p.pos])));
    }
    Ok(v)
}

struct ExprParser<'a> {
    chars: &'a [char],
    pos: usize,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expr(&mut self) -> std::result::Result<f64, (usize, String)> {
        let mut v = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            v = if c == '+' { v + rhs } else { v - rhs };
        }
        Ok(v)
    }

    fn term(&mut self) -> std::result::Result<f64, (usize, String)> {
        let mut v = self.unary()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    v *= self.unary()?;
                }
                Some('/') => {
                    self.pos += 1;
                    v /= self.unary()?;
                }
                Some(c) if c.is_ascii_alphanumeric() || c == '(' || c == '.' => v *= self.power()?,
                _ => return Ok(v),
            }
        }
    }

    fn unary(&mut self) -> std::result::Result<f64, (usize, String)> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> std::result::Result<f64, (usize, String)> {
        let base = self.primary()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            return Ok(base.powf(self.unary()?));
        }
        Ok(base)
    }

    fn primary(&mut self) -> std::result::Result<f64, (usize, String)> {
        let start = self.pos;
        match self.peek() {
            None => Err((self.pos, "expected a value".into())),
            Some('(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(')') {
                    return Err((self.pos, "expected `)`".into()));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let begin = self.pos;
                while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_') {
                    self.pos += 1;
                }
                let name: String = self.chars[begin..self.pos].iter().collect();
                match name.as_str() {
                    "pi" => Ok(std::f64::consts::PI),
                    "sqrt" => {
                        if self.peek() != Some('(') {
                            return Err((self.pos, "expected `(` after sqrt".into()));
                        }
                        self.primary().map(f64::sqrt)
                    }
                    "inf" => Ok(f64::INFINITY),
                    _ => Err((begin, format!("unknown name `{name}`"))),
                }
            }
            Some(c) => Err((start.max(self.pos), format!("unexpected `{c}`"))),
        }
    }

    fn number(&mut self) -> std::result::Result<f64, (usize, String)> {
        let begin = self.pos;
        let digits = |p: &mut Self| {
            while p.chars.get(p.pos).is_some_and(|c| c.is_ascii_digit()) {
                p.pos += 1;
            }
        };
        digits(self);
        if self.chars.get(self.pos) == Some(&'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.chars.get(self.pos), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.chars.get(self.pos), Some('+' | '-')) {
                self.pos += 1;
            }
            if self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let s: String = self.chars[begin..self.pos].iter().collect();
        s.parse().map_err(|_| (begin, format!("bad number `{s}`")))
    }
}

/// Where the robot starts.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Single(Configuration),
    Batch { mc: MonteCarloConfig, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub cvf: CvfParams,
    pub ctrl: ControlParams,
    pub sim: SimConfig,
    pub start: Start,
    pub variant: Variant,
    pub uav: Option<UavParams>,
    pub feasibility: FeasibilityReport,
}

impl Scenario {
    pub fn initial(&self) -> Option<Configuration> {
        match self.start {
            Start::Single(g) => Some(g),
            Start::Batch { .. } => None,
        }
    }
}

#[derive(Debug)]
struct Entry {
    line: usize,
    value_column: usize,
    value: String,
    used: bool,
}

type Section = BTreeMap<String, Entry>;

struct Document {
    sections: BTreeMap<String, (usize, Section)>,
    last_line: usize,
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> CvfError {
    CvfError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_document(text: &str) -> Result<Document> {
    let mut sections: BTreeMap<String, (usize, Section)> = BTreeMap::new();
    sections.insert(String::new(), (0, Section::new()));
    let mut current = String::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let raw = raw.split_once('#').map_or(raw, |(before, _)| before).trim_end();
        let indent = raw.len() - raw.trim_start().len();
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_error(line_no, indent + line.len(), "expected `]`"))?
                .trim()
                .to_string();
            if sections.contains_key(&name) {
                return Err(parse_error(line_no, indent + 1, format!("duplicate section [{name}]")));
            }
            sections.insert(name.clone(), (line_no, Section::new()));
            current = name;
            continue;
        }
        let eq = raw
            .find('=')
            .ok_or_else(|| parse_error(line_no, indent + 1, "expected `key = value`"))?;
        let key = raw[..eq].trim().to_string();
        if key.is_empty() {
            return Err(parse_error(line_no, indent + 1, "empty key"));
        }
        let after = &raw[eq + 1..];
        let value_offset = eq + 1 + (after.len() - after.trim_start().len());
        let value = after.trim().to_string();
        let section = &mut sections.get_mut(&current).unwrap().1;
        if section.contains_key(&key) {
            return Err(parse_error(line_no, indent + 1, format!("duplicate key `{key}`")));
        }
        section.insert(
            key,
            Entry {
                line: line_no,
                value_column: value_offset + 1,
                value,
                used: false,
            },
        );
    }
    Ok(Document { sections, last_line })
}

impl Document {
    fn has(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    fn entry(&mut self, section: &str, key: &str) -> Option<&mut Entry> {
        let e = self.sections.get_mut(section)?.1.get_mut(key)?;
        e.used = true;
        Some(e)
    }

    fn missing(&self, section: &str, key: &str) -> CvfError {
        let line = self.sections.get(section).map_or(self.last_line, |s| s.0);
        let label = if section.is_empty() { String::new() } else { format!("[{section}] ") };
        parse_error(line.max(1), 1, format!("missing key {label}`{key}`"))
    }

    fn text(&mut self, section: &str, key: &str) -> Result<Option<String>> {
        Ok(self.entry(section, key).map(|e| e.value.clone()))
    }

    fn float_opt(&mut self, section: &str, key: &str) -> Result<Option<f64>> {
        let Some(e) = self.entry(section, key) else {
            return Ok(None);
        };
        eval_expression(&e.value)
            .map(Some)
            .map_err(|(col, msg)| parse_error(e.line, e.value_column + col, msg))
    }

    fn float(&mut self, section: &str, key: &str) -> Result<f64> {
        self.float_opt(section, key)?.ok_or_else(|| self.missing(section, key))
    }

    fn float_or(&mut self, section: &str, key: &str, default: f64) -> Result<f64> {
        Ok(self.float_opt(section, key)?.unwrap_or(default))
    }

    fn integer_or(&mut self, section: &str, key: &str, default: u64) -> Result<u64> {
        let Some(e) = self.entry(section, key) else {
            return Ok(default);
        };
        e.value
            .parse()
            .map_err(|_| parse_error(e.line, e.value_column, format!("`{}` is not an unsigned integer", e.value)))
    }

    fn choice<T: Copy>(&mut self, section: &str, key: &str, options: &[(&str, T)], default: T) -> Result<T> {
        let Some(e) = self.entry(section, key) else {
            return Ok(default);
        };
        options
            .iter()
            .find(|(name, _)| *name == e.value)
            .map(|&(_, v)| v)
            .ok_or_else(|| {
                let names: Vec<_> = options.iter().map(|(n, _)| *n).collect();
                parse_error(e.line, e.value_column, format!("expected one of {}", names.join(", ")))
            })
    }

    fn reject_unused(&self) -> Result<()> {
        for (name, (_, section)) in &self.sections {
            if let Some((key, e)) = section.iter().find(|(_, e)| !e.used) {
                let label = if name.is_empty() { String::new() } else { format!(" in [{name}]") };
                return Err(parse_error(e.line, 1, format!("unknown key `{key}`{label}")));
            }
        }
        Ok(())
    }
}

fn configuration(doc: &mut Document, section: &str) -> Result<Configuration> {
    Ok(Configuration::new(
        doc.float(section, "x_m")?,
        doc.float(section, "y_m")?,
        doc.float(section, "theta_rad")?,
    ))
}

const BOOLS: [(&str, bool); 2] = [("true", true), ("false", false)];

/// Parses and validates scenario text. Infeasible parameters are rejected
/// unless `allow_infeasible` is set.
pub fn parse_scenario(text: &str, allow_infeasible: bool) -> Result<Scenario> {
    let mut doc = parse_document(text)?;
    for required in ["target", "field", "control"] {
        if !doc.has(required) {
            return Err(parse_error(doc.last_line.max(1), 1, format!("missing section [{required}]")));
        }
    }
    let name = doc.text("", "name")?.unwrap_or_else(|| "scenario".into());
    let target = configuration(&mut doc, "target")?;
    let cvf = CvfParams::new(
        target.p,
        target.theta,
        doc.float("field", "r1_m")?,
        doc.float("field", "r2_m")?,
        doc.float("field", "r3_m")?,
        doc.float("field", "kappa_max_per_m")?,
    )?;
    let ctrl = ControlParams::new(
        doc.float("control", "v_min_m_per_s")?,
        doc.float("control", "v_max_m_per_s")?,
        doc.float("control", "c_p_m")?,
        doc.float("control", "c_theta_rad")?,
        doc.float("control", "k_omega_max_per_s")?,
        doc.float_or("control", "ramp_rate_per_s", 0.0)?,
    )?;
    let variant = Variant::of(&ctrl);
    let declared = doc.choice(
        "",
        "variant",
        &[("converge", Variant::Converge), ("loiter", Variant::Loiter)],
        variant,
    )?;
    if declared != variant {
        return Err(CvfError::InvalidParams(format!(
            "variant {declared:?} contradicts v_min = {}",
            ctrl.v_min
        )));
    }

    let defaults = SimConfig::for_params(&cvf, DEFAULT_T_MAX);
    let sim = SimConfig {
        dt: doc.float_or("sim", "dt_s", defaults.dt)?,
        t_max: doc.float_or("sim", "t_max_s", defaults.t_max)?,
        convergence_eps_pos: doc.float_or("sim", "eps_pos_m", defaults.convergence_eps_pos)?,
        convergence_eps_ang: doc.float_or("sim", "eps_ang_rad", defaults.convergence_eps_ang)?,
        integrator: doc.choice(
            "sim",
            "integrator",
            &[("rk4", Integrator::Rk4), ("euler", Integrator::Euler)],
            defaults.integrator,
        )?,
        hold: doc.choice(
            "sim",
            "hold",
            &[("per_stage", ControlHold::PerStage), ("zero_order", ControlHold::ZeroOrder)],
            defaults.hold,
        )?,
        split_at_boundaries: doc.choice("sim", "split_at_boundaries", &BOOLS, defaults.split_at_boundaries)?,
        stop_on_convergence: doc.choice("sim", "stop_on_convergence", &BOOLS, defaults.stop_on_convergence)?,
    };
    sim.validate(&cvf, &ctrl)?;

    let start = match (doc.has("initial"), doc.has("batch")) {
        (true, false) => Start::Single(configuration(&mut doc, "initial")?),
        (false, true) => {
            let d = MonteCarloConfig::for_params(&cvf, 1);
            let mc = MonteCarloConfig {
                n_trials: doc.integer_or("batch", "trials", 1000)? as usize,
                targets: TargetSet {
                    count: doc.integer_or("batch", "targets", 4)? as usize,
                    phase: doc.float_or("batch", "phase_rad", 0.0)?,
                    center: Vec2::new(
                        doc.float_or("batch", "center_x_m", 0.0)?,
                        doc.float_or("batch", "center_y_m", 0.0)?,
                    ),
                },
                half_width: doc.float_or("batch", "half_width_m", d.half_width)?,
                passage_tolerance: doc.float_or("batch", "passage_tolerance_m", d.passage_tolerance)?,
                arc_step: doc.float_or("batch", "arc_step_m", d.arc_step)?,
                max_curve_length: doc.float_or("batch", "max_curve_length_m", d.max_curve_length)?,
            };
            if mc.n_trials == 0 || mc.targets.count == 0 {
                return Err(CvfError::InvalidParams("batch needs at least one trial and one target".into()));
            }
            if !(mc.half_width > 0.0 && mc.passage_tolerance > 0.0 && mc.arc_step > 0.0) {
                return Err(CvfError::InvalidParams("batch sizes must be positive".into()));
            }
            Start::Batch {
                mc,
                seed: doc.integer_or("batch", "seed", 1)?,
            }
        }
        _ => {
            return Err(parse_error(
                doc.last_line.max(1),
                1,
                "exactly one of [initial] or [batch] is required",
            ))
        }
    };

    let uav = if doc.has("uav") {
        let u = UavParams {
            v_min: doc.float("uav", "v_min_m_per_s")?,
            v_max: doc.float("uav", "v_max_m_per_s")?,
            gravity: doc.float_or("uav", "gravity_m_per_s2", 9.81)?,
            mass: doc.float("uav", "mass_kg")?,
            k_beta: doc.float("uav", "k_beta_per_s")?,
            k_t: doc.float("uav", "k_t_per_s")?,
            drag: DragModel::Quadratic {
                c_d: doc.float("uav", "drag_coefficient_kg_per_m")?,
            },
            h_d: doc.float("uav", "h_d_m")?,
        };
        u.validate()?;
        Some(u)
    } else {
        None
    };
    doc.reject_unused()?;

    let feasibility = check_curvature_condition(&cvf).merge(check_stabilization_condition(&cvf));
    if !feasibility.passed() {
        let names = feasibility.violated_names().join(", ");
        if allow_infeasible {
            log::warn!("scenario {name}: infeasible parameters ({names}), continuing");
        } else {
            return Err(CvfError::Infeasible(format!("violated: {names}")));
        }
    }

    Ok(Scenario {
        name,
        cvf,
        ctrl,
        sim,
        start,
        variant,
        uav,
        feasibility,
    })
}

pub fn load_scenario(path: &Path, allow_infeasible: bool) -> Result<Scenario> {
    parse_scenario(&std::fs::read_to_string(path)?, allow_infeasible)
}

/// Serializes a scenario; every number is written in shortest round-trip
/// form so that loading the text reproduces the scenario exactly.
pub fn scenario_to_string(s: &Scenario) -> Result<String> {
    let mut out = String::new();
    let w = &mut out;
    let fmt_err = |_| CvfError::InvalidParams("formatting failed".into());
    (|| -> std::fmt::Result {
        writeln!(w, "name = {}", s.name)?;
        writeln!(
            w,
            "variant = {}",
            match s.variant {
                Variant::Converge => "converge",
                Variant::Loiter => "loiter",
            }
        )?;
        let t = s.cvf.target();
        writeln!(w, "\n[target]\nx_m = {:?}\ny_m = {:?}\ntheta_rad = {:?}", t.p.x, t.p.y, t.theta)?;
        writeln!(
            w,
            "\n[field]\nr1_m = {:?}\nr2_m = {:?}\nr3_m = {:?}\nkappa_max_per_m = {:?}",
            s.cvf.r1(),
            s.cvf.r2(),
            s.cvf.r3(),
            s.cvf.kappa_max()
        )?;
        let c = &s.ctrl;
        writeln!(
            w,
            "\n[control]\nv_min_m_per_s = {:?}\nv_max_m_per_s = {:?}\nc_p_m = {:?}\nc_theta_rad = {:?}\n\
             k_omega_max_per_s = {:?}\nramp_rate_per_s = {:?}",
            c.v_min, c.v_max, c.c_p, c.c_theta, c.k_omega_max, c.ramp_rate
        )?;
        let m = &s.sim;
        writeln!(
            w,
            "\n[sim]\ndt_s = {:?}\nt_max_s = {:?}\neps_pos_m = {:?}\neps_ang_rad = {:?}\nintegrator = {}\n\
             hold = {}\nsplit_at_boundaries = {}\nstop_on_convergence = {}",
            m.dt,
            m.t_max,
            m.convergence_eps_pos,
            m.convergence_eps_ang,
            match m.integrator {
                Integrator::Rk4 => "rk4",
                Integrator::Euler => "euler",
            },
            match m.hold {
                ControlHold::PerStage => "per_stage",
                ControlHold::ZeroOrder => "zero_order",
            },
            m.split_at_boundaries,
            m.stop_on_convergence
        )?;
        match &s.start {
            Start::Single(g) => {
                writeln!(w, "\n[initial]\nx_m = {:?}\ny_m = {:?}\ntheta_rad = {:?}", g.p.x, g.p.y, g.theta)?
            }
            Start::Batch { mc, seed } => writeln!(
                w,
                "\n[batch]\ntrials = {}\nseed = {}\ntargets = {}\nphase_rad = {:?}\ncenter_x_m = {:?}\n\
                 center_y_m = {:?}\nhalf_width_m = {:?}\npassage_tolerance_m = {:?}\narc_step_m = {:?}\n\
                 max_curve_length_m = {:?}",
                mc.n_trials,
                seed,
                mc.targets.count,
                mc.targets.phase,
                mc.targets.center.x,
                mc.targets.center.y,
                mc.half_width,
                mc.passage_tolerance,
                mc.arc_step,
                mc.max_curve_length
            )?,
        }
        Ok(())
    })()
    .map_err(fmt_err)?;
    if let Some(u) = &s.uav {
        let DragModel::Quadratic { c_d } = u.drag else {
            return Err(CvfError::InvalidParams("only quadratic drag can be saved".into()));
        };
        writeln!(
            out,
            "\n[uav]\nv_min_m_per_s = {:?}\nv_max_m_per_s = {:?}\ngravity_m_per_s2 = {:?}\nmass_kg = {:?}\n\
             k_beta_per_s = {:?}\nk_t_per_s = {:?}\ndrag_coefficient_kg_per_m = {:?}\nh_d_m = {:?}",
            u.v_min, u.v_max, u.gravity, u.mass, u.k_beta, u.k_t, c_d, u.h_d
        )
        .map_err(fmt_err)?;
    }
    Ok(out)
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<()> {
    std::fs::write(path, scenario_to_string(s)?)?;
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

/// Writes a batch report as `key = value` text.
pub fn save_report(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    report.write_kv(&mut f)?;
    f.flush()?;
    Ok(())
}

/// Writes a batch report as a one-row CSV.
pub fn save_report_csv(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    report.write_csv(&mut f)?;
    f.flush()?;
    Ok(())
}

pub fn save_convergence_report(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    report.write_kv(&mut f)?;
    f.flush()?;
    Ok(())
}

pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    write_trajectory_csv(&mut f, traj)?;
    f.flush()?;
    Ok(())
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    read_trajectory_csv(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_setpoints(setpoints: &[Setpoint], path: &Path) -> Result<()> {
    let mut f = create(path)?;
    write_setpoints_csv(&mut f, setpoints)?;
    f.flush()?;
    Ok(())
}
