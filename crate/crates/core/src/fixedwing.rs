//! Planar `(v_x, omega)` commands converted to fixed-wing attitude and
//! thrust setpoints under a coordinated turn at constant altitude.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::controller::{control, linear_velocity, linear_velocity_rate, ControlParams};
use crate::error::{CvfError, Result};
use crate::format::fmt17;
use crate::geometry::{Configuration, Vec2};
use crate::simulator::Trajectory;
use crate::vfield::CvfParams;

pub const SETPOINT_HEADER: &str = "t,alpha_d,beta_d,gamma_d,F_T";

/// Orthonormality and determinant tolerance for rotation inputs.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Yaw, pitch and roll, composed as `Rz(yaw) Ry(pitch) Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl EulerAngles {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        EulerAngles { yaw, pitch, roll }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rot_z(self.yaw) * rot_y(self.pitch) * rot_x(self.roll)
    }
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Aerodynamic drag as a function of airspeed.
#[derive(Clone)]
pub enum DragModel {
    /// `c_d V^2`, N.
    Quadratic { c_d: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl DragModel {
    pub fn force(&self, airspeed: f64) -> f64 {
        match self {
            DragModel::Quadratic { c_d } => c_d * airspeed * airspeed,
            DragModel::Custom(f) => f(airspeed),
        }
    }
}

impl fmt::Debug for DragModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DragModel::Quadratic { c_d } => write!(f, "Quadratic {{ c_d: {c_d} }}"),
            DragModel::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl PartialEq for DragModel {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (DragModel::Quadratic { c_d: a }, DragModel::Quadratic { c_d: b }) => a == b,
            (DragModel::Custom(a), DragModel::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavParams {
    pub v_min: f64,
    pub v_max: f64,
    pub gravity: f64,
    pub mass: f64,
    pub k_beta: f64,
    pub k_t: f64,
    pub drag: DragModel,
    /// Commanded altitude, m.
    pub h_d: f64,
}

impl UavParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_min > 0.0 && self.v_max >= self.v_min) {
            return Err(CvfError::InvalidParams(format!(
                "airspeed bounds [{}, {}] must satisfy 0 < v_min <= v_max",
                self.v_min, self.v_max
            )));
        }
        if !(self.gravity > 0.0 && self.mass > 0.0) {
            return Err(CvfError::InvalidParams("gravity and mass must be positive".into()));
        }
        if !(self.k_beta.is_finite() && self.k_t.is_finite() && self.h_d.is_finite()) {
            return Err(CvfError::InvalidParams("UAV gains must be finite".into()));
        }
        Ok(())
    }
}

fn require_airspeed(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CvfError::Domain(format!("airspeed {v} must be positive")))
    }
}

/// Pitch setpoint `K_beta (h - h_d) / V`.
pub fn pitch_setpoint(h: f64, airspeed: f64, params: &UavParams) -> Result<f64> {
    require_airspeed(airspeed)?;
    Ok(params.k_beta * (h - params.h_d) / airspeed)
}

/// Yaw setpoint aligning the heading with the field at `p_xy`.
pub fn yaw_setpoint(p_xy: Vec2, cvf: &CvfParams) -> Result<f64> {
    Ok(cvf.geometry(p_xy)?.theta_r)
}

/// Roll setpoint `-atan(omega V / g)` making the coordinated-turn yaw rate
/// equal `omega`.
pub fn roll_setpoint(omega: f64, airspeed: f64, gravity: f64) -> f64 {
    -(omega * airspeed / gravity).atan()
}

/// Coordinated-turn yaw rate `-(g / V) tan(roll)` at zero pitch.
pub fn turn_rate(roll: f64, airspeed: f64, gravity: f64) -> f64 {
    -(gravity / airspeed) * roll.tan()
}

/// Thrust `max((-K_T (V - v_x) + v_x') m + F_D(V), 0)`.
pub fn thrust_setpoint(airspeed: f64, v_x_cmd: f64, v_x_cmd_rate: f64, params: &UavParams) -> Result<f64> {
    require_airspeed(airspeed)?;
    let force = (-params.k_t * (airspeed - v_x_cmd) + v_x_cmd_rate) * params.mass
        + params.drag.force(airspeed);
    Ok(force.max(0.0))
}

fn check_rotation(r: &Matrix3<f64>, which: &str) -> Result<()> {
    let orthogonality = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = r.determinant();
    if !(orthogonality <= ROTATION_TOLERANCE && (det - 1.0).abs() <= ROTATION_TOLERANCE) {
        return Err(CvfError::Domain(format!(
            "{which} is not a proper rotation (|R^T R - I| = {orthogonality:e}, det = {det})"
        )));
    }
    Ok(())
}

/// Geodesic angle `|log(R R_ref^T)|` in `[0, PI]`.
pub fn attitude_error(current: &Matrix3<f64>, reference: &Matrix3<f64>) -> Result<f64> {
    check_rotation(current, "current attitude")?;
    check_rotation(reference, "reference attitude")?;
    let e = current * reference.transpose();
    // sin from the skew part and cos from the trace keep precision at both ends
    let axis = Vector3::new(e[(2, 1)] - e[(1, 2)], e[(0, 2)] - e[(2, 0)], e[(1, 0)] - e[(0, 1)]);
    let sin = 0.5 * axis.norm();
    let cos = 0.5 * (e.trace() - 1.0);
    Ok(sin.atan2(cos))
}

/// Central finite-difference estimate of the commanded speed rate along the
/// closed-loop motion, for checking [`linear_velocity_rate`].
pub fn linear_velocity_rate_fd(
    g: &Configuration,
    cvf: &CvfParams,
    ctrl: &ControlParams,
    elapsed: f64,
    h: f64,
) -> Result<f64> {
    let out = control(g, cvf, ctrl, elapsed)?;
    let shifted = |s: f64| {
        let c = Configuration::from_parts(g.p + g.heading() * (out.v_x * s), g.theta + out.omega * s);
        linear_velocity(&c, cvf, ctrl, elapsed + s)
    };
    Ok((shifted(h)? - shifted(-h)?) / (2.0 * h))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub t: f64,
    pub attitude: EulerAngles,
    pub thrust: f64,
}

/// Setpoints along a planar trajectory flown at the commanded altitude, with
/// the airspeed taken as the commanded speed clipped to the UAV bounds.
pub fn setpoints_from_trajectory(
    traj: &Trajectory,
    cvf: &CvfParams,
    ctrl: &ControlParams,
    uav: &UavParams,
) -> Result<Vec<Setpoint>> {
    uav.validate()?;
    traj.samples
        .iter()
        .map(|s| {
            let out = control(&s.g, cvf, ctrl, s.t)?;
            let airspeed = out.v_x.clamp(uav.v_min, uav.v_max);
            let rate = linear_velocity_rate(&s.g, &out, cvf, ctrl, s.t);
            Ok(Setpoint {
                t: s.t,
                attitude: EulerAngles {
                    yaw: yaw_setpoint(s.g.p, cvf)?,
                    pitch: pitch_setpoint(uav.h_d, airspeed, uav)?,
                    roll: roll_setpoint(out.omega, airspeed, uav.gravity),
                },
                thrust: thrust_setpoint(airspeed, out.v_x, rate, uav)?,
            })
        })
        .collect()
}

pub fn write_setpoints_csv<W: Write>(mut out: W, setpoints: &[Setpoint]) -> Result<()> {
    writeln!(out, "{SETPOINT_HEADER}")?;
    for s in setpoints {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt17(s.t),
            fmt17(s.attitude.yaw),
            fmt17(s.attitude.pitch),
            fmt17(s.attitude.roll),
            fmt17(s.thrust)
        )?;
    }
    Ok(())
}
