//! Saturated tracking control with a state-dependent feedback gain.
//!
//! The linear velocity shrinks smoothly as the robot approaches the target
//! configuration. The angular velocity is a proportional correction of the
//! orientation error plus the rate of change of the reference orientation
//! along the motion, clamped to `v_x * kappa_max`. The feedback gain is
//! chosen so that the clamp can only become active within `rho` of the
//! singular point.

use std::f64::consts::PI;

use crate::error::{CvfError, Result};
pub use crate::geometry::Configuration;
use crate::geometry::{wrap_angle, Vec2};
use crate::vfield::{CvfParams, FieldGeometry};

/// `|theta_e|` within this distance of `PI` is treated as the non-converging
/// orientation.
pub const ANTIPODAL_TOLERANCE: f64 = 1e-12;

/// Relative band above the clamp level inside which `|omega_0|` is treated as
/// a rounding tie: the output is clamped but not flagged as saturated.
pub const SATURATION_TIE_REL: f64 = 1e-12;

/// Velocity bounds, shaping constants and maximum gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    pub v_min: f64,
    pub v_max: f64,
    /// Position scale of the speed law, m.
    pub c_p: f64,
    /// Orientation scale of the speed law, rad.
    pub c_theta: f64,
    /// Upper bound on the feedback gain, 1/s.
    pub k_omega_max: f64,
    /// Rate of the start-up ramp `1 - exp(-ramp_rate t)` on the speed gain;
    /// `0` disables it.
    pub ramp_rate: f64,
}

impl ControlParams {
    pub fn new(
        v_min: f64,
        v_max: f64,
        c_p: f64,
        c_theta: f64,
        k_omega_max: f64,
        ramp_rate: f64,
    ) -> Result<Self> {
        let p = ControlParams {
            v_min,
            v_max,
            c_p,
            c_theta,
            k_omega_max,
            ramp_rate,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [
            self.v_min,
            self.v_max,
            self.c_p,
            self.c_theta,
            self.k_omega_max,
            self.ramp_rate,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(CvfError::InvalidParams("control parameters must be finite".into()));
        }
        if self.v_min < 0.0 {
            return Err(CvfError::InvalidParams(format!("v_min = {} < 0", self.v_min)));
        }
        if self.v_max < self.v_min {
            return Err(CvfError::InvalidParams(format!(
                "v_max = {} is below v_min = {}",
                self.v_max, self.v_min
            )));
        }
        if self.v_max <= 0.0 {
            return Err(CvfError::InvalidParams("v_max must be positive".into()));
        }
        if !(self.c_p > 0.0 && self.c_theta > 0.0 && self.k_omega_max > 0.0) {
            return Err(CvfError::InvalidParams(
                "c_p, c_theta and k_omega_max must be positive".into(),
            ));
        }
        if self.ramp_rate < 0.0 {
            return Err(CvfError::InvalidParams("ramp_rate must be non-negative".into()));
        }
        Ok(())
    }

    /// Speed gain `k_v = v_max - v_min`, scaled by the ramp when enabled.
    pub fn speed_gain(&self, elapsed: f64) -> f64 {
        let k_v = self.v_max - self.v_min;
        if self.ramp_rate > 0.0 {
            k_v * (1.0 - (-self.ramp_rate * elapsed).exp())
        } else {
            k_v
        }
    }

    fn speed_gain_rate(&self, elapsed: f64) -> f64 {
        if self.ramp_rate > 0.0 {
            (self.v_max - self.v_min) * self.ramp_rate * (-self.ramp_rate * elapsed).exp()
        } else {
            0.0
        }
    }
}

/// Commanded inputs and the intermediate quantities that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlOutput {
    pub v_x: f64,
    pub omega: f64,
    /// `omega_0 = -k_omega theta_e + omega_r` before clamping.
    pub omega_unsat: f64,
    /// Feedforward `omega_r`.
    pub omega_ff: f64,
    pub k_omega: f64,
    pub theta_e: f64,
    pub saturated: bool,
    pub r_delta: f64,
    /// `k(r_delta)` used in the gain.
    pub k_r: f64,
    /// `cos` of the angle between heading and the gradient of `theta_r`.
    pub cos_dtheta: f64,
}

impl ControlOutput {
    /// `|omega| / v_x`, reported as 0 when the robot is at rest.
    pub fn curvature(&self) -> f64 {
        if self.v_x > 0.0 {
            self.omega.abs() / self.v_x
        } else {
            0.0
        }
    }
}

/// Orientation error `theta - theta_r` wrapped into `(-PI, PI]`.
pub fn orientation_error(theta: f64, theta_r: f64) -> f64 {
    wrap_angle(theta - theta_r)
}

fn speed_law(distance: f64, theta_e: f64, ctrl: &ControlParams, elapsed: f64) -> f64 {
    ctrl.v_min
        + ctrl.speed_gain(elapsed) * (distance / ctrl.c_p + theta_e.abs() / ctrl.c_theta).tanh()
}

/// Linear velocity `v_min + k_v tanh(|p - p_d| / c_p + |theta_e| / c_theta)`.
pub fn linear_velocity(
    g: &Configuration,
    cvf: &CvfParams,
    ctrl: &ControlParams,
    elapsed: f64,
) -> Result<f64> {
    let geom = cvf.geometry(g.p)?;
    let theta_e = orientation_error(g.theta, geom.theta_r);
    Ok(speed_law(g.p.distance(cvf.target_position()), theta_e, ctrl, elapsed))
}

/// Feedforward `omega_r = <grad theta_r, v_x [cos theta, sin theta]>`, the
/// rate of change of the reference orientation along the motion.
pub fn feedforward(g: &Configuration, v_x: f64, geom: &FieldGeometry) -> f64 {
    geom.grad_theta_r.dot(g.heading() * v_x)
}

/// Gain-shaping function: `r / rho^2` inside the turning radius,
/// `1/r + d theta_r/d r` outside.
pub fn k_func(r_delta: f64, cvf: &CvfParams) -> f64 {
    let rho = cvf.rho();
    if r_delta < rho {
        r_delta / (rho * rho)
    } else {
        1.0 / r_delta + cvf.field().heading_rate(r_delta)
    }
}

/// Dynamic gain `min(k_omega_max, v_x / |theta_e| (kappa_max - k(r) |cos dtheta|))`.
///
/// The second argument is taken as unbounded when `theta_e = 0`, and floored
/// at zero so the gain never becomes negative.
pub fn dynamic_gain(
    g: &Configuration,
    v_x: f64,
    geom: &FieldGeometry,
    cvf: &CvfParams,
    ctrl: &ControlParams,
) -> f64 {
    let theta_e = orientation_error(g.theta, geom.theta_r);
    let cos_dtheta = geom.cos_gradient_angle(g.heading());
    gain_from_parts(theta_e, v_x, k_func(geom.r_delta, cvf), cos_dtheta, cvf, ctrl)
}

fn gain_from_parts(
    theta_e: f64,
    v_x: f64,
    k_r: f64,
    cos_dtheta: f64,
    cvf: &CvfParams,
    ctrl: &ControlParams,
) -> f64 {
    if theta_e == 0.0 {
        return ctrl.k_omega_max;
    }
    let margin = (cvf.kappa_max() - k_r * cos_dtheta.abs()).max(0.0);
    ctrl.k_omega_max.min(v_x / theta_e.abs() * margin)
}

/// Clamps `omega0` to `[-v_x kappa_max, v_x kappa_max]`. Returns the clamped
/// value and whether the clamp was active.
pub fn saturated_omega(omega0: f64, v_x: f64, kappa_max: f64) -> (f64, bool) {
    let bound = v_x * kappa_max;
    let magnitude = omega0.abs();
    if magnitude <= bound {
        (omega0, false)
    } else if magnitude <= bound * (1.0 + SATURATION_TIE_REL) {
        (bound.copysign(omega0), false)
    } else {
        (bound.copysign(omega0), true)
    }
}

/// Full control law at configuration `g`, `elapsed` seconds after start.
pub fn control(
    g: &Configuration,
    cvf: &CvfParams,
    ctrl: &ControlParams,
    elapsed: f64,
) -> Result<ControlOutput> {
    let geom = cvf.geometry(g.p)?;
    let theta_e = orientation_error(g.theta, geom.theta_r);
    if (theta_e.abs() - PI).abs() <= ANTIPODAL_TOLERANCE {
        return Err(CvfError::NonConverging(format!(
            "orientation error {theta_e} is antipodal to the field"
        )));
    }
    Ok(control_from_geometry(g, &geom, theta_e, cvf, ctrl, elapsed))
}

pub(crate) fn control_from_geometry(
    g: &Configuration,
    geom: &FieldGeometry,
    theta_e: f64,
    cvf: &CvfParams,
    ctrl: &ControlParams,
    elapsed: f64,
) -> ControlOutput {
    let heading = g.heading();
    let v_x = speed_law(g.p.distance(cvf.target_position()), theta_e, ctrl, elapsed);
    let omega_ff = geom.grad_theta_r.dot(heading * v_x);
    let cos_dtheta = geom.cos_gradient_angle(heading);
    let k_r = k_func(geom.r_delta, cvf);
    let k_omega = gain_from_parts(theta_e, v_x, k_r, cos_dtheta, cvf, ctrl);
    let omega_unsat = -k_omega * theta_e + omega_ff;
    let (omega, saturated) = if v_x > 0.0 {
        saturated_omega(omega_unsat, v_x, cvf.kappa_max())
    } else {
        (0.0, false)
    };
    ControlOutput {
        v_x,
        omega,
        omega_unsat,
        omega_ff,
        k_omega,
        theta_e,
        saturated,
        r_delta: geom.r_delta,
        k_r,
        cos_dtheta,
    }
}

/// Time derivative of the commanded linear velocity along the closed-loop
/// motion, from the analytic partials of the speed law:
/// `dv/dt = k_v' tanh(u) + k_v sech^2(u) (d'/c_p + sgn(theta_e) theta_e'/c_theta)`
/// with `d' = <p - p_d, p'> / |p - p_d|` and `theta_e' = omega - omega_r`.
pub fn linear_velocity_rate(
    g: &Configuration,
    out: &ControlOutput,
    cvf: &CvfParams,
    ctrl: &ControlParams,
    elapsed: f64,
) -> f64 {
    let offset = g.p - cvf.target_position();
    let distance = offset.norm();
    let u = distance / ctrl.c_p + out.theta_e.abs() / ctrl.c_theta;
    let p_dot: Vec2 = g.heading() * out.v_x;
    let distance_rate = if distance > 0.0 {
        offset.dot(p_dot) / distance
    } else {
        0.0
    };
    let theta_e_rate = out.omega - out.omega_ff;
    let sech2 = 1.0 / u.cosh().powi(2);
    ctrl.speed_gain_rate(elapsed) * u.tanh()
        + ctrl.speed_gain(elapsed)
            * sech2
            * (distance_rate / ctrl.c_p + out.theta_e.signum() * theta_e_rate / ctrl.c_theta)
}
