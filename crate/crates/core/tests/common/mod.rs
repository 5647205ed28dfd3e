#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use cvf_core::{ControlParams, CvfParams, Vec2};

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

/// Nominal radii `(4, 8, 12) rho` with the singular point at the origin.
pub fn centered(rho: f64) -> CvfParams {
    CvfParams::new(Vec2::new(8.0 * rho, 0.0), PI / 2.0, 4.0 * rho, 8.0 * rho, 12.0 * rho, 1.0 / rho).unwrap()
}

pub fn nominal_ctrl() -> ControlParams {
    ControlParams::new(0.0, 1.0, 12.0, PI, 1.0, 0.0).unwrap()
}

/// Curvature of the circle through three points.
pub fn menger_curvature(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let area2 = (b - a).cross(c - a).abs();
    area2 * 2.0 / (a.distance(b) * b.distance(c) * c.distance(a))
}

/// Unit quaternion `(w, x, y, z)`.
#[derive(Debug, Clone, Copy)]
pub struct Quat(pub f64, pub f64, pub f64, pub f64);

impl Quat {
    pub fn axis_angle(axis: [f64; 3], angle: f64) -> Quat {
        let (s, c) = (0.5 * angle).sin_cos();
        Quat(c, axis[0] * s, axis[1] * s, axis[2] * s)
    }

    pub fn mul(self, o: Quat) -> Quat {
        let Quat(a1, b1, c1, d1) = self;
        let Quat(a2, b2, c2, d2) = o;
        Quat(
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        )
    }

    pub fn conj(self) -> Quat {
        Quat(self.0, -self.1, -self.2, -self.3)
    }

    /// Yaw about z, then pitch about y, then roll about x, in the body frame.
    pub fn from_euler(yaw: f64, pitch: f64, roll: f64) -> Quat {
        Quat::axis_angle([0.0, 0.0, 1.0], yaw)
            .mul(Quat::axis_angle([0.0, 1.0, 0.0], pitch))
            .mul(Quat::axis_angle([1.0, 0.0, 0.0], roll))
    }

    /// Rotation angle in `[0, PI]`.
    pub fn angle(self) -> f64 {
        let v = (self.1 * self.1 + self.2 * self.2 + self.3 * self.3).sqrt();
        2.0 * v.atan2(self.0.abs())
    }
}
