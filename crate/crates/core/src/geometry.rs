//! Planar vectors, angle wrapping and the robot configuration.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

/// A 2-D vector in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at angle `angle` from the x-axis.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2 { x: c, y: s }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Scalar cross product `a.x * b.y - a.y * b.x`.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Four-quadrant angle of the vector.
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise rotation by `angle`.
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2 {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `(-PI, PI]`.
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let wrapped = angle - TAU * ((angle - PI) / TAU).ceil();
    // rounding can land exactly on -PI
    if wrapped <= -PI {
        wrapped + TAU
    } else {
        wrapped
    }
}

/// Wraps an angle into `[0, 2*PI)`.
pub fn wrap_angle_positive(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Planar pose `g = (p, theta)`; heading is kept in `(-PI, PI]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Configuration {
    pub p: Vec2,
    pub theta: f64,
}

impl Configuration {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Configuration {
            p: Vec2::new(x, y),
            theta: wrap_angle(theta),
        }
    }

    pub fn from_parts(p: Vec2, theta: f64) -> Self {
        Configuration {
            p,
            theta: wrap_angle(theta),
        }
    }

    /// Unit heading vector `[cos theta, sin theta]`.
    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }

    /// Configuration distance `sqrt(|dp|^2 + dtheta^2)` with the heading
    /// difference wrapped.
    pub fn distance(&self, other: &Configuration) -> f64 {
        let dp = self.p.distance(other.p);
        let dth = wrap_angle(self.theta - other.theta);
        dp.hypot(dth)
    }
}
