//! Blended flow field, the translated and normalized guidance field built on
//! it, and the geometry the controller needs from it.
//!
//! The base field `F` is radially symmetric about the origin and is described
//! by its polar components `(F_r, F_phi)` as a function of `r` alone. Four
//! annular regions separated by circles of radii `r1 < r2 < r3` blend a
//! source, a counter-clockwise vortex and a sink, so that the circle `r = r2`
//! is an attracting limit cycle. The guidance field `T` is `F` translated to
//! the singular point `p_delta` and normalized to unit length.

mod curvature;
mod curve;
mod feasibility;
mod grid;

pub use curvature::{curvature, PolarField, PolarJet};
pub use curve::{integral_curve, polyline_length, CurveTracer, IntegralCurve};
pub use feasibility::{
    check_curvature_condition, check_stabilization_condition, FeasibilityReport, Inequality,
    Relation,
};
pub use grid::{sample_grid, write_grid, GridSample, GridSpec};

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::error::{CvfError, Result};
use crate::geometry::{wrap_angle_positive, Configuration, Vec2};

/// Queries closer than this fraction of `r2` to the singular point are
/// treated as singular.
pub const SINGULAR_GUARD_FRACTION: f64 = 1e-9;

/// Cubic blend `2 tau^3 - 3 tau^2 + 1` on the unit interval.
#[inline]
pub(crate) fn blend_unit(tau: f64) -> f64 {
    tau * tau * (2.0 * tau - 3.0) + 1.0
}

/// Derivative of [`blend_unit`] with respect to `tau`.
#[inline]
pub(crate) fn blend_unit_derivative(tau: f64) -> f64 {
    6.0 * tau * (tau - 1.0)
}

/// Blending function decreasing smoothly from 1 at `s_lower` to 0 at
/// `s_upper`, with zero slope at both ends.
pub fn blend(s: f64, s_lower: f64, s_upper: f64) -> Result<f64> {
    if !(s_lower < s_upper) {
        return Err(CvfError::Domain(format!(
            "blend interval [{s_lower}, {s_upper}] is empty"
        )));
    }
    if !(s >= s_lower && s <= s_upper) {
        return Err(CvfError::Domain(format!(
            "blend argument {s} outside [{s_lower}, {s_upper}]"
        )));
    }
    Ok(blend_unit((s - s_lower) / (s_upper - s_lower)))
}

/// One of the four annular regions of the base field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionId {
    /// `0 <= r < r1`: source.
    A1,
    /// `r1 <= r < r2`: source blended into vortex.
    A2,
    /// `r2 <= r < r3`: vortex blended into sink.
    A3,
    /// `r >= r3`: sink.
    A4,
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegionId::A1 => "A1",
            RegionId::A2 => "A2",
            RegionId::A3 => "A3",
            RegionId::A4 => "A4",
        };
        f.write_str(s)
    }
}

/// Polar components `(F_r, F_phi)` of a planar field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolarComponents {
    pub f_r: f64,
    pub f_phi: f64,
}

impl PolarComponents {
    pub fn norm(&self) -> f64 {
        self.f_r.hypot(self.f_phi)
    }
}

/// The radially symmetric blended field about the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendedField {
    r1: f64,
    r2: f64,
    r3: f64,
}

impl BlendedField {
    pub fn new(r1: f64, r2: f64, r3: f64) -> Result<Self> {
        if !(r1.is_finite() && r2.is_finite() && r3.is_finite()) {
            return Err(CvfError::InvalidParams("radii must be finite".into()));
        }
        if !(0.0 < r1 && r1 < r2 && r2 < r3) {
            return Err(CvfError::InvalidParams(format!(
                "radii must satisfy 0 < r1 < r2 < r3, got r1={r1}, r2={r2}, r3={r3}"
            )));
        }
        Ok(BlendedField { r1, r2, r3 })
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    pub fn r3(&self) -> f64 {
        self.r3
    }

    /// Region of a point at distance `r` from the origin. Boundary circles
    /// belong to the outer region.
    pub fn region(&self, r: f64) -> RegionId {
        if r < self.r1 {
            RegionId::A1
        } else if r < self.r2 {
            RegionId::A2
        } else if r < self.r3 {
            RegionId::A3
        } else {
            RegionId::A4
        }
    }

    /// Normalized position inside the blending annulus containing `r`, with
    /// the annulus width. Only meaningful in `A2` and `A3`.
    fn blend_coordinate(&self, r: f64, region: RegionId) -> (f64, f64) {
        match region {
            RegionId::A2 => {
                let width = self.r2 - self.r1;
                ((r - self.r1) / width, width)
            }
            RegionId::A3 => {
                let width = self.r3 - self.r2;
                ((r - self.r2) / width, width)
            }
            RegionId::A1 | RegionId::A4 => (0.0, 1.0),
        }
    }

    /// Polar components of the base field at radius `r >= 0`.
    pub fn polar(&self, r: f64) -> PolarComponents {
        if r == 0.0 {
            return PolarComponents::default();
        }
        let region = self.region(r);
        let (tau, _) = self.blend_coordinate(r, region);
        match region {
            RegionId::A1 => PolarComponents { f_r: 1.0, f_phi: 0.0 },
            RegionId::A2 => {
                let lambda = blend_unit(tau);
                PolarComponents {
                    f_r: lambda,
                    f_phi: 1.0 - lambda,
                }
            }
            RegionId::A3 => {
                let lambda = blend_unit(tau);
                PolarComponents {
                    f_r: lambda - 1.0,
                    f_phi: lambda,
                }
            }
            RegionId::A4 => PolarComponents {
                f_r: -1.0,
                f_phi: 0.0,
            },
        }
    }

    /// Radial derivatives `(dF_r/dr, dF_phi/dr)` at radius `r`.
    pub fn radial_derivatives(&self, r: f64) -> (f64, f64) {
        let region = self.region(r);
        let (tau, width) = self.blend_coordinate(r, region);
        match region {
            RegionId::A1 | RegionId::A4 => (0.0, 0.0),
            RegionId::A2 => {
                let d = blend_unit_derivative(tau) / width;
                (d, -d)
            }
            RegionId::A3 => {
                let d = blend_unit_derivative(tau) / width;
                (d, d)
            }
        }
    }

    /// Radial derivative of the field direction angle, `d theta_r / d r`.
    /// Zero in the source and sink regions and non-negative everywhere.
    pub fn heading_rate(&self, r: f64) -> f64 {
        let region = self.region(r);
        match region {
            RegionId::A1 | RegionId::A4 => 0.0,
            RegionId::A2 | RegionId::A3 => {
                let (tau, width) = self.blend_coordinate(r, region);
                let lambda = blend_unit(tau);
                6.0 * tau * (1.0 - tau) / (width * (2.0 * lambda * lambda - 2.0 * lambda + 1.0))
            }
        }
    }
}

impl PolarField for BlendedField {
    fn center(&self) -> Vec2 {
        Vec2::ZERO
    }

    fn jet(&self, r: f64, _phi: f64) -> PolarJet {
        let c = self.polar(r);
        let (dfr_dr, dfphi_dr) = self.radial_derivatives(r);
        PolarJet {
            f_r: c.f_r,
            f_phi: c.f_phi,
            dfr_dr,
            dfphi_dr,
            dfr_dphi: 0.0,
            dfphi_dphi: 0.0,
        }
    }
}

/// Target configuration, region radii and curvature bound that define the
/// guidance field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvfParams {
    target_position: Vec2,
    target_heading: f64,
    field: BlendedField,
    kappa_max: f64,
    singular_point: Vec2,
}

impl CvfParams {
    pub fn new(
        target_position: Vec2,
        target_heading: f64,
        r1: f64,
        r2: f64,
        r3: f64,
        kappa_max: f64,
    ) -> Result<Self> {
        if !target_position.is_finite() || !target_heading.is_finite() {
            return Err(CvfError::InvalidParams("target must be finite".into()));
        }
        if !(kappa_max > 0.0) || kappa_max.is_nan() {
            return Err(CvfError::InvalidParams(format!(
                "kappa_max must be positive, got {kappa_max}"
            )));
        }
        let field = BlendedField::new(r1, r2, r3)?;
        let heading = wrap_angle_positive(target_heading);
        let offset = Vec2::from_angle(heading - FRAC_PI_2) * r2;
        Ok(CvfParams {
            target_position,
            target_heading: heading,
            field,
            kappa_max,
            singular_point: target_position - offset,
        })
    }

    /// Same radii and curvature bound, different target.
    pub fn with_target(&self, target: Configuration) -> Self {
        // radii and kappa were validated on construction
        CvfParams::new(
            target.p,
            target.theta,
            self.field.r1,
            self.field.r2,
            self.field.r3,
            self.kappa_max,
        )
        .expect("validated parameters")
    }

    pub fn target_position(&self) -> Vec2 {
        self.target_position
    }

    /// Target heading in `[0, 2*PI)`.
    pub fn target_heading(&self) -> f64 {
        self.target_heading
    }

    pub fn target(&self) -> Configuration {
        Configuration::from_parts(self.target_position, self.target_heading)
    }

    pub fn field(&self) -> &BlendedField {
        &self.field
    }

    pub fn r1(&self) -> f64 {
        self.field.r1
    }

    pub fn r2(&self) -> f64 {
        self.field.r2
    }

    pub fn r3(&self) -> f64 {
        self.field.r3
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    /// Minimum turning radius `1 / kappa_max`.
    pub fn rho(&self) -> f64 {
        1.0 / self.kappa_max
    }

    /// Singular point `p_delta`, the center of the limit cycle.
    pub fn singular_point(&self) -> Vec2 {
        self.singular_point
    }

    pub fn guard_radius(&self) -> f64 {
        SINGULAR_GUARD_FRACTION * self.field.r2
    }

    pub fn region(&self, p: Vec2) -> RegionId {
        self.field.region(p.distance(self.singular_point))
    }

    /// Unit guidance vector at `p`; zero inside the singular guard disk.
    pub fn cvf(&self, p: Vec2) -> Vec2 {
        let q = p - self.singular_point;
        let r = q.norm();
        if r <= self.guard_radius() {
            return Vec2::ZERO;
        }
        let c = self.field.polar(r);
        let e_r = q * (1.0 / r);
        let e_phi = Vec2::new(-e_r.y, e_r.x);
        let n = c.norm();
        e_r * (c.f_r / n) + e_phi * (c.f_phi / n)
    }

    /// Reference orientation and its spatial derivatives at `p`.
    pub fn geometry(&self, p: Vec2) -> Result<FieldGeometry> {
        let q = p - self.singular_point;
        let r_delta = q.norm();
        let guard = self.guard_radius();
        if r_delta <= guard {
            return Err(CvfError::Singular { r_delta, guard });
        }
        let e_r = q * (1.0 / r_delta);
        let e_phi = Vec2::new(-e_r.y, e_r.x);
        let c = self.field.polar(r_delta);
        let t = e_r * c.f_r + e_phi * c.f_phi;
        let dtheta_r_dr = self.field.heading_rate(r_delta);
        Ok(FieldGeometry {
            r_delta,
            phi_delta: q.angle(),
            theta_r: t.angle(),
            dtheta_r_dr,
            grad_theta_r: e_r * dtheta_r_dr + e_phi * (1.0 / r_delta),
            amplitude: (1.0 / r_delta).hypot(dtheta_r_dr),
            region: self.field.region(r_delta),
        })
    }

    /// Curvature of the integral curve of the guidance field through `p`,
    /// evaluated on the base field at `p - p_delta`.
    pub fn curvature(&self, p: Vec2) -> Result<f64> {
        let q = p - self.singular_point;
        let r_delta = q.norm();
        let guard = self.guard_radius();
        if r_delta <= guard {
            return Err(CvfError::Singular { r_delta, guard });
        }
        curvature(&self.field, q)
    }
}

/// The guidance field seen as a polar field about `p_delta`, with components
/// normalized to unit length.
impl PolarField for CvfParams {
    fn center(&self) -> Vec2 {
        self.singular_point
    }

    fn guard_radius(&self) -> f64 {
        CvfParams::guard_radius(self)
    }

    fn jet(&self, r: f64, _phi: f64) -> PolarJet {
        let c = self.field.polar(r);
        let (dfr, dfphi) = self.field.radial_derivatives(r);
        let n = c.norm();
        let dn = (c.f_r * dfr + c.f_phi * dfphi) / n;
        PolarJet {
            f_r: c.f_r / n,
            f_phi: c.f_phi / n,
            dfr_dr: (dfr * n - c.f_r * dn) / (n * n),
            dfphi_dr: (dfphi * n - c.f_phi * dn) / (n * n),
            dfr_dphi: 0.0,
            dfphi_dphi: 0.0,
        }
    }
}

/// Local geometry of the guidance field at a non-singular point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldGeometry {
    /// Distance to the singular point.
    pub r_delta: f64,
    /// Polar angle about the singular point.
    pub phi_delta: f64,
    /// Reference orientation, the angle of `T(p)`.
    pub theta_r: f64,
    /// `d theta_r / d r_delta`.
    pub dtheta_r_dr: f64,
    /// World-frame gradient of `theta_r`.
    pub grad_theta_r: Vec2,
    /// Gradient magnitude `sqrt(1/r_delta^2 + (d theta_r/d r_delta)^2)`.
    pub amplitude: f64,
    pub region: RegionId,
}

impl FieldGeometry {
    /// `cos` of the angle between `heading` and the gradient of `theta_r`.
    pub fn cos_gradient_angle(&self, heading: Vec2) -> f64 {
        (self.grad_theta_r.dot(heading) / self.amplitude).clamp(-1.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn nominal_params(theta_d: f64) -> CvfParams {
        CvfParams::new(Vec2::new(4.0, -2.0), theta_d, 4.0, 8.0, 12.0, 1.0).unwrap()
    }

    #[test]
    fn blend_boundaries_and_midpoint() {
        assert_eq!(blend(2.0, 2.0, 5.0).unwrap(), 1.0);
        assert_eq!(blend(5.0, 2.0, 5.0).unwrap(), 0.0);
        assert_eq!(blend(3.5, 2.0, 5.0).unwrap(), 0.5);
        assert_eq!(blend_unit_derivative(0.0), 0.0);
        assert_eq!(blend_unit_derivative(1.0), 0.0);
    }

    #[test]
    fn blend_rejects_bad_domain() {
        assert!(matches!(blend(1.0, 2.0, 5.0), Err(CvfError::Domain(_))));
        assert!(matches!(blend(6.0, 2.0, 5.0), Err(CvfError::Domain(_))));
        assert!(matches!(blend(3.0, 5.0, 5.0), Err(CvfError::Domain(_))));
        assert!(matches!(blend(3.0, 6.0, 5.0), Err(CvfError::Domain(_))));
    }

    #[test]
    fn base_field_values() {
        let f = BlendedField::new(4.0, 8.0, 12.0).unwrap();
        assert_eq!(f.polar(2.0), PolarComponents { f_r: 1.0, f_phi: 0.0 });
        assert_eq!(f.polar(8.0), PolarComponents { f_r: 0.0, f_phi: 1.0 });
        assert_eq!(f.polar(0.0), PolarComponents { f_r: 0.0, f_phi: 0.0 });
        assert_eq!(f.polar(20.0), PolarComponents { f_r: -1.0, f_phi: 0.0 });
        // boundaries go to the outer region
        assert_eq!(f.region(4.0), RegionId::A2);
        assert_eq!(f.region(8.0), RegionId::A3);
        assert_eq!(f.region(12.0), RegionId::A4);
    }

    #[test]
    fn invalid_radii_rejected() {
        assert!(BlendedField::new(4.0, 4.0, 12.0).is_err());
        assert!(BlendedField::new(0.0, 4.0, 12.0).is_err());
        assert!(BlendedField::new(4.0, 8.0, f64::NAN).is_err());
        assert!(CvfParams::new(Vec2::ZERO, 0.0, 4.0, 8.0, 12.0, 0.0).is_err());
    }

    #[test]
    fn singular_point_offsets_target_by_r2() {
        let p = nominal_params(PI / 4.0);
        let d = p.target_position() - p.singular_point();
        assert!((d.norm() - 8.0).abs() < 1e-12);
        assert!((d.angle() - (PI / 4.0 - PI / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn cvf_at_target_and_singular_point() {
        let p = nominal_params(2.5);
        let t = p.cvf(p.target_position());
        assert!((t.x - 2.5f64.cos()).abs() < 1e-12);
        assert!((t.y - 2.5f64.sin()).abs() < 1e-12);
        assert_eq!(p.cvf(p.singular_point()), Vec2::ZERO);
        assert!(matches!(
            p.geometry(p.singular_point()),
            Err(CvfError::Singular { .. })
        ));
    }

    #[test]
    fn heading_rate_values() {
        let p = nominal_params(0.0);
        let f = p.field();
        assert_eq!(f.heading_rate(2.0), 0.0);
        assert!((f.heading_rate(6.0) - 3.0 / 4.0).abs() < 1e-15);
        assert!((f.heading_rate(10.0) - 3.0 / 4.0).abs() < 1e-15);
        assert_eq!(f.heading_rate(24.0), 0.0);
        let g = p
            .geometry(p.singular_point() + Vec2::new(30.0, 0.0))
            .unwrap();
        assert!((g.amplitude - 1.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_magnitude_matches_amplitude() {
        let p = nominal_params(1.0);
        for i in 1..200 {
            let q = p.singular_point() + Vec2::from_angle(i as f64 * 0.37) * (i as f64 * 0.09);
            let g = p.geometry(q).unwrap();
            assert!((g.grad_theta_r.norm() - g.amplitude).abs() <= 1e-12 * g.amplitude);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = nominal_params(0.3);
        let h = 1e-6;
        for i in 1..60 {
            let q = p.singular_point() + Vec2::from_angle(i as f64 * 1.1) * (0.3 + i as f64 * 0.25);
            let g = p.geometry(q).unwrap();
            let angle_at = |x: Vec2| p.cvf(x).angle();
            let dx = crate::geometry::wrap_angle(
                angle_at(q + Vec2::new(h, 0.0)) - angle_at(q - Vec2::new(h, 0.0)),
            ) / (2.0 * h);
            let dy = crate::geometry::wrap_angle(
                angle_at(q + Vec2::new(0.0, h)) - angle_at(q - Vec2::new(0.0, h)),
            ) / (2.0 * h);
            assert!((dx - g.grad_theta_r.x).abs() < 1e-6, "{i}: {dx} vs {}", g.grad_theta_r.x);
            assert!((dy - g.grad_theta_r.y).abs() < 1e-6, "{i}: {dy} vs {}", g.grad_theta_r.y);
        }
    }
}
