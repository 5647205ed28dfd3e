use crate::error::{CvfError, Result};
use crate::geometry::Vec2;

/// Polar components of a field and their first partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolarJet {
    pub f_r: f64,
    pub f_phi: f64,
    pub dfr_dr: f64,
    pub dfphi_dr: f64,
    pub dfr_dphi: f64,
    pub dfphi_dphi: f64,
}

/// A planar field described in polar coordinates about `center()`.
pub trait PolarField {
    /// Origin of the polar coordinates.
    fn center(&self) -> Vec2;

    /// Components and partials at polar coordinates `(r, phi)`, `r > 0`.
    fn jet(&self, r: f64, phi: f64) -> PolarJet;

    /// Radius around the center inside which queries are singular.
    fn guard_radius(&self) -> f64 {
        0.0
    }
}

/// Curvature of the integral curve through `p` computed from the polar
/// components and their partials:
///
/// `kappa = |<F, K F>| / |F|^3` with
/// `K = [[dF_phi/dr + F_phi/r, -dF_r/dr], [(1/r) dF_phi/dphi, -(1/r) dF_r/dphi + F_phi/r]]`.
pub fn curvature<F: PolarField + ?Sized>(field: &F, p: Vec2) -> Result<f64> {
    let q = p - field.center();
    let r = q.norm();
    let guard = field.guard_radius();
    if r <= guard || r == 0.0 {
        return Err(CvfError::Singular { r_delta: r, guard });
    }
    let j = field.jet(r, q.angle());
    let n = j.f_r.hypot(j.f_phi);
    if n == 0.0 {
        return Err(CvfError::Singular { r_delta: r, guard });
    }
    let k00 = j.dfphi_dr + j.f_phi / r;
    let k01 = -j.dfr_dr;
    let k10 = j.dfphi_dphi / r;
    let k11 = -j.dfr_dphi / r + j.f_phi / r;
    let quad = j.f_r * (k00 * j.f_r + k01 * j.f_phi) + j.f_phi * (k10 * j.f_r + k11 * j.f_phi);
    Ok(quad.abs() / (n * n * n))
}
