//! Integral curves of the guidance field, traced by arc length.

use crate::error::{CvfError, Result};
use crate::geometry::Vec2;

use super::CvfParams;

/// Points within this fraction of `r2` from the limit cycle count as on it
/// for loop-closure detection.
const ON_CYCLE_FRACTION: f64 = 1e-6;

/// A traced integral curve with uniform arc step.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralCurve {
    pub points: Vec<Vec2>,
    pub arc_step: f64,
    /// The curve closed on itself along the limit cycle.
    pub closed: bool,
}

impl IntegralCurve {
    /// Sum of chord lengths along the polyline.
    pub fn polyline_length(&self) -> f64 {
        polyline_length(&self.points)
    }
}

pub fn polyline_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Iterator over successive points of an integral curve of `T`, one
/// 4-stage Runge-Kutta step of arc length `arc_step` apart. The first item
/// is the start point.
#[derive(Debug, Clone)]
pub struct CurveTracer<'a> {
    params: &'a CvfParams,
    current: Vec2,
    arc_step: f64,
    started: bool,
}

impl<'a> CurveTracer<'a> {
    pub fn new(params: &'a CvfParams, start: Vec2, arc_step: f64) -> Result<Self> {
        if !(arc_step > 0.0) || !arc_step.is_finite() {
            return Err(CvfError::Domain(format!(
                "arc step must be positive, got {arc_step}"
            )));
        }
        let r = start.distance(params.singular_point());
        if r <= params.guard_radius() {
            return Err(CvfError::Singular {
                r_delta: r,
                guard: params.guard_radius(),
            });
        }
        Ok(CurveTracer {
            params,
            current: start,
            arc_step,
            started: false,
        })
    }

    fn advance(&self, p: Vec2) -> Vec2 {
        let h = self.arc_step;
        let t = |x: Vec2| self.params.cvf(x);
        let k1 = t(p);
        let k2 = t(p + k1 * (0.5 * h));
        let k3 = t(p + k2 * (0.5 * h));
        let k4 = t(p + k3 * h);
        p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    }
}

impl Iterator for CurveTracer<'_> {
    type Item = Vec2;

    fn next(&mut self) -> Option<Vec2> {
        if !self.started {
            self.started = true;
            return Some(self.current);
        }
        self.current = self.advance(self.current);
        Some(self.current)
    }
}

/// Traces the integral curve from `p0` for at most `max_len` of arc, or
/// until it has gone once around the limit cycle and returned within one
/// arc step of where it joined it.
pub fn integral_curve(
    p0: Vec2,
    params: &CvfParams,
    arc_step: f64,
    max_len: f64,
) -> Result<IntegralCurve> {
    let tracer = CurveTracer::new(params, p0, arc_step)?;
    let steps = (max_len / arc_step).floor().max(0.0) as usize;
    let center = params.singular_point();
    let r2 = params.r2();
    let on_cycle_tol = ON_CYCLE_FRACTION * r2;
    let min_loop_steps = (std::f64::consts::PI * r2 / arc_step).ceil() as usize;

    let mut points = Vec::with_capacity(steps + 1);
    let mut anchor: Option<(usize, Vec2)> = None;
    let mut closed = false;
    for (i, p) in tracer.take(steps + 1).enumerate() {
        points.push(p);
        if (p.distance(center) - r2).abs() > on_cycle_tol {
            continue;
        }
        match anchor {
            None => anchor = Some((i, p)),
            Some((start, q)) => {
                if i - start >= min_loop_steps && p.distance(q) <= arc_step {
                    closed = true;
                    break;
                }
            }
        }
    }
    Ok(IntegralCurve {
        points,
        arc_step,
        closed,
    })
}
