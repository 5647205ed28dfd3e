//! Sufficient conditions on the region radii: bounded curvature of the
//! integral curves, and monotone stabilization of the orientation error.

use std::fmt;

use super::CvfParams;

/// Relative slack applied to every comparison, so that parameters given as
/// exact multiples of `rho` are not rejected by rounding in `1 / kappa_max`.
const REL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    AtLeast,
    AtMost,
}

/// One evaluated inequality `lhs >= rhs` or `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Inequality {
    /// Stable identifier, e.g. `ring_spacing_1`.
    pub name: &'static str,
    /// Symbolic form, e.g. `r2 - r1 >= 3 rho`.
    pub expression: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    pub holds: bool,
}

impl Inequality {
    fn new(
        name: &'static str,
        expression: &'static str,
        lhs: f64,
        relation: Relation,
        rhs: f64,
    ) -> Self {
        let slack = REL_SLACK * lhs.abs().max(rhs.abs());
        let holds = match relation {
            Relation::AtLeast => lhs >= rhs - slack,
            Relation::AtMost => lhs <= rhs + slack,
        };
        Inequality {
            name,
            expression,
            lhs,
            rhs,
            relation,
            holds,
        }
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.relation {
            Relation::AtLeast => ">=",
            Relation::AtMost => "<=",
        };
        write!(
            f,
            "{} [{}]: {} {} {} -> {}",
            self.name,
            self.expression,
            self.lhs,
            op,
            self.rhs,
            if self.holds { "ok" } else { "VIOLATED" }
        )
    }
}

/// Outcome of a group of inequalities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeasibilityReport {
    pub checks: Vec<Inequality>,
}

impl FeasibilityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn violations(&self) -> impl Iterator<Item = &Inequality> {
        self.checks.iter().filter(|c| !c.holds)
    }

    pub fn violated_names(&self) -> Vec<&'static str> {
        self.violations().map(|c| c.name).collect()
    }

    pub fn merge(mut self, other: FeasibilityReport) -> Self {
        self.checks.extend(other.checks);
        self
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Conditions under which every integral curve has curvature at most
/// `kappa_max`: each ring is at least as wide as the blending annulus
/// outside it, and each annulus is at least `3 rho` wide.
pub fn check_curvature_condition(params: &CvfParams) -> FeasibilityReport {
    let (r1, r2, r3) = (params.r1(), params.r2(), params.r3());
    let rho = params.rho();
    FeasibilityReport {
        checks: vec![
            Inequality::new("ring_ratio_1", "r1 >= r2 - r1", r1, Relation::AtLeast, r2 - r1),
            Inequality::new("ring_ratio_2", "r2 >= r3 - r2", r2, Relation::AtLeast, r3 - r2),
            Inequality::new(
                "ring_spacing_1",
                "r2 - r1 >= 3 rho",
                r2 - r1,
                Relation::AtLeast,
                3.0 * rho,
            ),
            Inequality::new(
                "ring_spacing_2",
                "r3 - r2 >= 3 rho",
                r3 - r2,
                Relation::AtLeast,
                3.0 * rho,
            ),
        ],
    }
}

/// Conditions under which the orientation error is stabilized
/// monotonically: `1/r_{i-1} + 1/(r_i - r_{i-1}) <= kappa_max` for both
/// blending annuli.
pub fn check_stabilization_condition(params: &CvfParams) -> FeasibilityReport {
    let (r1, r2, r3) = (params.r1(), params.r2(), params.r3());
    let kappa = params.kappa_max();
    FeasibilityReport {
        checks: vec![
            Inequality::new(
                "blend_rate_2",
                "1/r1 + 1/(r2 - r1) <= kappa_max",
                1.0 / r1 + 1.0 / (r2 - r1),
                Relation::AtMost,
                kappa,
            ),
            Inequality::new(
                "blend_rate_3",
                "1/r2 + 1/(r3 - r2) <= kappa_max",
                1.0 / r2 + 1.0 / (r3 - r2),
                Relation::AtMost,
                kappa,
            ),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    fn params(r1: f64, r2: f64, r3: f64, kappa: f64) -> CvfParams {
        CvfParams::new(Vec2::ZERO, 0.0, r1, r2, r3, kappa).unwrap()
    }

    #[test]
    fn nominal_parameters_pass_both() {
        let p = params(4.0, 8.0, 12.0, 1.0);
        assert!(check_curvature_condition(&p).passed());
        assert!(check_stabilization_condition(&p).passed());
    }

    #[test]
    fn nominal_parameters_scale_with_rho() {
        let rho = 30.0;
        let p = params(4.0 * rho, 8.0 * rho, 12.0 * rho, 1.0 / rho);
        assert!(check_curvature_condition(&p).passed());
        assert!(check_stabilization_condition(&p).passed());
    }

    #[test]
    fn narrow_annuli_violate_spacing() {
        let r = check_curvature_condition(&params(1.0, 2.0, 3.0, 1.0));
        assert_eq!(r.violated_names(), vec!["ring_spacing_1", "ring_spacing_2"]);
    }

    #[test]
    fn small_inner_ring_violates_ratio() {
        let r = check_curvature_condition(&params(3.0, 10.0, 17.0, 1.0));
        assert_eq!(r.violated_names(), vec!["ring_ratio_1"]);
    }

    #[test]
    fn stabilization_boundary_cases() {
        // 1/1.2 + 1/6.8 = 0.980... passes
        assert!(check_stabilization_condition(&params(1.2, 8.0, 12.0, 1.0)).passed());
        // 1/0.9 + 1/7.1 = 1.252... fails only for the inner annulus
        let r = check_stabilization_condition(&params(0.9, 8.0, 12.0, 1.0));
        assert_eq!(r.violated_names(), vec!["blend_rate_2"]);
        assert!(check_stabilization_condition(&params(4.0, 8.0, 12.0, 1e12)).passed());
    }
}
