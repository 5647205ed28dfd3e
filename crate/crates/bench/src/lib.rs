//! Fixtures shared by the benchmarks under `benches/`.

use std::f64::consts::PI;

use cvf_core::{Configuration, ControlParams, CvfParams, Vec2};

/// Unit turning radius, radii `(4, 8, 12)`, singular point at the origin.
pub fn nominal_field() -> CvfParams {
    CvfParams::new(Vec2::new(8.0, 0.0), PI / 2.0, 4.0, 8.0, 12.0, 1.0).expect("nominal parameters")
}

pub fn nominal_control() -> ControlParams {
    ControlParams::new(0.0, 1.0, 12.0, PI, 1.0, 0.0).expect("nominal parameters")
}

/// Points spread over every region of the field.
pub fn probe_points(n: usize) -> Vec<Vec2> {
    (0..n)
        .map(|i| {
            let s = (i as f64 + 0.5) / n as f64;
            Vec2::from_angle(s * 37.0) * (0.05 + 17.95 * s)
        })
        .collect()
}

pub fn probe_states(n: usize) -> Vec<Configuration> {
    probe_points(n)
        .into_iter()
        .enumerate()
        .map(|(i, p)| Configuration::from_parts(p, (i as f64 * 2.3) % (2.0 * PI) - PI))
        .collect()
}
