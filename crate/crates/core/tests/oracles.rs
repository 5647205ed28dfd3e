//! Closed-form values the implementation must reproduce.

mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use approx::assert_relative_eq;
use cvf_core::controller::{k_func, saturated_omega};
use cvf_core::fixedwing::{attitude_error, pitch_setpoint, roll_setpoint, rot_z, DragModel, EulerAngles, UavParams};
use cvf_core::metrics::{omega_rmse_of, passage_length, relative_length};
use cvf_core::vfield::{polyline_length, RegionId};
use cvf_core::{Vec2, wrap_angle};
use nalgebra::{Matrix3, Vector3};

use common::centered;

#[test]
fn blend_polynomial_values() {
    let f = centered(1.0);
    let field = f.field();
    let at = |r: f64| field.polar(r);
    assert_eq!((at(4.0).f_r, at(4.0).f_phi), (1.0, 0.0));
    assert_eq!((at(6.0).f_r, at(6.0).f_phi), (0.5, 0.5));
    assert_eq!((at(8.0).f_r, at(8.0).f_phi), (0.0, 1.0));
    assert_eq!((at(10.0).f_r, at(10.0).f_phi), (-0.5, 0.5));
    assert_eq!((at(12.0).f_r, at(12.0).f_phi), (-1.0, 0.0));
}

#[test]
fn heading_rate_peaks_at_blend_midpoint() {
    let f = centered(1.0);
    // 3 / width at the middle of each blend annulus
    assert_relative_eq!(f.field().heading_rate(6.0), 0.75, epsilon = 1e-15);
    assert_relative_eq!(f.field().heading_rate(10.0), 0.75, epsilon = 1e-15);
    assert_eq!(f.field().heading_rate(2.0), 0.0);
    assert_eq!(f.field().heading_rate(20.0), 0.0);
}

#[test]
fn boundary_points_belong_to_outer_region() {
    let f = centered(1.0);
    let field = f.field();
    assert_eq!(field.region(4.0), RegionId::A2);
    assert_eq!(field.region(8.0), RegionId::A3);
    assert_eq!(field.region(12.0), RegionId::A4);
    assert_eq!(field.region(4.0 - 1e-12), RegionId::A1);
}

#[test]
fn curvature_is_zero_on_radial_lines_and_inverse_radius_on_cycle() {
    let f = centered(2.0);
    assert_eq!(f.curvature(Vec2::new(3.0, 1.0)).unwrap(), 0.0);
    assert_eq!(f.curvature(Vec2::new(-40.0, 10.0)).unwrap(), 0.0);
    let on_cycle = Vec2::from_angle(0.7) * f.r2();
    assert_relative_eq!(f.curvature(on_cycle).unwrap(), 1.0 / f.r2(), max_relative = 1e-12);
}

#[test]
fn guidance_field_points_along_target_heading() {
    let f = cvf_core::CvfParams::new(Vec2::new(3.0, -2.0), 1.1, 4.0, 8.0, 12.0, 1.0).unwrap();
    let t = f.cvf(f.target_position());
    assert_relative_eq!(t.angle(), 1.1, epsilon = 1e-12);
    assert_relative_eq!(f.singular_point().distance(f.target_position()), 8.0, epsilon = 1e-12);
}

#[test]
fn gain_function_pieces() {
    let f = centered(2.0);
    let rho = f.rho();
    assert_relative_eq!(k_func(0.5 * rho, &f), 0.5 / rho, epsilon = 1e-15);
    // continuous at rho because rho lies in the source region
    assert_relative_eq!(k_func(rho, &f), 1.0 / rho, epsilon = 1e-15);
    assert_relative_eq!(k_func(12.0 * rho, &f), 1.0 / (12.0 * rho), epsilon = 1e-15);
}

#[test]
fn saturation_clips_to_curvature_bound() {
    assert_eq!(saturated_omega(3.0, 2.0, 1.0), (2.0, true));
    assert_eq!(saturated_omega(-3.0, 2.0, 1.0), (-2.0, true));
    assert_eq!(saturated_omega(0.5, 2.0, 1.0), (0.5, false));
}

#[test]
fn coordinated_turn_closed_form() {
    assert_relative_eq!(roll_setpoint(-1.0, 9.81, 9.81), FRAC_PI_4, epsilon = 1e-15);
    assert_relative_eq!(roll_setpoint(-0.5, 17.0, 9.81), (0.5f64 * 17.0 / 9.81).atan(), epsilon = 1e-15);
}

#[test]
fn pitch_tracks_altitude_error() {
    let uav = UavParams {
        v_min: 16.0,
        v_max: 18.0,
        gravity: 9.81,
        mass: 1.5,
        k_beta: 0.5,
        k_t: 1.0,
        drag: DragModel::Quadratic { c_d: 0.01 },
        h_d: 100.0,
    };
    assert_eq!(pitch_setpoint(100.0, 17.0, &uav).unwrap(), 0.0);
    let up = pitch_setpoint(90.0, 17.0, &uav).unwrap();
    assert_relative_eq!(up, -0.5 * 10.0 / 17.0, epsilon = 1e-15);
}

#[test]
fn rotation_conventions() {
    let r = EulerAngles::new(FRAC_PI_2, 0.0, 0.0).rotation();
    let y = r * Vector3::x();
    assert_relative_eq!(y, Vector3::y(), epsilon = 1e-15);
    assert_eq!(attitude_error(&r, &r).unwrap(), 0.0);
    let err = attitude_error(&rot_z(0.3), &Matrix3::identity()).unwrap();
    assert_relative_eq!(err, 0.3, epsilon = 1e-15);
    let flip = attitude_error(&rot_z(PI), &Matrix3::identity()).unwrap();
    assert_relative_eq!(flip, PI, epsilon = 1e-12);
}

#[test]
fn path_metrics_on_straight_lines() {
    let pts: Vec<Vec2> = (0..=10).map(|i| Vec2::new(i as f64, 0.0)).collect();
    assert_relative_eq!(polyline_length(&pts), 10.0);
    assert_relative_eq!(passage_length(&pts, Vec2::new(6.5, 0.05), 0.1).unwrap(), 6.5, epsilon = 1e-12);
    let lr = relative_length(&pts, pts[0], Vec2::new(10.0, 0.0), 1e-6).unwrap();
    assert_relative_eq!(lr, 1.0, epsilon = 1e-9);
    assert_relative_eq!(omega_rmse_of(&[0.0, 3.0, -1.0]).unwrap(), 12.5f64.sqrt());
}

#[test]
fn angle_wrapping() {
    assert_eq!(wrap_angle(PI), PI);
    assert_relative_eq!(wrap_angle(-PI), PI);
    assert_relative_eq!(wrap_angle(3.0 * PI + 0.25), -PI + 0.25, epsilon = 1e-12);
}
