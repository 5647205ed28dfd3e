mod common;

use std::f64::consts::{PI, TAU};

use cvf_core::scenario::{load_scenario, load_trajectory, save_trajectory};
use cvf_core::simulator::{passage_events, simulate, simulate_with, step, Integrator};
use cvf_core::{Configuration, ControlParams, SimConfig, Vec2};

use common::{centered, menger_curvature, scenario_dir};

#[test]
fn rk4_global_error_is_fourth_order() {
    let (v, w, horizon) = (1.3, 0.7, 5.0);
    let g0 = Configuration::new(0.2, -0.1, 0.4);
    let exact = {
        let th = g0.theta + w * horizon;
        Vec2::new(
            g0.p.x + v / w * (th.sin() - g0.theta.sin()),
            g0.p.y - v / w * (th.cos() - g0.theta.cos()),
        )
    };
    let error = |n: usize| {
        let dt = horizon / n as f64;
        let mut g = g0;
        for _ in 0..n {
            g = step(&g, (v, w), dt, Integrator::Rk4);
        }
        g.p.distance(exact)
    };
    let ratio = error(50) / error(100);
    assert!(ratio >= 8.0, "error ratio {ratio}");
}

#[test]
fn loiter_passes_target_once_per_lap() {
    let cvf = centered(1.0);
    let ctrl = ControlParams::new(1.0, 1.0, 12.0, PI, 1.0, 0.0).unwrap();
    let lap = TAU * cvf.r2();
    let cfg = SimConfig {
        dt: 1e-2,
        stop_on_convergence: false,
        ..SimConfig::for_params(&cvf, 2.5 * lap)
    };
    let (traj, _) = simulate(&cvf.target(), &cvf, &ctrl, &cfg).unwrap();
    let events = passage_events(&traj, &cvf.target(), 0.05);
    assert_eq!(events.len(), 3, "{events:?}");
    for pair in events.windows(2) {
        assert!(((pair[1] - pair[0]) / lap - 1.0).abs() < 1e-3, "{events:?}");
    }
}

#[test]
fn saturation_near_singular_point_only() {
    let s = load_scenario(&scenario_dir().join("unicycle_run2.scn"), false).unwrap();
    let cfg = SimConfig { t_max: 60.0, ..s.sim };
    let report = simulate_with(&s.initial().unwrap(), &s.cvf, &s.ctrl, &cfg, |_| {}).unwrap();
    assert!(!report.saturation_intervals.is_empty());
    assert!(report.max_saturated_r_delta.unwrap() < s.cvf.rho());
    assert!(report.saturation_ended(60.0));
}

#[test]
fn trajectory_curvature_respects_bound() {
    let s = load_scenario(&scenario_dir().join("unicycle_run1.scn"), false).unwrap();
    let cfg = SimConfig { t_max: 80.0, ..s.sim };
    let (traj, _) = simulate(&s.initial().unwrap(), &s.cvf, &s.ctrl, &cfg).unwrap();
    let bound = s.cvf.kappa_max() * (1.0 + 1e-3);
    let mut checked = 0;
    for w in traj.samples.windows(3).step_by(10) {
        if w.iter().all(|smp| smp.out.v_x > 0.05) {
            let k = menger_curvature(w[0].g.p, w[1].g.p, w[2].g.p);
            assert!(k <= bound, "kappa {k} at t = {}", w[1].t);
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn fixed_wing_runs_settle_on_the_loiter_circle() {
    for i in [1, 5, 9] {
        let s = load_scenario(&scenario_dir().join(format!("fixedwing_run{i}.scn")), false).unwrap();
        let report = simulate_with(&s.initial().unwrap(), &s.cvf, &s.ctrl, &s.sim, |_| {}).unwrap();
        assert!(report.converged, "fixedwing_run{i}");
        assert!(report.d_limit_set < s.sim.convergence_eps_pos, "{}", report.d_limit_set);
    }
}

#[test]
fn trajectory_file_round_trip() {
    let s = load_scenario(&scenario_dir().join("unicycle_run3.scn"), false).unwrap();
    let cfg = SimConfig { t_max: 5.0, ..s.sim };
    let (traj, _) = simulate(&s.initial().unwrap(), &s.cvf, &s.ctrl, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    save_trajectory(&traj, &path).unwrap();
    let back = load_trajectory(&path).unwrap();
    assert_eq!(back.len(), traj.len());
    for (a, b) in traj.samples.iter().zip(&back.samples) {
        assert_eq!(a.t, b.t);
        assert_eq!(a.g, b.g);
        assert_eq!(a.out.omega, b.out.omega);
        assert_eq!(a.out.saturated, b.out.saturated);
    }
}
