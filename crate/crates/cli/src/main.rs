//! `cvf`: feasibility checks, field sampling, closed-loop simulation, Monte
//! Carlo batches and fixed-wing setpoints driven by scenario files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cvf_core::fixedwing::setpoints_from_trajectory;
use cvf_core::metrics::{run_monte_carlo, MonteCarloConfig};
use cvf_core::scenario::{
    load_scenario, load_trajectory, save_convergence_report, save_report, save_report_csv,
    save_setpoints, save_trajectory, Scenario, Start,
};
use cvf_core::simulator::simulate;
use cvf_core::vfield::{integral_curve, sample_grid, write_grid, GridSpec};
use cvf_core::CvfError;

#[derive(Parser)]
#[command(name = "cvf", version, about = "Curvature-constrained vector field guidance toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file, or a directory whose `*.scn` files are all processed.
    #[arg(long, value_name = "PATH")]
    scenario: PathBuf,
    /// Run even if the field parameters violate a feasibility inequality.
    #[arg(long)]
    allow_infeasible: bool,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the feasibility inequalities; exit 1 if any is violated.
    CheckParams {
        #[command(flatten)]
        common: Common,
    },
    /// Write the field on a grid as a whitespace-separated table.
    SampleField {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        /// Grid extents and points per axis; defaults to 1.5 r3 around the
        /// singular point at 101 points.
        #[arg(long, value_name = "XMIN:XMAX:YMIN:YMAX:RES", allow_hyphen_values = true)]
        grid: Option<GridSpec>,
    },
    /// Trace the integral curve through the initial position.
    IntegralCurve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        /// Arc step, m; defaults to rho / 100.
        #[arg(long, value_name = "METERS")]
        arc_step: Option<f64>,
        /// Maximum curve length, m; defaults to 20 r3.
        #[arg(long, value_name = "METERS")]
        max_len: Option<f64>,
    },
    /// Run the closed loop and write the trajectory and a convergence report.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[arg(long, value_name = "SECONDS")]
        dt: Option<f64>,
    },
    /// Run a seeded batch of trials and write the aggregate metrics.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[arg(long, value_name = "N")]
        trials: Option<usize>,
        #[arg(long, value_name = "U64")]
        seed: Option<u64>,
        #[arg(long, value_name = "SECONDS")]
        dt: Option<f64>,
    },
    /// Convert a trajectory CSV into fixed-wing attitude and thrust setpoints.
    Setpoints {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[arg(long, value_name = "CSV")]
        trajectory: PathBuf,
    },
}

fn scenario_paths(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "scn"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!(CvfError::InvalidParams(format!("no .scn files in {}", path.display())));
    }
    Ok(paths)
}

fn load_all(common: &Common, check_feasibility: bool) -> Result<Vec<Scenario>> {
    scenario_paths(&common.scenario)?
        .iter()
        .map(|p| {
            load_scenario(p, common.allow_infeasible || !check_feasibility)
                .with_context(|| format!("loading {}", p.display()))
        })
        .collect()
}

fn out_file(output: &Output, scenario: &Scenario, suffix: &str) -> Result<PathBuf> {
    fs::create_dir_all(&output.out).with_context(|| format!("creating {}", output.out.display()))?;
    Ok(output.out.join(format!("{}_{suffix}", scenario.name)))
}

fn with_dt(mut s: Scenario, dt: Option<f64>) -> Result<Scenario> {
    if let Some(dt) = dt {
        s.sim.dt = dt;
        s.sim.validate(&s.cvf, &s.ctrl)?;
    }
    Ok(s)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::CheckParams { common } => {
            let mut ok = true;
            for s in load_all(&common, false)? {
                println!("{}: {}", s.name, if s.feasibility.passed() { "feasible" } else { "INFEASIBLE" });
                print!("{}", s.feasibility);
                ok &= s.feasibility.passed();
            }
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::SampleField { common, output, grid } => {
            for s in load_all(&common, true)? {
                let spec = grid.unwrap_or_else(|| {
                    GridSpec::square(s.cvf.singular_point(), 1.5 * s.cvf.r3(), 101)
                });
                let path = out_file(&output, &s, "grid.txt")?;
                let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_grid(std::io::BufWriter::new(f), &sample_grid(&s.cvf, &spec))?;
                log::info!("{}: wrote {}", s.name, path.display());
            }
        }
        Command::IntegralCurve { common, output, arc_step, max_len } => {
            for s in load_all(&common, true)? {
                let Some(g0) = s.initial() else {
                    bail!(CvfError::InvalidParams(format!("{}: no [initial] section", s.name)));
                };
                let step = arc_step.unwrap_or(s.cvf.rho() / 100.0);
                let curve = integral_curve(g0.p, &s.cvf, step, max_len.unwrap_or(20.0 * s.cvf.r3()))?;
                let path = out_file(&output, &s, "curve.csv")?;
                let mut text = String::from("s,x,y,r_delta,kappa\n");
                let center = s.cvf.singular_point();
                for (i, p) in curve.points.iter().enumerate() {
                    let kappa = s.cvf.curvature(*p).unwrap_or(f64::NAN);
                    text.push_str(&format!(
                        "{},{},{},{},{}\n",
                        cvf_core::format::fmt17(i as f64 * step),
                        cvf_core::format::fmt17(p.x),
                        cvf_core::format::fmt17(p.y),
                        cvf_core::format::fmt17(p.distance(center)),
                        cvf_core::format::fmt17(kappa)
                    ));
                }
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
                log::info!(
                    "{}: {} points, closed = {}, wrote {}",
                    s.name,
                    curve.points.len(),
                    curve.closed,
                    path.display()
                );
            }
        }
        Command::Simulate { common, output, dt } => {
            for s in load_all(&common, true)? {
                let s = with_dt(s, dt)?;
                let Some(g0) = s.initial() else {
                    bail!(CvfError::InvalidParams(format!("{}: no [initial] section", s.name)));
                };
                let (traj, report) = simulate(&g0, &s.cvf, &s.ctrl, &s.sim)?;
                let traj_path = out_file(&output, &s, "trajectory.csv")?;
                save_trajectory(&traj, &traj_path)?;
                save_convergence_report(&report, &out_file(&output, &s, "report.txt")?)?;
                log::info!(
                    "{}: converged = {} at t = {:?}, {} samples, max |omega|/v_x = {:.6}",
                    s.name,
                    report.converged,
                    report.t_converge,
                    traj.len(),
                    traj.max_kappa()
                );
            }
        }
        Command::Montecarlo { common, output, trials, seed, dt } => {
            for s in load_all(&common, true)? {
                let s = with_dt(s, dt)?;
                let (mut mc, mut master) = match s.start {
                    Start::Batch { mc, seed } => (mc, seed),
                    Start::Single(_) => (MonteCarloConfig::for_params(&s.cvf, 1000), 0),
                };
                if let Some(n) = trials {
                    mc.n_trials = n;
                }
                if let Some(seed) = seed {
                    master = seed;
                }
                log::info!("{}: running {} trials with seed {master}", s.name, mc.n_trials);
                let report = run_monte_carlo(&s.cvf, &s.ctrl, &s.sim, &mc, master)?;
                save_report(&report, &out_file(&output, &s, "metrics.txt")?)?;
                save_report_csv(&report, &out_file(&output, &s, "metrics.csv")?)?;
                eprint!("{report}");
            }
        }
        Command::Setpoints { common, output, trajectory } => {
            let traj = load_trajectory(&trajectory)
                .with_context(|| format!("loading {}", trajectory.display()))?;
            for s in load_all(&common, true)? {
                let Some(uav) = &s.uav else {
                    bail!(CvfError::InvalidParams(format!("{}: no [uav] section", s.name)));
                };
                let setpoints = setpoints_from_trajectory(&traj, &s.cvf, &s.ctrl, uav)?;
                let path = out_file(&output, &s, "setpoints.csv")?;
                save_setpoints(&setpoints, &path)?;
                log::info!("{}: wrote {} setpoints to {}", s.name, setpoints.len(), path.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CvfError>() {
        Some(CvfError::Parse { .. } | CvfError::Io(_)) => 2,
        Some(_) => 1,
        None if err.downcast_ref::<std::io::Error>().is_some() => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
