//! Subcommand implementations: simulate, predict, follow, fit-si, compare.

use std::io::Write;
use std::path::{Path, PathBuf};

use unicycle_motion::geom::Vec2;
use unicycle_motion::govern::{follow_path, free_space_distance, FollowResult, FollowSettings};
use unicycle_motion::predict::{predict, MotionPrediction, PredictionMethod};
use unicycle_motion::simulate::{simulate_to_goal, Trajectory};
use unicycle_motion::turning::{fit_si_multistart, fit_si_sinusoids};
use unicycle_motion::unicycle::{heading_error_for, SteeringMode};

use crate::emit::{write_predictions, write_trajectory, TrajectoryRow};
use crate::error::CliError;
use crate::report::{
    write_json, FitReport, FitRow, GainsReport, GovernorReport, PredictReport, PredictionSummary,
    RunReport, TOOL_VERSION,
};
use crate::scenario::{parse_method, parse_mode, Scenario};

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub method: Option<String>,
    pub mode: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub max_time: Option<f64>,
}

pub fn apply_overrides(scenario: &mut Scenario, overrides: &Overrides) -> Result<(), CliError> {
    if let Some(m) = &overrides.method {
        scenario.method = Some(parse_method(m)?);
    }
    if let Some(m) = &overrides.mode {
        scenario.mode = parse_mode(m)?;
    }
    if let Some(t) = overrides.max_time {
        if t <= 0.0 {
            return Err(CliError::Validation("max-time must be positive".into()));
        }
        scenario.integrator.max_time = t;
    }
    if let Some(out) = &overrides.out {
        scenario.output_dir = out.display().to_string();
    }
    Ok(())
}

pub fn output_dir(scenario: &Scenario) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(&scenario.output_dir);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn mode_name(mode: SteeringMode) -> &'static str {
    match mode {
        SteeringMode::Bidirectional => "bi",
        SteeringMode::Forward => "fwd",
        SteeringMode::Backward => "bwd",
    }
}

fn selected_method(scenario: &Scenario) -> PredictionMethod {
    scenario.method.unwrap_or(PredictionMethod::Diamond)
}

/// Methods applicable under the scenario gains: the diamond construction is
/// skipped when the linear gain dominates.
fn valid_methods(scenario: &Scenario) -> Vec<PredictionMethod> {
    PredictionMethod::ALL
        .into_iter()
        .filter(|m| *m != PredictionMethod::Diamond || scenario.gains.turning_bounded())
        .collect()
}

fn trapezoid_turning(times: &[f64], omegas: &[f64]) -> (f64, f64) {
    let mut signed = 0.0;
    let mut absolute = 0.0;
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        signed += 0.5 * dt * (omegas[i] + omegas[i - 1]);
        absolute += 0.5 * dt * (omegas[i].abs() + omegas[i - 1].abs());
    }
    (signed, absolute)
}

fn path_length_of(points: impl Iterator<Item = Vec2>) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<Vec2> = None;
    for p in points {
        if let Some(q) = prev {
            total += q.distance(p);
        }
        prev = Some(p);
    }
    total
}

/// Snapshot times: t = 0 plus evenly spaced instants over the run,
/// mapped to the nearest recorded samples.
fn snapshot_indices(times: &[f64], count: usize) -> Vec<usize> {
    let duration = *times.last().unwrap_or(&0.0);
    let mut indices = vec![0];
    for k in 1..=count.max(1) {
        let target = duration * k as f64 / count.max(1) as f64;
        let idx = times
            .iter()
            .position(|&t| t >= target)
            .unwrap_or(times.len() - 1);
        if *indices.last().unwrap() != idx {
            indices.push(idx);
        }
    }
    indices
}

/// Closed-loop run to the scenario goal: trajectory, prediction-set
/// snapshots, and a run report.
pub fn run_simulate(scenario: &Scenario, out: &Path) -> Result<RunReport, CliError> {
    let world = scenario.require_world()?;
    let initial = scenario.require_initial()?;
    let goal = scenario.require_goal()?;
    let method = selected_method(scenario);
    let mode = scenario.mode;
    let settings = scenario.integrator;

    let traj: Trajectory = simulate_to_goal(initial, goal, &scenario.gains, mode, &settings)?;

    let mut rows = Vec::with_capacity(traj.samples.len());
    let mut min_clearance = f64::INFINITY;
    for sample in &traj.samples {
        let prediction = predict(
            &sample.state,
            goal,
            &scenario.gains,
            method,
            mode,
            &settings,
        )?;
        let sd = free_space_distance(world, &prediction);
        min_clearance = min_clearance.min(world.point_clearance(sample.state.position));
        rows.push(TrajectoryRow {
            time: sample.t,
            x: sample.state.position.x,
            y: sample.state.position.y,
            theta: sample.state.orientation.radians(),
            v: sample.input.v,
            w: sample.input.w,
            psi: sample.heading_error,
            dist_goal: sample.goal_distance,
            safedist: sd,
            s: 0.0,
        });
    }
    write_trajectory(&out.join("trajectory.dat"), &rows)?;

    let mut records: Vec<(f64, MotionPrediction)> = Vec::new();
    for idx in snapshot_indices(
        &traj.samples.iter().map(|s| s.t).collect::<Vec<_>>(),
        scenario.snapshots,
    ) {
        let sample = &traj.samples[idx];
        for m in valid_methods(scenario) {
            let prediction = if m == PredictionMethod::ForwardReachable {
                // The reachable set of a snapshot state along this very run
                // is the remainder of the recorded trajectory.
                let mut pts: Vec<Vec2> = traj.samples[idx..]
                    .iter()
                    .map(|s| s.state.position)
                    .collect();
                pts.push(goal);
                MotionPrediction {
                    method: m,
                    body: unicycle_motion::geom::ConvexSet::point_chain(pts)
                        .expect("nonempty suffix"),
                    goal,
                    state: sample.state,
                }
            } else {
                predict(&sample.state, goal, &scenario.gains, m, mode, &settings)?
            };
            records.push((sample.t, prediction));
        }
    }
    write_predictions(&out.join("predictions.dat"), &records)?;

    let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let omegas: Vec<f64> = traj.samples.iter().map(|s| s.input.w).collect();
    let (signed, absolute) = trapezoid_turning(&times, &omegas);
    let terminal = traj.terminal();
    let travel_time = traj.duration();
    let report = RunReport {
        command: "simulate".into(),
        method: method.name().into(),
        mode: mode_name(mode).into(),
        gains: GainsReport {
            kv: scenario.gains.kv(),
            kw: scenario.gains.kw(),
        },
        governor: None,
        travel_time,
        average_speed: if travel_time > 0.0 {
            path_length_of(traj.samples.iter().map(|s| s.state.position)) / travel_time
        } else {
            0.0
        },
        min_clearance,
        turning_signed: signed,
        turning_absolute: absolute,
        terminal_position_error: terminal.goal_distance,
        terminal_param_gap: None,
        reached: traj.converged,
        stalled: None,
        reachable_chain_cap: None,
        tool_version: TOOL_VERSION.into(),
    };
    write_json(&out.join("report.json"), &report)?;
    if !traj.converged {
        return Err(CliError::Truncation(format!(
            "goal not reached within max_time = {} s (terminal distance {:.6})",
            settings.max_time, terminal.goal_distance
        )));
    }
    Ok(report)
}

/// Emit prediction-set geometry for the initial state.
pub fn run_predict(scenario: &Scenario, out: &Path) -> Result<PredictReport, CliError> {
    let initial = scenario.require_initial()?;
    let goal = scenario.require_goal()?;
    let mode = scenario.mode;
    let settings = scenario.integrator;

    let methods = match scenario.method {
        Some(m) => vec![m],
        None => valid_methods(scenario),
    };
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for method in methods {
        let m = predict(initial, goal, &scenario.gains, method, mode, &settings)?;
        summaries.push(PredictionSummary {
            method: method.name().into(),
            radius_about_goal: m.radius_about_goal(),
            free_space_distance: scenario.world.as_ref().map(|w| free_space_distance(w, &m)),
        });
        records.push((0.0, m));
    }
    write_predictions(&out.join("predictions.dat"), &records)?;
    let report = PredictReport {
        mode: mode_name(mode).into(),
        gains: GainsReport {
            kv: scenario.gains.kv(),
            kw: scenario.gains.kw(),
        },
        predictions: summaries,
        tool_version: TOOL_VERSION.into(),
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

fn follow_rows(result: &FollowResult, scenario: &Scenario) -> Vec<TrajectoryRow> {
    let path = scenario.path.as_ref().expect("follow ran with a path");
    result
        .samples
        .iter()
        .map(|sample| {
            let goal = path.point_at(sample.s);
            TrajectoryRow {
                time: sample.t,
                x: sample.state.position.x,
                y: sample.state.position.y,
                theta: sample.state.orientation.radians(),
                v: sample.input.v,
                w: sample.input.w,
                psi: heading_error_for(scenario.mode, &sample.state, goal),
                dist_goal: sample.state.position.distance(goal),
                safedist: sample.safedist,
                s: sample.s,
            }
        })
        .collect()
}

fn follow_report(
    result: &FollowResult,
    scenario: &Scenario,
    method: PredictionMethod,
) -> RunReport {
    let times: Vec<f64> = result.samples.iter().map(|s| s.t).collect();
    let omegas: Vec<f64> = result.samples.iter().map(|s| s.input.w).collect();
    let (signed, absolute) = trapezoid_turning(&times, &omegas);
    RunReport {
        command: "follow".into(),
        method: method.name().into(),
        mode: mode_name(scenario.mode).into(),
        gains: GainsReport {
            kv: scenario.gains.kv(),
            kw: scenario.gains.kw(),
        },
        governor: Some(GovernorReport {
            k_eps: scenario.governor.k_eps(),
            k_s: scenario.governor.k_s(),
        }),
        travel_time: result.travel_time,
        average_speed: result.average_speed,
        min_clearance: result.min_clearance,
        turning_signed: signed,
        turning_absolute: absolute,
        terminal_position_error: result.terminal_position_error,
        terminal_param_gap: Some(result.terminal_param_gap),
        reached: result.reached,
        stalled: Some(result.stalled),
        reachable_chain_cap: (method == PredictionMethod::ForwardReachable)
            .then_some(result.reachable_chain_cap),
        tool_version: TOOL_VERSION.into(),
    }
}

fn run_follow_method(
    scenario: &Scenario,
    method: PredictionMethod,
) -> Result<FollowResult, CliError> {
    let world = scenario.require_world()?;
    let path = scenario.require_path()?;
    let initial = scenario.require_initial()?;
    let settings = FollowSettings {
        integrator: scenario.integrator,
        ..FollowSettings::default()
    };
    let result = follow_path(
        world,
        path,
        initial,
        &scenario.gains,
        &scenario.governor,
        method,
        scenario.mode,
        &settings,
    )?;
    Ok(result)
}

/// Time-governed path following with the selected prediction method.
pub fn run_follow(scenario: &Scenario, out: &Path) -> Result<RunReport, CliError> {
    let method = selected_method(scenario);
    let result = run_follow_method(scenario, method)?;
    write_trajectory(&out.join("trajectory.dat"), &follow_rows(&result, scenario))?;
    let report = follow_report(&result, scenario, method);
    write_json(&out.join("report.json"), &report)?;
    if result.stalled {
        return Err(CliError::Truncation(
            "governor stalled: the clearance term stayed at zero; the scenario leaves the \
             prediction set no room at the current state"
                .into(),
        ));
    }
    if !result.reached {
        return Err(CliError::Truncation(format!(
            "path end not reached: parameter gap {:.6}, position error {:.6}",
            result.terminal_param_gap, result.terminal_position_error
        )));
    }
    Ok(report)
}

/// Path following under all four prediction methods, run concurrently;
/// emits per-method speed profiles and a travel-time table.
pub fn run_compare(scenario: &Scenario, out: &Path) -> Result<Vec<RunReport>, CliError> {
    let methods = valid_methods(scenario);
    let results: Vec<(PredictionMethod, Result<FollowResult, CliError>)> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = methods
                .iter()
                .map(|&method| scope.spawn(move || (method, run_follow_method(scenario, method))))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("follow thread"))
                .collect()
        });

    let mut reports = Vec::new();
    for (method, result) in results {
        let result = result?;
        write_trajectory(
            &out.join(format!("trajectory_{}.dat", method.name())),
            &follow_rows(&result, scenario),
        )?;
        reports.push(follow_report(&result, scenario, method));
    }
    write_json(&out.join("compare.json"), &reports)?;

    let mut table = String::from("method travel_time average_speed min_clearance reached\n");
    for r in &reports {
        table.push_str(&format!(
            "{} {:.6} {:.6} {:.6} {}\n",
            r.method, r.travel_time, r.average_speed, r.min_clearance, r.reached
        ));
    }
    let mut f = std::fs::File::create(out.join("compare.txt"))?;
    f.write_all(table.as_bytes())?;

    if let Some(bad) = reports.iter().find(|r| !r.reached) {
        return Err(CliError::Truncation(format!(
            "method {} did not reach the path end",
            bad.method
        )));
    }
    Ok(reports)
}

/// Reproduce the sum-of-sinusoids approximation table for the configured
/// orders.
pub fn run_fit(scenario: &Scenario, out: &Path, seed: u64) -> Result<FitReport, CliError> {
    let mut fits = Vec::new();
    for &order in &scenario.fit.orders {
        let fit = if scenario.fit.multistart > 0 {
            fit_si_multistart(order, scenario.fit.grid_size, scenario.fit.multistart, seed)?
        } else {
            fit_si_sinusoids(order, scenario.fit.grid_size, None)?
        };
        fits.push(FitRow {
            order,
            weights: fit.weights,
            frequencies: fit.frequencies,
            rmse: fit.rmse,
        });
    }
    let report = FitReport {
        grid_size: scenario.fit.grid_size,
        multistart: scenario.fit.multistart,
        seed,
        fits,
        tool_version: TOOL_VERSION.into(),
    };
    write_json(&out.join("fit.json"), &report)?;

    let mut table = String::from("order weights frequencies rmse\n");
    for row in &report.fits {
        table.push_str(&format!(
            "{} {} {} {:.6e}\n",
            row.order,
            row.weights
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(","),
            row.frequencies
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(","),
            row.rmse
        ));
    }
    std::fs::write(out.join("fit.txt"), table)?;
    Ok(report)
}
