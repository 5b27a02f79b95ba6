//! World model, reference paths, and time-governed safe path following: the
//! path parameter advances only as fast as the clearance of the predicted
//! motion set allows.

use thiserror::Error;

use crate::geom::{ConvexSet, Vec2};
use crate::predict::{predict, MotionPrediction, PredictError, PredictionMethod};
use crate::simulate::{integrate, IntegratorSettings, SimError};
use crate::unicycle::{
    control, state_derivative, ControlGains, ControlInput, SteeringMode, UnicycleState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GovernError {
    #[error("workspace must be a convex polygon with nonempty interior")]
    BadWorkspace,
    #[error("obstacles must be disks or convex polygons")]
    BadObstacle,
    #[error("robot radius must be finite and nonnegative, got {0}")]
    BadRadius(f64),
    #[error("governor gains must be strictly positive (k_eps={k_eps}, k_s={k_s})")]
    BadGovernorGains { k_eps: f64, k_s: f64 },
    #[error("reference path needs at least two waypoints")]
    ShortPath,
    #[error("path point at arc length {s:.3} has clearance {clearance:.6}; the reference path must keep strictly positive clearance")]
    PathClearance { s: f64, clearance: f64 },
    #[error("initial position must coincide with the path start (off by {0:.6} m)")]
    StartOffPath(f64),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Bounded workspace, static obstacles, and the robot body radius. The free
/// space is every position whose robot disk fits inside the workspace
/// without touching an obstacle.
#[derive(Debug, Clone)]
pub struct World {
    workspace: ConvexSet,
    obstacles: Vec<ConvexSet>,
    robot_radius: f64,
}

impl World {
    pub fn new(
        workspace: ConvexSet,
        obstacles: Vec<ConvexSet>,
        robot_radius: f64,
    ) -> Result<Self, GovernError> {
        match &workspace {
            ConvexSet::Polygon(v) if v.len() >= 3 => {}
            _ => return Err(GovernError::BadWorkspace),
        }
        for obs in &obstacles {
            match obs {
                ConvexSet::Disk(_) | ConvexSet::Polygon(_) => {}
                _ => return Err(GovernError::BadObstacle),
            }
        }
        if !(robot_radius >= 0.0 && robot_radius.is_finite()) {
            return Err(GovernError::BadRadius(robot_radius));
        }
        Ok(World {
            workspace,
            obstacles,
            robot_radius,
        })
    }

    pub fn workspace(&self) -> &ConvexSet {
        &self.workspace
    }

    pub fn obstacles(&self) -> &[ConvexSet] {
        &self.obstacles
    }

    pub fn robot_radius(&self) -> f64 {
        self.robot_radius
    }

    /// Clearance of the robot disk centered at `p`: distance to the nearest
    /// obstacle or workspace boundary minus the robot radius. Negative when
    /// the robot pokes outside the free space.
    pub fn point_clearance(&self, p: Vec2) -> f64 {
        let mut c = self.workspace.signed_depth(p);
        for obs in &self.obstacles {
            c = c.min(obs.distance_to_point(p));
        }
        c - self.robot_radius
    }
}

/// Arc-length parametrized polyline `p(s)`, `s` in `[0, length]`.
#[derive(Debug, Clone)]
pub struct ReferencePath {
    waypoints: Vec<Vec2>,
    cumulative: Vec<f64>,
}

impl ReferencePath {
    pub fn new(waypoints: Vec<Vec2>) -> Result<Self, GovernError> {
        if waypoints.len() < 2 {
            return Err(GovernError::ShortPath);
        }
        let mut cumulative = Vec::with_capacity(waypoints.len());
        let mut total = 0.0;
        cumulative.push(0.0);
        for w in waypoints.windows(2) {
            total += w[0].distance(w[1]);
            cumulative.push(total);
        }
        Ok(ReferencePath {
            waypoints,
            cumulative,
        })
    }

    pub fn waypoints(&self) -> &[Vec2] {
        &self.waypoints
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn in_range(&self, s: f64) -> bool {
        (0.0..=self.length()).contains(&s)
    }

    /// Point at arc length `s`, clamped to the parameter range.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        // Binary search for the segment containing s.
        let i = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        if i + 1 >= self.waypoints.len() {
            return *self.waypoints.last().unwrap();
        }
        let seg_len = self.cumulative[i + 1] - self.cumulative[i];
        if seg_len == 0.0 {
            return self.waypoints[i];
        }
        let t = (s - self.cumulative[i]) / seg_len;
        self.waypoints[i] + (self.waypoints[i + 1] - self.waypoints[i]) * t
    }

    /// Check the strictly-positive-clearance hypothesis at every waypoint
    /// and at samples spaced one percent of the path length apart. Returns
    /// the smallest clearance found.
    pub fn validate_clearance(&self, world: &World) -> Result<f64, GovernError> {
        let mut params: Vec<f64> = self.cumulative.clone();
        let n = 100;
        for i in 0..=n {
            params.push(self.length() * i as f64 / n as f64);
        }
        let mut min_clearance = f64::INFINITY;
        for &s in &params {
            let c = world.point_clearance(self.point_at(s));
            if c <= 0.0 {
                return Err(GovernError::PathClearance { s, clearance: c });
            }
            min_clearance = min_clearance.min(c);
        }
        Ok(min_clearance)
    }
}

/// Governor gains: `k_eps` scales the clearance term, `k_s` pulls the
/// parameter toward the path end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorGains {
    k_eps: f64,
    k_s: f64,
}

impl GovernorGains {
    pub fn new(k_eps: f64, k_s: f64) -> Result<Self, GovernError> {
        if k_eps > 0.0 && k_s > 0.0 && k_eps.is_finite() && k_s.is_finite() {
            Ok(GovernorGains { k_eps, k_s })
        } else {
            Err(GovernError::BadGovernorGains { k_eps, k_s })
        }
    }

    pub fn k_eps(&self) -> f64 {
        self.k_eps
    }

    pub fn k_s(&self) -> f64 {
        self.k_s
    }
}

/// Combined state of the governed system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernedState {
    pub s: f64,
    pub robot: UnicycleState,
}

/// Distance between a motion prediction and the free-space boundary; zero
/// when the prediction is not contained in the free space. The boundary is
/// realized as the robot-radius-deflated workspace and robot-radius-inflated
/// obstacles.
pub fn free_space_distance(world: &World, prediction: &MotionPrediction) -> f64 {
    let mut sd = world.workspace.containment_depth(&prediction.body) - world.robot_radius;
    for obs in &world.obstacles {
        if sd <= 0.0 {
            break;
        }
        sd = sd.min(prediction.body.distance_to_set(obs) - world.robot_radius);
    }
    sd.max(0.0)
}

/// Right-hand side of the governed system: the parameter rate is the lesser
/// of the clearance term and the pull toward the path end, and the robot
/// chases the moving path point.
#[allow(clippy::too_many_arguments)]
pub fn governed_derivative(
    gstate: &GovernedState,
    world: &World,
    path: &ReferencePath,
    gains: &ControlGains,
    ggains: &GovernorGains,
    method: PredictionMethod,
    mode: SteeringMode,
    settings: &IntegratorSettings,
) -> Result<(f64, Vec2, f64), GovernError> {
    let goal = path.point_at(gstate.s);
    let prediction = predict(&gstate.robot, goal, gains, method, mode, settings)?;
    let sd = free_space_distance(world, &prediction);
    let ds = (ggains.k_eps * sd).min(-ggains.k_s * (gstate.s - path.length()));
    let input = control(mode, &gstate.robot, goal, gains);
    let (dx, dth) = state_derivative(&gstate.robot, &input);
    Ok((ds, dx, dth))
}

/// Settings of a path-following run beyond the plain integrator knobs.
#[derive(Debug, Clone)]
pub struct FollowSettings {
    /// Outer-loop integrator settings; `max_time` bounds the whole run.
    pub integrator: IntegratorSettings,
    /// Integrator used to build forward-reachable chains inside the
    /// governor.
    pub prediction_integrator: IntegratorSettings,
    /// Parameter gap below which the path end counts as reached.
    pub s_tol: f64,
    /// Terminal position error below which the run counts as converged.
    pub position_tol: f64,
    /// Report a stall when the clearance term stays at zero this long while
    /// the path end has not been reached.
    pub stall_window: f64,
    /// Cap on the number of reachable-chain points used for safety checks.
    pub reachable_chain_cap: usize,
}

impl Default for FollowSettings {
    fn default() -> Self {
        FollowSettings {
            integrator: IntegratorSettings::default(),
            prediction_integrator: IntegratorSettings::default(),
            s_tol: 1e-3,
            position_tol: 1e-2,
            stall_window: 5.0,
            reachable_chain_cap: 2000,
        }
    }
}

/// One recorded point of a governed run.
#[derive(Debug, Clone, Copy)]
pub struct GovernedSample {
    pub t: f64,
    pub s: f64,
    pub state: UnicycleState,
    pub input: ControlInput,
    pub ds: f64,
    pub safedist: f64,
    /// Robot-disk clearance at the sample; the per-sample safety audit.
    pub clearance: f64,
}

#[derive(Debug, Clone)]
pub struct FollowResult {
    pub samples: Vec<GovernedSample>,
    /// Path end reached within the parameter and position tolerances.
    pub reached: bool,
    pub truncated: bool,
    /// The clearance term pinned the parameter at zero for longer than the
    /// stall window while short of the path end.
    pub stalled: bool,
    pub travel_time: f64,
    pub min_clearance: f64,
    pub terminal_param_gap: f64,
    pub terminal_position_error: f64,
    pub path_length: f64,
    /// Robot arc length traveled divided by travel time.
    pub average_speed: f64,
    pub reachable_chain_cap: usize,
}

/// Thin dense reachable chains down to the configured cap; other bodies pass
/// through unchanged.
fn cap_chain(prediction: MotionPrediction, cap: usize) -> MotionPrediction {
    match prediction.body {
        ConvexSet::PointChain(pts) if pts.len() > cap && cap >= 2 => {
            let n = pts.len();
            let stride = n.div_ceil(cap);
            let mut thinned: Vec<Vec2> = pts.iter().step_by(stride).copied().collect();
            if *thinned.last().unwrap() != pts[n - 1] {
                thinned.push(pts[n - 1]);
            }
            MotionPrediction {
                body: ConvexSet::PointChain(thinned),
                ..prediction
            }
        }
        body => MotionPrediction { body, ..prediction },
    }
}

/// Integrate the time-governed path-following system from the path start
/// until the end of the path is reached or time runs out. Records the
/// clearance term and the robot clearance at every accepted step.
#[allow(clippy::too_many_arguments)]
pub fn follow_path(
    world: &World,
    path: &ReferencePath,
    initial: &UnicycleState,
    gains: &ControlGains,
    ggains: &GovernorGains,
    method: PredictionMethod,
    mode: SteeringMode,
    settings: &FollowSettings,
) -> Result<FollowResult, GovernError> {
    path.validate_clearance(world)?;
    let start_gap = initial.position.distance(path.point_at(0.0));
    if start_gap > 1e-6 {
        return Err(GovernError::StartOffPath(start_gap));
    }
    // Surface gain-order violations before integrating.
    let probe = GovernedState {
        s: 0.0,
        robot: *initial,
    };
    governed_derivative(
        &probe,
        world,
        path,
        gains,
        ggains,
        method,
        mode,
        &settings.prediction_integrator,
    )?;

    let smax = path.length();
    let end = path.point_at(smax);
    let eval = |y: &[f64; 4]| -> Result<(f64, f64, ControlInput), GovernError> {
        let gstate = GovernedState {
            s: y[0].clamp(0.0, smax),
            robot: UnicycleState::new(Vec2::new(y[1], y[2]), y[3]),
        };
        let goal = path.point_at(gstate.s);
        let prediction = cap_chain(
            predict(
                &gstate.robot,
                goal,
                gains,
                method,
                mode,
                &settings.prediction_integrator,
            )?,
            settings.reachable_chain_cap,
        );
        let sd = free_space_distance(world, &prediction);
        let ds = (ggains.k_eps * sd).min(-ggains.k_s * (gstate.s - smax));
        let input = control(mode, &gstate.robot, goal, gains);
        Ok((ds, sd, input))
    };

    let mut inner_error: Option<GovernError> = None;
    let dynamics = |y: &[f64; 4]| -> [f64; 4] {
        match eval(y) {
            Ok((ds, _, input)) => {
                let state = UnicycleState::new(Vec2::new(y[1], y[2]), y[3]);
                let (dx, dth) = state_derivative(&state, &input);
                [ds, dx.x, dx.y, dth]
            }
            Err(e) => {
                // Freeze the parameter and stop the robot; surfaced after
                // integration.
                if inner_error.is_none() {
                    inner_error = Some(e);
                }
                [0.0, 0.0, 0.0, 0.0]
            }
        }
    };

    let run = integrate(
        dynamics,
        [
            0.0,
            initial.position.x,
            initial.position.y,
            initial.orientation.radians(),
        ],
        &settings.integrator,
        |_, y| {
            smax - y[0] <= 0.5 * settings.s_tol
                && Vec2::new(y[1], y[2]).distance(end) <= 0.5 * settings.position_tol
        },
    )?;
    if let Some(e) = inner_error {
        return Err(e);
    }

    let mut samples = Vec::with_capacity(run.times.len());
    let mut min_clearance = f64::INFINITY;
    let mut distance_traveled = 0.0;
    let mut prev_pos: Option<Vec2> = None;
    for (&t, y) in run.times.iter().zip(&run.states) {
        let state = UnicycleState::new(Vec2::new(y[1], y[2]), y[3]);
        let (ds, sd, input) = eval(y)?;
        let clearance = world.point_clearance(state.position);
        min_clearance = min_clearance.min(clearance);
        if let Some(p) = prev_pos {
            distance_traveled += p.distance(state.position);
        }
        prev_pos = Some(state.position);
        samples.push(GovernedSample {
            t,
            s: y[0].clamp(0.0, smax),
            state,
            input,
            ds,
            safedist: sd,
            clearance,
        });
    }

    let last = samples.last().expect("at least the initial sample");
    let terminal_param_gap = smax - last.s;
    let terminal_position_error = last.state.position.distance(end);
    let travel_time = last.t;
    let stalled = detect_stall(&samples, smax, settings.s_tol, settings.stall_window);
    Ok(FollowResult {
        reached: terminal_param_gap <= settings.s_tol
            && terminal_position_error <= settings.position_tol,
        truncated: run.truncated,
        stalled,
        travel_time,
        min_clearance,
        terminal_param_gap,
        terminal_position_error,
        path_length: smax,
        average_speed: if travel_time > 0.0 {
            distance_traveled / travel_time
        } else {
            0.0
        },
        reachable_chain_cap: settings.reachable_chain_cap,
        samples,
    })
}

/// True when the clearance term sits at zero for at least `window` seconds
/// while the parameter is still short of the path end.
fn detect_stall(samples: &[GovernedSample], smax: f64, s_tol: f64, window: f64) -> bool {
    let mut span_start: Option<f64> = None;
    for sample in samples {
        let pinned = sample.safedist <= 1e-9 && smax - sample.s > s_tol;
        if pinned {
            let start = *span_start.get_or_insert(sample.t);
            if sample.t - start >= window {
                return true;
            }
        } else {
            span_start = None;
        }
    }
    false
}
