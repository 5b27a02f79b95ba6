//! Feedback motion prediction: bounding sets guaranteed to contain the
//! entire future closed-loop position trajectory from the current state.

use std::f64::consts::{FRAC_PI_2, PI};

use thiserror::Error;

use crate::geom::{rotate, ConvexSet, Disk, Vec2};
use crate::simulate::{simulate_to_goal, IntegratorSettings, SimError};
use crate::turning::sine_integral;
use crate::unicycle::{
    heading_error, heading_error_for, ControlGains, SteeringMode, UnicycleState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("triangular prediction requires kv <= kw, got kv={kv}, kw={kw}")]
    GainOrder { kv: f64, kw: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// The four bounding-set constructions, ordered from loosest to tightest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictionMethod {
    /// Goal-centered disk through the current position.
    Ball,
    /// Hull of the current position and a goal disk shrunk by the heading
    /// alignment.
    Cone,
    /// Hull of the position, the goal, and the heading-line intersection
    /// points; requires `kv <= kw`.
    Diamond,
    /// Sampled closed-loop trajectory itself.
    ForwardReachable,
}

impl PredictionMethod {
    pub const ALL: [PredictionMethod; 4] = [
        PredictionMethod::Ball,
        PredictionMethod::Cone,
        PredictionMethod::Diamond,
        PredictionMethod::ForwardReachable,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PredictionMethod::Ball => "ball",
            PredictionMethod::Cone => "cone",
            PredictionMethod::Diamond => "diamond",
            PredictionMethod::ForwardReachable => "reachable",
        }
    }
}

/// A motion prediction set together with the state and goal it was built
/// from.
#[derive(Debug, Clone)]
pub struct MotionPrediction {
    pub method: PredictionMethod,
    pub body: ConvexSet,
    pub goal: Vec2,
    pub state: UnicycleState,
}

impl MotionPrediction {
    /// Minimum distance from a point to the prediction set.
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        self.body.distance_to_point(p)
    }

    /// Largest distance from the goal to any point of the set. Shrinks to
    /// zero as the robot converges.
    pub fn radius_about_goal(&self) -> f64 {
        match &self.body {
            ConvexSet::Disk(d) => self.goal.distance(d.center) + d.radius,
            ConvexSet::Polygon(verts) => verts
                .iter()
                .map(|v| v.distance(self.goal))
                .fold(0.0, f64::max),
            ConvexSet::ConeHull { apex, disk } => apex
                .distance(self.goal)
                .max(self.goal.distance(disk.center) + disk.radius),
            ConvexSet::PointChain(pts) => pts
                .iter()
                .map(|v| v.distance(self.goal))
                .fold(0.0, f64::max),
        }
    }
}

/// Closest point of the heading line to the goal, and the reflection of that
/// point across the line through the position and the goal.
pub fn projected_goal(state: &UnicycleState, goal: Vec2) -> (Vec2, Vec2) {
    let psi = heading_error(state, goal);
    let d = goal - state.position;
    let scale = psi.cos();
    (
        state.position + rotate(-psi, d) * scale,
        state.position + rotate(psi, d) * scale,
    )
}

/// Intersection of the current heading line with the final heading line
/// (the line through the goal at the converged orientation), plus its
/// reflection across the goal line. Defined for `kv <= kw`, where the total
/// turning stays below pi and the lines are guaranteed to meet.
pub fn heading_line_intersection(
    state: &UnicycleState,
    goal: Vec2,
    gains: &ControlGains,
) -> Result<(Vec2, Vec2), PredictError> {
    if !gains.turning_bounded() {
        return Err(PredictError::GainOrder {
            kv: gains.kv(),
            kw: gains.kw(),
        });
    }
    let psi = heading_error(state, goal);
    let d = goal - state.position;
    if psi.abs() < 1e-12 {
        // Continuity limit: the intersection slides onto the goal segment at
        // the gain-ratio point.
        let lam = {
            let r = gains.kv() / gains.kw();
            r / (1.0 + r)
        };
        let p = state.position + d * lam;
        return Ok((p, p));
    }
    let psi_final = -gains.kv() / (2.0 * gains.kw())
        * sine_integral(2.0 * psi).expect("2 psi within the Si domain");
    let theta_total = psi - psi_final;
    let ratio = psi_final.sin() / theta_total.sin();
    Ok((
        state.position - rotate(-psi, d) * ratio,
        state.position - rotate(psi, d) * ratio,
    ))
}

/// Boundary intersection points used by the direction-constrained diamond
/// when the goal is behind the robot (heading error magnitude pi/2): the
/// robot first turns in place, and these bound the subsequent motion.
fn turn_in_place_intersections(
    state: &UnicycleState,
    goal: Vec2,
    gains: &ControlGains,
) -> (Vec2, Vec2) {
    let c = gains.kv() / (2.0 * gains.kw()) * sine_integral(PI).expect("pi within domain");
    let scale = c.sin() / (FRAC_PI_2 + c).sin();
    let d = goal - state.position;
    (
        state.position + rotate(-FRAC_PI_2, d) * scale,
        state.position + rotate(FRAC_PI_2, d) * scale,
    )
}

/// Construct the motion prediction set for the given method and steering
/// mode. `settings` are only consulted by `ForwardReachable`, which
/// simulates the closed loop.
pub fn predict(
    state: &UnicycleState,
    goal: Vec2,
    gains: &ControlGains,
    method: PredictionMethod,
    mode: SteeringMode,
    settings: &IntegratorSettings,
) -> Result<MotionPrediction, PredictError> {
    let dist = state.position.distance(goal);
    let body = match method {
        PredictionMethod::Ball => ball_body(goal, dist),
        PredictionMethod::Cone => {
            if directional_goal_behind(state, goal, mode) {
                // Alignment gives no shrinkage while turning in place; fall
                // back to the ball.
                ball_body(goal, dist)
            } else {
                let psi = heading_error(state, goal);
                let radius = psi.abs().sin() * dist;
                ConvexSet::ConeHull {
                    apex: state.position,
                    disk: Disk::new(goal, radius).expect("nonnegative radius"),
                }
            }
        }
        PredictionMethod::Diamond => {
            if !gains.turning_bounded() {
                return Err(PredictError::GainOrder {
                    kv: gains.kv(),
                    kw: gains.kw(),
                });
            }
            if directional_goal_behind(state, goal, mode) {
                let (xb, xbr) = turn_in_place_intersections(state, goal, gains);
                ConvexSet::convex_hull(&[goal, xb, xbr]).expect("finite vertices")
            } else {
                let (xs, xsr) = heading_line_intersection(state, goal, gains)?;
                ConvexSet::convex_hull(&[state.position, goal, xs, xsr]).expect("finite vertices")
            }
        }
        PredictionMethod::ForwardReachable => {
            let traj = simulate_to_goal(state, goal, gains, mode, settings)?;
            if !traj.converged {
                return Err(PredictError::Sim(SimError::Unconverged));
            }
            let mut pts: Vec<Vec2> = traj.samples.iter().map(|s| s.state.position).collect();
            pts.push(goal);
            ConvexSet::point_chain(pts).expect("nonempty chain")
        }
    };
    Ok(MotionPrediction {
        method,
        body,
        goal,
        state: *state,
    })
}

fn ball_body(goal: Vec2, radius: f64) -> ConvexSet {
    ConvexSet::Disk(Disk::new(goal, radius).expect("nonnegative radius"))
}

fn directional_goal_behind(state: &UnicycleState, goal: Vec2, mode: SteeringMode) -> bool {
    match mode {
        SteeringMode::Bidirectional => false,
        SteeringMode::Forward | SteeringMode::Backward => {
            heading_error_for(mode, state, goal).abs() > FRAC_PI_2
        }
    }
}
