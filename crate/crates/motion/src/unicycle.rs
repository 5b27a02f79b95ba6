//! Unicycle kinematics, angular heading errors, and the goal-seeking
//! velocity controllers (bidirectional and direction-constrained).

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::geom::{wrap_angle, Angle, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GainError {
    #[error("control gains must be strictly positive (kv={kv}, kw={kw})")]
    NonPositive { kv: f64, kw: f64 },
}

/// Pose of the robot: planar position in meters plus heading in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnicycleState {
    pub position: Vec2,
    pub orientation: Angle,
}

impl UnicycleState {
    pub fn new(position: Vec2, orientation: f64) -> Self {
        UnicycleState {
            position,
            orientation: Angle::new(orientation),
        }
    }
}

/// Linear (`kv`) and angular (`kw`) velocity gains, both in 1/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlGains {
    kv: f64,
    kw: f64,
}

impl ControlGains {
    pub fn new(kv: f64, kw: f64) -> Result<Self, GainError> {
        if kv > 0.0 && kw > 0.0 && kv.is_finite() && kw.is_finite() {
            Ok(ControlGains { kv, kw })
        } else {
            Err(GainError::NonPositive { kv, kw })
        }
    }

    pub fn kv(&self) -> f64 {
        self.kv
    }

    pub fn kw(&self) -> f64 {
        self.kw
    }

    /// Whether the angular gain dominates, which bounds the total turning
    /// by pi and rules out spiral circulation around the goal.
    pub fn turning_bounded(&self) -> bool {
        self.kv <= self.kw
    }
}

/// Commanded linear (m/s) and angular (rad/s) velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub v: f64,
    pub w: f64,
}

/// Movement constraint of the platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SteeringMode {
    /// May drive forward or in reverse, whichever shrinks the goal distance.
    Bidirectional,
    /// Forward motion only.
    Forward,
    /// Reverse motion only.
    Backward,
}

fn frame_components(state: &UnicycleState, goal: Vec2) -> (f64, f64) {
    let d = goal - state.position;
    let o = state.orientation.heading_vector();
    let n = state.orientation.normal_vector();
    (o.dot(d), n.dot(d))
}

/// Signed angular heading error in `[-pi/2, pi/2]`: the counterclockwise
/// angle from the robot's heading *line* to the goal line. Zero at the goal
/// by convention; `±pi/2` when the goal lies exactly sideways.
pub fn heading_error(state: &UnicycleState, goal: Vec2) -> f64 {
    if goal == state.position {
        return 0.0;
    }
    let (od, nd) = frame_components(state, goal);
    if od == 0.0 {
        nd.signum() * FRAC_PI_2
    } else {
        (nd / od).atan()
    }
}

/// Heading error of a forward-moving robot, in `[-pi, pi)`: the full signed
/// angle from the heading direction to the goal direction. Zero at the goal.
pub fn heading_error_forward(state: &UnicycleState, goal: Vec2) -> f64 {
    if goal == state.position {
        return 0.0;
    }
    let (od, nd) = frame_components(state, goal);
    wrap_angle(nd.atan2(od))
}

/// Heading error of a backward-moving robot, in `[-pi, pi)`: measured from
/// the reversed heading direction. Zero at the goal.
pub fn heading_error_backward(state: &UnicycleState, goal: Vec2) -> f64 {
    if goal == state.position {
        return 0.0;
    }
    let (od, nd) = frame_components(state, goal);
    wrap_angle((-nd).atan2(-od))
}

/// Heading error for the given steering mode.
pub fn heading_error_for(mode: SteeringMode, state: &UnicycleState, goal: Vec2) -> f64 {
    match mode {
        SteeringMode::Bidirectional => heading_error(state, goal),
        SteeringMode::Forward => heading_error_forward(state, goal),
        SteeringMode::Backward => heading_error_backward(state, goal),
    }
}

/// Bidirectional controller: `v = kv o.(g-x)`, `w = kw psi + kv/2 sin(2 psi)`.
/// The angular law makes the closed-loop heading error decay as
/// `psi_dot = -kw psi`.
pub fn control_bidirectional(
    state: &UnicycleState,
    goal: Vec2,
    gains: &ControlGains,
) -> ControlInput {
    let (od, _) = frame_components(state, goal);
    let psi = heading_error(state, goal);
    ControlInput {
        v: gains.kv * od,
        w: gains.kw * psi + 0.5 * gains.kv * (2.0 * psi).sin(),
    }
}

/// Forward-only controller: linear velocity is clamped at zero and the robot
/// turns in place (`w = kw psi`) while the goal is behind it.
pub fn control_forward(state: &UnicycleState, goal: Vec2, gains: &ControlGains) -> ControlInput {
    let (od, _) = frame_components(state, goal);
    let psi = heading_error_forward(state, goal);
    let w = if psi.abs() <= FRAC_PI_2 {
        gains.kw * psi + 0.5 * gains.kv * (2.0 * psi).sin()
    } else {
        gains.kw * psi
    };
    ControlInput {
        v: (gains.kv * od).max(0.0),
        w,
    }
}

/// Reverse-only controller, the mirror of [`control_forward`].
pub fn control_backward(state: &UnicycleState, goal: Vec2, gains: &ControlGains) -> ControlInput {
    let (od, _) = frame_components(state, goal);
    let psi = heading_error_backward(state, goal);
    let w = if psi.abs() <= FRAC_PI_2 {
        gains.kw * psi + 0.5 * gains.kv * (2.0 * psi).sin()
    } else {
        gains.kw * psi
    };
    ControlInput {
        v: (gains.kv * od).min(0.0),
        w,
    }
}

/// Controller for the given steering mode.
pub fn control(
    mode: SteeringMode,
    state: &UnicycleState,
    goal: Vec2,
    gains: &ControlGains,
) -> ControlInput {
    match mode {
        SteeringMode::Bidirectional => control_bidirectional(state, goal, gains),
        SteeringMode::Forward => control_forward(state, goal, gains),
        SteeringMode::Backward => control_backward(state, goal, gains),
    }
}

/// Kinematics: `dx = v o_theta`, `dtheta = w`. The no-sideways-motion
/// constraint `n_theta . dx = 0` holds to the rounding of the component
/// products.
pub fn state_derivative(state: &UnicycleState, input: &ControlInput) -> (Vec2, f64) {
    (state.orientation.heading_vector() * input.v, input.w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn gains(kv: f64, kw: f64) -> ControlGains {
        ControlGains::new(kv, kw).unwrap()
    }

    #[test]
    fn gains_must_be_positive() {
        assert!(ControlGains::new(0.0, 1.0).is_err());
        assert!(ControlGains::new(1.0, -2.0).is_err());
        assert!(ControlGains::new(1.0, 2.0).is_ok());
    }

    #[test]
    fn heading_error_examples() {
        let s = UnicycleState::new(Vec2::ZERO, 0.0);
        assert_relative_eq!(
            heading_error(&s, Vec2::new(1.0, 1.0)),
            FRAC_PI_4,
            epsilon = 1e-12
        );
        assert_eq!(heading_error(&s, Vec2::ZERO), 0.0);
        // Goal dead behind: the bidirectional error vanishes.
        assert_eq!(heading_error(&s, Vec2::new(-1.0, 0.0)), 0.0);
        // Goal exactly sideways.
        assert_relative_eq!(
            heading_error(&UnicycleState::new(Vec2::ZERO, 0.0), Vec2::new(0.0, 2.0)),
            FRAC_PI_2
        );
        assert_relative_eq!(
            heading_error(&UnicycleState::new(Vec2::ZERO, 0.0), Vec2::new(0.0, -2.0)),
            -FRAC_PI_2
        );
    }

    #[test]
    fn directional_heading_errors() {
        let s = UnicycleState::new(Vec2::ZERO, 0.0);
        // Goal directly behind: forward error sits at the antipodal value,
        // canonicalized to -pi; backward error is zero.
        assert_eq!(heading_error_forward(&s, Vec2::new(-1.0, 0.0)), -PI);
        assert_eq!(heading_error_backward(&s, Vec2::new(-1.0, 0.0)), 0.0);
        assert_eq!(heading_error_forward(&s, Vec2::new(1.0, 0.0)), 0.0);
        assert_relative_eq!(heading_error_forward(&s, Vec2::new(0.0, 1.0)), FRAC_PI_2);
        assert_relative_eq!(heading_error_backward(&s, Vec2::new(0.0, 1.0)), -FRAC_PI_2);
        assert_eq!(heading_error_forward(&s, Vec2::ZERO), 0.0);
    }

    #[test]
    fn bidirectional_control_values() {
        let s = UnicycleState::new(Vec2::ZERO, 0.0);
        let u = control_bidirectional(&s, Vec2::new(1.0, 1.0), &gains(1.0, 2.0));
        assert_relative_eq!(u.v, 1.0, epsilon = 1e-12);
        // kw*psi + kv/2 sin(2 psi) with psi = pi/4, cross-checked against the
        // algebraic form kw psi + kv (n.d/|d|)(o.d/|d|).
        assert_relative_eq!(u.w, 2.0 * FRAC_PI_4 + 0.5, epsilon = 1e-12);
        let d = Vec2::new(1.0, 1.0);
        let alt = 2.0 * FRAC_PI_4 + 1.0 * (d.y / d.norm()) * (d.x / d.norm());
        assert_relative_eq!(u.w, alt, epsilon = 1e-12);

        let at_goal = control_bidirectional(&s, Vec2::ZERO, &gains(1.0, 2.0));
        assert_eq!(at_goal, ControlInput { v: 0.0, w: 0.0 });

        // Goal straight behind: reverse without turning.
        let back = control_bidirectional(&s, Vec2::new(-2.0, 0.0), &gains(1.0, 2.0));
        assert!(back.v < 0.0);
        assert_eq!(back.w, 0.0);
    }

    #[test]
    fn directional_control_values() {
        let g = gains(1.0, 2.0);
        let s = UnicycleState::new(Vec2::ZERO, 0.0);
        // Goal behind a forward-only robot: stop and turn in place.
        let u = control_forward(&s, Vec2::new(-1.0, 0.5), &g);
        assert_eq!(u.v, 0.0);
        let psi = heading_error_forward(&s, Vec2::new(-1.0, 0.5));
        assert_relative_eq!(u.w, 2.0 * psi);

        // Goal ahead: identical to the bidirectional law up to arctangent
        // rounding.
        let ahead = Vec2::new(2.0, 0.5);
        let fwd = control_forward(&s, ahead, &g);
        let bi = control_bidirectional(&s, ahead, &g);
        assert_eq!(fwd.v, bi.v);
        assert_relative_eq!(fwd.w, bi.w, max_relative = 1e-14);

        // Reverse straight back.
        let bw = control_backward(&s, Vec2::new(-1.0, 0.0), &g);
        assert_relative_eq!(bw.v, -1.0);
        assert_eq!(bw.w, 0.0);
    }

    #[test]
    fn derivative_examples() {
        let s = UnicycleState::new(Vec2::ZERO, 0.0);
        let (dx, dth) = state_derivative(&s, &ControlInput { v: 1.0, w: 0.3 });
        assert_eq!(dx, Vec2::new(1.0, 0.0));
        assert_eq!(dth, 0.3);

        let (dx0, _) = state_derivative(&s, &ControlInput { v: 0.0, w: 1.0 });
        assert_eq!(dx0, Vec2::ZERO);

        let s2 = UnicycleState::new(Vec2::ZERO, FRAC_PI_4);
        let (dx2, _) = state_derivative(&s2, &ControlInput { v: 2.0, w: 0.0 });
        assert_relative_eq!(dx2.x, 2.0_f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(dx2.y, 2.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn no_sideways_motion_to_rounding() {
        let mut seed = 7u64;
        let mut next = || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..500 {
            let s = UnicycleState::new(
                Vec2::new(next() * 10.0 - 5.0, next() * 10.0 - 5.0),
                next() * 2.0 * PI - PI,
            );
            let u = ControlInput {
                v: next() * 4.0 - 2.0,
                w: next(),
            };
            let (dx, _) = state_derivative(&s, &u);
            let residual = s.orientation.normal_vector().dot(dx);
            assert!(
                residual.abs() <= 1e-15 * (1.0 + u.v.abs()),
                "residual {residual}"
            );
        }
    }

    #[test]
    fn aligning_by_the_heading_error_zeroes_it() {
        // psi(x, th + psi, g) = 0, and psi(x, th + psi + t, g) = -t for
        // |t| < pi/2.
        let mut seed = 99u64;
        let mut next = || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..300 {
            let s = UnicycleState::new(
                Vec2::new(next() * 4.0 - 2.0, next() * 4.0 - 2.0),
                next() * 2.0 * PI - PI,
            );
            let goal = Vec2::new(next() * 4.0 - 2.0, next() * 4.0 - 2.0);
            if goal == s.position {
                continue;
            }
            let psi = heading_error(&s, goal);
            if psi.abs() >= FRAC_PI_2 - 1e-9 {
                continue;
            }
            let aligned = UnicycleState::new(s.position, s.orientation.radians() + psi);
            assert!(heading_error(&aligned, goal).abs() < 1e-9);

            let t = (next() - 0.5) * (PI - 1e-3);
            let offset = UnicycleState::new(s.position, s.orientation.radians() + psi + t);
            assert_relative_eq!(heading_error(&offset, goal), -t, epsilon = 1e-9);
        }
    }
}
