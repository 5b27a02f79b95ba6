//! Cross-module checks of the closed loop: direction-constrained turning
//! against the simulated integral, directional prediction containment, and
//! the gain dependence of the triangular bound.

use std::f64::consts::{FRAC_PI_2, PI};

use unicycle_motion::geom::{rotate, Vec2};
use unicycle_motion::predict::{heading_line_intersection, predict, PredictionMethod};
use unicycle_motion::simulate::{integrated_turning, simulate_to_goal, IntegratorSettings};
use unicycle_motion::turning::{final_orientation, total_turning};
use unicycle_motion::unicycle::{ControlGains, SteeringMode, UnicycleState};

fn gains(kv: f64, kw: f64) -> ControlGains {
    ControlGains::new(kv, kw).unwrap()
}

fn oracle_settings() -> IntegratorSettings {
    IntegratorSettings {
        rel_tol: 1e-10,
        abs_tol: 1e-13,
        max_step: 0.01,
        max_time: 60.0,
        goal_eps: Some(1e-8),
    }
}

/// Goal at distance 1 and bearing `psi0` from a robot at the origin facing
/// along x.
fn scene(psi0: f64) -> (UnicycleState, Vec2) {
    (
        UnicycleState::new(Vec2::ZERO, 0.0),
        Vec2::new(psi0.cos(), psi0.sin()),
    )
}

#[test]
fn clamped_turning_formulas_match_the_simulated_integral() {
    // Past the sideways boundary the direction-constrained robots first
    // turn in place, which clamps the oscillatory part of the closed form.
    let cases = [
        (SteeringMode::Forward, 2.5, 1.0, 2.0),
        (SteeringMode::Forward, -2.0, 1.0, 1.0),
        (SteeringMode::Forward, 0.9, 1.0, 2.0),
        (SteeringMode::Backward, 0.8, 1.0, 2.0), // goal ahead of a reverse-only robot
        (SteeringMode::Backward, PI - 0.3, 1.0, 2.0),
    ];
    for (mode, psi0, kv, kw) in cases {
        let (state, goal) = scene(psi0);
        let g = gains(kv, kw);
        let closed = total_turning(&state, goal, &g, mode);
        let traj = simulate_to_goal(&state, goal, &g, mode, &oracle_settings()).unwrap();
        assert!(traj.converged, "{mode:?} psi0={psi0}");
        let (signed, _) = integrated_turning(&traj).unwrap();
        assert!(
            (signed - closed).abs() < 2e-3,
            "{mode:?} psi0={psi0}: integral {signed} vs closed {closed}"
        );
        // Terminal orientation agrees with the closed form as well.
        let predicted = final_orientation(&state, goal, &g, mode).radians();
        let got = traj.terminal().state.orientation.radians();
        let diff = (got - predicted + PI).rem_euclid(2.0 * PI) - PI;
        assert!(
            diff.abs() < 1e-4,
            "{mode:?} psi0={psi0}: orientation off by {diff}"
        );
    }
}

#[test]
fn directional_trajectories_stay_inside_their_prediction_sets() {
    let settings = IntegratorSettings {
        rel_tol: 1e-9,
        abs_tol: 1e-12,
        ..IntegratorSettings::default()
    };
    let cases = [
        (SteeringMode::Forward, Vec2::new(-1.2, 0.4)), // goal behind
        (SteeringMode::Forward, Vec2::new(1.5, 0.8)),  // goal ahead
        (SteeringMode::Backward, Vec2::new(1.0, -0.6)), // goal ahead of a reverse robot
        (SteeringMode::Backward, Vec2::new(-1.4, 0.2)),
    ];
    for (mode, goal) in cases {
        let state = UnicycleState::new(Vec2::ZERO, 0.0);
        let g = gains(1.0, 2.0);
        let traj = simulate_to_goal(&state, goal, &g, mode, &settings).unwrap();
        assert!(traj.converged);
        for method in [
            PredictionMethod::Ball,
            PredictionMethod::Cone,
            PredictionMethod::Diamond,
        ] {
            let m = predict(&state, goal, &g, method, mode, &settings).unwrap();
            for sample in &traj.samples {
                let d = m.distance_to_point(sample.state.position);
                assert!(
                    d <= 1e-6,
                    "{mode:?} {method:?} goal {goal:?}: violated by {d:.2e} at t={}",
                    sample.t
                );
            }
        }
    }
}

#[test]
fn intersection_point_agrees_with_direct_line_algebra() {
    // Independent route: intersect the heading line with the final heading
    // line using the normal-projection formula instead of the sine ratio.
    let mut seed = 0x1234u64;
    let mut next = || {
        seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (seed >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..200 {
        let state = UnicycleState::new(
            Vec2::new(next() * 4.0 - 2.0, next() * 4.0 - 2.0),
            next() * 2.0 * PI - PI,
        );
        let goal = Vec2::new(next() * 4.0 - 2.0, next() * 4.0 - 2.0);
        let kv = 0.4 + next();
        let g = gains(kv, kv * (1.0 + 2.0 * next()));
        let psi = unicycle_motion::unicycle::heading_error(&state, goal);
        if psi.abs() < 1e-6 || goal.distance(state.position) < 0.1 {
            continue;
        }
        let (xs, _) = heading_line_intersection(&state, goal, &g).unwrap();

        let theta_star = final_orientation(&state, goal, &g, SteeringMode::Bidirectional);
        let o = state.orientation.heading_vector();
        let n_star = theta_star.normal_vector();
        let d = goal - state.position;
        let denom = n_star.dot(o);
        if denom.abs() < 1e-9 {
            continue;
        }
        let alt = state.position + o * (n_star.dot(d) / denom);
        assert!(
            xs.distance(alt) <= 1e-9 * (1.0 + xs.norm()),
            "sine-ratio {xs:?} vs projection {alt:?}"
        );

        // Triangle ratios: the sides opposite the final heading error, the
        // initial heading error, and the total turning are proportional to
        // their sines.
        let theta = total_turning(&state, goal, &g, SteeringMode::Bidirectional);
        let psi_final = psi - theta;
        let r1 = xs.distance(state.position) / psi_final.sin().abs();
        let r2 = xs.distance(goal) / psi.sin().abs();
        let r3 = d.norm() / theta.sin().abs();
        assert!((r1 - r3).abs() <= 1e-6 * r3, "{r1} vs {r3}");
        assert!((r2 - r3).abs() <= 1e-6 * r3, "{r2} vs {r3}");
    }
}

#[test]
fn diamond_tightens_as_the_angular_gain_grows() {
    // A faster angular loop leaves less residual turning, pulling the
    // intersection point toward the robot and nesting the diamonds.
    let (state, goal) = scene(0.9);
    let settings = IntegratorSettings::default();
    let mut prev_spread = f64::INFINITY;
    let mut prev_diamond = None;
    for kw in [1.0, 2.0, 3.0] {
        let g = gains(1.0, kw);
        let (xs, _) = heading_line_intersection(&state, goal, &g).unwrap();
        let spread = xs.distance(state.position);
        assert!(
            spread < prev_spread,
            "kw={kw}: {spread} not below {prev_spread}"
        );
        prev_spread = spread;

        let diamond = predict(
            &state,
            goal,
            &g,
            PredictionMethod::Diamond,
            SteeringMode::Bidirectional,
            &settings,
        )
        .unwrap();
        if let Some(outer) = prev_diamond {
            let outer: unicycle_motion::predict::MotionPrediction = outer;
            assert!(
                outer.body.contains_set(&diamond.body, 1e-9),
                "kw={kw}: diamond not nested in the lower-gain diamond"
            );
        }
        prev_diamond = Some(diamond);
    }
}

#[test]
fn reflection_identity_of_the_characteristic_points() {
    // Both heading-line intersection points and projected goals are mirror
    // images across the line through the position and the goal.
    let reflect = |p: Vec2, a: Vec2, b: Vec2| {
        let u = b - a;
        let u = u * (1.0 / u.norm());
        let w = p - a;
        a + u * (2.0 * w.dot(u)) - w
    };
    let mut seed = 0x777u64;
    let mut next = || {
        seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (seed >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..100 {
        let state = UnicycleState::new(
            Vec2::new(next() * 2.0, next() * 2.0),
            next() * 2.0 * PI - PI,
        );
        let goal = state.position + rotate(next() * 2.0 * PI, Vec2::new(1.0, 0.0)) * (0.5 + next());
        let g = gains(1.0, 2.0);
        let (xs, xsr) = heading_line_intersection(&state, goal, &g).unwrap();
        assert!(xsr.distance(reflect(xs, state.position, goal)) < 1e-9);
        let (p, pr) = unicycle_motion::predict::projected_goal(&state, goal);
        assert!(pr.distance(reflect(p, state.position, goal)) < 1e-9);
    }
}

#[test]
fn spiral_turning_exceeds_every_bounded_gain_case() {
    let (state, goal) = scene(FRAC_PI_2);
    let spiral = total_turning(&state, goal, &gains(4.0, 1.0), SteeringMode::Bidirectional);
    assert!(spiral > PI);
    for (kv, kw) in [(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)] {
        let bounded = total_turning(&state, goal, &gains(kv, kw), SteeringMode::Bidirectional);
        assert!(bounded.abs() <= PI + 1e-12);
        assert!(bounded.abs() < spiral);
    }
}
