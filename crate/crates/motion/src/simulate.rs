//! Adaptive Runge-Kutta integration of the closed-loop unicycle and
//! trajectory recording.

use thiserror::Error;

use crate::geom::Vec2;
use crate::unicycle::{
    control, heading_error_for, state_derivative, ControlGains, ControlInput, SteeringMode,
    UnicycleState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("integrator tolerances must be positive")]
    InvalidSettings,
    #[error("step size underflow at t = {t}; dynamics too stiff for the requested tolerances")]
    StepUnderflow { t: f64 },
    #[error("trajectory did not converge within max_time")]
    Unconverged,
}

/// Settings for the embedded Runge-Kutta 5(4) integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step size; also bounds the sample spacing.
    pub max_step: f64,
    /// Simulated-time horizon; reaching it without satisfying the stop
    /// condition flags the run as truncated.
    pub max_time: f64,
    /// Goal-distance threshold declaring convergence. `None` selects
    /// `1e-4 * max(1, initial distance)`.
    pub goal_eps: Option<f64>,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            max_step: f64::INFINITY,
            max_time: 100.0,
            goal_eps: None,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.max_step > 0.0
            && self.max_time > 0.0
            && self.goal_eps.is_none_or(|e| e > 0.0)
        {
            Ok(())
        } else {
            Err(SimError::InvalidSettings)
        }
    }

    pub fn resolve_goal_eps(&self, initial_distance: f64) -> f64 {
        self.goal_eps
            .unwrap_or_else(|| 1e-4 * initial_distance.max(1.0))
    }
}

/// Dense output of [`integrate`]: one row per accepted step.
#[derive(Debug, Clone)]
pub struct IntegrationRun<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    /// True when `max_time` was hit before the stop condition fired.
    pub truncated: bool,
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate an autonomous system with embedded 5(4) error control,
/// recording every accepted step. `stop` is evaluated at accepted steps
/// (including the initial state) and ends the run when it returns true.
pub fn integrate<const N: usize>(
    mut dynamics: impl FnMut(&[f64; N]) -> [f64; N],
    initial: [f64; N],
    settings: &IntegratorSettings,
    mut stop: impl FnMut(f64, &[f64; N]) -> bool,
) -> Result<IntegrationRun<N>, SimError> {
    settings.validate()?;

    let mut t = 0.0;
    let mut y = initial;
    let mut times = vec![0.0];
    let mut states = vec![y];
    if stop(t, &y) {
        return Ok(IntegrationRun {
            times,
            states,
            truncated: false,
        });
    }

    let f0 = dynamics(&y);
    let f0_norm = f0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut h = (0.1 / (1.0 + f0_norm))
        .min(settings.max_step)
        .min(settings.max_time);

    let mut truncated = true;
    while t < settings.max_time {
        h = h.min(settings.max_time - t).min(settings.max_step);
        if h < 1e-14 * (1.0 + t.abs()) {
            return Err(SimError::StepUnderflow { t });
        }

        let mut k = [[0.0; N]; 7];
        k[0] = dynamics(&y);
        for stage in 0..6 {
            let mut arg = y;
            for (j, kj) in k.iter().enumerate().take(stage + 1) {
                let a = A[stage][j];
                if a != 0.0 {
                    for i in 0..N {
                        arg[i] += h * a * kj[i];
                    }
                }
            }
            k[stage + 1] = dynamics(&arg);
        }

        let mut y5 = y;
        let mut err_vec = [0.0; N];
        for (j, kj) in k.iter().enumerate() {
            for i in 0..N {
                y5[i] += h * B5[j] * kj[i];
                err_vec[i] += h * (B5[j] - B4[j]) * kj[i];
            }
        }

        let mut err = 0.0;
        for i in 0..N {
            let scale = settings.abs_tol + settings.rel_tol * y[i].abs().max(y5[i].abs());
            let e = err_vec[i] / scale;
            err += e * e;
        }
        err = (err / N as f64).sqrt();

        if err.is_finite() && err <= 1.0 {
            t += h;
            y = y5;
            times.push(t);
            states.push(y);
            if stop(t, &y) {
                truncated = false;
                break;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 1.0)
            } else {
                0.1
            };
            h *= factor;
        }
    }

    Ok(IntegrationRun {
        times,
        states,
        truncated,
    })
}

/// One recorded point of a closed-loop run toward a fixed goal.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: UnicycleState,
    pub input: ControlInput,
    /// Heading error of the active steering mode.
    pub heading_error: f64,
    pub goal_distance: f64,
    /// `psi^2 + |g - x|^2`, the decrease certificate of the closed loop.
    pub lyapunov: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub goal: Vec2,
    pub mode: SteeringMode,
    pub samples: Vec<TrajectorySample>,
    pub converged: bool,
}

impl Trajectory {
    pub fn terminal(&self) -> &TrajectorySample {
        self.samples
            .last()
            .expect("trajectory has at least the initial sample")
    }

    pub fn duration(&self) -> f64 {
        self.terminal().t
    }
}

/// Simulate the closed-loop unicycle toward `goal` until the goal-distance
/// threshold or `max_time` is reached.
pub fn simulate_to_goal(
    initial: &UnicycleState,
    goal: Vec2,
    gains: &ControlGains,
    mode: SteeringMode,
    settings: &IntegratorSettings,
) -> Result<Trajectory, SimError> {
    let eps = settings.resolve_goal_eps(initial.position.distance(goal));
    let dynamics = |y: &[f64; 3]| -> [f64; 3] {
        let state = UnicycleState::new(Vec2::new(y[0], y[1]), y[2]);
        let input = control(mode, &state, goal, gains);
        let (dx, dth) = state_derivative(&state, &input);
        [dx.x, dx.y, dth]
    };
    let run = integrate(
        dynamics,
        [
            initial.position.x,
            initial.position.y,
            initial.orientation.radians(),
        ],
        settings,
        |_, y| Vec2::new(y[0], y[1]).distance(goal) < eps,
    )?;

    let samples = run
        .times
        .iter()
        .zip(&run.states)
        .map(|(&t, y)| {
            let state = UnicycleState::new(Vec2::new(y[0], y[1]), y[2]);
            let input = control(mode, &state, goal, gains);
            let psi = heading_error_for(mode, &state, goal);
            let dist = state.position.distance(goal);
            TrajectorySample {
                t,
                state,
                input,
                heading_error: psi,
                goal_distance: dist,
                lyapunov: psi * psi + dist * dist,
            }
        })
        .collect();

    Ok(Trajectory {
        goal,
        mode,
        samples,
        converged: !run.truncated,
    })
}

/// Trapezoidal `(integral of w dt, integral of |w| dt)` over the recorded
/// samples; the independent check of the closed-form total turning.
/// Requires a converged trajectory.
pub fn integrated_turning(traj: &Trajectory) -> Result<(f64, f64), SimError> {
    if !traj.converged {
        return Err(SimError::Unconverged);
    }
    let mut signed = 0.0;
    let mut absolute = 0.0;
    for pair in traj.samples.windows(2) {
        let dt = pair[1].t - pair[0].t;
        signed += 0.5 * dt * (pair[0].input.w + pair[1].input.w);
        absolute += 0.5 * dt * (pair[0].input.w.abs() + pair[1].input.w.abs());
    }
    Ok((signed, absolute))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::turning::{final_orientation, total_turning};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn gains(kv: f64, kw: f64) -> ControlGains {
        ControlGains::new(kv, kw).unwrap()
    }

    fn tight() -> IntegratorSettings {
        IntegratorSettings {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_step: 0.01,
            max_time: 40.0,
            goal_eps: Some(1e-8),
        }
    }

    #[test]
    fn scalar_exponential_decay() {
        let settings = IntegratorSettings {
            max_time: 1.0,
            ..Default::default()
        };
        let run = integrate(|y: &[f64; 1]| [-y[0]], [1.0], &settings, |_, _| false).unwrap();
        assert!(run.truncated);
        let last = run.states.last().unwrap()[0];
        assert_relative_eq!(*run.times.last().unwrap(), 1.0, epsilon = 1e-12);
        assert!((last - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn zero_dynamics_stay_constant() {
        let settings = IntegratorSettings {
            max_time: 5.0,
            ..Default::default()
        };
        let run = integrate(
            |_: &[f64; 2]| [0.0, 0.0],
            [1.5, -2.0],
            &settings,
            |_, _| false,
        )
        .unwrap();
        for s in &run.states {
            assert_eq!(*s, [1.5, -2.0]);
        }
    }

    #[test]
    fn harmonic_oscillator_energy_drift() {
        let settings = IntegratorSettings {
            max_time: 20.0 * PI,
            ..Default::default()
        };
        let run = integrate(
            |y: &[f64; 2]| [y[1], -y[0]],
            [1.0, 0.0],
            &settings,
            |_, _| false,
        )
        .unwrap();
        for s in &run.states {
            let energy = 0.5 * (s[0] * s[0] + s[1] * s[1]);
            assert!((energy - 0.5).abs() < 1e-5, "energy drifted to {energy}");
        }
        // Closed-form solution at the final time.
        let t = *run.times.last().unwrap();
        let y = run.states.last().unwrap();
        assert!((y[0] - t.cos()).abs() < 1e-5);
    }

    #[test]
    fn non_finite_dynamics_underflow_the_step() {
        let settings = IntegratorSettings {
            max_time: 1.0,
            ..Default::default()
        };
        let res = integrate(|_: &[f64; 1]| [f64::NAN], [1.0], &settings, |_, _| false);
        assert!(matches!(res, Err(SimError::StepUnderflow { .. })));
    }

    #[test]
    fn starting_at_the_goal_yields_a_single_sample() {
        let s = UnicycleState::new(Vec2::new(1.0, 2.0), 0.3);
        let traj = simulate_to_goal(
            &s,
            Vec2::new(1.0, 2.0),
            &gains(1.0, 2.0),
            SteeringMode::Bidirectional,
            &IntegratorSettings::default(),
        )
        .unwrap();
        assert_eq!(traj.samples.len(), 1);
        assert!(traj.converged);
    }

    #[test]
    fn terminal_orientation_matches_the_closed_form() {
        let s = UnicycleState::new(Vec2::ZERO, 0.0);
        let goal = Vec2::new(1.0, 1.0);
        let g = gains(1.0, 2.0);
        let traj = simulate_to_goal(&s, goal, &g, SteeringMode::Bidirectional, &tight()).unwrap();
        assert!(traj.converged);
        let predicted = final_orientation(&s, goal, &g, SteeringMode::Bidirectional);
        let got = traj.terminal().state.orientation.radians();
        assert!((got - predicted.radians()).abs() < 1e-4);
        assert_relative_eq!(got, 1.1280887054360704, epsilon = 1e-6);
    }

    #[test]
    fn heading_error_decays_exponentially() {
        // psi(t) = psi0 e^{-kw t} along the closed loop.
        for (kv, kw, psi0) in [(1.0, 2.0, FRAC_PI_4), (1.0, 1.0, 1.2), (0.5, 3.0, -0.8)] {
            let s = UnicycleState::new(Vec2::ZERO, 0.0);
            let goal = Vec2::new(psi0.cos(), psi0.sin()) * 2.0;
            let settings = IntegratorSettings {
                goal_eps: Some(1e-3),
                ..tight()
            };
            let traj = simulate_to_goal(
                &s,
                goal,
                &gains(kv, kw),
                SteeringMode::Bidirectional,
                &settings,
            )
            .unwrap();
            for sample in &traj.samples {
                let reference = psi0 * (-kw * sample.t).exp();
                assert!(
                    (sample.heading_error - reference).abs() <= 1e-6 * psi0.abs(),
                    "kv={kv} kw={kw} t={} err={}",
                    sample.t,
                    sample.heading_error - reference
                );
            }
        }
    }

    #[test]
    fn goal_distance_and_lyapunov_never_increase() {
        let s = UnicycleState::new(Vec2::ZERO, 1.9);
        let goal = Vec2::new(-1.0, 2.0);
        let traj = simulate_to_goal(
            &s,
            goal,
            &gains(1.0, 2.0),
            SteeringMode::Bidirectional,
            &IntegratorSettings::default(),
        )
        .unwrap();
        for pair in traj.samples.windows(2) {
            assert!(pair[1].goal_distance <= pair[0].goal_distance + 1e-9);
            assert!(pair[1].lyapunov <= pair[0].lyapunov + 1e-9);
        }
    }

    #[test]
    fn distance_shrinks_at_the_rate_of_the_aligned_speed() {
        // d/dt |g-x|^2 = -2 kv (o.(g-x))^2, checked by finite differences.
        let s = UnicycleState::new(Vec2::ZERO, 0.7);
        let goal = Vec2::new(2.0, -1.0);
        let settings = IntegratorSettings {
            max_step: 1e-3,
            ..tight()
        };
        let traj = simulate_to_goal(
            &s,
            goal,
            &gains(1.3, 2.0),
            SteeringMode::Bidirectional,
            &settings,
        )
        .unwrap();
        for pair in traj.samples.windows(2).take(2000) {
            let (a, b) = (&pair[0], &pair[1]);
            let dt = b.t - a.t;
            let lhs = (b.goal_distance.powi(2) - a.goal_distance.powi(2)) / dt;
            let o = a.state.orientation.heading_vector();
            let rhs = -2.0 * 1.3 * o.dot(goal - a.state.position).powi(2);
            assert!(
                (lhs - rhs).abs() < 1e-2 * (1.0 + rhs.abs()),
                "lhs={lhs} rhs={rhs}"
            );
        }
    }

    #[test]
    fn heading_error_rate_is_linear() {
        // (psi(t+h) - psi(t))/h ~ -kw psi(t).
        let s = UnicycleState::new(Vec2::ZERO, 0.0);
        let goal = Vec2::new(1.0, 1.0);
        let settings = IntegratorSettings {
            max_step: 1e-3,
            ..tight()
        };
        let traj = simulate_to_goal(
            &s,
            goal,
            &gains(1.0, 2.0),
            SteeringMode::Bidirectional,
            &settings,
        )
        .unwrap();
        for pair in traj.samples.windows(2).take(3000) {
            let (a, b) = (&pair[0], &pair[1]);
            let rate = (b.heading_error - a.heading_error) / (b.t - a.t);
            let expected = -2.0 * a.heading_error;
            assert!((rate - expected).abs() < 1e-2 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn integrated_turning_matches_closed_form() {
        let s = UnicycleState::new(Vec2::ZERO, 0.0);
        let g = gains(1.0, 2.0);
        let goal = Vec2::new(FRAC_PI_4.cos(), FRAC_PI_4.sin());
        let traj = simulate_to_goal(&s, goal, &g, SteeringMode::Bidirectional, &tight()).unwrap();
        let (signed, absolute) = integrated_turning(&traj).unwrap();
        let closed = total_turning(&s, goal, &g, SteeringMode::Bidirectional);
        assert!(
            (signed - closed).abs() < 1e-3,
            "signed={signed} closed={closed}"
        );
        // Monotone-sign angular velocity: same magnitude signed or not.
        assert!((absolute - signed.abs()).abs() < 1e-6);
        assert_relative_eq!(closed, 1.1280887054360704, epsilon = 1e-12);

        // Aligned start turns not at all.
        let straight = simulate_to_goal(
            &s,
            Vec2::new(2.0, 0.0),
            &g,
            SteeringMode::Bidirectional,
            &tight(),
        )
        .unwrap();
        let (signed0, _) = integrated_turning(&straight).unwrap();
        assert!(signed0.abs() < 1e-9);
    }

    #[test]
    fn spiral_regime_crosses_the_goal_line() {
        // kv > kw: the trajectory circulates, crossing the line through the
        // start and the goal.
        let s = UnicycleState::new(Vec2::ZERO, 0.0);
        let goal = Vec2::new(0.0, 1.0); // psi0 = pi/2
                                        // Position converges much faster than heading when kv > kw, so the
                                        // goal threshold must be tiny for the turning integral to capture
                                        // the in-place tail.
        let settings = IntegratorSettings {
            goal_eps: Some(4e-12),
            ..tight()
        };
        let traj = simulate_to_goal(
            &s,
            goal,
            &gains(4.0, 1.0),
            SteeringMode::Bidirectional,
            &settings,
        )
        .unwrap();
        let mut crossings = 0;
        let mut prev_sign = 0.0;
        for sample in &traj.samples {
            let offset = goal.cross(sample.state.position);
            if offset.abs() > 1e-9 {
                let sign = offset.signum();
                if prev_sign != 0.0 && sign != prev_sign {
                    crossings += 1;
                }
                prev_sign = sign;
            }
        }
        assert!(crossings >= 1, "no goal-line crossing in the spiral regime");

        let (signed, _) = integrated_turning(&traj).unwrap();
        let closed = FRAC_PI_2 + 2.0 * crate::turning::sine_integral(PI).unwrap();
        assert!(
            (signed - closed).abs() < 1e-2,
            "signed={signed} closed={closed}"
        );
        assert!(signed.abs() > PI);
    }

    #[test]
    fn truncation_is_flagged_and_blocks_the_turning_integral() {
        let s = UnicycleState::new(Vec2::ZERO, 0.0);
        let settings = IntegratorSettings {
            max_time: 0.05,
            ..Default::default()
        };
        let traj = simulate_to_goal(
            &s,
            Vec2::new(5.0, 5.0),
            &gains(1.0, 2.0),
            SteeringMode::Bidirectional,
            &settings,
        )
        .unwrap();
        assert!(!traj.converged);
        assert_eq!(integrated_turning(&traj), Err(SimError::Unconverged));
    }

    #[test]
    fn tightening_tolerances_converges_the_terminal_state() {
        let s = UnicycleState::new(Vec2::ZERO, 1.0);
        let goal = Vec2::new(2.0, 0.5);
        let g = gains(1.0, 2.0);
        let run = |rel: f64, abs: f64| {
            let settings = IntegratorSettings {
                rel_tol: rel,
                abs_tol: abs,
                goal_eps: Some(1e-6),
                ..Default::default()
            };
            simulate_to_goal(&s, goal, &g, SteeringMode::Bidirectional, &settings)
                .unwrap()
                .terminal()
                .state
                .position
        };
        let coarse = run(1e-6, 1e-9);
        let fine = run(5e-7, 5e-10);
        assert!(coarse.distance(fine) < 10.0 * 1e-6);
    }

    #[test]
    fn directional_simulation_reaches_a_goal_behind() {
        // Forward-only robot with the goal behind: turn in place, then drive.
        let s = UnicycleState::new(Vec2::ZERO, 0.0);
        let goal = Vec2::new(-2.0, 0.3);
        let traj = simulate_to_goal(
            &s,
            goal,
            &gains(1.0, 2.0),
            SteeringMode::Forward,
            &IntegratorSettings::default(),
        )
        .unwrap();
        assert!(traj.converged);
        // Linear velocity never negative under the forward controller.
        for sample in &traj.samples {
            assert!(sample.input.v >= 0.0);
        }
    }
}
