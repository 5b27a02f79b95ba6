//! Total turning effort of the closed-loop unicycle, final orientation, the
//! sine integral it depends on, and a sum-of-sinusoids approximation of the
//! sine integral fitted by nonlinear least squares.

use std::f64::consts::PI;

use thiserror::Error;

use crate::geom::{Angle, Vec2};
use crate::unicycle::{
    heading_error, heading_error_for, ControlGains, SteeringMode, UnicycleState,
};

/// Largest |x| accepted by [`sine_integral`]; generous for every argument
/// the turning formulas can produce (their arguments stay in `[-pi, pi]`).
pub const SI_DOMAIN: f64 = 4.0 * PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TurningError {
    #[error("sine integral argument {0} outside the supported domain |x| <= 4*pi")]
    SiDomain(f64),
    #[error("heading error {0} outside [-pi/2, pi/2]")]
    HeadingErrorRange(f64),
}

/// Sine integral `Si(x) = integral of sin(t)/t from 0 to x`.
///
/// Maclaurin series with term recurrence and compensated summation;
/// absolute error below 1e-12 on the supported domain.
pub fn sine_integral(x: f64) -> Result<f64, TurningError> {
    if !x.is_finite() || x.abs() > SI_DOMAIN {
        return Err(TurningError::SiDomain(x));
    }
    Ok(si_series(x))
}

fn si_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = 0.0;
    let mut carry = 0.0;
    let mut k = 0u32;
    while term.abs() >= 1e-16 {
        // Kahan step keeps the cancellation of large alternating terms from
        // accumulating.
        let y = term - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;

        k += 1;
        let odd = 2.0 * k as f64 + 1.0;
        term *= -x2 * (odd - 2.0) / (odd * odd * (odd - 1.0));
        if k > 200 {
            break;
        }
    }
    sum
}

/// Si argument used by the direction-constrained controllers: clamped to
/// `[-pi, pi]` because the heading error saturates at `±pi/2` while the
/// robot turns in place.
fn clamped_si_arg(psi: f64) -> f64 {
    (2.0 * psi).clamp(-PI, PI)
}

/// Signed total turning effort: the infinite-horizon integral of the angular
/// velocity along the closed loop, in closed form
/// `psi0 + kv/(2 kw) * Si(2 psi0)` (with the Si argument clamped for the
/// direction-constrained modes).
pub fn total_turning(
    state: &UnicycleState,
    goal: Vec2,
    gains: &ControlGains,
    mode: SteeringMode,
) -> f64 {
    let psi0 = heading_error_for(mode, state, goal);
    let arg = match mode {
        SteeringMode::Bidirectional => 2.0 * psi0,
        SteeringMode::Forward | SteeringMode::Backward => clamped_si_arg(psi0),
    };
    psi0 + gains.kv() / (2.0 * gains.kw()) * si_series(arg)
}

/// Orientation the robot converges to: `wrap(theta0 + total_turning)`.
pub fn final_orientation(
    state: &UnicycleState,
    goal: Vec2,
    gains: &ControlGains,
    mode: SteeringMode,
) -> Angle {
    Angle::new(state.orientation.radians() + total_turning(state, goal, gains, mode))
}

/// Total turning, final orientation, and the heading error left at the final
/// orientation, all from the current state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurningReport {
    pub theta_total: f64,
    pub final_orientation: Angle,
    pub final_heading_error: f64,
}

pub fn turning_report(
    state: &UnicycleState,
    goal: Vec2,
    gains: &ControlGains,
    mode: SteeringMode,
) -> TurningReport {
    let theta_total = total_turning(state, goal, gains, mode);
    let final_orientation = Angle::new(state.orientation.radians() + theta_total);
    let final_state = UnicycleState {
        position: state.position,
        orientation: final_orientation,
    };
    TurningReport {
        theta_total,
        final_orientation,
        final_heading_error: heading_error(&final_state, goal),
    }
}

/// Lower and upper bounds `(|psi0|, (1 + kv/kw) |psi0|)` on the magnitude of
/// the total turning effort. Requires `|psi0| <= pi/2`.
pub fn turning_bounds(psi0: f64, gains: &ControlGains) -> Result<(f64, f64), TurningError> {
    if psi0.is_nan() || psi0.abs() > PI / 2.0 {
        return Err(TurningError::HeadingErrorRange(psi0));
    }
    Ok((psi0.abs(), (1.0 + gains.kv() / gains.kw()) * psi0.abs()))
}

/// A fitted approximation `Si(x) ~ sum a_k sin(w_k x)` over `[-pi, pi]`.
///
/// Weights are sign-normalized positive (the sign flips onto the frequency)
/// and pairs are sorted by ascending frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SiFit {
    pub weights: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub rmse: f64,
}

impl SiFit {
    pub fn order(&self) -> usize {
        self.weights.len()
    }

    /// Evaluate the fitted sinusoid sum.
    pub fn eval(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.frequencies)
            .map(|(a, w)| a * (w * x).sin())
            .sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("fit order must be 1, 2, or 3, got {0}")]
    InvalidOrder(usize),
    #[error("grid of {0} points cannot determine {1} parameters")]
    GridTooSmall(usize, usize),
    #[error("initial weights/frequencies must both have length {0}")]
    BadInit(usize),
    #[error("no convergence after {iterations} iterations; best RMSE {}", best.rmse)]
    DidNotConverge { iterations: usize, best: SiFit },
}

/// Default starting points for each order, chosen inside the basin of the
/// reference parameters.
fn default_init(order: usize) -> (Vec<f64>, Vec<f64>) {
    match order {
        1 => (vec![1.839], vec![0.535]),
        2 => (vec![1.931, 0.424], vec![0.330, 0.854]),
        _ => (vec![1.964, 0.553, 0.189], vec![0.235, 0.656, 0.931]),
    }
}

/// Fit `order` sinusoids to the sine integral on a uniform grid of
/// `grid_size` points spanning `[-pi, pi]`, by Levenberg-Marquardt with an
/// analytic Jacobian. Deterministic for a given initialization.
pub fn fit_si_sinusoids(
    order: usize,
    grid_size: usize,
    init: Option<(&[f64], &[f64])>,
) -> Result<SiFit, FitError> {
    if !(1..=3).contains(&order) {
        return Err(FitError::InvalidOrder(order));
    }
    if grid_size < 2 * order + 1 {
        return Err(FitError::GridTooSmall(grid_size, 2 * order));
    }
    let (a0, w0) = match init {
        Some((a, w)) => {
            if a.len() != order || w.len() != order {
                return Err(FitError::BadInit(order));
            }
            (a.to_vec(), w.to_vec())
        }
        None => default_init(order),
    };
    let (xs, target) = si_grid(grid_size);
    let (params, rmse, converged, iterations) = levenberg_marquardt(&xs, &target, &a0, &w0);
    let fit = canonicalize(params, order, rmse);
    if converged {
        Ok(fit)
    } else {
        Err(FitError::DidNotConverge {
            iterations,
            best: fit,
        })
    }
}

/// Multi-start variant: `starts` random initializations drawn from a seeded
/// generator, plus the default start; the best converged fit wins.
pub fn fit_si_multistart(
    order: usize,
    grid_size: usize,
    starts: usize,
    seed: u64,
) -> Result<SiFit, FitError> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut best = fit_si_sinusoids(order, grid_size, None);
    for _ in 0..starts {
        let a: Vec<f64> = (0..order).map(|_| rng.gen_range(0.1..2.5)).collect();
        let w: Vec<f64> = (0..order).map(|_| rng.gen_range(0.05..1.5)).collect();
        let candidate = fit_si_sinusoids(order, grid_size, Some((&a, &w)));
        best = match (best, candidate) {
            (Ok(b), Ok(c)) => Ok(if c.rmse < b.rmse { c } else { b }),
            (Err(_), Ok(c)) => Ok(c),
            (b, Err(_)) => b,
        };
    }
    best
}

fn si_grid(grid_size: usize) -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = (0..grid_size)
        .map(|i| -PI + 2.0 * PI * i as f64 / (grid_size - 1) as f64)
        .collect();
    let target: Vec<f64> = xs.iter().map(|&x| si_series(x)).collect();
    (xs, target)
}

fn canonicalize(params: Vec<f64>, order: usize, rmse: f64) -> SiFit {
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|k| {
            let (a, w) = (params[k], params[order + k]);
            // sin is odd: (a, w) and (-a, -w) are the same term.
            if a < 0.0 {
                (-a, -w)
            } else {
                (a, w)
            }
        })
        .collect();
    pairs.sort_by(|p, q| p.1.partial_cmp(&q.1).unwrap());
    SiFit {
        weights: pairs.iter().map(|p| p.0).collect(),
        frequencies: pairs.iter().map(|p| p.1).collect(),
        rmse,
    }
}

fn residuals(xs: &[f64], target: &[f64], p: &[f64], order: usize, out: &mut [f64]) {
    for (i, (&x, &t)) in xs.iter().zip(target).enumerate() {
        let mut model = 0.0;
        for k in 0..order {
            model += p[k] * (p[order + k] * x).sin();
        }
        out[i] = model - t;
    }
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn levenberg_marquardt(
    xs: &[f64],
    target: &[f64],
    a0: &[f64],
    w0: &[f64],
) -> (Vec<f64>, f64, bool, usize) {
    const MAX_ITER: usize = 200;
    let order = a0.len();
    let np = 2 * order;
    let m = xs.len();

    let mut p: Vec<f64> = a0.iter().chain(w0.iter()).copied().collect();
    let mut r = vec![0.0; m];
    residuals(xs, target, &p, order, &mut r);
    let mut cost = cost_of(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    let mut jac = vec![0.0; m * np];
    for iter in 0..MAX_ITER {
        iterations = iter + 1;
        for (i, &x) in xs.iter().enumerate() {
            for k in 0..order {
                let (s, c) = (p[order + k] * x).sin_cos();
                jac[i * np + k] = s;
                jac[i * np + order + k] = p[k] * x * c;
            }
        }
        // Normal equations J^T J and gradient J^T r.
        let mut h = vec![0.0; np * np];
        let mut g = vec![0.0; np];
        for i in 0..m {
            let row = &jac[i * np..(i + 1) * np];
            for a in 0..np {
                g[a] += row[a] * r[i];
                for b in a..np {
                    h[a * np + b] += row[a] * row[b];
                }
            }
        }
        for a in 0..np {
            for b in 0..a {
                h[a * np + b] = h[b * np + a];
            }
        }
        if g.iter().all(|v| v.abs() < 1e-14) {
            converged = true;
            break;
        }

        let mut accepted = false;
        for _ in 0..30 {
            // Marquardt damping on the diagonal.
            let mut a_mat = h.clone();
            for d in 0..np {
                a_mat[d * np + d] += lambda * h[d * np + d].max(1e-12);
            }
            let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            let Some(delta) = solve_linear(a_mat, rhs, np) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&delta).map(|(pi, di)| pi + di).collect();
            let mut r_trial = vec![0.0; m];
            residuals(xs, target, &trial, order, &mut r_trial);
            let trial_cost = cost_of(&r_trial);
            if trial_cost <= cost {
                let step = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
                let improvement = cost - trial_cost;
                p = trial;
                r = r_trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-14);
                accepted = true;
                if step < 1e-13 || improvement < 1e-18 * (1.0 + cost) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // Damping maxed out without progress: local minimum to working
            // precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    let rmse = (cost / m as f64).sqrt();
    (p, rmse, converged, iterations)
}

/// Gaussian elimination with partial pivoting for the (at most 6x6) normal
/// equations.
fn solve_linear(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let inv = 1.0 / a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col * n + k] * x[k];
        }
        x[col] = s / a[col * n + col];
    }
    Some(x)
}
