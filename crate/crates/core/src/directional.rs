//! Mirror Triangles Method with a random directional-derivative oracle on
//! `R^n` under `||x||_L^2 = L sum x_i^2`, including the coordinate scheme and
//! the zeroth-order finite-difference scheme.
//!
//! Schedule: `alpha_0 = A_0 = 1 - 1/n`, `alpha_{k+1} = (k + 2n) / (2 n^2)`.
//! Step:
//!
//! ```text
//! y_{k+1} = (alpha_{k+1} u_k + A_k x_k) / A_{k+1}
//! u_{k+1} = u_k - (alpha_{k+1} / L) g~(y_{k+1})
//! x_{k+1} = y_{k+1} + n (alpha_{k+1} / A_{k+1}) (u_{k+1} - u_k)
//! ```

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::composite::Composite;
use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::linalg::{combine, norm2};
use crate::oracle::{directional_eval, finite_diff_eval, finite_diff_step, DirectionScheme};
use crate::problems::Problem;
use crate::prox::ProxSetup;
use crate::trace::{Record, Status, Trace};

/// Closed-form `(alpha_k, A_k)` of the directional schedule.
pub fn directional_schedule(n: usize, k: usize) -> (f64, f64) {
    let nf = n as f64;
    if k == 0 {
        let a0 = 1.0 - 1.0 / nf;
        return (a0, a0);
    }
    let kf = k as f64;
    let t = kf - 1.0 + 2.0 * nf;
    (t / (2.0 * nf * nf), (t * t + kf - 1.0) / (4.0 * nf * nf))
}

/// Schedule table for `k = 0..=steps`.
#[derive(Debug, Clone)]
pub struct DirectionalSchedule {
    n: usize,
    alphas: Vec<f64>,
    sums: Vec<f64>,
}

impl DirectionalSchedule {
    pub fn new(n: usize, steps: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("dimension must be >= 1".into()));
        }
        let (alphas, sums) = (0..=steps).map(|k| directional_schedule(n, k)).unzip();
        Ok(Self { n, alphas, sums })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }
}

/// Weights `gamma_k^l` with `x_k = sum_l gamma_k^l u_l`:
/// `gamma_{k+1}^{k+1} = n alpha_{k+1} / A_{k+1}`,
/// `gamma_{k+1}^k = (A_k gamma_k^k + (1 - n) alpha_{k+1}) / A_{k+1}`,
/// `gamma_{k+1}^l = A_k gamma_k^l / A_{k+1}` for `l < k`.
pub fn gamma_weights(n: usize, k: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut gamma = vec![1.0];
    for j in 0..k {
        let (_, a_j) = directional_schedule(n, j);
        let (alpha_next, a_next) = directional_schedule(n, j + 1);
        let ratio = a_j / a_next;
        let mut next: Vec<f64> = gamma.iter().map(|g| ratio * g).collect();
        next[j] += (1.0 - nf) * alpha_next / a_next;
        next.push(nf * alpha_next / a_next);
        gamma = next;
    }
    gamma
}

/// `1/2 P_0^2 = 1/2 R_0^2 + (1 - 1/n)(f(x_0) - f*)`, `R_0 = ||u_0 - x*||_L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P0Budget {
    pub r0: f64,
    pub gap0: f64,
    pub p0: f64,
}

impl P0Budget {
    pub fn new(r0: f64, gap0: f64, n: usize) -> Result<Self> {
        if n == 0 || !(r0 >= 0.0) || !(gap0 >= 0.0) {
            return Err(Error::Argument("P0 needs n >= 1, R0 >= 0 and a nonnegative gap".into()));
        }
        let p0 = (r0 * r0 + 2.0 * (1.0 - 1.0 / n as f64) * gap0).sqrt();
        Ok(Self { r0, gap0, p0 })
    }

    /// Budget of a problem with known optimum started at `x0`.
    pub fn for_problem(problem: &Problem, x0: &[f64], lipschitz: f64) -> Result<Self> {
        let opt = problem
            .optimum
            .as_ref()
            .ok_or_else(|| Error::Precondition("P0 needs a known optimum or an explicit bound".into()))?;
        let r0 = lipschitz.sqrt() * norm2(&crate::linalg::sub(x0, &opt.x));
        Self::new(r0, (problem.value(x0) - opt.value).max(0.0), problem.dim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalPlan {
    pub steps: usize,
    pub delta_max: f64,
    pub epsilon: f64,
    pub p0: f64,
    /// The start is already an epsilon-solution; no steps are planned.
    pub already_solved: bool,
}

/// `N = ceil(sqrt(2) n P0 / sqrt(eps) + 1 - 2n)` and
/// `delta_max = min(eps^{3/4} sqrt(L) / (4 2^{1/4} sqrt(n P0)), eps^{3/2} sqrt(L) / (96 sqrt(n) P0^2))`.
pub fn plan_directional(p0: f64, epsilon: f64, n: usize, lipschitz: f64) -> Result<DirectionalPlan> {
    if !(p0 > 0.0) || !(epsilon > 0.0) || n == 0 || !(lipschitz > 0.0) {
        return Err(Error::Argument("plan needs P0, epsilon, n and L all positive".into()));
    }
    let nf = n as f64;
    // sqrt(2 / eps) keeps exact cases such as eps = 0.02 exact
    let raw = ((2.0 / epsilon).sqrt() * nf * p0 + 1.0 - 2.0 * nf).ceil();
    let already_solved = raw <= 0.0 || epsilon >= 0.5 * p0 * p0;
    let steps = if already_solved { 0 } else { raw as usize };
    let first = epsilon.powf(0.75) * lipschitz.sqrt() / (4.0 * 2f64.powf(0.25) * (nf * p0).sqrt());
    let second = epsilon.powf(1.5) * lipschitz.sqrt() / (96.0 * nf.sqrt() * p0 * p0);
    Ok(DirectionalPlan {
        steps,
        delta_max: first.min(second),
        epsilon,
        p0,
        already_solved,
    })
}

/// Admissible function-value noise for the zeroth-order scheme:
/// `min(eps^{3/2} / (64 sqrt(2) n P0), eps^3 / (36864 n P0^4))`.
pub fn zeroth_order_max_noise(p0: f64, epsilon: f64, n: usize) -> f64 {
    let nf = n as f64;
    (epsilon.powf(1.5) / (64.0 * 2f64.sqrt() * nf * p0))
        .min(epsilon.powi(3) / (36864.0 * nf * p0.powi(4)))
}

fn check_problem(problem: &Problem, x0: &[f64]) -> Result<()> {
    if !matches!(problem.feasible, FeasibleSet::WholeSpace { .. }) {
        return Err(Error::Capability {
            combination: format!("directional method on {}", problem.feasible.name()),
            supported: "whole_space only".into(),
        });
    }
    if problem.count() != 1 || problem.composite != Composite::Zero {
        return Err(Error::Capability {
            combination: "directional method with several components or nonzero h".into(),
            supported: "a single smooth component, h = 0".into(),
        });
    }
    if x0.len() != problem.dim() {
        return Err(Error::Argument("start has the wrong dimension".into()));
    }
    Ok(())
}

struct Estimate {
    gradient: Vec<f64>,
    function_calls: u64,
    gradient_calls: u64,
}

type Estimator<'a> = dyn FnMut(&[f64], &[f64], &mut ChaCha8Rng) -> Result<Estimate> + 'a;

fn run_loop(
    name: &'static str,
    problem: &Problem,
    x0: &[f64],
    plan: &DirectionalPlan,
    lipschitz: f64,
    scheme: &DirectionScheme,
    estimator: &mut Estimator<'_>,
) -> Result<Trace> {
    let n = problem.dim();
    if scheme.dim() != n {
        return Err(Error::Argument("direction scheme dimension differs from the problem".into()));
    }
    let setup = ProxSetup::scaled_euclidean(lipschitz)?;
    let f = problem.components[0].as_ref();
    let opt = problem.optimum.as_ref();
    let v_to_opt = |u: &[f64]| opt.and_then(|o| setup.bregman(&o.x, u).ok());
    let nf = n as f64;

    let mut trace = Trace::new(name);
    let mut x = x0.to_vec();
    let mut u = x0.to_vec();
    let (alpha0, mut a_sum) = directional_schedule(n, 0);
    let (mut calls_f, mut calls_g) = (0u64, 0u64);
    let f0 = f.value(&x);
    trace.records.push(Record {
        k: 0,
        f_x: f0,
        f_y: f0,
        alpha: alpha0,
        a_sum,
        l_k: Some(lipschitz),
        m_k: None,
        calls_f,
        calls_g,
        v_to_opt: v_to_opt(&u),
    });
    trace.xs.push(x.clone());
    trace.ys.push(x.clone());
    trace.us.push(u.clone());
    if plan.already_solved {
        trace.status = Status::AlreadySolved;
        return Ok(trace);
    }

    for k in 0..plan.steps {
        let step = k + 1;
        let (alpha, a_next) = directional_schedule(n, step);
        let y = combine(alpha, &u, a_sum, &x, a_next);
        let mut rng = scheme.step_stream(step);
        let e = scheme.sample_with(&mut rng);
        let est = estimator(&y, &e, &mut rng).map_err(|err| err.at_step(step))?;
        calls_f += est.function_calls;
        calls_g += est.gradient_calls;
        let u_next: Vec<f64> = u
            .iter()
            .zip(&est.gradient)
            .map(|(ui, gi)| ui - alpha / lipschitz * gi)
            .collect();
        let coef = nf * alpha / a_next;
        let x_next: Vec<f64> = y
            .iter()
            .zip(u_next.iter().zip(&u))
            .map(|(yi, (un, uo))| yi + coef * (un - uo))
            .collect();
        a_sum = a_next;
        x = x_next;
        u = u_next;
        trace.records.push(Record {
            k: step,
            f_x: f.value(&x),
            f_y: f.value(&y),
            alpha,
            a_sum,
            l_k: Some(lipschitz),
            m_k: None,
            calls_f,
            calls_g,
            v_to_opt: v_to_opt(&u),
        });
        trace.xs.push(x.clone());
        trace.ys.push(y);
        trace.us.push(u.clone());
        trace.retries.push(0);
        trace.slacks.push(0.0);
        trace.draws.push(0);
    }
    Ok(trace)
}

/// Runs the directional method with bounded directional noise: each query
/// adds `delta (2U - 1)`, `U ~ U[0, 1)`, drawn after the direction from the
/// step's stream.
pub fn run_directional(
    problem: &Problem,
    x0: &[f64],
    plan: &DirectionalPlan,
    lipschitz: f64,
    scheme: &DirectionScheme,
    delta: f64,
) -> Result<Trace> {
    check_problem(problem, x0)?;
    if !(delta >= 0.0) || delta > plan.delta_max {
        return Err(Error::Precondition(format!(
            "directional noise {delta:e} exceeds the admissible {:e}",
            plan.delta_max
        )));
    }
    let f = problem.components[0].clone();
    let mut estimator = |y: &[f64], e: &[f64], rng: &mut ChaCha8Rng| {
        let noise = delta * (2.0 * rng.random::<f64>() - 1.0);
        Ok(Estimate {
            gradient: directional_eval(f.as_ref(), y, e, noise, delta)?,
            function_calls: 0,
            gradient_calls: 1,
        })
    };
    run_loop("directional", problem, x0, plan, lipschitz, scheme, &mut estimator)
}

/// Zeroth-order run: the directional derivative is replaced by a forward
/// difference with step `tau = 2 sqrt(delta_eval / L)` from function values
/// carrying noise of magnitude at most `delta_eval`. With `delta_eval = 0`
/// the step falls back to `sqrt(machine eps) (1 + ||y||)`.
#[allow(clippy::too_many_arguments)]
pub fn run_zeroth_order(
    problem: &Problem,
    x0: &[f64],
    epsilon: f64,
    delta_eval: f64,
    lipschitz: f64,
    p0: f64,
    scheme: &DirectionScheme,
) -> Result<Trace> {
    check_problem(problem, x0)?;
    let n = problem.dim();
    let plan = plan_directional(p0, epsilon, n, lipschitz)?;
    let admissible = zeroth_order_max_noise(p0, epsilon, n);
    if !(delta_eval >= 0.0) || delta_eval > admissible {
        return Err(Error::Precondition(format!(
            "function-value noise {delta_eval:e} exceeds the admissible maximum {admissible:e}"
        )));
    }
    let induced = 2.0 * (lipschitz * delta_eval).sqrt();
    if induced > plan.delta_max * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "induced directional noise {induced:e} exceeds {:e}",
            plan.delta_max
        )));
    }
    let f = problem.components[0].clone();
    let mut estimator = |y: &[f64], e: &[f64], rng: &mut ChaCha8Rng| {
        let tau = if delta_eval > 0.0 {
            finite_diff_step(lipschitz, delta_eval)
        } else {
            f64::EPSILON.sqrt() * (1.0 + norm2(y))
        };
        let d1 = delta_eval * (2.0 * rng.random::<f64>() - 1.0);
        let d2 = delta_eval * (2.0 * rng.random::<f64>() - 1.0);
        Ok(Estimate {
            gradient: finite_diff_eval(f.as_ref(), y, e, tau, d1, d2, delta_eval)?,
            function_calls: 2,
            gradient_calls: 0,
        })
    };
    run_loop("zeroth_order", problem, x0, &plan, lipschitz, scheme, &mut estimator)
}
