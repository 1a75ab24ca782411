//! Backtracking engine shared by the adaptive, inexact and stochastic
//! variants. Each step starts from `L_k / 2` and doubles the trial constant
//! until the exit inequality
//!
//! ```text
//! lhs(x_{k+1}) <= model(x_{k+1}) + L_{k+1}/2 ||x_{k+1} - y_{k+1}||^2 + slack
//! ```
//!
//! holds. Variants differ only in how the model and the left-hand side are
//! produced and in the slack.

use crate::composite::Composite;
use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::linalg::{combine, sub};
use crate::problems::Optimum;
use crate::prox::ProxSetup;
use crate::schedule::solve_alpha_adaptive;
use crate::subproblem::{minimax_prox_step, LinearModel};
use crate::trace::{Record, Status, Trace};

/// Floating-point slack added to every exit test.
pub const EXIT_TOLERANCE: f64 = 1e-12;

/// `L_k` above `2^60 L_0` is treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1_152_921_504_606_846_976.0; // 2^60

/// Halving stops at `L_0 / 2^60`; reaching it ends the run as stationary.
pub const FLOOR_FACTOR: f64 = 1.0 / DIVERGENCE_FACTOR;

/// One backtracking trial.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Trial {
    pub step: usize,
    pub retry: u32,
    pub alpha: f64,
    pub a_next: f64,
    pub lipschitz: f64,
}

pub(crate) struct ModelEval {
    pub model: LinearModel,
    pub batch: Option<u64>,
    pub function_calls: u64,
    pub gradient_calls: u64,
}

pub(crate) trait StepOracle {
    fn model(&mut self, y: &[f64], trial: &Trial) -> Result<ModelEval>;
    /// Left-hand side of the exit test at the candidate `x_{k+1}`.
    fn lhs(&mut self, x: &[f64]) -> f64;
    fn slack(&self, trial: &Trial, batch: Option<u64>) -> f64;
}

/// The exit inequality with [`EXIT_TOLERANCE`].
pub fn descent_holds(
    lhs: f64,
    model: &LinearModel,
    x_next: &[f64],
    setup: &ProxSetup,
    lipschitz: f64,
    slack: f64,
) -> bool {
    let d = setup.norm(&sub(x_next, model.anchor()));
    lhs <= model.eval_max(x_next) + 0.5 * lipschitz * d * d + slack + EXIT_TOLERANCE
}

pub(crate) struct EngineSetup<'a> {
    pub name: &'static str,
    pub setup: &'a ProxSetup,
    pub set: &'a FeasibleSet,
    pub composite: &'a Composite,
    pub x0: &'a [f64],
    pub steps: usize,
    pub l0: f64,
    /// True composite objective for the trace.
    pub objective: &'a dyn Fn(&[f64]) -> f64,
    pub optimum: Option<&'a Optimum>,
}

pub(crate) fn run_engine(cfg: &EngineSetup<'_>, oracle: &mut dyn StepOracle) -> Result<Trace> {
    if !(cfg.l0 > 0.0) || !cfg.l0.is_finite() {
        return Err(Error::Argument(format!("L0 must be positive, got {}", cfg.l0)));
    }
    crate::base::check_start(cfg.set, cfg.x0)?;
    let v_to_opt = |u: &[f64]| cfg.optimum.and_then(|o| cfg.setup.bregman(&o.x, u).ok());
    let mut trace = Trace::new(cfg.name);
    let mut x = cfg.x0.to_vec();
    let mut u = cfg.x0.to_vec();
    let mut a_sum = 0.0;
    let mut l_k = cfg.l0;
    let (mut calls_f, mut calls_g) = (0u64, 0u64);
    let f0 = (cfg.objective)(&x);
    trace.records.push(Record {
        k: 0,
        f_x: f0,
        f_y: f0,
        alpha: 0.0,
        a_sum,
        l_k: Some(l_k),
        m_k: None,
        calls_f,
        calls_g,
        v_to_opt: v_to_opt(&u),
    });
    trace.xs.push(x.clone());
    trace.ys.push(x.clone());
    trace.us.push(u.clone());

    let guard = DIVERGENCE_FACTOR * cfg.l0;
    for k in 0..cfg.steps {
        let step = k + 1;
        let mut trial_l = l_k / 2.0;
        if trial_l < FLOOR_FACTOR * cfg.l0 {
            trace.status = Status::Stationary;
            break;
        }
        let mut retry = 0u32;
        let mut step_draws = 0u64;
        loop {
            if trial_l > guard {
                return Err(Error::Divergence {
                    step,
                    lipschitz: trial_l,
                });
            }
            let alpha = solve_alpha_adaptive(a_sum, trial_l).map_err(|e| e.at_step(step))?;
            let a_next = a_sum + alpha;
            let y = combine(alpha, &u, a_sum, &x, a_next);
            let trial = Trial {
                step,
                retry,
                alpha,
                a_next,
                lipschitz: trial_l,
            };
            let eval = oracle.model(&y, &trial).map_err(|e| e.at_step(step))?;
            calls_f += eval.function_calls;
            calls_g += eval.gradient_calls;
            if eval.batch.is_some() {
                step_draws += eval.gradient_calls;
            }
            let u_next = minimax_prox_step(cfg.setup, cfg.set, &u, &eval.model, alpha, cfg.composite)
                .map_err(|e| e.at_step(step))?;
            let x_next = combine(alpha, &u_next, a_sum, &x, a_next);
            let lhs = oracle.lhs(&x_next);
            calls_f += 1;
            let slack = oracle.slack(&trial, eval.batch);
            if descent_holds(lhs, &eval.model, &x_next, cfg.setup, trial_l, slack) {
                l_k = trial_l;
                a_sum = a_next;
                x = x_next;
                u = u_next;
                trace.records.push(Record {
                    k: step,
                    f_x: (cfg.objective)(&x),
                    f_y: (cfg.objective)(&y),
                    alpha,
                    a_sum,
                    l_k: Some(l_k),
                    m_k: eval.batch,
                    calls_f,
                    calls_g,
                    v_to_opt: v_to_opt(&u),
                });
                trace.xs.push(x.clone());
                trace.ys.push(y);
                trace.us.push(u.clone());
                trace.retries.push(retry);
                trace.slacks.push(slack);
                trace.draws.push(step_draws);
                break;
            }
            trial_l *= 2.0;
            retry += 1;
        }
    }
    Ok(trace)
}

/// Reconstructs `L_k` from `L_0` and the retry counts:
/// `L_k = L_{k-1} 2^{j_k - 1}`.
pub fn replay_lipschitz(l0: f64, retries: &[u32]) -> Vec<f64> {
    let mut out = Vec::with_capacity(retries.len() + 1);
    let mut l = l0;
    out.push(l);
    for &j in retries {
        l = l / 2.0 * 2f64.powi(j as i32);
        out.push(l);
    }
    out
}
