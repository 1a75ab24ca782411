//! The base Mirror Triangles Method with a known gradient-Lipschitz constant.

use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::linalg::combine;
use crate::problems::Problem;
use crate::prox::ProxSetup;
use crate::schedule::next_alpha;
use crate::subproblem::minimax_prox_step;
use crate::trace::{Record, Status, Trace};

/// When to stop a fixed-`L` run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    /// Exactly `N` steps.
    Iterations(usize),
    /// Stop once the certified envelope `R^2 / A_k` is at most `epsilon`,
    /// where `r_squared` bounds `V(x*, x_0)` from above.
    Accuracy {
        epsilon: f64,
        r_squared: f64,
        max_iterations: usize,
    },
}

impl From<usize> for Stop {
    fn from(n: usize) -> Self {
        Stop::Iterations(n)
    }
}

pub(crate) fn check_start(set: &FeasibleSet, x0: &[f64]) -> Result<()> {
    if !set.contains(x0, 1e-12) {
        return Err(Error::Argument(format!(
            "starting point {x0:?} is not in the feasible set ({})",
            set.name()
        )));
    }
    Ok(())
}

/// Runs the base method:
///
/// ```text
/// y_{k+1} = (alpha_{k+1} u_k + A_k x_k) / A_{k+1}
/// u_{k+1} = argmin_{x in Q} V(x, u_k) + alpha_{k+1} (<grad f(y_{k+1}), x> + h(x))
/// x_{k+1} = (alpha_{k+1} u_{k+1} + A_k x_k) / A_{k+1}
/// ```
///
/// With several components the linearization is the max of the component
/// linearizations. The guarantee `F(x_N) - F* <= 4 L R^2 / (N + 1)^2` needs
/// `L` to dominate the true constant.
pub fn run_base(
    problem: &Problem,
    setup: &ProxSetup,
    set: &FeasibleSet,
    x0: &[f64],
    stop: impl Into<Stop>,
    lipschitz: f64,
) -> Result<Trace> {
    let stop = stop.into();
    check_start(set, x0)?;
    let max_steps = match stop {
        Stop::Iterations(n) => n,
        Stop::Accuracy {
            epsilon,
            r_squared,
            max_iterations,
        } => {
            if !(epsilon > 0.0) || !(r_squared >= 0.0) {
                return Err(Error::Argument("accuracy stop needs epsilon > 0 and R^2 >= 0".into()));
            }
            max_iterations
        }
    };
    // validates L
    next_alpha(lipschitz, 0.0)?;

    let opt = problem.optimum.as_ref();
    let v_to_opt = |u: &[f64]| opt.and_then(|o| setup.bregman(&o.x, u).ok());
    let mut trace = Trace::new("base");
    let mut x = x0.to_vec();
    let mut u = x0.to_vec();
    let (mut alpha, mut a_sum) = (0.0, 0.0);
    let (mut calls_f, mut calls_g) = (0u64, 0u64);
    let f0 = problem.value(&x);
    trace.records.push(Record {
        k: 0,
        f_x: f0,
        f_y: f0,
        alpha,
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

    for k in 0..max_steps {
        if let Stop::Accuracy {
            epsilon, r_squared, ..
        } = stop
        {
            if a_sum > 0.0 && r_squared / a_sum <= epsilon {
                trace.status = Status::TargetReached;
                break;
            }
        }
        let step = k + 1;
        let alpha_next = next_alpha(lipschitz, alpha).map_err(|e| e.at_step(step))?;
        let a_next = a_sum + alpha_next;
        let y = combine(alpha_next, &u, a_sum, &x, a_next);
        let model = problem.model_at(&y);
        calls_f += 1;
        calls_g += 1;
        let u_next = minimax_prox_step(setup, set, &u, &model, alpha_next, &problem.composite)
            .map_err(|e| e.at_step(step))?;
        let x_next = combine(alpha_next, &u_next, a_sum, &x, a_next);
        alpha = alpha_next;
        a_sum = a_next;
        x = x_next;
        u = u_next;
        trace.records.push(Record {
            k: step,
            f_x: problem.value(&x),
            f_y: problem.value(&y),
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
    if let Stop::Accuracy {
        epsilon, r_squared, ..
    } = stop
    {
        if a_sum > 0.0 && r_squared / a_sum <= epsilon {
            trace.status = Status::TargetReached;
        }
    }
    Ok(trace)
}
