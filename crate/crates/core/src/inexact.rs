//! Mirror Triangles Method driven by a (delta, L)-oracle.

use crate::adaptive::{descent_holds, run_engine, EngineSetup, ModelEval, StepOracle, Trial};
use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::oracle::DeltaLOracle;
use crate::problems::Problem;
use crate::prox::ProxSetup;
use crate::subproblem::LinearModel;
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InexactMode {
    /// Slack `delta` in the exit test.
    FixedDelta,
    /// Slack `(alpha_{k+1} / A_{k+1}) epsilon` in the exit test.
    Universal { epsilon: f64 },
}

/// Exit test with inexact values:
/// `f_delta(x) <= f_tilde + <g_tilde, x - y> + L/2 ||x - y||^2 + slack`.
#[allow(clippy::too_many_arguments)]
pub fn check_descent_inexact(
    oracle: &DeltaLOracle,
    setup: &ProxSetup,
    x_next: &[f64],
    y_next: &[f64],
    g_tilde: &[f64],
    f_tilde: f64,
    lipschitz: f64,
    slack: f64,
) -> Result<bool> {
    let model = LinearModel::single(y_next.to_vec(), f_tilde, g_tilde.to_vec())?;
    Ok(descent_holds(oracle.value(x_next), &model, x_next, setup, lipschitz, slack))
}

struct InexactOracle<'a> {
    oracle: &'a DeltaLOracle,
    mode: InexactMode,
}

impl StepOracle for InexactOracle<'_> {
    fn model(&mut self, y: &[f64], _trial: &Trial) -> Result<ModelEval> {
        let (value, gradient) = self.oracle.delta_eval(y);
        Ok(ModelEval {
            model: LinearModel::single(y.to_vec(), value, gradient)?,
            batch: None,
            function_calls: 1,
            gradient_calls: 1,
        })
    }

    fn lhs(&mut self, x: &[f64]) -> f64 {
        self.oracle.value(x)
    }

    fn slack(&self, trial: &Trial, _batch: Option<u64>) -> f64 {
        match self.mode {
            InexactMode::FixedDelta => self.oracle.delta(),
            InexactMode::Universal { epsilon } => trial.alpha / trial.a_next * epsilon,
        }
    }
}

/// Runs the inexact method. `problem` supplies `h`, the optimum and the true
/// objective recorded in the trace; the oracle must wrap its single smooth
/// component.
#[allow(clippy::too_many_arguments)]
pub fn run_inexact(
    problem: &Problem,
    oracle: &DeltaLOracle,
    setup: &ProxSetup,
    set: &FeasibleSet,
    x0: &[f64],
    steps: usize,
    l0: f64,
    mode: InexactMode,
) -> Result<Trace> {
    if problem.count() != 1 {
        return Err(Error::Argument(
            "the inexact method takes a single smooth component".into(),
        ));
    }
    if let InexactMode::Universal { epsilon } = mode {
        if !(epsilon >= 0.0) {
            return Err(Error::Argument("universal mode needs epsilon >= 0".into()));
        }
    }
    let objective = |x: &[f64]| oracle.function().value(x) + problem.composite.value(x);
    let cfg = EngineSetup {
        name: "inexact",
        setup,
        set,
        composite: &problem.composite,
        x0,
        steps,
        l0,
        objective: &objective,
        optimum: problem.optimum.as_ref(),
    };
    run_engine(&cfg, &mut InexactOracle { oracle, mode })
}
