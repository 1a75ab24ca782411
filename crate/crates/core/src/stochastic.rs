//! Mirror Triangles Method with a mini-batched stochastic (delta, L)-oracle:
//! run planning, batch sizes and the modified exit test.

use crate::adaptive::{run_engine, EngineSetup, ModelEval, StepOracle, Trial};
use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::oracle::StochasticOracle;
use crate::problems::Problem;
use crate::prox::{ProxKind, ProxSetup};
use crate::subproblem::LinearModel;
use crate::trace::Trace;

/// Planned run for target accuracy `epsilon` at confidence `1 - beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticPlan {
    pub epsilon: f64,
    pub beta: f64,
    pub lipschitz: f64,
    /// `N = ceil(2 sqrt(3) sqrt(L) D_Q / sqrt(epsilon))`
    pub steps: usize,
    /// `Omega = sqrt(2 ln(N / beta))`
    pub omega: f64,
    /// `1 + 2 Omega + Omega^2`
    pub omega_tilde: f64,
    /// Euclidean diameter bound `D_Q` of the feasible set.
    pub diameter: f64,
    /// Sub-Gaussian variance proxy `D`.
    pub variance: f64,
}

/// Builds the run plan.
pub fn plan(epsilon: f64, beta: f64, lipschitz: f64, diameter: f64, variance: f64) -> Result<StochasticPlan> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Argument(format!("epsilon must be > 0, got {epsilon}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Argument(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !(lipschitz > 0.0) || !(diameter > 0.0) || !(variance >= 0.0) {
        return Err(Error::Argument(
            "plan needs L > 0, D_Q > 0 and D >= 0".into(),
        ));
    }
    let steps = (2.0 * 3f64.sqrt() * lipschitz.sqrt() * diameter / epsilon.sqrt()).ceil() as usize;
    let omega = (2.0 * (steps as f64 / beta).ln()).sqrt();
    let omega_tilde = 1.0 + 2.0 * omega + omega * omega;
    Ok(StochasticPlan {
        epsilon,
        beta,
        lipschitz,
        steps,
        omega,
        omega_tilde,
        diameter,
        variance,
    })
}

/// `m_{k+1} = max(1, ceil(3 D Omega~ alpha_{k+1} / epsilon))`.
pub fn batch_size(variance: f64, omega_tilde: f64, alpha: f64, epsilon: f64) -> u64 {
    let m = (3.0 * variance * omega_tilde * alpha / epsilon).ceil();
    if m >= 1.0 {
        m as u64
    } else {
        1
    }
}

impl StochasticPlan {
    /// Largest admissible oracle inexactness:
    /// `epsilon^{3/2} / (6 sqrt(3) sqrt(L) D_Q)`.
    pub fn max_delta(&self) -> f64 {
        self.epsilon.powf(1.5) / (6.0 * 3f64.sqrt() * self.lipschitz.sqrt() * self.diameter)
    }

    /// Upper bound on the total number of stochastic draws of a run started
    /// from `L_0`:
    /// `(4 + log2(3L/L0)) (2 sqrt(3) sqrt(L) D_Q / sqrt(eps) + 21 D Omega~ D_Q^2 / eps^2 + 1)`.
    pub fn draw_bound(&self, l0: f64) -> f64 {
        let l = self.lipschitz;
        let eps = self.epsilon;
        let d_q = self.diameter;
        (4.0 + (3.0 * l / l0).log2())
            * (2.0 * 3f64.sqrt() * l.sqrt() * d_q / eps.sqrt()
                + 21.0 * self.variance * self.omega_tilde * d_q * d_q / (eps * eps)
                + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StochasticOptions {
    /// Starting constant; the first trial is `L_0 / 2`. Defaults to `L`.
    pub l0: Option<f64>,
    /// Allow prox geometries other than Euclidean. Runs outside the
    /// Euclidean setting carry no guarantee.
    pub allow_unverified_prox: bool,
}

struct StochasticStep<'a> {
    oracle: &'a StochasticOracle,
    plan: &'a StochasticPlan,
    budget: f64,
}

impl StepOracle for StochasticStep<'_> {
    fn model(&mut self, y: &[f64], trial: &Trial) -> Result<ModelEval> {
        let m = batch_size(self.plan.variance, self.plan.omega_tilde, trial.alpha, self.plan.epsilon);
        // a collapsing L_k inflates alpha and with it the batch; stop before
        // a single batch outgrows the whole run's audited budget
        if m as f64 > self.budget {
            return Err(Error::Contract(format!(
                "batch of {m} draws exceeds the run's draw budget {:.0}",
                self.budget
            )));
        }
        let gradient = self.oracle.mini_batch_keyed(y, m as usize, trial.step, trial.retry)?;
        let value = self.oracle.inner().value(y);
        Ok(ModelEval {
            model: LinearModel::single(y.to_vec(), value, gradient)?,
            batch: Some(m),
            function_calls: 1,
            gradient_calls: m,
        })
    }

    fn lhs(&mut self, x: &[f64]) -> f64 {
        self.oracle.inner().value(x)
    }

    fn slack(&self, trial: &Trial, batch: Option<u64>) -> f64 {
        let m = batch.unwrap_or(1) as f64;
        3.0 * self.plan.variance * self.plan.omega_tilde / (trial.lipschitz * m) + self.oracle.inner().delta()
    }
}

/// Runs the planned number of steps with fresh mini-batches per trial.
/// Each trial draws from the stream keyed by `(step, retry)`.
#[allow(clippy::too_many_arguments)]
pub fn run_stochastic(
    problem: &Problem,
    oracle: &StochasticOracle,
    setup: &ProxSetup,
    set: &FeasibleSet,
    x0: &[f64],
    plan: &StochasticPlan,
    lipschitz: f64,
    options: StochasticOptions,
) -> Result<Trace> {
    if problem.count() != 1 {
        return Err(Error::Argument(
            "the stochastic method takes a single smooth component".into(),
        ));
    }
    if !options.allow_unverified_prox && setup.kind() != ProxKind::Euclidean {
        return Err(Error::Capability {
            combination: format!("stochastic method with {} prox", setup.name()),
            supported: "euclidean (other geometries only with allow_unverified_prox)".into(),
        });
    }
    let Some(diameter) = set.diameter() else {
        return Err(Error::Argument(
            "the stochastic method needs a bounded feasible set".into(),
        ));
    };
    if diameter > plan.diameter * (1.0 + 1e-12) {
        return Err(Error::Argument(format!(
            "feasible-set diameter {diameter} exceeds the planned D_Q = {}",
            plan.diameter
        )));
    }
    if (plan.lipschitz - lipschitz).abs() > 1e-12 * lipschitz {
        return Err(Error::Argument("plan was built for a different L".into()));
    }
    let delta = oracle.inner().delta();
    if delta > plan.max_delta() {
        return Err(Error::Precondition(format!(
            "oracle delta {delta:e} exceeds the admissible {:e}",
            plan.max_delta()
        )));
    }
    let objective = |x: &[f64]| oracle.inner().function().value(x) + problem.composite.value(x);
    let cfg = EngineSetup {
        name: "stochastic",
        setup,
        set,
        composite: &problem.composite,
        x0,
        steps: plan.steps,
        l0: options.l0.unwrap_or(lipschitz),
        objective: &objective,
        optimum: problem.optimum.as_ref(),
    };
    let budget = plan.draw_bound(cfg.l0);
    run_engine(&cfg, &mut StochasticStep { oracle, plan, budget })
}
