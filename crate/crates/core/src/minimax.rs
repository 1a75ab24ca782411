//! Adaptive Mirror Triangles Method for `max_j f_j(x) + h(x)` with
//! doubling/halving backtracking on the local constant.

use std::sync::Arc;

use crate::adaptive::{descent_holds, run_engine, EngineSetup, ModelEval, StepOracle, Trial};
use crate::composite::Composite;
use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::functions::{SharedFunction, Shifted};
use crate::problems::Problem;
use crate::prox::ProxSetup;
use crate::subproblem::LinearModel;
use crate::trace::Trace;

/// Minimax objectives are ordinary [`Problem`]s with several components.
pub type MinimaxProblem = Problem;

/// Exit test of the adaptive step:
/// `max_j f_j(x) <= max_j [f_j(y) + <grad f_j(y), x - y>] + L/2 ||x - y||^2`
/// (the `h(x)` on both sides cancels). `model` must be anchored at `y_next`.
pub fn check_descent(
    problem: &Problem,
    setup: &ProxSetup,
    x_next: &[f64],
    y_next: &[f64],
    model: &LinearModel,
    lipschitz: f64,
) -> bool {
    debug_assert_eq!(model.anchor(), y_next);
    descent_holds(problem.smooth_value(x_next), model, x_next, setup, lipschitz, 0.0)
}

struct MinimaxOracle<'a> {
    problem: &'a Problem,
}

impl StepOracle for MinimaxOracle<'_> {
    fn model(&mut self, y: &[f64], _trial: &Trial) -> Result<ModelEval> {
        // one function-set and one gradient-set evaluation
        Ok(ModelEval {
            model: self.problem.model_at(y),
            batch: None,
            function_calls: 1,
            gradient_calls: 1,
        })
    }

    fn lhs(&mut self, x: &[f64]) -> f64 {
        self.problem.smooth_value(x)
    }

    fn slack(&self, _trial: &Trial, _batch: Option<u64>) -> f64 {
        0.0
    }
}

/// Runs the adaptive method for `N` steps from `L_0`.
///
/// Counters follow the convention that all `M` values at one point are one
/// function-set evaluation, and all `M` gradients one gradient-set
/// evaluation. Each trial costs two function-set evaluations (at `y_{k+1}`
/// and `x_{k+1}`) and one gradient-set evaluation.
pub fn run_adaptive_minimax(
    problem: &Problem,
    setup: &ProxSetup,
    set: &FeasibleSet,
    x0: &[f64],
    steps: usize,
    l0: f64,
) -> Result<Trace> {
    let objective = |x: &[f64]| problem.value(x);
    let cfg = EngineSetup {
        name: "minimax",
        setup,
        set,
        composite: &problem.composite,
        x0,
        steps,
        l0,
        objective: &objective,
        optimum: problem.optimum.as_ref(),
    };
    run_engine(&cfg, &mut MinimaxOracle { problem })
}

/// Recasts `min f(x)` s.t. `g_i(x) <= 0` with known optimal value `f*` as
/// `min max{f(x) - f*, g_1(x), ..., g_K(x)}`, whose optimal value is 0.
pub fn reformulate_constrained(
    objective: SharedFunction,
    f_star: f64,
    constraints: Vec<SharedFunction>,
    feasible: FeasibleSet,
    start: Vec<f64>,
) -> Result<MinimaxProblem> {
    if !f_star.is_finite() {
        return Err(Error::Argument("f* must be finite".into()));
    }
    let mut components: Vec<SharedFunction> = Vec::with_capacity(constraints.len() + 1);
    components.push(Arc::new(Shifted {
        inner: objective,
        shift: f_star,
    }));
    components.extend(constraints);
    Ok(Problem::new("constrained", components, feasible, start)?.with_composite(Composite::Zero))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{Affine, Quadratic};

    #[test]
    fn identical_points_always_pass() {
        let p = crate::problems::maxquad_2d().unwrap();
        let y = [0.7, -0.3];
        let model = p.model_at(&y);
        assert!(check_descent(&p, &ProxSetup::euclidean(), &y, &y, &model, 1e-9));
    }

    #[test]
    fn true_constant_passes_and_tiny_one_fails() {
        let p = crate::problems::maxquad_1d().unwrap();
        let e = ProxSetup::euclidean();
        for (x, y) in [(3.0, -2.0), (0.1, 0.2), (-5.0, 4.0)] {
            let model = p.model_at(&[y]);
            assert!(check_descent(&p, &e, &[x], &[y], &model, p.lipschitz));
        }
        let q = Problem::new(
            "half",
            vec![Arc::new(Quadratic::diagonal(&[1.0], vec![0.0], 0.0).unwrap())],
            FeasibleSet::whole_space(1).unwrap(),
            vec![0.0],
        )
        .unwrap();
        let model = q.model_at(&[0.0]);
        assert!(!check_descent(&q, &e, &[10.0], &[0.0], &model, 0.1));
    }

    #[test]
    fn reformulation_examples() {
        let x_sq: SharedFunction = Arc::new(Quadratic::diagonal(&[2.0], vec![0.0], 0.0).unwrap());
        let ws = FeasibleSet::whole_space(1).unwrap();
        // no constraints: f - f*
        let p = reformulate_constrained(x_sq.clone(), 0.0, vec![], ws.clone(), vec![1.0]).unwrap();
        assert_eq!(p.count(), 1);
        assert_eq!(p.value(&[0.0]), 0.0);

        let grid_min = |p: &Problem| {
            let mut best = (f64::INFINITY, 0.0);
            for i in 0..=40_000 {
                let x = -2.0 + 4.0 * i as f64 / 40_000.0;
                let v = p.value(&[x]);
                if v < best.0 {
                    best = (v, x);
                }
            }
            best
        };
        // x^2 with x - 1 <= 0 and f* = 0
        let g: SharedFunction = Arc::new(Affine { c: vec![1.0], c0: -1.0 });
        let p = reformulate_constrained(x_sq.clone(), 0.0, vec![g], ws.clone(), vec![1.0]).unwrap();
        let (v, x) = grid_min(&p);
        assert!(v.abs() < 1e-12 && x.abs() < 1e-12);
        // x^2 with 1 - x <= 0 and the constrained optimum f* = 1
        let g: SharedFunction = Arc::new(Affine { c: vec![-1.0], c0: 1.0 });
        let p = reformulate_constrained(x_sq, 1.0, vec![g], ws, vec![2.0]).unwrap();
        let (v, x) = grid_min(&p);
        assert!(v.abs() < 1e-12 && (x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_converges_to_one() {
        let p = crate::problems::maxquad_1d().unwrap();
        let t = run_adaptive_minimax(&p, &p.prox, &p.feasible, &p.start, 200, p.lipschitz).unwrap();
        assert!((t.last().f_x - 1.0).abs() <= 1e-6, "{}", t.last().f_x);
    }
}
