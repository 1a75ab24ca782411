//! Turns a resolved experiment into solver calls and trace headers.

use mirror_triangles::directional::zeroth_order_max_noise;
use mirror_triangles::stochastic::{plan, StochasticPlan};
use mirror_triangles::{
    plan_directional, prox_step, run_adaptive_minimax, run_base, run_directional, run_inexact, run_stochastic,
    run_zeroth_order, DeltaLOracle, DirectionScheme, DirectionalPlan, Error, InexactMode, P0Budget,
    StochasticOptions, StochasticOracle, Stop, Trace,
};

use crate::config::{ConfigError, Experiment, SolverId};
use crate::trace_file::{Header, Row, SCHEMA};

/// Everything a run needs that does not depend on the seed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub experiment: Experiment,
    pub lipschitz: f64,
    pub l0: f64,
    pub r_squared: Option<f64>,
    pub delta: f64,
    pub stochastic: Option<StochasticPlan>,
    pub directional: Option<DirectionalPlan>,
    pub steps_planned: usize,
}

fn invalid(e: Error) -> ConfigError {
    ConfigError::new("CONFIG_PRECONDITION", e.to_string())
}

fn p0_budget(e: &Experiment, lipschitz: f64) -> Result<P0Budget, ConfigError> {
    P0Budget::for_problem(&e.problem, &e.problem.start, lipschitz).map_err(invalid)
}

impl Prepared {
    /// Fills in plans and defaults, then runs every solver's own precondition
    /// checks on a zero-step probe so that no seed starts on a bad config.
    pub fn new(experiment: Experiment) -> Result<Self, ConfigError> {
        let e = &experiment;
        let lipschitz = e.problem.lipschitz;
        let l0 = e.config.plan.l0.unwrap_or(lipschitz);
        let r_squared = e.problem.r_squared(&e.prox);
        let mut prepared = Prepared {
            lipschitz,
            l0,
            r_squared,
            delta: e.config.oracle.delta.unwrap_or(0.0),
            stochastic: None,
            directional: None,
            steps_planned: e.config.plan.steps.unwrap_or(0),
            experiment: experiment.clone(),
        };
        match e.solver {
            SolverId::Stochastic => {
                let diameter = e.problem.feasible.diameter().ok_or_else(|| {
                    ConfigError::new("CONFIG_PRECONDITION", "the stochastic solver needs a bounded feasible set")
                })?;
                let p = plan(
                    e.config.plan.epsilon.unwrap_or_default(),
                    e.config.plan.beta.unwrap_or(0.05),
                    lipschitz,
                    diameter,
                    e.config.oracle.variance,
                )
                .map_err(invalid)?;
                prepared.steps_planned = p.steps;
                prepared.stochastic = Some(p);
            }
            SolverId::Directional => {
                let budget = p0_budget(e, lipschitz)?;
                let n = e.problem.dim();
                let p = plan_directional(budget.p0, e.config.plan.epsilon.unwrap_or_default(), n, lipschitz)
                    .map_err(invalid)?;
                prepared.delta = e.config.oracle.delta.unwrap_or(p.delta_max);
                prepared.steps_planned = p.steps;
                prepared.directional = Some(p);
            }
            SolverId::ZerothOrder => {
                let budget = p0_budget(e, lipschitz)?;
                let n = e.problem.dim();
                let eps = e.config.plan.epsilon.unwrap_or_default();
                let p = plan_directional(budget.p0, eps, n, lipschitz).map_err(invalid)?;
                prepared.delta = e
                    .config
                    .oracle
                    .delta
                    .unwrap_or_else(|| zeroth_order_max_noise(budget.p0, eps, n));
                prepared.steps_planned = p.steps;
                prepared.directional = Some(p);
            }
            SolverId::Base => {
                if e.config.plan.steps.is_none() {
                    prepared.steps_planned = 0;
                }
            }
            SolverId::Minimax | SolverId::Inexact => {}
        }
        prepared.probe()?;
        Ok(prepared)
    }

    fn probe(&self) -> Result<(), ConfigError> {
        let e = &self.experiment;
        let p = &e.problem;
        if !matches!(e.solver, SolverId::Directional | SolverId::ZerothOrder) {
            // one prox evaluation surfaces unsupported (prox, set, h) combinations
            prox_step(&e.prox, &p.feasible, &p.start, &vec![0.0; p.dim()], 1.0, &p.composite).map_err(invalid)?;
        }
        match self.execute(0, true) {
            Ok(_) => Ok(()),
            Err(e) => Err(invalid(e)),
        }
    }

    /// Runs one seed.
    pub fn run(&self, seed: u64) -> mirror_triangles::Result<Trace> {
        self.execute(seed, false)
    }

    fn execute(&self, seed: u64, probe: bool) -> mirror_triangles::Result<Trace> {
        let e = &self.experiment;
        let p = &e.problem;
        let steps = if probe { 0 } else { e.config.plan.steps.unwrap_or(0) };
        match e.solver {
            SolverId::Base => {
                let stop = match (e.config.plan.epsilon, self.r_squared) {
                    (Some(_), _) if probe => Stop::Iterations(0),
                    (Some(epsilon), Some(r_squared)) => Stop::Accuracy {
                        epsilon,
                        r_squared,
                        max_iterations: e.config.plan.steps.unwrap_or(1_000_000),
                    },
                    (Some(_), None) => {
                        return Err(Error::Precondition(
                            "accuracy stopping needs R^2, i.e. a known optimum".into(),
                        ))
                    }
                    (None, _) => Stop::Iterations(steps),
                };
                run_base(p, &e.prox, &p.feasible, &p.start, stop, self.lipschitz)
            }
            SolverId::Minimax => run_adaptive_minimax(p, &e.prox, &p.feasible, &p.start, steps, self.l0),
            SolverId::Inexact => {
                let oracle = self.delta_oracle(seed)?;
                run_inexact(p, &oracle, &e.prox, &p.feasible, &p.start, steps, self.l0, e.mode)
            }
            SolverId::Stochastic => {
                let mut plan = self.stochastic.expect("stochastic plan");
                if probe {
                    plan.steps = 0;
                }
                let oracle = StochasticOracle::new(self.delta_oracle(seed)?, e.config.oracle.variance, seed)?;
                let options = StochasticOptions {
                    l0: e.config.plan.l0,
                    allow_unverified_prox: e.config.solver.allow_unverified_prox,
                };
                run_stochastic(p, &oracle, &e.prox, &p.feasible, &p.start, &plan, self.lipschitz, options)
            }
            SolverId::Directional => {
                let mut plan = self.directional.expect("directional plan");
                if probe {
                    plan.steps = 0;
                }
                let scheme = DirectionScheme::new(e.scheme, p.dim(), seed)?;
                run_directional(p, &p.start, &plan, self.lipschitz, &scheme, self.delta)
            }
            SolverId::ZerothOrder => {
                let plan = self.directional.expect("directional plan");
                let scheme = DirectionScheme::new(e.scheme, p.dim(), seed)?;
                if probe {
                    // same preconditions without running the planned steps
                    let admissible = zeroth_order_max_noise(plan.p0, plan.epsilon, p.dim());
                    if self.delta.is_nan() || self.delta < 0.0 || self.delta > admissible {
                        return Err(Error::Precondition(format!(
                            "function-value noise {:e} exceeds the admissible maximum {admissible:e}",
                            self.delta
                        )));
                    }
                    let empty = DirectionalPlan { steps: 0, ..plan };
                    return run_directional(p, &p.start, &empty, self.lipschitz, &scheme, 0.0);
                }
                let epsilon = e.config.plan.epsilon.unwrap_or_default();
                run_zeroth_order(p, &p.start, epsilon, self.delta, self.lipschitz, plan.p0, &scheme)
            }
        }
    }

    fn delta_oracle(&self, seed: u64) -> mirror_triangles::Result<DeltaLOracle> {
        let p = &self.experiment.problem;
        if p.count() != 1 {
            return Err(Error::Argument(format!(
                "`{}` has {} components; oracle-driven solvers take one",
                p.name,
                p.count()
            )));
        }
        DeltaLOracle::new(p.components[0].clone(), self.delta, self.experiment.perturbation, seed)
    }

    /// Trace header for a finished run; the content hash is filled in when
    /// the file is rendered.
    pub fn header(&self, seed: u64, trace: &Trace) -> Header {
        let e = &self.experiment;
        let uses_l0 = matches!(e.solver, SolverId::Minimax | SolverId::Inexact | SolverId::Stochastic);
        let uses_delta = !matches!(e.solver, SolverId::Base | SolverId::Minimax);
        let (epsilon, beta, variance, omega_tilde, draw_bound) = match (&self.stochastic, e.solver) {
            (Some(s), _) => (
                Some(s.epsilon),
                Some(s.beta),
                Some(s.variance),
                Some(s.omega_tilde),
                Some(s.draw_bound(self.l0)),
            ),
            (None, SolverId::Inexact) => match e.mode {
                InexactMode::Universal { epsilon } => (Some(epsilon), None, None, None, None),
                InexactMode::FixedDelta => (None, None, None, None, None),
            },
            (None, _) => (e.config.plan.epsilon, None, None, None, None),
        };
        Header {
            schema: SCHEMA.into(),
            solver: e.solver.as_str().into(),
            problem: e.problem.name.to_string(),
            prox: e.prox_id.clone(),
            seed,
            dim: e.problem.dim(),
            lipschitz: self.lipschitz,
            l0: uses_l0.then_some(self.l0),
            f_star: e.problem.optimum.as_ref().map(|o| o.value),
            r_squared: self.r_squared,
            delta: uses_delta.then_some(self.delta),
            epsilon,
            beta,
            variance,
            omega_tilde,
            draw_bound,
            p0: self.directional.map(|d| d.p0),
            mode: (e.solver == SolverId::Inexact).then(|| {
                match e.mode {
                    InexactMode::FixedDelta => "fixed",
                    InexactMode::Universal { .. } => "universal",
                }
                .to_string()
            }),
            steps_planned: self.steps_planned,
            status: trace.status.as_str().into(),
            config: e.config.clone(),
            content_hash: String::new(),
        }
    }
}

pub fn rows(trace: &Trace) -> Vec<Row> {
    trace.records.iter().map(Row::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;

    fn prepare(text: &str) -> Result<Prepared, ConfigError> {
        Prepared::new(Experiment::resolve(&Config::from_toml(text).unwrap())?)
    }

    #[test]
    fn base_run_has_n_plus_one_records() {
        let p = prepare("[solver]\nid = \"base\"\n[problem]\nid = \"quad_well\"\n[plan]\nsteps = 100\n").unwrap();
        assert_eq!(p.run(0).unwrap().records.len(), 101);
    }

    #[test]
    fn preconditions_fail_before_running() {
        // directional needs the whole space
        let e = prepare("[solver]\nid = \"directional\"\n[problem]\nid = \"quad_box\"\n[plan]\nepsilon = 0.1\n");
        assert_eq!(e.unwrap_err().code, "CONFIG_PRECONDITION");
        // stochastic inexactness above the admissible level
        let e = prepare(
            "[solver]\nid = \"stochastic\"\n[problem]\nid = \"quad_box\"\n[oracle]\ndelta = 1.0\n[plan]\nepsilon = 0.1\n",
        );
        assert_eq!(e.unwrap_err().code, "CONFIG_PRECONDITION");
        // entropy prox on the whole space is not a supported geometry
        let e = prepare("[solver]\nid = \"base\"\n[problem]\nid = \"quad_well\"\n[prox]\nid = \"entropy\"\n[plan]\nsteps = 5\n");
        assert_eq!(e.unwrap_err().code, "CONFIG_PRECONDITION");
    }
}
