//! Composite minimax objectives `F(x) = max_j f_j(x) + h(x)` over `Q` and the
//! fixed desk-scale test suite with analytic optima.

use std::sync::Arc;

use crate::composite::Composite;
use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::functions::{LogSumExp, Quadratic, SharedFunction};
use crate::linalg::{dot, mat_vec, norm_inf, solve_dense, sub};
use crate::prox::ProxSetup;
use crate::subproblem::LinearModel;

/// Known minimizer and optimal value.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
}

/// `F(x) = max_j f_j(x) + h(x)` restricted to a feasible set. With a single
/// component this is an ordinary composite problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub components: Vec<SharedFunction>,
    pub composite: Composite,
    pub feasible: FeasibleSet,
    /// Gradient-Lipschitz constant in the norm of `prox`.
    pub lipschitz: f64,
    pub prox: ProxSetup,
    pub start: Vec<f64>,
    pub optimum: Option<Optimum>,
}

impl Problem {
    /// Builds a problem with the Euclidean prox and `L = max_j L_j`.
    pub fn new(
        name: impl Into<String>,
        components: Vec<SharedFunction>,
        feasible: FeasibleSet,
        start: Vec<f64>,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Argument("a problem needs at least one component".into()));
        }
        let n = feasible.dim();
        if components.iter().any(|f| f.dim() != n) || start.len() != n {
            return Err(Error::Argument("component/start dimension differs from Q".into()));
        }
        let lipschitz = components.iter().map(|f| f.lipschitz()).fold(0.0, f64::max);
        Ok(Self {
            name: name.into(),
            components,
            composite: Composite::Zero,
            feasible,
            lipschitz,
            prox: ProxSetup::euclidean(),
            start,
            optimum: None,
        })
    }

    pub fn with_composite(mut self, h: Composite) -> Self {
        self.composite = h;
        self
    }

    pub fn with_prox(mut self, prox: ProxSetup) -> Self {
        self.prox = prox;
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = l;
        self
    }

    pub fn with_optimum(mut self, x: Vec<f64>, value: f64) -> Self {
        self.optimum = Some(Optimum { x, value });
        self
    }

    pub fn dim(&self) -> usize {
        self.feasible.dim()
    }

    pub fn count(&self) -> usize {
        self.components.len()
    }

    /// `max_j f_j(x)`.
    pub fn smooth_value(&self, x: &[f64]) -> f64 {
        self.components
            .iter()
            .map(|f| f.value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The full composite objective `F(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.smooth_value(x) + self.composite.value(x)
    }

    /// Linearizations of every component at `y`.
    pub fn model_at(&self, y: &[f64]) -> LinearModel {
        let (values, gradients) = self.components.iter().map(|f| f.eval(y)).unzip();
        LinearModel::new(y.to_vec(), values, gradients).expect("components are non-empty")
    }

    /// `R^2 = V(x*, x0)` in the given prox geometry.
    pub fn r_squared(&self, setup: &ProxSetup) -> Option<f64> {
        let opt = self.optimum.as_ref()?;
        setup.bregman(&opt.x, &self.start).ok()
    }
}

/// Identifiers of the registered suite.
pub const SUITE: [&str; 8] = [
    "quad_well",
    "quad_ill",
    "quad_box",
    "lse",
    "maxquad_1d",
    "maxquad_2d",
    "simplex_quad",
    "quad_box_interior",
];

/// Looks up a suite problem by identifier.
pub fn by_name(name: &str) -> Result<Problem> {
    match name {
        "quad_well" => quad_well(),
        "quad_ill" => quad_ill(),
        "quad_box" => quad_box(),
        "lse" => lse(),
        "maxquad_1d" => maxquad_1d(),
        "maxquad_2d" => maxquad_2d(),
        "simplex_quad" => simplex_quad(),
        "quad_box_interior" => quad_box_interior(),
        other => Err(Error::Capability {
            combination: format!("problem `{other}`"),
            supported: SUITE.join(", "),
        }),
    }
}

pub fn suite() -> Vec<Problem> {
    SUITE.iter().map(|n| by_name(n).expect("suite problems build")).collect()
}

/// Well-conditioned dense 2-D quadratic.
pub fn quad_well() -> Result<Problem> {
    let q = Quadratic::new(vec![vec![2.0, 0.5], vec![0.5, 1.0]], vec![1.0, 1.0], 0.0)?;
    // A^{-1} b = (2/7, 6/7), f* = -b.x*/2 = -4/7
    let p = Problem::new("quad_well", vec![Arc::new(q)], FeasibleSet::whole_space(2)?, vec![3.0, -2.0])?;
    Ok(p.with_optimum(vec![2.0 / 7.0, 6.0 / 7.0], -4.0 / 7.0))
}

/// Ill-conditioned 10-D diagonal quadratic, eigenvalues log-spaced in [1, 100].
pub fn quad_ill() -> Result<Problem> {
    let n = 10;
    let diag: Vec<f64> = (0..n).map(|i| 10f64.powf(2.0 * i as f64 / 9.0)).collect();
    let x_star: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 }).collect();
    let b: Vec<f64> = diag.iter().zip(&x_star).map(|(d, x)| d * x).collect();
    let f_star = -0.5 * dot(&b, &x_star);
    let q = Quadratic::diagonal(&diag, b, 0.0)?;
    let p = Problem::new("quad_ill", vec![Arc::new(q)], FeasibleSet::whole_space(n)?, vec![1.0; n])?;
    Ok(p.with_optimum(x_star, f_star))
}

/// Box-constrained separable quadratic; the optimum is the clipped
/// unconstrained minimizer (1, 1).
pub fn quad_box() -> Result<Problem> {
    let q = Quadratic::diagonal(&[1.0, 10.0], vec![1.0, 10.0], 0.0)?;
    let set = FeasibleSet::boxed(vec![-1.0, -1.0], vec![0.5, 0.6])?;
    let x_star = vec![0.5, 0.6];
    let f_star = 0.5 * 0.25 - 0.5 + 0.5 * 10.0 * 0.36 - 6.0;
    let p = Problem::new("quad_box", vec![Arc::new(q)], set, vec![-1.0, -1.0])?;
    Ok(p.with_optimum(x_star, f_star))
}

/// Same curvature as `quad_box`, but the minimizer `(0.3, 0.2)` lies inside
/// `[-1, 1]^2`, so projected noisy steps do not pin the iterates to a vertex.
pub fn quad_box_interior() -> Result<Problem> {
    let q = Quadratic::diagonal(&[1.0, 10.0], vec![0.3, 2.0], 0.0)?;
    let set = FeasibleSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0])?;
    // f* = -b.x*/2 = -(0.09 + 0.4)/2
    let p = Problem::new("quad_box_interior", vec![Arc::new(q)], set, vec![-1.0, -1.0])?;
    Ok(p.with_optimum(vec![0.3, 0.2], -0.245))
}

/// Smoothed `max_j |x_j - c_j|` in 3-D: rows `+-e_j`, sigma = 1/2.
/// By symmetry the minimizer is `c` with value `sigma ln 6`.
pub fn lse() -> Result<Problem> {
    let c = [0.3, -0.2, 0.5];
    let sigma = 0.5;
    let mut rows = Vec::new();
    let mut offsets = Vec::new();
    for (j, cj) in c.iter().enumerate() {
        for sign in [1.0, -1.0] {
            let mut r = vec![0.0; 3];
            r[j] = sign;
            rows.push(r);
            offsets.push(sign * cj);
        }
    }
    let f = LogSumExp::new(rows, offsets, sigma)?;
    let p = Problem::new("lse", vec![Arc::new(f)], FeasibleSet::whole_space(3)?, vec![2.0, 2.0, -2.0])?;
    Ok(p.with_optimum(c.to_vec(), sigma * 6f64.ln()))
}

/// `max{(x - 1)^2, (x + 1)^2}`: optimum 1 at 0.
pub fn maxquad_1d() -> Result<Problem> {
    let f1 = Quadratic::diagonal(&[2.0], vec![2.0], 1.0)?;
    let f2 = Quadratic::diagonal(&[2.0], vec![-2.0], 1.0)?;
    let p = Problem::new(
        "maxquad_1d",
        vec![Arc::new(f1), Arc::new(f2)],
        FeasibleSet::whole_space(1)?,
        vec![3.0],
    )?;
    Ok(p.with_optimum(vec![0.0], 1.0))
}

/// `max_j 1/2 ||x - p_j||^2` for the vertices of an equilateral triangle
/// centred at the origin: optimum 1/2 at 0.
pub fn maxquad_2d() -> Result<Problem> {
    let s3 = 3f64.sqrt() / 2.0;
    let points = [[1.0, 0.0], [-0.5, s3], [-0.5, -s3]];
    let comps: Vec<SharedFunction> = points
        .iter()
        .map(|p| {
            let c = 0.5 * (p[0] * p[0] + p[1] * p[1]);
            Arc::new(Quadratic::diagonal(&[1.0, 1.0], p.to_vec(), c).expect("valid")) as SharedFunction
        })
        .collect();
    let p = Problem::new("maxquad_2d", comps, FeasibleSet::whole_space(2)?, vec![2.0, 1.0])?;
    Ok(p.with_optimum(vec![0.0, 0.0], 0.5))
}

/// `1/2 ||x - c||^2` on the probability simplex with the entropy prox. The
/// optimum is the simplex projection `c - (sum c - 1)/3`. `L = 1` in the
/// l1/l-inf pair since `||x - y||_inf <= ||x - y||_1`.
pub fn simplex_quad() -> Result<Problem> {
    let c = vec![0.8, 0.5, 0.4];
    let shift = 0.7 / 3.0;
    let x_star: Vec<f64> = c.iter().map(|v| v - shift).collect();
    let f_star = 0.5 * 3.0 * shift * shift;
    let b = c.clone();
    let q = Quadratic::diagonal(&[1.0, 1.0, 1.0], b, 0.5 * dot(&c, &c))?;
    let p = Problem::new(
        "simplex_quad",
        vec![Arc::new(q)],
        FeasibleSet::simplex(3)?,
        vec![1.0 / 3.0; 3],
    )?;
    Ok(p.with_prox(ProxSetup::entropy_simplex())
        .with_lipschitz(1.0)
        .with_optimum(x_star, f_star))
}

/// Reference optimum: the recorded analytic one, or a certified linear solve
/// for an unconstrained single quadratic.
pub fn reference_optimum(problem: &Problem) -> Result<Optimum> {
    if let Some(opt) = &problem.optimum {
        return Ok(opt.clone());
    }
    let unsupported = || Error::Capability {
        combination: format!("reference optimum for `{}`", problem.name),
        supported: "suite problems with analytic optima; unconstrained single quadratics (linear solve)".into(),
    };
    if problem.count() != 1
        || problem.composite != Composite::Zero
        || !matches!(problem.feasible, FeasibleSet::WholeSpace { .. })
    {
        return Err(unsupported());
    }
    let q = problem.components[0].as_quadratic().ok_or_else(unsupported)?;
    let x = solve_dense(q.matrix().to_vec(), q.linear().to_vec())
        .ok_or_else(|| Error::Precondition("quadratic matrix is singular".into()))?;
    let residual = norm_inf(&sub(&mat_vec(q.matrix(), &x), q.linear()));
    if residual > 1e-10 {
        return Err(Error::Precondition(format!(
            "linear-solve residual {residual:e} exceeds 1e-10"
        )));
    }
    let value = -0.5 * dot(q.linear(), &x) + q.constant();
    Ok(Optimum { x, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::central_difference;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_in(problem: &Problem, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = problem.dim();
        match &problem.feasible {
            FeasibleSet::Simplex { .. } => {
                let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / s).collect()
            }
            FeasibleSet::Box { lower, upper } => (0..n)
                .map(|i| rng.random_range(lower[i]..=upper[i]))
                .collect(),
            _ => (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
        }
    }

    #[test]
    fn suite_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in suite() {
            for f in &p.components {
                for _ in 0..100 {
                    let x = sample_in(&p, &mut rng);
                    let g = f.gradient(&x);
                    let fd = central_difference(f.as_ref(), &x, 1e-6);
                    let scale = 1.0 + crate::linalg::norm2(&g);
                    for (a, b) in g.iter().zip(&fd) {
                        assert!((a - b).abs() <= 1e-5 * scale, "{}: {a} vs {b}", p.name);
                    }
                }
            }
        }
    }

    #[test]
    fn certified_lipschitz_satisfies_descent_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in suite() {
            for _ in 0..10_000 {
                let x = sample_in(&p, &mut rng);
                let y = sample_in(&p, &mut rng);
                let d = sub(&x, &y);
                let norm = p.prox.norm(&d);
                for f in &p.components {
                    let (fy, gy) = f.eval(&y);
                    let rhs = fy + dot(&gy, &d) + 0.5 * p.lipschitz * norm * norm;
                    assert!(f.value(&x) <= rhs + 1e-10 * (1.0 + rhs.abs()), "{}", p.name);
                }
            }
        }
    }

    #[test]
    fn analytic_optima_are_optimal() {
        for p in suite() {
            let opt = p.optimum.clone().unwrap();
            assert!(p.feasible.contains(&opt.x, 1e-12), "{}", p.name);
            assert!((p.value(&opt.x) - opt.value).abs() < 1e-12, "{}", p.name);
            // no random feasible point does better
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..2000 {
                let x = sample_in(&p, &mut rng);
                assert!(p.value(&x) >= opt.value - 1e-12, "{}", p.name);
            }
        }
    }

    #[test]
    fn reference_optimum_examples() {
        let q = Quadratic::diagonal(&[1.0, 1.0], vec![0.0, 0.0], 0.0).unwrap();
        let p = Problem::new("id", vec![Arc::new(q)], FeasibleSet::whole_space(2).unwrap(), vec![1.0, 1.0]).unwrap();
        let opt = reference_optimum(&p).unwrap();
        assert_eq!(opt.x, vec![0.0, 0.0]);
        assert_eq!(opt.value, 0.0);

        let q = Quadratic::diagonal(&[1.0, 10.0], vec![1.0, 10.0], 0.0).unwrap();
        let p = Problem::new("d", vec![Arc::new(q)], FeasibleSet::whole_space(2).unwrap(), vec![0.0, 0.0]).unwrap();
        let opt = reference_optimum(&p).unwrap();
        assert!((opt.x[0] - 1.0).abs() < 1e-15 && (opt.x[1] - 1.0).abs() < 1e-15);
        assert!((opt.value + 5.5).abs() < 1e-14);

        let m = maxquad_1d().unwrap();
        let opt = reference_optimum(&m).unwrap();
        assert_eq!((opt.x[0], opt.value), (0.0, 1.0));
        // grid search agrees with the symmetry argument
        let (mut bx, mut bv) = (0.0, f64::INFINITY);
        for i in 0..=20_000 {
            let x = -2.0 + 4.0 * i as f64 / 20_000.0;
            let v = m.value(&[x]);
            if v < bv {
                bv = v;
                bx = x;
            }
        }
        assert!(bx.abs() < 1e-3 && (bv - 1.0).abs() < 1e-6);

        let mut no_opt = maxquad_2d().unwrap();
        no_opt.optimum = None;
        assert!(matches!(reference_optimum(&no_opt), Err(Error::Capability { .. })));
        assert!(by_name("nope").is_err());
    }

    #[test]
    fn well_conditioned_quadratic_optimum_by_linear_solve() {
        let mut p = quad_well().unwrap();
        let stored = p.optimum.take().unwrap();
        let opt = reference_optimum(&p).unwrap();
        assert!((opt.value - stored.value).abs() < 1e-15);
        for (a, b) in opt.x.iter().zip(&stored.x) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
