//! Bregman-proximal subproblems:
//! `argmin_{x in Q} V(x, u) + alpha * (model(x) + h(x))` for a single
//! linearization or the max of several.

use crate::composite::Composite;
use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::linalg::{dot, project_simplex, solve_dense, sub};
use crate::prox::{ProxKind, ProxSetup, ENTROPY_FLOOR};

const SUPPORTED: &str = "euclidean x {whole_space, box, ball, simplex}, entropy_simplex x {simplex}, \
scaled_euclidean_L x {whole_space}; h in {zero, affine} everywhere, h in {l1, squared_l2} only for \
separable geometries (euclidean whole_space/box, scaled_euclidean_L whole_space)";

/// Iteration cap of the dual solver for the max-of-linearizations subproblem.
pub const DUAL_MAX_ITER: usize = 10_000;
/// Duality gap accepted as converged.
pub const DUAL_GAP_TOL: f64 = 1e-10;

/// Linearizations `f_j(y) + <grad f_j(y), x - y>` anchored at `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    anchor: Vec<f64>,
    values: Vec<f64>,
    gradients: Vec<Vec<f64>>,
}

impl LinearModel {
    pub fn new(anchor: Vec<f64>, values: Vec<f64>, gradients: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() || values.len() != gradients.len() {
            return Err(Error::Argument(format!(
                "linear model needs M >= 1 values and as many gradients, got {} and {}",
                values.len(),
                gradients.len()
            )));
        }
        if gradients.iter().any(|g| g.len() != anchor.len()) {
            return Err(Error::Argument("gradient dimension differs from anchor".into()));
        }
        Ok(Self {
            anchor,
            values,
            gradients,
        })
    }

    pub fn single(anchor: Vec<f64>, value: f64, gradient: Vec<f64>) -> Result<Self> {
        Self::new(anchor, vec![value], vec![gradient])
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gradients(&self) -> &[Vec<f64>] {
        &self.gradients
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    /// Value of the j-th linearization at `x`.
    pub fn piece(&self, j: usize, x: &[f64]) -> f64 {
        self.values[j] + dot(&self.gradients[j], &sub(x, &self.anchor))
    }

    /// `max_j [f_j(y) + <g_j, x - y>]`.
    pub fn eval_max(&self, x: &[f64]) -> f64 {
        (0..self.count())
            .map(|j| self.piece(j, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn capability(setup: &ProxSetup, set: &FeasibleSet, h: &Composite) -> Error {
    Error::Capability {
        combination: format!("({}, {}, h={})", setup.name(), set.name(), h.name()),
        supported: SUPPORTED.into(),
    }
}

fn check_inputs(set: &FeasibleSet, u: &[f64], g: &[f64], alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Argument(format!("alpha must be positive, got {alpha}")));
    }
    if u.len() != set.dim() || g.len() != set.dim() {
        return Err(Error::Argument(format!(
            "dimension mismatch: set {}, u {}, g {}",
            set.dim(),
            u.len(),
            g.len()
        )));
    }
    Ok(())
}

/// Single-linearization Bregman prox step:
/// `argmin_{x in Q} V(x, u) + alpha * (<g, x> + h(x))`.
pub fn prox_step(
    setup: &ProxSetup,
    set: &FeasibleSet,
    u: &[f64],
    g: &[f64],
    alpha: f64,
    h: &Composite,
) -> Result<Vec<f64>> {
    check_inputs(set, u, g, alpha)?;
    if let Some(c) = h.linear_part() {
        if c.len() != g.len() {
            return Err(Error::Argument("affine h has wrong dimension".into()));
        }
    }
    // effective linear coefficient of the i-th coordinate
    let lin = |i: usize| match h.linear_part() {
        Some(c) => g[i] + c[i],
        None => g[i],
    };
    match (setup.kind(), set) {
        (ProxKind::Euclidean, FeasibleSet::WholeSpace { .. }) => Ok((0..u.len())
            .map(|i| h.prox_coord(u[i] - alpha * lin(i), alpha))
            .collect()),
        (ProxKind::ScaledEuclidean { lipschitz }, FeasibleSet::WholeSpace { .. }) => {
            let t = alpha / lipschitz;
            Ok((0..u.len())
                .map(|i| h.prox_coord(u[i] - t * lin(i), t))
                .collect())
        }
        (ProxKind::Euclidean, FeasibleSet::Box { lower, upper }) => Ok((0..u.len())
            .map(|i| {
                h.prox_coord(u[i] - alpha * lin(i), alpha)
                    .clamp(lower[i], upper[i])
            })
            .collect()),
        (ProxKind::Euclidean, FeasibleSet::Ball { .. } | FeasibleSet::Simplex { .. })
            if h.is_linear() =>
        {
            let z: Vec<f64> = (0..u.len()).map(|i| u[i] - alpha * lin(i)).collect();
            Ok(set.project(&z))
        }
        (ProxKind::EntropySimplex, FeasibleSet::Simplex { .. }) if h.is_linear() => {
            // x_i proportional to u_i exp(-alpha * lin_i), evaluated in log space
            let logits: Vec<f64> = (0..u.len())
                .map(|i| u[i].max(ENTROPY_FLOOR).ln() - alpha * lin(i))
                .collect();
            let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
            let s: f64 = w.iter().sum();
            Ok(w.into_iter().map(|v| v / s).collect())
        }
        _ => Err(capability(setup, set, h)),
    }
}

/// Objective of the minimax subproblem at `x`.
pub fn minimax_objective(
    setup: &ProxSetup,
    u: &[f64],
    model: &LinearModel,
    alpha: f64,
    h: &Composite,
    x: &[f64],
) -> Result<f64> {
    Ok(setup.bregman(x, u)? + alpha * (model.eval_max(x) + h.value(x)))
}

/// Max-of-linearizations Bregman prox step:
/// `argmin_{x in Q} V(x, u) + alpha * (max_j [v_j + <g_j, x - y>] + h(x))`.
///
/// With one piece this is exactly [`prox_step`]. Otherwise the concave dual
/// over the M-simplex of weights is maximized by accelerated projected
/// gradient ascent; each dual evaluation is one [`prox_step`]. When the prox
/// map is affine in the linear term (whole space, `h` zero or affine) the
/// active pieces are identified from the dual iterate and the KKT system is
/// solved exactly.
pub fn minimax_prox_step(
    setup: &ProxSetup,
    set: &FeasibleSet,
    u: &[f64],
    model: &LinearModel,
    alpha: f64,
    h: &Composite,
) -> Result<Vec<f64>> {
    if model.count() == 1 {
        return prox_step(setup, set, u, &model.gradients[0], alpha, h);
    }
    check_inputs(set, u, model.anchor(), alpha)?;
    if let Some(x) = polish(setup, set, u, model, alpha, h, &[], &[])? {
        return Ok(x);
    }
    let m = model.count();
    let combined = |lambda: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; u.len()];
        for (w, gj) in lambda.iter().zip(&model.gradients) {
            for (acc, v) in g.iter_mut().zip(gj) {
                *acc += w * v;
            }
        }
        g
    };
    // dual gradient alpha * l_j(x(lambda)) and the gap max_j l_j - sum lambda_j l_j
    let dual_info = |lambda: &[f64]| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let x = prox_step(setup, set, u, &combined(lambda), alpha, h)?;
        let pieces: Vec<f64> = (0..m).map(|j| model.piece(j, &x)).collect();
        let top = pieces.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let avg: f64 = pieces.iter().zip(lambda).map(|(p, w)| p * w).sum();
        let gap = alpha * (top - avg).max(0.0);
        let grad = pieces.iter().map(|p| alpha * p).collect();
        Ok((x, grad, gap))
    };

    let dual_lip = {
        let s: f64 = model
            .gradients
            .iter()
            .map(|g| setup.dual_norm(g).powi(2))
            .sum();
        (alpha * alpha * s).max(1e-300)
    };
    let step = 1.0 / dual_lip;

    let mut lambda = vec![1.0 / m as f64; m];
    let mut momentum_point = lambda.clone();
    let mut t = 1.0f64;
    let (mut best_x, _, mut best_gap) = dual_info(&lambda)?;
    let mut best_lambda = lambda.clone();
    let mut prev_dual = f64::NEG_INFINITY;
    let scale = |x: &[f64]| -> Result<f64> {
        Ok(1.0f64.max(minimax_objective(setup, u, model, alpha, h, x)?.abs()))
    };
    let mut tol = DUAL_GAP_TOL * scale(&best_x)?;
    let exact_tol = 1e-15 * scale(&best_x)?;

    let mut iter = 0;
    while iter < DUAL_MAX_ITER && best_gap > exact_tol {
        iter += 1;
        let (_, grad_m, _) = dual_info(&momentum_point)?;
        let ascent: Vec<f64> = momentum_point
            .iter()
            .zip(&grad_m)
            .map(|(l, g)| l + step * g)
            .collect();
        let next = project_simplex(&ascent);
        let (x_n, _, gap_n) = dual_info(&next)?;
        if gap_n < best_gap {
            best_gap = gap_n;
            best_x = x_n.clone();
            best_lambda = next.clone();
        }
        // dual value at `next`, used for the adaptive restart test
        let dual_val = setup.bregman(&x_n, u)?
            + alpha
                * (next
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * model.piece(j, &x_n))
                    .sum::<f64>()
                    + h.value(&x_n));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if dual_val < prev_dual {
            // restart momentum
            t = 1.0;
            momentum_point = next.clone();
        } else {
            let beta = (t - 1.0) / t_next;
            momentum_point = next
                .iter()
                .zip(&lambda)
                .map(|(a, b)| a + beta * (a - b))
                .collect();
            t = t_next;
        }
        prev_dual = dual_val;
        lambda = next;
        if iter % 64 == 0 {
            tol = DUAL_GAP_TOL * scale(&best_x)?;
            if best_gap <= tol {
                if let Some(x) = polish(setup, set, u, model, alpha, h, &best_lambda, &best_x)? {
                    return Ok(x);
                }
            }
        }
    }
    if let Some(x) = polish(setup, set, u, model, alpha, h, &best_lambda, &best_x)? {
        return Ok(x);
    }
    if best_gap <= tol {
        Ok(best_x)
    } else {
        Err(Error::Subproblem {
            best: best_x,
            residual: best_gap,
        })
    }
}

/// Models with at most this many pieces get an exhaustive active-set search.
const EXHAUSTIVE_PIECES: usize = 12;

/// Exact active-set solve for geometries where the prox map is
/// `x = u - t * (G^T lambda + c)`. Returns `None` when not applicable or the
/// candidate fails its KKT check.
#[allow(clippy::too_many_arguments)]
fn polish(
    setup: &ProxSetup,
    set: &FeasibleSet,
    u: &[f64],
    model: &LinearModel,
    alpha: f64,
    h: &Composite,
    lambda: &[f64],
    approx: &[f64],
) -> Result<Option<Vec<f64>>> {
    let t = match (setup.kind(), set) {
        (ProxKind::Euclidean, FeasibleSet::WholeSpace { .. }) => alpha,
        (ProxKind::ScaledEuclidean { lipschitz }, FeasibleSet::WholeSpace { .. }) => {
            alpha / lipschitz
        }
        _ => return Ok(None),
    };
    if !h.is_linear() {
        return Ok(None);
    }
    let m = model.count();
    let candidates: Vec<Vec<usize>> = if m <= EXHAUSTIVE_PIECES {
        // every nonempty active set, smallest first; the KKT check below is
        // sufficient, so the first survivor is the minimizer
        let mut all: Vec<Vec<usize>> = (1u32..(1 << m))
            .map(|mask| (0..m).filter(|j| mask & (1 << j) != 0).collect())
            .collect();
        all.sort_by_key(|s: &Vec<usize>| s.len());
        all
    } else if approx.is_empty() {
        return Ok(None);
    } else {
        let pieces: Vec<f64> = (0..m).map(|j| model.piece(j, approx)).collect();
        let top = pieces.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let spread = 1.0 + top.abs();
        // near-maximal pieces, with and without those whose weight is tiny
        let near: Vec<usize> = (0..m).filter(|&j| top - pieces[j] <= 1e-6 * spread).collect();
        let weighted: Vec<usize> = near.iter().cloned().filter(|&j| lambda[j] > 1e-12).collect();
        let mut c = vec![near.clone()];
        if !weighted.is_empty() && weighted.len() != near.len() {
            c.push(weighted);
        }
        c
    };
    let base: Vec<f64> = match h.linear_part() {
        Some(c) => (0..u.len()).map(|i| u[i] - t * c[i]).collect(),
        None => u.to_vec(),
    };
    let n = u.len();
    let y = model.anchor();
    for active in candidates {
        let s = active.len();
        // unknowns (x, lambda_S, level):
        //   x + t sum_S lambda_i g_i = base   (rows divided by t when t > 1)
        //   <g_j, x> - level = <g_j, y> - v_j  for j in S
        //   sum_S lambda_i = 1
        let size = n + s + 1;
        let (cx, cl) = if t > 1.0 { (1.0 / t, 1.0) } else { (1.0, t) };
        let mut mat = vec![vec![0.0; size]; size];
        let mut rhs = vec![0.0; size];
        for i in 0..n {
            mat[i][i] = cx;
            for (c, &j) in active.iter().enumerate() {
                mat[i][n + c] = cl * model.gradients[j][i];
            }
            rhs[i] = cx * base[i];
        }
        for (r, &j) in active.iter().enumerate() {
            let g = &model.gradients[j];
            mat[n + r][..n].copy_from_slice(g);
            mat[n + r][n + s] = -1.0;
            rhs[n + r] = dot(g, y) - model.values[j];
        }
        for c in 0..s {
            mat[n + s][n + c] = 1.0;
        }
        rhs[n + s] = 1.0;
        let Some(sol) = solve_dense(mat, rhs) else {
            continue;
        };
        if sol[n..n + s].iter().any(|w| *w < -1e-12) || sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let x = sol[..n].to_vec();
        let vals: Vec<f64> = (0..m).map(|j| model.piece(j, &x)).collect();
        let level = active
            .iter()
            .map(|&j| vals[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let inactive_ok = (0..m)
            .filter(|j| !active.contains(j))
            .all(|j| vals[j] <= level + 1e-13 * (1.0 + level.abs()));
        if inactive_ok {
            if approx.is_empty() {
                return Ok(Some(x));
            }
            // keep the polished point only if it is at least as good
            let fo = minimax_objective(setup, u, model, alpha, h, &x)?;
            let fa = minimax_objective(setup, u, model, alpha, h, approx)?;
            if fo <= fa + 1e-14 * (1.0 + fa.abs()) {
                return Ok(Some(x));
            }
        }
    }
    Ok(None)
}
