//! Smooth convex building blocks `f` with analytic gradients and certified
//! gradient-Lipschitz constants.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{dot, mat_vec, norm2};

/// A smooth convex function with an analytic gradient.
pub trait SmoothFunction: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Certified Lipschitz constant of the gradient in the Euclidean norm.
    fn lipschitz(&self) -> f64;

    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.value(x), self.gradient(x))
    }

    fn as_quadratic(&self) -> Option<&Quadratic> {
        None
    }
}

pub type SharedFunction = Arc<dyn SmoothFunction>;

/// `f(x) = 1/2 x^T A x - b^T x + c` with `A` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: f64,
    lipschitz: f64,
}

impl Quadratic {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>, c: f64) -> Result<Self> {
        let n = b.len();
        if n == 0 || a.len() != n || a.iter().any(|r| r.len() != n) {
            return Err(Error::Argument("quadratic needs a square n x n matrix and length-n b".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if (a[i][j] - a[j][i]).abs() > 1e-12 * (1.0 + a[i][j].abs()) {
                    return Err(Error::Argument("quadratic matrix must be symmetric".into()));
                }
            }
        }
        let lipschitz = largest_eigenvalue(&a)?;
        Ok(Self { a, b, c, lipschitz })
    }

    pub fn diagonal(diag: &[f64], b: Vec<f64>, c: f64) -> Result<Self> {
        let n = diag.len();
        let a = (0..n)
            .map(|i| (0..n).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
            .collect();
        Self::new(a, b, c)
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn linear(&self) -> &[f64] {
        &self.b
    }

    pub fn constant(&self) -> f64 {
        self.c
    }
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &mat_vec(&self.a, x)) - dot(&self.b, x) + self.c
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.a, x)
            .into_iter()
            .zip(&self.b)
            .map(|(ax, b)| ax - b)
            .collect()
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn as_quadratic(&self) -> Option<&Quadratic> {
        Some(self)
    }
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration, iterated
/// until the Rayleigh quotient is stable to 1e-10 relative over a window.
/// The iteration starts from a fixed non-degenerate vector so the result is
/// reproducible.
pub fn largest_eigenvalue(a: &[Vec<f64>]) -> Result<f64> {
    let n = a.len();
    // diagonal matrices are exact
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || a[i][j] == 0.0));
    if diagonal {
        return Ok((0..n).map(|i| a[i][i]).fold(0.0, f64::max));
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    let mut stable = 0;
    for _ in 0..1_000_000 {
        let w = mat_vec(a, &v);
        let next = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        v = w.into_iter().map(|x| x / nw).collect();
        if (next - lambda).abs() <= 1e-13 * next.abs().max(1e-300) {
            stable += 1;
            if stable >= 20 {
                return Ok(next);
            }
        } else {
            stable = 0;
        }
        lambda = next;
    }
    Err(Error::Precondition(
        "power iteration did not certify the largest eigenvalue".into(),
    ))
}

/// `f(x) = <c, x> + c0`.
#[derive(Debug, Clone)]
pub struct Affine {
    pub c: Vec<f64>,
    pub c0: f64,
}

impl SmoothFunction for Affine {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        dot(&self.c, x) + self.c0
    }

    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        self.c.clone()
    }

    fn lipschitz(&self) -> f64 {
        0.0
    }
}

/// Smoothed maximum `f(x) = sigma * ln sum_i exp((<a_i, x> - b_i) / sigma)`.
///
/// Its Hessian is `(1/sigma) (sum w_i a_i a_i^T - g g^T)` with softmax
/// weights `w`, bounded by `max_i ||a_i||^2 / sigma`.
#[derive(Debug, Clone)]
pub struct LogSumExp {
    rows: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    sigma: f64,
}

impl LogSumExp {
    pub fn new(rows: Vec<Vec<f64>>, offsets: Vec<f64>, sigma: f64) -> Result<Self> {
        if rows.is_empty() || rows.len() != offsets.len() || !(sigma > 0.0) {
            return Err(Error::Argument(
                "log-sum-exp needs >= 1 rows, matching offsets and sigma > 0".into(),
            ));
        }
        let n = rows[0].len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Argument("log-sum-exp rows must share a positive dimension".into()));
        }
        Ok(Self {
            rows,
            offsets,
            sigma,
        })
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.offsets)
            .map(|(r, b)| (dot(r, x) - b) / self.sigma)
            .collect()
    }

    fn weights(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let z = self.logits(x);
        let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - top).exp()).collect();
        let s: f64 = e.iter().sum();
        (self.sigma * (top + s.ln()), e.into_iter().map(|v| v / s).collect())
    }
}

impl SmoothFunction for LogSumExp {
    fn dim(&self) -> usize {
        self.rows[0].len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.weights(x).0
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let (_, w) = self.weights(x);
        let mut g = vec![0.0; self.dim()];
        for (wi, r) in w.iter().zip(&self.rows) {
            for (gj, rj) in g.iter_mut().zip(r) {
                *gj += wi * rj;
            }
        }
        g
    }

    fn lipschitz(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| dot(r, r))
            .fold(0.0, f64::max)
            / self.sigma
    }
}

/// `f(x) - shift`, used to centre an objective on its optimal value.
#[derive(Debug, Clone)]
pub struct Shifted {
    pub inner: SharedFunction,
    pub shift: f64,
}

impl SmoothFunction for Shifted {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x) - self.shift
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.inner.gradient(x)
    }

    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz()
    }
}

/// Central finite-difference gradient, used to audit analytic gradients.
pub fn central_difference(f: &dyn SmoothFunction, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (f.value(&xp) - f.value(&xm)) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_norm_squared() {
        let f = Quadratic::diagonal(&[1.0, 1.0], vec![0.0, 0.0], 0.0).unwrap();
        let (v, g) = f.eval(&[3.0, 4.0]);
        assert_eq!(v, 12.5);
        assert_eq!(g, vec![3.0, 4.0]);
    }

    #[test]
    fn affine_eval() {
        let f = Affine {
            c: vec![2.0, -1.0],
            c0: 0.0,
        };
        assert_eq!(f.eval(&[1.5, 2.0]), (1.0, vec![2.0, -1.0]));
    }

    #[test]
    fn log_sum_exp_of_zero_rows() {
        let m = 4;
        let f = LogSumExp::new(vec![vec![0.0, 0.0]; m], vec![0.0; m], 1.0).unwrap();
        let (v, g) = f.eval(&[0.0, 0.0]);
        assert!((v - (m as f64).ln()).abs() < 1e-15);
        assert_eq!(g, vec![0.0, 0.0]);
        // non-trivial rows: gradient is the softmax-weighted row average
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]];
        let f = LogSumExp::new(rows, vec![0.0; 3], 1.0).unwrap();
        let (v, g) = f.eval(&[0.0, 0.0]);
        assert!((v - 3f64.ln()).abs() < 1e-15);
        let fd = central_difference(&f, &[0.0, 0.0], 1e-6);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-8);
            assert!(a.abs() < 1e-15);
        }
    }

    #[test]
    fn power_iteration_on_dense_matrix() {
        // eigenvalues of [[2, 1], [1, 2]] are 1 and 3
        let l = largest_eigenvalue(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!((l - 3.0).abs() <= 1e-10 * 3.0);
        // [[2, .5], [.5, 1]]: (3 + sqrt(2)) / 2
        let l = largest_eigenvalue(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let exact = (3.0 + 2f64.sqrt()) / 2.0;
        assert!((l - exact).abs() <= 1e-10 * exact);
    }

    #[test]
    fn rejects_asymmetric() {
        assert!(Quadratic::new(vec![vec![1.0, 2.0], vec![0.0, 1.0]], vec![0.0, 0.0], 0.0).is_err());
    }
}
