//! Simulated first-order oracles: exact, (delta, L)-inexact, mini-batched
//! stochastic, and directional / finite-difference estimators.
//!
//! All randomness comes from ChaCha8 streams. A stream is addressed by
//! `(seed, key)`, so solvers can pull the draws of step `k`, retry `j`
//! independently of how many draws earlier steps consumed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::functions::SharedFunction;
use crate::functions::SmoothFunction;
use crate::linalg::{dot, norm2};

/// Independent generator for `(seed, key)`.
pub fn substream(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// Stream key of draw batch `retry` at solver step `step`. Key 0 is left to
/// the sequential per-oracle generator.
pub fn step_key(step: usize, retry: u32) -> u64 {
    1 + (((step as u64) << 16) | retry as u64)
}

/// Exact value and gradient.
pub fn exact_eval(f: &dyn SmoothFunction, x: &[f64]) -> (f64, Vec<f64>) {
    f.eval(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    /// `f_delta = f`.
    Zero,
    /// `f_delta = f - delta`.
    Constant,
    /// `f_delta = f - zeta(y) delta`, `zeta` a deterministic hash of `(seed, y)`
    /// in `[0, 1)`.
    SeededRandom,
}

/// (delta, L)-oracle built by lowering function values by at most `delta`
/// while returning the exact gradient. For every x, y:
/// `0 <= f(x) - f_delta(y) - <grad, x - y> <= L/2 ||x - y||^2 + delta`.
#[derive(Debug, Clone)]
pub struct DeltaLOracle {
    function: SharedFunction,
    delta: f64,
    mode: Perturbation,
    seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl DeltaLOracle {
    pub fn new(function: SharedFunction, delta: f64, mode: Perturbation, seed: u64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Argument(format!("delta must be finite and >= 0, got {delta}")));
        }
        Ok(Self {
            function,
            delta,
            mode,
            seed,
        })
    }

    pub fn exact(function: SharedFunction) -> Self {
        Self {
            function,
            delta: 0.0,
            mode: Perturbation::Zero,
            seed: 0,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mode(&self) -> Perturbation {
        self.mode
    }

    pub fn function(&self) -> &SharedFunction {
        &self.function
    }

    pub fn dim(&self) -> usize {
        self.function.dim()
    }

    fn zeta(&self, y: &[f64]) -> f64 {
        match self.mode {
            Perturbation::Zero => 0.0,
            Perturbation::Constant => 1.0,
            Perturbation::SeededRandom => {
                let h = y
                    .iter()
                    .fold(splitmix64(self.seed), |acc, v| splitmix64(acc ^ v.to_bits()));
                (h >> 11) as f64 / (1u64 << 53) as f64
            }
        }
    }

    /// `f_delta(y)` alone.
    pub fn value(&self, y: &[f64]) -> f64 {
        let f = self.function.value(y);
        if self.delta == 0.0 {
            f
        } else {
            f - self.zeta(y) * self.delta
        }
    }

    /// `(f_delta(y), grad f_delta(y))`.
    pub fn delta_eval(&self, y: &[f64]) -> (f64, Vec<f64>) {
        (self.value(y), self.function.gradient(y))
    }
}

/// Mini-batched stochastic gradient `grad f_delta(y) + eta` with `eta`
/// uniform in direction and radius `sqrt(D) U`, `U ~ U[0, 1]`. The noise is
/// zero-mean by symmetry and `||eta||^2 <= D`, so
/// `E exp(||eta||^2 / D) <= e` holds surely.
#[derive(Debug, Clone)]
pub struct StochasticOracle {
    inner: DeltaLOracle,
    variance: f64,
    seed: u64,
    rng: ChaCha8Rng,
}

impl StochasticOracle {
    pub fn new(inner: DeltaLOracle, variance: f64, seed: u64) -> Result<Self> {
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(Error::Argument(format!(
                "variance proxy D must be finite and >= 0, got {variance}"
            )));
        }
        Ok(Self {
            inner,
            variance,
            seed,
            rng: substream(seed, 0),
        })
    }

    pub fn inner(&self) -> &DeltaLOracle {
        &self.inner
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// One noise vector drawn from `rng`.
    pub fn noise<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.inner.dim();
        let dir = sphere_sample(rng, n);
        let radius = self.variance.sqrt() * rng.random::<f64>();
        dir.into_iter().map(|v| radius * v).collect()
    }

    /// One stochastic gradient from the sequential generator.
    pub fn stochastic_eval(&mut self, y: &[f64]) -> Vec<f64> {
        let mut rng = std::mem::replace(&mut self.rng, substream(0, 0));
        let g = self.batch_from(y, 1, &mut rng);
        self.rng = rng;
        g
    }

    /// Mean of `m` draws from the sequential generator.
    pub fn mini_batch_eval(&mut self, y: &[f64], m: usize) -> Result<Vec<f64>> {
        if m == 0 {
            return Err(Error::Argument("mini-batch size must be >= 1".into()));
        }
        let mut rng = std::mem::replace(&mut self.rng, substream(0, 0));
        let g = self.batch_from(y, m, &mut rng);
        self.rng = rng;
        Ok(g)
    }

    /// Mean of `m` draws from the stream of `(step, retry)`; does not touch
    /// the sequential generator.
    pub fn mini_batch_keyed(&self, y: &[f64], m: usize, step: usize, retry: u32) -> Result<Vec<f64>> {
        if m == 0 {
            return Err(Error::Argument("mini-batch size must be >= 1".into()));
        }
        let mut rng = substream(self.seed, step_key(step, retry));
        Ok(self.batch_from(y, m, &mut rng))
    }

    fn batch_from<R: Rng>(&self, y: &[f64], m: usize, rng: &mut R) -> Vec<f64> {
        let mut grad = self.inner.function.gradient(y);
        if self.variance == 0.0 {
            return grad;
        }
        let mut sum = vec![0.0; grad.len()];
        for _ in 0..m {
            for (s, v) in sum.iter_mut().zip(self.noise(rng)) {
                *s += v;
            }
        }
        for (g, s) in grad.iter_mut().zip(sum) {
            *g += s / m as f64;
        }
        grad
    }
}

/// Uniform point on the unit sphere `S^{n-1}` (normalized Gaussian).
pub fn sphere_sample<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = norm2(&v);
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionKind {
    UniformSphere,
    UniformCoordinate,
}

/// Random unit directions `e` with `E e e^T = I / n`.
#[derive(Debug, Clone)]
pub struct DirectionScheme {
    kind: DirectionKind,
    dim: usize,
    seed: u64,
    rng: ChaCha8Rng,
}

impl DirectionScheme {
    pub fn new(kind: DirectionKind, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("direction dimension must be >= 1".into()));
        }
        Ok(Self {
            kind,
            dim,
            seed,
            rng: substream(seed, 0),
        })
    }

    pub fn kind(&self) -> DirectionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample_with<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self.kind {
            DirectionKind::UniformSphere => sphere_sample(rng, self.dim),
            DirectionKind::UniformCoordinate => {
                let i = rng.random_range(0..self.dim);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let mut e = vec![0.0; self.dim];
                e[i] = sign;
                e
            }
        }
    }

    /// Next direction from the sequential generator.
    pub fn sample_direction(&mut self) -> Vec<f64> {
        let mut rng = std::mem::replace(&mut self.rng, substream(0, 0));
        let e = self.sample_with(&mut rng);
        self.rng = rng;
        e
    }

    /// Generator for step `k`; the direction is its first draw.
    pub fn step_stream(&self, step: usize) -> ChaCha8Rng {
        substream(self.seed, step_key(step, 0))
    }
}

/// `n (<grad f(y), e> + noise) e`, requiring `|noise| <= delta`.
pub fn directional_eval(
    f: &dyn SmoothFunction,
    y: &[f64],
    e: &[f64],
    noise: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    if noise.abs() > delta {
        return Err(Error::Contract(format!(
            "directional noise {noise:e} exceeds bound {delta:e}"
        )));
    }
    let n = e.len() as f64;
    let s = n * (dot(&f.gradient(y), e) + noise);
    Ok(e.iter().map(|v| s * v).collect())
}

/// Forward-difference directional estimator
/// `(n / tau) (f(x + tau e) + d1 - f(x) - d2) e`, with `|d1|, |d2| <= delta`.
pub fn finite_diff_eval(
    f: &dyn SmoothFunction,
    x: &[f64],
    e: &[f64],
    tau: f64,
    d1: f64,
    d2: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Argument(format!("finite-difference step must be > 0, got {tau}")));
    }
    if d1.abs() > delta || d2.abs() > delta {
        return Err(Error::Contract(format!(
            "function-value noise ({d1:e}, {d2:e}) exceeds bound {delta:e}"
        )));
    }
    let shifted: Vec<f64> = x.iter().zip(e).map(|(a, b)| a + tau * b).collect();
    let slope = (f.value(&shifted) + d1 - f.value(x) - d2) / tau;
    let n = e.len() as f64;
    Ok(e.iter().map(|v| n * slope * v).collect())
}

/// Bound on the directional noise induced by a forward difference:
/// `L tau / 2 + 2 delta / tau`.
pub fn finite_diff_noise_bound(lipschitz: f64, tau: f64, delta: f64) -> f64 {
    lipschitz * tau / 2.0 + 2.0 * delta / tau
}

/// Step `tau = 2 sqrt(delta / L)` minimizing the bound above, which is then
/// `2 sqrt(L delta)`.
pub fn finite_diff_step(lipschitz: f64, delta: f64) -> f64 {
    2.0 * (delta / lipschitz).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{Affine, Quadratic};
    use std::sync::Arc;

    fn half_sq(n: usize) -> SharedFunction {
        Arc::new(Quadratic::diagonal(&vec![1.0; n], vec![0.0; n], 0.0).unwrap())
    }

    #[test]
    fn delta_eval_modes() {
        let f = half_sq(2);
        let y = [0.3, -1.2];
        let exact = DeltaLOracle::new(f.clone(), 0.0, Perturbation::SeededRandom, 5).unwrap();
        assert_eq!(exact.delta_eval(&y), exact_eval(f.as_ref(), &y));
        let c = DeltaLOracle::new(f.clone(), 0.25, Perturbation::Constant, 0).unwrap();
        assert_eq!(c.delta_eval(&y).0, f.value(&y) - 0.25);
        let r = DeltaLOracle::new(f.clone(), 0.25, Perturbation::SeededRandom, 17).unwrap();
        assert_eq!(r.delta_eval(&y), r.delta_eval(&y));
        let v = r.value(&y);
        assert!(v <= f.value(&y) && f.value(&y) <= v + 0.25);
        assert!(DeltaLOracle::new(f, -1.0, Perturbation::Zero, 0).is_err());
    }

    #[test]
    fn stochastic_zero_variance_is_exact() {
        let f = half_sq(3);
        let mut o = StochasticOracle::new(DeltaLOracle::exact(f.clone()), 0.0, 1).unwrap();
        let y = [1.0, 2.0, 3.0];
        assert_eq!(o.stochastic_eval(&y), f.gradient(&y));
        assert_eq!(o.mini_batch_eval(&y, 7).unwrap(), f.gradient(&y));
        assert!(o.mini_batch_eval(&y, 0).is_err());
        assert!(o.mini_batch_keyed(&y, 0, 1, 0).is_err());
    }

    #[test]
    fn single_batch_equals_single_draw() {
        let f = half_sq(3);
        let y = [0.5, 0.0, -0.5];
        let mut a = StochasticOracle::new(DeltaLOracle::exact(f.clone()), 2.0, 9).unwrap();
        let mut b = a.clone();
        assert_eq!(a.stochastic_eval(&y), b.mini_batch_eval(&y, 1).unwrap());
        // and the generators stay in lockstep
        assert_eq!(a.stochastic_eval(&y), b.stochastic_eval(&y));
    }

    #[test]
    fn noise_is_bounded_by_sqrt_d() {
        let f = half_sq(4);
        let d = 0.7;
        let o = StochasticOracle::new(DeltaLOracle::exact(f.clone()), d, 3).unwrap();
        let mut rng = substream(3, 99);
        for _ in 0..10_000 {
            let eta = o.noise(&mut rng);
            let sq = dot(&eta, &eta);
            assert!(sq <= d);
            assert!((sq / d).exp() <= std::f64::consts::E);
        }
    }

    #[test]
    fn directions_are_unit_and_coordinate_scheme_is_sparse() {
        for kind in [DirectionKind::UniformSphere, DirectionKind::UniformCoordinate] {
            let mut s = DirectionScheme::new(kind, 1, 4).unwrap();
            for _ in 0..20 {
                let e = s.sample_direction();
                assert!(e == vec![1.0] || e == vec![-1.0]);
            }
        }
        let mut s = DirectionScheme::new(DirectionKind::UniformCoordinate, 5, 4).unwrap();
        for _ in 0..100 {
            let e = s.sample_direction();
            assert_eq!(e.iter().filter(|v| **v != 0.0).count(), 1);
            assert_eq!(e.iter().map(|v| v.abs()).sum::<f64>(), 1.0);
        }
        let mut s = DirectionScheme::new(DirectionKind::UniformSphere, 7, 4).unwrap();
        for _ in 0..100 {
            assert!((norm2(&s.sample_direction()) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn directional_eval_cases() {
        let f: SharedFunction = Arc::new(Quadratic::diagonal(&[1.0, 2.0, 3.0], vec![0.0; 3], 0.0).unwrap());
        let y = [1.0, 1.0, 1.0];
        let e = [0.0, 1.0, 0.0];
        // n * df/dy_2 * e = 3 * 2 * e
        assert_eq!(directional_eval(f.as_ref(), &y, &e, 0.0, 0.0).unwrap(), vec![0.0, 6.0, 0.0]);
        // direction orthogonal to the gradient (1, 2, 3)
        let e = [2.0 / 5f64.sqrt(), -1.0 / 5f64.sqrt(), 0.0];
        let g = directional_eval(f.as_ref(), &y, &e, 0.0, 0.0).unwrap();
        assert!(norm2(&g) < 1e-15);
        assert!(matches!(
            directional_eval(f.as_ref(), &y, &e, 0.2, 0.1),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn finite_differences() {
        let affine: SharedFunction = Arc::new(Affine { c: vec![1.0, -2.0], c0: 3.0 });
        let x = [0.25, 0.5];
        let e = [0.6, 0.8];
        let fd = finite_diff_eval(affine.as_ref(), &x, &e, 0.37, 0.0, 0.0, 0.0).unwrap();
        let ex = directional_eval(affine.as_ref(), &x, &e, 0.0, 0.0).unwrap();
        for (a, b) in fd.iter().zip(&ex) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(finite_diff_eval(affine.as_ref(), &x, &e, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(finite_diff_eval(affine.as_ref(), &x, &e, 0.1, 0.2, 0.0, 0.1).is_err());

        // f = x^2/2 at x = 1, e = 1, tau = 0.1: slope 1.05, induced noise 0.05 = L tau / 2
        let q: SharedFunction = Arc::new(Quadratic::diagonal(&[1.0], vec![0.0], 0.0).unwrap());
        let g = finite_diff_eval(q.as_ref(), &[1.0], &[1.0], 0.1, 0.0, 0.0, 0.0).unwrap();
        let induced = g[0] - 1.0;
        assert!((induced - 0.05).abs() < 1e-12);
        assert!(induced <= finite_diff_noise_bound(1.0, 0.1, 0.0) + 1e-15);

        // at the optimal step the bound is 2 sqrt(L delta)
        let (l, d) = (3.0, 1e-4);
        let tau = finite_diff_step(l, d);
        assert!((finite_diff_noise_bound(l, tau, d) - 2.0 * (l * d).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn keyed_streams_are_replayable_and_distinct() {
        let f = half_sq(2);
        let o = StochasticOracle::new(DeltaLOracle::exact(f), 1.0, 42).unwrap();
        let y = [0.0, 0.0];
        let a = o.mini_batch_keyed(&y, 3, 5, 1).unwrap();
        assert_eq!(a, o.mini_batch_keyed(&y, 3, 5, 1).unwrap());
        assert_ne!(a, o.mini_batch_keyed(&y, 3, 5, 2).unwrap());
        assert_ne!(a, o.mini_batch_keyed(&y, 3, 6, 1).unwrap());
    }
}
