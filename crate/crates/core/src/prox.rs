//! Prox-functions, their Bregman divergences and the primal/dual norm pairs.

use crate::error::{Error, Result};
use crate::linalg::{dist2_sq, dot, norm1, norm2, norm_inf};

/// Smallest value an entropy coordinate is clamped to before a logarithm.
pub const ENTROPY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxKind {
    /// `d(x) = 1/2 ||x||_2^2`, norm `||.||_2`.
    Euclidean,
    /// `d(x) = sum x_i ln x_i` on the simplex, norm `||.||_1`, dual `||.||_inf`.
    EntropySimplex,
    /// `d(x) = L/2 ||x||_2^2`, norm `||x||_L = sqrt(L) ||x||_2`.
    ScaledEuclidean { lipschitz: f64 },
}

/// A prox-function `d` together with the norm it is 1-strongly convex in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxSetup {
    kind: ProxKind,
}

impl ProxSetup {
    pub fn euclidean() -> Self {
        Self {
            kind: ProxKind::Euclidean,
        }
    }

    pub fn entropy_simplex() -> Self {
        Self {
            kind: ProxKind::EntropySimplex,
        }
    }

    pub fn scaled_euclidean(lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0) || !lipschitz.is_finite() {
            return Err(Error::Argument(format!(
                "scaled Euclidean prox needs L > 0, got {lipschitz}"
            )));
        }
        Ok(Self {
            kind: ProxKind::ScaledEuclidean { lipschitz },
        })
    }

    pub fn kind(&self) -> ProxKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProxKind::Euclidean => "euclidean",
            ProxKind::EntropySimplex => "entropy_simplex",
            ProxKind::ScaledEuclidean { .. } => "scaled_euclidean_L",
        }
    }

    fn check_entropy_domain(x: &[f64], strict: bool) -> Result<()> {
        let bad = x
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0 || (strict && *v <= 0.0));
        if bad {
            let what = if strict { "strictly positive" } else { "nonnegative" };
            return Err(Error::Domain(format!(
                "entropy prox-function requires {what} coordinates, got {x:?}"
            )));
        }
        Ok(())
    }

    /// The prox-function `d(x)`.
    pub fn prox_fn(&self, x: &[f64]) -> Result<f64> {
        Ok(match self.kind {
            ProxKind::Euclidean => 0.5 * dot(x, x),
            ProxKind::ScaledEuclidean { lipschitz } => 0.5 * lipschitz * dot(x, x),
            ProxKind::EntropySimplex => {
                Self::check_entropy_domain(x, false)?;
                x.iter()
                    .map(|&v| if v == 0.0 { 0.0 } else { v * v.ln() })
                    .sum()
            }
        })
    }

    /// Gradient of the prox-function; for entropy the point must be strictly
    /// positive.
    pub fn prox_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(match self.kind {
            ProxKind::Euclidean => x.to_vec(),
            ProxKind::ScaledEuclidean { lipschitz } => x.iter().map(|v| lipschitz * v).collect(),
            ProxKind::EntropySimplex => {
                Self::check_entropy_domain(x, true)?;
                x.iter().map(|v| v.max(ENTROPY_FLOOR).ln() + 1.0).collect()
            }
        })
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        match self.kind {
            ProxKind::Euclidean => norm2(v),
            ProxKind::ScaledEuclidean { lipschitz } => lipschitz.sqrt() * norm2(v),
            ProxKind::EntropySimplex => norm1(v),
        }
    }

    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        match self.kind {
            ProxKind::Euclidean => norm2(v),
            ProxKind::ScaledEuclidean { lipschitz } => norm2(v) / lipschitz.sqrt(),
            ProxKind::EntropySimplex => norm_inf(v),
        }
    }

    /// Bregman divergence `V(x, y) = d(x) - d(y) - <grad d(y), x - y>`.
    ///
    /// The Euclidean forms are evaluated as `1/2 ||x - y||^2` directly, which
    /// is the same quantity without cancellation. Entropy uses `0 ln 0 = 0`.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::Argument(format!(
                "dimension mismatch: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        Ok(match self.kind {
            ProxKind::Euclidean => 0.5 * dist2_sq(x, y),
            ProxKind::ScaledEuclidean { lipschitz } => 0.5 * lipschitz * dist2_sq(x, y),
            ProxKind::EntropySimplex => {
                Self::check_entropy_domain(x, false)?;
                Self::check_entropy_domain(y, true)?;
                let v: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(&a, &b)| {
                        let lin = b - a;
                        if a == 0.0 {
                            lin
                        } else {
                            a * (a.ln() - b.max(ENTROPY_FLOOR).ln()) + lin
                        }
                    })
                    .sum();
                v.max(0.0)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_simplex_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }

    #[test]
    fn bregman_examples() {
        let e = ProxSetup::euclidean();
        assert_eq!(e.bregman(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(e.bregman(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
        let h = ProxSetup::entropy_simplex();
        assert_eq!(h.bregman(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let kl = h.bregman(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn entropy_rejects_nonpositive_anchor() {
        let h = ProxSetup::entropy_simplex();
        assert!(matches!(
            h.bregman(&[0.5, 0.5], &[1.0, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(h.prox_grad(&[0.0, 1.0]), Err(Error::Domain(_))));
        assert!(ProxSetup::scaled_euclidean(0.0).is_err());
    }

    #[test]
    fn bregman_matches_definition_and_dominates_half_norm_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let setups = [
            ProxSetup::euclidean(),
            ProxSetup::entropy_simplex(),
            ProxSetup::scaled_euclidean(3.5).unwrap(),
        ];
        for setup in setups {
            for _ in 0..1000 {
                let (x, y) = match setup.kind() {
                    ProxKind::EntropySimplex => {
                        (random_simplex_point(&mut rng, 4), random_simplex_point(&mut rng, 4))
                    }
                    _ => (
                        (0..4).map(|_| rng.random_range(-5.0..5.0)).collect::<Vec<_>>(),
                        (0..4).map(|_| rng.random_range(-5.0..5.0)).collect::<Vec<_>>(),
                    ),
                };
                let v = setup.bregman(&x, &y).unwrap();
                let gy = setup.prox_grad(&y).unwrap();
                let def = setup.prox_fn(&x).unwrap()
                    - setup.prox_fn(&y).unwrap()
                    - dot(&gy, &crate::linalg::sub(&x, &y));
                assert!((v - def).abs() < 1e-9 * (1.0 + v.abs()), "{v} vs {def}");
                let half = 0.5 * setup.norm(&crate::linalg::sub(&x, &y)).powi(2);
                assert!(v >= half - 1e-12, "{}: V={v} < {half}", setup.name());
            }
        }
    }

    #[test]
    fn dual_norm_is_dual_on_axes_and_random_directions() {
        // ||g||_* = max over ||x|| <= 1 of <g, x>; the maximizer is explicit
        // for each pair, and random unit vectors never exceed it.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let setups = [
            ProxSetup::euclidean(),
            ProxSetup::entropy_simplex(),
            ProxSetup::scaled_euclidean(4.0).unwrap(),
        ];
        for setup in setups {
            for i in 0..3 {
                let mut e = vec![0.0; 3];
                e[i] = 1.0;
                let x: Vec<f64> = e.iter().map(|v| v / setup.norm(&e)).collect();
                assert!((dot(&e, &x) - setup.dual_norm(&e)).abs() < 1e-15);
            }
            for _ in 0..200 {
                let g: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let d = setup.dual_norm(&g);
                for _ in 0..20 {
                    let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let x: Vec<f64> = x.iter().map(|v| v / setup.norm(&x)).collect();
                    assert!(dot(&g, &x) <= d + 1e-12);
                }
                let attained = match setup.kind() {
                    ProxKind::EntropySimplex => {
                        let (i, _) = g
                            .iter()
                            .enumerate()
                            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                            .unwrap();
                        g[i].abs()
                    }
                    _ => {
                        let x: Vec<f64> = g.iter().map(|v| v / setup.norm(&g)).collect();
                        dot(&g, &x)
                    }
                };
                assert!((attained - d).abs() < 1e-12);
            }
        }
    }
}
