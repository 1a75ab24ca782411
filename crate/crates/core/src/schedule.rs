//! Coefficient schedules `(alpha_k, A_k)` with `A_k = L alpha_k^2`.

use crate::error::{Error, Result};

fn check_lipschitz(l: f64) -> Result<()> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::Argument(format!("L must be positive and finite, got {l}")));
    }
    Ok(())
}

/// `alpha_{k+1} = 1/(2L) + sqrt(1/(4L^2) + alpha_k^2)`, the larger root of
/// `L a^2 = a + A_k` when `A_k = L alpha_k^2`.
pub fn next_alpha(lipschitz: f64, alpha: f64) -> Result<f64> {
    check_lipschitz(lipschitz)?;
    if !(alpha >= 0.0) {
        return Err(Error::Argument(format!("alpha_k must be >= 0, got {alpha}")));
    }
    let half = 0.5 / lipschitz;
    Ok(half + (half * half + alpha * alpha).sqrt())
}

/// Larger root of `A_k + a = L a^2`: `(1 + sqrt(1 + 4 L A_k)) / (2L)`.
pub fn solve_alpha_adaptive(a_sum: f64, lipschitz: f64) -> Result<f64> {
    check_lipschitz(lipschitz)?;
    if !(a_sum >= 0.0) {
        return Err(Error::Argument(format!("A_k must be >= 0, got {a_sum}")));
    }
    Ok((1.0 + (1.0 + 4.0 * lipschitz * a_sum).sqrt()) / (2.0 * lipschitz))
}

/// Fixed-`L` schedule: `alpha_0 = A_0 = 0` and [`next_alpha`] after that.
#[derive(Debug, Clone)]
pub struct StepSchedule {
    lipschitz: f64,
    alphas: Vec<f64>,
    sums: Vec<f64>,
}

impl StepSchedule {
    pub fn new(lipschitz: f64, steps: usize) -> Result<Self> {
        check_lipschitz(lipschitz)?;
        let mut alphas = Vec::with_capacity(steps + 1);
        let mut sums = Vec::with_capacity(steps + 1);
        alphas.push(0.0);
        sums.push(0.0);
        for k in 0..steps {
            let a = next_alpha(lipschitz, alphas[k])?;
            alphas.push(a);
            sums.push(sums[k] + a);
        }
        Ok(Self {
            lipschitz,
            alphas,
            sums,
        })
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn next_alpha_examples() {
        assert_eq!(next_alpha(1.0, 0.0).unwrap(), 1.0);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((next_alpha(1.0, 1.0).unwrap() - golden).abs() < 1e-15);
        assert_eq!(next_alpha(2.0, 0.0).unwrap(), 0.5);
        assert!(next_alpha(0.0, 1.0).is_err());
        assert!(next_alpha(-1.0, 1.0).is_err());
    }

    #[test]
    fn adaptive_root_examples() {
        assert_eq!(solve_alpha_adaptive(0.0, 1.0).unwrap(), 1.0);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((solve_alpha_adaptive(1.0, 1.0).unwrap() - golden).abs() < 1e-15);
        let r = (1.0 + 17f64.sqrt()) / 4.0;
        let a = solve_alpha_adaptive(2.0, 2.0).unwrap();
        assert!((a - r).abs() < 1e-15);
        assert!(((2.0 + a) - 2.0 * a * a).abs() <= 1e-12 * (2.0 + a));
        assert!(solve_alpha_adaptive(1.0, 0.0).is_err());
    }

    #[test]
    fn both_forms_agree_and_grow() {
        for l in [0.01, 1.0, 37.5, 1e4] {
            let s = StepSchedule::new(l, 10_000).unwrap();
            for k in 1..=10_000 {
                let (a, big) = (s.alphas()[k], s.sums()[k]);
                let via_sum = solve_alpha_adaptive(s.sums()[k - 1], l).unwrap();
                assert!((a - via_sum).abs() <= 1e-12 * a);
                assert!((big - l * a * a).abs() <= 1e-12 * big);
                assert!(a > s.alphas()[k - 1] + 0.5 / l - 1e-12 * a);
                assert!(a >= (k as f64 + 1.0) / (2.0 * l) * (1.0 - 1e-12));
                assert!(big >= (k as f64 + 1.0).powi(2) / (4.0 * l) * (1.0 - 1e-12));
            }
        }
    }
}
