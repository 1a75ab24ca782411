use crate::error::{Error, Result};
use crate::linalg::{dist2_sq, norm2, project_simplex};

/// Closed convex feasible set `Q`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    WholeSpace { dim: usize },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Simplex { dim: usize },
    Ball { center: Vec<f64>, radius: f64 },
}

impl FeasibleSet {
    pub fn whole_space(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("dimension must be positive".into()));
        }
        Ok(Self::WholeSpace { dim })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Argument(
                "box bounds must be non-empty and of equal length".into(),
            ));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Argument("box requires lower <= upper".into()));
        }
        Ok(Self::Box { lower, upper })
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("dimension must be positive".into()));
        }
        Ok(Self::Simplex { dim })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Argument(
                "ball needs a non-empty center and finite radius >= 0".into(),
            ));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::WholeSpace { dim } | Self::Simplex { dim } => *dim,
            Self::Box { lower, .. } => lower.len(),
            Self::Ball { center, .. } => center.len(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::WholeSpace { .. } => "whole_space",
            Self::Box { .. } => "box",
            Self::Simplex { .. } => "simplex",
            Self::Ball { .. } => "ball",
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Self::WholeSpace { .. } => true,
            Self::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            Self::Simplex { .. } => {
                x.iter().all(|v| *v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
            }
            Self::Ball { center, radius } => dist2_sq(x, center).sqrt() <= radius + tol,
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::WholeSpace { .. } => x.to_vec(),
            Self::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
            Self::Simplex { .. } => project_simplex(x),
            Self::Ball { center, radius } => {
                let d = dist2_sq(x, center).sqrt();
                if d <= *radius {
                    x.to_vec()
                } else {
                    let s = radius / d;
                    x.iter().zip(center).map(|(v, c)| c + s * (v - c)).collect()
                }
            }
        }
    }

    /// Euclidean diameter, `None` for unbounded sets.
    pub fn diameter(&self) -> Option<f64> {
        match self {
            Self::WholeSpace { .. } => None,
            Self::Box { lower, upper } => {
                if lower.iter().chain(upper).any(|v| !v.is_finite()) {
                    None
                } else {
                    Some(norm2(&crate::linalg::sub(upper, lower)))
                }
            }
            Self::Simplex { dim } => Some(if *dim > 1 { 2f64.sqrt() } else { 0.0 }),
            Self::Ball { radius, .. } => Some(2.0 * radius),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sets() -> Vec<FeasibleSet> {
        vec![
            FeasibleSet::whole_space(3).unwrap(),
            FeasibleSet::boxed(vec![-1.0, 0.0, 0.5], vec![1.0, 2.0, 0.5]).unwrap(),
            FeasibleSet::simplex(3).unwrap(),
            FeasibleSet::ball(vec![1.0, -1.0, 0.0], 0.75).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn projection_lands_inside(x in prop::collection::vec(-10.0f64..10.0, 3)) {
            for q in sets() {
                let p = q.project(&x);
                prop_assert!(q.contains(&p, 1e-12), "{} {:?}", q.name(), p);
                // projection is idempotent
                let pp = q.project(&p);
                prop_assert!(dist2_sq(&p, &pp).sqrt() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_constructors() {
        assert!(FeasibleSet::whole_space(0).is_err());
        assert!(FeasibleSet::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(FeasibleSet::ball(vec![0.0], -1.0).is_err());
    }

    #[test]
    fn diameters() {
        let b = FeasibleSet::boxed(vec![0.0, 0.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(b.diameter(), Some(5.0));
        assert_eq!(FeasibleSet::whole_space(2).unwrap().diameter(), None);
    }
}
