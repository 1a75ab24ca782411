use crate::error::{Error, Result};
use crate::linalg::dot;

/// The simple convex term `h` of a composite objective `f + h`, kept inside
/// the prox subproblem instead of being linearized.
///
/// Every variant is separable, so its prox is closed form coordinate-wise.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Composite {
    #[default]
    Zero,
    /// `h(x) = <c, x> + c0`
    Affine { c: Vec<f64>, c0: f64 },
    /// `h(x) = weight * ||x||_1`
    L1 { weight: f64 },
    /// `h(x) = weight / 2 * ||x||_2^2`
    SquaredL2 { weight: f64 },
}

impl Composite {
    pub fn affine(c: Vec<f64>, c0: f64) -> Self {
        Self::Affine { c, c0 }
    }

    pub fn l1(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) {
            return Err(Error::Argument("l1 weight must be >= 0".into()));
        }
        Ok(Self::L1 { weight })
    }

    pub fn squared_l2(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) {
            return Err(Error::Argument("squared-l2 weight must be >= 0".into()));
        }
        Ok(Self::SquaredL2 { weight })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Affine { .. } => "affine",
            Self::L1 { .. } => "l1",
            Self::SquaredL2 { .. } => "squared_l2",
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Affine { c, c0 } => dot(c, x) + c0,
            Self::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            Self::SquaredL2 { weight } => 0.5 * weight * dot(x, x),
        }
    }

    /// Zero or affine: the prox only shifts the linear term.
    pub fn is_linear(&self) -> bool {
        matches!(self, Self::Zero | Self::Affine { .. })
    }

    /// Linear part of an affine `h`, if any.
    pub(crate) fn linear_part(&self) -> Option<&[f64]> {
        match self {
            Self::Affine { c, .. } => Some(c),
            _ => None,
        }
    }

    /// `argmin_x t*h(x) + 1/2 (x - z)^2` for coordinate `i`, ignoring the
    /// affine part (callers fold that into the linear term).
    pub(crate) fn prox_coord(&self, z: f64, t: f64) -> f64 {
        match self {
            Self::Zero | Self::Affine { .. } => z,
            Self::L1 { weight } => {
                let k = t * weight;
                if z > k {
                    z - k
                } else if z < -k {
                    z + k
                } else {
                    0.0
                }
            }
            Self::SquaredL2 { weight } => z / (1.0 + t * weight),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        let x = [1.0, -2.0];
        assert_eq!(Composite::Zero.value(&x), 0.0);
        assert_eq!(Composite::affine(vec![1.0, 1.0], 0.5).value(&x), -0.5);
        assert_eq!(Composite::l1(2.0).unwrap().value(&x), 6.0);
        assert_eq!(Composite::squared_l2(2.0).unwrap().value(&x), 5.0);
    }

    #[test]
    fn coordinate_prox() {
        let h = Composite::l1(1.0).unwrap();
        assert_eq!(h.prox_coord(3.0, 0.5), 2.5);
        assert_eq!(h.prox_coord(0.2, 0.5), 0.0);
        let s = Composite::squared_l2(1.0).unwrap();
        assert_eq!(s.prox_coord(3.0, 2.0), 1.0);
    }
}
