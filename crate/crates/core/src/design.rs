//! Design vectors and box-shaped feasible sets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite entry at coordinate {0}")]
    NonFinite(usize),
    #[error("empty interval at coordinate {index}: [{lower}, {upper}]")]
    EmptyInterval { index: usize, lower: f64, upper: f64 },
}

/// A point in design space, in application units per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DesignVector(Vec<f64>);

impl DesignVector {
    pub fn new(values: Vec<f64>) -> Result<Self, DesignError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DesignError::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `self + scale * direction`, no projection.
    pub fn offset(&self, direction: &[f64], scale: f64) -> DesignVector {
        debug_assert_eq!(direction.len(), self.0.len());
        DesignVector(
            self.0
                .iter()
                .zip(direction)
                .map(|(t, u)| t + scale * u)
                .collect(),
        )
    }

    pub fn distance(&self, other: &DesignVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl std::ops::Index<usize> for DesignVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Axis-aligned feasible set `[lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, DesignError> {
        if lower.len() != upper.len() {
            return Err(DesignError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(DesignError::NonFinite(i));
            }
            if l > u {
                return Err(DesignError::EmptyInterval {
                    index: i,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]^d`
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self, DesignError> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn midpoint(&self) -> DesignVector {
        DesignVector(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| 0.5 * (l + u))
                .collect(),
        )
    }

    pub fn contains(&self, theta: &DesignVector) -> bool {
        theta.dim() == self.dim()
            && theta
                .as_slice()
                .iter()
                .enumerate()
                .all(|(i, &v)| v >= self.lower[i] && v <= self.upper[i])
    }

    /// Euclidean projection; for a box this is a per-coordinate clamp.
    pub fn project(&self, theta: &DesignVector) -> Result<DesignVector, DesignError> {
        project(theta, self)
    }

    /// Maps `t ∈ [0,1]^d` to the box.
    pub fn from_unit(&self, t: &[f64]) -> DesignVector {
        DesignVector(
            t.iter()
                .enumerate()
                .map(|(i, &s)| self.lower[i] + s * (self.upper[i] - self.lower[i]))
                .collect(),
        )
    }
}

pub fn project(theta: &DesignVector, domain: &BoxDomain) -> Result<DesignVector, DesignError> {
    if theta.dim() != domain.dim() {
        return Err(DesignError::DimensionMismatch {
            expected: domain.dim(),
            got: theta.dim(),
        });
    }
    Ok(DesignVector(
        theta
            .0
            .iter()
            .enumerate()
            .map(|(i, &v)| v.clamp(domain.lower[i], domain.upper[i]))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit2() -> BoxDomain {
        BoxDomain::cube(2, 0.0, 1.0).unwrap()
    }

    fn dv(v: &[f64]) -> DesignVector {
        DesignVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn interior_point_is_fixed() {
        assert_eq!(project(&dv(&[0.5, 0.5]), &unit2()).unwrap(), dv(&[0.5, 0.5]));
    }

    #[test]
    fn clamps_per_coordinate() {
        assert_eq!(project(&dv(&[1.5, -0.2]), &unit2()).unwrap(), dv(&[1.0, 0.0]));
    }

    #[test]
    fn boundary_point_is_fixed() {
        assert_eq!(project(&dv(&[0.0, 1.0]), &unit2()).unwrap(), dv(&[0.0, 1.0]));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let err = project(&dv(&[0.1, 0.2, 0.3]), &unit2()).unwrap_err();
        assert_eq!(err, DesignError::DimensionMismatch { expected: 2, got: 3 });
    }

    #[test]
    fn rejects_bad_boxes_and_vectors() {
        assert!(BoxDomain::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxDomain::new(vec![0.0], vec![f64::INFINITY]).is_err());
        assert!(DesignVector::new(vec![f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_nonexpansive(
            x in prop::collection::vec(-5.0f64..5.0, 3),
            y in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            let domain = BoxDomain::new(vec![-1.0, 0.0, 0.5], vec![1.0, 2.0, 0.75]).unwrap();
            let (x, y) = (dv(&x), dv(&y));
            let px = project(&x, &domain).unwrap();
            let py = project(&y, &domain).unwrap();
            prop_assert_eq!(project(&px, &domain).unwrap(), px.clone());
            prop_assert!(px.distance(&py) <= x.distance(&y) + 1e-12);
            prop_assert!(domain.contains(&px));
        }
    }
}
