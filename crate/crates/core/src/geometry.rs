//! Feature vectors, L2 normalization and Euclidean distance.
//!
//! Everything downstream (the memory bank, scoring, the detector) queries
//! this module. All arithmetic is `f64` even when files store `f32`, so
//! distance sums over large dimensions stay comparable against oracles.

use crate::error::{Error, Result};

/// Norms at or below this are treated as zero for normalization purposes.
pub const ZERO_NORM_FLOOR: f64 = 1e-30;

/// Tolerance on the unit norm of a normalized vector.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// A d-dimensional embedding with finite components, d >= 1.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    /// Builds a vector, rejecting empty input and non-finite components.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// L2 norm.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Returns `self / ||self||`, projecting onto the unit sphere.
    ///
    /// Fails with [`Error::ZeroVector`] when the norm is at or below
    /// [`ZERO_NORM_FLOOR`]. The output norm is within [`UNIT_NORM_TOL`] of 1.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm <= ZERO_NORM_FLOOR {
            return Err(Error::ZeroVector { norm });
        }
        Ok(Self {
            values: self.values.iter().map(|v| v / norm).collect(),
        })
    }
}

/// Euclidean (L2) distance between two vectors of the same dimension.
pub fn distance(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum();
    Ok(sum.sqrt())
}

/// Inner product of two vectors of the same dimension.
pub fn dot(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_three_four_five() {
        let n = fv(&[3.0, 4.0]).normalized().unwrap();
        assert!((n.values()[0] - 0.6).abs() < 1e-12);
        assert!((n.values()[1] - 0.8).abs() < 1e-12);
        assert!((n.norm() - 1.0).abs() <= UNIT_NORM_TOL);
    }

    #[test]
    fn normalize_already_unit() {
        let n = fv(&[1.0, 0.0, 0.0]).normalized().unwrap();
        assert_eq!(n.values(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_zero_vector_fails() {
        let err = fv(&[0.0, 0.0]).normalized().unwrap_err();
        assert!(matches!(err, Error::ZeroVector { .. }));
    }

    #[test]
    fn rejects_non_finite() {
        let err = FeatureVector::new(vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1 }));
        let err = FeatureVector::new(vec![f64::INFINITY]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 0 }));
    }

    #[test]
    fn rejects_empty() {
        assert!(matches!(
            FeatureVector::new(vec![]).unwrap_err(),
            Error::EmptyVector
        ));
    }

    #[test]
    fn distance_identity() {
        let x = fv(&[0.3, -1.7, 2.2]);
        assert_eq!(distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn distance_footnote_example() {
        // [2,2] vs [1,1] is sqrt(2); the worked example rounds it to 1.4.
        let d = distance(&fv(&[2.0, 2.0]), &fv(&[1.0, 1.0])).unwrap();
        assert!((d - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((d - 1.41421356).abs() < 1e-7);
    }

    #[test]
    fn distance_orthogonal_units() {
        let d = distance(&fv(&[1.0, 0.0]), &fv(&[0.0, 1.0])).unwrap();
        assert!((d - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn distance_dimension_mismatch() {
        let err = distance(&fv(&[1.0, 2.0]), &fv(&[1.0, 2.0, 3.0])).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                got: 3
            }
        ));
    }

    fn arb_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3..1e3f64, dim)
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in arb_vec(6), b in arb_vec(6), c in arb_vec(6)) {
            let (a, b, c) = (fv(&a), fv(&b), fv(&c));
            let ab = distance(&a, &b).unwrap();
            let bc = distance(&b, &c).unwrap();
            let ac = distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn distance_symmetric(a in arb_vec(5), b in arb_vec(5)) {
            let (a, b) = (fv(&a), fv(&b));
            prop_assert_eq!(distance(&a, &b).unwrap(), distance(&b, &a).unwrap());
        }

        #[test]
        fn normalize_idempotent(v in arb_vec(8)) {
            prop_assume!(v.iter().map(|x| x * x).sum::<f64>().sqrt() > 1e-6);
            let once = fv(&v).normalized().unwrap();
            let twice = once.normalized().unwrap();
            for (x, y) in once.values().iter().zip(twice.values()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        // On unit vectors dist^2 = 2 - 2<a,b>, so Euclidean neighbor order
        // equals descending-cosine order.
        #[test]
        fn sphere_cosine_equivalence(a in arb_vec(8), b in arb_vec(8)) {
            prop_assume!(a.iter().map(|x| x * x).sum::<f64>().sqrt() > 1e-6);
            prop_assume!(b.iter().map(|x| x * x).sum::<f64>().sqrt() > 1e-6);
            let (a, b) = (fv(&a).normalized().unwrap(), fv(&b).normalized().unwrap());
            let d = distance(&a, &b).unwrap();
            let cos = dot(&a, &b).unwrap();
            prop_assert!((d * d - (2.0 - 2.0 * cos)).abs() <= 1e-9);
        }
    }
}
