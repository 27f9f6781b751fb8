//! Finite-dimensional Euclidean state space.
//!
//! The state space is `R^n` with the standard inner product, so the duality
//! mapping is the identity and the duality inequality
//!
//! ```text
//! ||u + v||^2 <= ||u||^2 + 2 <u, v> + kappa ||v||^2
//! ```
//!
//! holds with equality for `kappa = 1`. The constant is still carried through
//! every bound formula via [`SpaceConstants`].

use std::fmt;

use crate::error::{Error, Result};

/// A point of `R^n` with finite coordinates.
#[derive(Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Builds a vector, rejecting empty input and non-finite coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyVector);
        }
        check_finite(&coords)?;
        Ok(Vector(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Vector(vec![0.0; dim])
    }

    /// The `i`-th standard basis vector.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[i] = 1.0;
        v
    }

    /// One-dimensional vector holding `x`.
    pub fn scalar(x: f64) -> Result<Self> {
        Self::new(vec![x])
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

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Result<Vector> {
        let coords: Vec<f64> = self.0.iter().map(|x| factor * x).collect();
        check_finite(&coords)?;
        Ok(Vector(coords))
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &Vector) -> Result<Vector> {
        self.zip_with(other, |a, b| a + factor * b)
    }

    /// Euclidean distance `||self - other||`.
    pub fn dist(&self, other: &Vector) -> Result<f64> {
        same_dim(self, other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Coordinatewise map; the result is checked for finiteness.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Vector> {
        let coords: Vec<f64> = self.0.iter().map(|&x| f(x)).collect();
        check_finite(&coords)?;
        Ok(Vector(coords))
    }

    /// Coordinatewise binary map; the result is checked for finiteness.
    pub fn zip_with(&self, other: &Vector, f: impl Fn(f64, f64) -> f64) -> Result<Vector> {
        same_dim(self, other)?;
        let coords: Vec<f64> = self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect();
        check_finite(&coords)?;
        Ok(Vector(coords))
    }

    /// Decimal serialization used in CSV output: comma separated, 17 significant digits.
    pub fn to_csv_field(&self) -> String {
        self.0.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Vector::new(coords)
    }
}

impl TryFrom<&[f64]> for Vector {
    type Error = Error;

    fn try_from(coords: &[f64]) -> Result<Self> {
        Vector::new(coords.to_vec())
    }
}

/// Locale-independent rendering with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn check_finite(coords: &[f64]) -> Result<()> {
    match coords.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

pub(crate) fn same_dim(u: &Vector, v: &Vector) -> Result<()> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    Ok(())
}

/// Euclidean inner product.
pub fn inner(u: &Vector, v: &Vector) -> Result<f64> {
    same_dim(u, v)?;
    Ok(u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum())
}

/// Geometric constants of the state space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceConstants {
    kappa: f64,
}

impl SpaceConstants {
    /// Constants of the Euclidean instantiation.
    pub const EUCLIDEAN: SpaceConstants = SpaceConstants { kappa: 1.0 };

    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kappa must be a finite real >= 1, got {kappa}"
            )));
        }
        Ok(SpaceConstants { kappa })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

impl Default for SpaceConstants {
    fn default() -> Self {
        Self::EUCLIDEAN
    }
}

/// Slack of the duality inequality: `||u||^2 + 2<u,v> + kappa ||v||^2 - ||u+v||^2`.
pub fn check_kappa_inequality(u: &Vector, v: &Vector, kappa: f64) -> Result<f64> {
    SpaceConstants::new(kappa)?;
    let sum = u.add(v)?;
    Ok(u.norm_sq() + 2.0 * inner(u, v)? + kappa * v.norm_sq() - sum.norm_sq())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(c: &[f64]) -> Vector {
        Vector::try_from(c).unwrap()
    }

    #[test]
    fn inner_examples() {
        assert_eq!(inner(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(inner(&v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap(), 11.0);
        let u = v(&[3.0, 4.0]);
        assert_eq!(inner(&u, &u).unwrap(), 25.0);
        assert_eq!(u.norm(), 5.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = inner(&v(&[1.0]), &v(&[1.0, 2.0])).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 1, found: 2 });
        assert!(v(&[1.0]).add(&v(&[1.0, 2.0])).is_err());
        assert!(check_kappa_inequality(&v(&[1.0]), &v(&[1.0, 2.0]), 1.0).is_err());
    }

    #[test]
    fn construction_rejects_bad_coordinates() {
        assert_eq!(Vector::new(vec![]).unwrap_err(), Error::EmptyVector);
        assert_eq!(
            Vector::new(vec![1.0, f64::NAN]).unwrap_err(),
            Error::NonFinite { index: 1 }
        );
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
        assert!(v(&[1e308]).scale(10.0).is_err());
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(check_kappa_inequality(&v(&[1.0, 1.0]), &v(&[0.0, 0.0]), 1.0).unwrap(), 0.0);
        assert_eq!(check_kappa_inequality(&v(&[1.0, 0.0]), &v(&[0.0, 2.0]), 1.0).unwrap(), 0.0);
        assert_eq!(check_kappa_inequality(&v(&[1.0, 0.0]), &v(&[0.0, 2.0]), 2.0).unwrap(), 4.0);
        assert!(check_kappa_inequality(&v(&[1.0]), &v(&[1.0]), 0.5).is_err());
    }

    #[test]
    fn csv_field_round_trips() {
        let u = v(&[0.1, -2.5e-300, 1.0 / 3.0]);
        let parsed: Vec<f64> = u
            .to_csv_field()
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(parsed, u.as_slice());
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..6).prop_flat_map(|n| {
            (
                prop::collection::vec(-1e3..1e3f64, n),
                prop::collection::vec(-1e3..1e3f64, n),
            )
        })
    }

    proptest! {
        #[test]
        fn euclidean_case_saturates_duality_inequality((a, b) in pair()) {
            let (u, w) = (Vector::new(a).unwrap(), Vector::new(b).unwrap());
            let slack = check_kappa_inequality(&u, &w, 1.0).unwrap();
            let scale = 1.0 + u.norm_sq() + w.norm_sq();
            prop_assert!(slack.abs() <= 1e-12 * scale);
            let slack2 = check_kappa_inequality(&u, &w, 1.7).unwrap();
            prop_assert!(slack2 >= -1e-12 * scale);
        }

        #[test]
        fn inner_symmetric_and_cauchy_schwarz((a, b) in pair()) {
            let (u, w) = (Vector::new(a).unwrap(), Vector::new(b).unwrap());
            let uv = inner(&u, &w).unwrap();
            prop_assert_eq!(uv, inner(&w, &u).unwrap());
            prop_assert!(uv.abs() <= u.norm() * w.norm() * (1.0 + 1e-12) + 1e-300);
        }
    }
}
