//! Concrete operators with closed-form resolvents.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operators::{CocoerciveOperator, MonotoneOperator};
use crate::problems::spectral::{psd_spectral_upper_bound, symmetric_min_eigenvalue};
use crate::vector::{same_dim, Vector};

pub(crate) fn to_dvector(v: &Vector) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

pub(crate) fn from_dvector(v: &DVector<f64>) -> Result<Vector> {
    Vector::new(v.as_slice().to_vec())
}

fn check_dim(expected: usize, v: &Vector) -> Result<()> {
    if v.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: v.dim(),
        });
    }
    Ok(())
}

fn check_len(expected: usize, v: &[f64]) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::StepOutOfRange {
            lambda,
            lower: 0.0,
            upper: f64::INFINITY,
            index: None,
        });
    }
    Ok(())
}

/// Linear monotone operator `x ↦ Mx`, i.e. `M + M^T` positive semidefinite.
#[derive(Debug, Clone)]
pub struct LinearMonotone {
    matrix: DMatrix<f64>,
    norm: f64,
}

impl LinearMonotone {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidParameter("monotone matrix must be square and nonempty".into()));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let scale = 1.0 + matrix.norm();
        if symmetric_min_eigenvalue(&sym) < -1e-12 * scale {
            return Err(Error::InvalidParameter("matrix is not monotone (symmetric part indefinite)".into()));
        }
        Ok(Self::new_unchecked(matrix))
    }

    /// Skips the monotonicity check; for exercising the verifiers.
    pub fn new_unchecked(matrix: DMatrix<f64>) -> Self {
        let gram = matrix.transpose() * &matrix;
        let norm = psd_spectral_upper_bound(&gram).sqrt();
        LinearMonotone { matrix, norm }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl MonotoneOperator for LinearMonotone {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn resolvent(&self, lambda: f64, z: &Vector) -> Result<Vector> {
        check_dim(self.dim(), z)?;
        let mut out = z.as_slice().to_vec();
        self.resolvent_in_place(lambda, &mut out)?;
        Vector::new(out)
    }

    fn resolvent_in_place(&self, lambda: f64, z: &mut [f64]) -> Result<()> {
        check_lambda(lambda)?;
        check_len(self.dim(), z)?;
        let m = &self.matrix;
        match self.dim() {
            1 => z[0] /= 1.0 + lambda * m[(0, 0)],
            2 => {
                let (a, b) = (1.0 + lambda * m[(0, 0)], lambda * m[(0, 1)]);
                let (c, d) = (lambda * m[(1, 0)], 1.0 + lambda * m[(1, 1)]);
                let det = a * d - b * c;
                let (z0, z1) = (z[0], z[1]);
                z[0] = (d * z0 - b * z1) / det;
                z[1] = (a * z1 - c * z0) / det;
            }
            n => {
                let system = DMatrix::identity(n, n) + m * lambda;
                let sol = system
                    .lu()
                    .solve(&DVector::from_column_slice(z))
                    .ok_or_else(|| Error::InvalidParameter("singular resolvent system".into()))?;
                z.copy_from_slice(sol.as_slice());
            }
        }
        Ok(())
    }

    fn nearest_in_image(&self, x: &Vector, _target: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x)?;
        from_dvector(&(&self.matrix * to_dvector(x)))
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.norm)
    }
}

/// `w ∂||·||_1`, the subdifferential of a weighted ℓ1 norm.
#[derive(Debug, Clone)]
pub struct L1Subdifferential {
    dim: usize,
    weight: f64,
}

impl L1Subdifferential {
    pub fn new(dim: usize, weight: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyVector);
        }
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::InvalidParameter(format!("l1 weight must be positive, got {weight}")));
        }
        Ok(L1Subdifferential { dim, weight })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

/// `sign(z) max(|z| - threshold, 0)`.
pub fn soft_threshold(z: f64, threshold: f64) -> f64 {
    if z > threshold {
        z - threshold
    } else if z < -threshold {
        z + threshold
    } else {
        0.0
    }
}

impl MonotoneOperator for L1Subdifferential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn resolvent(&self, lambda: f64, z: &Vector) -> Result<Vector> {
        check_lambda(lambda)?;
        check_dim(self.dim, z)?;
        let t = lambda * self.weight;
        z.map(|zi| soft_threshold(zi, t))
    }

    fn resolvent_in_place(&self, lambda: f64, z: &mut [f64]) -> Result<()> {
        check_lambda(lambda)?;
        check_len(self.dim, z)?;
        let t = lambda * self.weight;
        for zi in z.iter_mut() {
            *zi = soft_threshold(*zi, t);
        }
        Ok(())
    }

    fn nearest_in_image(&self, x: &Vector, target: &Vector) -> Result<Vector> {
        check_dim(self.dim, x)?;
        same_dim(x, target)?;
        let w = self.weight;
        x.zip_with(target, |xi, ti| {
            if xi > 0.0 {
                w
            } else if xi < 0.0 {
                -w
            } else {
                ti.clamp(-w, w)
            }
        })
    }
}

/// Normal cone of the box `[lo, hi]`; its resolvent is the projection.
#[derive(Debug, Clone)]
pub struct BoxNormalCone {
    lo: Vector,
    hi: Vector,
}

impl BoxNormalCone {
    pub fn new(lo: Vector, hi: Vector) -> Result<Self> {
        same_dim(&lo, &hi)?;
        if lo.as_slice().iter().zip(hi.as_slice()).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidParameter("box requires lo < hi in every coordinate".into()));
        }
        Ok(BoxNormalCone { lo, hi })
    }

    pub fn lo(&self) -> &Vector {
        &self.lo
    }

    pub fn hi(&self) -> &Vector {
        &self.hi
    }

    fn clip(&self, z: &Vector) -> Vector {
        let coords = z
            .as_slice()
            .iter()
            .zip(self.lo.as_slice().iter().zip(self.hi.as_slice()))
            .map(|(&zi, (&l, &h))| zi.clamp(l, h))
            .collect();
        Vector::new(coords).expect("clipped coordinates are finite")
    }
}

impl MonotoneOperator for BoxNormalCone {
    fn dim(&self) -> usize {
        self.lo.dim()
    }

    fn resolvent(&self, lambda: f64, z: &Vector) -> Result<Vector> {
        check_lambda(lambda)?;
        check_dim(self.dim(), z)?;
        Ok(self.clip(z))
    }

    fn resolvent_in_place(&self, lambda: f64, z: &mut [f64]) -> Result<()> {
        check_lambda(lambda)?;
        check_len(self.dim(), z)?;
        for ((zi, &l), &h) in z.iter_mut().zip(self.lo.as_slice()).zip(self.hi.as_slice()) {
            *zi = zi.clamp(l, h);
        }
        Ok(())
    }

    fn nearest_in_image(&self, x: &Vector, target: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x)?;
        same_dim(x, target)?;
        if !self.in_domain(x) {
            return Err(Error::OutsideDomain);
        }
        let coords = x
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .zip(self.lo.as_slice().iter().zip(self.hi.as_slice()))
            .map(|((&xi, &ti), (&l, &h))| {
                if xi == l {
                    ti.min(0.0)
                } else if xi == h {
                    ti.max(0.0)
                } else {
                    0.0
                }
            })
            .collect();
        Vector::new(coords)
    }

    fn in_domain(&self, x: &Vector) -> bool {
        x.dim() == self.dim()
            && x
                .as_slice()
                .iter()
                .zip(self.lo.as_slice().iter().zip(self.hi.as_slice()))
                .all(|(&xi, (&l, &h))| l <= xi && xi <= h)
    }

    fn clamp_to_domain(&self, x: &Vector) -> Vector {
        self.clip(x)
    }
}

/// Affine map `x ↦ Mx + c` with a declared cocoercivity parameter.
#[derive(Debug, Clone)]
pub struct AffineMap {
    matrix: DMatrix<f64>,
    offset: Vector,
    theta: f64,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, offset: Vector, theta: f64) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != offset.dim() {
            return Err(Error::DimensionMismatch {
                expected: offset.dim(),
                found: matrix.nrows(),
            });
        }
        if !(theta > 0.0) {
            return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
        }
        Ok(AffineMap { matrix, offset, theta })
    }

    /// The zero map, cocoercive for every θ.
    pub fn zero(dim: usize) -> Self {
        AffineMap {
            matrix: DMatrix::zeros(dim, dim),
            offset: Vector::zeros(dim),
            theta: f64::INFINITY,
        }
    }
}

impl CocoerciveOperator for AffineMap {
    fn dim(&self) -> usize {
        self.offset.dim()
    }

    fn apply(&self, x: &Vector) -> Result<Vector> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(x.as_slice(), &mut out)?;
        Vector::new(out)
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.dim(), x)?;
        check_len(self.dim(), out)?;
        let m = &self.matrix;
        let c = self.offset.as_slice();
        match self.dim() {
            1 => out[0] = m[(0, 0)] * x[0] + c[0],
            2 => {
                out[0] = m[(0, 0)] * x[0] + m[(0, 1)] * x[1] + c[0];
                out[1] = m[(1, 0)] * x[0] + m[(1, 1)] * x[1] + c[1];
            }
            _ => {
                let y = m * DVector::from_column_slice(x) + DVector::from_column_slice(c);
                out.copy_from_slice(y.as_slice());
            }
        }
        Ok(())
    }

    fn theta(&self) -> f64 {
        self.theta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
        assert_eq!(soft_threshold(0.3, 0.5), 0.0);
    }

    #[test]
    fn linear_resolvent_examples() {
        let a = LinearMonotone::new(DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert_eq!(a.resolvent(0.5, &Vector::scalar(3.0).unwrap()).unwrap().as_slice(), &[1.5]);
        let skew = LinearMonotone::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        let r = skew.resolvent(1.0, &Vector::new(vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(r.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn general_dimension_resolvent_matches_lu() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, -1.0, 1.0, 0.5, 0.0, -0.5, 3.0]);
        let a = LinearMonotone::new(m.clone()).unwrap();
        let z = Vector::new(vec![1.0, -2.0, 0.5]).unwrap();
        let x = a.resolvent(0.3, &z).unwrap();
        let back = to_dvector(&x) + m * to_dvector(&x) * 0.3;
        for (u, v) in back.iter().zip(z.as_slice()) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        assert!(LinearMonotone::new(DMatrix::from_element(1, 1, -1.0)).is_err());
    }

    #[test]
    fn box_clip_and_cone() {
        let cone = BoxNormalCone::new(Vector::zeros(2), Vector::new(vec![1.0, 1.0]).unwrap()).unwrap();
        let p = cone.resolvent(1.0, &Vector::new(vec![2.0, -3.0]).unwrap()).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0]);
        // at the vertex (1, 0) the cone is [0, ∞) x (-∞, 0]
        let near = cone
            .nearest_in_image(&p, &Vector::new(vec![-2.0, -5.0]).unwrap())
            .unwrap();
        assert_eq!(near.as_slice(), &[0.0, -5.0]);
        assert!(cone.nearest_in_image(&Vector::new(vec![1.5, 0.0]).unwrap(), &Vector::zeros(2)).is_err());
        assert!(BoxNormalCone::new(Vector::zeros(1), Vector::zeros(1)).is_err());
    }

    #[test]
    fn l1_nearest_point() {
        let l1 = L1Subdifferential::new(3, 0.5).unwrap();
        let x = Vector::new(vec![1.0, 0.0, -2.0]).unwrap();
        let t = Vector::new(vec![0.0, 3.0, 0.0]).unwrap();
        assert_eq!(l1.nearest_in_image(&x, &t).unwrap().as_slice(), &[0.5, 0.5, -0.5]);
    }
}
