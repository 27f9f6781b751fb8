//! Monotone and cocoercive operators and the forward-backward map.
//!
//! A set-valued monotone operator `A` is only ever accessed through its
//! resolvent `J_λ = (I + λA)^{-1}` and a nearest-point query on the closed
//! convex set `Ax`. A cocoercive map `B` is single valued with parameter θ:
//! `<x - y, Bx - By> >= θ ||Bx - By||^2`.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sampling::Sampler;
use crate::tolerances::member_tol;
use crate::vector::{inner, SpaceConstants, Vector};

/// Maximal monotone operator on `R^n`, exposed through its resolvent.
pub trait MonotoneOperator: Debug + Send + Sync {
    fn dim(&self) -> usize;

    /// `(I + λA)^{-1} z` for `λ > 0`.
    fn resolvent(&self, lambda: f64, z: &Vector) -> Result<Vector>;

    /// Overwrites `z` with its resolvent; must agree with [`Self::resolvent`].
    fn resolvent_in_place(&self, lambda: f64, z: &mut [f64]) -> Result<()> {
        let r = self.resolvent(lambda, &Vector::try_from(&*z)?)?;
        z.copy_from_slice(r.as_slice());
        Ok(())
    }

    /// Point of the closed convex set `Ax` nearest to `target`.
    ///
    /// Fails with [`Error::OutsideDomain`] when `Ax` is empty.
    fn nearest_in_image(&self, x: &Vector, target: &Vector) -> Result<Vector>;

    /// Distance from `v` to `Ax`.
    fn member_gap(&self, x: &Vector, v: &Vector) -> Result<f64> {
        let nearest = self.nearest_in_image(x, v)?;
        nearest.dist(v)
    }

    /// Minimal norm over `Ax` together with the minimizing element.
    fn min_norm_at(&self, x: &Vector) -> Result<(f64, Vector)> {
        let w = self.nearest_in_image(x, &Vector::zeros(x.dim()))?;
        Ok((w.norm(), w))
    }

    fn in_domain(&self, _x: &Vector) -> bool {
        true
    }

    /// Nearest point of the domain; the identity for full-domain operators.
    fn clamp_to_domain(&self, x: &Vector) -> Vector {
        x.clone()
    }

    /// Lipschitz constant when `A` is single valued and Lipschitz.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

/// Single-valued cocoercive operator.
pub trait CocoerciveOperator: Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &Vector) -> Result<Vector>;

    /// Writes `Bx` into `out`; must agree with [`Self::apply`].
    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let y = self.apply(&Vector::try_from(x)?)?;
        out.copy_from_slice(y.as_slice());
        Ok(())
    }

    /// Cocoercivity parameter; `f64::INFINITY` for constant maps.
    fn theta(&self) -> f64;
}

/// The operator sum `A + B` with the step cap `Θ = θ/κ`.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    a: Arc<dyn MonotoneOperator>,
    b: Arc<dyn CocoerciveOperator>,
    space: SpaceConstants,
}

impl OperatorPair {
    pub fn new(
        a: Arc<dyn MonotoneOperator>,
        b: Arc<dyn CocoerciveOperator>,
        space: SpaceConstants,
    ) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        let theta = b.theta();
        if !(theta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cocoercivity parameter must be positive, got {theta}"
            )));
        }
        Ok(OperatorPair { a, b, space })
    }

    pub fn monotone(&self) -> &dyn MonotoneOperator {
        self.a.as_ref()
    }

    pub fn cocoercive(&self) -> &dyn CocoerciveOperator {
        self.b.as_ref()
    }

    pub fn space(&self) -> SpaceConstants {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Largest step admitted by the distance estimates, `Θ = θ/κ`.
    pub fn theta_max(&self) -> f64 {
        self.b.theta() / self.space.kappa()
    }

    /// Largest step for which the forward map is nonexpansive, `2θ/κ`.
    pub fn forward_limit(&self) -> f64 {
        2.0 * self.theta_max()
    }

    /// Rejects steps outside `(0, Θ]`.
    pub fn check_step(&self, lambda: f64, index: Option<usize>) -> Result<()> {
        let upper = self.theta_max();
        if !(lambda > 0.0 && lambda <= upper) {
            return Err(Error::StepOutOfRange {
                lambda,
                lower: 0.0,
                upper,
                index,
            });
        }
        Ok(())
    }

    /// Lipschitz constant of `A + B` if `A` is Lipschitz.
    pub fn lipschitz(&self) -> Option<f64> {
        let b = self.b.theta();
        let lb = if b.is_finite() { 1.0 / b } else { 0.0 };
        self.a.lipschitz().map(|la| la + lb)
    }
}

/// Forward step `E_λ x = x - λ B x`, admitted for `λ ∈ [0, 2θ/κ]`.
pub fn forward(
    b: &dyn CocoerciveOperator,
    space: SpaceConstants,
    lambda: f64,
    x: &Vector,
) -> Result<Vector> {
    let upper = 2.0 * b.theta() / space.kappa();
    if !(lambda >= 0.0 && lambda <= upper) {
        return Err(Error::StepOutOfRange {
            lambda,
            lower: 0.0,
            upper,
            index: None,
        });
    }
    if lambda == 0.0 {
        return Ok(x.clone());
    }
    x.axpy(-lambda, &b.apply(x)?)
}

/// Perturbed forward-backward map `J_λ(E_λ x + λ ε)`.
///
/// With `eps = 0` this is `T_λ x`. Steps must lie in `(0, Θ]`.
pub fn fb_map(pair: &OperatorPair, lambda: f64, x: &Vector, eps: &Vector) -> Result<Vector> {
    Ok(fb_step(pair, lambda, x, eps)?.1)
}

/// Returns `(E_λ x + λ ε, J_λ(E_λ x + λ ε))`.
pub(crate) fn fb_step(
    pair: &OperatorPair,
    lambda: f64,
    x: &Vector,
    eps: &Vector,
) -> Result<(Vector, Vector)> {
    pair.check_step(lambda, None)?;
    if eps.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: eps.dim(),
        });
    }
    let bx = pair.cocoercive().apply(x)?;
    let shifted = x.zip_with(&bx, |xi, bi| xi - lambda * bi)?.axpy(lambda, eps)?;
    let next = pair.monotone().resolvent(lambda, &shifted)?;
    Ok((shifted, next))
}

/// Applies `T_h` to `x` `n` times without per-step allocation.
pub fn fb_sweep(pair: &OperatorPair, h: f64, x: &Vector, n: usize) -> Result<Vector> {
    pair.check_step(h, None)?;
    let mut cur = x.as_slice().to_vec();
    let mut bx = vec![0.0; cur.len()];
    for _ in 0..n {
        pair.cocoercive().apply_into(&cur, &mut bx)?;
        for (xi, bi) in cur.iter_mut().zip(&bx) {
            *xi -= h * bi;
        }
        pair.monotone().resolvent_in_place(h, &mut cur)?;
    }
    Vector::new(cur)
}

/// Exact forward-backward map `T_λ x`.
pub fn fb_exact(pair: &OperatorPair, lambda: f64, x: &Vector) -> Result<Vector> {
    fb_map(pair, lambda, x, &Vector::zeros(x.dim()))
}

/// Distance from `(shifted - next)/λ` to `A next`: the residual of the
/// discrete inclusion satisfied by one forward-backward step.
pub fn inclusion_residual(
    pair: &OperatorPair,
    lambda: f64,
    shifted: &Vector,
    next: &Vector,
) -> Result<f64> {
    let velocity = shifted.sub(next)?.scale(1.0 / lambda)?;
    pair.monotone().member_gap(next, &velocity)
}

/// Minimal norm of `(A + B)u` and a minimizing element `v + Bu`, `v ∈ Au`.
pub fn min_norm(pair: &OperatorPair, u: &Vector) -> Result<(f64, Vector)> {
    if !pair.monotone().in_domain(u) {
        return Err(Error::OutsideDomain);
    }
    let bu = pair.cocoercive().apply(u)?;
    let v = pair.monotone().nearest_in_image(u, &bu.scale(-1.0)?)?;
    let w = v.add(&bu)?;
    Ok((w.norm(), w))
}

/// Checks whether `y ∈ (A + B)x` up to the membership tolerance.
pub fn member_of_sum(pair: &OperatorPair, x: &Vector, y: &Vector) -> Result<f64> {
    if !pair.monotone().in_domain(x) {
        return Err(Error::OutsideDomain);
    }
    let bx = pair.cocoercive().apply(x)?;
    pair.monotone().member_gap(x, &y.sub(&bx)?)
}

/// Samples resolvent pairs and returns the most negative value of
/// `<x - y, (z - x)/λ - (z' - y)/λ>` observed, or 0 if none is negative.
pub fn verify_monotone(op: &dyn MonotoneOperator, sampler: &mut Sampler, trials: usize) -> f64 {
    assert!(trials >= 1);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let lambda = sampler.step(4.0, 4.0);
        let z = sampler.vector(op.dim());
        let zp = sampler.vector(op.dim());
        let (Ok(x), Ok(y)) = (op.resolvent(lambda, &z), op.resolvent(lambda, &zp)) else {
            return f64::NEG_INFINITY;
        };
        let value = (|| -> Result<f64> {
            let u = z.sub(&x)?.scale(1.0 / lambda)?;
            let v = zp.sub(&y)?.scale(1.0 / lambda)?;
            inner(&x.sub(&y)?, &u.sub(&v)?)
        })()
        .unwrap_or(f64::NEG_INFINITY);
        worst = worst.min(value);
    }
    worst
}

/// Samples pairs and returns the most negative cocoercivity slack
/// `<x - y, Bx - By> - θ ||Bx - By||^2`, or 0 if none is negative.
pub fn verify_cocoercive(b: &dyn CocoerciveOperator, sampler: &mut Sampler, trials: usize) -> f64 {
    assert!(trials >= 1);
    let theta = b.theta();
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x = sampler.vector(b.dim());
        let y = sampler.vector(b.dim());
        let value = (|| -> Result<f64> {
            let d = b.apply(&x)?.sub(&b.apply(&y)?)?;
            let penalty = if theta.is_finite() { theta * d.norm_sq() } else if d.norm_sq() == 0.0 { 0.0 } else { f64::INFINITY };
            Ok(inner(&x.sub(&y)?, &d)? - penalty)
        })()
        .unwrap_or(f64::NEG_INFINITY);
        worst = worst.min(value);
    }
    worst
}

/// Largest observed `||J_λ z - J_λ z'|| - ||z - z'||`.
pub fn resolvent_expansion(op: &dyn MonotoneOperator, sampler: &mut Sampler, trials: usize) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let lambda = sampler.step(4.0, 4.0);
        let z = sampler.vector(op.dim());
        let zp = sampler.vector(op.dim());
        let gain = (|| -> Result<f64> {
            Ok(op.resolvent(lambda, &z)?.dist(&op.resolvent(lambda, &zp)?)? - z.dist(&zp)?)
        })()
        .unwrap_or(f64::INFINITY);
        worst = worst.max(gain);
    }
    worst
}

/// Largest observed resolvent consistency gap `member_gap(x, (z - x)/λ)` relative to its tolerance.
pub fn resolvent_consistency(op: &dyn MonotoneOperator, sampler: &mut Sampler, trials: usize) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let lambda = sampler.step(4.0, 4.0);
        let z = sampler.vector(op.dim());
        let ratio = (|| -> Result<f64> {
            let x = op.resolvent(lambda, &z)?;
            let v = z.sub(&x)?.scale(1.0 / lambda)?;
            Ok(op.member_gap(&x, &v)? / member_tol(x.norm()))
        })()
        .unwrap_or(f64::INFINITY);
        worst = worst.max(ratio);
    }
    worst
}
