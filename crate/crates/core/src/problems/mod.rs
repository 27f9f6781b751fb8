//! Catalog of operator pairs with closed-form resolvents.
//!
//! Every instance declares its cocoercivity parameter, verifies monotonicity
//! and cocoercivity on sampled pairs at construction, and provides a zero-set
//! oracle. Two instances also carry an exact flow.
//!
//! Rotation convention for [`make_skew2d`]: with `A = [[0, ω], [-ω, 0]]` the
//! flow of `-u' = Au` is `u(t) = R(ωt) u(0)` where `R(φ)` is the
//! counterclockwise rotation `[[cos φ, -sin φ], [sin φ, cos φ]]`. For
//! `ω = 1`, `u(0) = (1, 0)` and `t = π/2` the flow is at `(0, 1)`.

mod oracle;
mod ops;
pub mod spectral;

use std::sync::Arc;

use nalgebra::DMatrix;

pub use oracle::{box_qp_minimizer, lasso_minimizer};
pub use ops::{soft_threshold, AffineMap, BoxNormalCone, L1Subdifferential, LinearMonotone};

use crate::error::{Error, Result};
use crate::operators::{min_norm, verify_cocoercive, verify_monotone, OperatorPair};
use crate::sampling::Sampler;
use crate::tolerances::{member_tol, PROPERTY_TOL};
use crate::vector::{SpaceConstants, Vector};
use ops::{from_dvector, to_dvector};
use spectral::psd_spectral_upper_bound;

/// Trials spent on the construction-time property checks.
pub const CONSTRUCTION_TRIALS: usize = 1000;

/// Closed-form flows of `-u' ∈ (A + B)u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactFlow {
    /// `u(t) = exp(-(a + b)t) u(0)`.
    Linear1d { a: f64, b: f64 },
    /// `u(t) = exp(-γt) R(ωt) u(0)`, counterclockwise for `ω > 0`.
    Skew2d { omega: f64, gamma: f64 },
}

impl ExactFlow {
    pub fn eval(&self, x0: &Vector, t: f64) -> Result<Vector> {
        match *self {
            ExactFlow::Linear1d { a, b } => x0.scale((-(a + b) * t).exp()),
            ExactFlow::Skew2d { omega, gamma } => {
                let xs = x0.as_slice();
                if xs.len() != 2 {
                    return Err(Error::DimensionMismatch { expected: 2, found: xs.len() });
                }
                let (s, c) = (omega * t).sin_cos();
                let decay = (-gamma * t).exp();
                Vector::new(vec![decay * (c * xs[0] - s * xs[1]), decay * (s * xs[0] + c * xs[1])])
            }
        }
    }
}

/// Projection onto the zero set of `A + B`.
#[derive(Debug, Clone, PartialEq)]
pub enum ZeroOracle {
    /// The zero set is the single point.
    Point(Vector),
    /// Every point is a zero.
    Everywhere,
}

impl ZeroOracle {
    pub fn project(&self, x: &Vector) -> Vector {
        match self {
            ZeroOracle::Point(p) => p.clone(),
            ZeroOracle::Everywhere => x.clone(),
        }
    }
}

/// An operator pair with its analytic side information.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub id: String,
    pub pair: OperatorPair,
    pub exact_flow: Option<ExactFlow>,
    pub zero_oracle: Option<ZeroOracle>,
    pub default_x0: Vector,
    pub notes: String,
}

impl ProblemInstance {
    fn build(
        id: &str,
        pair: OperatorPair,
        exact_flow: Option<ExactFlow>,
        zero_oracle: Option<ZeroOracle>,
        default_x0: Vector,
        notes: String,
    ) -> Result<Self> {
        let mut sampler = Sampler::new(0x5eed);
        let mono = verify_monotone(pair.monotone(), &mut sampler, CONSTRUCTION_TRIALS);
        if mono < -PROPERTY_TOL * (1.0 + sampler.radius().powi(2)) {
            return Err(Error::InvalidParameter(format!("{id}: monotonicity violated by {mono:e}")));
        }
        let coco = verify_cocoercive(pair.cocoercive(), &mut sampler, CONSTRUCTION_TRIALS);
        if coco < -PROPERTY_TOL * (1.0 + sampler.radius().powi(2)) {
            return Err(Error::InvalidParameter(format!("{id}: cocoercivity violated by {coco:e}")));
        }
        if let Some(ZeroOracle::Point(z)) = &zero_oracle {
            let (value, _) = min_norm(&pair, z)?;
            if value > member_tol(z.norm()) {
                return Err(Error::InvalidParameter(format!("{id}: zero oracle residual {value:e}")));
            }
        }
        Ok(ProblemInstance {
            id: id.to_string(),
            pair,
            exact_flow,
            zero_oracle,
            default_x0,
            notes,
        })
    }

    /// Projection of `x` onto the zero set, when an oracle exists.
    pub fn zero_point(&self, x: &Vector) -> Option<Vector> {
        self.zero_oracle.as_ref().map(|o| o.project(x))
    }

    pub fn exact_flow_at(&self, x0: &Vector, t: f64) -> Option<Result<Vector>> {
        self.exact_flow.map(|f| f.eval(x0, t))
    }
}

fn pair(a: impl crate::operators::MonotoneOperator + 'static, b: AffineMap) -> Result<OperatorPair> {
    OperatorPair::new(Arc::new(a), Arc::new(b), SpaceConstants::EUCLIDEAN)
}

/// `A x = a x`, `B x = b x` on the real line.
pub fn make_linear1d(a: f64, b: f64) -> Result<ProblemInstance> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("linear1d requires b > 0, got {b}")));
    }
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("linear1d requires a >= 0, got {a}")));
    }
    let p = pair(
        LinearMonotone::new(DMatrix::from_element(1, 1, a))?,
        AffineMap::new(DMatrix::from_element(1, 1, b), Vector::zeros(1), 1.0 / b)?,
    )?;
    ProblemInstance::build(
        "linear1d",
        p,
        Some(ExactFlow::Linear1d { a, b }),
        Some(ZeroOracle::Point(Vector::zeros(1))),
        Vector::scalar(1.0)?,
        format!("A = {a} x with resolvent z/(1 + λ{a}); B = {b} x, theta = 1/{b}; |||(A+B)u||| = {}|u|", a + b),
    )
}

/// Skew rotation generator plus a scalar damping `γI`.
pub fn make_skew2d(omega: f64, gamma: f64) -> Result<ProblemInstance> {
    if !(gamma >= 0.0) || !gamma.is_finite() || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "skew2d requires finite omega and gamma >= 0, got ({omega}, {gamma})"
        )));
    }
    let a = LinearMonotone::new(DMatrix::from_row_slice(2, 2, &[0.0, omega, -omega, 0.0]))?;
    let b = if gamma > 0.0 {
        AffineMap::new(DMatrix::identity(2, 2) * gamma, Vector::zeros(2), 1.0 / gamma)?
    } else {
        AffineMap::zero(2)
    };
    let zero = if omega == 0.0 && gamma == 0.0 {
        ZeroOracle::Everywhere
    } else {
        ZeroOracle::Point(Vector::zeros(2))
    };
    ProblemInstance::build(
        "skew2d",
        pair(a, b)?,
        Some(ExactFlow::Skew2d { omega, gamma }),
        Some(zero),
        Vector::new(vec![1.0, 0.0])?,
        format!(
            "A = [[0, {omega}], [-{omega}, 0]]; B = {gamma} I, theta = 1/{gamma} (unbounded when gamma = 0); \
             flow rotates counterclockwise"
        ),
    )
}

/// `A = w ∂||·||₁`, `B x = Mᵀ(Mx - b)`.
pub fn make_l1_quadratic(m: DMatrix<f64>, b: Vector, w: f64) -> Result<ProblemInstance> {
    if m.nrows() != b.dim() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: b.dim() });
    }
    if m.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidParameter("l1_quadratic requires a nonzero matrix".into()));
    }
    let n = m.ncols();
    let gram = m.transpose() * &m;
    let lip = psd_spectral_upper_bound(&gram);
    let offset = from_dvector(&-(m.transpose() * to_dvector(&b)))?;
    let l1 = L1Subdifferential::new(n, w)?;
    let minimizer = lasso_minimizer(&m, &to_dvector(&b), w);
    let p = pair(
        l1,
        AffineMap::new(gram, offset, 1.0 / lip)?,
    )?;
    ProblemInstance::build(
        "l1_quadratic",
        p,
        None,
        Some(ZeroOracle::Point(from_dvector(&minimizer)?)),
        Vector::new((0..n).map(|i| if i % 2 == 0 { 2.0 } else { -1.5 }).collect())?,
        format!("A = {w} d||.||_1 (soft threshold); B = M^T(Mx - b), theta = 1/{lip} (certified upper bound of ||M^T M||)"),
    )
}

/// `A` = normal cone of `[lo, hi]`, `B x = Qx + q`.
pub fn make_box_projected(lo: Vector, hi: Vector, q_mat: DMatrix<f64>, q: Vector) -> Result<ProblemInstance> {
    let n = lo.dim();
    if q_mat.nrows() != n || q_mat.ncols() != n || q.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: q_mat.nrows() });
    }
    let asym = (&q_mat - q_mat.transpose()).amax();
    if asym > 1e-12 * (1.0 + q_mat.amax()) {
        return Err(Error::InvalidParameter("box_projected requires symmetric Q".into()));
    }
    if spectral::symmetric_min_eigenvalue(&q_mat) < -1e-12 * (1.0 + q_mat.amax()) {
        return Err(Error::InvalidParameter("box_projected requires positive semidefinite Q".into()));
    }
    let lip = psd_spectral_upper_bound(&q_mat);
    let theta = if lip > 0.0 { 1.0 / lip } else { f64::INFINITY };
    let cone = BoxNormalCone::new(lo.clone(), hi.clone())?;
    let minimizer = box_qp_minimizer(&q_mat, &to_dvector(&q), &to_dvector(&lo), &to_dvector(&hi));
    let x0 = hi.clone();
    let p = pair(cone, AffineMap::new(q_mat, q, theta)?)?;
    ProblemInstance::build(
        "box_projected",
        p,
        None,
        Some(ZeroOracle::Point(from_dvector(&minimizer)?)),
        x0,
        format!("A = normal cone of the box (projection resolvent); B = Qx + q, theta = 1/{lip}"),
    )
}

/// The four default catalog instances.
pub fn catalog() -> Vec<ProblemInstance> {
    vec![
        default_linear1d(),
        default_skew2d(),
        default_l1_quadratic(),
        default_box_projected(),
    ]
}

pub fn default_linear1d() -> ProblemInstance {
    make_linear1d(1.0, 1.0).expect("valid default")
}

pub fn default_skew2d() -> ProblemInstance {
    make_skew2d(1.0, 0.5).expect("valid default")
}

pub fn default_l1_quadratic() -> ProblemInstance {
    make_l1_quadratic(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.2, 0.9]),
        Vector::new(vec![1.0, -0.6]).expect("finite"),
        0.25,
    )
    .expect("valid default")
}

pub fn default_box_projected() -> ProblemInstance {
    make_box_projected(
        Vector::zeros(2),
        Vector::new(vec![1.0, 1.0]).expect("finite"),
        DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
        Vector::new(vec![-1.0, 0.5]).expect("finite"),
    )
    .expect("valid default")
}

/// The one-dimensional lasso `A = ∂|·|`, `B x = x - 1`, whose zero set is `{0}`.
pub fn l1_quadratic_1d() -> ProblemInstance {
    let mut p = make_l1_quadratic(DMatrix::from_element(1, 1, 1.0), Vector::scalar(1.0).expect("finite"), 1.0)
        .expect("valid instance");
    p.id = "l1_quadratic_1d".into();
    p
}

/// Looks up a default catalog instance, or the 1-D lasso `l1_quadratic_1d`, by id.
pub fn by_id(id: &str) -> Option<ProblemInstance> {
    match id {
        "l1_quadratic_1d" => Some(l1_quadratic_1d()),
        "linear1d" => Some(default_linear1d()),
        "skew2d" => Some(default_skew2d()),
        "l1_quadratic" => Some(default_l1_quadratic()),
        "box_projected" => Some(default_box_projected()),
        _ => None,
    }
}
