//! Zero-set oracles that never touch the forward-backward map.
//!
//! The lasso oracle locates the minimizer of `½||Mx - b||² + w||x||₁` by a
//! dense grid search (dimensions 1 and 2) followed by exact coordinatewise
//! minimization, where each one-dimensional subproblem is solved by bisection
//! on its optimality condition. The box oracle minimizes `½xᵀQx + qᵀx` over
//! the box, first trying the unconstrained stationary point.

use nalgebra::{DMatrix, DVector};

const GRID_POINTS: usize = 81;
const MAX_SWEEPS: usize = 100_000;
const BISECTION_STEPS: usize = 200;

fn lasso_objective(m: &DMatrix<f64>, b: &DVector<f64>, w: f64, x: &DVector<f64>) -> f64 {
    0.5 * (m * x - b).norm_squared() + w * x.lp_norm(1)
}

/// Root of `curvature * t + offset = 0` on `[lo, hi]` by bisection; the
/// function is increasing in `t`.
fn bisect_increasing(curvature: f64, offset: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if curvature * mid + offset > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimizer of `½ s t² + c t + w|t|` for `s >= 0`.
///
/// Zero is optimal iff `|c| <= w`; otherwise the root of the active branch is
/// bracketed and bisected.
fn scalar_lasso(s: f64, c: f64, w: f64) -> f64 {
    if c.abs() <= w {
        return 0.0;
    }
    if s <= 0.0 {
        // unbounded below; cannot happen for full-rank columns
        return 0.0;
    }
    if c < -w {
        // branch t > 0: s t + c + w = 0
        let mut hi = 1.0;
        while s * hi + c + w <= 0.0 {
            hi *= 2.0;
        }
        bisect_increasing(s, c + w, 0.0, hi)
    } else {
        let mut lo = -1.0;
        while s * lo + c - w >= 0.0 {
            lo *= 2.0;
        }
        bisect_increasing(s, c - w, lo, 0.0)
    }
}

/// Minimizer of the lasso objective.
pub fn lasso_minimizer(m: &DMatrix<f64>, b: &DVector<f64>, w: f64) -> DVector<f64> {
    let n = m.ncols();
    let gram = m.transpose() * m;
    let mtb = m.transpose() * b;

    let mut x = DVector::zeros(n);
    if n <= 2 {
        // the minimizer satisfies w||x||₁ <= objective(0)
        let radius = 0.5 * b.norm_squared() / w;
        let coord = |i: usize| -radius + 2.0 * radius * i as f64 / (GRID_POINTS - 1) as f64;
        let mut best = lasso_objective(m, b, w, &x);
        let total = GRID_POINTS.pow(n as u32);
        for idx in 0..total {
            let cand = DVector::from_fn(n, |j, _| coord(idx / GRID_POINTS.pow(j as u32) % GRID_POINTS));
            let value = lasso_objective(m, b, w, &cand);
            if value < best {
                best = value;
                x = cand;
            }
        }
    }

    for _ in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        for i in 0..n {
            let s = gram[(i, i)];
            let c = gram.row(i).dot(&x.transpose()) - s * x[i] - mtb[i];
            let t = scalar_lasso(s, c, w);
            change = change.max((t - x[i]).abs());
            x[i] = t;
        }
        if change <= 1e-15 * (1.0 + x.amax()) {
            break;
        }
    }
    x
}

/// Minimizer of `½xᵀQx + qᵀx` over `[lo, hi]`.
pub fn box_qp_minimizer(q_mat: &DMatrix<f64>, q: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    let n = q.len();
    if let Some(sol) = q_mat.clone().lu().solve(&(-q)) {
        if (0..n).all(|i| lo[i] <= sol[i] && sol[i] <= hi[i]) && sol.iter().all(|v| v.is_finite()) {
            return sol;
        }
    }
    let mut x = DVector::from_fn(n, |i, _| 0.5 * (lo[i] + hi[i]));
    for _ in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        for i in 0..n {
            let s = q_mat[(i, i)];
            let c = q_mat.row(i).dot(&x.transpose()) - s * x[i] + q[i];
            let t = if s > 0.0 {
                (-c / s).clamp(lo[i], hi[i])
            } else if c > 0.0 {
                lo[i]
            } else if c < 0.0 {
                hi[i]
            } else {
                x[i]
            };
            change = change.max((t - x[i]).abs());
            x[i] = t;
        }
        if change <= 1e-15 * (1.0 + x.amax()) {
            break;
        }
    }
    x
}
