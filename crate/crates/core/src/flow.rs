//! Finite-horizon approximation of the semigroup generated by `-(A+B)`.
//!
//! The exponential formula `u_m(t) = [T_{t/m}]^m x0` converges to the flow
//! `S(t)x0` with
//! `||u_m(t) - u_n(s)|| <= |||(A+B)x0||| sqrt((t-s)^2 + t^2/m + s^2/n)`,
//! so `m >= (|||(A+B)x0||| t / tol)^2` certifies a point to within `tol`.
//!
//! For long horizons [`certified_trajectory`] uses a different certificate:
//! a sweep with steps `h_i` started at `y` satisfies
//! `||x_k - S(σ_k)y|| <= |||(A+B)y||| sqrt(τ_k)`, and restarting the sweep
//! from an approximate point adds its error (the flow is nonexpansive). Since
//! the minimal norm usually decays along the trajectory, restarts make each
//! later segment cheaper.

use std::io::Write;

use crate::error::{Error, Result};
use crate::operators::{fb_step, fb_sweep, member_of_sum, min_norm, OperatorPair};
use crate::problems::ExactFlow;
use crate::splitting::CompensatedSum;
use crate::tolerances::member_tol;
use crate::vector::{fmt_f64, inner, Vector};

const PILOT_STEPS: usize = 4096;
const MAX_SEGMENT_LEVEL: u32 = 8;
const TIME_MATCH_REL: f64 = 1e-12;

/// Request for `S(t)x0` to accuracy `tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowQuery {
    pub x0: Vector,
    pub t: f64,
    pub tol: f64,
}

impl FlowQuery {
    pub fn new(x0: Vector, t: f64, tol: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")));
        }
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
        }
        Ok(FlowQuery { x0, t, tol })
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Smallest `m` with `t/m <= theta`.
pub fn minimal_steps(t: f64, theta: f64) -> usize {
    if t == 0.0 || theta.is_infinite() {
        return 1;
    }
    let mut m = ((t / theta).ceil() as usize).max(1);
    while t / m as f64 > theta {
        m += 1;
    }
    while m > 1 && t / (m - 1) as f64 <= theta {
        m -= 1;
    }
    m
}

fn sweep(pair: &OperatorPair, h: f64, x: &Vector, n: usize) -> Result<Vector> {
    fb_sweep(pair, h, x, n)
}

/// `[T_{t/m}]^m x0`.
pub fn exp_formula(pair: &OperatorPair, x0: &Vector, t: f64, m: usize) -> Result<Vector> {
    check_time(t)?;
    if m == 0 {
        return Err(Error::InvalidParameter("the exponential formula needs m >= 1".into()));
    }
    if x0.dim() != pair.dim() {
        return Err(Error::DimensionMismatch { expected: pair.dim(), found: x0.dim() });
    }
    if t == 0.0 {
        return Ok(x0.clone());
    }
    let h = t / m as f64;
    if h > pair.theta_max() {
        return Err(Error::TooFewSteps {
            m,
            minimal: minimal_steps(t, pair.theta_max()),
        });
    }
    sweep(pair, h, x0, m)
}

/// `⌊m t / S⌋`, the number of steps taken by the interpolant at time `t`.
pub fn pc_index(horizon: f64, m: usize, t: f64) -> Result<usize> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::InvalidParameter(format!("time {t} outside [0, {horizon}]")));
    }
    Ok(((m as f64 * t / horizon).floor() as usize).min(m))
}

/// Piecewise-constant interpolant `v_m(t) = [T_{S/m}]^{⌊mt/S⌋} x0` on `[0, S]`.
pub fn pc_interpolant(pair: &OperatorPair, x0: &Vector, horizon: f64, m: usize, t: f64) -> Result<Vector> {
    let steps = pc_index(horizon, m, t)?;
    let h = horizon / m as f64;
    if h > pair.theta_max() {
        return Err(Error::TooFewSteps {
            m,
            minimal: minimal_steps(horizon, pair.theta_max()),
        });
    }
    sweep(pair, h, x0, steps)
}

/// All iterates `[T_{S/m}]^i x0`, `i = 0..=m`.
pub fn pc_sequence(pair: &OperatorPair, x0: &Vector, horizon: f64, m: usize) -> Result<Vec<Vector>> {
    let h = horizon / m as f64;
    if m == 0 || !(h > 0.0) {
        return Err(Error::InvalidParameter("interpolant needs m >= 1 and S > 0".into()));
    }
    if h > pair.theta_max() {
        return Err(Error::TooFewSteps {
            m,
            minimal: minimal_steps(horizon, pair.theta_max()),
        });
    }
    let zero = Vector::zeros(x0.dim());
    let mut out = Vec::with_capacity(m + 1);
    out.push(x0.clone());
    for i in 0..m {
        let next = fb_step(pair, h, &out[i], &zero)?.1;
        out.push(next);
    }
    Ok(out)
}

/// `minnorm · sqrt((t-s)^2 + t^2/m + s^2/n)`; `n = None` drops the last term.
pub fn cauchy_bound(minnorm: f64, t: f64, s: f64, m: usize, n: Option<usize>) -> Result<f64> {
    if m == 0 || n == Some(0) {
        return Err(Error::InvalidParameter("step counts must be >= 1".into()));
    }
    let last = n.map_or(0.0, |n| s * s / n as f64);
    Ok(minnorm * ((t - s).powi(2) + t * t / m as f64 + last).sqrt())
}

/// Smallest `m` with `minnorm · t / sqrt(m) <= tol` and `t/m <= theta`.
pub fn steps_for_tolerance(minnorm: f64, t: f64, tol: f64, theta: f64) -> u64 {
    let by_theta = minimal_steps(t, theta) as u64;
    if minnorm == 0.0 || t == 0.0 {
        return by_theta;
    }
    let ratio = minnorm * t / tol;
    let mut m = (ratio * ratio).ceil().max(1.0) as u64;
    while minnorm * t / (m as f64).sqrt() > tol {
        m += 1;
    }
    while m > 1 && minnorm * t / ((m - 1) as f64).sqrt() <= tol {
        m -= 1;
    }
    m.max(by_theta)
}

/// `S(t)x0` to within `query.tol` by the exponential formula; returns the
/// point and the `m` used.
pub fn approximate_flow(pair: &OperatorPair, query: &FlowQuery, budget: u64) -> Result<(Vector, usize)> {
    let (minnorm, _) = min_norm(pair, &query.x0)?;
    if minnorm == 0.0 || query.t == 0.0 {
        return Ok((query.x0.clone(), 1));
    }
    let m = steps_for_tolerance(minnorm, query.t, query.tol, pair.theta_max());
    if m > budget {
        return Err(Error::BudgetExceeded { required: m, budget });
    }
    let m = m as usize;
    Ok((exp_formula(pair, &query.x0, query.t, m)?, m))
}

/// Reference value with sixteen times the certified step count; returns the
/// point and its certified distance to `S(t)x0` (at most `tol / 4`).
pub fn reference_flow(pair: &OperatorPair, query: &FlowQuery, budget: u64) -> Result<(Vector, f64)> {
    let (minnorm, _) = min_norm(pair, &query.x0)?;
    if minnorm == 0.0 || query.t == 0.0 {
        return Ok((query.x0.clone(), 0.0));
    }
    let m = 16 * steps_for_tolerance(minnorm, query.t, query.tol, pair.theta_max());
    if m > budget {
        return Err(Error::BudgetExceeded { required: m, budget });
    }
    let m = m as usize;
    let point = exp_formula(pair, &query.x0, query.t, m)?;
    Ok((point, minnorm * query.t / (m as f64).sqrt()))
}

/// `3 S minnorm / sqrt(m)`.
pub fn um_vm_gap_bound(minnorm: f64, horizon: f64, m: usize) -> f64 {
    3.0 * horizon * minnorm / (m as f64).sqrt()
}

/// Trajectory samples with per-point certified distance to the true flow.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGrid {
    pub times: Vec<f64>,
    pub points: Vec<Vector>,
    pub errors: Vec<f64>,
    pub certified_error: f64,
}

impl TrajectoryGrid {
    pub fn new(times: Vec<f64>, points: Vec<Vector>, errors: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != points.len() || times.len() != errors.len() {
            return Err(Error::InvalidParameter("grid needs matching, nonempty times, points and errors".into()));
        }
        check_times(&times)?;
        if errors.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::InvalidParameter("certified errors must be nonnegative".into()));
        }
        let certified_error = errors.iter().copied().fold(0.0, f64::max);
        Ok(TrajectoryGrid {
            times,
            points,
            errors,
            certified_error,
        })
    }

    /// Samples a closed-form flow; errors account for rounding only.
    pub fn from_exact(flow: &ExactFlow, x0: &Vector, times: Vec<f64>) -> Result<Self> {
        check_times(&times)?;
        let points = times.iter().map(|&t| flow.eval(x0, t)).collect::<Result<Vec<_>>>()?;
        let errors = points.iter().map(|p| 8.0 * f64::EPSILON * (1.0 + p.norm())).collect();
        Self::new(times, points, errors)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the grid time equal to `t` (up to rounding).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = self.times.partition_point(|&s| s < t - TIME_MATCH_REL * (1.0 + t.abs()));
        (i < self.times.len() && (self.times[i] - t).abs() <= TIME_MATCH_REL * (1.0 + t.abs())).then_some(i)
    }

    /// CSV with columns `t, x, certified_error, minnorm_profile`.
    pub fn write_csv<W: Write>(&self, writer: W, profile: Option<&[f64]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "x", "certified_error", "minnorm_profile"])?;
        for i in 0..self.len() {
            w.write_record([
                fmt_f64(self.times[i]),
                self.points[i].to_csv_field(),
                fmt_f64(self.errors[i]),
                profile.map(|p| fmt_f64(p[i])).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidParameter("grid times must be finite and >= 0".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("grid times must be strictly increasing".into()));
    }
    Ok(())
}

/// Uniform grid `0, T/n, ..., T`.
pub fn uniform_times(horizon: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|i| if i == intervals { horizon } else { horizon * i as f64 / intervals as f64 })
        .collect()
}

/// Minimal norms along a coarse sweep, used to plan segment budgets.
fn pilot_profile(pair: &OperatorPair, x0: &Vector, horizon: f64) -> Result<(f64, Vec<f64>)> {
    let h = (horizon / PILOT_STEPS as f64).min(pair.theta_max());
    let n = (horizon / h).ceil() as usize;
    let h = horizon / n as f64;
    let mut x = x0.clone();
    let mut profile = Vec::with_capacity(n + 1);
    profile.push(min_norm(pair, &x)?.0);
    for _ in 0..n {
        x = fb_sweep(pair, h, &x, 1)?;
        profile.push(min_norm(pair, &x)?.0);
    }
    Ok((h, profile))
}

/// Certified approximation of `t ↦ S(t)x0` at `times` (which must start at 0),
/// with total certified error at most `tol` at every sample.
pub fn certified_trajectory(pair: &OperatorPair, x0: &Vector, times: &[f64], tol: f64, budget: u64) -> Result<TrajectoryGrid> {
    check_times(times)?;
    if times.first() != Some(&0.0) {
        return Err(Error::InvalidParameter("trajectory grids start at t = 0".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let horizon = *times.last().expect("nonempty");
    let (mn0, _) = min_norm(pair, x0)?;
    if horizon == 0.0 || mn0 == 0.0 {
        let n = times.len();
        return TrajectoryGrid::new(times.to_vec(), vec![x0.clone(); n], vec![0.0; n]);
    }

    let (pilot_h, pilot) = pilot_profile(pair, x0, horizon)?;
    let floor = 1e-6 * mn0;
    let estimate = |t: f64| pilot[((t / pilot_h) as usize).min(pilot.len() - 1)].max(floor);
    let plan = |segments: usize| -> Vec<f64> {
        let len = horizon / segments as f64;
        (0..segments).map(|j| (estimate(j as f64 * len) * len).powf(2.0 / 3.0)).collect()
    };
    let segments = (0..=MAX_SEGMENT_LEVEL)
        .map(|i| 1usize << i)
        .map(|n| (n, plan(n).iter().sum::<f64>()))
        .fold((1usize, f64::INFINITY), |best, (n, w)| if w < best.1 * (1.0 - 1e-9) { (n, w) } else { best })
        .0;
    let weights = plan(segments);
    let total_weight: f64 = weights.iter().sum();

    let theta = pair.theta_max();
    let mut points = Vec::with_capacity(times.len());
    let mut errors = Vec::with_capacity(times.len());
    points.push(x0.clone());
    errors.push(0.0);
    let mut next_out = 1;
    let mut current = x0.clone();
    let mut err = 0.0;
    let mut spent: u64 = 0;

    for (j, w) in weights.iter().enumerate() {
        let start = horizon * j as f64 / segments as f64;
        let end = if j + 1 == segments { horizon } else { horizon * (j + 1) as f64 / segments as f64 };
        let (mn, _) = min_norm(pair, &current)?;
        if mn == 0.0 {
            break;
        }
        let share = tol * w / total_weight;
        let eta = ((share / mn).powi(2) / (end - start)).min(theta);

        let mut targets: Vec<(f64, bool)> = Vec::new();
        let mut k = next_out;
        while k < times.len() && times[k] <= end {
            targets.push((times[k], true));
            k += 1;
        }
        if targets.last().is_none_or(|&(t, _)| t < end) {
            targets.push((end, false));
        }
        let mut pos = start;
        let mut counts = Vec::with_capacity(targets.len());
        for &(t, _) in &targets {
            let len = t - pos;
            let mut n = ((len / eta).ceil() as u64).max(1);
            while len / n as f64 > theta {
                n += 1;
            }
            counts.push(n);
            pos = t;
        }
        let needed: u64 = counts.iter().sum();
        if spent + needed > budget {
            return Err(Error::BudgetExceeded {
                required: spent + needed,
                budget,
            });
        }
        spent += needed;

        let mut tau = CompensatedSum::default();
        let mut pos = start;
        for (&(t, is_output), &n) in targets.iter().zip(&counts) {
            let h = (t - pos) / n as f64;
            current = fb_sweep(pair, h, &current, n as usize)?;
            tau.add(n as f64 * h * h);
            pos = t;
            if is_output {
                points.push(current.clone());
                errors.push(err + mn * tau.value().sqrt());
                next_out += 1;
            }
        }
        err += mn * tau.value().sqrt();
    }
    while points.len() < times.len() {
        points.push(current.clone());
        errors.push(err);
    }
    TrajectoryGrid::new(times.to_vec(), points, errors)
}

/// `S(t)x0` with certified error at most `tol`, by [`certified_trajectory`].
pub fn certified_flow(pair: &OperatorPair, x0: &Vector, t: f64, tol: f64, budget: u64) -> Result<(Vector, f64)> {
    check_time(t)?;
    let times = if t == 0.0 { vec![0.0] } else { vec![0.0, t] };
    let grid = certified_trajectory(pair, x0, &times, tol, budget)?;
    let i = grid.len() - 1;
    Ok((grid.points[i].clone(), grid.errors[i]))
}

fn aligned_indices(grid: &TrajectoryGrid, s: f64, t: f64) -> Result<(usize, usize)> {
    if s > t {
        return Err(Error::InvalidParameter(format!("need s <= t, got s = {s}, t = {t}")));
    }
    let i = grid
        .index_of(s)
        .ok_or_else(|| Error::InvalidParameter(format!("s = {s} is not a grid time")))?;
    let j = grid
        .index_of(t)
        .ok_or_else(|| Error::InvalidParameter(format!("t = {t} is not a grid time")))?;
    Ok((i, j))
}

/// `||u(t)-x||^2 - ||u(s)-x||^2 - 2∫_s^t <x - u(r), y> dr` with the trapezoidal
/// rule on the grid. Nonpositive for the true flow whenever `y ∈ (A+B)x`.
pub fn benilan_defect(pair: &OperatorPair, grid: &TrajectoryGrid, x: &Vector, y: &Vector, s: f64, t: f64) -> Result<f64> {
    let gap = member_of_sum(pair, x, y)?;
    if gap > member_tol(x.norm()) {
        return Err(Error::NotInImage { gap });
    }
    let (i, j) = aligned_indices(grid, s, t)?;
    if i == j {
        return Ok(0.0);
    }
    let f = |k: usize| -> Result<f64> { inner(&x.sub(&grid.points[k])?, y) };
    let mut integral = CompensatedSum::default();
    let mut left = f(i)?;
    for k in i..j {
        let right = f(k + 1)?;
        integral.add(0.5 * (grid.times[k + 1] - grid.times[k]) * (left + right));
        left = right;
    }
    let end = grid.points[j].dist(x)?.powi(2);
    let begin = grid.points[i].dist(x)?.powi(2);
    Ok(end - begin - 2.0 * integral.value())
}

/// Upper bound on the amount by which [`benilan_defect`] can exceed the true
/// (nonpositive) defect: sample errors at both endpoints and inside the
/// integral, plus trapezoidal error `K Δ^2 / 4` per interval with
/// `K = lipschitz · ||y||`.
pub fn benilan_budget(grid: &TrajectoryGrid, x: &Vector, y: &Vector, s: f64, t: f64, lipschitz: f64) -> Result<f64> {
    let (i, j) = aligned_indices(grid, s, t)?;
    if i == j {
        return Ok(0.0);
    }
    let endpoint = |k: usize| -> Result<f64> {
        let e = grid.errors[k];
        Ok(e * (2.0 * grid.points[k].dist(x)? + e))
    };
    let ny = y.norm();
    let mut sample = 0.0;
    let mut quadrature = 0.0;
    for k in i..j {
        let dt = grid.times[k + 1] - grid.times[k];
        sample += dt * grid.errors[k].max(grid.errors[k + 1]);
        quadrature += lipschitz * ny * dt * dt / 4.0;
    }
    Ok(endpoint(i)? + endpoint(j)? + 2.0 * ny * sample + 2.0 * quadrature)
}

/// `max_{s<t} ||u(t) - u(s)|| - minnorm |t - s|` over grid pairs.
pub fn lipschitz_defect(grid: &TrajectoryGrid, minnorm: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        for j in (i + 1)..grid.len() {
            let d = grid.points[j].dist(&grid.points[i]).expect("grid points share a dimension");
            worst = worst.max(d - minnorm * (grid.times[j] - grid.times[i]));
        }
    }
    if grid.len() < 2 {
        0.0
    } else {
        worst
    }
}

/// `|||(A+B)u(t_i)|||` at every grid point.
pub fn minnorm_profile(pair: &OperatorPair, grid: &TrajectoryGrid) -> Result<Vec<f64>> {
    grid.points.iter().map(|p| Ok(min_norm(pair, p)?.0)).collect()
}

/// Largest increase `p_j - p_i`, `i < j`, of a profile; zero if nonincreasing.
pub fn profile_increase(profile: &[f64]) -> f64 {
    let mut low = f64::INFINITY;
    let mut worst = 0.0f64;
    for &p in profile {
        worst = worst.max(p - low);
        low = low.min(p);
    }
    worst
}

/// Slack `2 (1/θ + L_A) e` allowed for a sampled profile when `A` is Lipschitz.
pub fn profile_slack(pair: &OperatorPair, certified_error: f64) -> Option<f64> {
    pair.lipschitz().map(|l| 2.0 * l * certified_error)
}

/// `||x0 - u0|| + min(mn_x0, mn_u0) sqrt((σ_k - t)^2 + τ_k)`.
pub fn hybrid_bound(
    x0: &Vector,
    u0: &Vector,
    minnorm_x0: f64,
    minnorm_u0: f64,
    sigma_k: f64,
    tau_k: f64,
    t: f64,
) -> Result<f64> {
    if tau_k < 0.0 {
        return Err(Error::InvalidParameter(format!("tau must be nonnegative, got {tau_k}")));
    }
    Ok(x0.dist(u0)? + minnorm_x0.min(minnorm_u0) * ((sigma_k - t).powi(2) + tau_k).sqrt())
}
