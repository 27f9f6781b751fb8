//! Step-size schedules and the forward-backward sequence driver.
//!
//! Schedules are 1-indexed: `λ_1` is the first step. Prefix sums
//! `σ_k = Σ_{i≤k} λ_i` and `τ_k = Σ_{i≤k} λ_i²` are cached incrementally with
//! compensated summation.

use std::io::Write;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::operators::{fb_step, inclusion_residual, OperatorPair};
use crate::vector::{fmt_f64, Vector};

/// Upper limit on cached prefix entries.
pub const MAX_CACHED_INDEX: usize = 50_000_000;

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Generator of the step sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    /// `λ_n = step` for `n <= count` (unbounded when `count` is `None`).
    Constant { step: f64, count: Option<usize> },
    /// `λ_n = scale · n^(-exponent)`.
    Power { scale: f64, exponent: f64 },
    /// Finite explicit list.
    Explicit(Vec<f64>),
}

#[derive(Debug, Default)]
struct PrefixCache {
    sigma: Vec<f64>,
    tau: Vec<f64>,
    sigma_acc: CompensatedSum,
    tau_acc: CompensatedSum,
}

/// A step-size sequence with cached prefix sums.
#[derive(Debug)]
pub struct StepSchedule {
    kind: ScheduleKind,
    cache: Mutex<PrefixCache>,
}

impl Clone for StepSchedule {
    fn clone(&self) -> Self {
        StepSchedule::from_kind_unchecked(self.kind.clone())
    }
}

impl PartialEq for StepSchedule {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

fn positive_finite(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {x}")));
    }
    Ok(())
}

impl StepSchedule {
    pub fn constant(step: f64, count: Option<usize>) -> Result<Self> {
        positive_finite("constant step", step)?;
        if count == Some(0) {
            return Err(Error::InvalidParameter("constant schedule needs at least one step".into()));
        }
        Ok(Self::from_kind_unchecked(ScheduleKind::Constant { step, count }))
    }

    pub fn power(scale: f64, exponent: f64) -> Result<Self> {
        positive_finite("power scale", scale)?;
        if !(exponent >= 0.0) || !exponent.is_finite() {
            return Err(Error::InvalidParameter(format!("power exponent must be >= 0, got {exponent}")));
        }
        Ok(Self::from_kind_unchecked(ScheduleKind::Power { scale, exponent }))
    }

    pub fn explicit(steps: Vec<f64>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidParameter("explicit schedule must not be empty".into()));
        }
        for &s in &steps {
            positive_finite("explicit step", s)?;
        }
        Ok(Self::from_kind_unchecked(ScheduleKind::Explicit(steps)))
    }

    pub fn from_kind(kind: ScheduleKind) -> Result<Self> {
        match kind {
            ScheduleKind::Constant { step, count } => Self::constant(step, count),
            ScheduleKind::Power { scale, exponent } => Self::power(scale, exponent),
            ScheduleKind::Explicit(steps) => Self::explicit(steps),
        }
    }

    fn from_kind_unchecked(kind: ScheduleKind) -> Self {
        StepSchedule {
            kind,
            cache: Mutex::new(PrefixCache {
                sigma: vec![0.0],
                tau: vec![0.0],
                ..Default::default()
            }),
        }
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    /// Number of steps, `None` for infinite schedules.
    pub fn finite_len(&self) -> Option<usize> {
        match &self.kind {
            ScheduleKind::Constant { count, .. } => *count,
            ScheduleKind::Power { .. } => None,
            ScheduleKind::Explicit(steps) => Some(steps.len()),
        }
    }

    /// `Σ λ_n < ∞`.
    pub fn in_l1(&self) -> bool {
        match &self.kind {
            ScheduleKind::Constant { count, .. } => count.is_some(),
            ScheduleKind::Power { exponent, .. } => *exponent > 1.0,
            ScheduleKind::Explicit(_) => true,
        }
    }

    /// `Σ λ_n² < ∞`.
    pub fn in_l2(&self) -> bool {
        match &self.kind {
            ScheduleKind::Constant { count, .. } => count.is_some(),
            ScheduleKind::Power { exponent, .. } => *exponent > 0.5,
            ScheduleKind::Explicit(_) => true,
        }
    }

    /// `λ_k` for `k >= 1`.
    pub fn step(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::InvalidParameter("schedules are 1-indexed".into()));
        }
        if let Some(len) = self.finite_len() {
            if k > len {
                return Err(Error::ScheduleExhausted { index: k, len });
            }
        }
        Ok(match &self.kind {
            ScheduleKind::Constant { step, .. } => *step,
            ScheduleKind::Power { scale, exponent } => scale * (k as f64).powf(-exponent),
            ScheduleKind::Explicit(steps) => steps[k - 1],
        })
    }

    fn extend_to(&self, cache: &mut PrefixCache, k: usize) -> Result<()> {
        if k > MAX_CACHED_INDEX {
            return Err(Error::BudgetExceeded {
                required: k as u64,
                budget: MAX_CACHED_INDEX as u64,
            });
        }
        while cache.sigma.len() <= k {
            let n = cache.sigma.len();
            let lambda = self.step(n)?;
            cache.sigma_acc.add(lambda);
            cache.tau_acc.add(lambda * lambda);
            cache.sigma.push(cache.sigma_acc.value());
            cache.tau.push(cache.tau_acc.value());
        }
        Ok(())
    }

    fn with_cache<T>(&self, f: impl FnOnce(&mut PrefixCache) -> Result<T>) -> Result<T> {
        let mut guard = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        f(&mut guard)
    }

    /// `σ_k`, with `σ_0 = 0`.
    pub fn sigma(&self, k: usize) -> Result<f64> {
        self.with_cache(|c| {
            self.extend_to(c, k)?;
            Ok(c.sigma[k])
        })
    }

    /// `τ_k`, with `τ_0 = 0`.
    pub fn tau(&self, k: usize) -> Result<f64> {
        self.with_cache(|c| {
            self.extend_to(c, k)?;
            Ok(c.tau[k])
        })
    }

    /// Upper bound on `Σ λ_n` for summable schedules.
    fn total_upper(&self) -> Result<Option<f64>> {
        Ok(match &self.kind {
            ScheduleKind::Power { scale, exponent } if *exponent > 1.0 => Some(scale * exponent / (exponent - 1.0)),
            _ => match self.finite_len() {
                Some(len) => Some(self.sigma(len)?),
                None => None,
            },
        })
    }

    /// `ν(t) = max{n : σ_n <= t}`.
    pub fn nu(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")));
        }
        if let Some(horizon) = self.total_upper()? {
            let exceeded = match self.finite_len() {
                Some(_) => t > horizon,
                None => t >= horizon,
            };
            if exceeded {
                return Err(Error::HorizonExceeded { t, horizon });
            }
        }
        let len = self.finite_len();
        self.with_cache(|c| {
            while *c.sigma.last().expect("sigma_0 cached") <= t {
                let next = c.sigma.len();
                if len.is_some_and(|l| next > l) {
                    break;
                }
                if next > MAX_CACHED_INDEX {
                    return Err(Error::HorizonExceeded {
                        t,
                        horizon: *c.sigma.last().expect("nonempty"),
                    });
                }
                self.extend_to(c, next)?;
            }
            Ok(c.sigma.partition_point(|&s| s <= t) - 1)
        })
    }

    /// `sup{λ_n : n >= max(ν(t) - 1, 1)}`.
    pub fn rho(&self, t: f64) -> Result<f64> {
        let start = self.nu(t)?.saturating_sub(1).max(1);
        self.sup_from(start)
    }

    /// `sup{λ_n : n >= start}`; zero when the schedule ends before `start`.
    pub fn sup_from(&self, start: usize) -> Result<f64> {
        let start = start.max(1);
        if let Some(len) = self.finite_len() {
            if start > len {
                return Ok(0.0);
            }
        }
        Ok(match &self.kind {
            ScheduleKind::Constant { step, .. } => *step,
            ScheduleKind::Power { .. } => self.step(start)?,
            ScheduleKind::Explicit(steps) => steps[start - 1..].iter().copied().fold(0.0, f64::max),
        })
    }

    /// Certified upper bound on `Σ_{i>n} λ_i²`.
    pub fn tail_tau(&self, n: usize) -> Result<f64> {
        if !self.in_l2() {
            return Err(Error::NotSquareSummable);
        }
        match &self.kind {
            ScheduleKind::Power { scale, exponent } => {
                let c2 = scale * scale;
                let q = 2.0 * exponent - 1.0;
                if n == 0 {
                    Ok(c2 * (1.0 + 1.0 / q))
                } else {
                    Ok(c2 * (n as f64).powf(-q) / q)
                }
            }
            _ => {
                let len = self.finite_len().expect("square-summable non-power schedules are finite");
                let mut acc = CompensatedSum::default();
                for i in (n + 1)..=len {
                    let s = self.step(i)?;
                    acc.add(s * s);
                }
                Ok(acc.value())
            }
        }
    }

    /// Largest step among `λ_1..λ_k`.
    pub fn max_step_upto(&self, k: usize) -> Result<f64> {
        match &self.kind {
            ScheduleKind::Power { exponent, .. } if *exponent >= 0.0 => {
                if k == 0 {
                    Ok(0.0)
                } else {
                    self.step(1)
                }
            }
            _ => {
                let mut m = 0.0f64;
                for i in 1..=k {
                    m = m.max(self.step(i)?);
                }
                Ok(m)
            }
        }
    }
}

/// Specification of the perturbations `ε_k`.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorSpec {
    None,
    /// `ε_k = scale · k^(-exponent) · direction`.
    PowerDecay { scale: f64, exponent: f64, direction: Vector },
    /// `ε_1, ε_2, ...`; zero past the end of the list.
    Explicit(Vec<Vector>),
}

/// Perturbation sequence in a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSequence {
    spec: ErrorSpec,
    dim: usize,
}

impl ErrorSequence {
    pub fn none(dim: usize) -> Self {
        ErrorSequence { spec: ErrorSpec::None, dim }
    }

    pub fn power_decay(scale: f64, exponent: f64, direction: Vector) -> Result<Self> {
        if !scale.is_finite() || !exponent.is_finite() {
            return Err(Error::InvalidParameter("error decay parameters must be finite".into()));
        }
        let dim = direction.dim();
        Ok(ErrorSequence {
            spec: ErrorSpec::PowerDecay { scale, exponent, direction },
            dim,
        })
    }

    pub fn explicit(errors: Vec<Vector>, dim: usize) -> Result<Self> {
        if let Some(bad) = errors.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
        }
        Ok(ErrorSequence {
            spec: ErrorSpec::Explicit(errors),
            dim,
        })
    }

    pub fn from_spec(spec: ErrorSpec, dim: usize) -> Result<Self> {
        match spec {
            ErrorSpec::None => Ok(Self::none(dim)),
            ErrorSpec::PowerDecay { scale, exponent, direction } => {
                if direction.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: direction.dim() });
                }
                Self::power_decay(scale, exponent, direction)
            }
            ErrorSpec::Explicit(errors) => Self::explicit(errors, dim),
        }
    }

    pub fn spec(&self) -> &ErrorSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Σ ||ε_k|| < ∞`.
    pub fn is_summable(&self) -> bool {
        match &self.spec {
            ErrorSpec::None | ErrorSpec::Explicit(_) => true,
            ErrorSpec::PowerDecay { scale, exponent, direction } => {
                *exponent > 1.0 || *scale == 0.0 || direction.norm() == 0.0
            }
        }
    }

    /// `ε_k` for `k >= 1`.
    pub fn eps(&self, k: usize) -> Result<Vector> {
        match &self.spec {
            ErrorSpec::None => Ok(Vector::zeros(self.dim)),
            ErrorSpec::PowerDecay { scale, exponent, direction } => {
                direction.scale(scale * (k as f64).powf(-exponent))
            }
            ErrorSpec::Explicit(errors) => Ok(errors
                .get(k.wrapping_sub(1))
                .cloned()
                .unwrap_or_else(|| Vector::zeros(self.dim))),
        }
    }

    /// `e_k = Σ_{i≤k} λ_i ||ε_i||`.
    pub fn cumulative(&self, schedule: &StepSchedule, k: usize) -> Result<f64> {
        let mut acc = CompensatedSum::default();
        for i in 1..=k {
            acc.add(schedule.step(i)? * self.eps(i)?.norm());
        }
        Ok(acc.value())
    }
}

/// A realized forward-backward sequence with its diagnostics.
///
/// Index `k` of every per-index vector refers to `x_k`; step and error vectors
/// store `λ_k`, `ε_k` at position `k - 1`.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub points: Vec<Vector>,
    pub steps: Vec<f64>,
    pub errors: Vec<Vector>,
    pub sigma: Vec<f64>,
    pub tau: Vec<f64>,
    pub cumulative_error: Vec<f64>,
    pub residual_gap: Vec<f64>,
    pub schedule: ScheduleKind,
    pub error_spec: ErrorSpec,
}

impl IterationTrace {
    /// Number of steps `K` (the trace holds `K + 1` points).
    pub fn steps_taken(&self) -> usize {
        self.steps.len()
    }

    pub fn last(&self) -> &Vector {
        self.points.last().expect("trace holds x_0")
    }

    pub fn max_step(&self) -> f64 {
        self.steps.iter().copied().fold(0.0, f64::max)
    }

    /// Recomputes every step; returns the first index whose point differs.
    pub fn replay(&self, pair: &OperatorPair) -> Result<Option<usize>> {
        for k in 1..self.points.len() {
            let (_, next) = fb_step(pair, self.steps[k - 1], &self.points[k - 1], &self.errors[k - 1])?;
            if next != self.points[k] {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }

    /// CSV with columns `k, lambda_k, sigma_k, tau_k, e_k, x, residual_gap`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "lambda_k", "sigma_k", "tau_k", "e_k", "x", "residual_gap"])?;
        for (k, x) in self.points.iter().enumerate() {
            let lambda = if k == 0 { 0.0 } else { self.steps[k - 1] };
            w.write_record([
                k.to_string(),
                fmt_f64(lambda),
                fmt_f64(self.sigma[k]),
                fmt_f64(self.tau[k]),
                fmt_f64(self.cumulative_error[k]),
                x.to_csv_field(),
                fmt_f64(self.residual_gap[k]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `x_k = J_{λ_k}(E_{λ_k}(x_{k-1}) + λ_k ε_k)` for `k = 1..=iterations`.
///
/// Every step is validated against `(0, Θ]` before the first iteration.
pub fn run_fb(
    pair: &OperatorPair,
    schedule: &StepSchedule,
    errors: &ErrorSequence,
    x0: &Vector,
    iterations: usize,
) -> Result<IterationTrace> {
    if x0.dim() != pair.dim() {
        return Err(Error::DimensionMismatch { expected: pair.dim(), found: x0.dim() });
    }
    if errors.dim() != pair.dim() {
        return Err(Error::DimensionMismatch { expected: pair.dim(), found: errors.dim() });
    }
    let mut steps = Vec::with_capacity(iterations);
    for k in 1..=iterations {
        let lambda = schedule.step(k)?;
        pair.check_step(lambda, Some(k))?;
        steps.push(lambda);
    }

    let mut points = Vec::with_capacity(iterations + 1);
    let mut eps_list = Vec::with_capacity(iterations);
    let mut sigma = vec![0.0];
    let mut tau = vec![0.0];
    let mut cumulative = vec![0.0];
    let mut residual_gap = vec![0.0];
    let mut e_acc = CompensatedSum::default();
    points.push(x0.clone());
    for k in 1..=iterations {
        let lambda = steps[k - 1];
        let eps = errors.eps(k)?;
        let (shifted, next) = fb_step(pair, lambda, &points[k - 1], &eps)?;
        residual_gap.push(inclusion_residual(pair, lambda, &shifted, &next)?);
        e_acc.add(lambda * eps.norm());
        cumulative.push(e_acc.value());
        sigma.push(schedule.sigma(k)?);
        tau.push(schedule.tau(k)?);
        eps_list.push(eps);
        points.push(next);
    }
    Ok(IterationTrace {
        points,
        steps,
        errors: eps_list,
        sigma,
        tau,
        cumulative_error: cumulative,
        residual_gap,
        schedule: schedule.kind().clone(),
        error_spec: errors.spec().clone(),
    })
}

/// Exact iteration without perturbations.
pub fn run_fb_exact(pair: &OperatorPair, schedule: &StepSchedule, x0: &Vector, iterations: usize) -> Result<IterationTrace> {
    run_fb(pair, schedule, &ErrorSequence::none(pair.dim()), x0, iterations)
}

/// Applies `T_{λ_i}` for `i = first..=last` in increasing order, no trace kept.
pub fn apply_steps(pair: &OperatorPair, schedule: &StepSchedule, first: usize, last: usize, x: &Vector) -> Result<Vector> {
    let zero = Vector::zeros(x.dim());
    let mut current = x.clone();
    for i in first..=last {
        let lambda = schedule.step(i)?;
        pair.check_step(lambda, Some(i))?;
        current = fb_step(pair, lambda, &current, &zero)?.1;
    }
    Ok(current)
}

/// `ν(t)`; see [`StepSchedule::nu`].
pub fn nu(schedule: &StepSchedule, t: f64) -> Result<usize> {
    schedule.nu(t)
}

/// `ρ(t)`; see [`StepSchedule::rho`].
pub fn rho(schedule: &StepSchedule, t: f64) -> Result<f64> {
    schedule.rho(t)
}

/// Certified tail bound; see [`StepSchedule::tail_tau`].
pub fn tail_tau(schedule: &StepSchedule, n: usize) -> Result<f64> {
    schedule.tail_tau(n)
}
