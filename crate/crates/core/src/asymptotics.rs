//! Evolution systems, almost-orbits and the long-time comparison between the
//! forward-backward sequence and the continuous flow.
//!
//! Two nonexpansive evolution systems are built from the same pair:
//! `U_S(t,s) = S(t-s)` from the semigroup, and
//! `U_T(t,s) = T_{λ_{ν(t)}} ∘ ... ∘ T_{λ_{ν(s)+1}}` from a step schedule,
//! where `ν(t) = max{n : σ_n <= t}` and the empty product is the identity.
//! For `(λ_n) ∈ ℓ² \ ℓ¹` the flow `t ↦ S(t)x` is an almost-orbit of `U_T` and
//! `t ↦ x_{ν(t)}` is an almost-orbit of `U_S`, both with defect at most
//! `|||(A+B)x||| sqrt(4ρ(t)^2 + Σ_{n>ν(t)} λ_n^2)`.
//!
//! In finite dimension weak and strong convergence coincide, so the
//! equivalence experiment only measures distances.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{approximate_flow, certified_flow, certified_trajectory, FlowQuery};
use crate::operators::{min_norm, OperatorPair};
use crate::problems::ZeroOracle;
use crate::sampling::Sampler;
use crate::splitting::{apply_steps, run_fb, run_fb_exact, ErrorSequence, StepSchedule};
use crate::vector::{fmt_f64, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolutionKind {
    SemigroupFlow,
    ScheduleProduct,
}

/// Two-parameter family `U(t, s)`, `t >= s >= 0`.
pub trait EvolutionSystem: Sync {
    fn kind(&self) -> EvolutionKind;

    fn pair(&self) -> &OperatorPair;

    fn evaluate(&self, t: f64, s: f64, z: &Vector) -> Result<Vector>;

    /// Nearest time at or below `t` on which the cocycle identity is exact.
    fn align(&self, t: f64) -> Result<f64>;
}

fn check_order(t: f64, s: f64) -> Result<()> {
    if !(s >= 0.0) || !(t >= s) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("need 0 <= s <= t, got s = {s}, t = {t}")));
    }
    Ok(())
}

/// `U_T(t, s)x`.
pub fn evolution_t(pair: &OperatorPair, schedule: &StepSchedule, t: f64, s: f64, x: &Vector) -> Result<Vector> {
    check_order(t, s)?;
    let first = schedule.nu(s)? + 1;
    let last = schedule.nu(t)?;
    if last < first {
        return Ok(x.clone());
    }
    apply_steps(pair, schedule, first, last, x)
}

/// `U_S(t, s)x = S(t-s)x` to within `tol`: the exponential formula when its
/// step count fits in `budget`, otherwise a certified restarted sweep.
pub fn evolution_s(pair: &OperatorPair, t: f64, s: f64, x: &Vector, tol: f64, budget: u64) -> Result<Vector> {
    check_order(t, s)?;
    if t == s {
        return Ok(x.clone());
    }
    let query = FlowQuery::new(x.clone(), t - s, tol)?;
    match approximate_flow(pair, &query, budget) {
        Ok((point, _)) => Ok(point),
        Err(Error::BudgetExceeded { .. }) => Ok(certified_flow(pair, x, t - s, tol, budget)?.0),
        Err(e) => Err(e),
    }
}

/// Evolution system generated by a step schedule.
#[derive(Debug, Clone, Copy)]
pub struct ScheduleProduct<'a> {
    pub pair: &'a OperatorPair,
    pub schedule: &'a StepSchedule,
}

impl EvolutionSystem for ScheduleProduct<'_> {
    fn kind(&self) -> EvolutionKind {
        EvolutionKind::ScheduleProduct
    }

    fn pair(&self) -> &OperatorPair {
        self.pair
    }

    fn evaluate(&self, t: f64, s: f64, z: &Vector) -> Result<Vector> {
        evolution_t(self.pair, self.schedule, t, s, z)
    }

    fn align(&self, t: f64) -> Result<f64> {
        self.schedule.sigma(self.schedule.nu(t)?)
    }
}

/// Evolution system of the semigroup, evaluated to a fixed tolerance.
#[derive(Debug, Clone, Copy)]
pub struct SemigroupFlow<'a> {
    pub pair: &'a OperatorPair,
    pub tol: f64,
    pub budget: u64,
}

impl EvolutionSystem for SemigroupFlow<'_> {
    fn kind(&self) -> EvolutionKind {
        EvolutionKind::SemigroupFlow
    }

    fn pair(&self) -> &OperatorPair {
        self.pair
    }

    fn evaluate(&self, t: f64, s: f64, z: &Vector) -> Result<Vector> {
        evolution_s(self.pair, t, s, z, self.tol, self.budget)
    }

    fn align(&self, t: f64) -> Result<f64> {
        Ok(t)
    }
}

/// Worst observed violation of each evolution-system axiom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxiomViolations {
    /// `||U(t,t)x - x||`.
    pub identity: f64,
    /// `||U(t,s)U(s,r)x - U(t,r)x||` on aligned times.
    pub cocycle: f64,
    /// `max(0, ||U(t,s)x - U(t,s)y|| - ||x - y||)`.
    pub nonexpansive: f64,
}

/// Samples `r <= s <= t` in `[0, horizon]` and points in the domain.
pub fn check_evolution_axioms(
    system: &dyn EvolutionSystem,
    sampler: &mut Sampler,
    trials: usize,
    horizon: f64,
) -> Result<AxiomViolations> {
    let pair = system.pair();
    let dim = pair.dim();
    let mut worst = AxiomViolations {
        identity: 0.0,
        cocycle: 0.0,
        nonexpansive: 0.0,
    };
    for _ in 0..trials {
        let mut times = [
            sampler.uniform(0.0, horizon),
            sampler.uniform(0.0, horizon),
            sampler.uniform(0.0, horizon),
        ];
        times.sort_by(f64::total_cmp);
        let [r, s, t] = times.map(|v| system.align(v)).map(|v| v.unwrap_or(0.0));
        let x = pair.monotone().clamp_to_domain(&sampler.vector(dim));
        let y = pair.monotone().clamp_to_domain(&sampler.vector(dim));

        worst.identity = worst.identity.max(system.evaluate(t, t, &x)?.dist(&x)?);
        let chained = system.evaluate(t, s, &system.evaluate(s, r, &x)?)?;
        worst.cocycle = worst.cocycle.max(chained.dist(&system.evaluate(t, r, &x)?)?);
        let d = system.evaluate(t, s, &x)?.dist(&system.evaluate(t, s, &y)?)?;
        worst.nonexpansive = worst.nonexpansive.max(d - x.dist(&y)?);
    }
    Ok(worst)
}

/// `{0, δ, 2δ, 4δ, ..., H}`.
pub fn geometric_h_grid(delta: f64, horizon: f64) -> Vec<f64> {
    let mut grid = vec![0.0];
    let mut h = delta;
    while h < horizon {
        grid.push(h);
        h *= 2.0;
    }
    grid.push(horizon);
    grid
}

/// `max_h ||φ(t+h) - U(t+h, t)φ(t)||` over the grid: a lower estimate of the
/// supremum over all `h >= 0`.
pub fn almost_orbit_defect(
    phi: &dyn Fn(f64) -> Result<Vector>,
    system: &dyn EvolutionSystem,
    t: f64,
    h_grid: &[f64],
) -> Result<f64> {
    let base = phi(t)?;
    let mut worst = 0.0f64;
    for &h in h_grid {
        if !(h >= 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("h must be finite and >= 0, got {h}")));
        }
        let propagated = system.evaluate(t + h, t, &base)?;
        worst = worst.max(phi(t + h)?.dist(&propagated)?);
    }
    Ok(worst)
}

fn require_l2_not_l1(schedule: &StepSchedule) -> Result<()> {
    if !schedule.in_l2() {
        return Err(Error::NotSquareSummable);
    }
    if schedule.in_l1() {
        return Err(Error::InvalidParameter("schedule must not be summable".into()));
    }
    Ok(())
}

/// `ρ(t)`, `ν(t)` and the tail `Σ_{n>ν(t)} λ_n^2` entering the defect bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    pub nu: usize,
    pub rho: f64,
    pub tail_tau: f64,
}

pub fn bound_terms(schedule: &StepSchedule, t: f64) -> Result<BoundTerms> {
    require_l2_not_l1(schedule)?;
    let nu = schedule.nu(t)?;
    Ok(BoundTerms {
        nu,
        rho: schedule.rho(t)?,
        tail_tau: schedule.tail_tau(nu)?,
    })
}

/// `|||(A+B)x||| sqrt(4ρ(t)^2 + Σ_{n>ν(t)} λ_n^2)`.
pub fn almost_orbit_bound(pair: &OperatorPair, x: &Vector, schedule: &StepSchedule, t: f64) -> Result<f64> {
    let terms = bound_terms(schedule, t)?;
    let (minnorm, _) = min_norm(pair, x)?;
    Ok(bound_from_terms(minnorm, &terms))
}

fn bound_from_terms(minnorm: f64, terms: &BoundTerms) -> f64 {
    minnorm * (4.0 * terms.rho * terms.rho + terms.tail_tau).sqrt()
}

/// Which trajectory is tested against which evolution system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitDirection {
    /// The flow `S(t)x0` against `U_T`.
    FlowAgainstSchedule,
    /// The sequence `x_{ν(t)}` against `U_S`.
    SequenceAgainstFlow,
}

impl OrbitDirection {
    pub fn label(&self) -> &'static str {
        match self {
            OrbitDirection::FlowAgainstSchedule => "flow_vs_schedule",
            OrbitDirection::SequenceAgainstFlow => "sequence_vs_flow",
        }
    }
}

/// One probed base time.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmostOrbitRow {
    pub t: f64,
    pub defect: f64,
    pub bound: f64,
    /// `bound - defect`.
    pub margin: f64,
    pub rho: f64,
    pub tail_tau: f64,
    pub nu: usize,
    /// Certified error of the flow oracle folded into the comparison.
    pub oracle_budget: f64,
}

impl AlmostOrbitRow {
    pub fn holds(&self) -> bool {
        self.defect <= self.bound + self.oracle_budget
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmostOrbitReport {
    pub direction: OrbitDirection,
    pub rows: Vec<AlmostOrbitRow>,
}

impl AlmostOrbitReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(AlmostOrbitRow::holds)
    }

    pub fn bound_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].bound < w[0].bound)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_almost_orbit_csv(writer, std::slice::from_ref(self))
    }
}

/// CSV with columns `t, defect, bound, margin, rho, tail_tau, nu, oracle_budget, direction`,
/// one block of rows per report.
pub fn write_almost_orbit_csv<W: Write>(writer: W, reports: &[AlmostOrbitReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "defect", "bound", "margin", "rho", "tail_tau", "nu", "oracle_budget", "direction"])?;
    for report in reports {
        for r in &report.rows {
            w.write_record([
                fmt_f64(r.t),
                fmt_f64(r.defect),
                fmt_f64(r.bound),
                fmt_f64(r.margin),
                fmt_f64(r.rho),
                fmt_f64(r.tail_tau),
                r.nu.to_string(),
                fmt_f64(r.oracle_budget),
                report.direction.label().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Settings for an almost-orbit sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub times: Vec<f64>,
    pub h_grid: Vec<f64>,
    /// Flow oracles run at `oracle_fraction · bound`.
    pub oracle_fraction: f64,
    pub budget: u64,
}

/// Measures the defect of the flow against `U_T` at each probe time.
///
/// The flow is sampled once by a certified trajectory; if `φ̃` has errors
/// `e`, the measured defect differs from the true one by at most
/// `e(t) + e(t+h)` because `U_T` is nonexpansive.
pub fn sweep_flow_against_schedule(
    pair: &OperatorPair,
    schedule: &StepSchedule,
    x0: &Vector,
    settings: &SweepSettings,
) -> Result<AlmostOrbitReport> {
    let (minnorm, _) = min_norm(pair, x0)?;
    let terms = settings
        .times
        .iter()
        .map(|&t| bound_terms(schedule, t))
        .collect::<Result<Vec<_>>>()?;
    let bounds: Vec<f64> = terms.iter().map(|tm| bound_from_terms(minnorm, tm)).collect();
    let min_bound = bounds.iter().copied().fold(f64::INFINITY, f64::min);

    let mut sample_times: Vec<f64> = settings
        .times
        .iter()
        .flat_map(|&t| settings.h_grid.iter().map(move |&h| t + h))
        .chain(std::iter::once(0.0))
        .collect();
    sample_times.sort_by(f64::total_cmp);
    sample_times.dedup();

    let tol = if min_bound > 0.0 { settings.oracle_fraction * min_bound } else { 1e-12 };
    let grid = certified_trajectory(pair, x0, &sample_times, tol, settings.budget)?;
    let lookup = |t: f64| -> Result<(Vector, f64)> {
        let i = grid
            .index_of(t)
            .ok_or_else(|| Error::InvalidParameter(format!("time {t} missing from the oracle grid")))?;
        Ok((grid.points[i].clone(), grid.errors[i]))
    };
    let product = ScheduleProduct { pair, schedule };

    let rows = settings
        .times
        .par_iter()
        .zip(terms.par_iter())
        .zip(bounds.par_iter())
        .map(|((&t, tm), &bound)| -> Result<AlmostOrbitRow> {
            let (base, e_base) = lookup(t)?;
            let mut defect = 0.0f64;
            let mut oracle: f64 = 0.0;
            for &h in &settings.h_grid {
                let (target, e_target) = lookup(t + h)?;
                let propagated = product.evaluate(t + h, t, &base)?;
                defect = defect.max(target.dist(&propagated)?);
                oracle = oracle.max(e_base + e_target);
            }
            Ok(AlmostOrbitRow {
                t,
                defect,
                bound,
                margin: bound - defect,
                rho: tm.rho,
                tail_tau: tm.tail_tau,
                nu: tm.nu,
                oracle_budget: oracle,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AlmostOrbitReport {
        direction: OrbitDirection::FlowAgainstSchedule,
        rows,
    })
}

/// Measures the defect of `t ↦ x_{ν(t)}` against `U_S` at each probe time.
///
/// `S(h)x_{ν(t)}` is sampled on the `h` grid by one certified trajectory per
/// probe time; its error is the oracle budget.
pub fn sweep_sequence_against_flow(
    pair: &OperatorPair,
    schedule: &StepSchedule,
    x0: &Vector,
    settings: &SweepSettings,
) -> Result<AlmostOrbitReport> {
    let (minnorm, _) = min_norm(pair, x0)?;
    let t_max = settings.times.iter().copied().fold(0.0, f64::max);
    let h_max = settings.h_grid.iter().copied().fold(0.0, f64::max);
    let last = schedule.nu(t_max + h_max)?;
    let trace = run_fb_exact(pair, schedule, x0, last)?;

    let mut h_times = settings.h_grid.clone();
    h_times.sort_by(f64::total_cmp);
    h_times.dedup();
    if h_times.first() != Some(&0.0) {
        h_times.insert(0, 0.0);
    }

    let rows = settings
        .times
        .par_iter()
        .map(|&t| -> Result<AlmostOrbitRow> {
            let tm = bound_terms(schedule, t)?;
            let bound = bound_from_terms(minnorm, &tm);
            let base = &trace.points[tm.nu];
            let tol = if bound > 0.0 { settings.oracle_fraction * bound } else { 1e-12 };
            let flow = certified_trajectory(pair, base, &h_times, tol, settings.budget)?;
            let mut defect = 0.0f64;
            let mut oracle = 0.0f64;
            for &h in &settings.h_grid {
                let i = flow.index_of(h).expect("h grid sampled");
                let target = &trace.points[schedule.nu(t + h)?];
                defect = defect.max(target.dist(&flow.points[i])?);
                oracle = oracle.max(flow.errors[i]);
            }
            Ok(AlmostOrbitRow {
                t,
                defect,
                bound,
                margin: bound - defect,
                rho: tm.rho,
                tail_tau: tm.tail_tau,
                nu: tm.nu,
                oracle_budget: oracle,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AlmostOrbitReport {
        direction: OrbitDirection::SequenceAgainstFlow,
        rows,
    })
}

/// Long-time comparison for one starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceRow {
    pub x0: Vector,
    pub zero: Vector,
    /// Estimate of `S(T_max)x0` and its certified error.
    pub flow_limit: Option<Vector>,
    pub flow_error: f64,
    /// `x_{K_max}`.
    pub fb_limit: Vector,
    /// `x_{K_max}` under the perturbed run, if requested.
    pub perturbed_fb_limit: Option<Vector>,
    pub flow_to_zero: Option<f64>,
    pub fb_to_zero: f64,
    pub flow_to_fb: Option<f64>,
    pub perturbation_shift: Option<f64>,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub rows: Vec<EquivalenceRow>,
    pub t_max: f64,
    pub k_max: usize,
    pub note: &'static str,
}

impl EquivalenceReport {
    pub fn partial(&self) -> bool {
        self.rows.iter().any(|r| r.budget_exhausted)
    }

    /// CSV with one row per starting point.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "x0",
            "zero",
            "flow_limit",
            "flow_error",
            "fb_limit",
            "flow_to_zero",
            "fb_to_zero",
            "flow_to_fb",
            "perturbation_shift",
            "budget_exhausted",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.x0.to_csv_field(),
                r.zero.to_csv_field(),
                r.flow_limit.as_ref().map(Vector::to_csv_field).unwrap_or_default(),
                fmt_f64(r.flow_error),
                r.fb_limit.to_csv_field(),
                opt(r.flow_to_zero),
                fmt_f64(r.fb_to_zero),
                opt(r.flow_to_fb),
                opt(r.perturbation_shift),
                r.budget_exhausted.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Settings for [`equivalence_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceSettings {
    pub t_max: f64,
    pub k_max: usize,
    pub flow_tol: f64,
    pub budget: u64,
    /// Perturbations for the robustness rerun.
    pub perturbation: Option<ErrorSequence>,
}

/// For each starting point, estimates `S(T_max)x0` and `x_{K_max}` and
/// measures their distances to each other and to the zero set.
pub fn equivalence_experiment(
    pair: &OperatorPair,
    schedule: &StepSchedule,
    zero_oracle: &ZeroOracle,
    x0_set: &[Vector],
    settings: &EquivalenceSettings,
) -> Result<EquivalenceReport> {
    require_l2_not_l1(schedule)?;
    let rows = x0_set
        .par_iter()
        .map(|x0| -> Result<EquivalenceRow> {
            let zero = zero_oracle.project(x0);
            let fb_limit = apply_steps(pair, schedule, 1, settings.k_max, x0)?;
            let (flow_limit, flow_error, exhausted) =
                match certified_flow(pair, x0, settings.t_max, settings.flow_tol, settings.budget) {
                    Ok((p, e)) => (Some(p), e, false),
                    Err(Error::BudgetExceeded { .. }) => (None, f64::INFINITY, true),
                    Err(e) => return Err(e),
                };
            let perturbed = match &settings.perturbation {
                Some(errors) => Some(run_fb(pair, schedule, errors, x0, settings.k_max)?.last().clone()),
                None => None,
            };
            let flow_to_zero = flow_limit.as_ref().map(|p| p.dist(&zero)).transpose()?;
            let flow_to_fb = flow_limit.as_ref().map(|p| p.dist(&fb_limit)).transpose()?;
            let shift = perturbed.as_ref().map(|p| p.dist(&fb_limit)).transpose()?;
            Ok(EquivalenceRow {
                x0: x0.clone(),
                fb_to_zero: fb_limit.dist(&zero)?,
                zero,
                flow_limit,
                flow_error,
                fb_limit,
                perturbed_fb_limit: perturbed,
                flow_to_zero,
                flow_to_fb,
                perturbation_shift: shift,
                budget_exhausted: exhausted,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquivalenceReport {
        rows,
        t_max: settings.t_max,
        k_max: settings.k_max,
        note: "finite dimension: weak and strong convergence coincide",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{default_l1_quadratic, default_linear1d, l1_quadratic_1d};
    use crate::splitting::run_fb_exact;

    fn s(x: f64) -> Vector {
        Vector::scalar(x).unwrap()
    }

    #[test]
    fn evolution_t_examples() {
        let lin = default_linear1d();
        let h = StepSchedule::power(1.0, 1.0).unwrap();
        assert_eq!(evolution_t(&lin.pair, &h, 0.7, 0.7, &s(3.0)).unwrap(), s(3.0));
        let two = run_fb_exact(&lin.pair, &h, &s(1.0), 2).unwrap();
        assert_eq!(evolution_t(&lin.pair, &h, 1.6, 0.0, &s(1.0)).unwrap(), *two.last());
        assert_eq!(evolution_t(&lin.pair, &h, 5.0, 1.2, &s(0.0)).unwrap(), s(0.0));
        // same schedule cell
        assert_eq!(evolution_t(&lin.pair, &h, 1.4, 1.1, &s(2.0)).unwrap(), s(2.0));
        assert!(evolution_t(&lin.pair, &h, 1.0, 2.0, &s(2.0)).is_err());
    }

    #[test]
    fn evolution_s_examples() {
        let lin = default_linear1d();
        let budget = 10_000_000;
        assert_eq!(evolution_s(&lin.pair, 1.0, 1.0, &s(1.0), 1e-3, budget).unwrap(), s(1.0));
        let a = evolution_s(&lin.pair, 2.0, 1.0, &s(1.0), 1e-2, budget).unwrap();
        let b = evolution_s(&lin.pair, 1.0, 0.0, &s(1.0), 1e-2, budget).unwrap();
        assert_eq!(a, b);
        assert!((a.as_slice()[0] - (-2.0f64).exp()).abs() <= 1e-2);
        // beyond the exponential-formula budget the restarted sweep takes over
        let c = evolution_s(&lin.pair, 3.0, 0.0, &s(1.0), 1e-3, 10_000_000).unwrap();
        assert!((c.as_slice()[0] - (-6.0f64).exp()).abs() <= 1e-3);
    }

    #[test]
    fn schedule_product_axioms_hold_exactly() {
        let lin = default_l1_quadratic();
        let sched = StepSchedule::power(lin.pair.theta_max() / 2.0, 0.75).unwrap();
        let u = ScheduleProduct {
            pair: &lin.pair,
            schedule: &sched,
        };
        let v = check_evolution_axioms(&u, &mut Sampler::new(1), 200, 5.0).unwrap();
        assert_eq!(v.identity, 0.0);
        assert_eq!(v.cocycle, 0.0);
        assert!(v.nonexpansive <= 1e-12);
    }

    #[test]
    fn semigroup_axioms_within_tolerance() {
        let lin = default_linear1d();
        let tol = 1e-3;
        let u = SemigroupFlow {
            pair: &lin.pair,
            tol,
            budget: 5_000_000,
        };
        let v = check_evolution_axioms(&u, &mut Sampler::with_radius(2, 1.0), 10, 0.5).unwrap();
        assert_eq!(v.identity, 0.0);
        assert!(v.cocycle <= 2.0 * tol, "{v:?}");
        assert!(v.nonexpansive <= 2.0 * tol);
    }

    #[test]
    fn bound_examples() {
        let l1 = l1_quadratic_1d();
        let sched = StepSchedule::power(0.5, 0.75).unwrap();
        assert_eq!(almost_orbit_bound(&l1.pair, &s(0.0), &sched, 3.0).unwrap(), 0.0);
        let terms = BoundTerms {
            nu: 3,
            rho: 0.5,
            tail_tau: 0.1,
        };
        assert!((bound_from_terms(2.0, &terms) - 2.0 * 1.1f64.sqrt()).abs() < 1e-15);

        let lin = default_linear1d();
        let h = StepSchedule::power(1.0, 1.0).unwrap();
        let values: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 12.0, 16.0]
            .iter()
            .map(|&t| almost_orbit_bound(&lin.pair, &s(1.0), &h, t).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0]));
        assert!(values[5] < 2.0 * 1e-3f64.sqrt());
        assert!(matches!(
            almost_orbit_bound(&lin.pair, &s(1.0), &StepSchedule::constant(0.1, None).unwrap(), 1.0),
            Err(Error::NotSquareSummable)
        ));
    }

    #[test]
    fn true_orbit_has_zero_defect() {
        let lin = default_linear1d();
        let sched = StepSchedule::power(0.5, 0.75).unwrap();
        let u = ScheduleProduct {
            pair: &lin.pair,
            schedule: &sched,
        };
        let phi = |t: f64| evolution_t(&lin.pair, &sched, t, 0.0, &s(1.0));
        let grid = geometric_h_grid(0.25, 8.0);
        for t in [0.0, 1.0, 3.0] {
            let t = u.align(t).unwrap();
            assert_eq!(almost_orbit_defect(&phi, &u, t, &grid).unwrap(), 0.0);
        }
    }

    #[test]
    fn geometric_grid_shape() {
        assert_eq!(geometric_h_grid(1.0, 8.0), vec![0.0, 1.0, 2.0, 4.0, 8.0]);
        assert_eq!(geometric_h_grid(0.3, 1.0), vec![0.0, 0.3, 0.6, 1.0]);
    }

    #[test]
    fn sweeps_respect_bounds() {
        for problem in [default_linear1d(), default_l1_quadratic()] {
            let sched = StepSchedule::power(problem.pair.theta_max() / 2.0, 0.75).unwrap();
            let settings = SweepSettings {
                times: vec![1.0, 2.0, 4.0],
                h_grid: geometric_h_grid(0.125, 2.0),
                oracle_fraction: 0.1,
                budget: 50_000_000,
            };
            let x0 = &problem.default_x0;
            let forward = sweep_flow_against_schedule(&problem.pair, &sched, x0, &settings).unwrap();
            let backward = sweep_sequence_against_flow(&problem.pair, &sched, x0, &settings).unwrap();
            for report in [&forward, &backward] {
                assert!(report.all_hold(), "{}: {report:?}", problem.id);
                assert!(report.bound_strictly_decreasing());
                for r in &report.rows {
                    assert!(r.oracle_budget <= 0.2 * r.bound * (1.0 + 1e-9));
                }
            }
        }
    }

    #[test]
    fn equivalence_on_linear1d() {
        let lin = default_linear1d();
        let sched = StepSchedule::power(1.0, 0.75).unwrap();
        let settings = EquivalenceSettings {
            t_max: 10.0,
            k_max: 10_000,
            flow_tol: 1e-3,
            budget: 50_000_000,
            perturbation: Some(ErrorSequence::power_decay(1e-2, 2.0, s(1.0)).unwrap()),
        };
        let zero = lin.zero_oracle.clone().unwrap();
        let report = equivalence_experiment(&lin.pair, &sched, &zero, &[s(1.0), s(0.0)], &settings).unwrap();
        let r = &report.rows[0];
        assert!(r.flow_to_zero.unwrap() + r.flow_error <= 1e-3 * (1.0 + 1e-9) + 1e-9);
        assert!(r.fb_to_zero <= 1e-3);
        assert!(r.perturbation_shift.unwrap() <= 2e-3);
        let at_zero = &report.rows[1];
        assert_eq!(at_zero.flow_limit.as_ref().unwrap(), &s(0.0));
        assert_eq!(at_zero.fb_limit, s(0.0));
        assert!(!report.partial());
    }

    #[test]
    fn equivalence_lasso_1d_sequence_converges() {
        let l1 = l1_quadratic_1d();
        let sched = StepSchedule::power(0.5, 0.75).unwrap();
        let settings = EquivalenceSettings {
            t_max: 10.0,
            k_max: 10_000,
            flow_tol: 1e-3,
            budget: 50_000_000,
            perturbation: None,
        };
        let zero = l1.zero_oracle.clone().unwrap();
        let report = equivalence_experiment(&l1.pair, &sched, &zero, &[s(3.0), s(-2.0)], &settings).unwrap();
        for r in &report.rows {
            assert!(r.fb_to_zero <= 1e-3, "{r:?}");
        }
    }
}
