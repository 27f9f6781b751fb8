//! One driver per subcommand. Each returns a summary plus in-memory CSV
//! artifacts, so callers decide where (and whether) to write them.

use std::fmt;
use std::time::Instant;

use fbsplit::asymptotics::{
    equivalence_experiment, geometric_h_grid, sweep_flow_against_schedule, sweep_sequence_against_flow,
    write_almost_orbit_csv, EquivalenceSettings, SweepSettings,
};
use fbsplit::bounds::{
    abg, c_recurrence_residuals, c_value, convex_combination_identity, lemma_gap, verify_kobayashi,
    write_bound_reports,
};
use fbsplit::flow::{
    benilan_budget, benilan_defect, cauchy_bound, certified_trajectory, exp_formula, hybrid_bound, lipschitz_defect,
    minnorm_profile, pc_index, pc_sequence, profile_increase, profile_slack, reference_flow, um_vm_gap_bound,
    uniform_times, FlowQuery, TrajectoryGrid,
};
use fbsplit::splitting::run_fb_exact;
use fbsplit::tolerances::{ALGEBRA_TOL, DEFAULT_FLOW_BUDGET, KOBAYASHI_REL_TOL, LEMMA_GAP_TOL};
use fbsplit::vector::fmt_f64;
use fbsplit::{min_norm, run_fb, ErrorSequence, ProblemInstance, Sampler, Vector};
use rayon::prelude::*;

use crate::config::{vector, ConfigError, ExperimentConfig};
use crate::summary::RunSummary;

/// Distance allowed between long-time limits and the zero set.
pub const EQUIVALENCE_TOL: f64 = 2e-3;

const SAMPLE_RADIUS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    VerifyBounds,
    VerifyLemma,
    FlowConvergence,
    Benilan,
    AlmostOrbit,
    Equivalence,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Simulate,
        Experiment::VerifyBounds,
        Experiment::VerifyLemma,
        Experiment::FlowConvergence,
        Experiment::Benilan,
        Experiment::AlmostOrbit,
        Experiment::Equivalence,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::VerifyBounds => "verify-bounds",
            Experiment::VerifyLemma => "verify-lemma",
            Experiment::FlowConvergence => "flow-convergence",
            Experiment::Benilan => "benilan",
            Experiment::AlmostOrbit => "almost-orbit",
            Experiment::Equivalence => "equivalence",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Budget(_) => 3,
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

impl From<fbsplit::Error> for RunError {
    fn from(e: fbsplit::Error) -> Self {
        match e {
            fbsplit::Error::BudgetExceeded { .. } => RunError::Budget(e.to_string()),
            other => RunError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: RunSummary,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    /// 0 pass, 1 criterion failure, 3 partial report.
    pub fn exit_code(&self) -> i32 {
        if self.summary.partial {
            3
        } else if self.summary.passed {
            0
        } else {
            1
        }
    }

    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }

    /// Writes every artifact and `summary.json` into `dir`.
    pub fn write_to(&self, dir: &std::path::Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for a in &self.artifacts {
            std::fs::write(dir.join(&a.name), &a.bytes)?;
        }
        std::fs::write(dir.join("summary.json"), self.summary.to_json())
    }
}

/// Checks the configuration without computing anything; returns a short
/// description of the planned run.
pub fn validate(experiment: Experiment, cfg: &ExperimentConfig) -> Result<String, RunError> {
    if let Some(name) = &cfg.experiment {
        if name != experiment.name() {
            return Err(RunError::Config(format!(
                "config is for `{name}` but the subcommand is `{experiment}`"
            )));
        }
    }
    let seed = cfg.seed()?;
    let problems = cfg.problems()?;
    for p in &problems {
        let dim = p.pair.dim();
        cfg.x0(p)?;
        cfg.schedule(&p.pair, default_schedule(experiment))?;
        if experiment == Experiment::VerifyBounds {
            cfg.second_schedule(&p.pair, default_schedule(experiment))?;
        }
        if experiment == Experiment::Equivalence {
            equivalence_errors(cfg).error_sequence(dim)?;
            p.zero_oracle
                .as_ref()
                .ok_or_else(|| RunError::Config(format!("`{}` has no zero oracle", p.id)))?;
        } else {
            cfg.error_sequence(dim)?;
        }
    }
    if let Some(set) = &cfg.x0_set {
        for v in set {
            vector(v)?;
        }
    }
    let ids: Vec<&str> = problems.iter().map(|p| p.id.as_str()).collect();
    Ok(format!("{experiment} on [{}] with seed {seed}", ids.join(", ")))
}

/// Validates and runs one experiment.
pub fn run(experiment: Experiment, cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    validate(experiment, cfg)?;
    let start = Instant::now();
    let seed = cfg.seed()?;
    let problems = cfg.problems()?;
    let mut summary = RunSummary::new(experiment.name(), seed);
    let artifacts = match experiment {
        Experiment::Simulate => simulate(cfg, &problems, &mut summary)?,
        Experiment::VerifyBounds => verify_bounds(cfg, seed, &problems, &mut summary)?,
        Experiment::VerifyLemma => verify_lemma(cfg, seed, &problems, &mut summary)?,
        Experiment::FlowConvergence => flow_convergence(cfg, &problems, &mut summary)?,
        Experiment::Benilan => benilan(cfg, seed, &problems, &mut summary)?,
        Experiment::AlmostOrbit => almost_orbit(cfg, &problems, &mut summary)?,
        Experiment::Equivalence => equivalence(cfg, seed, &problems, &mut summary)?,
    };
    summary.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(Outcome { summary, artifacts })
}

fn default_schedule(experiment: Experiment) -> &'static str {
    match experiment {
        Experiment::Simulate => "constant",
        _ => "power",
    }
}

fn csv_artifact(name: String, write: impl FnOnce(&mut Vec<u8>) -> fbsplit::Result<()>) -> Result<Artifact, RunError> {
    let mut bytes = Vec::new();
    write(&mut bytes)?;
    Ok(Artifact { name, bytes })
}

fn table(name: String, header: &[&str], rows: Vec<Vec<String>>) -> Result<Artifact, RunError> {
    csv_artifact(name, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    })
}

/// Per-problem, per-trial sub-stream, independent of execution order.
fn sampler(seed: u64, problem: usize, trial: usize) -> Sampler {
    Sampler::fork(seed, ((problem as u64) << 40) | trial as u64, SAMPLE_RADIUS)
}

fn domain_point(p: &ProblemInstance, s: &mut Sampler) -> Vector {
    p.pair.monotone().clamp_to_domain(&s.vector(p.pair.dim()))
}

fn min_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::INFINITY, f64::min)
}

fn simulate(cfg: &ExperimentConfig, problems: &[ProblemInstance], summary: &mut RunSummary) -> Result<Vec<Artifact>, RunError> {
    let k = cfg.count("k_max", cfg.k_max, 100)?;
    let mut artifacts = Vec::new();
    for p in problems {
        let schedule = cfg.schedule(&p.pair, "constant")?;
        let errors = cfg.error_sequence(p.pair.dim())?;
        let trace = run_fb(&p.pair, &schedule, &errors, &cfg.x0(p)?, k)?;
        let replay = trace.replay(&p.pair)?;
        summary.check(
            &format!("{}:replay", p.id),
            if replay.is_none() { 0.0 } else { -1.0 },
            match replay {
                None => "every step reproduces bit for bit".to_string(),
                Some(i) => format!("step {i} differs on replay"),
            },
        );
        summary.check(
            &format!("{}:rows", p.id),
            if trace.points.len() == k + 1 { 0.0 } else { -1.0 },
            format!("{} rows for K = {k}", trace.points.len()),
        );
        artifacts.push(csv_artifact(format!("trace_{}.csv", p.id), |buf| trace.write_csv(buf))?);
    }
    Ok(artifacts)
}

fn verify_bounds(
    cfg: &ExperimentConfig,
    seed: u64,
    problems: &[ProblemInstance],
    summary: &mut RunSummary,
) -> Result<Vec<Artifact>, RunError> {
    let k = cfg.count("k_max", cfg.k_max, 200)?;
    let l = cfg.count("l_max", cfg.l_max, 200)?;
    let mut reports = Vec::new();
    for (pi, p) in problems.iter().enumerate() {
        let mut s = sampler(seed, pi, 0);
        let x0 = cfg.x0(p)?;
        let xhat0 = domain_point(p, &mut s);
        let u = domain_point(p, &mut s);
        let errors = cfg.error_sequence(p.pair.dim())?;
        let first = cfg.schedule(&p.pair, "power")?;
        let second = cfg.second_schedule(&p.pair, "power")?;
        let t1 = run_fb(&p.pair, &first, &errors, &x0, k)?;
        let t2 = run_fb(&p.pair, &second, &errors, &xhat0, l)?;
        let report = verify_kobayashi(&p.pair, &t1, &t2, &u)?.with_metadata(&p.id, Some(seed));
        summary.check(
            &format!("{}:kobayashi", p.id),
            report.slack + KOBAYASHI_REL_TOL * (1.0 + report.scale),
            format!(
                "min slack {:e} at (k, l) = ({}, {}) over {} pairs",
                report.slack, report.k, report.l, report.pairs_checked
            ),
        );
        reports.push(report);
    }
    Ok(vec![csv_artifact("bounds.csv".into(), |buf| write_bound_reports(buf, &reports))?])
}

fn verify_lemma(
    cfg: &ExperimentConfig,
    seed: u64,
    problems: &[ProblemInstance],
    summary: &mut RunSummary,
) -> Result<Vec<Artifact>, RunError> {
    let trials = cfg.count("trials", cfg.trials, 1000)?;
    let algebra_trials = cfg.count("algebra_trials", cfg.algebra_trials, 10_000)?;
    let mut lemma_rows = Vec::new();
    for (pi, p) in problems.iter().enumerate() {
        let theta = p.pair.theta_max();
        let samples = (0..trials)
            .into_par_iter()
            .map(|i| -> fbsplit::Result<(f64, f64, f64)> {
                let mut s = sampler(seed, pi, i);
                let lambda = s.step(theta, 1.0);
                let mu = s.step(theta, 1.0);
                let x = domain_point(p, &mut s);
                let y = domain_point(p, &mut s);
                let eps = s.vector(p.pair.dim());
                let eta = s.vector(p.pair.dim());
                Ok((lemma_gap(&p.pair, lambda, mu, &x, &y, &eps, &eta)?, lambda, mu))
            })
            .collect::<fbsplit::Result<Vec<_>>>()?;
        let worst = samples
            .iter()
            .copied()
            .reduce(|a, b| if b.0 < a.0 { b } else { a })
            .expect("at least one trial");
        summary.check(
            &format!("{}:lemma", p.id),
            worst.0 + LEMMA_GAP_TOL,
            format!("min gap {:e} over {trials} tuples", worst.0),
        );
        lemma_rows.push(vec![p.id.clone(), trials.to_string(), fmt_f64(worst.0), fmt_f64(worst.1), fmt_f64(worst.2)]);
    }

    let algebra_stream = problems.len();
    let residuals = (0..algebra_trials)
        .into_par_iter()
        .map(|i| -> fbsplit::Result<[f64; 3]> {
            let mut s = sampler(seed, algebra_stream, i);
            let theta = if s.coin(0.1) { f64::INFINITY } else { s.uniform(0.1, 10.0) };
            let lambda = s.step(theta, 1.0);
            let mu = s.step(theta, 1.0);
            let coeffs = abg(lambda, mu, theta)?;
            let identities = coeffs.identity_residuals(lambda, mu).iter().fold(0.0f64, |m, r| m.max(r.abs()));

            let sigma_k = lambda + s.uniform(0.0, 20.0);
            let sigma_l = mu + s.uniform(0.0, 20.0);
            let tau_k = lambda * lambda + s.uniform(0.0, 5.0);
            let tau_l = mu * mu + s.uniform(0.0, 5.0);
            let c = c_value(sigma_k, sigma_l, tau_k, tau_l)?;
            let norm = 1.0 + c * c;
            let recurrences = c_recurrence_residuals(lambda, mu, sigma_k, sigma_l, tau_k, tau_l)?
                .iter()
                .fold(0.0f64, |m, r| m.max(r.abs() / norm));
            let c_k_lm1 = c_value(sigma_k, sigma_l - mu, tau_k, tau_l - mu * mu)?;
            let c_km1_l = c_value(sigma_k - lambda, sigma_l, tau_k - lambda * lambda, tau_l)?;
            let c_km1_lm1 = c_value(sigma_k - lambda, sigma_l - mu, tau_k - lambda * lambda, tau_l - mu * mu)?;
            let convex =
                convex_combination_identity(&coeffs, lambda, mu, c, c_k_lm1, c_km1_l, c_km1_lm1).abs() / norm;
            Ok([identities, recurrences, convex])
        })
        .collect::<fbsplit::Result<Vec<_>>>()?;
    let mut algebra_rows = Vec::new();
    for (j, name) in ["coefficients", "recurrences", "convex_combination"].iter().enumerate() {
        let worst = residuals.iter().fold(0.0f64, |m, r| m.max(r[j]));
        summary.check(
            &format!("algebra:{name}"),
            ALGEBRA_TOL - worst,
            format!("max residual {worst:e} over {algebra_trials} inputs"),
        );
        algebra_rows.push(vec![name.to_string(), algebra_trials.to_string(), fmt_f64(worst)]);
    }
    Ok(vec![
        table("lemma.csv".into(), &["problem", "trials", "min_gap", "lambda", "mu"], lemma_rows)?,
        table("algebra.csv".into(), &["check", "trials", "max_residual"], algebra_rows)?,
    ])
}

fn flow_convergence(
    cfg: &ExperimentConfig,
    problems: &[ProblemInstance],
    summary: &mut RunSummary,
) -> Result<Vec<Artifact>, RunError> {
    let t = cfg.positive("t_max", cfg.t_max, 1.0)?;
    let m_list = cfg.m_list.clone().unwrap_or_else(|| vec![4, 16, 64, 256, 1024]);
    if m_list.is_empty() || m_list.contains(&0) {
        return Err(RunError::Config("`m_list` must be non-empty with positive entries".into()));
    }
    let points = cfg.count("gap_points", cfg.gap_points, 100)?;
    let fraction = cfg.positive("oracle_fraction", cfg.oracle_fraction, 0.1)?;
    let budget = cfg.budget.unwrap_or(DEFAULT_FLOW_BUDGET);
    let m_max = *m_list.iter().max().expect("non-empty");

    let mut rate_rows = Vec::new();
    let mut gap_rows = Vec::new();
    for p in problems {
        let x0 = cfg.x0(p)?;
        let (mn, _) = min_norm(&p.pair, &x0)?;
        let (oracle, oracle_error) = match p.exact_flow_at(&x0, t) {
            Some(exact) => (exact?, 0.0),
            None if mn == 0.0 => (x0.clone(), 0.0),
            None => {
                let tol = fraction * cauchy_bound(mn, t, t, m_max, None)?;
                reference_flow(&p.pair, &FlowQuery::new(x0.clone(), t, tol)?, budget)?
            }
        };
        let mut errors = Vec::with_capacity(m_list.len());
        let mut rate_slack = f64::INFINITY;
        for &m in &m_list {
            let err = exp_formula(&p.pair, &x0, t, m)?.dist(&oracle)?;
            let bound = cauchy_bound(mn, t, t, m, None)?;
            rate_slack = rate_slack.min(bound + oracle_error - err);
            errors.push(err);
            rate_rows.push(vec![
                p.id.clone(),
                m.to_string(),
                fmt_f64(t),
                fmt_f64(err),
                fmt_f64(bound),
                fmt_f64(oracle_error),
            ]);
        }
        summary.check(&format!("{}:rate", p.id), rate_slack, format!("oracle error {oracle_error:e}"));
        let mut order: Vec<usize> = (0..m_list.len()).collect();
        order.sort_by_key(|&i| m_list[i]);
        let monotone = min_of(order.windows(2).map(|w| errors[w[0]] - errors[w[1]] + 2.0 * oracle_error));
        summary.check(
            &format!("{}:decreasing", p.id),
            if monotone.is_finite() { monotone } else { 0.0 },
            "error column nonincreasing in m",
        );

        let times = uniform_times(t, points.saturating_sub(1).max(1));
        let mut gap_slack = f64::INFINITY;
        for &m in &m_list {
            let seq = pc_sequence(&p.pair, &x0, t, m)?;
            let mut worst = 0.0f64;
            for &s in &times {
                let u = exp_formula(&p.pair, &x0, s, m)?;
                worst = worst.max(u.dist(&seq[pc_index(t, m, s)?])?);
            }
            let bound = um_vm_gap_bound(mn, t, m);
            gap_slack = gap_slack.min(bound - worst);
            gap_rows.push(vec![p.id.clone(), m.to_string(), fmt_f64(worst), fmt_f64(bound)]);
        }
        summary.check(&format!("{}:um_vm_gap", p.id), gap_slack, format!("{} grid times", times.len()));
    }
    Ok(vec![
        table(
            "flow_convergence.csv".into(),
            &["problem", "m", "t", "error", "bound", "oracle_error"],
            rate_rows,
        )?,
        table("um_vm_gap.csv".into(), &["problem", "m", "max_gap", "bound"], gap_rows)?,
    ])
}

fn trajectory(
    p: &ProblemInstance,
    x0: &Vector,
    times: &[f64],
    tol: f64,
    budget: u64,
) -> Result<TrajectoryGrid, RunError> {
    Ok(match &p.exact_flow {
        Some(flow) => TrajectoryGrid::from_exact(flow, x0, times.to_vec())?,
        None => certified_trajectory(&p.pair, x0, times, tol, budget)?,
    })
}

fn benilan(
    cfg: &ExperimentConfig,
    seed: u64,
    problems: &[ProblemInstance],
    summary: &mut RunSummary,
) -> Result<Vec<Artifact>, RunError> {
    let t = cfg.positive("t_max", cfg.t_max, 1.0)?;
    let points = cfg.count("grid_points", cfg.grid_points, 1000)?.max(2);
    let trials = cfg.count("trials", cfg.trials, 100)?;
    let tol = cfg.positive("tol", cfg.tol, 1e-3)?;
    let budget = cfg.budget.unwrap_or(DEFAULT_FLOW_BUDGET);
    let k_max = cfg.count("k_max", cfg.k_max, 200)?;
    let times = uniform_times(t, points - 1);
    let mut artifacts = Vec::new();

    for (pi, p) in problems.iter().enumerate() {
        let x0 = cfg.x0(p)?;
        let (mn0, _) = min_norm(&p.pair, &x0)?;
        let grid = trajectory(p, &x0, &times, tol, budget)?;
        let max_err = grid.errors.iter().copied().fold(0.0, f64::max);
        let n = grid.len();

        let rows = (0..trials)
            .into_par_iter()
            .map(|i| -> fbsplit::Result<(usize, usize, f64, f64)> {
                let mut s = sampler(seed, pi, i);
                let x = domain_point(p, &mut s);
                let (_, y) = min_norm(&p.pair, &x)?;
                let a = s.index(0, n - 2);
                let b = s.index(a + 1, n - 1);
                let (ts, tt) = (grid.times[a], grid.times[b]);
                let defect = benilan_defect(&p.pair, &grid, &x, &y, ts, tt)?;
                let allowed = benilan_budget(&grid, &x, &y, ts, tt, mn0)?;
                Ok((a, b, defect, allowed))
            })
            .collect::<fbsplit::Result<Vec<_>>>()?;
        summary.check(
            &format!("{}:benilan", p.id),
            min_of(rows.iter().map(|r| r.3 - r.2)),
            format!("{trials} tuples on {n} grid points"),
        );
        artifacts.push(table(
            format!("benilan_{}.csv", p.id),
            &["trial", "s", "t", "defect", "budget"],
            rows.iter()
                .enumerate()
                .map(|(i, r)| vec![i.to_string(), fmt_f64(grid.times[r.0]), fmt_f64(grid.times[r.1]), fmt_f64(r.2), fmt_f64(r.3)])
                .collect(),
        )?);

        let lip = lipschitz_defect(&grid, mn0);
        summary.check(&format!("{}:lipschitz", p.id), 2.0 * max_err - lip, format!("defect {lip:e}"));

        let profile = minnorm_profile(&p.pair, &grid)?;
        if p.exact_flow.is_some() {
            let increase = profile_increase(&profile);
            let slack = profile_slack(&p.pair, max_err).unwrap_or(0.0);
            summary.check(
                &format!("{}:minnorm_profile", p.id),
                slack - increase,
                format!("largest increase {increase:e}"),
            );
        }
        artifacts.push(csv_artifact(format!("trajectory_{}.csv", p.id), |buf| {
            grid.write_csv(buf, Some(&profile))
        })?);

        let schedule = cfg.schedule(&p.pair, "power")?;
        let trace = run_fb_exact(&p.pair, &schedule, &x0, k_max)?;
        let hybrid = (0..trials)
            .into_par_iter()
            .map(|i| -> fbsplit::Result<(usize, usize, f64, f64)> {
                let mut s = sampler(seed, pi, trials + i);
                let k = s.index(0, k_max);
                let j = s.index(0, n - 1);
                let dist = trace.points[k].dist(&grid.points[j])?;
                let bound = hybrid_bound(&x0, &x0, mn0, mn0, trace.sigma[k], trace.tau[k], grid.times[j])?;
                Ok((k, j, dist, bound + grid.errors[j]))
            })
            .collect::<fbsplit::Result<Vec<_>>>()?;
        summary.check(
            &format!("{}:hybrid", p.id),
            min_of(hybrid.iter().map(|h| h.3 - h.2)),
            format!("{trials} (k, t) pairs"),
        );
        artifacts.push(table(
            format!("hybrid_{}.csv", p.id),
            &["k", "t", "distance", "bound"],
            hybrid
                .iter()
                .map(|h| vec![h.0.to_string(), fmt_f64(grid.times[h.1]), fmt_f64(h.2), fmt_f64(h.3)])
                .collect(),
        )?);
    }
    Ok(artifacts)
}

fn almost_orbit(cfg: &ExperimentConfig, problems: &[ProblemInstance], summary: &mut RunSummary) -> Result<Vec<Artifact>, RunError> {
    let times = cfg.times.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0, 16.0]);
    if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(RunError::Config("`times` must be non-empty, finite and nonnegative".into()));
    }
    let settings = SweepSettings {
        times,
        h_grid: geometric_h_grid(
            cfg.positive("h_delta", cfg.h_delta, 0.125)?,
            cfg.positive("h_max", cfg.h_max, 8.0)?,
        ),
        oracle_fraction: cfg.positive("oracle_fraction", cfg.oracle_fraction, 0.1)?,
        budget: cfg.budget.unwrap_or(DEFAULT_FLOW_BUDGET),
    };
    let mut artifacts = Vec::new();
    for p in problems {
        let schedule = cfg.schedule(&p.pair, "power")?;
        let x0 = cfg.x0(p)?;
        let forward = sweep_flow_against_schedule(&p.pair, &schedule, &x0, &settings)?;
        let backward = sweep_sequence_against_flow(&p.pair, &schedule, &x0, &settings)?;
        for report in [&forward, &backward] {
            summary.check(
                &format!("{}:{}", p.id, report.direction.label()),
                min_of(report.rows.iter().map(|r| r.bound + r.oracle_budget - r.defect)),
                format!("{} probe times", report.rows.len()),
            );
        }
        // strict: a flat step fails
        let decrease = min_of(forward.rows.windows(2).map(|w| w[0].bound - w[1].bound));
        let slack = if decrease > 0.0 { decrease.min(f64::MAX) } else { decrease.min(-f64::MIN_POSITIVE) };
        summary.check(
            &format!("{}:bound_decreasing", p.id),
            slack,
            "bound column strictly decreasing in t",
        );
        artifacts.push(csv_artifact(format!("almost_orbit_{}.csv", p.id), |buf| {
            write_almost_orbit_csv(buf, &[forward, backward])
        })?);
    }
    Ok(artifacts)
}

/// Equivalence runs perturb with `10^-2 k^-2 e_1` unless told otherwise.
fn equivalence_errors(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut c = cfg.clone();
    if c.errors.is_none() {
        c.errors = Some("power_decay".into());
        c.error_scale = c.error_scale.or(Some(1e-2));
    }
    c
}

fn equivalence(
    cfg: &ExperimentConfig,
    seed: u64,
    problems: &[ProblemInstance],
    summary: &mut RunSummary,
) -> Result<Vec<Artifact>, RunError> {
    let with_errors = equivalence_errors(cfg);
    let settings_base = EquivalenceSettings {
        t_max: cfg.positive("t_max", cfg.t_max, 10.0)?,
        k_max: cfg.count("k_max", cfg.k_max, 10_000)?,
        flow_tol: cfg.positive("tol", cfg.tol, 1e-3)?,
        budget: cfg.budget.unwrap_or(DEFAULT_FLOW_BUDGET),
        perturbation: None,
    };
    let mut artifacts = Vec::new();
    for (pi, p) in problems.iter().enumerate() {
        let zero = p
            .zero_oracle
            .as_ref()
            .ok_or_else(|| RunError::Config(format!("`{}` has no zero oracle", p.id)))?;
        let x0_set = match &cfg.x0_set {
            Some(set) => set.iter().map(|v| vector(v)).collect::<Result<Vec<_>, _>>()?,
            None => {
                let x0 = cfg.x0(p)?;
                let mut s = sampler(seed, pi, 0);
                vec![zero.project(&x0), domain_point(p, &mut s), domain_point(p, &mut s), x0]
            }
        };
        let errors: ErrorSequence = with_errors.error_sequence(p.pair.dim())?;
        let perturbation = if errors.is_summable() && with_errors.errors.as_deref() != Some("none") {
            Some(errors)
        } else {
            None
        };
        let settings = EquivalenceSettings {
            perturbation,
            ..settings_base.clone()
        };
        let schedule = cfg.schedule(&p.pair, "power")?;
        let report = equivalence_experiment(&p.pair, &schedule, zero, &x0_set, &settings)?;
        summary.partial |= report.partial();

        let worst = |f: &dyn Fn(&fbsplit::asymptotics::EquivalenceRow) -> Option<f64>| {
            report.rows.iter().filter_map(f).fold(0.0f64, f64::max)
        };
        let flow_zero = worst(&|r| r.flow_to_zero.map(|d| d + r.flow_error));
        let fb_zero = worst(&|r| Some(r.fb_to_zero));
        let between = worst(&|r| r.flow_to_fb.map(|d| d + r.flow_error));
        summary.check(&format!("{}:flow_to_zero", p.id), EQUIVALENCE_TOL - flow_zero, format!("{flow_zero:e}"));
        summary.check(&format!("{}:fb_to_zero", p.id), EQUIVALENCE_TOL - fb_zero, format!("{fb_zero:e}"));
        summary.check(&format!("{}:flow_to_fb", p.id), EQUIVALENCE_TOL - between, format!("{between:e}"));
        if settings.perturbation.is_some() {
            let shift = worst(&|r| r.perturbation_shift);
            summary.check(&format!("{}:robustness", p.id), EQUIVALENCE_TOL - shift, format!("{shift:e}"));
        }
        artifacts.push(csv_artifact(format!("equivalence_{}.csv", p.id), |buf| report.write_csv(buf))?);
    }
    Ok(artifacts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(problem: &str) -> ExperimentConfig {
        ExperimentConfig {
            problem: Some(problem.into()),
            seed: Some(7),
            ..Default::default()
        }
    }

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::from_name(e.name()), Some(e));
        }
        assert_eq!(Experiment::from_name("nope"), None);
    }

    #[test]
    fn simulate_writes_k_plus_one_rows() {
        let c = ExperimentConfig {
            k_max: Some(100),
            ..cfg("linear1d")
        };
        let out = run(Experiment::Simulate, &c).unwrap();
        assert!(out.summary.passed);
        let text = String::from_utf8(out.artifact("trace_linear1d.csv").unwrap().bytes.clone()).unwrap();
        assert_eq!(text.lines().count(), 1 + 101);
    }

    #[test]
    fn validation_errors_map_to_exit_code_two() {
        let missing_seed = ExperimentConfig::default();
        assert_eq!(run(Experiment::Simulate, &missing_seed).unwrap_err().exit_code(), 2);
        let wrong = ExperimentConfig {
            experiment: Some("benilan".into()),
            ..cfg("linear1d")
        };
        assert_eq!(validate(Experiment::Simulate, &wrong).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn budget_exhaustion_maps_to_exit_code_three() {
        let c = ExperimentConfig {
            budget: Some(10),
            ..cfg("l1_quadratic")
        };
        assert_eq!(run(Experiment::FlowConvergence, &c).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn verify_bounds_on_lasso() {
        let out = run(Experiment::VerifyBounds, &cfg("l1_quadratic")).unwrap();
        assert!(out.summary.passed, "{:?}", out.summary);
    }
}
