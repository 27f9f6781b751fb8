//! Acceptance suite: one PASS/FAIL line per criterion, then a nonzero exit if
//! any failed. Every threshold is pinned below.

use std::time::{Duration, Instant};

use fbsplit::flow::exp_formula;
use fbsplit::problems::default_linear1d;
use fbsplit::Vector;
use fbsplit_cli::{run, Criterion, Experiment, ExperimentConfig, Outcome};

const SEED: u64 = 20240611;

// criterion 1
const KOBAYASHI_K: usize = 200;
const KOBAYASHI_BUDGET: Duration = Duration::from_secs(10);
// criteria 2 and 3
const LEMMA_TRIALS: usize = 1000;
const ALGEBRA_TRIALS: usize = 10_000;
const LEMMA_BUDGET: Duration = Duration::from_secs(5);
const ALGEBRA_BUDGET: Duration = Duration::from_secs(1);
// criterion 4
const RATE_M: [usize; 5] = [4, 16, 64, 256, 1024];
const RATE_M100_CEILING: f64 = 0.2;
const RATE_BUDGET: Duration = Duration::from_secs(2);
// criterion 5
const GAP_M: [usize; 2] = [16, 256];
const GAP_POINTS: usize = 100;
const GAP_BUDGET: Duration = Duration::from_secs(5);
// criteria 6 and 7
const BENILAN_TRIALS: usize = 100;
const BENILAN_GRID: usize = 1000;
const BENILAN_BUDGET: Duration = Duration::from_secs(20);
const COROLLARY_BUDGET: Duration = Duration::from_secs(5);
// criterion 8
const ORBIT_TIMES: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];
const ORBIT_H_MAX: f64 = 8.0;
const ORBIT_H_DELTA: f64 = 0.125;
const ORBIT_ORACLE_FRACTION: f64 = 0.1;
const ORBIT_BUDGET: Duration = Duration::from_secs(60);
// criterion 9
const EQUIV_T_MAX: f64 = 10.0;
const EQUIV_K_MAX: usize = 10_000;
const EQUIV_FLOW_TOL: f64 = 1e-3;
const EQUIV_ERROR_SCALE: f64 = 1e-2;
const EQUIV_BUDGET: Duration = Duration::from_secs(30);

struct Recorded {
    experiment: Experiment,
    cfg: ExperimentConfig,
    outcome: Outcome,
}

#[derive(Default)]
struct Suite {
    failures: usize,
    runs: Vec<Recorded>,
}

impl Suite {
    fn line(&mut self, id: &str, passed: bool, text: String) {
        if !passed {
            self.failures += 1;
        }
        println!("{} [{id}] {text}", if passed { "PASS" } else { "FAIL" });
    }

    /// Runs one experiment and returns the index of its record and the time it took.
    fn run(&mut self, experiment: Experiment, cfg: ExperimentConfig) -> (usize, Duration) {
        let start = Instant::now();
        let outcome = run(experiment, &cfg).unwrap_or_else(|e| panic!("{experiment}: {e}"));
        let elapsed = start.elapsed();
        self.runs.push(Recorded { experiment, cfg, outcome });
        (self.runs.len() - 1, elapsed)
    }

    /// Criteria of the given runs whose names end with one of `suffixes`.
    fn select(&self, runs: &[usize], suffixes: &[&str]) -> Vec<&Criterion> {
        runs.iter()
            .flat_map(|&i| self.runs[i].outcome.summary.criteria.iter())
            .filter(|c| suffixes.iter().any(|s| c.name.ends_with(s)))
            .collect()
    }
}

fn base(problem: &str) -> ExperimentConfig {
    ExperimentConfig {
        problem: Some(problem.into()),
        seed: Some(SEED),
        ..Default::default()
    }
}

fn power_half_theta(cfg: ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig {
        schedule: Some("power".into()),
        step_fraction: Some(0.5),
        exponent: Some(0.75),
        ..cfg
    }
}

/// `(all passed and exactly `expected` checks ran, description)`.
fn describe(criteria: &[&Criterion], expected: usize) -> (bool, String) {
    let passed = criteria.len() == expected && criteria.iter().all(|c| c.passed);
    let worst = criteria
        .iter()
        .min_by(|a, b| a.worst_slack.total_cmp(&b.worst_slack))
        .map(|c| format!("worst {} slack {:.3e}", c.name, c.worst_slack))
        .unwrap_or_else(|| "no checks ran".into());
    let failing: Vec<&str> = criteria.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let tail = if failing.is_empty() { String::new() } else { format!("; failing: {}", failing.join(", ")) };
    (passed, format!("{}/{expected} checks, {worst}{tail}", criteria.len()))
}

fn criterion_1(s: &mut Suite) {
    let mut runs = Vec::new();
    let mut total = Duration::ZERO;
    for schedule in ["constant", "power"] {
        for errors in ["none", "power_decay"] {
            let cfg = ExperimentConfig {
                schedule: Some(schedule.into()),
                step_fraction: Some(0.5),
                exponent: Some(0.75),
                errors: Some(errors.into()),
                error_scale: Some(1.0),
                error_exponent: Some(2.0),
                k_max: Some(KOBAYASHI_K),
                l_max: Some(KOBAYASHI_K),
                ..base("catalog")
            };
            let (i, t) = s.run(Experiment::VerifyBounds, cfg);
            runs.push(i);
            total += t;
        }
    }
    let (passed, text) = describe(&s.select(&runs, &[":kobayashi"]), 16);
    s.line(
        "1",
        passed && total <= KOBAYASHI_BUDGET,
        format!(
            "two-sequence bound, 4 problems x 2 schedules x 2 error sequences, K = L = {KOBAYASHI_K}, \
             slack >= -1e-9(1+scale): {text}; {total:.2?} (budget {KOBAYASHI_BUDGET:?})"
        ),
    );
}

fn criteria_2_3(s: &mut Suite) {
    let cfg = ExperimentConfig {
        trials: Some(LEMMA_TRIALS),
        algebra_trials: Some(ALGEBRA_TRIALS),
        ..base("catalog")
    };
    let (i, t) = s.run(Experiment::VerifyLemma, cfg);
    let (passed, text) = describe(&s.select(&[i], &[":lemma"]), 4);
    s.line(
        "2",
        passed && t <= LEMMA_BUDGET,
        format!(
            "one-step inequality, {LEMMA_TRIALS} tuples per problem, gap >= -1e-10: {text}; {t:.2?} (budget {LEMMA_BUDGET:?})"
        ),
    );
    let (passed, text) = describe(&s.select(&[i], &["algebra:coefficients", "algebra:recurrences", "algebra:convex_combination"]), 3);
    s.line(
        "3",
        passed && t <= ALGEBRA_BUDGET,
        format!(
            "coefficient identities and c^2 recurrences, {ALGEBRA_TRIALS} inputs, residual <= 1e-12: {text}; \
             {t:.2?} (budget {ALGEBRA_BUDGET:?})"
        ),
    );
}

fn criterion_4(s: &mut Suite) {
    let mut runs = Vec::new();
    let mut total = Duration::ZERO;
    for problem in ["linear1d", "skew2d"] {
        let cfg = ExperimentConfig {
            t_max: Some(1.0),
            m_list: Some(RATE_M.to_vec()),
            ..base(problem)
        };
        let (i, t) = s.run(Experiment::FlowConvergence, cfg);
        runs.push(i);
        total += t;
    }
    let (passed, text) = describe(&s.select(&runs, &[":rate", ":decreasing"]), 4);

    let lin = default_linear1d();
    let u100 = exp_formula(&lin.pair, &Vector::scalar(1.0).unwrap(), 1.0, 100).unwrap().as_slice()[0];
    let err100 = (u100 - (-2.0f64).exp()).abs();
    s.line(
        "4",
        passed && err100 <= RATE_M100_CEILING && total <= RATE_BUDGET,
        format!(
            "exponential-formula error <= minnorm t / sqrt(m), m in {RATE_M:?}, linear1d and skew2d: {text}; \
             m = 100 error {err100:.3e} <= {RATE_M100_CEILING}; {total:.2?} (budget {RATE_BUDGET:?})"
        ),
    );
}

fn criterion_5(s: &mut Suite) {
    let cfg = ExperimentConfig {
        t_max: Some(1.0),
        m_list: Some(GAP_M.to_vec()),
        gap_points: Some(GAP_POINTS),
        ..base("catalog")
    };
    let (i, t) = s.run(Experiment::FlowConvergence, cfg);
    let (passed, text) = describe(&s.select(&[i], &[":um_vm_gap"]), 4);
    s.line(
        "5",
        passed && t <= GAP_BUDGET,
        format!(
            "interpolant gap <= 3 S minnorm / sqrt(m), S = 1, m in {GAP_M:?}, {GAP_POINTS} times, all problems: \
             {text}; {t:.2?} (budget {GAP_BUDGET:?})"
        ),
    );
}

fn criteria_6_7(s: &mut Suite) {
    let cfg = ExperimentConfig {
        t_max: Some(1.0),
        grid_points: Some(BENILAN_GRID),
        trials: Some(BENILAN_TRIALS),
        ..base("catalog")
    };
    let (i, t) = s.run(Experiment::Benilan, cfg);
    let (passed, text) = describe(&s.select(&[i], &[":benilan"]), 4);
    s.line(
        "6",
        passed && t <= BENILAN_BUDGET,
        format!(
            "integral-solution defect <= quadrature + certification budget, {BENILAN_TRIALS} tuples on \
             {BENILAN_GRID}-point grids: {text}; {t:.2?} (budget {BENILAN_BUDGET:?})"
        ),
    );
    let (p_ok, p_text) = describe(&s.select(&[i], &[":minnorm_profile"]), 2);
    let (h_ok, h_text) = describe(&s.select(&[i], &[":hybrid"]), 4);
    s.line(
        "7",
        p_ok && h_ok && t <= COROLLARY_BUDGET,
        format!(
            "(i) minimal-norm profile nonincreasing on closed-form problems: {p_text}; (ii) hybrid bound, \
             {BENILAN_TRIALS} (k, t) pairs per problem: {h_text}; {t:.2?} (budget {COROLLARY_BUDGET:?})"
        ),
    );
}

fn criterion_8(s: &mut Suite) {
    let mut runs = Vec::new();
    let mut total = Duration::ZERO;
    for problem in ["linear1d", "l1_quadratic", "l1_quadratic_1d"] {
        let cfg = power_half_theta(ExperimentConfig {
            times: Some(ORBIT_TIMES.to_vec()),
            h_delta: Some(ORBIT_H_DELTA),
            h_max: Some(ORBIT_H_MAX),
            oracle_fraction: Some(ORBIT_ORACLE_FRACTION),
            ..base(problem)
        });
        let (i, t) = s.run(Experiment::AlmostOrbit, cfg);
        runs.push(i);
        total += t;
    }
    let (passed, text) = describe(&s.select(&runs, &[":flow_vs_schedule", ":sequence_vs_flow", ":bound_decreasing"]), 9);
    s.line(
        "8",
        passed && total <= ORBIT_BUDGET,
        format!(
            "almost-orbit defect <= bound + oracle budget in both directions, t in {ORBIT_TIMES:?}, h up to \
             {ORBIT_H_MAX}, bound strictly decreasing: {text}; {total:.2?} (budget {ORBIT_BUDGET:?})"
        ),
    );
}

fn criterion_9(s: &mut Suite) {
    let mut runs = Vec::new();
    let mut total = Duration::ZERO;
    for problem in ["linear1d", "l1_quadratic_1d"] {
        let cfg = power_half_theta(ExperimentConfig {
            t_max: Some(EQUIV_T_MAX),
            k_max: Some(EQUIV_K_MAX),
            tol: Some(EQUIV_FLOW_TOL),
            errors: Some("power_decay".into()),
            error_scale: Some(EQUIV_ERROR_SCALE),
            error_exponent: Some(2.0),
            ..base(problem)
        });
        let (i, t) = s.run(Experiment::Equivalence, cfg);
        runs.push(i);
        total += t;
    }
    let partial = runs.iter().any(|&i| s.runs[i].outcome.summary.partial);
    let (passed, text) = describe(&s.select(&runs, &[":flow_to_zero", ":fb_to_zero", ":flow_to_fb", ":robustness"]), 8);
    s.line(
        "9",
        passed && !partial && total <= EQUIV_BUDGET,
        format!(
            "long-time limits within 2e-3 of the zero and of each other, T = {EQUIV_T_MAX}, K = {EQUIV_K_MAX}, \
             perturbation shift <= 2e-3, linear1d and 1-D lasso: {text}{}; {total:.2?} (budget {EQUIV_BUDGET:?})",
            if partial { "; budget exhausted" } else { "" }
        ),
    );
}

/// Reruns every recorded experiment on a single worker and compares bytes.
fn criterion_10(s: &mut Suite) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for rec in &s.runs {
        let again = pool.install(|| run(rec.experiment, &rec.cfg)).unwrap();
        for a in &rec.outcome.artifacts {
            compared += 1;
            if again.artifact(&a.name).map(|b| &b.bytes) != Some(&a.bytes) {
                mismatches.push(format!("{}/{}", rec.experiment, a.name));
            }
        }
    }
    let runs = s.runs.len();
    s.line(
        "10",
        mismatches.is_empty() && compared > 0,
        format!(
            "byte-identical CSV when {runs} runs are repeated on one worker: {compared} files compared, {} differ{}",
            mismatches.len(),
            if mismatches.is_empty() { String::new() } else { format!(": {}", mismatches.join(", ")) }
        ),
    );
}

fn main() {
    let mut suite = Suite::default();
    criterion_1(&mut suite);
    criteria_2_3(&mut suite);
    criterion_4(&mut suite);
    criterion_5(&mut suite);
    criteria_6_7(&mut suite);
    criterion_8(&mut suite);
    criterion_9(&mut suite);
    criterion_10(&mut suite);
    if suite.failures > 0 {
        println!("{} acceptance criteria failed", suite.failures);
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
