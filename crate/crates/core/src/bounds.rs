//! Distance estimates between two forward-backward sequences.
//!
//! For sequences `x_k`, `x̂_l` generated with steps `λ_k`, `μ_l <= Θ` and any
//! `u` in the domain of `A`,
//!
//! ```text
//! ||x_k - x̂_l|| <= ||x_0 - u|| + ||x̂_0 - u|| + |||(A+B)u||| c_{k,l} + e_k + ê_l,
//! c_{k,l} = sqrt((σ_k - σ̂_l)^2 + τ_k + τ̂_l).
//! ```
//!
//! The induction behind it rests on a one-step inequality with weights
//! `α, β, γ` and on three exact recurrences for `c²`. Writing
//! `d = σ_k - σ̂_l`:
//!
//! ```text
//! c²_{k,l-1}   = c²_{k,l} + 2μ_l d
//! c²_{k-1,l}   = c²_{k,l} - 2λ_k d
//! c²_{k-1,l-1} = c²_{k,l} + 2(μ_l - λ_k) d - 2λ_k μ_l
//! ```
//!
//! so that `α c²_{k,l-1} + β c²_{k-1,l} + γ c²_{k-1,l-1} = c²_{k,l} - 2γ λ_k μ_l`.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::{fb_map, min_norm, OperatorPair};
use crate::splitting::IterationTrace;
use crate::vector::{fmt_f64, Vector};

/// Weights of the one-step inequality.
///
/// `gamma_theta` stores the product `γΘ`, which stays finite (`λμ/(λ+μ)`)
/// when `Θ = ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbgCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub gamma_theta: f64,
}

impl AbgCoefficients {
    /// Residuals of `α+β+γ = 1`, `αλ+γΘ = λ` and `βμ+γΘ = μ`.
    pub fn identity_residuals(&self, lambda: f64, mu: f64) -> [f64; 3] {
        [
            self.alpha + self.beta + self.gamma - 1.0,
            self.alpha * lambda + self.gamma_theta - lambda,
            self.beta * mu + self.gamma_theta - mu,
        ]
    }
}

fn check_step(step: f64, theta: f64) -> Result<()> {
    if !(step > 0.0) || step > theta || !step.is_finite() {
        return Err(Error::StepOutOfRange {
            lambda: step,
            lower: 0.0,
            upper: theta,
            index: None,
        });
    }
    Ok(())
}

/// `α = λ(Θ-μ)/D`, `β = μ(Θ-λ)/D`, `γ = λμ/D` with `D = Θ(λ+μ) - λμ`.
pub fn abg(lambda: f64, mu: f64, theta: f64) -> Result<AbgCoefficients> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter(format!("Θ must be positive, got {theta}")));
    }
    check_step(lambda, theta)?;
    check_step(mu, theta)?;
    if theta.is_infinite() {
        let s = lambda + mu;
        return Ok(AbgCoefficients {
            alpha: lambda / s,
            beta: mu / s,
            gamma: 0.0,
            gamma_theta: lambda * mu / s,
        });
    }
    let d = theta * (lambda + mu) - lambda * mu;
    let gamma = lambda * mu / d;
    Ok(AbgCoefficients {
        alpha: lambda * (theta - mu) / d,
        beta: mu * (theta - lambda) / d,
        gamma,
        gamma_theta: lambda * mu * theta / d,
    })
}

/// Right-hand side minus left-hand side of
/// `||T^ε_λ x - T^η_μ y|| <= α||T^ε_λ x - y|| + β||x - T^η_μ y|| + γ||x - y|| + γΘ||ε - η||`.
pub fn lemma_gap(
    pair: &OperatorPair,
    lambda: f64,
    mu: f64,
    x: &Vector,
    y: &Vector,
    eps: &Vector,
    eta: &Vector,
) -> Result<f64> {
    let theta = pair.theta_max();
    pair.check_step(lambda, None)?;
    pair.check_step(mu, None)?;
    let c = abg(lambda, mu, theta)?;
    let tx = fb_map(pair, lambda, x, eps)?;
    let ty = fb_map(pair, mu, y, eta)?;
    let rhs = c.alpha * tx.dist(y)? + c.beta * x.dist(&ty)? + c.gamma * x.dist(y)? + c.gamma_theta * eps.dist(eta)?;
    Ok(rhs - tx.dist(&ty)?)
}

/// `c_{k,l} = sqrt((σ_k - σ̂_l)^2 + τ_k + τ̂_l)`.
pub fn c_value(sigma_k: f64, sigma_l: f64, tau_k: f64, tau_l: f64) -> Result<f64> {
    Ok(c_squared(sigma_k, sigma_l, tau_k, tau_l)?.sqrt())
}

fn c_squared(sigma_k: f64, sigma_l: f64, tau_k: f64, tau_l: f64) -> Result<f64> {
    if tau_k < 0.0 || tau_l < 0.0 {
        return Err(Error::InvalidParameter(format!("tau must be nonnegative, got ({tau_k}, {tau_l})")));
    }
    let d = sigma_k - sigma_l;
    Ok(d * d + tau_k + tau_l)
}

/// Residuals of the three `c²` recurrences, each computed as the directly
/// evaluated neighbour value minus the recurrence prediction, in the order
/// `(k, l-1)`, `(k-1, l)`, `(k-1, l-1)`.
pub fn c_recurrence_residuals(
    lambda_k: f64,
    mu_l: f64,
    sigma_k: f64,
    sigma_l: f64,
    tau_k: f64,
    tau_l: f64,
) -> Result<[f64; 3]> {
    let c2 = c_squared(sigma_k, sigma_l, tau_k, tau_l)?;
    let d = sigma_k - sigma_l;
    let k_lm1 = (sigma_k - (sigma_l - mu_l)).powi(2) + tau_k + (tau_l - mu_l * mu_l);
    let km1_l = ((sigma_k - lambda_k) - sigma_l).powi(2) + (tau_k - lambda_k * lambda_k) + tau_l;
    let km1_lm1 =
        ((sigma_k - lambda_k) - (sigma_l - mu_l)).powi(2) + (tau_k - lambda_k * lambda_k) + (tau_l - mu_l * mu_l);
    Ok([
        k_lm1 - (c2 + 2.0 * mu_l * d),
        km1_l - (c2 - 2.0 * lambda_k * d),
        km1_lm1 - (c2 + 2.0 * (mu_l - lambda_k) * d - 2.0 * lambda_k * mu_l),
    ])
}

/// `α c²_{k,l-1} + β c²_{k-1,l} + γ c²_{k-1,l-1} - (c²_{k,l} - 2γ λ_k μ_l)`.
pub fn convex_combination_identity(
    coeffs: &AbgCoefficients,
    lambda_k: f64,
    mu_l: f64,
    c_kl: f64,
    c_k_lm1: f64,
    c_km1_l: f64,
    c_km1_lm1: f64,
) -> f64 {
    coeffs.alpha * c_k_lm1 * c_k_lm1 + coeffs.beta * c_km1_l * c_km1_l + coeffs.gamma * c_km1_lm1 * c_km1_lm1
        - (c_kl * c_kl - 2.0 * coeffs.gamma * lambda_k * mu_l)
}

/// Right-hand side of the two-sequence estimate.
#[allow(clippy::too_many_arguments)]
pub fn kobayashi_rhs(
    x0: &Vector,
    xhat0: &Vector,
    u: &Vector,
    minnorm_u: f64,
    sigma_k: f64,
    sigma_l: f64,
    tau_k: f64,
    tau_l: f64,
    e_k: f64,
    e_l: f64,
) -> Result<f64> {
    Ok(x0.dist(u)? + xhat0.dist(u)? + minnorm_u * c_value(sigma_k, sigma_l, tau_k, tau_l)? + e_k + e_l)
}

/// Worst index pair of an all-pairs check.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`, never clamped.
    pub slack: f64,
    pub k: usize,
    pub l: usize,
    /// Largest right-hand side over all pairs.
    pub scale: f64,
    pub pairs_checked: usize,
    pub seed: Option<u64>,
    pub problem: String,
}

impl BoundReport {
    pub fn with_metadata(mut self, problem: &str, seed: Option<u64>) -> Self {
        self.problem = problem.to_string();
        self.seed = seed;
        self
    }
}

/// CSV with columns `lhs, rhs, slack, k, l, seed, problem`.
pub fn write_bound_reports<W: Write>(writer: W, reports: &[BoundReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["lhs", "rhs", "slack", "k", "l", "seed", "problem"])?;
    for r in reports {
        w.write_record([
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
            fmt_f64(r.slack),
            r.k.to_string(),
            r.l.to_string(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.problem.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn check_trace_steps(pair: &OperatorPair, trace: &IterationTrace) -> Result<()> {
    for (i, &lambda) in trace.steps.iter().enumerate() {
        pair.check_step(lambda, Some(i + 1))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Worst {
    lhs: f64,
    rhs: f64,
    slack: f64,
    k: usize,
    l: usize,
    scale: f64,
}

impl Worst {
    fn better_than(&self, other: &Worst) -> bool {
        match self.slack.total_cmp(&other.slack) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => (self.k, self.l) < (other.k, other.l),
        }
    }

    fn merge(a: Worst, b: Worst) -> Worst {
        let scale = a.scale.max(b.scale);
        let mut w = if b.better_than(&a) { b } else { a };
        w.scale = scale;
        w
    }
}

/// Evaluates the two-sequence estimate over every index pair `(k, l)` and
/// reports the pair with least slack (ties broken by smallest `(k, l)`).
pub fn verify_kobayashi(
    pair: &OperatorPair,
    trace1: &IterationTrace,
    trace2: &IterationTrace,
    u: &Vector,
) -> Result<BoundReport> {
    check_trace_steps(pair, trace1)?;
    check_trace_steps(pair, trace2)?;
    let (minnorm, _) = min_norm(pair, u)?;
    let d0 = trace1.points[0].dist(u)?;
    let dh0 = trace2.points[0].dist(u)?;

    let rows: Vec<Worst> = (0..trace1.points.len())
        .into_par_iter()
        .map(|k| -> Result<Worst> {
            let xk = &trace1.points[k];
            let mut worst: Option<Worst> = None;
            for (l, xl) in trace2.points.iter().enumerate() {
                let lhs = xk.dist(xl)?;
                let c = c_value(trace1.sigma[k], trace2.sigma[l], trace1.tau[k], trace2.tau[l])?;
                let rhs = d0 + dh0 + minnorm * c + trace1.cumulative_error[k] + trace2.cumulative_error[l];
                let cand = Worst {
                    lhs,
                    rhs,
                    slack: rhs - lhs,
                    k,
                    l,
                    scale: rhs,
                };
                worst = Some(match worst {
                    None => cand,
                    Some(w) => Worst::merge(w, cand),
                });
            }
            Ok(worst.expect("trace holds x_0"))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = rows.into_iter().reduce(Worst::merge).expect("trace holds x_0");
    Ok(BoundReport {
        lhs: worst.lhs,
        rhs: worst.rhs,
        slack: worst.slack,
        k: worst.k,
        l: worst.l,
        scale: worst.scale,
        pairs_checked: trace1.points.len() * trace2.points.len(),
        seed: None,
        problem: String::new(),
    })
}
