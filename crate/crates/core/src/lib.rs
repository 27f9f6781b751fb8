//! Forward-backward splitting for the evolution inclusion `-u'(t) ∈ (A+B)u(t)`
//! with executable a-priori bounds.
//!
//! `A` is maximal monotone and accessed only through its resolvent, `B` is
//! cocoercive. The crate provides the perturbed iteration
//! `x_k = J_{λ_k}(x_{k-1} - λ_k B x_{k-1} + λ_k ε_k)`, the exponential formula
//! for the generated semigroup, and verifiers for the distance estimates that
//! relate discrete sequences and continuous trajectories.

// `!(x > 0.0)` is how NaN gets rejected alongside nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bounds;
pub mod error;
pub mod flow;
pub mod operators;
pub mod problems;
pub mod sampling;
pub mod splitting;
pub mod tolerances;
pub mod vector;

pub use asymptotics::{evolution_s, evolution_t, EvolutionSystem, ScheduleProduct, SemigroupFlow};
pub use bounds::{verify_kobayashi, BoundReport};
pub use error::{Error, Result};
pub use operators::{fb_map, min_norm, CocoerciveOperator, MonotoneOperator, OperatorPair};
pub use problems::{ExactFlow, ProblemInstance, ZeroOracle};
pub use sampling::Sampler;
pub use flow::{approximate_flow, certified_trajectory, FlowQuery, TrajectoryGrid};
pub use splitting::{run_fb, ErrorSequence, ErrorSpec, IterationTrace, ScheduleKind, StepSchedule};
pub use vector::{SpaceConstants, Vector};
