//! Kuramoto oscillators on uniform graphs and their continuum limit.
//!
//! The crate is organised around the pipeline used by the experiments:
//!
//! * [`graphs`] builds weight matrices from graphons, deterministically or by
//!   sampling random dense / sparse graphs;
//! * [`frequencies`] produces natural frequencies (equally placed or i.i.d.),
//!   the ascending-sort permutation and the quantile targets;
//! * [`dynamics`] evaluates the Kuramoto vector field and integrates it with an
//!   adaptive 8th-order Runge–Kutta scheme;
//! * [`continuum`] solves the self-consistency equation of the continuum limit
//!   and evaluates its stationary families;
//! * [`metrics`] compares finite phase vectors with continuum profiles on the
//!   circle;
//! * [`experiments`] wires everything into reproducible scenarios.
//!
//! Indices are zero-based throughout the Rust API. File exports use the
//! one-based node numbering of the model.

pub mod continuum;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod frequencies;
pub mod graphs;
pub mod metrics;
pub mod quadrature;
pub mod rng;

pub use continuum::{Family, SelfConsistencyProblem, StationaryProfile};
pub use dynamics::{IntegratorConfig, KmSystem, LockStatus, Method, PhaseState, Trajectory};
pub use error::{Error, Result};
pub use frequencies::{FrequencyDistribution, FrequencyFunction, FrequencySample};
pub use graphs::{GraphCase, GraphKind, GraphRecipe, Graphon, WeightMatrix};
pub use metrics::{AlignmentResult, PhaseField, StepFunction};
