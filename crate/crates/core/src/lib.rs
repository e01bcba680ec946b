//! Lateral-movement risk analysis over a time-expanded random user-host
//! network, with roaming ("cognitive") honeypot policy synthesis.
//!
//! The library models an enterprise network as a sequence of stages. At each
//! stage every directed service link `i -> j` appears independently with
//! probability `beta[i][j]`, an attacker moves one hop from every node he
//! already controls (a move over an existing link succeeds with probability
//! `lambda[i][j]`), and the defender disguises a single honey link drawn from
//! a policy matrix `gamma`. An unidentified honey link whose honeypot node is
//! idle detects the attacker and stops the episode.
//!
//! Main entry points:
//!
//! - [`net_model`]: validated network description, policy representation and
//!   stage-level sampling primitives.
//! - [`metrics`]: probability of interference, stealthiness level and cost of
//!   roaming for a policy.
//! - [`ltv`]: exact and union-bound evaluation of the target node's
//!   `delta_k`-stage vulnerability.
//! - [`policy_opt`]: entropy-regularized iterative synthesis of risky and
//!   conservative honeypot policies.
//! - [`heuristics`]: closed-form analysis of direct and indirect policy
//!   families (movement deterrence, compromisability threshold, vulnerability
//!   residue).
//! - [`mc`]: reproducible Monte-Carlo episode simulation, the independent
//!   oracle for the exact evaluator and the only estimator for large
//!   networks.
//! - [`cli`]: config-driven front end shared by the `latmove` binary.

pub mod auth;
pub mod cli;
pub mod config;
pub mod heuristics;
pub mod ltv;
pub mod matrix;
pub mod mc;
pub mod metrics;
pub mod net_model;
pub mod numeric;
pub mod policy_opt;
pub mod report;
pub mod rng;
#[cfg(test)]
pub(crate) mod testutil;

pub use matrix::SquareMatrix;
pub use net_model::{NetworkSpec, NodeKind, PolicyMatrix, StageRealization};
