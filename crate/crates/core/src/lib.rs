//! Decentralized consensus optimization with gradient tracking and variance
//! reduction.
//!
//! Nodes of an undirected network each hold a private finite-sum cost and
//! cooperate to minimize the network average
//! `F(theta) = (1/n) sum_i f_i(theta)`, `f_i = (1/m_i) sum_j f_{i,j}`,
//! exchanging states only with graph neighbors through a doubly stochastic
//! mixing matrix. The crate provides:
//!
//! - graph generation and Metropolis / lazy Laplacian mixing weights
//!   ([`topology`], [`mixing`]);
//! - quadratic and logistic finite-sum objectives with exact curvature and
//!   variance statistics ([`objective`]);
//! - centralized reference methods: gradient descent, stochastic gradient
//!   descent, and the variance-reduced pair SAGA / SVRG ([`reference`]);
//! - their decentralized counterparts built on consensus and gradient
//!   tracking: DGD, DSGD, GT-DGD, GT-DSGD, GT-SAGA, GT-SVRG
//!   ([`decentralized`]);
//! - a deterministic round-based simulator with CSV traces and a config
//!   front end ([`simulator`], [`config`]).
//!
//! Every random draw is addressed by `(seed, domain, node, position)`
//! ([`seeding`]), so runs are reproducible bit for bit and a single-node
//! network consumes exactly the sample sequence of the matching centralized
//! method.

pub mod config;
pub mod decentralized;
mod error;
pub mod mixing;
pub mod objective;
pub mod reference;
pub mod schedule;
pub mod seeding;
pub mod simulator;
pub mod stack;
pub mod topology;

pub use error::{Error, Result};
pub use mixing::MixingMatrix;
pub use objective::{
    estimate_stats, Dataset, FiniteSumObjective, LogisticObjective, ObjectiveStats,
    PartitionMode, QuadraticObjective,
};
pub use schedule::StepSchedule;
pub use stack::Stack;
pub use topology::Topology;
