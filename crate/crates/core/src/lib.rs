//! Random-walk decentralized consensus optimization.
//!
//! The crate simulates a network of agents that jointly minimize
//! `r(x) + (1/n) Σ f_i(x)` where `f_i` is private to agent `i`. The central
//! algorithm is Walkman: a single token travels along a random walk over the
//! network and each visited agent performs one ADMM-style update. Gossip
//! baselines (EXTRA, PG-EXTRA, exact diffusion, decentralized ADMM) and
//! random-walk incremental methods are provided for comparison, together with
//! the Markov-chain and Lyapunov diagnostics needed to check convergence
//! claims at desk scale.
//!
//! Algorithms are registered by name in an [`algorithm::Registry`] and are
//! selected at runtime from an experiment configuration (see [`harness`]).

pub mod algorithm;
pub mod baselines;
pub mod error;
pub mod graph;
pub mod harness;
pub mod markov;
pub mod metrics;
pub mod problems;
pub mod theory;
pub mod trace;
pub mod walkman;

pub use error::{Error, Result};

/// Dense column vector used for every iterate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for data, transition matrices and stacked iterates.
pub type Matrix = nalgebra::DMatrix<f64>;
