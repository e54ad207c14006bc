//! Planning, simulation and model inversion for the ten-round trust task,
//! treated as an interactive POMDP.
//!
//! The crate is `no_std` (with `alloc`). Agents are characterised by their
//! theory-of-mind level `k`, guilt `α` and planning horizon `P`; levels above
//! zero plan with a Monte-Carlo tree search that samples partner types at the
//! root, while level 0 and level −1 models are solved exactly.
//!
//! Module map:
//!
//! * [`game`] – action grids, payoffs, Fehr-Schmidt utilities, classification
//!   of raw amounts.
//! * [`belief`] – Dirichlet-Multinomial belief over the partner's guilt.
//! * [`hierarchy`] – agent specs, survival horizon, softmax policies, exact
//!   solvers for levels −1 and 0, partner dispatch and likelihoods.
//! * [`planner`] – the tree search.
//! * [`simulator`] – dyads, trajectory statistics and diagnostics.
//! * [`inference`] – likelihoods, grid fits and confusion matrices.
//! * [`stats`] – two-sample tests used by the experiments.

#![no_std]

extern crate alloc;

pub mod belief;
pub mod cache;
pub mod error;
pub mod game;
pub mod hierarchy;
pub mod history;
pub mod inference;
pub mod planner;
pub mod seed;
pub mod simulator;
pub mod stats;

pub use belief::DirMultBelief;
pub use cache::{Level0Tables, ModelCache};
pub use error::{Error, Result};
pub use game::{GuiltType, InvestorAction, Money, Role, TrusteeAction};
pub use hierarchy::{AgentSpec, Policy};
pub use history::{Exchange, History};
pub use planner::PlannerConfig;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
