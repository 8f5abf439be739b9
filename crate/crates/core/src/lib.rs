//! Probabilistic pathfinding for payment-channel networks.
//!
//! Channel balances are private, so a sender sees each one as a random
//! variable over `0..=capacity`. This crate models those priors, derives
//! payment reliability from them, measures how much balance information
//! payment attempts leak, and simulates payments on channel graphs.
//!
//! - [`model`]: balance priors and Bayesian conditioning.
//! - [`graph`]: channel graphs, paths and candidate path enumeration.
//! - [`analytics`]: closed-form attempt counts and multi-part splitting.
//! - [`infogain`]: information gain of attempt outcomes.
//! - [`simulator`]: payment sessions, experiments and rebalancing.
//! - [`snapshot`]: synthetic input graphs.

pub mod analytics;
pub mod graph;
pub mod infogain;
pub mod model;
pub mod rng;
pub mod simulator;
pub mod snapshot;

pub use analytics::{AnalyticsError, AttemptBound, ServiceLevelObjective, SplitPlan};
pub use graph::{
    k_shortest_paths, path_success_prob, Channel, ChannelGraph, ChannelId, ChannelIndex, Direction, GraphError, Hop,
    NodeId, NodeIndex, Path, PriorPolicy,
};
pub use infogain::{kl_divergence, BeliefState, InfoGainError};
pub use model::{Amount, BalanceDistribution, Capacity, ModelError, PriorSpec};
pub use rng::RandomStream;
pub use simulator::{
    run_payment, AttemptRecord, Outcome, PaymentTask, SessionResult, SessionSettings, SimError, SimulationMode, Strategy,
};
