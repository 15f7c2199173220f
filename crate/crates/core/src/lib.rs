//! Coalitional game engine for multi-provider peer-assisted services.
//!
//! The crate models content providers and assisting peers as players in a
//! transferable-utility game, computes Shapley profit divisions exactly and
//! by Monte Carlo sampling, decides core stability questions with a dense
//! LP kernel, and simulates peers switching among exclusive single-provider
//! coalitions under per-block Shapley incentives.
//!
//! Entry points:
//! - [`Game`] / [`TableGame`]: the canonical peer-assisted worth model and
//!   arbitrary table-backed games, both behind [`CharacteristicFn`].
//! - [`shapley::shapley_exact`], [`shapley::shapley_montecarlo`],
//!   [`shapley::check_axioms`].
//! - [`stability::core_contains`], [`stability::core_nonempty`],
//!   [`stability::least_core`], [`stability::provider_deviation`].
//! - [`dynamics::simulate`], [`dynamics::enumerate_nash_stable`].

pub mod dynamics;
pub mod game;
pub mod rng;
pub mod shapley;
pub mod stability;

pub use game::{
    AllocationPlan, Assignment, CharacteristicFn, Coalition, Game, GameError, PlayerKind,
    TableGame, MAX_PLAYERS,
};
pub use rng::SplitMix64;
pub use shapley::{
    check_axioms, shapley_exact, shapley_montecarlo, AxiomReport, McEstimate, PayoffVector,
    ShapleyError,
};
pub use stability::{
    core_contains, core_nonempty, least_core, provider_deviation, CoreOutcome, CoreReport,
    DeviationReport, LeastCoreResult, StabilityError,
};
pub use dynamics::{
    best_response_step, enumerate_nash_stable, peer_payoffs, simulate, CoalitionStructure,
    DynamicsError, OrderPolicy, Outcome, PeerMove, StepOutcome, StructureError, Trajectory,
};
