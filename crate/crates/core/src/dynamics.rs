//! Peer best-response dynamics over exclusive single-provider coalitions.
//!
//! Each provider anchors its own block; every peer either attaches to one
//! provider or stays unattached (a singleton block of worth 0). Block worth
//! is divided by the exact Shapley value of the restricted subgame, and
//! peers switch blocks whenever that strictly improves their own payoff.
//!
//! Because a unilateral move changes the summed Hart–Mas-Colell potential
//! of the affected blocks by exactly the mover's payoff gain, these
//! dynamics always terminate at a Nash-stable assignment: the cycle
//! machinery below exists to certify that, not because cycles are expected.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::game::{Coalition, Game};
use crate::rng::SplitMix64;
use crate::shapley::{shapley_within, PayoffVector};

/// Largest block the restricted Shapley division will enumerate.
pub const BLOCK_PLAYER_LIMIT: usize = 20;

/// Cap on `(providers + 1)^peers` for exhaustive stability enumeration.
pub const ENUMERATION_LIMIT: u128 = 100_000;

/// Default strict-improvement threshold; suppresses floating-point
/// ping-pong between numerically equal destinations.
pub const DEFAULT_SWITCH_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructureError {
    #[error("assignment has {got} entries for a {expected}-player game")]
    WrongLength { expected: usize, got: usize },
    #[error("assignment target {index} is not a provider")]
    NotAProvider { index: usize },
    #[error("player {index} is a provider and cannot be assigned to a block")]
    ProviderAssigned { index: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("block of {size} players exceeds the {limit}-player limit")]
    BlockTooLarge { size: usize, limit: usize },
    #[error("{combinations} assignments exceed the enumeration limit of {limit}")]
    EnumerationTooLarge { combinations: u128, limit: u128 },
    #[error("player {index} in the scan order is not a peer")]
    NotAPeer { index: usize },
    #[error(transparent)]
    Structure(#[from] StructureError),
}

// ---------------------------------------------------------------------------
// Coalition structures
// ---------------------------------------------------------------------------

/// A partition of the players into exclusive single-provider coalitions.
///
/// Stored as one entry per player: peers carry `Some(provider)` or `None`
/// (unattached); provider entries are always `None` since each provider
/// anchors its own block. Serializes as that array, which doubles as the
/// canonical encoding for cycle detection.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoalitionStructure {
    attach: Vec<Option<usize>>,
}

impl Serialize for CoalitionStructure {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.attach.serialize(serializer)
    }
}

impl CoalitionStructure {
    /// Builds a structure from one attachment entry per player.
    pub fn new(game: &Game, attachment: Vec<Option<usize>>) -> Result<Self, StructureError> {
        let s = CoalitionStructure { attach: attachment };
        validate_structure(game, &s)?;
        Ok(s)
    }

    /// Every peer in its own singleton block.
    pub fn unattached(game: &Game) -> Self {
        CoalitionStructure {
            attach: vec![None; game.player_count()],
        }
    }

    /// Builds a structure from `(peer, provider)` pairs; unmentioned peers
    /// stay unattached.
    pub fn from_pairs(
        game: &Game,
        pairs: &[(usize, usize)],
    ) -> Result<Self, StructureError> {
        let mut attach = vec![None; game.player_count()];
        for &(peer, provider) in pairs {
            if peer >= attach.len() {
                return Err(StructureError::WrongLength {
                    expected: game.player_count(),
                    got: peer + 1,
                });
            }
            attach[peer] = Some(provider);
        }
        CoalitionStructure::new(game, attach)
    }

    pub fn attachment(&self) -> &[Option<usize>] {
        &self.attach
    }

    /// The provider's block: itself plus every peer attached to it.
    pub fn block_of_provider(&self, game: &Game, provider: usize) -> Coalition {
        debug_assert!(game.is_provider(provider));
        let mut block = Coalition::singleton(provider);
        for (i, a) in self.attach.iter().enumerate() {
            if *a == Some(provider) {
                block = block.with(i);
            }
        }
        block
    }

    /// The block containing a player (a singleton for unattached peers).
    pub fn block_containing(&self, game: &Game, player: usize) -> Coalition {
        if game.is_provider(player) {
            self.block_of_provider(game, player)
        } else {
            match self.attach[player] {
                Some(p) => self.block_of_provider(game, p),
                None => Coalition::singleton(player),
            }
        }
    }

    /// All provider blocks, by ascending provider index.
    pub fn provider_blocks(&self, game: &Game) -> Vec<(usize, Coalition)> {
        game.providers()
            .into_iter()
            .map(|p| (p, self.block_of_provider(game, p)))
            .collect()
    }

    fn moved(&self, peer: usize, dest: Option<usize>) -> Self {
        let mut attach = self.attach.clone();
        attach[peer] = dest;
        CoalitionStructure { attach }
    }
}

pub(crate) fn validate_structure(
    game: &Game,
    structure: &CoalitionStructure,
) -> Result<(), StructureError> {
    let n = game.player_count();
    if structure.attach.len() != n {
        return Err(StructureError::WrongLength {
            expected: n,
            got: structure.attach.len(),
        });
    }
    for (i, a) in structure.attach.iter().enumerate() {
        match a {
            None => {}
            Some(p) => {
                if game.is_provider(i) {
                    return Err(StructureError::ProviderAssigned { index: i });
                }
                if *p >= n || !game.is_provider(*p) {
                    return Err(StructureError::NotAProvider { index: *p });
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Per-structure payoffs
// ---------------------------------------------------------------------------

/// Payoffs under a coalition structure: each block's worth divided by the
/// exact Shapley value of the restricted subgame; unattached peers get 0.
pub fn peer_payoffs(
    game: &Game,
    structure: &CoalitionStructure,
) -> Result<PayoffVector, DynamicsError> {
    validate_structure(game, structure)?;
    let mut payoffs = vec![0.0; game.player_count()];
    for (_, block) in structure.provider_blocks(game) {
        check_block(block)?;
        let phi = shapley_within(game, block);
        for i in block.members() {
            payoffs[i] = phi[i];
        }
    }
    Ok(PayoffVector::new(payoffs))
}

fn check_block(block: Coalition) -> Result<(), DynamicsError> {
    if block.size() > BLOCK_PLAYER_LIMIT {
        Err(DynamicsError::BlockTooLarge {
            size: block.size(),
            limit: BLOCK_PLAYER_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// A peer's payoff inside the block it would occupy under `structure`.
fn payoff_of(game: &Game, structure: &CoalitionStructure, peer: usize) -> Result<f64, DynamicsError> {
    match structure.attach[peer] {
        None => Ok(0.0),
        Some(p) => {
            let block = structure.block_of_provider(game, p);
            check_block(block)?;
            Ok(shapley_within(game, block)[peer])
        }
    }
}

// ---------------------------------------------------------------------------
// Best-response stepping
// ---------------------------------------------------------------------------

/// A single recorded switch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeerMove {
    pub peer: usize,
    pub from: Option<usize>,
    pub to: Option<usize>,
    pub payoff_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Moved {
        structure: CoalitionStructure,
        peer_move: PeerMove,
    },
    NoMove,
}

/// Scans peers in `order`; the first peer that can improve its own payoff by
/// more than `threshold` moves to its best destination.
///
/// Destination ties break toward the lowest provider index, with Unattached
/// considered last (it is chosen only when strictly better than every
/// provider option).
pub fn best_response_step(
    game: &Game,
    structure: &CoalitionStructure,
    order: &[usize],
    threshold: f64,
) -> Result<StepOutcome, DynamicsError> {
    assert!(threshold >= 0.0, "threshold must be non-negative");
    validate_structure(game, structure)?;
    let providers = game.providers();
    for &peer in order {
        if !game.is_peer(peer) {
            return Err(DynamicsError::NotAPeer { index: peer });
        }
        let current = structure.attach[peer];
        let current_pay = payoff_of(game, structure, peer)?;

        let mut best: Option<(Option<usize>, f64)> = None;
        for &p in &providers {
            if Some(p) == current {
                continue;
            }
            let block = structure.block_of_provider(game, p).with(peer);
            check_block(block)?;
            let pay = shapley_within(game, block)[peer];
            if best.map_or(true, |(_, b)| pay > b) {
                best = Some((Some(p), pay));
            }
        }
        if current.is_some() && best.map_or(true, |(_, b)| 0.0 > b) {
            best = Some((None, 0.0));
        }

        if let Some((dest, pay)) = best {
            let gain = pay - current_pay;
            if gain > threshold {
                return Ok(StepOutcome::Moved {
                    structure: structure.moved(peer, dest),
                    peer_move: PeerMove {
                        peer,
                        from: current,
                        to: dest,
                        payoff_gain: gain,
                    },
                });
            }
        }
    }
    Ok(StepOutcome::NoMove)
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// How the per-step peer scan order is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderPolicy {
    /// Fixed ascending peer index every step.
    RoundRobin,
    /// Reshuffled each step from the seeded generator.
    RandomOrder,
}

/// Terminal classification of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Converged { step: usize },
    Cycle { length: usize, step: usize },
    MaxSteps,
}

/// A best-response trajectory: the visited structures, the moves between
/// them, and how the run ended. `states` always starts with the initial
/// structure, so `states.len() == moves.len() + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub states: Vec<CoalitionStructure>,
    pub moves: Vec<PeerMove>,
    pub outcome: Outcome,
}

impl Trajectory {
    pub fn final_state(&self) -> &CoalitionStructure {
        self.states.last().expect("states never empty")
    }
}

/// Iterates [`best_response_step`] from `init` until no peer can improve, a
/// state repeats, or `max_steps` moves have been made. Deterministic for
/// fixed inputs.
pub fn simulate(
    game: &Game,
    init: &CoalitionStructure,
    max_steps: usize,
    threshold: f64,
    seed: u64,
    policy: OrderPolicy,
) -> Result<Trajectory, DynamicsError> {
    assert!(max_steps >= 1, "max_steps must be at least 1");
    validate_structure(game, init)?;
    let peers = game.peers();
    let mut rng = SplitMix64::new(seed);
    let mut order = peers.clone();

    let mut states = vec![init.clone()];
    let mut moves = Vec::new();
    let mut seen: HashMap<Vec<Option<usize>>, usize> = HashMap::new();
    seen.insert(init.attach.clone(), 0);
    let mut current = init.clone();

    for step in 0..max_steps {
        if policy == OrderPolicy::RandomOrder {
            order.copy_from_slice(&peers);
            order.shuffle(&mut rng);
        }
        match best_response_step(game, &current, &order, threshold)? {
            StepOutcome::NoMove => {
                return Ok(Trajectory {
                    states,
                    moves,
                    outcome: Outcome::Converged { step },
                });
            }
            StepOutcome::Moved {
                structure,
                peer_move,
            } => {
                moves.push(peer_move);
                states.push(structure.clone());
                let index = states.len() - 1;
                if let Some(&first) = seen.get(&structure.attach) {
                    return Ok(Trajectory {
                        states,
                        moves,
                        outcome: Outcome::Cycle {
                            length: index - first,
                            step: index,
                        },
                    });
                }
                seen.insert(structure.attach.clone(), index);
                current = structure;
            }
        }
    }
    Ok(Trajectory {
        states,
        moves,
        outcome: Outcome::MaxSteps,
    })
}

/// Enumerates every peer assignment and returns the Nash-stable ones (no
/// peer can improve by more than `threshold`), in lexicographic order.
pub fn enumerate_nash_stable(
    game: &Game,
    threshold: f64,
) -> Result<Vec<CoalitionStructure>, DynamicsError> {
    let providers = game.providers();
    let peers = game.peers();
    let options = providers.len() as u128 + 1;
    let combinations = options.pow(peers.len() as u32);
    if combinations > ENUMERATION_LIMIT {
        return Err(DynamicsError::EnumerationTooLarge {
            combinations,
            limit: ENUMERATION_LIMIT,
        });
    }

    let mut stable = Vec::new();
    let mut digits = vec![0usize; peers.len()];
    loop {
        let mut attach = vec![None; game.player_count()];
        for (k, &peer) in peers.iter().enumerate() {
            if digits[k] > 0 {
                attach[peer] = Some(providers[digits[k] - 1]);
            }
        }
        let structure = CoalitionStructure { attach };
        if matches!(
            best_response_step(game, &structure, &peers, threshold)?,
            StepOutcome::NoMove
        ) {
            stable.push(structure);
        }

        // mixed-radix increment
        let mut k = 0;
        loop {
            if k == digits.len() {
                return Ok(stable);
            }
            digits[k] += 1;
            if digits[k] < options as usize {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}
