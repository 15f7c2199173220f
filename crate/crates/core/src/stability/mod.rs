//! Core membership, core nonemptiness, least-core slack, and provider
//! deviation incentives.

mod simplex;

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{validate_structure, CoalitionStructure, StructureError};
use crate::game::{dense_worth_table, CharacteristicFn, Coalition, Game};
use crate::shapley::{shapley_exact, shapley_within, PayoffVector, ShapleyError};
use simplex::{epsilon_core_feasible, Feasibility};

/// Enumeration bound for core membership checks (`2^n` coalitions).
pub const MEMBERSHIP_PLAYER_LIMIT: usize = 20;

/// Enumeration bound for the core feasibility LP (`2^n − 2` constraints).
pub const LP_PLAYER_LIMIT: usize = 16;

/// Feasibility tolerance of the LP kernel.
pub const FEASIBILITY_TOLERANCE: f64 = simplex::FEASIBILITY_TOL;

/// Absolute tolerance on the least-core ε.
pub const LEAST_CORE_TOLERANCE: f64 = 1e-7;

/// A provider gains from deviating only if its payoff rises by more than this.
pub const DEVIATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("{players} players exceeds the enumeration limit of {limit}")]
    TooLargeForEnumeration { players: usize, limit: usize },
    #[error("payoff vector has {got} entries for a {expected}-player game")]
    LengthMismatch { expected: usize, got: usize },
    #[error("simplex stalled after {iterations} iterations; worth values may be ill-conditioned")]
    NumericalFailure { iterations: u64 },
    #[error("invalid coalition structure: {0}")]
    InvalidStructure(#[from] StructureError),
    #[error(transparent)]
    Shapley(#[from] ShapleyError),
}

// ---------------------------------------------------------------------------
// Core membership
// ---------------------------------------------------------------------------

/// A coalition that can improve on a payoff vector.
///
/// The grand coalition appears here when `|x(N) − v(N)|` exceeds the
/// tolerance (an efficiency mismatch rather than a blocking excess).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoreViolation {
    pub coalition: Coalition,
    pub excess: f64,
}

/// Outcome of a core membership test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoreReport {
    pub is_member: bool,
    /// Violations sorted by descending excess (ties: ascending mask).
    pub violations: Vec<CoreViolation>,
    pub tolerance: f64,
}

/// Tests `x(S) ≥ v(S)` for every proper nonempty coalition plus
/// `x(N) = v(N)`, reporting every violation beyond `tol`.
pub fn core_contains<G: CharacteristicFn + ?Sized>(
    game: &G,
    x: &PayoffVector,
    tol: f64,
) -> Result<CoreReport, StabilityError> {
    assert!(tol >= 0.0, "tolerance must be non-negative");
    let n = game.player_count();
    if n > MEMBERSHIP_PLAYER_LIMIT {
        return Err(StabilityError::TooLargeForEnumeration {
            players: n,
            limit: MEMBERSHIP_PLAYER_LIMIT,
        });
    }
    if x.len() != n {
        return Err(StabilityError::LengthMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let worths = dense_worth_table(game);
    let full = (1usize << n) - 1;

    // x(S) for every mask by peeling the lowest set bit
    let mut xsum = vec![0.0f64; full + 1];
    for m in 1..=full {
        let low = m.trailing_zeros() as usize;
        xsum[m] = xsum[m & (m - 1)] + x[low];
    }

    let mut violations = Vec::new();
    for m in 1..full {
        let excess = worths[m] - xsum[m];
        if excess > tol {
            violations.push(CoreViolation {
                coalition: Coalition::from_mask(m as u64),
                excess,
            });
        }
    }
    if (xsum[full] - worths[full]).abs() > tol {
        violations.push(CoreViolation {
            coalition: Coalition::from_mask(full as u64),
            excess: (xsum[full] - worths[full]).abs(),
        });
    }
    violations.sort_by(|a, b| {
        b.excess
            .partial_cmp(&a.excess)
            .unwrap()
            .then(a.coalition.mask().cmp(&b.coalition.mask()))
    });
    Ok(CoreReport {
        is_member: violations.is_empty(),
        violations,
        tolerance: tol,
    })
}

// ---------------------------------------------------------------------------
// Core nonemptiness and the least core
// ---------------------------------------------------------------------------

/// Whether the core is nonempty, with a member payoff vector as witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoreOutcome {
    Nonempty { witness: PayoffVector },
    Empty,
}

impl CoreOutcome {
    pub fn is_nonempty(&self) -> bool {
        matches!(self, CoreOutcome::Nonempty { .. })
    }
}

/// Decides core nonemptiness by linear feasibility.
pub fn core_nonempty<G: CharacteristicFn + ?Sized>(
    game: &G,
) -> Result<CoreOutcome, StabilityError> {
    let (worths, n) = lp_worth_table(game)?;
    match epsilon_core_feasible(&worths, n, 0.0)? {
        Feasibility::Feasible(x) => Ok(CoreOutcome::Nonempty {
            witness: PayoffVector::new(x),
        }),
        Feasibility::Infeasible => Ok(CoreOutcome::Empty),
    }
}

/// The least core: minimal uniform subsidy ε with a witness division.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeastCoreResult {
    pub epsilon: f64,
    pub witness: PayoffVector,
}

/// Minimizes ε such that some efficient `x` has `x(S) ≥ v(S) − ε` for all
/// proper nonempty `S`, by bisection over the feasibility kernel down to
/// [`LEAST_CORE_TOLERANCE`].
pub fn least_core<G: CharacteristicFn + ?Sized>(
    game: &G,
) -> Result<LeastCoreResult, StabilityError> {
    let (worths, n) = lp_worth_table(game)?;
    if let Feasibility::Feasible(x) = epsilon_core_feasible(&worths, n, 0.0)? {
        return Ok(LeastCoreResult {
            epsilon: 0.0,
            witness: PayoffVector::new(x),
        });
    }

    let full = worths.len() - 1;
    let max_proper = worths[1..full].iter().cloned().fold(0.0f64, f64::max);
    let mut hi = max_proper.max(0.0);
    let mut hi_witness = None;
    for _ in 0..64 {
        match epsilon_core_feasible(&worths, n, hi)? {
            Feasibility::Feasible(x) => {
                hi_witness = Some(x);
                break;
            }
            Feasibility::Infeasible => hi = hi * 2.0 + 1.0,
        }
    }
    let mut witness =
        hi_witness.ok_or(StabilityError::NumericalFailure { iterations: 0 })?;

    let mut lo = 0.0f64;
    while hi - lo > LEAST_CORE_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        match epsilon_core_feasible(&worths, n, mid)? {
            Feasibility::Feasible(x) => {
                hi = mid;
                witness = x;
            }
            Feasibility::Infeasible => lo = mid,
        }
    }
    Ok(LeastCoreResult {
        epsilon: hi,
        witness: PayoffVector::new(witness),
    })
}

fn lp_worth_table<G: CharacteristicFn + ?Sized>(
    game: &G,
) -> Result<(Vec<f64>, usize), StabilityError> {
    let n = game.player_count();
    if n > LP_PLAYER_LIMIT {
        return Err(StabilityError::TooLargeForEnumeration {
            players: n,
            limit: LP_PLAYER_LIMIT,
        });
    }
    Ok((dense_worth_table(game), n))
}

// ---------------------------------------------------------------------------
// Provider deviation incentives
// ---------------------------------------------------------------------------

/// One provider's payoff under grand-coalition sharing versus inside its own
/// block of a coalition structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProviderDeviation {
    pub provider: usize,
    pub grand_payoff: f64,
    pub split_payoff: f64,
    /// `split_payoff − grand_payoff`; positive means the provider prefers
    /// its own coalition.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub providers: Vec<ProviderDeviation>,
    /// True when no provider gains more than [`DEVIATION_TOLERANCE`] by
    /// leaving the grand coalition for its block.
    pub grand_resists: bool,
    pub tolerance: f64,
}

/// Compares each provider's exact Shapley payoff in the grand coalition
/// against its exact Shapley payoff inside its own block of `structure`.
pub fn provider_deviation(
    game: &Game,
    structure: &CoalitionStructure,
) -> Result<DeviationReport, StabilityError> {
    validate_structure(game, structure)?;
    let grand = shapley_exact(game)?;
    let mut providers = Vec::new();
    for p in game.providers() {
        let block = structure.block_of_provider(game, p);
        if block.size() > crate::shapley::EXACT_PLAYER_LIMIT {
            return Err(StabilityError::Shapley(ShapleyError::TooLargeForExact {
                players: block.size(),
                limit: crate::shapley::EXACT_PLAYER_LIMIT,
            }));
        }
        let split = shapley_within(game, block);
        providers.push(ProviderDeviation {
            provider: p,
            grand_payoff: grand[p],
            split_payoff: split[p],
            gain: split[p] - grand[p],
        });
    }
    let grand_resists = providers.iter().all(|d| d.gain <= DEVIATION_TOLERANCE);
    Ok(DeviationReport {
        providers,
        grand_resists,
        tolerance: DEVIATION_TOLERANCE,
    })
}
