//! Exact and Monte Carlo Shapley division, plus the fairness-axiom checks.
//!
//! The exact path scans subsets (one pass per player over the coalitions
//! excluding that player), which is factorially cheaper than averaging over
//! join orders; the full permutation average survives only in the test
//! suites as an independent oracle. Past the enumeration bound, permutation
//! sampling takes over.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{dense_worth_table, CharacteristicFn, Coalition};
use crate::rng::SplitMix64;

/// Absolute tolerance for the efficiency, symmetry, and dummy checks.
pub const AXIOM_TOLERANCE: f64 = 1e-9;

/// Largest roster for the subset-enumeration Shapley computation.
pub const EXACT_PLAYER_LIMIT: usize = 24;

/// Samples per work unit in Monte Carlo sharding. Accumulators merge in
/// chunk order, so estimates are identical for any worker count.
const MC_CHUNK: u64 = 1024;

/// Generator recorded in Monte Carlo output metadata.
pub const MC_GENERATOR: &str = "splitmix64";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShapleyError {
    #[error("{players} players exceeds the exact-computation limit of {limit}")]
    TooLargeForExact { players: usize, limit: usize },
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("payoff vector has {got} entries for a {expected}-player game")]
    LengthMismatch { expected: usize, got: usize },
}

/// One payoff per player, in currency per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PayoffVector(Vec<f64>);

impl PayoffVector {
    pub fn new(payoffs: Vec<f64>) -> PayoffVector {
        PayoffVector(payoffs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// Sum over all players.
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `x(S)`: sum of payoffs over the coalition's members.
    pub fn coalition_total(&self, s: Coalition) -> f64 {
        s.members().map(|i| self.0[i]).sum()
    }
}

impl std::ops::Index<usize> for PayoffVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<'a> IntoIterator for &'a PayoffVector {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Exact Shapley payoffs via the subset formula
/// `φ_i = Σ_S |S|!(n−|S|−1)!/n! · [v(S∪{i}) − v(S)]`.
pub fn shapley_exact<G: CharacteristicFn + ?Sized>(
    game: &G,
) -> Result<PayoffVector, ShapleyError> {
    let n = game.player_count();
    if n > EXACT_PLAYER_LIMIT {
        return Err(ShapleyError::TooLargeForExact {
            players: n,
            limit: EXACT_PLAYER_LIMIT,
        });
    }
    Ok(PayoffVector(shapley_within(game, game.grand())))
}

/// Shapley payoffs of the subgame restricted to `block`.
///
/// Returns a full-length vector; players outside the block get 0. The
/// block's worth function is the parent game's, so efficiency ties the
/// block members' payoffs to `v(block)`.
pub(crate) fn shapley_within<G: CharacteristicFn + ?Sized>(
    game: &G,
    block: Coalition,
) -> Vec<f64> {
    let n = game.player_count();
    let members: Vec<usize> = block.members().collect();
    let b = members.len();
    assert!(b <= EXACT_PLAYER_LIMIT);
    let mut out = vec![0.0; n];
    if b == 0 {
        return out;
    }

    // worth of every sub-coalition, indexed by compressed (within-block) mask
    let table = block_worth_table(game, &members);
    let weights: Vec<f64> = (0..b).map(|s| 1.0 / (b as f64 * binomial(b - 1, s))).collect();

    let phi_of = |pi: usize| -> f64 {
        let bit = 1usize << pi;
        let rest = ((1usize << b) - 1) ^ bit;
        let mut phi = 0.0;
        // ascending submask walk over subsets of `rest`
        let mut sub = 0usize;
        loop {
            let s = sub.count_ones() as usize;
            phi += weights[s] * (table[sub | bit] - table[sub]);
            if sub == rest {
                break;
            }
            sub = sub.wrapping_sub(rest) & rest;
        }
        phi
    };

    let phis: Vec<f64> = if b >= 16 {
        (0..b).into_par_iter().map(phi_of).collect()
    } else {
        (0..b).map(phi_of).collect()
    };
    for (pi, &p) in members.iter().enumerate() {
        out[p] = phis[pi];
    }
    out
}

/// Worth of every subset of `members`, indexed by compressed mask.
fn block_worth_table<G: CharacteristicFn + ?Sized>(game: &G, members: &[usize]) -> Vec<f64> {
    let b = members.len();
    let full_game = b == game.player_count() && members.iter().enumerate().all(|(k, &p)| k == p);
    if full_game {
        return dense_worth_table(game);
    }
    let expand = |cm: usize| -> Coalition {
        let mut c = Coalition::EMPTY;
        for (k, &p) in members.iter().enumerate() {
            if cm >> k & 1 == 1 {
                c = c.with(p);
            }
        }
        c
    };
    let size = 1usize << b;
    if b >= 16 {
        (0..size)
            .into_par_iter()
            .map(|cm| game.value(expand(cm)))
            .collect()
    } else {
        (0..size).map(|cm| game.value(expand(cm))).collect()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut num: u128 = 1;
    for i in 0..k {
        num = num * (n - i) as u128 / (i + 1) as u128
    }
    num as f64
}

// ---------------------------------------------------------------------------
// Monte Carlo estimation
// ---------------------------------------------------------------------------

/// Monte Carlo Shapley estimate from uniform random join orders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    /// Sample mean of each player's marginal contribution.
    pub mean: PayoffVector,
    /// Sample standard deviation / √samples, per player (0 for one sample).
    pub std_error: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
    /// Generator the permutation stream was drawn from.
    pub generator: &'static str,
}

/// Estimates Shapley payoffs by averaging marginal contributions over
/// `samples` random permutations.
///
/// Sample `k` shuffles with a [`SplitMix64`] generator seeded by the `k`-th
/// output of a master SplitMix64 stream seeded with `seed`, so the estimate
/// is reproducible bit for bit and independent of how samples are sharded
/// across workers.
pub fn shapley_montecarlo<G: CharacteristicFn + ?Sized>(
    game: &G,
    samples: u64,
    seed: u64,
) -> Result<McEstimate, ShapleyError> {
    if samples == 0 {
        return Err(ShapleyError::ZeroSamples);
    }
    let n = game.player_count();

    // direct table lookups when the whole lattice fits comfortably
    let table = if n <= 20 {
        Some(dense_worth_table(game))
    } else {
        None
    };
    let worth = |c: Coalition| -> f64 {
        match &table {
            Some(t) => t[c.mask() as usize],
            None => game.value(c),
        }
    };

    let chunks: Vec<(u64, u64)> = (0..samples)
        .step_by(MC_CHUNK as usize)
        .map(|lo| (lo, (lo + MC_CHUNK).min(samples)))
        .collect();

    let partials: Vec<(Vec<f64>, Vec<f64>)> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut sum = vec![0.0; n];
            let mut sumsq = vec![0.0; n];
            let mut perm: Vec<usize> = (0..n).collect();
            for k in lo..hi {
                let mut rng = SplitMix64::new(SplitMix64::output_at(seed, k));
                for (i, p) in perm.iter_mut().enumerate() {
                    *p = i;
                }
                perm.shuffle(&mut rng);
                let mut coalition = Coalition::EMPTY;
                let mut prev = 0.0;
                for &p in &perm {
                    coalition = coalition.with(p);
                    let cur = worth(coalition);
                    let marginal = cur - prev;
                    sum[p] += marginal;
                    sumsq[p] += marginal * marginal;
                    prev = cur;
                }
            }
            (sum, sumsq)
        })
        .collect();

    let mut sum = vec![0.0; n];
    let mut sumsq = vec![0.0; n];
    for (s, sq) in partials {
        for i in 0..n {
            sum[i] += s[i];
            sumsq[i] += sq[i];
        }
    }

    let m = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let std_error: Vec<f64> = if samples == 1 {
        vec![0.0; n]
    } else {
        (0..n)
            .map(|i| {
                let var = ((sumsq[i] - sum[i] * sum[i] / m) / (m - 1.0)).max(0.0);
                (var / m).sqrt()
            })
            .collect()
    };

    Ok(McEstimate {
        mean: PayoffVector(mean),
        std_error,
        samples,
        seed,
        generator: MC_GENERATOR,
    })
}

// ---------------------------------------------------------------------------
// Axiom checks
// ---------------------------------------------------------------------------

/// Result of checking a payoff vector against the Shapley fairness axioms.
///
/// `None` means the axiom holds at [`AXIOM_TOLERANCE`]; a violation carries
/// the witnessing player or pair. Additivity is a relation between two
/// games, not a single-vector predicate, and is exercised by the test
/// suites instead.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub tolerance: f64,
    pub efficiency: Option<EfficiencyViolation>,
    pub dummy: Option<DummyViolation>,
    pub symmetry: Option<SymmetryViolation>,
}

impl AxiomReport {
    pub fn is_fair(&self) -> bool {
        self.efficiency.is_none() && self.dummy.is_none() && self.symmetry.is_none()
    }
}

/// Payoffs do not sum to the grand coalition's worth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyViolation {
    pub payoff_total: f64,
    pub grand_worth: f64,
}

/// A player with zero marginal contribution everywhere got a nonzero payoff.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DummyViolation {
    pub player: usize,
    pub payoff: f64,
}

/// Two interchangeable players got different payoffs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryViolation {
    pub players: (usize, usize),
    pub payoffs: (f64, f64),
}

/// Checks `phi` for efficiency, dummy, and symmetry on `game`.
///
/// Dummies and interchangeable pairs are found by exhaustive
/// marginal-contribution comparison, which costs `O(n² · 2^n)`; keep
/// rosters small (≤ 12) for interactive use.
pub fn check_axioms<G: CharacteristicFn + ?Sized>(
    game: &G,
    phi: &PayoffVector,
) -> Result<AxiomReport, ShapleyError> {
    let n = game.player_count();
    if phi.len() != n {
        return Err(ShapleyError::LengthMismatch {
            expected: n,
            got: phi.len(),
        });
    }
    let tol = AXIOM_TOLERANCE;
    let table = dense_worth_table(game);
    let full = (1usize << n) - 1;

    let grand_worth = table[full];
    let efficiency = {
        let total = phi.total();
        if (total - grand_worth).abs() > tol {
            Some(EfficiencyViolation {
                payoff_total: total,
                grand_worth,
            })
        } else {
            None
        }
    };

    let mut dummy = None;
    for i in 0..n {
        let bit = 1usize << i;
        let rest = full ^ bit;
        let mut is_dummy = true;
        let mut sub = 0usize;
        loop {
            if (table[sub | bit] - table[sub]).abs() > tol {
                is_dummy = false;
                break;
            }
            if sub == rest {
                break;
            }
            sub = sub.wrapping_sub(rest) & rest;
        }
        if is_dummy && phi[i].abs() > tol {
            dummy = Some(DummyViolation {
                player: i,
                payoff: phi[i],
            });
            break;
        }
    }

    let mut symmetry = None;
    'pairs: for i in 0..n {
        for j in i + 1..n {
            let (bi, bj) = (1usize << i, 1usize << j);
            let rest = full ^ bi ^ bj;
            let mut interchangeable = true;
            let mut sub = 0usize;
            loop {
                if (table[sub | bi] - table[sub | bj]).abs() > tol {
                    interchangeable = false;
                    break;
                }
                if sub == rest {
                    break;
                }
                sub = sub.wrapping_sub(rest) & rest;
            }
            if interchangeable && (phi[i] - phi[j]).abs() > tol {
                symmetry = Some(SymmetryViolation {
                    players: (i, j),
                    payoffs: (phi[i], phi[j]),
                });
                break 'pairs;
            }
        }
    }

    Ok(AxiomReport {
        tolerance: tol,
        efficiency,
        dummy,
        symmetry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Game, PlayerKind, TableGame};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn two_symmetric_players_split_evenly() {
        let g = TableGame::from_worths(2, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let phi = shapley_exact(&g).unwrap();
        assert_close(phi[0], 0.5, 1e-12);
        assert_close(phi[1], 0.5, 1e-12);
    }

    #[test]
    fn unanimity_game_splits_equally() {
        let g = TableGame::unanimity(4);
        let phi = shapley_exact(&g).unwrap();
        for i in 0..4 {
            assert_close(phi[i], 0.25, 1e-12);
        }
    }

    #[test]
    fn canonical_three_player_example() {
        // Provider{m=10,r=1,d=1,c=0.5} with two u=4 peers: v(grand)=9,
        // marginals over all 6 orders give (7, 1, 1).
        let g = Game::new(vec![
            PlayerKind::provider(10.0, 1.0, 1.0, 0.5),
            PlayerKind::peer(4.0),
            PlayerKind::peer(4.0),
        ])
        .unwrap();
        assert_eq!(g.worth(Coalition::full(3)).unwrap(), 9.0);
        let phi = shapley_exact(&g).unwrap();
        assert_close(phi[0], 7.0, 1e-12);
        assert_close(phi[1], 1.0, 1e-12);
        assert_close(phi[2], 1.0, 1e-12);
        assert_close(phi.total(), 9.0, 1e-12);
    }

    #[test]
    fn exact_rejects_oversized_games() {
        let players: Vec<PlayerKind> = (0..25).map(|_| PlayerKind::peer(1.0)).collect();
        let g = Game::new(players).unwrap();
        assert!(matches!(
            shapley_exact(&g),
            Err(ShapleyError::TooLargeForExact { players: 25, .. })
        ));
    }

    #[test]
    fn single_sample_is_one_permutation() {
        let g = TableGame::unanimity(4);
        let est = shapley_montecarlo(&g, 1, 99).unwrap();
        assert!(est.std_error.iter().all(|&s| s == 0.0));
        // one join order: exactly one player carries the whole worth
        let nonzero: Vec<f64> = est.mean.iter().copied().filter(|&x| x != 0.0).collect();
        assert_eq!(nonzero, vec![1.0]);
        assert_close(est.mean.total(), 1.0, 1e-12);
    }

    #[test]
    fn montecarlo_is_bit_reproducible() {
        let g = Game::new(vec![
            PlayerKind::provider(10.0, 1.0, 1.0, 0.5),
            PlayerKind::peer(4.0),
            PlayerKind::peer(4.0),
        ])
        .unwrap();
        let a = shapley_montecarlo(&g, 5000, 1234).unwrap();
        let b = shapley_montecarlo(&g, 5000, 1234).unwrap();
        assert_eq!(a, b);
        let c = shapley_montecarlo(&g, 5000, 1235).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn montecarlo_covers_known_values() {
        let g = TableGame::unanimity(4);
        let est = shapley_montecarlo(&g, 10_000, 7).unwrap();
        for i in 0..4 {
            assert!(
                (est.mean[i] - 0.25).abs() <= 3.0 * est.std_error[i],
                "player {i}: mean {} se {}",
                est.mean[i],
                est.std_error[i]
            );
        }

        let canon = Game::new(vec![
            PlayerKind::provider(10.0, 1.0, 1.0, 0.5),
            PlayerKind::peer(4.0),
            PlayerKind::peer(4.0),
        ])
        .unwrap();
        let exact = shapley_exact(&canon).unwrap();
        let est = shapley_montecarlo(&canon, 50_000, 42).unwrap();
        for i in 0..3 {
            assert!((est.mean[i] - exact[i]).abs() <= 3.0 * est.std_error[i].max(1e-12));
        }
    }

    #[test]
    fn zero_samples_rejected() {
        let g = TableGame::unanimity(2);
        assert!(matches!(
            shapley_montecarlo(&g, 0, 0),
            Err(ShapleyError::ZeroSamples)
        ));
    }

    #[test]
    fn axioms_hold_for_exact_output() {
        let g = Game::new(vec![
            PlayerKind::provider(10.0, 1.0, 1.0, 0.5),
            PlayerKind::provider(10.0, 1.0, 1.0, 0.5),
            PlayerKind::peer(4.0),
            PlayerKind::peer(4.0),
        ])
        .unwrap();
        let phi = shapley_exact(&g).unwrap();
        let report = check_axioms(&g, &phi).unwrap();
        assert!(report.is_fair(), "{report:?}");
    }

    #[test]
    fn efficiency_violation_detected() {
        let g = TableGame::unanimity(3);
        let zeros = PayoffVector::new(vec![0.0; 3]);
        let report = check_axioms(&g, &zeros).unwrap();
        let eff = report.efficiency.expect("must flag efficiency");
        assert_eq!(eff.grand_worth, 1.0);
        assert_eq!(eff.payoff_total, 0.0);
        // all-zero payoffs are fine for dummies and symmetric pairs
        assert!(report.dummy.is_none());
        assert!(report.symmetry.is_none());
    }

    #[test]
    fn idle_peer_is_a_dummy() {
        let g = Game::new(vec![
            PlayerKind::provider(10.0, 1.0, 1.0, 0.5),
            PlayerKind::peer(4.0),
            PlayerKind::peer(0.0),
        ])
        .unwrap();
        // enumeration: the u=0 peer never changes any coalition's worth
        let grand = g.grand_coalition();
        for s in grand.without(2).subsets() {
            assert_eq!(g.value(s.with(2)), g.value(s));
        }
        let phi = shapley_exact(&g).unwrap();
        assert_eq!(phi[2], 0.0);
        // and a doctored payoff for it trips the dummy check
        let bad = PayoffVector::new(vec![phi[0] - 0.5, phi[1], 0.5]);
        let report = check_axioms(&g, &bad).unwrap();
        assert_eq!(report.dummy.unwrap().player, 2);
    }

    #[test]
    fn symmetry_violation_detected() {
        let g = TableGame::unanimity(3);
        let skew = PayoffVector::new(vec![0.7, 0.3, 0.0]);
        let report = check_axioms(&g, &skew).unwrap();
        assert_eq!(report.symmetry.unwrap().players, (0, 1));
    }

    #[test]
    fn length_mismatch_rejected() {
        let g = TableGame::unanimity(3);
        let short = PayoffVector::new(vec![1.0]);
        assert!(matches!(
            check_axioms(&g, &short),
            Err(ShapleyError::LengthMismatch {
                expected: 3,
                got: 1
            })
        ));
    }
}
