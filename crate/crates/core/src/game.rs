//! Players, coalitions, and the worth of peer-assisted service coalitions.
//!
//! A game is a roster of content providers and peers together with a
//! characteristic function `v` mapping each coalition to the profit per
//! period it can secure on its own. Providers earn subscription revenue and
//! pay for server bandwidth; peers contribute upload capacity that offsets
//! the server bill of whichever providers share a coalition with them.
//! Peer capacity is pooled: the allocation pours it into providers in order
//! of descending cost rate, never exceeding a provider's demand, which is
//! what makes worth superadditive and cross-provider coalitions valuable.

use dashmap::DashMap;
use rayon::prelude::*;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard roster limit imposed by the bitmask coalition representation.
pub const MAX_PLAYERS: usize = 64;

/// Largest roster for which an explicit worth table (`2^n` entries) is built.
pub const TABLE_PLAYER_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("player roster is empty")]
    EmptyRoster,
    #[error("{count} players exceeds the {limit}-player limit")]
    TooManyPlayers { count: usize, limit: usize },
    #[error("player {player}: {field} must be finite and non-negative, got {value}")]
    InvalidParameter {
        player: usize,
        field: &'static str,
        value: f64,
    },
    #[error("coalition mask {mask:#x} is invalid for a {players}-player game")]
    InvalidCoalition { mask: u64, players: usize },
    #[error("worth table needs {expected} entries for {players} players, got {got}")]
    WrongTableSize {
        players: usize,
        expected: usize,
        got: usize,
    },
    #[error("worth table entry {mask:#x} must be finite, and 0 for the empty coalition")]
    InvalidWorth { mask: u64 },
}

// ---------------------------------------------------------------------------
// Coalition
// ---------------------------------------------------------------------------

/// A set of players, packed as a 64-bit mask (bit `i` = player `i`).
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Coalition(u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    /// The grand coalition of an `n`-player game.
    pub fn full(n: usize) -> Coalition {
        assert!(n <= MAX_PLAYERS, "at most {MAX_PLAYERS} players");
        if n == MAX_PLAYERS {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << n) - 1)
        }
    }

    pub fn singleton(player: usize) -> Coalition {
        assert!(player < MAX_PLAYERS);
        Coalition(1 << player)
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Coalition {
        members
            .into_iter()
            .fold(Coalition::EMPTY, |c, i| c.with(i))
    }

    pub fn from_mask(mask: u64) -> Coalition {
        Coalition(mask)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn contains(self, player: usize) -> bool {
        player < MAX_PLAYERS && self.0 >> player & 1 == 1
    }

    #[must_use]
    pub fn with(self, player: usize) -> Coalition {
        assert!(player < MAX_PLAYERS);
        Coalition(self.0 | 1 << player)
    }

    #[must_use]
    pub fn without(self, player: usize) -> Coalition {
        assert!(player < MAX_PLAYERS);
        Coalition(self.0 & !(1 << player))
    }

    pub fn union(self, other: Coalition) -> Coalition {
        Coalition(self.0 | other.0)
    }

    pub fn intersection(self, other: Coalition) -> Coalition {
        Coalition(self.0 & other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    /// Number of members, `|S|`.
    pub fn size(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Member indices in ascending order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    /// All subsets of this coalition in ascending mask order, including the
    /// empty set and the coalition itself.
    pub fn subsets(self) -> Subsets {
        Subsets {
            mask: self.0,
            cur: 0,
            done: false,
        }
    }
}

impl std::fmt::Debug for Coalition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.members().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

// Serialized as the member list, which is what reports want to show.
impl Serialize for Coalition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.size()))?;
        for i in self.members() {
            seq.serialize_element(&i)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Coalition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let members = Vec::<usize>::deserialize(deserializer)?;
        for &i in &members {
            if i >= MAX_PLAYERS {
                return Err(serde::de::Error::custom(format!(
                    "player index {i} out of range"
                )));
            }
        }
        Ok(Coalition::from_members(members))
    }
}

/// Iterator over the subsets of a mask (standard submask walk).
pub struct Subsets {
    mask: u64,
    cur: u64,
    done: bool,
}

impl Iterator for Subsets {
    type Item = Coalition;

    fn next(&mut self) -> Option<Coalition> {
        if self.done {
            return None;
        }
        let out = Coalition(self.cur);
        if self.cur == self.mask {
            self.done = true;
        } else {
            self.cur = self.cur.wrapping_sub(self.mask) & self.mask;
        }
        Some(out)
    }
}

// ---------------------------------------------------------------------------
// Players
// ---------------------------------------------------------------------------

/// A player is either a content provider or an assisting peer.
///
/// Currency is per period; bandwidth units are abstract and the model is
/// scale-free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PlayerKind {
    Provider {
        /// Subscriber count.
        subscribers: f64,
        /// Revenue per subscriber per period.
        revenue: f64,
        /// Bandwidth demand per subscriber.
        demand: f64,
        /// Server cost per unit bandwidth per period.
        cost: f64,
    },
    Peer {
        /// Upload capacity the peer can donate.
        upload: f64,
    },
}

impl PlayerKind {
    pub fn provider(subscribers: f64, revenue: f64, demand: f64, cost: f64) -> PlayerKind {
        PlayerKind::Provider {
            subscribers,
            revenue,
            demand,
            cost,
        }
    }

    pub fn peer(upload: f64) -> PlayerKind {
        PlayerKind::Peer { upload }
    }

    pub fn is_provider(&self) -> bool {
        matches!(self, PlayerKind::Provider { .. })
    }

    pub fn is_peer(&self) -> bool {
        matches!(self, PlayerKind::Peer { .. })
    }

    /// Total bandwidth demand (providers) or zero.
    pub fn total_demand(&self) -> f64 {
        match *self {
            PlayerKind::Provider {
                subscribers, demand, ..
            } => subscribers * demand,
            PlayerKind::Peer { .. } => 0.0,
        }
    }

    fn validate(&self, player: usize) -> Result<(), GameError> {
        let check = |field: &'static str, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(GameError::InvalidParameter {
                    player,
                    field,
                    value,
                })
            }
        };
        match *self {
            PlayerKind::Provider {
                subscribers,
                revenue,
                demand,
                cost,
            } => {
                check("subscribers", subscribers)?;
                check("revenue", revenue)?;
                check("demand", demand)?;
                check("cost", cost)
            }
            PlayerKind::Peer { upload } => check("upload", upload),
        }
    }
}

// ---------------------------------------------------------------------------
// Characteristic functions
// ---------------------------------------------------------------------------

/// A transferable-utility coalitional game: a player count and a worth for
/// every coalition.
///
/// Implementations must be deterministic (repeated queries return
/// bit-identical values) and safe to query from parallel workers. Callers
/// guarantee the coalition only uses bits below `player_count`.
pub trait CharacteristicFn: Sync {
    fn player_count(&self) -> usize;

    /// Worth `v(S)` of a coalition, in currency per period. `v(∅) = 0`.
    fn value(&self, coalition: Coalition) -> f64;

    /// The grand coalition.
    fn grand(&self) -> Coalition {
        Coalition::full(self.player_count())
    }
}

/// Dense worth table over every coalition, indexed by mask.
///
/// Parallelized for large rosters; entry order is fixed so the result is
/// identical regardless of worker count.
pub(crate) fn dense_worth_table<G: CharacteristicFn + ?Sized>(game: &G) -> Vec<f64> {
    let n = game.player_count();
    assert!(n <= TABLE_PLAYER_LIMIT, "worth table needs n <= {TABLE_PLAYER_LIMIT}");
    let size = 1usize << n;
    if n >= 16 {
        (0..size)
            .into_par_iter()
            .map(|m| game.value(Coalition(m as u64)))
            .collect()
    } else {
        (0..size)
            .map(|m| game.value(Coalition(m as u64)))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// The canonical peer-assisted service game
// ---------------------------------------------------------------------------

/// Canonical multi-provider peer-assisted service game.
///
/// The worth of a coalition `S` is
/// `Σ_{providers i ∈ S} subscribers_i · revenue_i − cost_i · residual_i`
/// where residuals are what remains of each provider's demand after the
/// coalition's pooled peer capacity has been allocated by
/// [`Game::allocate_uploads`]. Coalitions without a provider are worth 0:
/// peers have no content to sell.
///
/// Worth values are memoized; the cache is safe for concurrent queries and
/// transparent (clearing it never changes any value).
#[derive(Debug)]
pub struct Game {
    players: Vec<PlayerKind>,
    cache: DashMap<u64, f64>,
}

impl Clone for Game {
    fn clone(&self) -> Self {
        Game {
            players: self.players.clone(),
            cache: self.cache.clone(),
        }
    }
}

impl Game {
    /// Builds a game from a roster. Player indices follow input order.
    pub fn new(players: Vec<PlayerKind>) -> Result<Game, GameError> {
        if players.is_empty() {
            return Err(GameError::EmptyRoster);
        }
        if players.len() > MAX_PLAYERS {
            return Err(GameError::TooManyPlayers {
                count: players.len(),
                limit: MAX_PLAYERS,
            });
        }
        for (i, p) in players.iter().enumerate() {
            p.validate(i)?;
        }
        Ok(Game {
            players,
            cache: DashMap::new(),
        })
    }

    pub fn player_count(&self) -> usize {
        self.players.len()
    }

    pub fn players(&self) -> &[PlayerKind] {
        &self.players
    }

    pub fn kind(&self, player: usize) -> &PlayerKind {
        &self.players[player]
    }

    pub fn is_provider(&self, player: usize) -> bool {
        self.players[player].is_provider()
    }

    pub fn is_peer(&self, player: usize) -> bool {
        self.players[player].is_peer()
    }

    /// Provider indices in ascending order.
    pub fn providers(&self) -> Vec<usize> {
        (0..self.players.len())
            .filter(|&i| self.players[i].is_provider())
            .collect()
    }

    /// Peer indices in ascending order.
    pub fn peers(&self) -> Vec<usize> {
        (0..self.players.len())
            .filter(|&i| self.players[i].is_peer())
            .collect()
    }

    pub fn grand_coalition(&self) -> Coalition {
        Coalition::full(self.players.len())
    }

    pub fn validate_coalition(&self, s: Coalition) -> Result<(), GameError> {
        if s.is_subset_of(self.grand_coalition()) {
            Ok(())
        } else {
            Err(GameError::InvalidCoalition {
                mask: s.mask(),
                players: self.players.len(),
            })
        }
    }

    /// Worth of a coalition; memoized, deterministic.
    pub fn worth(&self, s: Coalition) -> Result<f64, GameError> {
        self.validate_coalition(s)?;
        Ok(self.value(s))
    }

    /// Drops every memoized worth value. Queries after a clear recompute and
    /// return the same values as before.
    pub fn clear_worth_cache(&self) {
        self.cache.clear();
    }

    /// Optimal assignment of the coalition's pooled peer capacity.
    ///
    /// Greedy by descending provider cost rate (ties: ascending player
    /// index), drawing from peers in ascending index order, never assigning
    /// a provider more than its demand. Cost is linear per provider, so the
    /// greedy order is optimal.
    pub fn allocate_uploads(&self, s: Coalition) -> Result<AllocationPlan, GameError> {
        self.validate_coalition(s)?;
        let order = self.provider_cost_order(s);
        let mut peers: Vec<(usize, f64)> = s
            .members()
            .filter_map(|i| match self.players[i] {
                PlayerKind::Peer { upload } if upload > 0.0 => Some((i, upload)),
                _ => None,
            })
            .collect();
        let mut entries = Vec::new();
        let mut next_peer = 0;
        for i in order {
            let mut residual = self.players[i].total_demand();
            while residual > 0.0 && next_peer < peers.len() {
                let (peer, available) = peers[next_peer];
                let take = residual.min(available);
                if take > 0.0 {
                    entries.push(Assignment {
                        peer,
                        provider: i,
                        bandwidth: take,
                    });
                    residual -= take;
                }
                if take < available {
                    peers[next_peer].1 = available - take;
                } else {
                    next_peer += 1;
                }
            }
        }
        Ok(AllocationPlan { entries })
    }

    fn provider_cost_order(&self, s: Coalition) -> Vec<usize> {
        let mut order: Vec<usize> = s.members().filter(|&i| self.is_provider(i)).collect();
        order.sort_by(|&a, &b| {
            let (ca, cb) = (self.cost_rate(a), self.cost_rate(b));
            cb.partial_cmp(&ca).unwrap().then(a.cmp(&b))
        });
        order
    }

    fn cost_rate(&self, provider: usize) -> f64 {
        match self.players[provider] {
            PlayerKind::Provider { cost, .. } => cost,
            PlayerKind::Peer { .. } => unreachable!("not a provider"),
        }
    }

    // Same allocation as allocate_uploads, but only per-provider totals are
    // needed: the pool is fungible, so each provider simply drains
    // min(demand, remaining pool) in cost order.
    fn compute_worth(&self, s: Coalition) -> f64 {
        let mut pool: f64 = s
            .members()
            .map(|i| match self.players[i] {
                PlayerKind::Peer { upload } => upload,
                _ => 0.0,
            })
            .sum();
        let mut total = 0.0;
        for i in self.provider_cost_order(s) {
            if let PlayerKind::Provider {
                subscribers,
                revenue,
                demand,
                cost,
            } = self.players[i]
            {
                let want = subscribers * demand;
                let assigned = want.min(pool);
                pool -= assigned;
                total += subscribers * revenue - cost * (want - assigned);
            }
        }
        total
    }
}

impl CharacteristicFn for Game {
    fn player_count(&self) -> usize {
        self.players.len()
    }

    fn value(&self, s: Coalition) -> f64 {
        debug_assert!(s.is_subset_of(self.grand_coalition()));
        if let Some(v) = self.cache.get(&s.mask()) {
            return *v;
        }
        let v = self.compute_worth(s);
        self.cache.insert(s.mask(), v);
        v
    }
}

/// One peer-to-provider bandwidth assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub peer: usize,
    pub provider: usize,
    pub bandwidth: f64,
}

/// Per-pair upload assignment for one coalition; only positive entries are
/// stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AllocationPlan {
    entries: Vec<Assignment>,
}

impl AllocationPlan {
    pub fn assignments(&self) -> &[Assignment] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total bandwidth assigned to a provider.
    pub fn assigned_to(&self, provider: usize) -> f64 {
        self.entries
            .iter()
            .filter(|a| a.provider == provider)
            .map(|a| a.bandwidth)
            .sum()
    }

    /// Total bandwidth drawn from a peer.
    pub fn assigned_from(&self, peer: usize) -> f64 {
        self.entries
            .iter()
            .filter(|a| a.peer == peer)
            .map(|a| a.bandwidth)
            .sum()
    }
}

// ---------------------------------------------------------------------------
// Table-backed games
// ---------------------------------------------------------------------------

/// A game defined by an explicit worth table (one entry per coalition mask).
///
/// The table form covers classic test games and arbitrary characteristic
/// functions that the canonical model cannot express.
#[derive(Debug, Clone, PartialEq)]
pub struct TableGame {
    n: usize,
    worths: Vec<f64>,
}

impl TableGame {
    /// Builds a game from `2^n` worth values indexed by coalition mask.
    pub fn from_worths(n: usize, worths: Vec<f64>) -> Result<TableGame, GameError> {
        if n == 0 {
            return Err(GameError::EmptyRoster);
        }
        if n > TABLE_PLAYER_LIMIT {
            return Err(GameError::TooManyPlayers {
                count: n,
                limit: TABLE_PLAYER_LIMIT,
            });
        }
        let expected = 1usize << n;
        if worths.len() != expected {
            return Err(GameError::WrongTableSize {
                players: n,
                expected,
                got: worths.len(),
            });
        }
        if worths[0] != 0.0 {
            return Err(GameError::InvalidWorth { mask: 0 });
        }
        if let Some(m) = worths.iter().position(|v| !v.is_finite()) {
            return Err(GameError::InvalidWorth { mask: m as u64 });
        }
        Ok(TableGame { n, worths })
    }

    /// The unanimity game: worth 1 for the grand coalition, 0 otherwise.
    pub fn unanimity(n: usize) -> TableGame {
        let mut worths = vec![0.0; 1 << n];
        worths[(1 << n) - 1] = 1.0;
        TableGame { n, worths }
    }

    /// The majority game: worth 1 for any strict majority of players.
    pub fn majority(n: usize) -> TableGame {
        let worths = (0..1u64 << n)
            .map(|m| {
                if m.count_ones() as usize * 2 > n {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        TableGame { n, worths }
    }

    pub fn worths(&self) -> &[f64] {
        &self.worths
    }
}

impl CharacteristicFn for TableGame {
    fn player_count(&self) -> usize {
        self.n
    }

    fn value(&self, s: Coalition) -> f64 {
        self.worths[s.mask() as usize]
    }
}
