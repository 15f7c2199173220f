//! Independent oracles shared by the property suites.
//!
//! Everything here recomputes expected values from first principles —
//! permutation averages, discretized allocation search — and must stay free
//! of the library's subset-formula and greedy code paths.
#![allow(dead_code)] // each test binary uses its own subset

use coalition_core::{CharacteristicFn, Coalition, Game, PlayerKind, TableGame};
use rand::rngs::StdRng;
use rand::Rng;

/// Shapley payoffs by averaging marginal vectors over every join order.
pub fn permutation_shapley<G: CharacteristicFn + ?Sized>(game: &G) -> Vec<f64> {
    let n = game.player_count();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sums = vec![0.0; n];
    let mut count = 0u64;

    // Heap's algorithm, iterative
    let mut c = vec![0usize; n];
    let visit = |perm: &[usize], sums: &mut [f64], count: &mut u64| {
        let mut coalition = Coalition::EMPTY;
        let mut prev = 0.0;
        for &p in perm {
            coalition = coalition.with(p);
            let cur = game.value(coalition);
            sums[p] += cur - prev;
            prev = cur;
        }
        *count += 1;
    };
    visit(&perm, &mut sums, &mut count);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm, &mut sums, &mut count);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }

    sums.iter().map(|s| s / count as f64).collect()
}

/// Random worth table with entries uniform in `[0, hi]`.
pub fn random_table_game(rng: &mut StdRng, n: usize, hi: f64) -> TableGame {
    let mut worths = vec![0.0];
    for _ in 1..1usize << n {
        worths.push(rng.gen_range(0.0..hi));
    }
    TableGame::from_worths(n, worths).unwrap()
}

/// Random table game where player `dummy` never changes any worth.
pub fn random_game_with_dummy(rng: &mut StdRng, n: usize, hi: f64, dummy: usize) -> TableGame {
    let mut worths = vec![0.0; 1 << n];
    for m in 1..1usize << n {
        if m >> dummy & 1 == 1 {
            worths[m] = worths[m & !(1 << dummy)];
        } else {
            worths[m] = rng.gen_range(0.0..hi);
        }
    }
    TableGame::from_worths(n, worths).unwrap()
}

/// Random table game symmetric under swapping players `a` and `b`.
pub fn random_game_with_symmetric_pair(
    rng: &mut StdRng,
    n: usize,
    hi: f64,
    a: usize,
    b: usize,
) -> TableGame {
    let swap = |m: usize| -> usize {
        let (ba, bb) = (m >> a & 1, m >> b & 1);
        let mut out = m & !(1 << a) & !(1 << b);
        out |= ba << b | bb << a;
        out
    };
    let mut worths = vec![f64::NAN; 1 << n];
    worths[0] = 0.0;
    for m in 1..1usize << n {
        if worths[m].is_nan() {
            let v = rng.gen_range(0.0..hi);
            worths[m] = v;
            worths[swap(m)] = v;
        }
    }
    TableGame::from_worths(n, worths).unwrap()
}

/// Random canonical roster. With `profitable`, every provider's revenue
/// covers its worst-case server bill, the regime where worth is monotone.
pub fn random_roster(
    rng: &mut StdRng,
    providers: usize,
    peers: usize,
    profitable: bool,
) -> Game {
    let mut players = Vec::new();
    for _ in 0..providers {
        let subscribers = rng.gen_range(1.0..20.0_f64).round();
        let demand = rng.gen_range(0.1..2.0);
        let cost = rng.gen_range(0.05..2.0);
        let revenue = if profitable {
            cost * demand * rng.gen_range(1.0..3.0)
        } else {
            rng.gen_range(0.0..2.0)
        };
        players.push(PlayerKind::provider(subscribers, revenue, demand, cost));
    }
    for _ in 0..peers {
        players.push(PlayerKind::peer(rng.gen_range(0.0..8.0)));
    }
    Game::new(players).unwrap()
}

/// Minimal residual server cost over a grid of per-provider totals.
///
/// Cost depends on allocations only through each provider's total, and any
/// vector of totals with `Σ aᵢ ≤ Σ upload` is realizable from the pooled
/// capacity, so searching totals is an exact relaxation of per-peer splits.
pub fn brute_force_min_cost(game: &Game, s: Coalition, step: f64) -> f64 {
    let providers: Vec<(f64, f64)> = s
        .members()
        .filter(|&i| game.is_provider(i))
        .map(|i| match *game.kind(i) {
            PlayerKind::Provider { cost, .. } => (game.kind(i).total_demand(), cost),
            _ => unreachable!(),
        })
        .collect();
    let pool: f64 = s
        .members()
        .filter_map(|i| match *game.kind(i) {
            PlayerKind::Peer { upload } => Some(upload),
            _ => None,
        })
        .sum();

    fn rec(providers: &[(f64, f64)], step: f64, pool: f64, acc: f64, best: &mut f64) {
        match providers {
            [] => {
                if acc < *best {
                    *best = acc;
                }
            }
            [(demand, cost), rest @ ..] => {
                let max_units = ((demand.min(pool)) / step).floor() as i64;
                for units in 0..=max_units {
                    let a = units as f64 * step;
                    rec(rest, step, pool - a, acc + cost * (demand - a), best);
                }
            }
        }
    }

    let mut best = f64::INFINITY;
    rec(&providers, step, pool, 0.0, &mut best);

    // The continuum optimum sits at a vertex of {0 ≤ aᵢ ≤ Dᵢ, Σaᵢ ≤ U}:
    // some providers saturated, at most one taking the leftover pool.
    // Enumerate those directly so grid resolution cannot hide it.
    let p = providers.len();
    for saturated in 0..1usize << p {
        let d_sat: f64 = (0..p)
            .filter(|&i| saturated >> i & 1 == 1)
            .map(|i| providers[i].0)
            .sum();
        if d_sat > pool {
            continue;
        }
        for marginal in 0..=p {
            let mut cost_total = 0.0;
            for (i, &(demand, cost)) in providers.iter().enumerate() {
                let a = if saturated >> i & 1 == 1 {
                    demand
                } else if i == marginal {
                    (pool - d_sat).clamp(0.0, demand)
                } else {
                    0.0
                };
                cost_total += cost * (demand - a);
            }
            if cost_total < best {
                best = cost_total;
            }
        }
    }
    best
}

/// Searches the discrete efficient payoff simplex for a core member.
///
/// Grid points are `x_i = k_i · δ` with `Σ k_i = steps` and
/// `δ = v(N)/steps`; a point passes when `x(S) ≥ v(S) − tol` for every
/// proper nonempty `S`. Pruned on singleton/complement bounds, decided
/// subsets, and the worth still demanded by the undecided tail, but
/// exhaustive over the surviving lattice.
pub fn grid_core_search<G: CharacteristicFn + ?Sized>(
    game: &G,
    steps: u32,
    tol: f64,
) -> Option<Vec<f64>> {
    let n = game.player_count();
    let full = (1usize << n) - 1;
    let v: Vec<f64> = (0..=full)
        .map(|m| game.value(Coalition::from_mask(m as u64)))
        .collect();
    let delta = v[full] / steps as f64;
    if delta <= 0.0 {
        let zeros = vec![0.0; n];
        let ok = (1..full).all(|m| -v[m] >= -tol);
        return if ok { Some(zeros) } else { None };
    }

    let lower: Vec<i64> = (0..n)
        .map(|i| (((v[1 << i] - tol) / delta).ceil() as i64).max(0))
        .collect();
    let upper: Vec<i64> = (0..n)
        .map(|i| steps as i64 - (((v[full ^ (1 << i)] - tol) / delta).ceil() as i64).max(0))
        .collect();
    // largest worth demanded by any subset of the undecided tail {d..n-1}
    let mut tail_max = vec![0.0f64; n + 1];
    for d in (0..n).rev() {
        let tail_mask = (full >> d) << d;
        let mut best = 0.0f64;
        let mut sub = tail_mask;
        loop {
            best = best.max(v[sub]);
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & tail_mask;
        }
        tail_max[d] = best;
    }

    fn rec(
        d: usize,
        remaining: i64,
        ks: &mut Vec<i64>,
        n: usize,
        delta: f64,
        tol: f64,
        v: &[f64],
        lower: &[i64],
        upper: &[i64],
        tail_max: &[f64],
    ) -> bool {
        if d == n {
            return remaining == 0;
        }
        if tail_max[d] - tol > remaining as f64 * delta {
            return false;
        }
        let mut lo = lower[d].max(0);
        let mut hi = upper[d].min(remaining);
        if d == n - 1 {
            lo = lo.max(remaining);
            hi = hi.min(remaining);
        }
        for k in lo..=hi {
            ks[d] = k;
            // every fully-decided subset through player d must already hold
            let mut ok = true;
            for m in 1usize..1 << (d + 1) {
                if m >> d & 1 == 0 {
                    continue;
                }
                let x: f64 = (0..=d)
                    .filter(|&i| m >> i & 1 == 1)
                    .map(|i| ks[i] as f64 * delta)
                    .sum();
                if x < v[m] - tol {
                    ok = false;
                    break;
                }
            }
            if ok && rec(d + 1, remaining - k, ks, n, delta, tol, v, lower, upper, tail_max) {
                return true;
            }
        }
        ks[d] = 0;
        false
    }

    let mut ks = vec![0i64; n];
    if rec(
        0,
        steps as i64,
        &mut ks,
        n,
        delta,
        tol,
        &v,
        &lower,
        &upper,
        &tail_max,
    ) {
        Some(ks.iter().map(|&k| k as f64 * delta).collect())
    } else {
        None
    }
}

/// Residual cost of the engine's own allocation for comparison.
pub fn greedy_cost(game: &Game, s: Coalition) -> f64 {
    let plan = game.allocate_uploads(s).unwrap();
    s.members()
        .filter(|&i| game.is_provider(i))
        .map(|i| match *game.kind(i) {
            PlayerKind::Provider { cost, .. } => {
                cost * (game.kind(i).total_demand() - plan.assigned_to(i)).max(0.0)
            }
            _ => unreachable!(),
        })
        .sum()
}
