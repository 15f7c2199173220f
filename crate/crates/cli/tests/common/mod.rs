//! Independent oracles for the acceptance gates: permutation-average
//! Shapley, doctored random games, and a pruned exhaustive search of the
//! discrete payoff simplex. None of these share algorithms with the engine
//! paths they audit.
#![allow(dead_code)]

use coalition_core::{CharacteristicFn, Coalition, TableGame};
use rand::rngs::StdRng;
use rand::Rng;

/// Shapley payoffs as the average marginal vector over all `n!` join
/// orders (Heap's algorithm).
pub fn permutation_shapley<G: CharacteristicFn + ?Sized>(game: &G) -> Vec<f64> {
    let n = game.player_count();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sums = vec![0.0; n];
    let mut count = 0u64;

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
    let mut c = vec![0usize; n];
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

pub fn random_table_game(rng: &mut StdRng, n: usize, hi: f64) -> TableGame {
    let mut worths = vec![0.0];
    for _ in 1..1usize << n {
        worths.push(rng.gen_range(0.0..hi));
    }
    TableGame::from_worths(n, worths).unwrap()
}

/// Random game in which player `dummy` never changes any coalition's worth.
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

/// Random game invariant under swapping players `a` and `b`.
pub fn random_game_with_symmetric_pair(
    rng: &mut StdRng,
    n: usize,
    hi: f64,
    a: usize,
    b: usize,
) -> TableGame {
    let swap = |m: usize| -> usize {
        let (ba, bb) = (m >> a & 1, m >> b & 1);
        (m & !(1 << a) & !(1 << b)) | ba << b | bb << a
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

/// Pruned exhaustive search of the discrete efficient payoff simplex
/// (`x_i = k_i · v(N)/steps`, `Σ k_i = steps`) for a point satisfying
/// `x(S) ≥ v(S) − tol` everywhere. Returns a witness if one exists.
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
        let ok = (1..full).all(|m| v[m] <= tol);
        return if ok { Some(vec![0.0; n]) } else { None };
    }

    let lower: Vec<i64> = (0..n)
        .map(|i| (((v[1 << i] - tol) / delta).ceil() as i64).max(0))
        .collect();
    let upper: Vec<i64> = (0..n)
        .map(|i| steps as i64 - (((v[full ^ (1 << i)] - tol) / delta).ceil() as i64).max(0))
        .collect();
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

    struct Ctx<'a> {
        n: usize,
        delta: f64,
        tol: f64,
        v: &'a [f64],
        lower: &'a [i64],
        upper: &'a [i64],
        tail_max: &'a [f64],
    }

    fn rec(ctx: &Ctx, d: usize, remaining: i64, ks: &mut Vec<i64>) -> bool {
        if d == ctx.n {
            return remaining == 0;
        }
        if ctx.tail_max[d] - ctx.tol > remaining as f64 * ctx.delta {
            return false;
        }
        let mut lo = ctx.lower[d].max(0);
        let mut hi = ctx.upper[d].min(remaining);
        if d == ctx.n - 1 {
            lo = lo.max(remaining);
            hi = hi.min(remaining);
        }
        let mut k = lo;
        while k <= hi {
            ks[d] = k;
            let mut ok = true;
            for m in 1usize..1 << (d + 1) {
                if m >> d & 1 == 0 {
                    continue;
                }
                let x: f64 = (0..=d)
                    .filter(|&i| m >> i & 1 == 1)
                    .map(|i| ks[i] as f64 * ctx.delta)
                    .sum();
                if x < ctx.v[m] - ctx.tol {
                    ok = false;
                    break;
                }
            }
            if ok && rec(ctx, d + 1, remaining - k, ks) {
                return true;
            }
            k += 1;
        }
        ks[d] = 0;
        false
    }

    let ctx = Ctx {
        n,
        delta,
        tol,
        v: &v,
        lower: &lower,
        upper: &upper,
        tail_max: &tail_max,
    };
    let mut ks = vec![0i64; n];
    if rec(&ctx, 0, steps as i64, &mut ks) {
        Some(ks.iter().map(|&k| k as f64 * delta).collect())
    } else {
        None
    }
}
