//! Dense-tableau feasibility kernel for ε-core membership.
//!
//! The primal question — does some efficient payoff vector satisfy
//! `x(S) ≥ v(S) − ε` for every proper nonempty `S`? — has `n` unknowns but
//! `2^n − 2` inequality rows, so a primal phase-1 tableau would be
//! `2^n × 2^n` dense. The same question transposes (Farkas) into a small
//! maximization over balancing weights:
//!
//!   max  Σ_S λ_S (v(S) − ε) − t · v(N)
//!   s.t. Σ_{S∋i} λ_S − t = 0        for every player i
//!        Σ_S λ_S = 1,   λ ≥ 0, t ≥ 0
//!
//! which is dense trivial work: `n+1` rows by `2^n` columns. The ε-core is
//! nonempty exactly when the optimum is ≤ 0, the weights `λ_S = 1/n` on
//! singletons with `t = 1/n` are a closed-form starting basis (no phase-1
//! search needed), and the multipliers on the rows at optimality are the
//! witness payoff vector. Pivoting follows Bland's anti-cycling rule with
//! the feasibility tolerance `1e-9`.

use super::StabilityError;

pub(crate) const FEASIBILITY_TOL: f64 = 1e-9;

// The witness shortfall on any constraint is bounded by the optimality
// tolerance plus the accepted objective value, so each gets half of the
// contractual feasibility tolerance.
const REDUCED_COST_TOL: f64 = FEASIBILITY_TOL / 2.0;
const ACCEPT_TOL: f64 = FEASIBILITY_TOL / 2.0;
const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Feasibility {
    /// A payoff vector with `x(N) = v(N)` and `x(S) ≥ v(S) − ε − tol`.
    Feasible(Vec<f64>),
    Infeasible,
}

/// Decides ε-core feasibility for a game given as a dense worth table.
pub(crate) fn epsilon_core_feasible(
    worths: &[f64],
    n: usize,
    epsilon: f64,
) -> Result<Feasibility, StabilityError> {
    assert!(n >= 1 && worths.len() == 1 << n);
    let full = (1usize << n) - 1;
    if n == 1 {
        // no proper nonempty coalitions: x = v(N) is always feasible
        return Ok(Feasibility::Feasible(vec![worths[full]]));
    }

    let m = full - 1; // proper nonempty coalition columns, mask = col + 1
    let t_col = m;
    let marker0 = m + 1;
    let width = m + 1 + (n + 1) + 1; // coalitions, t, markers, rhs
    let rhs_col = width - 1;
    let rows = n + 1;
    let obj = rows; // objective row index

    let mut tab = vec![vec![0.0f64; width]; rows + 1];
    for col in 0..m {
        let mask = (col + 1) as u64;
        for (i, row) in tab.iter_mut().enumerate().take(n) {
            if mask >> i & 1 == 1 {
                row[col] = 1.0;
            }
        }
        tab[n][col] = 1.0;
        tab[obj][col] = -(worths[col + 1] - epsilon); // z - c starts at -c
    }
    for row in tab.iter_mut().take(n) {
        row[t_col] = -1.0;
    }
    tab[obj][t_col] = worths[full];
    for r in 0..rows {
        tab[r][marker0 + r] = 1.0;
    }
    tab[n][rhs_col] = 1.0;

    let mut basis: Vec<usize> = (0..rows).map(|r| marker0 + r).collect();

    let pivot = |tab: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, pr: usize, pc: usize| {
        let piv = tab[pr][pc];
        for x in tab[pr].iter_mut() {
            *x /= piv;
        }
        for r in 0..=rows {
            if r == pr {
                continue;
            }
            let factor = tab[r][pc];
            if factor != 0.0 {
                let (src, dst) = if r < pr {
                    let (a, b) = tab.split_at_mut(pr);
                    (&b[0], &mut a[r])
                } else {
                    let (a, b) = tab.split_at_mut(r);
                    (&a[pr], &mut b[0])
                };
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    *d -= factor * s;
                }
                tab[r][pc] = 0.0;
            }
        }
        if pr < rows {
            basis[pr] = pc;
        }
    };

    // closed-form starting basis: the n singleton columns plus t
    for i in 0..n {
        pivot(&mut tab, &mut basis, i, (1usize << i) - 1);
    }
    pivot(&mut tab, &mut basis, n, t_col);

    let max_iterations = 10u64.saturating_mul(1u64 << n);
    let mut iterations = 0u64;
    loop {
        if tab[obj][rhs_col] > ACCEPT_TOL {
            // maximization value only grows: a positive balancing excess
            // already certifies the ε-core is empty
            return Ok(Feasibility::Infeasible);
        }
        // Bland: smallest improving non-marker column
        let entering = (0..=t_col).find(|&j| tab[obj][j] < -REDUCED_COST_TOL);
        let Some(pc) = entering else {
            break;
        };
        // ratio test; ties resolved by smallest basic variable index
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..rows {
            let a = tab[r][pc];
            if a > PIVOT_TOL {
                let ratio = tab[r][rhs_col] / a;
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => {
                        ratio < lratio - PIVOT_TOL
                            || (ratio < lratio + PIVOT_TOL && basis[r] < basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((pr, _)) = leave else {
            // the feasible region is compact; an unbounded ray is numerics
            return Err(StabilityError::NumericalFailure { iterations });
        };
        pivot(&mut tab, &mut basis, pr, pc);
        iterations += 1;
        if iterations > max_iterations {
            return Err(StabilityError::NumericalFailure { iterations });
        }
    }

    if tab[obj][rhs_col] > ACCEPT_TOL {
        return Ok(Feasibility::Infeasible);
    }

    // row multipliers sit under the marker columns of the objective row
    let mut x: Vec<f64> = (0..n).map(|i| tab[obj][marker0 + i]).collect();
    let slack = worths[full] - x.iter().sum::<f64>();
    if slack > 0.0 {
        x[0] += slack;
    }
    Ok(Feasibility::Feasible(x))
}
