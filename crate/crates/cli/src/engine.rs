//! Maps a validated scenario onto the engine and packages the results.

use coalition_core::{
    check_axioms, core_contains, core_nonempty, least_core, peer_payoffs, provider_deviation,
    shapley_exact, shapley_montecarlo, simulate, CharacteristicFn, Game, OrderPolicy, Outcome,
};

use crate::report::{AnalysisPayload, DynamicsMeasurements, SweepPoint};
use crate::scenario::{Analysis, PlayerSpec, ScenarioSpec};
use crate::CliError;

/// Membership reports use the coarser reporting tolerance, not the LP
/// feasibility tolerance.
const REPORT_TOLERANCE: f64 = 1e-6;

const DEFAULT_MAX_STEPS: usize = 1000;

fn compute(op: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Computation(format!("{op}: {err}"))
}

/// Runs the scenario's analysis. All validation has already happened.
pub fn run_analysis(spec: &ScenarioSpec) -> Result<AnalysisPayload, CliError> {
    let game = spec.build_game()?;
    match spec.analysis {
        Analysis::Shapley => match spec.samples {
            None => {
                let payoffs =
                    shapley_exact(&game).map_err(|e| compute("shapley_exact", e))?;
                let axioms =
                    check_axioms(&game, &payoffs).map_err(|e| compute("check_axioms", e))?;
                Ok(AnalysisPayload::Shapley { payoffs, axioms })
            }
            Some(samples) => {
                let estimate = shapley_montecarlo(&game, samples, spec.seed.unwrap_or(0))
                    .map_err(|e| compute("shapley_montecarlo", e))?;
                Ok(AnalysisPayload::ShapleyMontecarlo { estimate })
            }
        },
        Analysis::Core => {
            let outcome = core_nonempty(&game).map_err(|e| compute("core_nonempty", e))?;
            let phi = shapley_exact(&game).map_err(|e| compute("shapley_exact", e))?;
            let shapley_membership = core_contains(&game, &phi, REPORT_TOLERANCE)
                .map_err(|e| compute("core_contains", e))?;
            Ok(AnalysisPayload::Core {
                outcome,
                shapley_membership,
            })
        }
        Analysis::LeastCore => {
            let result = least_core(&game).map_err(|e| compute("least_core", e))?;
            Ok(AnalysisPayload::Leastcore {
                epsilon: result.epsilon,
                witness: result.witness,
            })
        }
        Analysis::Deviate => {
            let structure = spec.build_structure(&game)?;
            let report = provider_deviation(&game, &structure)
                .map_err(|e| compute("provider_deviation", e))?;
            Ok(AnalysisPayload::Deviate { report })
        }
        Analysis::Dynamics => run_dynamics(spec, &game),
        Analysis::Sweep => run_sweep(spec, &game),
    }
}

fn run_dynamics(spec: &ScenarioSpec, game: &Game) -> Result<AnalysisPayload, CliError> {
    let init = spec.build_structure(game)?;
    let threshold = spec
        .threshold
        .unwrap_or(coalition_core::dynamics::DEFAULT_SWITCH_THRESHOLD);
    let trajectory = simulate(
        game,
        &init,
        spec.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
        threshold,
        spec.seed.unwrap_or(0),
        spec.policy.unwrap_or(OrderPolicy::RoundRobin),
    )
    .map_err(|e| compute("simulate", e))?;

    let per_state: Result<Vec<_>, _> = trajectory
        .states
        .iter()
        .map(|s| peer_payoffs(game, s))
        .collect();
    let per_state = per_state.map_err(|e| compute("peer_payoffs", e))?;
    let final_payoffs = per_state.last().expect("at least one state").clone();

    // do identical peers end up with identical payoffs?
    let peers = game.peers();
    let mut identical_peer_max_gap = 0.0f64;
    for (a_idx, &a) in peers.iter().enumerate() {
        for &b in &peers[a_idx + 1..] {
            if game.kind(a) == game.kind(b) {
                identical_peer_max_gap =
                    identical_peer_max_gap.max((final_payoffs[a] - final_payoffs[b]).abs());
            }
        }
    }

    // does anyone else lose when a peer moves?
    let mut harming_moves = 0;
    for (k, mv) in trajectory.moves.iter().enumerate() {
        let before = &per_state[k];
        let after = &per_state[k + 1];
        let harmed = (0..game.player_count())
            .filter(|&i| i != mv.peer)
            .any(|i| after[i] < before[i] - 1e-9);
        if harmed {
            harming_moves += 1;
        }
    }

    let measurements = DynamicsMeasurements {
        converged: matches!(trajectory.outcome, Outcome::Converged { .. }),
        cycle_detected: matches!(trajectory.outcome, Outcome::Cycle { .. }),
        moves: trajectory.moves.len(),
        identical_peer_max_gap,
        moves_lowering_other_payoffs: harming_moves,
    };
    Ok(AnalysisPayload::Dynamics {
        trajectory,
        final_payoffs,
        measurements,
    })
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

fn run_sweep(spec: &ScenarioSpec, _game: &Game) -> Result<AnalysisPayload, CliError> {
    let axis = spec
        .axis
        .clone()
        .ok_or_else(|| CliError::Validation("sweep requires field `axis`".into()))?;
    let grid = spec
        .grid
        .clone()
        .ok_or_else(|| CliError::Validation("sweep requires field `grid`".into()))?;
    validate_grid(&grid)?;

    let mut points = Vec::with_capacity(grid.len());
    for &value in &grid {
        let point_spec = apply_axis(spec, &axis, value)?;
        let game = point_spec.build_game()?;
        let structure = point_spec.build_structure(&game)?;

        let shapley = shapley_exact(&game).map_err(|e| compute("shapley_exact", e))?;
        let deviation = provider_deviation(&game, &structure)
            .map_err(|e| compute("provider_deviation", e))?;
        let total_worth = game.value(game.grand());
        let provider_payoff_total: f64 = game.providers().iter().map(|&i| shapley[i]).sum();
        let peer_payoff_total: f64 = game.peers().iter().map(|&i| shapley[i]).sum();
        points.push(SweepPoint {
            axis_value: value,
            total_worth,
            shapley,
            provider_payoff_total,
            peer_payoff_total,
            deviation,
        });
    }
    Ok(AnalysisPayload::Sweep { axis, points })
}

fn validate_grid(grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(CliError::Validation("field `grid` must be nonempty".into()));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Validation("field `grid` must be finite".into()));
    }
    let increasing = grid.windows(2).all(|w| w[0] < w[1]);
    let decreasing = grid.windows(2).all(|w| w[0] > w[1]);
    if grid.len() > 1 && !increasing && !decreasing {
        return Err(CliError::Validation(
            "field `grid` must be strictly monotone".into(),
        ));
    }
    Ok(())
}

/// Produces the scenario for one grid point.
///
/// Axes: `providers` / `peers` replicate the first player of that role
/// `value` times (the rest of the roster is kept); `players.<i>.<field>`
/// overwrites one numeric parameter.
fn apply_axis(spec: &ScenarioSpec, axis: &str, value: f64) -> Result<ScenarioSpec, CliError> {
    let mut out = spec.clone();
    out.analysis = Analysis::Deviate; // per-point options: assignment only
    out.axis = None;
    out.grid = None;

    match axis {
        "providers" | "peers" => {
            let count = value.round();
            if (value - count).abs() > 1e-9 || count < 1.0 {
                return Err(CliError::Validation(format!(
                    "axis `{axis}` needs positive integer grid values, got {value}"
                )));
            }
            let want_provider = axis == "providers";
            let template = spec
                .players
                .iter()
                .find(|p| matches!(p, PlayerSpec::Provider { .. }) == want_provider)
                .copied()
                .ok_or_else(|| {
                    CliError::Validation(format!(
                        "axis `{axis}` needs at least one {} in the scenario",
                        if want_provider { "provider" } else { "peer" }
                    ))
                })?;
            let mut players: Vec<PlayerSpec> = vec![template; count as usize];
            players.extend(
                spec.players
                    .iter()
                    .filter(|p| matches!(p, PlayerSpec::Provider { .. }) != want_provider)
                    .copied(),
            );
            out.players = players;
            // player indices shift across grid points, so a fixed
            // assignment cannot be carried over
            if spec.assignment.is_some() {
                return Err(CliError::Validation(format!(
                    "axis `{axis}` cannot be combined with `assignment`"
                )));
            }
        }
        _ => {
            let rest = axis.strip_prefix("players.").ok_or_else(|| {
                CliError::Validation(format!(
                    "unknown axis `{axis}`; use `providers`, `peers`, or `players.<i>.<field>`"
                ))
            })?;
            let (index, field) = rest.split_once('.').ok_or_else(|| {
                CliError::Validation(format!("axis `{axis}` must name `players.<i>.<field>`"))
            })?;
            let index: usize = index.parse().map_err(|_| {
                CliError::Validation(format!("axis `{axis}`: `{index}` is not a player index"))
            })?;
            let player = out.players.get_mut(index).ok_or_else(|| {
                CliError::Validation(format!("axis `{axis}`: no player {index}"))
            })?;
            match (player, field) {
                (PlayerSpec::Provider { subscribers, .. }, "subscribers") => *subscribers = value,
                (PlayerSpec::Provider { revenue, .. }, "revenue") => *revenue = value,
                (PlayerSpec::Provider { demand, .. }, "demand") => *demand = value,
                (PlayerSpec::Provider { cost, .. }, "cost") => *cost = value,
                (PlayerSpec::Peer { upload }, "upload") => *upload = value,
                _ => {
                    return Err(CliError::Validation(format!(
                        "axis `{axis}`: player {index} has no numeric field `{field}`"
                    )))
                }
            }
        }
    }
    Ok(out)
}
