//! Result documents and their serialization.
//!
//! Every float is printed with 17 significant digits in both the JSON and
//! CSV emitters, so numbers round-trip bit-faithfully and the two formats
//! agree to full printed precision. `duration_seconds` is the last field of
//! the document; everything before it is deterministic for a fixed spec and
//! seed.

use std::io::{self, Write};

use serde::Serialize;

use coalition_core::{
    AxiomReport, CoreOutcome, CoreReport, DeviationReport, McEstimate,
    PayoffVector, Trajectory,
};

use crate::scenario::ScenarioSpec;

/// `{:.16e}` gives one digit before the point and sixteen after: 17
/// significant digits, enough to reproduce any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", fmt_f64(value))
    }
}

/// Serializes a document to compact JSON with 17-significant-digit floats.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value.serialize(&mut ser).expect("serialization is infallible");
    out.push(b'\n');
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsMeasurements {
    pub converged: bool,
    pub cycle_detected: bool,
    pub moves: usize,
    /// Largest final-payoff gap between peers with identical parameters.
    pub identical_peer_max_gap: f64,
    /// Moves that lowered some non-moving player's payoff.
    pub moves_lowering_other_payoffs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub total_worth: f64,
    pub shapley: PayoffVector,
    pub provider_payoff_total: f64,
    pub peer_payoff_total: f64,
    pub deviation: DeviationReport,
}

/// The per-analysis payload of a result document.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "analysis", rename_all = "snake_case")]
pub enum AnalysisPayload {
    Shapley {
        payoffs: PayoffVector,
        axioms: AxiomReport,
    },
    ShapleyMontecarlo {
        estimate: McEstimate,
    },
    Core {
        outcome: CoreOutcome,
        /// Membership report for the exact Shapley division.
        shapley_membership: CoreReport,
    },
    Leastcore {
        epsilon: f64,
        witness: PayoffVector,
    },
    Deviate {
        report: DeviationReport,
    },
    Dynamics {
        trajectory: Trajectory,
        final_payoffs: PayoffVector,
        measurements: DynamicsMeasurements,
    },
    Sweep {
        axis: String,
        points: Vec<SweepPoint>,
    },
}

/// Everything one invocation produces. Field order is part of the format:
/// the wall clock comes last so the deterministic prefix can be compared
/// byte for byte across runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultDocument {
    /// Echo of the effective scenario (file contents plus CLI overrides).
    pub spec: ScenarioSpec,
    pub engine_version: String,
    #[serde(flatten)]
    pub payload: AnalysisPayload,
    pub duration_seconds: f64,
}

impl ResultDocument {
    pub fn new(spec: ScenarioSpec, payload: AnalysisPayload, duration_seconds: f64) -> Self {
        ResultDocument {
            spec,
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            payload,
            duration_seconds,
        }
    }
}

/// Sweep CSV: one row per grid point, stable column order, LF endings.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(
        "axis_value,total_worth,provider_payoff_total,peer_payoff_total,deviation_verdict\n",
    );
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(p.axis_value),
            fmt_f64(p.total_worth),
            fmt_f64(p.provider_payoff_total),
            fmt_f64(p.peer_payoff_total),
            p.deviation.grand_resists
        ));
    }
    out
}

/// Human-readable recap, printed to standard error.
pub fn summarize(payload: &AnalysisPayload) -> String {
    let mut s = String::new();
    match payload {
        AnalysisPayload::Shapley { payoffs, axioms } => {
            s.push_str("shapley (exact)\n");
            for (i, phi) in payoffs.iter().enumerate() {
                s.push_str(&format!("  player {i:>3}  {phi:>14.6}\n"));
            }
            s.push_str(&format!("  total      {:>14.6}\n", payoffs.total()));
            s.push_str(&format!("  axioms     {}\n", if axioms.is_fair() { "pass" } else { "FAIL" }));
        }
        AnalysisPayload::ShapleyMontecarlo { estimate } => {
            s.push_str(&format!(
                "shapley (monte carlo, {} samples, seed {}, {})\n",
                estimate.samples, estimate.seed, estimate.generator
            ));
            for i in 0..estimate.mean.len() {
                s.push_str(&format!(
                    "  player {i:>3}  {:>14.6} ± {:.6}\n",
                    estimate.mean[i], estimate.std_error[i]
                ));
            }
        }
        AnalysisPayload::Core {
            outcome,
            shapley_membership,
        } => {
            s.push_str(&format!(
                "core: {}\n",
                match outcome {
                    CoreOutcome::Nonempty { .. } => "nonempty (witness in payload)",
                    CoreOutcome::Empty => "empty",
                }
            ));
            s.push_str(&format!(
                "shapley division in core: {}",
                shapley_membership.is_member
            ));
            if !shapley_membership.is_member {
                s.push_str(&format!(
                    " ({} blocking coalitions, worst excess {:.6})",
                    shapley_membership.violations.len(),
                    shapley_membership.violations[0].excess
                ));
            }
            s.push('\n');
        }
        AnalysisPayload::Leastcore { epsilon, .. } => {
            s.push_str(&format!("least core: epsilon = {epsilon:.9}\n"));
        }
        AnalysisPayload::Deviate { report } => {
            s.push_str("provider deviation (grand vs own block)\n");
            for d in &report.providers {
                s.push_str(&format!(
                    "  provider {:>3}  grand {:>12.6}  split {:>12.6}  gain {:>+12.6}\n",
                    d.provider, d.grand_payoff, d.split_payoff, d.gain
                ));
            }
            s.push_str(&format!(
                "  grand coalition resists deviations: {}\n",
                report.grand_resists
            ));
        }
        AnalysisPayload::Dynamics {
            trajectory,
            measurements,
            ..
        } => {
            s.push_str(&format!(
                "dynamics: {:?} after {} moves\n",
                trajectory.outcome, measurements.moves
            ));
            s.push_str(&format!(
                "  identical-peer payoff gap {:.6}, incumbent-harming moves {}\n",
                measurements.identical_peer_max_gap, measurements.moves_lowering_other_payoffs
            ));
        }
        AnalysisPayload::Sweep { axis, points } => {
            s.push_str(&format!("sweep over `{axis}` ({} points)\n", points.len()));
            s.push_str("  axis        total_worth   providers        peers   resists\n");
            for p in points {
                s.push_str(&format!(
                    "  {:>8.3}  {:>12.4}  {:>10.4}  {:>11.4}   {}\n",
                    p.axis_value,
                    p.total_worth,
                    p.provider_payoff_total,
                    p.peer_payoff_total,
                    p.deviation.grand_resists
                ));
            }
        }
    }
    s
}
