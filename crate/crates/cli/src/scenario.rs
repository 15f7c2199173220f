//! Scenario files: parsing, strict validation, and conversion to engine
//! inputs. Unknown fields are rejected, and every option is checked against
//! the chosen analysis before any computation starts.

use serde::de::Error as DeError;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use coalition_core::{CoalitionStructure, Game, OrderPolicy, PlayerKind};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    Shapley,
    Core,
    LeastCore,
    Deviate,
    Dynamics,
    Sweep,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Shapley => "shapley",
            Analysis::Core => "core",
            Analysis::LeastCore => "leastcore",
            Analysis::Deviate => "deviate",
            Analysis::Dynamics => "dynamics",
            Analysis::Sweep => "sweep",
        }
    }
}

/// One player entry of the scenario wire format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlayerSpec {
    Provider {
        subscribers: f64,
        revenue: f64,
        demand: f64,
        cost: f64,
    },
    Peer {
        upload: f64,
    },
}

impl PlayerSpec {
    pub fn to_kind(self) -> PlayerKind {
        match self {
            PlayerSpec::Provider {
                subscribers,
                revenue,
                demand,
                cost,
            } => PlayerKind::provider(subscribers, revenue, demand, cost),
            PlayerSpec::Peer { upload } => PlayerKind::peer(upload),
        }
    }
}

impl Serialize for PlayerSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match *self {
            PlayerSpec::Provider {
                subscribers,
                revenue,
                demand,
                cost,
            } => {
                let mut map = serializer.serialize_map(Some(5))?;
                map.serialize_entry("kind", "provider")?;
                map.serialize_entry("subscribers", &subscribers)?;
                map.serialize_entry("revenue", &revenue)?;
                map.serialize_entry("demand", &demand)?;
                map.serialize_entry("cost", &cost)?;
                map.end()
            }
            PlayerSpec::Peer { upload } => {
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("kind", "peer")?;
                map.serialize_entry("upload", &upload)?;
                map.end()
            }
        }
    }
}

// Internally-tagged enums silently swallow unknown fields, so the wire
// format goes through a flat helper struct with deny_unknown_fields.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlayer {
    kind: String,
    subscribers: Option<f64>,
    revenue: Option<f64>,
    demand: Option<f64>,
    cost: Option<f64>,
    upload: Option<f64>,
}

impl<'de> Deserialize<'de> for PlayerSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawPlayer::deserialize(deserializer)?;
        let require = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| D::Error::custom(format!("{} requires field `{name}`", raw.kind)))
        };
        let forbid = |name: &str, v: Option<f64>| {
            if v.is_some() {
                Err(D::Error::custom(format!(
                    "{} does not take field `{name}`",
                    raw.kind
                )))
            } else {
                Ok(())
            }
        };
        match raw.kind.as_str() {
            "provider" => {
                forbid("upload", raw.upload)?;
                Ok(PlayerSpec::Provider {
                    subscribers: require("subscribers", raw.subscribers)?,
                    revenue: require("revenue", raw.revenue)?,
                    demand: require("demand", raw.demand)?,
                    cost: require("cost", raw.cost)?,
                })
            }
            "peer" => {
                forbid("subscribers", raw.subscribers)?;
                forbid("revenue", raw.revenue)?;
                forbid("demand", raw.demand)?;
                forbid("cost", raw.cost)?;
                Ok(PlayerSpec::Peer {
                    upload: require("upload", raw.upload)?,
                })
            }
            other => Err(D::Error::custom(format!(
                "unknown player kind `{other}`, expected \"provider\" or \"peer\""
            ))),
        }
    }
}

/// A peer-to-provider attachment for `deviate`/`dynamics` analyses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentPair {
    pub peer: usize,
    pub provider: usize,
}

/// A parsed scenario: the roster, the analysis to run, and its options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub players: Vec<PlayerSpec>,
    pub analysis: Analysis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<OrderPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<AssignmentPair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
}

impl ScenarioSpec {
    /// Rejects options that have no meaning for the chosen analysis.
    pub fn validate_options(&self) -> Result<(), CliError> {
        let allowed: &[&str] = match self.analysis {
            Analysis::Shapley => &["samples", "seed"],
            Analysis::Core | Analysis::LeastCore => &[],
            Analysis::Deviate => &["assignment"],
            Analysis::Dynamics => &["seed", "max_steps", "threshold", "policy", "assignment"],
            Analysis::Sweep => &["axis", "grid", "assignment"],
        };
        let present: [(&str, bool); 8] = [
            ("samples", self.samples.is_some()),
            ("seed", self.seed.is_some()),
            ("max_steps", self.max_steps.is_some()),
            ("threshold", self.threshold.is_some()),
            ("policy", self.policy.is_some()),
            ("assignment", self.assignment.is_some()),
            ("axis", self.axis.is_some()),
            ("grid", self.grid.is_some()),
        ];
        for (name, is_set) in present {
            if is_set && !allowed.contains(&name) {
                return Err(CliError::Validation(format!(
                    "option `{name}` does not apply to the `{}` analysis",
                    self.analysis.name()
                )));
            }
        }
        if let Some(t) = self.threshold {
            if !t.is_finite() || t < 0.0 {
                return Err(CliError::Validation(format!(
                    "field `threshold` must be finite and non-negative, got {t}"
                )));
            }
        }
        if self.max_steps == Some(0) {
            return Err(CliError::Validation(
                "field `max_steps` must be at least 1".into(),
            ));
        }
        if self.samples == Some(0) {
            return Err(CliError::Validation(
                "field `samples` must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn build_game(&self) -> Result<Game, CliError> {
        let kinds: Vec<PlayerKind> = self.players.iter().map(|p| p.to_kind()).collect();
        Game::new(kinds).map_err(|e| CliError::Validation(format!("field `players`: {e}")))
    }

    /// The coalition structure from `assignment`, peers unattached by default.
    pub fn build_structure(&self, game: &Game) -> Result<CoalitionStructure, CliError> {
        match &self.assignment {
            None => Ok(CoalitionStructure::unattached(game)),
            Some(pairs) => {
                let tuples: Vec<(usize, usize)> =
                    pairs.iter().map(|p| (p.peer, p.provider)).collect();
                for p in pairs {
                    if p.peer >= game.player_count() || !game.is_peer(p.peer) {
                        return Err(CliError::Validation(format!(
                            "field `assignment`: player {} is not a peer",
                            p.peer
                        )));
                    }
                }
                CoalitionStructure::from_pairs(game, &tuples)
                    .map_err(|e| CliError::Validation(format!("field `assignment`: {e}")))
            }
        }
    }
}

/// Loads and fully validates a scenario file.
pub fn load_scenario(path: &std::path::Path) -> Result<ScenarioSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Validation(format!("cannot read scenario {}: {e}", path.display()))
    })?;
    let spec: ScenarioSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("parse error in {}: {e}", path.display())))?;
    Ok(spec)
}
