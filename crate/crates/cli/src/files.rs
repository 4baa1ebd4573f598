//! JSON input formats.

use std::path::{Path, PathBuf};

use advmdp::adversary::{build_neighborhoods, AdversaryModel, NeighborhoodModel, Norm, PolicyBallModel};
use advmdp::mdp::{softmax_optimal_policy, value_iteration, FiniteMdp, Mode, Policy};
use advmdp::optimal::{DEFAULT_DIRECTION_NET_K, DEFAULT_LAMBDA};
use advmdp::verify::fixtures;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Prefix selecting a bundled MDP instead of a file.
pub const FIXTURE_PREFIX: &str = "fixture:";

/// On-disk MDP description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub rewards: Vec<Vec<f64>>,
    pub transitions: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_state: Option<usize>,
}

impl From<&FiniteMdp> for MdpFile {
    fn from(m: &FiniteMdp) -> Self {
        MdpFile {
            num_states: m.num_states,
            num_actions: m.num_actions,
            gamma: m.gamma,
            rewards: m.rewards.clone(),
            transitions: m.transitions.clone(),
            features: m.features.clone(),
            labels: m.labels.clone(),
            start_state: m.start_state,
        }
    }
}

impl MdpFile {
    pub fn into_mdp(self) -> CliResult<FiniteMdp> {
        if self.rewards.len() != self.num_states {
            return Err(CliError::Input(format!(
                "num_states is {} but rewards has {} rows",
                self.num_states,
                self.rewards.len()
            )));
        }
        if let Some((s, row)) = self.rewards.iter().enumerate().find(|(_, r)| r.len() != self.num_actions) {
            return Err(CliError::Input(format!(
                "num_actions is {} but rewards[{s}] has {} entries",
                self.num_actions,
                row.len()
            )));
        }
        let mdp = FiniteMdp {
            num_states: self.num_states,
            num_actions: self.num_actions,
            gamma: self.gamma,
            rewards: self.rewards,
            transitions: self.transitions,
            features: self.features,
            labels: self.labels,
            start_state: self.start_state,
        };
        Ok(mdp.validated()?)
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::File { path: path.display().to_string(), message: e.to_string() })
}

pub fn parse_mdp(text: &str, origin: &Path) -> CliResult<FiniteMdp> {
    parse::<MdpFile>(origin, text)?.into_mdp()
}

/// Loads an MDP from a path or a `fixture:<name>` reference, together with
/// the bundled victim when the reference names a fixture.
pub fn load_mdp(reference: &str) -> CliResult<(FiniteMdp, Option<Policy>)> {
    if let Some(name) = reference.strip_prefix(FIXTURE_PREFIX) {
        let (mdp, pi) = fixtures::by_name(name).ok_or_else(|| {
            CliError::Input(format!("unknown fixture {name:?}; known: {}", fixtures::NAMES.join(", ")))
        })?;
        return Ok((mdp, Some(pi)));
    }
    let path = Path::new(reference);
    Ok((parse_mdp(&read(path)?, path)?, None))
}

pub fn mdp_to_json(mdp: &FiniteMdp) -> String {
    let mut text = serde_json::to_string_pretty(&MdpFile::from(mdp)).expect("MDP serializes");
    text.push('\n');
    text
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flavor", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversarySpec {
    /// Either explicit neighbor sets or a feature budget.
    StateNeighborhood {
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default)]
        norm: Option<Norm>,
        #[serde(default)]
        neighbor_sets: Option<Vec<Vec<usize>>>,
    },
    /// A ball of `radius` at `states`, or at every state when omitted.
    PolicyBall {
        radius: f64,
        #[serde(default)]
        states: Option<Vec<usize>>,
    },
}

impl AdversarySpec {
    pub fn build(&self, mdp: &FiniteMdp) -> CliResult<AdversaryModel> {
        match self {
            AdversarySpec::StateNeighborhood { epsilon, norm, neighbor_sets } => match (epsilon, neighbor_sets) {
                (Some(eps), None) => {
                    Ok(AdversaryModel::StateNeighborhood(build_neighborhoods(mdp, *eps, norm.unwrap_or(Norm::Linf))?))
                }
                (None, Some(sets)) => {
                    if sets.len() != mdp.num_states {
                        return Err(CliError::Input(format!(
                            "adversary.neighbor_sets has {} entries for {} states",
                            sets.len(),
                            mdp.num_states
                        )));
                    }
                    Ok(AdversaryModel::StateNeighborhood(NeighborhoodModel::from_sets(sets.clone())?))
                }
                _ => Err(CliError::Input(
                    "adversary: state_neighborhood needs exactly one of epsilon or neighbor_sets".into(),
                )),
            },
            AdversarySpec::PolicyBall { radius, states } => {
                let model = match states {
                    Some(states) => PolicyBallModel::at_states(mdp.num_states, states, *radius)?,
                    None => PolicyBallModel::new(vec![*radius; mdp.num_states])?,
                };
                Ok(AdversaryModel::PolicyBall(model))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum VictimSpec {
    /// Deterministic optimal policy of the MDP.
    Optimal,
    /// The victim bundled with a `fixture:` MDP.
    Fixture,
    SoftmaxOptimal {
        temperature: f64,
    },
    Table(Vec<Vec<f64>>),
}

impl VictimSpec {
    pub fn build(&self, mdp: &FiniteMdp, bundled: Option<&Policy>) -> CliResult<Policy> {
        let pi = match self {
            VictimSpec::Optimal => value_iteration(mdp, Mode::Max)?.0,
            VictimSpec::Fixture => bundled
                .cloned()
                .ok_or_else(|| CliError::Input("victim_policy \"fixture\" requires a fixture: MDP".into()))?,
            VictimSpec::SoftmaxOptimal { temperature } => {
                if temperature.is_nan() || *temperature <= 0.0 {
                    return Err(CliError::Input(format!("softmax temperature must be positive, got {temperature}")));
                }
                softmax_optimal_policy(mdp, *temperature)?
            }
            VictimSpec::Table(rows) => Policy::new(rows.clone())?,
        };
        if pi.num_states() != mdp.num_states || pi.num_actions() != mdp.num_actions {
            return Err(CliError::Input(format!(
                "victim_policy is {}x{} but the MDP is {}x{}",
                pi.num_states(),
                pi.num_actions(),
                mdp.num_states,
                mdp.num_actions
            )));
        }
        Ok(pi)
    }
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_net_k() -> usize {
    DEFAULT_DIRECTION_NET_K
}

fn default_victim() -> VictimSpec {
    VictimSpec::Optimal
}

/// Experiment description shared by `attack`, `polytope` and `learncurve`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// MDP path or `fixture:<name>`; `--mdp` takes precedence.
    #[serde(default)]
    pub mdp: Option<String>,
    pub adversary: AdversarySpec,
    #[serde(default = "default_victim")]
    pub victim_policy: VictimSpec,
    #[serde(default)]
    pub attacks: Vec<String>,
    pub seed: u64,
    /// Seeds for `learncurve`.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub episodes: Option<usize>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_net_k")]
    pub direction_net_k: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        parse(path, &read(path)?)
    }
}

/// Everything an experiment needs, resolved from a config.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub mdp: FiniteMdp,
    pub pi: Policy,
    pub model: AdversaryModel,
}

impl Experiment {
    pub fn resolve(config: ExperimentConfig, mdp_override: Option<&str>) -> CliResult<Self> {
        let reference = mdp_override
            .map(str::to_string)
            .or_else(|| config.mdp.clone())
            .ok_or_else(|| CliError::Input("no MDP given: pass --mdp or set \"mdp\" in the config".into()))?;
        let (mdp, bundled) = load_mdp(&reference)?;
        let pi = config.victim_policy.build(&mdp, bundled.as_ref())?;
        let model = config.adversary.build(&mdp)?;
        Ok(Experiment { config, mdp, pi, model })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn victim_spec_json_forms() {
        let v: VictimSpec = serde_json::from_str("\"optimal\"").unwrap();
        assert_eq!(v, VictimSpec::Optimal);
        let v: VictimSpec = serde_json::from_str(r#"{"softmax_optimal": {"temperature": 0.5}}"#).unwrap();
        assert_eq!(v, VictimSpec::SoftmaxOptimal { temperature: 0.5 });
        let v: VictimSpec = serde_json::from_str(r#"{"table": [[1.0, 0.0]]}"#).unwrap();
        assert_eq!(v, VictimSpec::Table(vec![vec![1.0, 0.0]]));
    }

    #[test]
    fn neighborhood_spec_needs_one_source() {
        let mdp = fixtures::m_ex_mdp();
        let spec = AdversarySpec::StateNeighborhood { epsilon: None, norm: None, neighbor_sets: None };
        assert!(spec.build(&mdp).is_err());
    }

    #[test]
    fn unknown_fixture_is_an_input_error() {
        assert!(matches!(load_mdp("fixture:nope"), Err(CliError::Input(_))));
    }
}
