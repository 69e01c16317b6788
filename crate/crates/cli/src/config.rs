//! Run configuration: TOML sections layered over built-in defaults.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use neurotraj::dwa::DwaConfig;
use neurotraj::evolve::EvolutionConfig;
use neurotraj::neuralnet::NetworkTopology;
use neurotraj::simworld::ScenarioConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub n_episodes: usize,
    pub tau_i: usize,
    pub tau_o: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            n_episodes: 64,
            tau_i: 2,
            tau_o: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    MinL1,
    Knee,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub select: Selection,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            select: Selection::MinL1,
        }
    }
}

/// Fully resolved configuration; this is what gets echoed into run
/// directories and hashed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub dataset: DatasetSection,
    pub topology: NetworkTopology,
    pub evolution: EvolutionConfig,
    pub dwa: DwaConfig,
    pub eval: EvalSection,
}

/// Values given on the command line; they win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub generations: Option<usize>,
    pub population: Option<usize>,
    pub episodes: Option<usize>,
    pub select: Option<Selection>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn take_table(raw: &mut Table, key: &str) -> Result<Table, CliError> {
    match raw.remove(key) {
        None => Ok(Table::new()),
        Some(Value::Table(t)) => Ok(t),
        Some(_) => Err(usage(format!("[{key}] must be a table"))),
    }
}

fn merge_into(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge_into(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Serializes `base`, overlays `over` key by key and reads the result
/// back; the target type's `deny_unknown_fields` rejects stray keys.
fn layer<T: Serialize + DeserializeOwned>(section: &str, base: &T, over: Table) -> Result<T, CliError> {
    let mut table = Table::try_from(base).map_err(|e| usage(format!("[{section}]: {e}")))?;
    merge_into(&mut table, over);
    Value::Table(table)
        .try_into()
        .map_err(|e| usage(format!("[{section}]: {e}")))
}

fn take_str(t: &mut Table, section: &str, key: &str) -> Result<Option<String>, CliError> {
    match t.remove(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(usage(format!("[{section}] {key} must be a string"))),
    }
}

impl RunConfig {
    /// Resolves a config file's text plus command-line overrides.
    ///
    /// `[scenario]` starts from `preset` (`seamless`, `inner-city` or
    /// `toy-straight`); `[topology]` from `scale` (`desk` or `full`) sized to
    /// the scenario grid and dataset horizons; `[dwa]` from the scenario
    /// limits. The top-level `seed` feeds every section that does not set
    /// its own, and `--seed` overrides all of them.
    pub fn resolve(text: &str, ov: &Overrides) -> Result<Self, CliError> {
        let mut raw: Table = text
            .parse()
            .map_err(|e: toml::de::Error| usage(format!("config: {e}")))?;
        let seed = match raw.remove("seed") {
            None => 0,
            Some(Value::Integer(i)) if i >= 0 => i as u64,
            Some(_) => return Err(usage("seed must be a non-negative integer")),
        };
        let seed = ov.seed.unwrap_or(seed);

        let mut scenario_t = take_table(&mut raw, "scenario")?;
        let mut dataset_t = take_table(&mut raw, "dataset")?;
        let mut topology_t = take_table(&mut raw, "topology")?;
        let mut evolution_t = take_table(&mut raw, "evolution")?;
        let dwa_t = take_table(&mut raw, "dwa")?;
        let mut eval_t = take_table(&mut raw, "eval")?;
        if let Some(k) = raw.keys().next() {
            return Err(usage(format!("unknown config key `{k}`")));
        }

        let preset = take_str(&mut scenario_t, "scenario", "preset")?;
        let base = match preset.as_deref().unwrap_or("seamless") {
            "seamless" => ScenarioConfig::seamless(),
            "inner-city" => ScenarioConfig::inner_city(),
            "toy-straight" => ScenarioConfig::toy_straight(),
            other => return Err(usage(format!("unknown scenario preset `{other}`"))),
        };
        let base = ScenarioConfig { seed, ..base };
        if ov.seed.is_some() {
            scenario_t.remove("seed");
            evolution_t.remove("seed");
        }
        let scenario: ScenarioConfig = layer("scenario", &base, scenario_t)?;
        scenario.validate().map_err(|e| usage(format!("[scenario]: {e}")))?;

        if let Some(n) = ov.episodes {
            dataset_t.insert("n_episodes".into(), Value::Integer(n as i64));
        }
        let dataset: DatasetSection = layer("dataset", &DatasetSection::default(), dataset_t)?;
        if dataset.n_episodes == 0 || dataset.tau_o == 0 {
            return Err(usage("[dataset] n_episodes and tau_o must be positive"));
        }

        let scale = take_str(&mut topology_t, "topology", "scale")?;
        let base = match scale.as_deref().unwrap_or("desk") {
            "desk" => NetworkTopology::desk_scale(scenario.grid, dataset.tau_i, dataset.tau_o),
            "full" => NetworkTopology::full_scale(scenario.grid, dataset.tau_i, dataset.tau_o),
            other => return Err(usage(format!("unknown topology scale `{other}`"))),
        };
        let topology: NetworkTopology = layer("topology", &base, topology_t)?;
        topology.validate().map_err(|e| usage(format!("[topology]: {e}")))?;

        if let Some(g) = ov.generations {
            evolution_t.insert("generations".into(), Value::Integer(g as i64));
        }
        if let Some(k) = ov.population {
            evolution_t.insert("population".into(), Value::Integer(k as i64));
        }
        let evo_base = EvolutionConfig {
            seed,
            ..EvolutionConfig::default()
        };
        let evolution: EvolutionConfig = layer("evolution", &evo_base, evolution_t)?;
        evolution.validate().map_err(|e| usage(format!("[evolution]: {e}")))?;

        let dwa: DwaConfig = layer("dwa", &DwaConfig::for_scenario(&scenario, dataset.tau_o), dwa_t)?;
        dwa.validate().map_err(|e| usage(format!("[dwa]: {e}")))?;

        if let Some(s) = ov.select {
            eval_t.insert("select".into(), Value::String(select_name(s).into()));
        }
        let eval: EvalSection = layer("eval", &EvalSection::default(), eval_t)?;

        Ok(Self {
            seed,
            scenario,
            dataset,
            topology,
            evolution,
            dwa,
            eval,
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| usage(format!("cannot serialize config: {e}")))
    }
}

pub fn select_name(s: Selection) -> &'static str {
    match s {
        Selection::MinL1 => "min-l1",
        Selection::Knee => "knee",
    }
}
