//! Run configuration files (JSON).

use std::fs;
use std::path::Path;

use multiverse_core::design::AcquisitionSpec;
use multiverse_core::exec::Execution;
use multiverse_core::explore::{LoopSettings, Stopping};
use multiverse_core::harness::{EvaluatorSpec, SuccessPredicate};
use multiverse_core::space::{Dimension, SearchSpace};
use multiverse_core::surrogate::SurrogateConfig;
use multiverse_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    pub groups: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Free-form comments; ignored.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub name: String,
    pub seed: u64,
    pub space: Vec<Dimension>,
    pub evaluator: EvaluatorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_predicate: Option<SuccessPredicate>,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default = "AcquisitionSpec::ivr")]
    pub acquisition: AcquisitionSpec,
    pub initial_n: usize,
    pub batch_size: usize,
    pub stopping: Stopping,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction: Option<InteractionConfig>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn search_space(&self) -> Result<SearchSpace> {
        SearchSpace::new(self.space.clone(), self.seed)
    }

    /// Checks every invariant that can be checked without evaluating.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(Error::Validation(format!("invalid run name `{}`", self.name)));
        }
        let space = self.search_space()?;
        self.evaluator.validate(&space)?;
        self.settings(Execution::default())?.validate()
    }

    pub fn settings(&self, exec: Execution) -> Result<LoopSettings> {
        let mut s = LoopSettings::new(self.search_space()?, self.initial_n, self.batch_size, self.stopping);
        s.surrogate = self.surrogate.clone();
        s.acquisition = self.acquisition.clone();
        s.interaction = self.interaction.as_ref().map(|i| i.groups.clone());
        s.success = self.success_predicate.clone();
        s.seed = self.seed;
        s.exec = exec;
        Ok(s)
    }

    /// The configuration written by `init`.
    pub fn template(name: &str) -> Self {
        Self {
            notes: vec![
                "Template run over the additive-sine benchmark, y = sin(3 u1) + u2.".into(),
                "space: kind is continuous-linear, continuous-log10 or integer-log2 (with lower/upper) or categorical (with levels).".into(),
                "evaluator: {\"builtin\": {\"name\": ...}} or {\"external\": {\"command\": [...], \"timeout_secs\": 3600}}.".into(),
                "surrogate.structure: \"shared\" or {\"additive\": [[names], [names]]}.".into(),
                "acquisition.kind: \"ivr\" (exploration) or \"ucb\" (optimization, uses beta).".into(),
                "stopping: {\"fixed_batches\": n} or {\"bayes_factor_conclusive\": {\"threshold\": 10, \"max_batches\": n}}.".into(),
                "interaction.groups: two groups of numeric dimensions compared by Bayes factor after each batch.".into(),
            ],
            name: name.to_string(),
            seed: 1,
            space: vec![
                Dimension::linear("u1", 0.0, 1.0).expect("valid bounds"),
                Dimension::linear("u2", 0.0, 1.0).expect("valid bounds"),
            ],
            evaluator: EvaluatorSpec::Builtin {
                name: "additive-sine".into(),
                params: Default::default(),
            },
            success_predicate: None,
            surrogate: SurrogateConfig::default(),
            acquisition: AcquisitionSpec {
                candidates: 512,
                mc_points: 256,
                ..AcquisitionSpec::ivr()
            },
            initial_n: 8,
            batch_size: 4,
            stopping: Stopping::FixedBatches(2),
            interaction: Some(InteractionConfig {
                groups: vec![vec!["u1".into()], vec!["u2".into()]],
            }),
        }
    }
}
