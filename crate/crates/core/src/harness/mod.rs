//! Evaluation functions: analytic benchmarks, the bundled classifier study
//! and the external-process protocol.

mod builtin;
mod classifier;
mod external;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use builtin::{benchmark_registry, branin, ishigami, Benchmark, BuiltinEvaluator};
pub use classifier::{bundled_dataset, classifier_accuracy, ClassifierTask, Dataset};
pub use external::{ExternalEvaluator, DEFAULT_TIMEOUT_SECS};

use crate::error::{Error, Result};
use crate::space::{Configuration, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    pub outcome: f64,
    pub aux: BTreeMap<String, f64>,
    pub status: EvalStatus,
    /// Wall-clock seconds.
    pub duration: f64,
    pub failure: Option<String>,
}

impl EvaluationResult {
    pub fn ok(outcome: f64) -> Self {
        if !outcome.is_finite() {
            return Self::failed("non-finite outcome");
        }
        Self {
            outcome,
            aux: BTreeMap::new(),
            status: EvalStatus::Ok,
            duration: 0.0,
            failure: None,
        }
    }

    pub fn failed(reason: impl Into<String>) -> Self {
        Self {
            outcome: f64::NAN,
            aux: BTreeMap::new(),
            status: EvalStatus::Failed,
            duration: 0.0,
            failure: Some(reason.into()),
        }
    }

    pub fn with_aux(mut self, name: &str, value: f64) -> Self {
        self.aux.insert(name.to_string(), value);
        self
    }

    pub fn is_ok(&self) -> bool {
        self.status == EvalStatus::Ok
    }
}

/// An evaluation function over configurations.
pub trait Evaluator: Send + Sync {
    /// `id` is unique per point within a run.
    fn evaluate(&self, id: &str, config: &Configuration) -> EvaluationResult;
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_SECS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EvaluatorSpec {
    Builtin {
        name: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        params: BTreeMap<String, f64>,
    },
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

/// Marks ok results as excluded when an auxiliary metric falls below `min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessPredicate {
    pub metric: String,
    pub min: f64,
}

impl SuccessPredicate {
    /// A missing metric counts as failing the predicate.
    pub fn accepts(&self, result: &EvaluationResult) -> bool {
        result.aux.get(&self.metric).is_some_and(|v| *v >= self.min)
    }
}

impl EvaluatorSpec {
    pub fn validate(&self, space: &SearchSpace) -> Result<()> {
        match self {
            EvaluatorSpec::Builtin { name, .. } => {
                let b = benchmark_registry()
                    .into_iter()
                    .find(|b| b.name == *name)
                    .ok_or_else(|| Error::Validation(format!("unknown builtin evaluator `{name}`")))?;
                b.check_space(space)
            }
            EvaluatorSpec::External { command, timeout_secs } => {
                if command.is_empty() {
                    return Err(Error::Validation("external command is empty".into()));
                }
                if !(*timeout_secs > 0.0) {
                    return Err(Error::Validation("timeout must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// `seed` feeds builtin substreams (e.g. the classifier split).
    pub fn build(&self, space: &SearchSpace, seed: u64) -> Result<Box<dyn Evaluator>> {
        self.validate(space)?;
        Ok(match self {
            EvaluatorSpec::Builtin { name, params } => {
                Box::new(BuiltinEvaluator::new(name, params.clone(), seed)?)
            }
            EvaluatorSpec::External { command, timeout_secs } => Box::new(ExternalEvaluator::new(
                command.clone(),
                std::time::Duration::from_secs_f64(*timeout_secs),
                space,
            )?),
        })
    }
}

/// Evaluate one configuration with a fresh evaluator.
pub fn evaluate(spec: &EvaluatorSpec, space: &SearchSpace, config: &Configuration) -> Result<EvaluationResult> {
    space.validate(config)?;
    Ok(spec.build(space, space.seed())?.evaluate("0", config))
}
