//! The exploration loop: initial Sobol design, evaluate, fit, acquire,
//! repeat. State is persisted after every batch and can be resumed.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{interaction_bayes_factor, mean_variance, InteractionReport, DEFAULT_THRESHOLD};
use crate::design::{quasi_random_points, select_batch, AcquisitionSpec, BatchContext};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::harness::{EvalStatus, EvaluationResult, Evaluator, SuccessPredicate};
use crate::space::{Configuration, Point, SearchSpace};
use crate::surrogate::{fit, ModelState, ObservationSet, Status, SurrogateConfig, SurrogateModel};

/// Held-out points used for the mean-variance summary.
pub const GRID_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Stopping {
    FixedBatches(usize),
    BayesFactorConclusive {
        #[serde(default = "default_threshold")]
        threshold: f64,
        max_batches: usize,
    },
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl Stopping {
    pub fn max_batches(&self) -> usize {
        match *self {
            Stopping::FixedBatches(n) => n,
            Stopping::BayesFactorConclusive { max_batches, .. } => max_batches,
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match *self {
            Stopping::FixedBatches(_) => None,
            Stopping::BayesFactorConclusive { threshold, .. } => Some(threshold),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoopSettings {
    pub space: SearchSpace,
    pub surrogate: SurrogateConfig,
    pub acquisition: AcquisitionSpec,
    pub initial_n: usize,
    pub batch_size: usize,
    pub stopping: Stopping,
    /// Groups for the per-batch interaction test, if any.
    pub interaction: Option<Vec<Vec<String>>>,
    pub success: Option<SuccessPredicate>,
    pub seed: u64,
    /// Concurrent evaluations; 0 means one per core.
    pub workers: usize,
    /// Extra attempts for failed evaluations.
    pub retries: usize,
    pub exec: Execution,
}

impl LoopSettings {
    pub fn new(space: SearchSpace, initial_n: usize, batch_size: usize, stopping: Stopping) -> Self {
        let seed = space.seed();
        Self {
            space,
            surrogate: SurrogateConfig::default(),
            acquisition: AcquisitionSpec::ivr(),
            initial_n,
            batch_size,
            stopping,
            interaction: None,
            success: None,
            seed,
            workers: 0,
            retries: 0,
            exec: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_n < 2 {
            return Err(Error::Validation("initial_n must be at least 2".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("batch_size must be at least 1".into()));
        }
        self.acquisition.validate(self.batch_size)?;
        self.surrogate.template(&self.space)?;
        if let Stopping::BayesFactorConclusive { threshold, .. } = self.stopping {
            if !(threshold > 1.0) {
                return Err(Error::Validation("stopping threshold must exceed 1".into()));
            }
            if self.interaction.is_none() {
                return Err(Error::Validation(
                    "bayes_factor_conclusive stopping needs interaction groups".into(),
                ));
            }
        }
        if let Some(groups) = &self.interaction {
            crate::analysis::check_partition(&self.space, groups)?;
        }
        Ok(())
    }

    fn threshold(&self) -> f64 {
        self.stopping.threshold().unwrap_or(DEFAULT_THRESHOLD)
    }
}

/// One evaluated point as persisted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub batch: usize,
    pub config: Configuration,
    pub point: Point,
    pub outcome: Option<f64>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aux: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub batch: usize,
    pub n_ok: usize,
    pub n_failed: usize,
    pub n_excluded: usize,
    pub mean_grid_variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction: Option<InteractionReport>,
}

impl BatchSummary {
    pub fn line(&self) -> String {
        let var = self
            .mean_grid_variance
            .map_or("n/a".to_string(), |v| format!("{v:.6e}"));
        let mut s = format!(
            "batch {}: {} ok, {} failed, {} excluded, mean grid variance {var}",
            self.batch, self.n_ok, self.n_failed, self.n_excluded
        );
        if let Some(r) = &self.interaction {
            s.push_str(&format!(", K = {:.4e} (log K = {:.3})", r.k, r.log_k));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct LoopState {
    /// Completed acquisition rounds; the initial design is round 0.
    pub batch_index: usize,
    pub records: Vec<Record>,
    pub model: Option<SurrogateModel>,
    pub summaries: Vec<BatchSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub batch_index: usize,
    pub records: Vec<Record>,
    pub model: Option<ModelState>,
    pub summaries: Vec<BatchSummary>,
}

impl LoopState {
    pub fn observations(&self) -> ObservationSet {
        let mut obs = ObservationSet::new();
        for r in &self.records {
            obs.push(r.point.clone(), r.outcome.unwrap_or(f64::NAN), r.status);
        }
        obs
    }

    pub fn last_interaction(&self) -> Option<&InteractionReport> {
        self.summaries.last().and_then(|s| s.interaction.as_ref())
    }

    pub fn to_file(&self) -> StateFile {
        StateFile {
            batch_index: self.batch_index,
            records: self.records.clone(),
            model: self.model.as_ref().map(|m| m.state()),
            summaries: self.summaries.clone(),
        }
    }

    pub fn from_file(file: StateFile) -> Result<Self> {
        Ok(Self {
            batch_index: file.batch_index,
            records: file.records,
            model: file.model.map(SurrogateModel::from_state).transpose()?,
            summaries: file.summaries,
        })
    }

    /// True once the stopping rule is met.
    pub fn finished(&self, settings: &LoopSettings) -> bool {
        if self.batch_index >= settings.stopping.max_batches() {
            return true;
        }
        matches!(settings.stopping, Stopping::BayesFactorConclusive { .. })
            && self.last_interaction().is_some_and(|r| r.conclusive)
    }
}

/// Receives the state after every completed batch.
pub trait StateSink {
    fn save(&mut self, state: &LoopState, settings: &LoopSettings) -> Result<()>;
}

/// Discards states.
pub struct NoSink;

impl StateSink for NoSink {
    fn save(&mut self, _: &LoopState, _: &LoopSettings) -> Result<()> {
        Ok(())
    }
}

/// Runs the initial design, then acquisition rounds until the stopping rule
/// is met or `until` rounds are complete.
pub fn run_loop(
    settings: &LoopSettings,
    evaluator: &dyn Evaluator,
    sink: &mut dyn StateSink,
    until: Option<usize>,
) -> Result<LoopState> {
    let state = start(settings, evaluator, sink)?;
    resume(state, settings, evaluator, sink, until)
}

pub fn resume(
    mut state: LoopState,
    settings: &LoopSettings,
    evaluator: &dyn Evaluator,
    sink: &mut dyn StateSink,
    until: Option<usize>,
) -> Result<LoopState> {
    if state.model.is_none() {
        refit(&mut state, settings, sink)?;
    }
    while !state.finished(settings) && until.is_none_or(|u| state.batch_index < u) {
        step(&mut state, settings, evaluator, sink)?;
    }
    Ok(state)
}

/// Evaluates the initial design and fits the first model.
pub fn start(settings: &LoopSettings, evaluator: &dyn Evaluator, sink: &mut dyn StateSink) -> Result<LoopState> {
    settings.validate()?;
    let configs = settings.space.sobol_design(settings.initial_n)?;
    let mut state = LoopState {
        batch_index: 0,
        records: Vec::new(),
        model: None,
        summaries: Vec::new(),
    };
    let records = evaluate_batch(settings, evaluator, 0, configs)?;
    state.records.extend(records);
    refit(&mut state, settings, sink)?;
    Ok(state)
}

/// One acquisition round: select, evaluate, refit, persist.
pub fn step(
    state: &mut LoopState,
    settings: &LoopSettings,
    evaluator: &dyn Evaluator,
    sink: &mut dyn StateSink,
) -> Result<()> {
    let model = state
        .model
        .as_ref()
        .ok_or_else(|| Error::State("no fitted model to acquire from".into()))?;
    let batch = state.batch_index + 1;
    let ctx = BatchContext {
        seed: settings.seed,
        batch_index: batch as u64,
        exec: settings.exec,
    };
    let points = select_batch(model, &settings.space, &settings.acquisition, settings.batch_size, ctx)?;
    let configs = points
        .iter()
        .map(|p| settings.space.point_to_config(p))
        .collect::<Result<Vec<_>>>()?;
    let records = evaluate_batch(settings, evaluator, batch, configs)?;
    state.records.extend(records);
    state.batch_index = batch;
    refit(state, settings, sink)
}

fn refit(state: &mut LoopState, settings: &LoopSettings, sink: &mut dyn StateSink) -> Result<()> {
    let obs = state.observations();
    let opts = settings.surrogate.fit_options(settings.seed, settings.exec);
    let fitted = settings
        .surrogate
        .template(&settings.space)
        .and_then(|t| fit(&obs, &t, &opts));
    let batch = state.batch_index;
    let count = |s: Status| state.records.iter().filter(|r| r.status == s).count();
    let mut summary = BatchSummary {
        batch,
        n_ok: count(Status::Ok),
        n_failed: count(Status::Failed),
        n_excluded: count(Status::Excluded),
        mean_grid_variance: None,
        interaction: None,
    };
    let model = match fitted {
        Ok(m) => m,
        Err(e) => {
            state.model = None;
            state.summaries.push(summary);
            sink.save(state, settings)?;
            return Err(e);
        }
    };
    let grid = quasi_random_points(&settings.space, GRID_POINTS, settings.seed, "grid", 0)?;
    summary.mean_grid_variance = Some(mean_variance(&model, &grid, settings.exec)?);
    if let Some(groups) = &settings.interaction {
        let report = interaction_bayes_factor(
            &obs,
            &settings.space,
            groups,
            &settings.surrogate,
            &opts,
            settings.threshold(),
        );
        match report {
            Ok(r) => summary.interaction = Some(r),
            Err(e) => {
                state.model = Some(model);
                state.summaries.push(summary);
                sink.save(state, settings)?;
                return Err(e);
            }
        }
    }
    state.model = Some(model);
    state.summaries.push(summary);
    sink.save(state, settings)
}

fn evaluate_batch(
    settings: &LoopSettings,
    evaluator: &dyn Evaluator,
    batch: usize,
    configs: Vec<Configuration>,
) -> Result<Vec<Record>> {
    let items: Vec<(usize, Configuration)> = configs.into_iter().enumerate().collect();
    let run_one = |(i, config): &(usize, Configuration)| -> Result<Record> {
        let id = format!("{batch}-{i}");
        let mut result = evaluator.evaluate(&id, config);
        for _ in 0..settings.retries {
            if result.is_ok() {
                break;
            }
            result = evaluator.evaluate(&id, config);
        }
        make_record(settings, id, batch, config.clone(), result)
    };
    let results = in_pool(settings, || settings.exec.map(&items, run_one))?;
    results.into_iter().collect()
}

#[cfg(feature = "parallel")]
fn in_pool<R: Send>(settings: &LoopSettings, f: impl FnOnce() -> R + Send) -> Result<R> {
    if settings.workers == 0 || settings.exec == Execution::Sequential {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers)
        .build()
        .map_err(|e| Error::State(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn in_pool<R: Send>(_: &LoopSettings, f: impl FnOnce() -> R + Send) -> Result<R> {
    Ok(f())
}

fn make_record(
    settings: &LoopSettings,
    id: String,
    batch: usize,
    config: Configuration,
    result: EvaluationResult,
) -> Result<Record> {
    let point = settings.space.to_unit(&config)?;
    let status = match result.status {
        EvalStatus::Failed => Status::Failed,
        EvalStatus::Ok if settings.success.as_ref().is_some_and(|p| !p.accepts(&result)) => Status::Excluded,
        EvalStatus::Ok => Status::Ok,
    };
    Ok(Record {
        id,
        batch,
        config,
        point,
        outcome: result.outcome.is_finite().then_some(result.outcome),
        status,
        aux: result.aux,
        failure: result.failure,
    })
}

/// Escapes a CSV field when needed.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `observations.csv`: one column per dimension, then outcome, status, batch.
pub fn observations_csv(space: &SearchSpace, records: &[Record]) -> String {
    let mut out = String::new();
    let header: Vec<String> = space
        .dimensions()
        .iter()
        .map(|d| csv_field(&d.name))
        .chain(["outcome".into(), "status".into(), "batch".into()])
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in records {
        let mut row: Vec<String> = r.config.values.iter().map(|v| csv_field(&v.to_string())).collect();
        row.push(r.outcome.map_or(String::new(), |y| y.to_string()));
        row.push(
            match r.status {
                Status::Ok => "ok",
                Status::Failed => "failed",
                Status::Excluded => "excluded",
            }
            .into(),
        );
        row.push(r.batch.to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// A run directory: `state-<batch>.json` per batch plus `observations.csv`.
#[derive(Debug, Clone)]
pub struct RunStore {
    dir: PathBuf,
}

impl RunStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state_path(&self, batch: usize) -> PathBuf {
        self.dir.join(format!("state-{batch}.json"))
    }

    pub fn observations_path(&self) -> PathBuf {
        self.dir.join("observations.csv")
    }

    /// Batch indices of the state files present, ascending.
    pub fn batches(&self) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        if !self.dir.exists() {
            return Ok(out);
        }
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if let Some(b) = name
                .strip_prefix("state-")
                .and_then(|s| s.strip_suffix(".json"))
                .and_then(|s| s.parse().ok())
            {
                out.push(b);
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn load(&self, batch: usize) -> Result<LoopState> {
        let text = fs::read_to_string(self.state_path(batch))?;
        LoopState::from_file(serde_json::from_str(&text)?)
    }

    pub fn load_latest(&self) -> Result<LoopState> {
        let last = *self
            .batches()?
            .last()
            .ok_or_else(|| Error::State(format!("no saved state in {}", self.dir.display())))?;
        self.load(last)
    }
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

impl StateSink for RunStore {
    fn save(&mut self, state: &LoopState, settings: &LoopSettings) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let json = serde_json::to_string_pretty(&state.to_file())?;
        write_atomic(&self.state_path(state.batch_index), json.as_bytes())?;
        write_atomic(
            &self.observations_path(),
            observations_csv(&settings.space, &state.records).as_bytes(),
        )
    }
}

/// Advisory lock on a run directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub const FILE: &'static str = ".lock";

    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(Self::FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::State(format!(
                "{} is locked by another process (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::BuiltinEvaluator;
    use crate::space::{Dimension, Value};

    fn settings(batches: usize) -> LoopSettings {
        let space = SearchSpace::new(
            vec![
                Dimension::linear("u1", 0.0, 1.0).unwrap(),
                Dimension::linear("u2", 0.0, 1.0).unwrap(),
            ],
            11,
        )
        .unwrap();
        let mut s = LoopSettings::new(space, 8, 4, Stopping::FixedBatches(batches));
        s.surrogate.starts = 2;
        s.surrogate.evals_per_start = 150;
        s.acquisition.candidates = 128;
        s.acquisition.mc_points = 64;
        s
    }

    fn additive_sine() -> BuiltinEvaluator {
        BuiltinEvaluator::new("additive-sine", BTreeMap::new(), 0).unwrap()
    }

    #[test]
    fn degenerate_loop_has_initial_design_only() {
        let s = settings(0);
        let state = run_loop(&s, &additive_sine(), &mut NoSink, None).unwrap();
        assert_eq!(state.batch_index, 0);
        assert_eq!(state.records.len(), 8);
        assert!(state.model.is_some());
        assert_eq!(state.summaries.len(), 1);
    }

    #[test]
    fn observations_grow_per_batch() {
        let s = settings(2);
        let state = run_loop(&s, &additive_sine(), &mut NoSink, None).unwrap();
        assert_eq!(state.batch_index, 2);
        assert_eq!(state.records.len(), 16);
        assert!(state.records[8..12].iter().all(|r| r.batch == 1));
        assert_eq!(state.records[15].id, "2-3");
    }

    #[test]
    fn csv_layout() {
        let space = SearchSpace::new(
            vec![
                Dimension::linear("x", 0.0, 1.0).unwrap(),
                Dimension::categorical("m", ["a", "b"]).unwrap(),
            ],
            0,
        )
        .unwrap();
        let config = Configuration {
            values: vec![Value::Number(0.25), Value::Label("b".into())],
        };
        let rec = |outcome, status| Record {
            id: "0-0".into(),
            batch: 0,
            config: config.clone(),
            point: space.to_unit(&config).unwrap(),
            outcome,
            status,
            aux: BTreeMap::new(),
            failure: None,
        };
        let csv = observations_csv(&space, &[rec(Some(1.5), Status::Ok), rec(None, Status::Failed)]);
        assert_eq!(csv, "x,m,outcome,status,batch\n0.25,b,1.5,ok,0\n0.25,b,,failed,0\n");
    }

    #[test]
    fn stopping_serde() {
        let s: Stopping = serde_json::from_str(r#"{"fixed_batches": 3}"#).unwrap();
        assert_eq!(s, Stopping::FixedBatches(3));
        let s: Stopping = serde_json::from_str(r#"{"bayes_factor_conclusive": {"max_batches": 6}}"#).unwrap();
        assert_eq!(s.threshold(), Some(10.0));
        assert!(serde_json::from_str::<Stopping>(r#"{"bayes_factor_conclusive": {"max_batches": 6, "k": 1}}"#).is_err());
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let lock = RunLock::acquire(dir.path()).unwrap();
        assert!(RunLock::acquire(dir.path()).is_err());
        drop(lock);
        assert!(RunLock::acquire(dir.path()).is_ok());
    }
}
