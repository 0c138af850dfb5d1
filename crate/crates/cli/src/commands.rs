//! Subcommand implementations. Each writes its human-readable output to
//! `out` and its files under the run directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use multiverse_core::analysis::{
    coregional_correlations, interaction_bayes_factor, prediction_grid, sobol_indices, sobol_indices_of,
    InteractionReport, SensitivityReport, DEFAULT_THRESHOLD,
};
use multiverse_core::exec::Execution;
use multiverse_core::explore::{self, LoopSettings, LoopState, RunLock, RunStore, StateSink};
use multiverse_core::harness::Evaluator;
use multiverse_core::space::{Point, SearchSpace, Value};
use multiverse_core::surrogate::{Status, SurrogateModel};
use multiverse_core::{Error, Result};
use serde::Serialize;

use crate::config::RunConfig;
use crate::svg::{self, Field, Marker};

/// Environment variable naming the directory that holds `runs/`.
pub const HOME_ENV: &str = "MULTIVERSE_HOME";
pub const CONFIG_FILE: &str = "config.json";

pub fn home() -> PathBuf {
    std::env::var_os(HOME_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

pub fn run_dir_for(root: &Path, name: &str) -> PathBuf {
    root.join("runs").join(name)
}

fn io<T>(r: std::io::Result<T>) -> Result<T> {
    r.map_err(Error::Io)
}

/// Writes `<root>/<name>.json` and creates `<root>/runs/<name>/`.
pub fn cmd_init(root: &Path, name: &str, out: &mut dyn Write) -> Result<PathBuf> {
    let config = RunConfig::template(name);
    config.validate()?;
    let dir = run_dir_for(root, name);
    let path = root.join(format!("{name}.json"));
    if dir.exists() || path.exists() {
        return Err(Error::Validation(format!("run `{name}` already exists")));
    }
    io(fs::create_dir_all(&dir))?;
    io(fs::write(&path, config.to_json()))?;
    io(writeln!(out, "wrote {} and {}/", path.display(), dir.display()))?;
    Ok(path)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub run_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub retries: Option<usize>,
    /// Stop after this many acquisition rounds even if the rule is unmet.
    pub until_batch: Option<usize>,
}

struct PrintingSink<'a> {
    store: RunStore,
    out: &'a mut dyn Write,
}

impl StateSink for PrintingSink<'_> {
    fn save(&mut self, state: &LoopState, settings: &LoopSettings) -> Result<()> {
        self.store.save(state, settings)?;
        if let Some(s) = state.summaries.last() {
            io(writeln!(self.out, "{}", s.line()))?;
        }
        Ok(())
    }
}

fn apply(settings: &mut LoopSettings, opts: &RunOptions) {
    if let Some(w) = opts.workers {
        settings.workers = w;
    }
    if let Some(r) = opts.retries {
        settings.retries = r;
    }
}

fn report_end(state: &LoopState, settings: &LoopSettings, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let status = if state.finished(settings) { "complete" } else { "paused" };
    io(writeln!(
        out,
        "run {status} after batch {}: {} observations in {}",
        state.batch_index,
        state.records.len(),
        dir.display()
    ))
}

pub fn cmd_run(root: &Path, config_path: &Path, opts: &RunOptions, out: &mut dyn Write) -> Result<LoopState> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    config.validate()?;
    let space = config.search_space()?;
    let evaluator = config.evaluator.build(&space, config.seed)?;
    let dir = opts.run_dir.clone().unwrap_or_else(|| run_dir_for(root, &config.name));
    let _lock = RunLock::acquire(&dir)?;
    let store = RunStore::new(&dir);
    if !store.batches()?.is_empty() {
        return Err(Error::State(format!(
            "{} already holds a run; use `resume`",
            dir.display()
        )));
    }
    io(fs::write(dir.join(CONFIG_FILE), config.to_json()))?;
    let mut settings = config.settings(Execution::default())?;
    apply(&mut settings, opts);
    let mut sink = PrintingSink { store, out };
    let state = explore::run_loop(&settings, evaluator.as_ref(), &mut sink, opts.until_batch)?;
    report_end(&state, &settings, &dir, sink.out)?;
    Ok(state)
}

pub fn cmd_resume(dir: &Path, opts: &RunOptions, out: &mut dyn Write) -> Result<LoopState> {
    let config = load_run_config(dir)?;
    config.validate()?;
    let space = config.search_space()?;
    let evaluator = config.evaluator.build(&space, config.seed)?;
    let _lock = RunLock::acquire(dir)?;
    let store = RunStore::new(dir);
    let state = store.load_latest()?;
    let mut settings = config.settings(Execution::default())?;
    apply(&mut settings, opts);
    let mut sink = PrintingSink { store, out };
    let state = explore::resume(state, &settings, evaluator.as_ref(), &mut sink, opts.until_batch)?;
    report_end(&state, &settings, dir, sink.out)?;
    Ok(state)
}

pub fn load_run_config(dir: &Path) -> Result<RunConfig> {
    let path = dir.join(CONFIG_FILE);
    if !path.exists() {
        return Err(Error::State(format!("{} has no {CONFIG_FILE}", dir.display())));
    }
    RunConfig::load(&path)
}

/// A saved run opened read-only for analysis.
pub struct SavedRun {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub space: SearchSpace,
    pub state: LoopState,
}

impl SavedRun {
    pub fn open(dir: &Path) -> Result<Self> {
        let config = load_run_config(dir)?;
        let space = config.search_space()?;
        let state = RunStore::new(dir).load_latest()?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            space,
            state,
        })
    }

    pub fn model(&self) -> Result<&SurrogateModel> {
        self.state
            .model
            .as_ref()
            .ok_or_else(|| Error::State("run has no fitted model".into()))
    }

    fn write_json<T: Serialize>(&self, file: &str, value: &T) -> Result<PathBuf> {
        let path = self.dir.join(file);
        io(fs::write(&path, serde_json::to_string_pretty(value)? + "\n"))?;
        Ok(path)
    }
}

/// Parses `a,b;c` into `[[a, b], [c]]`.
pub fn parse_groups(text: &str) -> Vec<Vec<String>> {
    text.split(';')
        .map(|g| g.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        .collect()
}

pub fn cmd_interaction(dir: &Path, groups: Option<&str>, out: &mut dyn Write) -> Result<InteractionReport> {
    let run = SavedRun::open(dir)?;
    run.model()?;
    let groups = match groups {
        Some(g) => parse_groups(g),
        None => run
            .config
            .interaction
            .as_ref()
            .map(|i| i.groups.clone())
            .ok_or_else(|| Error::Validation("no interaction groups declared; pass --groups".into()))?,
    };
    let threshold = run.config.stopping.threshold().unwrap_or(DEFAULT_THRESHOLD);
    let opts = run.config.surrogate.fit_options(run.config.seed, Execution::default());
    let report = interaction_bayes_factor(
        &run.state.observations(),
        &run.space,
        &groups,
        &run.config.surrogate,
        &opts,
        threshold,
    )?;
    let path = run.write_json("interaction.json", &report)?;
    let names: Vec<String> = report.groups.iter().map(|g| format!("{{{}}}", g.join(", "))).collect();
    let verdict = if report.favours_additive() {
        "additive (no interaction)"
    } else {
        "shared (interaction)"
    };
    let rows = [
        ("groups", names.join(" + ")),
        ("log evidence, additive", format!("{:.6}", report.log_evidence_additive)),
        ("log evidence, shared", format!("{:.6}", report.log_evidence_shared)),
        ("log K", format!("{:.6}", report.log_k)),
        ("K", format!("{:.6e}", report.k)),
        ("favours", verdict.to_string()),
        (
            "conclusive",
            format!("{} (K0 = {})", if report.conclusive { "yes" } else { "no" }, report.threshold),
        ),
    ];
    for (k, v) in rows {
        io(writeln!(out, "{k:<24}{v}"))?;
    }
    io(writeln!(out, "wrote {}", path.display()))?;
    Ok(report)
}

#[derive(Serialize)]
struct SensitivityOutput<'a> {
    mode: &'static str,
    #[serde(flatten)]
    report: &'a SensitivityReport,
}

pub fn cmd_sensitivity(dir: &Path, n_base: usize, exact: bool, out: &mut dyn Write) -> Result<SensitivityReport> {
    let run = SavedRun::open(dir)?;
    let exec = Execution::default();
    let seed = run.config.seed;
    let report = if exact {
        let evaluator = run.config.evaluator.build(&run.space, seed)?;
        sobol_indices_of(&run.space, n_base, seed, |pts| exact_values(&run.space, evaluator.as_ref(), pts, exec))?
    } else {
        sobol_indices(run.model()?, &run.space, n_base, seed, exec)?
    };
    let mode = if exact { "exact-function" } else { "posterior-mean" };
    let path = run.write_json("sensitivity.json", &SensitivityOutput { mode, report: &report })?;
    io(writeln!(
        out,
        "{mode} indices, {} with n_base = {}, {} bootstrap resamples",
        report.estimator, report.sample_size, report.resamples
    ))?;
    io(writeln!(out, "{:<16}{:>10}{:>10}{:>10}{:>10}", "dimension", "S", "std", "S_T", "std"))?;
    for e in &report.effects {
        io(writeln!(
            out,
            "{:<16}{:>10.4}{:>10.4}{:>10.4}{:>10.4}",
            e.dimension, e.main, e.main_std, e.total, e.total_std
        ))?;
    }
    io(writeln!(out, "wrote {}", path.display()))?;
    Ok(report)
}

fn exact_values(space: &SearchSpace, evaluator: &dyn Evaluator, pts: &[Point], exec: Execution) -> Result<Vec<f64>> {
    let results = exec.map_range(pts.len(), |i| -> Result<f64> {
        let config = space.point_to_config(&pts[i])?;
        let r = evaluator.evaluate(&format!("sa-{i}"), &config);
        if r.is_ok() {
            Ok(r.outcome)
        } else {
            Err(Error::Evaluator(format!(
                "exact evaluation failed: {}",
                r.failure.unwrap_or_default()
            )))
        }
    });
    results.into_iter().collect()
}

pub fn cmd_correlations(dir: &Path, out: &mut dyn Write) -> Result<()> {
    let run = SavedRun::open(dir)?;
    let report = coregional_correlations(run.model()?)?;
    let path = run.write_json("correlations.json", &report)?;
    for c in &report.dimensions {
        let levels = run
            .space
            .index_of(&c.dimension)
            .and_then(|i| run.space.dimensions()[i].levels())
            .map(|l| l.to_vec())
            .unwrap_or_else(|| (0..c.matrix.len()).map(|i| i.to_string()).collect());
        let width = levels.iter().map(|l| l.len()).max().unwrap_or(1).max(8) + 2;
        io(writeln!(out, "correlations across `{}`", c.dimension))?;
        let mut header = format!("{:width$}", "");
        for l in &levels {
            header.push_str(&format!("{l:>width$}"));
        }
        io(writeln!(out, "{header}"))?;
        for (l, row) in levels.iter().zip(&c.matrix) {
            let mut line = format!("{l:<width$}");
            for v in row {
                line.push_str(&format!("{v:>width$.4}"));
            }
            io(writeln!(out, "{line}"))?;
        }
    }
    io(writeln!(out, "wrote {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    pub free: Option<[String; 2]>,
    pub fixed: Vec<String>,
    pub resolution: usize,
}

/// Parses `dim=value` assignments against the space.
pub fn parse_fixed(space: &SearchSpace, items: &[String]) -> Result<BTreeMap<String, Value>> {
    let mut out = BTreeMap::new();
    for item in items {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("--fix expects dim=value, got `{item}`")))?;
        let dim = space
            .index_of(name.trim())
            .map(|i| &space.dimensions()[i])
            .ok_or_else(|| Error::Validation(format!("unknown dimension `{name}`")))?;
        out.insert(dim.name.clone(), dim.parse_value(value.trim())?);
    }
    Ok(out)
}

pub fn cmd_grid(dir: &Path, opts: &GridOptions, out: &mut dyn Write) -> Result<PathBuf> {
    let run = SavedRun::open(dir)?;
    let model = run.model()?;
    let numeric = run.space.numeric_dims();
    let free = match &opts.free {
        Some(f) => f.clone(),
        None if numeric.len() == 2 => {
            let d = run.space.dimensions();
            [d[numeric[0]].name.clone(), d[numeric[1]].name.clone()]
        }
        None => {
            return Err(Error::Validation(format!(
                "space has {} numeric dimensions; pass --free-dims a,b",
                numeric.len()
            )))
        }
    };
    let fixed = parse_fixed(&run.space, &opts.fixed)?;
    let grid = prediction_grid(
        model,
        &run.space,
        [&free[0], &free[1]],
        &fixed,
        opts.resolution,
        Execution::default(),
    )?;
    let dim = |name: &str| &run.space.dimensions()[run.space.index_of(name).expect("free dimension")];
    let (xs, ys) = (run.space.unit_slot(&free[0]).unwrap(), run.space.unit_slot(&free[1]).unwrap());
    let markers: Vec<Marker> = run
        .state
        .records
        .iter()
        .map(|r| Marker {
            x: r.point.unit[xs],
            y: r.point.unit[ys],
            ok: r.status == Status::Ok,
        })
        .collect();
    let csv = dir.join("grid.csv");
    io(fs::write(&csv, grid.to_csv()))?;
    for (field, file, label) in [
        (Field::Mean, "mean.svg", "posterior mean"),
        (Field::Variance, "variance.svg", "posterior variance"),
    ] {
        let doc = svg::render(&grid, field, dim(&free[0]), dim(&free[1]), &markers, &format!("{}: {label}", run.config.name));
        io(fs::write(dir.join(file), doc))?;
    }
    io(writeln!(
        out,
        "wrote {}, mean.svg and variance.svg ({}×{} over {} and {})",
        csv.display(),
        opts.resolution,
        opts.resolution,
        free[0],
        free[1]
    ))?;
    Ok(csv)
}
