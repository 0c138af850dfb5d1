//! Acquisition: integrated variance reduction (IVR) and upper confidence
//! bound (UCB) scoring, and greedy batch selection over Sobol proposals.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::substream;
use crate::sobol::Sobol;
use crate::space::{Point, SearchSpace};
use crate::surrogate::SurrogateModel;

const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcquisitionKind {
    Ivr,
    Ucb,
}

fn default_mc_points() -> usize {
    512
}
fn default_beta() -> f64 {
    2.0
}
fn default_candidates() -> usize {
    2048
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSpec {
    pub kind: AcquisitionKind,
    #[serde(default = "default_mc_points")]
    pub mc_points: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_candidates")]
    pub candidates: usize,
}

impl AcquisitionSpec {
    pub fn ivr() -> Self {
        Self {
            kind: AcquisitionKind::Ivr,
            mc_points: default_mc_points(),
            beta: default_beta(),
            candidates: default_candidates(),
        }
    }

    pub fn ucb(beta: f64) -> Self {
        Self {
            kind: AcquisitionKind::Ucb,
            beta,
            ..Self::ivr()
        }
    }

    pub fn validate(&self, batch_size: usize) -> Result<()> {
        if self.mc_points < 16 {
            return Err(Error::Validation("mc_points must be at least 16".into()));
        }
        if self.candidates < batch_size {
            return Err(Error::Validation(format!(
                "{} candidates cannot fill a batch of {batch_size}",
                self.candidates
            )));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::Validation("beta must be non-negative".into()));
        }
        Ok(())
    }
}

/// Quasi-random points over the unit cube with uniformly drawn levels.
pub fn quasi_random_points(space: &SearchSpace, n: usize, seed: u64, stream: &str, index: u64) -> Result<Vec<Point>> {
    let mut rng = substream(seed, stream, index);
    let mut sobol = Sobol::shifted(space.n_numeric(), &mut rng)?;
    let counts = space.level_counts();
    let mut level_rng = substream(seed, &format!("{stream}-levels"), index);
    Ok((0..n)
        .map(|_| Point {
            unit: sobol.next_point(),
            levels: counts.iter().map(|&l| level_rng.random_range(0..l)).collect(),
        })
        .collect())
}

/// Posterior quantities over a fixed Monte Carlo sample, reused across candidates.
struct IvrContext<'a> {
    model: &'a SurrogateModel,
    mc: &'a [Point],
    whitened_mc: DMatrix<f64>,
}

impl<'a> IvrContext<'a> {
    fn new(model: &'a SurrogateModel, mc: &'a [Point]) -> Self {
        Self {
            model,
            mc,
            whitened_mc: model.whiten(mc),
        }
    }

    // Mean over the sample of σ²(p; X ∪ {c}) − σ²(p; X), in outcome units.
    fn scores(&self, candidates: &[Point]) -> Vec<f64> {
        let kernel = self.model.kernel();
        let kpc = kernel.cross_matrix_with(Execution::Sequential, self.mc, candidates);
        let vc = self.model.whiten(candidates);
        let cov = kpc - self.whitened_mc.tr_mul(&vc);
        let noise = self.model.effective_noise();
        let scale2 = self.model.transform().scale.powi(2);
        let m = self.mc.len() as f64;
        candidates
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let var_c = (kernel.prior_variance(c) - vc.column(j).norm_squared()).max(0.0);
                let reduction = cov.column(j).norm_squared() / (var_c + noise);
                -scale2 * reduction / m
            })
            .collect()
    }
}

pub fn ivr_scores_with(
    exec: Execution,
    model: &SurrogateModel,
    candidates: &[Point],
    mc_sample: &[Point],
) -> Result<Vec<f64>> {
    if mc_sample.is_empty() {
        return Err(Error::Validation("IVR needs a non-empty Monte Carlo sample".into()));
    }
    for p in mc_sample.iter().chain(candidates) {
        model.kernel().check_point(p)?;
    }
    let ctx = IvrContext::new(model, mc_sample);
    let chunks: Vec<&[Point]> = candidates.chunks(CHUNK).collect();
    Ok(exec.map(&chunks, |c| ctx.scores(c)).into_iter().flatten().collect())
}

/// Integrated variance change from acquiring `candidate`; always ≤ 0.
pub fn ivr_score(model: &SurrogateModel, candidate: &Point, mc_sample: &[Point]) -> Result<f64> {
    Ok(ivr_scores_with(Execution::Sequential, model, std::slice::from_ref(candidate), mc_sample)?[0])
}

/// μ + β·σ in standardized outcome units.
pub fn ucb_scores_with(exec: Execution, model: &SurrogateModel, candidates: &[Point], beta: f64) -> Result<Vec<f64>> {
    if !(beta >= 0.0) {
        return Err(Error::Validation("beta must be non-negative".into()));
    }
    let p = model.predict_standardized_with(exec, candidates)?;
    Ok(p.mean
        .iter()
        .zip(&p.variance)
        .map(|(m, v)| m + beta * v.sqrt())
        .collect())
}

pub fn ucb_score(model: &SurrogateModel, candidate: &Point, beta: f64) -> Result<f64> {
    Ok(ucb_scores_with(Execution::Sequential, model, std::slice::from_ref(candidate), beta)?[0])
}

/// Where the proposal and integration streams come from.
#[derive(Debug, Clone, Copy)]
pub struct BatchContext {
    pub seed: u64,
    pub batch_index: u64,
    pub exec: Execution,
}

fn best_index(scores: &[f64], taken: &[bool], minimize: bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if taken[i] || !s.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, b)) => {
                if minimize {
                    s < b
                } else {
                    s > b
                }
            }
        };
        if better {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Greedy batch selection. IVR conditions on each pick before scoring the
/// next; UCB takes the top scores without repeats.
pub fn select_batch(
    model: &SurrogateModel,
    space: &SearchSpace,
    spec: &AcquisitionSpec,
    batch_size: usize,
    ctx: BatchContext,
) -> Result<Vec<Point>> {
    if batch_size == 0 {
        return Err(Error::Validation("batch size must be at least 1".into()));
    }
    spec.validate(batch_size)?;
    let candidates = quasi_random_points(space, spec.candidates, ctx.seed, "candidates", ctx.batch_index)?;
    let mut taken = vec![false; candidates.len()];
    let mut chosen = Vec::with_capacity(batch_size);
    match spec.kind {
        AcquisitionKind::Ivr => {
            let mc = quasi_random_points(space, spec.mc_points, ctx.seed, "mc", ctx.batch_index)?;
            let mut current = model.clone();
            for _ in 0..batch_size {
                let scores = ivr_scores_with(ctx.exec, &current, &candidates, &mc)?;
                let i = best_index(&scores, &taken, true)
                    .ok_or_else(|| Error::Numerical("no finite acquisition score".into()))?;
                taken[i] = true;
                chosen.push(candidates[i].clone());
                current = current.with_fantasy(std::slice::from_ref(&candidates[i]))?;
            }
        }
        AcquisitionKind::Ucb => {
            let scores = ucb_scores_with(ctx.exec, model, &candidates, spec.beta)?;
            for _ in 0..batch_size {
                let i = best_index(&scores, &taken, false)
                    .ok_or_else(|| Error::Numerical("no finite acquisition score".into()))?;
                taken[i] = true;
                chosen.push(candidates[i].clone());
            }
        }
    }
    Ok(chosen)
}
