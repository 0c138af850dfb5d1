//! Gaussian-process regression with a zero-mean prior on standardized
//! outcomes and homoscedastic Gaussian noise.
//!
//! Hyperparameters are chosen by type-II maximum likelihood using
//! multi-start Nelder–Mead over log-parameters.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernels::{BaseKernel, Coregion, KernelSpec, ParamKind};
use crate::optimize::NelderMead;
use crate::rng::substream;
use crate::sobol::{Sobol, MAX_DIM};
use crate::space::{Point, SearchSpace};

pub const MIN_NOISE: f64 = 1e-10;
const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-4;
const LN_2PI: f64 = 1.837_877_066_409_345_5;
const QUERY_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
    Excluded,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opt = Vec::<Option<f64>>::deserialize(d)?;
        Ok(opt.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

/// Evaluated points, their outcomes and statuses. Failed rows carry NaN.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub points: Vec<Point>,
    #[serde(with = "nan_as_null")]
    pub outcomes: Vec<f64>,
    pub status: Vec<Status>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// All rows with status ok.
    pub fn from_ok(points: Vec<Point>, outcomes: Vec<f64>) -> Self {
        let status = vec![Status::Ok; points.len()];
        Self {
            points,
            outcomes,
            status,
        }
    }

    pub fn push(&mut self, point: Point, outcome: f64, status: Status) {
        self.points.push(point);
        self.outcomes.push(outcome);
        self.status.push(status);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_ok(&self) -> usize {
        self.status.iter().filter(|s| **s == Status::Ok).count()
    }

    pub fn ok_rows(&self) -> (Vec<Point>, Vec<f64>) {
        self.points
            .iter()
            .zip(&self.outcomes)
            .zip(&self.status)
            .filter(|(_, s)| **s == Status::Ok)
            .map(|((p, y), _)| (p.clone(), *y))
            .unzip()
    }

    fn check(&self) -> Result<()> {
        if self.points.len() != self.outcomes.len() || self.points.len() != self.status.len() {
            return Err(Error::Validation("observation columns differ in length".into()));
        }
        Ok(())
    }
}

/// Affine outcome standardization `z = (y − mean) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTransform {
    pub mean: f64,
    pub scale: f64,
}

impl OutcomeTransform {
    pub fn identity() -> Self {
        Self {
            mean: 0.0,
            scale: 1.0,
        }
    }

    /// Zero mean, unit (population) variance; constant data keeps scale 1.
    pub fn standardizing(y: &[f64]) -> Self {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        let scale = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
        Self { mean, scale }
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.mean) / self.scale
    }

    pub fn inverse(&self, z: f64) -> f64 {
        self.mean + self.scale * z
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub starts: usize,
    pub evals_per_start: usize,
    pub standardize: bool,
    /// Seeds start coordinates beyond the Sobol dimension limit.
    pub seed: u64,
    pub exec: Execution,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            evals_per_start: 500,
            standardize: true,
            seed: 0,
            exec: Execution::default(),
        }
    }
}

/// Per-start log evidence before and after local search.
#[derive(Debug, Clone)]
pub struct FitTrace {
    pub start_log_evidence: Vec<f64>,
    pub final_log_evidence: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Param {
    Kernel(ParamKind),
    Noise,
}

impl Param {
    // start box (lo, hi) and search clamp (lo, hi), both in parameter units
    fn start_box(self) -> (f64, f64) {
        let ln10 = std::f64::consts::LN_10;
        match self {
            Param::Kernel(ParamKind::Lengthscale) => (-2.0 * ln10, ln10),
            Param::Kernel(ParamKind::SignalVariance) => (-2.0 * ln10, 2.0 * ln10),
            Param::Kernel(ParamKind::CoregionWeight) => (-1.0, 1.0),
            Param::Kernel(ParamKind::CoregionKappa) => (-2.0 * ln10, 0.0),
            Param::Noise => (-6.0 * ln10, 0.0),
        }
    }

    fn clamp_range(self) -> (f64, f64) {
        match self {
            Param::Kernel(ParamKind::Lengthscale) => (1e-3f64.ln(), 1e3f64.ln()),
            Param::Kernel(ParamKind::SignalVariance) => (1e-4f64.ln(), 1e4f64.ln()),
            Param::Kernel(ParamKind::CoregionWeight) => (-10.0, 10.0),
            Param::Kernel(ParamKind::CoregionKappa) => (1e-8f64.ln(), 1e2f64.ln()),
            Param::Noise => (MIN_NOISE.ln(), 10f64.ln()),
        }
    }
}

/// Lower Cholesky factor of `k + (noise + jitter)·I` with jitter escalation.
fn factor(mut k: DMatrix<f64>, noise: f64) -> Result<(DMatrix<f64>, f64)> {
    let n = k.nrows();
    for i in 0..n {
        k[(i, i)] += noise;
    }
    let mean_diag = (k.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * 1.000_001 {
        let jitter = rel * mean_diag;
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(kj) {
            return Ok((c.unpack(), jitter));
        }
        rel *= 10.0;
    }
    Err(Error::Numerical(
        "covariance factorization failed after jitter escalation".into(),
    ))
}

// Same summation order as `factor`, so a stored jitter reproduces the factor bit for bit.
fn factor_exact(mut k: DMatrix<f64>, noise: f64, jitter: f64) -> Result<DMatrix<f64>> {
    for i in 0..k.nrows() {
        k[(i, i)] += noise;
    }
    for i in 0..k.nrows() {
        k[(i, i)] += jitter;
    }
    Cholesky::new(k)
        .map(Cholesky::unpack)
        .ok_or_else(|| Error::Numerical("stored covariance is not positive definite".into()))
}

/// −½zᵀα − Σ log Lᵢᵢ − (n/2) log 2π.
fn lml_from_factor(l: &DMatrix<f64>, z: &DVector<f64>) -> (f64, DVector<f64>) {
    let w = l.solve_lower_triangular(z).expect("non-singular factor");
    let alpha = l.tr_solve_lower_triangular(&w).expect("non-singular factor");
    let n = z.len() as f64;
    let logdet_half: f64 = l.diagonal().iter().map(|d| d.ln()).sum();
    (-0.5 * w.norm_squared() - logdet_half - 0.5 * n * LN_2PI, alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// A fitted GP. Immutable; share freely across threads.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    kernel: KernelSpec,
    noise_variance: f64,
    jitter: f64,
    transform: OutcomeTransform,
    points: Vec<Point>,
    outcomes: Vec<f64>,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    log_evidence: f64,
}

/// Serializable form of a model; loading refactorizes the same matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub kernel: KernelSpec,
    pub noise_variance: f64,
    pub jitter: f64,
    pub transform: OutcomeTransform,
    pub points: Vec<Point>,
    pub outcomes: Vec<f64>,
    pub log_evidence: f64,
}

impl SurrogateModel {
    /// Conditions on the ok rows of `obs` with fixed hyperparameters.
    pub fn condition(
        obs: &ObservationSet,
        kernel: &KernelSpec,
        noise_variance: f64,
        standardize: bool,
    ) -> Result<Self> {
        obs.check()?;
        let (points, y) = obs.ok_rows();
        if points.is_empty() {
            return Err(Error::InsufficientData("no ok observations".into()));
        }
        let transform = if standardize {
            OutcomeTransform::standardizing(&y)
        } else {
            OutcomeTransform::identity()
        };
        Self::build(kernel.clone(), noise_variance, transform, points, y, None)
    }

    fn build(
        kernel: KernelSpec,
        noise_variance: f64,
        transform: OutcomeTransform,
        points: Vec<Point>,
        outcomes: Vec<f64>,
        jitter: Option<f64>,
    ) -> Result<Self> {
        if !(noise_variance >= MIN_NOISE) {
            return Err(Error::Validation(format!(
                "noise variance must be at least {MIN_NOISE}"
            )));
        }
        for p in &points {
            kernel.check_point(p)?;
        }
        if outcomes.iter().any(|y| !y.is_finite()) {
            return Err(Error::Validation("outcomes must be finite".into()));
        }
        let k = kernel.kernel_matrix_with(Execution::Sequential, &points)?.into_inner();
        let (chol, jitter) = match jitter {
            Some(j) => (factor_exact(k, noise_variance, j)?, j),
            None => factor(k, noise_variance)?,
        };
        let z = DVector::from_iterator(outcomes.len(), outcomes.iter().map(|y| transform.forward(*y)));
        let (lml, alpha) = lml_from_factor(&chol, &z);
        let log_evidence = lml - outcomes.len() as f64 * transform.scale.ln();
        Ok(Self {
            kernel,
            noise_variance,
            jitter,
            transform,
            points,
            outcomes,
            chol,
            alpha,
            log_evidence,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Noise plus jitter: the diagonal term actually factorized.
    pub fn effective_noise(&self) -> f64 {
        self.noise_variance + self.jitter
    }

    pub fn transform(&self) -> OutcomeTransform {
        self.transform
    }

    pub fn training_points(&self) -> &[Point] {
        &self.points
    }

    pub fn training_outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Log marginal likelihood of the training outcomes (original units).
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_evidence
    }

    pub fn n_train(&self) -> usize {
        self.points.len()
    }

    /// L⁻¹·k(X, q) for each query, as columns.
    pub fn whiten(&self, queries: &[Point]) -> DMatrix<f64> {
        let k = self
            .kernel
            .cross_matrix_with(Execution::Sequential, &self.points, queries);
        self.chol.solve_lower_triangular(&k).expect("non-singular factor")
    }

    /// Posterior mean and latent variance in standardized units.
    pub fn predict_standardized(&self, queries: &[Point]) -> Result<Prediction> {
        self.predict_standardized_with(Execution::default(), queries)
    }

    pub fn predict_standardized_with(&self, exec: Execution, queries: &[Point]) -> Result<Prediction> {
        for q in queries {
            self.kernel.check_point(q)?;
        }
        let chunks: Vec<&[Point]> = queries.chunks(QUERY_CHUNK).collect();
        let parts = exec.map(&chunks, |chunk| {
            let k = self.kernel.cross_matrix_with(Execution::Sequential, &self.points, chunk);
            let mean = k.tr_mul(&self.alpha);
            let v = self.chol.solve_lower_triangular(&k).expect("non-singular factor");
            let var: Vec<f64> = chunk
                .iter()
                .zip(v.column_iter())
                .map(|(q, col)| (self.kernel.prior_variance(q) - col.norm_squared()).max(0.0))
                .collect();
            (mean.iter().copied().collect::<Vec<_>>(), var)
        });
        let mut out = Prediction {
            mean: Vec::with_capacity(queries.len()),
            variance: Vec::with_capacity(queries.len()),
        };
        for (m, v) in parts {
            out.mean.extend(m);
            out.variance.extend(v);
        }
        Ok(out)
    }

    /// Posterior mean and latent variance in outcome units.
    pub fn predict(&self, queries: &[Point]) -> Result<Prediction> {
        self.predict_with(Execution::default(), queries)
    }

    pub fn predict_with(&self, exec: Execution, queries: &[Point]) -> Result<Prediction> {
        let mut p = self.predict_standardized_with(exec, queries)?;
        let t = self.transform;
        for m in &mut p.mean {
            *m = t.inverse(*m);
        }
        for v in &mut p.variance {
            *v *= t.scale * t.scale;
        }
        Ok(p)
    }

    /// Appends pseudo-observations at their posterior means. Hyperparameters,
    /// jitter and transform stay fixed; the factor grows row by row.
    pub fn with_fantasy(&self, extra: &[Point]) -> Result<Self> {
        let mut model = self.clone();
        for p in extra {
            self.kernel.check_point(p)?;
            let z = model.predict_standardized_with(Execution::Sequential, std::slice::from_ref(p))?.mean[0];
            let l = model.whiten(std::slice::from_ref(p));
            let l = l.column(0);
            let d2 = self.kernel.prior_variance(p) + self.effective_noise() - l.norm_squared();
            if !(d2 > 0.0) {
                return Err(Error::Numerical("fantasy update lost positive definiteness".into()));
            }
            let n = model.points.len();
            let mut chol = DMatrix::zeros(n + 1, n + 1);
            chol.view_mut((0, 0), (n, n)).copy_from(&model.chol);
            for j in 0..n {
                chol[(n, j)] = l[j];
            }
            chol[(n, n)] = d2.sqrt();
            model.chol = chol;
            model.points.push(p.clone());
            model.outcomes.push(self.transform.inverse(z));
            model.refresh_weights();
        }
        Ok(model)
    }

    /// Conditions on the ok rows of `obs` keeping this model's kernel, noise,
    /// jitter and outcome transform.
    pub fn refit_fixed(&self, obs: &ObservationSet) -> Result<Self> {
        obs.check()?;
        let (points, y) = obs.ok_rows();
        if points.is_empty() {
            return Err(Error::InsufficientData("no ok observations".into()));
        }
        Self::build(
            self.kernel.clone(),
            self.noise_variance,
            self.transform,
            points,
            y,
            Some(self.jitter),
        )
    }

    fn refresh_weights(&mut self) {
        let z = DVector::from_iterator(
            self.outcomes.len(),
            self.outcomes.iter().map(|y| self.transform.forward(*y)),
        );
        let (lml, alpha) = lml_from_factor(&self.chol, &z);
        self.alpha = alpha;
        self.log_evidence = lml - self.outcomes.len() as f64 * self.transform.scale.ln();
    }

    pub fn state(&self) -> ModelState {
        ModelState {
            kernel: self.kernel.clone(),
            noise_variance: self.noise_variance,
            jitter: self.jitter,
            transform: self.transform,
            points: self.points.clone(),
            outcomes: self.outcomes.clone(),
            log_evidence: self.log_evidence,
        }
    }

    pub fn from_state(state: ModelState) -> Result<Self> {
        Self::build(
            state.kernel,
            state.noise_variance,
            state.transform,
            state.points,
            state.outcomes,
            Some(state.jitter),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.state())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_state(serde_json::from_str(text)?)
    }
}

fn default_starts() -> usize {
    8
}
fn default_evals() -> usize {
    500
}

/// Kernel structure as declared by name in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureDecl {
    Shared,
    /// Groups of numeric dimension names; must partition the numeric inputs.
    Additive(Vec<Vec<String>>),
}

/// Surrogate settings: base kernel, ARD flag, structure and optimizer budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    pub base: BaseKernel,
    pub ard: bool,
    pub structure: StructureDecl,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_evals")]
    pub evals_per_start: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            base: BaseKernel::Matern52,
            ard: true,
            structure: StructureDecl::Shared,
            starts: default_starts(),
            evals_per_start: default_evals(),
        }
    }
}

impl SurrogateConfig {
    pub fn with_structure(&self, structure: StructureDecl) -> Self {
        Self {
            structure,
            ..self.clone()
        }
    }

    /// Kernel template over `space`: the declared numeric structure wrapped in
    /// one coregion per categorical dimension.
    pub fn template(&self, space: &SearchSpace) -> Result<KernelSpec> {
        let n = space.n_numeric();
        let kernel = match &self.structure {
            StructureDecl::Shared => KernelSpec::shared(self.base, self.ard, n),
            StructureDecl::Additive(groups) => {
                let slots = groups
                    .iter()
                    .map(|g| {
                        g.iter()
                            .map(|name| {
                                space.unit_slot(name).ok_or_else(|| {
                                    Error::Validation(format!("`{name}` is not a numeric dimension"))
                                })
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                KernelSpec::additive(self.base, self.ard, &slots)
            }
        };
        kernel.validate(n, &[]).map_err(|e| Error::Validation(e.to_string()))?;
        let counts = space.level_counts();
        let kernel = space
            .categorical_dims()
            .into_iter()
            .enumerate()
            .fold(kernel, |k, (slot, i)| {
                k.with_coregion(Coregion::new(&space.dimensions()[i].name, slot, counts[slot]))
            });
        kernel.validate(n, &counts)?;
        Ok(kernel)
    }

    pub fn fit_options(&self, seed: u64, exec: Execution) -> FitOptions {
        FitOptions {
            starts: self.starts,
            evals_per_start: self.evals_per_start,
            standardize: true,
            seed,
            exec,
        }
    }
}

fn param_layout(template: &KernelSpec) -> Vec<Param> {
    let mut p: Vec<Param> = template.param_kinds().into_iter().map(Param::Kernel).collect();
    p.push(Param::Noise);
    p
}

fn start_points(layout: &[Param], opts: &FitOptions) -> Vec<Vec<f64>> {
    use rand::Rng;
    let d = layout.len();
    let sobol_dim = d.min(MAX_DIM);
    let mut sobol = Sobol::new(sobol_dim).expect("dimension in range");
    let mut rng = substream(opts.seed, "fit-starts", d as u64);
    (0..opts.starts)
        .map(|_| {
            let mut u = sobol.next_point();
            u.extend((sobol_dim..d).map(|_| rng.random::<f64>()));
            layout
                .iter()
                .zip(u)
                .map(|(p, t)| {
                    let (lo, hi) = p.start_box();
                    lo + t * (hi - lo)
                })
                .collect()
        })
        .collect()
}

/// Negative log marginal likelihood in standardized units (+∞ on failure).
fn objective(
    template: &KernelSpec,
    layout: &[Param],
    points: &[Point],
    z: &DVector<f64>,
    raw: &[f64],
) -> (f64, KernelSpec, f64) {
    let x: Vec<f64> = raw
        .iter()
        .zip(layout)
        .map(|(v, p)| {
            let (lo, hi) = p.clamp_range();
            v.clamp(lo, hi)
        })
        .collect();
    let mut kernel = template.clone();
    kernel.set_params(&x[..x.len() - 1]);
    let noise = x[x.len() - 1].exp().max(MIN_NOISE);
    let value = kernel
        .kernel_matrix_with(Execution::Sequential, points)
        .and_then(|k| factor(k.into_inner(), noise))
        .map(|(l, _)| -lml_from_factor(&l, z).0)
        .unwrap_or(f64::INFINITY);
    (value, kernel, noise)
}

/// Type-II maximum-likelihood fit over the ok rows of `obs`.
pub fn fit(obs: &ObservationSet, template: &KernelSpec, opts: &FitOptions) -> Result<SurrogateModel> {
    fit_traced(obs, template, opts).map(|(m, _)| m)
}

pub fn fit_traced(
    obs: &ObservationSet,
    template: &KernelSpec,
    opts: &FitOptions,
) -> Result<(SurrogateModel, FitTrace)> {
    obs.check()?;
    let (points, y) = obs.ok_rows();
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "fitting needs at least 2 ok observations, got {}",
            points.len()
        )));
    }
    if opts.starts == 0 {
        return Err(Error::Validation("at least one optimizer start required".into()));
    }
    for p in &points {
        template.check_point(p)?;
    }
    let transform = if opts.standardize {
        OutcomeTransform::standardizing(&y)
    } else {
        OutcomeTransform::identity()
    };
    let z = DVector::from_iterator(y.len(), y.iter().map(|v| transform.forward(*v)));
    let layout = param_layout(template);
    let starts = start_points(&layout, opts);
    let nm = NelderMead {
        max_evals: opts.evals_per_start,
        ..Default::default()
    };
    let jac = y.len() as f64 * transform.scale.ln();
    let results = opts.exec.map(&starts, |x0| {
        let start = objective(template, &layout, &points, &z, x0).0;
        let m = nm.minimize(|x| objective(template, &layout, &points, &z, x).0, x0);
        (start, m)
    });
    let trace = FitTrace {
        start_log_evidence: results.iter().map(|(s, _)| -s - jac).collect(),
        final_log_evidence: results.iter().map(|(_, m)| -m.value - jac).collect(),
    };
    let best = results
        .iter()
        .enumerate()
        .filter(|(_, (_, m))| m.value.is_finite())
        .min_by(|a, b| a.1 .1.value.total_cmp(&b.1 .1.value).then(a.0.cmp(&b.0)))
        .map(|(_, (_, m))| m)
        .ok_or_else(|| Error::Numerical("no optimizer start produced a valid factorization".into()))?;
    let (_, kernel, noise) = objective(template, &layout, &points, &z, &best.x);
    let model = SurrogateModel::build(kernel, noise, transform, points, y, None)?;
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64) -> Point {
        Point::numeric(vec![x])
    }

    #[test]
    fn single_point_closed_form() {
        let mut k = KernelSpec::shared(BaseKernel::Rbf, false, 1);
        k.components[0].lengthscales = vec![0.3];
        let obs = ObservationSet::from_ok(vec![pt(0.2)], vec![1.7]);
        let noise = 0.05;
        let m = SurrogateModel::condition(&obs, &k, noise, false).unwrap();
        let xs = 0.55;
        let kx = rbf_val(0.2, xs, 0.3);
        let expect = kx * 1.7 / (1.0 + m.effective_noise());
        let got = m.predict(&[pt(xs)]).unwrap().mean[0];
        assert!((got - expect).abs() < 1e-14, "{got} {expect}");
    }

    fn rbf_val(a: f64, b: f64, l: f64) -> f64 {
        (-0.5 * ((a - b) / l).powi(2)).exp()
    }

    #[test]
    fn univariate_evidence() {
        let k = KernelSpec::shared(BaseKernel::Matern52, false, 1);
        let obs = ObservationSet::from_ok(vec![pt(0.4)], vec![0.0]);
        let m = SurrogateModel::condition(&obs, &k, MIN_NOISE, false).unwrap();
        assert!((m.log_marginal_likelihood() + 0.918_938_533_204_672_7).abs() < 1e-7);
        let mut k2 = k.clone();
        k2.components[0].signal_variance = 2.0;
        let obs = ObservationSet::from_ok(vec![pt(0.4)], vec![0.8]);
        let m = SurrogateModel::condition(&obs, &k2, 0.5, false).unwrap();
        let v = 2.5 + m.jitter();
        let expect = -0.64 / (2.0 * v) - 0.5 * (2.0 * std::f64::consts::PI * v).ln();
        assert!((m.log_marginal_likelihood() - expect).abs() < 1e-12);
    }

    #[test]
    fn constant_outcomes_predict_constant() {
        let obs = ObservationSet::from_ok(vec![pt(0.1), pt(0.5), pt(0.9)], vec![3.25; 3]);
        let k = KernelSpec::shared(BaseKernel::Matern52, true, 1);
        let m = fit(&obs, &k, &FitOptions { evals_per_start: 60, ..Default::default() }).unwrap();
        for q in [0.0, 0.33, 0.77] {
            assert!((m.predict(&[pt(q)]).unwrap().mean[0] - 3.25).abs() < 1e-6);
        }
    }

    #[test]
    fn too_few_observations() {
        let obs = ObservationSet::from_ok(vec![pt(0.1)], vec![1.0]);
        let k = KernelSpec::shared(BaseKernel::Matern52, true, 1);
        assert!(matches!(fit(&obs, &k, &FitOptions::default()), Err(Error::InsufficientData(_))));
        let mut obs = ObservationSet::from_ok(vec![pt(0.1), pt(0.3)], vec![1.0, 2.0]);
        obs.status[1] = Status::Failed;
        assert!(fit(&obs, &k, &FitOptions::default()).is_err());
    }

    #[test]
    fn fantasy_matches_refit() {
        let mut k = KernelSpec::shared(BaseKernel::Matern52, false, 1);
        k.components[0].lengthscales = vec![0.2];
        let obs = ObservationSet::from_ok(vec![pt(0.1), pt(0.4), pt(0.8)], vec![0.3, -0.2, 1.1]);
        let m = SurrogateModel::condition(&obs, &k, 1e-3, true).unwrap();
        let f = m.with_fantasy(&[pt(0.6), pt(0.25)]).unwrap();
        let mut big = obs.clone();
        big.push(pt(0.6), 0.0, Status::Ok);
        big.push(pt(0.25), 0.0, Status::Ok);
        // fixed jitter and transform: rebuild through the state path
        let mut st = f.state();
        st.outcomes = f.training_outcomes().to_vec();
        let refit = SurrogateModel::from_state(st).unwrap();
        let q: Vec<Point> = (0..21).map(|i| pt(i as f64 / 20.0)).collect();
        let a = f.predict(&q).unwrap();
        let b = refit.predict(&q).unwrap();
        for (x, y) in a.variance.iter().zip(&b.variance) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn state_round_trip_reproduces_predictions() {
        let mut k = KernelSpec::shared(BaseKernel::Matern52, true, 2);
        k.components[0].lengthscales = vec![0.3, 0.6];
        let obs = ObservationSet::from_ok(
            vec![
                Point::numeric(vec![0.1, 0.2]),
                Point::numeric(vec![0.7, 0.4]),
                Point::numeric(vec![0.5, 0.9]),
            ],
            vec![1.0, 0.5, -0.25],
        );
        let m = SurrogateModel::condition(&obs, &k, 0.01, true).unwrap();
        let back = SurrogateModel::from_json(&m.to_json().unwrap()).unwrap();
        let q = vec![Point::numeric(vec![0.3, 0.3]), Point::numeric(vec![0.95, 0.05])];
        let (a, b) = (m.predict(&q).unwrap(), back.predict(&q).unwrap());
        for i in 0..2 {
            assert!((a.mean[i] - b.mean[i]).abs() <= 1e-10);
            assert!((a.variance[i] - b.variance[i]).abs() <= 1e-10);
        }
        assert_eq!(m.log_marginal_likelihood(), back.log_marginal_likelihood());
    }

    #[test]
    fn observation_serde_keeps_failed_rows() {
        let mut obs = ObservationSet::new();
        obs.push(pt(0.1), 1.0, Status::Ok);
        obs.push(pt(0.2), f64::NAN, Status::Failed);
        let text = serde_json::to_string(&obs).unwrap();
        let back: ObservationSet = serde_json::from_str(&text).unwrap();
        assert_eq!(back.status, obs.status);
        assert!(back.outcomes[1].is_nan());
    }

    #[test]
    fn rejects_incompatible_query() {
        let k = KernelSpec::shared(BaseKernel::Matern52, false, 1);
        let obs = ObservationSet::from_ok(vec![pt(0.1)], vec![1.0]);
        let m = SurrogateModel::condition(&obs, &k, 0.1, false).unwrap();
        assert!(m.predict(&[Point::numeric(vec![0.1, 0.2])]).is_err());
    }
}
