//! Post-hoc analysis of a fitted surrogate: Bayes-factor interaction tests,
//! Saltelli sensitivity indices, coregional correlations and prediction grids.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernels::KernelSpec;
use crate::rng::substream;
use crate::sobol::{Sobol, MAX_DIM};
use crate::space::{DimensionKind, Point, SearchSpace, Value};
use crate::surrogate::{fit, FitOptions, ObservationSet, StructureDecl, SurrogateConfig, SurrogateModel};

pub const DEFAULT_THRESHOLD: f64 = 10.0;
pub const MIN_BASE_SAMPLES: usize = 256;
pub const BOOTSTRAP_RESAMPLES: usize = 50;
const MIN_VARIANCE: f64 = 1e-12;

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Bayes factor of an additive split against a shared kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionReport {
    /// `null` in JSON when the factor overflows; `log_k` stays finite.
    #[serde(rename = "K", with = "inf_as_null")]
    pub k: f64,
    pub log_k: f64,
    pub log_evidence_additive: f64,
    pub log_evidence_shared: f64,
    pub groups: Vec<Vec<String>>,
    pub threshold: f64,
    pub conclusive: bool,
}

impl InteractionReport {
    pub fn from_evidence(additive: f64, shared: f64, groups: Vec<Vec<String>>, threshold: f64) -> Self {
        let log_k = additive - shared;
        Self {
            k: log_k.exp(),
            log_k,
            log_evidence_additive: additive,
            log_evidence_shared: shared,
            groups,
            threshold,
            conclusive: log_k.abs() > threshold.ln(),
        }
    }

    /// True when the data favour the additive (non-interacting) model.
    pub fn favours_additive(&self) -> bool {
        self.log_k > 0.0
    }
}

/// Fits both templates on the same data and options; returns the two log
/// evidences as (additive, shared).
pub fn compare_evidence(
    obs: &ObservationSet,
    additive: &KernelSpec,
    shared: &KernelSpec,
    opts: &FitOptions,
) -> Result<(f64, f64)> {
    let (a, s) = opts.exec.join(|| fit(obs, additive, opts), || fit(obs, shared, opts));
    Ok((a?.log_marginal_likelihood(), s?.log_marginal_likelihood()))
}

pub fn interaction_bayes_factor(
    obs: &ObservationSet,
    space: &SearchSpace,
    groups: &[Vec<String>],
    config: &SurrogateConfig,
    opts: &FitOptions,
    threshold: f64,
) -> Result<InteractionReport> {
    if space.n_numeric() < 2 {
        return Err(Error::Validation(
            "interaction test needs at least 2 numeric dimensions".into(),
        ));
    }
    check_partition(space, groups)?;
    if !(threshold > 1.0) {
        return Err(Error::Validation("threshold must exceed 1".into()));
    }
    let additive = config
        .with_structure(StructureDecl::Additive(groups.to_vec()))
        .template(space)?;
    let shared = config.with_structure(StructureDecl::Shared).template(space)?;
    let (a, s) = compare_evidence(obs, &additive, &shared, opts)?;
    Ok(InteractionReport::from_evidence(a, s, groups.to_vec(), threshold))
}

/// Checks that `groups` is two non-empty sets partitioning the numeric
/// dimensions of `space`.
pub fn check_partition(space: &SearchSpace, groups: &[Vec<String>]) -> Result<()> {
    if groups.len() != 2 {
        return Err(Error::Validation(format!(
            "interaction groups must be exactly 2, found {}",
            groups.len()
        )));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::Validation("interaction groups must be non-empty".into()));
    }
    let mut seen = vec![false; space.n_numeric()];
    for name in groups.iter().flatten() {
        let slot = space
            .unit_slot(name)
            .ok_or_else(|| Error::Validation(format!("`{name}` is not a numeric dimension")))?;
        if std::mem::replace(&mut seen[slot], true) {
            return Err(Error::Validation(format!("`{name}` appears in both groups")));
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let name = &space.dimensions()[space.numeric_dims()[missing]].name;
        return Err(Error::Validation(format!("`{name}` is not in any group")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub dimension: String,
    pub main: f64,
    pub main_std: f64,
    pub total: f64,
    pub total_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub effects: Vec<EffectEstimate>,
    pub sample_size: usize,
    pub estimator: String,
    pub resamples: usize,
    pub variance: f64,
}

impl SensitivityReport {
    pub fn effect(&self, dimension: &str) -> Option<&EffectEstimate> {
        self.effects.iter().find(|e| e.dimension == dimension)
    }
}

/// Saltelli indices of the posterior mean.
pub fn sobol_indices(
    model: &SurrogateModel,
    space: &SearchSpace,
    n_base: usize,
    seed: u64,
    exec: Execution,
) -> Result<SensitivityReport> {
    sobol_indices_of(space, n_base, seed, |pts| Ok(model.predict_with(exec, pts)?.mean))
}

/// Saltelli indices of an arbitrary batch function over `space`.
///
/// `f` receives all `n_base·(d + 2)` points at once. Categorical
/// dimensions are sampled uniformly over their levels.
pub fn sobol_indices_of<F>(space: &SearchSpace, n_base: usize, seed: u64, f: F) -> Result<SensitivityReport>
where
    F: Fn(&[Point]) -> Result<Vec<f64>>,
{
    if n_base < MIN_BASE_SAMPLES {
        return Err(Error::Validation(format!(
            "n_base must be at least {MIN_BASE_SAMPLES}"
        )));
    }
    let dims = space.dimensions();
    let d = dims.len();
    if 2 * d > MAX_DIM {
        return Err(Error::Validation(format!(
            "sensitivity supports at most {} dimensions",
            MAX_DIM / 2
        )));
    }
    let mut rng = substream(seed, "sensitivity", 0);
    let rows = Sobol::shifted(2 * d, &mut rng)?.take_points(n_base);
    let a: Vec<&[f64]> = rows.iter().map(|r| &r[..d]).collect();
    let b: Vec<&[f64]> = rows.iter().map(|r| &r[d..]).collect();

    let mut points = Vec::with_capacity(n_base * (d + 2));
    points.extend(a.iter().map(|r| to_point(space, r)));
    points.extend(b.iter().map(|r| to_point(space, r)));
    let mut mixed = vec![0.0; d];
    for i in 0..d {
        for j in 0..n_base {
            mixed.copy_from_slice(a[j]);
            mixed[i] = b[j][i];
            points.push(to_point(space, &mixed));
        }
    }
    let y = f(&points)?;
    if y.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite function value in sensitivity sample".into()));
    }
    // Centre on the A/B sample mean.
    let centre = y[..2 * n_base].iter().sum::<f64>() / (2 * n_base) as f64;
    let y: Vec<f64> = y.iter().map(|v| v - centre).collect();
    let fa = &y[..n_base];
    let fb = &y[n_base..2 * n_base];
    let fab: Vec<&[f64]> = (0..d).map(|i| &y[(2 + i) * n_base..(3 + i) * n_base]).collect();

    let all: Vec<usize> = (0..n_base).collect();
    let (variance, point) = estimate(fa, fb, &fab, &all);
    if !(variance >= MIN_VARIANCE) {
        return Err(Error::Numerical(format!(
            "constant surface: output variance {variance:.3e} below {MIN_VARIANCE:e}"
        )));
    }

    let mut boot = substream(seed, "bootstrap", 0);
    let mut idx = vec![0; n_base];
    let mut draws = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for k in idx.iter_mut() {
            *k = boot.random_range(0..n_base);
        }
        draws.push(estimate(fa, fb, &fab, &idx).1);
    }

    let effects = dims
        .iter()
        .enumerate()
        .map(|(i, dim)| {
            let mains: Vec<f64> = draws.iter().map(|e| e[i].0).collect();
            let totals: Vec<f64> = draws.iter().map(|e| e[i].1).collect();
            EffectEstimate {
                dimension: dim.name.clone(),
                main: point[i].0,
                main_std: std_dev(&mains),
                total: point[i].1,
                total_std: std_dev(&totals),
            }
        })
        .collect();
    Ok(SensitivityReport {
        effects,
        sample_size: n_base,
        estimator: "saltelli-2010 main / jansen total".into(),
        resamples: BOOTSTRAP_RESAMPLES,
        variance,
    })
}

fn to_point(space: &SearchSpace, row: &[f64]) -> Point {
    let mut p = Point {
        unit: Vec::with_capacity(space.n_numeric()),
        levels: Vec::new(),
    };
    for (dim, &u) in space.dimensions().iter().zip(row) {
        match &dim.kind {
            DimensionKind::Categorical { levels } => {
                let l = levels.len();
                p.levels.push(((u * l as f64) as usize).min(l - 1));
            }
            _ => p.unit.push(u),
        }
    }
    p
}

/// Variance and per-dimension (main, total) estimates over rows `idx`.
fn estimate(fa: &[f64], fb: &[f64], fab: &[&[f64]], idx: &[usize]) -> (f64, Vec<(f64, f64)>) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&j| fa[j] + fb[j]).sum::<f64>() / (2.0 * n);
    let var = idx
        .iter()
        .map(|&j| (fa[j] - mean).powi(2) + (fb[j] - mean).powi(2))
        .sum::<f64>()
        / (2.0 * n);
    let effects = fab
        .iter()
        .map(|fi| {
            let mut main = 0.0;
            let mut total = 0.0;
            for &j in idx {
                main += fb[j] * (fi[j] - fa[j]);
                total += (fa[j] - fi[j]).powi(2);
            }
            (main / n / var, total / (2.0 * n) / var)
        })
        .collect();
    (var, effects)
}

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoregionCorrelation {
    pub dimension: String,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub dimensions: Vec<CoregionCorrelation>,
}

pub fn coregional_correlations(model: &SurrogateModel) -> Result<CorrelationReport> {
    kernel_correlations(model.kernel())
}

pub fn kernel_correlations(kernel: &KernelSpec) -> Result<CorrelationReport> {
    if kernel.coregional.is_empty() {
        return Err(Error::Validation("no coregional dimensions".into()));
    }
    let dimensions = kernel
        .coregional
        .iter()
        .map(|c| {
            let l = c.n_levels();
            let diag: Vec<f64> = (0..l).map(|i| c.entry(i, i)).collect();
            if let Some(i) = diag.iter().position(|v| !(*v > 0.0)) {
                return Err(Error::Numerical(format!(
                    "zero diagonal entry {i} in coregion `{}`",
                    c.dimension
                )));
            }
            let matrix = (0..l)
                .map(|i| {
                    (0..l)
                        .map(|j| {
                            if i == j {
                                1.0
                            } else {
                                (c.entry(i, j) / (diag[i] * diag[j]).sqrt()).clamp(-1.0, 1.0)
                            }
                        })
                        .collect()
                })
                .collect();
            Ok(CoregionCorrelation {
                dimension: c.dimension.clone(),
                matrix,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CorrelationReport { dimensions })
}

/// Axis of a prediction grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub log_scale: bool,
    pub unit: Vec<f64>,
    pub native: Vec<f64>,
}

/// Posterior mean and variance on a `resolution × resolution` grid over two
/// numeric dimensions. Cell `(i, j)` lies at `x.native[i]`, `y.native[j]`
/// and is stored at index `j * resolution + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionGrid {
    pub x: GridAxis,
    pub y: GridAxis,
    pub fixed: BTreeMap<String, Value>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl PredictionGrid {
    pub fn resolution(&self) -> usize {
        self.x.unit.len()
    }

    pub fn mean_at(&self, i: usize, j: usize) -> f64 {
        self.mean[j * self.resolution() + i]
    }

    pub fn variance_at(&self, i: usize, j: usize) -> f64 {
        self.variance[j * self.resolution() + i]
    }

    pub fn to_csv(&self) -> String {
        let r = self.resolution();
        let mut out = String::from("x1,x2,mean,variance\n");
        for j in 0..r {
            for i in 0..r {
                let k = j * r + i;
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    self.x.native[i], self.y.native[j], self.mean[k], self.variance[k]
                );
            }
        }
        out
    }
}

/// The grid's points in `j * resolution + i` order.
pub fn grid_points(
    space: &SearchSpace,
    free: [&str; 2],
    fixed: &BTreeMap<String, Value>,
    resolution: usize,
) -> Result<Vec<Point>> {
    if resolution < 2 {
        return Err(Error::Validation("resolution must be at least 2".into()));
    }
    let slots = free_slots(space, free, fixed)?;
    let mut base = Point {
        unit: vec![0.5; space.n_numeric()],
        levels: vec![0; space.categorical_dims().len()],
    };
    for (name, value) in fixed {
        let dim = space
            .index_of(name)
            .map(|i| &space.dimensions()[i])
            .ok_or_else(|| Error::Validation(format!("unknown fixed dimension `{name}`")))?;
        match (value, &dim.kind, space.unit_slot(name), space.level_slot(name)) {
            (Value::Number(x), _, Some(s), _) => base.unit[s] = dim.to_unit(*x)?,
            (Value::Label(v), DimensionKind::Categorical { levels }, _, Some(s)) => {
                base.levels[s] = levels.iter().position(|l| l == v).ok_or_else(|| {
                    Error::dimension(name, format!("unknown level `{v}`"))
                })?;
            }
            _ => return Err(Error::dimension(name, format!("invalid value `{value}`"))),
        }
    }
    let step = 1.0 / (resolution - 1) as f64;
    let mut points = Vec::with_capacity(resolution * resolution);
    for j in 0..resolution {
        for i in 0..resolution {
            let mut p = base.clone();
            p.unit[slots[0]] = i as f64 * step;
            p.unit[slots[1]] = j as f64 * step;
            points.push(p);
        }
    }
    Ok(points)
}

fn free_slots(space: &SearchSpace, free: [&str; 2], fixed: &BTreeMap<String, Value>) -> Result<[usize; 2]> {
    if free[0] == free[1] {
        return Err(Error::Validation("free dimensions must differ".into()));
    }
    let mut slots = [0; 2];
    for (k, name) in free.iter().enumerate() {
        slots[k] = space
            .unit_slot(name)
            .ok_or_else(|| Error::Validation(format!("`{name}` is not a numeric dimension")))?;
        if fixed.contains_key(*name) {
            return Err(Error::Validation(format!("`{name}` is both free and fixed")));
        }
    }
    Ok(slots)
}

pub fn prediction_grid(
    model: &SurrogateModel,
    space: &SearchSpace,
    free: [&str; 2],
    fixed: &BTreeMap<String, Value>,
    resolution: usize,
    exec: Execution,
) -> Result<PredictionGrid> {
    let points = grid_points(space, free, fixed, resolution)?;
    let pred = model.predict_with(exec, &points)?;
    let step = 1.0 / (resolution - 1) as f64;
    let axis = |name: &str| {
        let dim = &space.dimensions()[space.index_of(name).expect("checked free dimension")];
        let unit: Vec<f64> = (0..resolution).map(|i| i as f64 * step).collect();
        GridAxis {
            name: name.to_string(),
            log_scale: dim.is_log_scaled(),
            native: unit.iter().map(|&u| dim.native_at(u)).collect(),
            unit,
        }
    };
    Ok(PredictionGrid {
        x: axis(free[0]),
        y: axis(free[1]),
        fixed: fixed.clone(),
        mean: pred.mean,
        variance: pred.variance,
    })
}

/// Mean posterior variance over `points`, in outcome units.
pub fn mean_variance(model: &SurrogateModel, points: &[Point], exec: Execution) -> Result<f64> {
    let v = model.predict_with(exec, points)?.variance;
    Ok(v.iter().sum::<f64>() / v.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{BaseKernel, Coregion};
    use crate::space::Dimension;

    fn unit_space(d: usize) -> SearchSpace {
        let dims = (1..=d)
            .map(|i| Dimension::linear(&format!("u{i}"), 0.0, 1.0).unwrap())
            .collect();
        SearchSpace::new(dims, 1).unwrap()
    }

    fn with_coregion(w: Vec<f64>, kappa: Vec<f64>) -> KernelSpec {
        let mut c = Coregion::new("m", 0, w.len());
        c.w = w;
        c.kappa = kappa;
        KernelSpec::shared(BaseKernel::Rbf, false, 1).with_coregion(c)
    }

    #[test]
    fn correlation_hand_cases() {
        let all_ones = kernel_correlations(&with_coregion(vec![1.0, 1.0], vec![0.0, 0.0])).unwrap();
        assert_eq!(all_ones.dimensions[0].matrix, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let anti = kernel_correlations(&with_coregion(vec![1.0, -1.0], vec![0.0, 0.0])).unwrap();
        assert_eq!(anti.dimensions[0].matrix[0][1], -1.0);
        let mixed = kernel_correlations(&with_coregion(vec![1.0, 0.5], vec![0.1, 0.1])).unwrap();
        let c = mixed.dimensions[0].matrix[0][1];
        assert!((c - 0.5 / (1.1f64 * 0.35).sqrt()).abs() < 1e-12);
        assert!((c - 0.8058).abs() < 1e-4);
    }

    #[test]
    fn correlations_require_coregions() {
        let k = KernelSpec::shared(BaseKernel::Rbf, false, 2);
        let err = kernel_correlations(&k).unwrap_err();
        assert!(err.to_string().contains("no coregional dimensions"));
    }

    #[test]
    fn zero_diagonal_is_rejected() {
        let k = with_coregion(vec![0.0, 1.0], vec![0.0, 0.0]);
        assert!(matches!(kernel_correlations(&k), Err(Error::Numerical(_))));
    }

    #[test]
    fn report_k_matches_evidences() {
        let r = InteractionReport::from_evidence(-3.25, -5.5, vec![], DEFAULT_THRESHOLD);
        let k = (r.log_evidence_additive - r.log_evidence_shared).exp();
        assert!((r.k - k).abs() <= 1e-10 * k);
        assert!(!r.conclusive);
        assert!(r.favours_additive());
        let big = InteractionReport::from_evidence(1000.0, 0.0, vec![], DEFAULT_THRESHOLD);
        let json = serde_json::to_string(&big).unwrap();
        assert!(json.contains("\"K\":null"));
        let back: InteractionReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, big);
    }

    #[test]
    fn partition_checks() {
        let s = unit_space(3);
        let g = |v: &[&[&str]]| -> Vec<Vec<String>> {
            v.iter().map(|x| x.iter().map(|n| n.to_string()).collect()).collect()
        };
        assert!(check_partition(&s, &g(&[&["u1"], &["u2", "u3"]])).is_ok());
        assert!(check_partition(&s, &g(&[&["u1"], &["u2"]])).is_err());
        assert!(check_partition(&s, &g(&[&["u1", "u2"], &["u2", "u3"]])).is_err());
        assert!(check_partition(&s, &g(&[&[], &["u1", "u2", "u3"]])).is_err());
        assert!(check_partition(&s, &g(&[&["u1", "u2", "u3"]])).is_err());
    }

    #[test]
    fn one_numeric_dimension_is_rejected() {
        let s = unit_space(1);
        let obs = ObservationSet::new();
        let groups = vec![vec!["u1".to_string()], vec![]];
        let err = interaction_bayes_factor(
            &obs,
            &s,
            &groups,
            &SurrogateConfig::default(),
            &FitOptions::default(),
            DEFAULT_THRESHOLD,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn single_active_input() {
        let s = unit_space(2);
        let r = sobol_indices_of(&s, 1024, 3, |pts| Ok(pts.iter().map(|p| p.unit[0]).collect())).unwrap();
        assert!((r.effects[0].main - 1.0).abs() < 0.02);
        assert!(r.effects[1].main.abs() < 0.02);
        assert!(r.effects[1].total.abs() < 0.02);
    }

    #[test]
    fn additive_surface_has_no_interaction() {
        let s = unit_space(2);
        let r = sobol_indices_of(&s, 1024, 4, |pts| Ok(pts.iter().map(|p| p.unit[0] + p.unit[1]).collect()))
            .unwrap();
        for e in &r.effects {
            assert!((e.total - e.main).abs() < 0.03, "{e:?}");
            assert!(e.main_std > 0.0 && e.total_std > 0.0);
        }
    }

    #[test]
    fn constant_surface_is_an_error() {
        let s = unit_space(2);
        let err = sobol_indices_of(&s, 256, 0, |pts| Ok(vec![2.5; pts.len()])).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        assert!(sobol_indices_of(&s, 128, 0, |pts| Ok(vec![0.0; pts.len()])).is_err());
    }

    #[test]
    fn categorical_inputs_are_sampled() {
        let dims = vec![
            Dimension::linear("u", 0.0, 1.0).unwrap(),
            Dimension::categorical("m", ["a", "b"]).unwrap(),
        ];
        let s = SearchSpace::new(dims, 0).unwrap();
        let r = sobol_indices_of(&s, 512, 5, |pts| Ok(pts.iter().map(|p| p.levels[0] as f64).collect()))
            .unwrap();
        assert!((r.effect("m").unwrap().main - 1.0).abs() < 0.05);
        assert!(r.effect("u").unwrap().total.abs() < 1e-12);
    }

    #[test]
    fn grid_layout_and_csv() {
        let dims = vec![
            Dimension::log10("c", 1e-3, 1e3).unwrap(),
            Dimension::linear("x", 0.0, 2.0).unwrap(),
            Dimension::linear("z", 0.0, 1.0).unwrap(),
        ];
        let s = SearchSpace::new(dims, 0).unwrap();
        let mut fixed = BTreeMap::new();
        fixed.insert("z".to_string(), Value::Number(0.25));
        let pts = grid_points(&s, ["c", "x"], &fixed, 3).unwrap();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[1].unit, vec![0.5, 0.0, 0.25]);
        assert_eq!(pts[3].unit, vec![0.0, 0.5, 0.25]);
        assert!(grid_points(&s, ["c", "c"], &fixed, 3).is_err());
        assert!(grid_points(&s, ["c", "z"], &fixed, 3).is_err());
        assert!(grid_points(&s, ["c", "x"], &fixed, 1).is_err());
    }
}
