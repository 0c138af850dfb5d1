//! Covariance functions: Matérn-5/2 and RBF with optional ARD, additive
//! composition over input groups, and a rank-1 intrinsic coregionalization
//! wrapper for categorical dimensions.
//!
//! Kernels act on unit-cube coordinates, so lengthscales are dimensionless.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::space::Point;

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKernel {
    Matern52,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Shared,
    Additive,
}

/// One base kernel acting on a subset of the numeric inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub inputs: Vec<usize>,
    pub signal_variance: f64,
    /// One entry per input (ARD) or a single shared entry.
    pub lengthscales: Vec<f64>,
}

/// Coregionalization over one categorical dimension: `B = w wᵀ + diag(κ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coregion {
    pub dimension: String,
    /// Index into `Point::levels`.
    pub slot: usize,
    /// The rank-1 column `w`, one entry per level.
    pub w: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl Coregion {
    pub fn new(dimension: &str, slot: usize, n_levels: usize) -> Self {
        Self {
            dimension: dimension.to_string(),
            slot,
            w: vec![1.0; n_levels],
            kappa: vec![0.1; n_levels],
        }
    }

    pub fn n_levels(&self) -> usize {
        self.w.len()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let b = self.w[i] * self.w[j];
        if i == j {
            b + self.kappa[i]
        } else {
            b
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let l = self.n_levels();
        DMatrix::from_fn(l, l, |i, j| self.entry(i, j))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub base: BaseKernel,
    pub ard: bool,
    pub structure: Structure,
    pub components: Vec<Component>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coregional: Vec<Coregion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    SignalVariance,
    Lengthscale,
    CoregionWeight,
    CoregionKappa,
}

#[inline]
fn scaled_sq_dist(u: &[f64], v: &[f64], ls: &[f64]) -> f64 {
    if ls.len() == 1 {
        let inv = 1.0 / ls[0];
        u.iter().zip(v).map(|(a, b)| ((a - b) * inv).powi(2)).sum()
    } else {
        u.iter()
            .zip(v)
            .zip(ls)
            .map(|((a, b), l)| ((a - b) / l).powi(2))
            .sum()
    }
}

fn check_shapes(u: &[f64], v: &[f64], ls: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    if ls.len() != 1 && ls.len() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: ls.len(),
        });
    }
    Ok(())
}

#[inline]
fn matern52_r2(r2: f64) -> f64 {
    let r = r2.sqrt();
    (1.0 + SQRT5 * r + 5.0 * r2 / 3.0) * (-SQRT5 * r).exp()
}

/// σ²·(1 + √5 r + 5r²/3)·exp(−√5 r) with ARD-scaled distance r.
pub fn matern52(u: &[f64], v: &[f64], signal_variance: f64, lengthscales: &[f64]) -> Result<f64> {
    check_shapes(u, v, lengthscales)?;
    Ok(signal_variance * matern52_r2(scaled_sq_dist(u, v, lengthscales)))
}

/// σ²·exp(−r²/2) with ARD-scaled distance r.
pub fn rbf(u: &[f64], v: &[f64], signal_variance: f64, lengthscales: &[f64]) -> Result<f64> {
    check_shapes(u, v, lengthscales)?;
    Ok(signal_variance * (-0.5 * scaled_sq_dist(u, v, lengthscales)).exp())
}

impl BaseKernel {
    #[inline]
    fn profile(self, r2: f64) -> f64 {
        match self {
            BaseKernel::Matern52 => matern52_r2(r2),
            BaseKernel::Rbf => (-0.5 * r2).exp(),
        }
    }
}

impl KernelSpec {
    /// One base kernel over all `n_inputs` with unit variance and lengthscale 0.5.
    pub fn shared(base: BaseKernel, ard: bool, n_inputs: usize) -> Self {
        Self {
            base,
            ard,
            structure: Structure::Shared,
            components: vec![Component {
                inputs: (0..n_inputs).collect(),
                signal_variance: 1.0,
                lengthscales: vec![0.5; if ard { n_inputs } else { 1 }],
            }],
            coregional: Vec::new(),
        }
    }

    /// Sum of base kernels, one per input group.
    pub fn additive(base: BaseKernel, ard: bool, groups: &[Vec<usize>]) -> Self {
        Self {
            base,
            ard,
            structure: Structure::Additive,
            components: groups
                .iter()
                .map(|g| Component {
                    inputs: g.clone(),
                    signal_variance: 1.0 / groups.len() as f64,
                    lengthscales: vec![0.5; if ard { g.len() } else { 1 }],
                })
                .collect(),
            coregional: Vec::new(),
        }
    }

    pub fn with_coregion(mut self, coregion: Coregion) -> Self {
        self.coregional.push(coregion);
        self
    }

    pub fn n_inputs(&self) -> usize {
        self.components.iter().map(|c| c.inputs.len()).sum()
    }

    /// Checks positivity, the group partition and coregion shapes.
    pub fn validate(&self, n_inputs: usize, level_counts: &[usize]) -> Result<()> {
        self.validate_components(n_inputs)?;
        for c in &self.coregional {
            let l = *level_counts
                .get(c.slot)
                .ok_or_else(|| Error::Kernel(format!("coregion `{}` has no level slot", c.dimension)))?;
            if c.w.len() != l || c.kappa.len() != l {
                return Err(Error::Kernel(format!(
                    "coregion `{}` expects {l} levels",
                    c.dimension
                )));
            }
            if c.kappa.iter().any(|&k| !(k >= 0.0)) {
                return Err(Error::Kernel("kappa entries must be non-negative".into()));
            }
        }
        Ok(())
    }

    fn validate_components(&self, n_inputs: usize) -> Result<()> {
        let mut covered = vec![false; n_inputs];
        if self.structure == Structure::Shared && self.components.len() != 1 {
            return Err(Error::Kernel("shared structure has exactly one component".into()));
        }
        for c in &self.components {
            if c.inputs.is_empty() {
                return Err(Error::Kernel("kernel group with no inputs".into()));
            }
            for &i in &c.inputs {
                match covered.get_mut(i) {
                    Some(seen @ false) => *seen = true,
                    Some(true) => return Err(Error::Kernel(format!("input {i} appears in two groups"))),
                    None => return Err(Error::Kernel(format!("input {i} out of range"))),
                }
            }
            let want = if self.ard { c.inputs.len() } else { 1 };
            if c.lengthscales.len() != want {
                return Err(Error::Kernel(format!(
                    "expected {want} lengthscales, got {}",
                    c.lengthscales.len()
                )));
            }
            if !(c.signal_variance > 0.0) || c.lengthscales.iter().any(|&l| !(l > 0.0)) {
                return Err(Error::Kernel("signal variance and lengthscales must be positive".into()));
            }
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(Error::Kernel(format!("groups do not cover input {i}")));
        }
        Ok(())
    }

    #[inline]
    fn component_cov(&self, c: &Component, u: &[f64], v: &[f64]) -> f64 {
        let r2 = if c.lengthscales.len() == 1 {
            let inv = 1.0 / c.lengthscales[0];
            c.inputs.iter().map(|&i| ((u[i] - v[i]) * inv).powi(2)).sum()
        } else {
            c.inputs
                .iter()
                .zip(&c.lengthscales)
                .map(|(&i, l)| ((u[i] - v[i]) / l).powi(2))
                .sum()
        };
        c.signal_variance * self.base.profile(r2)
    }

    /// Base covariance over the numeric coordinates (shared or additive).
    #[inline]
    pub fn base_cov(&self, u: &[f64], v: &[f64]) -> f64 {
        self.components.iter().map(|c| self.component_cov(c, u, v)).sum()
    }

    /// Additive covariance; errors unless the spec declares an additive structure.
    pub fn additive_cov(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        if self.structure != Structure::Additive {
            return Err(Error::Kernel("kernel has no additive structure".into()));
        }
        self.validate_components(u.len())?;
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                found: v.len(),
            });
        }
        Ok(self.base_cov(u, v))
    }

    #[inline]
    pub fn coregion_factor(&self, a: &[usize], b: &[usize]) -> f64 {
        self.coregional
            .iter()
            .map(|c| c.entry(a[c.slot], b[c.slot]))
            .product()
    }

    /// Full covariance without shape checks; callers validate once up front.
    #[inline]
    pub fn cov(&self, p: &Point, q: &Point) -> f64 {
        let base = self.base_cov(&p.unit, &q.unit);
        if self.coregional.is_empty() {
            base
        } else {
            base * self.coregion_factor(&p.levels, &q.levels)
        }
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        let n = self.n_inputs();
        if p.unit.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.unit.len(),
            });
        }
        for c in &self.coregional {
            match p.levels.get(c.slot) {
                Some(&l) if l < c.n_levels() => {}
                Some(&l) => {
                    return Err(Error::Kernel(format!(
                        "level index {l} invalid for `{}`",
                        c.dimension
                    )))
                }
                None => {
                    return Err(Error::Kernel(format!(
                        "point has no level for `{}`",
                        c.dimension
                    )))
                }
            }
        }
        Ok(())
    }

    /// Checked ICM covariance: ∏_c B_c[l_p, l_q] · k(u, v).
    pub fn icm_cov(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(self.cov(p, q))
    }

    /// Prior variance k(x, x).
    #[inline]
    pub fn prior_variance(&self, p: &Point) -> f64 {
        self.cov(p, p)
    }

    pub fn kernel_matrix(&self, points: &[Point]) -> Result<KernelMatrix> {
        self.kernel_matrix_with(Execution::default(), points)
    }

    pub fn kernel_matrix_with(&self, exec: Execution, points: &[Point]) -> Result<KernelMatrix> {
        if points.is_empty() {
            return Err(Error::Validation("kernel matrix of an empty point list".into()));
        }
        for p in points {
            self.check_point(p)?;
        }
        let n = points.len();
        let rows = exec.map_range(n, |i| {
            (i..n).map(|j| self.cov(&points[i], &points[j])).collect::<Vec<_>>()
        });
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in rows.into_iter().enumerate() {
            for (k, v) in row.into_iter().enumerate() {
                m[(i, i + k)] = v;
                m[(i + k, i)] = v;
            }
        }
        Ok(KernelMatrix(m))
    }

    /// `rows × cols` cross-covariance.
    pub fn cross_matrix_with(&self, exec: Execution, rows: &[Point], cols: &[Point]) -> DMatrix<f64> {
        let data = exec.map(cols, |c| rows.iter().map(|r| self.cov(r, c)).collect::<Vec<_>>());
        DMatrix::from_iterator(rows.len(), cols.len(), data.into_iter().flatten())
    }

    /// Kinds of the optimizable parameters in [`Self::params`] order.
    pub fn param_kinds(&self) -> Vec<ParamKind> {
        let mut k = Vec::new();
        for c in &self.components {
            k.push(ParamKind::SignalVariance);
            k.extend(std::iter::repeat_n(ParamKind::Lengthscale, c.lengthscales.len()));
        }
        for c in &self.coregional {
            k.extend(std::iter::repeat_n(ParamKind::CoregionWeight, c.w.len()));
            k.extend(std::iter::repeat_n(ParamKind::CoregionKappa, c.kappa.len()));
        }
        k
    }

    /// Unconstrained parameter vector: logs of positive values, raw `w`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::new();
        for c in &self.components {
            p.push(c.signal_variance.ln());
            p.extend(c.lengthscales.iter().map(|l| l.ln()));
        }
        for c in &self.coregional {
            p.extend(&c.w);
            p.extend(c.kappa.iter().map(|k| k.ln()));
        }
        p
    }

    /// Inverse of [`Self::params`]; `p` must have `param_kinds().len()` entries.
    pub fn set_params(&mut self, p: &[f64]) {
        let mut it = p.iter().copied();
        let mut next = || it.next().expect("parameter vector too short");
        for c in &mut self.components {
            c.signal_variance = next().exp();
            for l in &mut c.lengthscales {
                *l = next().exp();
            }
        }
        for c in &mut self.coregional {
            for w in &mut c.w {
                *w = next();
            }
            for k in &mut c.kappa {
                *k = next().exp();
            }
        }
    }
}

/// Symmetric Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix(pub DMatrix<f64>);

impl KernelMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn is_symmetric(&self) -> bool {
        self.0 == self.0.transpose()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// All eigenvalues ≥ −10⁻⁸·trace.
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -1e-8 * self.0.trace().abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_spot_values() {
        let m = matern52(&[0.0], &[1.0], 1.0, &[1.0]).unwrap();
        assert!((m - 0.523_994_108_831_820_3).abs() < 1e-9, "{m}");
        let r = rbf(&[0.0], &[1.0], 1.0, &[1.0]).unwrap();
        assert!((r - 0.606_530_659_712_633).abs() < 1e-12);
        assert_eq!(matern52(&[0.3, 0.1], &[0.3, 0.1], 2.5, &[0.2]).unwrap(), 2.5);
        assert_eq!(rbf(&[0.3], &[0.3], 1.5, &[0.2]).unwrap(), 1.5);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        assert!(matern52(&[0.0, 1.0], &[1.0], 1.0, &[1.0]).is_err());
        assert!(rbf(&[0.0, 1.0], &[1.0, 0.0], 1.0, &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn rbf_decays_monotonically() {
        let mut last = f64::INFINITY;
        for k in 0..50 {
            let v = rbf(&[0.0], &[k as f64 * 0.05], 1.0, &[0.3]).unwrap();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn additive_single_group_equals_shared() {
        let shared = KernelSpec::shared(BaseKernel::Matern52, true, 3);
        let mut add = KernelSpec::additive(BaseKernel::Matern52, true, &[vec![0, 1, 2]]);
        add.components[0].signal_variance = 1.0;
        let (u, v) = ([0.1, 0.7, 0.4], [0.9, 0.2, 0.5]);
        assert_eq!(shared.base_cov(&u, &v), add.additive_cov(&u, &v).unwrap());
        assert!(shared.additive_cov(&u, &v).is_err());
    }

    #[test]
    fn additive_exceeds_shared_when_one_group_matches() {
        let shared = KernelSpec::shared(BaseKernel::Rbf, false, 2);
        let add = KernelSpec::additive(BaseKernel::Rbf, false, &[vec![0], vec![1]]);
        let (u, v) = ([0.3, 0.0], [0.3, 1.0]);
        // brute force: group 1 identical contributes its full variance
        let s1 = add.components[0].signal_variance;
        let far = rbf(&[0.0], &[1.0], add.components[1].signal_variance, &[0.5]).unwrap();
        let a = add.additive_cov(&u, &v).unwrap();
        assert!((a - (s1 + far)).abs() < 1e-15);
        assert!(a > shared.base_cov(&u, &v));
    }

    #[test]
    fn partition_errors() {
        let mut k = KernelSpec::additive(BaseKernel::Rbf, false, &[vec![0], vec![0]]);
        assert!(k.validate(2, &[]).is_err());
        k = KernelSpec::additive(BaseKernel::Rbf, false, &[vec![0]]);
        assert!(k.validate(2, &[]).is_err());
        k = KernelSpec::additive(BaseKernel::Rbf, false, &[vec![0], vec![]]);
        assert!(k.validate(1, &[]).is_err());
        assert!(k.additive_cov(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn icm_limits() {
        let p = |u: f64, l: usize| Point { unit: vec![u], levels: vec![l] };
        let base = KernelSpec::shared(BaseKernel::Matern52, false, 1);
        let mut c = Coregion::new("m", 0, 3);
        c.kappa = vec![0.0; 3];
        let ones = base.clone().with_coregion(c);
        for (a, b) in [(0, 1), (2, 2), (1, 0)] {
            let v = ones.icm_cov(&p(0.2, a), &p(0.6, b)).unwrap();
            assert_eq!(v, base.base_cov(&[0.2], &[0.6]));
        }
        let indep = base.clone().with_coregion(Coregion {
            dimension: "m".into(),
            slot: 0,
            w: vec![0.0; 3],
            kappa: vec![1.0; 3],
        });
        assert_eq!(indep.icm_cov(&p(0.2, 1), &p(0.6, 1)).unwrap(), base.base_cov(&[0.2], &[0.6]));
        assert_eq!(indep.icm_cov(&p(0.2, 1), &p(0.6, 2)).unwrap(), 0.0);
        assert!(indep.icm_cov(&p(0.2, 3), &p(0.6, 2)).is_err());
    }

    #[test]
    fn single_point_matrix() {
        let k = KernelSpec::shared(BaseKernel::Rbf, false, 1).with_coregion(Coregion {
            dimension: "m".into(),
            slot: 0,
            w: vec![2.0, 1.0],
            kappa: vec![0.5, 0.5],
        });
        let m = k.kernel_matrix(&[Point { unit: vec![0.4], levels: vec![0] }]).unwrap();
        assert_eq!(m.0[(0, 0)], 4.5);
        assert!(k.kernel_matrix(&[]).is_err());
    }

    #[test]
    fn params_round_trip() {
        let mut k = KernelSpec::additive(BaseKernel::Matern52, true, &[vec![0, 1], vec![2]])
            .with_coregion(Coregion::new("m", 0, 2));
        k.coregional[0].w = vec![0.3, -0.7];
        let p = k.params();
        assert_eq!(p.len(), k.param_kinds().len());
        let mut k2 = k.clone();
        k2.set_params(&vec![0.0; p.len()]);
        k2.set_params(&p);
        for (a, b) in k.params().iter().zip(k2.params()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
