//! Search-space declaration and the native ⇄ unit-cube mapping.
//!
//! Numeric dimensions map onto coordinates of the unit cube (affinely in
//! native, log10 or log2 units). Categorical dimensions stay outside the cube
//! and travel as level indices.

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::sobol::{Sobol, MAX_DIM};

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum DimensionKind {
    ContinuousLinear { lower: f64, upper: f64 },
    ContinuousLog10 { lower: f64, upper: f64 },
    IntegerLog2 { lower: f64, upper: f64 },
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum KindTag {
    ContinuousLinear,
    ContinuousLog10,
    IntegerLog2,
    Categorical,
}

/// Wire form of a dimension as it appears in run configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DimensionDecl {
    name: String,
    kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<String>>,
}

/// One researcher decision in the multiverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DimensionDecl", into = "DimensionDecl")]
pub struct Dimension {
    pub name: String,
    pub kind: DimensionKind,
}

fn is_power_of_two(x: f64) -> bool {
    x > 0.0 && x.is_finite() && 2f64.powi(x.log2().round() as i32) == x
}

impl Dimension {
    pub fn new(name: impl Into<String>, kind: DimensionKind) -> Result<Self> {
        let d = Self {
            name: name.into(),
            kind,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn linear(name: &str, lower: f64, upper: f64) -> Result<Self> {
        Self::new(name, DimensionKind::ContinuousLinear { lower, upper })
    }

    pub fn log10(name: &str, lower: f64, upper: f64) -> Result<Self> {
        Self::new(name, DimensionKind::ContinuousLog10 { lower, upper })
    }

    pub fn log2_int(name: &str, lower: f64, upper: f64) -> Result<Self> {
        Self::new(name, DimensionKind::IntegerLog2 { lower, upper })
    }

    pub fn categorical<S: Into<String>>(name: &str, levels: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::new(
            name,
            DimensionKind::Categorical {
                levels: levels.into_iter().map(Into::into).collect(),
            },
        )
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Validation("dimension name is empty".into()));
        }
        let bad = |r: &str| Err(Error::dimension(&self.name, r));
        match &self.kind {
            DimensionKind::ContinuousLinear { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return bad("requires finite lower < upper");
                }
            }
            DimensionKind::ContinuousLog10 { lower, upper } => {
                if !(upper.is_finite() && *lower > 0.0 && lower < upper) {
                    return bad("log10 dimension requires 0 < lower < upper");
                }
            }
            DimensionKind::IntegerLog2 { lower, upper } => {
                if !(is_power_of_two(*lower) && is_power_of_two(*upper)) {
                    return bad("integer-log2 bounds must be exact powers of two");
                }
                if lower >= upper {
                    return bad("requires lower < upper");
                }
            }
            DimensionKind::Categorical { levels } => {
                if levels.is_empty() {
                    return bad("categorical dimension needs at least one level");
                }
                let mut seen = HashSet::new();
                if !levels.iter().all(|l| seen.insert(l)) {
                    return bad("categorical levels must be distinct");
                }
            }
        }
        Ok(())
    }

    pub fn is_numeric(&self) -> bool {
        !matches!(self.kind, DimensionKind::Categorical { .. })
    }

    pub fn is_log_scaled(&self) -> bool {
        matches!(
            self.kind,
            DimensionKind::ContinuousLog10 { .. } | DimensionKind::IntegerLog2 { .. }
        )
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.kind {
            DimensionKind::Categorical { levels } => Some(levels),
            _ => None,
        }
    }

    // (transform(lower), transform(upper), transform)
    fn affine(&self) -> Option<(f64, f64, fn(f64) -> f64, fn(f64) -> f64)> {
        match self.kind {
            DimensionKind::ContinuousLinear { lower, upper } => {
                Some((lower, upper, |x| x, |x| x))
            }
            DimensionKind::ContinuousLog10 { lower, upper } => {
                Some((lower.log10(), upper.log10(), f64::log10, |t| 10f64.powf(t)))
            }
            DimensionKind::IntegerLog2 { lower, upper } => {
                Some((lower.log2(), upper.log2(), f64::log2, f64::exp2))
            }
            DimensionKind::Categorical { .. } => None,
        }
    }

    /// Unit coordinate of a native numeric value.
    pub fn to_unit(&self, value: f64) -> Result<f64> {
        let (lo, hi, fwd, _) = self
            .affine()
            .ok_or_else(|| Error::dimension(&self.name, "categorical has no unit coordinate"))?;
        self.check_numeric(value)?;
        Ok(((fwd(value) - lo) / (hi - lo)).clamp(0.0, 1.0))
    }

    fn check_numeric(&self, value: f64) -> Result<()> {
        let (lower, upper) = match self.kind {
            DimensionKind::ContinuousLinear { lower, upper }
            | DimensionKind::ContinuousLog10 { lower, upper }
            | DimensionKind::IntegerLog2 { lower, upper } => (lower, upper),
            DimensionKind::Categorical { .. } => unreachable!(),
        };
        if !value.is_finite() || value < lower || value > upper {
            return Err(Error::dimension(
                &self.name,
                format!("value {value} outside [{lower}, {upper}]"),
            ));
        }
        if matches!(self.kind, DimensionKind::IntegerLog2 { .. }) && !is_power_of_two(value) {
            return Err(Error::dimension(
                &self.name,
                format!("value {value} is not a power of two"),
            ));
        }
        Ok(())
    }

    /// Native value at a unit coordinate without integer rounding.
    pub fn native_at(&self, u: f64) -> f64 {
        let (lo, hi, _, inv) = self.affine().expect("numeric dimension");
        inv(lo + u * (hi - lo))
    }

    /// Native value at a unit coordinate; integer-log2 rounds half up in log2 space.
    pub fn from_unit(&self, u: f64) -> Result<f64> {
        if !u.is_finite() || !(-UNIT_TOL..=1.0 + UNIT_TOL).contains(&u) {
            return Err(Error::dimension(&self.name, format!("unit coordinate {u} outside [0, 1]")));
        }
        let u = u.clamp(0.0, 1.0);
        let (lo, hi, _, inv) = self
            .affine()
            .ok_or_else(|| Error::dimension(&self.name, "categorical has no unit coordinate"))?;
        let t = lo + u * (hi - lo);
        let v = match self.kind {
            DimensionKind::IntegerLog2 { .. } => (t + 0.5).floor().exp2(),
            DimensionKind::ContinuousLinear { lower, upper }
            | DimensionKind::ContinuousLog10 { lower, upper } => inv(t).clamp(lower, upper),
            DimensionKind::Categorical { .. } => unreachable!(),
        };
        Ok(v)
    }

    /// Parse a value given on the command line or in a request.
    pub fn parse_value(&self, text: &str) -> Result<Value> {
        match &self.kind {
            DimensionKind::Categorical { levels } => {
                if levels.iter().any(|l| l == text) {
                    Ok(Value::Label(text.to_string()))
                } else {
                    Err(Error::dimension(&self.name, format!("unknown level `{text}`")))
                }
            }
            _ => {
                let v: f64 = text
                    .trim()
                    .parse()
                    .map_err(|_| Error::dimension(&self.name, format!("`{text}` is not a number")))?;
                self.check_numeric(v)?;
                Ok(Value::Number(v))
            }
        }
    }
}

impl TryFrom<DimensionDecl> for Dimension {
    type Error = Error;

    fn try_from(d: DimensionDecl) -> Result<Self> {
        let bounds = |d: &DimensionDecl| match (d.lower, d.upper, &d.levels) {
            (Some(l), Some(u), None) => Ok((l, u)),
            _ => Err(Error::dimension(&d.name, "numeric dimension requires `lower` and `upper` only")),
        };
        let kind = match d.kind {
            KindTag::ContinuousLinear => {
                let (lower, upper) = bounds(&d)?;
                DimensionKind::ContinuousLinear { lower, upper }
            }
            KindTag::ContinuousLog10 => {
                let (lower, upper) = bounds(&d)?;
                DimensionKind::ContinuousLog10 { lower, upper }
            }
            KindTag::IntegerLog2 => {
                let (lower, upper) = bounds(&d)?;
                DimensionKind::IntegerLog2 { lower, upper }
            }
            KindTag::Categorical => match (&d.lower, &d.upper, d.levels) {
                (None, None, Some(levels)) => DimensionKind::Categorical { levels },
                _ => {
                    return Err(Error::dimension(
                        &d.name,
                        "categorical dimension requires `levels` only",
                    ))
                }
            },
        };
        Dimension::new(d.name, kind)
    }
}

impl From<Dimension> for DimensionDecl {
    fn from(d: Dimension) -> Self {
        let (kind, lower, upper, levels) = match d.kind {
            DimensionKind::ContinuousLinear { lower, upper } => {
                (KindTag::ContinuousLinear, Some(lower), Some(upper), None)
            }
            DimensionKind::ContinuousLog10 { lower, upper } => {
                (KindTag::ContinuousLog10, Some(lower), Some(upper), None)
            }
            DimensionKind::IntegerLog2 { lower, upper } => {
                (KindTag::IntegerLog2, Some(lower), Some(upper), None)
            }
            DimensionKind::Categorical { levels } => (KindTag::Categorical, None, None, Some(levels)),
        };
        DimensionDecl {
            name: d.name,
            kind,
            lower,
            upper,
            levels,
        }
    }
}

/// A native-unit value of one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Label(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(x) => write!(f, "{x}"),
            Value::Label(s) => f.write_str(s),
        }
    }
}

/// A point of the multiverse, one value per dimension in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    pub values: Vec<Value>,
}

/// GP input: unit-cube coordinates of the numeric dimensions plus level
/// indices of the categorical ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub unit: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<usize>,
}

impl Point {
    pub fn numeric(unit: Vec<f64>) -> Self {
        Self {
            unit,
            levels: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    dimensions: Vec<Dimension>,
    seed: u64,
}

impl SearchSpace {
    pub fn new(dimensions: Vec<Dimension>, seed: u64) -> Result<Self> {
        let mut seen = HashSet::new();
        for d in &dimensions {
            d.validate()?;
            if !seen.insert(d.name.as_str()) {
                return Err(Error::dimension(&d.name, "duplicate dimension name"));
            }
        }
        if !dimensions.iter().any(Dimension::is_numeric) {
            return Err(Error::Validation(
                "search space needs at least one numeric dimension".into(),
            ));
        }
        Ok(Self { dimensions, seed })
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dimensions.iter().position(|d| d.name == name)
    }

    /// Positions (in declaration order) of numeric dimensions.
    pub fn numeric_dims(&self) -> Vec<usize> {
        (0..self.dimensions.len())
            .filter(|&i| self.dimensions[i].is_numeric())
            .collect()
    }

    pub fn categorical_dims(&self) -> Vec<usize> {
        (0..self.dimensions.len())
            .filter(|&i| !self.dimensions[i].is_numeric())
            .collect()
    }

    pub fn n_numeric(&self) -> usize {
        self.dimensions.iter().filter(|d| d.is_numeric()).count()
    }

    /// Level counts of the categorical dimensions in declaration order.
    pub fn level_counts(&self) -> Vec<usize> {
        self.dimensions
            .iter()
            .filter_map(|d| d.levels().map(<[String]>::len))
            .collect()
    }

    /// Index into `Point::unit` of a numeric dimension given by name.
    pub fn unit_slot(&self, name: &str) -> Option<usize> {
        let i = self.index_of(name)?;
        self.dimensions[i].is_numeric().then(|| {
            self.dimensions[..i].iter().filter(|d| d.is_numeric()).count()
        })
    }

    /// Index into `Point::levels` of a categorical dimension given by name.
    pub fn level_slot(&self, name: &str) -> Option<usize> {
        let i = self.index_of(name)?;
        (!self.dimensions[i].is_numeric()).then(|| {
            self.dimensions[..i].iter().filter(|d| !d.is_numeric()).count()
        })
    }

    pub fn validate(&self, config: &Configuration) -> Result<()> {
        self.to_unit(config).map(|_| ())
    }

    pub fn to_unit(&self, config: &Configuration) -> Result<Point> {
        if config.values.len() != self.dimensions.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dimensions.len(),
                found: config.values.len(),
            });
        }
        let mut point = Point {
            unit: Vec::with_capacity(self.n_numeric()),
            levels: Vec::new(),
        };
        for (d, v) in self.dimensions.iter().zip(&config.values) {
            match (&d.kind, v) {
                (DimensionKind::Categorical { levels }, Value::Label(l)) => {
                    let idx = levels
                        .iter()
                        .position(|x| x == l)
                        .ok_or_else(|| Error::dimension(&d.name, format!("unknown level `{l}`")))?;
                    point.levels.push(idx);
                }
                (DimensionKind::Categorical { .. }, Value::Number(x)) => {
                    return Err(Error::dimension(&d.name, format!("expected a level label, got {x}")))
                }
                (_, Value::Number(x)) => point.unit.push(d.to_unit(*x)?),
                (_, Value::Label(l)) => {
                    return Err(Error::dimension(&d.name, format!("expected a number, got `{l}`")))
                }
            }
        }
        Ok(point)
    }

    pub fn from_unit(&self, unit: &[f64], levels: &[usize]) -> Result<Configuration> {
        let counts = self.level_counts();
        if unit.len() != self.n_numeric() {
            return Err(Error::DimensionMismatch {
                expected: self.n_numeric(),
                found: unit.len(),
            });
        }
        if levels.len() != counts.len() {
            return Err(Error::DimensionMismatch {
                expected: counts.len(),
                found: levels.len(),
            });
        }
        let mut u = unit.iter();
        let mut l = levels.iter();
        let values = self
            .dimensions
            .iter()
            .map(|d| match &d.kind {
                DimensionKind::Categorical { levels } => {
                    let idx = *l.next().expect("level count checked");
                    levels
                        .get(idx)
                        .map(|s| Value::Label(s.clone()))
                        .ok_or_else(|| Error::dimension(&d.name, format!("level index {idx} out of range")))
                }
                _ => d.from_unit(*u.next().expect("unit count checked")).map(Value::Number),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Configuration { values })
    }

    pub fn point_to_config(&self, p: &Point) -> Result<Configuration> {
        self.from_unit(&p.unit, &p.levels)
    }

    /// Unit-cube Sobol points for the numeric dimensions (origin skipped).
    pub fn sobol_unit_points(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::Validation("design size must be at least 1".into()));
        }
        let d = self.n_numeric();
        if d > MAX_DIM {
            return Err(Error::Validation(format!(
                "at most {MAX_DIM} numeric dimensions supported, got {d}"
            )));
        }
        Ok(Sobol::new(d)?.take_points(n))
    }

    /// Stratified level assignment: each level appears ⌊n/L⌋ or ⌈n/L⌉ times.
    pub fn stratified_levels(&self, n: usize) -> Vec<Vec<usize>> {
        let counts = self.level_counts();
        let columns: Vec<Vec<usize>> = counts
            .iter()
            .enumerate()
            .map(|(c, &count)| {
                let mut col: Vec<usize> = (0..n).map(|i| i % count).collect();
                col.shuffle(&mut substream(self.seed, "design", c as u64));
                col
            })
            .collect();
        (0..n)
            .map(|i| columns.iter().map(|col| col[i]).collect())
            .collect()
    }

    /// Initial design: Sobol points mapped to native units with stratified levels.
    pub fn sobol_design(&self, n: usize) -> Result<Vec<Configuration>> {
        let units = self.sobol_unit_points(n)?;
        let levels = self.stratified_levels(n);
        units
            .iter()
            .zip(&levels)
            .map(|(u, l)| self.from_unit(u, l))
            .collect()
    }
}
