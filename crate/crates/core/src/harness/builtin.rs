use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;

use super::classifier::{bundled_dataset, ClassifierTask};
use super::{EvaluationResult, Evaluator};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::space::{Configuration, Dimension, SearchSpace, Value};

/// A registered benchmark and its canonical search space.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub name: &'static str,
    pub description: &'static str,
    pub space: SearchSpace,
    params: &'static [&'static str],
}

impl Benchmark {
    /// Builtins read numeric values in order; categorical dimensions are ignored.
    pub fn check_space(&self, space: &SearchSpace) -> Result<()> {
        let want = self.space.n_numeric();
        if space.n_numeric() != want {
            return Err(Error::Validation(format!(
                "builtin `{}` needs {want} numeric dimensions, space has {}",
                self.name,
                space.n_numeric()
            )));
        }
        Ok(())
    }
}

fn space(dims: Vec<Dimension>) -> SearchSpace {
    SearchSpace::new(dims, 0).expect("canonical space is valid")
}

pub fn benchmark_registry() -> Vec<Benchmark> {
    let lin = |n: &str, lo: f64, hi: f64| Dimension::linear(n, lo, hi).expect("valid");
    vec![
        Benchmark {
            name: "ishigami",
            description: "sin x1 + a sin^2 x2 + b x3^4 sin x1 on [-pi, pi]^3",
            space: space(vec![lin("x1", -PI, PI), lin("x2", -PI, PI), lin("x3", -PI, PI)]),
            params: &["a", "b", "noise", "noise_seed"],
        },
        Benchmark {
            name: "additive-sine",
            description: "sin(3 u1) + u2 on [0, 1]^2",
            space: space(vec![lin("u1", 0.0, 1.0), lin("u2", 0.0, 1.0)]),
            params: &["noise", "noise_seed"],
        },
        Benchmark {
            name: "product",
            description: "u1 * u2 on [0, 1]^2",
            space: space(vec![lin("u1", 0.0, 1.0), lin("u2", 0.0, 1.0)]),
            params: &["noise", "noise_seed"],
        },
        Benchmark {
            name: "branin",
            description: "standard Branin on [-5, 10] x [0, 15]",
            space: space(vec![lin("x1", -5.0, 10.0), lin("x2", 0.0, 15.0)]),
            params: &["noise", "noise_seed"],
        },
        Benchmark {
            name: "classifier",
            description: "held-out accuracy of an RBF least-squares kernel classifier on the bundled breast-cancer data",
            space: space(vec![
                Dimension::log10("C", 1e-3, 1e3).expect("valid"),
                Dimension::log10("gamma", 1e-4, 1e1).expect("valid"),
            ]),
            params: &[],
        },
    ]
}

pub fn ishigami(x: &[f64], a: f64, b: f64) -> f64 {
    x[0].sin() + a * x[1].sin().powi(2) + b * x[2].powi(4) * x[0].sin()
}

pub fn branin(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

enum Kind {
    Ishigami { a: f64, b: f64 },
    AdditiveSine,
    Product,
    Branin,
    Classifier(Box<ClassifierTask>),
}

/// In-process evaluator for a registered benchmark. Pure: equal inputs give
/// bit-identical outputs, including the optional seeded noise.
pub struct BuiltinEvaluator {
    kind: Kind,
    noise: f64,
    noise_seed: u64,
}

impl BuiltinEvaluator {
    pub fn new(name: &str, params: BTreeMap<String, f64>, seed: u64) -> Result<Self> {
        let bench = benchmark_registry()
            .into_iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Validation(format!("unknown builtin evaluator `{name}`")))?;
        if let Some(k) = params.keys().find(|k| !bench.params.contains(&k.as_str())) {
            return Err(Error::Validation(format!("builtin `{name}` has no parameter `{k}`")));
        }
        let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
        let kind = match name {
            "ishigami" => Kind::Ishigami {
                a: get("a", 7.0),
                b: get("b", 0.1),
            },
            "additive-sine" => Kind::AdditiveSine,
            "product" => Kind::Product,
            "branin" => Kind::Branin,
            "classifier" => Kind::Classifier(Box::new(ClassifierTask::new(&bundled_dataset()?, seed)?)),
            _ => unreachable!("registry and match agree"),
        };
        let noise = get("noise", 0.0);
        if !(noise >= 0.0) {
            return Err(Error::Validation("noise must be non-negative".into()));
        }
        Ok(Self {
            kind,
            noise,
            noise_seed: get("noise_seed", 0.0) as u64,
        })
    }

    fn noise_for(&self, config: &Configuration) -> f64 {
        if self.noise == 0.0 {
            return 0.0;
        }
        let mut h: u64 = self.noise_seed;
        for v in &config.values {
            let bits = match v {
                Value::Number(x) => x.to_bits(),
                Value::Label(s) => s.bytes().fold(0u64, |a, b| a.rotate_left(8) ^ u64::from(b)),
            };
            h = h.rotate_left(29) ^ bits.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        }
        let mut rng = substream(h, "builtin-noise", 0);
        // Box–Muller
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        self.noise * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

impl Evaluator for BuiltinEvaluator {
    fn evaluate(&self, _id: &str, config: &Configuration) -> EvaluationResult {
        let x: Vec<f64> = config
            .values
            .iter()
            .filter_map(|v| match v {
                Value::Number(x) => Some(*x),
                Value::Label(_) => None,
            })
            .collect();
        let clean = match &self.kind {
            Kind::Ishigami { a, b } => ishigami(&x, *a, *b),
            Kind::AdditiveSine => (3.0 * x[0]).sin() + x[1],
            Kind::Product => x[0] * x[1],
            Kind::Branin => branin(x[0], x[1]),
            Kind::Classifier(task) => {
                return match task.accuracy(x[0], x[1]) {
                    Ok(acc) => EvaluationResult::ok(acc.test).with_aux("train_accuracy", acc.train),
                    Err(e) => EvaluationResult::failed(e.to_string()),
                }
            }
        };
        EvaluationResult::ok(clean + self.noise_for(config))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(v: &[f64]) -> Configuration {
        Configuration {
            values: v.iter().map(|&x| Value::Number(x)).collect(),
        }
    }

    #[test]
    fn analytic_values() {
        let e = BuiltinEvaluator::new("ishigami", BTreeMap::new(), 0).unwrap();
        assert_eq!(e.evaluate("a", &cfg(&[0.0, 0.0, 0.0])).outcome, 0.0);
        let e = BuiltinEvaluator::new("additive-sine", BTreeMap::new(), 0).unwrap();
        assert_eq!(e.evaluate("a", &cfg(&[0.3, 0.8])).outcome, (3.0 * 0.3f64).sin() + 0.8);
        assert!((branin(PI, 2.275) - 0.397_887_357_729_738).abs() < 1e-9);
        assert!((branin(-PI, 12.275) - 0.397_887_357_729_738).abs() < 1e-9);
    }

    #[test]
    fn registry_spaces_round_trip() {
        let names: Vec<_> = benchmark_registry().iter().map(|b| b.name).collect();
        assert!(names.contains(&"ishigami"));
        for b in benchmark_registry() {
            for c in b.space.sobol_design(8).unwrap() {
                b.space.validate(&c).unwrap();
                let p = b.space.to_unit(&c).unwrap();
                assert_eq!(b.space.point_to_config(&p).unwrap(), c);
            }
            b.check_space(&b.space).unwrap();
        }
    }

    #[test]
    fn seeded_noise_is_pure() {
        let params = BTreeMap::from([("noise".to_string(), 0.05), ("noise_seed".to_string(), 3.0)]);
        let e = BuiltinEvaluator::new("product", params, 0).unwrap();
        let c = cfg(&[0.4, 0.5]);
        let a = e.evaluate("x", &c).outcome;
        assert_eq!(a.to_bits(), e.evaluate("y", &c).outcome.to_bits());
        assert_ne!(a, 0.2);
        assert!(BuiltinEvaluator::new("product", BTreeMap::from([("bogus".to_string(), 1.0)]), 0).is_err());
    }
}
