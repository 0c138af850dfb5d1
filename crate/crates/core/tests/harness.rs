use std::collections::BTreeMap;
use std::time::Duration;

use multiverse_core::harness::{
    benchmark_registry, bundled_dataset, ishigami, BuiltinEvaluator, ClassifierTask, EvalStatus, Evaluator,
    EvaluatorSpec, ExternalEvaluator,
};
use multiverse_core::space::{Configuration, Dimension, Point, SearchSpace, Value};

fn mock() -> Vec<String> {
    vec![concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/mock_evaluator.sh").to_string()]
}

fn x_space() -> SearchSpace {
    SearchSpace::new(vec![Dimension::linear("x", 0.0, 1.0).unwrap()], 0).unwrap()
}

fn at(x: f64) -> Configuration {
    Configuration {
        values: vec![Value::Number(x)],
    }
}

#[test]
fn external_success_carries_aux() {
    let ev = ExternalEvaluator::new(mock(), Duration::from_secs(5), &x_space()).unwrap();
    let r = ev.evaluate("k-1", &at(0.3));
    assert_eq!(r.status, EvalStatus::Ok);
    assert_eq!(r.outcome, 0.3);
    assert_eq!(r.aux["train_accuracy"], 1.0);
    assert!(r.duration > 0.0);
}

#[test]
fn external_failures_are_recorded() {
    let ev = ExternalEvaluator::new(mock(), Duration::from_millis(500), &x_space()).unwrap();
    for (x, reason) in [
        (0.55, "non-finite"),
        (0.65, "malformed"),
        (0.75, "id mismatch"),
        (0.85, "timeout"),
        (0.95, "exit"),
    ] {
        let r = ev.evaluate("k-2", &at(x));
        assert_eq!(r.status, EvalStatus::Failed, "x = {x}");
        let msg = r.failure.unwrap();
        assert!(msg.contains(reason), "x = {x}: {msg}");
    }
}

#[test]
fn missing_command_is_an_evaluator_error() {
    let e = ExternalEvaluator::new(vec!["/nonexistent/eval".into()], Duration::from_secs(1), &x_space()).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn request_line_names_parameters() {
    let space = SearchSpace::new(
        vec![Dimension::log10("lr", 1e-4, 1.0).unwrap(), Dimension::categorical("model", ["a", "vgg"]).unwrap()],
        0,
    )
    .unwrap();
    let ev = ExternalEvaluator::new(mock(), Duration::from_secs(1), &space).unwrap();
    let config = Configuration {
        values: vec![Value::Number(0.001), Value::Label("vgg".into())],
    };
    let line = ev.request_line("3-0", &config);
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(v["id"], "3-0");
    assert_eq!(v["params"]["lr"], 0.001);
    assert_eq!(v["params"]["model"], "vgg");
    assert!(!line.contains('\n'));
}

#[test]
fn every_builtin_evaluates_on_its_space() {
    for b in benchmark_registry() {
        let ev = BuiltinEvaluator::new(b.name, BTreeMap::new(), 0).unwrap();
        let mid = vec![0.5; b.space.n_numeric()];
        let config = b.space.from_unit(&mid, &[]).unwrap();
        let r = ev.evaluate("m", &config);
        assert!(r.is_ok() && r.outcome.is_finite(), "{}", b.name);
    }
}

#[test]
fn builtin_noise_is_seeded() {
    let params = |s: f64| BTreeMap::from([("noise".to_string(), 0.1), ("noise_seed".to_string(), s)]);
    let c2 = Configuration {
        values: vec![Value::Number(0.5), Value::Number(0.5)],
    };
    let a = BuiltinEvaluator::new("product", params(1.0), 0).unwrap();
    let b = BuiltinEvaluator::new("product", params(2.0), 0).unwrap();
    assert_eq!(a.evaluate("p", &c2).outcome, a.evaluate("p", &c2).outcome);
    assert_ne!(a.evaluate("p", &c2).outcome, b.evaluate("p", &c2).outcome);
}

#[test]
fn unknown_builtin_or_parameter_is_rejected() {
    assert!(BuiltinEvaluator::new("nope", BTreeMap::new(), 0).is_err());
    assert!(BuiltinEvaluator::new("classifier", BTreeMap::from([("noise".into(), 0.1)]), 0).is_err());
}

#[test]
fn ishigami_point_values() {
    use std::f64::consts::PI;
    assert!((ishigami(&[0.0, 0.0, 0.0], 7.0, 0.1)).abs() < 1e-15);
    assert!((ishigami(&[PI / 2.0, PI / 2.0, 1.0], 7.0, 0.1) - 8.1).abs() < 1e-12);
}

#[test]
fn evaluator_spec_round_trips() {
    for text in [
        r#"{"builtin":{"name":"branin"}}"#,
        r#"{"builtin":{"name":"ishigami","params":{"a":5.0}}}"#,
        r#"{"external":{"command":["python","eval.py"],"timeout_secs":60.0}}"#,
    ] {
        let spec: EvaluatorSpec = serde_json::from_str(text).unwrap();
        assert_eq!(serde_json::to_string(&spec).unwrap(), text);
    }
    let spec: EvaluatorSpec = serde_json::from_str(r#"{"external":{"command":["e"]}}"#).unwrap();
    assert!(matches!(spec, EvaluatorSpec::External { timeout_secs, .. } if timeout_secs == 3600.0));
}

#[test]
fn classifier_plateau_trades_c_against_gamma() {
    let task = ClassifierTask::new(&bundled_dataset().unwrap(), 0).unwrap();
    let space = benchmark_registry().into_iter().find(|b| b.name == "classifier").unwrap().space;
    let mut cells = Vec::new();
    for i in 0..16 {
        for j in 0..16 {
            let c = space.from_unit(&[i as f64 / 15.0, j as f64 / 15.0], &[]).unwrap();
            let (Value::Number(cv), Value::Number(gv)) = (&c.values[0], &c.values[1]) else {
                panic!("numeric classifier space");
            };
            cells.push((cv.log10(), gv.log10(), task.accuracy(*cv, *gv).unwrap().test));
        }
    }
    let best = cells.iter().map(|c| c.2).fold(0.0, f64::max);
    assert!(best > 0.94);
    let band: Vec<_> = cells.iter().filter(|c| c.2 >= best - 0.02).collect();
    assert!(band.len() >= 3);
    let span = band.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max)
        - band.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    assert!(span >= 2.0, "span {span}");

    // the best gamma per C column falls as C grows
    let mut best_gamma = Vec::new();
    for i in 0..16 {
        let col: Vec<_> = cells[i * 16..(i + 1) * 16].iter().collect();
        let top = col.iter().max_by(|a, b| a.2.total_cmp(&b.2)).unwrap();
        if top.2 >= best - 0.02 {
            best_gamma.push((top.0, top.1));
        }
    }
    let n = best_gamma.len() as f64;
    let (mc, mg) = (best_gamma.iter().map(|p| p.0).sum::<f64>() / n, best_gamma.iter().map(|p| p.1).sum::<f64>() / n);
    let cov: f64 = best_gamma.iter().map(|p| (p.0 - mc) * (p.1 - mg)).sum();
    assert!(cov < 0.0, "{best_gamma:?}");
}

#[test]
fn classifier_points_are_deterministic() {
    let ev = BuiltinEvaluator::new("classifier", BTreeMap::new(), 4).unwrap();
    let space = benchmark_registry().into_iter().find(|b| b.name == "classifier").unwrap().space;
    let c = space.point_to_config(&Point::numeric(vec![0.6, 0.3])).unwrap();
    let (a, b) = (ev.evaluate("a", &c), ev.evaluate("b", &c));
    assert_eq!(a.outcome, b.outcome);
    assert!(a.aux.contains_key("train_accuracy"));
}
