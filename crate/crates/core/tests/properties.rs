use multiverse_core::design::ivr_scores_with;
use multiverse_core::exec::Execution;
use multiverse_core::kernels::{BaseKernel, KernelSpec};
use multiverse_core::space::{Dimension, Point, SearchSpace, Value};
use multiverse_core::surrogate::{ObservationSet, SurrogateModel};
use proptest::prelude::*;

fn space() -> SearchSpace {
    SearchSpace::new(
        vec![
            Dimension::linear("a", -2.0, 5.0).unwrap(),
            Dimension::log10("b", 1e-4, 1e2).unwrap(),
            Dimension::log2_int("c", 1.0, 256.0).unwrap(),
            Dimension::categorical("d", ["x", "y", "z"]).unwrap(),
        ],
        0,
    )
    .unwrap()
}

fn model(xs: &[(f64, f64)], ls: f64, noise: f64) -> SurrogateModel {
    let mut k = KernelSpec::shared(BaseKernel::Matern52, false, 2);
    k.components[0].lengthscales = vec![ls];
    let pts = xs.iter().map(|&(a, b)| Point::numeric(vec![a, b])).collect();
    let ys = xs.iter().map(|&(a, b)| (4.0 * a).sin() + b).collect();
    SurrogateModel::condition(&ObservationSet::from_ok(pts, ys), &k, noise, true).unwrap()
}

proptest! {
    #[test]
    fn unit_round_trip(u in prop::collection::vec(0.0..=1.0f64, 3), level in 0usize..3) {
        let s = space();
        let config = s.from_unit(&u, &[level]).unwrap();
        let p = s.to_unit(&config).unwrap();
        prop_assert_eq!(&p.levels, &vec![level]);
        prop_assert!((p.unit[0] - u[0]).abs() < 1e-12);
        prop_assert!((p.unit[1] - u[1]).abs() < 1e-12);
        let again = s.from_unit(&p.unit, &p.levels).unwrap();
        prop_assert_eq!(again, config.clone());
        match &config.values[2] {
            Value::Number(v) => prop_assert!(v.log2().fract() == 0.0),
            _ => prop_assert!(false),
        }
    }

    #[test]
    fn kernel_is_symmetric_with_signal_diagonal(
        a in prop::collection::vec(0.0..=1.0f64, 3),
        b in prop::collection::vec(0.0..=1.0f64, 3),
        ls in 0.05..3.0f64,
        sf in 0.1..5.0f64,
    ) {
        for base in [BaseKernel::Matern52, BaseKernel::Rbf] {
            let mut k = KernelSpec::shared(base, false, 3);
            k.components[0].lengthscales = vec![ls];
            k.components[0].signal_variance = sf;
            let (p, q) = (Point::numeric(a.clone()), Point::numeric(b.clone()));
            prop_assert_eq!(k.cov(&p, &q), k.cov(&q, &p));
            prop_assert!((k.cov(&p, &p) - sf).abs() < 1e-12);
            prop_assert!(k.cov(&p, &q) <= sf + 1e-12);
        }
    }

    #[test]
    fn ivr_scores_are_non_positive(
        xs in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 2..12),
        cands in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 1..8),
        ls in 0.05..1.0f64,
        noise in 1e-6..1e-1f64,
    ) {
        let m = model(&xs, ls, noise);
        let cands: Vec<Point> = cands.iter().map(|&(a, b)| Point::numeric(vec![a, b])).collect();
        let mc: Vec<Point> = (0..32).map(|i| Point::numeric(vec![(i % 8) as f64 / 7.0, (i / 8) as f64 / 3.0])).collect();
        for s in ivr_scores_with(Execution::Sequential, &m, &cands, &mc).unwrap() {
            prop_assert!(s <= 1e-10, "score {}", s);
        }
    }

    #[test]
    fn posterior_variance_is_bounded_by_prior(
        xs in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 2..12),
        q in (0.0..=1.0f64, 0.0..=1.0f64),
        ls in 0.05..1.0f64,
    ) {
        let m = model(&xs, ls, 1e-3);
        let p = m.predict_standardized(&[Point::numeric(vec![q.0, q.1])]).unwrap();
        prop_assert!(p.variance[0] >= 0.0);
        prop_assert!(p.variance[0] <= m.kernel().components[0].signal_variance + 1e-9);
    }
}
