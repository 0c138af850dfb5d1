use multiverse_core::design::{
    ivr_score, quasi_random_points, select_batch, ucb_score, AcquisitionSpec, BatchContext,
};
use multiverse_core::exec::Execution;
use multiverse_core::kernels::{BaseKernel, KernelSpec};
use multiverse_core::space::{Dimension, Point, SearchSpace};
use multiverse_core::surrogate::{ObservationSet, SurrogateModel};

fn line() -> SearchSpace {
    SearchSpace::new(vec![Dimension::linear("x", 0.0, 1.0).unwrap()], 0).unwrap()
}

fn clustered() -> SurrogateModel {
    let xs = [0.1, 0.12, 0.14, 0.16, 0.18, 0.2];
    let mut k = KernelSpec::shared(BaseKernel::Matern52, false, 1);
    k.components[0].lengthscales = vec![0.15];
    let obs = ObservationSet::from_ok(
        xs.iter().map(|&x| Point::numeric(vec![x])).collect(),
        xs.iter().map(|x| (6.0 * x).sin()).collect(),
    );
    SurrogateModel::condition(&obs, &k, 1e-4, true).unwrap()
}

fn ctx(batch: u64) -> BatchContext {
    BatchContext {
        seed: 3,
        batch_index: batch,
        exec: Execution::default(),
    }
}

#[test]
fn ivr_moves_away_from_a_cluster() {
    let model = clustered();
    let mc = quasi_random_points(&line(), 256, 0, "mc", 0).unwrap();
    let near = ivr_score(&model, &Point::numeric(vec![0.15]), &mc).unwrap();
    let far = ivr_score(&model, &Point::numeric(vec![0.7]), &mc).unwrap();
    assert!(far < near);
    let batch = select_batch(&model, &line(), &AcquisitionSpec::ivr(), 3, ctx(1)).unwrap();
    assert!(batch.iter().all(|p| p.unit[0] > 0.3), "{batch:?}");
}

#[test]
fn ivr_batches_spread_out() {
    let batch = select_batch(&clustered(), &line(), &AcquisitionSpec::ivr(), 4, ctx(1)).unwrap();
    for i in 0..batch.len() {
        for j in 0..i {
            assert!((batch[i].unit[0] - batch[j].unit[0]).abs() > 0.05, "{batch:?}");
        }
    }
}

#[test]
fn ucb_is_mean_plus_beta_sigma() {
    let model = clustered();
    let q = Point::numeric(vec![0.4]);
    let p = model.predict_standardized(std::slice::from_ref(&q)).unwrap();
    for beta in [0.0, 1.0, 2.5] {
        let want = p.mean[0] + beta * p.variance[0].sqrt();
        assert!((ucb_score(&model, &q, beta).unwrap() - want).abs() < 1e-12);
    }
    assert!(ucb_score(&model, &q, -1.0).is_err());
}

#[test]
fn ucb_with_zero_beta_takes_the_best_means() {
    let model = clustered();
    let spec = AcquisitionSpec::ucb(0.0);
    let batch = select_batch(&model, &line(), &spec, 2, ctx(2)).unwrap();
    let cands = quasi_random_points(&line(), spec.candidates, 3, "candidates", 2).unwrap();
    let mean = model.predict_standardized(&cands).unwrap().mean;
    let best = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = model.predict_standardized(&batch[..1]).unwrap().mean[0];
    assert_eq!(first, best);
}

#[test]
fn selection_is_execution_independent() {
    let model = clustered();
    for spec in [AcquisitionSpec::ivr(), AcquisitionSpec::ucb(2.0)] {
        let par = select_batch(&model, &line(), &spec, 3, ctx(5)).unwrap();
        let seq = select_batch(
            &model,
            &line(),
            &spec,
            3,
            BatchContext {
                exec: Execution::Sequential,
                ..ctx(5)
            },
        )
        .unwrap();
        assert_eq!(par, seq);
    }
}

#[test]
fn proposal_streams_differ_by_batch() {
    let a = quasi_random_points(&line(), 8, 1, "candidates", 0).unwrap();
    let b = quasi_random_points(&line(), 8, 1, "candidates", 1).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, quasi_random_points(&line(), 8, 1, "candidates", 0).unwrap());
}
