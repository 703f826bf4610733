mod common;

use brainfreq::encoders::ParamTensors;
use brainfreq::spectral::BandSet;
use brainfreq::training::{backward, forward, ActiveEncoders, LossConfig, Objective};
use common::{model, subject};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn max_relative_error(
    s: &brainfreq::training::PreparedSubject,
    p: &brainfreq::training::EncoderParams,
    cfg: LossConfig,
    objective: Objective,
    active: ActiveEncoders,
) -> (f64, String) {
    common::gradient_check(s, p, cfg, objective, active, H)
}

#[test]
fn consistency_gradients_match_finite_differences() {
    let s = subject(8, 6, 6, 3, BandSet::LOW_HIGH);
    let p = model(6, 6, 4);
    let (err, at) = max_relative_error(&s, &p, LossConfig::default(), Objective::Consistency, ActiveEncoders::Both);
    assert!(err <= TOL, "worst relative error {err:e} at {at}");
}

#[test]
fn decorrelation_heavy_gradients_match_finite_differences() {
    let s = subject(8, 6, 6, 5, BandSet::ALL);
    let p = model(6, 6, 6);
    let cfg = LossConfig { gamma: 0.7, beta: 0.4 };
    let (err, at) = max_relative_error(&s, &p, cfg, Objective::Consistency, ActiveEncoders::Both);
    assert!(err <= TOL, "worst relative error {err:e} at {at}");
}

#[test]
fn truncated_k_gradients_match_finite_differences() {
    let s = subject(8, 6, 4, 8, BandSet::ALL);
    let p = model(6, 4, 9);
    let cfg = LossConfig { gamma: 0.3, beta: 0.3 };
    let (err, at) = max_relative_error(&s, &p, cfg, Objective::Consistency, ActiveEncoders::Both);
    assert!(err <= TOL, "worst relative error {err:e} at {at}");
}

#[test]
fn variant_objective_gradients_match_finite_differences() {
    let s = subject(8, 6, 6, 10, BandSet::LOW_HIGH);
    let p = model(6, 6, 11);
    let cfg = LossConfig { gamma: 0.2, beta: 0.5 };
    for (objective, active) in [
        (Objective::Cosine, ActiveEncoders::Both),
        (Objective::CosineDecorrelation, ActiveEncoders::Both),
        (Objective::Consistency, ActiveEncoders::TimeOnly),
        (Objective::Consistency, ActiveEncoders::FreqOnly),
    ] {
        let (err, at) = max_relative_error(&s, &p, cfg, objective, active);
        assert!(err <= TOL, "{objective:?}/{active:?}: worst relative error {err:e} at {at}");
    }
}

#[test]
fn zero_features_zero_first_layer_gradients() {
    let mut s = subject(8, 6, 6, 12, BandSet::ALL);
    s.features.fill(0.0);
    s.filtered.fill(0.0);
    let p = model(6, 6, 13);
    let cache = forward(&s, &p).unwrap();
    let (_, g) = backward(&s, &p, &cache, LossConfig::default(), Objective::Consistency, ActiveEncoders::Both).unwrap();
    assert!(g.tgnn.weights.iter().all(|w| w.iter().all(|&v| v == 0.0)));
    assert!(g.fgnn.operators.iter().all(|w| w.iter().all(|&v| v == 0.0)));
}

#[test]
fn duplicated_subject_doubles_gradient() {
    let s = subject(8, 6, 6, 14, BandSet::LOW_HIGH);
    let p = model(6, 6, 15);
    let cache = forward(&s, &p).unwrap();
    let (_, g) = backward(&s, &p, &cache, LossConfig::default(), Objective::Consistency, ActiveEncoders::Both).unwrap();
    let batch = [&s, &s];
    let mut sum = p.zeros_like();
    for subj in batch {
        let c = forward(subj, &p).unwrap();
        let (_, gi) = backward(subj, &p, &c, LossConfig::default(), Objective::Consistency, ActiveEncoders::Both).unwrap();
        let gi_t = gi.named_tensors();
        for (acc, (_, _, t)) in sum.tensors_mut().into_iter().zip(gi_t) {
            for (a, b) in acc.iter_mut().zip(t) {
                *a += b;
            }
        }
    }
    for ((_, _, one), (_, _, two)) in g.named_tensors().into_iter().zip(sum.named_tensors()) {
        for (a, b) in one.iter().zip(two) {
            assert_eq!(2.0 * a, *b);
        }
    }
}
