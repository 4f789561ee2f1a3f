use std::time::{Duration, Instant};

use ecas_core::prediction::{
    batch_loss, batch_loss_and_gradient, mad, predict_srlstm, train_desk_scale, Hyper, SrLstmModel, TrainingConfig,
    TrainingSample,
};
use ecas_core::scenario::{split_obs_pred, PedestrianTrack, Point2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn linear_walker(id: i64, start: Point2, step: Point2) -> PedestrianTrack {
    let pts: Vec<Point2> = (0..20).map(|k| start + step * k as f64).collect();
    PedestrianTrack::from_positions(id, 0, &pts, 0.4)
}

fn two_walkers() -> [PedestrianTrack; 2] {
    [
        linear_walker(1, Point2::new(0.0, 0.0), Point2::new(0.48, 0.0)),
        linear_walker(2, Point2::new(1.0, 4.0), Point2::new(0.3, -0.2)),
    ]
}

fn config() -> TrainingConfig {
    TrainingConfig {
        epochs: 500,
        batch: 2,
        lr: 0.01,
        obs_len: 8,
        pred_len: 12,
    }
}

fn samples(tracks: &[PedestrianTrack]) -> Vec<TrainingSample> {
    tracks
        .iter()
        .map(|t| {
            let s = split_obs_pred(t, 8, 12).unwrap();
            TrainingSample::from_split(&s.history, &s.truth)
        })
        .collect()
}

#[test]
fn loss_gradient_matches_central_differences() {
    // three pedestrians close enough for the refinement layer to engage
    let tracks = [
        linear_walker(1, Point2::new(0.0, 0.0), Point2::new(0.4, 0.05)),
        linear_walker(2, Point2::new(0.5, 1.0), Point2::new(0.35, -0.05)),
        linear_walker(3, Point2::new(-0.5, 0.6), Point2::new(0.45, 0.0)),
    ];
    let samples = samples(&tracks);
    let refs: Vec<&TrainingSample> = samples.iter().collect();
    let hyper = Hyper {
        neighbor_radius: 3.0,
        ..Hyper::default()
    };
    let mut model = SrLstmModel::new(hyper, 11).unwrap();
    // the default decoder bias is zero; move it so every tensor carries gradient
    model.tensor_mut("decode.bias").unwrap().copy_from_slice(&[0.05, -0.03]);
    let (_, grad) = batch_loss_and_gradient(&model, &refs);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let eps = 1e-6;
    for _ in 0..10 {
        let k = rng.gen_range(0..grad.len());
        let mut plus = model.clone();
        plus.params_mut()[k] += eps;
        let mut minus = model.clone();
        minus.params_mut()[k] -= eps;
        let numeric = (batch_loss(&plus, &refs) - batch_loss(&minus, &refs)) / (2.0 * eps);
        let scale = grad[k].abs().max(numeric.abs());
        assert!(
            (grad[k] - numeric).abs() <= 1e-4 * scale || (grad[k] - numeric).abs() < 1e-9,
            "coordinate {k}: analytic {} vs numeric {numeric}",
            grad[k]
        );
    }
}

#[test]
fn overfits_two_linear_walkers() {
    let tracks = two_walkers();
    let model = SrLstmModel::new(Hyper::default(), 7).unwrap();
    let t = Instant::now();
    let out = train_desk_scale(&model, &tracks, config()).unwrap();
    assert!(t.elapsed() < Duration::from_secs(60));
    assert_eq!(out.samples_used, 2);
    assert_eq!(out.loss_trace.len(), 500);
    assert!(out.loss_trace[0] > 1e-3, "initial loss {}", out.loss_trace[0]);
    let last = *out.loss_trace.last().unwrap();
    assert!(last < 1e-3, "final loss {last}");

    let splits: Vec<_> = tracks.iter().map(|t| split_obs_pred(t, 8, 12).unwrap()).collect();
    let histories: Vec<PedestrianTrack> = splits.iter().map(|s| s.history.clone()).collect();
    let preds = predict_srlstm(&out.model, &histories, 12).unwrap();
    for (p, s) in preds.iter().zip(&splits) {
        assert!(mad(p, &s.truth).unwrap() < 0.05);
    }
}

#[test]
fn recovers_from_a_biased_decoder() {
    let mut model = SrLstmModel::new(Hyper::default(), 7).unwrap();
    model.tensor_mut("decode.bias").unwrap().copy_from_slice(&[0.1, -0.1]);
    let out = train_desk_scale(&model, &two_walkers(), config()).unwrap();
    assert!(out.loss_trace[0] > 0.5, "initial loss {}", out.loss_trace[0]);
    let last = *out.loss_trace.last().unwrap();
    assert!(last < 1e-3, "final loss {last}");
}

#[test]
fn checkpoint_preserves_predictions() {
    let out = train_desk_scale(
        &SrLstmModel::new(Hyper::default(), 1).unwrap(),
        &two_walkers(),
        TrainingConfig { epochs: 3, ..config() },
    )
    .unwrap();
    let restored = SrLstmModel::from_checkpoint(&out.model.to_checkpoint()).unwrap();
    let histories: Vec<PedestrianTrack> = two_walkers()
        .iter()
        .map(|t| split_obs_pred(t, 8, 12).unwrap().history)
        .collect();
    assert_eq!(
        predict_srlstm(&out.model, &histories, 12).unwrap(),
        predict_srlstm(&restored, &histories, 12).unwrap()
    );
}
