//! Pedestrian trajectory prediction and displacement metrics.

pub mod autodiff;
mod metrics;
mod srlstm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::scenario::{PedestrianTrack, Point2};

pub use metrics::{aggregate, fad, mad, metrics_csv, MetricRow};
pub use srlstm::{
    attention_weights, batch_loss, batch_loss_and_gradient, lstm_step, predict_srlstm, predict_srlstm_with,
    refine_states, train_desk_scale, Hyper, RecurrentState, SrLstmModel, TrainingConfig, TrainingOutcome,
    TrainingSample, CHECKPOINT_SCHEMA,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    /// Seconds after the last observed frame.
    pub time_offset: f64,
    pub position: Point2,
}

/// Future positions of one pedestrian, one per frame interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedTrajectory {
    pub ped_id: i64,
    pub frame_interval: f64,
    pub waypoints: Vec<Waypoint>,
}

impl PredictedTrajectory {
    pub fn from_positions(ped_id: i64, frame_interval: f64, positions: impl IntoIterator<Item = Point2>) -> Self {
        let waypoints = positions
            .into_iter()
            .enumerate()
            .map(|(k, position)| Waypoint {
                time_offset: (k + 1) as f64 * frame_interval,
                position,
            })
            .collect();
        Self {
            ped_id,
            frame_interval,
            waypoints,
        }
    }

    pub fn positions(&self) -> impl Iterator<Item = Point2> + '_ {
        self.waypoints.iter().map(|w| w.position)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PredictionError {
    #[error("pedestrian {ped_id}: at least two observed frames are required, found {frames}")]
    TooFewFrames { ped_id: i64, frames: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("pedestrian {ped_id}: observation frames are not aligned with the other histories")]
    MisalignedFrames { ped_id: i64 },
    #[error("no usable training tracks")]
    EmptyTrainingSet,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Extend the last observed displacement linearly for `pred_len` frames.
pub fn predict_constant_velocity(
    history: &PedestrianTrack,
    pred_len: usize,
) -> Result<PredictedTrajectory, PredictionError> {
    let n = history.frames.len();
    if n < 2 {
        return Err(PredictionError::TooFewFrames {
            ped_id: history.ped_id,
            frames: n,
        });
    }
    let last = history.frames[n - 1].position;
    let velocity = last - history.frames[n - 2].position;
    Ok(PredictedTrajectory::from_positions(
        history.ped_id,
        history.frame_interval,
        (1..=pred_len).map(|k| last + velocity * k as f64),
    ))
}

/// Constant-velocity predictions for many pedestrians.
pub fn predict_constant_velocity_batch(
    histories: &[PedestrianTrack],
    pred_len: usize,
    exec: Execution,
) -> Result<Vec<PredictedTrajectory>, PredictionError> {
    exec.map(histories, |h| predict_constant_velocity(h, pred_len))
        .into_iter()
        .collect()
}
