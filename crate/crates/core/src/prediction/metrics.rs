use std::fmt::Write as _;

use super::{PredictedTrajectory, PredictionError};
use crate::scenario::PedestrianTrack;

fn check_lengths(pred: &PredictedTrajectory, truth: &PedestrianTrack) -> Result<usize, PredictionError> {
    let (n, m) = (pred.waypoints.len(), truth.frames.len());
    if n != m || n == 0 {
        return Err(PredictionError::LengthMismatch { left: n, right: m });
    }
    Ok(n)
}

/// Mean Euclidean distance between predicted and true positions over all steps.
pub fn mad(pred: &PredictedTrajectory, truth: &PedestrianTrack) -> Result<f64, PredictionError> {
    let n = check_lengths(pred, truth)?;
    let total: f64 = pred
        .positions()
        .zip(truth.positions())
        .map(|(p, t)| p.distance(t))
        .sum();
    Ok(total / n as f64)
}

/// Euclidean distance at the final predicted step.
pub fn fad(pred: &PredictedTrajectory, truth: &PedestrianTrack) -> Result<f64, PredictionError> {
    let n = check_lengths(pred, truth)?;
    Ok(pred.waypoints[n - 1].position.distance(truth.frames[n - 1].position))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub ped_id: i64,
    pub mad: f64,
    pub fad: f64,
}

/// Mean MAD and mean FAD over rows; `None` for an empty slice.
pub fn aggregate(rows: &[MetricRow]) -> Option<(f64, f64)> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let mad = rows.iter().map(|r| r.mad).sum::<f64>() / n;
    let fad = rows.iter().map(|r| r.fad).sum::<f64>() / n;
    Some((mad, fad))
}

/// `ped_id,mad,fad` rows followed by a `mean` aggregate row.
pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("ped_id,mad,fad\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.ped_id, r.mad, r.fad);
    }
    if let Some((m, f)) = aggregate(rows) {
        let _ = writeln!(out, "mean,{m},{f}");
    }
    out
}
