//! End-to-end runs: prediction, energy surface, route, clearance and the
//! artifact formats exchanged between command-line stages.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::exec::Execution;
use crate::field::{build_energy_surface_with, EnergySurface, FieldError};
use crate::planner::{plan, route_clearance, PlanError, PlannedRoute};
use crate::prediction::{
    fad, mad, predict_constant_velocity_batch, predict_srlstm, MetricRow, PredictedTrajectory, PredictionError,
    SrLstmModel,
};
use crate::scenario::{split_obs_pred, PedestrianTrack, Scenario, ScenarioError, TrackFrame};

#[derive(Debug, Clone)]
pub enum Predictor {
    ConstantVelocity,
    SrLstm(Box<SrLstmModel>),
}

impl Predictor {
    pub fn name(&self) -> &'static str {
        match self {
            Predictor::ConstantVelocity => "cv",
            Predictor::SrLstm(_) => "srlstm",
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("predictions file line {line}: {reason}")]
    PredictionsFile { line: usize, reason: String },
}

fn last_frames(track: &PedestrianTrack, n: usize) -> PedestrianTrack {
    let skip = track.frames.len().saturating_sub(n);
    PedestrianTrack::new(track.ped_id, track.frames[skip..].to_vec(), track.frame_interval)
}

/// Predict `pred_len` future positions from the last `obs_len` observed frames of each track.
///
/// The recurrent model predicts jointly over pedestrians observed at the same
/// frames; each such group is a separate scene.
pub fn predict_tracks(
    tracks: &[PedestrianTrack],
    predictor: &Predictor,
    obs_len: usize,
    pred_len: usize,
    exec: Execution,
) -> Result<Vec<PredictedTrajectory>, PredictionError> {
    let histories: Vec<PedestrianTrack> = tracks.iter().map(|t| last_frames(t, obs_len)).collect();
    match predictor {
        Predictor::ConstantVelocity => predict_constant_velocity_batch(&histories, pred_len, exec),
        Predictor::SrLstm(model) => {
            for h in &histories {
                if h.frames.len() < 2 {
                    return Err(PredictionError::TooFewFrames {
                        ped_id: h.ped_id,
                        frames: h.frames.len(),
                    });
                }
            }
            let mut scenes: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
            for (k, h) in histories.iter().enumerate() {
                scenes.entry(h.frame_indices()).or_default().push(k);
            }
            let mut out: Vec<Option<PredictedTrajectory>> = vec![None; histories.len()];
            for members in scenes.values() {
                let group: Vec<PedestrianTrack> = members.iter().map(|&k| histories[k].clone()).collect();
                for (&k, p) in members.iter().zip(predict_srlstm(model, &group, pred_len)?) {
                    out[k] = Some(p);
                }
            }
            Ok(out.into_iter().flatten().collect())
        }
    }
}

/// Command-line style parameter overrides; `None` keeps the scenario value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamOverrides {
    pub resolution: Option<f64>,
    pub h: Option<f64>,
    pub alpha: Option<f64>,
    pub q_star: Option<f64>,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub step_cap: Option<f64>,
    pub goal_tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub seed: Option<u64>,
}

impl ParamOverrides {
    /// Apply overrides and re-validate the scenario.
    pub fn apply(&self, scenario: &mut Scenario) -> Result<(), ScenarioError> {
        let f = &mut scenario.field_params;
        let p = &mut scenario.planner_params;
        fn set<T: Copy>(slot: &mut T, value: Option<T>) {
            if let Some(v) = value {
                *slot = v;
            }
        }
        set(&mut f.grid_resolution, self.resolution);
        set(&mut f.h, self.h);
        set(&mut f.alpha, self.alpha);
        set(&mut f.q_star, self.q_star);
        set(&mut f.delta, self.delta);
        set(&mut f.gamma, self.gamma);
        set(&mut p.step_cap, self.step_cap);
        set(&mut p.goal_tolerance, self.goal_tolerance);
        set(&mut p.max_iterations, self.max_iterations);
        set(&mut p.rng_seed, self.seed);
        // a smaller step cap drags the perturbation radius down with it
        if p.perturb_radius > p.step_cap {
            p.perturb_radius = p.step_cap;
        }
        scenario.validate()
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PedestrianSummary {
    pub ped_id: i64,
    /// Mean observed speed, m/s.
    pub speed: Option<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PredictionSummary {
    pub model: String,
    pub obs_len: usize,
    pub pred_len: usize,
    /// Seconds covered by the longest prediction.
    pub horizon: f64,
    pub pedestrians: Vec<PedestrianSummary>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RouteSummary {
    pub length: f64,
    pub steps: usize,
    pub perturbation_count: usize,
    pub termination: String,
    pub final_goal_distance: f64,
    /// Absent when the scene has no pedestrians.
    pub min_clearance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StageTimings {
    pub prediction_ms: f64,
    pub surface_ms: f64,
    pub planning_ms: f64,
    pub clearance_ms: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub prediction: PredictionSummary,
    pub route: RouteSummary,
    pub timing: StageTimings,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub predictions: Vec<PredictedTrajectory>,
    pub surface: EnergySurface,
    pub route: PlannedRoute,
    pub report: RunReport,
}

#[derive(Debug, Clone)]
pub struct PlanSettings {
    pub predictor: Predictor,
    pub obs_len: usize,
    pub pred_len: usize,
    pub exec: Execution,
}

impl Default for PlanSettings {
    fn default() -> Self {
        Self {
            predictor: Predictor::ConstantVelocity,
            obs_len: 8,
            pred_len: 12,
            exec: Execution::default(),
        }
    }
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Predict, rasterize, plan and measure clearance for one scenario.
pub fn run_plan(scenario: &Scenario, settings: &PlanSettings) -> Result<PlanOutcome, PipelineError> {
    let t = Instant::now();
    let predictions = predict_tracks(
        &scenario.pedestrians,
        &settings.predictor,
        settings.obs_len,
        settings.pred_len,
        settings.exec,
    )?;
    let prediction_ms = elapsed_ms(t);

    let t = Instant::now();
    let surface = build_energy_surface_with(scenario, &predictions, settings.exec)?;
    let surface_ms = elapsed_ms(t);

    let t = Instant::now();
    let route = plan(&surface, &scenario.planner_params, scenario.start, scenario.goal)?;
    let planning_ms = elapsed_ms(t);

    let t = Instant::now();
    let min_clearance =
        (!scenario.pedestrians.is_empty()).then(|| route_clearance(&route, &predictions, &scenario.pedestrians));
    let clearance_ms = elapsed_ms(t);

    let last = route.waypoints.last().map_or(scenario.start, |w| w.position);
    let report = RunReport {
        scenario: scenario.name.clone().unwrap_or_else(|| "unnamed".into()),
        seed: scenario.planner_params.rng_seed,
        prediction: PredictionSummary {
            model: settings.predictor.name().into(),
            obs_len: settings.obs_len,
            pred_len: settings.pred_len,
            horizon: predictions
                .iter()
                .filter_map(|p| p.waypoints.last())
                .map(|w| w.time_offset)
                .fold(0.0, f64::max),
            pedestrians: scenario
                .pedestrians
                .iter()
                .map(|t| PedestrianSummary {
                    ped_id: t.ped_id,
                    speed: t.average_speed(),
                })
                .collect(),
        },
        route: RouteSummary {
            length: route.length(),
            steps: route.steps(),
            perturbation_count: route.perturbation_count(),
            termination: route.termination.as_str().into(),
            final_goal_distance: last.distance(scenario.goal),
            min_clearance,
        },
        timing: StageTimings {
            prediction_ms,
            surface_ms,
            planning_ms,
            clearance_ms,
        },
    };
    Ok(PlanOutcome {
        predictions,
        surface,
        route,
        report,
    })
}

/// Per-track results of evaluating a predictor on a dataset.
#[derive(Debug, Clone)]
pub struct DatasetEvaluation {
    pub histories: Vec<PedestrianTrack>,
    pub truths: Vec<PedestrianTrack>,
    pub predictions: Vec<PredictedTrajectory>,
    pub rows: Vec<MetricRow>,
    /// Tracks too short (or irregular) for the requested window.
    pub skipped: usize,
}

/// Split each track into its first `obs_len` / next `pred_len` frames,
/// predict, and score with MAD/FAD.
pub fn evaluate_tracks(
    tracks: &[PedestrianTrack],
    predictor: &Predictor,
    obs_len: usize,
    pred_len: usize,
    exec: Execution,
) -> Result<DatasetEvaluation, PredictionError> {
    let mut histories = Vec::new();
    let mut truths = Vec::new();
    let mut skipped = 0;
    for t in tracks {
        match split_obs_pred(t, obs_len, pred_len) {
            Ok(s) => {
                histories.push(s.history);
                truths.push(s.truth);
            }
            Err(reason) => {
                log::info!("skipping track: {reason}");
                skipped += 1;
            }
        }
    }
    let predictions = predict_tracks(&histories, predictor, obs_len, pred_len, exec)?;
    let rows = predictions
        .iter()
        .zip(&truths)
        .map(|(p, t)| {
            Ok(MetricRow {
                ped_id: p.ped_id,
                mad: mad(p, t)?,
                fad: fad(p, t)?,
            })
        })
        .collect::<Result<Vec<_>, PredictionError>>()?;
    Ok(DatasetEvaluation {
        histories,
        truths,
        predictions,
        rows,
        skipped,
    })
}

/// `ped_id,kind,step,t,x,y` rows: observed frames (`step` = frame index,
/// `t` ≤ 0 relative to the latest observation) then predicted waypoints
/// (`step` = 1.., `t` > 0).
pub fn predictions_to_csv(observed: &[PedestrianTrack], predictions: &[PredictedTrajectory]) -> String {
    let mut out = String::from("ped_id,kind,step,t,x,y\n");
    for track in observed {
        let Some(last) = track.frames.last().map(|f| f.frame) else {
            continue;
        };
        for f in &track.frames {
            let t = (f.frame - last) as f64 * track.frame_interval;
            let _ = writeln!(
                out,
                "{},observed,{},{},{},{}",
                track.ped_id, f.frame, t, f.position.x, f.position.y
            );
        }
    }
    for pred in predictions {
        for (k, w) in pred.waypoints.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},predicted,{},{},{},{}",
                pred.ped_id,
                k + 1,
                w.time_offset,
                w.position.x,
                w.position.y
            );
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionsFile {
    pub observed: Vec<PedestrianTrack>,
    pub predictions: Vec<PredictedTrajectory>,
}

pub fn parse_predictions_csv(text: &str) -> Result<PredictionsFile, PipelineError> {
    let bad = |line: usize, reason: String| PipelineError::PredictionsFile { line, reason };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "ped_id,kind,step,t,x,y" => {}
        _ => return Err(bad(1, "missing header ped_id,kind,step,t,x,y".into())),
    }
    let mut observed: BTreeMap<i64, Vec<(TrackFrame, f64)>> = BTreeMap::new();
    let mut predicted: BTreeMap<i64, Vec<(usize, crate::prediction::Waypoint)>> = BTreeMap::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 6 {
            return Err(bad(line, format!("expected 6 fields, found {}", fields.len())));
        }
        let int = |s: &str| {
            s.trim()
                .parse::<i64>()
                .map_err(|_| bad(line, format!("not an integer: {s:?}")))
        };
        let num = |s: &str| match s.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(bad(line, format!("not a finite number: {s:?}"))),
        };
        let ped_id = int(fields[0])?;
        let step = int(fields[2])?;
        let t = num(fields[3])?;
        let position = crate::scenario::Point2::new(num(fields[4])?, num(fields[5])?);
        match fields[1].trim() {
            "observed" => observed
                .entry(ped_id)
                .or_default()
                .push((TrackFrame { frame: step, position }, t)),
            "predicted" => {
                let step = usize::try_from(step).map_err(|_| bad(line, "negative prediction step".into()))?;
                predicted.entry(ped_id).or_default().push((
                    step,
                    crate::prediction::Waypoint {
                        time_offset: t,
                        position,
                    },
                ));
            }
            other => return Err(bad(line, format!("unknown kind {other:?}"))),
        }
    }
    let observed = observed
        .into_iter()
        .map(|(ped_id, mut rows)| {
            rows.sort_by_key(|(f, _)| f.frame);
            let frame_interval = match (rows.first(), rows.last()) {
                (Some((a, ta)), Some((b, tb))) if b.frame != a.frame => (tb - ta) / (b.frame - a.frame) as f64,
                _ => 0.0,
            };
            PedestrianTrack::new(ped_id, rows.into_iter().map(|(f, _)| f).collect(), frame_interval)
        })
        .collect();
    let predictions = predicted
        .into_iter()
        .map(|(ped_id, mut rows)| {
            rows.sort_by_key(|(k, _)| *k);
            let frame_interval = rows.first().map_or(0.0, |(k, w)| w.time_offset / (*k).max(1) as f64);
            PredictedTrajectory {
                ped_id,
                frame_interval,
                waypoints: rows.into_iter().map(|(_, w)| w).collect(),
            }
        })
        .collect();
    Ok(PredictionsFile { observed, predictions })
}
