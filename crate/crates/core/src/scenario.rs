//! Riding-environment description: geometry primitives, scenario files and
//! pedestrian trajectory datasets.
//!
//! Scenario files are JSON documents; trajectory datasets use the common
//! whitespace-separated `frame_id ped_id x y` layout of the ETH/UCY
//! preprocessed releases.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A position (or displacement) in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Linear boundary `g(q) = a·x + b·y + c`, with `g ≥ 0` on the drivable side.
///
/// The normal `(a, b)` is kept at unit length so `g` is a signed distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HalfPlane {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, ScenarioError> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(ScenarioError::semantic("boundary coefficients must be finite"));
        }
        let norm = (a * a + b * b).sqrt();
        if norm == 0.0 {
            return Err(ScenarioError::semantic("boundary normal (a, b) must be non-zero"));
        }
        // already-unit normals are kept bit-for-bit so that re-parsing is stable
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Self { a, b, c });
        }
        Ok(Self {
            a: a / norm,
            b: b / norm,
            c: c / norm,
        })
    }

    pub fn eval(&self, q: Point2) -> f64 {
        self.a * q.x + self.b * q.y + self.c
    }
}

/// Axis-aligned rectangle used for explicit grid extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub min: Point2,
    pub max: Point2,
}

impl Extent {
    pub fn contains_with_margin(&self, q: Point2, margin: f64) -> bool {
        q.x - margin >= self.min.x
            && q.x + margin <= self.max.x
            && q.y - margin >= self.min.y
            && q.y + margin <= self.max.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackFrame {
    pub frame: i64,
    pub position: Point2,
}

/// Time-stamped positions of one pedestrian.
///
/// `frame_interval` is the time in seconds between consecutive samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PedestrianTrack {
    pub ped_id: i64,
    pub frames: Vec<TrackFrame>,
    pub frame_interval: f64,
}

impl PedestrianTrack {
    pub fn new(ped_id: i64, frames: Vec<TrackFrame>, frame_interval: f64) -> Self {
        Self {
            ped_id,
            frames,
            frame_interval,
        }
    }

    pub fn from_positions(ped_id: i64, start_frame: i64, positions: &[Point2], frame_interval: f64) -> Self {
        let frames = positions
            .iter()
            .enumerate()
            .map(|(k, &position)| TrackFrame {
                frame: start_frame + k as i64,
                position,
            })
            .collect();
        Self::new(ped_id, frames, frame_interval)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn latest(&self) -> Option<Point2> {
        self.frames.last().map(|f| f.position)
    }

    pub fn positions(&self) -> impl Iterator<Item = Point2> + '_ {
        self.frames.iter().map(|f| f.position)
    }

    pub fn frame_indices(&self) -> Vec<i64> {
        self.frames.iter().map(|f| f.frame).collect()
    }

    /// Path length divided by elapsed time; `None` with fewer than two samples.
    pub fn average_speed(&self) -> Option<f64> {
        if self.frames.len() < 2 || self.frame_interval <= 0.0 {
            return None;
        }
        let length: f64 = self
            .frames
            .windows(2)
            .map(|w| w[1].position.distance(w[0].position))
            .sum();
        Some(length / ((self.frames.len() - 1) as f64 * self.frame_interval))
    }

    fn check_invariants(&self) -> Result<(), String> {
        if !(self.frame_interval.is_finite() && self.frame_interval > 0.0) {
            return Err(format!("pedestrian {}: frame_interval must be positive", self.ped_id));
        }
        if self.frames.is_empty() {
            return Err(format!("pedestrian {}: track has no frames", self.ped_id));
        }
        for w in self.frames.windows(2) {
            if w[1].frame <= w[0].frame {
                return Err(format!(
                    "pedestrian {}: frame indices must be strictly increasing ({} after {})",
                    self.ped_id, w[1].frame, w[0].frame
                ));
            }
        }
        if let Some(f) = self.frames.iter().find(|f| !f.position.is_finite()) {
            return Err(format!(
                "pedestrian {}: non-finite position at frame {}",
                self.ped_id, f.frame
            ));
        }
        Ok(())
    }
}

/// Parameters of the artificial potential field and its rasterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldParams {
    /// Attraction strength.
    pub h: f64,
    /// Boundary denominator constant.
    pub alpha: f64,
    /// Obstacle influence radius, meters.
    pub q_star: f64,
    /// Repulsion scale.
    pub delta: f64,
    /// Meters per grid cell.
    pub grid_resolution: f64,
    /// Per-frame decay of predicted-waypoint obstacle weights.
    pub gamma: f64,
    /// Explicit grid extent; derived from the scene when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extent: Option<Extent>,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self {
            h: 1.0,
            alpha: 0.1,
            q_star: 2.0,
            delta: 0.5,
            grid_resolution: 0.25,
            gamma: 0.9,
            extent: None,
        }
    }
}

impl FieldParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        positive("h", self.h)?;
        positive("alpha", self.alpha)?;
        positive("q_star", self.q_star)?;
        positive("delta", self.delta)?;
        positive("grid_resolution", self.grid_resolution)?;
        if !(self.gamma.is_finite() && self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(ScenarioError::semantic("gamma must lie in (0, 1]"));
        }
        if let Some(e) = &self.extent {
            if !(e.min.is_finite() && e.max.is_finite() && e.max.x > e.min.x && e.max.y > e.min.y) {
                return Err(ScenarioError::semantic("extent must have max > min on both axes"));
            }
        }
        Ok(())
    }
}

/// Gradient-descent planner settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    pub max_iterations: usize,
    /// Fixed step length, meters; at most 1.0.
    pub step_cap: f64,
    /// Distance to the goal that ends planning, meters.
    pub goal_tolerance: f64,
    /// Number of recent waypoints inspected for a stall.
    pub stall_window: usize,
    /// Window diameter below which the planner counts as stalled, meters.
    pub stall_epsilon: f64,
    /// Largest random jump out of a local minimum, meters.
    pub perturb_radius: f64,
    pub rng_seed: u64,
}

pub const MAX_STEP_CAP: f64 = 1.0;

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            step_cap: 1.0,
            goal_tolerance: 2.0,
            stall_window: 10,
            stall_epsilon: 2.0,
            perturb_radius: 1.0,
            rng_seed: 0,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.step_cap > 0.0 && self.step_cap <= MAX_STEP_CAP) {
            return Err(ScenarioError::semantic("step_cap must lie in (0, 1.0]"));
        }
        positive("goal_tolerance", self.goal_tolerance)?;
        if self.max_iterations == 0 {
            return Err(ScenarioError::semantic("max_iterations must be positive"));
        }
        if self.stall_window < 2 {
            return Err(ScenarioError::semantic("stall_window must be at least 2"));
        }
        positive("stall_epsilon", self.stall_epsilon)?;
        if !(self.perturb_radius.is_finite() && self.perturb_radius >= 0.0) {
            return Err(ScenarioError::semantic("perturb_radius must be non-negative"));
        }
        if self.perturb_radius > self.step_cap {
            return Err(ScenarioError::semantic("perturb_radius must not exceed step_cap"));
        }
        Ok(())
    }
}

fn positive(name: &str, value: f64) -> Result<(), ScenarioError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ScenarioError::Semantic(format!("{name} must be positive")))
    }
}

/// A validated riding environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub boundaries: Vec<HalfPlane>,
    pub start: Point2,
    pub goal: Point2,
    pub pedestrians: Vec<PedestrianTrack>,
    pub field_params: FieldParams,
    pub planner_params: PlannerParams,
}

impl Scenario {
    /// True when `q` satisfies every boundary strictly.
    pub fn strictly_inside(&self, q: Point2) -> bool {
        self.boundaries.iter().all(|b| b.eval(q) > 0.0)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.start.is_finite() || !self.goal.is_finite() {
            return Err(ScenarioError::semantic("start and goal must be finite"));
        }
        self.field_params.validate()?;
        self.planner_params.validate()?;
        if !self.strictly_inside(self.start) {
            return Err(ScenarioError::semantic("start lies outside the drivable region"));
        }
        if !self.strictly_inside(self.goal) {
            return Err(ScenarioError::semantic("goal lies outside the drivable region"));
        }
        for track in &self.pedestrians {
            track.check_invariants().map_err(ScenarioError::Semantic)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Semantic(String),
}

impl ScenarioError {
    fn semantic(msg: &str) -> Self {
        ScenarioError::Semantic(msg.to_string())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    boundaries: Vec<HalfPlane>,
    start: Point2,
    goal: Point2,
    #[serde(default)]
    pedestrians: Vec<PedestrianDoc>,
    #[serde(default)]
    field_params: FieldParams,
    #[serde(default)]
    planner_params: PlannerParams,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PedestrianDoc {
    id: i64,
    frame_interval: f64,
    frames: Vec<(i64, f64, f64)>,
}

/// Parse and validate a JSON scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let boundaries = doc
        .boundaries
        .iter()
        .map(|b| HalfPlane::new(b.a, b.b, b.c))
        .collect::<Result<Vec<_>, _>>()?;
    let pedestrians = doc
        .pedestrians
        .into_iter()
        .map(|p| {
            let frames = p
                .frames
                .into_iter()
                .map(|(frame, x, y)| TrackFrame {
                    frame,
                    position: Point2::new(x, y),
                })
                .collect();
            PedestrianTrack::new(p.id, frames, p.frame_interval)
        })
        .collect();
    let scenario = Scenario {
        name: doc.name,
        boundaries,
        start: doc.start,
        goal: doc.goal,
        pedestrians,
        field_params: doc.field_params,
        planner_params: doc.planner_params,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Serialize a scenario back into the JSON document format.
pub fn scenario_to_json(scenario: &Scenario) -> String {
    let doc = ScenarioDoc {
        name: scenario.name.clone(),
        boundaries: scenario.boundaries.clone(),
        start: scenario.start,
        goal: scenario.goal,
        pedestrians: scenario
            .pedestrians
            .iter()
            .map(|t| PedestrianDoc {
                id: t.ped_id,
                frame_interval: t.frame_interval,
                frames: t.frames.iter().map(|f| (f.frame, f.position.x, f.position.y)).collect(),
            })
            .collect(),
        field_params: scenario.field_params.clone(),
        planner_params: scenario.planner_params.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("scenario serialization cannot fail")
}

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate frame {frame} for pedestrian {ped_id}")]
    DuplicateFrame { line: usize, ped_id: i64, frame: i64 },
}

/// Tracks read from a trajectory dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetLoad {
    /// Sorted by pedestrian id, each track frame-sorted.
    pub tracks: Vec<PedestrianTrack>,
    /// Pedestrians dropped for having fewer than two frames.
    pub dropped_short: usize,
}

fn parse_integral(field: &str, what: &str, line: usize) -> Result<i64, DatasetError> {
    let value: f64 = field.parse().map_err(|_| DatasetError::Malformed {
        line,
        reason: format!("{what} is not numeric: {field:?}"),
    })?;
    if !value.is_finite() || value.fract() != 0.0 || value.abs() > 9.0e15 {
        return Err(DatasetError::Malformed {
            line,
            reason: format!("{what} is not an integer: {field:?}"),
        });
    }
    Ok(value as i64)
}

fn parse_coordinate(field: &str, what: &str, line: usize) -> Result<f64, DatasetError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DatasetError::Malformed {
            line,
            reason: format!("{what} is not a finite number: {field:?}"),
        }),
    }
}

/// Read `frame_id ped_id x y` records into per-pedestrian tracks.
///
/// Frame and pedestrian ids may be written as integral floats (`10.0`), as
/// in the widely circulated preprocessed files. Lines starting with `#` and
/// blank lines are skipped.
pub fn load_trajectory_dataset(text: &str, frame_interval: f64) -> Result<DatasetLoad, DatasetError> {
    let mut grouped: BTreeMap<i64, BTreeMap<i64, Point2>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(DatasetError::Malformed {
                line,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let frame = parse_integral(fields[0], "frame_id", line)?;
        let ped_id = parse_integral(fields[1], "ped_id", line)?;
        let x = parse_coordinate(fields[2], "x", line)?;
        let y = parse_coordinate(fields[3], "y", line)?;
        let frames = grouped.entry(ped_id).or_default();
        if frames.insert(frame, Point2::new(x, y)).is_some() {
            return Err(DatasetError::DuplicateFrame { line, ped_id, frame });
        }
    }

    let mut tracks = Vec::with_capacity(grouped.len());
    let mut dropped_short = 0;
    for (ped_id, frames) in grouped {
        if frames.len() < 2 {
            dropped_short += 1;
            continue;
        }
        let frames = frames
            .into_iter()
            .map(|(frame, position)| TrackFrame { frame, position })
            .collect();
        tracks.push(PedestrianTrack::new(ped_id, frames, frame_interval));
    }
    if dropped_short > 0 {
        log::warn!("dropped {dropped_short} track(s) with fewer than two frames");
    }
    Ok(DatasetLoad { tracks, dropped_short })
}

/// Observation / ground-truth halves of a track.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsPredSplit {
    pub history: PedestrianTrack,
    pub truth: PedestrianTrack,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitSkip {
    #[error("pedestrian {ped_id}: {available} frames available, {required} required")]
    InsufficientFrames {
        ped_id: i64,
        available: usize,
        required: usize,
    },
    #[error("pedestrian {ped_id}: frame spacing is not uniform")]
    NonUniformSpacing { ped_id: i64 },
    #[error("observation and prediction lengths must both be positive")]
    EmptyWindow,
}

/// Split the first `obs_len + pred_len` frames of `track` into history and truth.
pub fn split_obs_pred(track: &PedestrianTrack, obs_len: usize, pred_len: usize) -> Result<ObsPredSplit, SplitSkip> {
    if obs_len == 0 || pred_len == 0 {
        return Err(SplitSkip::EmptyWindow);
    }
    let required = obs_len + pred_len;
    if track.frames.len() < required {
        return Err(SplitSkip::InsufficientFrames {
            ped_id: track.ped_id,
            available: track.frames.len(),
            required,
        });
    }
    let window = &track.frames[..required];
    if required >= 2 {
        let step = window[1].frame - window[0].frame;
        if window.windows(2).any(|w| w[1].frame - w[0].frame != step) {
            return Err(SplitSkip::NonUniformSpacing { ped_id: track.ped_id });
        }
    }
    let (obs, truth) = window.split_at(obs_len);
    Ok(ObsPredSplit {
        history: PedestrianTrack::new(track.ped_id, obs.to_vec(), track.frame_interval),
        truth: PedestrianTrack::new(track.ped_id, truth.to_vec(), track.frame_interval),
    })
}
