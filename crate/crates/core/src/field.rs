//! Artificial potential field and its rasterized energy surface.
//!
//! The total potential is the sum of a conic attractive well centred on the
//! goal, a boundary term built from the half-planes of the drivable region,
//! and an obstacle term contributed by observed and predicted pedestrian
//! positions:
//!
//! ```text
//! U_att(q) = h·‖q − goal‖
//! U_bnd(q) = 1 / (α + Σ_i (g_i(q) + |g_i(q)|))
//! U_obs(q) = (1 / 2δ)·(1/D(q) − 1/Q*)²   if D(q) ≤ Q*, else 0
//! U(q)     = U_att(q) + (U_bnd(q) + U_obs(q))
//! ```
//!
//! `D(q)` is the weighted distance to the closest obstacle point (distance
//! divided by the point's weight). It is clamped below at 5 % of `Q*`, which
//! bounds `U_obs` by [`repulsion_ceiling`].

use std::fmt::Write as _;

use thiserror::Error;

use crate::exec::Execution;
use crate::prediction::PredictedTrajectory;
use crate::scenario::{Extent, FieldParams, HalfPlane, Point2, Scenario};

/// Fraction of `q_star` below which obstacle distances are clamped.
pub const MIN_DISTANCE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstaclePoint {
    pub position: Point2,
    /// Seconds after the latest observation; zero for observed positions.
    pub time_offset: f64,
    /// Confidence weight in (0, 1].
    pub weight: f64,
}

impl ObstaclePoint {
    pub fn observed(position: Point2) -> Self {
        Self {
            position,
            time_offset: 0.0,
            weight: 1.0,
        }
    }
}

pub fn attractive_potential(q: Point2, goal: Point2, h: f64) -> f64 {
    h * q.distance(goal)
}

pub fn boundary_repulsion(q: Point2, boundaries: &[HalfPlane], alpha: f64) -> f64 {
    let sum: f64 = boundaries
        .iter()
        .map(|b| {
            let g = b.eval(q);
            g + g.abs()
        })
        .sum();
    1.0 / (alpha + sum)
}

/// Largest value [`obstacle_repulsion`] can take.
pub fn repulsion_ceiling(q_star: f64, delta: f64) -> f64 {
    let inv = 1.0 / (MIN_DISTANCE_FRACTION * q_star) - 1.0 / q_star;
    inv * inv / (2.0 * delta)
}

/// Weighted distance to the closest obstacle; `+∞` when there are none.
pub fn weighted_obstacle_distance(q: Point2, obstacles: &[ObstaclePoint]) -> f64 {
    obstacles
        .iter()
        .map(|o| q.distance(o.position) / o.weight)
        .fold(f64::INFINITY, f64::min)
}

pub fn obstacle_repulsion(q: Point2, obstacles: &[ObstaclePoint], q_star: f64, delta: f64) -> f64 {
    repulsion_at_distance(weighted_obstacle_distance(q, obstacles), q_star, delta)
}

/// Obstacle term as a function of the (weighted) closest distance.
pub fn repulsion_at_distance(distance: f64, q_star: f64, delta: f64) -> f64 {
    if distance > q_star {
        return 0.0;
    }
    let d = distance.max(MIN_DISTANCE_FRACTION * q_star);
    let inv = 1.0 / d - 1.0 / q_star;
    inv * inv / (2.0 * delta)
}

/// Everything needed to evaluate the total potential pointwise.
#[derive(Debug, Clone, Copy)]
pub struct FieldInputs<'a> {
    pub goal: Point2,
    pub boundaries: &'a [HalfPlane],
    pub obstacles: &'a [ObstaclePoint],
    pub params: &'a FieldParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialComponents {
    pub attractive: f64,
    pub boundary: f64,
    pub obstacle: f64,
}

impl PotentialComponents {
    pub fn repulsive(&self) -> f64 {
        self.boundary + self.obstacle
    }

    pub fn total(&self) -> f64 {
        self.attractive + self.repulsive()
    }
}

pub fn potential_components(q: Point2, inputs: &FieldInputs<'_>) -> PotentialComponents {
    let p = inputs.params;
    PotentialComponents {
        attractive: attractive_potential(q, inputs.goal, p.h),
        boundary: boundary_repulsion(q, inputs.boundaries, p.alpha),
        obstacle: obstacle_repulsion(q, inputs.obstacles, p.q_star, p.delta),
    }
}

pub fn total_potential(q: Point2, inputs: &FieldInputs<'_>) -> f64 {
    potential_components(q, inputs).total()
}

/// Placement of a regular grid in the world frame.
///
/// Cell `(i, j)` covers `[origin.x + i·res, origin.x + (i+1)·res)` and likewise
/// in `y`; values are sampled at cell centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub origin: Point2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl GridGeometry {
    pub fn cell_center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.origin.x + (i as f64 + 0.5) * self.resolution,
            self.origin.y + (j as f64 + 0.5) * self.resolution,
        )
    }

    /// Continuous grid coordinates; cell centres land on integers.
    pub fn to_grid(&self, q: Point2) -> (f64, f64) {
        (
            (q.x - self.origin.x) / self.resolution - 0.5,
            (q.y - self.origin.y) / self.resolution - 0.5,
        )
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell containing `q`, if any.
    pub fn cell_of(&self, q: Point2) -> Option<(usize, usize)> {
        let fx = ((q.x - self.origin.x) / self.resolution).floor();
        let fy = ((q.y - self.origin.y) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    /// True when `q` is at least one cell centre away from every edge, the
    /// region where central differences and bilinear interpolation are defined.
    pub fn is_interior(&self, q: Point2) -> bool {
        if self.width < 3 || self.height < 3 || !q.is_finite() {
            return false;
        }
        let (u, v) = self.to_grid(q);
        u >= 1.0 && u <= (self.width - 2) as f64 && v >= 1.0 && v <= (self.height - 2) as f64
    }

    pub fn from_extent(extent: &Extent, resolution: f64) -> Self {
        let width = ((extent.max.x - extent.min.x) / resolution).ceil().max(1.0) as usize;
        let height = ((extent.max.y - extent.min.y) / resolution).ceil().max(1.0) as usize;
        Self {
            origin: extent.min,
            resolution,
            width,
            height,
        }
    }

    pub fn extent(&self) -> Extent {
        Extent {
            min: self.origin,
            max: Point2::new(
                self.origin.x + self.width as f64 * self.resolution,
                self.origin.y + self.height as f64 * self.resolution,
            ),
        }
    }
}

/// Attractive and repulsive layers kept alongside the total.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceComponents {
    pub attractive: Vec<f64>,
    pub repulsive: Vec<f64>,
}

/// Rasterized total potential, row-major with row `j` at increasing `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySurface {
    pub geometry: GridGeometry,
    pub values: Vec<f64>,
    pub components: Option<SurfaceComponents>,
}

impl EnergySurface {
    /// Surface from raw samples; used for synthetic test fields.
    pub fn from_fn(geometry: GridGeometry, f: impl Fn(Point2) -> f64) -> Self {
        let mut values = Vec::with_capacity(geometry.len());
        for j in 0..geometry.height {
            for i in 0..geometry.width {
                values.push(f(geometry.cell_center(i, j)));
            }
        }
        Self {
            geometry,
            values,
            components: None,
        }
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.geometry.index(i, j)]
    }

    /// Bilinear interpolation between cell centres; `None` outside the
    /// convex hull of the centres.
    pub fn interpolate(&self, q: Point2) -> Option<f64> {
        let g = &self.geometry;
        let (u, v) = g.to_grid(q);
        if !(u >= 0.0 && v >= 0.0 && u <= (g.width - 1) as f64 && v <= (g.height - 1) as f64) {
            return None;
        }
        let i0 = (u.floor() as usize).min(g.width.saturating_sub(2));
        let j0 = (v.floor() as usize).min(g.height.saturating_sub(2));
        let (i1, j1) = ((i0 + 1).min(g.width - 1), (j0 + 1).min(g.height - 1));
        let (tx, ty) = (u - i0 as f64, v - j0 as f64);
        let bottom = self.value(i0, j0) * (1.0 - tx) + self.value(i1, j0) * tx;
        let top = self.value(i0, j1) * (1.0 - tx) + self.value(i1, j1) * tx;
        Some(bottom * (1.0 - ty) + top * ty)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn argmin(&self) -> (usize, usize) {
        let k = argmin_index(&self.values);
        (k % self.geometry.width, k / self.geometry.width)
    }
}

pub(crate) fn argmin_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("grid extent does not cover {entity} with a margin of {margin} m")]
    GridTooSmall { entity: String, margin: f64 },
    #[error("grid must be at least 3×3 cells, got {width}×{height}")]
    GridDegenerate { width: usize, height: usize },
    #[error("invalid surface: {0}")]
    InvalidSurface(String),
}

/// Evaluate the field at every cell centre.
pub fn rasterize(geometry: GridGeometry, inputs: &FieldInputs<'_>, exec: Execution) -> EnergySurface {
    let n = geometry.len();
    let mut cells = vec![
        PotentialComponents {
            attractive: 0.0,
            boundary: 0.0,
            obstacle: 0.0
        };
        n
    ];
    exec.fill_rows(&mut cells, geometry.width, |j, row| {
        for (i, cell) in row.iter_mut().enumerate() {
            *cell = potential_components(geometry.cell_center(i, j), inputs);
        }
    });
    let attractive = cells.iter().map(|c| c.attractive).collect();
    let repulsive = cells.iter().map(|c| c.repulsive()).collect();
    let values = cells.iter().map(|c| c.total()).collect();
    EnergySurface {
        geometry,
        values,
        components: Some(SurfaceComponents { attractive, repulsive }),
    }
}

/// An obstacle point together with a description for error messages.
#[derive(Debug, Clone)]
pub struct LabelledObstacle {
    pub point: ObstaclePoint,
    pub label: String,
}

/// Latest observed position of every pedestrian plus every predicted
/// waypoint, the latter weighted by `gamma^(t / frame_interval)`.
pub fn collect_obstacles(
    scenario: &Scenario,
    predictions: &[PredictedTrajectory],
    gamma: f64,
) -> Vec<LabelledObstacle> {
    let mut out = Vec::new();
    for track in &scenario.pedestrians {
        if let Some(p) = track.latest() {
            out.push(LabelledObstacle {
                point: ObstaclePoint::observed(p),
                label: format!("pedestrian {} observed position {}", track.ped_id, p),
            });
        }
    }
    for pred in predictions {
        for (k, w) in pred.waypoints.iter().enumerate() {
            out.push(LabelledObstacle {
                point: ObstaclePoint {
                    position: w.position,
                    time_offset: w.time_offset,
                    weight: gamma.powf(w.time_offset / pred.frame_interval),
                },
                label: format!("pedestrian {} predicted waypoint {} {}", pred.ped_id, k + 1, w.position),
            });
        }
    }
    out
}

fn auto_extent(points: impl Iterator<Item = Point2>, margin: f64, resolution: f64) -> Extent {
    let (mut lo, mut hi) = (
        Point2::new(f64::INFINITY, f64::INFINITY),
        Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for p in points {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let snap_down = |v: f64| ((v - margin) / resolution).floor() * resolution;
    let snap_up = |v: f64| ((v + margin) / resolution).ceil() * resolution;
    Extent {
        min: Point2::new(snap_down(lo.x), snap_down(lo.y)),
        max: Point2::new(snap_up(hi.x), snap_up(hi.y)),
    }
}

/// Build the energy surface for a scenario and its pedestrian predictions.
pub fn build_energy_surface(
    scenario: &Scenario,
    predictions: &[PredictedTrajectory],
) -> Result<EnergySurface, FieldError> {
    build_energy_surface_with(scenario, predictions, Execution::default())
}

pub fn build_energy_surface_with(
    scenario: &Scenario,
    predictions: &[PredictedTrajectory],
    exec: Execution,
) -> Result<EnergySurface, FieldError> {
    let params = &scenario.field_params;
    let labelled = collect_obstacles(scenario, predictions, params.gamma);
    let margin = params.q_star;

    let extent = match params.extent {
        Some(extent) => {
            let named = [
                ("start".to_string(), scenario.start),
                ("goal".to_string(), scenario.goal),
            ];
            let uncovered = named
                .into_iter()
                .chain(labelled.iter().map(|o| (o.label.clone(), o.point.position)))
                .find(|(_, p)| !extent.contains_with_margin(*p, margin));
            if let Some((entity, _)) = uncovered {
                return Err(FieldError::GridTooSmall { entity, margin });
            }
            extent
        }
        None => {
            // pad by one influence radius plus two cells so the planner interior covers the scene
            let pad = margin + 2.0 * params.grid_resolution;
            let pts = [scenario.start, scenario.goal]
                .into_iter()
                .chain(labelled.iter().map(|o| o.point.position));
            auto_extent(pts, pad, params.grid_resolution)
        }
    };
    let geometry = GridGeometry::from_extent(&extent, params.grid_resolution);
    if geometry.width < 3 || geometry.height < 3 {
        return Err(FieldError::GridDegenerate {
            width: geometry.width,
            height: geometry.height,
        });
    }
    let obstacles: Vec<ObstaclePoint> = labelled.into_iter().map(|o| o.point).collect();
    let inputs = FieldInputs {
        goal: scenario.goal,
        boundaries: &scenario.boundaries,
        obstacles: &obstacles,
        params,
    };
    Ok(rasterize(geometry, &inputs, exec))
}

/// `x,y,u_total,u_att,u_rep` per cell, followed by a `# grid` comment that
/// records the exact geometry.
pub fn surface_to_csv(surface: &EnergySurface) -> String {
    let g = &surface.geometry;
    let mut out = String::with_capacity(g.len() * 48);
    out.push_str("x,y,u_total,u_att,u_rep\n");
    for j in 0..g.height {
        for i in 0..g.width {
            let k = g.index(i, j);
            let c = g.cell_center(i, j);
            let (att, rep) = match &surface.components {
                Some(comp) => (comp.attractive[k], comp.repulsive[k]),
                None => (0.0, surface.values[k]),
            };
            let _ = writeln!(out, "{},{},{},{},{}", c.x, c.y, surface.values[k], att, rep);
        }
    }
    let _ = writeln!(
        out,
        "# grid origin_x={} origin_y={} resolution={} width={} height={}",
        g.origin.x, g.origin.y, g.resolution, g.width, g.height
    );
    out
}

fn parse_grid_comment(line: &str) -> Result<GridGeometry, FieldError> {
    let bad = |m: &str| FieldError::InvalidSurface(format!("grid comment: {m}"));
    let mut ox = None;
    let mut oy = None;
    let mut res = None;
    let mut w = None;
    let mut h = None;
    for token in line.trim_start_matches('#').split_whitespace().skip(1) {
        let (key, value) = token.split_once('=').ok_or_else(|| bad(token))?;
        match key {
            "origin_x" => ox = value.parse::<f64>().ok(),
            "origin_y" => oy = value.parse::<f64>().ok(),
            "resolution" => res = value.parse::<f64>().ok(),
            "width" => w = value.parse::<usize>().ok(),
            "height" => h = value.parse::<usize>().ok(),
            _ => return Err(bad(key)),
        }
    }
    match (ox, oy, res, w, h) {
        (Some(ox), Some(oy), Some(resolution), Some(width), Some(height)) if resolution > 0.0 => Ok(GridGeometry {
            origin: Point2::new(ox, oy),
            resolution,
            width,
            height,
        }),
        _ => Err(bad("missing or invalid field")),
    }
}

/// Read a surface written by [`surface_to_csv`].
pub fn parse_surface_csv(text: &str) -> Result<EnergySurface, FieldError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "x,y,u_total,u_att,u_rep" => {}
        _ => {
            return Err(FieldError::InvalidSurface(
                "missing header x,y,u_total,u_att,u_rep".into(),
            ))
        }
    }
    let mut values = Vec::new();
    let mut attractive = Vec::new();
    let mut repulsive = Vec::new();
    let mut centers = Vec::new();
    let mut geometry = None;
    for (idx, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("# grid") {
            geometry = Some(parse_grid_comment(line)?);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match fields {
            Ok(f) if f.len() == 5 => {
                centers.push(Point2::new(f[0], f[1]));
                values.push(f[2]);
                attractive.push(f[3]);
                repulsive.push(f[4]);
            }
            _ => {
                return Err(FieldError::InvalidSurface(format!(
                    "line {}: expected 5 numeric fields",
                    idx + 2
                )))
            }
        }
    }
    let geometry = match geometry {
        Some(g) => g,
        None => infer_geometry(&centers)?,
    };
    if geometry.len() != values.len() {
        return Err(FieldError::InvalidSurface(format!(
            "grid declares {}×{} cells but {} rows were read",
            geometry.width,
            geometry.height,
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(FieldError::InvalidSurface("non-finite potential value".into()));
    }
    Ok(EnergySurface {
        geometry,
        values,
        components: Some(SurfaceComponents { attractive, repulsive }),
    })
}

fn infer_geometry(centers: &[Point2]) -> Result<GridGeometry, FieldError> {
    let first = *centers
        .first()
        .ok_or_else(|| FieldError::InvalidSurface("no cells".into()))?;
    let width = centers.iter().take_while(|c| c.y == first.y).count();
    if width < 2 || !centers.len().is_multiple_of(width) {
        return Err(FieldError::InvalidSurface("cannot infer grid dimensions".into()));
    }
    let resolution = centers[1].x - first.x;
    Ok(GridGeometry {
        origin: Point2::new(first.x - resolution / 2.0, first.y - resolution / 2.0),
        resolution,
        width,
        height: centers.len() / width,
    })
}
