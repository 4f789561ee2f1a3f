//! Normalized gradient descent over a rasterized energy surface, with random
//! perturbation out of local minima.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::Execution;
use crate::field::EnergySurface;
use crate::prediction::PredictedTrajectory;
use crate::scenario::{PedestrianTrack, PlannerParams, Point2};

/// Candidates drawn by [`perturb`] before giving up.
pub const PERTURB_ATTEMPTS: usize = 100;
/// A perturbation may raise the potential to at most this multiple of the current value.
pub const PERTURB_UPHILL_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSample {
    pub gx: f64,
    pub gy: f64,
}

impl GradientSample {
    pub fn norm(&self) -> f64 {
        (self.gx * self.gx + self.gy * self.gy).sqrt()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("{what} {point} lies outside the surface interior")]
    OutsideInterior { what: &'static str, point: Point2 },
    #[error("no admissible perturbation found around {point} after {attempts} candidates")]
    PerturbationFailed { point: Point2, attempts: usize },
    #[error("invalid route: {0}")]
    InvalidRoute(String),
}

fn central_difference(surface: &EnergySurface, i: usize, j: usize) -> (f64, f64) {
    let two_res = 2.0 * surface.geometry.resolution;
    (
        (surface.value(i + 1, j) - surface.value(i - 1, j)) / two_res,
        (surface.value(i, j + 1) - surface.value(i, j - 1)) / two_res,
    )
}

/// ∇U at `q`: cell-centre central differences, bilinearly interpolated.
///
/// Equivalently, the central difference (step = one cell) of the bilinear
/// interpolant of the surface.
pub fn surface_gradient(surface: &EnergySurface, q: Point2) -> Result<GradientSample, PlanError> {
    let g = &surface.geometry;
    if !g.is_interior(q) {
        return Err(PlanError::OutsideInterior {
            what: "query point",
            point: q,
        });
    }
    let (u, v) = g.to_grid(q);
    let (i0, j0) = (u.floor() as usize, v.floor() as usize);
    let (tx, ty) = (u - i0 as f64, v - j0 as f64);
    let corners = [
        (i0, j0, (1.0 - tx) * (1.0 - ty)),
        (i0 + 1, j0, tx * (1.0 - ty)),
        (i0, j0 + 1, (1.0 - tx) * ty),
        (i0 + 1, j0 + 1, tx * ty),
    ];
    let (mut gx, mut gy) = (0.0, 0.0);
    for (i, j, w) in corners {
        if w != 0.0 {
            let (cx, cy) = central_difference(surface, i, j);
            gx += w * cx;
            gy += w * cy;
        }
    }
    Ok(GradientSample { gx, gy })
}

fn diameter(points: &[Point2]) -> f64 {
    let mut d: f64 = 0.0;
    for (k, a) in points.iter().enumerate() {
        for b in &points[k + 1..] {
            d = d.max(a.distance(*b));
        }
    }
    d
}

/// True when the last `stall_window` waypoints fit inside a `stall_epsilon`
/// diameter while the goal is still out of reach.
pub fn detect_local_minimum(recent: &[Point2], goal: Point2, params: &PlannerParams) -> bool {
    if params.stall_window == 0 || recent.len() < params.stall_window {
        return false;
    }
    let window = &recent[recent.len() - params.stall_window..];
    let last = window[window.len() - 1];
    diameter(window) < params.stall_epsilon && last.distance(goal) >= params.goal_tolerance
}

/// `q + len·(ux, uy)` for a unit direction, shortened by a few ulps when
/// rounding would make the step longer than `len`.
fn offset(q: Point2, ux: f64, uy: f64, len: f64) -> Point2 {
    let mut l = len;
    loop {
        let p = Point2::new(q.x + l * ux, q.y + l * uy);
        if q.distance(p) <= len || l <= 0.0 {
            return p;
        }
        l = l.next_down();
    }
}

/// Random jump of at most `radius` that stays in the surface interior and
/// at most doubles the potential.
pub fn perturb(q: Point2, rng: &mut ChaCha8Rng, radius: f64, surface: &EnergySurface) -> Result<Point2, PlanError> {
    if radius == 0.0 {
        return Ok(q);
    }
    let current = surface.interpolate(q).ok_or(PlanError::OutsideInterior {
        what: "perturbation origin",
        point: q,
    })?;
    for _ in 0..PERTURB_ATTEMPTS {
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = rng.gen_range(0.0..=radius);
        let candidate = offset(q, angle.cos(), angle.sin(), r);
        if !surface.geometry.is_interior(candidate) {
            continue;
        }
        match surface.interpolate(candidate) {
            Some(u) if u <= PERTURB_UPHILL_FACTOR * current => return Ok(candidate),
            _ => continue,
        }
    }
    Err(PlanError::PerturbationFailed {
        point: q,
        attempts: PERTURB_ATTEMPTS,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteWaypoint {
    pub position: Point2,
    pub step_index: usize,
    pub perturbed: bool,
    pub potential: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GoalReached,
    MaxIterations,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::GoalReached => "GoalReached",
            Termination::MaxIterations => "MaxIterations",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRoute {
    pub waypoints: Vec<RouteWaypoint>,
    pub termination: Termination,
}

impl PlannedRoute {
    pub fn positions(&self) -> impl Iterator<Item = Point2> + '_ {
        self.waypoints.iter().map(|w| w.position)
    }

    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| w[1].position.distance(w[0].position))
            .sum()
    }

    pub fn perturbation_count(&self) -> usize {
        self.waypoints.iter().filter(|w| w.perturbed).count()
    }

    pub fn steps(&self) -> usize {
        self.waypoints.len().saturating_sub(1)
    }
}

/// Descend the surface from `start` toward `goal`.
pub fn plan(
    surface: &EnergySurface,
    params: &PlannerParams,
    start: Point2,
    goal: Point2,
) -> Result<PlannedRoute, PlanError> {
    let geometry = &surface.geometry;
    if !geometry.is_interior(start) {
        return Err(PlanError::OutsideInterior {
            what: "start",
            point: start,
        });
    }
    if !geometry.is_interior(goal) {
        return Err(PlanError::OutsideInterior {
            what: "goal",
            point: goal,
        });
    }
    let potential = |q: Point2| surface.interpolate(q).unwrap_or(f64::NAN);
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut positions = vec![start];
    let mut waypoints = vec![RouteWaypoint {
        position: start,
        step_index: 0,
        perturbed: false,
        potential: potential(start),
    }];
    if start.distance(goal) < params.goal_tolerance {
        return Ok(PlannedRoute {
            waypoints,
            termination: Termination::GoalReached,
        });
    }

    for step in 1..=params.max_iterations {
        let q = positions[step - 1];
        let descent = if detect_local_minimum(&positions, goal, params) {
            None
        } else {
            let g = surface_gradient(surface, q)?;
            let n = g.norm();
            if n > 0.0 && n.is_finite() {
                let candidate = offset(q, -g.gx / n, -g.gy / n, params.step_cap);
                // leaving the interior is handled like a stall
                geometry.is_interior(candidate).then_some(candidate)
            } else {
                None
            }
        };
        let (next, perturbed) = match descent {
            Some(p) => (p, false),
            None => (perturb(q, &mut rng, params.perturb_radius, surface)?, true),
        };
        positions.push(next);
        waypoints.push(RouteWaypoint {
            position: next,
            step_index: step,
            perturbed,
            potential: potential(next),
        });
        if next.distance(goal) < params.goal_tolerance {
            return Ok(PlannedRoute {
                waypoints,
                termination: Termination::GoalReached,
            });
        }
    }
    Ok(PlannedRoute {
        waypoints,
        termination: Termination::MaxIterations,
    })
}

/// Independent planning runs, one per parameter set, over a shared surface.
pub fn plan_many(
    surface: &EnergySurface,
    params: &[PlannerParams],
    start: Point2,
    goal: Point2,
    exec: Execution,
) -> Vec<Result<PlannedRoute, PlanError>> {
    exec.map(params, |p| plan(surface, p, start, goal))
}

/// Smallest distance between any route waypoint and any pedestrian position
/// (latest observation or predicted waypoint); `+∞` with no pedestrians.
pub fn route_clearance(route: &PlannedRoute, predictions: &[PredictedTrajectory], observed: &[PedestrianTrack]) -> f64 {
    let obstacles: Vec<Point2> = observed
        .iter()
        .filter_map(PedestrianTrack::latest)
        .chain(predictions.iter().flat_map(|p| p.positions()))
        .collect();
    route
        .positions()
        .flat_map(|q| obstacles.iter().map(move |o| q.distance(*o)))
        .fold(f64::INFINITY, f64::min)
}

/// `step,x,y,perturbed,potential` rows, then `# termination=` and `# goal` comments.
pub fn route_to_csv(route: &PlannedRoute, goal: Point2) -> String {
    let mut out = String::from("step,x,y,perturbed,potential\n");
    for w in &route.waypoints {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            w.step_index, w.position.x, w.position.y, w.perturbed as u8, w.potential
        );
    }
    let _ = writeln!(out, "# goal x={} y={}", goal.x, goal.y);
    let _ = writeln!(out, "# termination={}", route.termination.as_str());
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteFile {
    pub route: PlannedRoute,
    pub goal: Option<Point2>,
}

pub fn parse_route_csv(text: &str) -> Result<RouteFile, PlanError> {
    let bad = |m: String| PlanError::InvalidRoute(m);
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "step,x,y,perturbed,potential" => {}
        _ => return Err(bad("missing header step,x,y,perturbed,potential".into())),
    }
    let mut waypoints = Vec::new();
    let mut termination = None;
    let mut goal = None;
    for (idx, line) in lines.enumerate() {
        let line = line.trim();
        let lineno = idx + 2;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# termination=") {
            termination = Some(match rest.trim() {
                "GoalReached" => Termination::GoalReached,
                "MaxIterations" => Termination::MaxIterations,
                other => return Err(bad(format!("line {lineno}: unknown termination {other:?}"))),
            });
            continue;
        }
        if let Some(rest) = line.strip_prefix("# goal") {
            let mut xy = [None, None];
            for tok in rest.split_whitespace() {
                match tok.split_once('=') {
                    Some(("x", v)) => xy[0] = v.parse::<f64>().ok(),
                    Some(("y", v)) => xy[1] = v.parse::<f64>().ok(),
                    _ => {}
                }
            }
            match xy {
                [Some(x), Some(y)] => goal = Some(Point2::new(x, y)),
                _ => return Err(bad(format!("line {lineno}: malformed goal comment"))),
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(bad(format!("line {lineno}: expected 5 fields")));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(format!("line {lineno}: not a number: {s:?}")))
        };
        let step_index = f[0]
            .parse::<usize>()
            .map_err(|_| bad(format!("line {lineno}: bad step {:?}", f[0])))?;
        let perturbed = match f[3] {
            "0" | "false" => false,
            "1" | "true" => true,
            other => return Err(bad(format!("line {lineno}: bad perturbed flag {other:?}"))),
        };
        waypoints.push(RouteWaypoint {
            position: Point2::new(num(f[1])?, num(f[2])?),
            step_index,
            perturbed,
            potential: num(f[4])?,
        });
    }
    let termination = termination.ok_or_else(|| bad("missing # termination comment".into()))?;
    Ok(RouteFile {
        route: PlannedRoute { waypoints, termination },
        goal,
    })
}
