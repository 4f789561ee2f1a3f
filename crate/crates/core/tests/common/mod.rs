//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use ecas_core::field::ObstaclePoint;
use ecas_core::scenario::{FieldParams, HalfPlane, PedestrianTrack, PlannerParams, Point2, Scenario};

pub fn box_boundaries(x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<HalfPlane> {
    vec![
        HalfPlane::new(1.0, 0.0, -x0).unwrap(),
        HalfPlane::new(-1.0, 0.0, x1).unwrap(),
        HalfPlane::new(0.0, 1.0, -y0).unwrap(),
        HalfPlane::new(0.0, -1.0, y1).unwrap(),
    ]
}

pub fn scenario(
    boundaries: Vec<HalfPlane>,
    start: Point2,
    goal: Point2,
    pedestrians: Vec<PedestrianTrack>,
) -> Scenario {
    Scenario {
        name: None,
        boundaries,
        start,
        goal,
        pedestrians,
        field_params: FieldParams::default(),
        planner_params: PlannerParams::default(),
    }
}

/// Straight-line track of `n` frames ending at `last`.
pub fn walker(id: i64, last: Point2, step: Point2, n: usize, dt: f64) -> PedestrianTrack {
    let pts: Vec<Point2> = (0..n).map(|k| last - step * (n - 1 - k) as f64).collect();
    PedestrianTrack::from_positions(id, 0, &pts, dt)
}

pub fn oracle_attractive(q: Point2, goal: Point2, h: f64) -> f64 {
    let (dx, dy) = (q.x - goal.x, q.y - goal.y);
    h * (dx * dx + dy * dy).sqrt()
}

/// Boundaries given as raw `(a, b, c)`; normalized here.
pub fn oracle_boundary(q: Point2, planes: &[(f64, f64, f64)], alpha: f64) -> f64 {
    let mut s = 0.0;
    for &(a, b, c) in planes {
        let n = (a * a + b * b).sqrt();
        let g = (a * q.x + b * q.y + c) / n;
        s += g + g.abs();
    }
    1.0 / (alpha + s)
}

pub fn oracle_obstacle(q: Point2, obstacles: &[(Point2, f64)], q_star: f64, delta: f64) -> f64 {
    let mut d = f64::INFINITY;
    for &(p, w) in obstacles {
        let dist = ((q.x - p.x).powi(2) + (q.y - p.y).powi(2)).sqrt();
        d = d.min(dist / w);
    }
    if d > q_star {
        return 0.0;
    }
    let d = d.max(0.05 * q_star);
    let r = 1.0 / d - 1.0 / q_star;
    r * r / (2.0 * delta)
}

pub fn as_pairs(obstacles: &[ObstaclePoint]) -> Vec<(Point2, f64)> {
    obstacles.iter().map(|o| (o.position, o.weight)).collect()
}

pub fn raw_planes(planes: &[HalfPlane]) -> Vec<(f64, f64, f64)> {
    planes.iter().map(|p| (p.a, p.b, p.c)).collect()
}

pub fn brute_mad(pred: &[Point2], truth: &[Point2]) -> f64 {
    let mut s = 0.0;
    for k in 0..pred.len() {
        s += ((pred[k].x - truth[k].x).powi(2) + (pred[k].y - truth[k].y).powi(2)).sqrt();
    }
    s / pred.len() as f64
}

pub fn brute_fad(pred: &[Point2], truth: &[Point2]) -> f64 {
    let n = pred.len() - 1;
    ((pred[n].x - truth[n].x).powi(2) + (pred[n].y - truth[n].y).powi(2)).sqrt()
}

/// Relative error with an absolute floor.
pub fn close(a: f64, b: f64, rel: f64, abs_floor: f64) -> bool {
    (a - b).abs() <= abs_floor.max(rel * a.abs().max(b.abs()))
}
