//! Heatmap export of energy surfaces (ASCII PGM and SVG) and route overlays.
//!
//! Image row 0 is the top of the surface (largest `y`). Brighter pixels mean
//! higher potential.

use std::fmt::Write as _;

use thiserror::Error;

use crate::field::{EnergySurface, GridGeometry};
use crate::planner::PlannedRoute;
use crate::prediction::PredictedTrajectory;
use crate::scenario::{PedestrianTrack, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColorScale {
    Linear,
    #[default]
    Log,
}

/// Which grid is rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layer {
    #[default]
    Total,
    Attractive,
    Repulsive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSpec {
    pub color_scale: ColorScale,
    /// Values above the clip are rendered as the clip.
    pub value_clip: Option<f64>,
    pub layer: Layer,
    /// SVG pixels per grid cell.
    pub cell_px: u32,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            color_scale: ColorScale::Log,
            value_clip: None,
            layer: Layer::Total,
            cell_px: 8,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum VizError {
    #[error("surface has no cells")]
    EmptySurface,
    #[error("surface has no {0:?} component")]
    MissingLayer(Layer),
    #[error("value_clip must be positive")]
    InvalidClip,
    #[error("{what} {point} lies outside the grid")]
    OutsideGrid { what: &'static str, point: Point2 },
}

/// Grayscale levels in image order plus a flag for degenerate (constant) input.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub uniform: bool,
}

impl GrayImage {
    pub fn pixel(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &p) in self.pixels.iter().enumerate() {
            if p > self.pixels[best] {
                best = k;
            }
        }
        (best % self.width, best / self.width)
    }

    pub fn argmin(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &p) in self.pixels.iter().enumerate() {
            if p < self.pixels[best] {
                best = k;
            }
        }
        (best % self.width, best / self.width)
    }
}

fn layer_values(surface: &EnergySurface, layer: Layer) -> Result<&[f64], VizError> {
    match layer {
        Layer::Total => Ok(&surface.values),
        Layer::Attractive => surface
            .components
            .as_ref()
            .map(|c| c.attractive.as_slice())
            .ok_or(VizError::MissingLayer(layer)),
        Layer::Repulsive => surface
            .components
            .as_ref()
            .map(|c| c.repulsive.as_slice())
            .ok_or(VizError::MissingLayer(layer)),
    }
}

/// Map surface values to 0–255 gray levels.
pub fn render_gray(surface: &EnergySurface, spec: &RenderSpec) -> Result<GrayImage, VizError> {
    let g = &surface.geometry;
    if g.is_empty() {
        return Err(VizError::EmptySurface);
    }
    if matches!(spec.value_clip, Some(c) if c.is_nan() || c <= 0.0) {
        return Err(VizError::InvalidClip);
    }
    let values = layer_values(surface, spec.layer)?;
    let scaled: Vec<f64> = values
        .iter()
        .map(|&v| {
            let v = spec.value_clip.map_or(v, |c| v.min(c));
            match spec.color_scale {
                ColorScale::Linear => v,
                ColorScale::Log => v.max(0.0).ln_1p(),
            }
        })
        .collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let span = hi - lo;
    let uniform = span.is_nan() || span <= 0.0;
    if uniform {
        log::warn!("surface is constant; rendering a uniform image");
    }
    let mut pixels = Vec::with_capacity(g.len());
    for row in 0..g.height {
        let j = g.height - 1 - row;
        for i in 0..g.width {
            let s = scaled[g.index(i, j)];
            let level = if uniform {
                0.0
            } else {
                (255.0 * (s - lo) / span).round()
            };
            pixels.push(level as u8);
        }
    }
    Ok(GrayImage {
        width: g.width,
        height: g.height,
        pixels,
        uniform,
    })
}

/// Plain (P2) portable graymap.
pub fn export_pgm(surface: &EnergySurface, spec: &RenderSpec) -> Result<String, VizError> {
    Ok(gray_to_pgm(&render_gray(surface, spec)?))
}

pub fn gray_to_pgm(img: &GrayImage) -> String {
    let mut out = String::with_capacity(img.pixels.len() * 4 + 32);
    let _ = write!(out, "P2\n{} {}\n255\n", img.width, img.height);
    for row in img.pixels.chunks(img.width) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// World point to image coordinates in cell units (origin top-left).
pub fn world_to_image(g: &GridGeometry, q: Point2) -> (f64, f64) {
    (
        (q.x - g.origin.x) / g.resolution,
        g.height as f64 - (q.y - g.origin.y) / g.resolution,
    )
}

pub fn image_to_world(g: &GridGeometry, px: f64, py: f64) -> Point2 {
    Point2::new(
        g.origin.x + px * g.resolution,
        g.origin.y + (g.height as f64 - py) * g.resolution,
    )
}

fn inside_grid(g: &GridGeometry, q: Point2) -> bool {
    let e = g.extent();
    q.x >= e.min.x && q.x <= e.max.x && q.y >= e.min.y && q.y <= e.max.y
}

fn svg_header(out: &mut String, img: &GrayImage, spec: &RenderSpec) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}" shape-rendering="crispEdges">"#,
        img.width as u32 * spec.cell_px,
        img.height as u32 * spec.cell_px,
        img.width,
        img.height
    );
    let _ = writeln!(out, r#"<g id="surface">"#);
    for row in 0..img.height {
        for col in 0..img.width {
            let p = img.pixel(col, row);
            let _ = writeln!(
                out,
                r#"<rect x="{col}" y="{row}" width="1" height="1" fill="rgb({p},{p},{p})"/>"#
            );
        }
    }
    let _ = writeln!(out, "</g>");
}

/// Heatmap alone as an SVG document.
pub fn export_svg(surface: &EnergySurface, spec: &RenderSpec) -> Result<String, VizError> {
    let img = render_gray(surface, spec)?;
    let mut out = String::new();
    svg_header(&mut out, &img, spec);
    out.push_str("</svg>\n");
    Ok(out)
}

fn polyline_points(g: &GridGeometry, pts: impl Iterator<Item = Point2>) -> String {
    pts.map(|q| {
        let (x, y) = world_to_image(g, q);
        format!("{x},{y}")
    })
    .collect::<Vec<_>>()
    .join(" ")
}

fn marker(out: &mut String, g: &GridGeometry, q: Point2, class: &str, fill: &str, r: f64) {
    let (x, y) = world_to_image(g, q);
    let _ = writeln!(
        out,
        r#"<circle class="{class}" cx="{x}" cy="{y}" r="{r}" fill="{fill}"/>"#
    );
}

/// What to draw on top of the heatmap.
#[derive(Debug, Clone, Copy)]
pub struct Overlay<'a> {
    pub route: &'a PlannedRoute,
    pub start: Point2,
    pub goal: Point2,
    pub predictions: &'a [PredictedTrajectory],
    pub observed: &'a [PedestrianTrack],
}

/// Heatmap with the planned route, start (red), goal (green), perturbed
/// "indirect" waypoints (yellow), observed tracks (solid) and predictions (dashed).
pub fn overlay_route(surface: &EnergySurface, overlay: &Overlay<'_>, spec: &RenderSpec) -> Result<String, VizError> {
    let g = &surface.geometry;
    for w in &overlay.route.waypoints {
        if !inside_grid(g, w.position) {
            return Err(VizError::OutsideGrid {
                what: "route waypoint",
                point: w.position,
            });
        }
    }
    for (what, q) in [("start", overlay.start), ("goal", overlay.goal)] {
        if !inside_grid(g, q) {
            return Err(VizError::OutsideGrid { what, point: q });
        }
    }
    let img = render_gray(surface, spec)?;
    let mut out = String::new();
    svg_header(&mut out, &img, spec);
    let stroke = 0.15;

    let _ = writeln!(out, r#"<g id="pedestrians">"#);
    for track in overlay.observed {
        let _ = writeln!(
            out,
            r##"<polyline class="observed" data-ped="{}" points="{}" fill="none" stroke="#1f77b4" stroke-width="{stroke}"/>"##,
            track.ped_id,
            polyline_points(g, track.positions())
        );
    }
    for pred in overlay.predictions {
        let _ = writeln!(
            out,
            r##"<polyline class="predicted" data-ped="{}" points="{}" fill="none" stroke="#ff7f0e" stroke-width="{stroke}" stroke-dasharray="0.4 0.3"/>"##,
            pred.ped_id,
            polyline_points(g, pred.positions())
        );
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(out, r#"<g id="route">"#);
    if !overlay.route.waypoints.is_empty() {
        let _ = writeln!(
            out,
            r##"<polyline class="route" points="{}" fill="none" stroke="#d62728" stroke-width="{stroke}"/>"##,
            polyline_points(g, overlay.route.positions())
        );
    }
    for w in overlay.route.waypoints.iter().filter(|w| w.perturbed) {
        marker(&mut out, g, w.position, "indirect", "#ffd700", 0.35);
    }
    let _ = writeln!(out, "</g>");
    marker(&mut out, g, overlay.start, "start", "#ff0000", 0.5);
    marker(&mut out, g, overlay.goal, "goal", "#00c000", 0.5);
    out.push_str("</svg>\n");
    Ok(out)
}
