//! Deterministic SVG rendering of scenarios and HOR heatmaps. No
//! timestamps, ids, or float formatting that could differ between runs:
//! the same inputs always produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::RenderError;
use crate::geometry::{BBox, Point2};
use crate::metrics::PredictionSet;
use crate::scene::Scenario;
use crate::search::HeatmapGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderStyle {
    pub drivable_fill: String,
    pub lane_color: String,
    pub history_color: String,
    pub prediction_color: String,
    pub gt_color: String,
    pub agent_color: String,
    pub lane_width_px: f64,
    pub trajectory_width_px: f64,
    /// Viewport padding around the scene bounding box, meters.
    pub padding: f64,
    /// Pixels per meter.
    pub scale: f64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            drivable_fill: "#d9d9d9".into(),
            lane_color: "#6b6b6b".into(),
            history_color: "#1f77b4".into(),
            prediction_color: "#d62728".into(),
            gt_color: "#2ca02c".into(),
            agent_color: "#9467bd".into(),
            lane_width_px: 1.0,
            trajectory_width_px: 2.0,
            padding: 5.0,
            scale: 4.0,
        }
    }
}

/// Affine world -> pixel mapping (y flipped).
#[derive(Debug, Clone, Copy)]
pub struct Viewport {
    pub min_x: f64,
    pub max_y: f64,
    pub scale: f64,
    pub padding: f64,
    pub width_px: f64,
    pub height_px: f64,
}

impl Viewport {
    pub fn to_px(&self, p: Point2) -> (f64, f64) {
        (
            (p.x - self.min_x + self.padding) * self.scale,
            (self.max_y - p.y + self.padding) * self.scale,
        )
    }
}

fn scenario_bbox(scn: &Scenario, preds: Option<&PredictionSet>) -> BBox {
    let mut bbox = BBox::empty();
    for lane in &scn.scene.lanes {
        bbox.include_all(lane.points());
    }
    for ring in &scn.scene.drivable {
        bbox.include_all(&ring.points);
    }
    bbox.include_all(&scn.history.points);
    if let Some(gt) = &scn.gt_future {
        bbox.include_all(&gt.points);
    }
    for agent in &scn.agents {
        bbox.include_all(&agent.points);
    }
    if let Some(ps) = preds {
        for mode in &ps.modes {
            bbox.include_all(&mode.points);
        }
    }
    bbox
}

pub fn viewport_for(
    scn: &Scenario,
    preds: Option<&PredictionSet>,
    style: &RenderStyle,
) -> Viewport {
    let bbox = scenario_bbox(scn, preds);
    Viewport {
        min_x: bbox.min_x,
        max_y: bbox.max_y,
        scale: style.scale,
        padding: style.padding,
        width_px: (bbox.width() + 2.0 * style.padding) * style.scale,
        height_px: (bbox.height() + 2.0 * style.padding) * style.scale,
    }
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

fn polyline_points(vp: &Viewport, pts: &[Point2]) -> String {
    let mut s = String::new();
    for (i, p) in pts.iter().enumerate() {
        let (x, y) = vp.to_px(*p);
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{},{}", px(x), px(y));
    }
    s
}

fn write_polyline(
    out: &mut String,
    vp: &Viewport,
    pts: &[Point2],
    color: &str,
    width: f64,
    dashed: bool,
) {
    let dash = if dashed {
        " stroke-dasharray=\"6 3\""
    } else {
        ""
    };
    let _ = writeln!(
        out,
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{} />",
        polyline_points(vp, pts),
        color,
        px(width),
        dash
    );
}

/// Scenario figure: drivable area as filled polygons, lanes as polylines,
/// history / ground truth / prediction modes as distinct strokes.
pub fn scene_svg(
    scn: &Scenario,
    preds: Option<&PredictionSet>,
    style: &RenderStyle,
) -> Result<String, RenderError> {
    let bbox = scenario_bbox(scn, preds);
    if bbox.is_empty() {
        return Err(RenderError::EmptyScene);
    }
    let vp = viewport_for(scn, preds, style);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        px(vp.width_px),
        px(vp.height_px),
        px(vp.width_px),
        px(vp.height_px)
    );
    for ring in &scn.scene.drivable {
        let _ = writeln!(
            out,
            "  <polygon points=\"{}\" fill=\"{}\" stroke=\"none\" />",
            polyline_points(&vp, &ring.points),
            style.drivable_fill
        );
    }
    for lane in &scn.scene.lanes {
        write_polyline(
            &mut out,
            &vp,
            lane.points(),
            &style.lane_color,
            style.lane_width_px,
            false,
        );
    }
    for agent in &scn.agents {
        write_polyline(
            &mut out,
            &vp,
            &agent.points,
            &style.agent_color,
            style.trajectory_width_px,
            false,
        );
    }
    write_polyline(
        &mut out,
        &vp,
        &scn.history.points,
        &style.history_color,
        style.trajectory_width_px,
        false,
    );
    if let Some(gt) = &scn.gt_future {
        write_polyline(
            &mut out,
            &vp,
            &gt.points,
            &style.gt_color,
            style.trajectory_width_px,
            true,
        );
    }
    if let Some(ps) = preds {
        for mode in &ps.modes {
            write_polyline(
                &mut out,
                &vp,
                &mode.points,
                &style.prediction_color,
                style.trajectory_width_px,
                false,
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_scene(
    scn: &Scenario,
    preds: Option<&PredictionSet>,
    style: &RenderStyle,
    out_path: &Path,
) -> Result<(), RenderError> {
    let svg = scene_svg(scn, preds, style)?;
    std::fs::write(out_path, svg)?;
    Ok(())
}

/// Linear green(0) to red(100) ramp.
pub fn heatmap_color(hor: i32) -> String {
    let t = (hor.clamp(0, 100) as f64) / 100.0;
    let r = (255.0 * t).round() as u8;
    let g = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}{g:02x}00")
}

const CELL_W: f64 = 44.0;
const CELL_H: f64 = 26.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_BOTTOM: f64 = 34.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_RIGHT: f64 = 10.0;

/// Heatmap figure: one rectangle per cell, axes labeled with the parameter
/// values.
pub fn heatmap_svg(grid: &HeatmapGrid) -> Result<String, RenderError> {
    if grid.hor.len() != grid.param1.len() {
        return Err(RenderError::RaggedGrid {
            row: 0,
            got: grid.hor.len(),
            expected: grid.param1.len(),
        });
    }
    for (i, row) in grid.hor.iter().enumerate() {
        if row.len() != grid.param2.len() {
            return Err(RenderError::RaggedGrid {
                row: i,
                got: row.len(),
                expected: grid.param2.len(),
            });
        }
    }
    let rows = grid.param1.len();
    let cols = grid.param2.len();
    let width = MARGIN_LEFT + cols as f64 * CELL_W + MARGIN_RIGHT;
    let height = MARGIN_TOP + rows as f64 * CELL_H + MARGIN_BOTTOM;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" font-family=\"monospace\" font-size=\"11\">",
        px(width),
        px(height),
        px(width),
        px(height)
    );
    let _ = writeln!(
        out,
        "  <text x=\"{}\" y=\"15\" text-anchor=\"middle\">{} HOR %</text>",
        px(MARGIN_LEFT + cols as f64 * CELL_W / 2.0),
        grid.family
    );
    for (i, row) in grid.hor.iter().enumerate() {
        for (j, hor) in row.iter().enumerate() {
            let x = MARGIN_LEFT + j as f64 * CELL_W;
            let y = MARGIN_TOP + i as f64 * CELL_H;
            let _ = writeln!(
                out,
                "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"><title>{}</title></rect>",
                px(x),
                px(y),
                px(CELL_W),
                px(CELL_H),
                heatmap_color(*hor),
                hor
            );
        }
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
            px(MARGIN_LEFT - 6.0),
            px(MARGIN_TOP + i as f64 * CELL_H + CELL_H / 2.0 + 4.0),
            grid.param1[i]
        );
    }
    for (j, p2) in grid.param2.iter().enumerate() {
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            px(MARGIN_LEFT + j as f64 * CELL_W + CELL_W / 2.0),
            px(MARGIN_TOP + rows as f64 * CELL_H + 16.0),
            p2
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_heatmap(grid: &HeatmapGrid, out_path: &Path) -> Result<(), RenderError> {
    let svg = heatmap_svg(grid)?;
    std::fs::write(out_path, svg)?;
    Ok(())
}
