//! Scenes, trajectories, scenarios, their JSON file format, normalization
//! into the ego frame, and drivable-area derivation.
//!
//! A scenario file is UTF-8 JSON with keys `id`, `dt`, `lanes`, optional
//! `drivable`, optional `lane_width`, `history` (20 points), optional
//! `gt_future` (30 points), and `agents`. Coordinates are `[x, y]` meters.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::geometry::{Point2, Polygon, Polyline, Pose, COINCIDENT_TOL};

/// Observed history length for dataset scenarios (2 s at 10 Hz).
pub const HISTORY_LEN: usize = 20;
/// Predicted future length for dataset scenarios (3 s at 10 Hz).
pub const FUTURE_LEN: usize = 30;
/// Default lane width when a file does not specify one.
pub const DEFAULT_LANE_WIDTH: f64 = 3.5;
/// Maximum edge length for drivable-area rings. Rings are emitted at this
/// density so nonlinear warps keep their shape.
pub const DENSIFY_MAX_EDGE: f64 = 0.5;

/// A timed sequence of positions. Unlike lanes, consecutive points may
/// coincide (a stopped vehicle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Point2>,
    pub dt: f64,
}

impl Trajectory {
    pub fn new(points: Vec<Point2>, dt: f64) -> Self {
        Self { points, dt }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<Point2> {
        self.points.last().copied()
    }

    /// Maximum per-step speed, displacement / dt.
    pub fn max_speed(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[0].distance(w[1]) / self.dt)
            .fold(0.0, f64::max)
    }

    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> Trajectory {
        Trajectory {
            points: self.points.iter().copied().map(&f).collect(),
            dt: self.dt,
        }
    }
}

/// Static road geometry: lane centerlines plus the drivable region.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub lanes: Vec<Polyline>,
    pub drivable: Vec<Polygon>,
    pub lane_width: f64,
}

impl Scene {
    pub fn new(lanes: Vec<Polyline>, drivable: Vec<Polygon>, lane_width: f64) -> Self {
        Self {
            lanes,
            drivable,
            lane_width,
        }
    }

    /// Boundary-inclusive membership in the drivable union.
    pub fn is_on_road(&self, p: Point2) -> bool {
        self.drivable.iter().any(|poly| poly.contains(p))
    }

    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> Scene {
        Scene {
            lanes: self.lanes.iter().map(|l| l.map_points(&f)).collect(),
            drivable: self.drivable.iter().map(|d| d.map_points(&f)).collect(),
            lane_width: self.lane_width,
        }
    }
}

/// A scene plus the ego history, optional ground-truth future, and
/// surrounding-agent tracks. All trajectories share `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub scene: Scene,
    pub history: Trajectory,
    pub gt_future: Option<Trajectory>,
    pub agents: Vec<Trajectory>,
}

impl Scenario {
    pub fn dt(&self) -> f64 {
        self.history.dt
    }

    pub fn max_history_speed(&self) -> f64 {
        self.history.max_speed()
    }

    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> Scenario {
        Scenario {
            id: self.id.clone(),
            scene: self.scene.map_points(&f),
            history: self.history.map_points(&f),
            gt_future: self.gt_future.as_ref().map(|t| t.map_points(&f)),
            agents: self.agents.iter().map(|t| t.map_points(&f)).collect(),
        }
    }
}

/// On-disk representation. Field order fixes the canonical serialization.
#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    id: String,
    dt: f64,
    lanes: Vec<Vec<Point2>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    drivable: Option<Vec<Vec<Point2>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lane_width: Option<f64>,
    #[serde(default)]
    history: Vec<Point2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_future: Option<Vec<Point2>>,
    #[serde(default)]
    agents: Vec<Vec<Point2>>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path)?;
    scenario_from_str(&text)
}

pub fn scenario_from_str(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    scenario_from_file(file, true)
}

fn scenario_from_file(file: ScenarioFile, strict_lengths: bool) -> Result<Scenario, ScenarioError> {
    if !(file.dt.is_finite() && file.dt > 0.0) {
        return Err(ScenarioError::invariant(format!(
            "dt must be > 0, got {}",
            file.dt
        )));
    }
    if file.history.is_empty() {
        return Err(ScenarioError::invariant("history empty"));
    }
    if strict_lengths && file.history.len() != HISTORY_LEN {
        return Err(ScenarioError::invariant(format!(
            "history length {} != {HISTORY_LEN}",
            file.history.len()
        )));
    }
    for (name, pts) in [("history", &file.history)]
        .into_iter()
        .chain(file.gt_future.iter().map(|g| ("gt_future", g)))
    {
        for p in pts {
            if !p.is_finite() {
                return Err(ScenarioError::invariant(format!(
                    "{name}: non-finite coordinate"
                )));
            }
        }
    }
    if let Some(gt) = &file.gt_future {
        if strict_lengths && gt.len() != FUTURE_LEN {
            return Err(ScenarioError::invariant(format!(
                "gt_future length {} != {FUTURE_LEN}",
                gt.len()
            )));
        }
    }
    if file.lanes.is_empty() {
        return Err(ScenarioError::invariant("lanes empty"));
    }
    let lane_width = file.lane_width.unwrap_or(DEFAULT_LANE_WIDTH);
    if !(lane_width.is_finite() && lane_width > 0.0) {
        return Err(ScenarioError::invariant(format!(
            "lane_width must be > 0, got {lane_width}"
        )));
    }

    let mut lanes = Vec::with_capacity(file.lanes.len());
    for (i, pts) in file.lanes.into_iter().enumerate() {
        let lane = Polyline::new_dedup(pts)
            .map_err(|e| ScenarioError::invariant(format!("lanes[{i}]: {e}")))?;
        lanes.push(lane);
    }

    let mut drivable = Vec::new();
    if let Some(rings) = file.drivable {
        for (i, pts) in rings.into_iter().enumerate() {
            let ring = Polygon::new(pts)
                .map_err(|e| ScenarioError::invariant(format!("drivable[{i}]: {e}")))?;
            if !ring.is_simple() {
                return Err(ScenarioError::invariant(format!(
                    "drivable[{i}]: self-intersecting ring"
                )));
            }
            drivable.push(ring);
        }
    }

    let mut scene = Scene::new(lanes, drivable, lane_width);
    if scene.drivable.is_empty() {
        scene = derive_drivable_area(&scene);
    }
    for (li, lane) in scene.lanes.iter().enumerate() {
        for (pi, p) in lane.points().iter().enumerate() {
            if !scene.is_on_road(*p) {
                return Err(ScenarioError::invariant(format!(
                    "lanes[{li}][{pi}]: lane point outside drivable area"
                )));
            }
        }
    }

    let agents = file
        .agents
        .into_iter()
        .map(|pts| Trajectory::new(pts, file.dt))
        .collect();

    Ok(Scenario {
        id: file.id,
        scene,
        history: Trajectory::new(file.history, file.dt),
        gt_future: file.gt_future.map(|pts| Trajectory::new(pts, file.dt)),
        agents,
    })
}

fn to_file(scn: &Scenario) -> ScenarioFile {
    ScenarioFile {
        id: scn.id.clone(),
        dt: scn.dt(),
        lanes: scn
            .scene
            .lanes
            .iter()
            .map(|l| l.points().to_vec())
            .collect(),
        drivable: Some(
            scn.scene
                .drivable
                .iter()
                .map(|d| d.points.clone())
                .collect(),
        ),
        lane_width: Some(scn.scene.lane_width),
        history: scn.history.points.clone(),
        gt_future: scn.gt_future.as_ref().map(|t| t.points.clone()),
        agents: scn.agents.iter().map(|t| t.points.clone()).collect(),
    }
}

/// Canonical pretty-printed JSON for a scenario.
pub fn scenario_to_string(scn: &Scenario) -> String {
    let mut s = serde_json::to_string_pretty(&to_file(scn)).expect("scenario serialization");
    s.push('\n');
    s
}

pub fn save_scenario(scn: &Scenario, path: &Path) -> Result<(), ScenarioError> {
    fs::write(path, scenario_to_string(scn))?;
    Ok(())
}

/// Scenario as a JSON value in the file schema (for embedding in result files).
pub fn scenario_to_value(scn: &Scenario) -> serde_json::Value {
    serde_json::to_value(to_file(scn)).expect("scenario serialization")
}

pub fn scenario_from_value(value: serde_json::Value) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_value(value)?;
    scenario_from_file(file, true)
}

/// Heading of the final history segment, scanning back past coincident points.
fn history_heading(history: &Trajectory) -> Result<f64, ScenarioError> {
    let pts = &history.points;
    let last = *pts
        .last()
        .ok_or_else(|| ScenarioError::invariant("history empty"))?;
    for p in pts.iter().rev().skip(1) {
        if p.distance(last) > COINCIDENT_TOL {
            let d = last - *p;
            return Ok(d.y.atan2(d.x));
        }
    }
    Err(ScenarioError::DegenerateHeading)
}

/// Moves the scenario into the ego frame: the last observed point maps to the
/// origin and the final history heading to +x. The returned pose maps the
/// normalized frame back to the world.
pub fn normalize(scn: &Scenario) -> Result<(Scenario, Pose), ScenarioError> {
    let heading = history_heading(&scn.history)?;
    let anchor = scn.history.last().unwrap();
    let pose = Pose::new(anchor, heading);
    Ok((scn.map_points(|p| pose.apply_inverse(p)), pose))
}

/// Inverse of [`normalize`]: applies `pose` to every point.
pub fn denormalize(scn: &Scenario, pose: &Pose) -> Scenario {
    scn.map_points(|p| pose.apply(p))
}

/// Shape-preserving subdivision so consecutive gaps stay within `spacing`.
pub fn resample_polyline(p: &Polyline, spacing: f64) -> Polyline {
    p.resample(spacing)
}

/// Buffers every lane centerline into a corridor of `lane_width` and
/// attaches the resulting rings. Scenes that already carry explicit drivable
/// polygons are returned unchanged. Corridors get squared end caps extended
/// by half a lane width, and rings come out densified to
/// [`DENSIFY_MAX_EDGE`].
pub fn derive_drivable_area(scene: &Scene) -> Scene {
    if !scene.drivable.is_empty() {
        return scene.clone();
    }
    let half = scene.lane_width / 2.0;
    let drivable = scene
        .lanes
        .iter()
        .map(|lane| corridor(lane, half))
        .collect();
    Scene {
        lanes: scene.lanes.clone(),
        drivable,
        lane_width: scene.lane_width,
    }
}

fn corridor(center: &Polyline, half_width: f64) -> Polygon {
    let dense = center.resample(DENSIFY_MAX_EDGE);
    let mut pts: Vec<Point2> = dense.points().to_vec();

    // Squared caps: extend both ends along their tangents.
    let t0 = unit(pts[1] - pts[0]);
    let tn = unit(pts[pts.len() - 1] - pts[pts.len() - 2]);
    pts.insert(0, pts[0] - t0 * half_width);
    pts.push(*pts.last().unwrap() + tn * half_width);

    let n = pts.len();
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for i in 0..n {
        let dir = if i == 0 {
            unit(pts[1] - pts[0])
        } else if i == n - 1 {
            unit(pts[n - 1] - pts[n - 2])
        } else {
            let a = unit(pts[i] - pts[i - 1]);
            let b = unit(pts[i + 1] - pts[i]);
            let sum = a + b;
            if sum.norm() > 1e-12 {
                unit(sum)
            } else {
                a
            }
        };
        let normal = Point2::new(-dir.y, dir.x);
        left.push(pts[i] + normal * half_width);
        right.push(pts[i] - normal * half_width);
    }
    right.reverse();
    left.extend(right);
    // Cap and cross edges are longer than the centerline spacing; bring the
    // whole ring down to the density the warp expects.
    Polygon { points: left }.densify(DENSIFY_MAX_EDGE)
}

fn unit(v: Point2) -> Point2 {
    let n = v.norm();
    if n <= 0.0 {
        Point2::new(1.0, 0.0)
    } else {
        v * (1.0 / n)
    }
}

/// Relaxed loader for map tiles: same schema, but history/agents/gt_future
/// may be absent. Used by the retrieval corpus.
pub fn load_scene(path: &Path) -> Result<(String, Scene, Option<String>), ScenarioError> {
    #[derive(Deserialize)]
    struct TileFile {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        lanes: Vec<Vec<Point2>>,
        #[serde(default)]
        drivable: Option<Vec<Vec<Point2>>>,
        #[serde(default)]
        lane_width: Option<f64>,
        #[serde(default)]
        location: Option<String>,
    }
    let text = fs::read_to_string(path)?;
    let file: TileFile = serde_json::from_str(&text)?;
    if file.lanes.is_empty() {
        return Err(ScenarioError::invariant("lanes empty"));
    }
    let mut lanes = Vec::with_capacity(file.lanes.len());
    for (i, pts) in file.lanes.into_iter().enumerate() {
        lanes.push(
            Polyline::new_dedup(pts)
                .map_err(|e| ScenarioError::invariant(format!("lanes[{i}]: {e}")))?,
        );
    }
    let drivable = match file.drivable {
        Some(rings) => rings
            .into_iter()
            .enumerate()
            .map(|(i, pts)| {
                Polygon::new(pts)
                    .map_err(|e| ScenarioError::invariant(format!("drivable[{i}]: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    let id = file.id.unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let scene = Scene::new(
        lanes,
        drivable,
        file.lane_width.unwrap_or(DEFAULT_LANE_WIDTH),
    );
    Ok((id, scene, file.location))
}
