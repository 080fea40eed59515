//! Parametric scene warps. Each family defines a lateral offset function
//! `f` that is applied ahead of a border `b`:
//! a point `(x, y)` maps to `(x, y + f(x - b))` with `f(u) = 0` for `u <= 0`,
//! so everything behind the border stays fixed.

use serde::{Deserialize, Serialize};

use crate::error::TransformError;
use crate::geometry::Point2;
use crate::scene::{Scenario, Scene, DENSIFY_MAX_EDGE};

/// Default border: the warp starts 5 m ahead of the prediction origin.
pub const DEFAULT_BORDER: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "smooth_turn")]
    SmoothTurn,
    #[serde(rename = "double_turn")]
    DoubleTurn,
    #[serde(rename = "ripple_road")]
    RippleRoad,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::SmoothTurn, Family::DoubleTurn, Family::RippleRoad];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::SmoothTurn => "smooth_turn",
            Family::DoubleTurn => "double_turn",
            Family::RippleRoad => "ripple_road",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = TransformError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smooth_turn" | "smooth" => Ok(Family::SmoothTurn),
            "double_turn" | "double" => Ok(Family::DoubleTurn),
            "ripple_road" | "ripple" => Ok(Family::RippleRoad),
            other => Err(TransformError::InvalidParams(format!(
                "unknown family {other:?}"
            ))),
        }
    }
}

/// Single turn: a power curve `a2 * u^a3` over `[0, a1]`, extended linearly
/// with matching slope beyond `a1`. The sign of `a2` selects the direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothTurnParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl SmoothTurnParams {
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64) -> Self {
        Self {
            alpha1,
            alpha2,
            alpha3,
        }
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        if !(self.alpha1.is_finite() && self.alpha1 > 0.0) {
            return Err(TransformError::InvalidParams(format!(
                "alpha1 must be > 0, got {}",
                self.alpha1
            )));
        }
        if !(self.alpha3.is_finite() && self.alpha3 > 1.0) {
            return Err(TransformError::InvalidParams(format!(
                "alpha3 must be > 1, got {}",
                self.alpha3
            )));
        }
        if !self.alpha2.is_finite() {
            return Err(TransformError::InvalidParams(
                "alpha2 must be finite".into(),
            ));
        }
        Ok(())
    }

    fn offset(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else if u <= self.alpha1 {
            self.alpha2 * u.powf(self.alpha3)
        } else {
            let q_end = self.alpha2 * self.alpha1.powf(self.alpha3);
            let slope = self.alpha2 * self.alpha3 * self.alpha1.powf(self.alpha3 - 1.0);
            (u - self.alpha1) * slope + q_end
        }
    }
}

/// Two opposite turns `gap` meters apart. The second turn cancels the first
/// one's slope, so the road flattens again beyond `gap + alpha1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleTurnParams {
    pub inner: SmoothTurnParams,
    pub gap: f64,
}

impl DoubleTurnParams {
    pub fn new(inner: SmoothTurnParams, gap: f64) -> Self {
        Self { inner, gap }
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        self.inner.validate()?;
        if !(self.gap.is_finite() && self.gap > 0.0) {
            return Err(TransformError::InvalidParams(format!(
                "gap must be > 0, got {}",
                self.gap
            )));
        }
        Ok(())
    }

    fn offset(&self, u: f64) -> f64 {
        self.inner.offset(u) - self.inner.offset(u - self.gap)
    }
}

/// Oscillating road: `g1 * (1 - cos(2*pi*g2*u))` for `u >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RippleParams {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl RippleParams {
    pub fn new(gamma1: f64, gamma2: f64) -> Self {
        Self { gamma1, gamma2 }
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        if !self.gamma1.is_finite() {
            return Err(TransformError::InvalidParams(
                "gamma1 must be finite".into(),
            ));
        }
        if !(self.gamma2.is_finite() && self.gamma2 > 0.0) {
            return Err(TransformError::InvalidParams(format!(
                "gamma2 must be > 0, got {}",
                self.gamma2
            )));
        }
        Ok(())
    }

    fn offset(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            self.gamma1 * (1.0 - (std::f64::consts::TAU * self.gamma2 * u).cos())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TransformParams {
    Smooth(SmoothTurnParams),
    Double(DoubleTurnParams),
    Ripple(RippleParams),
}

/// A warp family, its parameters, and the border.
///
/// Serializes as `{"family": "...", "params": [...], "border": b}` with
/// params ordered (a1, a2, a3) / (b11, b12, b13, b2) / (g1, g2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct TransformSpec {
    pub params: TransformParams,
    pub border: f64,
}

impl TransformSpec {
    pub fn smooth(alpha1: f64, alpha2: f64, alpha3: f64, border: f64) -> Self {
        Self {
            params: TransformParams::Smooth(SmoothTurnParams::new(alpha1, alpha2, alpha3)),
            border,
        }
    }

    pub fn double(beta11: f64, beta12: f64, beta13: f64, beta2: f64, border: f64) -> Self {
        Self {
            params: TransformParams::Double(DoubleTurnParams::new(
                SmoothTurnParams::new(beta11, beta12, beta13),
                beta2,
            )),
            border,
        }
    }

    pub fn ripple(gamma1: f64, gamma2: f64, border: f64) -> Self {
        Self {
            params: TransformParams::Ripple(RippleParams::new(gamma1, gamma2)),
            border,
        }
    }

    pub fn family(&self) -> Family {
        match self.params {
            TransformParams::Smooth(_) => Family::SmoothTurn,
            TransformParams::Double(_) => Family::DoubleTurn,
            TransformParams::Ripple(_) => Family::RippleRoad,
        }
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        if !self.border.is_finite() {
            return Err(TransformError::InvalidParams(
                "border must be finite".into(),
            ));
        }
        match &self.params {
            TransformParams::Smooth(p) => p.validate(),
            TransformParams::Double(p) => p.validate(),
            TransformParams::Ripple(p) => p.validate(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    family: Family,
    params: Vec<f64>,
    border: f64,
}

impl From<TransformSpec> for SpecRepr {
    fn from(spec: TransformSpec) -> Self {
        let (family, params) = match spec.params {
            TransformParams::Smooth(p) => (Family::SmoothTurn, vec![p.alpha1, p.alpha2, p.alpha3]),
            TransformParams::Double(p) => (
                Family::DoubleTurn,
                vec![p.inner.alpha1, p.inner.alpha2, p.inner.alpha3, p.gap],
            ),
            TransformParams::Ripple(p) => (Family::RippleRoad, vec![p.gamma1, p.gamma2]),
        };
        SpecRepr {
            family,
            params,
            border: spec.border,
        }
    }
}

impl TryFrom<SpecRepr> for TransformSpec {
    type Error = TransformError;
    fn try_from(r: SpecRepr) -> Result<Self, Self::Error> {
        let spec = match (r.family, r.params.as_slice()) {
            (Family::SmoothTurn, [a1, a2, a3]) => TransformSpec::smooth(*a1, *a2, *a3, r.border),
            (Family::DoubleTurn, [b11, b12, b13, b2]) => {
                TransformSpec::double(*b11, *b12, *b13, *b2, r.border)
            }
            (Family::RippleRoad, [g1, g2]) => TransformSpec::ripple(*g1, *g2, r.border),
            (family, params) => {
                return Err(TransformError::InvalidParams(format!(
                    "{family} expects a fixed param count, got {}",
                    params.len()
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Lateral offset at world coordinate `x`: `f(x - border)`. Zero for
/// `x <= border` in every family.
pub fn eval_offset(spec: &TransformSpec, x: f64) -> f64 {
    let u = x - spec.border;
    match &spec.params {
        TransformParams::Smooth(p) => p.offset(u),
        TransformParams::Double(p) => p.offset(u),
        TransformParams::Ripple(p) => p.offset(u),
    }
}

/// Scalar curvature magnitude of a spec: `|a2|*3000`, `|b12|*3000`, or `|g1|`.
pub fn power_of(spec: &TransformSpec) -> f64 {
    match &spec.params {
        TransformParams::Smooth(p) => (p.alpha2 * 3000.0).abs(),
        TransformParams::Double(p) => (p.inner.alpha2 * 3000.0).abs(),
        TransformParams::Ripple(p) => p.gamma1.abs(),
    }
}

fn warp_point(spec: &TransformSpec, p: Point2) -> Point2 {
    Point2::new(p.x, p.y + eval_offset(spec, p.x))
}

/// Applies the warp to every element of a normalized scenario. Lanes and
/// drivable rings are densified to [`DENSIFY_MAX_EDGE`] first so the
/// nonlinear offset cannot cut corners; trajectories are mapped point-wise.
/// A warped drivable ring that self-intersects makes the whole candidate
/// degenerate.
pub fn warp_scenario(scn: &Scenario, spec: &TransformSpec) -> Result<Scenario, TransformError> {
    let map = |p: Point2| warp_point(spec, p);

    let lanes = scn
        .scene
        .lanes
        .iter()
        .map(|l| l.resample(DENSIFY_MAX_EDGE).map_points(map))
        .collect();

    let mut drivable = Vec::with_capacity(scn.scene.drivable.len());
    for ring in &scn.scene.drivable {
        let warped = ring.densify(DENSIFY_MAX_EDGE).map_points(map);
        if !warped.is_simple() {
            return Err(TransformError::DegenerateWarp);
        }
        drivable.push(warped);
    }

    Ok(Scenario {
        id: scn.id.clone(),
        scene: Scene {
            lanes,
            drivable,
            lane_width: scn.scene.lane_width,
        },
        history: scn.history.map_points(map),
        gt_future: scn.gt_future.as_ref().map(|t| t.map_points(map)),
        agents: scn.agents.iter().map(|t| t.map_points(map)).collect(),
    })
}

/// An RGB image with a world placement: pixel `(col, row)` sits at
/// `origin + (col, row) * resolution` with +row along +y.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Point2,
    pub pixels: Vec<[u8; 3]>,
}

/// Fill color for pixels whose source falls outside the input image.
pub const RASTER_BACKGROUND: [u8; 3] = [0, 0, 0];

impl RasterImage {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Point2) -> Self {
        assert!(resolution > 0.0);
        Self {
            width,
            height,
            resolution,
            origin,
            pixels: vec![RASTER_BACKGROUND; width * height],
        }
    }

    pub fn get(&self, col: usize, row: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, rgb: [u8; 3]) {
        self.pixels[row * self.width + col] = rgb;
    }

    pub fn world_of(&self, col: usize, row: usize) -> Point2 {
        Point2::new(
            self.origin.x + col as f64 * self.resolution,
            self.origin.y + row as f64 * self.resolution,
        )
    }
}

/// Pixel-space version of the warp: each output pixel pulls its value from
/// the inverse-mapped source position, nearest-neighbor sampled. Columns left
/// of the border copy through unchanged.
pub fn warp_raster(img: &RasterImage, spec: &TransformSpec) -> RasterImage {
    let mut out = RasterImage::new(img.width, img.height, img.resolution, img.origin);
    for row in 0..img.height {
        for col in 0..img.width {
            let w = img.world_of(col, row);
            let src_y = w.y - eval_offset(spec, w.x);
            let src_row = ((src_y - img.origin.y) / img.resolution).round();
            if src_row >= 0.0 && (src_row as usize) < img.height {
                out.set(col, row, img.get(col, src_row as usize));
            }
        }
    }
    out
}
