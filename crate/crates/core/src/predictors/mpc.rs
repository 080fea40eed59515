//! Centerline-following predictor: a kinematic bicycle driven by
//! sampling-based receding-horizon control. At every step a shrinking grid
//! of (acceleration, steering) candidates is rolled out a short lookahead;
//! the candidate with the lowest accumulated lateral-tracking plus control
//! effort cost is applied for one step.
//!
//! Steering is additionally saturated by a lateral-acceleration bound
//! (`v^2 * tan(steer) / wheelbase <= max_lateral_accel`), the tire-friction
//! limit a purely kinematic model lacks. Without it the model could corner
//! at any speed and the history slow-down would have nothing to protect.

use serde::{Deserialize, Serialize};

use crate::error::PredictError;
use crate::geometry::COINCIDENT_TOL;
use crate::geometry::{dist_sq_point_segment, normalize_angle, Point2, Polyline};
use crate::metrics::PredictionSet;
use crate::scene::{Scenario, Trajectory};

/// Farthest a lane centerline may be from the prediction origin before the
/// predictor refuses to pick a reference.
pub const REFERENCE_REACH: f64 = 20.0;

/// Rollout length (steps) used to score a candidate control.
const LOOKAHEAD_STEPS: usize = 10;
/// Shrinking-grid refinement passes per step.
const REFINE_STAGES: usize = 3;
/// Reference resampling step.
const REF_SPACING: f64 = 0.5;
/// Straight-line extension added beyond the reference ends.
const REF_EXTENSION: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    /// Bicycle wheelbase, m.
    pub wheelbase: f64,
    /// Number of predicted points.
    pub horizon_steps: usize,
    /// Expected sampling period, s; the scenario's own `dt` takes precedence.
    pub dt: f64,
    /// Acceleration bound, m/s^2 (symmetric).
    pub max_accel: f64,
    /// Steering-angle bound, rad (symmetric).
    pub max_steer: f64,
    /// Candidate samples per control axis per refinement stage.
    pub samples_per_step: usize,
    /// Weight on squared lateral distance to the reference.
    pub tracking_weight: f64,
    /// Weight on squared normalized controls.
    pub effort_weight: f64,
    /// Cornering limit, m/s^2. Steering that would exceed it saturates.
    pub max_lateral_accel: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            wheelbase: 2.8,
            horizon_steps: 30,
            dt: 0.1,
            max_accel: 4.0,
            max_steer: 0.6,
            samples_per_step: 7,
            tracking_weight: 1.0,
            effort_weight: 0.05,
            max_lateral_accel: 7.5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct BikeState {
    pos: Point2,
    heading: f64,
    speed: f64,
}

fn step(state: &BikeState, accel: f64, steer: f64, cfg: &MpcConfig, dt: f64) -> BikeState {
    let mut steer = steer.clamp(-cfg.max_steer, cfg.max_steer);
    if state.speed > 1e-9 {
        let tan_limit = cfg.max_lateral_accel * cfg.wheelbase / (state.speed * state.speed);
        let steer_limit = tan_limit.atan();
        steer = steer.clamp(-steer_limit, steer_limit);
    }
    let accel = accel.clamp(-cfg.max_accel, cfg.max_accel);
    let (s, c) = state.heading.sin_cos();
    BikeState {
        pos: state.pos + Point2::new(c, s) * (state.speed * dt),
        heading: normalize_angle(state.heading + state.speed / cfg.wheelbase * steer.tan() * dt),
        speed: (state.speed + accel * dt).max(0.0),
    }
}

/// Dense reference path with an incremental nearest-segment query.
struct RefPath {
    pts: Vec<Point2>,
}

impl RefPath {
    fn build(lanes: &[Polyline], origin: Point2) -> Result<Self, PredictError> {
        let mut best: Option<(f64, usize)> = None;
        for (i, lane) in lanes.iter().enumerate() {
            let d = lane.distance_to_point(origin);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        let (dist, idx) = best.ok_or(PredictError::NoReferenceLane(REFERENCE_REACH))?;
        if dist > REFERENCE_REACH {
            return Err(PredictError::NoReferenceLane(REFERENCE_REACH));
        }

        // Chain lanes whose start continues the current end.
        let mut chain: Vec<Point2> = lanes[idx].points().to_vec();
        let mut used = vec![false; lanes.len()];
        used[idx] = true;
        for _ in 0..8 {
            let end = *chain.last().unwrap();
            let next = lanes
                .iter()
                .enumerate()
                .find(|(i, lane)| !used[*i] && lane.first().distance(end) <= REF_SPACING);
            match next {
                Some((i, lane)) => {
                    used[i] = true;
                    chain.extend_from_slice(&lane.points()[1..]);
                }
                None => break,
            }
        }

        // Tangent extensions so rollouts beyond the mapped lane stay defined.
        let mut pts: Vec<Point2> = Vec::new();
        let t0 = unit(chain[1] - chain[0]);
        let tn = unit(chain[chain.len() - 1] - chain[chain.len() - 2]);
        let back_steps = (REF_EXTENSION / 10.0 / REF_SPACING) as usize;
        for k in (1..=back_steps).rev() {
            pts.push(chain[0] - t0 * (k as f64 * REF_SPACING));
        }
        pts.extend(
            Polyline::new_dedup(chain.clone())
                .map_err(|_| PredictError::NoReferenceLane(REFERENCE_REACH))?
                .resample(REF_SPACING)
                .points()
                .iter()
                .copied(),
        );
        let fwd_steps = (REF_EXTENSION / REF_SPACING) as usize;
        let end = *pts.last().unwrap();
        for k in 1..=fwd_steps {
            pts.push(end + tn * (k as f64 * REF_SPACING));
        }
        Ok(Self { pts })
    }

    /// Squared distance to the path near segment `hint`, plus the new hint.
    /// The window allows a few segments backward and generous progress
    /// forward, which keeps the query O(1) along a rollout.
    fn project(&self, p: Point2, hint: usize) -> (f64, usize) {
        let lo = hint.saturating_sub(6);
        let hi = (hint + 40).min(self.pts.len() - 1);
        let mut best = f64::INFINITY;
        let mut best_i = hint;
        for i in lo..hi {
            let d = dist_sq_point_segment(p, self.pts[i], self.pts[i + 1]);
            if d < best {
                best = d;
                best_i = i;
            }
        }
        (best, best_i)
    }

    fn project_global(&self, p: Point2) -> (f64, usize) {
        let mut best = f64::INFINITY;
        let mut best_i = 0;
        for i in 0..self.pts.len() - 1 {
            let d = dist_sq_point_segment(p, self.pts[i], self.pts[i + 1]);
            if d < best {
                best = d;
                best_i = i;
            }
        }
        (best, best_i)
    }

    fn tangent_at(&self, seg: usize) -> Point2 {
        unit(self.pts[seg + 1] - self.pts[seg])
    }
}

fn unit(v: Point2) -> Point2 {
    let n = v.norm();
    if n <= 0.0 {
        Point2::new(1.0, 0.0)
    } else {
        v * (1.0 / n)
    }
}

fn initial_state(scn: &Scenario, path: &RefPath, origin_seg: usize) -> BikeState {
    let pts = &scn.history.points;
    let last = *pts.last().unwrap();
    let mut heading = None;
    for p in pts.iter().rev().skip(1) {
        if p.distance(last) > COINCIDENT_TOL {
            let d = last - *p;
            heading = Some(d.y.atan2(d.x));
            break;
        }
    }
    let speed = if pts.len() >= 2 {
        pts[pts.len() - 2].distance(last) / scn.dt()
    } else {
        0.0
    };
    match heading {
        Some(h) => BikeState {
            pos: last,
            heading: h,
            speed,
        },
        None => {
            // Degenerate history: face along the reference, standing still.
            let t = path.tangent_at(origin_seg);
            BikeState {
                pos: last,
                heading: t.y.atan2(t.x),
                speed: 0.0,
            }
        }
    }
}

fn linspace(center: f64, half_width: f64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n <= 1 {
        return vec![center.clamp(lo, hi)];
    }
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            (center - half_width + 2.0 * half_width * t).clamp(lo, hi)
        })
        .collect()
}

fn rollout_cost(
    start: &BikeState,
    accel: f64,
    steer: f64,
    path: &RefPath,
    hint: usize,
    cfg: &MpcConfig,
    dt: f64,
) -> f64 {
    let mut state = *start;
    let mut hint = hint;
    let mut cost = 0.0;
    let effort =
        cfg.effort_weight * ((accel / cfg.max_accel).powi(2) + (steer / cfg.max_steer).powi(2));
    for _ in 0..LOOKAHEAD_STEPS {
        state = step(&state, accel, steer, cfg, dt);
        let (d_sq, new_hint) = path.project(state.pos, hint);
        hint = new_hint;
        cost += cfg.tracking_weight * d_sq + effort;
    }
    cost
}

/// Forward-simulates the bicycle along the nearest lane centerline and
/// returns the resulting single-mode prediction.
pub fn predict_centerline_mpc(
    scn: &Scenario,
    cfg: &MpcConfig,
) -> Result<PredictionSet, PredictError> {
    let origin = scn.history.last().expect("history non-empty");
    let path = RefPath::build(&scn.scene.lanes, origin)?;
    let (_, origin_seg) = path.project_global(origin);
    let dt = scn.dt();

    let mut state = initial_state(scn, &path, origin_seg);
    let mut hint = origin_seg;
    let mut out = Vec::with_capacity(cfg.horizon_steps);

    for _ in 0..cfg.horizon_steps {
        let mut center_a = 0.0;
        let mut center_s = 0.0;
        let mut half_a = cfg.max_accel;
        let mut half_s = cfg.max_steer;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for _ in 0..REFINE_STAGES {
            for &a in &linspace(
                center_a,
                half_a,
                cfg.samples_per_step,
                -cfg.max_accel,
                cfg.max_accel,
            ) {
                for &s in &linspace(
                    center_s,
                    half_s,
                    cfg.samples_per_step,
                    -cfg.max_steer,
                    cfg.max_steer,
                ) {
                    let cost = rollout_cost(&state, a, s, &path, hint, cfg, dt);
                    if cost < best.0 {
                        best = (cost, a, s);
                    }
                }
            }
            center_a = best.1;
            center_s = best.2;
            let n = cfg.samples_per_step.max(2) as f64;
            half_a *= 2.0 / (n - 1.0);
            half_s *= 2.0 / (n - 1.0);
        }
        state = step(&state, best.1, best.2, cfg, dt);
        let (_, new_hint) = path.project(state.pos, hint);
        hint = new_hint;
        out.push(state.pos);
    }

    Ok(PredictionSet::single(Trajectory::new(out, dt)))
}
