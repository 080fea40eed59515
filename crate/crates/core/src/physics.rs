//! Feasibility constraints: road curvature, the friction-limited speed
//! `v_max = sqrt(mu * g * R)`, and history slow-down when the observed speed
//! exceeds it.

use serde::{Deserialize, Serialize};

use crate::error::PhysicsError;
use crate::geometry::{Point2, COINCIDENT_TOL};
use crate::scene::{Scenario, Scene, Trajectory};

/// Default sampling step for curvature estimation.
pub const CURVATURE_SPACING: f64 = 1.0;

/// Relative slack when comparing the observed speed against `v_max`; keeps
/// the slow-down exactly idempotent despite rounding.
const SPEED_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    /// Tire-road friction coefficient.
    pub mu: f64,
    /// Gravity, m/s^2.
    pub gravity: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            mu: 0.7,
            gravity: 9.81,
        }
    }
}

impl PhysicsConfig {
    pub fn new(mu: f64, gravity: f64) -> Self {
        assert!(mu > 0.0 && gravity > 0.0);
        Self { mu, gravity }
    }
}

/// Radius of the circle through three pairwise-distinct points; infinite for
/// collinear inputs.
pub fn circumradius(p1: Point2, p2: Point2, p3: Point2) -> Result<f64, PhysicsError> {
    let a = p1.distance(p2);
    let b = p2.distance(p3);
    let c = p1.distance(p3);
    if a <= COINCIDENT_TOL || b <= COINCIDENT_TOL || c <= COINCIDENT_TOL {
        return Err(PhysicsError::DuplicatePoints);
    }
    let cross = (p2 - p1).cross(p3 - p1);
    // sin(angle) below 1e-12 counts as straight.
    if cross.abs() < 1e-12 * a * c {
        return Ok(f64::INFINITY);
    }
    Ok(a * b * c / (2.0 * cross.abs()))
}

/// Minimum circumradius over consecutive vertex triples of all lanes,
/// resampled at `spacing`. Infinite for an all-straight scene.
pub fn min_radius(scene: &Scene, spacing: f64) -> f64 {
    let mut min = f64::INFINITY;
    for lane in &scene.lanes {
        let dense = lane.resample(spacing);
        let pts = dense.points();
        for w in pts.windows(3) {
            match circumradius(w[0], w[1], w[2]) {
                Ok(r) => min = min.min(r),
                Err(_) => continue,
            }
        }
    }
    min
}

/// Friction-limited speed `sqrt(mu * g * radius)`.
pub fn max_feasible_speed(radius: f64, cfg: &PhysicsConfig) -> f64 {
    if radius.is_infinite() {
        return f64::INFINITY;
    }
    debug_assert!(radius > 0.0);
    (cfg.mu * cfg.gravity * radius).sqrt()
}

/// Scales trajectory increments by `lambda` about the final point, keeping
/// the final point fixed. Equivalent to a homothety centered on the anchor.
fn slow_down(traj: &Trajectory, lambda: f64) -> Trajectory {
    let Some(anchor) = traj.last() else {
        return traj.clone();
    };
    Trajectory {
        points: traj
            .points
            .iter()
            .map(|p| anchor + (*p - anchor) * lambda)
            .collect(),
        dt: traj.dt,
    }
}

/// Slows the history (and every agent track, with the same factor) when the
/// observed peak speed exceeds the scene's feasible speed. The prediction
/// origin — the final history point — never moves. Already-feasible
/// scenarios are returned unchanged, which makes the operation idempotent.
pub fn enforce_feasibility(scn: &Scenario, cfg: &PhysicsConfig, spacing: f64) -> Scenario {
    let v_max = max_feasible_speed(min_radius(&scn.scene, spacing), cfg);
    let v_obs = scn.max_history_speed();
    if !v_max.is_finite() || v_obs <= v_max * (1.0 + SPEED_SLACK) || v_obs == 0.0 {
        return scn.clone();
    }
    let lambda = v_max / v_obs;
    Scenario {
        id: scn.id.clone(),
        scene: scn.scene.clone(),
        history: slow_down(&scn.history, lambda),
        gt_future: scn.gt_future.clone(),
        agents: scn.agents.iter().map(|a| slow_down(a, lambda)).collect(),
    }
}
