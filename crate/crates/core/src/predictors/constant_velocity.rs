//! Scene-blind baseline: extrapolates the mean velocity of the last five
//! history steps for the full prediction horizon.

use crate::geometry::Point2;
use crate::metrics::PredictionSet;
use crate::scene::{Scenario, Trajectory, FUTURE_LEN};

pub fn predict_constant_velocity(scn: &Scenario) -> PredictionSet {
    let pts = &scn.history.points;
    let last = *pts.last().expect("history non-empty");
    let steps = (pts.len() - 1).min(5);
    // Mean of the last `steps` displacement vectors (telescoping sum).
    let step_vel = if steps == 0 {
        Point2::new(0.0, 0.0)
    } else {
        (last - pts[pts.len() - 1 - steps]) * (1.0 / steps as f64)
    };
    let future = (1..=FUTURE_LEN)
        .map(|k| last + step_vel * k as f64)
        .collect();
    PredictionSet::single(Trajectory::new(future, scn.dt()))
}
