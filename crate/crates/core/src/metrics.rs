//! Off-road measurement, the attack loss, displacement errors, the collision
//! criterion, multi-modal mode selection, and dataset-level reporting.
//!
//! The off-road fraction `m` is the share of prediction points outside the
//! drivable union (boundary points count as on-road); the attack loss is
//! `(1 - m)^2`. Dataset reports aggregate per-scenario fractions into SOR
//! (mean fraction) and HOR (share of scenarios with any off-road point),
//! both rounded to the nearest integer percent.

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::scene::{Scene, Trajectory};

/// Default agent radius for the collision criterion (centers closer than
/// twice this collide).
pub const DEFAULT_AGENT_RADIUS: f64 = 1.0;

/// Multi-modal prediction: one trajectory per mode, optionally with
/// per-mode probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub modes: Vec<Trajectory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

impl PredictionSet {
    pub fn single(traj: Trajectory) -> Self {
        Self {
            modes: vec![traj],
            probabilities: Some(vec![1.0]),
        }
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.modes.is_empty() {
            return Err(MetricsError::EmptyPredictionSet);
        }
        if let Some(probs) = &self.probabilities {
            if probs.len() != self.modes.len() {
                return Err(MetricsError::InvalidProbabilities(format!(
                    "{} probabilities for {} modes",
                    probs.len(),
                    self.modes.len()
                )));
            }
            for p in probs {
                if !(*p >= 0.0 && *p <= 1.0) {
                    return Err(MetricsError::InvalidProbabilities(format!(
                        "probability {p} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-scenario evaluation row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub scenario_id: String,
    pub offroad_fraction: f64,
    pub loss: f64,
    pub ade: Option<f64>,
    pub fde: Option<f64>,
    pub collided: bool,
}

impl EvalRecord {
    pub fn new(
        scenario_id: String,
        offroad_fraction: f64,
        ade: Option<f64>,
        fde: Option<f64>,
        collided: bool,
    ) -> Self {
        Self {
            scenario_id,
            offroad_fraction,
            loss: attack_loss_from_fraction(offroad_fraction),
            ade,
            fde,
            collided,
        }
    }
}

/// Aggregate over a record set. `sor`/`hor` are integer percents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub sor: i32,
    pub hor: i32,
    pub ade: Option<f64>,
    pub fde: Option<f64>,
    pub n: usize,
    #[serde(default)]
    pub errors: usize,
    pub records: Vec<EvalRecord>,
}

/// Fraction of trajectory points outside the drivable union. Points exactly
/// on a boundary count as on-road.
pub fn offroad_fraction(traj: &Trajectory, scene: &Scene) -> f64 {
    if traj.is_empty() {
        return 0.0;
    }
    let off = traj
        .points
        .iter()
        .filter(|p| !scene.is_on_road(**p))
        .count();
    off as f64 / traj.len() as f64
}

/// `(1 - m)^2`: zero iff fully off-road, one iff fully on-road.
pub fn attack_loss(traj: &Trajectory, scene: &Scene) -> f64 {
    attack_loss_from_fraction(offroad_fraction(traj, scene))
}

pub fn attack_loss_from_fraction(m: f64) -> f64 {
    (1.0 - m) * (1.0 - m)
}

/// Average and final displacement errors between equal-length trajectories.
pub fn displacement_errors(pred: &Trajectory, gt: &Trajectory) -> Result<(f64, f64), MetricsError> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    let dists: Vec<f64> = pred
        .points
        .iter()
        .zip(&gt.points)
        .map(|(a, b)| a.distance(*b))
        .collect();
    let ade = dists.iter().sum::<f64>() / dists.len() as f64;
    let fde = *dists.last().unwrap();
    Ok((ade, fde))
}

/// True iff any shared timestep brings the prediction within `2 * radius`
/// of an agent center.
pub fn collision_flag(pred: &Trajectory, agents: &[Trajectory], radius: f64) -> bool {
    agents.iter().any(|agent| {
        pred.points
            .iter()
            .zip(&agent.points)
            .any(|(p, a)| p.distance(*a) < 2.0 * radius)
    })
}

/// Picks the reported mode: highest probability when probabilities exist
/// (ties break to the lowest index), otherwise the minimum-ADE mode against
/// the ground truth. Returns the mode index.
pub fn select_mode(ps: &PredictionSet, gt: Option<&Trajectory>) -> Result<usize, MetricsError> {
    ps.validate()?;
    if let Some(probs) = &ps.probabilities {
        let mut best = 0usize;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = i;
            }
        }
        return Ok(best);
    }
    let gt = gt.ok_or(MetricsError::NoSelectionBasis)?;
    let mut best = 0usize;
    let mut best_ade = f64::INFINITY;
    for (i, mode) in ps.modes.iter().enumerate() {
        let (ade, _) = displacement_errors(mode, gt)?;
        if ade < best_ade {
            best_ade = ade;
            best = i;
        }
    }
    Ok(best)
}

/// Aggregates per-scenario records: SOR = round(100 * mean m),
/// HOR = round(100 * share of records with m > 0), plus ADE/FDE means over
/// the records that carry them.
pub fn dataset_report(records: Vec<EvalRecord>) -> Result<DatasetReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let n = records.len();
    let mean_m = records.iter().map(|r| r.offroad_fraction).sum::<f64>() / n as f64;
    let hard = records.iter().filter(|r| r.offroad_fraction > 0.0).count() as f64 / n as f64;
    let mean_of = |get: fn(&EvalRecord) -> Option<f64>| {
        let vals: Vec<f64> = records.iter().filter_map(get).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    Ok(DatasetReport {
        sor: (100.0 * mean_m).round() as i32,
        hor: (100.0 * hard).round() as i32,
        ade: mean_of(|r| r.ade),
        fde: mean_of(|r| r.fde),
        n,
        errors: 0,
        records,
    })
}
