//! Candidate sweep: for each scenario, try every transform candidate,
//! enforce feasibility, query the predictor, score the off-road loss, and
//! keep the minimum. Also hosts dataset evaluation, trivial-scene filtering,
//! HOR heatmaps, transfer re-evaluation, and augmentation export.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ScenarioError, SearchError};
use crate::metrics::{
    attack_loss_from_fraction, collision_flag, dataset_report, displacement_errors,
    offroad_fraction, select_mode, DatasetReport, EvalRecord, DEFAULT_AGENT_RADIUS,
};
use crate::physics::{enforce_feasibility, PhysicsConfig, CURVATURE_SPACING};
use crate::predictors::Predictor;
use crate::scene::{
    denormalize, normalize, save_scenario, scenario_from_value, scenario_to_value, Scenario,
};
use crate::transforms::{power_of, warp_scenario, Family, TransformSpec, DEFAULT_BORDER};

/// Scenarios whose peak history speed falls below this are trivial: they
/// cannot be forced off-road, so the filter drops them.
pub const DEFAULT_TRIVIAL_SPEED: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerKind {
    BruteForce,
    UniformRandom,
}

impl std::str::FromStr for SamplerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "brute-force" | "brute_force" | "brute" => Ok(Self::BruteForce),
            "uniform-random" | "uniform_random" | "random" => Ok(Self::UniformRandom),
            other => Err(format!("unknown sampler {other:?}")),
        }
    }
}

/// Per-family candidate parameter lists for the brute-force sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyGrids {
    /// (alpha1, alpha2, alpha3)
    pub smooth: Vec<(f64, f64, f64)>,
    /// (beta11, beta12, beta13, beta2)
    pub double: Vec<(f64, f64, f64, f64)>,
    /// (gamma1, gamma2)
    pub ripple: Vec<(f64, f64)>,
}

impl Default for FamilyGrids {
    /// 20 candidates per family. Curvature magnitudes map onto the power
    /// scale 1..9 (power = |a2| * 3000 = |b12| * 3000 = |g1|), signed so both
    /// turn directions are explored.
    fn default() -> Self {
        let powers = [1.0, 3.0, 5.0, 7.0, 9.0];
        let mut smooth = Vec::new();
        for a1 in [10.0, 20.0] {
            for p in powers {
                for sign in [1.0, -1.0] {
                    smooth.push((a1, sign * p / 3000.0, 3.0));
                }
            }
        }
        let mut double = Vec::new();
        for b2 in [10.0, 20.0] {
            for p in powers {
                for sign in [1.0, -1.0] {
                    double.push((10.0, sign * p / 3000.0, 3.0, b2));
                }
            }
        }
        let mut ripple = Vec::new();
        for g2 in [0.01, 0.017] {
            for g1 in [2.0, 4.0, 6.0, 8.0, 9.0] {
                for sign in [1.0, -1.0] {
                    ripple.push((sign * g1, g2));
                }
            }
        }
        Self {
            smooth,
            double,
            ripple,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Number of candidates per scenario.
    pub k_max: usize,
    /// Border passed to every candidate spec.
    pub border: f64,
    /// Families included in the sweep.
    pub families: Vec<Family>,
    pub grid: FamilyGrids,
    pub sampler: SamplerKind,
    pub physics: PhysicsConfig,
    /// Feasibility enforcement toggle (the `--no-physics` ablation).
    pub enforce_physics: bool,
    /// Seed for the uniform-random sampler.
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            k_max: 60,
            border: DEFAULT_BORDER,
            families: Family::ALL.to_vec(),
            grid: FamilyGrids::default(),
            sampler: SamplerKind::BruteForce,
            physics: PhysicsConfig::default(),
            enforce_physics: true,
            seed: 0,
        }
    }
}

/// Candidate list for a config. Brute force enumerates the per-family grids
/// in family order (smooth, double, ripple) and must match `k_max` exactly;
/// the uniform sampler draws `k_max` specs from the seeded generator.
pub fn build_grid(cfg: &SearchConfig) -> Result<Vec<TransformSpec>, SearchError> {
    match cfg.sampler {
        SamplerKind::BruteForce => {
            let mut specs = Vec::new();
            for family in &cfg.families {
                match family {
                    Family::SmoothTurn => {
                        for &(a1, a2, a3) in &cfg.grid.smooth {
                            specs.push(TransformSpec::smooth(a1, a2, a3, cfg.border));
                        }
                    }
                    Family::DoubleTurn => {
                        for &(b11, b12, b13, b2) in &cfg.grid.double {
                            specs.push(TransformSpec::double(b11, b12, b13, b2, cfg.border));
                        }
                    }
                    Family::RippleRoad => {
                        for &(g1, g2) in &cfg.grid.ripple {
                            specs.push(TransformSpec::ripple(g1, g2, cfg.border));
                        }
                    }
                }
            }
            if specs.len() != cfg.k_max {
                return Err(SearchError::GridSizeMismatch {
                    expected: cfg.k_max,
                    got: specs.len(),
                });
            }
            Ok(specs)
        }
        SamplerKind::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut specs = Vec::with_capacity(cfg.k_max);
            for _ in 0..cfg.k_max {
                let family = cfg.families[rng.gen_range(0..cfg.families.len())];
                let spec = match family {
                    Family::SmoothTurn => TransformSpec::smooth(
                        rng.gen_range(10.0..=20.0),
                        rng.gen_range(-0.003..=0.003),
                        3.0,
                        cfg.border,
                    ),
                    Family::DoubleTurn => TransformSpec::double(
                        rng.gen_range(10.0..=20.0),
                        rng.gen_range(-0.003..=0.003),
                        3.0,
                        rng.gen_range(10.0..=20.0),
                        cfg.border,
                    ),
                    Family::RippleRoad => TransformSpec::ripple(
                        rng.gen_range(-9.0..=9.0),
                        rng.gen_range(0.01..=0.02),
                        cfg.border,
                    ),
                };
                specs.push(spec);
            }
            Ok(specs)
        }
    }
}

/// Keeps only the specs whose transformation power matches one of `powers`.
pub fn filter_grid_by_power(specs: Vec<TransformSpec>, powers: &[f64]) -> Vec<TransformSpec> {
    specs
        .into_iter()
        .filter(|s| powers.iter().any(|p| (power_of(s) - p).abs() < 1e-9))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateLoss {
    pub spec: TransformSpec,
    pub loss: f64,
}

/// Outcome of one scenario sweep: the minimal-loss candidate and its warped,
/// feasibility-enforced, world-frame scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub scenario_id: String,
    pub best_spec: TransformSpec,
    pub best_loss: f64,
    pub best_offroad: f64,
    pub warped: Scenario,
    pub per_candidate: Vec<CandidateLoss>,
}

#[derive(Serialize, Deserialize)]
struct AttackResultRepr {
    scenario_id: String,
    best_spec: TransformSpec,
    best_loss: f64,
    best_offroad: f64,
    warped: serde_json::Value,
    per_candidate: Vec<CandidateLoss>,
}

pub fn attack_result_to_string(r: &AttackResult) -> String {
    let repr = AttackResultRepr {
        scenario_id: r.scenario_id.clone(),
        best_spec: r.best_spec,
        best_loss: r.best_loss,
        best_offroad: r.best_offroad,
        warped: scenario_to_value(&r.warped),
        per_candidate: r.per_candidate.clone(),
    };
    let mut s = serde_json::to_string_pretty(&repr).expect("result serialization");
    s.push('\n');
    s
}

pub fn save_attack_result(r: &AttackResult, path: &Path) -> Result<(), SearchError> {
    std::fs::write(path, attack_result_to_string(r))?;
    Ok(())
}

pub fn load_attack_result(path: &Path) -> Result<AttackResult, SearchError> {
    let text = std::fs::read_to_string(path)?;
    let repr: AttackResultRepr = serde_json::from_str(&text)?;
    Ok(AttackResult {
        scenario_id: repr.scenario_id,
        best_spec: repr.best_spec,
        best_loss: repr.best_loss,
        best_offroad: repr.best_offroad,
        warped: scenario_from_value(repr.warped)?,
        per_candidate: repr.per_candidate,
    })
}

struct CandidateOutcome {
    offroad: f64,
    world: Scenario,
}

/// Warp, enforce, denormalize, predict, and score one candidate. `Err`
/// carries a short failure note; in the sweep any failure scores loss 1.
fn eval_candidate(
    norm: &Scenario,
    pose: &crate::geometry::Pose,
    spec: &TransformSpec,
    predictor: &Predictor,
    cfg: &SearchConfig,
) -> Result<CandidateOutcome, String> {
    let warped = warp_scenario(norm, spec).map_err(|e| e.to_string())?;
    let enforced = if cfg.enforce_physics {
        enforce_feasibility(&warped, &cfg.physics, CURVATURE_SPACING)
    } else {
        warped
    };
    let world = denormalize(&enforced, pose);
    let prediction = predictor.predict(&world).map_err(|e| e.to_string())?;
    let mode = select_mode(&prediction, world.gt_future.as_ref()).map_err(|e| e.to_string())?;
    let offroad = offroad_fraction(&prediction.modes[mode], &world.scene);
    Ok(CandidateOutcome { offroad, world })
}

/// Sweeps every candidate over one scenario and keeps the minimal-loss one
/// (ties break to the earliest candidate). Candidates that fail — degenerate
/// warps or predictor errors — score loss 1 and the sweep continues.
/// Scenarios without a defined heading cannot be warped at all; they are
/// evaluated as-is against every candidate.
pub fn attack_scenario(
    scn: &Scenario,
    predictor: &Predictor,
    cfg: &SearchConfig,
) -> Result<AttackResult, SearchError> {
    let candidates = build_grid(cfg)?;
    assert!(!candidates.is_empty(), "k_max must be >= 1");

    let (norm, pose) = match normalize(scn) {
        Ok(v) => v,
        Err(ScenarioError::DegenerateHeading) => {
            let prediction = predictor
                .predict(scn)
                .map_err(|e| SearchError::AllFailed(e.to_string()))?;
            let mode = select_mode(&prediction, scn.gt_future.as_ref())?;
            let offroad = offroad_fraction(&prediction.modes[mode], &scn.scene);
            let loss = attack_loss_from_fraction(offroad);
            let per_candidate = candidates
                .iter()
                .map(|spec| CandidateLoss { spec: *spec, loss })
                .collect();
            return Ok(AttackResult {
                scenario_id: scn.id.clone(),
                best_spec: candidates[0],
                best_loss: loss,
                best_offroad: offroad,
                warped: scn.clone(),
                per_candidate,
            });
        }
        Err(e) => return Err(e.into()),
    };

    let mut per_candidate = Vec::with_capacity(candidates.len());
    let mut best_idx = 0usize;
    let mut best_loss = f64::INFINITY;
    let mut best_outcome: Option<CandidateOutcome> = None;

    for (i, spec) in candidates.iter().enumerate() {
        let (loss, outcome) = match eval_candidate(&norm, &pose, spec, predictor, cfg) {
            Ok(out) => (attack_loss_from_fraction(out.offroad), Some(out)),
            Err(_) => (1.0, None),
        };
        per_candidate.push(CandidateLoss { spec: *spec, loss });
        if loss < best_loss {
            best_loss = loss;
            best_idx = i;
            best_outcome = outcome;
        }
    }

    let (best_offroad, warped) = match best_outcome {
        Some(out) => (out.offroad, out.world),
        // Every candidate failed; report the untouched scenario.
        None => (0.0, scn.clone()),
    };
    Ok(AttackResult {
        scenario_id: scn.id.clone(),
        best_spec: candidates[best_idx],
        best_loss,
        best_offroad,
        warped,
        per_candidate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Original,
    Attacked,
}

fn record_for(scn: &Scenario, predictor: &Predictor) -> Result<EvalRecord, String> {
    let prediction = predictor.predict(scn).map_err(|e| e.to_string())?;
    let mode_idx = select_mode(&prediction, scn.gt_future.as_ref()).map_err(|e| e.to_string())?;
    let mode = &prediction.modes[mode_idx];
    let offroad = offroad_fraction(mode, &scn.scene);
    let (ade, fde) = match &scn.gt_future {
        Some(gt) if gt.len() == mode.len() => {
            let (a, f) = displacement_errors(mode, gt).map_err(|e| e.to_string())?;
            (Some(a), Some(f))
        }
        _ => (None, None),
    };
    let collided = collision_flag(mode, &scn.agents, DEFAULT_AGENT_RADIUS);
    Ok(EvalRecord::new(scn.id.clone(), offroad, ade, fde, collided))
}

/// Evaluates the predictor over a scenario set, either on the untouched
/// scenes or on each scenario's worst-case warped scene. Per-scenario
/// failures become an error count instead of poisoning the run.
pub fn evaluate_dataset(
    scenarios: &[Scenario],
    predictor: &Predictor,
    cfg: &SearchConfig,
    mode: EvalMode,
) -> Result<DatasetReport, SearchError> {
    if scenarios.is_empty() {
        return Err(SearchError::NoScenarios);
    }
    let outcomes: Vec<Result<EvalRecord, String>> = scenarios
        .par_iter()
        .map(|scn| match mode {
            EvalMode::Original => record_for(scn, predictor),
            EvalMode::Attacked => {
                let result = attack_scenario(scn, predictor, cfg).map_err(|e| e.to_string())?;
                record_for(&result.warped, predictor)
            }
        })
        .collect();

    let mut records = Vec::with_capacity(outcomes.len());
    let mut errors = 0usize;
    let mut first_error = None;
    for out in outcomes {
        match out {
            Ok(r) => records.push(r),
            Err(e) => {
                errors += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if records.is_empty() {
        return Err(SearchError::AllFailed(first_error.unwrap_or_default()));
    }
    let mut report = dataset_report(records)?;
    report.errors = errors;
    Ok(report)
}

/// Runs the full sweep per scenario and returns the results (input order).
pub fn attack_dataset(
    scenarios: &[Scenario],
    predictor: &Predictor,
    cfg: &SearchConfig,
) -> Vec<Result<AttackResult, String>> {
    scenarios
        .par_iter()
        .map(|scn| attack_scenario(scn, predictor, cfg).map_err(|e| e.to_string()))
        .collect()
}

/// Drops scenarios whose peak history speed is below `v_min`.
pub fn filter_trivial(scenarios: Vec<Scenario>, v_min: f64) -> Vec<Scenario> {
    scenarios
        .into_iter()
        .filter(|s| s.max_history_speed() >= v_min)
        .collect()
}

/// HOR percentages over a 2-D parameter sweep, one single-candidate attack
/// per cell. Rows follow `param1`, columns follow `param2` (the signed
/// curvature parameter of the family).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub family: Family,
    pub param1: Vec<f64>,
    pub param2: Vec<f64>,
    pub hor: Vec<Vec<i32>>,
}

fn cell_spec(family: Family, p1: f64, p2: f64, border: f64) -> TransformSpec {
    match family {
        // p1 = turn length, p2 = curvature coefficient.
        Family::SmoothTurn => TransformSpec::smooth(p1, p2, 3.0, border),
        // p1 = gap between the turns, p2 = curvature coefficient.
        Family::DoubleTurn => TransformSpec::double(10.0, p2, 3.0, p1, border),
        // p1 = spatial frequency, p2 = amplitude.
        Family::RippleRoad => TransformSpec::ripple(p2, p1, border),
    }
}

fn offroad_for_candidate(
    scn: &Scenario,
    spec: &TransformSpec,
    predictor: &Predictor,
    cfg: &SearchConfig,
) -> Result<f64, String> {
    match normalize(scn) {
        Ok((norm, pose)) => eval_candidate(&norm, &pose, spec, predictor, cfg)
            .map(|out| out.offroad)
            // A failed candidate cannot force the model off-road.
            .or(Ok(0.0)),
        Err(ScenarioError::DegenerateHeading) => {
            let prediction = predictor.predict(scn).map_err(|e| e.to_string())?;
            let mode =
                select_mode(&prediction, scn.gt_future.as_ref()).map_err(|e| e.to_string())?;
            Ok(offroad_fraction(&prediction.modes[mode], &scn.scene))
        }
        Err(e) => Err(e.to_string()),
    }
}

pub fn heatmap(
    scenarios: &[Scenario],
    predictor: &Predictor,
    family: Family,
    param1_axis: &[f64],
    param2_axis: &[f64],
    cfg: &SearchConfig,
) -> Result<HeatmapGrid, SearchError> {
    if param1_axis.is_empty() || param2_axis.is_empty() {
        return Err(SearchError::EmptyAxis);
    }
    if scenarios.is_empty() {
        return Err(SearchError::NoScenarios);
    }
    let mut hor = Vec::with_capacity(param1_axis.len());
    for &p1 in param1_axis {
        let mut row = Vec::with_capacity(param2_axis.len());
        for &p2 in param2_axis {
            let spec = cell_spec(family, p1, p2, cfg.border);
            let fractions: Vec<Option<f64>> = scenarios
                .par_iter()
                .map(|scn| offroad_for_candidate(scn, &spec, predictor, cfg).ok())
                .collect();
            let ok: Vec<f64> = fractions.into_iter().flatten().collect();
            let cell = if ok.is_empty() {
                0
            } else {
                let hard = ok.iter().filter(|m| **m > 0.0).count() as f64 / ok.len() as f64;
                (100.0 * hard).round() as i32
            };
            row.push(cell);
        }
        hor.push(row);
    }
    Ok(HeatmapGrid {
        family,
        param1: param1_axis.to_vec(),
        param2: param2_axis.to_vec(),
        hor,
    })
}

/// Re-evaluates a target predictor on stored warped scenes — no new search.
/// Callers pass results already filtered to off-road successes.
pub fn transfer_eval(
    stored: &[AttackResult],
    predictor: &Predictor,
) -> Result<DatasetReport, SearchError> {
    if stored.is_empty() {
        return Err(SearchError::NoScenarios);
    }
    let outcomes: Vec<Result<EvalRecord, String>> = stored
        .par_iter()
        .map(|r| record_for(&r.warped, predictor))
        .collect();
    let mut records = Vec::new();
    let mut errors = 0usize;
    let mut first_error = None;
    for out in outcomes {
        match out {
            Ok(r) => records.push(r),
            Err(e) => {
                errors += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if records.is_empty() {
        return Err(SearchError::AllFailed(first_error.unwrap_or_default()));
    }
    let mut report = dataset_report(records)?;
    report.errors = errors;
    Ok(report)
}

/// Writes each result's warped scenario in the scenario file schema,
/// ready to serve as training data elsewhere.
pub fn export_augmented(
    results: &[AttackResult],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, SearchError> {
    if results.is_empty() {
        return Err(SearchError::NoResults);
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::with_capacity(results.len());
    for r in results {
        let path = out_dir.join(format!("{}.json", r.scenario_id));
        save_scenario(&r.warped, &path)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_sixty_split_evenly() {
        let cfg = SearchConfig::default();
        let specs = build_grid(&cfg).unwrap();
        assert_eq!(specs.len(), 60);
        let count = |f: Family| specs.iter().filter(|s| s.family() == f).count();
        assert_eq!(count(Family::SmoothTurn), 20);
        assert_eq!(count(Family::DoubleTurn), 20);
        assert_eq!(count(Family::RippleRoad), 20);
        for s in &specs {
            assert_eq!(s.border, DEFAULT_BORDER);
            s.validate().unwrap();
        }
    }

    #[test]
    fn grid_restriction_and_mismatch() {
        let cfg = SearchConfig {
            families: vec![Family::RippleRoad],
            k_max: 20,
            ..SearchConfig::default()
        };
        let specs = build_grid(&cfg).unwrap();
        assert_eq!(specs.len(), 20);
        assert!(specs.iter().all(|s| s.family() == Family::RippleRoad));

        let bad = SearchConfig {
            families: vec![Family::RippleRoad],
            k_max: 60,
            ..SearchConfig::default()
        };
        assert!(matches!(
            build_grid(&bad),
            Err(SearchError::GridSizeMismatch {
                expected: 60,
                got: 20
            })
        ));
    }

    #[test]
    fn grid_is_deterministic() {
        let cfg = SearchConfig::default();
        assert_eq!(build_grid(&cfg).unwrap(), build_grid(&cfg).unwrap());

        let random = SearchConfig {
            sampler: SamplerKind::UniformRandom,
            seed: 7,
            ..SearchConfig::default()
        };
        assert_eq!(build_grid(&random).unwrap(), build_grid(&random).unwrap());
        let other_seed = SearchConfig {
            seed: 8,
            ..random.clone()
        };
        assert_ne!(
            build_grid(&random).unwrap(),
            build_grid(&other_seed).unwrap()
        );
    }

    #[test]
    fn power_filter_keeps_matching_specs() {
        let specs = build_grid(&SearchConfig::default()).unwrap();
        let filtered = filter_grid_by_power(specs, &[9.0]);
        assert!(!filtered.is_empty());
        assert!(filtered.iter().all(|s| (power_of(s) - 9.0).abs() < 1e-9));
        // 9 appears for each family: 2 lengths/gaps/frequencies x 2 signs.
        assert_eq!(filtered.len(), 12);
    }

    #[test]
    fn trivial_filter() {
        use crate::geometry::{Point2, Polyline};
        use crate::scene::{derive_drivable_area, Scene, Trajectory};

        let lane = Polyline::new(vec![Point2::new(-50.0, 0.0), Point2::new(50.0, 0.0)]).unwrap();
        let scene = derive_drivable_area(&Scene::new(vec![lane], vec![], 3.5));
        let mk = |speed: f64| Scenario {
            id: format!("v{speed}"),
            scene: scene.clone(),
            history: Trajectory::new(
                (0..20)
                    .map(|i| Point2::new(-(19 - i) as f64 * speed * 0.1, 0.0))
                    .collect(),
                0.1,
            ),
            gt_future: None,
            agents: vec![],
        };
        let scenarios = vec![mk(0.0), mk(10.0), mk(0.5)];
        let kept = filter_trivial(scenarios.clone(), DEFAULT_TRIVIAL_SPEED);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "v10");
        // v_min = 0 keeps everything.
        assert_eq!(filter_trivial(scenarios, 0.0).len(), 3);
    }
}
