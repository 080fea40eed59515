//! Deterministic synthetic scenario and map-tile generators, used by the
//! test suites and handy for demos. Scenarios are built in a canonical local
//! frame (history heading +x, prediction origin at 0) and then placed in the
//! world with a random rigid motion.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Point2, Polyline, Pose};
use crate::scene::{derive_drivable_area, Scenario, Scene, Trajectory, FUTURE_LEN, HISTORY_LEN};

const DT: f64 = 0.1;

fn place(scn: Scenario, pose: &Pose) -> Scenario {
    scn.map_points(|p| pose.apply(p))
}

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose::new(
        Point2::new(rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0)),
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
}

fn lane_from(points: Vec<Point2>) -> Polyline {
    Polyline::new(points).expect("synthetic lane")
}

fn maybe_agent(rng: &mut ChaCha8Rng, speed: f64, offset_ahead: f64) -> Vec<Trajectory> {
    if rng.gen_bool(0.5) {
        let pts = (0..HISTORY_LEN)
            .map(|i| Point2::new(offset_ahead + i as f64 * speed * DT, 0.0))
            .collect();
        vec![Trajectory::new(pts, DT)]
    } else {
        vec![]
    }
}

/// Straight lane along +x; history arrives at the origin at `speed`.
pub fn straight_scenario(
    id: impl Into<String>,
    speed: f64,
    pose: &Pose,
    agents: Vec<Trajectory>,
) -> Scenario {
    let lane = lane_from(
        (0..=54)
            .map(|i| Point2::new(-70.0 + i as f64 * 5.0, 0.0))
            .collect(),
    );
    let history = Trajectory::new(
        (0..HISTORY_LEN)
            .map(|i| Point2::new(-((HISTORY_LEN - 1 - i) as f64) * speed * DT, 0.0))
            .collect(),
        DT,
    );
    let gt_future = Trajectory::new(
        (1..=FUTURE_LEN)
            .map(|k| Point2::new(k as f64 * speed * DT, 0.0))
            .collect(),
        DT,
    );
    let scene = derive_drivable_area(&Scene::new(vec![lane], vec![], 3.5));
    place(
        Scenario {
            id: id.into(),
            scene,
            history,
            gt_future: Some(gt_future),
            agents,
        },
        pose,
    )
}

/// Constant-curvature lane; the history rides the arc and ends at arc
/// length 0 (the local origin) heading +x. `left` picks the turn direction.
pub fn arc_scenario(
    id: impl Into<String>,
    speed: f64,
    radius: f64,
    left: bool,
    pose: &Pose,
) -> Scenario {
    let sign = if left { 1.0 } else { -1.0 };
    let at = |s: f64| {
        let phi = s / radius;
        Point2::new(radius * phi.sin(), sign * radius * (1.0 - phi.cos()))
    };
    let total = (radius * 2.6f64).min(150.0);
    let back = 45.0;
    let forward = total - back;
    let n = (total / 1.5).ceil() as usize;
    let lane = lane_from(
        (0..=n)
            .map(|i| at(-back + total * i as f64 / n as f64))
            .collect(),
    );
    let history = Trajectory::new(
        (0..HISTORY_LEN)
            .map(|i| at(-((HISTORY_LEN - 1 - i) as f64) * speed * DT))
            .collect(),
        DT,
    );
    let gt_future = Trajectory::new(
        (1..=FUTURE_LEN)
            .map(|k| at((k as f64 * speed * DT).min(forward - 1.0)))
            .collect(),
        DT,
    );
    let scene = derive_drivable_area(&Scene::new(vec![lane], vec![], 3.5));
    place(
        Scenario {
            id: id.into(),
            scene,
            history,
            gt_future: Some(gt_future),
            agents: vec![],
        },
        pose,
    )
}

/// Zero-velocity scenario: the fooling-resistant trivial case.
pub fn trivial_scenario(id: impl Into<String>, pose: &Pose) -> Scenario {
    let lane = lane_from(vec![Point2::new(-70.0, 0.0), Point2::new(120.0, 0.0)]);
    let history = Trajectory::new(vec![Point2::new(0.0, 0.0); HISTORY_LEN], DT);
    let gt_future = Trajectory::new(vec![Point2::new(0.0, 0.0); FUTURE_LEN], DT);
    let scene = derive_drivable_area(&Scene::new(vec![lane], vec![], 3.5));
    place(
        Scenario {
            id: id.into(),
            scene,
            history,
            gt_future: Some(gt_future),
            agents: vec![],
        },
        pose,
    )
}

/// Makeup of a generated corpus.
#[derive(Debug, Clone, Copy)]
pub struct CorpusSpec {
    pub n_straight: usize,
    pub n_arc: usize,
    /// Straight scenarios faster than any warped road allows; exercises the
    /// feasibility slow-down.
    pub n_high_speed: usize,
    pub n_trivial: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_straight: 50,
            n_arc: 30,
            n_high_speed: 20,
            n_trivial: 0,
            seed: 2024,
        }
    }
}

/// Deterministic mixed corpus. Straights run 4.5-13 m/s, arcs stay well
/// under their friction speed, high-speed straights run 16-22 m/s.
pub fn corpus(spec: &CorpusSpec) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::new();
    for i in 0..spec.n_straight {
        let speed = rng.gen_range(4.5..13.0);
        let pose = random_pose(&mut rng);
        let agents = maybe_agent(&mut rng, speed, 25.0)
            .into_iter()
            .map(|t| t.map_points(|p| pose.apply(p)))
            .collect();
        out.push(straight_scenario(
            format!("straight_{i:04}"),
            speed,
            &pose,
            agents,
        ));
    }
    for i in 0..spec.n_arc {
        let radius: f64 = rng.gen_range(30.0..60.0);
        let friction_cap = 0.85 * (0.7 * 9.81 * radius).sqrt();
        let forward = (radius * 2.6f64).min(150.0) - 45.0;
        let reach_cap = (forward - 5.0) / 3.0;
        let hi = friction_cap.min(reach_cap).min(13.0);
        let speed = rng.gen_range(4.0..hi);
        let left = rng.gen_bool(0.5);
        let pose = random_pose(&mut rng);
        out.push(arc_scenario(
            format!("arc_{i:04}"),
            speed,
            radius,
            left,
            &pose,
        ));
    }
    for i in 0..spec.n_high_speed {
        let speed = rng.gen_range(16.0..22.0);
        let pose = random_pose(&mut rng);
        out.push(straight_scenario(
            format!("fast_{i:04}"),
            speed,
            &pose,
            vec![],
        ));
    }
    for i in 0..spec.n_trivial {
        let pose = random_pose(&mut rng);
        out.push(trivial_scenario(format!("trivial_{i:04}"), &pose));
    }
    out
}

/// Random map tiles for the retrieval corpus; every tile fits a 200 m crop.
/// Each tile combines two primitives with continuously random parameters and
/// relative placement, so no two generated tiles share the same road shape.
pub fn tiles(seed: u64, n: usize) -> Vec<(String, Scene)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let pose = Pose::new(
                Point2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)),
                rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            );
            let mut scene = tile_primitive(&mut rng);
            let second = tile_primitive(&mut rng);
            let offset = Pose::new(
                Point2::new(rng.gen_range(-35.0..35.0), rng.gen_range(-35.0..35.0)),
                rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            );
            scene.lanes.extend(
                second
                    .lanes
                    .iter()
                    .map(|l| l.map_points(|p| offset.apply(p))),
            );
            (format!("tile_{i:05}"), scene.map_points(|p| pose.apply(p)))
        })
        .collect()
}

fn tile_primitive(rng: &mut ChaCha8Rng) -> Scene {
    match rng.gen_range(0..4u8) {
        0 => tile_straights(rng),
        1 => tile_arc(rng),
        2 => tile_s_curve(rng),
        _ => tile_crossing(rng),
    }
}

fn tile_straights(rng: &mut ChaCha8Rng) -> Scene {
    let count = rng.gen_range(1..4usize);
    let len = rng.gen_range(60.0..150.0);
    let gap = rng.gen_range(6.0..20.0);
    let lanes = (0..count)
        .map(|k| {
            let y = k as f64 * gap;
            lane_from(vec![Point2::new(-len / 2.0, y), Point2::new(len / 2.0, y)])
        })
        .collect();
    Scene::new(lanes, vec![], 3.5)
}

fn tile_arc(rng: &mut ChaCha8Rng) -> Scene {
    let radius = rng.gen_range(15.0..80.0);
    let span = rng.gen_range(0.6..1.6f64).min(130.0 / radius);
    let n = 80;
    let pts = (0..=n)
        .map(|i| {
            let phi = span * i as f64 / n as f64;
            Point2::new(radius * phi.sin(), radius * (1.0 - phi.cos()))
        })
        .collect();
    Scene::new(vec![lane_from(pts)], vec![], 3.5)
}

fn tile_s_curve(rng: &mut ChaCha8Rng) -> Scene {
    let radius = rng.gen_range(20.0..60.0);
    let span = rng.gen_range(0.5..1.0f64).min(60.0 / radius);
    let n = 40;
    let mut pts: Vec<Point2> = (0..=n)
        .map(|i| {
            let phi = span * i as f64 / n as f64;
            Point2::new(radius * phi.sin(), radius * (1.0 - phi.cos()))
        })
        .collect();
    let end = *pts.last().unwrap();
    let exit = span;
    for i in 1..=n {
        let phi = span * i as f64 / n as f64;
        // Mirror arc continuing from the first one's end tangent.
        let local = Point2::new(radius * phi.sin(), -radius * (1.0 - phi.cos()));
        let (s, c) = exit.sin_cos();
        pts.push(Point2::new(
            end.x + c * local.x - s * local.y,
            end.y + s * local.x + c * local.y,
        ));
    }
    Scene::new(vec![lane_from(pts)], vec![], 3.5)
}

fn tile_crossing(rng: &mut ChaCha8Rng) -> Scene {
    let len_a = rng.gen_range(50.0..120.0);
    let len_b = rng.gen_range(50.0..120.0);
    let angle = rng.gen_range(0.6..std::f64::consts::FRAC_PI_2);
    let (s, c) = angle.sin_cos();
    let lanes = vec![
        lane_from(vec![
            Point2::new(-len_a / 2.0, 0.0),
            Point2::new(len_a / 2.0, 0.0),
        ]),
        lane_from(vec![
            Point2::new(-c * len_b / 2.0, -s * len_b / 2.0),
            Point2::new(c * len_b / 2.0, s * len_b / 2.0),
        ]),
    ];
    Scene::new(lanes, vec![], 3.5)
}
