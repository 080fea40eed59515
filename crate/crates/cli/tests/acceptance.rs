//! Acceptance suite: one test per release criterion, each printing a
//! `[PASS] criterion N` line. Run with `cargo test -p roadwarp-cli --test
//! acceptance -- --nocapture` to see the lines.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use roadwarp_core::geometry::{Point2, Pose};
use roadwarp_core::metrics::{dataset_report, offroad_fraction, select_mode, EvalRecord};
use roadwarp_core::physics::{enforce_feasibility, max_feasible_speed, min_radius, PhysicsConfig};
use roadwarp_core::predictors::Predictor;
use roadwarp_core::retrieval::{build_vocab_tree, scene_descriptor, SceneDescriptor};
use roadwarp_core::scene::{denormalize, load_scenario, normalize, save_scenario, Scenario};
use roadwarp_core::search::{
    attack_scenario, build_grid, export_augmented, heatmap, transfer_eval, SearchConfig,
};
use roadwarp_core::synth::{corpus, straight_scenario, tiles, trivial_scenario, CorpusSpec};
use roadwarp_core::transforms::{eval_offset, warp_scenario, Family, TransformSpec};

const ACCEPTANCE_SEED: u64 = 20240; // fixed so every run sees the same corpus

fn acceptance_corpus() -> Vec<Scenario> {
    corpus(&CorpusSpec {
        n_straight: 50,
        n_arc: 30,
        n_high_speed: 20,
        n_trivial: 0,
        seed: ACCEPTANCE_SEED,
    })
}

fn write_scenarios(dir: &Path, scenarios: &[Scenario]) {
    std::fs::create_dir_all(dir).unwrap();
    for scn in scenarios {
        save_scenario(scn, &dir.join(format!("{}.json", scn.id))).unwrap();
    }
}

fn roadwarp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_roadwarp"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Criterion 1: the kinematics-respecting centerline follower cannot be
/// forced off-road on a feasible synthetic corpus — SOR = 0 and HOR = 0
/// exactly, within the runtime budget.
#[test]
fn c01_mpc_invulnerability() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let scenarios_dir = dir.path().join("scenarios");
    write_scenarios(&scenarios_dir, &acceptance_corpus());

    let report_path = dir.path().join("report.json");
    run_ok(
        roadwarp()
            .arg("evaluate")
            .arg("--scenarios")
            .arg(&scenarios_dir)
            .arg("--predictor")
            .arg("mpc")
            .arg("--attacked")
            .arg("--out")
            .arg(&report_path),
    );
    let report = read_report(&report_path);
    assert_eq!(report["sor"], 0, "SOR must be exactly 0");
    assert_eq!(report["hor"], 0, "HOR must be exactly 0");
    assert_eq!(report["n"], 100);
    assert_eq!(report["errors"], 0);

    let elapsed = start.elapsed();
    assert!(
        elapsed <= Duration::from_secs(300),
        "runtime budget exceeded: {elapsed:?}"
    );
    println!(
        "[PASS] criterion 1: MPC invulnerability (SOR 0 / HOR 0 over 100 scenarios in {elapsed:?})"
    );
}

/// Criterion 2: after dropping trivial scenarios, the scene-blind
/// constant-velocity baseline is forced off-road in at least 60% of
/// scenarios by the default 60-candidate sweep.
#[test]
fn c02_attack_effectiveness_proxy() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios_dir = dir.path().join("scenarios");
    let mut scenarios = acceptance_corpus();
    // A few zero-velocity scenarios for the filter to remove.
    for i in 0..8 {
        scenarios.push(trivial_scenario(
            format!("trivial_{i:02}"),
            &Pose::new(Point2::new(i as f64 * 40.0, -30.0), 0.3 * i as f64),
        ));
    }
    write_scenarios(&scenarios_dir, &scenarios);

    let filtered_dir = dir.path().join("filtered");
    run_ok(
        roadwarp()
            .arg("filter-trivial")
            .arg("--scenarios")
            .arg(&scenarios_dir)
            .arg("--v-min")
            .arg("1")
            .arg("--out")
            .arg(&filtered_dir),
    );
    let kept = std::fs::read_dir(&filtered_dir).unwrap().count();
    assert_eq!(
        kept, 100,
        "filter must drop exactly the 8 trivial scenarios"
    );

    let report_path = dir.path().join("report.json");
    run_ok(
        roadwarp()
            .arg("evaluate")
            .arg("--scenarios")
            .arg(&filtered_dir)
            .arg("--predictor")
            .arg("cv")
            .arg("--attacked")
            .arg("--out")
            .arg(&report_path),
    );
    let report = read_report(&report_path);
    let hor = report["hor"].as_i64().unwrap();
    assert!(hor >= 60, "HOR {hor} < 60");
    assert_eq!(report["errors"], 0);
    println!(
        "[PASS] criterion 2: attack effectiveness proxy (constant-velocity HOR {hor}% >= 60%)"
    );
}

/// Criterion 3: on the high-speed subset, disabling the feasibility
/// slow-down can only hurt the centerline follower, and strictly hurts it
/// on at least one scenario.
#[test]
fn c03_physics_necessity() {
    let dir = tempfile::tempdir().unwrap();
    let subset_dir = dir.path().join("fast");
    let fast: Vec<Scenario> = acceptance_corpus()
        .into_iter()
        .filter(|s| s.id.starts_with("fast_"))
        .collect();
    assert_eq!(fast.len(), 20);
    // Subset precondition: history speed above the feasible speed of the
    // sharpest generated road (the grid's tightest warp).
    let cfg = SearchConfig::default();
    let sharpest_v_max = build_grid(&cfg)
        .unwrap()
        .iter()
        .map(|spec| {
            let (norm, _) = normalize(&fast[0]).unwrap();
            let warped = warp_scenario(&norm, spec).unwrap();
            max_feasible_speed(min_radius(&warped.scene, 1.0), &cfg.physics)
        })
        .fold(f64::INFINITY, f64::min);
    for scn in &fast {
        assert!(scn.max_history_speed() > sharpest_v_max);
    }
    write_scenarios(&subset_dir, &fast);

    let with_path = dir.path().join("with.json");
    run_ok(
        roadwarp()
            .arg("evaluate")
            .arg("--scenarios")
            .arg(&subset_dir)
            .arg("--predictor")
            .arg("mpc")
            .arg("--attacked")
            .arg("--out")
            .arg(&with_path),
    );
    let without_path = dir.path().join("without.json");
    run_ok(
        roadwarp()
            .arg("evaluate")
            .arg("--scenarios")
            .arg(&subset_dir)
            .arg("--predictor")
            .arg("mpc")
            .arg("--attacked")
            .arg("--no-physics")
            .arg("--out")
            .arg(&without_path),
    );

    let hor_with = read_report(&with_path)["hor"].as_i64().unwrap();
    let hor_without = read_report(&without_path)["hor"].as_i64().unwrap();
    assert_eq!(hor_with, 0, "physics-on HOR must be 0");
    assert!(hor_without >= hor_with);
    assert!(
        hor_without > 0,
        "at least one scenario must defeat the follower without the slow-down"
    );
    println!(
        "[PASS] criterion 3: physics necessity (HOR {hor_without}% without slow-down vs {hor_with}% with)"
    );
}

/// Independent closed-form evaluation of the three offset families, written
/// against the published formulas rather than the implementation.
fn oracle_offset(spec: &TransformSpec, x: f64) -> f64 {
    use roadwarp_core::transforms::TransformParams;

    fn single_turn(a1: f64, a2: f64, a3: f64, u: f64) -> f64 {
        if u < 0.0 {
            0.0
        } else if u <= a1 {
            a2 * u.powf(a3)
        } else {
            let q = a2 * a1.powf(a3);
            let dq = a2 * a3 * a1.powf(a3 - 1.0);
            dq * (u - a1) + q
        }
    }

    let u = x - spec.border;
    match &spec.params {
        TransformParams::Smooth(p) => single_turn(p.alpha1, p.alpha2, p.alpha3, u),
        TransformParams::Double(p) => {
            single_turn(p.inner.alpha1, p.inner.alpha2, p.inner.alpha3, u)
                - single_turn(p.inner.alpha1, p.inner.alpha2, p.inner.alpha3, u - p.gap)
        }
        TransformParams::Ripple(p) => {
            if u < 0.0 {
                0.0
            } else {
                p.gamma1 * (1.0 - (2.0 * std::f64::consts::PI * p.gamma2 * u).cos())
            }
        }
    }
}

/// Criterion 4: offset evaluation matches the symbolic oracle at 1e5 random
/// (spec, x) pairs within 1e-12, and smooth turns are C1 at both branch
/// joints for 1e3 random specs.
#[test]
fn c04_transform_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..100_000 {
        let border = rng.gen_range(0.0..10.0);
        let spec = match rng.gen_range(0..3u8) {
            0 => TransformSpec::smooth(
                rng.gen_range(5.0..25.0),
                rng.gen_range(-0.003..0.003),
                rng.gen_range(2.0..4.0),
                border,
            ),
            1 => TransformSpec::double(
                rng.gen_range(5.0..25.0),
                rng.gen_range(-0.003..0.003),
                rng.gen_range(2.0..4.0),
                rng.gen_range(5.0..25.0),
                border,
            ),
            _ => {
                TransformSpec::ripple(rng.gen_range(-9.0..9.0), rng.gen_range(0.005..0.02), border)
            }
        };
        let x = rng.gen_range(border - 20.0..border + 80.0);
        let got = eval_offset(&spec, x);
        let want = oracle_offset(&spec, x);
        assert!(
            (got - want).abs() <= 1e-12,
            "offset mismatch for {spec:?} at x={x}: {got} vs {want}"
        );
    }

    // C1 joints via second-order one-sided differences (truncation O(eps^2)).
    let fd_right = |spec: &TransformSpec, x: f64, eps: f64| {
        (-3.0 * eval_offset(spec, x) + 4.0 * eval_offset(spec, x + eps)
            - eval_offset(spec, x + 2.0 * eps))
            / (2.0 * eps)
    };
    let fd_left = |spec: &TransformSpec, x: f64, eps: f64| {
        (3.0 * eval_offset(spec, x) - 4.0 * eval_offset(spec, x - eps)
            + eval_offset(spec, x - 2.0 * eps))
            / (2.0 * eps)
    };
    for _ in 0..1_000 {
        let border = rng.gen_range(0.0..10.0);
        let alpha1 = rng.gen_range(5.0..25.0);
        let spec = TransformSpec::smooth(
            alpha1,
            rng.gen_range(-0.003..0.003),
            rng.gen_range(2.0..4.0),
            border,
        );
        for joint in [border, border + alpha1] {
            let gap = (fd_left(&spec, joint, 1e-4) - fd_right(&spec, joint, 1e-4)).abs();
            assert!(
                gap <= 1e-6,
                "derivative gap {gap} at joint {joint} for {spec:?}"
            );
        }
    }
    println!("[PASS] criterion 4: transform oracle equivalence (1e5 samples at 1e-12, 1e3 C1 joint checks at 1e-6)");
}

/// Criterion 5: the sweep result equals an independently coded exhaustive
/// enumeration on 50 scenarios — exact match, tie-breaks included.
#[test]
fn c05_search_equals_exhaustive_oracle() {
    let scenarios = corpus(&CorpusSpec {
        n_straight: 30,
        n_arc: 15,
        n_high_speed: 5,
        n_trivial: 0,
        seed: 555,
    });
    assert_eq!(scenarios.len(), 50);
    let cfg = SearchConfig::default();
    let predictor = Predictor::ConstantVelocity;
    for scn in &scenarios {
        let result = attack_scenario(scn, &predictor, &cfg).unwrap();

        // Oracle: enumerate the same grid by hand.
        let specs = build_grid(&cfg).unwrap();
        let (norm, pose) = normalize(scn).unwrap();
        let mut best_loss = f64::INFINITY;
        let mut best_idx = 0usize;
        for (i, spec) in specs.iter().enumerate() {
            let loss = match warp_scenario(&norm, spec) {
                Ok(warped) => {
                    let enforced = enforce_feasibility(&warped, &cfg.physics, 1.0);
                    let world = denormalize(&enforced, &pose);
                    let ps = predictor.predict(&world).unwrap();
                    let mode = select_mode(&ps, world.gt_future.as_ref()).unwrap();
                    let m = offroad_fraction(&ps.modes[mode], &world.scene);
                    (1.0 - m) * (1.0 - m)
                }
                Err(_) => 1.0,
            };
            if loss < best_loss {
                best_loss = loss;
                best_idx = i;
            }
        }
        assert_eq!(result.best_loss, best_loss, "{}", scn.id);
        assert_eq!(result.best_spec, specs[best_idx], "{} tie-break", scn.id);
    }
    println!("[PASS] criterion 5: sweep equals the exhaustive oracle on 50 scenarios (exact, tie-breaks included)");
}

/// Criterion 6: membership against a ray-casting oracle on 1e4 points, the
/// hand-computed report case, and nearest-integer rounding.
#[test]
fn c06_metrics_correctness() {
    use roadwarp_core::geometry::{dist_point_segment, Polygon};

    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut checked = 0usize;
    while checked < 10_000 {
        // Random star-shaped (simple) polygon.
        let n = rng.gen_range(5..14usize);
        let ring: Vec<Point2> = (0..n)
            .map(|i| {
                let ang = std::f64::consts::TAU * i as f64 / n as f64;
                let r = rng.gen_range(1.0..10.0);
                Point2::new(r * ang.cos(), r * ang.sin())
            })
            .collect();
        let poly = Polygon::new(ring.clone()).unwrap();
        for _ in 0..40 {
            let p = Point2::new(rng.gen_range(-12.0..12.0), rng.gen_range(-12.0..12.0));
            let boundary = (0..n)
                .map(|i| dist_point_segment(p, ring[i], ring[(i + 1) % n]))
                .fold(f64::INFINITY, f64::min);
            if boundary <= 1e-7 {
                continue;
            }
            // Even-odd ray casting, independently coded.
            let mut inside = false;
            let mut j = n - 1;
            for i in 0..n {
                let (a, b) = (ring[i], ring[j]);
                if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x
                {
                    inside = !inside;
                }
                j = i;
            }
            assert_eq!(poly.contains(p), inside, "disagreement at {p:?}");
            checked += 1;
        }
    }

    let report = dataset_report(vec![
        EvalRecord::new("a".into(), 0.1, None, None, false),
        EvalRecord::new("b".into(), 0.0, None, None, false),
    ])
    .unwrap();
    assert_eq!((report.sor, report.hor), (5, 50));

    // Nearest-integer rounding on both metrics.
    let r = dataset_report(vec![EvalRecord::new("a".into(), 0.005, None, None, false)]).unwrap();
    assert_eq!(r.sor, 1);
    let r = dataset_report(vec![EvalRecord::new(
        "a".into(),
        0.00499,
        None,
        None,
        false,
    )])
    .unwrap();
    assert_eq!(r.sor, 0);
    let records: Vec<EvalRecord> = (0..3)
        .map(|i| {
            EvalRecord::new(
                format!("r{i}"),
                if i == 0 { 0.3 } else { 0.0 },
                None,
                None,
                false,
            )
        })
        .collect();
    let r = dataset_report(records).unwrap();
    assert_eq!(r.hor, 33, "1/3 rounds to 33");
    println!("[PASS] criterion 6: metrics correctness (1e4-point membership oracle, hand-computed report, rounding)");
}

/// Criterion 7: slow-down invariants over 1e3 randomized warped scenarios.
#[test]
fn c07_feasibility_invariants() {
    let cfg = PhysicsConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0usize;
    let mut slowed = 0usize;
    while checked < 1_000 {
        let scenarios = corpus(&CorpusSpec {
            n_straight: 2,
            n_arc: 1,
            n_high_speed: 1,
            n_trivial: 0,
            seed: rng.gen(),
        });
        for scn in scenarios {
            let (norm, _) = normalize(&scn).unwrap();
            let spec = match rng.gen_range(0..3u8) {
                0 => TransformSpec::smooth(
                    rng.gen_range(8.0..22.0),
                    rng.gen_range(-0.003..0.003),
                    3.0,
                    5.0,
                ),
                1 => TransformSpec::double(
                    10.0,
                    rng.gen_range(-0.003..0.003),
                    3.0,
                    rng.gen_range(8.0..22.0),
                    5.0,
                ),
                _ => {
                    TransformSpec::ripple(rng.gen_range(-9.0..9.0), rng.gen_range(0.01..0.02), 5.0)
                }
            };
            let warped = match warp_scenario(&norm, &spec) {
                Ok(w) => w,
                Err(_) => continue,
            };
            let out = enforce_feasibility(&warped, &cfg, 1.0);
            let v_max = max_feasible_speed(min_radius(&warped.scene, 1.0), &cfg);
            if v_max.is_finite() {
                assert!(
                    out.max_history_speed() <= v_max * (1.0 + 1e-9),
                    "speed bound violated for {}",
                    scn.id
                );
            }
            if out != warped {
                slowed += 1;
            }
            let anchor_shift = warped
                .history
                .last()
                .unwrap()
                .distance(out.history.last().unwrap());
            assert!(anchor_shift <= 1e-12, "anchor moved by {anchor_shift}");
            let twice = enforce_feasibility(&out, &cfg, 1.0);
            assert_eq!(twice, out, "idempotence violated for {}", scn.id);
            checked += 1;
        }
    }
    assert!(
        slowed > 100,
        "the invariant run must actually exercise the slow-down ({slowed})"
    );
    println!("[PASS] criterion 7: feasibility invariants over 1e3 randomized scenarios ({slowed} slow-downs exercised)");
}

/// Criterion 8: HOR grows (weakly) with |power| along heatmap rows, and
/// mirrored signs tie on a mirror-symmetric corpus.
#[test]
fn c08_heatmap_monotonicity() {
    // Exactly mirror-symmetric corpus: canonical straight scenarios.
    let scenarios: Vec<Scenario> = (0..100)
        .map(|i| {
            let speed = 3.0 + 12.0 * (i as f64 / 99.0);
            straight_scenario(format!("row{i:03}"), speed, &Pose::identity(), vec![])
        })
        .collect();
    let cfg = SearchConfig::default();
    let predictor = Predictor::ConstantVelocity;

    let check_rows = |grid: &roadwarp_core::search::HeatmapGrid| {
        for row in &grid.hor {
            let k = row.len();
            assert_eq!(k % 2, 1, "odd column count with a zero-power center");
            let mid = k / 2;
            for j in mid..k - 1 {
                assert!(row[j] <= row[j + 1], "not monotone on the + side: {row:?}");
            }
            for j in (1..=mid).rev() {
                assert!(row[j] <= row[j - 1], "not monotone on the - side: {row:?}");
            }
            for j in 0..k {
                assert_eq!(row[j], row[k - 1 - j], "sign symmetry broken: {row:?}");
            }
        }
    };

    let powers = [-9.0, -7.0, -5.0, -3.0, -1.0, 0.0, 1.0, 3.0, 5.0, 7.0, 9.0];
    let alpha2: Vec<f64> = powers.iter().map(|p| p / 3000.0).collect();
    let smooth = heatmap(
        &scenarios,
        &predictor,
        Family::SmoothTurn,
        &[10.0, 20.0],
        &alpha2,
        &cfg,
    )
    .unwrap();
    check_rows(&smooth);

    let gamma1: Vec<f64> = powers.to_vec();
    let ripple = heatmap(
        &scenarios,
        &predictor,
        Family::RippleRoad,
        &[0.01, 0.017],
        &gamma1,
        &cfg,
    )
    .unwrap();
    check_rows(&ripple);
    println!("[PASS] criterion 8: heatmap HOR non-decreasing in |power| with sign symmetry (smooth + ripple rows)");
}

/// Criterion 9: retrieval at desk scale — 2,000 tiles, branching 10,
/// depth 3: perfect self-retrieval, planted near-duplicates in the top 3
/// for >= 95%, inside the time budget.
#[test]
fn c09_retrieval_properties() {
    let start = Instant::now();
    let tiles = tiles(909, 2_000);
    let descriptors: Vec<(String, SceneDescriptor)> = tiles
        .iter()
        .map(|(id, scene)| (id.clone(), scene_descriptor(scene).unwrap()))
        .collect();
    let tree = build_vocab_tree(&descriptors, 10, 3, 9).unwrap();

    // Self-retrieval: rank 1, distance ~0, for every indexed tile.
    for (id, d) in &descriptors {
        let hits = tree.query_descriptor(d, 10).unwrap();
        assert_eq!(&hits[0].id, id, "self-retrieval failed for {id}");
        assert!(hits[0].distance <= 1e-9);
    }

    // Planted near-duplicates: descriptor + noise of L2 norm 0.01.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut hits_top3 = 0usize;
    let n_queries = 200usize;
    let mut worst_ratio: f64 = 0.0;
    for q in 0..n_queries {
        let (id, d) = &descriptors[(q * 9973) % descriptors.len()];
        let mut noise: Vec<f64> = (0..d.values.len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let norm: f64 = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut noise {
            *v *= 0.01 / norm;
        }
        let noisy = SceneDescriptor {
            values: d.values.iter().zip(&noise).map(|(a, b)| a + b).collect(),
        };
        let hits = tree.query_descriptor(&noisy, 10).unwrap();
        if hits.iter().take(3).any(|h| &h.id == id) {
            hits_top3 += 1;
        }
        // Approximation quality: max returned distance within 2x the true
        // k-th nearest distance.
        let mut exact: Vec<f64> = descriptors
            .iter()
            .map(|(_, e)| {
                e.values
                    .iter()
                    .zip(&noisy.values)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        exact.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let true_kth = exact[hits.len() - 1].max(1e-12);
        let returned_max = hits.last().unwrap().distance;
        worst_ratio = worst_ratio.max(returned_max / true_kth);
        assert!(
            returned_max <= 2.0 * true_kth + 1e-12,
            "approximation bound violated: {returned_max} vs true k-th {true_kth}"
        );
    }
    let rate = hits_top3 as f64 / n_queries as f64;
    assert!(rate >= 0.95, "near-duplicate top-3 rate {rate} < 0.95");

    let elapsed = start.elapsed();
    assert!(
        elapsed <= Duration::from_secs(120),
        "budget exceeded: {elapsed:?}"
    );
    println!(
        "[PASS] criterion 9: retrieval properties (self-retrieval 100%, near-duplicates {:.1}% top-3, max distance ratio {:.2}, {elapsed:?})",
        rate * 100.0,
        worst_ratio
    );
}

/// Criterion 10: stored off-road successes replay at HOR = 100 on the same
/// predictor, and exported augmentation files reload and reproduce the
/// stored off-road fraction.
#[test]
fn c10_transfer_replay() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios_dir = dir.path().join("scenarios");
    let scenarios: Vec<Scenario> = acceptance_corpus().into_iter().take(40).collect();
    write_scenarios(&scenarios_dir, &scenarios);

    // Full CLI path: attack -> stored results -> transfer.
    let results_dir = dir.path().join("results");
    run_ok(
        roadwarp()
            .arg("attack")
            .arg("--scenarios")
            .arg(&scenarios_dir)
            .arg("--predictor")
            .arg("cv")
            .arg("--out")
            .arg(&results_dir),
    );
    let report_path = dir.path().join("transfer.json");
    run_ok(
        roadwarp()
            .arg("transfer")
            .arg("--results")
            .arg(&results_dir)
            .arg("--predictor")
            .arg("cv")
            .arg("--out")
            .arg(&report_path),
    );
    let report = read_report(&report_path);
    assert_eq!(
        report["hor"], 100,
        "diagonal replay must give HOR = 100 exactly"
    );
    assert_eq!(report["errors"], 0);

    // Library path: export + replay to the stored fraction.
    let cfg = SearchConfig::default();
    let predictor = Predictor::ConstantVelocity;
    let results: Vec<_> = scenarios
        .iter()
        .map(|scn| attack_scenario(scn, &predictor, &cfg).unwrap())
        .filter(|r| r.best_offroad > 0.0)
        .collect();
    assert!(!results.is_empty());
    let replay = transfer_eval(&results, &predictor).unwrap();
    assert_eq!(replay.hor, 100);

    let export_dir = dir.path().join("aug");
    let files = export_augmented(&results, &export_dir).unwrap();
    let mut checked = 0usize;
    for (file, result) in files.iter().zip(&results) {
        let reloaded = load_scenario(file).unwrap();
        let ps = predictor.predict(&reloaded).unwrap();
        let mode = select_mode(&ps, reloaded.gt_future.as_ref()).unwrap();
        let m = offroad_fraction(&ps.modes[mode], &reloaded.scene);
        assert!(
            (m - result.best_offroad).abs() <= 1e-9,
            "{}: replayed {m} vs stored {}",
            result.scenario_id,
            result.best_offroad
        );
        checked += 1;
    }
    println!("[PASS] criterion 10: transfer replay (HOR 100 on {} successes, {checked} exports replayed within 1e-9)", results.len());
}

/// Exercises the remaining CLI surfaces end to end: render, heatmap +
/// heatmap-render, index-build + index-query, and exit codes.
#[test]
fn cli_surfaces_roundtrip() {
    let dir = tempfile::tempdir().unwrap();

    // Scenario figure with a prediction overlay.
    let scn = straight_scenario("fig", 8.0, &Pose::identity(), vec![]);
    let scn_path = dir.path().join("fig.json");
    save_scenario(&scn, &scn_path).unwrap();
    let pred_path = dir.path().join("pred.json");
    let mode: Vec<[f64; 2]> = (1..=30).map(|k| [k as f64 * 0.8, 0.1 * k as f64]).collect();
    std::fs::write(
        &pred_path,
        serde_json::to_string(&serde_json::json!({"modes": [mode], "probabilities": [1.0]}))
            .unwrap(),
    )
    .unwrap();
    let svg_path = dir.path().join("fig.svg");
    run_ok(
        roadwarp()
            .arg("render")
            .arg("--scenario")
            .arg(&scn_path)
            .arg("--pred")
            .arg(&pred_path)
            .arg("--out")
            .arg(&svg_path),
    );
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polygon"));

    // Heatmap grid file and its figure.
    let scenarios_dir = dir.path().join("hm-scenarios");
    write_scenarios(
        &scenarios_dir,
        &(0..6)
            .map(|i| straight_scenario(format!("hm{i}"), 5.0 + i as f64, &Pose::identity(), vec![]))
            .collect::<Vec<_>>(),
    );
    let grid_path = dir.path().join("grid.json");
    run_ok(
        roadwarp()
            .arg("heatmap")
            .arg("--scenarios")
            .arg(&scenarios_dir)
            .arg("--predictor")
            .arg("cv")
            .arg("--family")
            .arg("ripple_road")
            .arg("--param1")
            .arg("0.01,0.017")
            .arg("--param2")
            .arg("-9,0,9")
            .arg("--out")
            .arg(&grid_path),
    );
    let hm_svg = dir.path().join("grid.svg");
    run_ok(
        roadwarp()
            .arg("heatmap-render")
            .arg("--grid")
            .arg(&grid_path)
            .arg("--out")
            .arg(&hm_svg),
    );
    assert!(std::fs::read_to_string(&hm_svg).unwrap().contains("<rect"));

    // Index build + self query.
    let corpus_dir = dir.path().join("tiles");
    std::fs::create_dir_all(&corpus_dir).unwrap();
    for (id, scene) in tiles(3, 40) {
        let lanes: Vec<Vec<[f64; 2]>> = scene
            .lanes
            .iter()
            .map(|l| l.points().iter().map(|p| [p.x, p.y]).collect())
            .collect();
        std::fs::write(
            corpus_dir.join(format!("{id}.json")),
            serde_json::to_string(&serde_json::json!({
                "id": id, "dt": 0.1, "lanes": lanes, "location": "synthetic"
            }))
            .unwrap(),
        )
        .unwrap();
    }
    let index_path = dir.path().join("index.json");
    run_ok(
        roadwarp()
            .arg("index-build")
            .arg("--corpus")
            .arg(&corpus_dir)
            .arg("--branching")
            .arg("5")
            .arg("--depth")
            .arg("2")
            .arg("--out")
            .arg(&index_path),
    );
    let hits_json = run_ok(
        roadwarp()
            .arg("index-query")
            .arg("--index")
            .arg(&index_path)
            .arg("--scene")
            .arg(corpus_dir.join("tile_00007.json"))
            .arg("-k")
            .arg("5"),
    );
    let hits: serde_json::Value = serde_json::from_str(&hits_json).unwrap();
    assert_eq!(hits[0]["id"], "tile_00007");

    // Exit codes: usage (1) and data (2).
    let usage = roadwarp()
        .arg("evaluate")
        .arg("--predictor")
        .arg("nope")
        .arg("--scenarios")
        .arg(&scn_path)
        .output()
        .unwrap();
    assert_eq!(usage.status.code(), Some(1));
    let data = roadwarp()
        .arg("render")
        .arg("--scenario")
        .arg(dir.path().join("missing.json"))
        .arg("--out")
        .arg(&svg_path)
        .output()
        .unwrap();
    assert_eq!(data.status.code(), Some(2));
    let external = roadwarp()
        .arg("evaluate")
        .arg("--scenarios")
        .arg(&scn_path)
        .arg("--predictor")
        .arg("external")
        .output()
        .unwrap();
    assert_eq!(external.status.code(), Some(3), "missing --external-cmd");

    println!("[PASS] CLI surfaces: render, heatmap, heatmap-render, index-build/query, exit codes");
}
