//! `roadwarp`: warp road scenes against trajectory predictors, evaluate
//! off-road metrics, build/query a map-tile index, and render SVG figures.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 external-predictor
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use roadwarp_core::error::{PredictError, SearchError};
use roadwarp_core::metrics::{DatasetReport, PredictionSet};
use roadwarp_core::physics::PhysicsConfig;
use roadwarp_core::predictors::{Predictor, PredictorHandle, PredictorKind};
use roadwarp_core::render::{render_heatmap, render_scene, RenderStyle};
use roadwarp_core::retrieval::{
    build_vocab_tree, load_corpus, load_index, query, save_index, scene_descriptor,
    DEFAULT_BRANCHING, DEFAULT_DEPTH, DEFAULT_TOP_K,
};
use roadwarp_core::scene::{load_scenario, load_scene, save_scenario, Scenario, Trajectory};
use roadwarp_core::search::{
    attack_dataset, evaluate_dataset, export_augmented, filter_trivial, heatmap,
    load_attack_result, save_attack_result, transfer_eval, AttackResult, EvalMode, FamilyGrids,
    HeatmapGrid, SamplerKind, SearchConfig, DEFAULT_TRIVIAL_SPEED,
};
use roadwarp_core::transforms::{Family, TransformSpec, DEFAULT_BORDER};

#[derive(Parser)]
#[command(
    name = "roadwarp",
    version,
    about = "Adversarial road-scene warping toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PredictorArgs {
    /// Predictor: cv (constant velocity), mpc (centerline MPC), or external.
    #[arg(long, default_value = "cv")]
    predictor: String,
    /// Command line for the external predictor process.
    #[arg(long)]
    external_cmd: Option<String>,
}

#[derive(Args)]
struct SearchArgs {
    /// Candidates per scenario (must match the grid size for brute force).
    #[arg(long)]
    kmax: Option<usize>,
    /// Border: the warp starts this many meters ahead of the ego.
    #[arg(long, default_value_t = DEFAULT_BORDER)]
    border: f64,
    /// Comma-separated families (smooth_turn,double_turn,ripple_road).
    #[arg(long)]
    families: Option<String>,
    /// Keep only candidates whose transformation power matches (comma list).
    #[arg(long, allow_hyphen_values = true)]
    power: Option<String>,
    /// Candidate sampler: brute-force or uniform-random.
    #[arg(long, default_value = "brute-force")]
    sampler: String,
    /// Friction coefficient.
    #[arg(long, default_value_t = 0.7)]
    mu: f64,
    /// Gravity, m/s^2.
    #[arg(long, default_value_t = 9.81)]
    gravity: f64,
    /// Disable the feasibility slow-down.
    #[arg(long)]
    no_physics: bool,
    /// Seed for the uniform-random sampler.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep warp candidates per scenario and store the worst-case results.
    Attack {
        /// Scenario file or directory of scenario files.
        #[arg(long)]
        scenarios: PathBuf,
        #[command(flatten)]
        predictor: PredictorArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Output directory for per-scenario result files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Report SOR/HOR/ADE/FDE over a scenario set.
    Evaluate {
        #[arg(long)]
        scenarios: PathBuf,
        #[command(flatten)]
        predictor: PredictorArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Evaluate on worst-case warped scenes instead of the originals.
        #[arg(long)]
        attacked: bool,
        /// Report file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// HOR over a 2-D parameter sweep, one single-candidate attack per cell.
    Heatmap {
        #[arg(long)]
        scenarios: PathBuf,
        #[command(flatten)]
        predictor: PredictorArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Transform family for the sweep.
        #[arg(long)]
        family: String,
        /// Comma-separated row-axis values (turn length / gap / frequency).
        #[arg(long, allow_hyphen_values = true)]
        param1: String,
        /// Comma-separated column-axis values (signed curvature parameter).
        #[arg(long, allow_hyphen_values = true)]
        param2: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop scenarios whose peak history speed is below the threshold.
    FilterTrivial {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRIVIAL_SPEED)]
        v_min: f64,
        /// Directory receiving the kept scenario files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-evaluate stored off-road successes against a (possibly different)
    /// predictor.
    Transfer {
        /// Directory of attack result files.
        #[arg(long)]
        results: PathBuf,
        #[command(flatten)]
        predictor: PredictorArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export stored warped scenes as scenario files for augmentation.
    ExportAug {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a scenario (and optional prediction) as SVG.
    Render {
        #[arg(long)]
        scenario: PathBuf,
        /// Prediction file: {"modes": [[[x,y],...]x30], "probabilities": [..]}.
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Style file overriding the default colors/sizes (JSON).
        #[arg(long)]
        style: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a stored heatmap grid as SVG.
    HeatmapRender {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a vocabulary-tree index over a directory of map tiles.
    IndexBuild {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BRANCHING)]
        branching: usize,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query an index with a scene file.
    IndexQuery {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(short, default_value_t = DEFAULT_TOP_K)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Data(String),
    External(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::External(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::External(m) => m,
        }
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        CliError::External(e.to_string())
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version.
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("invalid {what} value {v:?}")))
        })
        .collect()
}

fn parse_families(s: &str) -> Result<Vec<Family>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<Family>()
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect()
}

fn build_predictor(args: &PredictorArgs) -> Result<Predictor, CliError> {
    let kind: PredictorKind = args.predictor.parse().map_err(CliError::Usage)?;
    let handle = PredictorHandle {
        kind,
        external_command: args.external_cmd.clone(),
    };
    Ok(Predictor::from_handle(&handle)?)
}

/// Per-entry power of a grid row, mirroring `transforms::power_of`.
fn filter_grids_by_power(grid: &mut FamilyGrids, powers: &[f64], border: f64) {
    let keep = |spec: TransformSpec| {
        powers
            .iter()
            .any(|p| (roadwarp_core::transforms::power_of(&spec) - p).abs() < 1e-9)
    };
    grid.smooth
        .retain(|&(a1, a2, a3)| keep(TransformSpec::smooth(a1, a2, a3, border)));
    grid.double
        .retain(|&(b11, b12, b13, b2)| keep(TransformSpec::double(b11, b12, b13, b2, border)));
    grid.ripple
        .retain(|&(g1, g2)| keep(TransformSpec::ripple(g1, g2, border)));
}

fn build_search_config(args: &SearchArgs) -> Result<SearchConfig, CliError> {
    if !(args.mu > 0.0 && args.gravity > 0.0) {
        return Err(CliError::Usage(
            "--mu and --gravity must be positive".into(),
        ));
    }
    let mut cfg = SearchConfig {
        border: args.border,
        physics: PhysicsConfig::new(args.mu, args.gravity),
        enforce_physics: !args.no_physics,
        seed: args.seed,
        sampler: args
            .sampler
            .parse::<SamplerKind>()
            .map_err(CliError::Usage)?,
        ..SearchConfig::default()
    };
    if let Some(families) = &args.families {
        cfg.families = parse_families(families)?;
        if cfg.families.is_empty() {
            return Err(CliError::Usage(
                "--families must name at least one family".into(),
            ));
        }
    }
    if let Some(power) = &args.power {
        let powers = parse_f64_list(power, "power")?;
        filter_grids_by_power(&mut cfg.grid, &powers, cfg.border);
    }
    if cfg.sampler == SamplerKind::BruteForce {
        let grid_size: usize = cfg
            .families
            .iter()
            .map(|f| match f {
                Family::SmoothTurn => cfg.grid.smooth.len(),
                Family::DoubleTurn => cfg.grid.double.len(),
                Family::RippleRoad => cfg.grid.ripple.len(),
            })
            .sum();
        if grid_size == 0 {
            return Err(CliError::Usage(
                "candidate grid is empty after filtering".into(),
            ));
        }
        match args.kmax {
            Some(k) if k != grid_size => {
                return Err(CliError::Usage(format!(
                    "--kmax {k} does not match the {grid_size}-candidate grid"
                )))
            }
            _ => cfg.k_max = grid_size,
        }
    } else if let Some(k) = args.kmax {
        if k == 0 {
            return Err(CliError::Usage("--kmax must be at least 1".into()));
        }
        cfg.k_max = k;
    }
    Ok(cfg)
}

/// Loads one scenario file or every `*.json` in a directory (sorted).
fn load_scenarios(path: &Path) -> Result<Vec<Scenario>, CliError> {
    if path.is_file() {
        return Ok(vec![load_scenario(path).map_err(data_err)?]);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(format!(
            "no scenario files in {}",
            path.display()
        )));
    }
    paths
        .iter()
        .map(|p| load_scenario(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))))
        .collect()
}

fn load_results(dir: &Path) -> Result<Vec<AttackResult>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| load_attack_result(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))))
        .collect()
}

fn write_report(report: &DatasetReport, out: Option<&Path>) -> Result<(), CliError> {
    let mut json = serde_json::to_string_pretty(report).map_err(data_err)?;
    json.push('\n');
    match out {
        Some(path) => std::fs::write(path, json).map_err(data_err)?,
        None => print!("{json}"),
    }
    eprintln!(
        "SOR {} / HOR {} (n={}, errors={})",
        report.sor, report.hor, report.n, report.errors
    );
    Ok(())
}

#[derive(Deserialize)]
struct PredFile {
    modes: Vec<Vec<roadwarp_core::Point2>>,
    #[serde(default)]
    probabilities: Option<Vec<f64>>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Attack {
            scenarios,
            predictor,
            search,
            out,
        } => {
            let scenarios = load_scenarios(&scenarios)?;
            let predictor = build_predictor(&predictor)?;
            let cfg = build_search_config(&search)?;
            std::fs::create_dir_all(&out).map_err(data_err)?;
            let results = attack_dataset(&scenarios, &predictor, &cfg);
            let mut ok = 0usize;
            let mut offroad = 0usize;
            for (scn, result) in scenarios.iter().zip(results) {
                match result {
                    Ok(r) => {
                        if r.best_offroad > 0.0 {
                            offroad += 1;
                        }
                        save_attack_result(&r, &out.join(format!("{}.attack.json", r.scenario_id)))
                            .map_err(data_err)?;
                        ok += 1;
                    }
                    Err(e) => eprintln!("{}: {e}", scn.id),
                }
            }
            if ok == 0 {
                return Err(CliError::Data("every scenario failed".into()));
            }
            eprintln!(
                "{ok} results written to {} ({offroad} off-road)",
                out.display()
            );
            Ok(())
        }
        Command::Evaluate {
            scenarios,
            predictor,
            search,
            attacked,
            out,
        } => {
            let scenarios = load_scenarios(&scenarios)?;
            let predictor = build_predictor(&predictor)?;
            let cfg = build_search_config(&search)?;
            let mode = if attacked {
                EvalMode::Attacked
            } else {
                EvalMode::Original
            };
            let report = evaluate_dataset(&scenarios, &predictor, &cfg, mode)?;
            write_report(&report, out.as_deref())
        }
        Command::Heatmap {
            scenarios,
            predictor,
            search,
            family,
            param1,
            param2,
            out,
        } => {
            let scenarios = load_scenarios(&scenarios)?;
            let predictor = build_predictor(&predictor)?;
            let cfg = build_search_config(&search)?;
            let family: Family = family
                .parse()
                .map_err(|e: roadwarp_core::TransformError| CliError::Usage(e.to_string()))?;
            let p1 = parse_f64_list(&param1, "param1")?;
            let p2 = parse_f64_list(&param2, "param2")?;
            let grid = heatmap(&scenarios, &predictor, family, &p1, &p2, &cfg)?;
            let mut json = serde_json::to_string_pretty(&grid).map_err(data_err)?;
            json.push('\n');
            std::fs::write(&out, json).map_err(data_err)?;
            eprintln!("heatmap written to {}", out.display());
            Ok(())
        }
        Command::FilterTrivial {
            scenarios,
            v_min,
            out,
        } => {
            let all = load_scenarios(&scenarios)?;
            let total = all.len();
            let kept = filter_trivial(all, v_min);
            std::fs::create_dir_all(&out).map_err(data_err)?;
            for scn in &kept {
                save_scenario(scn, &out.join(format!("{}.json", scn.id))).map_err(data_err)?;
            }
            eprintln!("kept {} of {total} scenarios", kept.len());
            Ok(())
        }
        Command::Transfer {
            results,
            predictor,
            out,
        } => {
            let stored: Vec<AttackResult> = load_results(&results)?
                .into_iter()
                .filter(|r| r.best_offroad > 0.0)
                .collect();
            if stored.is_empty() {
                return Err(CliError::Data(
                    "no off-road successes among the stored results".into(),
                ));
            }
            let predictor = build_predictor(&predictor)?;
            let report = transfer_eval(&stored, &predictor)?;
            write_report(&report, out.as_deref())
        }
        Command::ExportAug { results, out } => {
            let results = load_results(&results)?;
            let files = export_augmented(&results, &out)?;
            eprintln!(
                "{} scenario files written to {}",
                files.len(),
                out.display()
            );
            Ok(())
        }
        Command::Render {
            scenario,
            pred,
            style,
            out,
        } => {
            let scn = load_scenario(&scenario).map_err(data_err)?;
            let preds = match pred {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(data_err)?;
                    let file: PredFile = serde_json::from_str(&text).map_err(data_err)?;
                    Some(PredictionSet {
                        modes: file
                            .modes
                            .into_iter()
                            .map(|pts| Trajectory::new(pts, scn.dt()))
                            .collect(),
                        probabilities: file.probabilities,
                    })
                }
                None => None,
            };
            let style = match style {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(data_err)?;
                    serde_json::from_str(&text).map_err(data_err)?
                }
                None => RenderStyle::default(),
            };
            render_scene(&scn, preds.as_ref(), &style, &out).map_err(data_err)?;
            eprintln!("figure written to {}", out.display());
            Ok(())
        }
        Command::HeatmapRender { grid, out } => {
            let text = std::fs::read_to_string(&grid).map_err(data_err)?;
            let grid: HeatmapGrid = serde_json::from_str(&text).map_err(data_err)?;
            render_heatmap(&grid, &out).map_err(data_err)?;
            eprintln!("figure written to {}", out.display());
            Ok(())
        }
        Command::IndexBuild {
            corpus,
            branching,
            depth,
            seed,
            out,
        } => {
            let entries = load_corpus(&corpus).map_err(data_err)?;
            let descriptors: Result<Vec<_>, _> = entries
                .iter()
                .map(|e| scene_descriptor(&e.tile).map(|d| (e.id.clone(), d)))
                .collect();
            let descriptors = descriptors.map_err(data_err)?;
            let tree = build_vocab_tree(&descriptors, branching, depth, seed).map_err(data_err)?;
            save_index(&tree, &out).map_err(data_err)?;
            eprintln!(
                "indexed {} tiles (branching {branching}, depth {depth}) into {}",
                descriptors.len(),
                out.display()
            );
            Ok(())
        }
        Command::IndexQuery {
            index,
            scene,
            k,
            out,
        } => {
            let tree = load_index(&index).map_err(data_err)?;
            let (_, tile, _) = load_scene(&scene).map_err(data_err)?;
            let hits = query(&tree, &tile, k).map_err(data_err)?;
            let mut json = serde_json::to_string_pretty(&hits).map_err(data_err)?;
            json.push('\n');
            match out {
                Some(path) => std::fs::write(path, json).map_err(data_err)?,
                None => print!("{json}"),
            }
            Ok(())
        }
    }
}
