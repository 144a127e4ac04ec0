//! `gpsanno`: simulate clips, annotate them, train the learned stages and
//! run the benchmark. Outputs go to files under `--out`; errors go to
//! stderr. Exit status is 0 on success, 2 for bad configuration or input
//! files and 1 for failures while running.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gpsanno::benchmark::{derive_seed, prepare_suite, ranker_samples, refiner_pairs, run_benchmark, BenchmarkConfig};
use gpsanno::evaluation::{clip_metrics, ClipMetrics, Version};
use gpsanno::exec::configure_threads;
use gpsanno::io;
use gpsanno::matching::{search_hyperparams, HmmParams, SearchOutcome};
use gpsanno::pipeline::{score_boxes, PreparedClip};
use gpsanno::ranking::{keep_top, rank, train_ranker, Policy, RankerModel, ScoredAnnotation};
use gpsanno::refine::{train_refiner, RefinerModel};
use gpsanno::simulator::{generate_scenario, Clip, ScenarioSpec};
use gpsanno::Execution;

use config::{load_json, CliError, Input, PipelineConfig};

#[derive(Parser)]
#[command(name = "gpsanno", version, about = "GPS-guided bounding-box annotation")]
struct Cli {
    /// Worker threads for clip-level parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario into a clip directory.
    Simulate(SimulateArgs),
    /// Run the four stages on clips and export ranked annotations.
    Annotate(AnnotateArgs),
    /// Cross-validated benchmark on the seeded suite.
    Benchmark(SuiteArgs),
    /// Random search of HMM parameters on the suite.
    SearchParams(SearchArgs),
    /// Train the trajectory refiner on the suite.
    TrainRefiner(TrainArgs),
    /// Train the quality ranker on the suite.
    TrainRanker(TrainRankerArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario spec (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnnotateArgs {
    /// Pipeline config (JSON); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario spec to simulate and annotate; repeatable.
    #[arg(long)]
    scenario: Vec<PathBuf>,
    /// Clip directory to ingest; repeatable.
    #[arg(long)]
    clip: Vec<PathBuf>,
    /// HMM parameters (JSON); defaults are used without it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    refiner_model: Option<PathBuf>,
    #[arg(long)]
    ranker_model: Option<PathBuf>,
    /// base, v1, v2, v3 or v4; v4 when a refiner model is given, else v3.
    #[arg(long, value_parser = parse_version)]
    version: Option<Version>,
    /// Keep the best x percent of annotations.
    #[arg(long)]
    keep_top: Option<f64>,
    #[arg(long, value_parser = parse_policy)]
    policy: Option<Policy>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write per-clip candidate, matching and refinement dumps.
    #[arg(long)]
    dump_stages: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SuiteArgs {
    /// Benchmark config (JSON); defaults without it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    suite: SuiteArgs,
    /// Model to tune: v1, v2 or v3. Simpler models are searched first and
    /// warm-start the next.
    #[arg(long, value_parser = parse_version, default_value = "v3")]
    version: Version,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    suite: SuiteArgs,
    /// HMM parameters used to produce training boxes.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args)]
struct TrainRankerArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Refiner applied before ranker training.
    #[arg(long)]
    refiner_model: Option<PathBuf>,
}

fn parse_version(s: &str) -> Result<Version, String> {
    s.parse().map_err(|e: gpsanno::Error| e.to_string())
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    match s {
        "intra" => Ok(Policy::Intra),
        "inter" => Ok(Policy::Inter),
        _ => Err(format!("unknown policy {s:?}; expected intra or inter")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(cli.jobs);
    let exec = if cli.jobs == Some(1) { Execution::Sequential } else { Execution::Parallel };
    let res = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Annotate(a) => annotate(a, exec),
        Command::Benchmark(a) => benchmark(a, exec),
        Command::SearchParams(a) => search_params(a, exec),
        Command::TrainRefiner(a) => train_refiner_cmd(a, exec),
        Command::TrainRanker(a) => train_ranker_cmd(a, exec),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut spec: ScenarioSpec = load_json(&a.config)?;
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let clip = generate_scenario(&spec)?;
    io::write_clip(&a.out, &clip)?;
    Ok(())
}

fn load_model<T>(path: &Path, parse: fn(&str) -> gpsanno::Result<T>) -> Result<T, CliError> {
    parse(&io::read_text(path)?).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

fn load_params(path: Option<&Path>) -> Result<HmmParams, CliError> {
    let p = match path {
        Some(p) => load_json(p)?,
        None => HmmParams::default(),
    };
    p.validate()?;
    Ok(p)
}

#[derive(Serialize)]
struct ClipSummary {
    clip: usize,
    metrics: Option<ClipMetrics>,
}

#[derive(Serialize)]
struct AnnotateReport {
    version: &'static str,
    clips: Vec<ClipSummary>,
    mean_precision: f64,
    mean_iou: f64,
}

fn annotate(a: AnnotateArgs, exec: Execution) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => {
            let mut c: PipelineConfig = load_json(p)?;
            c.rebase(p.parent().unwrap_or(Path::new(".")));
            c
        }
        None => PipelineConfig::default(),
    };
    match (a.scenario.is_empty(), a.clip.is_empty()) {
        (false, false) => return Err(CliError::Usage("give either --scenario or --clip inputs, not both".into())),
        (false, true) => cfg.input = Some(Input::Simulate(a.scenario)),
        (true, false) => cfg.input = Some(Input::Ingest(a.clip)),
        (true, true) => {}
    }
    let input = cfg.input.ok_or_else(|| CliError::Usage("no input: give --scenario, --clip or an input in --config".into()))?;
    let seed = a.seed.or(cfg.seed);
    let params = load_params(a.params.as_deref().or(cfg.params.as_deref()))?;
    let refiner = a.refiner_model.or(cfg.refiner_model).map(|p| load_model(&p, RefinerModel::from_json)).transpose()?;
    let ranker = a.ranker_model.or(cfg.ranker_model).map(|p| load_model(&p, RankerModel::from_json)).transpose()?;
    let version = match a.version {
        Some(v) => v,
        None => match cfg.version {
            Some(s) => s.parse()?,
            None if refiner.is_some() => Version::V4,
            None => Version::V3,
        },
    };
    if version == Version::V4 && refiner.is_none() {
        return Err(CliError::Usage("version v4 needs --refiner-model".into()));
    }
    let keep = a.keep_top.or(cfg.keep_top).unwrap_or(100.0);
    if !(0.0..=100.0).contains(&keep) {
        return Err(CliError::Usage(format!("--keep-top must lie in [0, 100], got {keep}")));
    }
    let policy = a.policy.or(cfg.policy).unwrap_or_default();
    let dump = a.dump_stages || cfg.dump_stages;

    let loaded: Vec<(Clip, bool)> = match input {
        Input::Simulate(paths) => {
            let mut specs = Vec::new();
            for (i, p) in paths.iter().enumerate() {
                let mut s: ScenarioSpec = load_json(p)?;
                if let Some(seed) = seed {
                    s.seed = seed.wrapping_add(i as u64);
                }
                specs.push(s);
            }
            exec.map(&specs, |s| generate_scenario(s).map(|c| (c, true))).into_iter().collect::<gpsanno::Result<_>>()?
        }
        Input::Ingest(dirs) => dirs
            .iter()
            .map(|d| io::read_clip(d).map(|l| (l.clip, l.has_ground_truth)))
            .collect::<gpsanno::Result<_>>()?,
    };
    let has_gt = loaded.iter().all(|(_, g)| *g);
    let prepared = exec
        .map(&loaded, |(c, _)| PreparedClip::prepare(c.clone(), &cfg.proposal))
        .into_iter()
        .collect::<gpsanno::Result<Vec<_>>>()?;
    if ranker.is_none() {
        eprintln!("note: no ranker model; every box scores 0.5 and ranks follow (clip, frame)");
    }

    let stage_dir = a.out.join("stages");
    let per_clip = exec.map_indexed(prepared.len(), |i| -> gpsanno::Result<(Vec<Option<gpsanno::geometry::BoundingBox>>, Vec<ScoredAnnotation>)> {
        let c = &prepared[i];
        let boxes = c.boxes_for(version, &params, refiner.as_ref())?;
        if dump {
            let opts = version.match_options();
            let matched = match opts {
                Some(o) => c.run_matching(&params, o)?,
                None => c.baseline(),
            };
            io::write_stage_dumps(&stage_dir, i, c, &params, opts, &matched, &boxes)?;
        }
        let scores = match &ranker {
            Some(r) => score_boxes(&boxes, c.clip.fps, r)?,
            None => boxes.iter().map(|b| b.map(|_| 0.5)).collect(),
        };
        let anns = boxes
            .iter()
            .zip(&scores)
            .enumerate()
            .filter_map(|(frame, (b, s))| {
                Some(ScoredAnnotation {
                    clip: i,
                    frame,
                    bbox: (*b)?,
                    score: (*s)?,
                })
            })
            .collect();
        Ok((boxes, anns))
    });
    let mut scored = Vec::new();
    let mut summaries = Vec::new();
    for (i, r) in per_clip.into_iter().enumerate() {
        let (boxes, anns) = r?;
        scored.extend(anns);
        if has_gt {
            summaries.push(ClipSummary {
                clip: i,
                metrics: clip_metrics(&boxes, prepared[i].ground_truth()).ok(),
            });
        }
    }
    let ranked = keep_top(&rank(&scored, policy), keep);
    io::write_annotations(&a.out.join(io::ANNOTATIONS_FILE), &ranked)?;
    if has_gt {
        let ms: Vec<&ClipMetrics> = summaries.iter().filter_map(|s| s.metrics.as_ref()).collect();
        let n = ms.len().max(1) as f64;
        let report = AnnotateReport {
            version: version.name(),
            mean_precision: ms.iter().map(|m| m.precision_at_iou_05).sum::<f64>() / n,
            mean_iou: ms.iter().map(|m| m.mean_iou).sum::<f64>() / n,
            clips: summaries,
        };
        io::write_json(&a.out.join(io::REPORT_FILE), &report)?;
    }
    Ok(())
}

fn suite_config(a: &SuiteArgs) -> Result<BenchmarkConfig, CliError> {
    let mut cfg: BenchmarkConfig = match &a.config {
        Some(p) => load_json(p)?,
        None => BenchmarkConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn benchmark(a: SuiteArgs, exec: Execution) -> Result<(), CliError> {
    let cfg = suite_config(&a)?;
    let out = run_benchmark(&cfg, exec)?;
    io::write_benchmark(&a.out, &out)?;
    Ok(())
}

#[derive(Serialize)]
struct SearchRecord {
    version: &'static str,
    outcome: SearchOutcome,
}

fn search_params(a: SearchArgs, exec: Execution) -> Result<(), CliError> {
    let cfg = suite_config(&a.suite)?;
    let chain: &[Version] = match a.version {
        Version::V1 => &[Version::V1],
        Version::V2 => &[Version::V1, Version::V2],
        Version::V3 => &[Version::V1, Version::V2, Version::V3],
        v => return Err(CliError::Usage(format!("search-params tunes v1, v2 or v3, not {}", v.name()))),
    };
    let (_, clips) = prepare_suite(&cfg, exec)?;
    let refs: Vec<&PreparedClip> = clips.iter().collect();
    let mut warm = Vec::new();
    let mut records = Vec::new();
    for (k, v) in chain.iter().enumerate() {
        let opts = v.match_options().expect("HMM version");
        let outcome = search_hyperparams(&refs, &cfg.search_space, cfg.search_budget, derive_seed(cfg.seed, k as u64), opts, &warm, exec);
        warm = vec![outcome.params.clone()];
        records.push(SearchRecord { version: v.name(), outcome });
    }
    io::write_json(&a.suite.out.join("params.json"), &warm[0])?;
    io::write_json(&a.suite.out.join("search.json"), &records)?;
    Ok(())
}

#[derive(Serialize)]
struct TrainingLog {
    sequences: usize,
    seed: u64,
    loss_curve: Vec<f64>,
}

fn training_boxes(cfg: &BenchmarkConfig, a: &TrainArgs, refiner: Option<&RefinerModel>, exec: Execution) -> Result<(Vec<PreparedClip>, Vec<Vec<Option<gpsanno::geometry::BoundingBox>>>), CliError> {
    let params = load_params(a.params.as_deref())?;
    let (_, clips) = prepare_suite(cfg, exec)?;
    let version = if refiner.is_some() { Version::V4 } else { Version::V3 };
    let boxes = exec.map(&clips, |c| c.boxes_for(version, &params, refiner)).into_iter().collect::<gpsanno::Result<Vec<_>>>()?;
    Ok((clips, boxes))
}

fn train_refiner_cmd(a: TrainArgs, exec: Execution) -> Result<(), CliError> {
    let cfg = suite_config(&a.suite)?;
    let (clips, v3) = training_boxes(&cfg, &a, None, exec)?;
    let refs: Vec<&PreparedClip> = clips.iter().collect();
    let pairs = refiner_pairs(&refs, &v3, &cfg, derive_seed(cfg.seed, 10))?;
    let seed = derive_seed(cfg.seed, 11);
    let (model, curve) = train_refiner(&pairs, &cfg.refiner, &cfg.refiner_training, seed)?;
    io::write_text(&a.suite.out.join("refiner.json"), &model.to_json()?)?;
    io::write_json(
        &a.suite.out.join("refiner_training.json"),
        &TrainingLog {
            sequences: pairs.len(),
            seed,
            loss_curve: curve,
        },
    )?;
    Ok(())
}

fn train_ranker_cmd(r: TrainRankerArgs, exec: Execution) -> Result<(), CliError> {
    let refiner = r.refiner_model.as_deref().map(|p| load_model(p, RefinerModel::from_json)).transpose()?;
    let a = r.train;
    let cfg = suite_config(&a.suite)?;
    let (clips, boxes) = training_boxes(&cfg, &a, refiner.as_ref(), exec)?;
    let refs: Vec<&PreparedClip> = clips.iter().collect();
    let samples = ranker_samples(&refs, &boxes)?;
    let seed = derive_seed(cfg.seed, 12);
    let (model, curve) = train_ranker(&samples, &cfg.ranker, &cfg.ranker_training, seed)?;
    io::write_text(&a.suite.out.join("ranker.json"), &model.to_json()?)?;
    io::write_json(
        &a.suite.out.join("ranker_training.json"),
        &TrainingLog {
            sequences: samples.len(),
            seed,
            loss_curve: curve,
        },
    )?;
    Ok(())
}
