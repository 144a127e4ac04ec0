//! The cross-validated benchmark: ablation over pipeline versions,
//! purification curves and per-factor breakdowns on the seeded suite.
//!
//! Every clip is evaluated once, in the fold where it is held out. Its HMM
//! parameters, refiner and ranker come only from the other two folds, and
//! the report lists which clips each fitted artifact saw.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{clip_metrics, three_fold_split, ClipMetrics, Version};
use crate::exec::Execution;
use crate::geometry::{iou, BoundingBox};
use crate::matching::{search_hyperparams, HmmParams, SearchOutcome, SearchSpace};
use crate::pipeline::{box_runs, refine_boxes, score_boxes, PreparedClip};
use crate::proposal::ProposalConfig;
use crate::ranking::{purification_curve, rank, spearman, train_ranker, LabeledSequence, Policy, PurificationRow, RankedAnnotation, RankerConfig, RankerModel, RankerTrainConfig, ScoredAnnotation};
use crate::refine::{corrupt, refiner_loss, train_refiner, BoxSequence, CorruptionSpec, RefinerConfig, RefinerModel, RefinerTrainConfig};
use crate::simulator::{generate_scenario, ScenarioSpec};
use crate::suite::{generate_suite, SuiteConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub suite: SuiteConfig,
    pub proposal: ProposalConfig,
    pub search_space: SearchSpace,
    pub search_budget: usize,
    pub refiner: RefinerConfig,
    pub refiner_training: RefinerTrainConfig,
    pub corruption: CorruptionSpec,
    /// Synthetic corrupted copies per clean ground-truth run.
    pub corruptions_per_run: usize,
    pub ranker: RankerConfig,
    pub ranker_training: RankerTrainConfig,
    pub keep_fractions: Vec<f64>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            suite: SuiteConfig::default(),
            proposal: ProposalConfig::default(),
            search_space: SearchSpace::default(),
            search_budget: 100,
            refiner: RefinerConfig::default(),
            refiner_training: RefinerTrainConfig::default(),
            corruption: CorruptionSpec::default(),
            corruptions_per_run: 1,
            ranker: RankerConfig::default(),
            ranker_training: RankerTrainConfig::default(),
            keep_fractions: (1..=10).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

/// Decorrelated child seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// HMM parameters for the three HMM versions; V4 uses the V3 set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VersionParams {
    pub v1: HmmParams,
    pub v2: HmmParams,
    pub v3: HmmParams,
}

impl VersionParams {
    pub fn uniform(p: HmmParams) -> Self {
        Self {
            v1: p.clone(),
            v2: p.clone(),
            v3: p,
        }
    }

    pub fn get(&self, v: Version) -> &HmmParams {
        match v {
            Version::Base | Version::V1 => &self.v1,
            Version::V2 => &self.v2,
            Version::V3 | Version::V4 => &self.v3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub version: Version,
    pub clips: usize,
    pub mean_precision: f64,
    /// Mean over clips of the per-clip median ND.
    pub mean_median_nd: f64,
    pub mean_iou: f64,
}

fn ablation_rows(per_clip: &[BTreeMap<Version, ClipMetrics>], versions: &[Version]) -> Vec<AblationRow> {
    versions
        .iter()
        .map(|&v| {
            let ms: Vec<&ClipMetrics> = per_clip.iter().filter_map(|m| m.get(&v)).collect();
            let n = ms.len().max(1) as f64;
            let nds: Vec<f64> = ms.iter().filter_map(|m| m.median_nd).collect();
            AblationRow {
                version: v,
                clips: ms.len(),
                mean_precision: ms.iter().map(|m| m.precision_at_iou_05).sum::<f64>() / n,
                mean_median_nd: nds.iter().sum::<f64>() / nds.len().max(1) as f64,
                mean_iou: ms.iter().map(|m| m.mean_iou).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Evaluates fixed parameters and models on a set of clips. V4 rows are
/// produced only when a refiner is given.
pub fn run_ablation(clips: &[&PreparedClip], params: &VersionParams, refiner: Option<&RefinerModel>, exec: Execution) -> Result<Vec<AblationRow>> {
    let versions: Vec<Version> = Version::ALL.into_iter().filter(|v| *v != Version::V4 || refiner.is_some()).collect();
    let per_clip = exec.map(clips, |c| -> Result<BTreeMap<Version, ClipMetrics>> {
        versions
            .iter()
            .map(|&v| Ok((v, clip_metrics(&c.boxes_for(v, params.get(v), refiner)?, c.ground_truth())?)))
            .collect()
    });
    let per_clip = per_clip.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ablation_rows(&per_clip, &versions))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchProvenance {
    pub version: Version,
    pub trained_on: Vec<usize>,
    pub outcome: SearchOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelProvenance {
    pub trained_on: Vec<usize>,
    pub sequences: usize,
    pub seed: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldProvenance {
    pub fold: usize,
    pub train_clips: Vec<usize>,
    pub test_clips: Vec<usize>,
    pub search: Vec<SearchProvenance>,
    pub refiner: ModelProvenance,
    pub ranker: ModelProvenance,
}

/// Simulator knobs a clip was generated with, for the breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFactors {
    pub gps_sigma_m: f64,
    pub gps_bias_m: f64,
    pub distractors: usize,
    pub shadow_distractor: bool,
}

impl ScenarioFactors {
    pub fn of(spec: &ScenarioSpec) -> Self {
        let b = spec.gps_noise.constant_bias_m;
        Self {
            gps_sigma_m: spec.gps_noise.gaussian_sigma_m,
            gps_bias_m: b[0].hypot(b[1]),
            distractors: spec.objects.iter().filter(|o| !o.target).count(),
            shadow_distractor: spec.objects.iter().any(|o| !o.target && o.shadow.is_some()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipReport {
    pub clip: usize,
    pub fold: usize,
    pub factors: ScenarioFactors,
    pub metrics: BTreeMap<Version, ClipMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub factor: String,
    pub level: String,
    pub clips: usize,
    pub mean_precision: BTreeMap<Version, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Purification {
    pub inter: Vec<PurificationRow>,
    pub intra: Vec<PurificationRow>,
    /// Inter-video ranking by the true IoU, an upper bound for any scorer.
    pub oracle: Vec<PurificationRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub ablation: Vec<AblationRow>,
    pub purification: Purification,
    /// Spearman correlation of ranker score and true IoU over held-out boxes.
    pub ranker_spearman: Option<f64>,
    pub breakdown: Vec<BreakdownRow>,
    pub folds: Vec<FoldProvenance>,
    pub clips: Vec<ClipReport>,
}

/// Everything a benchmark run produces. Only `report` and the annotation
/// files derived from it are deterministic; `timing` holds wall-clock
/// seconds per phase.
#[derive(Clone, Debug)]
pub struct BenchmarkOutput {
    pub report: BenchmarkReport,
    /// Held-out V4 boxes with inter-video ranks.
    pub annotations: Vec<RankedAnnotation>,
    pub ground_truth: Vec<Vec<Option<BoundingBox>>>,
    pub models: Vec<(RefinerModel, RankerModel)>,
    pub timing: BTreeMap<String, f64>,
}

struct FoldResult {
    provenance: FoldProvenance,
    clips: Vec<(usize, BTreeMap<Version, ClipMetrics>)>,
    annotations: Vec<ScoredAnnotation>,
    models: (RefinerModel, RankerModel),
}

/// Minimum run length used for training sequences.
const MIN_RUN: usize = 5;

/// `(corrupted, clean)` pairs from training clips: the actual V3 output
/// against ground truth where both are present, plus synthetic corruptions
/// of clean ground-truth runs.
pub fn refiner_pairs(clips: &[&PreparedClip], v3: &[Vec<Option<BoundingBox>>], cfg: &BenchmarkConfig, seed: u64) -> Result<Vec<(BoxSequence, BoxSequence)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for (c, pred) in clips.iter().zip(v3) {
        let fps = c.clip.fps;
        // Runs where the prediction overlaps the target; a run on another
        // object has nothing for the refiner to fix.
        let both: Vec<Option<(BoundingBox, BoundingBox)>> = pred
            .iter()
            .zip(c.ground_truth())
            .map(|(p, g)| p.zip(*g).filter(|(p, g)| iou(p, g) > 0.0))
            .collect();
        let mut f = 0;
        while f < both.len() {
            let len = both[f..].iter().take_while(|x| x.is_some()).count();
            if len >= MIN_RUN {
                let (p, g): (Vec<BoundingBox>, Vec<BoundingBox>) = both[f..f + len].iter().map(|x| x.expect("inside run")).unzip();
                pairs.push((BoxSequence::from_boxes(fps, &p)?, BoxSequence::from_boxes(fps, &g)?));
            }
            f += len.max(1);
        }
        for (_, run) in box_runs(c.ground_truth()) {
            if run.len() < MIN_RUN {
                continue;
            }
            let clean = BoxSequence::from_boxes(fps, &run)?;
            for _ in 0..cfg.corruptions_per_run {
                pairs.push((corrupt(&clean, &cfg.corruption, &mut rng), clean.clone()));
            }
        }
    }
    Ok(pairs)
}

/// Per-frame quality label: IoU against ground truth, 0 where the target is absent.
fn quality_labels(boxes: &[BoundingBox], gt: &[Option<BoundingBox>]) -> Vec<f64> {
    boxes.iter().zip(gt).map(|(b, g)| g.map_or(0.0, |g| iou(b, &g))).collect()
}

/// Ranker training sequences: runs of predicted boxes labelled with their IoU
/// against ground truth.
pub fn ranker_samples(clips: &[&PreparedClip], v4: &[Vec<Option<BoundingBox>>]) -> Result<Vec<LabeledSequence>> {
    let mut out = Vec::new();
    for (c, pred) in clips.iter().zip(v4) {
        for (start, run) in box_runs(pred) {
            if run.len() < MIN_RUN {
                continue;
            }
            let labels = quality_labels(&run, &c.ground_truth()[start..start + run.len()]);
            out.push(LabeledSequence {
                boxes: BoxSequence::from_boxes(c.clip.fps, &run)?,
                labels,
            });
        }
    }
    Ok(out)
}

fn run_fold(all: &[PreparedClip], fold: usize, train: Vec<usize>, test: Vec<usize>, cfg: &BenchmarkConfig, exec: Execution) -> Result<FoldResult> {
    let train_refs: Vec<&PreparedClip> = train.iter().map(|&i| &all[i]).collect();
    let seed = derive_seed(cfg.seed, 100 + fold as u64);

    let mut search = Vec::new();
    let mut warm: Vec<HmmParams> = Vec::new();
    for (k, v) in [Version::V1, Version::V2, Version::V3].into_iter().enumerate() {
        let opts = v.match_options().expect("HMM version");
        let outcome = search_hyperparams(&train_refs, &cfg.search_space, cfg.search_budget, derive_seed(seed, k as u64), opts, &warm, exec);
        warm = vec![outcome.params.clone()];
        search.push(SearchProvenance {
            version: v,
            trained_on: train.clone(),
            outcome,
        });
    }
    let params = VersionParams {
        v1: search[0].outcome.params.clone(),
        v2: search[1].outcome.params.clone(),
        v3: search[2].outcome.params.clone(),
    };

    let v3_train = exec.map(&train_refs, |c| c.boxes_for(Version::V3, &params.v3, None)).into_iter().collect::<Result<Vec<_>>>()?;
    let pairs = refiner_pairs(&train_refs, &v3_train, cfg, derive_seed(seed, 10))?;
    let refiner_seed = derive_seed(seed, 11);
    let (refiner, _) = train_refiner(&pairs, &cfg.refiner, &cfg.refiner_training, refiner_seed)?;
    let init = RefinerModel::new(cfg.refiner.clone(), pairs[0].0.fps, refiner_seed)?;
    let refiner_prov = ModelProvenance {
        trained_on: train.clone(),
        sequences: pairs.len(),
        seed: refiner_seed,
        initial_loss: refiner_loss(&init, &pairs)?,
        final_loss: refiner_loss(&refiner, &pairs)?,
    };

    let v4_train = exec
        .map(&train_refs.iter().zip(&v3_train).collect::<Vec<_>>(), |(c, b)| refine_boxes(b, c.clip.fps, &refiner))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let samples = ranker_samples(&train_refs, &v4_train)?;
    let ranker_seed = derive_seed(seed, 12);
    let (ranker, _) = train_ranker(&samples, &cfg.ranker, &cfg.ranker_training, ranker_seed)?;
    let ranker_init = RankerModel::new(cfg.ranker.clone(), samples[0].boxes.fps, ranker_seed)?;
    let ranker_prov = ModelProvenance {
        trained_on: train.clone(),
        sequences: samples.len(),
        seed: ranker_seed,
        initial_loss: crate::ranking::ranker_loss(&ranker_init, &samples)?,
        final_loss: crate::ranking::ranker_loss(&ranker, &samples)?,
    };

    let evaluated = exec.map(&test, |&i| -> Result<(usize, BTreeMap<Version, ClipMetrics>, Vec<ScoredAnnotation>)> {
        let c = &all[i];
        let mut metrics = BTreeMap::new();
        let mut v4 = Vec::new();
        for v in Version::ALL {
            let boxes = c.boxes_for(v, params.get(v), Some(&refiner))?;
            metrics.insert(v, clip_metrics(&boxes, c.ground_truth())?);
            if v == Version::V4 {
                v4 = boxes;
            }
        }
        let scores = score_boxes(&v4, c.clip.fps, &ranker)?;
        let anns = v4
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
        Ok((i, metrics, anns))
    });
    let mut clips = Vec::new();
    let mut annotations = Vec::new();
    for r in evaluated {
        let (i, m, a) = r?;
        clips.push((i, m));
        annotations.extend(a);
    }
    Ok(FoldResult {
        provenance: FoldProvenance {
            fold,
            train_clips: train,
            test_clips: test,
            search,
            refiner: refiner_prov,
            ranker: ranker_prov,
        },
        clips,
        annotations,
        models: (refiner, ranker),
    })
}

fn breakdown(clips: &[ClipReport]) -> Vec<BreakdownRow> {
    type Level = (&'static str, String, fn(&ScenarioFactors, &str) -> bool);
    let levels: Vec<Level> = vec![
        ("gps_bias", "< 1 m".into(), |f, _| f.gps_bias_m < 1.0),
        ("gps_bias", ">= 1 m".into(), |f, _| f.gps_bias_m >= 1.0),
        ("gps_sigma", "< 4.5 m".into(), |f, _| f.gps_sigma_m < 4.5),
        ("gps_sigma", ">= 4.5 m".into(), |f, _| f.gps_sigma_m >= 4.5),
        ("distractors", "2".into(), |f, l| f.distractors.to_string() == l),
        ("distractors", "3".into(), |f, l| f.distractors.to_string() == l),
        ("distractors", "4".into(), |f, l| f.distractors.to_string() == l),
        ("shadow_distractor", "no".into(), |f, _| !f.shadow_distractor),
        ("shadow_distractor", "yes".into(), |f, _| f.shadow_distractor),
    ];
    levels
        .into_iter()
        .filter_map(|(factor, level, pred)| {
            let sel: Vec<&ClipReport> = clips.iter().filter(|c| pred(&c.factors, &level)).collect();
            if sel.is_empty() {
                return None;
            }
            let mean_precision = Version::ALL
                .into_iter()
                .map(|v| (v, sel.iter().map(|c| c.metrics[&v].precision_at_iou_05).sum::<f64>() / sel.len() as f64))
                .collect();
            Some(BreakdownRow {
                factor: factor.into(),
                level,
                clips: sel.len(),
                mean_precision,
            })
        })
        .collect()
}

/// Generates and prepares every clip of the configured suite.
pub fn prepare_suite(cfg: &BenchmarkConfig, exec: Execution) -> Result<(Vec<ScenarioSpec>, Vec<PreparedClip>)> {
    let specs = generate_suite(&cfg.suite, cfg.seed);
    let prepared = exec.map(&specs, |s| PreparedClip::prepare(generate_scenario(s)?, &cfg.proposal));
    let clips = prepared.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((specs, clips))
}

/// Generates the suite, prepares every clip and runs the three folds.
pub fn run_benchmark(cfg: &BenchmarkConfig, exec: Execution) -> Result<BenchmarkOutput> {
    if cfg.suite.n_clips < 3 {
        return Err(Error::TooFewClips {
            needed: 3,
            got: cfg.suite.n_clips,
        });
    }
    let mut timing = BTreeMap::new();
    let t0 = Instant::now();
    let (specs, clips) = prepare_suite(cfg, exec)?;
    timing.insert("prepare_s".to_string(), t0.elapsed().as_secs_f64());

    let t1 = Instant::now();
    let folds = three_fold_split(clips.len(), derive_seed(cfg.seed, 1))?;
    let jobs: Vec<(usize, Vec<usize>, Vec<usize>)> = (0..3)
        .map(|f| {
            let train = (0..3).filter(|&g| g != f).flat_map(|g| folds[g].iter().copied()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
            (f, train, folds[f].clone())
        })
        .collect();
    let results = exec.map(&jobs, |(f, train, test)| run_fold(&clips, *f, train.clone(), test.clone(), cfg, exec));
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    timing.insert("folds_s".to_string(), t1.elapsed().as_secs_f64());

    let mut clip_reports = Vec::new();
    let mut scored = Vec::new();
    let mut provenance = Vec::new();
    let mut models = Vec::new();
    for r in results {
        for (i, metrics) in r.clips {
            clip_reports.push(ClipReport {
                clip: i,
                fold: r.provenance.fold,
                factors: ScenarioFactors::of(&specs[i]),
                metrics,
            });
        }
        scored.extend(r.annotations);
        provenance.push(r.provenance);
        models.push(r.models);
    }
    clip_reports.sort_by_key(|c| c.clip);
    scored.sort_by_key(|a| (a.clip, a.frame));

    let per_clip: Vec<BTreeMap<Version, ClipMetrics>> = clip_reports.iter().map(|c| c.metrics.clone()).collect();
    let ablation = ablation_rows(&per_clip, &Version::ALL);
    let ground_truth: Vec<Vec<Option<BoundingBox>>> = clips.iter().map(|c| c.clip.ground_truth.clone()).collect();
    let gt = |clip: usize, frame: usize| ground_truth[clip][frame];
    let inter = rank(&scored, Policy::Inter);
    let intra = rank(&scored, Policy::Intra);
    let truth: Vec<f64> = scored.iter().map(|a| gt(a.clip, a.frame).map_or(0.0, |g| iou(&a.bbox, &g))).collect();
    let oracle_scored: Vec<ScoredAnnotation> = scored.iter().zip(&truth).map(|(a, &t)| ScoredAnnotation { score: t, ..*a }).collect();
    let purification = Purification {
        inter: purification_curve(&inter, gt, &cfg.keep_fractions),
        intra: purification_curve(&intra, gt, &cfg.keep_fractions),
        oracle: purification_curve(&rank(&oracle_scored, Policy::Inter), gt, &cfg.keep_fractions),
    };
    let ranker_spearman = spearman(&scored.iter().map(|a| a.score).collect::<Vec<_>>(), &truth);
    let report = BenchmarkReport {
        config: cfg.clone(),
        ablation,
        purification,
        ranker_spearman,
        breakdown: breakdown(&clip_reports),
        folds: provenance,
        clips: clip_reports,
    };
    timing.insert("total_s".to_string(), t0.elapsed().as_secs_f64());
    Ok(BenchmarkOutput {
        report,
        annotations: inter,
        ground_truth,
        models,
        timing,
    })
}
