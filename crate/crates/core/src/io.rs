//! On-disk formats: clip directories, per-frame JSONL records, annotation
//! exports and the benchmark report bundle.
//!
//! A clip directory holds `meta.json`, `calibration.txt`, `clip.jsonl` (one
//! record per frame with the flow points alive there), `gps.jsonl` (one fix
//! per line) and, for simulated clips, `ground_truth.jsonl`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::benchmark::{BenchmarkOutput, BenchmarkReport};
use crate::error::{Error, Result};
use crate::geometry::{format_calibration, parse_calibration, BoundingBox, FramePoint, WorldPoint};
use crate::gps::{GpsFix, GpsTrace};
use crate::matching::{build_lattice, HmmParams, LatticeInput, MatchOptions, MatchResult, Selection};
use crate::pipeline::PreparedClip;
use crate::ranking::{PurificationRow, RankedAnnotation};
use crate::simulator::Clip;
use crate::track::FlowTrack;

pub const META_FILE: &str = "meta.json";
pub const CALIBRATION_FILE: &str = "calibration.txt";
pub const FLOW_FILE: &str = "clip.jsonl";
pub const GPS_FILE: &str = "gps.jsonl";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipMeta {
    pub fps: u32,
    pub n_frames: usize,
    pub frame_size: [u32; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowPoint {
    pub track: u32,
    pub x: f64,
    pub y: f64,
    pub moving: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowFrame {
    pub frame: usize,
    pub points: Vec<FlowPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpsRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<usize>,
    pub frame: usize,
    #[serde(rename = "box")]
    pub bbox: Option<BoundingBox>,
}

/// One exported annotation row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub clip: usize,
    pub frame: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
    pub percentile: f64,
}

impl From<&RankedAnnotation> for AnnotationRecord {
    fn from(a: &RankedAnnotation) -> Self {
        Self {
            clip: a.clip,
            frame: a.frame,
            cx: a.bbox.cx,
            cy: a.bbox.cy,
            w: a.bbox.w,
            h: a.bbox.h,
            score: a.score,
            percentile: a.percentile,
        }
    }
}

impl From<AnnotationRecord> for RankedAnnotation {
    fn from(r: AnnotationRecord) -> Self {
        Self {
            clip: r.clip,
            frame: r.frame,
            bbox: BoundingBox::new(r.cx, r.cy, r.w, r.h),
            score: r.score,
            percentile: r.percentile,
        }
    }
}

fn parse_err(path: &Path, msg: impl ToString) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        msg: msg.to_string(),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(path.display().to_string()),
        _ => Error::Io(e),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, rows: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let mut w = create(path)?;
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads one record per non-blank line; errors name the file and line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| parse_err(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(BufReader::new(open(path)?)).map_err(|e| parse_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    std::io::Read::read_to_string(&mut open(path)?, &mut s)?;
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn flow_frames(clip: &Clip) -> Vec<FlowFrame> {
    let mut frames: Vec<FlowFrame> = (0..clip.n_frames).map(|frame| FlowFrame { frame, points: Vec::new() }).collect();
    for t in &clip.flow_tracks {
        for (k, p) in t.points.iter().enumerate() {
            if let Some(fr) = frames.get_mut(t.start + k) {
                fr.points.push(FlowPoint {
                    track: t.id,
                    x: p.x,
                    y: p.y,
                    moving: t.moving.get(k).copied().unwrap_or(false),
                });
            }
        }
    }
    for fr in &mut frames {
        fr.points.sort_by_key(|p| p.track);
    }
    frames
}

/// Rebuilds tracks from per-frame points. A track must be alive on
/// consecutive frames.
fn tracks_from_frames(frames: &[FlowFrame], path: &Path) -> Result<Vec<FlowTrack>> {
    let mut tracks: BTreeMap<u32, FlowTrack> = BTreeMap::new();
    for fr in frames {
        for p in &fr.points {
            let t = tracks.entry(p.track).or_insert_with(|| FlowTrack {
                id: p.track,
                start: fr.frame,
                points: Vec::new(),
                moving: Vec::new(),
            });
            if t.end() != fr.frame {
                return Err(parse_err(path, format!("track {} is not contiguous at frame {}", p.track, fr.frame)));
            }
            t.points.push(FramePoint::new(p.x, p.y));
            t.moving.push(p.moving);
        }
    }
    Ok(tracks.into_values().collect())
}

/// Writes a clip directory, including ground truth.
pub fn write_clip(dir: &Path, clip: &Clip) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(
        &dir.join(META_FILE),
        &ClipMeta {
            fps: clip.fps,
            n_frames: clip.n_frames,
            frame_size: clip.frame_size,
        },
    )?;
    write_text(&dir.join(CALIBRATION_FILE), &format_calibration(&clip.calibration))?;
    write_jsonl(&dir.join(FLOW_FILE), &flow_frames(clip))?;
    let gps: Vec<GpsRecord> = clip.gps.fixes.iter().map(|f| GpsRecord { t: f.t, x: f.p.x, y: f.p.y }).collect();
    write_jsonl(&dir.join(GPS_FILE), &gps)?;
    let gt: Vec<GroundTruthRecord> = clip
        .ground_truth
        .iter()
        .enumerate()
        .map(|(frame, b)| GroundTruthRecord { clip: None, frame, bbox: *b })
        .collect();
    write_jsonl(&dir.join(GROUND_TRUTH_FILE), &gt)
}

/// An ingested clip and whether it came with ground truth.
#[derive(Clone, Debug)]
pub struct LoadedClip {
    pub clip: Clip,
    pub has_ground_truth: bool,
}

/// Reads a clip directory. Ground truth is optional; without it every frame
/// is unknown.
pub fn read_clip(dir: &Path) -> Result<LoadedClip> {
    let meta_path = dir.join(META_FILE);
    let meta: ClipMeta = read_json(&meta_path)?;
    if meta.fps == 0 || meta.n_frames == 0 {
        return Err(parse_err(&meta_path, "fps and n_frames must be positive"));
    }
    let cal_path = dir.join(CALIBRATION_FILE);
    let calibration = parse_calibration(&read_text(&cal_path)?).map_err(|m| parse_err(&cal_path, m))?;

    let flow_path = dir.join(FLOW_FILE);
    let frames: Vec<FlowFrame> = read_jsonl(&flow_path)?;
    if let Some(f) = frames.iter().find(|f| f.frame >= meta.n_frames) {
        return Err(parse_err(&flow_path, format!("frame {} outside 0..{}", f.frame, meta.n_frames)));
    }
    if frames.windows(2).any(|w| w[1].frame <= w[0].frame) {
        return Err(parse_err(&flow_path, "frames must be strictly increasing"));
    }
    let flow_tracks = tracks_from_frames(&frames, &flow_path)?;

    let gps_path = dir.join(GPS_FILE);
    let fixes: Vec<GpsFix> = read_jsonl::<GpsRecord>(&gps_path)?
        .into_iter()
        .map(|r| GpsFix { t: r.t, p: WorldPoint::new(r.x, r.y) })
        .collect();
    let gps = GpsTrace::new(fixes).map_err(|e| parse_err(&gps_path, e))?;

    let gt_path = dir.join(GROUND_TRUTH_FILE);
    let mut ground_truth = vec![None; meta.n_frames];
    let has_ground_truth = gt_path.exists();
    if has_ground_truth {
        for r in read_jsonl::<GroundTruthRecord>(&gt_path)? {
            let slot = ground_truth.get_mut(r.frame).ok_or_else(|| parse_err(&gt_path, format!("frame {} outside 0..{}", r.frame, meta.n_frames)))?;
            *slot = r.bbox;
        }
    }
    Ok(LoadedClip {
        clip: Clip {
            fps: meta.fps,
            n_frames: meta.n_frames,
            frame_size: meta.frame_size,
            calibration,
            flow_tracks,
            gps,
            ground_truth,
        },
        has_ground_truth,
    })
}

pub fn write_annotations(path: &Path, ranked: &[RankedAnnotation]) -> Result<()> {
    let rows: Vec<AnnotationRecord> = ranked.iter().map(AnnotationRecord::from).collect();
    write_jsonl(path, &rows)
}

pub fn read_annotations(path: &Path) -> Result<Vec<RankedAnnotation>> {
    Ok(read_jsonl::<AnnotationRecord>(path)?.into_iter().map(RankedAnnotation::from).collect())
}

/// Ground truth of several clips as `(clip, frame, box)` rows.
pub fn write_ground_truth(path: &Path, gt: &[Vec<Option<BoundingBox>>]) -> Result<()> {
    let rows: Vec<GroundTruthRecord> = gt
        .iter()
        .enumerate()
        .flat_map(|(c, frames)| frames.iter().enumerate().map(move |(frame, b)| GroundTruthRecord { clip: Some(c), frame, bbox: *b }))
        .collect();
    write_jsonl(path, &rows)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<Vec<Option<BoundingBox>>>> {
    let mut out: Vec<Vec<Option<BoundingBox>>> = Vec::new();
    for r in read_jsonl::<GroundTruthRecord>(path)? {
        let c = r.clip.ok_or_else(|| parse_err(path, "missing clip field"))?;
        if out.len() <= c {
            out.resize(c + 1, Vec::new());
        }
        if out[c].len() <= r.frame {
            out[c].resize(r.frame + 1, None);
        }
        out[c][r.frame] = r.bbox;
    }
    Ok(out)
}

#[derive(Serialize)]
struct CandidateRecord<'a> {
    cof: usize,
    source: crate::proposal::Source,
    extended: bool,
    members: &'a [u32],
    #[serde(rename = "box")]
    bbox: BoundingBox,
}

#[derive(Serialize)]
struct CandidateFrame<'a> {
    frame: usize,
    lattice_states: usize,
    candidates: Vec<CandidateRecord<'a>>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum CofRef {
    Id(usize),
    Out(&'static str),
}

#[derive(Serialize)]
struct MatchRecord {
    frame: usize,
    cof: CofRef,
    #[serde(rename = "box")]
    bbox: Option<BoundingBox>,
    contribution: f64,
}

#[derive(Serialize)]
struct BoxesRecord {
    frame: usize,
    raw: Option<BoundingBox>,
    refined: Option<BoundingBox>,
}

/// Debug dumps for one clip: candidates with lattice sizes, the matching
/// decision per frame, and raw against refined boxes.
pub fn write_stage_dumps(dir: &Path, clip: usize, prepared: &PreparedClip, params: &HmmParams, opts: Option<MatchOptions>, matched: &MatchResult, refined: &[Option<BoundingBox>]) -> Result<()> {
    let p = &prepared.proposal;
    let lattice = build_lattice(
        &LatticeInput {
            proposal: p,
            gps: &prepared.gps,
            homography: &prepared.homography,
            frame_size: prepared.clip.frame_size,
        },
        params,
        opts.unwrap_or(MatchOptions::FULL),
    )?;
    let cands: Vec<CandidateFrame> = (0..p.frames.len())
        .map(|f| CandidateFrame {
            frame: f,
            lattice_states: lattice.states[f].len(),
            candidates: p.frames[f]
                .iter()
                .map(|&(ci, ei)| {
                    let c = &p.cofs[ci].entries[ei].candidate;
                    CandidateRecord {
                        cof: p.cofs[ci].id,
                        source: c.source,
                        extended: c.extended,
                        members: &c.members,
                        bbox: c.bbox,
                    }
                })
                .collect(),
        })
        .collect();
    write_jsonl(&dir.join(format!("clip{clip:03}_candidates.jsonl")), &cands)?;
    let rows: Vec<MatchRecord> = matched
        .frames
        .iter()
        .zip(&matched.contributions)
        .enumerate()
        .map(|(frame, (s, &contribution))| MatchRecord {
            frame,
            cof: match s {
                Selection::Candidate { cof, .. } => CofRef::Id(*cof),
                Selection::OutOfFrame => CofRef::Out("out"),
            },
            bbox: s.bbox(),
            contribution,
        })
        .collect();
    write_jsonl(&dir.join(format!("clip{clip:03}_match.jsonl")), &rows)?;
    let boxes: Vec<BoxesRecord> = matched
        .frames
        .iter()
        .zip(refined)
        .enumerate()
        .map(|(frame, (s, r))| BoxesRecord { frame, raw: s.bbox(), refined: *r })
        .collect();
    write_jsonl(&dir.join(format!("clip{clip:03}_boxes.jsonl")), &boxes)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| parse_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| parse_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 5] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];
const SVG_W: f64 = 480.0;
const SVG_H: f64 = 320.0;
const MARGIN: f64 = 48.0;

fn svg_frame(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" font-family="sans-serif" font-size="11">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="18" text-anchor="middle" font-size="13">{title}</text>
<line x1="{MARGIN}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{b}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{x_label}</text>
<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{y_label}</text>
"#,
        SVG_W / 2.0,
        (SVG_W + MARGIN) / 2.0,
        SVG_H - 8.0,
        SVG_H / 2.0,
        SVG_H / 2.0,
        b = SVG_H - MARGIN,
        r = SVG_W - MARGIN,
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let y = SVG_H - MARGIN - v * (SVG_H - 2.0 * MARGIN);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#, MARGIN - 4.0, y + 4.0);
    }
    s
}

/// Line chart of precision against kept fraction, one line per ranking.
pub fn purification_svg(curves: &[(&str, &[PurificationRow])]) -> String {
    let mut s = svg_frame("Purification", "kept fraction", "precision at IoU 0.5");
    let px = |f: f64| MARGIN + f * (SVG_W - 2.0 * MARGIN);
    let py = |p: f64| SVG_H - MARGIN - p * (SVG_H - 2.0 * MARGIN);
    for (k, (name, rows)) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = rows.iter().map(|r| format!("{:.2},{:.2}", px(r.fraction), py(r.precision_at_iou_05))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{color}">{name}</text>"#, SVG_W - MARGIN - 60.0, MARGIN + 14.0 * k as f64);
    }
    for k in 0..=10 {
        let f = k as f64 / 10.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{f:.1}</text>"#, px(f), SVG_H - MARGIN + 14.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Bar chart of mean precision per pipeline version.
pub fn ablation_svg(report: &BenchmarkReport) -> String {
    let mut s = svg_frame("Ablation", "version", "mean precision at IoU 0.5");
    let n = report.ablation.len().max(1) as f64;
    let slot = (SVG_W - 2.0 * MARGIN) / n;
    for (k, row) in report.ablation.iter().enumerate() {
        let h = row.mean_precision.clamp(0.0, 1.0) * (SVG_H - 2.0 * MARGIN);
        let x = MARGIN + k as f64 * slot + 0.15 * slot;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}"/>"#,
            SVG_H - MARGIN - h,
            0.7 * slot,
            PALETTE[k % PALETTE.len()]
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, x + 0.35 * slot, SVG_H - MARGIN + 14.0, row.version.name());
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.3}</text>"#, x + 0.35 * slot, SVG_H - MARGIN - h - 4.0, row.mean_precision);
    }
    s.push_str("</svg>\n");
    s
}

/// Paths written by [`write_benchmark`].
pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";

/// Writes the report bundle. Everything except `timing.json` is a function
/// of the configuration alone.
pub fn write_benchmark(dir: &Path, out: &BenchmarkOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let r = &out.report;
    let mut written = Vec::new();
    let mut track = |p: PathBuf| -> PathBuf {
        written.push(p.clone());
        p
    };
    write_json(&track(dir.join(REPORT_FILE)), r)?;
    write_json(&track(dir.join(TIMING_FILE)), &out.timing)?;
    write_csv(
        &track(dir.join("ablation.csv")),
        &["version", "clips", "mean_precision", "mean_median_nd", "mean_iou"],
        r.ablation
            .iter()
            .map(|a| vec![a.version.name().into(), a.clips.to_string(), a.mean_precision.to_string(), a.mean_median_nd.to_string(), a.mean_iou.to_string()]),
    )?;
    let curves = [("inter", &r.purification.inter), ("intra", &r.purification.intra), ("oracle", &r.purification.oracle)];
    write_csv(
        &track(dir.join("purification.csv")),
        &["policy", "fraction", "kept", "precision", "median_nd"],
        curves.iter().flat_map(|(name, rows)| {
            rows.iter()
                .map(move |p| vec![name.to_string(), p.fraction.to_string(), p.kept.to_string(), p.precision_at_iou_05.to_string(), opt(p.median_nd)])
        }),
    )?;
    let versions: Vec<String> = crate::evaluation::Version::ALL.iter().map(|v| v.name().to_string()).collect();
    let mut header = vec!["factor", "level", "clips"];
    header.extend(versions.iter().map(String::as_str));
    write_csv(
        &track(dir.join("breakdown.csv")),
        &header,
        r.breakdown.iter().map(|b| {
            let mut row = vec![b.factor.clone(), b.level.clone(), b.clips.to_string()];
            row.extend(crate::evaluation::Version::ALL.iter().map(|v| opt(b.mean_precision.get(v).copied())));
            row
        }),
    )?;
    let svg_curves: Vec<(&str, &[PurificationRow])> = curves.iter().map(|(n, rows)| (*n, rows.as_slice())).collect();
    write_text(&track(dir.join("purification.svg")), &purification_svg(&svg_curves))?;
    write_text(&track(dir.join("ablation.svg")), &ablation_svg(r))?;
    write_annotations(&track(dir.join(ANNOTATIONS_FILE)), &out.annotations)?;
    write_ground_truth(&track(dir.join(GROUND_TRUTH_FILE)), &out.ground_truth)?;
    for (k, (refiner, ranker)) in out.models.iter().enumerate() {
        write_text(&track(dir.join(format!("models/refiner_fold{k}.json"))), &refiner.to_json()?)?;
        write_text(&track(dir.join(format!("models/ranker_fold{k}.json"))), &ranker.to_json()?)?;
    }
    Ok(written)
}
