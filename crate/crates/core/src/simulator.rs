//! Seeded synthetic scenarios: ground-plane objects walking waypoint paths,
//! the sparse flow tracks they leave in the frame, a noisy 1 Hz GPS trace of
//! the target and its ground-truth boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Correspondence, FramePoint, Homography, WorldPoint};
use crate::gps::{GpsFix, GpsTrace};
use crate::track::{FlowTrack, MOTION_THRESHOLD_PX};

pub const DEFAULT_FPS: u32 = 10;
pub const DEFAULT_DURATION_S: f64 = 40.0;
pub const DEFAULT_FRAME_WIDTH: u32 = 640;
pub const DEFAULT_FRAME_HEIGHT: u32 = 360;

/// Stream ids used to derive independent RNGs from one scenario seed.
const STREAM_GPS: u64 = 1;
const STREAM_FLOW: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpsNoiseSpec {
    pub gaussian_sigma_m: f64,
    pub constant_bias_m: [f64; 2],
    pub lag_s: f64,
    pub stick_prob: f64,
    pub rate_hz: f64,
}

impl Default for GpsNoiseSpec {
    fn default() -> Self {
        Self {
            gaussian_sigma_m: 2.0,
            constant_bias_m: [0.0, 0.0],
            lag_s: 0.0,
            stick_prob: 0.0,
            rate_hz: 1.0,
        }
    }
}

impl GpsNoiseSpec {
    pub fn noiseless() -> Self {
        Self {
            gaussian_sigma_m: 0.0,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let fields = [self.gaussian_sigma_m, self.constant_bias_m[0].abs(), self.constant_bias_m[1].abs(), self.lag_s, self.stick_prob];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidSpec("gps_noise values must be finite and non-negative".into()));
        }
        if self.stick_prob > 1.0 {
            return Err(Error::InvalidSpec("gps_noise.stick_prob must lie in [0, 1]".into()));
        }
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::InvalidSpec("gps_noise.rate_hz must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowNoiseSpec {
    /// Per-point, per-frame Gaussian jitter (pixels).
    pub jitter_px: f64,
    /// Per-frame probability that a track is lost and re-spawned elsewhere on the object.
    pub dropout_rate: f64,
    /// Inclusive range of simultaneously tracked key points per object.
    pub flows_per_object: [usize; 2],
}

impl Default for FlowNoiseSpec {
    fn default() -> Self {
        Self {
            jitter_px: 0.3,
            dropout_rate: 0.01,
            flows_per_object: [20, 30],
        }
    }
}

impl FlowNoiseSpec {
    pub fn noiseless() -> Self {
        Self {
            jitter_px: 0.0,
            dropout_rate: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    /// Time spent stationary on arrival.
    #[serde(default)]
    pub dwell_s: f64,
}

impl Waypoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, dwell_s: 0.0 }
    }

    pub fn dwell(x: f64, y: f64, dwell_s: f64) -> Self {
        Self { x, y, dwell_s }
    }
}

/// Piecewise-linear ground path walked at constant speed. Before `start_s`
/// the object waits at the first waypoint; after the last waypoint it stays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub waypoints: Vec<Waypoint>,
    pub speed_mps: f64,
    #[serde(default)]
    pub start_s: f64,
}

impl PathSpec {
    pub fn position(&self, t: f64) -> WorldPoint {
        let wps = &self.waypoints;
        let mut clock = self.start_s + wps[0].dwell_s;
        let mut here = WorldPoint::new(wps[0].x, wps[0].y);
        if t <= clock {
            return here;
        }
        for wp in &wps[1..] {
            let next = WorldPoint::new(wp.x, wp.y);
            let leg = here.distance(&next) / self.speed_mps;
            if t <= clock + leg {
                let a = (t - clock) / leg;
                return WorldPoint::new(here.x + a * (next.x - here.x), here.y + a * (next.y - here.y));
            }
            clock += leg + wp.dwell_s;
            here = next;
            if t <= clock {
                return here;
            }
        }
        here
    }
}

/// A flow group rigidly attached to an object, offset and scaled relative to
/// its box. Models shadows moving with the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShadowSpec {
    pub offset_rel: [f64; 2],
    pub scale_rel: [f64; 2],
}

impl Default for ShadowSpec {
    fn default() -> Self {
        Self {
            offset_rel: [0.9, 0.4],
            scale_rel: [1.2, 0.25],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub width_m: f64,
    pub height_m: f64,
    pub path: PathSpec,
    #[serde(default)]
    pub target: bool,
    #[serde(default)]
    pub shadow: Option<ShadowSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_fps")]
    pub fps: u32,
    #[serde(default = "default_frame_size")]
    pub frame_size: [u32; 2],
    #[serde(default = "default_calibration")]
    pub calibration: [Correspondence; 4],
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub gps_noise: GpsNoiseSpec,
    #[serde(default)]
    pub flow_noise: FlowNoiseSpec,
}

fn default_duration() -> f64 {
    DEFAULT_DURATION_S
}

fn default_fps() -> u32 {
    DEFAULT_FPS
}

fn default_frame_size() -> [u32; 2] {
    [DEFAULT_FRAME_WIDTH, DEFAULT_FRAME_HEIGHT]
}

/// Ground patch seen by the default camera: 20 m wide at 5 m range, 60 m wide at 60 m.
pub fn default_calibration() -> [Correspondence; 4] {
    let (w, h) = (DEFAULT_FRAME_WIDTH as f64, DEFAULT_FRAME_HEIGHT as f64);
    let c = |fx, fy, wx, wy| Correspondence {
        frame: FramePoint::new(fx, fy),
        world: WorldPoint::new(wx, wy),
    };
    [c(0.0, h, -10.0, 5.0), c(w, h, 10.0, 5.0), c(w, 0.0, 30.0, 60.0), c(0.0, 0.0, -30.0, 60.0)]
}

impl ScenarioSpec {
    pub fn n_frames(&self) -> usize {
        (self.duration_s * self.fps as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.fps < 1 {
            return Err(Error::InvalidSpec("fps must be at least 1".into()));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) || self.n_frames() == 0 {
            return Err(Error::InvalidSpec("duration_s must be positive".into()));
        }
        if self.frame_size[0] == 0 || self.frame_size[1] == 0 {
            return Err(Error::InvalidSpec("frame_size must be positive".into()));
        }
        if self.objects.is_empty() {
            return Err(Error::InvalidSpec("at least one object is required".into()));
        }
        let targets = self.objects.iter().filter(|o| o.target).count();
        if targets != 1 {
            return Err(Error::InvalidSpec(format!("exactly one object must be the target, found {targets}")));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !(o.width_m > 0.0 && o.height_m > 0.0) {
                return Err(Error::InvalidSpec(format!("objects[{i}]: size must be positive")));
            }
            if o.path.waypoints.is_empty() {
                return Err(Error::InvalidSpec(format!("objects[{i}]: path needs a waypoint")));
            }
            if o.path.waypoints.len() > 1 && !(o.path.speed_mps > 0.0) {
                return Err(Error::InvalidSpec(format!("objects[{i}]: speed_mps must be positive")));
            }
            if o.path.start_s < 0.0 || o.path.waypoints.iter().any(|w| w.dwell_s < 0.0) {
                return Err(Error::InvalidSpec(format!("objects[{i}]: negative times")));
            }
        }
        let f = &self.flow_noise;
        if f.jitter_px < 0.0 || !(0.0..=1.0).contains(&f.dropout_rate) || f.flows_per_object[0] == 0 || f.flows_per_object[0] > f.flows_per_object[1] {
            return Err(Error::InvalidSpec("flow_noise values out of range".into()));
        }
        self.gps_noise.validate()
    }

    pub fn homography(&self) -> Result<Homography> {
        Homography::fit(&self.calibration)
    }

    pub fn target_index(&self) -> usize {
        self.objects.iter().position(|o| o.target).unwrap_or(0)
    }
}

/// One simulated (or ingested) clip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub fps: u32,
    pub n_frames: usize,
    pub frame_size: [u32; 2],
    pub calibration: [Correspondence; 4],
    pub flow_tracks: Vec<FlowTrack>,
    pub gps: GpsTrace,
    /// Target box per frame; `None` when the target is out of view or unknown.
    pub ground_truth: Vec<Option<BoundingBox>>,
}

impl Clip {
    pub fn homography(&self) -> Result<Homography> {
        Homography::fit(&self.calibration)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_frames as f64 / self.fps as f64
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Frame-space footprint of an upright object standing at `foot`.
fn footprint(h: &Homography, foot: WorldPoint, width_m: f64, height_m: f64) -> Option<BoundingBox> {
    let bc = h.world_to_frame(foot).ok()?;
    let l = h.world_to_frame(WorldPoint::new(foot.x - 0.5, foot.y)).ok()?;
    let r = h.world_to_frame(WorldPoint::new(foot.x + 0.5, foot.y)).ok()?;
    let px_per_m = l.distance(&r);
    if !px_per_m.is_finite() || px_per_m <= 0.0 {
        return None;
    }
    let (w, hh) = (width_m * px_per_m, height_m * px_per_m);
    Some(BoundingBox::new(bc.x, bc.y - 0.5 * hh, w, hh))
}

fn in_frame(p: &FramePoint, size: [u32; 2]) -> bool {
    p.x >= 0.0 && p.y >= 0.0 && p.x <= size[0] as f64 && p.y <= size[1] as f64
}

pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Clip> {
    spec.validate()?;
    let h = spec.homography()?;
    let n = spec.n_frames();
    let fps = spec.fps as f64;

    let paths: Vec<Vec<WorldPoint>> = spec
        .objects
        .iter()
        .map(|o| (0..n).map(|f| o.path.position(f as f64 / fps)).collect())
        .collect();

    // Per-object frame footprints; the shadow is a separate flow source.
    let mut footprints: Vec<Vec<Option<BoundingBox>>> = Vec::new();
    let mut ground_truth = vec![None; n];
    let target = spec.target_index();
    for (i, o) in spec.objects.iter().enumerate() {
        let fp: Vec<Option<BoundingBox>> = paths[i]
            .iter()
            .map(|&p| footprint(&h, p, o.width_m, o.height_m).filter(|b| in_frame(&b.bottom_center(), spec.frame_size)))
            .collect();
        if i == target {
            ground_truth = fp.clone();
        }
        if let Some(s) = &o.shadow {
            let shadow: Vec<Option<BoundingBox>> = fp
                .iter()
                .map(|b| {
                    b.map(|b| {
                        let (w, hh) = (b.w * s.scale_rel[0], b.h * s.scale_rel[1]);
                        let bottom = b.bottom() + s.offset_rel[1] * b.h;
                        BoundingBox::new(b.cx + s.offset_rel[0] * b.w, bottom - 0.5 * hh, w, hh)
                    })
                })
                .collect();
            footprints.push(fp);
            footprints.push(shadow);
        } else {
            footprints.push(fp);
        }
    }

    let mut flow_rng = stream_rng(spec.seed, STREAM_FLOW);
    let mut flow_tracks = emit_flow_tracks(&footprints, &spec.flow_noise, spec.frame_size, &mut flow_rng);
    for t in &mut flow_tracks {
        t.compute_moving(spec.fps, MOTION_THRESHOLD_PX);
    }

    let mut gps_rng = stream_rng(spec.seed, STREAM_GPS);
    let gps = simulate_gps(&paths[target], spec.fps, &spec.gps_noise, &mut gps_rng);

    Ok(Clip {
        fps: spec.fps,
        n_frames: n,
        frame_size: spec.frame_size,
        calibration: spec.calibration,
        flow_tracks,
        gps,
        ground_truth,
    })
}

/// Samples the GPS receiver: white measurement noise, a first-order smoothing
/// filter with time constant `lag_s`, a constant bias, then "stuck" fixes that
/// repeat the previous output.
pub fn simulate_gps(true_path: &[WorldPoint], fps: u32, noise: &GpsNoiseSpec, rng: &mut impl Rng) -> GpsTrace {
    assert!(!true_path.is_empty(), "true path must be non-empty");
    let fps = fps as f64;
    let last_t = (true_path.len() - 1) as f64 / fps;
    let dt = 1.0 / noise.rate_hz;
    let alpha = if noise.lag_s > 0.0 { 1.0 - (-dt / noise.lag_s).exp() } else { 1.0 };
    let normal = Normal::new(0.0, noise.gaussian_sigma_m.max(0.0)).expect("finite sigma");

    let mut fixes: Vec<GpsFix> = Vec::new();
    let mut filtered: Option<WorldPoint> = None;
    let mut k = 0usize;
    loop {
        let t = k as f64 * dt;
        if t > last_t + 1e-9 {
            break;
        }
        let truth = interpolate_path(true_path, t * fps);
        let (nx, ny) = if noise.gaussian_sigma_m > 0.0 {
            (normal.sample(rng), normal.sample(rng))
        } else {
            (0.0, 0.0)
        };
        let meas = WorldPoint::new(truth.x + nx, truth.y + ny);
        let s = match filtered {
            None => meas,
            Some(prev) => WorldPoint::new(prev.x + alpha * (meas.x - prev.x), prev.y + alpha * (meas.y - prev.y)),
        };
        filtered = Some(s);
        let mut out = WorldPoint::new(s.x + noise.constant_bias_m[0], s.y + noise.constant_bias_m[1]);
        let stuck: f64 = rng.random();
        if let Some(prev) = fixes.last() {
            if stuck < noise.stick_prob {
                out = prev.p;
            }
        }
        fixes.push(GpsFix { t, p: out });
        k += 1;
    }
    GpsTrace::new(fixes).expect("timestamps strictly increase")
}

fn interpolate_path(path: &[WorldPoint], frame: f64) -> WorldPoint {
    let i = frame.floor().max(0.0) as usize;
    if i + 1 >= path.len() {
        return path[path.len() - 1];
    }
    let a = frame - i as f64;
    let (p, q) = (path[i], path[i + 1]);
    WorldPoint::new(p.x + a * (q.x - p.x), p.y + a * (q.y - p.y))
}

/// Spawns key-point tracks inside each footprint. A track keeps its relative
/// position within the box, is jittered per frame, ends on dropout or when it
/// leaves the frame, and is replaced by a fresh track on the same object.
pub fn emit_flow_tracks(footprints: &[Vec<Option<BoundingBox>>], noise: &FlowNoiseSpec, frame_size: [u32; 2], rng: &mut impl Rng) -> Vec<FlowTrack> {
    struct Live {
        id: u32,
        start: usize,
        rel: (f64, f64),
        points: Vec<FramePoint>,
    }

    let jitter = Normal::new(0.0, noise.jitter_px.max(0.0)).expect("finite jitter");
    let mut next_id = 0u32;
    let mut done: Vec<FlowTrack> = Vec::new();

    for fp in footprints {
        let count = rng.random_range(noise.flows_per_object[0]..=noise.flows_per_object[1]);
        let mut live: Vec<Live> = Vec::new();
        for (f, b) in fp.iter().enumerate() {
            let Some(b) = b else {
                for l in live.drain(..) {
                    done.push(FlowTrack::new(l.id, l.start, l.points));
                }
                continue;
            };
            // Dropouts end tracks before this frame.
            if noise.dropout_rate > 0.0 {
                let mut kept = Vec::with_capacity(live.len());
                for l in live.drain(..) {
                    if rng.random::<f64>() < noise.dropout_rate {
                        done.push(FlowTrack::new(l.id, l.start, l.points));
                    } else {
                        kept.push(l);
                    }
                }
                live = kept;
            }
            while live.len() < count {
                live.push(Live {
                    id: next_id,
                    start: f,
                    rel: (rng.random(), rng.random()),
                    points: Vec::new(),
                });
                next_id += 1;
            }
            let mut kept = Vec::with_capacity(live.len());
            for mut l in live.drain(..) {
                let (jx, jy) = if noise.jitter_px > 0.0 {
                    (jitter.sample(rng), jitter.sample(rng))
                } else {
                    (0.0, 0.0)
                };
                let p = FramePoint::new(b.left() + l.rel.0 * b.w + jx, b.top() + l.rel.1 * b.h + jy);
                if in_frame(&p, frame_size) {
                    l.points.push(p);
                    kept.push(l);
                } else if !l.points.is_empty() {
                    done.push(FlowTrack::new(l.id, l.start, l.points));
                }
            }
            live = kept;
        }
        for l in live {
            if !l.points.is_empty() {
                done.push(FlowTrack::new(l.id, l.start, l.points));
            }
        }
    }
    done.sort_by_key(|t| t.id);
    done
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walker(target: bool, from: (f64, f64), to: (f64, f64), speed: f64) -> ObjectSpec {
        ObjectSpec {
            width_m: 0.8,
            height_m: 1.8,
            path: PathSpec {
                waypoints: vec![Waypoint::new(from.0, from.1), Waypoint::new(to.0, to.1)],
                speed_mps: speed,
                start_s: 0.0,
            },
            target,
            shadow: None,
        }
    }

    fn one_object(seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            seed,
            duration_s: 10.0,
            fps: DEFAULT_FPS,
            frame_size: default_frame_size(),
            calibration: default_calibration(),
            objects: vec![walker(true, (-4.0, 12.0), (4.0, 20.0), 1.2)],
            gps_noise: GpsNoiseSpec::noiseless(),
            flow_noise: FlowNoiseSpec::noiseless(),
        }
    }

    #[test]
    fn noiseless_gps_matches_ground_truth_bottom_center() {
        let clip = generate_scenario(&one_object(1)).unwrap();
        let h = clip.homography().unwrap();
        assert_eq!(clip.n_frames, 100);
        assert_eq!(clip.gps.fixes.len(), 10);
        for fix in &clip.gps.fixes {
            let f = (fix.t * clip.fps as f64).round() as usize;
            let gt = clip.ground_truth[f].expect("target in view");
            let w = h.bottom_center_world(&gt).unwrap();
            assert!(w.distance(&fix.p) < 1e-9, "frame {f}: {w:?} vs {:?}", fix.p);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = one_object(1);
        spec.gps_noise = GpsNoiseSpec::default();
        spec.flow_noise = FlowNoiseSpec::default();
        let a = generate_scenario(&spec).unwrap();
        let b = generate_scenario(&spec).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        spec.seed = 2;
        assert_ne!(generate_scenario(&spec).unwrap(), a);
    }

    #[test]
    fn constant_bias_is_the_mean_error() {
        let mut spec = one_object(2);
        spec.gps_noise.constant_bias_m = [3.0, 0.0];
        let clip = generate_scenario(&spec).unwrap();
        let h = clip.homography().unwrap();
        let (mut sx, mut sy) = (0.0, 0.0);
        for fix in &clip.gps.fixes {
            let f = (fix.t * clip.fps as f64).round() as usize;
            let truth = h.bottom_center_world(&clip.ground_truth[f].unwrap()).unwrap();
            sx += fix.p.x - truth.x;
            sy += fix.p.y - truth.y;
        }
        let n = clip.gps.fixes.len() as f64;
        assert!((sx / n - 3.0).abs() < 1e-9 && (sy / n).abs() < 1e-9);
    }

    #[test]
    fn bias_mean_within_three_sigma_over_root_n() {
        let path = vec![WorldPoint::new(1.0, 2.0); 4001];
        let noise = GpsNoiseSpec {
            gaussian_sigma_m: 2.0,
            constant_bias_m: [1.5, -2.5],
            ..GpsNoiseSpec::default()
        };
        let trace = simulate_gps(&path, 10, &noise, &mut ChaCha8Rng::seed_from_u64(9));
        let n = trace.fixes.len() as f64;
        let mx = trace.fixes.iter().map(|f| f.p.x - 1.0).sum::<f64>() / n;
        let my = trace.fixes.iter().map(|f| f.p.y - 2.0).sum::<f64>() / n;
        let tol = 3.0 * 2.0 / n.sqrt();
        assert!((mx - 1.5).abs() < tol && (my + 2.5).abs() < tol, "{mx} {my}");
    }

    #[test]
    fn zero_noise_gps_subsamples_path() {
        let path: Vec<_> = (0..51).map(|f| WorldPoint::new(f as f64 * 0.1, 0.0)).collect();
        let trace = simulate_gps(&path, 10, &GpsNoiseSpec::noiseless(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(trace.fixes.len(), 6);
        for (k, fix) in trace.fixes.iter().enumerate() {
            assert_eq!(fix.t, k as f64);
            assert!((fix.p.x - k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn lag_filter_follows_closed_form_step_response() {
        // Step from 0 to 10 m after the first fix.
        let path: Vec<_> = (0..201).map(|f| WorldPoint::new(if f == 0 { 0.0 } else { 10.0 }, 0.0)).collect();
        let noise = GpsNoiseSpec {
            gaussian_sigma_m: 0.0,
            lag_s: 4.0,
            ..GpsNoiseSpec::default()
        };
        let trace = simulate_gps(&path, 10, &noise, &mut ChaCha8Rng::seed_from_u64(0));
        for fix in &trace.fixes {
            let want = 10.0 * (1.0 - (-fix.t / 4.0).exp());
            assert!((fix.p.x - want).abs() < 1e-9, "t={} got {} want {want}", fix.t, fix.p.x);
        }
    }

    #[test]
    fn always_stuck_gps_repeats_first_fix() {
        let path: Vec<_> = (0..101).map(|f| WorldPoint::new(f as f64, 0.0)).collect();
        let noise = GpsNoiseSpec {
            stick_prob: 1.0,
            ..GpsNoiseSpec::default()
        };
        let trace = simulate_gps(&path, 10, &noise, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(trace.fixes.iter().all(|f| f.p == trace.fixes[0].p));
    }

    #[test]
    fn stationary_object_flows_do_not_move() {
        let b = Some(BoundingBox::new(100.0, 100.0, 40.0, 60.0));
        let tracks = emit_flow_tracks(&[vec![b; 30]], &FlowNoiseSpec::noiseless(), [640, 360], &mut ChaCha8Rng::seed_from_u64(1));
        assert!(!tracks.is_empty());
        for t in &tracks {
            assert_eq!(t.points.len(), 30);
            assert!(t.points.iter().all(|p| *p == t.points[0]));
        }
    }

    #[test]
    fn moving_object_flows_move_with_it() {
        let fp: Vec<_> = (0..30).map(|f| Some(BoundingBox::new(100.0 + 5.0 * f as f64, 100.0, 40.0, 60.0))).collect();
        let tracks = emit_flow_tracks(&[fp], &FlowNoiseSpec::noiseless(), [640, 360], &mut ChaCha8Rng::seed_from_u64(1));
        for t in &tracks {
            for w in t.points.windows(2) {
                assert!((w[1].x - w[0].x - 5.0).abs() < 1e-9 && (w[1].y - w[0].y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn separated_objects_give_separated_point_groups() {
        let a: Vec<_> = (0..5).map(|_| Some(BoundingBox::new(100.0, 150.0, 30.0, 60.0))).collect();
        let b: Vec<_> = (0..5).map(|_| Some(BoundingBox::new(400.0, 150.0, 30.0, 60.0))).collect();
        let noise = FlowNoiseSpec::noiseless();
        let tracks = emit_flow_tracks(&[a, b], &noise, [640, 360], &mut ChaCha8Rng::seed_from_u64(4));
        let (left, right): (Vec<_>, Vec<_>) = tracks.iter().map(|t| t.points[0]).partition(|p| p.x < 250.0);
        let gap = left.iter().flat_map(|p| right.iter().map(move |q| p.distance(q))).fold(f64::INFINITY, f64::min);
        assert!(gap >= 300.0 - 30.0, "gap {gap}");
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = one_object(1);
        spec.objects[0].target = false;
        assert!(matches!(generate_scenario(&spec), Err(Error::InvalidSpec(_))));
        let mut spec = one_object(1);
        spec.fps = 0;
        assert!(generate_scenario(&spec).is_err());
        let mut spec = one_object(1);
        spec.gps_noise.stick_prob = 1.5;
        assert!(generate_scenario(&spec).is_err());
    }

    #[test]
    fn path_with_dwell() {
        let p = PathSpec {
            waypoints: vec![Waypoint::new(0.0, 0.0), Waypoint::dwell(10.0, 0.0, 5.0), Waypoint::new(10.0, 10.0)],
            speed_mps: 2.0,
            start_s: 1.0,
        };
        assert_eq!(p.position(0.5), WorldPoint::new(0.0, 0.0));
        assert_eq!(p.position(3.5), WorldPoint::new(5.0, 0.0));
        assert_eq!(p.position(8.0), WorldPoint::new(10.0, 0.0));
        assert_eq!(p.position(13.5), WorldPoint::new(10.0, 5.0));
        assert_eq!(p.position(100.0), WorldPoint::new(10.0, 10.0));
    }
}
