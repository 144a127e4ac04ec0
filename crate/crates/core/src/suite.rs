//! Seeded generator for the synthetic benchmark suite: one target per clip,
//! walking among companions, oncoming walkers and crossers, observed through
//! a noisy GPS.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::simulator::{FlowNoiseSpec, GpsNoiseSpec, ObjectSpec, PathSpec, ScenarioSpec, ShadowSpec, Waypoint, DEFAULT_DURATION_S, DEFAULT_FPS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub n_clips: usize,
    pub duration_s: f64,
    pub distractors: [usize; 2],
    pub gps_sigma_m: [f64; 2],
    pub gps_bias_max_m: f64,
    pub gps_lag_s: [f64; 2],
    pub gps_stick_prob: [f64; 2],
    /// Offset range of companions walking alongside the target, drawn per
    /// waypoint.
    pub companion_offset_m: [f64; 2],
    /// Probability that a companion leaves the target's route part way.
    pub companion_split_prob: f64,
    /// Shadow probability for distractors; the target casts none so that a
    /// clean target proposal exists.
    pub shadow_prob: f64,
    /// Probability that the target enters the view, and independently that it
    /// leaves for a while and that it leaves at the end.
    pub boundary_prob: f64,
    pub dwell_prob: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            n_clips: 30,
            duration_s: DEFAULT_DURATION_S,
            distractors: [2, 4],
            gps_sigma_m: [4.0, 8.0],
            gps_bias_max_m: 2.0,
            gps_lag_s: [0.2, 1.0],
            gps_stick_prob: [0.0, 0.1],
            companion_offset_m: [2.5, 10.0],
            companion_split_prob: 0.7,
            shadow_prob: 0.3,
            boundary_prob: 0.4,
            dwell_prob: 0.7,
        }
    }
}

/// Half-width of the default camera's ground view at range `y`.
fn half_width(y: f64) -> f64 {
    10.0 + (y - 5.0) * 20.0 / 55.0
}

fn uniform(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    r[0] + rng.random::<f64>() * (r[1] - r[0])
}

fn inside(rng: &mut impl Rng) -> (f64, f64) {
    let y = uniform(rng, [10.0, 35.0]);
    let hw = 0.8 * half_width(y);
    (uniform(rng, [-hw, hw]), y)
}

fn outside(rng: &mut impl Rng) -> (f64, f64) {
    let y = uniform(rng, [10.0, 35.0]);
    let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
    (side * (half_width(y) + 4.0), y)
}

fn person(path: PathSpec, target: bool, shadow: bool) -> ObjectSpec {
    ObjectSpec {
        width_m: 0.6,
        height_m: 1.7,
        path,
        target,
        shadow: shadow.then(ShadowSpec::default),
    }
}

fn target_path(cfg: &SuiteConfig, rng: &mut impl Rng) -> PathSpec {
    let speed = uniform(rng, [1.0, 1.6]);
    let mut wps = Vec::new();
    let enters = rng.random::<f64>() < cfg.boundary_prob;
    let leaves = rng.random::<f64>() < cfg.boundary_prob;
    let (x, y) = if enters { outside(rng) } else { inside(rng) };
    wps.push(Waypoint::new(x, y));
    let inner = rng.random_range(3..=4);
    let dwell_at = (rng.random::<f64>() < cfg.dwell_prob).then(|| rng.random_range(0..inner));
    // An excursion leaves the view after this inner waypoint and comes back.
    let excursion_after = (rng.random::<f64>() < cfg.boundary_prob).then(|| rng.random_range(0..inner - 1));
    for k in 0..inner {
        let (x, y) = inside(rng);
        let dwell = if dwell_at == Some(k) { uniform(rng, [3.0, 8.0]) } else { 0.0 };
        wps.push(Waypoint::dwell(x, y, dwell));
        if excursion_after == Some(k) {
            let (x, y) = outside(rng);
            wps.push(Waypoint::dwell(x, y, uniform(rng, [2.0, 6.0])));
        }
    }
    if leaves {
        let (x, y) = outside(rng);
        wps.push(Waypoint::new(x, y));
    }
    PathSpec {
        waypoints: wps,
        speed_mps: speed,
        start_s: if enters { 0.0 } else { uniform(rng, [0.0, 2.0]) },
    }
}

/// Offset within 35 degrees of the image x axis, so the pair stays
/// separable in the frame.
fn side_offset(cfg: &SuiteConfig, rng: &mut impl Rng) -> (f64, f64) {
    let r = uniform(rng, cfg.companion_offset_m);
    let a = uniform(rng, [-0.6, 0.6]) + if rng.random::<bool>() { 0.0 } else { std::f64::consts::PI };
    (r * a.cos(), r * a.sin())
}

/// Per-waypoint offsets on one side of the route, so the gap drifts.
fn drifting_offsets(n: usize, cfg: &SuiteConfig, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    let side = if rng.random::<bool>() { 0.0 } else { std::f64::consts::PI };
    let a0 = uniform(rng, [-0.4, 0.4]);
    (0..n)
        .map(|_| {
            let r = uniform(rng, cfg.companion_offset_m);
            let a = side + a0 + uniform(rng, [-0.2, 0.2]);
            (r * a.cos(), r * a.sin())
        })
        .collect()
}

/// Walks the target's route beside it, usually splitting off at some
/// waypoint towards a place of its own. A stop-and-go companion pauses on its
/// own schedule and walks faster to catch up, so it is sometimes still while
/// the target moves.
fn companion_path(target: &PathSpec, stop_and_go: bool, cfg: &SuiteConfig, rng: &mut impl Rng) -> PathSpec {
    let n = target.waypoints.len();
    let offsets = drifting_offsets(n, cfg, rng);
    let split = (rng.random::<f64>() < cfg.companion_split_prob && n > 2).then(|| rng.random_range(1..n - 1));
    let mut waypoints: Vec<Waypoint> = target.waypoints[..=split.unwrap_or(n - 1)]
        .iter()
        .zip(&offsets)
        .map(|(w, &(dx, dy))| {
            let dwell = if !stop_and_go {
                w.dwell_s
            } else if rng.random::<f64>() < 0.6 {
                uniform(rng, [2.0, 6.0])
            } else {
                0.0
            };
            Waypoint::dwell(w.x + dx, w.y + dy, dwell)
        })
        .collect();
    if split.is_some() {
        let (x, y) = if rng.random::<bool>() { inside(rng) } else { outside(rng) };
        waypoints.push(Waypoint::new(x, y));
    }
    let speed = if stop_and_go { uniform(rng, [1.3, 1.6]) } else { uniform(rng, [0.95, 1.05]) };
    PathSpec {
        waypoints,
        speed_mps: target.speed_mps * speed,
        start_s: target.start_s + uniform(rng, [0.0, 0.5]),
    }
}

/// Walks the target's route in reverse beside it, meeting it head-on.
fn counter_path(target: &PathSpec, cfg: &SuiteConfig, rng: &mut impl Rng) -> PathSpec {
    let (dx, dy) = side_offset(cfg, rng);
    PathSpec {
        waypoints: target.waypoints.iter().rev().map(|w| Waypoint::new(w.x + dx, w.y + dy)).collect(),
        speed_mps: target.speed_mps * uniform(rng, [0.9, 1.1]),
        start_s: uniform(rng, [0.0, 0.3 * cfg.duration_s]),
    }
}

fn crosser_path(cfg: &SuiteConfig, rng: &mut impl Rng) -> PathSpec {
    let (a, b) = (outside(rng), outside(rng));
    let mid = inside(rng);
    PathSpec {
        waypoints: vec![Waypoint::new(a.0, a.1), Waypoint::new(mid.0, mid.1), Waypoint::new(-a.0.signum() * b.0.abs(), b.1)],
        speed_mps: uniform(rng, [0.8, 2.0]),
        start_s: uniform(rng, [0.0, 0.6 * cfg.duration_s]),
    }
}

/// One scenario per clip. Clip `i` depends only on `(seed, i)`.
pub fn generate_suite(cfg: &SuiteConfig, seed: u64) -> Vec<ScenarioSpec> {
    (0..cfg.n_clips)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1000 + i as u64);
            let tpath = target_path(cfg, &mut rng);
            let mut objects = vec![person(tpath.clone(), true, false)];
            let n_d = rng.random_range(cfg.distractors[0]..=cfg.distractors[1]);
            for k in 0..n_d {
                let path = match k % 4 {
                    0 => companion_path(&tpath, false, cfg, &mut rng),
                    1 => counter_path(&tpath, cfg, &mut rng),
                    2 => companion_path(&tpath, true, cfg, &mut rng),
                    _ => crosser_path(cfg, &mut rng),
                };
                objects.push(person(path, false, rng.random::<f64>() < cfg.shadow_prob));
            }
            let bias_r = uniform(&mut rng, [0.0, cfg.gps_bias_max_m]);
            let bias_a = uniform(&mut rng, [0.0, std::f64::consts::TAU]);
            ScenarioSpec {
                seed: rng.random(),
                duration_s: cfg.duration_s,
                fps: DEFAULT_FPS,
                frame_size: [crate::simulator::DEFAULT_FRAME_WIDTH, crate::simulator::DEFAULT_FRAME_HEIGHT],
                calibration: crate::simulator::default_calibration(),
                objects,
                gps_noise: GpsNoiseSpec {
                    gaussian_sigma_m: uniform(&mut rng, cfg.gps_sigma_m),
                    constant_bias_m: [bias_r * bias_a.cos(), bias_r * bias_a.sin()],
                    lag_s: uniform(&mut rng, cfg.gps_lag_s),
                    stick_prob: uniform(&mut rng, cfg.gps_stick_prob),
                    rate_hz: 1.0,
                },
                flow_noise: FlowNoiseSpec::default(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_is_seeded_and_valid() {
        let cfg = SuiteConfig {
            n_clips: 5,
            ..SuiteConfig::default()
        };
        let a = generate_suite(&cfg, 3);
        assert_eq!(a, generate_suite(&cfg, 3));
        assert_ne!(a, generate_suite(&cfg, 4));
        for s in &a {
            s.validate().unwrap();
            assert!((3..=5).contains(&s.objects.len()));
        }
        let more = generate_suite(&SuiteConfig { n_clips: 7, ..cfg }, 3);
        assert_eq!(&more[..5], &a[..]);
    }
}
