use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::WorldPoint;

/// Below this speed (m/s) a heading is not defined.
pub const HEADING_MIN_SPEED: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub t: f64,
    pub p: WorldPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GpsFix>", into = "Vec<GpsFix>")]
pub struct GpsTrace {
    pub fixes: Vec<GpsFix>,
}

impl TryFrom<Vec<GpsFix>> for GpsTrace {
    type Error = Error;

    fn try_from(fixes: Vec<GpsFix>) -> Result<Self> {
        Self::new(fixes)
    }
}

impl From<GpsTrace> for Vec<GpsFix> {
    fn from(t: GpsTrace) -> Self {
        t.fixes
    }
}

/// GPS observation resampled to one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpsFrame {
    pub position: WorldPoint,
    pub speed: f64,
    pub heading: Option<[f64; 2]>,
    /// Minimum speed over the speed window around this frame.
    pub min_speed: f64,
}

impl GpsTrace {
    pub fn new(fixes: Vec<GpsFix>) -> Result<Self> {
        if fixes.is_empty() {
            return Err(Error::Parse {
                path: "gps".into(),
                msg: "trace has no fixes".into(),
            });
        }
        if fixes.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::Parse {
                path: "gps".into(),
                msg: "timestamps must be strictly increasing".into(),
            });
        }
        Ok(Self { fixes })
    }

    /// Linear interpolation, clamped to the first and last fix.
    pub fn position_at(&self, t: f64) -> WorldPoint {
        let f = &self.fixes;
        if t <= f[0].t {
            return f[0].p;
        }
        if t >= f[f.len() - 1].t {
            return f[f.len() - 1].p;
        }
        let i = f.partition_point(|x| x.t <= t) - 1;
        let (a, b) = (f[i], f[i + 1]);
        let s = (t - a.t) / (b.t - a.t);
        WorldPoint::new(a.p.x + s * (b.p.x - a.p.x), a.p.y + s * (b.p.y - a.p.y))
    }

    /// Central-difference velocity over `window_s`, clamped to the trace span.
    pub fn velocity_at(&self, t: f64, window_s: f64) -> [f64; 2] {
        let t0 = self.fixes[0].t;
        let t1 = self.fixes[self.fixes.len() - 1].t;
        let (lo, hi) = ((t - 0.5 * window_s).max(t0), (t + 0.5 * window_s).min(t1));
        if hi - lo <= 1e-9 {
            return [0.0, 0.0];
        }
        let (a, b) = (self.position_at(lo), self.position_at(hi));
        [(b.x - a.x) / (hi - lo), (b.y - a.y) / (hi - lo)]
    }

    /// Per-frame features, with velocity differenced over `velocity_window_s`.
    /// `min_speed` is the minimum over the frame and the
    /// following `speed_window_s` seconds: a receiver that keeps drifting
    /// after the object stops reads slow again within the window, so the
    /// speed veto does not fire during the lag.
    pub fn frames(&self, n_frames: usize, fps: u32, velocity_window_s: f64, speed_window_s: f64) -> Vec<GpsFrame> {
        let fps_f = fps as f64;
        let mut out: Vec<GpsFrame> = (0..n_frames)
            .map(|f| {
                let t = f as f64 / fps_f;
                let v = self.velocity_at(t, velocity_window_s);
                let speed = v[0].hypot(v[1]);
                let heading = (speed > HEADING_MIN_SPEED).then(|| [v[0] / speed, v[1] / speed]);
                GpsFrame {
                    position: self.position_at(t),
                    speed,
                    heading,
                    min_speed: speed,
                }
            })
            .collect();
        let w = (speed_window_s * fps_f).round().max(0.0) as usize;
        let speeds: Vec<f64> = out.iter().map(|g| g.speed).collect();
        for (f, g) in out.iter_mut().enumerate() {
            let hi = (f + w).min(n_frames.saturating_sub(1));
            g.min_speed = speeds[f..=hi].iter().copied().fold(f64::INFINITY, f64::min);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(pts: &[(f64, f64, f64)]) -> GpsTrace {
        GpsTrace::new(pts.iter().map(|&(t, x, y)| GpsFix { t, p: WorldPoint::new(x, y) }).collect()).unwrap()
    }

    #[test]
    fn interpolation_and_clamping() {
        let g = trace(&[(0.0, 0.0, 0.0), (1.0, 2.0, 0.0), (2.0, 2.0, 4.0)]);
        assert_eq!(g.position_at(-1.0), WorldPoint::new(0.0, 0.0));
        assert_eq!(g.position_at(0.5), WorldPoint::new(1.0, 0.0));
        assert_eq!(g.position_at(1.5), WorldPoint::new(2.0, 2.0));
        assert_eq!(g.position_at(9.0), WorldPoint::new(2.0, 4.0));
    }

    #[test]
    fn rejects_unordered_timestamps() {
        let fixes = vec![GpsFix { t: 1.0, p: WorldPoint::default() }, GpsFix { t: 1.0, p: WorldPoint::default() }];
        assert!(GpsTrace::new(fixes).is_err());
        assert!(serde_json::from_str::<GpsTrace>(r#"[{"t":1,"p":{"x":0,"y":0}},{"t":0,"p":{"x":0,"y":0}}]"#).is_err());
    }

    #[test]
    fn frame_features() {
        // 2 m/s eastward for 5 s, then stopped.
        let pts: Vec<_> = (0..=10).map(|k| (k as f64, 2.0 * (k.min(5)) as f64, 0.0)).collect();
        let g = trace(&pts);
        let frames = g.frames(101, 10, 1.0, 2.0);
        assert!((frames[20].speed - 2.0).abs() < 1e-12);
        assert_eq!(frames[20].heading, Some([1.0, 0.0]));
        assert!((frames[20].min_speed - 2.0).abs() < 1e-12);
        // Within two seconds of the stop the forward window sees zero speed.
        assert!(frames[40].min_speed < 1e-12);
        assert!(frames[80].speed < 1e-12);
        assert_eq!(frames[80].heading, None);
    }
}
