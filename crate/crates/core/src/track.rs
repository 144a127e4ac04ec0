use serde::{Deserialize, Serialize};

use crate::geometry::FramePoint;

/// Default motion threshold: displacement over one second, in pixels.
pub const MOTION_THRESHOLD_PX: f64 = 2.0;

/// One tracked key point, alive on the contiguous frame range
/// `start..start + points.len()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTrack {
    pub id: u32,
    pub start: usize,
    pub points: Vec<FramePoint>,
    pub moving: Vec<bool>,
}

impl FlowTrack {
    pub fn new(id: u32, start: usize, points: Vec<FramePoint>) -> Self {
        let moving = vec![false; points.len()];
        Self { id, start, points, moving }
    }

    /// One past the last frame.
    pub fn end(&self) -> usize {
        self.start + self.points.len()
    }

    pub fn alive_at(&self, frame: usize) -> bool {
        frame >= self.start && frame < self.end()
    }

    pub fn at(&self, frame: usize) -> Option<FramePoint> {
        self.alive_at(frame).then(|| self.points[frame - self.start])
    }

    pub fn is_moving_at(&self, frame: usize) -> bool {
        self.alive_at(frame) && self.moving[frame - self.start]
    }

    /// Recomputes `moving`: a point moves when its displacement across a
    /// one-second window exceeds `threshold_px`. The window looks back from
    /// the frame and slides forward near the start of the track.
    pub fn compute_moving(&mut self, fps: u32, threshold_px: f64) {
        let n = self.points.len();
        let span = fps.max(1) as usize;
        self.moving = (0..n)
            .map(|i| {
                if n < 2 {
                    return false;
                }
                let mut lo = i.saturating_sub(span);
                let hi = (lo + span).min(n - 1);
                if hi - lo < span {
                    lo = hi.saturating_sub(span);
                }
                self.points[hi].distance(&self.points[lo]) > threshold_px
            })
            .collect();
    }
}

/// Tracks indexed by frame for fast per-frame lookups.
#[derive(Clone, Debug, Default)]
pub struct FrameIndex {
    /// For every frame, indices into the track list of tracks alive there.
    pub alive: Vec<Vec<usize>>,
}

impl FrameIndex {
    pub fn build(tracks: &[FlowTrack], n_frames: usize) -> Self {
        let mut alive = vec![Vec::new(); n_frames];
        for (i, t) in tracks.iter().enumerate() {
            for f in t.start..t.end().min(n_frames) {
                alive[f].push(i);
            }
        }
        Self { alive }
    }
}
