//! Glue between the stages for a single clip.

use crate::error::{Error, Result};
use crate::evaluation::Version;
use crate::geometry::{iou, BoundingBox, Homography};
use crate::gps::GpsFrame;
use crate::matching::{match_target, nearest_box_baseline, HmmParams, LatticeInput, MatchOptions, MatchResult};
use crate::proposal::{run_proposal, Proposal, ProposalConfig};
use crate::ranking::RankerModel;
use crate::refine::{BoxSequence, RefinerModel};
use crate::simulator::Clip;

/// A clip with its Stage-1 proposal and per-frame GPS features computed once.
#[derive(Clone, Debug)]
pub struct PreparedClip {
    pub clip: Clip,
    pub homography: Homography,
    pub proposal: Proposal,
    pub gps: Vec<GpsFrame>,
    windows: (f64, f64),
}

impl PreparedClip {
    pub fn prepare(mut clip: Clip, cfg: &ProposalConfig) -> Result<Self> {
        if clip.n_frames == 0 {
            return Err(Error::EmptyClip);
        }
        if clip.ground_truth.len() != clip.n_frames {
            return Err(Error::shape("prepare", clip.n_frames, clip.ground_truth.len()));
        }
        let homography = clip.homography()?;
        for t in &mut clip.flow_tracks {
            t.compute_moving(clip.fps, cfg.motion_threshold_px);
        }
        let proposal = run_proposal(&clip.flow_tracks, clip.n_frames, clip.fps, &homography, cfg);
        let d = HmmParams::default();
        let windows = (d.velocity_window_s, d.speed_window_s);
        let gps = clip.gps.frames(clip.n_frames, clip.fps, windows.0, windows.1);
        Ok(Self {
            clip,
            homography,
            proposal,
            gps,
            windows,
        })
    }

    fn lattice_input<'a>(&'a self, gps: &'a [GpsFrame]) -> LatticeInput<'a> {
        LatticeInput {
            proposal: &self.proposal,
            gps,
            homography: &self.homography,
            frame_size: self.clip.frame_size,
        }
    }

    pub fn run_matching(&self, params: &HmmParams, opts: MatchOptions) -> Result<MatchResult> {
        params.validate()?;
        if (params.velocity_window_s, params.speed_window_s) == self.windows {
            match_target(&self.lattice_input(&self.gps), params, opts)
        } else {
            let gps = self.clip.gps.frames(self.clip.n_frames, self.clip.fps, params.velocity_window_s, params.speed_window_s);
            match_target(&self.lattice_input(&gps), params, opts)
        }
    }

    pub fn baseline(&self) -> MatchResult {
        nearest_box_baseline(&self.proposal, &self.gps)
    }

    pub fn ground_truth(&self) -> &[Option<BoundingBox>] {
        &self.clip.ground_truth
    }

    /// Per-frame output of one pipeline version. `params` is ignored by the
    /// baseline; V4 refines the V3 boxes and needs `refiner`.
    pub fn boxes_for(&self, version: Version, params: &HmmParams, refiner: Option<&RefinerModel>) -> Result<Vec<Option<BoundingBox>>> {
        match version {
            Version::Base => Ok(self.baseline().boxes()),
            Version::V4 => {
                let model = refiner.ok_or_else(|| Error::InvalidSpec("version v4 needs a refiner model".into()))?;
                refine_boxes(&self.run_matching(params, MatchOptions::FULL)?.boxes(), self.clip.fps, model)
            }
            v => Ok(self.run_matching(params, v.match_options().expect("HMM version"))?.boxes()),
        }
    }
}

/// Maximal runs of consecutive present boxes, as `(first frame, boxes)`. A
/// jump to a box that does not overlap the previous one starts a new run, so
/// a switch between objects is never smoothed over.
pub fn box_runs(boxes: &[Option<BoundingBox>]) -> Vec<(usize, Vec<BoundingBox>)> {
    let mut runs: Vec<(usize, Vec<BoundingBox>)> = Vec::new();
    for (f, b) in boxes.iter().enumerate() {
        match (b, runs.last_mut()) {
            (Some(b), Some((start, run))) if *start + run.len() == f && run.last().is_some_and(|p| iou(p, b) > 0.0) => run.push(*b),
            (Some(b), _) => runs.push((f, vec![*b])),
            (None, _) => {}
        }
    }
    runs
}

/// Refines each run of present boxes independently.
pub fn refine_boxes(boxes: &[Option<BoundingBox>], fps: u32, model: &RefinerModel) -> Result<Vec<Option<BoundingBox>>> {
    let mut out = boxes.to_vec();
    for (start, run) in box_runs(boxes) {
        let refined = model.refine(&BoxSequence::from_boxes(fps, &run)?)?;
        for (k, b) in refined.boxes().into_iter().enumerate() {
            out[start + k] = Some(b);
        }
    }
    Ok(out)
}

/// Quality score per present box.
pub fn score_boxes(boxes: &[Option<BoundingBox>], fps: u32, model: &RankerModel) -> Result<Vec<Option<f64>>> {
    let mut out = vec![None; boxes.len()];
    for (start, run) in box_runs(boxes) {
        for (k, s) in model.score_quality(&BoxSequence::from_boxes(fps, &run)?)?.into_iter().enumerate() {
            out[start + k] = Some(s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_split_on_gaps_and_jumps() {
        let b = BoundingBox::new(1.0, 1.0, 2.0, 2.0);
        let runs = box_runs(&[None, Some(b), Some(b), None, Some(b)]);
        assert_eq!(runs.iter().map(|(s, r)| (*s, r.len())).collect::<Vec<_>>(), vec![(1, 2), (4, 1)]);
        assert!(box_runs(&[None, None]).is_empty());
        let far = BoundingBox::new(10.0, 1.0, 2.0, 2.0);
        let runs = box_runs(&[Some(b), Some(b), Some(far), Some(far)]);
        assert_eq!(runs.iter().map(|(s, r)| (*s, r.len())).collect::<Vec<_>>(), vec![(0, 2), (2, 2)]);
    }
}
