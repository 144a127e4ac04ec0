//! Metrics, cross-validation splits and the benchmark driver.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, normalized_distance, BoundingBox};
use crate::matching::MatchOptions;

pub const IOU_THRESHOLD: f64 = 0.5;

/// Pipeline versions of the ablation: nearest box, basic HMM, plus motion
/// constraints, plus shape preference, plus refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Version {
    Base,
    V1,
    V2,
    V3,
    V4,
}

impl Version {
    pub const ALL: [Version; 5] = [Version::Base, Version::V1, Version::V2, Version::V3, Version::V4];

    /// HMM options, or `None` for the nearest-box baseline. V4 matches like V3.
    pub fn match_options(self) -> Option<MatchOptions> {
        match self {
            Version::Base => None,
            Version::V1 => Some(MatchOptions::BASIC),
            Version::V2 => Some(MatchOptions {
                motion_constraints: true,
                shape_preference: false,
            }),
            Version::V3 | Version::V4 => Some(MatchOptions::FULL),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Version::Base => "base",
            Version::V1 => "v1",
            Version::V2 => "v2",
            Version::V3 => "v3",
            Version::V4 => "v4",
        }
    }
}

impl std::str::FromStr for Version {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Version::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidSpec(format!("unknown version {s:?}; expected one of base, v1, v2, v3, v4")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipMetrics {
    pub frames: usize,
    pub gt_frames: usize,
    /// Fraction of frames annotated correctly: IoU at least 0.5 where the
    /// target is visible, no box where it is not.
    pub precision_at_iou_05: f64,
    /// Mean IoU over frames with a ground-truth box; a missing prediction scores 0.
    pub mean_iou: f64,
    /// Median normalized distance over frames with both boxes.
    pub median_nd: Option<f64>,
}

/// Median; an even count averages the middle two.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

pub fn clip_metrics(pred: &[Option<BoundingBox>], gt: &[Option<BoundingBox>]) -> Result<ClipMetrics> {
    if pred.len() != gt.len() {
        return Err(Error::shape("clip_metrics", gt.len(), pred.len()));
    }
    if gt.is_empty() {
        return Err(Error::EmptyClip);
    }
    let mut correct = 0usize;
    let mut ious = Vec::new();
    let mut nds = Vec::new();
    for (p, g) in pred.iter().zip(gt) {
        match (p, g) {
            (Some(p), Some(g)) => {
                let v = iou(p, g);
                if v > IOU_THRESHOLD {
                    correct += 1;
                }
                ious.push(v);
                nds.push(normalized_distance(p, g));
            }
            (None, Some(_)) => ious.push(0.0),
            (None, None) => correct += 1,
            (Some(_), None) => {}
        }
    }
    if ious.is_empty() {
        return Err(Error::NoOverlapFrames);
    }
    Ok(ClipMetrics {
        frames: gt.len(),
        gt_frames: ious.len(),
        precision_at_iou_05: correct as f64 / gt.len() as f64,
        mean_iou: ious.iter().sum::<f64>() / ious.len() as f64,
        median_nd: median(&nds),
    })
}

/// Deterministic three-way split of `0..n`: shuffled with `seed`, then cut
/// into folds whose sizes differ by at most one (larger folds first).
pub fn three_fold_split(n: usize, seed: u64) -> Result<[Vec<usize>; 3]> {
    if n < 3 {
        return Err(Error::TooFewClips { needed: 3, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds: [Vec<usize>; 3] = Default::default();
    let mut at = 0;
    for (k, fold) in folds.iter_mut().enumerate() {
        let size = n / 3 + usize::from(k < n % 3);
        fold.extend_from_slice(&idx[at..at + size]);
        fold.sort_unstable();
        at += size;
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn split_sizes() {
        let f = three_fold_split(10, 1).unwrap();
        let mut sizes: Vec<usize> = f.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        let mut all: Vec<usize> = f.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(three_fold_split(10, 1).unwrap(), f);
        assert!(matches!(three_fold_split(2, 0), Err(Error::TooFewClips { .. })));
    }

    #[test]
    fn metrics_examples() {
        let b = BoundingBox::new(10.0, 10.0, 4.0, 4.0);
        let far = BoundingBox::new(30.0, 10.0, 4.0, 4.0);
        let gt = vec![Some(b), Some(b), None, Some(b)];
        let pred = vec![Some(b), Some(far), None, None];
        let m = clip_metrics(&pred, &gt).unwrap();
        assert_eq!(m.precision_at_iou_05, 0.5);
        assert!((m.mean_iou - 1.0 / 3.0).abs() < 1e-12);
        // ND is 0 and 20 over the diagonal; median of two averages.
        assert!((m.median_nd.unwrap() - 10.0 / 32f64.sqrt()).abs() < 1e-12);
        assert!(clip_metrics(&pred[..2], &gt).is_err());
    }
}
