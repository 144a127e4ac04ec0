//! Candidate object proposal.
//!
//! Moving flow points are clustered per frame twice: plain DBSCAN with a
//! small radius (far, small objects) and affinity-constrained DBSCAN with a
//! large radius (near, large objects). The affinity table remembers which
//! track pairs were kept apart in earlier frames and vetoes merging them.
//! Candidates are then linked across frames into candidate object flows
//! (COFs) and extended over the periods where their tracks stand still.

use rustc_hash::FxHashMap as HashMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{BoundingBox, FramePoint, Homography, WorldPoint};
use crate::track::{FlowTrack, FrameIndex, MOTION_THRESHOLD_PX};

pub const NOISE: i32 = -1;

/// Scores are clamped to this magnitude.
pub const AFFINITY_CLAMP: f64 = 1000.0;

/// Below this speed (m/s) a candidate counts as stationary and has no
/// heading. Higher than the GPS floor because box jitter alone reaches a few
/// tenths of a metre per second.
pub const CANDIDATE_HEADING_MIN_SPEED: f64 = 0.5;
pub const AFFINITY_CLOSE_BONUS: f64 = 1.0;
pub const AFFINITY_SPLIT_PENALTY: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposalConfig {
    pub eps_small_px: f64,
    pub eps_large_px: f64,
    pub min_pts: usize,
    pub motion_threshold_px: f64,
    /// Fraction of shared tracks (over the smaller member set) needed to link
    /// candidates in adjacent frames; equality does not link.
    pub link_ratio: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            eps_small_px: 20.0,
            eps_large_px: 50.0,
            min_pts: 3,
            motion_threshold_px: MOTION_THRESHOLD_PX,
            link_ratio: 0.5,
        }
    }
}

/// Plain DBSCAN. Neighbourhoods are closed balls and include the point
/// itself; labels are assigned in discovery order, noise is [`NOISE`].
pub fn dbscan(points: &[FramePoint], eps: f64, min_pts: usize) -> Vec<i32> {
    dbscan_masked(points, eps, min_pts, |_, _| true)
}

/// DBSCAN-AC: two points are neighbours only if they are within `eps` and
/// their tracks have a strictly positive affinity.
pub fn dbscan_ac(points: &[FramePoint], ids: &[u32], eps: f64, min_pts: usize, table: &AffinityTable) -> Vec<i32> {
    assert_eq!(points.len(), ids.len());
    dbscan_masked(points, eps, min_pts, |i, j| table.get(ids[i], ids[j]) > 0.0)
}

fn dbscan_masked(points: &[FramePoint], eps: f64, min_pts: usize, allow: impl Fn(usize, usize) -> bool) -> Vec<i32> {
    assert!(eps > 0.0 && min_pts >= 1);
    let grid = Grid::new(points, eps);
    let neighbours: Vec<Vec<usize>> = (0..points.len())
        .map(|i| {
            let mut n = grid.within(points, i, eps);
            n.retain(|&j| j == i || allow(i, j));
            n
        })
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|n| n.len() >= min_pts).collect();

    let mut labels = vec![NOISE; points.len()];
    let mut visited = vec![false; points.len()];
    let mut next = 0;
    let mut queue = Vec::new();
    for i in 0..points.len() {
        if visited[i] || !core[i] {
            continue;
        }
        visited[i] = true;
        labels[i] = next;
        queue.clear();
        queue.push(i);
        while let Some(p) = queue.pop() {
            for &q in &neighbours[p] {
                if labels[q] == NOISE {
                    labels[q] = next;
                }
                if core[q] && !visited[q] {
                    visited[q] = true;
                    queue.push(q);
                }
            }
        }
        next += 1;
    }
    labels
}

/// Uniform hash grid with cell size `eps` for radius queries.
struct Grid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(points: &[FramePoint], cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::default();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, cells }
    }

    fn key(p: &FramePoint, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    /// Indices within `eps` of point `i` (including `i`), ascending.
    fn within(&self, points: &[FramePoint], i: usize, eps: f64) -> Vec<usize> {
        let (kx, ky) = Self::key(&points[i], self.cell);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(c) = self.cells.get(&(kx + dx, ky + dy)) {
                    out.extend(c.iter().copied().filter(|&j| points[i].distance(&points[j]) <= eps));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Sparse symmetric pairwise affinity between flow tracks. Absent pairs score 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffinityTable {
    scores: HashMap<(u32, u32), f64>,
}

/// What one frame says about a track pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairObservation {
    pub a: u32,
    pub b: u32,
    pub close: bool,
    pub same_cluster: bool,
}

fn pair_key(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl AffinityTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, a: u32, b: u32) -> f64 {
        self.scores.get(&pair_key(a, b)).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn set(&mut self, a: u32, b: u32, score: f64) {
        self.scores.insert(pair_key(a, b), score.clamp(-AFFINITY_CLAMP, AFFINITY_CLAMP));
    }

    /// Close pairs gain 1.0, pairs not sharing a cluster lose 0.5.
    pub fn update(&mut self, observations: impl IntoIterator<Item = PairObservation>) {
        for o in observations {
            let delta = if o.close { AFFINITY_CLOSE_BONUS } else { 0.0 } - if o.same_cluster { 0.0 } else { AFFINITY_SPLIT_PENALTY };
            if delta == 0.0 {
                continue;
            }
            let s = self.scores.entry(pair_key(o.a, o.b)).or_insert(0.0);
            *s = (*s + delta).clamp(-AFFINITY_CLAMP, AFFINITY_CLAMP);
            if *s == 0.0 {
                self.scores.remove(&pair_key(o.a, o.b));
            }
        }
    }

    /// Applies one frame's clustering outcome over all co-present track pairs.
    pub fn update_from_frame(&mut self, points: &[FramePoint], ids: &[u32], labels: &[i32], eps_close: f64) {
        let n = points.len();
        let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        self.update(pairs.map(|(i, j)| PairObservation {
            a: ids[i],
            b: ids[j],
            close: points[i].distance(&points[j]) <= eps_close,
            same_cluster: labels[i] != NOISE && labels[i] == labels[j],
        }));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// Plain DBSCAN at the small radius.
    BasicSmall,
    /// DBSCAN-AC at the large radius.
    AcLarge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateObject {
    pub frame: usize,
    /// Sorted member track ids.
    pub members: Vec<u32>,
    pub bbox: BoundingBox,
    pub source: Source,
    /// True for candidates synthesised while the object stood still.
    #[serde(default)]
    pub extended: bool,
}

fn clusters_to_candidates(frame: usize, points: &[FramePoint], ids: &[u32], labels: &[i32], source: Source) -> Vec<CandidateObject> {
    let n_clusters = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    let mut groups: Vec<(Vec<u32>, Vec<FramePoint>)> = vec![(Vec::new(), Vec::new()); n_clusters];
    for ((&l, &id), p) in labels.iter().zip(ids).zip(points) {
        if l != NOISE {
            groups[l as usize].0.push(id);
            groups[l as usize].1.push(*p);
        }
    }
    groups
        .into_iter()
        .filter(|(m, _)| !m.is_empty())
        .map(|(mut members, pts)| {
            members.sort_unstable();
            CandidateObject {
                frame,
                members,
                bbox: BoundingBox::hull(&pts, 1.0).expect("non-empty cluster"),
                source,
                extended: false,
            }
        })
        .collect()
}

/// Per-frame candidates from both clustering sources over moving tracks.
pub fn propose_candidates(tracks: &[FlowTrack], n_frames: usize, cfg: &ProposalConfig) -> Vec<Vec<CandidateObject>> {
    let index = FrameIndex::build(tracks, n_frames);
    let mut table = AffinityTable::new();
    let mut out = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let (ids, points): (Vec<u32>, Vec<FramePoint>) = index.alive[f]
            .iter()
            .filter(|&&t| tracks[t].is_moving_at(f))
            .map(|&t| (tracks[t].id, tracks[t].at(f).expect("alive")))
            .unzip();
        let mut cands = Vec::new();
        if !points.is_empty() {
            let small = dbscan(&points, cfg.eps_small_px, cfg.min_pts);
            cands.extend(clusters_to_candidates(f, &points, &ids, &small, Source::BasicSmall));
            let large = dbscan_ac(&points, &ids, cfg.eps_large_px, cfg.min_pts, &table);
            cands.extend(clusters_to_candidates(f, &points, &ids, &large, Source::AcLarge));
            table.update_from_frame(&points, &ids, &large, cfg.eps_large_px);
        }
        out.push(cands);
    }
    out
}

/// One candidate inside a COF with its motion estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CofEntry {
    pub candidate: CandidateObject,
    pub world: WorldPoint,
    /// m/s
    pub speed: f64,
    pub heading: Option<[f64; 2]>,
}

/// Candidate object flow: one object's candidates on consecutive frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cof {
    pub id: usize,
    pub source: Source,
    pub start: usize,
    pub entries: Vec<CofEntry>,
}

impl Cof {
    pub fn end(&self) -> usize {
        self.start + self.entries.len()
    }

    pub fn entry(&self, frame: usize) -> Option<&CofEntry> {
        (frame >= self.start && frame < self.end()).then(|| &self.entries[frame - self.start])
    }
}

fn shared(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Shared-track ratio over the smaller member set.
pub fn overlap_ratio(a: &[u32], b: &[u32]) -> f64 {
    let denom = a.len().min(b.len());
    if denom == 0 {
        return 0.0;
    }
    shared(a, b) as f64 / denom as f64
}

/// Links candidates of adjacent frames (per source) into COFs and estimates
/// per-frame speed and heading from the world position of each box's
/// bottom-center over a one-second window. Candidates whose bottom-center
/// cannot be mapped to the ground are dropped.
pub fn link_cofs(per_frame: &[Vec<CandidateObject>], h: &Homography, fps: u32, link_ratio: f64) -> Vec<Cof> {
    let mut cofs: Vec<(Source, usize, Vec<(CandidateObject, WorldPoint)>)> = Vec::new();
    // Open COF index for each candidate in the previous frame, per source.
    let mut prev: Vec<(usize, CandidateObject)> = Vec::new();
    for (f, cands) in per_frame.iter().enumerate() {
        let cands: Vec<(CandidateObject, WorldPoint)> = cands
            .iter()
            .filter_map(|c| h.bottom_center_world(&c.bbox).ok().map(|w| (c.clone(), w)))
            .collect();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, (_, pc)) in prev.iter().enumerate() {
            for (j, (c, _)) in cands.iter().enumerate() {
                if pc.source == c.source {
                    let r = overlap_ratio(&pc.members, &c.members);
                    if r > link_ratio {
                        pairs.push((r, i, j));
                    }
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut taken_prev = vec![false; prev.len()];
        let mut owner: Vec<Option<usize>> = vec![None; cands.len()];
        for (_, i, j) in pairs {
            if !taken_prev[i] && owner[j].is_none() {
                taken_prev[i] = true;
                owner[j] = Some(prev[i].0);
            }
        }
        let mut next_prev = Vec::with_capacity(cands.len());
        for (j, (c, w)) in cands.into_iter().enumerate() {
            let k = match owner[j] {
                Some(k) => k,
                None => {
                    cofs.push((c.source, f, Vec::new()));
                    cofs.len() - 1
                }
            };
            cofs[k].2.push((c.clone(), w));
            next_prev.push((k, c));
        }
        prev = next_prev;
    }

    cofs.into_iter()
        .enumerate()
        .map(|(id, (source, start, items))| {
            let worlds: Vec<WorldPoint> = items.iter().map(|(_, w)| *w).collect();
            let motion = window_motion(&worlds, fps);
            Cof {
                id,
                source,
                start,
                entries: items
                    .into_iter()
                    .zip(motion)
                    .map(|((candidate, world), (speed, heading))| CofEntry { candidate, world, speed, heading })
                    .collect(),
            }
        })
        .collect()
}

/// Speed and heading from displacement across a one-second window centred
/// on each sample and clamped to the sequence.
fn window_motion(worlds: &[WorldPoint], fps: u32) -> Vec<(f64, Option<[f64; 2]>)> {
    let half = (fps as usize / 2).max(1);
    let n = worlds.len();
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(n - 1);
            if hi == lo {
                return (0.0, None);
            }
            let dt = (hi - lo) as f64 / fps as f64;
            let (dx, dy) = (worlds[hi].x - worlds[lo].x, worlds[hi].y - worlds[lo].y);
            let d = dx.hypot(dy);
            let speed = d / dt;
            (speed, (speed > CANDIDATE_HEADING_MIN_SPEED).then(|| [dx / d, dy / d]))
        })
        .collect()
}

/// Extends every COF forward past its last frame and backward before its
/// first frame while at least half of the boundary candidate's tracks are
/// still alive and most of them are stationary. Extended entries carry the
/// boundary box shifted by the mean displacement of the surviving tracks,
/// zero speed and no heading.
pub fn extend_stationary(cofs: &mut [Cof], tracks: &[FlowTrack], n_frames: usize, h: &Homography) {
    let by_id: HashMap<u32, &FlowTrack> = tracks.iter().map(|t| (t.id, t)).collect();
    for cof in cofs.iter_mut() {
        let last = cof.entries.last().expect("non-empty COF").candidate.clone();
        let forward: Vec<CofEntry> = (last.frame + 1..n_frames).map_while(|f| stationary_entry(&last, f, &by_id, h)).collect();
        let first = cof.entries[0].candidate.clone();
        let mut backward: Vec<CofEntry> = (0..first.frame).rev().map_while(|f| stationary_entry(&first, f, &by_id, h)).collect();
        if !backward.is_empty() {
            backward.reverse();
            cof.start -= backward.len();
            backward.append(&mut cof.entries);
            cof.entries = backward;
        }
        cof.entries.extend(forward);
    }
}

fn stationary_entry(anchor: &CandidateObject, f: usize, tracks: &HashMap<u32, &FlowTrack>, h: &Homography) -> Option<CofEntry> {
    let mut alive = Vec::new();
    let mut moving = 0;
    let (mut dx, mut dy) = (0.0, 0.0);
    for id in &anchor.members {
        let Some(t) = tracks.get(id) else { continue };
        let (Some(p), Some(p0)) = (t.at(f), t.at(anchor.frame)) else {
            continue;
        };
        alive.push(*id);
        dx += p.x - p0.x;
        dy += p.y - p0.y;
        if t.is_moving_at(f) {
            moving += 1;
        }
    }
    if alive.is_empty() || 2 * alive.len() < anchor.members.len() || 2 * moving > alive.len() {
        return None;
    }
    let n = alive.len() as f64;
    let bbox = anchor.bbox.translate(dx / n, dy / n);
    let world = h.bottom_center_world(&bbox).ok()?;
    Some(CofEntry {
        candidate: CandidateObject {
            frame: f,
            members: alive,
            bbox,
            source: anchor.source,
            extended: true,
        },
        world,
        speed: 0.0,
        heading: None,
    })
}

/// Stage-1 output for one clip.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub cofs: Vec<Cof>,
    /// For every frame, `(cof index, entry index)` of each candidate present.
    pub frames: Vec<Vec<(usize, usize)>>,
}

impl Proposal {
    pub fn new(cofs: Vec<Cof>, n_frames: usize) -> Self {
        let mut frames = vec![Vec::new(); n_frames];
        for (ci, cof) in cofs.iter().enumerate() {
            for (k, _) in cof.entries.iter().enumerate() {
                frames[cof.start + k].push((ci, k));
            }
        }
        Self { cofs, frames }
    }

    pub fn entry(&self, r: (usize, usize)) -> &CofEntry {
        &self.cofs[r.0].entries[r.1]
    }

    pub fn candidates_at(&self, f: usize) -> impl Iterator<Item = &CofEntry> {
        self.frames[f].iter().map(move |&r| self.entry(r))
    }
}

/// Full Stage-1: cluster, link, extend.
pub fn run_proposal(tracks: &[FlowTrack], n_frames: usize, fps: u32, h: &Homography, cfg: &ProposalConfig) -> Proposal {
    let per_frame = propose_candidates(tracks, n_frames, cfg);
    let mut cofs = link_cofs(&per_frame, h, fps, cfg.link_ratio);
    extend_stationary(&mut cofs, tracks, n_frames, h);
    Proposal::new(cofs, n_frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(xy: &[(f64, f64)]) -> Vec<FramePoint> {
        xy.iter().map(|&(x, y)| FramePoint::new(x, y)).collect()
    }

    #[test]
    fn single_point_single_cluster() {
        assert_eq!(dbscan(&pts(&[(3.0, 4.0)]), 1.0, 1), vec![0]);
    }

    #[test]
    fn pair_distance_rule() {
        let eps = 10.0;
        assert_eq!(dbscan(&pts(&[(0.0, 0.0), (5.0, 0.0)]), eps, 1), vec![0, 0]);
        assert_eq!(dbscan(&pts(&[(0.0, 0.0), (30.0, 0.0)]), eps, 1), vec![0, 1]);
        // Closed neighbourhood: exactly eps apart is connected.
        assert_eq!(dbscan(&pts(&[(0.0, 0.0), (10.0, 0.0)]), eps, 2), vec![0, 0]);
        assert_eq!(dbscan(&pts(&[(0.0, 0.0), (30.0, 0.0)]), eps, 2), vec![NOISE, NOISE]);
    }

    #[test]
    fn affinity_arithmetic() {
        let mut t = AffinityTable::new();
        let close = PairObservation { a: 1, b: 2, close: true, same_cluster: true };
        for _ in 0..3 {
            t.update([close]);
        }
        assert_eq!(t.get(2, 1), 3.0);

        let mut t = AffinityTable::new();
        t.update([close]);
        let apart = PairObservation { a: 2, b: 1, close: false, same_cluster: false };
        t.update([apart]);
        t.update([apart]);
        assert_eq!(t.get(1, 2), 0.0);
        assert_eq!(t.get(7, 8), 0.0);

        let mut t = AffinityTable::new();
        for _ in 0..5000 {
            t.update([apart]);
        }
        assert_eq!(t.get(1, 2), -AFFINITY_CLAMP);
    }

    #[test]
    fn ac_with_positive_table_equals_plain() {
        let p = pts(&[(0.0, 0.0), (3.0, 0.0), (6.0, 0.0), (40.0, 0.0), (43.0, 1.0), (46.0, 0.0)]);
        let ids: Vec<u32> = (0..6).collect();
        let mut t = AffinityTable::new();
        for a in 0..6 {
            for b in a + 1..6 {
                t.set(a, b, 1.0);
            }
        }
        assert_eq!(dbscan_ac(&p, &ids, 5.0, 2, &t), dbscan(&p, 5.0, 2));
    }

    #[test]
    fn negative_affinity_blocks_merge() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0)]);
        let mut t = AffinityTable::new();
        t.set(10, 11, -1.0);
        assert_eq!(dbscan_ac(&p, &[10, 11], 5.0, 1, &t), vec![0, 1]);
        // Zero affinity is not positive either.
        assert_eq!(dbscan_ac(&p, &[10, 11], 5.0, 1, &AffinityTable::new()), vec![0, 1]);
    }

    #[test]
    fn link_ratio_examples() {
        let a: Vec<u32> = (0..12).collect();
        let b: Vec<u32> = (2..13).collect(); // shares 10 of 11
        assert!(overlap_ratio(&a, &b) > 0.5);
        let c: Vec<u32> = (0..10).collect();
        let d: Vec<u32> = (7..17).collect();
        assert!((overlap_ratio(&c, &d) - 0.3).abs() < 1e-12);
        let e: Vec<u32> = (0..4).collect();
        let f: Vec<u32> = (2..6).collect();
        assert_eq!(overlap_ratio(&e, &f), 0.5);
    }

    fn cand(frame: usize, members: Vec<u32>, x: f64) -> CandidateObject {
        CandidateObject {
            frame,
            members,
            bbox: BoundingBox::new(x, 100.0, 10.0, 20.0),
            source: Source::AcLarge,
            extended: false,
        }
    }

    #[test]
    fn linking_builds_cofs() {
        let h = Homography::identity();
        let frames: Vec<Vec<CandidateObject>> = (0..10).map(|f| vec![cand(f, (0..8).collect(), f as f64)]).collect();
        let cofs = link_cofs(&frames, &h, 10, 0.5);
        assert_eq!(cofs.len(), 1);
        assert_eq!(cofs[0].entries.len(), 10);

        let frames = vec![vec![cand(0, (0..10).collect(), 0.0)], vec![cand(1, (7..17).collect(), 0.0)]];
        assert_eq!(link_cofs(&frames, &h, 10, 0.5).len(), 2);

        let frames = vec![vec![cand(0, (0..4).collect(), 0.0)], vec![cand(1, (2..6).collect(), 0.0)]];
        assert_eq!(link_cofs(&frames, &h, 10, 0.5).len(), 2, "ratio 0.5 must not link");
    }

    #[test]
    fn cof_speed_and_heading() {
        // 1 px/frame on the identity homography at 10 fps: 10 m/s eastward.
        let h = Homography::identity();
        let frames: Vec<Vec<CandidateObject>> = (0..20).map(|f| vec![cand(f, (0..8).collect(), f as f64)]).collect();
        let cofs = link_cofs(&frames, &h, 10, 0.5);
        let e = &cofs[0].entries[10];
        assert!((e.speed - 10.0).abs() < 1e-9);
        assert_eq!(e.heading, Some([1.0, 0.0]));
    }

    fn stop_and_go_tracks(move_frames: std::ops::Range<usize>, alive: std::ops::Range<usize>) -> Vec<FlowTrack> {
        (0..6)
            .map(|k| {
                let pts: Vec<FramePoint> = alive
                    .clone()
                    .map(|f| {
                        let x = f.clamp(move_frames.start, move_frames.end) as f64 * 5.0;
                        FramePoint::new(100.0 + x + k as f64 * 3.0, 100.0 + (k % 3) as f64 * 4.0)
                    })
                    .collect();
                let mut t = FlowTrack::new(k, alive.start, pts);
                t.compute_moving(10, MOTION_THRESHOLD_PX);
                t
            })
            .collect()
    }

    fn moving_span(tracks: &[FlowTrack], n: usize) -> Vec<Cof> {
        let h = Homography::identity();
        let cfg = ProposalConfig::default();
        let per_frame = propose_candidates(tracks, n, &cfg);
        let mut cofs: Vec<Cof> = link_cofs(&per_frame, &h, 10, cfg.link_ratio).into_iter().filter(|c| c.source == Source::BasicSmall).collect();
        extend_stationary(&mut cofs, tracks, n, &h);
        cofs
    }

    #[test]
    fn extension_forward_after_stop() {
        let tracks = stop_and_go_tracks(10..20, 0..41);
        let cofs = moving_span(&tracks, 41);
        assert_eq!(cofs.len(), 1);
        assert_eq!((cofs[0].start, cofs[0].end()), (0, 41));
        assert!(cofs[0].entries.last().unwrap().candidate.extended);
        assert_eq!(cofs[0].entries.last().unwrap().speed, 0.0);
    }

    #[test]
    fn extension_backward_before_motion() {
        let tracks = stop_and_go_tracks(10..20, 0..21);
        let cofs = moving_span(&tracks, 21);
        assert_eq!(cofs[0].start, 0);
        assert!(cofs[0].entries[0].candidate.extended);
    }

    #[test]
    fn extension_stops_when_tracks_end() {
        let tracks = stop_and_go_tracks(10..20, 0..30);
        let cofs = moving_span(&tracks, 41);
        assert_eq!(cofs[0].end(), 30);
    }

    #[test]
    fn isolated_object_in_both_sources() {
        let tracks = stop_and_go_tracks(0..40, 0..40);
        let cands = propose_candidates(&tracks, 40, &ProposalConfig::default());
        // Affinity is zero on the first frame, so the AC source starts one frame late.
        let f = &cands[5];
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].members, f[1].members);
        assert_ne!(f[0].source, f[1].source);
    }
}
