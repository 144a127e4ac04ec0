//! GPS-object matching.
//!
//! Every frame's hidden states are its candidate objects plus four
//! out-of-frame states, one per image edge. Emissions score the distance
//! between the GPS fix and the candidate's ground position; transitions
//! favour staying on the same COF and, optionally, keeping a similar box
//! shape. The MAP sequence is found by Viterbi in log space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{shape_distance, BoundingBox, FramePoint, Homography, WorldPoint};
use crate::gps::GpsFrame;
use crate::pipeline::PreparedClip;
use crate::proposal::{CofEntry, Proposal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmmParams {
    /// meters
    pub sigma_emission: f64,
    pub p_trans: f64,
    /// meters
    pub sigma_trans: f64,
    pub sigma_shape: f64,
    /// GPS speed (m/s) above which stationary candidates are vetoed.
    pub v_thr1: f64,
    /// Candidate speed (m/s) below which a candidate counts as stationary.
    pub v_thr2: f64,
    /// Floor on the GPS/candidate heading dot product.
    pub theta_thr: f64,
    /// Baseline (s) over which GPS velocity is differenced.
    pub velocity_window_s: f64,
    /// Forward window (s) for the minimum GPS speed.
    pub speed_window_s: f64,
    pub boundary_emission: f64,
    pub boundary_self: f64,
}

impl Default for HmmParams {
    fn default() -> Self {
        Self {
            sigma_emission: 4.0,
            p_trans: 1e-3,
            sigma_trans: 2.0,
            sigma_shape: 0.5,
            v_thr1: 0.8,
            v_thr2: 0.3,
            theta_thr: -0.2,
            velocity_window_s: 1.0,
            speed_window_s: 5.0,
            boundary_emission: 1e-3,
            boundary_self: 0.99,
        }
    }
}

impl HmmParams {
    pub fn validate(&self) -> Result<()> {
        let sigmas = [self.sigma_emission, self.sigma_trans, self.sigma_shape];
        let probs = [self.p_trans, self.boundary_emission, self.boundary_self];
        if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidSpec("HMM sigmas must be positive".into()));
        }
        if probs.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(Error::InvalidSpec("HMM probabilities must lie in (0, 1]".into()));
        }
        if !(-1.0..=1.0).contains(&self.theta_thr) || self.speed_window_s < 0.0 || !(self.velocity_window_s > 0.0) {
            return Err(Error::InvalidSpec("theta_thr must lie in [-1, 1] and GPS windows be positive".into()));
        }
        Ok(())
    }
}

/// Which refinements of the basic HMM are active.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub motion_constraints: bool,
    pub shape_preference: bool,
}

impl MatchOptions {
    pub const BASIC: Self = Self {
        motion_constraints: false,
        shape_preference: false,
    };
    pub const FULL: Self = Self {
        motion_constraints: true,
        shape_preference: true,
    };
}

/// Log of a Gaussian-shaped score `exp(-(d / (2 sigma))^2)`.
pub fn log_gauss(d: f64, sigma: f64) -> f64 {
    let z = d / (2.0 * sigma);
    -(z * z)
}

/// Log emission of a GPS frame for a candidate. The motion vetoes return
/// negative infinity.
pub fn emission_log_prob(gps: &GpsFrame, cand: &CofEntry, params: &HmmParams, constraints: bool) -> f64 {
    if constraints {
        if gps.min_speed > params.v_thr1 && cand.speed < params.v_thr2 {
            return f64::NEG_INFINITY;
        }
        if let (Some(g), Some(c)) = (gps.heading, cand.heading) {
            if g[0] * c[0] + g[1] * c[1] < params.theta_thr {
                return f64::NEG_INFINITY;
            }
        }
    }
    log_gauss(gps.position.distance(&cand.world), params.sigma_emission)
}

pub fn shape_log_prob(a: &BoundingBox, b: &BoundingBox, params: &HmmParams) -> f64 {
    log_gauss(shape_distance(a.w, a.h, b.w, b.h), params.sigma_shape)
}

/// Log transition between candidates on adjacent frames.
pub fn transition_log_prob(a: &CofEntry, b: &CofEntry, same_cof: bool, params: &HmmParams, shape: bool) -> f64 {
    let shape_term = if shape { shape_log_prob(&a.candidate.bbox, &b.candidate.bbox, params) } else { 0.0 };
    if same_cof {
        shape_term
    } else {
        params.p_trans.ln() + log_gauss(a.world.distance(&b.world), params.sigma_trans) + shape_term
    }
}

/// Log emission of a GPS frame for the out-of-frame state at `edge`: the
/// constant `boundary_emission` when the fix is out of view, reduced by the
/// emission Gaussian of the fix's distance to the edge when it is in view.
pub fn boundary_log_prob(gps: &GpsFrame, edge: Edge, params: &HmmParams, homography: &Homography, frame_size: [u32; 2]) -> f64 {
    let base = params.boundary_emission.ln();
    let Some(f) = homography.visible(gps.position, frame_size) else {
        return base;
    };
    match homography.frame_to_world(edge.nearest(f, frame_size)) {
        Ok(w) => base + log_gauss(gps.position.distance(&w), params.sigma_emission),
        Err(_) => base,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Left,
    Right,
    Top,
    Bottom,
}

pub const EDGES: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Top, Edge::Bottom];

impl Edge {
    /// Closest point on this frame edge to `p`.
    pub fn nearest(self, p: FramePoint, size: [u32; 2]) -> FramePoint {
        let (w, h) = (size[0] as f64, size[1] as f64);
        let (x, y) = (p.x.clamp(0.0, w), p.y.clamp(0.0, h));
        match self {
            Edge::Left => FramePoint::new(0.0, y),
            Edge::Right => FramePoint::new(w, y),
            Edge::Top => FramePoint::new(x, 0.0),
            Edge::Bottom => FramePoint::new(x, h),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum State {
    /// `(cof index, entry index)` into the proposal.
    Candidate(usize, usize),
    OutOfFrame(Edge),
}

/// Numeric trellis: log emissions per frame and row-major log transitions
/// between consecutive frames.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trellis {
    pub emissions: Vec<Vec<f64>>,
    /// `transitions[n][i * len(n + 1) + j]` from state `i` at `n` to `j` at `n + 1`.
    pub transitions: Vec<Vec<f64>>,
}

impl Trellis {
    pub fn n_frames(&self) -> usize {
        self.emissions.len()
    }

    pub fn transition(&self, n: usize, i: usize, j: usize) -> f64 {
        self.transitions[n][i * self.emissions[n + 1].len() + j]
    }

    /// Log likelihood of a state path.
    pub fn path_log_likelihood(&self, path: &[usize]) -> f64 {
        let mut ll = self.emissions[0][path[0]];
        for n in 1..path.len() {
            ll += self.transition(n - 1, path[n - 1], path[n]) + self.emissions[n][path[n]];
        }
        ll
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViterbiPath {
    pub states: Vec<usize>,
    pub log_likelihood: f64,
}

/// MAP state sequence. Ties go to the lowest state index, both for the final
/// state and for each back-pointer.
pub fn viterbi(t: &Trellis) -> Result<ViterbiPath> {
    let n = t.n_frames();
    if n == 0 || t.emissions.iter().any(Vec::is_empty) {
        return Err(Error::EmptyClip);
    }
    let mut score = t.emissions[0].clone();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(n - 1);
    for f in 1..n {
        let cols = t.emissions[f].len();
        let mut next = vec![f64::NEG_INFINITY; cols];
        let mut ptr = vec![0usize; cols];
        for (j, (nj, pj)) in next.iter_mut().zip(ptr.iter_mut()).enumerate() {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (i, &s) in score.iter().enumerate() {
                let v = s + t.transitions[f - 1][i * cols + j];
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            *nj = best + t.emissions[f][j];
            *pj = arg;
        }
        score = next;
        back.push(ptr);
    }
    let mut last = 0;
    for (i, &s) in score.iter().enumerate() {
        if s > score[last] {
            last = i;
        }
    }
    let ll = score[last];
    if ll == f64::NEG_INFINITY {
        return Err(Error::AllPathsImpossible);
    }
    let mut states = vec![last; n];
    for f in (1..n).rev() {
        states[f - 1] = back[f - 1][states[f]];
    }
    Ok(ViterbiPath { states, log_likelihood: ll })
}

/// Hidden states per frame with their trellis.
#[derive(Clone, Debug, Default)]
pub struct HmmLattice {
    pub states: Vec<Vec<State>>,
    pub trellis: Trellis,
}

pub struct LatticeInput<'a> {
    pub proposal: &'a Proposal,
    pub gps: &'a [GpsFrame],
    pub homography: &'a Homography,
    pub frame_size: [u32; 2],
}

/// Builds the full lattice: candidates first (in proposal order), then the
/// four edge states, on every frame.
pub fn build_lattice(input: &LatticeInput<'_>, params: &HmmParams, opts: MatchOptions) -> Result<HmmLattice> {
    let n = input.proposal.frames.len();
    if n == 0 {
        return Err(Error::EmptyClip);
    }
    let log_boundary_self = params.boundary_self.ln();
    let log_p_trans = params.p_trans.ln();

    let mut states = Vec::with_capacity(n);
    let mut emissions = Vec::with_capacity(n);
    // Per frame, per candidate: ground position of the nearest point on each edge.
    let mut edge_worlds: Vec<Vec<[Option<WorldPoint>; 4]>> = Vec::with_capacity(n);
    for f in 0..n {
        let mut s: Vec<State> = input.proposal.frames[f].iter().map(|&(c, e)| State::Candidate(c, e)).collect();
        let mut em: Vec<f64> = input
            .proposal
            .frames[f]
            .iter()
            .map(|&r| emission_log_prob(&input.gps[f], input.proposal.entry(r), params, opts.motion_constraints))
            .collect();
        let ew = input
            .proposal
            .frames[f]
            .iter()
            .map(|&r| {
                let bc = input.proposal.entry(r).candidate.bbox.bottom_center();
                EDGES.map(|e| input.homography.frame_to_world(e.nearest(bc, input.frame_size)).ok())
            })
            .collect();
        s.extend(EDGES.iter().map(|&e| State::OutOfFrame(e)));
        em.extend(EDGES.map(|e| boundary_log_prob(&input.gps[f], e, params, input.homography, input.frame_size)));
        states.push(s);
        emissions.push(em);
        edge_worlds.push(ew);
    }

    let edge_index = |e: Edge| EDGES.iter().position(|&x| x == e).expect("edge");
    let mut transitions = Vec::with_capacity(n - 1);
    for f in 0..n - 1 {
        let (from, to) = (&states[f], &states[f + 1]);
        let mut m = vec![f64::NEG_INFINITY; from.len() * to.len()];
        for (i, a) in from.iter().enumerate() {
            for (j, b) in to.iter().enumerate() {
                m[i * to.len() + j] = match (*a, *b) {
                    (State::Candidate(ca, ea), State::Candidate(cb, eb)) => {
                        let same = ca == cb && eb == ea + 1;
                        transition_log_prob(input.proposal.entry((ca, ea)), input.proposal.entry((cb, eb)), same, params, opts.shape_preference)
                    }
                    (State::OutOfFrame(_), State::OutOfFrame(_)) => log_boundary_self,
                    (State::Candidate(ca, ea), State::OutOfFrame(e)) => match edge_worlds[f][i][edge_index(e)] {
                        Some(w) => log_p_trans + log_gauss(input.proposal.entry((ca, ea)).world.distance(&w), params.sigma_trans),
                        None => f64::NEG_INFINITY,
                    },
                    (State::OutOfFrame(e), State::Candidate(cb, eb)) => match edge_worlds[f + 1][j][edge_index(e)] {
                        Some(w) => log_p_trans + log_gauss(input.proposal.entry((cb, eb)).world.distance(&w), params.sigma_trans),
                        None => f64::NEG_INFINITY,
                    },
                };
            }
        }
        transitions.push(m);
    }
    Ok(HmmLattice {
        states,
        trellis: Trellis { emissions, transitions },
    })
}

/// One frame's matching decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Candidate { cof: usize, bbox: BoundingBox },
    OutOfFrame,
}

impl Selection {
    pub fn bbox(&self) -> Option<BoundingBox> {
        match self {
            Selection::Candidate { bbox, .. } => Some(*bbox),
            Selection::OutOfFrame => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub frames: Vec<Selection>,
    /// Per-frame contribution (emission plus incoming transition).
    pub contributions: Vec<f64>,
    pub log_likelihood: f64,
}

impl MatchResult {
    pub fn boxes(&self) -> Vec<Option<BoundingBox>> {
        self.frames.iter().map(Selection::bbox).collect()
    }
}

pub fn match_target(input: &LatticeInput<'_>, params: &HmmParams, opts: MatchOptions) -> Result<MatchResult> {
    let lattice = build_lattice(input, params, opts)?;
    let path = viterbi(&lattice.trellis)?;
    let t = &lattice.trellis;
    let contributions = (0..path.states.len())
        .map(|f| {
            let e = t.emissions[f][path.states[f]];
            if f == 0 {
                e
            } else {
                e + t.transition(f - 1, path.states[f - 1], path.states[f])
            }
        })
        .collect();
    let frames = path
        .states
        .iter()
        .enumerate()
        .map(|(f, &s)| match lattice.states[f][s] {
            State::Candidate(c, e) => Selection::Candidate {
                cof: input.proposal.cofs[c].id,
                bbox: input.proposal.cofs[c].entries[e].candidate.bbox,
            },
            State::OutOfFrame(_) => Selection::OutOfFrame,
        })
        .collect();
    Ok(MatchResult {
        frames,
        contributions,
        log_likelihood: path.log_likelihood,
    })
}

/// Per-frame nearest candidate to the GPS fix; frames without candidates are
/// out-of-frame. Ties go to the earlier candidate.
pub fn nearest_box_baseline(proposal: &Proposal, gps: &[GpsFrame]) -> MatchResult {
    let frames: Vec<(Selection, f64)> = proposal
        .frames
        .iter()
        .enumerate()
        .map(|(f, refs)| {
            let mut best: Option<(usize, f64)> = None;
            for (k, &r) in refs.iter().enumerate() {
                let d = gps[f].position.distance(&proposal.entry(r).world);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((k, d));
                }
            }
            match best {
                Some((k, d)) => {
                    let (c, e) = refs[k];
                    (
                        Selection::Candidate {
                            cof: proposal.cofs[c].id,
                            bbox: proposal.cofs[c].entries[e].candidate.bbox,
                        },
                        -d,
                    )
                }
                None => (Selection::OutOfFrame, 0.0),
            }
        })
        .collect();
    let (frames, contributions): (Vec<_>, Vec<_>) = frames.into_iter().unzip();
    MatchResult {
        log_likelihood: contributions.iter().sum(),
        frames,
        contributions,
    }
}

/// Ranges sampled by the hyper-parameter search. Scale parameters and
/// probabilities are log-uniform, thresholds uniform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub sigma_emission: [f64; 2],
    pub sigma_trans: [f64; 2],
    pub sigma_shape: [f64; 2],
    pub p_trans: [f64; 2],
    pub boundary_emission: [f64; 2],
    pub v_thr1: [f64; 2],
    pub v_thr2: [f64; 2],
    pub theta_thr: [f64; 2],
    pub velocity_window_s: [f64; 2],
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            sigma_emission: [0.5, 20.0],
            sigma_trans: [1.0, 20.0],
            sigma_shape: [0.05, 5.0],
            p_trans: [1e-6, 0.5],
            boundary_emission: [1e-6, 0.5],
            v_thr1: [0.2, 3.0],
            v_thr2: [0.0, 1.0],
            theta_thr: [-1.0, 0.5],
            velocity_window_s: [1.0, 8.0],
        }
    }
}

impl SearchSpace {
    pub fn sample(&self, rng: &mut impl Rng) -> HmmParams {
        let log_u = |rng: &mut dyn rand::RngCore, r: [f64; 2]| (r[0].ln() + rng.random::<f64>() * (r[1].ln() - r[0].ln())).exp();
        let uni = |rng: &mut dyn rand::RngCore, r: [f64; 2]| r[0] + rng.random::<f64>() * (r[1] - r[0]);
        HmmParams {
            sigma_emission: log_u(rng, self.sigma_emission),
            sigma_trans: log_u(rng, self.sigma_trans),
            sigma_shape: log_u(rng, self.sigma_shape),
            p_trans: log_u(rng, self.p_trans),
            boundary_emission: log_u(rng, self.boundary_emission),
            v_thr1: uni(rng, self.v_thr1),
            v_thr2: uni(rng, self.v_thr2),
            theta_thr: uni(rng, self.theta_thr),
            velocity_window_s: uni(rng, self.velocity_window_s),
            ..HmmParams::default()
        }
    }

    /// `p` with the motion and shape terms at their most permissive in-range
    /// settings, so a richer model can start from a simpler model's optimum.
    pub fn loosest(&self, p: &HmmParams) -> HmmParams {
        HmmParams {
            v_thr1: self.v_thr1[1],
            v_thr2: self.v_thr2[0],
            theta_thr: self.theta_thr[0],
            sigma_shape: self.sigma_shape[1],
            ..p.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub params: HmmParams,
    pub objective: f64,
    pub trial: usize,
    pub trials: usize,
}

/// Mean precision-at-IoU-0.5 of the HMM over clips with ground truth.
pub fn matching_objective(clips: &[&PreparedClip], params: &HmmParams, opts: MatchOptions) -> f64 {
    if clips.is_empty() {
        return 0.0;
    }
    let total: f64 = clips
        .iter()
        .map(|c| match c.run_matching(params, opts) {
            Ok(m) => crate::evaluation::clip_metrics(&m.boxes(), &c.clip.ground_truth).map_or(0.0, |cm| cm.precision_at_iou_05),
            Err(_) => 0.0,
        })
        .sum();
    total / clips.len() as f64
}

/// Seeded random search. Trial `k` always draws the same parameters for a
/// given seed, so a larger budget searches a superset. The trial list starts
/// with `warm_start` (typically the optimum of a simpler model), then the
/// default parameters, then random draws; `budget` counts all of them.
pub fn search_hyperparams(clips: &[&PreparedClip], space: &SearchSpace, budget: usize, seed: u64, opts: MatchOptions, warm_start: &[HmmParams], exec: Execution) -> SearchOutcome {
    let budget = budget.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates = Vec::new();
    for w in warm_start {
        candidates.push(w.clone());
        if opts.motion_constraints || opts.shape_preference {
            candidates.push(space.loosest(w));
        }
    }
    candidates.push(HmmParams::default());
    while candidates.len() < budget {
        candidates.push(space.sample(&mut rng));
    }
    candidates.truncate(budget);
    let scores = exec.map(&candidates, |p| matching_objective(clips, p, opts));
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    SearchOutcome {
        params: candidates[best].clone(),
        objective: scores[best],
        trial: best,
        trials: budget,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proposal::{CandidateObject, Source};

    fn entry(x: f64, y: f64, speed: f64, heading: Option<[f64; 2]>, w: f64, h: f64) -> CofEntry {
        CofEntry {
            candidate: CandidateObject {
                frame: 0,
                members: vec![1, 2, 3],
                bbox: BoundingBox::new(0.0, 0.0, w, h),
                source: Source::AcLarge,
                extended: false,
            },
            world: WorldPoint::new(x, y),
            speed,
            heading,
        }
    }

    fn gps(x: f64, y: f64, speed: f64, min_speed: f64, heading: Option<[f64; 2]>) -> GpsFrame {
        GpsFrame {
            position: WorldPoint::new(x, y),
            speed,
            heading,
            min_speed,
        }
    }

    #[test]
    fn emission_examples() {
        let p = HmmParams {
            sigma_emission: 1.5,
            v_thr1: 1.0,
            v_thr2: 0.3,
            ..HmmParams::default()
        };
        let g = gps(0.0, 0.0, 0.0, 0.0, None);
        assert_eq!(emission_log_prob(&g, &entry(0.0, 0.0, 0.0, None, 1.0, 1.0), &p, true), 0.0);
        let e = emission_log_prob(&g, &entry(3.0, 0.0, 0.0, None, 1.0, 1.0), &p, false);
        assert!((e + 1.0).abs() < 1e-12);
        assert!((e.exp() - (-1.0f64).exp()).abs() < 1e-12);
        let fast = gps(0.0, 0.0, 3.0, 3.0, Some([1.0, 0.0]));
        assert_eq!(emission_log_prob(&fast, &entry(0.0, 0.0, 0.1, None, 1.0, 1.0), &p, true), f64::NEG_INFINITY);
        assert_eq!(emission_log_prob(&fast, &entry(0.0, 0.0, 0.1, None, 1.0, 1.0), &p, false), 0.0);
        // Opposite heading.
        let opp = entry(0.0, 0.0, 2.0, Some([-1.0, 0.0]), 1.0, 1.0);
        assert_eq!(emission_log_prob(&fast, &opp, &p, true), f64::NEG_INFINITY);
        let same = entry(0.0, 0.0, 2.0, Some([1.0, 0.0]), 1.0, 1.0);
        assert_eq!(emission_log_prob(&fast, &same, &p, true), 0.0);
    }

    #[test]
    fn transition_examples() {
        let p = HmmParams {
            sigma_trans: 2.0,
            sigma_shape: 0.5,
            p_trans: 0.01,
            ..HmmParams::default()
        };
        let a = entry(0.0, 0.0, 0.0, None, 2.0, 2.0);
        assert_eq!(transition_log_prob(&a, &a, true, &p, true), 0.0);
        let t = transition_log_prob(&a, &a, false, &p, true);
        assert!((t - p.p_trans.ln()).abs() < 1e-12);
        let b = entry(4.0, 0.0, 0.0, None, 4.0, 2.0);
        let t = transition_log_prob(&a, &b, false, &p, true);
        assert!((t - (p.p_trans.ln() - 2.0)).abs() < 1e-12);
        let t = transition_log_prob(&a, &b, false, &p, false);
        assert!((t - (p.p_trans.ln() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn same_object_is_preferred() {
        let p = HmmParams::default();
        let a = entry(0.0, 0.0, 0.0, None, 2.0, 2.0);
        let b = entry(0.5, 0.0, 0.0, None, 2.0, 2.0);
        assert!(transition_log_prob(&a, &b, true, &p, true) > transition_log_prob(&a, &b, false, &p, true));
    }

    #[test]
    fn emission_decreases_with_distance() {
        let p = HmmParams::default();
        let g = gps(0.0, 0.0, 0.0, 0.0, None);
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let e = emission_log_prob(&g, &entry(k as f64 * 0.3, 0.0, 0.0, None, 1.0, 1.0), &p, false);
            assert!(e < prev);
            prev = e;
        }
    }

    #[test]
    fn viterbi_single_frame() {
        let t = Trellis {
            emissions: vec![vec![-1.0, -3.0]],
            transitions: vec![],
        };
        let p = viterbi(&t).unwrap();
        assert_eq!(p.states, vec![0]);
        assert_eq!(p.log_likelihood, -1.0);
    }

    #[test]
    fn viterbi_impossible() {
        let t = Trellis {
            emissions: vec![vec![0.0], vec![0.0]],
            transitions: vec![vec![f64::NEG_INFINITY]],
        };
        assert!(matches!(viterbi(&t), Err(Error::AllPathsImpossible)));
    }

    #[test]
    fn viterbi_tie_breaks_low() {
        let t = Trellis {
            emissions: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            transitions: vec![vec![0.0; 4]],
        };
        assert_eq!(viterbi(&t).unwrap().states, vec![0, 0]);
    }

    #[test]
    fn lattice_counts_and_boundary_states() {
        let h = Homography::identity();
        let n = 3;
        let mut cofs = Vec::new();
        for k in 0..2 {
            cofs.push(crate::proposal::Cof {
                id: k,
                source: Source::AcLarge,
                start: 0,
                entries: (0..n)
                    .map(|f| {
                        let mut e = entry(10.0 * k as f64 + f as f64, 50.0, 1.0, Some([1.0, 0.0]), 4.0, 6.0);
                        e.candidate.frame = f;
                        e.candidate.bbox = BoundingBox::new(e.world.x, e.world.y - 3.0, 4.0, 6.0);
                        e
                    })
                    .collect(),
            });
        }
        let proposal = Proposal::new(cofs, n);
        let g: Vec<GpsFrame> = (0..n).map(|f| gps(f as f64, 50.0, 1.0, 1.0, Some([1.0, 0.0]))).collect();
        let input = LatticeInput {
            proposal: &proposal,
            gps: &g,
            homography: &h,
            frame_size: [100, 100],
        };
        let l = build_lattice(&input, &HmmParams::default(), MatchOptions::FULL).unwrap();
        assert!(l.states.iter().all(|s| s.len() == 6));
        assert_eq!(l.trellis.transitions.len(), 2);
        assert!(l.trellis.transitions.iter().all(|t| t.len() == 36));
        assert!(l.trellis.emissions.iter().flatten().all(|&e| e <= 0.0));
        assert!(l.trellis.transitions.iter().flatten().all(|&e| e <= 0.0));
        let m = match_target(&input, &HmmParams::default(), MatchOptions::FULL).unwrap();
        assert!(m.frames.iter().all(|s| matches!(s, Selection::Candidate { cof: 0, .. })));

        let empty = Proposal::new(vec![], 2);
        let g2 = vec![gps(0.0, 0.0, 0.0, 0.0, None); 2];
        let input = LatticeInput {
            proposal: &empty,
            gps: &g2,
            homography: &h,
            frame_size: [100, 100],
        };
        let l = build_lattice(&input, &HmmParams::default(), MatchOptions::FULL).unwrap();
        assert!(l.states.iter().all(|s| s.len() == 4));
        let m = match_target(&input, &HmmParams::default(), MatchOptions::FULL).unwrap();
        assert!(m.frames.iter().all(|s| *s == Selection::OutOfFrame));
    }

    #[test]
    fn nearest_box_examples() {
        let mk = |xs: &[f64]| {
            let cofs = xs
                .iter()
                .enumerate()
                .map(|(k, &x)| crate::proposal::Cof {
                    id: k,
                    source: Source::AcLarge,
                    start: 0,
                    entries: vec![entry(x, 0.0, 0.0, None, 1.0, 1.0)],
                })
                .collect();
            Proposal::new(cofs, 1)
        };
        let g = vec![gps(0.0, 0.0, 0.0, 0.0, None)];
        assert!(matches!(nearest_box_baseline(&mk(&[7.0]), &g).frames[0], Selection::Candidate { cof: 0, .. }));
        assert!(matches!(nearest_box_baseline(&mk(&[5.0, 1.0]), &g).frames[0], Selection::Candidate { cof: 1, .. }));
        assert_eq!(nearest_box_baseline(&Proposal::new(vec![], 1), &g).frames[0], Selection::OutOfFrame);
    }

    #[test]
    fn search_space_samples_in_range() {
        let s = SearchSpace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = s.sample(&mut rng);
            p.validate().unwrap();
            assert!(p.sigma_emission >= 0.5 && p.sigma_emission <= 20.0);
            assert!(p.theta_thr >= -1.0 && p.theta_thr <= 0.5);
        }
    }
}
