//! Stage 4: per-box quality scores and ranking.
//!
//! A box sequence is high-passed (the sequence minus its moving average),
//! then three convolutions of growing kernel length and three dense layers
//! predict a score in (0, 1) per frame. The first convolution's output is
//! concatenated into the input of the last. Training regresses the score on
//! the box's IoU against ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{median, IOU_THRESHOLD};
use crate::geometry::{iou, normalized_distance, BoundingBox};
use crate::nn::{self, Adam, Checkpoint, ParamStore, Tensor};
use crate::refine::{smooth_tensor, window_frames, BoxSequence, Normalizer};

/// `x - smooth(x)` per channel.
pub fn high_pass(x: &BoxSequence, window_s: f64) -> Tensor {
    let t = Tensor::from_rows(&x.rows);
    let s = smooth_tensor(&t, window_frames(window_s, x.fps));
    t.zip_map(&s, |a, b| a - b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankerConfig {
    pub high_pass_s: f64,
    pub kernels_s: [f64; 3],
    pub channels: usize,
    pub hidden: [usize; 2],
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self {
            high_pass_s: 1.0,
            kernels_s: [0.5, 1.0, 2.0],
            channels: 8,
            hidden: [16, 8],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Layers {
    conv: [(usize, usize); 3],
    dense: [(usize, usize); 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankerModel {
    pub config: RankerConfig,
    pub fps: u32,
    pub store: ParamStore,
    layers: Layers,
}

#[derive(Serialize, Deserialize)]
struct RankerFile {
    config: RankerConfig,
    fps: u32,
    checkpoint: Checkpoint,
}

struct Cache {
    feat: Tensor,
    pre: [Tensor; 3],
    act: [Tensor; 3],
    cat: Tensor,
    dpre: [Tensor; 2],
    dact: [Tensor; 2],
    out: Tensor,
}

impl RankerModel {
    pub fn new(config: RankerConfig, fps: u32, seed: u64) -> Result<Self> {
        if fps == 0 || config.channels == 0 || config.hidden.contains(&0) || !(config.high_pass_s > 0.0) || config.kernels_s.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::InvalidSpec("ranker needs positive windows, widths and fps".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new(seed);
        let c = config.channels;
        let ks: Vec<usize> = config.kernels_s.iter().map(|&k| window_frames(k, fps)).collect();
        let cins = [4, c, 2 * c];
        let mut conv = [(0, 0); 3];
        for i in 0..3 {
            let rows = ks[i] * cins[i];
            conv[i] = (
                store.add(&format!("conv{}.w", i + 1), nn::glorot(rows, c, rows, c, &mut rng)),
                store.add(&format!("conv{}.b", i + 1), Tensor::zeros(1, c)),
            );
        }
        let dims = [c, config.hidden[0], config.hidden[1], 1];
        let mut dense = [(0, 0); 3];
        for i in 0..3 {
            dense[i] = (
                store.add(&format!("dense{}.w", i + 1), nn::glorot(dims[i], dims[i + 1], dims[i], dims[i + 1], &mut rng)),
                store.add(&format!("dense{}.b", i + 1), Tensor::zeros(1, dims[i + 1])),
            );
        }
        Ok(Self {
            config,
            fps,
            store,
            layers: Layers { conv, dense },
        })
    }

    fn kernel(&self, i: usize) -> usize {
        window_frames(self.config.kernels_s[i], self.fps)
    }

    /// High-passed boxes in units of the mean box size.
    pub fn features(&self, x: &BoxSequence) -> Tensor {
        let norm = Normalizer::fit(&x.rows);
        let mut f = high_pass(x, self.config.high_pass_s);
        for i in 0..f.n {
            for c in 0..4 {
                *f.at_mut(i, c) /= norm.scale[c];
            }
        }
        f
    }

    fn forward(&self, feat: Tensor) -> Cache {
        let p = |h| self.store.param(h);
        let l = self.layers;
        let conv = |x: &Tensor, i: usize| nn::conv1d(x, p(l.conv[i].0), p(l.conv[i].1), self.kernel(i)).expect("layer shapes fixed at construction");
        let pre0 = conv(&feat, 0);
        let act0 = nn::relu(&pre0);
        let pre1 = conv(&act0, 1);
        let act1 = nn::relu(&pre1);
        let cat = act0.concat(&act1).expect("same length");
        let pre2 = conv(&cat, 2);
        let act2 = nn::relu(&pre2);
        let dense = |x: &Tensor, i: usize| nn::dense(x, p(l.dense[i].0), p(l.dense[i].1)).expect("layer shapes fixed at construction");
        let dp0 = dense(&act2, 0);
        let da0 = nn::relu(&dp0);
        let dp1 = dense(&da0, 1);
        let da1 = nn::relu(&dp1);
        let out = nn::sigmoid(&dense(&da1, 2));
        Cache {
            feat,
            pre: [pre0, pre1, pre2],
            act: [act0, act1, act2],
            cat,
            dpre: [dp0, dp1],
            dact: [da0, da1],
            out,
        }
    }

    fn backward(&mut self, c: &Cache, dout: &Tensor) {
        let l = self.layers;
        let dz = nn::sigmoid_backward(&c.out, dout);
        let (dx, dw, db) = nn::dense_backward(&c.dact[1], self.store.param(l.dense[2].0), &dz);
        self.store.accumulate(l.dense[2].0, &dw);
        self.store.accumulate(l.dense[2].1, &db);
        let dx = nn::relu_backward(&c.dpre[1], &dx);
        let (dx, dw, db) = nn::dense_backward(&c.dact[0], self.store.param(l.dense[1].0), &dx);
        self.store.accumulate(l.dense[1].0, &dw);
        self.store.accumulate(l.dense[1].1, &db);
        let dx = nn::relu_backward(&c.dpre[0], &dx);
        let (dx, dw, db) = nn::dense_backward(&c.act[2], self.store.param(l.dense[0].0), &dx);
        self.store.accumulate(l.dense[0].0, &dw);
        self.store.accumulate(l.dense[0].1, &db);
        let dx = nn::relu_backward(&c.pre[2], &dx);
        let (dcat, dw, db) = nn::conv1d_backward(&c.cat, self.store.param(l.conv[2].0), self.kernel(2), &dx);
        self.store.accumulate(l.conv[2].0, &dw);
        self.store.accumulate(l.conv[2].1, &db);
        let (mut da0, da1) = dcat.split(self.config.channels);
        let dx = nn::relu_backward(&c.pre[1], &da1);
        let (d0, dw, db) = nn::conv1d_backward(&c.act[0], self.store.param(l.conv[1].0), self.kernel(1), &dx);
        self.store.accumulate(l.conv[1].0, &dw);
        self.store.accumulate(l.conv[1].1, &db);
        da0.add_assign(&d0);
        let dx = nn::relu_backward(&c.pre[0], &da0);
        let (_, dw, db) = nn::conv1d_backward(&c.feat, self.store.param(l.conv[0].0), self.kernel(0), &dx);
        self.store.accumulate(l.conv[0].0, &dw);
        self.store.accumulate(l.conv[0].1, &db);
    }

    /// One score in (0, 1) per frame.
    pub fn score_quality(&self, x: &BoxSequence) -> Result<Vec<f64>> {
        if x.fps != self.fps {
            return Err(Error::shape("score fps", self.fps, x.fps));
        }
        Ok(self.forward(self.features(x)).out.data)
    }

    /// L2 loss of one labelled sequence.
    pub fn loss(&self, x: &BoxSequence, labels: &[f64]) -> Result<f64> {
        self.clone().sample_loss(x, labels, false)
    }

    /// L2 loss with its gradient for every parameter, in store order.
    pub fn loss_with_gradients(&self, x: &BoxSequence, labels: &[f64]) -> Result<(f64, Vec<Tensor>)> {
        let mut m = self.clone();
        m.store.zero_grad();
        let loss = m.sample_loss(x, labels, true)?;
        Ok((loss, (0..m.store.len()).map(|h| m.store.grad(h).clone()).collect()))
    }

    fn sample_loss(&mut self, x: &BoxSequence, labels: &[f64], grad: bool) -> Result<f64> {
        let c = self.forward(self.features(x));
        let target = Tensor::from_vec(labels.len(), 1, labels.to_vec())?;
        let (loss, d) = nn::loss_l2(&c.out, &target)?;
        if grad {
            self.backward(&c, &d);
        }
        Ok(loss)
    }

    /// Sets the output bias, e.g. to saturate all scores.
    pub fn set_output_bias(&mut self, b: f64) {
        let h = self.layers.dense[2].1;
        self.store.param_mut(h).data.fill(b);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&RankerFile {
            config: self.config.clone(),
            fps: self.fps,
            checkpoint: self.store.checkpoint(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: RankerFile = serde_json::from_str(text)?;
        let mut m = Self::new(f.config, f.fps, f.checkpoint.seed)?;
        m.store.restore(&f.checkpoint)?;
        Ok(m)
    }
}

/// A box sequence with its per-frame quality labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSequence {
    pub boxes: BoxSequence,
    pub labels: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankerTrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub crop_s: f64,
    pub lr: f64,
}

impl Default for RankerTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch: 8,
            crop_s: 40.0,
            lr: 3e-3,
        }
    }
}

fn check_samples(samples: &[LabeledSequence]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidSpec("no ranker training sequences".into()));
    }
    for s in samples {
        if s.labels.len() != s.boxes.len() {
            return Err(Error::shape("ranker labels", s.boxes.len(), s.labels.len()));
        }
        if s.labels.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::InvalidSpec("ranker labels must lie in [0, 1]".into()));
        }
    }
    Ok(())
}

/// Mean L2 loss over whole sequences.
pub fn ranker_loss(model: &RankerModel, samples: &[LabeledSequence]) -> Result<f64> {
    check_samples(samples)?;
    let mut m = model.clone();
    let mut total = 0.0;
    for s in samples {
        total += m.sample_loss(&s.boxes, &s.labels, false)?;
    }
    Ok(total / samples.len() as f64)
}

pub fn train_ranker(samples: &[LabeledSequence], config: &RankerConfig, train: &RankerTrainConfig, seed: u64) -> Result<(RankerModel, Vec<f64>)> {
    check_samples(samples)?;
    let fps = samples[0].boxes.fps;
    if samples.iter().any(|s| s.boxes.fps != fps) {
        return Err(Error::InvalidSpec("ranker samples must share one frame rate".into()));
    }
    let mut model = RankerModel::new(config.clone(), fps, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let crop = ((train.crop_s * fps as f64).round() as usize).max(1);
    let opt = Adam::default();
    let batch = train.batch.max(1);
    let mut curve = Vec::with_capacity(train.epochs);
    for epoch in 0..train.epochs {
        model.store.zero_grad();
        let mut loss = 0.0;
        for _ in 0..batch {
            let s = &samples[rng.random_range(0..samples.len())];
            let len = s.boxes.len().min(crop);
            let start = rng.random_range(0..=s.boxes.len() - len);
            let part = BoxSequence {
                fps,
                rows: s.boxes.rows[start..start + len].to_vec(),
            };
            loss += model.sample_loss(&part, &s.labels[start..start + len], true)?;
        }
        loss /= batch as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        model.store.scale_grad(1.0 / batch as f64);
        model.store.adam_step(&opt, nn::cosine_lr(train.lr, epoch, train.epochs));
        curve.push(loss);
    }
    Ok((model, curve))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Intra,
    #[default]
    Inter,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredAnnotation {
    pub clip: usize,
    pub frame: usize,
    pub bbox: BoundingBox,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedAnnotation {
    pub clip: usize,
    pub frame: usize,
    pub bbox: BoundingBox,
    pub score: f64,
    /// `100 * position / pool size`, position 0 being the best box; in [0, 100).
    pub percentile: f64,
}

/// Ranks by score, highest first, ties broken by `(clip, frame)`. Intra
/// ranking forms one pool per clip, inter ranking a single pool. Output is
/// in pool order then rank order.
pub fn rank(annotations: &[ScoredAnnotation], policy: Policy) -> Vec<RankedAnnotation> {
    let mut order: Vec<&ScoredAnnotation> = annotations.iter().collect();
    let by_quality = |a: &&ScoredAnnotation, b: &&ScoredAnnotation| b.score.total_cmp(&a.score).then(a.clip.cmp(&b.clip)).then(a.frame.cmp(&b.frame));
    match policy {
        Policy::Inter => order.sort_by(by_quality),
        Policy::Intra => order.sort_by(|a, b| a.clip.cmp(&b.clip).then_with(|| by_quality(a, b))),
    }
    let mut out = Vec::with_capacity(order.len());
    let mut start = 0;
    while start < order.len() {
        let end = match policy {
            Policy::Inter => order.len(),
            Policy::Intra => start + order[start..].iter().take_while(|a| a.clip == order[start].clip).count(),
        };
        let pool = (end - start) as f64;
        for (pos, a) in order[start..end].iter().enumerate() {
            out.push(RankedAnnotation {
                clip: a.clip,
                frame: a.frame,
                bbox: a.bbox,
                score: a.score,
                percentile: 100.0 * pos as f64 / pool,
            });
        }
        start = end;
    }
    out
}

/// The annotations in the best `percent` of their pool.
pub fn keep_top(ranked: &[RankedAnnotation], percent: f64) -> Vec<RankedAnnotation> {
    ranked.iter().filter(|a| a.percentile < percent).copied().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurificationRow {
    pub fraction: f64,
    pub kept: usize,
    pub precision_at_iou_05: f64,
    pub median_nd: Option<f64>,
}

/// Precision and median ND over the kept top fraction of each pool. A kept
/// box where the target is absent counts as wrong.
pub fn purification_curve(ranked: &[RankedAnnotation], gt: impl Fn(usize, usize) -> Option<BoundingBox>, fractions: &[f64]) -> Vec<PurificationRow> {
    fractions
        .iter()
        .map(|&f| {
            let kept = keep_top(ranked, 100.0 * f);
            let mut correct = 0;
            let mut nds = Vec::new();
            for a in &kept {
                if let Some(g) = gt(a.clip, a.frame) {
                    if iou(&a.bbox, &g) > IOU_THRESHOLD {
                        correct += 1;
                    }
                    nds.push(normalized_distance(&a.bbox, &g));
                }
            }
            PurificationRow {
                fraction: f,
                kept: kept.len(),
                precision_at_iou_05: if kept.is_empty() { 0.0 } else { correct as f64 / kept.len() as f64 },
                median_nd: median(&nds),
            }
        })
        .collect()
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; `None` for fewer than two points or a constant input.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let (mut va, mut vb) = (0.0, 0.0);
    for i in 0..a.len() {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma).powi(2);
        vb += (rb[i] - mb).powi(2);
    }
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tests::grad_error;

    fn ann(clip: usize, frame: usize, score: f64) -> ScoredAnnotation {
        ScoredAnnotation {
            clip,
            frame,
            bbox: BoundingBox::new(frame as f64, 0.0, 10.0, 10.0),
            score,
        }
    }

    #[test]
    fn high_pass_examples() {
        let x = BoxSequence::new(3, (0..5).map(|i| [if i == 2 { 3.0 } else { 0.0 }, 7.0, 1.0, 1.0]).collect()).unwrap();
        let h = high_pass(&x, 1.0);
        let col: Vec<f64> = (0..5).map(|i| h.at(i, 0)).collect();
        assert_eq!(col, vec![0.0, -1.0, 2.0, -1.0, 0.0]);
        assert!((0..5).all(|i| h.at(i, 1) == 0.0));
        let shifted = BoxSequence::new(3, x.rows.iter().map(|r| [r[0] + 8.0, r[1], r[2], r[3]]).collect()).unwrap();
        let hs = high_pass(&shifted, 1.0);
        for (a, b) in h.data.iter().zip(&hs.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn wobbly(n: usize, phase: f64) -> BoxSequence {
        BoxSequence::new(
            10,
            (0..n)
                .map(|i| {
                    let t = i as f64 + phase;
                    [200.0 + 2.0 * t + (t * 0.7).sin() * 6.0, 150.0 + (t * 0.4).cos() * 5.0, 40.0 + (t * 1.1).sin() * 6.0, 90.0 + (t * 0.5).cos() * 8.0]
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn scores_are_bounded_and_saturate() {
        let mut m = RankerModel::new(RankerConfig::default(), 10, 1).unwrap();
        let x = wobbly(30, 0.0);
        let s = m.score_quality(&x).unwrap();
        assert_eq!(s.len(), 30);
        assert!(s.iter().all(|v| *v > 0.0 && *v < 1.0));
        assert_eq!(s, m.score_quality(&x).unwrap());
        m.set_output_bias(1e6);
        assert!(m.score_quality(&x).unwrap().iter().all(|v| *v == 1.0));
        let back = RankerModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = RankerConfig {
            channels: 3,
            hidden: [4, 3],
            kernels_s: [0.3, 0.5, 0.7],
            ..RankerConfig::default()
        };
        let mut m = RankerModel::new(cfg, 10, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for h in 0..m.store.len() {
            if m.store.name(h).ends_with(".b") {
                m.store.param_mut(h).data.iter_mut().for_each(|v| *v = rng.random_range(0.05..0.3));
            }
        }
        let x = wobbly(14, 0.3);
        let labels: Vec<f64> = (0..14).map(|_| rng.random::<f64>()).collect();
        m.store.zero_grad();
        m.sample_loss(&x, &labels, true).unwrap();
        for h in 0..m.store.len() {
            let g = m.store.grad(h).clone();
            let p = m.store.param(h).clone();
            let err = grad_error(&p, &g, |q| {
                let mut mm = m.clone();
                *mm.store.param_mut(h) = q.clone();
                mm.sample_loss(&x, &labels, false).unwrap()
            });
            assert!(err < 1e-4, "{} {err}", m.store.name(h));
        }
    }

    #[test]
    fn training_is_seeded_and_descends() {
        let samples: Vec<LabeledSequence> = (0..4)
            .map(|k| {
                let boxes = wobbly(60, k as f64);
                let labels = (0..60).map(|i| if (i / 10 + k) % 2 == 0 { 0.9 } else { 0.2 }).collect();
                LabeledSequence { boxes, labels }
            })
            .collect();
        let cfg = RankerConfig::default();
        let zero = RankerTrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let (m0, _) = train_ranker(&samples, &cfg, &zero, 3).unwrap();
        assert_eq!(m0, RankerModel::new(cfg.clone(), 10, 3).unwrap());
        let tc = RankerTrainConfig {
            epochs: 60,
            ..Default::default()
        };
        let (a, ca) = train_ranker(&samples, &cfg, &tc, 3).unwrap();
        let (b, cb) = train_ranker(&samples, &cfg, &tc, 3).unwrap();
        assert_eq!((a.clone(), ca), (b, cb));
        assert!(ranker_loss(&a, &samples).unwrap() < ranker_loss(&m0, &samples).unwrap());
        let bad = vec![LabeledSequence {
            boxes: wobbly(5, 0.0),
            labels: vec![1.5; 5],
        }];
        assert!(train_ranker(&bad, &cfg, &tc, 3).is_err());
    }

    #[test]
    fn ranking_examples() {
        let one: Vec<_> = (0..6).map(|f| ann(0, f, (f * 7 % 5) as f64)).collect();
        assert_eq!(rank(&one, Policy::Intra), rank(&one, Policy::Inter));

        let mut two: Vec<_> = (0..4).map(|f| ann(0, f, 0.9 - f as f64 * 0.01)).collect();
        two.extend((0..4).map(|f| ann(1, f, 0.5 - f as f64 * 0.01)));
        let inter = keep_top(&rank(&two, Policy::Inter), 50.0);
        assert!(inter.len() == 4 && inter.iter().all(|a| a.clip == 0));
        let intra = keep_top(&rank(&two, Policy::Intra), 50.0);
        assert_eq!(intra.iter().filter(|a| a.clip == 0).count(), 2);
        assert_eq!(intra.iter().filter(|a| a.clip == 1).count(), 2);

        let flat: Vec<_> = [(1, 3), (0, 5), (1, 0), (0, 2)].iter().map(|&(c, f)| ann(c, f, 0.5)).collect();
        let r = rank(&flat, Policy::Inter);
        let order: Vec<_> = r.iter().map(|a| (a.clip, a.frame)).collect();
        assert_eq!(order, vec![(0, 2), (0, 5), (1, 0), (1, 3)]);
        assert_eq!(r.iter().map(|a| a.percentile).collect::<Vec<_>>(), vec![0.0, 25.0, 50.0, 75.0]);

        let odd: Vec<_> = (0..11).map(|f| ann(0, f, f as f64)).collect();
        assert_eq!(keep_top(&rank(&odd, Policy::Inter), 50.0).len(), 6);
    }

    #[test]
    fn purification_with_oracle_scores() {
        let gt = |_c: usize, f: usize| Some(BoundingBox::new(f as f64, 0.0, 10.0, 10.0));
        // Shift grows with frame so IoU falls with frame.
        let anns: Vec<ScoredAnnotation> = (0..20)
            .map(|f| {
                let b = BoundingBox::new(f as f64 + f as f64 * 0.6, 0.0, 10.0, 10.0);
                ScoredAnnotation {
                    clip: f % 2,
                    frame: f,
                    bbox: b,
                    score: iou(&b, &gt(0, f).unwrap()),
                }
            })
            .collect();
        let fr: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let curve = purification_curve(&rank(&anns, Policy::Inter), gt, &fr);
        for w in curve.windows(2) {
            assert!(w[0].precision_at_iou_05 >= w[1].precision_at_iou_05);
        }
        let all = curve.last().unwrap();
        assert_eq!(all.kept, 20);
        let direct = anns.iter().filter(|a| a.score > IOU_THRESHOLD).count() as f64 / 20.0;
        assert_eq!(all.precision_at_iou_05, direct);
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
    }
}
