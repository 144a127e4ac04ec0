//! Stage 3: learned outlier filtering of a matched box sequence.
//!
//! One filter step blends every frame with its moving average,
//! `Y = X (1 - G) + smooth(X) G`, where the gate `G` comes from a small
//! conv + dense head looking at the local residual `X - smooth(X)`. The
//! step is applied 16 times with shared weights and the whole chain is
//! trained end to end with an L1 loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::nn::{self, Adam, Checkpoint, ParamStore, Tensor};

/// Per-frame `(cx, cy, w, h)` rows in pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSequence {
    pub fps: u32,
    pub rows: Vec<[f64; 4]>,
}

impl BoxSequence {
    pub fn new(fps: u32, rows: Vec<[f64; 4]>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyClip);
        }
        if fps == 0 {
            return Err(Error::InvalidSpec("fps must be positive".into()));
        }
        if let Some(i) = rows.iter().position(|r| !(r.iter().all(|v| v.is_finite()) && r[2] > 0.0 && r[3] > 0.0)) {
            return Err(Error::InvalidSpec(format!("box {i} is not finite with positive size")));
        }
        Ok(Self { fps, rows })
    }

    pub fn from_boxes(fps: u32, boxes: &[BoundingBox]) -> Result<Self> {
        Self::new(fps, boxes.iter().map(BoundingBox::to_array).collect())
    }

    pub fn boxes(&self) -> Vec<BoundingBox> {
        self.rows.iter().map(|&r| BoundingBox::from_array(r)).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Odd window length in frames for a duration in seconds.
pub fn window_frames(window_s: f64, fps: u32) -> usize {
    let w = (window_s * fps as f64).round().max(1.0) as usize;
    w | 1
}

/// Centered moving average per channel with edge-clamped padding.
pub fn smooth_tensor(x: &Tensor, window: usize) -> Tensor {
    let r = (window / 2) as isize;
    let n = x.n as isize;
    let mut y = Tensor::zeros(x.n, x.c);
    let m = (2 * r + 1) as f64;
    for i in 0..n {
        for j in -r..=r {
            let src = (i + j).clamp(0, n - 1) as usize;
            for ch in 0..x.c {
                *y.at_mut(i as usize, ch) += x.at(src, ch);
            }
        }
    }
    y.data.iter_mut().for_each(|v| *v /= m);
    y
}

/// Adjoint of [`smooth_tensor`].
pub fn smooth_backward(dy: &Tensor, window: usize) -> Tensor {
    let r = (window / 2) as isize;
    let n = dy.n as isize;
    let mut dx = Tensor::zeros(dy.n, dy.c);
    let inv = 1.0 / (2 * r + 1) as f64;
    for i in 0..n {
        for j in -r..=r {
            let dst = (i + j).clamp(0, n - 1) as usize;
            for ch in 0..dy.c {
                *dx.at_mut(dst, ch) += dy.at(i as usize, ch) * inv;
            }
        }
    }
    dx
}

pub fn smooth_sequence(x: &BoxSequence, window_s: f64) -> BoxSequence {
    let s = smooth_tensor(&Tensor::from_rows(&x.rows), window_frames(window_s, x.fps));
    BoxSequence {
        fps: x.fps,
        rows: (0..s.n).map(|i| [s.at(i, 0), s.at(i, 1), s.at(i, 2), s.at(i, 3)]).collect(),
    }
}

/// The gated blend `x (1 - g) + s g`.
pub fn mix(x: &Tensor, s: &Tensor, g: &Tensor) -> Tensor {
    let mut y = x.clone();
    for i in 0..y.data.len() {
        y.data[i] = x.data[i] * (1.0 - g.data[i]) + s.data[i] * g.data[i];
    }
    y
}

/// Gradients of [`mix`] with respect to `x`, `s` and `g`.
pub fn mix_backward(x: &Tensor, s: &Tensor, g: &Tensor, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let dx = dy.zip_map(g, |d, g| d * (1.0 - g));
    let ds = dy.zip_map(g, |d, g| d * g);
    let diff = s.zip_map(x, |s, x| s - x);
    (dx, ds, dy.zip_map(&diff, |d, v| d * v))
}

/// Zero-mean per channel; centers and widths are scaled by the mean width,
/// vertical channels by the mean height.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalizer {
    pub mean: [f64; 4],
    pub scale: [f64; 4],
}

impl Normalizer {
    pub fn fit(rows: &[[f64; 4]]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = [0.0; 4];
        for r in rows {
            for c in 0..4 {
                mean[c] += r[c] / n;
            }
        }
        let sw = mean[2].abs().max(1.0);
        let sh = mean[3].abs().max(1.0);
        Self {
            mean,
            scale: [sw, sh, sw, sh],
        }
    }

    pub fn apply(&self, rows: &[[f64; 4]]) -> Tensor {
        let mut t = Tensor::from_rows(rows);
        for i in 0..t.n {
            for c in 0..4 {
                let v = t.at_mut(i, c);
                *v = (*v - self.mean[c]) / self.scale[c];
            }
        }
        t
    }

    pub fn invert(&self, t: &Tensor) -> Vec<[f64; 4]> {
        (0..t.n)
            .map(|i| std::array::from_fn(|c| t.at(i, c) * self.scale[c] + self.mean[c]))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinerConfig {
    pub window_s: f64,
    pub kernel_s: f64,
    pub iterations: usize,
    pub hidden: usize,
    /// Initial bias of the gate output; negative starts near identity.
    pub gate_bias_init: f64,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        Self {
            window_s: 0.5,
            kernel_s: 1.0,
            iterations: 16,
            hidden: 16,
            gate_bias_init: -4.0,
        }
    }
}

/// Handles into the parameter store.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Layers {
    conv_w: usize,
    conv_b: usize,
    d1_w: usize,
    d1_b: usize,
    d2_w: usize,
    d2_b: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinerModel {
    pub config: RefinerConfig,
    pub fps: u32,
    pub store: ParamStore,
    layers: Layers,
}

#[derive(Serialize, Deserialize)]
struct RefinerFile {
    config: RefinerConfig,
    fps: u32,
    checkpoint: Checkpoint,
}

/// Intermediate values of one filter step, kept for backprop.
struct StepCache {
    x: Tensor,
    s: Tensor,
    feat: Tensor,
    conv_pre: Tensor,
    conv: Tensor,
    d1_pre: Tensor,
    d1: Tensor,
    g: Tensor,
}

impl RefinerModel {
    pub fn new(config: RefinerConfig, fps: u32, seed: u64) -> Result<Self> {
        if config.iterations == 0 || config.hidden == 0 || !(config.window_s > 0.0) || !(config.kernel_s > 0.0) || fps == 0 {
            return Err(Error::InvalidSpec("refiner needs positive windows, width, iterations and fps".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = window_frames(config.kernel_s, fps);
        let hd = config.hidden;
        let mut store = ParamStore::new(seed);
        let layers = Layers {
            conv_w: store.add("conv.w", nn::glorot(k * 4, hd, k * 4, hd, &mut rng)),
            conv_b: store.add("conv.b", Tensor::zeros(1, hd)),
            d1_w: store.add("dense1.w", nn::glorot(hd, hd, hd, hd, &mut rng)),
            d1_b: store.add("dense1.b", Tensor::zeros(1, hd)),
            d2_w: store.add("dense2.w", nn::glorot(hd, 4, hd, 4, &mut rng)),
            d2_b: store.add("dense2.b", Tensor::from_vec(1, 4, vec![config.gate_bias_init; 4])?),
        };
        Ok(Self { config, fps, store, layers })
    }

    fn kernel(&self) -> usize {
        window_frames(self.config.kernel_s, self.fps)
    }

    fn window(&self) -> usize {
        window_frames(self.config.window_s, self.fps)
    }

    fn step(&self, x: &Tensor) -> StepCache {
        let p = |h| self.store.param(h);
        let l = self.layers;
        let s = smooth_tensor(x, self.window());
        let feat = x.zip_map(&s, |a, b| a - b);
        let conv_pre = nn::conv1d(&feat, p(l.conv_w), p(l.conv_b), self.kernel()).expect("layer shapes fixed at construction");
        let conv = nn::relu(&conv_pre);
        let d1_pre = nn::dense(&conv, p(l.d1_w), p(l.d1_b)).expect("layer shapes fixed at construction");
        let d1 = nn::relu(&d1_pre);
        let g = nn::sigmoid(&nn::dense(&d1, p(l.d2_w), p(l.d2_b)).expect("layer shapes fixed at construction"));
        StepCache {
            x: x.clone(),
            s,
            feat,
            conv_pre,
            conv,
            d1_pre,
            d1,
            g,
        }
    }

    /// Gate values for a normalized input.
    pub fn gate(&self, x: &Tensor) -> Tensor {
        self.step(x).g
    }

    /// One filter step on a normalized `[n, 4]` input.
    pub fn outlier_filter_once(&self, x: &Tensor) -> Tensor {
        let c = self.step(x);
        mix(&c.x, &c.s, &c.g)
    }

    fn run(&self, x: &Tensor, keep: bool) -> (Tensor, Vec<StepCache>) {
        let mut caches = Vec::new();
        let mut cur = x.clone();
        for _ in 0..self.config.iterations {
            let c = self.step(&cur);
            cur = mix(&c.x, &c.s, &c.g);
            if keep {
                caches.push(c);
            }
        }
        (cur, caches)
    }

    /// Backpropagates `dy` through the cached steps, accumulating parameter
    /// gradients.
    fn backward(&mut self, caches: &[StepCache], dy: Tensor) {
        let l = self.layers;
        let (k, win) = (self.kernel(), self.window());
        let mut dy = dy;
        for c in caches.iter().rev() {
            let (mut dx, ds, dg) = mix_backward(&c.x, &c.s, &c.g, &dy);
            let dz = nn::sigmoid_backward(&c.g, &dg);
            let (dd1, dw, db) = nn::dense_backward(&c.d1, self.store.param(l.d2_w), &dz);
            self.store.accumulate(l.d2_w, &dw);
            self.store.accumulate(l.d2_b, &db);
            let dd1 = nn::relu_backward(&c.d1_pre, &dd1);
            let (dconv, dw, db) = nn::dense_backward(&c.conv, self.store.param(l.d1_w), &dd1);
            self.store.accumulate(l.d1_w, &dw);
            self.store.accumulate(l.d1_b, &db);
            let dconv = nn::relu_backward(&c.conv_pre, &dconv);
            let (dfeat, dw, db) = nn::conv1d_backward(&c.feat, self.store.param(l.conv_w), k, &dconv);
            self.store.accumulate(l.conv_w, &dw);
            self.store.accumulate(l.conv_b, &db);
            // feat = x - S x and s = S x.
            let back = smooth_backward(&ds.zip_map(&dfeat, |a, b| a - b), win);
            dx.add_assign(&dfeat);
            dx.add_assign(&back);
            dy = dx;
        }
    }

    pub fn refine(&self, x: &BoxSequence) -> Result<BoxSequence> {
        if x.fps != self.fps {
            return Err(Error::shape("refine fps", self.fps, x.fps));
        }
        let norm = Normalizer::fit(&x.rows);
        let (y, _) = self.run(&norm.apply(&x.rows), false);
        let mut rows = norm.invert(&y);
        for r in &mut rows {
            r[2] = r[2].max(1.0);
            r[3] = r[3].max(1.0);
        }
        Ok(BoxSequence { fps: x.fps, rows })
    }

    /// Normalized L1 loss of one pair.
    pub fn loss(&self, input: &BoxSequence, target: &BoxSequence) -> Result<f64> {
        check_pairs(&[(input.clone(), target.clone())])?;
        self.clone().pair_loss(&input.rows, &target.rows, false)
    }

    /// Normalized L1 loss of one pair with its gradient for every parameter,
    /// in store order.
    pub fn loss_with_gradients(&self, input: &BoxSequence, target: &BoxSequence) -> Result<(f64, Vec<Tensor>)> {
        check_pairs(&[(input.clone(), target.clone())])?;
        let mut m = self.clone();
        m.store.zero_grad();
        let loss = m.pair_loss(&input.rows, &target.rows, true)?;
        Ok((loss, (0..m.store.len()).map(|h| m.store.grad(h).clone()).collect()))
    }

    /// Normalized L1 loss of one (input, target) pair, and optionally its
    /// parameter gradients accumulated into the store.
    fn pair_loss(&mut self, input: &[[f64; 4]], target: &[[f64; 4]], grad: bool) -> Result<f64> {
        let norm = Normalizer::fit(input);
        let (x, t) = (norm.apply(input), norm.apply(target));
        let (y, caches) = self.run(&x, grad);
        let (loss, dy) = nn::loss_l1(&y, &t)?;
        if grad {
            self.backward(&caches, dy);
        }
        Ok(loss)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&RefinerFile {
            config: self.config.clone(),
            fps: self.fps,
            checkpoint: self.store.checkpoint(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: RefinerFile = serde_json::from_str(text)?;
        let mut m = Self::new(f.config, f.fps, f.checkpoint.seed)?;
        m.store.restore(&f.checkpoint)?;
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinerTrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub crop_s: f64,
    pub lr: f64,
}

impl Default for RefinerTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch: 8,
            crop_s: 6.0,
            lr: 3e-3,
        }
    }
}

/// Random crop `(pair, start, len)` of at most `crop` frames.
fn sample_crop(lens: &[usize], crop: usize, rng: &mut impl Rng) -> (usize, usize, usize) {
    let k = rng.random_range(0..lens.len());
    let len = lens[k].min(crop);
    let start = rng.random_range(0..=lens[k] - len);
    (k, start, len)
}

fn check_pairs(pairs: &[(BoxSequence, BoxSequence)]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::InvalidSpec("no training pairs".into()));
    }
    for (a, b) in pairs {
        if a.len() != b.len() {
            return Err(Error::shape("training pair", a.len(), b.len()));
        }
    }
    Ok(())
}

/// Mean normalized L1 loss over whole sequences.
pub fn refiner_loss(model: &RefinerModel, pairs: &[(BoxSequence, BoxSequence)]) -> Result<f64> {
    check_pairs(pairs)?;
    let mut m = model.clone();
    let mut total = 0.0;
    for (x, t) in pairs {
        total += m.pair_loss(&x.rows, &t.rows, false)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Trains on `(corrupted, ground truth)` pairs. Each epoch is one Adam step
/// on a mini-batch of random crops. Returns the model and the per-epoch
/// batch loss.
pub fn train_refiner(
    pairs: &[(BoxSequence, BoxSequence)],
    config: &RefinerConfig,
    train: &RefinerTrainConfig,
    seed: u64,
) -> Result<(RefinerModel, Vec<f64>)> {
    check_pairs(pairs)?;
    let fps = pairs[0].0.fps;
    if pairs.iter().any(|(a, b)| a.fps != fps || b.fps != fps) {
        return Err(Error::InvalidSpec("training pairs must share one frame rate".into()));
    }
    let mut model = RefinerModel::new(config.clone(), fps, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let lens: Vec<usize> = pairs.iter().map(|p| p.0.len()).collect();
    let crop = ((train.crop_s * fps as f64).round() as usize).max(1);
    let opt = Adam::default();
    let mut curve = Vec::with_capacity(train.epochs);
    let batch = train.batch.max(1);
    for epoch in 0..train.epochs {
        model.store.zero_grad();
        let mut loss = 0.0;
        for _ in 0..batch {
            let (k, s, len) = sample_crop(&lens, crop, &mut rng);
            loss += model.pair_loss(&pairs[k].0.rows[s..s + len], &pairs[k].1.rows[s..s + len], true)?;
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

/// Synthetic damage applied to clean sequences to make training pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionSpec {
    /// Per-frame probability of a single-frame size spike.
    pub spike_prob: f64,
    pub spike_scale: [f64; 2],
    /// Expected oversize segments per 10 s.
    pub merge_rate: f64,
    pub merge_len_s: [f64; 2],
    pub merge_scale: [f64; 2],
    /// Center jitter and size jitter as a fraction of box size.
    pub jitter: f64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            spike_prob: 0.03,
            spike_scale: [1.5, 3.0],
            merge_rate: 0.5,
            merge_len_s: [2.0, 3.0],
            merge_scale: [1.3, 2.0],
            jitter: 0.03,
        }
    }
}

/// Grows a box by `s` along width (`axis` 0) or height (`axis` 1), keeping
/// one side fixed.
fn grow(r: &mut [f64; 4], axis: usize, s: f64, toward_positive: bool) {
    let d = (s - 1.0) * r[2 + axis];
    r[2 + axis] *= s;
    r[axis] += if toward_positive { 0.5 * d } else { -0.5 * d };
}

pub fn corrupt(gt: &BoxSequence, spec: &CorruptionSpec, rng: &mut impl Rng) -> BoxSequence {
    let mut rows = gt.rows.clone();
    let n = rows.len();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    for r in &mut rows {
        let (w, h) = (r[2], r[3]);
        r[0] += spec.jitter * w * unit.sample(rng);
        r[1] += spec.jitter * h * unit.sample(rng);
        r[2] *= (1.0 + spec.jitter * unit.sample(rng)).max(0.5);
        r[3] *= (1.0 + spec.jitter * unit.sample(rng)).max(0.5);
    }
    let duration = n as f64 / gt.fps as f64;
    let n_merge = (spec.merge_rate * duration / 10.0).floor() as usize + usize::from(rng.random::<f64>() < (spec.merge_rate * duration / 10.0).fract());
    for _ in 0..n_merge {
        let len = ((rng.random_range(spec.merge_len_s[0]..=spec.merge_len_s[1]) * gt.fps as f64).round() as usize).clamp(1, n);
        let start = rng.random_range(0..=n - len);
        let s = rng.random_range(spec.merge_scale[0]..=spec.merge_scale[1]);
        let side = rng.random::<bool>();
        for r in &mut rows[start..start + len] {
            grow(r, 0, s, side);
        }
    }
    for r in &mut rows {
        if rng.random::<f64>() < spec.spike_prob {
            let s = rng.random_range(spec.spike_scale[0]..=spec.spike_scale[1]);
            match rng.random_range(0..3) {
                0 => grow(r, 0, s, rng.random()),
                1 => grow(r, 1, s, true),
                _ => {
                    grow(r, 0, s, rng.random());
                    grow(r, 1, s, rng.random());
                }
            }
        }
    }
    BoxSequence { fps: gt.fps, rows }
}
