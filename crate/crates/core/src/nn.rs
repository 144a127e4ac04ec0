//! A small float64 network toolkit: same-padded 1-D convolution, dense
//! layers, activations, losses and Adam. Every layer has an explicit backward
//! function; the models in [`crate::refine`] and [`crate::ranking`] chain
//! them by hand.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `[n, c]` row-major array: `n` time steps of `c` channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub n: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize) -> Self {
        Self { n, c, data: vec![0.0; n * c] }
    }

    pub fn from_vec(n: usize, c: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * c {
            return Err(Error::shape("tensor", n * c, data.len()));
        }
        Ok(Self { n, c, data })
    }

    pub fn from_rows<const C: usize>(rows: &[[f64; C]]) -> Self {
        Self {
            n: rows.len(),
            c: C,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.c + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.c + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.c..(i + 1) * self.c]
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.n == other.n && self.c == other.c
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            n: self.n,
            c: self.c,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        debug_assert!(self.same_shape(other));
        Tensor {
            n: self.n,
            c: self.c,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Concatenates along channels.
    pub fn concat(&self, other: &Tensor) -> Result<Tensor> {
        if self.n != other.n {
            return Err(Error::shape("concat", self.n, other.n));
        }
        let c = self.c + other.c;
        let mut data = Vec::with_capacity(self.n * c);
        for i in 0..self.n {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Tensor { n: self.n, c, data })
    }

    /// Splits channels at `at`; inverse of [`Tensor::concat`].
    pub fn split(&self, at: usize) -> (Tensor, Tensor) {
        let mut a = Tensor::zeros(self.n, at);
        let mut b = Tensor::zeros(self.n, self.c - at);
        for i in 0..self.n {
            let r = self.row(i);
            a.data[i * at..(i + 1) * at].copy_from_slice(&r[..at]);
            b.data[i * b.c..(i + 1) * b.c].copy_from_slice(&r[at..]);
        }
        (a, b)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn check_kernel(op: &'static str, x: &Tensor, w: &Tensor, b: &Tensor, k: usize) -> Result<()> {
    if k % 2 == 0 {
        return Err(Error::shape(op, "odd kernel", k));
    }
    if w.n != k * x.c {
        return Err(Error::shape(op, format!("kernel rows {}", k * x.c), w.n));
    }
    if b.n != 1 || b.c != w.c {
        return Err(Error::shape(op, format!("bias [1, {}]", w.c), format!("[{}, {}]", b.n, b.c)));
    }
    Ok(())
}

/// Same-length cross-correlation with zero padding. The kernel is stored as
/// `[k * cin, cout]` with row `t * cin + ci` holding tap `t` of input
/// channel `ci`.
pub fn conv1d(x: &Tensor, w: &Tensor, b: &Tensor, k: usize) -> Result<Tensor> {
    check_kernel("conv1d", x, w, b, k)?;
    let (n, cin, cout) = (x.n, x.c, w.c);
    let r = k / 2;
    let mut y = Tensor::zeros(n, cout);
    for i in 0..n {
        let out = &mut y.data[i * cout..(i + 1) * cout];
        out.copy_from_slice(&b.data);
        for t in 0..k {
            let src = i + t;
            if src < r || src - r >= n {
                continue;
            }
            let xrow = x.row(src - r);
            for (ci, &xv) in xrow.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let wrow = &w.data[(t * cin + ci) * cout..(t * cin + ci + 1) * cout];
                for (o, &wv) in out.iter_mut().zip(wrow) {
                    *o += xv * wv;
                }
            }
        }
    }
    debug_assert!(y.is_finite(), "conv1d produced a non-finite value");
    Ok(y)
}

/// Gradients of [`conv1d`] with respect to input, kernel and bias.
pub fn conv1d_backward(x: &Tensor, w: &Tensor, k: usize, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (n, cin, cout) = (x.n, x.c, w.c);
    let r = k / 2;
    let mut dx = Tensor::zeros(n, cin);
    let mut dw = Tensor::zeros(w.n, cout);
    let mut db = Tensor::zeros(1, cout);
    for i in 0..n {
        let g = dy.row(i);
        for (d, &gv) in db.data.iter_mut().zip(g) {
            *d += gv;
        }
        for t in 0..k {
            let src = i + t;
            if src < r || src - r >= n {
                continue;
            }
            let s = src - r;
            for ci in 0..cin {
                let row = t * cin + ci;
                let wrow = &w.data[row * cout..(row + 1) * cout];
                let xv = x.data[s * cin + ci];
                let mut acc = 0.0;
                let dwrow = &mut dw.data[row * cout..(row + 1) * cout];
                for o in 0..cout {
                    acc += g[o] * wrow[o];
                    dwrow[o] += g[o] * xv;
                }
                dx.data[s * cin + ci] += acc;
            }
        }
    }
    (dx, dw, db)
}

/// Row-wise affine map `x W + b` with `W` of shape `[cin, cout]`.
pub fn dense(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    if w.n != x.c {
        return Err(Error::shape("dense", format!("weight rows {}", x.c), w.n));
    }
    if b.n != 1 || b.c != w.c {
        return Err(Error::shape("dense", format!("bias [1, {}]", w.c), format!("[{}, {}]", b.n, b.c)));
    }
    let cout = w.c;
    let mut y = Tensor::zeros(x.n, cout);
    for i in 0..x.n {
        let out = &mut y.data[i * cout..(i + 1) * cout];
        out.copy_from_slice(&b.data);
        for (ci, &xv) in x.row(i).iter().enumerate() {
            let wrow = &w.data[ci * cout..(ci + 1) * cout];
            for (o, &wv) in out.iter_mut().zip(wrow) {
                *o += xv * wv;
            }
        }
    }
    debug_assert!(y.is_finite(), "dense produced a non-finite value");
    Ok(y)
}

pub fn dense_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (cin, cout) = (w.n, w.c);
    let mut dx = Tensor::zeros(x.n, cin);
    let mut dw = Tensor::zeros(cin, cout);
    let mut db = Tensor::zeros(1, cout);
    for i in 0..x.n {
        let g = dy.row(i);
        for (d, &gv) in db.data.iter_mut().zip(g) {
            *d += gv;
        }
        for ci in 0..cin {
            let xv = x.data[i * cin + ci];
            let wrow = &w.data[ci * cout..(ci + 1) * cout];
            let dwrow = &mut dw.data[ci * cout..(ci + 1) * cout];
            let mut acc = 0.0;
            for o in 0..cout {
                acc += g[o] * wrow[o];
                dwrow[o] += g[o] * xv;
            }
            dx.data[i * cin + ci] = acc;
        }
    }
    (dx, dw, db)
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Takes the pre-activation input.
pub fn relu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    x.zip_map(dy, |v, g| if v > 0.0 { g } else { 0.0 })
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

pub fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Takes the activation output.
pub fn sigmoid_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    y.zip_map(dy, |s, g| g * s * (1.0 - s))
}

fn check_same(op: &'static str, pred: &Tensor, target: &Tensor) -> Result<()> {
    if !pred.same_shape(target) {
        return Err(Error::shape(op, format!("[{}, {}]", target.n, target.c), format!("[{}, {}]", pred.n, pred.c)));
    }
    if pred.data.is_empty() {
        return Err(Error::shape(op, "non-empty tensor", 0));
    }
    Ok(())
}

/// Mean absolute error and its gradient (subgradient 0 at a tie).
pub fn loss_l1(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    check_same("loss_l1", pred, target)?;
    let m = pred.data.len() as f64;
    let loss = pred.data.iter().zip(&target.data).map(|(p, t)| (p - t).abs()).sum::<f64>() / m;
    let grad = pred.zip_map(target, |p, t| {
        let d = p - t;
        if d > 0.0 {
            1.0 / m
        } else if d < 0.0 {
            -1.0 / m
        } else {
            0.0
        }
    });
    Ok((loss, grad))
}

/// Mean squared error and its gradient.
pub fn loss_l2(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    check_same("loss_l2", pred, target)?;
    let m = pred.data.len() as f64;
    let loss = pred.data.iter().zip(&target.data).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / m;
    let grad = pred.zip_map(target, |p, t| 2.0 * (p - t) / m);
    Ok((loss, grad))
}

/// Glorot-uniform sample of shape `[n, c]`.
pub fn glorot(n: usize, c: usize, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor {
        n,
        c,
        data: (0..n * c).map(|_| rng.random_range(-a..a)).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor,
}

/// Named parameters with their gradients and Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    pub seed: u64,
    pub step: u64,
    names: Vec<String>,
    params: Vec<Tensor>,
    grads: Vec<Tensor>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

/// On-disk form of a [`ParamStore`]; optimizer moments are not kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub seed: u64,
    pub step: u64,
    pub tensors: Vec<NamedTensor>,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            step: 0,
            names: Vec::new(),
            params: Vec::new(),
            grads: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Registers a parameter and returns its handle.
    pub fn add(&mut self, name: &str, t: Tensor) -> usize {
        let (n, c) = (t.n, t.c);
        self.names.push(name.to_string());
        self.params.push(t);
        self.grads.push(Tensor::zeros(n, c));
        self.m.push(Tensor::zeros(n, c));
        self.v.push(Tensor::zeros(n, c));
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn param(&self, h: usize) -> &Tensor {
        &self.params[h]
    }

    pub fn param_mut(&mut self, h: usize) -> &mut Tensor {
        &mut self.params[h]
    }

    pub fn grad(&self, h: usize) -> &Tensor {
        &self.grads[h]
    }

    pub fn name(&self, h: usize) -> &str {
        &self.names[h]
    }

    pub fn accumulate(&mut self, h: usize, g: &Tensor) {
        self.grads[h].add_assign(g);
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.data.fill(0.0);
        }
    }

    pub fn scale_grad(&mut self, s: f64) {
        for g in &mut self.grads {
            g.data.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// One bias-corrected Adam update with learning rate `lr`.
    pub fn adam_step(&mut self, opt: &Adam, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - opt.beta1.powi(t);
        let c2 = 1.0 - opt.beta2.powi(t);
        for k in 0..self.params.len() {
            let (p, g, m, v) = (&mut self.params[k].data, &self.grads[k].data, &mut self.m[k].data, &mut self.v[k].data);
            for i in 0..p.len() {
                m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
                v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + opt.eps);
            }
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            seed: self.seed,
            step: self.step,
            tensors: self
                .names
                .iter()
                .zip(&self.params)
                .map(|(name, t)| NamedTensor {
                    name: name.clone(),
                    tensor: t.clone(),
                })
                .collect(),
        }
    }

    /// Loads values into an already laid-out store; names and shapes must match.
    pub fn restore(&mut self, ck: &Checkpoint) -> Result<()> {
        if ck.tensors.len() != self.params.len() {
            return Err(Error::shape("checkpoint", self.params.len(), ck.tensors.len()));
        }
        for (k, nt) in ck.tensors.iter().enumerate() {
            let p = &self.params[k];
            if nt.name != self.names[k] || !nt.tensor.same_shape(p) || nt.tensor.data.len() != p.data.len() {
                return Err(Error::shape(
                    "checkpoint",
                    format!("{} [{}, {}]", self.names[k], p.n, p.c),
                    format!("{} [{}, {}]", nt.name, nt.tensor.n, nt.tensor.c),
                ));
            }
        }
        for (k, nt) in ck.tensors.iter().enumerate() {
            self.params[k] = nt.tensor.clone();
        }
        self.seed = ck.seed;
        self.step = ck.step;
        Ok(())
    }
}

/// Cosine decay from `base` to `base / 10` over `total` steps.
pub fn cosine_lr(base: f64, step: usize, total: usize) -> f64 {
    if total <= 1 {
        return base;
    }
    let p = (step as f64 / (total - 1) as f64).min(1.0);
    base * (0.1 + 0.9 * 0.5 * (1.0 + (std::f64::consts::PI * p).cos()))
}
