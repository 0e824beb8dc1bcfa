//! Three-branch inception-style network over one-channel Doppler traces.
//!
//! ```text
//! A: maxpool 3×3/2 → conv 1×1 (5)
//! B: conv 1×1 (4) → conv 3×3/2 (5)
//! C: conv 1×1 (4) → conv 3×3 (4) → conv 3×3/2 (5)
//! concat (15) → conv 1×1 (3) → flatten → dropout → dense → softmax
//! ```
//! Every convolution is followed by a ReLU. Parameters live in one flat
//! vector; [`LayerInfo`] gives each layer's slice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layers::{conv_backward, conv_forward, maxpool_forward, relu_backward, relu_inplace, ConvGeom, Real, Shape};
use super::ActivityVector;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    /// Trace rows (`N_w`).
    pub input_rows: usize,
    /// Trace columns (`N_D`).
    pub input_cols: usize,
    /// Output maps of each branch.
    pub branch_maps: usize,
    /// Maps of the 1×1 bottlenecks in branches B and C.
    pub bottleneck_maps: usize,
    /// Maps after the 1×1 reduction of the concatenated branches.
    pub reduce_maps: usize,
    pub dropout_rate: f64,
    pub n_classes: usize,
}

impl NetworkSpec {
    pub fn new(input_rows: usize, input_cols: usize, n_classes: usize) -> Self {
        NetworkSpec {
            input_rows,
            input_cols,
            branch_maps: 5,
            bottleneck_maps: 4,
            reduce_maps: 3,
            dropout_rate: 0.2,
            n_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_rows < 2 || self.input_cols < 2 {
            return Err(Error::invalid("network input", "needs at least 2×2"));
        }
        if self.branch_maps == 0 || self.bottleneck_maps == 0 || self.reduce_maps == 0 {
            return Err(Error::invalid("network maps", "must be positive"));
        }
        if self.n_classes < 2 {
            return Err(Error::invalid("n_classes", "needs at least 2"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid("dropout_rate", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn input_shape(&self) -> Shape {
        Shape {
            c: 1,
            h: self.input_rows,
            w: self.input_cols,
        }
    }

    /// Spatial shape after the stride-2 stage of every branch.
    pub fn half_shape(&self) -> Shape {
        Shape {
            c: 3 * self.branch_maps,
            h: (self.input_rows - 1) / 2 + 1,
            w: (self.input_cols - 1) / 2 + 1,
        }
    }

    pub fn features(&self) -> usize {
        let half = self.half_shape();
        self.reduce_maps * half.h * half.w
    }

    pub fn layers(&self) -> Vec<LayerInfo> {
        let (m, b) = (self.branch_maps, self.bottleneck_maps);
        let conv = |in_c, out_c, kernel, stride| {
            LayerKind::Conv(ConvGeom {
                in_c,
                out_c,
                kernel,
                stride,
                pad: kernel / 2,
            })
        };
        let kinds = [
            ("a_conv", conv(1, m, 1, 1)),
            ("b_reduce", conv(1, b, 1, 1)),
            ("b_conv", conv(b, m, 3, 2)),
            ("c_reduce", conv(1, b, 1, 1)),
            ("c_conv1", conv(b, b, 3, 1)),
            ("c_conv2", conv(b, m, 3, 2)),
            ("reduce", conv(3 * m, self.reduce_maps, 1, 1)),
            (
                "dense",
                LayerKind::Dense {
                    inputs: self.features(),
                    outputs: self.n_classes,
                },
            ),
        ];
        let mut offset = 0;
        kinds
            .into_iter()
            .map(|(name, kind)| {
                let (weights, biases) = match kind {
                    LayerKind::Conv(g) => (g.weights(), g.out_c),
                    LayerKind::Dense { inputs, outputs } => (inputs * outputs, outputs),
                };
                let info = LayerInfo {
                    name,
                    kind,
                    offset,
                    weights,
                    biases,
                };
                offset += weights + biases;
                info
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().iter().map(|l| l.weights + l.biases).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv(ConvGeom),
    Dense { inputs: usize, outputs: usize },
}

/// Position of one layer's weights (then biases) in the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerInfo {
    pub name: &'static str,
    pub kind: LayerKind,
    pub offset: usize,
    pub weights: usize,
    pub biases: usize,
}

impl LayerInfo {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.weights
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.offset + self.weights..self.offset + self.weights + self.biases
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.weights + self.biases
    }

    /// Weight tensor shape: `[out, in, kh, kw]` or `[out, in]`.
    pub fn shape(&self) -> Vec<usize> {
        match self.kind {
            LayerKind::Conv(g) => vec![g.out_c, g.in_c, g.kernel, g.kernel],
            LayerKind::Dense { inputs, outputs } => vec![outputs, inputs],
        }
    }

    fn conv(&self) -> &ConvGeom {
        match &self.kind {
            LayerKind::Conv(g) => g,
            LayerKind::Dense { .. } => unreachable!("dense layer used as convolution"),
        }
    }
}

const A_CONV: usize = 0;
const B_REDUCE: usize = 1;
const B_CONV: usize = 2;
const C_REDUCE: usize = 3;
const C_CONV1: usize = 4;
const C_CONV2: usize = 5;
const REDUCE: usize = 6;
const DENSE: usize = 7;

#[derive(Clone, Debug)]
pub struct Network<T> {
    spec: NetworkSpec,
    layers: Vec<LayerInfo>,
    pub params: Vec<T>,
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Forward<T> {
    input: Vec<T>,
    pooled: Vec<T>,
    b1: Vec<T>,
    c1: Vec<T>,
    c2: Vec<T>,
    /// Branch outputs A | B | C after ReLU.
    cat: Vec<T>,
    /// Reduced maps after ReLU, i.e. the flattened features.
    reduced: Vec<T>,
    /// Per-feature dropout scale (0 or 1/(1−p)); `None` at inference.
    mask: Option<Vec<T>>,
    dropped: Vec<T>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

impl<T: Real> Forward<T> {
    pub fn activity(&self) -> ActivityVector {
        ActivityVector::new(self.probs.iter().map(|p| p.to_f64().unwrap_or(f64::NAN)).collect())
    }

    /// Cross-entropy `−ln p[label]`, from the logits for stability.
    pub fn loss(&self, label: usize) -> T {
        let max = self.logits.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = self.logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
        lse - self.logits[label]
    }
}

fn cast<T: Real, U: Real>(v: T) -> U {
    U::from(v).expect("finite parameter")
}

fn lit<T: Real>(v: f64) -> T {
    T::from(v).expect("representable constant")
}

impl<T: Real> Network<T> {
    /// He-normal convolutions; a small dense head so the initial softmax is
    /// close to uniform. Biases start at zero.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layers = spec.layers();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![T::zero(); spec.parameter_count()];
        for layer in &layers {
            let std = match layer.kind {
                LayerKind::Conv(g) => (2.0 / (g.in_c * g.kernel * g.kernel) as f64).sqrt(),
                LayerKind::Dense { inputs, .. } => 0.1 / (inputs as f64).sqrt(),
            };
            let normal = Normal::new(0.0, std).expect("positive std");
            for p in &mut params[layer.weight_range()] {
                *p = lit(normal.sample(&mut rng));
            }
        }
        Ok(Network { spec, layers, params })
    }

    pub fn from_params(spec: NetworkSpec, params: Vec<T>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.parameter_count() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", spec.parameter_count()),
                found: params.len().to_string(),
            });
        }
        let layers = spec.layers();
        Ok(Network { spec, layers, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[LayerInfo] {
        &self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    /// Same network at another precision.
    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            layers: self.layers.clone(),
            params: self.params.iter().map(|&p| cast(p)).collect(),
        }
    }

    fn weights(&self, i: usize) -> (&[T], &[T]) {
        let l = &self.layers[i];
        (&self.params[l.weight_range()], &self.params[l.bias_range()])
    }

    fn conv_relu(&self, i: usize, x: &[T], xs: Shape) -> (Vec<T>, Shape) {
        let g = self.layers[i].conv();
        let ys = g.out_shape(xs);
        let mut y = vec![T::zero(); ys.len()];
        let (w, b) = self.weights(i);
        conv_forward(g, x, xs, w, b, &mut y);
        relu_inplace(&mut y);
        (y, ys)
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        let want = self.spec.input_rows * self.spec.input_cols;
        if input.len() != want {
            return Err(Error::ShapeMismatch {
                expected: format!("{}×{} trace", self.spec.input_rows, self.spec.input_cols),
                found: format!("{} values", input.len()),
            });
        }
        Ok(())
    }

    /// Inference pass (dropout disabled).
    pub fn predict(&self, input: &[T]) -> Result<ActivityVector> {
        Ok(self.forward(input, None)?.activity())
    }

    /// Training pass with a fresh dropout mask drawn from `rng`.
    pub fn forward_train<R: Rng>(&self, input: &[T], rng: &mut R) -> Result<Forward<T>> {
        let mask = dropout_mask(rng, self.spec.features(), self.spec.dropout_rate);
        let keep: T = lit(1.0 / (1.0 - self.spec.dropout_rate));
        let mask = mask.into_iter().map(|k| if k { keep } else { T::zero() }).collect();
        self.forward(input, Some(mask))
    }

    pub fn forward(&self, input: &[T], mask: Option<Vec<T>>) -> Result<Forward<T>> {
        self.check_input(input)?;
        let xs = self.spec.input_shape();

        let mut pooled = vec![T::zero(); self.spec.half_shape().h * self.spec.half_shape().w];
        let (ps, _) = maxpool_forward(input, xs, &mut pooled);
        let (a, _) = self.conv_relu(A_CONV, &pooled, ps);

        let (b1, b1s) = self.conv_relu(B_REDUCE, input, xs);
        let (b, _) = self.conv_relu(B_CONV, &b1, b1s);

        let (c1, c1s) = self.conv_relu(C_REDUCE, input, xs);
        let (c2, c2s) = self.conv_relu(C_CONV1, &c1, c1s);
        let (c, _) = self.conv_relu(C_CONV2, &c2, c2s);

        let mut cat = a;
        cat.extend_from_slice(&b);
        cat.extend_from_slice(&c);
        let (reduced, _) = self.conv_relu(REDUCE, &cat, self.spec.half_shape());

        let dropped: Vec<T> = match &mask {
            Some(m) => reduced.iter().zip(m).map(|(&x, &s)| x * s).collect(),
            None => reduced.clone(),
        };
        let (w, bias) = self.weights(DENSE);
        let n_in = dropped.len();
        let logits: Vec<T> = (0..self.spec.n_classes)
            .map(|o| {
                let row = &w[o * n_in..(o + 1) * n_in];
                bias[o] + row.iter().zip(&dropped).map(|(&a, &b)| a * b).sum::<T>()
            })
            .collect();
        let probs = softmax(&logits);
        Ok(Forward {
            input: input.to_vec(),
            pooled,
            b1,
            c1,
            c2,
            cat,
            reduced,
            mask,
            dropped,
            logits,
            probs,
        })
    }

    /// Adds `scale · ∂(−ln p[label])/∂θ` into `grad`.
    pub fn backward(&self, fwd: &Forward<T>, label: usize, scale: T, grad: &mut [T]) {
        let spec = &self.spec;
        let xs = spec.input_shape();
        let half = spec.half_shape();
        let bs = Shape {
            c: spec.bottleneck_maps,
            h: xs.h,
            w: xs.w,
        };

        let mut dlogits: Vec<T> = fwd.probs.clone();
        dlogits[label] = dlogits[label] - T::one();
        for d in &mut dlogits {
            *d = *d * scale;
        }

        // dense
        let dense = &self.layers[DENSE];
        let n_in = fwd.dropped.len();
        let w = &self.params[dense.weight_range()];
        let mut dfeat = vec![T::zero(); n_in];
        {
            let gw = &mut grad[dense.range()];
            for (o, &d) in dlogits.iter().enumerate() {
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                for (g, &x) in row.iter_mut().zip(&fwd.dropped) {
                    *g += d * x;
                }
                gw[dense.weights + o] += d;
                for (df, &wv) in dfeat.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *df += d * wv;
                }
            }
        }
        if let Some(m) = &fwd.mask {
            for (d, &s) in dfeat.iter_mut().zip(m) {
                *d = *d * s;
            }
        }
        relu_backward(&fwd.reduced, &mut dfeat);

        let mut dcat = vec![T::zero(); fwd.cat.len()];
        self.conv_grad(REDUCE, &fwd.cat, half, &dfeat, grad, Some(&mut dcat));
        relu_backward(&fwd.cat, &mut dcat);
        let branch = spec.branch_maps * half.h * half.w;
        let (da, rest) = dcat.split_at(branch);
        let (db, dc) = rest.split_at(branch);
        let pooled_shape = Shape { c: 1, ..half };

        self.conv_grad(A_CONV, &fwd.pooled, pooled_shape, da, grad, None);

        let mut db1 = vec![T::zero(); fwd.b1.len()];
        self.conv_grad(B_CONV, &fwd.b1, bs, db, grad, Some(&mut db1));
        relu_backward(&fwd.b1, &mut db1);
        self.conv_grad(B_REDUCE, &fwd.input, xs, &db1, grad, None);

        let mut dc2 = vec![T::zero(); fwd.c2.len()];
        self.conv_grad(C_CONV2, &fwd.c2, bs, dc, grad, Some(&mut dc2));
        relu_backward(&fwd.c2, &mut dc2);
        let mut dc1 = vec![T::zero(); fwd.c1.len()];
        self.conv_grad(C_CONV1, &fwd.c1, bs, &dc2, grad, Some(&mut dc1));
        relu_backward(&fwd.c1, &mut dc1);
        self.conv_grad(C_REDUCE, &fwd.input, xs, &dc1, grad, None);
    }

    fn conv_grad(&self, i: usize, x: &[T], xs: Shape, dy: &[T], grad: &mut [T], dx: Option<&mut [T]>) {
        let l = &self.layers[i];
        let (gw, gb) = grad[l.range()].split_at_mut(l.weights);
        conv_backward(l.conv(), x, xs, &self.params[l.weight_range()], dy, gw, gb, dx);
    }

    /// Inference loss and gradient for one example.
    pub fn loss_and_gradient(&self, input: &[T], label: usize) -> Result<(T, Vec<T>)> {
        let fwd = self.forward(input, None)?;
        let mut grad = vec![T::zero(); self.params.len()];
        self.backward(&fwd, label, T::one(), &mut grad);
        Ok((fwd.loss(label), grad))
    }
}

pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exp: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exp.iter().copied().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Bernoulli keep-mask: each entry is dropped with probability `rate`.
pub fn dropout_mask<R: Rng>(rng: &mut R, len: usize, rate: f64) -> Vec<bool> {
    (0..len).map(|_| rng.random::<f64>() >= rate).collect()
}
