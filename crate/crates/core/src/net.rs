//! A small dense autoencoder with hand-written forward and backward passes,
//! an Adam optimizer, a finite-difference gradient checker, and JSON
//! checkpointing.
//!
//! There is no autodiff here on purpose: the chain through the latent
//! normalization and the angular loss is short enough to differentiate by
//! hand, and doing so keeps the dependency surface tiny and the gradients
//! fully inspectable. Every gradient path is validated against central
//! finite differences in the test suite.

use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::stream::substream;
use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Additive guard under latent norms during training, so early near-zero
/// codes never divide by zero.
pub const NORM_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    /// Derivative as a function of the pre-activation (0 at the ReLU kink).
    fn grad(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Shape and nonlinearity of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// A dense layer: `out = act(x W + b)` with `W` of shape `in_dim x out_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn spec(&self) -> LayerSpec {
        LayerSpec { in_dim: self.w.nrows(), out_dim: self.w.ncols(), activation: self.activation }
    }
}

/// Encoder/decoder pair. The encoder maps `input_dim -> embed_dim`; the
/// decoder mirrors it back. The *sphere* embedding is the row-normalized
/// encoder output; [`AutoencoderModel::decode_normalized`] is the only decode
/// path used in training, matching the rule that decoding always sees
/// unit-norm codes.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub encoder: Vec<DenseLayer>,
    pub decoder: Vec<DenseLayer>,
    pub input_dim: usize,
    pub embed_dim: usize,
}

fn init_layer(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut impl rand::Rng) -> DenseLayer {
    // He-style scaling for ReLU halves the variance loss through the
    // rectifier; plain 1/in keeps identity layers at unit-variance output.
    let std = match activation {
        Activation::Relu => (2.0 / in_dim as f64).sqrt(),
        Activation::Identity => (1.0 / in_dim as f64).sqrt(),
    };
    let mut w = Array2::<f64>::zeros((in_dim, out_dim));
    for v in w.iter_mut() {
        let n: f64 = StandardNormal.sample(rng);
        *v = std * n;
    }
    DenseLayer { w, b: Array1::zeros(out_dim), activation }
}

impl AutoencoderModel {
    /// Builds `input -> hidden... -> embed` with ReLU on hidden layers and a
    /// linear embedding layer, plus the mirrored decoder ending in a linear
    /// reconstruction layer. Weight init is deterministic in the seed.
    pub fn new(input_dim: usize, hidden: &[usize], embed_dim: usize, seed: u64) -> Result<Self> {
        for &d in [input_dim, embed_dim].iter().chain(hidden) {
            if d == 0 {
                return Err(Error::InvalidParameter { what: "layer dims must be >= 1".into() });
            }
        }
        let mut rng = substream(seed, "net/init");
        let mut encoder = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input_dim;
        for &h in hidden {
            encoder.push(init_layer(prev, h, Activation::Relu, &mut rng));
            prev = h;
        }
        encoder.push(init_layer(prev, embed_dim, Activation::Identity, &mut rng));

        let mut decoder = Vec::with_capacity(hidden.len() + 1);
        prev = embed_dim;
        for &h in hidden.iter().rev() {
            decoder.push(init_layer(prev, h, Activation::Relu, &mut rng));
            prev = h;
        }
        decoder.push(init_layer(prev, input_dim, Activation::Identity, &mut rng));

        Ok(Self { encoder, decoder, input_dim, embed_dim })
    }

    /// Raw (unnormalized) latent codes, one row per input row.
    pub fn encode(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::ShapeMismatch {
                context: format!("encoder expects {} features, got {}", self.input_dim, x.ncols()),
            });
        }
        Ok(forward_stack(&self.encoder, x).out)
    }

    /// Decoder applied to latent rows as-is.
    pub fn decode(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.embed_dim {
            return Err(Error::ShapeMismatch {
                context: format!("decoder expects {} dims, got {}", self.embed_dim, z.ncols()),
            });
        }
        Ok(forward_stack(&self.decoder, z).out)
    }

    /// Decoder applied to row-normalized latents; errors on a zero-norm row.
    pub fn decode_normalized(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        let unit = crate::geometry::normalize_rows(z)?;
        self.decode(&unit)
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.layers().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    /// Reads parameter `idx` under the flat ordering: encoder then decoder,
    /// per layer the row-major weights then the bias.
    pub fn get_param(&self, idx: usize) -> f64 {
        let mut i = idx;
        for l in self.layers() {
            if i < l.w.len() {
                return l.w.as_slice().expect("standard layout")[i];
            }
            i -= l.w.len();
            if i < l.b.len() {
                return l.b[i];
            }
            i -= l.b.len();
        }
        panic!("parameter index {idx} out of range");
    }

    /// Writes parameter `idx` under the same ordering as [`Self::get_param`].
    pub fn set_param(&mut self, idx: usize, value: f64) {
        let mut i = idx;
        for l in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            if i < l.w.len() {
                l.w.as_slice_mut().expect("standard layout")[i] = value;
                return;
            }
            i -= l.w.len();
            if i < l.b.len() {
                l.b[i] = value;
                return;
            }
            i -= l.b.len();
        }
        panic!("parameter index {idx} out of range");
    }
}

/// Per-layer parameter gradients (or any parameter-shaped accumulator).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Gradients for every parameter of an [`AutoencoderModel`], same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub encoder: Vec<LayerGrads>,
    pub decoder: Vec<LayerGrads>,
}

impl ModelGrads {
    pub fn zeros_like(model: &AutoencoderModel) -> Self {
        let zero = |ls: &[DenseLayer]| {
            ls.iter()
                .map(|l| LayerGrads { w: Array2::zeros(l.w.dim()), b: Array1::zeros(l.b.len()) })
                .collect()
        };
        Self { encoder: zero(&model.encoder), decoder: zero(&model.decoder) }
    }

    fn layers(&self) -> impl Iterator<Item = &LayerGrads> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    /// Flat read mirroring [`AutoencoderModel::get_param`] ordering.
    pub fn get_flat(&self, idx: usize) -> f64 {
        let mut i = idx;
        for l in self.layers() {
            if i < l.w.len() {
                return l.w.as_slice().expect("standard layout")[i];
            }
            i -= l.w.len();
            if i < l.b.len() {
                return l.b[i];
            }
            i -= l.b.len();
        }
        panic!("gradient index {idx} out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.layers().all(|l| l.w.iter().all(|v| v.is_finite()) && l.b.iter().all(|v| v.is_finite()))
    }

    /// Accumulates `other` into `self` (shapes must match).
    pub fn add_assign(&mut self, other: &ModelGrads) {
        for (a, b) in self
            .encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .zip(other.encoder.iter().chain(other.decoder.iter()))
        {
            a.w += &b.w;
            a.b += &b.b;
        }
    }
}

/// Intermediate activations retained for the backward pass.
pub(crate) struct StackCache {
    inputs: Vec<Array2<f64>>,
    pres: Vec<Array2<f64>>,
    pub(crate) out: Array2<f64>,
}

/// Runs `x` through the layers, keeping per-layer inputs and pre-activations.
pub(crate) fn forward_stack(layers: &[DenseLayer], x: &Array2<f64>) -> StackCache {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pres = Vec::with_capacity(layers.len());
    let mut cur = x.clone();
    for l in layers {
        let pre = cur.dot(&l.w) + &l.b;
        inputs.push(cur);
        let out = pre.mapv(|v| l.activation.apply(v));
        pres.push(pre);
        cur = out;
    }
    StackCache { inputs, pres, out: cur }
}

/// Backpropagates `d_out` (gradient w.r.t. the stack output) through cached
/// activations; returns per-layer parameter gradients and the gradient
/// w.r.t. the stack input.
pub(crate) fn backward_stack(
    layers: &[DenseLayer],
    cache: &StackCache,
    d_out: &Array2<f64>,
) -> (Vec<LayerGrads>, Array2<f64>) {
    let mut grads: Vec<LayerGrads> = Vec::with_capacity(layers.len());
    let mut d_cur = d_out.clone();
    for (i, l) in layers.iter().enumerate().rev() {
        let mut d_pre = d_cur;
        d_pre.zip_mut_with(&cache.pres[i], |g, &pre| *g *= l.activation.grad(pre));
        let dw = cache.inputs[i].t().dot(&d_pre);
        let db = d_pre.sum_axis(ndarray::Axis(0));
        d_cur = d_pre.dot(&l.w.t());
        grads.push(LayerGrads { w: dw, b: db });
    }
    grads.reverse();
    (grads, d_cur)
}

/// Row normalization with the [`NORM_GUARD`] denominator, returning the
/// normalized rows and the raw row norms (needed by the backward pass).
pub(crate) fn normalize_rows_guarded(z: &Array2<f64>) -> (Array2<f64>, Vec<f64>) {
    let mut out = z.clone();
    let mut norms = Vec::with_capacity(z.nrows());
    for mut row in out.rows_mut() {
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let g = n + NORM_GUARD;
        row.mapv_inplace(|v| v / g);
        norms.push(n);
    }
    (out, norms)
}

/// Backward pass of the guarded normalization: given `u = z / (||z|| + eps)`
/// and `d_u`, returns `d_z = d_u/g - z * (d_u . z) / (g^2 ||z||)`.
pub(crate) fn normalize_rows_backward(
    z: &Array2<f64>,
    norms: &[f64],
    d_u: &Array2<f64>,
) -> Array2<f64> {
    let mut d_z = Array2::<f64>::zeros(z.raw_dim());
    for i in 0..z.nrows() {
        let n = norms[i];
        let g = n + NORM_GUARD;
        let zi = z.row(i);
        let dui = d_u.row(i);
        let dot: f64 = dui.iter().zip(zi.iter()).map(|(a, b)| a * b).sum();
        let scale = if n > 0.0 { dot / (g * g * n) } else { 0.0 };
        for j in 0..z.ncols() {
            d_z[[i, j]] = dui[j] / g - zi[j] * scale;
        }
    }
    d_z
}

/// Adam with bias correction. Moment accumulators are parameter-shaped.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: ModelGrads,
    v: ModelGrads,
}

impl OptimizerState {
    pub fn new(model: &AutoencoderModel, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: ModelGrads::zeros_like(model),
            v: ModelGrads::zeros_like(model),
        }
    }
}

/// One Adam update of `model` in place. Rejects non-finite gradients before
/// touching any parameter, so a diverged step never corrupts the model.
pub fn adam_step(state: &mut OptimizerState, model: &mut AutoencoderModel, grads: &ModelGrads) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFiniteGradient { step: state.step + 1 });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);

    let model_layers = model.encoder.iter_mut().chain(model.decoder.iter_mut());
    let m_layers = state.m.encoder.iter_mut().chain(state.m.decoder.iter_mut());
    let v_layers = state.v.encoder.iter_mut().chain(state.v.decoder.iter_mut());
    let g_layers = grads.encoder.iter().chain(grads.decoder.iter());

    for (((p, m), v), g) in model_layers.zip(m_layers).zip(v_layers).zip(g_layers) {
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for ((pw, mw), (vw, &gw)) in p
            .w
            .iter_mut()
            .zip(m.w.iter_mut())
            .zip(v.w.iter_mut().zip(g.w.iter()))
        {
            update(pw, mw, vw, gw);
        }
        for ((pb, mb), (vb, &gb)) in p
            .b
            .iter_mut()
            .zip(m.b.iter_mut())
            .zip(v.b.iter_mut().zip(g.b.iter()))
        {
            update(pb, mb, vb, gb);
        }
    }
    Ok(())
}

/// Compares an analytic gradient against central finite differences over
/// every parameter and returns the maximum relative discrepancy.
///
/// `loss_fn` must return the loss value and its full parameter gradient at
/// the model's current parameters. Step size scales with parameter magnitude;
/// relative error uses `max(|fd|, |analytic|, 1e-8)` as the denominator so
/// near-zero gradients do not divide by zero. Intended for small models.
pub fn numerical_gradient_check<F>(model: &mut AutoencoderModel, loss_fn: F) -> Result<f64>
where
    F: Fn(&AutoencoderModel) -> Result<(f64, ModelGrads)>,
{
    let count = model.param_count();
    if count > 10_000 {
        return Err(Error::InvalidParameter {
            what: format!("gradient check limited to 10000 parameters, model has {count}"),
        });
    }
    let (_, analytic) = loss_fn(model)?;
    let mut worst = 0.0f64;
    for i in 0..count {
        let orig = model.get_param(i);
        let h = 1e-5 * (1.0 + orig.abs());
        model.set_param(i, orig + h);
        let (f_plus, _) = loss_fn(model)?;
        model.set_param(i, orig - h);
        let (f_minus, _) = loss_fn(model)?;
        model.set_param(i, orig);
        let fd = (f_plus - f_minus) / (2.0 * h);
        let an = analytic.get_flat(i);
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Serialized layer: shape descriptor plus row-major weights and bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerCheckpoint {
    pub spec: LayerSpec,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// On-disk model: architecture, weights, embedding dimension, the hash of
/// the training configuration that produced it, and the feature
/// standardizer when one was fitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub input_dim: usize,
    pub embed_dim: usize,
    pub encoder: Vec<LayerCheckpoint>,
    pub decoder: Vec<LayerCheckpoint>,
    pub config_hash: String,
    pub standardizer: Option<Standardizer>,
}

pub const CHECKPOINT_FORMAT: &str = "spherecc-checkpoint-v1";

fn layer_to_checkpoint(l: &DenseLayer) -> LayerCheckpoint {
    LayerCheckpoint {
        spec: l.spec(),
        w: l.w.iter().copied().collect(),
        b: l.b.to_vec(),
    }
}

fn layer_from_checkpoint(lc: &LayerCheckpoint) -> Result<DenseLayer> {
    let LayerSpec { in_dim, out_dim, activation } = lc.spec;
    if lc.w.len() != in_dim * out_dim || lc.b.len() != out_dim {
        return Err(Error::BadFormat {
            what: format!(
                "layer {in_dim}x{out_dim} expects {} weights and {out_dim} biases, got {} and {}",
                in_dim * out_dim,
                lc.w.len(),
                lc.b.len()
            ),
        });
    }
    Ok(DenseLayer {
        w: Array2::from_shape_vec((in_dim, out_dim), lc.w.clone())
            .map_err(|e| Error::ShapeMismatch { context: e.to_string() })?,
        b: Array1::from_vec(lc.b.clone()),
        activation,
    })
}

impl Checkpoint {
    pub fn from_model(
        model: &AutoencoderModel,
        config_hash: impl Into<String>,
        standardizer: Option<Standardizer>,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            input_dim: model.input_dim,
            embed_dim: model.embed_dim,
            encoder: model.encoder.iter().map(layer_to_checkpoint).collect(),
            decoder: model.decoder.iter().map(layer_to_checkpoint).collect(),
            config_hash: config_hash.into(),
            standardizer,
        }
    }

    /// Reconstructs the model, validating the dimension chain end to end.
    pub fn to_model(&self) -> Result<AutoencoderModel> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::BadFormat { what: format!("unknown checkpoint format {:?}", self.format) });
        }
        let encoder: Vec<DenseLayer> =
            self.encoder.iter().map(layer_from_checkpoint).collect::<Result<_>>()?;
        let decoder: Vec<DenseLayer> =
            self.decoder.iter().map(layer_from_checkpoint).collect::<Result<_>>()?;
        let chain_ok = |layers: &[DenseLayer], first: usize, last: usize| {
            !layers.is_empty()
                && layers[0].w.nrows() == first
                && layers.last().unwrap().w.ncols() == last
                && layers.windows(2).all(|p| p[0].w.ncols() == p[1].w.nrows())
        };
        if !chain_ok(&encoder, self.input_dim, self.embed_dim)
            || !chain_ok(&decoder, self.embed_dim, self.input_dim)
        {
            return Err(Error::BadFormat { what: "checkpoint dimension chain is inconsistent".into() });
        }
        Ok(AutoencoderModel { encoder, decoder, input_dim: self.input_dim, embed_dim: self.embed_dim })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
