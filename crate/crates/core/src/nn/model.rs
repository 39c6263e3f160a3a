//! Single transformer encoder with learned relative position bias.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::{Matrix, Scalar};

use super::tape::{Tape, Var};
use super::NnError;

const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    /// Relative distances beyond this share the boundary bias entry.
    pub max_rel_dist: usize,
    pub dropout: f64,
    /// Layer norm before attention and feed-forward. Only `true` is supported.
    pub pre_norm: bool,
    pub key_pos_embedding: bool,
    pub d_in: usize,
    pub d_out: usize,
}

impl ModelConfig {
    pub fn tiny(d_in: usize, d_out: usize) -> Self {
        Self {
            layers: 2,
            heads: 4,
            d_model: 64,
            d_ff: 256,
            max_rel_dist: 48,
            dropout: 0.0,
            pre_norm: true,
            key_pos_embedding: false,
            d_in,
            d_out,
        }
    }

    pub fn paper(d_in: usize, d_out: usize) -> Self {
        Self {
            layers: 6,
            heads: 8,
            d_model: 1024,
            d_ff: 4096,
            max_rel_dist: 48,
            dropout: 0.1,
            pre_norm: true,
            key_pos_embedding: false,
            d_in,
            d_out,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: String| Err(NnError::Config(m));
        if self.heads == 0 || self.d_model % self.heads != 0 {
            return bad(format!(
                "d_model {} is not divisible by heads {}",
                self.d_model, self.heads
            ));
        }
        if self.max_rel_dist < 1 {
            return bad("max_rel_dist must be at least 1".into());
        }
        if !self.pre_norm {
            return bad("only pre-norm encoder blocks are implemented".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.d_in == 0 || self.d_out == 0 || self.d_ff == 0 {
            return bad("zero-width layer".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    /// `in × out`
    pub weight: Matrix<T>,
    /// `1 × out`
    pub bias: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Norm<T> {
    pub scale: Matrix<T>,
    pub offset: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer<T> {
    pub attn_norm: Norm<T>,
    pub query: Linear<T>,
    pub key: Linear<T>,
    pub value: Linear<T>,
    pub out: Linear<T>,
    pub ff_norm: Norm<T>,
    pub ff_in: Linear<T>,
    pub ff_out: Linear<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub input: Linear<T>,
    /// `(max_rel_dist + 1) × d_model`, indexed by distance to the nearest keyframe.
    pub key_pos: Option<Matrix<T>>,
    /// `heads × (2·max_rel_dist + 1)`, shared by every layer.
    pub rel_bias: Matrix<T>,
    pub layers: Vec<EncoderLayer<T>>,
    pub final_norm: Norm<T>,
    pub output: Linear<T>,
}

/// How parameters are initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Glorot-uniform projections, zero relative bias and a zero output
    /// projection, so the untrained model predicts all zeros.
    Training,
    /// Every tensor random, including biases and norm parameters. Used for
    /// gradient checks where zero blocks would hide errors.
    Dense,
}

fn glorot<T: Scalar>(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Matrix<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_fn(fan_in, fan_out, |_, _| T::from_f64(rng.gen_range(-limit..limit)))
}

fn small<T: Scalar>(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |_, _| T::from_f64(rng.gen_range(-scale..scale)))
}

impl<T: Scalar> Linear<T> {
    fn init(rng: &mut impl Rng, fan_in: usize, fan_out: usize, init: Init) -> Self {
        let bias = match init {
            Init::Training => Matrix::zeros(1, fan_out),
            Init::Dense => small(rng, 1, fan_out, 0.1),
        };
        Self {
            weight: glorot(rng, fan_in, fan_out),
            bias,
        }
    }
}

impl<T: Scalar> Norm<T> {
    fn init(rng: &mut impl Rng, width: usize, init: Init) -> Self {
        match init {
            Init::Training => Self {
                scale: Matrix::filled(1, width, T::ONE),
                offset: Matrix::zeros(1, width),
            },
            Init::Dense => Self {
                scale: Matrix::from_fn(1, width, |_, _| T::from_f64(1.0 + rng.gen_range(-0.2..0.2))),
                offset: small(rng, 1, width, 0.1),
            },
        }
    }
}

impl<T: Scalar> ModelParams<T> {
    pub fn init(cfg: &ModelConfig, rng: &mut impl Rng, init: Init) -> Result<Self, NnError> {
        cfg.validate()?;
        let d = cfg.d_model;
        let input = Linear::init(rng, cfg.d_in, d, init);
        let key_pos = cfg
            .key_pos_embedding
            .then(|| small(rng, cfg.max_rel_dist + 1, d, 0.02));
        let rel_bias = match init {
            Init::Training => Matrix::zeros(cfg.heads, 2 * cfg.max_rel_dist + 1),
            Init::Dense => small(rng, cfg.heads, 2 * cfg.max_rel_dist + 1, 0.5),
        };
        let layers = (0..cfg.layers)
            .map(|_| EncoderLayer {
                attn_norm: Norm::init(rng, d, init),
                query: Linear::init(rng, d, d, init),
                key: Linear::init(rng, d, d, init),
                value: Linear::init(rng, d, d, init),
                out: Linear::init(rng, d, d, init),
                ff_norm: Norm::init(rng, d, init),
                ff_in: Linear::init(rng, d, cfg.d_ff, init),
                ff_out: Linear::init(rng, cfg.d_ff, d, init),
            })
            .collect();
        let final_norm = Norm::init(rng, d, init);
        let output = match init {
            Init::Training => Linear {
                weight: Matrix::zeros(d, cfg.d_out),
                bias: Matrix::zeros(1, cfg.d_out),
            },
            Init::Dense => Linear::init(rng, d, cfg.d_out, init),
        };
        Ok(Self {
            input,
            key_pos,
            rel_bias,
            layers,
            final_norm,
            output,
        })
    }

    /// Every tensor with a stable dotted name, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Matrix<T>)> {
        fn lin<'a, T>(out: &mut Vec<(String, &'a Matrix<T>)>, p: &str, l: &'a Linear<T>) {
            out.push((format!("{p}.weight"), &l.weight));
            out.push((format!("{p}.bias"), &l.bias));
        }
        let mut out = Vec::new();
        lin(&mut out, "input", &self.input);
        if let Some(k) = &self.key_pos {
            out.push(("key_pos".into(), k));
        }
        out.push(("rel_bias".into(), &self.rel_bias));
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layers.{i}.attn_norm.scale"), &l.attn_norm.scale));
            out.push((format!("layers.{i}.attn_norm.offset"), &l.attn_norm.offset));
            lin(&mut out, &format!("layers.{i}.query"), &l.query);
            lin(&mut out, &format!("layers.{i}.key"), &l.key);
            lin(&mut out, &format!("layers.{i}.value"), &l.value);
            lin(&mut out, &format!("layers.{i}.out"), &l.out);
            out.push((format!("layers.{i}.ff_norm.scale"), &l.ff_norm.scale));
            out.push((format!("layers.{i}.ff_norm.offset"), &l.ff_norm.offset));
            lin(&mut out, &format!("layers.{i}.ff_in"), &l.ff_in);
            lin(&mut out, &format!("layers.{i}.ff_out"), &l.ff_out);
        }
        out.push(("final_norm.scale".into(), &self.final_norm.scale));
        out.push(("final_norm.offset".into(), &self.final_norm.offset));
        lin(&mut out, "output", &self.output);
        out
    }

    /// Mutable tensors in the same order as [`ModelParams::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut out: Vec<&mut Matrix<T>> = vec![&mut self.input.weight, &mut self.input.bias];
        if let Some(k) = &mut self.key_pos {
            out.push(k);
        }
        out.push(&mut self.rel_bias);
        for l in &mut self.layers {
            out.push(&mut l.attn_norm.scale);
            out.push(&mut l.attn_norm.offset);
            for lin in [&mut l.query, &mut l.key, &mut l.value, &mut l.out] {
                out.push(&mut lin.weight);
                out.push(&mut lin.bias);
            }
            out.push(&mut l.ff_norm.scale);
            out.push(&mut l.ff_norm.offset);
            out.push(&mut l.ff_in.weight);
            out.push(&mut l.ff_in.bias);
            out.push(&mut l.ff_out.weight);
            out.push(&mut l.ff_out.bias);
        }
        out.push(&mut self.final_norm.scale);
        out.push(&mut self.final_norm.offset);
        out.push(&mut self.output.weight);
        out.push(&mut self.output.bias);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named().iter().map(|(_, m)| m.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let lin = |l: &Linear<T>| Linear {
            weight: l.weight.cast(),
            bias: l.bias.cast(),
        };
        let norm = |n: &Norm<T>| Norm {
            scale: n.scale.cast(),
            offset: n.offset.cast(),
        };
        ModelParams {
            input: lin(&self.input),
            key_pos: self.key_pos.as_ref().map(|k| k.cast()),
            rel_bias: self.rel_bias.cast(),
            layers: self
                .layers
                .iter()
                .map(|l| EncoderLayer {
                    attn_norm: norm(&l.attn_norm),
                    query: lin(&l.query),
                    key: lin(&l.key),
                    value: lin(&l.value),
                    out: lin(&l.out),
                    ff_norm: norm(&l.ff_norm),
                    ff_in: lin(&l.ff_in),
                    ff_out: lin(&l.ff_out),
                })
                .collect(),
            final_norm: norm(&self.final_norm),
            output: lin(&self.output),
        }
    }

    /// Check tensor shapes against `cfg`.
    pub fn check_shapes(&self, cfg: &ModelConfig) -> Result<(), NnError> {
        let mine = self.named();
        let expect = expected_shapes(cfg);
        if mine.len() != expect.len() {
            return Err(NnError::Shape(format!(
                "{} tensors, config implies {}",
                mine.len(),
                expect.len()
            )));
        }
        for ((n, a), b) in mine.iter().zip(&expect) {
            if a.shape() != *b {
                return Err(NnError::Shape(format!(
                    "{n} is {:?}, config implies {b:?}",
                    a.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Tensor shapes implied by `cfg`, in [`ModelParams::named`] order.
pub fn expected_shapes(cfg: &ModelConfig) -> Vec<(usize, usize)> {
    let d = cfg.d_model;
    let mut s = vec![(cfg.d_in, d), (1, d)];
    if cfg.key_pos_embedding {
        s.push((cfg.max_rel_dist + 1, d));
    }
    s.push((cfg.heads, 2 * cfg.max_rel_dist + 1));
    for _ in 0..cfg.layers {
        s.extend([(1, d), (1, d)]);
        for _ in 0..4 {
            s.extend([(d, d), (1, d)]);
        }
        s.extend([(1, d), (1, d), (d, cfg.d_ff), (1, cfg.d_ff), (cfg.d_ff, d), (1, d)]);
    }
    s.extend([(1, d), (1, d), (d, cfg.d_out), (1, cfg.d_out)]);
    s
}

/// Column of the bias table used for query frame `i` attending to key frame `j`.
pub fn relative_bucket(i: usize, j: usize, max_rel_dist: usize) -> usize {
    let d = j as i64 - i as i64;
    let m = max_rel_dist as i64;
    (d.clamp(-m, m) + m) as usize
}

/// Per-head `L × L` additive attention bias.
pub fn relative_bias<T: Scalar>(len: usize, cfg: &ModelConfig, params: &ModelParams<T>) -> Vec<Matrix<T>> {
    (0..cfg.heads)
        .map(|h| {
            Matrix::from_fn(len, len, |i, j| {
                params.rel_bias.get(h, relative_bucket(i, j, cfg.max_rel_dist))
            })
        })
        .collect()
}

/// Distance from frame `i` to the nearest keyframe, clamped to `max_dist`.
///
/// The keyframes are the last context frame `context - 1` and the final
/// frame `len - 1`.
pub fn keyframe_distance(i: usize, context: usize, len: usize, max_dist: usize) -> usize {
    let last_ctx = context - 1;
    let target = len - 1;
    let d = if i <= last_ctx {
        last_ctx - i
    } else {
        (i - last_ctx).min(target.abs_diff(i))
    };
    d.min(max_dist)
}

/// Additive key-position signal, `L × d_model`.
pub fn key_position_embedding<T: Scalar>(
    len: usize,
    context: usize,
    cfg: &ModelConfig,
    params: &ModelParams<T>,
) -> Result<Matrix<T>, NnError> {
    let table = match (&params.key_pos, cfg.key_pos_embedding) {
        (Some(t), true) => t,
        _ => return Err(NnError::KeyPositionDisabled),
    };
    check_context(len, context)?;
    Ok(Matrix::from_fn(len, cfg.d_model, |i, c| {
        table.get(keyframe_distance(i, context, len, cfg.max_rel_dist), c)
    }))
}

fn check_context(len: usize, context: usize) -> Result<(), NnError> {
    if context == 0 || context >= len {
        return Err(NnError::Shape(format!(
            "context {context} must be in 1..{len} for a window of {len} frames"
        )));
    }
    Ok(())
}

/// Extra inputs to a forward pass.
pub struct ForwardOptions<'a, R: Rng> {
    /// Number of context frames; needed only for key-position embeddings.
    pub context: Option<usize>,
    /// Dropout source. `None` disables dropout regardless of the config.
    pub dropout_rng: Option<&'a mut R>,
}

impl ForwardOptions<'_, rand::rngs::mock::StepRng> {
    pub fn eval(context: usize) -> Self {
        Self {
            context: Some(context),
            dropout_rng: None,
        }
    }
}

/// Output of [`encoder_forward`]; keep it around to call [`Forward::backward`].
pub struct Forward<T> {
    pub tape: Tape<T>,
    pub output: Var,
    /// Attention probabilities per layer and head, as tape nodes.
    pub attention: Vec<Vec<Var>>,
}

impl<T: Scalar> Forward<T> {
    pub fn value(&self) -> &Matrix<T> {
        self.tape.value(self.output)
    }

    /// Gradients for every tensor, in [`ModelParams::named`] order.
    pub fn backward(&mut self, loss_grad: Matrix<T>) -> Result<Vec<Matrix<T>>, NnError> {
        self.tape.backward(self.output, loss_grad)
    }
}

struct LinearVars {
    weight: Var,
    bias: Var,
}

struct NormVars {
    scale: Var,
    offset: Var,
}

struct LayerVars {
    attn_norm: NormVars,
    query: LinearVars,
    key: LinearVars,
    value: LinearVars,
    out: LinearVars,
    ff_norm: NormVars,
    ff_in: LinearVars,
    ff_out: LinearVars,
}

struct ParamVars {
    input: LinearVars,
    key_pos: Option<Var>,
    rel_bias: Var,
    layers: Vec<LayerVars>,
    final_norm: NormVars,
    output: LinearVars,
}

struct Loader {
    slot: usize,
}

impl Loader {
    fn new() -> Self {
        Self { slot: 0 }
    }

    fn param<T: Scalar>(&mut self, tape: &mut Tape<T>, m: &Matrix<T>) -> Var {
        let v = tape.param(m.clone(), self.slot);
        self.slot += 1;
        v
    }

    fn linear<T: Scalar>(&mut self, tape: &mut Tape<T>, l: &Linear<T>) -> LinearVars {
        LinearVars {
            weight: self.param(tape, &l.weight),
            bias: self.param(tape, &l.bias),
        }
    }

    fn norm<T: Scalar>(&mut self, tape: &mut Tape<T>, n: &Norm<T>) -> NormVars {
        NormVars {
            scale: self.param(tape, &n.scale),
            offset: self.param(tape, &n.offset),
        }
    }

    fn layer<T: Scalar>(&mut self, tape: &mut Tape<T>, l: &EncoderLayer<T>) -> LayerVars {
        LayerVars {
            attn_norm: self.norm(tape, &l.attn_norm),
            query: self.linear(tape, &l.query),
            key: self.linear(tape, &l.key),
            value: self.linear(tape, &l.value),
            out: self.linear(tape, &l.out),
            ff_norm: self.norm(tape, &l.ff_norm),
            ff_in: self.linear(tape, &l.ff_in),
            ff_out: self.linear(tape, &l.ff_out),
        }
    }

    /// Registers tensors in [`ModelParams::named`] order.
    fn model<T: Scalar>(&mut self, tape: &mut Tape<T>, p: &ModelParams<T>) -> ParamVars {
        let input = self.linear(tape, &p.input);
        let key_pos = p.key_pos.as_ref().map(|k| self.param(tape, k));
        let rel_bias = self.param(tape, &p.rel_bias);
        let layers = p.layers.iter().map(|l| self.layer(tape, l)).collect();
        let final_norm = self.norm(tape, &p.final_norm);
        let output = self.linear(tape, &p.output);
        ParamVars {
            input,
            key_pos,
            rel_bias,
            layers,
            final_norm,
            output,
        }
    }
}

fn linear<T: Scalar>(tape: &mut Tape<T>, x: Var, l: &LinearVars) -> Var {
    let y = tape.matmul(x, l.weight);
    tape.add_row(y, l.bias)
}

fn norm<T: Scalar>(tape: &mut Tape<T>, x: Var, n: &NormVars) -> Var {
    tape.layer_norm(x, n.scale, n.offset, T::from_f64(NORM_EPS))
}

fn dropout<T: Scalar, R: Rng>(tape: &mut Tape<T>, x: Var, p: f64, rng: &mut Option<&mut R>) -> Var {
    match rng {
        Some(rng) if p > 0.0 => {
            let keep = T::from_f64(1.0 / (1.0 - p));
            let mask = (0..tape.value(x).len())
                .map(|_| if rng.gen::<f64>() < p { T::ZERO } else { keep })
                .collect();
            tape.mul_const(x, mask)
        }
        _ => x,
    }
}

/// Multi-head attention over all frames; no causal or padding mask.
///
/// Returns the attention output and the per-head probability nodes.
fn attention<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    bias: &[Var],
    p: &LayerVars,
    heads: usize,
    layer: usize,
) -> Result<(Var, Vec<Var>), NnError> {
    let d = tape.value(x).cols();
    let dh = d / heads;
    let q = linear(tape, x, &p.query);
    let k = linear(tape, x, &p.key);
    let v = linear(tape, x, &p.value);
    let scale = T::from_f64(1.0 / (dh as f64).sqrt());
    let mut outs = Vec::with_capacity(heads);
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = tape.slice_cols(q, h * dh, dh);
        let kh = tape.slice_cols(k, h * dh, dh);
        let vh = tape.slice_cols(v, h * dh, dh);
        let s = tape.matmul_t(qh, kh);
        let s = tape.scale(s, scale);
        let s = tape.add(s, bias[h]);
        if !tape.value(s).is_finite() {
            return Err(NnError::NonFiniteLogits { layer, head: h });
        }
        let a = tape.softmax_rows(s);
        probs.push(a);
        outs.push(tape.matmul(a, vh));
    }
    let cat = tape.concat_cols(&outs);
    Ok((linear(tape, cat, &p.out), probs))
}

/// Attention block of one layer evaluated on its own, for inspection and tests.
///
/// `bias` holds one `L × L` matrix per head. Returns the output and the
/// attention probabilities per head.
pub fn attention_forward<T: Scalar>(
    x: &Matrix<T>,
    bias: &[Matrix<T>],
    layer: &EncoderLayer<T>,
    heads: usize,
) -> Result<(Matrix<T>, Vec<Matrix<T>>), NnError> {
    let mut tape = Tape::new();
    let vars = Loader::new().layer(&mut tape, layer);
    let xv = tape.constant(x.clone());
    let bv: Vec<Var> = bias.iter().map(|b| tape.constant(b.clone())).collect();
    if bv.len() != heads {
        return Err(NnError::Shape(format!("{} bias matrices for {heads} heads", bv.len())));
    }
    let (out, probs) = attention(&mut tape, xv, &bv, &vars, heads, 0)?;
    Ok((
        tape.value(out).clone(),
        probs.iter().map(|p| tape.value(*p).clone()).collect(),
    ))
}

/// Run the encoder on one window of `L × d_in` features.
///
/// input projection → optional key-position embedding → pre-norm blocks
/// (norm, attention, residual; norm, ReLU feed-forward, residual) → final
/// norm → output projection.
pub fn encoder_forward<T: Scalar, R: Rng>(
    features: &Matrix<T>,
    cfg: &ModelConfig,
    params: &ModelParams<T>,
    mut opts: ForwardOptions<'_, R>,
) -> Result<Forward<T>, NnError> {
    if features.cols() != cfg.d_in {
        return Err(NnError::Shape(format!(
            "features have {} columns, model expects {}",
            features.cols(),
            cfg.d_in
        )));
    }
    let len = features.rows();
    if len == 0 {
        return Err(NnError::Shape("empty window".into()));
    }
    let mut tape = Tape::new();
    let p = Loader::new().model(&mut tape, params);
    let x = tape.constant(features.clone());
    let mut h = linear(&mut tape, x, &p.input);

    if cfg.key_pos_embedding {
        let table = p.key_pos.ok_or(NnError::KeyPositionDisabled)?;
        let context = opts.context.ok_or_else(|| {
            NnError::Shape("key-position embeddings need the context length".into())
        })?;
        check_context(len, context)?;
        let d = cfg.d_model;
        let idx = (0..len)
            .flat_map(|i| {
                let row = keyframe_distance(i, context, len, cfg.max_rel_dist);
                (0..d).map(move |c| row * d + c)
            })
            .collect();
        let emb = tape.gather(table, idx, len, d);
        h = tape.add(h, emb);
    }

    let width = 2 * cfg.max_rel_dist + 1;
    let bias: Vec<Var> = (0..cfg.heads)
        .map(|head| {
            let idx = (0..len)
                .flat_map(|i| (0..len).map(move |j| head * width + relative_bucket(i, j, cfg.max_rel_dist)))
                .collect();
            tape.gather(p.rel_bias, idx, len, len)
        })
        .collect();

    let mut attention_probs = Vec::with_capacity(cfg.layers);
    for (li, lv) in p.layers.iter().enumerate() {
        let n = norm(&mut tape, h, &lv.attn_norm);
        let (a, probs) = attention(&mut tape, n, &bias, lv, cfg.heads, li)?;
        attention_probs.push(probs);
        let a = dropout(&mut tape, a, cfg.dropout, &mut opts.dropout_rng);
        h = tape.add(h, a);

        let n = norm(&mut tape, h, &lv.ff_norm);
        let f = linear(&mut tape, n, &lv.ff_in);
        let f = tape.relu(f);
        let f = linear(&mut tape, f, &lv.ff_out);
        let f = dropout(&mut tape, f, cfg.dropout, &mut opts.dropout_rng);
        h = tape.add(h, f);
    }
    let n = norm(&mut tape, h, &p.final_norm);
    let output = linear(&mut tape, n, &p.output);
    Ok(Forward {
        tape,
        output,
        attention: attention_probs,
    })
}

/// Forward pass without dropout, returning only the `L × d_out` prediction.
pub fn predict<T: Scalar>(
    features: &Matrix<T>,
    context: usize,
    cfg: &ModelConfig,
    params: &ModelParams<T>,
) -> Result<Matrix<T>, NnError> {
    let f = encoder_forward(features, cfg, params, ForwardOptions::eval(context))?;
    Ok(f.value().clone())
}
