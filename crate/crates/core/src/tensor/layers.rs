//! Layer kinds, their static shape rules and their forward passes.
//!
//! Sequences are `[time, features]`; vectors are `[1, features]`; 1-D
//! convolutions see `[length, channels]` and 3-D ones `[t, h, w, channels]`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::lstm::lstm_sequence;
use super::{shape_err, Graph, ParamId, ParamStore, Real, Tensor, TensorError, Var};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LayerSpec {
    /// Token indices → `[len, dim]`.
    Embedding {
        vocab: usize,
        dim: usize,
    },
    Conv1D {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    Conv3D {
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 3],
    },
    MaxPool1D {
        width: usize,
    },
    MaxPool3D {
        window: [usize; 3],
    },
    /// Inverted dropout: scaled by `1 / (1 - rate)` in training, identity in eval.
    Dropout {
        rate: f64,
    },
    Tanh,
    Dense {
        inputs: usize,
        outputs: usize,
    },
    /// Full output sequence `[time, hidden]`.
    Lstm {
        inputs: usize,
        hidden: usize,
    },
    LastStep,
    MeanOverTime,
    Flatten,
    /// Applies `inner` to every row, reshaped to `frame_shape`, with shared weights.
    TimeDistributed {
        frame_shape: Vec<usize>,
        inner: Vec<LayerSpec>,
    },
    Concat,
    Softmax,
}

fn positive(name: &str, v: usize) -> Result<(), TensorError> {
    if v == 0 {
        Err(TensorError::InvalidLayer(format!("{name} must be positive")))
    } else {
        Ok(())
    }
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Embedding { .. } => "embedding",
            LayerSpec::Conv1D { .. } => "conv1d",
            LayerSpec::Conv3D { .. } => "conv3d",
            LayerSpec::MaxPool1D { .. } => "maxpool1d",
            LayerSpec::MaxPool3D { .. } => "maxpool3d",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Tanh => "tanh",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::LastStep => "last_step",
            LayerSpec::MeanOverTime => "mean_over_time",
            LayerSpec::Flatten => "flatten",
            LayerSpec::TimeDistributed { .. } => "time_distributed",
            LayerSpec::Concat => "concat",
            LayerSpec::Softmax => "softmax",
        }
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        match self {
            LayerSpec::Embedding { vocab, dim } => {
                positive("vocab", *vocab)?;
                positive("dim", *dim)
            }
            LayerSpec::Conv1D { in_channels, out_channels, kernel } => {
                positive("in_channels", *in_channels)?;
                positive("out_channels", *out_channels)?;
                positive("kernel", *kernel)
            }
            LayerSpec::Conv3D { in_channels, out_channels, kernel } => {
                positive("in_channels", *in_channels)?;
                positive("out_channels", *out_channels)?;
                kernel.iter().try_for_each(|&k| positive("kernel", k))
            }
            LayerSpec::MaxPool1D { width } => positive("width", *width),
            LayerSpec::MaxPool3D { window } => window.iter().try_for_each(|&k| positive("window", k)),
            LayerSpec::Dropout { rate } => {
                if (0.0..1.0).contains(rate) {
                    Ok(())
                } else {
                    Err(TensorError::InvalidLayer(format!("dropout rate {rate} outside [0, 1)")))
                }
            }
            LayerSpec::Dense { inputs, outputs } => {
                positive("inputs", *inputs)?;
                positive("outputs", *outputs)
            }
            LayerSpec::Lstm { inputs, hidden } => {
                positive("inputs", *inputs)?;
                positive("hidden", *hidden)
            }
            LayerSpec::TimeDistributed { frame_shape, inner } => {
                frame_shape.iter().try_for_each(|&k| positive("frame_shape", k))?;
                inner.iter().try_for_each(LayerSpec::validate)
            }
            LayerSpec::Tanh
            | LayerSpec::LastStep
            | LayerSpec::MeanOverTime
            | LayerSpec::Flatten
            | LayerSpec::Concat
            | LayerSpec::Softmax => Ok(()),
        }
    }

    /// Output shape for a given input shape, without running anything.
    /// For `Embedding` the input shape is `[len]`.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, TensorError> {
        let op = self.kind();
        match (self, input) {
            (LayerSpec::Embedding { dim, .. }, &[len]) => Ok(vec![len, *dim]),
            (LayerSpec::Conv1D { in_channels, out_channels, kernel }, &[len, c])
                if c == *in_channels && len >= *kernel =>
            {
                Ok(vec![len + 1 - kernel, *out_channels])
            }
            (LayerSpec::Conv3D { in_channels, out_channels, kernel }, &[t, h, w, c])
                if c == *in_channels && t >= kernel[0] && h >= kernel[1] && w >= kernel[2] =>
            {
                Ok(vec![t + 1 - kernel[0], h + 1 - kernel[1], w + 1 - kernel[2], *out_channels])
            }
            (LayerSpec::MaxPool1D { width }, &[len, c]) if len >= *width => Ok(vec![len / width, c]),
            (LayerSpec::MaxPool3D { window }, &[t, h, w, c]) if t >= window[0] && h >= window[1] && w >= window[2] => {
                Ok(vec![t / window[0], h / window[1], w / window[2], c])
            }
            (LayerSpec::Dropout { .. } | LayerSpec::Tanh | LayerSpec::Softmax, s) => Ok(s.to_vec()),
            (LayerSpec::Dense { inputs, outputs }, &[r, c]) if c == *inputs => Ok(vec![r, *outputs]),
            (LayerSpec::Lstm { inputs, hidden }, &[t, c]) if c == *inputs && t > 0 => Ok(vec![t, *hidden]),
            (LayerSpec::LastStep | LayerSpec::MeanOverTime, &[t, c]) if t > 0 => Ok(vec![1, c]),
            (LayerSpec::Flatten, s) => Ok(vec![1, s.iter().product()]),
            (LayerSpec::TimeDistributed { frame_shape, inner }, &[t, c])
                if c == frame_shape.iter().product::<usize>() =>
            {
                let mut s = frame_shape.clone();
                for l in inner {
                    s = l.output_shape(&s)?;
                }
                Ok(vec![t, s.iter().product()])
            }
            (LayerSpec::Concat, s) => Ok(s.to_vec()),
            (_, s) => Err(shape_err(op, "a compatible input", s)),
        }
    }

    /// Shape of concatenating `[1, a]`, `[1, b]`, ... along the columns.
    pub fn concat_shape(inputs: &[Vec<usize>]) -> Result<Vec<usize>, TensorError> {
        let mut cols = 0;
        for s in inputs {
            match s.as_slice() {
                [1, c] => cols += c,
                other => return Err(shape_err("concat", "[1, c] inputs", other)),
            }
        }
        Ok(vec![1, cols])
    }

    /// Number of trainable scalars.
    pub fn num_params(&self) -> usize {
        match self {
            LayerSpec::Embedding { vocab, dim } => vocab * dim,
            LayerSpec::Conv1D { in_channels, out_channels, kernel } => {
                kernel * in_channels * out_channels + out_channels
            }
            LayerSpec::Conv3D { in_channels, out_channels, kernel } => {
                kernel.iter().product::<usize>() * in_channels * out_channels + out_channels
            }
            LayerSpec::Dense { inputs, outputs } => inputs * outputs + outputs,
            LayerSpec::Lstm { inputs, hidden } => 4 * hidden * (inputs + hidden + 1),
            LayerSpec::TimeDistributed { inner, .. } => inner.iter().map(LayerSpec::num_params).sum(),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Mode and dropout stream of one forward pass.
pub struct ForwardCtx<'r> {
    pub mode: Mode,
    rng: Option<&'r mut Rng>,
}

impl<'r> ForwardCtx<'r> {
    pub fn eval() -> Self {
        Self { mode: Mode::Eval, rng: None }
    }

    pub fn train(rng: &'r mut Rng) -> Self {
        Self { mode: Mode::Train, rng: Some(rng) }
    }
}

/// A [`LayerSpec`] bound to its parameters in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    spec: LayerSpec,
    name: String,
    params: Vec<ParamId>,
    inner: Vec<Layer>,
}

impl Layer {
    /// Validates `spec` and registers its parameters as `"{name}.<param>"`.
    /// Weights are Glorot-uniform, biases zero (LSTM forget-gate bias one).
    pub fn build<T: Real>(
        spec: LayerSpec,
        name: &str,
        store: &mut ParamStore<T>,
        rng: &mut Rng,
    ) -> Result<Self, TensorError> {
        spec.validate()?;
        let mut params = Vec::new();
        let mut inner = Vec::new();
        macro_rules! add {
            ($suffix:expr, $t:expr) => {
                params.push(store.add(format!("{name}.{}", $suffix), $t))
            };
        }
        match &spec {
            LayerSpec::Embedding { vocab, dim } => {
                add!("table", Tensor::glorot(vec![*vocab, *dim], *vocab, *dim, rng));
            }
            LayerSpec::Conv1D { in_channels, out_channels, kernel } => {
                let w = Tensor::glorot(
                    vec![*kernel, *in_channels, *out_channels],
                    kernel * in_channels,
                    kernel * out_channels,
                    rng,
                );
                add!("w", w);
                add!("b", Tensor::zeros(vec![*out_channels]));
            }
            LayerSpec::Conv3D { in_channels, out_channels, kernel } => {
                let taps: usize = kernel.iter().product();
                let shape = vec![kernel[0], kernel[1], kernel[2], *in_channels, *out_channels];
                add!("w", Tensor::glorot(shape, taps * in_channels, taps * out_channels, rng));
                add!("b", Tensor::zeros(vec![*out_channels]));
            }
            LayerSpec::Dense { inputs, outputs } => {
                add!("w", Tensor::glorot(vec![*inputs, *outputs], *inputs, *outputs, rng));
                add!("b", Tensor::zeros(vec![*outputs]));
            }
            LayerSpec::Lstm { inputs, hidden } => {
                let h = *hidden;
                add!("w_x", Tensor::glorot(vec![*inputs, 4 * h], *inputs, 4 * h, rng));
                add!("w_h", Tensor::glorot(vec![h, 4 * h], h, 4 * h, rng));
                let mut b = Tensor::zeros(vec![4 * h]);
                b.data_mut()[h..2 * h].iter_mut().for_each(|v| *v = T::one());
                add!("b", b);
            }
            LayerSpec::TimeDistributed { inner: specs, .. } => {
                for (i, s) in specs.iter().enumerate() {
                    inner.push(Layer::build(s.clone(), &format!("{name}.{i}.{}", s.kind()), store, rng)?);
                }
            }
            _ => {}
        }
        Ok(Self { spec, name: name.to_string(), params, inner })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    /// Embedding lookup; only valid for `Embedding` layers.
    pub fn embed<T: Real>(&self, g: &mut Graph<T>, indices: &[usize]) -> Result<Var, TensorError> {
        match self.spec {
            LayerSpec::Embedding { .. } => {
                let table = g.param(self.params[0]);
                g.gather(table, indices)
            }
            _ => Err(TensorError::InvalidLayer(format!("{} cannot embed indices", self.spec.kind()))),
        }
    }

    /// Concatenation; only valid for `Concat` layers.
    pub fn forward_many<T: Real>(&self, g: &mut Graph<T>, xs: &[Var]) -> Result<Var, TensorError> {
        match self.spec {
            LayerSpec::Concat => g.concat_cols(xs),
            _ => Err(TensorError::InvalidLayer(format!("{} takes a single input", self.spec.kind()))),
        }
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, x: Var, ctx: &mut ForwardCtx<'_>) -> Result<Var, TensorError> {
        match &self.spec {
            LayerSpec::Embedding { .. } | LayerSpec::Concat => {
                Err(TensorError::InvalidLayer(format!("{} needs its dedicated entry point", self.spec.kind())))
            }
            LayerSpec::Conv1D { .. } => {
                let (w, b) = (g.param(self.params[0]), g.param(self.params[1]));
                g.conv1d(x, w, b)
            }
            LayerSpec::Conv3D { .. } => {
                let (w, b) = (g.param(self.params[0]), g.param(self.params[1]));
                g.conv3d(x, w, b)
            }
            LayerSpec::MaxPool1D { width } => g.max_pool(x, &[*width]),
            LayerSpec::MaxPool3D { window } => g.max_pool(x, window),
            LayerSpec::Dropout { rate } => match ctx.mode {
                Mode::Eval => Ok(x),
                Mode::Train if *rate == 0.0 => Ok(x),
                Mode::Train => {
                    let rng = ctx.rng.as_deref_mut().ok_or(TensorError::MissingRng)?;
                    let keep = 1.0 - rate;
                    let scale = T::lit(1.0 / keep);
                    let n = g.value(x).numel();
                    let mask = (0..n).map(|_| if rng.gen::<f64>() < keep { scale } else { T::zero() }).collect();
                    g.mask(x, mask)
                }
            },
            LayerSpec::Tanh => Ok(g.tanh(x)),
            LayerSpec::Softmax => Ok(g.softmax(x)),
            LayerSpec::Dense { inputs, .. } => {
                if g.shape(x).len() != 2 || g.shape(x)[1] != *inputs {
                    return Err(shape_err("dense", format!("[_, {inputs}]"), g.shape(x)));
                }
                let (w, b) = (g.param(self.params[0]), g.param(self.params[1]));
                let y = g.matmul(x, w)?;
                g.add_bias(y, b)
            }
            LayerSpec::Lstm { inputs, hidden } => {
                if g.shape(x).len() != 2 || g.shape(x)[1] != *inputs || g.shape(x)[0] == 0 {
                    return Err(shape_err("lstm", format!("[t > 0, {inputs}]"), g.shape(x)));
                }
                let (wx, wh, b) = (g.param(self.params[0]), g.param(self.params[1]), g.param(self.params[2]));
                lstm_sequence(g, x, wx, wh, b, *hidden)
            }
            LayerSpec::LastStep => {
                let rows = *g.shape(x).first().unwrap_or(&0);
                if rows == 0 {
                    return Err(shape_err("last_step", "a non-empty sequence", g.shape(x)));
                }
                g.row(x, rows - 1)
            }
            LayerSpec::MeanOverTime => g.mean_rows(x),
            LayerSpec::Flatten => {
                let n = g.value(x).numel();
                g.reshape(x, vec![1, n])
            }
            LayerSpec::TimeDistributed { frame_shape, .. } => {
                let steps = *g.shape(x).first().unwrap_or(&0);
                if g.shape(x).len() != 2 || steps == 0 {
                    return Err(shape_err("time_distributed", "a non-empty [t, features] sequence", g.shape(x)));
                }
                let mut outs = Vec::with_capacity(steps);
                for t in 0..steps {
                    let r = g.row(x, t)?;
                    let mut y = g.reshape(r, frame_shape.clone())?;
                    for l in &self.inner {
                        y = l.forward(g, y, ctx)?;
                    }
                    let n = g.value(y).numel();
                    outs.push(g.reshape(y, vec![1, n])?);
                }
                g.stack_rows(&outs)
            }
        }
    }
}
