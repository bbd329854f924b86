//! Reverse-mode gradients against central finite differences.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use rand::{Rng as _, SeedableRng};

use super::{ForwardCtx, Gradients, Graph, Layer, LayerSpec, ParamStore, Tensor, TensorError, Var};
use crate::rng::{substream, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Largest acceptable relative error.
    pub tolerance: f64,
    /// Above this many scalars, a seeded sample is checked instead.
    pub max_checked: usize,
    /// Denominator floor of the relative error, so gradients that are zero
    /// up to roundoff are compared absolutely.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-5, tolerance: 1e-4, max_checked: 5000, floor: 1e-6, seed: 0 }
    }
}

/// Worst error within one layer (parameter names up to their last `.`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGradError {
    pub layer: String,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub checked: usize,
    pub total: usize,
    pub layers: Vec<LayerGradError>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }

    /// Layers whose worst error reaches the tolerance.
    pub fn flagged(&self) -> Vec<&str> {
        self.layers.iter().filter(|l| l.max_rel_error >= self.tolerance).map(|l| l.layer.as_str()).collect()
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "gradient check: {} of {} scalars, max relative error {:.3e} (tolerance {:.0e}) {}\n",
            self.checked,
            self.total,
            self.max_rel_error,
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        );
        for l in &self.layers {
            let mark = if l.max_rel_error >= self.tolerance { "  <-- FLAGGED" } else { "" };
            out.push_str(&format!("  {:<40} {:>6} checked  max {:.3e}{mark}\n", l.layer, l.checked, l.max_rel_error));
        }
        out
    }
}

fn layer_of(name: &str) -> &str {
    name.rsplit_once('.').map_or(name, |(l, _)| l)
}

/// Checks every parameter gradient of `loss` (or a seeded sample of at most
/// `max_checked` scalars, with every tensor represented) at 64-bit.
/// `loss` must be deterministic: run dropout in eval mode.
pub fn grad_check<F>(params: &ParamStore<f64>, loss: F, opts: GradCheckOptions) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Graph<f64>) -> Result<Var, TensorError>,
{
    let mut grads = Gradients::zeros_like(params);
    {
        let mut g = Graph::new(params);
        let l = loss(&mut g)?;
        g.backward(l, &mut grads, 1.0)?;
    }
    let total = params.num_scalars();
    let mut rng = substream(opts.seed, "gradcheck");
    let picks: Vec<Vec<usize>> = params
        .entries()
        .iter()
        .map(|e| {
            let n = e.value.numel();
            if total <= opts.max_checked {
                return (0..n).collect();
            }
            let share = (opts.max_checked as f64 * n as f64 / total as f64).round() as usize;
            let quota = share.max(16).min(n);
            let mut idx = sample(&mut rng, n, quota).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect();

    let eval = |p: &ParamStore<f64>| -> Result<f64, TensorError> {
        let mut g = Graph::new(p);
        let l = loss(&mut g)?;
        Ok(g.value(l).data()[0])
    };

    let mut work = params.clone();
    let mut layers: Vec<LayerGradError> = Vec::new();
    let mut checked = 0;
    let mut max_rel = 0.0f64;
    for (ti, idx) in picks.iter().enumerate() {
        let name = params.entries()[ti].name.clone();
        let layer = layer_of(&name).to_string();
        let pos = match layers.iter().position(|l| l.layer == layer) {
            Some(p) => p,
            None => {
                layers.push(LayerGradError { layer, max_rel_error: 0.0, worst_param: name.clone(), checked: 0 });
                layers.len() - 1
            }
        };
        for &j in idx {
            let orig = work.entries()[ti].value.data()[j];
            work.entries_mut()[ti].value.data_mut()[j] = orig + opts.step;
            let plus = eval(&work)?;
            work.entries_mut()[ti].value.data_mut()[j] = orig - opts.step;
            let minus = eval(&work)?;
            work.entries_mut()[ti].value.data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let analytic = grads.by_index(ti)[j];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(opts.floor);
            let entry = &mut layers[pos];
            entry.checked += 1;
            if rel > entry.max_rel_error || rel.is_nan() {
                entry.max_rel_error = if rel.is_nan() { f64::INFINITY } else { rel };
                entry.worst_param = format!("{name}[{j}]");
            }
            max_rel = max_rel.max(entry.max_rel_error);
            checked += 1;
        }
    }
    Ok(GradCheckReport { max_rel_error: max_rel, tolerance: opts.tolerance, checked, total, layers })
}

/// Every layer kind with a small representative configuration and the
/// input shape it is checked at.
pub fn layer_kind_cases() -> Vec<(LayerSpec, Vec<usize>)> {
    vec![
        (LayerSpec::Embedding { vocab: 6, dim: 3 }, vec![5]),
        (LayerSpec::Conv1D { in_channels: 3, out_channels: 2, kernel: 3 }, vec![6, 3]),
        (LayerSpec::Conv3D { in_channels: 2, out_channels: 2, kernel: [2, 2, 2] }, vec![3, 3, 3, 2]),
        (LayerSpec::MaxPool1D { width: 2 }, vec![6, 2]),
        (LayerSpec::MaxPool3D { window: [2, 2, 1] }, vec![4, 4, 2, 2]),
        (LayerSpec::Dropout { rate: 0.5 }, vec![2, 5]),
        (LayerSpec::Tanh, vec![2, 5]),
        (LayerSpec::Dense { inputs: 5, outputs: 4 }, vec![2, 5]),
        (LayerSpec::Lstm { inputs: 3, hidden: 4 }, vec![5, 3]),
        (LayerSpec::LastStep, vec![4, 3]),
        (LayerSpec::MeanOverTime, vec![4, 3]),
        (LayerSpec::Flatten, vec![3, 2, 2]),
        (
            LayerSpec::TimeDistributed {
                frame_shape: vec![6, 1],
                inner: vec![
                    LayerSpec::Conv1D { in_channels: 1, out_channels: 2, kernel: 3 },
                    LayerSpec::Tanh,
                    LayerSpec::MaxPool1D { width: 2 },
                    LayerSpec::Flatten,
                ],
            },
            vec![3, 6],
        ),
        (LayerSpec::Concat, vec![1, 3]),
        (LayerSpec::Softmax, vec![1, 5]),
    ]
}

/// Checks one layer in isolation: a trainable input feeds the layer, whose
/// flattened output goes through a dense probe into a 10-way cross-entropy.
/// Input gradients are therefore checked for every kind, parameter
/// gradients for the kinds that have them. Dropout runs in training mode
/// with the same mask on every evaluation.
pub fn check_layer(
    spec: &LayerSpec,
    input_shape: &[usize],
    opts: GradCheckOptions,
) -> Result<GradCheckReport, TensorError> {
    let mut rng = substream(opts.seed, &format!("gradcheck.{}", spec.kind()));
    let mut store = ParamStore::<f64>::new();
    let n: usize = input_shape.iter().product();
    let embedding = matches!(spec, LayerSpec::Embedding { .. });
    let input = (!embedding).then(|| {
        let values = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        store.add("input.x", Tensor::new(input_shape.to_vec(), values).expect("shape matches"))
    });
    let second = matches!(spec, LayerSpec::Concat).then(|| {
        let values = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        store.add("input.y", Tensor::new(input_shape.to_vec(), values).expect("shape matches"))
    });
    let layer = Layer::build(spec.clone(), spec.kind(), &mut store, &mut rng)?;
    // biases start at zero; perturb them so their gradients are informative
    for e in store.entries_mut() {
        if e.name.ends_with(".b") {
            e.value.data_mut().iter_mut().for_each(|v| *v += rng.gen_range(-0.3..0.3));
        }
    }
    let out_shape = match spec {
        LayerSpec::Concat => LayerSpec::concat_shape(&[input_shape.to_vec(), input_shape.to_vec()])?,
        _ => spec.output_shape(input_shape)?,
    };
    let probe = Layer::build(
        LayerSpec::Dense { inputs: out_shape.iter().product(), outputs: 10 },
        "probe",
        &mut store,
        &mut rng,
    )?;
    let tokens: Vec<usize> = (0..n).map(|i| (i * 5 + 1) % 6).collect();
    let mask_seed = rng.gen::<u64>();
    let loss = |g: &mut Graph<f64>| -> Result<Var, TensorError> {
        let mut dropout_rng = Rng::seed_from_u64(mask_seed);
        let mut ctx = ForwardCtx::train(&mut dropout_rng);
        let y = match (input, second) {
            (None, _) => layer.embed(g, &tokens)?,
            (Some(a), Some(b)) => {
                let (a, b) = (g.param(a), g.param(b));
                layer.forward_many(g, &[a, b])?
            }
            (Some(a), None) => {
                let x = g.param(a);
                layer.forward(g, x, &mut ctx)?
            }
        };
        let numel = g.value(y).numel();
        let flat = g.reshape(y, vec![1, numel])?;
        let logits = probe.forward(g, flat, &mut ctx)?;
        g.softmax_cross_entropy(logits, 3)
    };
    grad_check(&store, loss, opts)
}

/// [`check_layer`] over [`layer_kind_cases`].
pub fn check_every_layer_kind(opts: GradCheckOptions) -> Result<Vec<(&'static str, GradCheckReport)>, TensorError> {
    layer_kind_cases().iter().map(|(spec, shape)| Ok((spec.kind(), check_layer(spec, shape, opts)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{ForwardCtx, Layer, LayerSpec, Tensor};
    use rand::SeedableRng;

    fn linear_model() -> (ParamStore<f64>, Layer) {
        let mut store = ParamStore::new();
        let mut rng = crate::rng::Rng::seed_from_u64(5);
        let dense = Layer::build(LayerSpec::Dense { inputs: 4, outputs: 3 }, "dense", &mut store, &mut rng).unwrap();
        // non-zero biases so every gradient is exercised
        store.get_mut(dense.params()[1]).data_mut().copy_from_slice(&[0.1, -0.2, 0.3]);
        (store, dense)
    }

    fn linear_loss(g: &mut Graph<f64>, dense: &Layer) -> Result<Var, TensorError> {
        let x = g.input(Tensor::new(vec![1, 4], vec![0.5, -1.0, 2.0, 0.25]).unwrap());
        let y = dense.forward(g, x, &mut ForwardCtx::eval())?;
        let w = g.input(Tensor::new(vec![3, 1], vec![1.0, -2.0, 0.5]).unwrap());
        let s = g.matmul(y, w)?;
        g.reshape(s, vec![1])
    }

    #[test]
    fn linear_model_is_exact() {
        let (store, dense) = linear_model();
        let report = grad_check(&store, |g| linear_loss(g, &dense), GradCheckOptions::default()).unwrap();
        assert!(report.max_rel_error < 1e-8, "{}", report.render());
        assert_eq!(report.checked, 15);
        assert!(report.passed());
    }

    #[test]
    fn broken_gradient_is_flagged() {
        let mut store = ParamStore::new();
        let mut rng = crate::rng::Rng::seed_from_u64(5);
        let a = Layer::build(LayerSpec::Dense { inputs: 4, outputs: 3 }, "first", &mut store, &mut rng).unwrap();
        let b = Layer::build(LayerSpec::Dense { inputs: 3, outputs: 2 }, "second", &mut store, &mut rng).unwrap();
        let loss = |g: &mut Graph<f64>| {
            g.inject_grad_fault("second", 1.5);
            let x = g.input(Tensor::new(vec![1, 4], vec![0.5, -1.0, 2.0, 0.25]).unwrap());
            let h = a.forward(g, x, &mut ForwardCtx::eval())?;
            let h = g.tanh(h);
            let y = b.forward(g, h, &mut ForwardCtx::eval())?;
            g.softmax_cross_entropy(y, 1)
        };
        let report = grad_check(&store, loss, GradCheckOptions::default()).unwrap();
        assert!(!report.passed());
        assert_eq!(report.flagged(), vec!["second"]);
    }

    #[test]
    fn sampling_covers_every_tensor() {
        let mut store = ParamStore::new();
        let mut rng = crate::rng::Rng::seed_from_u64(5);
        let dense = Layer::build(LayerSpec::Dense { inputs: 200, outputs: 30 }, "big", &mut store, &mut rng).unwrap();
        let loss = |g: &mut Graph<f64>| {
            let x = g.input(Tensor::new(vec![1, 200], (0..200).map(|i| (i as f64).cos()).collect()).unwrap());
            let y = dense.forward(g, x, &mut ForwardCtx::eval())?;
            let y = g.tanh(y);
            g.softmax_cross_entropy(y, 3)
        };
        let opts = GradCheckOptions { max_checked: 500, ..Default::default() };
        let report = grad_check(&store, loss, opts).unwrap();
        assert_eq!(report.total, 6030);
        // 6000 weights get ~497, 30 biases are all checked
        assert!(report.checked <= 530 && report.checked >= 500, "{}", report.checked);
        assert!(report.passed(), "{}", report.render());
    }

    #[test]
    fn every_layer_kind_passes() {
        let reports = check_every_layer_kind(GradCheckOptions::default()).unwrap();
        assert_eq!(reports.len(), 15);
        for (kind, r) in &reports {
            assert!(r.passed(), "{kind}\n{}", r.render());
            assert!(r.layers.iter().any(|l| l.layer.starts_with("input") || l.layer == "embedding"), "{kind}");
        }
    }
}
