//! Gated recurrent cell. Gate blocks are laid out `[input | forget | cell | output]`
//! along the `4 · hidden` axis of every weight.

use super::{shape_err, Graph, ParamStore, Real, Tensor, TensorError, Var};

/// Weights of one LSTM layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights<T> {
    /// `[inputs, 4·hidden]`
    pub w_x: Tensor<T>,
    /// `[hidden, 4·hidden]`
    pub w_h: Tensor<T>,
    /// `[4·hidden]`
    pub b: Tensor<T>,
}

/// One step of the recurrence given the pre-activations `z = x·W_x + b + h·W_h`:
///
/// ```text
/// i = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
/// c' = f ⊙ c + i ⊙ g
/// h' = o ⊙ tanh(c')
/// ```
pub(crate) fn lstm_cell<T: Real>(
    g: &mut Graph<T>,
    xw_row: Var,
    h: Var,
    c: Var,
    w_h: Var,
    hidden: usize,
) -> Result<(Var, Var), TensorError> {
    let hw = g.matmul(h, w_h)?;
    let z = g.add(xw_row, hw)?;
    let zi = g.slice_cols(z, 0, hidden)?;
    let zf = g.slice_cols(z, hidden, hidden)?;
    let zg = g.slice_cols(z, 2 * hidden, hidden)?;
    let zo = g.slice_cols(z, 3 * hidden, hidden)?;
    let i = g.sigmoid(zi);
    let f = g.sigmoid(zf);
    let cand = g.tanh(zg);
    let o = g.sigmoid(zo);
    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c_next = g.add(keep, write)?;
    let squashed = g.tanh(c_next);
    let h_next = g.mul(o, squashed)?;
    Ok((h_next, c_next))
}

/// Runs the recurrence over `x: [t, inputs]` from zero state; returns `[t, hidden]`.
pub(crate) fn lstm_sequence<T: Real>(
    g: &mut Graph<T>,
    x: Var,
    w_x: Var,
    w_h: Var,
    b: Var,
    hidden: usize,
) -> Result<Var, TensorError> {
    let steps = g.shape(x)[0];
    // input projections for all timesteps in one product
    let xw = g.matmul(x, w_x)?;
    let xw = g.add_bias(xw, b)?;
    let mut h = g.input(Tensor::zeros(vec![1, hidden]));
    let mut c = g.input(Tensor::zeros(vec![1, hidden]));
    let mut outs = Vec::with_capacity(steps);
    for t in 0..steps {
        let row = g.row(xw, t)?;
        (h, c) = lstm_cell(g, row, h, c, w_h, hidden)?;
        outs.push(h);
    }
    g.stack_rows(&outs)
}

/// Single recurrence step on plain vectors; returns `(h, c)`.
pub fn lstm_step<T: Real>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    w: &LstmWeights<T>,
) -> Result<(Vec<T>, Vec<T>), TensorError> {
    let (inputs, four_h) = match *w.w_x.shape() {
        [a, b] => (a, b),
        ref s => return Err(shape_err("lstm_step", "w_x [inputs, 4·hidden]", s)),
    };
    let hidden = four_h / 4;
    if four_h % 4 != 0
        || w.w_h.shape() != [hidden, four_h]
        || w.b.shape() != [four_h]
        || x.len() != inputs
        || h_prev.len() != hidden
        || c_prev.len() != hidden
    {
        return Err(shape_err(
            "lstm_step",
            format!("x [{inputs}], h/c [{hidden}], w_h [{hidden}, {four_h}], b [{four_h}]"),
            (x.len(), h_prev.len(), c_prev.len(), w.w_h.shape(), w.b.shape()),
        ));
    }
    let mut store = ParamStore::new();
    let wx = store.add("w_x", w.w_x.clone());
    let wh = store.add("w_h", w.w_h.clone());
    let bb = store.add("b", w.b.clone());
    let mut g = Graph::new(&store);
    let xv = g.input(Tensor::new(vec![1, inputs], x.to_vec())?);
    let hv = g.input(Tensor::new(vec![1, hidden], h_prev.to_vec())?);
    let cv = g.input(Tensor::new(vec![1, hidden], c_prev.to_vec())?);
    let (wx, wh, bb) = (g.param(wx), g.param(wh), g.param(bb));
    let xw = g.matmul(xv, wx)?;
    let xw = g.add_bias(xw, bb)?;
    let (h, c) = lstm_cell(&mut g, xw, hv, cv, wh, hidden)?;
    Ok((g.value(h).data().to_vec(), g.value(c).data().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng as _, SeedableRng};

    fn weights(inputs: usize, hidden: usize, fill: impl FnMut() -> f64) -> LstmWeights<f64> {
        let mut fill = fill;
        let mut t = |shape: Vec<usize>| {
            let n = shape.iter().product();
            Tensor::new(shape, (0..n).map(|_| fill()).collect()).unwrap()
        };
        LstmWeights { w_x: t(vec![inputs, 4 * hidden]), w_h: t(vec![hidden, 4 * hidden]), b: t(vec![4 * hidden]) }
    }

    /// Straight-line gate equations, written out per unit.
    fn oracle(x: &[f64], h: &[f64], c: &[f64], w: &LstmWeights<f64>) -> (Vec<f64>, Vec<f64>) {
        let hidden = h.len();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let pre = |gate: usize, unit: usize| {
            let col = gate * hidden + unit;
            let mut s = w.b.data()[col];
            for (k, xv) in x.iter().enumerate() {
                s += xv * w.w_x.data()[k * 4 * hidden + col];
            }
            for (k, hv) in h.iter().enumerate() {
                s += hv * w.w_h.data()[k * 4 * hidden + col];
            }
            s
        };
        let mut h_out = vec![0.0; hidden];
        let mut c_out = vec![0.0; hidden];
        for u in 0..hidden {
            let i = sig(pre(0, u));
            let f = sig(pre(1, u));
            let g = pre(2, u).tanh();
            let o = sig(pre(3, u));
            c_out[u] = f * c[u] + i * g;
            h_out[u] = o * c_out[u].tanh();
        }
        (h_out, c_out)
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let w = weights(3, 2, || 0.0);
        let (h, c) = lstm_step(&[1.0, -2.0, 3.0], &[0.0; 2], &[0.0; 2], &w).unwrap();
        assert_eq!(h, vec![0.0; 2]);
        assert_eq!(c, vec![0.0; 2]);
    }

    #[test]
    fn large_forget_bias_with_nothing_to_remember() {
        let mut w = weights(3, 2, || 0.0);
        w.b.data_mut()[2..4].iter_mut().for_each(|v| *v = 20.0);
        let (h, c) = lstm_step(&[0.0; 3], &[0.0; 2], &[0.0; 2], &w).unwrap();
        assert_eq!(c, vec![0.0; 2]);
        assert_eq!(h, vec![0.0; 2]);
    }

    #[test]
    fn matches_straight_line_oracle() {
        let mut rng = crate::rng::Rng::seed_from_u64(11);
        let w = weights(5, 3, || rng.gen_range(-0.8..0.8));
        let x = [0.2, -0.4, 0.9, 0.1, -1.0];
        let h = [0.3, -0.2, 0.5];
        let c = [-0.6, 0.4, 0.05];
        let (h1, c1) = lstm_step(&x, &h, &c, &w).unwrap();
        let (h2, c2) = oracle(&x, &h, &c, &w);
        for (a, b) in h1.iter().chain(&c1).zip(h2.iter().chain(&c2)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn shape_errors() {
        let w = weights(3, 2, || 0.1);
        assert!(lstm_step(&[0.0; 2], &[0.0; 2], &[0.0; 2], &w).is_err());
        assert!(lstm_step(&[0.0; 3], &[0.0; 3], &[0.0; 2], &w).is_err());
    }
}
