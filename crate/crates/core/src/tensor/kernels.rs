//! Raw loops behind the graph ops. All buffers are row-major; backward
//! kernels accumulate into their outputs.

use super::Real;

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `c[n,m] = a[n,k] · b[k,m]`
pub fn matmul<T: Real>(a: &[T], b: &[T], n: usize, k: usize, m: usize) -> Vec<T> {
    let mut c = vec![T::zero(); n * m];
    for i in 0..n {
        let crow = &mut c[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a[i * k + p];
            if av != T::zero() {
                axpy(av, &b[p * m..(p + 1) * m], crow);
            }
        }
    }
    c
}

/// `da += dc · bᵀ`
pub fn matmul_grad_a<T: Real>(dc: &[T], b: &[T], da: &mut [T], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let dcrow = &dc[i * m..(i + 1) * m];
        for p in 0..k {
            da[i * k + p] += dot(dcrow, &b[p * m..(p + 1) * m]);
        }
    }
}

/// `db += aᵀ · dc`
pub fn matmul_grad_b<T: Real>(a: &[T], dc: &[T], db: &mut [T], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let dcrow = &dc[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a[i * k + p];
            if av != T::zero() {
                axpy(av, dcrow, &mut db[p * m..(p + 1) * m]);
            }
        }
    }
}

/// Valid 1-D convolution, stride 1.
/// `x: [len, cin]`, `w: [k, cin, cout]`, `b: [cout]` → `[len - k + 1, cout]`.
pub struct Conv1dDims {
    pub len: usize,
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
}

impl Conv1dDims {
    pub fn out_len(&self) -> usize {
        self.len + 1 - self.k
    }
}

pub fn conv1d<T: Real>(x: &[T], w: &[T], b: &[T], d: &Conv1dDims) -> Vec<T> {
    let lo = d.out_len();
    let mut y = vec![T::zero(); lo * d.cout];
    for t in 0..lo {
        let yrow = &mut y[t * d.cout..(t + 1) * d.cout];
        yrow.copy_from_slice(b);
        for kk in 0..d.k {
            for ci in 0..d.cin {
                let xv = x[(t + kk) * d.cin + ci];
                let wo = (kk * d.cin + ci) * d.cout;
                axpy(xv, &w[wo..wo + d.cout], yrow);
            }
        }
    }
    y
}

pub fn conv1d_backward<T: Real>(
    x: &[T],
    w: &[T],
    dy: &[T],
    d: &Conv1dDims,
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
) {
    let lo = d.out_len();
    for t in 0..lo {
        let dyrow = &dy[t * d.cout..(t + 1) * d.cout];
        for kk in 0..d.k {
            for ci in 0..d.cin {
                let xi = (t + kk) * d.cin + ci;
                let wo = (kk * d.cin + ci) * d.cout;
                if let Some(dx) = dx.as_deref_mut() {
                    dx[xi] += dot(dyrow, &w[wo..wo + d.cout]);
                }
                if let Some(dw) = dw.as_deref_mut() {
                    axpy(x[xi], dyrow, &mut dw[wo..wo + d.cout]);
                }
            }
        }
    }
    if let Some(db) = db {
        for t in 0..lo {
            axpy(T::one(), &dy[t * d.cout..(t + 1) * d.cout], db);
        }
    }
}

/// Valid 3-D convolution, stride 1.
/// `x: [t, h, w, cin]`, `w: [kt, kh, kw, cin, cout]` → `[t-kt+1, h-kh+1, w-kw+1, cout]`.
pub struct Conv3dDims {
    pub input: [usize; 3],
    pub kernel: [usize; 3],
    pub cin: usize,
    pub cout: usize,
}

impl Conv3dDims {
    pub fn out(&self) -> [usize; 3] {
        [self.input[0] + 1 - self.kernel[0], self.input[1] + 1 - self.kernel[1], self.input[2] + 1 - self.kernel[2]]
    }

    /// Calls `f(output_row, input_offset, weight_offset)` for every
    /// (output position, kernel tap) pair.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let [ot, oh, ow] = self.out();
        let [_, ih, iw] = self.input;
        let [kt, kh, kw] = self.kernel;
        for t in 0..ot {
            for h in 0..oh {
                for w in 0..ow {
                    let orow = (t * oh + h) * ow + w;
                    for dt in 0..kt {
                        for dh in 0..kh {
                            for dw in 0..kw {
                                let xo = (((t + dt) * ih + (h + dh)) * iw + (w + dw)) * self.cin;
                                let wo = ((dt * kh + dh) * kw + dw) * self.cin * self.cout;
                                f(orow, xo, wo);
                            }
                        }
                    }
                }
            }
        }
    }
}

pub fn conv3d<T: Real>(x: &[T], w: &[T], b: &[T], d: &Conv3dDims) -> Vec<T> {
    let [ot, oh, ow] = d.out();
    let mut y = vec![T::zero(); ot * oh * ow * d.cout];
    for row in y.chunks_exact_mut(d.cout) {
        row.copy_from_slice(b);
    }
    d.for_each_tap(|orow, xo, wo| {
        let yrow = &mut y[orow * d.cout..(orow + 1) * d.cout];
        for ci in 0..d.cin {
            let base = wo + ci * d.cout;
            axpy(x[xo + ci], &w[base..base + d.cout], yrow);
        }
    });
    y
}

pub fn conv3d_backward<T: Real>(
    x: &[T],
    w: &[T],
    dy: &[T],
    d: &Conv3dDims,
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
) {
    d.for_each_tap(|orow, xo, wo| {
        let dyrow = &dy[orow * d.cout..(orow + 1) * d.cout];
        for ci in 0..d.cin {
            let base = wo + ci * d.cout;
            if let Some(dx) = dx.as_deref_mut() {
                dx[xo + ci] += dot(dyrow, &w[base..base + d.cout]);
            }
            if let Some(dw) = dw.as_deref_mut() {
                axpy(x[xo + ci], dyrow, &mut dw[base..base + d.cout]);
            }
        }
    });
    if let Some(db) = db {
        for row in dy.chunks_exact(d.cout) {
            axpy(T::one(), row, db);
        }
    }
}

/// Max pooling over the leading `dims.len() - 1` axes of a channels-last
/// array, window = stride, trailing remainders dropped. Returns the pooled
/// values and, for each output, the flat index of the winning input.
pub fn max_pool<T: Real>(x: &[T], dims: &[usize], window: &[usize]) -> (Vec<T>, Vec<usize>, Vec<usize>) {
    let spatial = dims.len() - 1;
    let c = dims[spatial];
    let out_dims: Vec<usize> = (0..spatial).map(|i| dims[i] / window[i]).collect();
    let out_count: usize = out_dims.iter().product();
    let win_count: usize = window.iter().product();
    let mut values = Vec::with_capacity(out_count * c);
    let mut argmax = Vec::with_capacity(out_count * c);
    let mut opos = vec![0usize; spatial];
    let mut wpos = vec![0usize; spatial];
    for o in 0..out_count {
        unravel(o, &out_dims, &mut opos);
        for ch in 0..c {
            let mut best = T::neg_infinity();
            let mut best_i = 0;
            for wi in 0..win_count {
                unravel(wi, window, &mut wpos);
                let mut flat = 0;
                for a in 0..spatial {
                    flat = flat * dims[a] + opos[a] * window[a] + wpos[a];
                }
                let i = flat * c + ch;
                if x[i] > best || wi == 0 {
                    best = x[i];
                    best_i = i;
                }
            }
            values.push(best);
            argmax.push(best_i);
        }
    }
    let mut shape = out_dims;
    shape.push(c);
    (values, argmax, shape)
}

fn unravel(mut i: usize, dims: &[usize], out: &mut [usize]) {
    for a in (0..dims.len()).rev() {
        out[a] = i % dims[a];
        i /= dims[a];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        // [1 2; 3 4] · [5; 6] = [17; 39]
        assert_eq!(matmul(&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0], 2, 2, 1), vec![17.0, 39.0]);
    }

    #[test]
    fn conv1d_ones_kernel() {
        let d = Conv1dDims { len: 4, cin: 1, cout: 1, k: 3 };
        assert_eq!(conv1d(&[1.0, 2.0, 3.0, 4.0], &[1.0; 3], &[0.0], &d), vec![6.0, 9.0]);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn conv3d_matches_naive() {
        let d = Conv3dDims { input: [3, 4, 3], kernel: [2, 2, 2], cin: 2, cout: 3 };
        let x: Vec<f64> = (0..3 * 4 * 3 * 2).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let w: Vec<f64> = (0..2 * 2 * 2 * 2 * 3).map(|i| ((i * 5) % 7) as f64 * 0.1 - 0.3).collect();
        let b = vec![0.5, -0.5, 0.0];
        let y = conv3d(&x, &w, &b, &d);
        let [ot, oh, ow] = d.out();
        for t in 0..ot {
            for h in 0..oh {
                for ww in 0..ow {
                    for co in 0..3 {
                        let mut s = b[co];
                        for dt in 0..2 {
                            for dh in 0..2 {
                                for dw in 0..2 {
                                    for ci in 0..2 {
                                        let xi = (((t + dt) * 4 + h + dh) * 3 + ww + dw) * 2 + ci;
                                        let wi = (((dt * 2 + dh) * 2 + dw) * 2 + ci) * 3 + co;
                                        s += x[xi] * w[wi];
                                    }
                                }
                            }
                        }
                        let yi = ((t * oh + h) * ow + ww) * 3 + co;
                        assert!((y[yi] - s).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn pool_1d_and_3d() {
        let (v, arg, shape) = max_pool(&[1.0, 5.0, 3.0, 2.0, 9.0], &[5, 1], &[2]);
        assert_eq!(v, vec![5.0, 3.0]);
        assert_eq!(arg, vec![1, 2]);
        assert_eq!(shape, vec![2, 1]);

        let x: Vec<f64> = (0..2 * 2 * 2).map(f64::from).collect();
        let (v, arg, shape) = max_pool(&x, &[2, 2, 2, 1], &[2, 2, 2]);
        assert_eq!((v, arg, shape), (vec![7.0], vec![7], vec![1, 1, 1, 1]));
    }
}
