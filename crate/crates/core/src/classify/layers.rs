//! Dense-tensor layers for the 1-D convolutional classifier.
//!
//! Sequences are stored position-major: element `(t, c)` of a sequence with
//! `ch` channels lives at `t * ch + c`. Every layer is a pair of free
//! functions so the gradient checks can drive them directly.

/// Output length of a valid (unpadded) convolution.
pub fn conv_out_len(len: usize, kernel: usize) -> Option<usize> {
    (len >= kernel).then(|| len - kernel + 1)
}

/// Output length of a max pool with the given size and stride.
pub fn pool_out_len(len: usize, size: usize, stride: usize) -> Option<usize> {
    (len >= size).then(|| (len - size) / stride + 1)
}

/// Valid 1-D convolution. `w` is laid out `[out][k][in]`, which makes each
/// filter a contiguous dot product over `k` consecutive input rows.
pub fn conv_forward(x: &[f64], len: usize, in_ch: usize, w: &[f64], b: &[f64], kernel: usize) -> Vec<f64> {
    let out_ch = b.len();
    let span = kernel * in_ch;
    debug_assert_eq!(w.len(), out_ch * span);
    debug_assert_eq!(x.len(), len * in_ch);
    let out_len = conv_out_len(len, kernel).unwrap_or(0);
    let mut y = vec![0.0; out_len * out_ch];
    for t in 0..out_len {
        let window = &x[t * in_ch..t * in_ch + span];
        for o in 0..out_ch {
            let filter = &w[o * span..(o + 1) * span];
            y[t * out_ch + o] = b[o] + dot(window, filter);
        }
    }
    y
}

/// Accumulates weight and bias gradients into `dw`/`db` and returns the
/// input gradient when `want_dx` is set.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward(
    x: &[f64],
    len: usize,
    in_ch: usize,
    w: &[f64],
    kernel: usize,
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    want_dx: bool,
) -> Option<Vec<f64>> {
    let out_ch = db.len();
    let span = kernel * in_ch;
    let out_len = conv_out_len(len, kernel).unwrap_or(0);
    let mut dx = want_dx.then(|| vec![0.0; len * in_ch]);
    for t in 0..out_len {
        let window = &x[t * in_ch..t * in_ch + span];
        for o in 0..out_ch {
            let g = dy[t * out_ch + o];
            if g == 0.0 {
                continue;
            }
            db[o] += g;
            axpy(g, window, &mut dw[o * span..(o + 1) * span]);
            if let Some(dx) = dx.as_mut() {
                axpy(g, &w[o * span..(o + 1) * span], &mut dx[t * in_ch..t * in_ch + span]);
            }
        }
    }
    dx
}

pub fn relu_forward(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0)).collect()
}

pub fn relu_backward(z: &[f64], da: &[f64]) -> Vec<f64> {
    z.iter().zip(da).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect()
}

/// Max pool along positions, per channel. Returns the pooled values and, for
/// each output element, the flat input index it was taken from. Ties go to
/// the earliest position.
pub fn pool_forward(x: &[f64], len: usize, ch: usize, size: usize, stride: usize) -> (Vec<f64>, Vec<usize>) {
    let out_len = pool_out_len(len, size, stride).unwrap_or(0);
    let mut y = Vec::with_capacity(out_len * ch);
    let mut arg = Vec::with_capacity(out_len * ch);
    for t in 0..out_len {
        for c in 0..ch {
            let mut best = (t * stride) * ch + c;
            for s in 1..size {
                let idx = (t * stride + s) * ch + c;
                if x[idx] > x[best] {
                    best = idx;
                }
            }
            y.push(x[best]);
            arg.push(best);
        }
    }
    (y, arg)
}

pub fn pool_backward(argmax: &[usize], dy: &[f64], in_size: usize) -> Vec<f64> {
    let mut dx = vec![0.0; in_size];
    for (&i, &g) in argmax.iter().zip(dy) {
        dx[i] += g;
    }
    dx
}

/// Fully connected layer; `w` is `[out][in]`.
pub fn dense_forward(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(o, &bo)| bo + dot(x, &w[o * n_in..(o + 1) * n_in]))
        .collect()
}

pub fn dense_backward(x: &[f64], w: &[f64], dy: &[f64], dw: &mut [f64], db: &mut [f64], want_dx: bool) -> Option<Vec<f64>> {
    let n_in = x.len();
    let mut dx = want_dx.then(|| vec![0.0; n_in]);
    for (o, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        db[o] += g;
        axpy(g, x, &mut dw[o * n_in..(o + 1) * n_in]);
        if let Some(dx) = dx.as_mut() {
            axpy(g, &w[o * n_in..(o + 1) * n_in], dx);
        }
    }
    dx
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy summed over outputs, computed from logits.
/// Returns the loss and its gradient with respect to the logits.
pub fn sigmoid_bce(logits: &[f64], targets: &[f64]) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(targets) {
        loss += z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
        grad.push(sigmoid(z) - y);
    }
    (loss, grad)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
