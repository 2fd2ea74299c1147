//! Spatio-temporal graph convolution:
//! `X_out = σ(Σ_k Σ_τ S^k X_{t-τ} H_{k,τ})` with split-ReLU `σ`.

use crate::linalg::{ComplexMatrix, C64};

/// `out += a · b`.
pub fn mm_acc(a: &ComplexMatrix, b: &ComplexMatrix, out: &mut ComplexMatrix) {
    debug_assert_eq!(a.cols(), b.rows());
    debug_assert_eq!((out.rows(), out.cols()), (a.rows(), b.cols()));
    let (m, kk, n) = (a.rows(), a.cols(), b.cols());
    let (ad, bd) = (a.as_slice(), b.as_slice());
    let od = out.as_mut_slice();
    for i in 0..m {
        let orow = &mut od[i * n..(i + 1) * n];
        for k in 0..kk {
            let x = ad[i * kk + k];
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            for (o, y) in orow.iter_mut().zip(&bd[k * n..(k + 1) * n]) {
                *o += x * y;
            }
        }
    }
}

/// `out += aᴴ · b`.
pub fn mm_ah_acc(a: &ComplexMatrix, b: &ComplexMatrix, out: &mut ComplexMatrix) {
    debug_assert_eq!(a.rows(), b.rows());
    debug_assert_eq!((out.rows(), out.cols()), (a.cols(), b.cols()));
    let (r, m, n) = (a.rows(), a.cols(), b.cols());
    let (ad, bd) = (a.as_slice(), b.as_slice());
    let od = out.as_mut_slice();
    for k in 0..r {
        let brow = &bd[k * n..(k + 1) * n];
        for i in 0..m {
            let x = ad[k * m + i].conj();
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            for (o, y) in od[i * n..(i + 1) * n].iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
}

/// `out += a · bᴴ`.
pub fn mm_bh_acc(a: &ComplexMatrix, b: &ComplexMatrix, out: &mut ComplexMatrix) {
    debug_assert_eq!(a.cols(), b.cols());
    debug_assert_eq!((out.rows(), out.cols()), (a.rows(), b.rows()));
    let (m, kk, n) = (a.rows(), a.cols(), b.rows());
    let (ad, bd) = (a.as_slice(), b.as_slice());
    let od = out.as_mut_slice();
    for i in 0..m {
        let arow = &ad[i * kk..(i + 1) * kk];
        for j in 0..n {
            let brow = &bd[j * kk..(j + 1) * kk];
            let mut s = C64::new(0.0, 0.0);
            for (x, y) in arow.iter().zip(brow) {
                s += x * y.conj();
            }
            od[i * n + j] += s;
        }
    }
}

pub fn mm(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows(), b.cols());
    mm_acc(a, b, &mut out);
    out
}

pub fn split_relu(z: &ComplexMatrix) -> ComplexMatrix {
    let mut out = z.clone();
    for x in out.as_mut_slice() {
        *x = C64::new(x.re.max(0.0), x.im.max(0.0));
    }
    out
}

/// Gradient through split-ReLU given the pre-activation.
pub fn split_relu_backward(pre: &ComplexMatrix, g: &ComplexMatrix) -> ComplexMatrix {
    let mut out = g.clone();
    for (o, p) in out.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        *o = C64::new(if p.re > 0.0 { o.re } else { 0.0 }, if p.im > 0.0 { o.im } else { 0.0 });
    }
    out
}

/// `[X, S X, ..., S^K X]`.
pub fn powers(s: &ComplexMatrix, x: &ComplexMatrix, k: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(x.clone());
    for i in 0..k {
        out.push(mm(s, &out[i]));
    }
    out
}

#[derive(Clone, Debug)]
pub struct ConvTape {
    /// `powers[j][k] = S^k X_j` for each input position `j`.
    pub powers: Vec<Vec<ComplexMatrix>>,
    /// Pre-activations per output position.
    pub pre: Vec<ComplexMatrix>,
}

/// One layer evaluated at output positions `0..n_out`, where position `p`
/// reads inputs `p .. p + k_t`. Inputs past the end of `inputs` are zero.
pub fn conv_layer_forward(
    s: &ComplexMatrix,
    inputs: &[ComplexMatrix],
    taps: &[ComplexMatrix],
    k: usize,
    k_t: usize,
    n_out: usize,
) -> (Vec<ComplexMatrix>, ConvTape) {
    let n = s.rows();
    let f_out = taps[0].cols();
    let pw: Vec<Vec<ComplexMatrix>> = inputs.iter().map(|x| powers(s, x, k)).collect();
    let mut outs = Vec::with_capacity(n_out);
    let mut pre = Vec::with_capacity(n_out);
    for p in 0..n_out {
        let mut z = ComplexMatrix::zeros(n, f_out);
        for tau in 0..=k_t {
            let j = p + tau;
            if j >= inputs.len() {
                break;
            }
            for (kk, pk) in pw[j].iter().enumerate() {
                mm_acc(pk, &taps[kk * (k_t + 1) + tau], &mut z);
            }
        }
        outs.push(split_relu(&z));
        pre.push(z);
    }
    (outs, ConvTape { powers: pw, pre })
}

/// Returns input gradients (if requested) and accumulates tap gradients.
pub fn conv_layer_backward(
    s_adj: &ComplexMatrix,
    tape: &ConvTape,
    taps: &[ComplexMatrix],
    g_out: &[ComplexMatrix],
    k: usize,
    k_t: usize,
    g_taps: &mut [ComplexMatrix],
    want_input_grad: bool,
) -> Option<Vec<ComplexMatrix>> {
    let n_in = tape.powers.len();
    let (n, f_in) = (tape.powers[0][0].rows(), tape.powers[0][0].cols());
    let mut g_pw: Vec<Vec<ComplexMatrix>> = if want_input_grad {
        vec![vec![ComplexMatrix::zeros(n, f_in); k + 1]; n_in]
    } else {
        Vec::new()
    };
    for (p, g) in g_out.iter().enumerate() {
        let gz = split_relu_backward(&tape.pre[p], g);
        for tau in 0..=k_t {
            let j = p + tau;
            if j >= n_in {
                break;
            }
            for kk in 0..=k {
                let idx = kk * (k_t + 1) + tau;
                mm_ah_acc(&tape.powers[j][kk], &gz, &mut g_taps[idx]);
                if want_input_grad {
                    mm_bh_acc(&gz, &taps[idx], &mut g_pw[j][kk]);
                }
            }
        }
    }
    if !want_input_grad {
        return None;
    }
    Some(
        g_pw.into_iter()
            .map(|mut gp| {
                let mut acc = gp.pop().unwrap();
                while let Some(g) = gp.pop() {
                    let mut next = g;
                    mm_acc(s_adj, &acc, &mut next);
                    acc = next;
                }
                acc
            })
            .collect(),
    )
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConvError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// A single layer at the newest position: `x_window[τ]` is `X_{t-τ}`
/// (`N × F_in`), `h[k * (k_t + 1) + τ]` is `H_{k,τ}` (`F_in × F_out`).
pub fn conv_forward(
    s: &ComplexMatrix,
    x_window: &[ComplexMatrix],
    h: &[ComplexMatrix],
    k: usize,
    k_t: usize,
) -> Result<ComplexMatrix, ConvError> {
    let taps = (k + 1) * (k_t + 1);
    if h.len() != taps {
        return Err(ConvError::DimensionMismatch(format!("{} taps given, {taps} expected", h.len())));
    }
    if x_window.len() != k_t + 1 {
        return Err(ConvError::DimensionMismatch(format!(
            "window has {} matrices, K_t + 1 = {}",
            x_window.len(),
            k_t + 1
        )));
    }
    let n = s.rows();
    if !s.is_square() {
        return Err(ConvError::DimensionMismatch("shift operator is not square".into()));
    }
    let f_in = h[0].rows();
    let f_out = h[0].cols();
    if h.iter().any(|m| m.rows() != f_in || m.cols() != f_out) {
        return Err(ConvError::DimensionMismatch("taps differ in shape".into()));
    }
    if x_window.iter().any(|x| x.rows() != n || x.cols() != f_in) {
        return Err(ConvError::DimensionMismatch(format!("window entries must be {n}x{f_in}")));
    }
    let (mut out, _) = conv_layer_forward(s, x_window, h, k, k_t, 1);
    Ok(out.pop().unwrap())
}
