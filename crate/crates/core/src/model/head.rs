//! Parallel position-encoded output head. Produces `N_q` output rows from a
//! fixed-size pooled latent for any `N_q`.

use super::dense::{axpy, RMat};
use super::params::UgcnParams;
use crate::linalg::{ComplexMatrix, C64};

/// `vec(X_pool)` as interleaved `re, im` in row-major order.
pub fn split_real(x: &ComplexMatrix) -> Vec<f64> {
    x.as_slice().iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn split_real_backward(g: &[f64], rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |r, c| {
        let i = 2 * (r * cols + c);
        C64::new(g[i], g[i + 1])
    })
}

/// `p[i] = i / max(N_q - 1, 1)`.
pub fn positions(n_q: usize) -> Vec<f64> {
    let den = n_q.saturating_sub(1).max(1) as f64;
    (0..n_q).map(|i| i as f64 / den).collect()
}

fn relu(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

#[derive(Clone, Debug)]
pub struct EncoderTape {
    x_in: Vec<f64>,
    h_pre: Vec<f64>,
}

pub fn encoder_forward(p: &UgcnParams, x_in: Vec<f64>) -> (Vec<f64>, EncoderTape) {
    let mut h_pre = p.w_enc.matvec(&x_in);
    axpy(&mut h_pre, 1.0, &p.b_enc);
    let mut h = h_pre.clone();
    relu(&mut h);
    (h, EncoderTape { x_in, h_pre })
}

/// Returns the gradient with respect to the split-real input.
pub fn encoder_backward(p: &UgcnParams, tape: &EncoderTape, g_h: &[f64], grads: &mut UgcnParams) -> Vec<f64> {
    let g_pre: Vec<f64> = g_h
        .iter()
        .zip(&tape.h_pre)
        .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
        .collect();
    grads.w_enc.add_outer(&g_pre, &tape.x_in);
    axpy(&mut grads.b_enc, 1.0, &g_pre);
    p.w_enc.t_matvec(&g_pre)
}

/// `W_enc x + b_enc` for every row `x` of `x_in`.
pub fn encoder_pre_batch(p: &UgcnParams, x_in: &RMat) -> RMat {
    let mut h = x_in.matmul_t(&p.w_enc);
    for i in 0..h.rows {
        axpy(h.row_mut(i), 1.0, &p.b_enc);
    }
    h
}

/// Batched [`encoder_backward`] from pre-activation gradients; returns the
/// input gradients row by row.
pub fn encoder_backward_batch(p: &UgcnParams, x_in: &RMat, g_pre: &RMat, grads: &mut UgcnParams) -> RMat {
    grads.w_enc.add_t_matmul(g_pre, x_in);
    for i in 0..g_pre.rows {
        axpy(&mut grads.b_enc, 1.0, g_pre.row(i));
    }
    g_pre.matmul(&p.w_enc)
}

/// Position embeddings for one output size, shared by every sample of a system.
#[derive(Clone, Debug)]
pub struct PositionCache {
    pub pos: Vec<f64>,
    /// `E_pos = tanh(W_pos p + b_pos)`, `N_q × d`.
    pub e_pos: RMat,
    /// `E_pos W_T`.
    pub ew: RMat,
}

pub fn position_cache(p: &UgcnParams, n_q: usize) -> PositionCache {
    let pos = positions(n_q);
    let d = p.b_pos.len();
    let e_pos = RMat::from_fn(n_q, d, |i, c| (p.w_pos[c] * pos[i] + p.b_pos[c]).tanh());
    let ew = e_pos.matmul(&p.w_t);
    PositionCache { pos, e_pos, ew }
}

/// Propagates the summed pre-activation gradient `G_sys` of all samples
/// that used `cache` into `W_T`, `W_pos` and `b_pos`.
pub fn position_backward(p: &UgcnParams, cache: &PositionCache, g_sys: &RMat, grads: &mut UgcnParams) {
    grads.w_t.add_assign(&cache.e_pos.t_matmul(g_sys));
    let g_e = g_sys.matmul_t(&p.w_t);
    for i in 0..cache.e_pos.rows {
        for c in 0..cache.e_pos.cols {
            let e = cache.e_pos.at(i, c);
            let g = g_e.at(i, c) * (1.0 - e * e);
            grads.w_pos[c] += g * cache.pos[i];
            grads.b_pos[c] += g;
        }
    }
}

#[derive(Clone, Debug)]
pub struct TailTape {
    a_pre: RMat,
    t: RMat,
}

fn output_layer(p: &UgcnParams, t: &RMat) -> RMat {
    let mut y = t.matmul(&p.w_out);
    for i in 0..y.rows {
        axpy(y.row_mut(i), 1.0, &p.b_out);
    }
    y
}

/// Backward through `y = T W_out + b_out` and the ReLU; returns `∂ℓ/∂A`.
fn output_backward(p: &UgcnParams, tape: &TailTape, g_y: &RMat, grads: &mut UgcnParams) -> RMat {
    grads.w_out.add_assign(&tape.t.t_matmul(g_y));
    for i in 0..g_y.rows {
        axpy(&mut grads.b_out, 1.0, g_y.row(i));
    }
    let mut g_a = g_y.matmul_t(&p.w_out);
    for (g, z) in g_a.data.iter_mut().zip(&tape.a_pre.data) {
        if *z <= 0.0 {
            *g = 0.0;
        }
    }
    for i in 0..g_a.rows {
        axpy(&mut grads.b_t, 1.0, g_a.row(i));
    }
    g_a
}

/// Batched tail: `A = 1 (W_Tᵀ h)ᵀ + E_pos W_T + 1 b_Tᵀ`.
pub fn tail_forward(p: &UgcnParams, cache: &PositionCache, h: &[f64]) -> (RMat, TailTape) {
    let a = p.w_t.t_matvec(h);
    let mut a_pre = cache.ew.clone();
    for i in 0..a_pre.rows {
        let row = a_pre.row_mut(i);
        axpy(row, 1.0, &a);
        axpy(row, 1.0, &p.b_t);
    }
    let mut t = a_pre.clone();
    relu(&mut t.data);
    let y = output_layer(p, &t);
    (y, TailTape { a_pre, t })
}

/// Returns `∂ℓ/∂h`; adds the sample's `∂ℓ/∂A` into `g_sys` for
/// [`position_backward`].
pub fn tail_backward(
    p: &UgcnParams,
    h: &[f64],
    tape: &TailTape,
    g_y: &RMat,
    grads: &mut UgcnParams,
    g_sys: &mut RMat,
) -> Vec<f64> {
    let g_a = output_backward(p, tape, g_y, grads);
    let mut g_av = vec![0.0; g_a.cols];
    for i in 0..g_a.rows {
        axpy(&mut g_av, 1.0, g_a.row(i));
    }
    grads.w_t.add_outer(h, &g_av);
    g_sys.add_assign(&g_a);
    p.w_t.matvec(&g_av)
}

#[derive(Clone, Debug)]
pub struct HeadTape {
    enc: EncoderTape,
    h: Vec<f64>,
    cache: PositionCache,
    c: RMat,
    tail: TailTape,
}

/// Reference head evaluation with the broadcast matrix `C = 1 hᵀ + E_pos`
/// formed explicitly.
pub fn head_forward_tape(p: &UgcnParams, x_in: Vec<f64>, n_q: usize) -> (RMat, HeadTape) {
    let (h, enc) = encoder_forward(p, x_in);
    let cache = position_cache(p, n_q);
    let mut c = cache.e_pos.clone();
    for i in 0..c.rows {
        axpy(c.row_mut(i), 1.0, &h);
    }
    let mut a_pre = c.matmul(&p.w_t);
    for i in 0..a_pre.rows {
        axpy(a_pre.row_mut(i), 1.0, &p.b_t);
    }
    let mut t = a_pre.clone();
    relu(&mut t.data);
    let y = output_layer(p, &t);
    (
        y,
        HeadTape {
            enc,
            h,
            cache,
            c,
            tail: TailTape { a_pre, t },
        },
    )
}

/// Returns the gradient with respect to the split-real head input.
pub fn head_backward(p: &UgcnParams, tape: &HeadTape, g_y: &RMat, grads: &mut UgcnParams) -> Vec<f64> {
    let g_a = output_backward(p, &tape.tail, g_y, grads);
    grads.w_t.add_assign(&tape.c.t_matmul(&g_a));
    let g_c = g_a.matmul_t(&p.w_t);
    let mut g_h = vec![0.0; g_c.cols];
    for i in 0..g_c.rows {
        axpy(&mut g_h, 1.0, g_c.row(i));
        for c in 0..g_c.cols {
            let e = tape.cache.e_pos.at(i, c);
            let g = g_c.at(i, c) * (1.0 - e * e);
            grads.w_pos[c] += g * tape.cache.pos[i];
            grads.b_pos[c] += g;
        }
    }
    debug_assert_eq!(tape.h.len(), g_h.len());
    encoder_backward(p, &tape.enc, &g_h, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn position_endpoints() {
        assert_eq!(positions(1), vec![0.0]);
        assert_eq!(positions(2), vec![0.0, 1.0]);
        assert_eq!(positions(5)[4], 1.0);
    }
}
