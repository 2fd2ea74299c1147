#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use ugcn::grid::{Branch, GridGraph, GridKind};
use ugcn::linalg::{ComplexMatrix, C64};
use ugcn::model::{GraphContext, LayerConfig, RMat, Session, UgcnParams};
use ugcn::rng;

pub fn random_tree(n: u32, seed: u64) -> GridGraph {
    let mut r = rng::stream(seed, &[1]);
    let branches = (2..=n)
        .map(|b| {
            let parent = r.gen_range(1..b);
            Branch::new(parent, b, C64::new(r.gen_range(0.05..0.3), r.gen_range(0.05..0.3)))
        })
        .collect();
    let loads = (1..=n).map(|_| C64::new(0.1, 0.05)).collect();
    GridGraph::new((1..=n).collect(), loads, branches, Some(1), GridKind::Distribution).unwrap()
}

pub fn random_cmat(rows: usize, cols: usize, r: &mut impl Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
}

/// Random Hermitian matrix scaled to spectral norm about one.
pub fn random_shift(n: usize, r: &mut impl Rng) -> ComplexMatrix {
    let a = random_cmat(n, n, r);
    let h = a.add(&a.adjoint()).unwrap();
    let norm = h.spectral_norm().unwrap();
    h.scale(C64::new(1.0 / norm, 0.0))
}

pub fn random_perm(n: usize, r: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(r);
    p
}

/// `P A Pᵀ` with `(P A Pᵀ)[i, j] = A[p[i], p[j]]`.
pub fn permute_sym(a: &ComplexMatrix, p: &[usize]) -> ComplexMatrix {
    ComplexMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(p[i], p[j])])
}

pub fn permute_rows(a: &ComplexMatrix, p: &[usize]) -> ComplexMatrix {
    ComplexMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(p[i], j)])
}

/// Direct evaluation of `σ(Σ_τ Σ_k S^k X_{t-τ} H_{k,τ})` with explicit loops,
/// σ the split ReLU.
pub fn naive_conv(s: &ComplexMatrix, x: &[ComplexMatrix], h: &[ComplexMatrix], k: usize, k_t: usize) -> ComplexMatrix {
    let n = s.rows();
    let f_in = h[0].rows();
    let f_out = h[0].cols();
    let mut out = ComplexMatrix::zeros(n, f_out);
    let mut sk = ComplexMatrix::identity(n);
    for kk in 0..=k {
        for tau in 0..=k_t {
            let hk = &h[kk * (k_t + 1) + tau];
            for i in 0..n {
                for g in 0..f_out {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..n {
                        for f in 0..f_in {
                            acc += sk[(i, j)] * x[tau][(j, f)] * hk[(f, g)];
                        }
                    }
                    out[(i, g)] += acc;
                }
            }
        }
        let mut next = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                for m in 0..n {
                    next[(i, j)] += sk[(i, m)] * s[(m, j)];
                }
            }
        }
        sk = next;
    }
    for z in out.as_mut_slice() {
        *z = C64::new(z.re.max(0.0), z.im.max(0.0));
    }
    out
}

pub fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.sub(b).unwrap().max_abs()
}

pub fn random_window(cfg: &LayerConfig, n: usize, seed: u64) -> Vec<ComplexMatrix> {
    let mut r = rng::stream(seed, &[2]);
    (0..cfg.window_len())
        .map(|_| ComplexMatrix::from_fn(n, cfg.input_width(), |_, _| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))))
        .collect()
}

fn loss_and_seed(y: &RMat, w: &[f64]) -> (f64, RMat) {
    let mut g = y.clone();
    let mut l = 0.0;
    for (i, v) in y.data.iter().enumerate() {
        l += 0.5 * v * v + w[i] * v;
        g.data[i] = v + w[i];
    }
    (l, g)
}

/// Relative error between analytic and central-difference gradients, per
/// parameter tensor, on a random 6-bus tree.
pub fn gradient_errors(cfg: &LayerConfig, seed: u64) -> Vec<(String, f64)> {
    let n = 6;
    let g = random_tree(n as u32, seed);
    let ctx = GraphContext::new(&g, true).unwrap();
    let window = random_window(cfg, n, seed);
    let mut p = UgcnParams::init(cfg, seed);
    let mut r = rng::stream(seed, &[3]);
    for b in p.b_enc.iter_mut().chain(p.b_t.iter_mut()) {
        *b = r.gen_range(0.0..0.2);
    }
    let w: Vec<f64> = (0..n * cfg.n_outputs()).map(|_| r.gen_range(-1.0..1.0)).collect();

    let mut s = Session::new(&p, cfg);
    let y = s.forward(&ctx, &window, n).unwrap();
    let (_, gy) = loss_and_seed(&y.values, &w);
    let analytic = s.backward(&gy).unwrap().to_flat();

    let base = p.to_flat();
    let eval = |p: &mut UgcnParams, flat: &[f64]| {
        p.set_flat(flat);
        let mut s = Session::new(p, cfg);
        let y = s.forward(&ctx, &window, n).unwrap();
        loss_and_seed(&y.values, &w).0
    };
    let h = 1e-5;
    let mut numeric = vec![0.0; base.len()];
    let mut flat = base.clone();
    for i in 0..base.len() {
        flat[i] = base[i] + h;
        let lp = eval(&mut p, &flat);
        flat[i] = base[i] - h;
        let lm = eval(&mut p, &flat);
        flat[i] = base[i];
        numeric[i] = (lp - lm) / (2.0 * h);
    }
    p.set_flat(&base);

    let mut offset = 0;
    let mut out = Vec::new();
    for t in p.tensors() {
        let len = t.rows * t.cols * if t.complex { 2 } else { 1 };
        let a = &analytic[offset..offset + len];
        let b = &numeric[offset..offset + len];
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = a.iter().chain(b).map(|x| x * x).sum::<f64>().sqrt();
        let rel = if scale < 1e-12 { diff } else { diff / scale };
        out.push((t.name.to_string(), rel));
        offset += len;
    }
    out
}

