//! Adaptive pooling from `N_q` nodes to a fixed `N_p`.

use super::params::ScoreKind;
use super::ModelError;
use crate::linalg::{ComplexMatrix, C64};

/// Cluster sizes for `n` nodes into `n_p` contiguous blocks, larger blocks first.
pub fn cluster_sizes(n: usize, n_p: usize) -> Result<Vec<usize>, ModelError> {
    if n_p == 0 || n < n_p {
        return Err(ModelError::TooFewNodes { n, n_pool: n_p });
    }
    let (base, rem) = (n / n_p, n % n_p);
    Ok((0..n_p).map(|i| base + usize::from(i < rem)).collect())
}

#[derive(Clone, Debug)]
pub struct CustomPoolTape {
    /// Node indices per cluster.
    pub clusters: Vec<Vec<usize>>,
    /// `argmax[c * F + f]` for the real and imaginary parts.
    arg_re: Vec<usize>,
    arg_im: Vec<usize>,
}

/// `order` lists node indices in BFS order from the root. Output row `c` is
/// `[mean ‖ max]` over cluster `c`, where max is taken on real and imaginary
/// parts independently.
pub fn pool_custom_with_tape(
    x: &ComplexMatrix,
    n_p: usize,
    order: &[usize],
) -> Result<(ComplexMatrix, CustomPoolTape), ModelError> {
    let (n, f) = (x.rows(), x.cols());
    if order.len() != n {
        return Err(ModelError::DimensionMismatch(format!(
            "ordering has {} entries for {n} nodes",
            order.len()
        )));
    }
    let sizes = cluster_sizes(n, n_p)?;
    let mut clusters = Vec::with_capacity(n_p);
    let mut start = 0;
    for s in sizes {
        clusters.push(order[start..start + s].to_vec());
        start += s;
    }
    let mut out = ComplexMatrix::zeros(n_p, 2 * f);
    let mut arg_re = vec![0; n_p * f];
    let mut arg_im = vec![0; n_p * f];
    for (c, members) in clusters.iter().enumerate() {
        let inv = 1.0 / members.len() as f64;
        for j in 0..f {
            let mut sum = C64::new(0.0, 0.0);
            let (mut bre, mut bim) = (members[0], members[0]);
            for &m in members {
                let v = x[(m, j)];
                sum += v;
                if v.re > x[(bre, j)].re {
                    bre = m;
                }
                if v.im > x[(bim, j)].im {
                    bim = m;
                }
            }
            out[(c, j)] = sum * inv;
            out[(c, f + j)] = C64::new(x[(bre, j)].re, x[(bim, j)].im);
            arg_re[c * f + j] = bre;
            arg_im[c * f + j] = bim;
        }
    }
    Ok((out, CustomPoolTape { clusters, arg_re, arg_im }))
}

pub fn pool_custom(x: &ComplexMatrix, n_p: usize, order: &[usize]) -> Result<ComplexMatrix, ModelError> {
    pool_custom_with_tape(x, n_p, order).map(|(p, _)| p)
}

pub fn pool_custom_backward(tape: &CustomPoolTape, g: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let f = g.cols() / 2;
    let mut gx = ComplexMatrix::zeros(n, f);
    for (c, members) in tape.clusters.iter().enumerate() {
        let inv = 1.0 / members.len() as f64;
        for j in 0..f {
            let ga = g[(c, j)] * inv;
            for &m in members {
                gx[(m, j)] += ga;
            }
            let gm = g[(c, f + j)];
            gx[(tape.arg_re[c * f + j], j)].re += gm.re;
            gx[(tape.arg_im[c * f + j], j)].im += gm.im;
        }
    }
    gx
}

#[derive(Clone, Debug)]
pub struct LearnablePoolTape {
    /// `U = W_A Xᴴ`.
    u: ComplexMatrix,
    /// Row-stochastic assignment `A_q`.
    pub assign: Vec<Vec<f64>>,
}

/// Returns the assignment `A_q` (`N_p × N_q`, rows sum to one) and `A_q X`.
pub fn pool_learnable(
    x: &ComplexMatrix,
    w_a: &ComplexMatrix,
    score: ScoreKind,
) -> Result<(Vec<Vec<f64>>, ComplexMatrix), ModelError> {
    pool_learnable_with_tape(x, w_a, score).map(|(p, t)| (t.assign, p))
}

pub fn pool_learnable_with_tape(
    x: &ComplexMatrix,
    w_a: &ComplexMatrix,
    score: ScoreKind,
) -> Result<(ComplexMatrix, LearnablePoolTape), ModelError> {
    if w_a.cols() != x.cols() {
        return Err(ModelError::DimensionMismatch(format!(
            "W_A has {} columns, features have {}",
            w_a.cols(),
            x.cols()
        )));
    }
    let (n_p, n, f) = (w_a.rows(), x.rows(), x.cols());
    let u = ComplexMatrix::from_fn(n_p, n, |i, j| {
        (0..f).map(|k| w_a[(i, k)] * x[(j, k)].conj()).sum()
    });
    let mut assign = Vec::with_capacity(n_p);
    for i in 0..n_p {
        let s: Vec<f64> = (0..n)
            .map(|j| match score {
                ScoreKind::Modulus => u[(i, j)].norm(),
                ScoreKind::Real => u[(i, j)].re,
            })
            .collect();
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = e.iter().sum();
        assign.push(e.into_iter().map(|v| v / z).collect::<Vec<_>>());
    }
    let mut pooled = ComplexMatrix::zeros(n_p, f);
    for (i, row) in assign.iter().enumerate() {
        for (j, &a) in row.iter().enumerate() {
            for k in 0..f {
                pooled[(i, k)] += x[(j, k)] * a;
            }
        }
    }
    Ok((pooled, LearnablePoolTape { u, assign }))
}

/// Returns the input gradient and accumulates into `g_w`.
pub fn pool_learnable_backward(
    tape: &LearnablePoolTape,
    x: &ComplexMatrix,
    w_a: &ComplexMatrix,
    score: ScoreKind,
    g: &ComplexMatrix,
    g_w: &mut ComplexMatrix,
) -> ComplexMatrix {
    let (n_p, n, f) = (w_a.rows(), x.rows(), x.cols());
    let mut gx = ComplexMatrix::zeros(n, f);
    for i in 0..n_p {
        let a = &tape.assign[i];
        let ga: Vec<f64> = (0..n)
            .map(|j| (0..f).map(|k| (g[(i, k)].conj() * x[(j, k)]).re).sum())
            .collect();
        let mean: f64 = a.iter().zip(&ga).map(|(p, q)| p * q).sum();
        for j in 0..n {
            for k in 0..f {
                gx[(j, k)] += g[(i, k)] * a[j];
            }
            let gs = a[j] * (ga[j] - mean);
            let u = tape.u[(i, j)];
            let gu = match score {
                ScoreKind::Modulus => {
                    let r = u.norm();
                    if r > 0.0 {
                        u * (gs / r)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                }
                ScoreKind::Real => C64::new(gs, 0.0),
            };
            if gu.re == 0.0 && gu.im == 0.0 {
                continue;
            }
            for k in 0..f {
                g_w[(i, k)] += gu * x[(j, k)];
                gx[(j, k)] += gu.conj() * w_a[(i, k)];
            }
        }
    }
    gx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_match_examples() {
        let mut s = cluster_sizes(13, 4).unwrap();
        s.sort_unstable();
        assert_eq!(s, vec![3, 3, 3, 4]);
        assert_eq!(cluster_sizes(10, 4).unwrap(), vec![3, 3, 2, 2]);
        assert!(matches!(cluster_sizes(3, 4), Err(ModelError::TooFewNodes { .. })));
    }

    #[test]
    fn constant_input_pools_to_constant() {
        let c = C64::new(0.3, -1.2);
        let x = ComplexMatrix::from_fn(11, 3, |_, _| c);
        let order: Vec<usize> = (0..11).rev().collect();
        let p = pool_custom(&x, 4, &order).unwrap();
        assert_eq!((p.rows(), p.cols()), (4, 6));
        assert!(p.as_slice().iter().all(|v| (v - c).norm() < 1e-15));
    }

    #[test]
    fn equal_scores_give_uniform_rows() {
        let x = ComplexMatrix::from_fn(5, 2, |_, _| C64::new(1.0, 1.0));
        let w = ComplexMatrix::from_fn(3, 2, |i, k| C64::new(i as f64, k as f64));
        let (a, p) = pool_learnable(&x, &w, ScoreKind::Modulus).unwrap();
        for row in &a {
            assert!(row.iter().all(|v| (v - 0.2).abs() < 1e-15));
        }
        assert_eq!((p.rows(), p.cols()), (3, 2));
    }
}
