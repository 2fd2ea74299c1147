//! Steady-state power flow: backward/forward sweep on radial feeders and
//! polar Newton-Raphson on meshed networks. The root (slack) bus is held at
//! 1∠0 and every other bus is a PQ bus.

use crate::grid::{build_admittance, GridError, GridGraph, GridKind};
use crate::linalg::{ComplexMatrix, C64};
use nalgebra::{DMatrix, DVector};

pub const MISMATCH_TOL: f64 = 1e-10;
const SWEEP_MAX_ITER: usize = 200;
const NEWTON_MAX_ITER: usize = 30;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PowerFlowError {
    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:e})")]
    NoConvergence { iterations: usize, mismatch: f64 },
    #[error("demand vector has {0} entries for {1} buses")]
    DemandLength(usize, usize),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Bus voltages for complex net demand `demand` (p.u., positive = load).
pub fn solve_powerflow(g: &GridGraph, demand: &[C64]) -> Result<Vec<C64>, PowerFlowError> {
    if demand.len() != g.n() {
        return Err(PowerFlowError::DemandLength(demand.len(), g.n()));
    }
    let y = build_admittance(g)?;
    match g.kind {
        GridKind::Distribution => sweep(g, &y, demand),
        GridKind::Transmission => newton(g, &y, demand),
    }
}

/// Largest nodal balance error `|v_n conj((Yv)_n) + S_n|` over non-slack buses.
pub fn nodal_mismatch(y: &ComplexMatrix, v: &[C64], demand: &[C64], slack: usize) -> f64 {
    let i = y.mul_vec(v).expect("admittance and voltage sizes agree");
    (0..v.len())
        .filter(|&n| n != slack)
        .map(|n| (v[n] * i[n].conj() + demand[n]).norm())
        .fold(0.0, f64::max)
}

fn sweep(g: &GridGraph, y: &ComplexMatrix, demand: &[C64]) -> Result<Vec<C64>, PowerFlowError> {
    let n = g.n();
    let root = g.root_index();
    let order = g.bfs_order();
    let index = g.index_map();
    let mut parent = vec![usize::MAX; n];
    let mut z_up = vec![C64::new(0.0, 0.0); n];
    let adj = g.adjacency();
    let mut seen = vec![false; n];
    seen[root] = true;
    for &i in &order {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                parent[j] = i;
            }
        }
    }
    for b in g.in_service() {
        let (i, j) = (index[&b.from], index[&b.to]);
        if parent[j] == i {
            z_up[j] = b.impedance;
        } else if parent[i] == j {
            z_up[i] = b.impedance;
        }
    }

    let mut v = vec![C64::new(1.0, 0.0); n];
    if demand.iter().all(|d| *d == C64::new(0.0, 0.0)) {
        return Ok(v);
    }
    let mut current = vec![C64::new(0.0, 0.0); n];
    let mut mismatch = f64::INFINITY;
    for iter in 1..=SWEEP_MAX_ITER {
        for &i in &order {
            current[i] = (demand[i] / v[i]).conj();
        }
        for &i in order.iter().rev() {
            if i != root {
                let p = parent[i];
                let c = current[i];
                current[p] += c;
            }
        }
        for &i in order.iter().skip(1) {
            v[i] = v[parent[i]] - z_up[i] * current[i];
        }
        if v.iter().any(|x| !x.is_finite() || x.norm() < 0.2) {
            return Err(PowerFlowError::NoConvergence {
                iterations: iter,
                mismatch: f64::INFINITY,
            });
        }
        mismatch = nodal_mismatch(y, &v, demand, root);
        if mismatch < MISMATCH_TOL {
            return Ok(v);
        }
    }
    Err(PowerFlowError::NoConvergence {
        iterations: SWEEP_MAX_ITER,
        mismatch,
    })
}

fn newton(g: &GridGraph, y: &ComplexMatrix, demand: &[C64]) -> Result<Vec<C64>, PowerFlowError> {
    let n = g.n();
    let slack = g.root_index();
    let pq: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let m = pq.len();
    let mut v = vec![C64::new(1.0, 0.0); n];
    if demand.iter().all(|d| *d == C64::new(0.0, 0.0)) {
        return Ok(v);
    }
    let yn = y.to_nalgebra();
    let mut mismatch = f64::INFINITY;
    for iter in 0..=NEWTON_MAX_ITER {
        let vv = DVector::from_vec(v.clone());
        let ibus = &yn * &vv;
        let mis: Vec<C64> = (0..n).map(|k| v[k] * ibus[k].conj() + demand[k]).collect();
        mismatch = pq.iter().map(|&k| mis[k].norm()).fold(0.0, f64::max);
        if !mismatch.is_finite() {
            break;
        }
        if mismatch < MISMATCH_TOL {
            return Ok(v);
        }
        if iter == NEWTON_MAX_ITER {
            break;
        }
        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
        // dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        let mut jac = DMatrix::<f64>::zeros(2 * m, 2 * m);
        for (r, &a) in pq.iter().enumerate() {
            for (c, &b) in pq.iter().enumerate() {
                let ynb = yn[(a, b)];
                let unit_b = v[b] / v[b].norm();
                let diag = if a == b { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                let ds_dva = C64::new(0.0, 1.0) * v[a] * (diag * ibus[a] - ynb * v[b]).conj();
                let ds_dvm = v[a] * (ynb * unit_b).conj() + diag * ibus[a].conj() * unit_b;
                jac[(r, c)] = ds_dva.re;
                jac[(r, m + c)] = ds_dvm.re;
                jac[(m + r, c)] = ds_dva.im;
                jac[(m + r, m + c)] = ds_dvm.im;
            }
        }
        let f = DVector::from_iterator(
            2 * m,
            pq.iter().map(|&k| mis[k].re).chain(pq.iter().map(|&k| mis[k].im)),
        );
        let Some(dx) = jac.lu().solve(&f) else {
            break;
        };
        for (r, &k) in pq.iter().enumerate() {
            let va = v[k].arg() - dx[r];
            let vm = v[k].norm() - dx[m + r];
            v[k] = C64::from_polar(vm, va);
        }
        if v.iter().any(|x| !x.is_finite() || x.norm() < 0.2) {
            break;
        }
    }
    Err(PowerFlowError::NoConvergence {
        iterations: NEWTON_MAX_ITER,
        mismatch,
    })
}
