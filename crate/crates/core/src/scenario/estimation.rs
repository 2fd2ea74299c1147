//! State estimation from smart-meter (AMI) and phasor (PMU) measurements,
//! plus the sensor placement rules for both.

use crate::grid::GridGraph;
use crate::linalg::{regularized_solve, ComplexMatrix, LinalgError, C64};
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EstimationError {
    #[error("estimation produced non-finite values after {0} iterations")]
    NoConvergence(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Leaf buses, extended by the deepest remaining buses until `fraction` of
/// all buses carry a meter. Returns sorted bus indices.
pub fn ami_placement(g: &GridGraph, fraction: f64) -> Vec<usize> {
    let target = (fraction * g.n() as f64).ceil() as usize;
    let mut set = g.leaves();
    if set.len() < target {
        let depth = g.depths();
        let root = g.root_index();
        let mut rest: Vec<usize> = (0..g.n()).filter(|i| *i != root && !set.contains(i)).collect();
        rest.sort_by_key(|&i| (std::cmp::Reverse(depth[i]), g.bus_ids[i]));
        set.extend(rest.into_iter().take(target - set.len()));
    }
    set.sort_unstable();
    set
}

/// `count` distinct bus indices drawn uniformly, sorted.
pub fn pmu_placement(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut set = sample(rng, n, count.min(n)).into_vec();
    set.sort_unstable();
    set
}

/// AMI readings at metered buses: injected power and voltage magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmiMeasurements {
    pub buses: Vec<usize>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub vmag: Vec<f64>,
}

impl AmiMeasurements {
    /// Noiseless readings of state `v`.
    pub fn from_state(y: &ComplexMatrix, v: &[C64], buses: &[usize]) -> Self {
        let i = y.mul_vec(v).expect("state length matches admittance");
        let s: Vec<C64> = buses.iter().map(|&a| v[a] * i[a].conj()).collect();
        Self {
            buses: buses.to_vec(),
            p: s.iter().map(|x| x.re).collect(),
            q: s.iter().map(|x| x.im).collect(),
            vmag: buses.iter().map(|&a| v[a].norm()).collect(),
        }
    }
}

/// Point the ridge term pulls the state toward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RidgeCenter {
    /// `λ |v|²`.
    Zero,
    /// `λ |v − 1∠0|²`.
    Flat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmiConfig {
    pub lambda: f64,
    pub center: RidgeCenter,
    /// Measurement weights for the `p`, `q` and `|v|` channels.
    pub weights: [f64; 3],
    pub max_iter: usize,
    pub step_tol: f64,
}

impl Default for AmiConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            center: RidgeCenter::Flat,
            weights: [1.0, 1.0, 1.0],
            max_iter: 50,
            step_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmiEstimate {
    pub state: Vec<C64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Weighted least-squares objective with ridge term `λ |v − c|²`; the
/// root phasor is treated as an extra 1∠0 reading.
pub struct AmiProblem<'a> {
    y: &'a ComplexMatrix,
    meas: &'a AmiMeasurements,
    root: usize,
    cfg: &'a AmiConfig,
}

impl<'a> AmiProblem<'a> {
    pub fn new(y: &'a ComplexMatrix, meas: &'a AmiMeasurements, root: usize, cfg: &'a AmiConfig) -> Self {
        Self { y, meas, root, cfg }
    }

    fn n(&self) -> usize {
        self.y.rows()
    }

    fn weight_vec(&self) -> Vec<f64> {
        let [wp, wq, wv] = self.cfg.weights;
        let m = self.meas.buses.len();
        let mut w = Vec::with_capacity(3 * m + 2);
        w.extend(std::iter::repeat(wp).take(m));
        w.extend(std::iter::repeat(wq).take(m));
        w.extend(std::iter::repeat(wv).take(m));
        w.extend([1.0, 1.0]);
        w
    }

    /// Residual `z - h(v)`.
    fn residual(&self, v: &[C64]) -> Vec<f64> {
        let i = self.y.mul_vec(v).unwrap();
        let m = &self.meas;
        let s: Vec<C64> = m.buses.iter().map(|&a| v[a] * i[a].conj()).collect();
        let mut r = Vec::with_capacity(3 * m.buses.len() + 2);
        r.extend(s.iter().zip(&m.p).map(|(s, p)| p - s.re));
        r.extend(s.iter().zip(&m.q).map(|(s, q)| q - s.im));
        r.extend(m.buses.iter().zip(&m.vmag).map(|(&a, vm)| vm - v[a].norm()));
        r.push(1.0 - v[self.root].re);
        r.push(-v[self.root].im);
        r
    }

    pub fn objective(&self, v: &[C64]) -> f64 {
        let w = self.weight_vec();
        let r = self.residual(v);
        let data: f64 = r.iter().zip(&w).map(|(r, w)| w * r * r).sum();
        let c = self.center();
        data + self.cfg.lambda * v.iter().map(|x| (x - c).norm_sqr()).sum::<f64>()
    }

    fn center(&self) -> C64 {
        match self.cfg.center {
            RidgeCenter::Zero => C64::new(0.0, 0.0),
            RidgeCenter::Flat => C64::new(1.0, 0.0),
        }
    }

    /// Jacobian of `h` with respect to `[Re v, Im v]`.
    fn jacobian(&self, v: &[C64]) -> DMatrix<f64> {
        let n = self.n();
        let m = &self.meas;
        let k = m.buses.len();
        let i = self.y.mul_vec(v).unwrap();
        let mut jac = DMatrix::<f64>::zeros(3 * k + 2, 2 * n);
        let j = C64::new(0.0, 1.0);
        for (row, &a) in m.buses.iter().enumerate() {
            for col in 0..n {
                let yc = self.y[(a, col)].conj();
                let mut de = v[a] * yc;
                let mut df = -j * v[a] * yc;
                if col == a {
                    de += i[a].conj();
                    df += j * i[a].conj();
                }
                jac[(row, col)] = de.re;
                jac[(row, n + col)] = df.re;
                jac[(k + row, col)] = de.im;
                jac[(k + row, n + col)] = df.im;
            }
            let mag = v[a].norm().max(1e-12);
            jac[(2 * k + row, a)] = v[a].re / mag;
            jac[(2 * k + row, n + a)] = v[a].im / mag;
        }
        jac[(3 * k, self.root)] = 1.0;
        jac[(3 * k + 1, n + self.root)] = 1.0;
        jac
    }
}

/// Damped Gauss-Newton from a flat start. Returns the last iterate even
/// when the step tolerance is not reached within `max_iter`.
pub fn estimate_ami(
    y: &ComplexMatrix,
    meas: &AmiMeasurements,
    root: usize,
    cfg: &AmiConfig,
) -> Result<AmiEstimate, EstimationError> {
    let n = y.rows();
    if meas.p.len() != meas.buses.len() || meas.q.len() != meas.buses.len() || meas.vmag.len() != meas.buses.len() {
        return Err(EstimationError::DimensionMismatch("AMI channel lengths differ".into()));
    }
    if meas.buses.iter().any(|&a| a >= n) || root >= n {
        return Err(EstimationError::DimensionMismatch("bus index out of range".into()));
    }
    let prob = AmiProblem::new(y, meas, root, cfg);
    let w = DVector::from_vec(prob.weight_vec());
    let mut v = vec![C64::new(1.0, 0.0); n];
    let mut obj = prob.objective(&v);
    for iter in 1..=cfg.max_iter {
        let jac = prob.jacobian(&v);
        let r = DVector::from_vec(prob.residual(&v));
        let c = prob.center();
        let x = DVector::from_iterator(2 * n, v.iter().map(|z| z.re - c.re).chain(v.iter().map(|z| z.im - c.im)));
        let jw = DMatrix::from_fn(jac.ncols(), jac.nrows(), |c, rr| jac[(rr, c)] * w[rr]);
        let mut a = &jw * &jac;
        for d in 0..2 * n {
            a[(d, d)] += cfg.lambda;
        }
        let b = &jw * &r - &x * cfg.lambda;
        let step = match a.clone().cholesky() {
            Some(ch) => ch.solve(&b),
            None => a
                .svd(true, true)
                .solve(&b, 1e-12)
                .map_err(|_| EstimationError::NoConvergence(iter))?,
        };
        let mut scale = 1.0;
        let mut accepted = v.clone();
        let mut new_obj = obj;
        for _ in 0..30 {
            let trial: Vec<C64> = (0..n)
                .map(|k| v[k] + C64::new(step[k], step[n + k]) * scale)
                .collect();
            let t_obj = prob.objective(&trial);
            if t_obj.is_finite() && t_obj <= obj {
                accepted = trial;
                new_obj = t_obj;
                break;
            }
            scale *= 0.5;
        }
        if accepted.iter().any(|z| !z.is_finite()) {
            return Err(EstimationError::NoConvergence(iter));
        }
        let moved = step.norm() * scale;
        let stalled = new_obj == obj && accepted == v;
        v = accepted;
        obj = new_obj;
        if moved < cfg.step_tol || stalled {
            return Ok(AmiEstimate {
                state: v,
                objective: obj,
                iterations: iter,
                converged: moved < cfg.step_tol || step.norm() < cfg.step_tol,
            });
        }
    }
    Ok(AmiEstimate {
        state: v,
        objective: obj,
        iterations: cfg.max_iter,
        converged: false,
    })
}

/// Measurement matrix for PMUs at `pmu` (sorted bus indices): current
/// injection rows `Y[a, :]` followed by voltage rows `e_a`, columns in bus
/// order.
pub fn build_pmu_matrix(y: &ComplexMatrix, pmu: &[usize]) -> ComplexMatrix {
    let n = y.cols();
    let k = pmu.len();
    ComplexMatrix::from_fn(2 * k, n, |r, c| {
        if r < k {
            y[(pmu[r], c)]
        } else if pmu[r - k] == c {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn estimate_pmu(
    y: &ComplexMatrix,
    s: &ComplexMatrix,
    z: &[C64],
    pmu: &[usize],
    mu1: f64,
) -> Result<Vec<C64>, EstimationError> {
    let h = build_pmu_matrix(y, pmu);
    Ok(regularized_solve(&h, z, s, mu1)?)
}
