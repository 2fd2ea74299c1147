//! Stealth false-data injection on PMU measurements.
//!
//! A perturbation `δv` supported on the compromised buses `C` is stealthy
//! when `Y[P, C] δv_C = 0` for the honest PMU buses `P = A \ C`: the current
//! injections reported by honest PMUs do not change.

use crate::linalg::{ComplexMatrix, LinalgError, C64, PINV_RCOND};
use crate::rng;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Infinity norm of `δv` before scaling by ω.
pub const BASE_MAGNITUDE: f64 = 0.05;
/// Buses with `|δv| > LABEL_THRESHOLD` are labeled compromised.
pub const LABEL_THRESHOLD: f64 = 1e-8;
pub const OMEGA_GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FdiError {
    #[error("no stealth perturbation exists for this compromised set")]
    InfeasibleAttack,
    #[error("compromised bus {0} carries no PMU")]
    NotASensor(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackScenario {
    /// Bus indices whose PMUs the attacker controls, sorted. A bus in this
    /// set may still carry a zero perturbation and a zero label.
    pub compromised: Vec<usize>,
    pub delta_v: Vec<C64>,
    pub omega: f64,
    pub labels: Vec<u8>,
}

impl AttackScenario {
    pub fn none(n: usize) -> Self {
        Self {
            compromised: Vec::new(),
            delta_v: vec![C64::new(0.0, 0.0); n],
            omega: 0.0,
            labels: vec![0; n],
        }
    }

    pub fn n_compromised(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

pub fn labels_from(delta_v: &[C64]) -> Vec<u8> {
    delta_v.iter().map(|d| u8::from(d.norm() > LABEL_THRESHOLD)).collect()
}

/// Orthonormal basis (columns) of the null space of `a`, via a full SVD.
pub fn null_space(a: &ComplexMatrix) -> Result<Vec<Vec<C64>>, LinalgError> {
    let (rows, cols) = (a.rows(), a.cols());
    if cols == 0 {
        return Ok(Vec::new());
    }
    if rows == 0 || a.max_abs() == 0.0 {
        return Ok((0..cols)
            .map(|j| (0..cols).map(|i| C64::new(f64::from(u8::from(i == j)), 0.0)).collect())
            .collect());
    }
    // Zero rows do not change the null space and make the SVD square.
    let padded = ComplexMatrix::from_fn(rows.max(cols), cols, |r, c| {
        if r < rows {
            a[(r, c)]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let svd = padded.to_nalgebra().svd(false, true);
    let vt = svd.v_t.ok_or(LinalgError::SvdFailed)?;
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = PINV_RCOND * sigma_max;
    Ok((0..vt.nrows())
        .filter(|&k| svd.singular_values[k] <= cutoff)
        .map(|k| (0..cols).map(|i| vt[(k, i)].conj()).collect())
        .collect())
}

/// Builds a stealth perturbation on `target` (a subset of the PMU buses
/// `pmu`): a random unit combination of the null-space basis of
/// `Y[P, C]`, scaled to infinity norm [`BASE_MAGNITUDE`].
pub fn build_stealth_attack(
    y: &ComplexMatrix,
    pmu: &[usize],
    target: &[usize],
    omega: f64,
    seed: u64,
) -> Result<AttackScenario, FdiError> {
    let mut rng = rng::stream(seed, &[rng::tag::ATTACK]);
    build_stealth_attack_with(y, pmu, target, omega, &mut rng)
}

pub fn build_stealth_attack_with(
    y: &ComplexMatrix,
    pmu: &[usize],
    target: &[usize],
    omega: f64,
    rng: &mut ChaCha8Rng,
) -> Result<AttackScenario, FdiError> {
    let n = y.rows();
    let mut target = target.to_vec();
    target.sort_unstable();
    target.dedup();
    if let Some(&c) = target.iter().find(|c| !pmu.contains(c)) {
        return Err(FdiError::NotASensor(c));
    }
    if target.is_empty() {
        return Ok(AttackScenario {
            omega,
            ..AttackScenario::none(n)
        });
    }
    let honest: Vec<usize> = pmu.iter().copied().filter(|a| !target.contains(a)).collect();
    let y_pc = y.select(&honest, &target);
    let basis = null_space(&y_pc)?;
    if basis.is_empty() {
        return Err(FdiError::InfeasibleAttack);
    }
    let coeffs: Vec<C64> = (0..basis.len())
        .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    let mut dv_c = vec![C64::new(0.0, 0.0); target.len()];
    for (b, a) in basis.iter().zip(&coeffs) {
        for (d, x) in dv_c.iter_mut().zip(b) {
            *d += a * x;
        }
    }
    let inf = dv_c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if inf < 1e-300 {
        return Err(FdiError::InfeasibleAttack);
    }
    let scale = BASE_MAGNITUDE / inf;
    let mut delta_v = vec![C64::new(0.0, 0.0); n];
    for (&c, d) in target.iter().zip(&dv_c) {
        delta_v[c] = d * scale;
    }
    let labels = labels_from(&delta_v);
    Ok(AttackScenario {
        compromised: target,
        delta_v,
        omega,
        labels,
    })
}

/// `‖Y[P, C] δv_C‖∞` for the honest PMU set.
pub fn stealth_residual(y: &ComplexMatrix, pmu: &[usize], attack: &AttackScenario) -> f64 {
    let honest: Vec<usize> = pmu
        .iter()
        .copied()
        .filter(|a| !attack.compromised.contains(a))
        .collect();
    honest
        .iter()
        .map(|&p| {
            (0..y.cols())
                .map(|c| y[(p, c)] * attack.delta_v[c])
                .sum::<C64>()
                .norm()
        })
        .fold(0.0, f64::max)
}

/// `z + ω H δv`.
pub fn inject(z: &[C64], h: &ComplexMatrix, delta_v: &[C64], omega: f64) -> Result<Vec<C64>, FdiError> {
    if z.len() != h.rows() || delta_v.len() != h.cols() {
        return Err(FdiError::DimensionMismatch(format!(
            "z has {} entries, H is {}x{}, delta_v has {}",
            z.len(),
            h.rows(),
            h.cols(),
            delta_v.len()
        )));
    }
    let hd = h.mul_vec(delta_v)?;
    Ok(z.iter().zip(&hd).map(|(a, b)| a + b * omega).collect())
}

/// Draws a compromised subset of `0..n_sensors` with uniformly distributed
/// size `0..=n_sensors`, and ω from [`OMEGA_GRID`].
pub fn sample_attack_config(n_sensors: usize, seed: u64) -> (Vec<usize>, f64) {
    sample_attack_config_with(n_sensors, &mut rng::stream(seed, &[rng::tag::ATTACK]))
}

pub fn sample_attack_config_with(n_sensors: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let k = rng.gen_range(0..=n_sensors);
    let mut set = sample(rng, n_sensors, k).into_vec();
    set.sort_unstable();
    let omega = OMEGA_GRID[rng.gen_range(0..OMEGA_GRID.len())];
    (set, omega)
}

/// Number of PMUs for the FDI experiments.
pub fn fdi_sensor_count(n_buses: usize) -> usize {
    match n_buses {
        30 => 15,
        57 => 25,
        n => n.div_ceil(2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_admittance;
    use crate::scenario::estimation::build_pmu_matrix;

    fn case30() -> ComplexMatrix {
        build_admittance(&crate::caseio::bundled_graph("ieee30").unwrap()).unwrap()
    }

    #[test]
    fn single_leaf_with_honest_neighbor_is_infeasible() {
        let y = case30();
        // Bus 26 (index 25) hangs off bus 25 (index 24) only.
        let r = build_stealth_attack(&y, &[24, 25], &[25], 1.0, 0);
        assert_eq!(r, Err(FdiError::InfeasibleAttack));
    }

    #[test]
    fn feasible_attacks_are_stealthy() {
        let y = case30();
        let pmu: Vec<usize> = (0..30).step_by(2).collect();
        let a = build_stealth_attack(&y, &pmu, &pmu[..10], 0.5, 3).unwrap();
        assert!(stealth_residual(&y, &pmu, &a) < 1e-10);
        let inf = a.delta_v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!((inf - BASE_MAGNITUDE).abs() < 1e-12);
        for i in 0..30 {
            if !pmu[..10].contains(&i) {
                assert_eq!(a.delta_v[i], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn injection_is_linear_in_omega() {
        let y = case30();
        let pmu: Vec<usize> = (0..30).step_by(2).collect();
        let h = build_pmu_matrix(&y, &pmu);
        let a = build_stealth_attack(&y, &pmu, &pmu[..8], 1.0, 5).unwrap();
        let z: Vec<C64> = (0..h.rows()).map(|i| C64::new(i as f64, 1.0)).collect();
        assert_eq!(inject(&z, &h, &a.delta_v, 0.0).unwrap(), z);
        let d1 = vec_diff(&inject(&z, &h, &a.delta_v, 1.0).unwrap(), &z);
        let d5 = vec_diff(&inject(&z, &h, &a.delta_v, 0.5).unwrap(), &z);
        for (x, y) in d1.iter().zip(&d5) {
            assert!((x - y * 2.0).norm() < 1e-14);
        }
        // Honest current rows do not move.
        let honest: Vec<usize> = (0..pmu.len()).filter(|&r| a.labels[pmu[r]] == 0).collect();
        assert!(honest.iter().all(|&r| d1[r].norm() < 1e-10));
    }

    fn vec_diff(a: &[C64], b: &[C64]) -> Vec<C64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    #[test]
    fn sampled_configs() {
        assert_eq!(fdi_sensor_count(30), 15);
        assert_eq!(fdi_sensor_count(57), 25);
        assert_eq!(sample_attack_config(15, 4), sample_attack_config(15, 4));
        for s in 0..50 {
            let (c, w) = sample_attack_config(15, s);
            assert!(c.len() <= 15 && c.iter().all(|&i| i < 15));
            assert!(OMEGA_GRID.contains(&w));
        }
        let none = AttackScenario::none(5);
        assert!(none.labels.iter().all(|&l| l == 0));
    }
}
