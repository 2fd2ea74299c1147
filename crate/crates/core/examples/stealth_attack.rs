//! Build stealth false-data injections on the IEEE 30-bus system and show
//! that honest PMU rows and the least-squares residual do not see them,
//! while the estimated state moves.
//!
//! `cargo run --example stealth_attack -- [attacks]`

use ugcn::caseio::bundled_graph;
use ugcn::fdi::{build_stealth_attack, fdi_sensor_count, inject, sample_attack_config, stealth_residual, FdiError};
use ugcn::grid::{build_admittance, build_gso};
use ugcn::linalg::{vec_norm, vec_sub, C64};
use ugcn::scenario::calibrate_load_scale;
use ugcn::scenario::estimation::{build_pmu_matrix, estimate_pmu};
use ugcn::scenario::powerflow::solve_powerflow;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let count: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(8);
    let g = bundled_graph("ieee30")?;
    let y = build_admittance(&g)?;
    let s = build_gso(&y)?.matrix;
    let scale = calibrate_load_scale(&g);
    let v = solve_powerflow(&g, &g.nominal_load.iter().map(|l| l * scale).collect::<Vec<_>>())?;
    let pmu: Vec<usize> = (0..g.n()).step_by(2).take(fdi_sensor_count(g.n())).collect();
    let h = build_pmu_matrix(&y, &pmu);
    let z = h.mul_vec(&v)?;
    let x0 = estimate_pmu(&y, &s, &z, &pmu, 0.0)?;
    let r0 = vec_norm(&vec_sub(&z, &h.mul_vec(&x0)?));

    println!("seed  |C|  labels  omega  honest_rows  residual_change  state_shift");
    for seed in 0..count {
        let (sub, omega) = sample_attack_config(pmu.len(), seed);
        let target: Vec<usize> = sub.iter().map(|&i| pmu[i]).collect();
        let attack = match build_stealth_attack(&y, &pmu, &target, omega, seed) {
            Ok(a) => a,
            Err(FdiError::InfeasibleAttack) => {
                println!("{seed:4}  {:3}  infeasible", target.len());
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let za = inject(&z, &h, &attack.delta_v, omega)?;
        let xa = estimate_pmu(&y, &s, &za, &pmu, 0.0)?;
        let ra = vec_norm(&vec_sub(&za, &h.mul_vec(&xa)?));
        let shift: Vec<C64> = vec_sub(&xa, &x0);
        println!(
            "{seed:4}  {:3}  {:6}  {omega:.1}    {:.1e}      {:.1e}          {:.3}",
            target.len(),
            attack.labels.iter().filter(|&&l| l == 1).count(),
            stealth_residual(&y, &pmu, &attack),
            (ra - r0).abs(),
            vec_norm(&shift)
        );
    }
    Ok(())
}
