//! Simulate a day-ahead time series on one feeder variant: synthetic load
//! and PV profiles, power flow, AMI estimation and the model's feature
//! windows.
//!
//! `cargo run --release --example scenario_generation -- [case] [hours]`

use ugcn::caseio::bundled_graph;
use ugcn::scenario::{build_features, generate_scenario, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = std::env::args().nth(1).unwrap_or_else(|| "ieee33".into());
    let hours: usize = std::env::args().nth(2).and_then(|a| a.parse().ok()).unwrap_or(96);
    let g = bundled_graph(&case)?.canonicalized();
    let cfg = ScenarioConfig {
        t_total: hours,
        ..ScenarioConfig::default()
    };
    let set = generate_scenario(&case, &g, &[], &cfg, 3, 0)?;
    println!(
        "{case}: {:?}, {} buses, {} AMI, {} PMU, load scale {}",
        set.scenario,
        set.n(),
        set.ami_set.len(),
        set.pmu_set.len(),
        set.load_scale
    );

    let n = set.n() as f64;
    let mut err = 0.0;
    for (v, e) in set.true_states.iter().zip(&set.estimates) {
        err += v.iter().zip(e).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / n;
    }
    println!("estimate mse {:.3e} p.u.^2", err / hours as f64);

    let far = set.n() - 1;
    println!("hour  |v_far|  est");
    for t in (0..hours).step_by(6) {
        println!("{t:4}  {:.4}   {:.4}", set.true_states[t][far].norm(), set.estimates[t][far].norm());
    }

    let (x, y) = build_features(&set.estimates, &set.true_states, 30, 10, 1)?;
    println!("window at t=30: {}x{} features, target has {} buses", x.rows(), x.cols(), y.len());
    Ok(())
}
