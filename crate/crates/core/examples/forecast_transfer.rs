//! Train on augmented IEEE 33-bus variants, compare against a dense network
//! trained on the base topology, and evaluate both on unseen
//! reconfigurations.
//!
//! `cargo run --release --example forecast_transfer -- [q_train] [q_test] [epochs]`

use std::time::Instant;
use ugcn::experiment::{run_transfer, TransferSetup};
use ugcn::par::default_jobs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut setup = TransferSetup::default();
    setup.q_train = args.first().copied().unwrap_or(setup.q_train);
    setup.q_test = args.get(1).copied().unwrap_or(setup.q_test);
    setup.train.epochs = args.get(2).copied().unwrap_or(setup.train.epochs);
    let clock = Instant::now();

    let out = run_transfer(&setup, default_jobs(), |s| {
        if let Some(r) = s.history.last().filter(|r| r.epoch % 10 == 1) {
            println!("epoch {:3} loss {:.5} val {:.5}", r.epoch, r.loss, r.val_loss);
        }
    })?;
    println!("stopped after {} epochs, {:.1}s", out.state.epoch, clock.elapsed().as_secs_f64());

    println!("h  ugcn_mse    dense_mse   dense_base  ratio");
    for &h in &setup.horizons {
        println!(
            "{h}  {:.3e}  {:.3e}  {:.3e}  {:.2}",
            out.ugcn.mse_at(h).unwrap(),
            out.dense.mse_at(h).unwrap(),
            out.dense_on_base.mse_at(h).unwrap(),
            out.ratio(h).unwrap()
        );
    }
    Ok(())
}
