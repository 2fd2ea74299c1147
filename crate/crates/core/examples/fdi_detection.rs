//! Train the FDI detector on IEEE 30-bus transmission variants and evaluate
//! bus-level detection on unseen variants for a sweep of attack levels.
//!
//! `cargo run --release --example fdi_detection -- [q_train] [q_test] [epochs]`

use std::time::Instant;
use ugcn::experiment::{run_fdi, FdiSetup};
use ugcn::par::default_jobs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut setup = FdiSetup::default();
    setup.q_train = args.first().copied().unwrap_or(setup.q_train);
    setup.q_test = args.get(1).copied().unwrap_or(setup.q_test);
    setup.train.epochs = args.get(2).copied().unwrap_or(setup.train.epochs);
    let clock = Instant::now();

    let out = run_fdi(&setup, default_jobs(), |s| {
        if let Some(r) = s.history.last().filter(|r| r.epoch % 10 == 1) {
            println!("epoch {:3} loss {:.5} val {:.5}", r.epoch, r.loss, r.val_loss);
        }
    })?;
    println!("stopped after {} epochs, {:.1}s", out.state.epoch, clock.elapsed().as_secs_f64());

    let case = &out.cases[0];
    println!("omega  accuracy  precision  recall  f1      all_zeros");
    for (m, z) in case.ugcn.fdi.iter().zip(&case.all_zeros.fdi) {
        println!(
            "{:5.1}  {:8.4}  {:9.4}  {:6.4}  {:.4}  {:.4}",
            m.omega, m.accuracy, m.precision, m.recall, m.f1, z.accuracy
        );
    }
    Ok(())
}
