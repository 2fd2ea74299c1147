//! One detector trained jointly on IEEE 30- and 39-bus variants, evaluated
//! on unseen variants of each.
//!
//! `cargo run --release --example hybrid_fdi -- [q_train per case] [epochs]`

use ugcn::experiment::{pooled_fdi, run_fdi, FdiSetup};
use ugcn::par::default_jobs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut setup = FdiSetup {
        cases: vec!["ieee30".into(), "ieee39".into()],
        ..FdiSetup::default()
    };
    setup.q_train = args.first().copied().unwrap_or(setup.q_train);
    setup.train.epochs = args.get(1).copied().unwrap_or(setup.train.epochs);

    let out = run_fdi(&setup, default_jobs(), |_| {})?;
    println!("trained {} epochs on {} systems", out.state.epoch, setup.q_train * setup.cases.len());
    for c in &out.cases {
        let (u, z) = (pooled_fdi(&c.ugcn.fdi), pooled_fdi(&c.all_zeros.fdi));
        println!("{}: accuracy {:.4} (all-zeros {:.4}), f1 {:.4}", c.case, u.accuracy, z.accuracy, u.f1);
        for m in &c.ugcn.fdi {
            println!("  omega {:.1}  accuracy {:.4}", m.omega, m.accuracy);
        }
    }
    Ok(())
}
