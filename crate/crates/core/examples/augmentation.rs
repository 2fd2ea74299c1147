//! Generate reconfigured variants of the 33-bus feeder and the 30-bus
//! transmission system and show what the operations did.
//!
//! `cargo run --example augmentation -- [count] [seed]`

use std::collections::BTreeMap;
use ugcn::caseio::bundled_graph;
use ugcn::reconfig::{augment, transmission_augment, AugmentConfig, ReconfigOp};

fn label(op: &ReconfigOp) -> &'static str {
    match op {
        ReconfigOp::FeederDisconnect { .. } => "feeder_disconnect",
        ReconfigOp::NewFeeder { .. } => "new_feeder",
        ReconfigOp::ParamChange { .. } => "param_change",
        ReconfigOp::LineBreak { .. } => "line_break",
        ReconfigOp::SubtreeMerge { .. } => "subtree_merge",
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let count = args.first().copied().unwrap_or(200) as usize;
    let seed = args.get(1).copied().unwrap_or(1);

    let feeder = bundled_graph("ieee33")?;
    let variants = augment(&feeder, &AugmentConfig { q_count: count, seed, ..AugmentConfig::default() })?;
    let mut sizes = BTreeMap::new();
    let mut ops = BTreeMap::new();
    for v in &variants {
        assert!(v.graph.is_rooted_tree());
        *sizes.entry(v.graph.n()).or_insert(0) += 1;
        for op in &v.ops {
            *ops.entry(label(op)).or_insert(0) += 1;
        }
    }
    println!("{count} feeder variants, bus counts:");
    for (n, c) in &sizes {
        println!("  {n:3} {}", "#".repeat(*c));
    }
    println!("operations: {ops:?}");
    println!("first op log: {}", serde_json::to_string(&variants[0].ops)?);

    let grid = bundled_graph("ieee30")?;
    let meshed = transmission_augment(&grid, &AugmentConfig::transmission(count, grid.n(), seed))?;
    let lines: Vec<usize> = meshed.iter().map(|v| v.graph.in_service().count()).collect();
    println!(
        "{count} transmission variants, all connected: {}, in-service lines {}..{}",
        meshed.iter().all(|v| v.graph.is_connected()),
        lines.iter().min().unwrap(),
        lines.iter().max().unwrap()
    );
    Ok(())
}
