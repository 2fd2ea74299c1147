//! Train for a few epochs, save the full training state in a checkpoint,
//! resume from the file and check that the result matches an
//! uninterrupted run bit for bit.
//!
//! `cargo run --release --example checkpoint_resume`

use ugcn::model::{decode_checkpoint, encode_checkpoint, Checkpoint, LayerConfig, UgcnParams};
use ugcn::pipeline::{generate_family, FamilyConfig};
use ugcn::scenario::ScenarioConfig;
use ugcn::train::{initial_state, train_from, TrainConfig, TrainState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let family = FamilyConfig {
        q: 6,
        scenario: ScenarioConfig {
            t_total: 96,
            ..ScenarioConfig::default()
        },
        ..FamilyConfig::default()
    };
    let sets = generate_family(&family, 2, 1)?;
    let layer = LayerConfig {
        k_t: 1,
        widths: vec![10, 8, 8],
        d: 32,
        ..LayerConfig::forecast()
    };
    let cfg = |epochs| TrainConfig {
        epochs,
        patience: 0,
        seed: 2,
        ..TrainConfig::default()
    };
    let fresh = || initial_state(UgcnParams::init(&layer, 2), &layer, &sets, &cfg(8));

    let full = train_from(fresh()?, &layer, &sets, &cfg(8), 1, |_| {})?;

    let half = train_from(fresh()?, &layer, &sets, &cfg(4), 1, |_| {})?;
    let mut ck = Checkpoint::new(layer.clone(), half.best_params.clone());
    ck.extra.push(("train_state".into(), serde_json::to_vec(&half)?));
    let bytes = encode_checkpoint(&ck);
    println!("checkpoint after {} epochs: {} bytes", half.epoch, bytes.len());

    let loaded = decode_checkpoint(&bytes)?;
    let state: TrainState = serde_json::from_slice(loaded.extra("train_state").unwrap())?;
    let resumed = train_from(state, &loaded.config, &sets, &cfg(8), 1, |_| {})?;

    print!("{}", resumed.history_csv());
    println!(
        "uninterrupted {:08x}, resumed {:08x}, identical: {}",
        full.params.checksum(),
        resumed.params.checksum(),
        full.params.to_flat() == resumed.params.to_flat()
    );
    Ok(())
}
