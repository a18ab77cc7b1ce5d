//! Runs the standard attack from one init over a grid of learning rates and
//! reports the best.
//!
//! Run with: cargo run --release --example lambda_sweep

mod common;

use speaker_mi::corpus::Split;
use speaker_mi::eval::{csv_row, sweep_learning_rates, SpeakerDvectors, CSV_HEADER, DEFAULT_EVAL_HOP};
use speaker_mi::init_zoo::InitSpec;
use speaker_mi::inversion::{AttackConfig, AttackKind};

fn main() -> speaker_mi::Result<()> {
    let (model, corpus) = common::trained();
    let refs = SpeakerDvectors::compute(&model, &corpus, Split::Train)?;
    let attack = AttackConfig {
        kind: AttackKind::Standard,
        output_len: 2 * common::WINDOW,
        ..AttackConfig::default()
    };
    let grid = [1e-4, 1e-3, 0.01, 0.1, 0.5];
    let sweep = sweep_learning_rates(&model, &attack, &InitSpec::parse("white", 11)?, &grid, &refs, DEFAULT_EVAL_HOP)?;
    println!("{CSV_HEADER}");
    for r in &sweep.rows {
        println!("{}", csv_row(r));
    }
    println!("best learning rate {}", sweep.best_row().learning_rate);
    Ok(())
}
