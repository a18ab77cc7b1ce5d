//! Trains the speaker recognizer on a small corpus and saves a checkpoint.
//!
//! Run with: cargo run --release --example train_speaker_model

mod common;

use speaker_mi::corpus::{synthesize_corpus, Split};
use speaker_mi::diffnet::checkpoint;
use speaker_mi::trainer::{accuracy, history_csv, train_from, TrainConfig};

fn main() -> speaker_mi::Result<()> {
    let corpus = synthesize_corpus(&common::corpus_params())?;
    let model = speaker_mi::diffnet::SpeakerModel::new(common::small_arch(), 1)?;
    let cfg = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let (model, history) = train_from(model, &corpus, &cfg, |e| {
        println!("epoch {:2}  loss {:.4}  train {:.3}  test {:.3}", e.epoch, e.loss, e.train_acc, e.test_acc);
    })?;
    print!("{}", history_csv(&history));

    for band in model.bands().iter().take(4) {
        println!("sinc band {:7.1} .. {:7.1} Hz", band.low_hz, band.high_hz);
    }

    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("model.smi");
    checkpoint::save(&model, &path)?;
    let back = checkpoint::load(&path)?;
    println!(
        "checkpoint reloads with test accuracy {:.3}",
        accuracy(&back, &corpus, Split::Test)?
    );
    Ok(())
}
