//! Inverts only the classifier head, recovering a d-vector per speaker, and
//! measures how far it lands from that speaker's real d-vectors.
//!
//! Run with: cargo run --release --example dvector_attack

mod common;

use speaker_mi::corpus::Split;
use speaker_mi::diffnet::ops;
use speaker_mi::eval::{dvector_distance, within_speaker_baseline, SpeakerDvectors};
use speaker_mi::inversion::{dvector_mi, MIConfig};

fn main() -> speaker_mi::Result<()> {
    let (model, corpus) = common::trained();
    let refs = SpeakerDvectors::compute(&model, &corpus, Split::Train)?;
    let cfg = MIConfig {
        lambda: 0.1,
        ..MIConfig::default()
    };
    let zeros = vec![0.0; model.dvector_dim()];
    for target in 0..model.num_classes() {
        let r = dvector_mi(&model, &zeros, target, &cfg)?;
        let pred = ops::argmax(&model.head_probabilities(&r.best_input)?);
        let (mean, std) = dvector_distance(&r.best_input, &refs, target)?;
        println!(
            "speaker {target}: predicted {pred}, cost {:.4} in {:3} steps, distance {mean:.3} +- {std:.3}",
            r.best_cost, r.iterations_run
        );
    }
    println!("within-speaker baseline {:.3}", within_speaker_baseline(&refs)?);
    Ok(())
}
