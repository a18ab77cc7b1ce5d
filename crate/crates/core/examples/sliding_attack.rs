//! Inverts a sample longer than the model window by sliding overlapping
//! windows over it, and compares with independent windows.
//!
//! Run with: cargo run --release --example sliding_attack

mod common;

use speaker_mi::eval::{classify_sample, DEFAULT_EVAL_HOP};
use speaker_mi::init_zoo::InitSpec;
use speaker_mi::inversion::{invert_class, AttackConfig, AttackKind, MIConfig};

fn main() -> speaker_mi::Result<()> {
    let (model, _) = common::trained();
    let init = InitSpec::parse("gumbel", 11)?;
    for kind in [AttackKind::Standard, AttackKind::Sliding] {
        let attack = AttackConfig {
            kind,
            mi: MIConfig {
                lambda: 0.05,
                ..MIConfig::default()
            },
            output_len: 4 * common::WINDOW,
            stride: 200,
        };
        let mut hits = 0;
        for class in 0..common::SPEAKERS {
            let out = invert_class(&model, &attack, &init, class)?;
            let pred = classify_sample(&model, &out.samples, DEFAULT_EVAL_HOP)?;
            hits += usize::from(pred == class);
            if class == 0 {
                println!("{}: {} windows, {} iterations for speaker 0", kind.name(), out.windows.len(), out.total_iterations());
            }
        }
        println!("{}: {hits}/{} samples classified as their target", kind.name(), common::SPEAKERS);
    }
    Ok(())
}
