//! Scores a batch of inversions the way the report does: accuracy,
//! d-vector distances, baselines, then writes the CSV report.
//!
//! Run with: cargo run --release --example evaluate_inversions

mod common;

use speaker_mi::corpus::Split;
use speaker_mi::eval::{
    averaged_sample_baseline, evaluate_batch, render_report, within_speaker_baseline, Baselines, SpeakerDvectors,
    DEFAULT_EVAL_HOP,
};
use speaker_mi::init_zoo::InitSpec;
use speaker_mi::inversion::{invert_all_speakers, AttackConfig, AttackKind, MIConfig};

fn main() -> speaker_mi::Result<()> {
    let (model, corpus) = common::trained();
    let refs = SpeakerDvectors::compute(&model, &corpus, Split::Train)?;
    let mut rows = Vec::new();
    for (kind, lambda) in [(AttackKind::Standard, 0.05), (AttackKind::Sliding, 0.05), (AttackKind::Dvector, 0.1)] {
        let attack = AttackConfig {
            kind,
            mi: MIConfig {
                lambda,
                ..MIConfig::default()
            },
            output_len: 2 * common::WINDOW,
            stride: 200,
        };
        let init = InitSpec::parse("laplace", 11)?;
        let batch = invert_all_speakers(&model, &attack, &init)?;
        rows.push(evaluate_batch(&model, &batch, kind, "laplace", lambda, &refs, DEFAULT_EVAL_HOP)?);
    }
    let (train, test) = averaged_sample_baseline(&model, &corpus)?;
    let baselines = Baselines {
        averaged_sample_train_accuracy: train,
        averaged_sample_test_accuracy: test,
        within_speaker_distance: within_speaker_baseline(&refs)?,
    };
    let dir = tempfile::tempdir().expect("tempdir");
    let files = render_report(dir.path(), &rows, &baselines, &serde_json::json!({"example": true}), None)?;
    print!("{}", std::fs::read_to_string(&files.csv).expect("report"));
    Ok(())
}
