//! Small corpus and model shared by the examples, so each one runs in
//! seconds.

#![allow(dead_code)]

use speaker_mi::corpus::{synthesize_corpus, Corpus, GenerateParams};
use speaker_mi::diffnet::{ArchConfig, SpeakerModel};
use speaker_mi::trainer::{train, TrainConfig};

pub const SPEAKERS: usize = 6;
pub const WINDOW: usize = 800;

pub fn corpus_params() -> GenerateParams {
    GenerateParams {
        n_speakers: SPEAKERS,
        utterances_per_speaker: 8,
        utterance_seconds: 1.0,
        chunk_len: WINDOW,
        ..GenerateParams::default()
    }
}

pub fn small_arch() -> ArchConfig {
    ArchConfig {
        input_window_len: WINDOW,
        n_filters: 8,
        sinc_kernel_len: 65,
        conv_channels: 8,
        hidden_dim: 64,
        dvector_dim: 32,
        num_classes: SPEAKERS,
        ..ArchConfig::default()
    }
}

pub fn trained() -> (SpeakerModel, Corpus) {
    let corpus = synthesize_corpus(&corpus_params()).expect("corpus");
    let cfg = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let (model, history) = train(&small_arch(), &corpus, &cfg).expect("training");
    let last = history.last().unwrap();
    println!(
        "trained {} epochs: train acc {:.3}, test acc {:.3}",
        history.len(),
        last.train_acc,
        last.test_acc
    );
    (model, corpus)
}
