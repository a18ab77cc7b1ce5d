use speaker_mi::corpus::{synthesize_corpus, Corpus, GenerateParams, Split};
use speaker_mi::diffnet::{checkpoint, ArchConfig};
use speaker_mi::trainer::{accuracy, history_csv, train, TrainConfig};

fn setup() -> (ArchConfig, Corpus) {
    let params = GenerateParams {
        n_speakers: 4,
        utterances_per_speaker: 4,
        utterance_seconds: 1.0,
        chunk_len: 800,
        ..GenerateParams::default()
    };
    let arch = ArchConfig {
        input_window_len: 800,
        n_filters: 4,
        sinc_kernel_len: 33,
        conv_channels: 4,
        hidden_dim: 16,
        dvector_dim: 8,
        num_classes: 4,
        ..ArchConfig::default()
    };
    (arch, synthesize_corpus(&params).unwrap())
}

fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        stop_at_train_acc: 2.0,
        ..TrainConfig::default()
    }
}

#[test]
fn same_seed_same_model() {
    let (arch, corpus) = setup();
    let (a, ha) = train(&arch, &corpus, &cfg(2)).unwrap();
    let (b, hb) = train(&arch, &corpus, &cfg(2)).unwrap();
    assert_eq!(checkpoint::to_bytes(&a), checkpoint::to_bytes(&b));
    assert_eq!(ha, hb);
    let other = TrainConfig { seed: 2, ..cfg(2) };
    let (c, _) = train(&arch, &corpus, &other).unwrap();
    assert_ne!(checkpoint::to_bytes(&a), checkpoint::to_bytes(&c));
}

#[test]
fn history_has_one_row_per_epoch() {
    let (arch, corpus) = setup();
    let (model, history) = train(&arch, &corpus, &cfg(3)).unwrap();
    assert_eq!(history.len(), 3);
    assert_eq!(history_csv(&history).lines().count(), 4);
    for (i, h) in history.iter().enumerate() {
        assert_eq!(h.epoch, i + 1);
        assert!(h.loss.is_finite());
        assert!((0.0..=1.0).contains(&h.train_acc));
    }
    let test = accuracy(&model, &corpus, Split::Test).unwrap();
    assert_eq!(test, history[2].test_acc);
}

#[test]
fn early_stop_ends_after_the_first_qualifying_epoch() {
    let (arch, corpus) = setup();
    let stop = TrainConfig {
        epochs: 5,
        stop_at_train_acc: 0.0,
        ..TrainConfig::default()
    };
    let (_, history) = train(&arch, &corpus, &stop).unwrap();
    assert_eq!(history.len(), 1);
}

#[test]
fn rejects_bad_configs_and_mismatched_models() {
    let (arch, corpus) = setup();
    assert!(train(&arch, &corpus, &cfg(0)).unwrap_err().is_config());
    let zero_batch = TrainConfig { batch_size: 0, ..cfg(1) };
    assert!(train(&arch, &corpus, &zero_batch).unwrap_err().is_config());
    let wrong = ArchConfig { num_classes: 5, ..arch.clone() };
    assert!(train(&wrong, &corpus, &cfg(1)).unwrap_err().is_config());
}

#[test]
fn checkpoint_file_round_trip() {
    let (arch, corpus) = setup();
    let (model, _) = train(&arch, &corpus, &cfg(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.smi");
    checkpoint::save(&model, &path).unwrap();
    let back = checkpoint::load(&path).unwrap();
    assert!(back.params.bit_eq(&model.params));
    assert_eq!(back.arch(), model.arch());
}
