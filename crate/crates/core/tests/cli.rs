use std::path::{Path, PathBuf};
use std::process::Command;

use speaker_mi::cli::run_with_env;

const TINY: &str = r#"
[corpus]
n_speakers = 4
utterances_per_speaker = 4
utterance_seconds = 1.0
[model]
input_window_len = 800
n_filters = 4
sinc_kernel_len = 33
conv_channels = 4
hidden_dim = 16
dvector_dim = 8
num_classes = 4
[train]
epochs = 3
stop_at_train_acc = 2.0
[attack]
kinds = ["standard", "sliding", "dvector"]
inits = ["laplace", "zeros"]
alpha = 15
output_len = 1600
stride = 400
window = 800
sweep_grid = [0.01, 0.1]
"#;

fn tiny(dir: &Path) -> PathBuf {
    let p = dir.join("tiny.toml");
    std::fs::write(&p, TINY).unwrap();
    p
}

fn cli(args: &[&str]) -> i32 {
    let mut v = vec!["speaker-mi"];
    v.extend_from_slice(args);
    run_with_env(v, &[])
}

fn bin(args: &[&str], env: &[(&str, &str)]) -> (i32, String, String) {
    let mut c = Command::new(env!("CARGO_BIN_EXE_speaker-mi"));
    c.args(args);
    for (k, v) in env {
        c.env(k, v);
    }
    let out = c.output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn pipeline(cfg: &Path, out: &Path) {
    let base = ["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    for cmd in [&["gen-corpus"][..], &["train"], &["invert"], &["invert-dvector"], &["evaluate"]] {
        let mut args = base.to_vec();
        args.extend_from_slice(cmd);
        assert_eq!(cli(&args), 0, "{cmd:?}");
    }
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().skip(1).filter(|l| !l.starts_with('#') && !l.is_empty()).collect()
}

#[test]
fn full_pipeline_outputs_and_reproduction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let a = dir.path().join("a");
    pipeline(&cfg, &a);

    let history = std::fs::read_to_string(a.join("checkpoint/history.csv")).unwrap();
    assert_eq!(data_lines(&history).len(), 3);

    for kind in ["standard", "sliding"] {
        for init in ["laplace", "zeros"] {
            let d = a.join("inverted").join(kind).join(init);
            for s in 0..4 {
                assert!(d.join(format!("spk_{s:03}.wav")).exists());
            }
        }
    }
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("inverted/sliding/laplace/spk_002.json")).unwrap()).unwrap();
    assert_eq!(meta["stride"], 400);
    assert_eq!(meta["window"], 800);
    assert_eq!(meta["attack"], "sliding");
    assert_eq!(meta["class"], 2);

    let results = std::fs::read_to_string(a.join("reports/results.csv")).unwrap();
    let rows = data_lines(&results);
    // two inits times standard, sliding and the d-vector rows
    assert_eq!(rows.len(), 2 * 3);
    for r in &rows {
        if r.contains(",dvector,") {
            assert!(r.contains(",0.100000000,"), "{r}");
        }
    }
    assert!(results.contains("# averaged_sample_train_accuracy,"));
    assert!(results.contains("# within_speaker_distance,"));

    // rerun from the lock file elsewhere
    let b = dir.path().join("b");
    pipeline(&a.join("run.lock"), &b);
    for rel in [
        "inverted/standard/laplace/spk_000.wav",
        "inverted/sliding/zeros/spk_003.wav",
        "checkpoint/history.csv",
        "reports/results.csv",
        "reports/pca_scatter.csv",
    ] {
        assert_eq!(std::fs::read(a.join(rel)).unwrap(), std::fs::read(b.join(rel)).unwrap(), "{rel}");
    }

    // report re-renders identically from the stored evaluation
    let before = std::fs::read(a.join("reports/results.csv")).unwrap();
    assert_eq!(cli(&["--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "report"]), 0);
    assert_eq!(std::fs::read(a.join("reports/results.csv")).unwrap(), before);

    // sweep marks one best lambda per (init, attack)
    assert_eq!(
        cli(&["--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "sweep", "--attack", "standard"]),
        0
    );
    let sweep = std::fs::read_to_string(a.join("reports/sweep.csv")).unwrap();
    let lines = data_lines(&sweep);
    assert_eq!(lines.len(), 2 * 2);
    for init in ["laplace", "zeros"] {
        let best: Vec<_> = lines.iter().filter(|l| l.starts_with(&format!("{init},")) && l.ends_with(",1")).collect();
        assert_eq!(best.len(), 1, "{sweep}");
    }
}

#[test]
fn gen_corpus_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    for name in ["x", "y"] {
        let out = dir.path().join(name);
        assert_eq!(cli(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "gen-corpus"]), 0);
    }
    let read = |n: &str| std::fs::read(dir.path().join(n).join("corpus/manifest.json")).unwrap();
    assert_eq!(read("x"), read("y"));
    let wav = |n: &str| std::fs::read(dir.path().join(n).join("corpus/spk_001/utt_0002.wav")).unwrap();
    assert_eq!(wav("x"), wav("y"));
}

#[test]
fn too_many_speakers_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = bin(&["--out", dir.path().to_str().unwrap(), "gen-corpus", "--speakers", "1000"], &[]);
    assert_eq!(code, 2);
    assert!(err.contains("spacing"), "{err}");
}

#[test]
fn zero_epochs_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = bin(&["--out", dir.path().to_str().unwrap(), "train", "--epochs", "0"], &[]);
    assert_eq!(code, 2);
}

#[test]
fn unknown_init_lists_valid_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = bin(&["--out", dir.path().to_str().unwrap(), "invert", "--init", "purple"], &[]);
    assert_eq!(code, 2);
    assert!(err.contains("laplace") && err.contains("gumbel") && err.contains("zeros"), "{err}");
}

#[test]
fn print_config_shows_defaults_and_overrides() {
    let (code, out, _) = bin(&["--print-config"], &[]);
    assert_eq!(code, 0);
    let cfg: toml::Value = toml::from_str(&out).unwrap();
    assert_eq!(cfg["attack"]["stride"].as_integer(), Some(500));
    assert_eq!(cfg["attack"]["window"].as_integer(), Some(3200));
    assert_eq!(cfg["corpus"]["n_speakers"].as_integer(), Some(20));

    let (_, out, _) = bin(&["--print-config", "--set", "train.epochs=7"], &[("SMI_ATTACK__ALPHA", "55")]);
    let cfg: toml::Value = toml::from_str(&out).unwrap();
    assert_eq!(cfg["train"]["epochs"].as_integer(), Some(7));
    assert_eq!(cfg["attack"]["alpha"].as_integer(), Some(55));

    // flags win over the environment
    let (_, out, _) = bin(&["--print-config", "--set", "attack.alpha=9"], &[("SMI_ATTACK__ALPHA", "55")]);
    let cfg: toml::Value = toml::from_str(&out).unwrap();
    assert_eq!(cfg["attack"]["alpha"].as_integer(), Some(9));
}

#[test]
fn missing_command_and_bad_flags() {
    assert_eq!(cli(&[]), 2);
    assert_eq!(cli(&["--set", "nonsense"]), 2);
    assert_eq!(cli(&["--set", "attack.nope=1", "--print-config"]), 2);
}
