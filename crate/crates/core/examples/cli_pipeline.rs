//! Drives the command-line pipeline in-process on a tiny configuration:
//! gen-corpus, train, invert, invert-dvector, evaluate, sweep.
//!
//! Run with: cargo run --release --example cli_pipeline

const CONFIG: &str = r#"
[corpus]
n_speakers = 4
utterances_per_speaker = 6
utterance_seconds = 1.0
[model]
input_window_len = 800
n_filters = 8
sinc_kernel_len = 33
conv_channels = 8
hidden_dim = 32
dvector_dim = 16
num_classes = 4
[train]
epochs = 10
[attack]
inits = ["laplace", "zeros"]
output_len = 1600
stride = 200
window = 800
sweep_grid = [0.01, 0.1]
"#;

fn main() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, CONFIG).expect("config");
    let out = dir.path().join("run");
    let base = ["speaker-mi", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    for cmd in [
        &["gen-corpus"][..],
        &["train"],
        &["invert"],
        &["invert-dvector"],
        &["evaluate"],
        &["sweep", "--attack", "standard", "--init", "laplace"],
    ] {
        let args: Vec<&str> = base.iter().chain(cmd).copied().collect();
        let code = speaker_mi::cli::run_with_env(args, &[]);
        println!("{:<16} exit {code}", cmd.join(" "));
        if code != 0 {
            std::process::exit(code);
        }
    }
    for f in ["reports/results.csv", "reports/sweep.csv"] {
        println!("--- {f}");
        print!("{}", std::fs::read_to_string(out.join(f)).expect("report"));
    }
}
