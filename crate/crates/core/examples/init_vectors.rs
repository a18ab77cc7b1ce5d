//! Prints summary statistics for every built-in starting vector.
//!
//! Run with: cargo run --release --example init_vectors

use speaker_mi::init_zoo::{generate, InitSpec, VALID_NAMES};

fn main() -> speaker_mi::Result<()> {
    for name in VALID_NAMES.iter().filter(|n| !n.starts_with("external")) {
        let x = generate(&InitSpec::parse(name, 3)?, 3200)?;
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let (lo, hi) = x.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        // lag-1 autocorrelation separates the noise colours
        let ac = if std > 0.0 {
            x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1.0) / (std * std)
        } else {
            0.0
        };
        println!("{name:>12}  mean {mean:+.4}  std {std:.4}  range [{lo:+.3}, {hi:+.3}]  lag-1 corr {ac:+.3}");
    }
    println!("external kinds read a corpus: external:<dir>, external-mean<N>:<dir>, external-mix:<dir>");
    Ok(())
}
