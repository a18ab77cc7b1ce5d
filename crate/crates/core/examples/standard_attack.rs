//! Inverts one speaker with plain gradient descent on the input window and
//! shows how the run stopped.
//!
//! Run with: cargo run --release --example standard_attack

mod common;

use speaker_mi::init_zoo::{generate, InitSpec};
use speaker_mi::inversion::{standard_mi, FullModelCost, MIConfig};

fn main() -> speaker_mi::Result<()> {
    let (model, _) = common::trained();
    let target = 3;
    let x0 = generate(&InitSpec::parse("laplace", 11)?, model.input_window_len())?;
    let cfg = MIConfig {
        lambda: 0.05,
        ..MIConfig::default()
    };
    let r = standard_mi(&FullModelCost::new(&model, target)?, &x0, &cfg)?;
    println!(
        "stopped by {:?} after {} iterations; best cost {:.4}",
        r.stop_reason, r.iterations_run, r.best_cost
    );
    for (i, c) in r.costs.iter().enumerate().step_by((r.costs.len() / 10).max(1)) {
        println!("  iteration {i:4}  cost {c:.4}");
    }
    let p = model.probabilities(&r.best_input)?;
    println!("model now assigns p = {:.3} to speaker {target}", p[target]);
    Ok(())
}
