//! Fits PCA on real test d-vectors, projects inverted d-vectors into the
//! same plane and checks whether a linear probe recovers speaker gender.
//!
//! Run with: cargo run --release --example gender_leakage

mod common;

use speaker_mi::corpus::Split;
use speaker_mi::eval::{gender_probe, pca_fit, scatter_points, SpeakerDvectors};
use speaker_mi::inversion::{dvector_mi, MIConfig};

fn main() -> speaker_mi::Result<()> {
    let (model, corpus) = common::trained();
    let originals = SpeakerDvectors::compute(&model, &corpus, Split::Test)?.labelled();
    let genders = corpus.manifest.genders();
    let cfg = MIConfig {
        lambda: 0.1,
        ..MIConfig::default()
    };
    let zeros = vec![0.0; model.dvector_dim()];
    let mut inverted = Vec::new();
    for (target, g) in genders.iter().enumerate() {
        inverted.push((dvector_mi(&model, &zeros, target, &cfg)?.best_input, *g));
    }

    let data: Vec<Vec<f64>> = originals.iter().map(|(d, _)| d.clone()).collect();
    let pca = pca_fit(&data, 2)?;
    println!("explained variance {:?}", pca.explained_variance);
    for p in scatter_points(&pca, &[], &inverted)? {
        println!("{:>11}  ({:+.3}, {:+.3})", p.cohort.as_str(), p.x, p.y);
    }
    println!("gender probe accuracy on inverted d-vectors: {:.2}", gender_probe(&originals, &inverted)?);
    Ok(())
}
