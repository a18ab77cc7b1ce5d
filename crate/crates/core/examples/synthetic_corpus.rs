//! Generates a small synthetic speaker corpus on disk and reads it back.
//!
//! Run with: cargo run --release --example synthetic_corpus

mod common;

use speaker_mi::corpus::{generate_corpus, Corpus, Split};

fn main() -> speaker_mi::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let corpus = generate_corpus(dir.path(), &common::corpus_params())?;
    for s in &corpus.manifest.speakers {
        println!(
            "{}  f0 {:6.1} Hz  formants {:?}  {:?}",
            s.speaker_id,
            s.fundamental_hz,
            s.formant_centers_hz.map(|f| f.round()),
            s.gender_label
        );
    }
    let again = Corpus::load(dir.path())?;
    let train = again.labelled_chunks(Split::Train).len();
    let test = again.labelled_chunks(Split::Test).len();
    println!("{train} train chunks, {test} test chunks of {} samples", again.manifest.chunk_len);
    Ok(())
}
