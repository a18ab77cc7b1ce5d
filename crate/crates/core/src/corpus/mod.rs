//! Deterministic synthetic multi-speaker corpus, its on-disk layout, and
//! chunk-level access for training and evaluation.
//!
//! Layout on disk: `<root>/manifest.json` plus
//! `<root>/<speaker_id>/utt_####.wav` (16-bit PCM mono). External corpora are
//! ingested by providing the same layout.

mod synth;
pub mod wav;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffnet::AudioChunk;
use crate::error::{config_err, invalid, Error, Result};
use crate::rng::{self, derive_seed};

pub use synth::synth_utterance;
pub use wav::{load_wav, save_wav};

/// Fundamental below this is labelled male.
pub const GENDER_THRESHOLD_HZ: f64 = 165.0;
/// Minimum spacing between any two speakers' fundamentals.
pub const MIN_F0_SPACING_HZ: f64 = 3.0;
const MALE_F0_RANGE: (f64, f64) = (85.0, 160.0);
const FEMALE_F0_RANGE: (f64, f64) = (170.0, 290.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn from_fundamental(hz: f64) -> Self {
        if hz < GENDER_THRESHOLD_HZ {
            Gender::Male
        } else {
            Gender::Female
        }
    }

    pub fn as_label(self) -> f64 {
        match self {
            Gender::Male => 0.0,
            Gender::Female => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeakerProfile {
    pub speaker_id: String,
    pub fundamental_hz: f64,
    pub formant_centers_hz: [f64; 3],
    pub vibrato_rate_hz: f64,
    pub gender_label: Gender,
    pub seed: u64,
}

impl SpeakerProfile {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyq = sample_rate as f64 / 2.0;
        if !(80.0..=300.0).contains(&self.fundamental_hz) {
            return Err(invalid!(
                "speaker {}: fundamental {} Hz outside [80, 300]",
                self.speaker_id,
                self.fundamental_hz
            ));
        }
        let f = &self.formant_centers_hz;
        if !(f[0] < f[1] && f[1] < f[2] && f[2] < nyq) {
            return Err(invalid!(
                "speaker {}: formants {:?} must ascend below {nyq} Hz",
                self.speaker_id,
                f
            ));
        }
        if self.gender_label != Gender::from_fundamental(self.fundamental_hz) {
            return Err(invalid!(
                "speaker {}: gender label disagrees with fundamental",
                self.speaker_id
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceEntry {
    /// Relative to the corpus root.
    pub path: PathBuf,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub sample_rate: u32,
    pub chunk_len: usize,
    pub speakers: Vec<SpeakerProfile>,
    pub utterances: BTreeMap<String, Vec<UtteranceEntry>>,
    pub seed: u64,
}

impl CorpusManifest {
    pub fn validate(&self) -> Result<()> {
        if self.speakers.is_empty() {
            return Err(invalid!("manifest lists no speakers"));
        }
        if self.chunk_len == 0 {
            return Err(invalid!("chunk_len must be positive"));
        }
        for s in &self.speakers {
            s.validate(self.sample_rate)?;
            let utts = self
                .utterances
                .get(&s.speaker_id)
                .ok_or_else(|| invalid!("speaker {} has no utterances", s.speaker_id))?;
            for split in [Split::Train, Split::Test] {
                if !utts.iter().any(|u| u.split == split) {
                    return Err(invalid!("speaker {} has no {split} utterance", s.speaker_id));
                }
            }
        }
        if self.utterances.len() != self.speakers.len() {
            return Err(invalid!("utterance index names speakers missing from the profile list"));
        }
        Ok(())
    }

    pub fn class_of(&self, speaker_id: &str) -> Option<usize> {
        self.speakers.iter().position(|s| s.speaker_id == speaker_id)
    }

    pub fn genders(&self) -> Vec<Gender> {
        self.speakers.iter().map(|s| s.gender_label).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: CorpusManifest = serde_json::from_str(&text).map_err(|e| Error::Format {
            offset: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        m.validate()?;
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateParams {
    pub seed: u64,
    pub n_speakers: usize,
    pub utterances_per_speaker: usize,
    pub utterance_seconds: f64,
    pub sample_rate: u32,
    pub chunk_len: usize,
    /// Equal male/female counts (odd counts favour female by one).
    pub balanced: bool,
    pub test_fraction: f64,
}

impl Default for GenerateParams {
    fn default() -> Self {
        Self {
            seed: 7,
            n_speakers: 20,
            utterances_per_speaker: 20,
            utterance_seconds: 3.0,
            sample_rate: 16000,
            chunk_len: 3200,
            balanced: true,
            test_fraction: 0.25,
        }
    }
}

fn place_fundamentals(count: usize, range: (f64, f64), r: &mut rng::Rng) -> Result<Vec<f64>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let width = (range.1 - range.0) / count as f64;
    if width < MIN_F0_SPACING_HZ {
        return Err(config_err!(
            "cannot place {count} fundamentals in [{}, {}] Hz with {MIN_F0_SPACING_HZ} Hz spacing",
            range.0,
            range.1
        ));
    }
    // One jittered slot per speaker; jitter never closes the gap below the
    // minimum spacing.
    let slack = width - MIN_F0_SPACING_HZ;
    Ok((0..count)
        .map(|i| range.0 + (i as f64 + 0.5) * width + (r.gen::<f64>() - 0.5) * slack)
        .collect())
}

/// Draws the speaker profiles for a corpus.
pub fn make_profiles(params: &GenerateParams) -> Result<Vec<SpeakerProfile>> {
    let mut r = rng::rng(derive_seed(params.seed, 0x5eed));
    let n_male = if params.balanced {
        params.n_speakers / 2
    } else {
        (0..params.n_speakers).filter(|_| r.gen::<bool>()).count()
    };
    let n_female = params.n_speakers - n_male;
    let mut f0s = place_fundamentals(n_male, MALE_F0_RANGE, &mut r)?;
    f0s.extend(place_fundamentals(n_female, FEMALE_F0_RANGE, &mut r)?);
    // Interleave genders across speaker ids.
    let order: Vec<usize> = {
        let mut idx: Vec<usize> = (0..f0s.len()).collect();
        idx.sort_by_key(|&i| derive_seed(params.seed, i as u64 + 1000));
        idx
    };
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(k, i)| {
            let f0 = f0s[i];
            let f1 = 300.0 + 550.0 * r.gen::<f64>();
            let f2 = 900.0 + 1500.0 * r.gen::<f64>();
            let f3 = 2500.0 + 900.0 * r.gen::<f64>();
            SpeakerProfile {
                speaker_id: format!("spk_{k:03}"),
                fundamental_hz: f0,
                formant_centers_hz: [f1, f2, f3],
                vibrato_rate_hz: 4.5 + r.gen::<f64>(),
                gender_label: Gender::from_fundamental(f0),
                seed: derive_seed(params.seed, k as u64),
            }
        })
        .collect())
}

impl GenerateParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_speakers < 2 {
            return Err(config_err!("need at least 2 speakers, got {}", self.n_speakers));
        }
        if self.utterances_per_speaker < 2 {
            return Err(config_err!("need at least 2 utterances per speaker (one train, one test)"));
        }
        if !(self.utterance_seconds >= 1.0) {
            return Err(config_err!("utterance_seconds must be >= 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(config_err!("test_fraction must lie in (0, 1)"));
        }
        if self.chunk_len == 0 || self.chunk_len as f64 > self.utterance_seconds * self.sample_rate as f64 {
            return Err(config_err!("chunk_len must be positive and fit in one utterance"));
        }
        if self.sample_rate < 8000 {
            return Err(config_err!("sample_rate must be at least 8000 Hz"));
        }
        Ok(())
    }

    fn n_test(&self) -> usize {
        let n = self.utterances_per_speaker;
        ((n as f64 * self.test_fraction).round() as usize).clamp(1, n - 1)
    }
}

/// In-memory corpus: manifest plus decoded waveforms, indexed like the
/// manifest's utterance lists.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub manifest: CorpusManifest,
    waveforms: BTreeMap<String, Vec<Vec<f64>>>,
}

/// Synthesizes the corpus in memory. Pure function of `params`.
pub fn synthesize_corpus(params: &GenerateParams) -> Result<Corpus> {
    params.validate()?;
    let profiles = make_profiles(params)?;
    let n_test = params.n_test();
    let mut utterances = BTreeMap::new();
    let mut waveforms = BTreeMap::new();
    for p in &profiles {
        let waves: Vec<Vec<f64>> = (0..params.utterances_per_speaker)
            .into_par_iter()
            .map(|u| synth_utterance(p, u as u64, params.utterance_seconds, params.sample_rate))
            .collect();
        let entries = (0..params.utterances_per_speaker)
            .map(|u| UtteranceEntry {
                path: PathBuf::from(&p.speaker_id).join(format!("utt_{u:04}.wav")),
                split: if u >= params.utterances_per_speaker - n_test {
                    Split::Test
                } else {
                    Split::Train
                },
            })
            .collect();
        utterances.insert(p.speaker_id.clone(), entries);
        waveforms.insert(p.speaker_id.clone(), waves);
    }
    let manifest = CorpusManifest {
        sample_rate: params.sample_rate,
        chunk_len: params.chunk_len,
        speakers: profiles,
        utterances,
        seed: params.seed,
    };
    manifest.validate()?;
    Ok(Corpus {
        manifest,
        waveforms,
    })
}

/// Synthesizes a corpus and writes it under `root`. The written waveforms
/// are quantized to 16 bits, so the returned corpus holds the dequantized
/// samples exactly as [`Corpus::load`] would read them back.
pub fn generate_corpus(root: &Path, params: &GenerateParams) -> Result<Corpus> {
    let mut corpus = synthesize_corpus(params)?;
    corpus.save(root)?;
    for waves in corpus.waveforms.values_mut() {
        for w in waves.iter_mut() {
            let (bytes, _) = wav::encode_wav(w, params.sample_rate);
            *w = wav::decode_wav(&bytes)?.0;
        }
    }
    Ok(corpus)
}

impl Corpus {
    /// Builds a corpus from in-memory waveforms (one list per speaker, same
    /// order as the manifest's utterance entries).
    pub fn from_parts(manifest: CorpusManifest, waveforms: BTreeMap<String, Vec<Vec<f64>>>) -> Result<Self> {
        manifest.validate()?;
        for s in &manifest.speakers {
            let n = manifest.utterances[&s.speaker_id].len();
            if waveforms.get(&s.speaker_id).map(Vec::len) != Some(n) {
                return Err(invalid!("speaker {} needs {n} waveforms", s.speaker_id));
            }
        }
        Ok(Self {
            manifest,
            waveforms,
        })
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        for (spk, entries) in &self.manifest.utterances {
            let dir = root.join(spk);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for (entry, wave) in entries.iter().zip(&self.waveforms[spk]) {
                save_wav(&root.join(&entry.path), wave, self.manifest.sample_rate)?;
            }
        }
        let path = root.join("manifest.json");
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    /// Loads `<root>/manifest.json` and every referenced WAV.
    pub fn load(root: &Path) -> Result<Self> {
        let manifest = CorpusManifest::load(&root.join("manifest.json"))?;
        let mut waveforms = BTreeMap::new();
        for (spk, entries) in &manifest.utterances {
            let mut waves = Vec::with_capacity(entries.len());
            for e in entries {
                let path = root.join(&e.path);
                let (w, sr) = load_wav(&path)?;
                if sr != manifest.sample_rate {
                    return Err(invalid!(
                        "{} has sample rate {sr}, manifest says {}",
                        path.display(),
                        manifest.sample_rate
                    ));
                }
                waves.push(w);
            }
            waveforms.insert(spk.clone(), waves);
        }
        Self::from_parts(manifest, waveforms)
    }

    pub fn num_speakers(&self) -> usize {
        self.manifest.speakers.len()
    }

    pub fn sample_rate(&self) -> u32 {
        self.manifest.sample_rate
    }

    pub fn waveforms(&self, speaker_id: &str, split: Split) -> Result<Vec<&[f64]>> {
        let entries = self
            .manifest
            .utterances
            .get(speaker_id)
            .ok_or_else(|| invalid!("unknown speaker {speaker_id}"))?;
        Ok(entries
            .iter()
            .zip(&self.waveforms[speaker_id])
            .filter(|(e, _)| e.split == split)
            .map(|(_, w)| w.as_slice())
            .collect())
    }

    /// Non-overlapping chunks of one speaker in one split.
    pub fn speaker_chunks(&self, speaker_id: &str, split: Split) -> Result<Vec<&[f64]>> {
        let len = self.manifest.chunk_len;
        Ok(self
            .waveforms(speaker_id, split)?
            .into_iter()
            .flat_map(|w| chunk_offsets(w.len(), len, len).map(move |o| &w[o..o + len]))
            .collect())
    }

    /// All labelled chunks of a split, ordered by class then utterance.
    pub fn labelled_chunks(&self, split: Split) -> Vec<(&[f64], usize)> {
        let mut out = Vec::new();
        for (class, s) in self.manifest.speakers.iter().enumerate() {
            let chunks = self
                .speaker_chunks(&s.speaker_id, split)
                .expect("manifest speakers are indexed");
            out.extend(chunks.into_iter().map(|c| (c, class)));
        }
        out
    }
}

/// Start offsets of full windows: `0, hop, 2*hop, ...`.
pub fn chunk_offsets(len: usize, chunk_len: usize, hop: usize) -> impl Iterator<Item = usize> {
    let count = if chunk_len == 0 || hop == 0 || len < chunk_len {
        0
    } else {
        (len - chunk_len) / hop + 1
    };
    (0..count).map(move |i| i * hop)
}

/// Cuts a waveform into windows of `chunk_len` every `hop` samples, dropping
/// a trailing partial window. A waveform shorter than one chunk yields none.
pub fn chunk_waveform(waveform: &[f64], chunk_len: usize, hop: usize, sample_rate: u32) -> Result<Vec<AudioChunk>> {
    if chunk_len == 0 || hop == 0 {
        return Err(invalid!("chunk_len and hop must be positive"));
    }
    chunk_offsets(waveform.len(), chunk_len, hop)
        .map(|o| AudioChunk::new(waveform[o..o + chunk_len].to_vec(), sample_rate))
        .collect()
}

/// Element-wise mean of every chunk of a speaker in a split.
pub fn average_speaker_chunks(corpus: &Corpus, speaker_id: &str, split: Split) -> Result<AudioChunk> {
    let chunks = corpus.speaker_chunks(speaker_id, split)?;
    if chunks.is_empty() {
        return Err(invalid!("speaker {speaker_id} has no chunks in the {split} split"));
    }
    let mut mean = vec![0.0; corpus.manifest.chunk_len];
    for c in &chunks {
        crate::diffnet::ops::axpy(1.0, c, &mut mean);
    }
    let n = chunks.len() as f64;
    mean.iter_mut().for_each(|v| *v /= n);
    AudioChunk::new(mean, corpus.sample_rate())
}
