//! Starting vectors for inversion attacks.
//!
//! Four families: constant vectors, tanh-squashed coloured noise, i.i.d.
//! draws from common distributions, and audio taken from an external corpus
//! (a single chunk, the mean of several aligned chunks, or a chunk mixed with
//! white noise).

mod dist;
mod noise;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{chunk_offsets, Corpus};
use crate::error::{config_err, invalid, Result};
use crate::rng::{self, derive_seed};

pub use dist::{sample_dist, DistFamily, DistParams};
pub use noise::{colored_noise, NoiseColor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ExternalMode {
    Single,
    MeanOf { n: usize },
    Mix { weight_signal: f64, weight_noise: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitKind {
    /// Constant 0, 1 or -1.
    Plain { value: f64 },
    Noise { color: NoiseColor },
    Dist {
        family: DistFamily,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<DistParams>,
    },
    External { mode: ExternalMode, source: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub kind: InitKind,
    pub seed: u64,
}

/// Names accepted by [`InitSpec::parse`]. External kinds take a corpus path
/// after a colon.
pub const VALID_NAMES: &[&str] = &[
    "zeros",
    "ones",
    "minus_ones",
    "white",
    "pink",
    "brown",
    "blue",
    "violet",
    "uniform01",
    "uniform11",
    "gaussian",
    "laplace",
    "gumbel",
    "vonmises",
    "external:<corpus>",
    "external-mean<N>:<corpus>",
    "external-mix:<corpus>",
];

impl InitKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitKind::Plain { value } if ![0.0, 1.0, -1.0].contains(value) => {
                Err(config_err!("plain init value must be 0, 1 or -1, got {value}"))
            }
            InitKind::External {
                mode: ExternalMode::MeanOf { n: 0 },
                ..
            } => Err(config_err!("external mean needs n >= 1")),
            InitKind::External {
                mode: ExternalMode::Mix {
                    weight_signal,
                    weight_noise,
                },
                ..
            } if (weight_signal + weight_noise - 1.0).abs() > 1e-9 => Err(config_err!(
                "mix weights must sum to 1, got {weight_signal} + {weight_noise}"
            )),
            _ => Ok(()),
        }
    }

    /// Short name used in reports and file names.
    pub fn name(&self) -> String {
        match self {
            InitKind::Plain { value } if *value == 0.0 => "zeros".into(),
            InitKind::Plain { value } if *value == 1.0 => "ones".into(),
            InitKind::Plain { .. } => "minus_ones".into(),
            InitKind::Noise { color } => color.name().into(),
            InitKind::Dist { family, .. } => family.name().into(),
            InitKind::External { mode, .. } => match mode {
                ExternalMode::Single => "external".into(),
                ExternalMode::MeanOf { n } => format!("external-mean{n}"),
                ExternalMode::Mix { .. } => "external-mix".into(),
            },
        }
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl InitSpec {
    pub fn new(kind: InitKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    /// Parses a short name such as `laplace`, `white` or
    /// `external-mean50:/data/corpus`.
    pub fn parse(name: &str, seed: u64) -> Result<Self> {
        let kind = match name {
            "zeros" => InitKind::Plain { value: 0.0 },
            "ones" => InitKind::Plain { value: 1.0 },
            "minus_ones" => InitKind::Plain { value: -1.0 },
            "white-tanh" => InitKind::Noise {
                color: NoiseColor::White,
            },
            _ => {
                if let Some(color) = NoiseColor::ALL.into_iter().find(|c| c.name() == name) {
                    InitKind::Noise { color }
                } else if let Some(family) = DistFamily::ALL.into_iter().find(|f| f.name() == name) {
                    InitKind::Dist { family, params: None }
                } else if let Some((head, path)) = name.split_once(':') {
                    let mode = match head {
                        "external" => ExternalMode::Single,
                        "external-mix" => ExternalMode::Mix {
                            weight_signal: 0.85,
                            weight_noise: 0.15,
                        },
                        h => match h.strip_prefix("external-mean").map(str::parse::<usize>) {
                            Some(Ok(n)) => ExternalMode::MeanOf { n },
                            _ => return Err(unknown_name(name)),
                        },
                    };
                    InitKind::External {
                        mode,
                        source: PathBuf::from(path),
                    }
                } else {
                    return Err(unknown_name(name));
                }
            }
        };
        kind.validate()?;
        Ok(Self { kind, seed })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            kind: self.kind.clone(),
            seed,
        }
    }
}

fn unknown_name(name: &str) -> crate::Error {
    config_err!("unknown init kind '{name}'; valid kinds: {}", VALID_NAMES.join(", "))
}

/// Builds the starting vector for `spec`. Deterministic in
/// `(spec, length)`.
pub fn generate(spec: &InitSpec, length: usize) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(invalid!("init length must be >= 1"));
    }
    spec.kind.validate()?;
    match &spec.kind {
        InitKind::Plain { value } => Ok(vec![*value; length]),
        InitKind::Noise { color } => {
            let mut x = colored_noise(*color, length, spec.seed)?;
            x.iter_mut().for_each(|v| *v = v.tanh());
            Ok(x)
        }
        InitKind::Dist { family, params } => sample_dist(*family, *params, length, spec.seed),
        InitKind::External { mode, source } => {
            let pool = external_chunks(source, length)?;
            let pick = |seed: u64| -> Vec<f64> {
                let i = rng::rng(seed).gen_range(0..pool.len());
                pool[i].clone()
            };
            match mode {
                ExternalMode::Single => Ok(pick(spec.seed)),
                ExternalMode::MeanOf { n } => {
                    let mut mean = vec![0.0; length];
                    for k in 0..*n {
                        let c = pick(derive_seed(spec.seed, k as u64));
                        crate::diffnet::ops::axpy(1.0, &c, &mut mean);
                    }
                    mean.iter_mut().for_each(|v| *v /= *n as f64);
                    Ok(mean)
                }
                ExternalMode::Mix {
                    weight_signal,
                    weight_noise,
                } => {
                    let (signal, noise) = mix_components(spec, &pool, length)?;
                    Ok(signal
                        .iter()
                        .zip(&noise)
                        .map(|(s, n)| weight_signal * s + weight_noise * n)
                        .collect())
                }
            }
        }
    }
}

/// The signal chunk and tanh white-noise vector that a `Mix` init blends.
pub fn mix_parts(spec: &InitSpec, length: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    match &spec.kind {
        InitKind::External { source, .. } => {
            let pool = external_chunks(source, length)?;
            mix_components(spec, &pool, length)
        }
        _ => Err(invalid!("mix_parts needs an external init")),
    }
}

fn mix_components(spec: &InitSpec, pool: &[Vec<f64>], length: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let i = rng::rng(spec.seed).gen_range(0..pool.len());
    let noise = generate(
        &InitSpec::new(
            InitKind::Noise {
                color: NoiseColor::White,
            },
            derive_seed(spec.seed, 0xA015E),
        ),
        length,
    )?;
    Ok((pool[i].clone(), noise))
}

type ChunkPool = Arc<Vec<Vec<f64>>>;

/// Every aligned chunk of `length` samples in the corpus at `root`, cached
/// per (root, length) for the life of the process.
fn external_chunks(root: &Path, length: usize) -> Result<ChunkPool> {
    static CACHE: OnceLock<Mutex<HashMap<(PathBuf, usize), ChunkPool>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (root.to_path_buf(), length);
    if let Some(p) = cache.lock().expect("cache lock").get(&key) {
        return Ok(p.clone());
    }
    let corpus = Corpus::load(root)?;
    let mut chunks = Vec::new();
    for s in &corpus.manifest.speakers {
        for split in [crate::corpus::Split::Train, crate::corpus::Split::Test] {
            for w in corpus.waveforms(&s.speaker_id, split)? {
                chunks.extend(chunk_offsets(w.len(), length, length).map(|o| w[o..o + length].to_vec()));
            }
        }
    }
    if chunks.is_empty() {
        return Err(invalid!(
            "external corpus {} has no utterance of at least {length} samples",
            root.display()
        ));
    }
    let pool = Arc::new(chunks);
    cache.lock().expect("cache lock").insert(key, pool.clone());
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_inits_are_constant() {
        assert_eq!(generate(&InitSpec::parse("zeros", 0).unwrap(), 3200).unwrap(), vec![0.0; 3200]);
        assert_eq!(generate(&InitSpec::parse("minus_ones", 0).unwrap(), 5).unwrap(), vec![-1.0; 5]);
        let bad = InitKind::Plain { value: 0.5 };
        assert!(generate(&InitSpec::new(bad, 0), 4).is_err());
    }

    #[test]
    fn noise_inits_are_squashed() {
        for c in ["white", "pink", "brown", "blue", "violet"] {
            let x = generate(&InitSpec::parse(c, 11).unwrap(), 4096).unwrap();
            assert!(x.iter().all(|v| v.abs() < 1.0), "{c}");
        }
    }

    #[test]
    fn unknown_name_lists_valid_kinds() {
        let err = InitSpec::parse("purple", 0).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("laplace"));
        assert_eq!(InitSpec::parse("external-mean50:/x", 0).unwrap().kind.name(), "external-mean50");
    }

    #[test]
    fn mix_weights_must_sum_to_one() {
        let kind = InitKind::External {
            mode: ExternalMode::Mix {
                weight_signal: 0.8,
                weight_noise: 0.15,
            },
            source: "/nowhere".into(),
        };
        assert!(kind.validate().is_err());
    }

    #[test]
    fn missing_external_corpus_is_io_error() {
        let spec = InitSpec::parse("external:/definitely/not/here", 0).unwrap();
        assert!(matches!(generate(&spec, 100), Err(crate::Error::Io { .. })));
    }

    #[test]
    fn same_seed_same_vector() {
        for name in ["laplace", "pink", "vonmises"] {
            let s = InitSpec::parse(name, 42).unwrap();
            assert_eq!(generate(&s, 500).unwrap(), generate(&s, 500).unwrap());
            assert_ne!(generate(&s, 500).unwrap(), generate(&s.with_seed(43), 500).unwrap());
        }
    }
}
