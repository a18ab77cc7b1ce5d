use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{GenerateParams, Split};
use crate::diffnet::ArchConfig;
use crate::error::{config_err, Error, Result};
use crate::eval::DEFAULT_EVAL_HOP;
use crate::init_zoo::InitSpec;
use crate::inversion::{default_learning_rate, AttackConfig, AttackKind, MIConfig};
use crate::trainer::TrainConfig;

/// Prefix of environment variables that override config values:
/// `SMI_TRAIN__EPOCHS=5` sets `train.epochs`, `SMI_OUTPUT_DIR=x` sets
/// `output_dir`.
pub const ENV_PREFIX: &str = "SMI_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Worker threads for per-speaker attacks; 0 uses every core.
    pub workers: usize,
    pub corpus: CorpusSection,
    pub model: ArchConfig,
    pub train: TrainConfig,
    pub attack: AttackSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("runs/default"),
            workers: 0,
            corpus: CorpusSection::default(),
            model: ArchConfig::default(),
            train: TrainConfig::default(),
            attack: AttackSection::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub seed: u64,
    pub n_speakers: usize,
    pub utterances_per_speaker: usize,
    pub utterance_seconds: f64,
    pub balanced: bool,
    pub test_fraction: f64,
    /// Existing corpus directory to use instead of generating one; empty
    /// means generate under the run directory.
    pub external: String,
}

impl Default for CorpusSection {
    fn default() -> Self {
        let g = GenerateParams::default();
        Self {
            seed: g.seed,
            n_speakers: g.n_speakers,
            utterances_per_speaker: g.utterances_per_speaker,
            utterance_seconds: g.utterance_seconds,
            balanced: g.balanced,
            test_fraction: g.test_fraction,
            external: String::new(),
        }
    }
}

/// A fixed step size or `"auto"` for the per-init default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lambda {
    Fixed(f64),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AutoTag {
    #[serde(rename = "auto")]
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    /// Attacks that `evaluate` and `sweep` cover. `invert` runs the audio
    /// kinds, `invert-dvector` the d-vector kind.
    pub kinds: Vec<AttackKind>,
    pub inits: Vec<String>,
    pub seed: u64,
    pub alpha: usize,
    pub beta: usize,
    pub gamma: f64,
    pub lambda: Lambda,
    pub output_len: usize,
    pub stride: usize,
    pub window: usize,
    pub sweep_grid: Vec<f64>,
}

impl Default for AttackSection {
    fn default() -> Self {
        let mi = MIConfig::default();
        Self {
            kinds: vec![AttackKind::Standard, AttackKind::Sliding, AttackKind::Dvector],
            inits: ["laplace", "gumbel", "white", "zeros", "ones"].map(String::from).to_vec(),
            seed: 11,
            alpha: mi.alpha,
            beta: mi.beta,
            gamma: mi.gamma,
            lambda: Lambda::Auto(AutoTag::Auto),
            output_len: 6400,
            stride: 500,
            window: 3200,
            sweep_grid: vec![0.001, 0.005, 0.01, 0.05, 0.1, 0.5],
        }
    }
}

impl AttackSection {
    pub fn init_specs(&self) -> Result<Vec<InitSpec>> {
        if self.inits.is_empty() {
            return Err(config_err!("attack.inits is empty"));
        }
        self.inits.iter().map(|n| InitSpec::parse(n, self.seed)).collect()
    }

    pub fn lambda_for(&self, init: &InitSpec, kind: AttackKind) -> f64 {
        match self.lambda {
            Lambda::Fixed(v) => v,
            Lambda::Auto(_) => default_learning_rate(&init.kind, kind),
        }
    }

    pub fn attack_config(&self, kind: AttackKind, lambda: f64) -> AttackConfig {
        AttackConfig {
            kind,
            mi: MIConfig {
                alpha: self.alpha,
                beta: self.beta,
                gamma: self.gamma,
                lambda,
            },
            output_len: self.output_len,
            stride: self.stride,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Originals the inverted d-vectors are compared with.
    pub distance_split: Split,
    /// Originals the gender probe and PCA are fit on.
    pub probe_split: Split,
    pub pca_k: usize,
    pub hop: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            distance_split: Split::Train,
            probe_split: Split::Test,
            pca_k: 2,
            hop: DEFAULT_EVAL_HOP,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.dims()?;
        self.train.validate()?;
        self.generate_params().validate()?;
        if self.model.num_classes != self.corpus.n_speakers && self.corpus.external.is_empty() {
            return Err(config_err!(
                "model.num_classes {} differs from corpus.n_speakers {}",
                self.model.num_classes,
                self.corpus.n_speakers
            ));
        }
        if self.attack.window != self.model.input_window_len {
            return Err(config_err!(
                "attack.window {} differs from model.input_window_len {}",
                self.attack.window,
                self.model.input_window_len
            ));
        }
        if let Lambda::Fixed(v) = self.attack.lambda {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(config_err!("attack.lambda must be finite and >= 0"));
            }
        }
        if self.attack.kinds.is_empty() {
            return Err(config_err!("attack.kinds is empty"));
        }
        self.attack.init_specs()?;
        self.attack.attack_config(AttackKind::Sliding, 0.0).mi.validate()?;
        if self.eval.hop == 0 {
            return Err(config_err!("eval.hop must be positive"));
        }
        if self.eval.pca_k < 2 {
            return Err(config_err!("eval.pca_k must be >= 2 for the scatter plot"));
        }
        Ok(())
    }

    pub fn generate_params(&self) -> GenerateParams {
        GenerateParams {
            seed: self.corpus.seed,
            n_speakers: self.corpus.n_speakers,
            utterances_per_speaker: self.corpus.utterances_per_speaker,
            utterance_seconds: self.corpus.utterance_seconds,
            sample_rate: self.model.sample_rate,
            chunk_len: self.model.input_window_len,
            balanced: self.corpus.balanced,
            test_fraction: self.corpus.test_fraction,
        }
    }

    pub fn corpus_dir(&self) -> PathBuf {
        if self.corpus.external.is_empty() {
            self.output_dir.join("corpus")
        } else {
            PathBuf::from(&self.corpus.external)
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.output_dir.join("checkpoint").join("model.smi")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

/// Parses a raw override value as a TOML literal, falling back to a string.
pub fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `section.key` (or a top-level `key`) in a TOML document.
pub fn set_path(doc: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut parts = path.split('.').collect::<Vec<_>>();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| config_err!("empty key in override '{path}'"))?;
    let mut table = doc;
    for p in parts {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_err!("override '{path}': '{p}' is not a section"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Config-file path of an environment override, if `name` is one.
pub fn env_key(name: &str) -> Option<String> {
    let rest = name.strip_prefix(ENV_PREFIX)?;
    if rest.is_empty() {
        return None;
    }
    Some(rest.split("__").map(str::to_ascii_lowercase).collect::<Vec<_>>().join("."))
}

/// Builds the effective config: defaults, then the file, then environment
/// overrides, then command-line overrides.
pub fn resolve(
    file: Option<&Path>,
    env: &[(String, String)],
    overrides: &[(String, toml::Value)],
) -> Result<RunConfig> {
    let mut doc = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str::<toml::Table>(&text).map_err(|e| config_err!("{}: {e}", p.display()))?
        }
        None => toml::Table::new(),
    };
    for (name, raw) in env {
        if let Some(key) = env_key(name) {
            set_path(&mut doc, &key, parse_value(raw))?;
        }
    }
    for (key, value) in overrides {
        set_path(&mut doc, key, value.clone())?;
    }
    let cfg: RunConfig = toml::Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| config_err!("{}", e.message()))?;
    cfg.validate()?;
    Ok(cfg)
}
