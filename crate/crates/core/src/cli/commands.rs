use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Command, RunConfig};
use crate::corpus::{generate_corpus, save_wav, Corpus};
use crate::diffnet::{checkpoint, SpeakerModel};
use crate::error::{config_err, invalid, Error, Result};
use crate::eval::{
    averaged_sample_baseline, evaluate_batch, gender_probe, outcome_dvector, pca_fit, render_report, scatter_points,
    sweep_learning_rates, within_speaker_baseline, Baselines, EvalRow, ScatterPoint, SpeakerDvectors, CSV_HEADER,
};
use crate::init_zoo::InitSpec;
use crate::inversion::{invert_all_speakers, AttackKind, BatchInversion, ClassOutcome, WindowReport};
use crate::trainer::{train, write_history_csv};

pub(super) fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    write_file(&cfg.output_dir.join("run.lock"), cfg.to_toml().as_bytes())?;
    match cmd {
        Command::GenCorpus(_) => gen_corpus(cfg),
        Command::Train(_) => train_cmd(cfg),
        Command::Invert(_) => invert(cfg, false),
        Command::InvertDvector(_) => invert(cfg, true),
        Command::Evaluate => evaluate(cfg),
        Command::Report => report(cfg),
        Command::Sweep(_) => sweep(cfg),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn gen_corpus(cfg: &RunConfig) -> Result<()> {
    if !cfg.corpus.external.is_empty() {
        return Err(config_err!("corpus.external is set; nothing to generate"));
    }
    let dir = cfg.corpus_dir();
    let corpus = generate_corpus(&dir, &cfg.generate_params())?;
    log::info!("wrote {} speakers to {}", corpus.num_speakers(), dir.display());
    Ok(())
}

fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let dir = cfg.corpus_dir();
    if !dir.join("manifest.json").exists() {
        return Err(Error::io(
            dir.join("manifest.json"),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no corpus; run gen-corpus first"),
        ));
    }
    Corpus::load(&dir)
}

fn load_model(cfg: &RunConfig) -> Result<SpeakerModel> {
    let path = cfg.checkpoint_path();
    if !path.exists() {
        return Err(Error::io(
            &path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no checkpoint; run train first"),
        ));
    }
    checkpoint::load(&path)
}

fn train_cmd(cfg: &RunConfig) -> Result<()> {
    let corpus = load_corpus(cfg)?;
    let (model, history) = train(&cfg.model, &corpus, &cfg.train)?;
    let path = cfg.checkpoint_path();
    write_file(&path, &checkpoint::to_bytes(&model))?;
    write_history_csv(&path.with_file_name("history.csv"), &history)?;
    if let Some(last) = history.last() {
        log::info!(
            "trained {} epochs: train_acc {:.4} test_acc {:.4}",
            last.epoch,
            last.train_acc,
            last.test_acc
        );
    }
    Ok(())
}

/// Per-speaker sidecar written next to each inverted sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub speaker_id: String,
    pub class: usize,
    pub init: String,
    pub init_seed: u64,
    pub attack: AttackKind,
    pub lambda: f64,
    pub alpha: usize,
    pub beta: usize,
    pub gamma: f64,
    pub stride: usize,
    pub window: usize,
    pub output_len: usize,
    pub worst_cost: f64,
    pub total_iterations: usize,
    /// Samples outside [-1, 1] clipped in the WAV (the .f64 file is exact).
    pub clipped_samples: usize,
    pub windows: Vec<WindowReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct DvectorFile {
    meta: SampleMeta,
    values: Vec<f64>,
}

fn outcome_dir(cfg: &RunConfig, kind: AttackKind, init: &InitSpec) -> PathBuf {
    match kind {
        AttackKind::Dvector => cfg.output_dir.join("dvectors").join(init.kind.name()),
        _ => cfg.output_dir.join("inverted").join(kind.name()).join(init.kind.name()),
    }
}

fn f64_bytes(v: &[f64]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn f64_from_bytes(path: &Path, b: &[u8]) -> Result<Vec<f64>> {
    if b.len() % 8 != 0 {
        return Err(Error::Format {
            offset: (b.len() - b.len() % 8) as u64,
            message: format!("{} is not a whole number of f64 values", path.display()),
        });
    }
    Ok(b.chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

fn speaker_id(corpus_ids: &[String], class: usize) -> String {
    corpus_ids.get(class).cloned().unwrap_or_else(|| format!("class_{class:03}"))
}

fn write_outcomes(
    cfg: &RunConfig,
    kind: AttackKind,
    init: &InitSpec,
    lambda: f64,
    batch: &BatchInversion,
    ids: &[String],
    sample_rate: u32,
) -> Result<()> {
    let dir = outcome_dir(cfg, kind, init);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (c, o) in &batch.outcomes {
        let id = speaker_id(ids, *c);
        let mut meta = SampleMeta {
            speaker_id: id.clone(),
            class: *c,
            init: init.kind.name(),
            init_seed: o.init_seed,
            attack: kind,
            lambda,
            alpha: cfg.attack.alpha,
            beta: cfg.attack.beta,
            gamma: cfg.attack.gamma,
            stride: cfg.attack.stride,
            window: cfg.attack.window,
            output_len: o.samples.len(),
            worst_cost: o.worst_cost(),
            total_iterations: o.total_iterations(),
            clipped_samples: 0,
            windows: o.windows.clone(),
        };
        if kind == AttackKind::Dvector {
            let doc = DvectorFile {
                meta,
                values: o.samples.clone(),
            };
            let json = serde_json::to_string_pretty(&doc).expect("d-vector serializes");
            write_file(&dir.join(format!("{id}.json")), json.as_bytes())?;
        } else {
            meta.clipped_samples = save_wav(&dir.join(format!("{id}.wav")), &o.samples, sample_rate)?;
            write_file(&dir.join(format!("{id}.f64")), &f64_bytes(&o.samples))?;
            let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
            write_file(&dir.join(format!("{id}.json")), json.as_bytes())?;
        }
    }
    let failures = serde_json::to_string_pretty(&batch.failures).expect("failures serialize");
    write_file(&dir.join("failures.json"), failures.as_bytes())
}

fn read_outcomes(cfg: &RunConfig, kind: AttackKind, init: &InitSpec, ids: &[String]) -> Result<(BatchInversion, f64)> {
    let dir = outcome_dir(cfg, kind, init);
    let mut batch = BatchInversion::default();
    let mut lambda = f64::NAN;
    for (c, _) in ids.iter().enumerate() {
        let id = speaker_id(ids, c);
        let json_path = dir.join(format!("{id}.json"));
        if !json_path.exists() {
            continue;
        }
        let text = read_file(&json_path)?;
        let parse = |e: serde_json::Error| Error::Format {
            offset: 0,
            message: format!("{}: {e}", json_path.display()),
        };
        let (meta, samples) = if kind == AttackKind::Dvector {
            let d: DvectorFile = serde_json::from_slice(&text).map_err(parse)?;
            (d.meta, d.values)
        } else {
            let meta: SampleMeta = serde_json::from_slice(&text).map_err(parse)?;
            let raw_path = dir.join(format!("{id}.f64"));
            let samples = f64_from_bytes(&raw_path, &read_file(&raw_path)?)?;
            (meta, samples)
        };
        lambda = meta.lambda;
        batch.outcomes.insert(
            c,
            ClassOutcome {
                class: c,
                init_seed: meta.init_seed,
                samples,
                windows: meta.windows,
            },
        );
    }
    if batch.outcomes.is_empty() {
        return Err(Error::io(
            &dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no inversions found; run invert first"),
        ));
    }
    Ok((batch, lambda))
}

fn speaker_ids(corpus: &Corpus) -> Vec<String> {
    corpus.manifest.speakers.iter().map(|s| s.speaker_id.clone()).collect()
}

fn invert(cfg: &RunConfig, dvector: bool) -> Result<()> {
    let model = load_model(cfg)?;
    let corpus = load_corpus(cfg)?;
    let ids = speaker_ids(&corpus);
    let kinds: Vec<AttackKind> = if dvector {
        vec![AttackKind::Dvector]
    } else {
        let k: Vec<_> = cfg.attack.kinds.iter().copied().filter(|k| *k != AttackKind::Dvector).collect();
        if k.is_empty() {
            return Err(config_err!("attack.kinds has no audio attack (standard or sliding)"));
        }
        k
    };
    let mut failed = 0;
    for init in cfg.attack.init_specs()? {
        for &kind in &kinds {
            let lambda = cfg.attack.lambda_for(&init, kind);
            let attack = cfg.attack.attack_config(kind, lambda);
            log::info!("{} attack from {} (lambda {lambda})", kind.name(), init.kind.name());
            let batch = invert_all_speakers(&model, &attack, &init)?;
            failed += batch.failures.len();
            write_outcomes(cfg, kind, &init, lambda, &batch, &ids, model.sample_rate())?;
        }
    }
    if failed > 0 {
        return Err(Error::Numerical {
            iteration: 0,
            message: format!("{failed} speaker inversion(s) failed; see failures.json"),
            last_finite: Vec::new(),
        });
    }
    Ok(())
}

/// Everything `report` needs to re-render without recomputing.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct Evaluation {
    rows: Vec<EvalRow>,
    baselines: Baselines,
    /// Gender-probe accuracy on each row's inverted d-vectors, same order.
    gender_probe: Vec<f64>,
    scatter: Vec<ScatterPoint>,
}

fn evaluate(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let corpus = load_corpus(cfg)?;
    let ids = speaker_ids(&corpus);
    let hop = cfg.eval.hop;
    let distance_refs = SpeakerDvectors::compute(&model, &corpus, cfg.eval.distance_split)?;
    let probe_refs = if cfg.eval.probe_split == cfg.eval.distance_split {
        distance_refs.clone()
    } else {
        SpeakerDvectors::compute(&model, &corpus, cfg.eval.probe_split)?
    };
    let (train_acc, test_acc) = averaged_sample_baseline(&model, &corpus)?;
    let baselines = Baselines {
        averaged_sample_train_accuracy: train_acc,
        averaged_sample_test_accuracy: test_acc,
        within_speaker_distance: within_speaker_baseline(&distance_refs)?,
    };
    let probe_train = probe_refs.labelled();
    let pca_input: Vec<Vec<f64>> = probe_train.iter().map(|(d, _)| d.clone()).collect();
    let pca = pca_fit(&pca_input, cfg.eval.pca_k)?;
    let genders = corpus.manifest.genders();

    let mut rows = Vec::new();
    let mut probes = Vec::new();
    let mut scatter = None;
    for init in cfg.attack.init_specs()? {
        for &kind in &cfg.attack.kinds {
            let (batch, lambda) = read_outcomes(cfg, kind, &init, &ids)?;
            rows.push(evaluate_batch(&model, &batch, kind, &init.kind.name(), lambda, &distance_refs, hop)?);
            let inverted: Vec<(Vec<f64>, _)> = batch
                .outcomes
                .iter()
                .map(|(c, o)| Ok((outcome_dvector(&model, kind, &o.samples, hop)?, genders[*c])))
                .collect::<Result<_>>()?;
            probes.push(gender_probe(&probe_train, &inverted)?);
            // Prefer the first d-vector attack for the scatter plot.
            if scatter.as_ref().map_or(true, |(k, _)| *k != AttackKind::Dvector && kind == AttackKind::Dvector) {
                scatter = Some((kind, scatter_points(&pca, &probe_train, &inverted)?));
            }
        }
    }
    let scatter = scatter.map(|(_, s)| s).unwrap_or_default();
    let doc = Evaluation {
        rows,
        baselines,
        gender_probe: probes,
        scatter,
    };
    let path = cfg.output_dir.join("reports").join("evaluation.json");
    write_file(&path, serde_json::to_string_pretty(&doc).expect("evaluation serializes").as_bytes())?;
    render(cfg, &doc)
}

fn render(cfg: &RunConfig, doc: &Evaluation) -> Result<()> {
    let config = serde_json::json!({
        "run": cfg,
        "gender_probe": doc.rows.iter().zip(&doc.gender_probe).map(|(r, p)| serde_json::json!({
            "init": r.init, "attack": r.attack, "accuracy": p,
        })).collect::<Vec<_>>(),
    });
    let scatter = (!doc.scatter.is_empty()).then_some(doc.scatter.as_slice());
    let files = render_report(&cfg.output_dir.join("reports"), &doc.rows, &doc.baselines, &config, scatter)?;
    log::info!("report written to {}", files.csv.display());
    Ok(())
}

fn report(cfg: &RunConfig) -> Result<()> {
    let path = cfg.output_dir.join("reports").join("evaluation.json");
    if !path.exists() {
        return Err(Error::io(
            &path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no evaluation; run evaluate first"),
        ));
    }
    let doc: Evaluation = serde_json::from_slice(&read_file(&path)?).map_err(|e| Error::Format {
        offset: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    render(cfg, &doc)
}

fn sweep(cfg: &RunConfig) -> Result<()> {
    let model = load_model(cfg)?;
    let corpus = load_corpus(cfg)?;
    let refs = SpeakerDvectors::compute(&model, &corpus, cfg.eval.distance_split)?;
    let mut text = format!("{CSV_HEADER},best\n");
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for init in cfg.attack.init_specs()? {
        for &kind in &cfg.attack.kinds {
            let attack = cfg.attack.attack_config(kind, 0.0);
            let result = sweep_learning_rates(&model, &attack, &init, &cfg.attack.sweep_grid, &refs, cfg.eval.hop)?;
            for (i, r) in result.rows.iter().enumerate() {
                text.push_str(&crate::eval::csv_row(r));
                text.push_str(if i == result.best { ",1\n" } else { ",0\n" });
            }
            best.insert(format!("{}/{}", init.kind.name(), kind.name()), result.best_row().learning_rate);
        }
    }
    write_file(&cfg.output_dir.join("reports").join("sweep.csv"), text.as_bytes())?;
    let json = serde_json::to_string_pretty(&best).expect("sweep summary serializes");
    write_file(&cfg.output_dir.join("reports").join("sweep_best.json"), json.as_bytes())?;
    if best.is_empty() {
        return Err(invalid!("sweep produced no rows"));
    }
    Ok(())
}
