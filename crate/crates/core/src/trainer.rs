//! SGD-with-momentum training of the target speaker model.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Split};
use crate::diffnet::{cross_entropy_grad, ops, ArchConfig, Params, SpeakerModel};
use crate::error::{config_err, invalid, Error, Result};
use crate::rng::{self, derive_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    /// Stop after an epoch whose running train accuracy reaches this value.
    /// Anything above 1 disables early stopping.
    pub stop_at_train_acc: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            seed: 1,
            shuffle: true,
            clip_norm: 5.0,
            stop_at_train_acc: 0.99,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(config_err!("epochs must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(config_err!("batch_size must be >= 1"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(config_err!("learning_rate must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(config_err!("momentum must lie in [0, 1)"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(config_err!("clip_norm must be positive"));
        }
        if self.stop_at_train_acc.is_nan() {
            return Err(config_err!("stop_at_train_acc must be a number"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean pre-update batch loss over the epoch.
    pub loss: f64,
    /// Running accuracy of the pre-update predictions over the epoch.
    pub train_acc: f64,
    pub test_acc: f64,
}

/// Trains a fresh model on the corpus train split.
///
/// Deterministic given `cfg.seed`: the same seed yields a bit-identical
/// model and history.
pub fn train(arch: &ArchConfig, corpus: &Corpus, cfg: &TrainConfig) -> Result<(SpeakerModel, Vec<EpochStats>)> {
    cfg.validate()?;
    let model = SpeakerModel::new(arch.clone(), derive_seed(cfg.seed, 1))?;
    train_from(model, corpus, cfg, |_| {})
}

/// Continues training an existing model; `on_epoch` sees each epoch's stats
/// as they are produced.
pub fn train_from(
    mut model: SpeakerModel,
    corpus: &Corpus,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(SpeakerModel, Vec<EpochStats>)> {
    cfg.validate()?;
    let arch = model.arch();
    if arch.num_classes != corpus.num_speakers() {
        return Err(config_err!(
            "model has {} classes but the corpus has {} speakers",
            arch.num_classes,
            corpus.num_speakers()
        ));
    }
    if arch.input_window_len != corpus.manifest.chunk_len {
        return Err(config_err!(
            "model window {} differs from corpus chunk length {}",
            arch.input_window_len,
            corpus.manifest.chunk_len
        ));
    }
    let data = corpus.labelled_chunks(Split::Train);
    if data.is_empty() {
        return Err(invalid!("train split has no chunks"));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut velocity = Params::zeros(model.arch(), model.dims());
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng::rng(derive_seed(cfg.seed, 1000 + epoch as u64)));
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch_idx in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], usize)> = batch_idx.iter().map(|&i| data[i]).collect();
            let (loss, hits, mut grads) = batch_gradient(&model, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Numerical {
                    iteration: epoch,
                    message: "training loss is not finite".into(),
                    last_finite: Vec::new(),
                });
            }
            loss_sum += loss * batch.len() as f64;
            correct += hits;
            let norm = grads.l2_norm();
            if norm > cfg.clip_norm {
                grads.scale(cfg.clip_norm / norm);
            }
            for (p, g) in model.params.tensors_mut().into_iter().zip(grads.tensors()) {
                p.set_grad(g.data().to_vec())?;
            }
            velocity.scale(cfg.momentum);
            for (v, p) in velocity.tensors_mut().into_iter().zip(model.params.tensors_mut()) {
                let g = p.take_grad().expect("gradient set above");
                ops::axpy(1.0, &g, v.data_mut());
                ops::axpy(-cfg.learning_rate, v.data(), p.data_mut());
            }
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / data.len() as f64,
            train_acc: correct as f64 / data.len() as f64,
            test_acc: accuracy(&model, corpus, Split::Test)?,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} train_acc {:.4} test_acc {:.4}",
            stats.loss,
            stats.train_acc,
            stats.test_acc
        );
        on_epoch(&stats);
        let done = stats.train_acc >= cfg.stop_at_train_acc;
        history.push(stats);
        if done {
            break;
        }
    }
    Ok((model, history))
}

/// Mean cross-entropy, number of correct pre-update predictions and mean
/// parameter gradient for one batch.
fn batch_gradient(model: &SpeakerModel, batch: &[(&[f64], usize)]) -> Result<(f64, usize, Params)> {
    let mut grads = Params::zeros(model.arch(), model.dims());
    let mut loss = 0.0;
    let mut correct = 0;
    for &(x, label) in batch {
        let trace = model.trace(x)?;
        if ops::argmax(trace.probs()) == label {
            correct += 1;
        }
        let (l, gl) = cross_entropy_grad(trace.probs(), label);
        loss += l;
        model.backward(&trace, &gl, Some(&mut grads), false);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok((loss / n, correct, grads))
}

/// Fraction of a split's chunks whose argmax (lowest index on ties) is the
/// true speaker.
pub fn accuracy(model: &SpeakerModel, corpus: &Corpus, split: Split) -> Result<f64> {
    let data = corpus.labelled_chunks(split);
    if data.is_empty() {
        return Err(invalid!("{split} split has no chunks"));
    }
    let hits: Vec<bool> = data
        .par_iter()
        .map(|&(x, label)| model.predict(x).map(|p| p == label))
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / data.len() as f64)
}

pub fn history_csv(history: &[EpochStats]) -> String {
    let mut s = String::from("epoch,loss,train_acc,test_acc\n");
    for h in history {
        writeln!(s, "{},{:.9},{:.9},{:.9}", h.epoch, h.loss, h.train_acc, h.test_acc).expect("string write");
    }
    s
}

pub fn write_history_csv(path: &Path, history: &[EpochStats]) -> Result<()> {
    std::fs::write(path, history_csv(history)).map_err(|e| Error::io(path, e))
}
