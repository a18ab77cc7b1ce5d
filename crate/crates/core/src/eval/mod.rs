//! Metrics, baselines, PCA and the gender probe.

mod pca;
mod probe;
mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{average_speaker_chunks, chunk_offsets, Corpus, Gender, Split};
use crate::diffnet::{euclidean, ops, SpeakerModel};
use crate::error::{invalid, Result};
use crate::init_zoo::InitSpec;
use crate::inversion::{invert_all_speakers, AttackConfig, AttackKind, AttackSurface, BatchInversion};

pub use pca::{pca_fit, pca_project, PcaModel};
pub use probe::{gender_probe, LogisticProbe};
pub use report::{csv_row, render_report, scatter_points, Baselines, Cohort, ReportFiles, ScatterPoint, CSV_HEADER};

/// Hop between analysis windows when classifying audio longer than one
/// model window (10 ms at 16 kHz).
pub const DEFAULT_EVAL_HOP: usize = 160;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub init: String,
    pub attack: AttackKind,
    pub learning_rate: f64,
    pub mi_accuracy: f64,
    pub n_correct_speakers: usize,
    /// Mean over successfully inverted speakers of their mean d-vector
    /// distance to the originals; NaN when no speaker was inverted.
    pub mean_euclidean: f64,
    pub std_euclidean: f64,
}

fn window_offsets(model: &SpeakerModel, len: usize, hop: usize) -> Result<Vec<usize>> {
    let w = model.input_window_len();
    if hop == 0 {
        return Err(invalid!("evaluation hop must be positive"));
    }
    if len < w {
        return Err(invalid!("sample of {len} values is shorter than the model window {w}"));
    }
    Ok(chunk_offsets(len, w, hop).collect())
}

/// Posterior averaged over windows every `hop` samples. A sample of exactly
/// one window is a single forward pass.
pub fn sample_probabilities(model: &SpeakerModel, x: &[f64], hop: usize) -> Result<Vec<f64>> {
    let w = model.input_window_len();
    let offsets = window_offsets(model, x.len(), hop)?;
    let probs: Vec<Vec<f64>> = offsets
        .par_iter()
        .map(|&k| model.probabilities(&x[k..k + w]))
        .collect::<Result<_>>()?;
    Ok(mean_rows(&probs))
}

pub fn classify_sample(model: &SpeakerModel, x: &[f64], hop: usize) -> Result<usize> {
    Ok(ops::argmax(&sample_probabilities(model, x, hop)?))
}

/// Mean of the window d-vectors of a sample.
pub fn sample_dvector(model: &SpeakerModel, x: &[f64], hop: usize) -> Result<Vec<f64>> {
    let w = model.input_window_len();
    let offsets = window_offsets(model, x.len(), hop)?;
    let ds: Vec<Vec<f64>> = offsets
        .par_iter()
        .map(|&k| model.embedding(&x[k..k + w]))
        .collect::<Result<_>>()?;
    Ok(mean_rows(&ds))
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; rows[0].len()];
    for r in rows {
        ops::axpy(1.0, r, &mut acc);
    }
    let n = rows.len() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    acc
}

/// Fraction and count of classes whose inverted sample the model assigns to
/// that class. Classes absent from the map count as failures. Audio is
/// classified with [`classify_sample`]; d-vectors through the head.
pub fn mi_accuracy(
    model: &SpeakerModel,
    inverted: &BTreeMap<usize, Vec<f64>>,
    surface: AttackSurface,
    hop: usize,
) -> Result<(f64, usize)> {
    if inverted.is_empty() {
        return Err(invalid!("no inverted samples to evaluate"));
    }
    let mut correct = 0;
    for (&t, x) in inverted {
        model.check_class(t)?;
        let pred = match surface {
            AttackSurface::Full => classify_sample(model, x, hop)?,
            AttackSurface::Head => ops::argmax(&model.head_probabilities(x)?),
        };
        correct += usize::from(pred == t);
    }
    Ok((correct as f64 / model.num_classes() as f64, correct))
}

/// d-vectors of every chunk of every speaker in one split, by class.
#[derive(Clone, Debug)]
pub struct SpeakerDvectors {
    pub split: Split,
    pub by_class: Vec<Vec<Vec<f64>>>,
    pub genders: Vec<Gender>,
}

impl SpeakerDvectors {
    pub fn compute(model: &SpeakerModel, corpus: &Corpus, split: Split) -> Result<Self> {
        let by_class = corpus
            .manifest
            .speakers
            .iter()
            .map(|s| {
                corpus
                    .speaker_chunks(&s.speaker_id, split)?
                    .par_iter()
                    .map(|c| model.embedding(c))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            split,
            by_class,
            genders: corpus.manifest.genders(),
        })
    }

    fn class(&self, class: usize) -> Result<&[Vec<f64>]> {
        match self.by_class.get(class) {
            Some(v) if !v.is_empty() => Ok(v),
            Some(_) => Err(invalid!("speaker {class} has no chunks in the {} split", self.split)),
            None => Err(invalid!("unknown speaker {class}")),
        }
    }

    /// Every chunk d-vector with its speaker's gender.
    pub fn labelled(&self) -> Vec<(Vec<f64>, Gender)> {
        self.by_class
            .iter()
            .zip(&self.genders)
            .flat_map(|(ds, g)| ds.iter().map(move |d| (d.clone(), *g)))
            .collect()
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and (population) standard deviation of the distances from
/// `inverted_dvector` to each original chunk d-vector of `class`.
pub fn dvector_distance(inverted_dvector: &[f64], originals: &SpeakerDvectors, class: usize) -> Result<(f64, f64)> {
    let ds = originals.class(class)?;
    if ds[0].len() != inverted_dvector.len() {
        return Err(invalid!(
            "d-vector has {} entries, originals have {}",
            inverted_dvector.len(),
            ds[0].len()
        ));
    }
    let dist: Vec<f64> = ds.iter().map(|d| euclidean(inverted_dvector, d)).collect();
    Ok(mean_std(&dist))
}

/// Mean over speakers of the mean pairwise distance between that speaker's
/// chunk d-vectors.
pub fn within_speaker_baseline(originals: &SpeakerDvectors) -> Result<f64> {
    let mut per_speaker = Vec::with_capacity(originals.by_class.len());
    for (class, ds) in originals.by_class.iter().enumerate() {
        if ds.len() < 2 {
            return Err(invalid!(
                "speaker {class} has {} chunk(s) in the {} split; the baseline needs at least 2",
                ds.len(),
                originals.split
            ));
        }
        let (sum, pairs) = (0..ds.len())
            .into_par_iter()
            .map(|i| (ds[i + 1..].iter().map(|b| euclidean(&ds[i], b)).sum::<f64>(), ds.len() - i - 1))
            .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        per_speaker.push(sum / pairs as f64);
    }
    if per_speaker.is_empty() {
        return Err(invalid!("no speakers"));
    }
    Ok(per_speaker.iter().sum::<f64>() / per_speaker.len() as f64)
}

/// Accuracy of the model on each speaker's element-wise mean chunk, for the
/// train and test splits.
pub fn averaged_sample_baseline(model: &SpeakerModel, corpus: &Corpus) -> Result<(f64, f64)> {
    let score = |split: Split| -> Result<f64> {
        let mut correct = 0;
        for (class, s) in corpus.manifest.speakers.iter().enumerate() {
            let mean = average_speaker_chunks(corpus, &s.speaker_id, split)?;
            correct += usize::from(model.predict(mean.samples())? == class);
        }
        Ok(correct as f64 / corpus.num_speakers() as f64)
    };
    Ok((score(Split::Train)?, score(Split::Test)?))
}

/// The d-vector an attack outcome corresponds to.
pub fn outcome_dvector(model: &SpeakerModel, kind: AttackKind, samples: &[f64], hop: usize) -> Result<Vec<f64>> {
    match kind {
        AttackKind::Dvector => Ok(samples.to_vec()),
        _ => sample_dvector(model, samples, hop),
    }
}

pub fn surface_of(kind: AttackKind) -> AttackSurface {
    match kind {
        AttackKind::Dvector => AttackSurface::Head,
        _ => AttackSurface::Full,
    }
}

/// Scores one batch of inversions. Distance statistics cover only the
/// speakers classified as their target, pooling each speaker's mean distance.
pub fn evaluate_batch(
    model: &SpeakerModel,
    batch: &BatchInversion,
    kind: AttackKind,
    init: &str,
    learning_rate: f64,
    originals: &SpeakerDvectors,
    hop: usize,
) -> Result<EvalRow> {
    let surface = surface_of(kind);
    let samples: BTreeMap<usize, Vec<f64>> = batch.outcomes.iter().map(|(c, o)| (*c, o.samples.clone())).collect();
    let (mi_accuracy, n_correct_speakers) = if samples.is_empty() {
        (0.0, 0)
    } else {
        mi_accuracy(model, &samples, surface, hop)?
    };
    let mut means = Vec::new();
    for (&c, x) in &samples {
        let hit = match surface {
            AttackSurface::Full => classify_sample(model, x, hop)? == c,
            AttackSurface::Head => ops::argmax(&model.head_probabilities(x)?) == c,
        };
        if hit {
            let d = outcome_dvector(model, kind, x, hop)?;
            means.push(dvector_distance(&d, originals, c)?.0);
        }
    }
    let (mean_euclidean, std_euclidean) = if means.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        mean_std(&means)
    };
    Ok(EvalRow {
        init: init.to_string(),
        attack: kind,
        learning_rate,
        mi_accuracy,
        n_correct_speakers,
        mean_euclidean,
        std_euclidean,
    })
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    /// One row per grid value, in grid order.
    pub rows: Vec<EvalRow>,
    /// Index of the best row: highest accuracy, earliest on ties.
    pub best: usize,
}

impl SweepResult {
    pub fn best_row(&self) -> &EvalRow {
        &self.rows[self.best]
    }
}

/// Runs the attack once per learning rate in `grid` and scores each run.
pub fn sweep_learning_rates(
    model: &SpeakerModel,
    attack: &AttackConfig,
    init: &InitSpec,
    grid: &[f64],
    originals: &SpeakerDvectors,
    hop: usize,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(crate::error::config_err!("learning-rate grid is empty"));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut a = attack.clone();
        a.mi.lambda = lambda;
        let batch = invert_all_speakers(model, &a, init)?;
        let row = evaluate_batch(model, &batch, a.kind, &init.kind.name(), lambda, originals, hop)?;
        log::info!(
            "sweep {} {} lambda {lambda}: accuracy {:.3}",
            row.init,
            a.kind.name(),
            row.mi_accuracy
        );
        rows.push(row);
    }
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.mi_accuracy > rows[best].mi_accuracy {
            best = i;
        }
    }
    Ok(SweepResult { rows, best })
}
