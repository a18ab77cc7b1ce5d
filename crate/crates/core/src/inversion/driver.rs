use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{invert_windows, standard_mi, FullModelCost, HeadCost, MIConfig, SlidingConfig, StopReason, WindowReport};
use crate::diffnet::SpeakerModel;
use crate::error::{config_err, Result};
use crate::init_zoo::{self, DistFamily, ExternalMode, InitKind, InitSpec, NoiseColor};
use crate::rng::derive_seed;

const DVECTOR_LEARNING_RATE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// Independent inversion of consecutive non-overlapping windows.
    Standard,
    /// Overlapping windows, each seeded by its already-inverted neighbours.
    Sliding,
    /// Head-only inversion producing a d-vector.
    Dvector,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Standard => "standard",
            AttackKind::Sliding => "sliding",
            AttackKind::Dvector => "dvector",
        }
    }
}

/// Step size that worked best for an init kind under an attack, falling back
/// to 0.01 for kinds without a tuned value. Head-only attacks use 0.1 for
/// every init.
pub fn default_learning_rate(kind: &InitKind, attack: AttackKind) -> f64 {
    if attack == AttackKind::Dvector {
        return DVECTOR_LEARNING_RATE;
    }
    let sliding = attack == AttackKind::Sliding;
    let pick = |standard: f64, slide: f64| if sliding { slide } else { standard };
    match kind {
        InitKind::Plain { value } if *value == 1.0 => pick(1e-5, 0.2),
        InitKind::Plain { value } if *value == 0.0 => pick(1e-8, 0.5),
        InitKind::Dist {
            family: DistFamily::Gumbel,
            ..
        } => 0.01,
        InitKind::Dist {
            family: DistFamily::Laplace,
            ..
        } => 0.005,
        InitKind::Noise {
            color: NoiseColor::White,
        } => 0.2,
        InitKind::Noise {
            color: NoiseColor::Brown,
        } => pick(0.01, 0.05),
        InitKind::External { mode, .. } => match mode {
            ExternalMode::Single => pick(0.001, 0.2),
            ExternalMode::Mix { .. } => pick(0.005, 0.01),
            ExternalMode::MeanOf { .. } => pick(0.001, 0.01),
        },
        _ => 0.01,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub mi: MIConfig,
    /// Length of each reconstructed sample. Standard attacks need a multiple
    /// of the window.
    pub output_len: usize,
    pub stride: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            kind: AttackKind::Sliding,
            mi: MIConfig::default(),
            output_len: 6400,
            stride: 500,
        }
    }
}

impl AttackConfig {
    /// Validates against the attacked model and returns the working-vector
    /// length the init must fill.
    pub fn working_len(&self, model: &SpeakerModel) -> Result<usize> {
        self.mi.validate()?;
        let w = model.input_window_len();
        match self.kind {
            AttackKind::Dvector => Ok(model.dvector_dim()),
            AttackKind::Standard => {
                if self.output_len == 0 || self.output_len % w != 0 {
                    return Err(config_err!(
                        "standard attack output length {} must be a positive multiple of the window {w}",
                        self.output_len
                    ));
                }
                Ok(self.output_len)
            }
            AttackKind::Sliding => {
                let cfg = self.sliding(w);
                cfg.validate()?;
                Ok(cfg.length)
            }
        }
    }

    pub fn sliding(&self, window: usize) -> SlidingConfig {
        SlidingConfig {
            length: self.output_len + window,
            stride: self.stride,
            window,
            inner: self.mi.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassOutcome {
    pub class: usize,
    pub init_seed: u64,
    /// Reconstructed audio, or the d-vector for head attacks.
    pub samples: Vec<f64>,
    pub windows: Vec<WindowReport>,
}

impl ClassOutcome {
    /// Highest per-window best cost.
    pub fn worst_cost(&self) -> f64 {
        self.windows.iter().map(|w| w.best_cost).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn total_iterations(&self) -> usize {
        self.windows.iter().map(|w| w.iterations_run).sum()
    }

    pub fn last_stop_reason(&self) -> Option<StopReason> {
        self.windows.last().map(|w| w.stop_reason)
    }
}

#[derive(Clone, Debug, Default)]
pub struct BatchInversion {
    pub outcomes: BTreeMap<usize, ClassOutcome>,
    /// Classes whose inversion failed, with the error message.
    pub failures: BTreeMap<usize, String>,
}

/// Inverts one class. The init is reseeded with `derive_seed(init.seed, class)`.
pub fn invert_class(model: &SpeakerModel, attack: &AttackConfig, init: &InitSpec, class: usize) -> Result<ClassOutcome> {
    let len = attack.working_len(model)?;
    let spec = init.with_seed(derive_seed(init.seed, class as u64));
    let x0 = init_zoo::generate(&spec, len)?;
    let w = model.input_window_len();
    let (samples, windows) = match attack.kind {
        AttackKind::Dvector => {
            let r = standard_mi(&HeadCost::new(model, class)?, &x0, &attack.mi)?;
            let report = WindowReport {
                offset: 0,
                best_cost: r.best_cost,
                iterations_run: r.iterations_run,
                stop_reason: r.stop_reason,
            };
            (r.best_input, vec![report])
        }
        AttackKind::Standard => {
            let mut x = x0;
            let reports = invert_windows(&FullModelCost::new(model, class)?, &mut x, w, &attack.mi)?;
            (x, reports)
        }
        AttackKind::Sliding => {
            let r = super::sliding_mi_from(&FullModelCost::new(model, class)?, x0, &attack.sliding(w))?;
            (r.samples, r.windows)
        }
    };
    Ok(ClassOutcome {
        class,
        init_seed: spec.seed,
        samples,
        windows,
    })
}

/// Inverts every class in parallel. Per-class failures are collected rather
/// than aborting the batch; a configuration error aborts up front.
pub fn invert_all_speakers(model: &SpeakerModel, attack: &AttackConfig, init: &InitSpec) -> Result<BatchInversion> {
    attack.working_len(model)?;
    init.kind.validate()?;
    let results: Vec<(usize, Result<ClassOutcome>)> = (0..model.num_classes())
        .into_par_iter()
        .map(|c| (c, invert_class(model, attack, init, c)))
        .collect();
    let mut batch = BatchInversion::default();
    for (c, r) in results {
        match r {
            Ok(o) => {
                batch.outcomes.insert(c, o);
            }
            Err(e) => {
                log::warn!("inversion of class {c} failed: {e}");
                batch.failures.insert(c, e.to_string());
            }
        }
    }
    Ok(batch)
}
