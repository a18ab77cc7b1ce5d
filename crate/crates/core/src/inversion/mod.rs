//! Model-inversion attacks.
//!
//! [`standard_mi`] runs gradient descent on `c(x) = 1 - p_target` and stops
//! on iteration budget, patience, or a cost threshold. [`sliding_mi`] walks a
//! window across a longer working vector and inverts each overlapping window
//! in turn, so every window starts partly from already-inverted samples.
//! [`dvector_mi`] attacks the classifier head alone.

mod driver;
mod objective;

use serde::{Deserialize, Serialize};

use crate::diffnet::SpeakerModel;
use crate::error::{config_err, invalid, Error, Result};
use crate::init_zoo::{self, InitSpec};

pub use driver::{default_learning_rate, invert_all_speakers, invert_class, AttackConfig, AttackKind, BatchInversion, ClassOutcome};
pub use objective::{cost, AttackSurface, FullModelCost, HeadCost, Objective};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MIConfig {
    /// Maximum number of descent steps.
    pub alpha: usize,
    /// Patience window.
    pub beta: usize,
    /// Stop once the cost is at or below this value.
    pub gamma: f64,
    /// Gradient-descent step size.
    pub lambda: f64,
}

impl Default for MIConfig {
    fn default() -> Self {
        Self {
            alpha: 1000,
            beta: 10,
            gamma: 0.001,
            lambda: 0.01,
        }
    }
}

impl MIConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 1 {
            return Err(config_err!("alpha must be >= 1"));
        }
        if self.beta < 1 {
            return Err(config_err!("beta must be >= 1"));
        }
        // gamma = 1 is allowed: it makes the first step terminate.
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(config_err!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(config_err!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    Patience,
    Threshold,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InversionResult {
    /// Lowest-cost iterate (earliest on ties, `x0` included).
    pub best_input: Vec<f64>,
    pub best_cost: f64,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
    /// `c(x_0), c(x_1), ..., c(x_iterations_run)`.
    pub costs: Vec<f64>,
}

/// True when `current >= max(previous[i - beta..i])`, where `i` is the index
/// of `current`. Only checked once `beta` earlier descent iterates exist
/// (`i > beta`), so an early plateau never stops the search.
pub fn patience_exhausted(previous: &[f64], current: f64, beta: usize) -> bool {
    let i = previous.len();
    if beta == 0 || i <= beta {
        return false;
    }
    let worst = previous[i - beta..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    current >= worst
}

/// Gradient descent on the objective from `x0`.
///
/// Each iteration takes `x_i = x_{i-1} - lambda * grad c(x_{i-1})`, then
/// stops on patience, then on `c(x_i) <= gamma`, then on `i == alpha`.
/// Returns the lowest-cost iterate seen.
pub fn standard_mi<O: Objective>(objective: &O, x0: &[f64], cfg: &MIConfig) -> Result<InversionResult> {
    cfg.validate()?;
    if x0.len() != objective.input_len() {
        return Err(invalid!(
            "initial vector has {} entries, attacked model expects {}",
            x0.len(),
            objective.input_len()
        ));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(invalid!("initial vector contains non-finite values"));
    }
    let (c0, mut tape) = objective.evaluate(x0)?;
    if !c0.is_finite() {
        return Err(Error::Numerical {
            iteration: 0,
            message: "cost of the initial vector is not finite".into(),
            last_finite: x0.to_vec(),
        });
    }
    let mut costs = vec![c0];
    let mut x = x0.to_vec();
    let mut best_input = x.clone();
    let mut best_cost = c0;
    for i in 1..=cfg.alpha {
        let grad = objective.gradient(&x, &tape);
        let next: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - cfg.lambda * gi).collect();
        let finite_step = next.iter().all(|v| v.is_finite());
        let evaluated = if finite_step { Some(objective.evaluate(&next)?) } else { None };
        let (c, next_tape) = match evaluated {
            Some((c, t)) if c.is_finite() => (c, t),
            _ => {
                return Err(Error::Numerical {
                    iteration: i,
                    message: "cost became non-finite".into(),
                    last_finite: x,
                })
            }
        };
        let stop = if patience_exhausted(&costs, c, cfg.beta) {
            Some(StopReason::Patience)
        } else if c <= cfg.gamma {
            Some(StopReason::Threshold)
        } else if i == cfg.alpha {
            Some(StopReason::MaxIters)
        } else {
            None
        };
        costs.push(c);
        if c < best_cost {
            best_cost = c;
            best_input.copy_from_slice(&next);
        }
        x = next;
        tape = next_tape;
        if let Some(stop_reason) = stop {
            return Ok(InversionResult {
                best_input,
                best_cost,
                iterations_run: i,
                stop_reason,
                costs,
            });
        }
    }
    unreachable!("loop returns at i == alpha")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlidingConfig {
    /// Total working-vector length `l`.
    pub length: usize,
    pub stride: usize,
    /// Window `w`; must equal the model's input window.
    pub window: usize,
    pub inner: MIConfig,
}

impl Default for SlidingConfig {
    fn default() -> Self {
        Self {
            length: 2 * 3200 + 3200,
            stride: 500,
            window: 3200,
            inner: MIConfig::default(),
        }
    }
}

impl SlidingConfig {
    pub fn validate(&self) -> Result<()> {
        self.inner.validate()?;
        if self.window == 0 || self.window > self.length {
            return Err(config_err!(
                "window {} must be in [1, length {}]",
                self.window,
                self.length
            ));
        }
        if self.stride < 1 || self.stride > self.window {
            return Err(config_err!("stride {} must be in [1, window {}]", self.stride, self.window));
        }
        if self.window % 2 != 0 {
            return Err(config_err!("window {} must be even", self.window));
        }
        Ok(())
    }

    /// Window start offsets: `0, s, 2s, ...` while the window fits.
    pub fn offsets(&self) -> Vec<usize> {
        crate::corpus::chunk_offsets(self.length, self.window, self.stride).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub offset: usize,
    pub best_cost: f64,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlidingResult {
    /// `working[w/2 .. l - w/2]`
    pub samples: Vec<f64>,
    /// The whole working vector after the last window.
    pub working: Vec<f64>,
    pub windows: Vec<WindowReport>,
}

/// Inverts every window of `working` in order, writing each window's best
/// iterate back before moving on. Windows start every `stride` samples.
pub fn invert_windows<O: Objective>(
    objective: &O,
    working: &mut [f64],
    stride: usize,
    cfg: &MIConfig,
) -> Result<Vec<WindowReport>> {
    let w = objective.input_len();
    if stride == 0 {
        return Err(invalid!("stride must be positive"));
    }
    let mut reports = Vec::new();
    for k in crate::corpus::chunk_offsets(working.len(), w, stride) {
        let r = standard_mi(objective, &working[k..k + w], cfg)?;
        working[k..k + w].copy_from_slice(&r.best_input);
        reports.push(WindowReport {
            offset: k,
            best_cost: r.best_cost,
            iterations_run: r.iterations_run,
            stop_reason: r.stop_reason,
        });
    }
    Ok(reports)
}

/// Sliding inversion of a given working vector of length `cfg.length`.
pub fn sliding_mi_from<O: Objective>(objective: &O, initial: Vec<f64>, cfg: &SlidingConfig) -> Result<SlidingResult> {
    cfg.validate()?;
    if objective.input_len() != cfg.window {
        return Err(config_err!(
            "sliding window {} differs from the model input window {}",
            cfg.window,
            objective.input_len()
        ));
    }
    if initial.len() != cfg.length {
        return Err(invalid!("working vector has {} samples, expected {}", initial.len(), cfg.length));
    }
    let mut working = initial;
    let windows = invert_windows(objective, &mut working, cfg.stride, &cfg.inner)?;
    let half = cfg.window / 2;
    Ok(SlidingResult {
        samples: working[half..cfg.length - half].to_vec(),
        working,
        windows,
    })
}

/// Sliding inversion of class `target`, starting from `init` expanded to
/// `cfg.length` samples. Returns `cfg.length - cfg.window` samples.
pub fn sliding_mi(model: &SpeakerModel, target: usize, cfg: &SlidingConfig, init: &InitSpec) -> Result<SlidingResult> {
    cfg.validate()?;
    let objective = FullModelCost::new(model, target)?;
    let initial = init_zoo::generate(init, cfg.length)?;
    sliding_mi_from(&objective, initial, cfg)
}

/// Inversion through the classification head only, recovering a d-vector.
pub fn dvector_mi(model: &SpeakerModel, x0: &[f64], target: usize, cfg: &MIConfig) -> Result<InversionResult> {
    let objective = HeadCost::new(model, target)?;
    standard_mi(&objective, x0, cfg)
}

#[cfg(test)]
mod tests;
