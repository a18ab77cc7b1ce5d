use crate::diffnet::{target_cost_grad_logits, SpeakerModel, Trace};
use crate::error::{invalid, Result};

/// A differentiable cost over a fixed-length input vector.
pub trait Objective {
    /// Whatever the forward pass must keep for the gradient.
    type Tape;

    fn input_len(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> Result<(f64, Self::Tape)>;

    /// Gradient at `x`, using the tape `evaluate(x)` produced.
    fn gradient(&self, x: &[f64], tape: &Self::Tape) -> Vec<f64>;
}

/// Which part of the model an attack differentiates through.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackSurface {
    /// Raw audio window through all three submodels.
    Full,
    /// d-vector through the classification head only.
    Head,
}

/// `c(x) = 1 - p_target(x)` on the chosen surface.
pub fn cost(model: &SpeakerModel, surface: AttackSurface, x: &[f64], target: usize) -> Result<f64> {
    model.check_class(target)?;
    let p = match surface {
        AttackSurface::Full => model.probabilities(x)?,
        AttackSurface::Head => model.head_probabilities(x)?,
    };
    Ok(1.0 - p[target])
}

pub struct FullModelCost<'a> {
    model: &'a SpeakerModel,
    target: usize,
}

impl<'a> FullModelCost<'a> {
    pub fn new(model: &'a SpeakerModel, target: usize) -> Result<Self> {
        model.check_class(target)?;
        Ok(Self { model, target })
    }
}

impl Objective for FullModelCost<'_> {
    type Tape = Trace;

    fn input_len(&self) -> usize {
        self.model.input_window_len()
    }

    fn evaluate(&self, x: &[f64]) -> Result<(f64, Trace)> {
        let trace = self.model.trace(x)?;
        Ok((1.0 - trace.probs()[self.target], trace))
    }

    fn gradient(&self, _x: &[f64], tape: &Trace) -> Vec<f64> {
        let gl = target_cost_grad_logits(tape.probs(), self.target);
        self.model
            .backward(tape, &gl, None, true)
            .expect("input gradient requested")
    }
}

pub struct HeadCost<'a> {
    model: &'a SpeakerModel,
    target: usize,
}

impl<'a> HeadCost<'a> {
    pub fn new(model: &'a SpeakerModel, target: usize) -> Result<Self> {
        model.check_class(target)?;
        Ok(Self { model, target })
    }
}

impl Objective for HeadCost<'_> {
    type Tape = Vec<f64>;

    fn input_len(&self) -> usize {
        self.model.dvector_dim()
    }

    fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if x.len() != self.input_len() {
            return Err(invalid!("d-vector has {} entries, expected {}", x.len(), self.input_len()));
        }
        let p = self.model.head_probabilities(x)?;
        Ok((1.0 - p[self.target], p))
    }

    fn gradient(&self, _x: &[f64], probs: &Vec<f64>) -> Vec<f64> {
        self.model
            .head_input_grad(&target_cost_grad_logits(probs, self.target))
    }
}
