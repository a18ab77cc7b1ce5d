use crate::corpus::Gender;
use crate::diffnet::ops;
use crate::error::{invalid, Result};

const EPOCHS: usize = 500;
const LEARNING_RATE: f64 = 0.1;

/// Logistic regression on standardized features, fit by full-batch gradient
/// descent.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticProbe {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LogisticProbe {
    pub fn fit(features: &[Vec<f64>], labels: &[f64]) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(invalid!(
                "probe needs matching non-empty features and labels ({} vs {})",
                features.len(),
                labels.len()
            ));
        }
        if !(labels.contains(&0.0) && labels.contains(&1.0)) {
            return Err(invalid!("probe training set must contain both genders"));
        }
        let dim = features[0].len();
        let n = features.len() as f64;
        let mut mean = vec![0.0; dim];
        for f in features {
            ops::axpy(1.0 / n, f, &mut mean);
        }
        let mut scale = vec![0.0; dim];
        for f in features {
            for (s, (v, m)) in scale.iter_mut().zip(f.iter().zip(&mean)) {
                *s += (v - m).powi(2) / n;
            }
        }
        scale.iter_mut().for_each(|s| *s = if *s > 1e-24 { s.sqrt() } else { 1.0 });
        let mut probe = Self {
            mean,
            scale,
            weights: vec![0.0; dim],
            bias: 0.0,
        };
        let z: Vec<Vec<f64>> = features.iter().map(|f| probe.standardize(f)).collect();
        for _ in 0..EPOCHS {
            let mut gw = vec![0.0; dim];
            let mut gb = 0.0;
            for (x, y) in z.iter().zip(labels) {
                let err = sigmoid(ops::dot(&probe.weights, x) + probe.bias) - y;
                ops::axpy(err / n, x, &mut gw);
                gb += err / n;
            }
            ops::axpy(-LEARNING_RATE, &gw, &mut probe.weights);
            probe.bias -= LEARNING_RATE * gb;
        }
        Ok(probe)
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Probability of label 1 (female).
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(ops::dot(&self.weights, &self.standardize(x)) + self.bias)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.probability(x) >= 0.5 {
            1.0
        } else {
            0.0
        }
    }
}

/// Fits a probe on `train` and returns its accuracy on `eval`.
pub fn gender_probe(train: &[(Vec<f64>, Gender)], eval: &[(Vec<f64>, Gender)]) -> Result<f64> {
    if eval.is_empty() {
        return Err(invalid!("no d-vectors to probe"));
    }
    let (x, y): (Vec<Vec<f64>>, Vec<f64>) = train.iter().map(|(d, g)| (d.clone(), g.as_label())).unzip();
    let probe = LogisticProbe::fit(&x, &y)?;
    if let Some((d, _)) = eval.iter().find(|(d, _)| d.len() != probe.weights.len()) {
        return Err(invalid!("d-vector has {} entries, probe expects {}", d.len(), probe.weights.len()));
    }
    let correct = eval.iter().filter(|(d, g)| probe.predict(d) == g.as_label()).count();
    Ok(correct as f64 / eval.len() as f64)
}
