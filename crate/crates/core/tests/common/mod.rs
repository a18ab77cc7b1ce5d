#![allow(dead_code)]

/// Sample covariance with divisor `n - 1`.
pub fn covariance(data: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = data.len();
    let d = data[0].len();
    let mut mean = vec![0.0; d];
    for v in data {
        for j in 0..d {
            mean[j] += v[j] / n as f64;
        }
    }
    let mut c = vec![vec![0.0; d]; d];
    for v in data {
        for a in 0..d {
            let da = v[a] - mean[a];
            for b in a..d {
                c[a][b] += da * (v[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            c[a][b] /= (n - 1) as f64;
            c[b][a] = c[a][b];
        }
    }
    c
}

/// Top-`k` eigenpairs by power iteration with deflation.
pub fn power_iteration(cov: &[Vec<f64>], k: usize) -> Vec<(f64, Vec<f64>)> {
    let d = cov.len();
    let mut m: Vec<Vec<f64>> = cov.to_vec();
    let mut out = Vec::new();
    for comp in 0..k {
        let mut v: Vec<f64> = (0..d).map(|i| 1.0 + ((i * 31 + comp * 7) % 17) as f64 / 17.0).collect();
        let mut lambda = 0.0;
        for _ in 0..200_000 {
            let mut w: Vec<f64> = m.iter().map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            w.iter_mut().for_each(|x| *x /= norm);
            let delta = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = w;
            lambda = norm;
            if delta < 1e-14 {
                break;
            }
        }
        for a in 0..d {
            for b in 0..d {
                m[a][b] -= lambda * v[a] * v[b];
            }
        }
        out.push((lambda, v));
    }
    out
}

/// Worst relative eigenvalue error and worst component error (up to sign)
/// of `pca` against the oracle.
pub fn compare_pca(pca: &speaker_mi::eval::PcaModel, oracle: &[(f64, Vec<f64>)]) -> (f64, f64) {
    let mut val_err = 0.0f64;
    let mut vec_err = 0.0f64;
    for (i, (lambda, v)) in oracle.iter().enumerate() {
        val_err = val_err.max((pca.explained_variance[i] - lambda).abs() / lambda.abs());
        let c = &pca.components[i];
        let sign = if c.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        let e = c.iter().zip(v).map(|(a, b)| (a - sign * b).abs()).fold(0.0, f64::max);
        vec_err = vec_err.max(e);
    }
    (val_err, vec_err)
}

/// Least-squares slope of log power against log frequency, DC excluded.
pub fn periodogram_slope(x: &[f64]) -> f64 {
    use rustfft::{num_complex::Complex, FftPlanner};
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let pts: Vec<(f64, f64)> = (1..n / 2)
        .map(|k| ((k as f64).ln(), buf[k].norm_sqr().max(1e-300).ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Sample mean and unbiased variance.
pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Replays a fixed cost sequence; the gradient is always 1.
pub struct Scripted {
    pub costs: Vec<f64>,
    pub calls: std::cell::Cell<usize>,
}

impl Scripted {
    pub fn new(costs: &[f64]) -> Self {
        Self {
            costs: costs.to_vec(),
            calls: std::cell::Cell::new(0),
        }
    }
}

impl speaker_mi::inversion::Objective for Scripted {
    type Tape = ();
    fn input_len(&self) -> usize {
        1
    }
    fn evaluate(&self, _x: &[f64]) -> speaker_mi::Result<(f64, ())> {
        let i = self.calls.get();
        self.calls.set(i + 1);
        Ok((self.costs[i], ()))
    }
    fn gradient(&self, _x: &[f64], _t: &()) -> Vec<f64> {
        vec![1.0]
    }
}

/// Where descent over `costs` must stop: first patience hit (current cost
/// no better than the worst of the previous `beta`), else first cost at or
/// below `gamma`, else the budget.
pub fn expected_stop(costs: &[f64], alpha: usize, beta: usize, gamma: f64) -> (usize, speaker_mi::inversion::StopReason) {
    use speaker_mi::inversion::StopReason;
    for i in 1..=alpha {
        if i > beta {
            let worst = costs[i - beta..i].iter().copied().fold(f64::MIN, f64::max);
            if costs[i] >= worst {
                return (i, StopReason::Patience);
            }
        }
        if costs[i] <= gamma {
            return (i, StopReason::Threshold);
        }
    }
    (alpha, StopReason::MaxIters)
}
