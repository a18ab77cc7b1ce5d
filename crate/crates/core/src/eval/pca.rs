use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows, by decreasing explained variance.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

/// Top-`k` eigenvectors of the sample covariance (divisor `n - 1`).
pub fn pca_fit(data: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    if k == 0 {
        return Err(config_err!("PCA needs k >= 1"));
    }
    let Some(first) = data.first() else {
        return Err(invalid!("PCA needs at least k + 1 vectors, got 0"));
    };
    let dim = first.len();
    if k > dim {
        return Err(config_err!("PCA k = {k} exceeds the dimension {dim}"));
    }
    if data.len() < k + 1 {
        return Err(invalid!("PCA needs at least k + 1 = {} vectors, got {}", k + 1, data.len()));
    }
    if data.iter().any(|v| v.len() != dim) {
        return Err(invalid!("PCA vectors have mixed lengths"));
    }
    let n = data.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in data {
        crate::diffnet::ops::axpy(1.0, v, &mut mean);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let centered = DMatrix::from_fn(data.len(), dim, |r, c| data[r][c] - mean[c]);
    let cov = (centered.transpose() * &centered) / (n - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &i in &order[..k] {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        // Sign convention: largest-magnitude entry positive.
        let pivot = v.iter().copied().fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(eig.eigenvalues[i].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

/// `components * (x - mean)`.
pub fn pca_project(pca: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != pca.mean.len() {
        return Err(invalid!("vector has {} entries, PCA expects {}", x.len(), pca.mean.len()));
    }
    let centered: Vec<f64> = x.iter().zip(&pca.mean).map(|(a, m)| a - m).collect();
    Ok(pca
        .components
        .iter()
        .map(|c| crate::diffnet::ops::dot(c, &centered))
        .collect())
}
