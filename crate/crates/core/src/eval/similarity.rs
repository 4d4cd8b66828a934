//! Matrix-level similarity between a translated connectome and its ground
//! truth. Correlation-style scores are reported ×100.

use serde::{Deserialize, Serialize};

use crate::connectome::{Connectome, Domain, Matrix};
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMetrics {
    pub mse: f64,
    pub mae: f64,
    pub ssim: f64,
    pub pearson: f64,
    pub cosine: f64,
    /// SSIM was computed as a single global window (n below the window size).
    pub ssim_global: bool,
}

impl SimilarityMetrics {
    pub fn is_optimal(&self) -> bool {
        self.mse == 0.0 && self.mae == 0.0 && self.ssim == 100.0 && self.pearson == 100.0 && self.cosine == 100.0
    }
}

/// Dynamic range used by SSIM for each domain.
pub fn dynamic_range(domain: Domain) -> f64 {
    let (lo, hi) = domain.range();
    hi - lo
}

pub fn similarity_metrics(truth: &Connectome, pred: &Connectome) -> Result<SimilarityMetrics> {
    if truth.domain() != pred.domain() {
        return Err(Error::DomainMismatch {
            expected: truth.domain(),
            found: pred.domain(),
        });
    }
    matrix_similarity(truth.values(), pred.values(), truth.domain())
}

/// Same as [`similarity_metrics`] on raw matrices; `domain` only selects the
/// SSIM dynamic range.
pub fn matrix_similarity(truth: &Matrix, pred: &Matrix, domain: Domain) -> Result<SimilarityMetrics> {
    if truth.n() != pred.n() {
        return Err(Error::DimensionMismatch {
            expected: truth.n(),
            found: pred.n(),
        });
    }
    let (x, y) = (truth.as_slice(), pred.as_slice());
    let (ssim, ssim_global) = ssim(truth, pred, dynamic_range(domain));
    Ok(SimilarityMetrics {
        mse: mean_squared_error(x, y),
        mae: mean_absolute_error(x, y),
        ssim: 100.0 * ssim,
        pearson: 100.0 * pearson(x, y),
        cosine: 100.0 * cosine(x, y),
        ssim_global,
    })
}

pub fn mean_squared_error(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
}

pub fn mean_absolute_error(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / x.len() as f64
}

/// Pearson correlation in [−1, 1]. A constant vector has no defined
/// correlation: 1 if both inputs are identical, otherwise 0.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return if x == y { 1.0 } else { 0.0 };
    }
    // sqrt(a·a) == a exactly, so identical inputs give exactly 1
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Cosine similarity in [−1, 1]; a zero vector scores 1 against itself and 0
/// otherwise.
pub fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        xy += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx == 0.0 || yy == 0.0 {
        return if x == y { 1.0 } else { 0.0 };
    }
    (xy / (xx * yy).sqrt()).clamp(-1.0, 1.0)
}

/// Normalized 11×11 Gaussian window (σ = 1.5), row-major.
pub fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for a in &g {
        for b in &g {
            w.push(a * b / (s * s));
        }
    }
    w
}

/// Mean SSIM in [−1, 1] over every fully contained Gaussian window; matrices
/// smaller than the window use one global window with uniform weights (the
/// flag in the result is set).
pub fn ssim(x: &Matrix, y: &Matrix, range: f64) -> (f64, bool) {
    let n = x.n();
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    if n < SSIM_WINDOW {
        let w = vec![1.0 / (n * n) as f64; n * n];
        return (window_ssim(x, y, 0, 0, n, &w, c1, c2), true);
    }
    let w = gaussian_window();
    let positions = n - SSIM_WINDOW + 1;
    let mut total = 0.0;
    for r in 0..positions {
        for c in 0..positions {
            total += window_ssim(x, y, r, c, SSIM_WINDOW, &w, c1, c2);
        }
    }
    (total / (positions * positions) as f64, false)
}

#[allow(clippy::too_many_arguments)]
fn window_ssim(x: &Matrix, y: &Matrix, r0: usize, c0: usize, size: usize, w: &[f64], c1: f64, c2: f64) -> f64 {
    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..size {
        for j in 0..size {
            let k = w[i * size + j];
            let (a, b) = (x.get(r0 + i, c0 + j), y.get(r0 + i, c0 + j));
            mx += k * a;
            my += k * b;
            sxx += k * (a * a);
            syy += k * (b * b);
            sxy += k * (a * b);
        }
    }
    let vx = sxx - mx * mx;
    let vy = syy - my * my;
    let cov = sxy - mx * my;
    ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}
