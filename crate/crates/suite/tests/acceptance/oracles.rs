//! Textbook reference formulas, written independently of the library.

use crate::graphs::SmallGraph;

pub fn mse(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64
}

pub fn mae(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / x.len() as f64
}

/// Computational form n·Σxy − Σx·Σy over the product of root terms.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

pub fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    dot / (x.iter().map(|a| a * a).sum::<f64>().sqrt() * y.iter().map(|b| b * b).sum::<f64>().sqrt())
}

/// Mean SSIM over all valid 11×11 windows, Gaussian weights σ = 1.5,
/// centred (co)variances, K1 = 0.01, K2 = 0.03, dynamic range `l`.
pub fn ssim(x: &[f64], y: &[f64], n: usize, l: f64) -> f64 {
    const W: usize = 11;
    let g: Vec<f64> = (0..W).map(|i| (-((i as f64 - 5.0).powi(2)) / 4.5).exp()).collect();
    let total: f64 = g.iter().sum::<f64>().powi(2);
    let (c1, c2) = ((0.01 * l).powi(2), (0.03 * l).powi(2));
    let mut acc = 0.0;
    let mut windows = 0;
    for r in 0..=n - W {
        for c in 0..=n - W {
            let at = |m: &[f64], i: usize, j: usize| m[(r + i) * n + c + j];
            let weight = |i: usize, j: usize| g[i] * g[j] / total;
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..W {
                for j in 0..W {
                    mx += weight(i, j) * at(x, i, j);
                    my += weight(i, j) * at(y, i, j);
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for i in 0..W {
                for j in 0..W {
                    let (dx, dy) = (at(x, i, j) - mx, at(y, i, j) - my);
                    vx += weight(i, j) * dx * dx;
                    vy += weight(i, j) * dy * dy;
                    cxy += weight(i, j) * dx * dy;
                }
            }
            acc += (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            windows += 1;
        }
    }
    acc / windows as f64
}

/// All-pairs hop distances; `f64::INFINITY` when unreachable.
pub fn floyd_warshall(g: &SmallGraph) -> Vec<Vec<f64>> {
    let n = g.n;
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        d[i][i] = 0.0;
        for j in 0..n {
            if g.has_edge(i, j) {
                d[i][j] = 1.0;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// (density, characteristic path length, global efficiency).
pub fn path_metrics(g: &SmallGraph) -> (f64, f64, f64) {
    let n = g.n;
    let d = floyd_warshall(g);
    let pairs = (n * (n - 1)) as f64;
    let density = 2.0 * g.edges().len() as f64 / pairs;
    let (mut sum, mut reachable, mut inv) = (0.0, 0.0, 0.0);
    for (i, row) in d.iter().enumerate() {
        for (j, &dij) in row.iter().enumerate() {
            if i != j && dij.is_finite() {
                sum += dij;
                reachable += 1.0;
                inv += 1.0 / dij;
            }
        }
    }
    (density, sum / reachable, inv / pairs)
}

/// Newman's Q = (1/2m)·Σ_ij [A_ij − k_i·k_j/2m]·δ(c_i, c_j).
pub fn newman_q(g: &SmallGraph, labels: &[usize]) -> f64 {
    let m2 = 2.0 * g.edges().len() as f64;
    let mut q = 0.0;
    for i in 0..g.n {
        for j in 0..g.n {
            if labels[i] == labels[j] {
                let a = if g.has_edge(i, j) { 1.0 } else { 0.0 };
                q += a - (g.degree(i) * g.degree(j)) as f64 / m2;
            }
        }
    }
    q / m2
}
