//! Static outputs: binary PGM heatmaps and strongest-edge lists.

use std::io::Write;
use std::path::Path;

use crate::connectome::{proportional_edge_count, ranked_edges, Connectome};
use crate::error::{Error, Result};

/// Pixel for value `v` on `[lo, hi]`: floor((v − lo)/(hi − lo) · 255.999).
pub fn quantize(v: f64, lo: f64, hi: f64) -> u8 {
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    (t * 255.999).floor() as u8
}

/// Binary (P5) PGM with one pixel per entry, scaled over the domain range.
pub fn heatmap_pgm(c: &Connectome) -> Vec<u8> {
    let n = c.n();
    let (lo, hi) = c.domain().range();
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.extend(c.values().as_slice().iter().map(|&v| quantize(v, lo, hi)));
    out
}

pub fn render_heatmap(c: &Connectome, path: &Path) -> Result<()> {
    std::fs::write(path, heatmap_pgm(c)).map_err(|e| Error::io(path, e))
}

/// The ⌊ρ·n(n−1)/2⌋ strongest upper-triangle entries by magnitude, as
/// `i,j,weight` lines under a header.
pub fn edge_list_csv(c: &Connectome, rho: f64) -> Result<String> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument(format!("top fraction must lie in (0, 1], got {rho}")));
    }
    let n = c.n();
    let keep = proportional_edge_count(n, rho);
    let mut edges = ranked_edges(c.values());
    // zero-weight pairs are ranked last so the row count is always exact
    if edges.len() < keep {
        for i in 0..n {
            for j in i + 1..n {
                if c.values().get(i, j) == 0.0 {
                    edges.push((i, j, 0.0));
                }
            }
        }
    }
    let mut out = String::from("i,j,weight\n");
    for (i, j, w) in edges.into_iter().take(keep) {
        out.push_str(&format!("{i},{j},{w}\n"));
    }
    Ok(out)
}

pub fn write_edge_list(c: &Connectome, rho: f64, path: &Path) -> Result<()> {
    let text = edge_list_csv(c, rho)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectome::{Domain, Matrix};

    #[test]
    fn fc_quantization() {
        assert_eq!(quantize(-1.0, -1.0, 1.0), 0);
        assert_eq!(quantize(1.0, -1.0, 1.0), 255);
        assert_eq!(quantize(0.0, -1.0, 1.0), 127);
    }

    #[test]
    fn header_and_constant_image() {
        let n = 116;
        let m = Matrix::from_fn(n, |i, j| if i == j { 1.0 } else { 0.25 });
        let c = Connectome::new(Domain::Fc, m, "s", None).unwrap();
        let img = heatmap_pgm(&c);
        let header = b"P5\n116 116\n255\n";
        assert_eq!(&img[..header.len()], header);
        assert_eq!(img.len(), header.len() + n * n);

        let flat = Connectome::new(Domain::Sc, Matrix::zeros(8), "s", None).unwrap();
        let img = heatmap_pgm(&flat);
        assert!(img[b"P5\n8 8\n255\n".len()..].iter().all(|&p| p == 0));
    }

    #[test]
    fn edge_list_row_count() {
        let n = 20;
        let m = Matrix::from_fn(n, |i, j| if i == j { 0.0 } else { ((i * j) % 7) as f64 / 7.0 });
        let c = Connectome::new(Domain::Sc, m, "s", None).unwrap();
        for rho in [0.05, 0.5, 1.0] {
            let text = edge_list_csv(&c, rho).unwrap();
            assert_eq!(text.lines().count() - 1, proportional_edge_count(n, rho));
        }
        assert!(edge_list_csv(&c, 0.0).is_err());
    }
}
