//! Synthetic paired connectomes: SC from a weighted stochastic block model,
//! FC from a fixed nonlinear map of SC plus symmetric noise.
//!
//! Class k uses `modules·(k+1)` contiguous communities, so the class signal
//! lives in SC block structure and reaches FC through the map.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::connectome::{
    normalize_sc, save_connectome, Connectome, DatasetManifest, Domain, Matrix, Split, SubjectEntry,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    /// Communities of class 0; class k has `modules·(k+1)`.
    pub modules: usize,
    pub subjects_per_class: usize,
    pub classes: usize,
    pub test_fraction: f64,
    /// Probability of a within-community / between-community fiber bundle.
    pub p_within: f64,
    pub p_between: f64,
    /// Log-normal parameters (log scale) of raw fiber counts.
    pub mu_within: f64,
    pub mu_between: f64,
    pub sigma: f64,
    /// FC = tanh(α·(S + β·S·S)) + noise.
    pub alpha: f64,
    pub beta: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 32,
            modules: 2,
            subjects_per_class: 50,
            classes: 2,
            test_fraction: 0.2,
            p_within: 0.9,
            p_between: 0.2,
            mu_within: 4.0,
            mu_between: 1.0,
            sigma: 0.5,
            alpha: 1.0,
            beta: 0.05,
            noise_std: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n < 8 {
            return bad(format!("synthetic n must be at least 8, got {}", self.n));
        }
        if self.modules == 0 || self.classes == 0 || self.subjects_per_class == 0 {
            return bad("modules, classes and subjects_per_class must be positive".into());
        }
        if self.modules * self.classes > self.n {
            return bad(format!(
                "{} communities do not fit into {} nodes",
                self.modules * self.classes,
                self.n
            ));
        }
        for (name, p) in [("p_within", self.p_within), ("p_between", self.p_between)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad(format!("test_fraction must lie in [0, 1), got {}", self.test_fraction));
        }
        if !(self.noise_std >= 0.0) || !(self.sigma >= 0.0) {
            return bad("noise_std and sigma must be non-negative".into());
        }
        if ![self.mu_within, self.mu_between, self.alpha, self.beta].iter().all(|v| v.is_finite()) {
            return bad("mapping and weight parameters must be finite".into());
        }
        Ok(())
    }

    /// Fixed raw-count scale: four log-standard-deviations above the
    /// within-community median, so normalization does not depend on which
    /// subjects were drawn.
    pub fn sc_max(&self) -> f64 {
        (self.mu_within.max(self.mu_between) + 4.0 * self.sigma).exp()
    }

    pub fn communities(&self, class: usize) -> usize {
        self.modules * (class + 1)
    }
}

/// Community of each node under `k` contiguous, near-equal blocks.
pub fn block_assignment(n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|i| i * k / n).collect()
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Raw fiber counts of one subject.
pub fn gen_sc_raw(cfg: &SynthConfig, class: usize, subject_seed: u64) -> Result<Matrix> {
    cfg.validate()?;
    let blocks = block_assignment(cfg.n, cfg.communities(class));
    let mut rng = rng_for(cfg.seed, subject_seed.wrapping_mul(2));
    let within = LogNormal::new(cfg.mu_within, cfg.sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let between = LogNormal::new(cfg.mu_between, cfg.sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut m = Matrix::zeros(cfg.n);
    for i in 0..cfg.n {
        for j in i + 1..cfg.n {
            let same = blocks[i] == blocks[j];
            let (p, dist) = if same { (cfg.p_within, &within) } else { (cfg.p_between, &between) };
            let present = rng.random_bool(p);
            let w = dist.sample(&mut rng);
            if present {
                m.set(i, j, w);
                m.set(j, i, w);
            }
        }
    }
    Ok(m)
}

/// Normalized SC of one subject; deterministic in (`cfg.seed`, class,
/// `subject_seed`).
pub fn gen_sc(cfg: &SynthConfig, class: usize, subject_seed: u64) -> Result<Connectome> {
    let raw = gen_sc_raw(cfg, class, subject_seed)?;
    Ok(normalize_sc(&raw, Some(cfg.sc_max()))?.0)
}

/// F = tanh(α·(S + β·S·S)) + symmetric N(0, noise_std²) noise, clamped to
/// [−1, 1] with unit diagonal.
pub fn sc_to_fc_ground_truth(
    sc: &Connectome,
    alpha: f64,
    beta: f64,
    noise_std: f64,
    noise_seed: u64,
) -> Result<Connectome> {
    if sc.domain() != Domain::Sc {
        return Err(Error::DomainMismatch {
            expected: Domain::Sc,
            found: sc.domain(),
        });
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise_std must be non-negative, got {noise_std}")));
    }
    let s = sc.values();
    let n = s.n();
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = rng_for(noise_seed, 1);
    let mut f = Matrix::zeros(n);
    for i in 0..n {
        f.set(i, i, 1.0);
        for j in i + 1..n {
            let sq: f64 = (0..n).map(|k| s.get(i, k) * s.get(k, j)).sum();
            let e = if noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            let v = ((alpha * (s.get(i, j) + beta * sq)).tanh() + e).clamp(-1.0, 1.0);
            f.set(i, j, v);
            f.set(j, i, v);
        }
    }
    Connectome::new(Domain::Fc, f, sc.subject_id(), sc.label())
}

/// One generated subject.
#[derive(Debug, Clone)]
pub struct SynthSubject {
    pub id: String,
    pub class: usize,
    pub split: Split,
    pub fc: Connectome,
    pub sc: Connectome,
}

/// All subjects, class-major; within each class the last
/// `round(test_fraction·count)` subjects form the test split.
pub fn gen_subjects(cfg: &SynthConfig) -> Result<Vec<SynthSubject>> {
    cfg.validate()?;
    let per = cfg.subjects_per_class;
    let n_test = (cfg.test_fraction * per as f64).round() as usize;
    let width = (cfg.classes * per).to_string().len().max(3);
    let mut out = Vec::with_capacity(cfg.classes * per);
    for class in 0..cfg.classes {
        for k in 0..per {
            let index = class * per + k;
            let id = format!("sub-{:0width$}", index + 1);
            let label = Some(class as i64);
            let sc = gen_sc(cfg, class, index as u64)?.with_identity(id.clone(), label);
            let noise_seed = cfg.seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let fc = sc_to_fc_ground_truth(&sc, cfg.alpha, cfg.beta, cfg.noise_std, noise_seed)?;
            let split = if k + n_test >= per { Split::Test } else { Split::Train };
            out.push(SynthSubject { id, class, split, fc, sc });
        }
    }
    Ok(out)
}

/// Writes `fc/<id>.csv`, `sc/<id>.csv` and `manifest.json` under `dir`.
pub fn gen_dataset(cfg: &SynthConfig, dir: &Path) -> Result<DatasetManifest> {
    let subjects = gen_subjects(cfg)?;
    for sub in ["fc", "sc"] {
        let d = dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut entries = Vec::with_capacity(subjects.len());
    for s in &subjects {
        let fc = format!("fc/{}.csv", s.id);
        let sc = format!("sc/{}.csv", s.id);
        save_connectome(&s.fc, &dir.join(&fc))?;
        save_connectome(&s.sc, &dir.join(&sc))?;
        entries.push(SubjectEntry {
            id: s.id.clone(),
            fc,
            sc,
            label: s.class as i64,
            split: s.split,
        });
    }
    let manifest = DatasetManifest::new(cfg.n, cfg.sc_max(), entries, dir);
    manifest.save(&dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::pearson;

    #[test]
    fn sc_is_deterministic_and_valid() {
        let cfg = SynthConfig::default();
        let a = gen_sc(&cfg, 0, 5).unwrap();
        assert_eq!(a, gen_sc(&cfg, 0, 5).unwrap());
        assert_ne!(a, gen_sc(&cfg, 0, 6).unwrap());
        assert!(a.values().is_symmetric());
        for i in 0..cfg.n {
            assert_eq!(a.values().get(i, i), 0.0);
        }
    }

    #[test]
    fn within_exceeds_between() {
        let cfg = SynthConfig::default();
        let blocks = block_assignment(cfg.n, 2);
        let (mut win, mut nw, mut btw, mut nb) = (0.0, 0, 0.0, 0);
        for s in 0..100 {
            let sc = gen_sc(&cfg, 0, s).unwrap();
            for i in 0..cfg.n {
                for j in i + 1..cfg.n {
                    if blocks[i] == blocks[j] {
                        win += sc.values().get(i, j);
                        nw += 1;
                    } else {
                        btw += sc.values().get(i, j);
                        nb += 1;
                    }
                }
            }
        }
        assert!(win / nw as f64 > btw / nb as f64);
    }

    #[test]
    fn small_alpha_linearizes() {
        let cfg = SynthConfig::default();
        let sc = gen_sc(&cfg, 1, 3).unwrap();
        let alpha = 0.01;
        let fc = sc_to_fc_ground_truth(&sc, alpha, 0.0, 0.0, 0).unwrap();
        for i in 0..cfg.n {
            for j in 0..cfg.n {
                if i != j {
                    let s = sc.values().get(i, j);
                    assert!((fc.values().get(i, j) - alpha * s).abs() <= alpha.powi(3));
                }
            }
        }
    }

    #[test]
    fn fc_tracks_sc() {
        let cfg = SynthConfig::default();
        for s in 0..100 {
            let sc = gen_sc(&cfg, (s % 2) as usize, s).unwrap();
            let fc = sc_to_fc_ground_truth(&sc, 1.0, 0.2, 0.05, s).unwrap();
            let r = pearson(fc.values().as_slice(), sc.values().as_slice());
            assert!(r > 0.5, "subject {s}: {r}");
        }
    }

    #[test]
    fn fc_requires_sc_input() {
        let cfg = SynthConfig::default();
        let sc = gen_sc(&cfg, 0, 0).unwrap();
        let fc = sc_to_fc_ground_truth(&sc, 1.0, 0.0, 0.0, 0).unwrap();
        assert!(matches!(
            sc_to_fc_ground_truth(&fc, 1.0, 0.0, 0.0, 0),
            Err(Error::DomainMismatch { .. })
        ));
    }

    #[test]
    fn split_is_stratified() {
        let cfg = SynthConfig {
            n: 16,
            ..SynthConfig::default()
        };
        let subjects = gen_subjects(&cfg).unwrap();
        assert_eq!(subjects.len(), 100);
        for class in 0..2 {
            let test = subjects.iter().filter(|s| s.class == class && s.split == Split::Test).count();
            let train = subjects.iter().filter(|s| s.class == class && s.split == Split::Train).count();
            assert_eq!((train, test), (40, 10));
        }
    }
}
