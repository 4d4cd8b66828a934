//! Per-subject evaluation of both translation directions and the dataset
//! summary (mean ± population standard deviation).

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{apd, graph_properties, GraphProperties};
use super::similarity::{matrix_similarity, SimilarityMetrics};
use crate::checkpoint::ModelCheckpoint;
use crate::connectome::{BinaryGraph, DatasetManifest, Domain, Matrix, Split, SubjectPair};
use crate::error::{Error, Result};
use crate::model::Translate;

/// Absolute binarization thresholds: FC keeps |w| > `fc`, SC keeps w > `sc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub fc: f64,
    pub sc: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig { fc: 0.2, sc: 0.01 }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("fc", self.fc), ("sc", self.sc)] {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("threshold {name} must be >= 0, got {t}")));
            }
        }
        Ok(())
    }

    pub fn for_domain(&self, domain: Domain) -> f64 {
        match domain {
            Domain::Fc => self.fc,
            Domain::Sc => self.sc,
        }
    }
}

/// Off-diagonal entries with |w| > τ become edges.
pub fn binarize(m: &Matrix, tau: f64) -> BinaryGraph {
    let n = m.n();
    let mut g = BinaryGraph::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            if m.get(i, j).abs() > tau {
                g.add_edge(i, j);
            }
        }
    }
    g
}

/// Named by the domain produced: `TranslatedFc` is SC→FC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    TranslatedFc,
    TranslatedSc,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::TranslatedFc, Direction::TranslatedSc];

    pub fn target(self) -> Domain {
        match self {
            Direction::TranslatedFc => Domain::Fc,
            Direction::TranslatedSc => Domain::Sc,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Direction::TranslatedFc => "Translated FC",
            Direction::TranslatedSc => "Translated SC",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::TranslatedFc => "translated_fc",
            Direction::TranslatedSc => "translated_sc",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRow {
    pub subject: String,
    pub direction: Direction,
    pub similarity: SimilarityMetrics,
    pub truth: GraphProperties,
    pub translated: GraphProperties,
    /// density, cpl, efficiency, modularity; `None` when skipped (true value
    /// zero or a property undefined on either graph).
    pub apd: [Option<f64>; 4],
}

impl SubjectRow {
    /// Values in [`COLUMNS`] order.
    pub fn values(&self) -> [Option<f64>; 9] {
        let s = &self.similarity;
        let [a, b, c, d] = self.apd;
        [Some(s.mse), Some(s.mae), Some(s.ssim), Some(s.pearson), Some(s.cosine), a, b, c, d]
    }
}

pub const COLUMNS: [&str; 9] = [
    "mse",
    "mae",
    "ssim",
    "pearson",
    "cosine",
    "apd_density",
    "apd_cpl",
    "apd_efficiency",
    "apd_modularity",
];

/// Columns on the ×100 scale (printed with 2 decimals rather than 4).
fn is_percent(column: usize) -> bool {
    column >= 2
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectFailure {
    pub subject: String,
    pub message: String,
}

/// Mean and population standard deviation of one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    /// Sorted by (direction, subject).
    pub rows: Vec<SubjectRow>,
    pub failures: Vec<SubjectFailure>,
}

impl EvalReport {
    pub fn rows_for(&self, direction: Direction) -> impl Iterator<Item = &SubjectRow> {
        self.rows.iter().filter(move |r| r.direction == direction)
    }

    /// Some row used the single-window SSIM fallback.
    pub fn ssim_global(&self) -> bool {
        self.rows.iter().any(|r| r.similarity.ssim_global)
    }

    /// One summary per column in [`COLUMNS`] order; `None` when no subject
    /// has a value.
    pub fn aggregate(&self, direction: Direction) -> [Option<Summary>; 9] {
        let rows: Vec<[Option<f64>; 9]> = self.rows_for(direction).map(SubjectRow::values).collect();
        std::array::from_fn(|k| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r[k]).collect();
            if vals.is_empty() {
                return None;
            }
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            Some(Summary {
                mean,
                std: var.sqrt(),
                count: vals.len(),
                skipped: rows.len() - vals.len(),
            })
        })
    }

    /// Header, per-subject rows, then `mean` and `std` rows per direction.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let parse = |e: csv::Error| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(parse)?;
        let mut header = vec!["subject", "direction"];
        header.extend(COLUMNS);
        w.write_record(&header).map_err(parse)?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![r.subject.clone(), r.direction.to_string()];
            rec.extend(r.values().map(cell));
            w.write_record(&rec).map_err(parse)?;
        }
        for d in Direction::ALL {
            let agg = self.aggregate(d);
            for (label, pick) in [("mean", (|s: Summary| s.mean) as fn(Summary) -> f64), ("std", |s| s.std)] {
                let mut rec = vec![label.to_string(), d.to_string()];
                rec.extend(agg.iter().map(|s| cell(s.map(pick))));
                w.write_record(&rec).map_err(parse)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// `m ± s` table, one line per direction: raw errors with 4 decimals,
    /// ×100 scores and APDs with 2.
    pub fn summary_table(&self) -> String {
        let mut out = String::from("direction");
        for c in COLUMNS {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for d in Direction::ALL {
            out.push_str(d.title());
            for (k, s) in self.aggregate(d).iter().enumerate() {
                out.push('\t');
                match s {
                    Some(s) if is_percent(k) => out.push_str(&format!("{:.2} ± {:.2}", s.mean, s.std)),
                    Some(s) => out.push_str(&format!("{:.4} ± {:.4}", s.mean, s.std)),
                    None => out.push('-'),
                }
            }
            out.push('\n');
        }
        for f in &self.failures {
            out.push_str(&format!("failed: {}: {}\n", f.subject, f.message));
        }
        out
    }
}

fn evaluate_direction(
    pair: &SubjectPair,
    direction: Direction,
    translator: &dyn Translate,
    thresholds: &ThresholdConfig,
) -> Result<SubjectRow> {
    let (input, truth) = match direction {
        Direction::TranslatedFc => (&pair.sc, &pair.fc),
        Direction::TranslatedSc => (&pair.fc, &pair.sc),
    };
    let domain = direction.target();
    let pred = translator
        .translate_matrices(std::slice::from_ref(input.values()))?
        .pop()
        .ok_or_else(|| Error::Shape("translator returned no output".into()))?;
    let similarity = matrix_similarity(truth.values(), &pred, domain)?;
    let tau = thresholds.for_domain(domain);
    let truth_props = graph_properties(&binarize(truth.values(), tau))?;
    let pred_props = graph_properties(&binarize(&pred, tau))?;
    let t = truth_props.values();
    let p = pred_props.values();
    let apd = std::array::from_fn(|k| match (p[k], t[k]) {
        (Some(p), Some(t)) => apd(p, t),
        _ => None,
    });
    Ok(SubjectRow {
        subject: pair.id.clone(),
        direction,
        similarity,
        truth: truth_props,
        translated: pred_props,
        apd,
    })
}

/// Evaluates `to_fc` (SC→FC) and `to_sc` (FC→SC) on every pair. Failing
/// subjects are recorded and skipped.
pub fn evaluate_pairs(
    pairs: &[SubjectPair],
    to_fc: &(dyn Translate + Sync),
    to_sc: &(dyn Translate + Sync),
    thresholds: &ThresholdConfig,
) -> Result<EvalReport> {
    thresholds.validate()?;
    let results: Vec<Result<SubjectRow, SubjectFailure>> = pairs
        .par_iter()
        .flat_map_iter(|pair| {
            Direction::ALL.into_iter().map(move |d| {
                let t: &dyn Translate = match d {
                    Direction::TranslatedFc => to_fc,
                    Direction::TranslatedSc => to_sc,
                };
                evaluate_direction(pair, d, t, thresholds).map_err(|e| SubjectFailure {
                    subject: pair.id.clone(),
                    message: format!("{d}: {e}"),
                })
            })
        })
        .collect();
    let mut report = EvalReport::default();
    for r in results {
        match r {
            Ok(row) => report.rows.push(row),
            Err(f) => report.failures.push(f),
        }
    }
    report.rows.sort_by(|a, b| a.direction.cmp(&b.direction).then_with(|| a.subject.cmp(&b.subject)));
    report.failures.sort_by(|a, b| a.subject.cmp(&b.subject).then_with(|| a.message.cmp(&b.message)));
    Ok(report)
}

/// Evaluates a checkpoint on the test split of `manifest`. Subjects whose
/// files fail to load are recorded as failures.
pub fn evaluate_dataset(
    manifest: &DatasetManifest,
    ckpt: &ModelCheckpoint,
    thresholds: &ThresholdConfig,
) -> Result<EvalReport> {
    let n = ckpt.model_config().n;
    if n != manifest.n {
        return Err(Error::Shape(format!(
            "checkpoint was built for n = {n}, dataset has n = {}",
            manifest.n
        )));
    }
    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for entry in manifest.entries(Split::Test) {
        match manifest.load_pair(entry) {
            Ok(p) => pairs.push(p),
            Err(e) => failures.push(SubjectFailure {
                subject: entry.id.clone(),
                message: e.to_string(),
            }),
        }
    }
    if pairs.is_empty() && failures.is_empty() {
        return Err(Error::Manifest("test split is empty".into()));
    }
    let mut report = evaluate_pairs(&pairs, &ckpt.models.g_fc, &ckpt.models.g_sc, thresholds)?;
    report.failures.extend(failures);
    report.failures.sort_by(|a, b| a.subject.cmp(&b.subject).then_with(|| a.message.cmp(&b.message)));
    Ok(report)
}
