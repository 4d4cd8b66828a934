//! Linear one-vs-rest SVM on vectorized connectomes and the usual
//! classification metrics (reported ×100).

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::checkpoint::ModelCheckpoint;
use crate::connectome::{DatasetManifest, Matrix, Split, SubjectPair};
use crate::error::{Error, Result};
use crate::model::Translate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    RealFc,
    RealSc,
    RealBoth,
    TranslatedFc,
    TranslatedSc,
    TranslatedBoth,
}

impl FeatureSource {
    pub fn title(self) -> &'static str {
        match self {
            FeatureSource::RealFc => "Real FC",
            FeatureSource::RealSc => "Real SC",
            FeatureSource::RealBoth => "Real FC and SC",
            FeatureSource::TranslatedFc => "Translated FC",
            FeatureSource::TranslatedSc => "Translated SC",
            FeatureSource::TranslatedBoth => "Translated FC and SC",
        }
    }

    pub fn is_translated(self) -> bool {
        matches!(
            self,
            FeatureSource::TranslatedFc | FeatureSource::TranslatedSc | FeatureSource::TranslatedBoth
        )
    }

    /// (uses FC, uses SC)
    fn modalities(self) -> (bool, bool) {
        match self {
            FeatureSource::RealFc | FeatureSource::TranslatedFc => (true, false),
            FeatureSource::RealSc | FeatureSource::TranslatedSc => (false, true),
            FeatureSource::RealBoth | FeatureSource::TranslatedBoth => (true, true),
        }
    }
}

impl fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSource::RealFc => "real_fc",
            FeatureSource::RealSc => "real_sc",
            FeatureSource::RealBoth => "real_both",
            FeatureSource::TranslatedFc => "translated_fc",
            FeatureSource::TranslatedSc => "translated_sc",
            FeatureSource::TranslatedBoth => "translated_both",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<i64>,
    pub source: FeatureSource,
}

impl FeatureSet {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<i64>, source: FeatureSource) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("feature set has no samples".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature rows for {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let dim = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Ok(FeatureSet { rows, labels, source })
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn upper(m: &Matrix) -> Vec<f64> {
    let n = m.n();
    (0..n).flat_map(|i| m.row(i)[i + 1..].to_vec()).collect()
}

/// Upper-triangle features per subject. Translated sources map real SC
/// through `to_fc` and real FC through `to_sc`.
pub fn build_features(
    pairs: &[SubjectPair],
    source: FeatureSource,
    translators: Option<(&dyn Translate, &dyn Translate)>,
) -> Result<FeatureSet> {
    let (use_fc, use_sc) = source.modalities();
    let real_fc: Vec<Matrix> = pairs.iter().map(|p| p.fc.values().clone()).collect();
    let real_sc: Vec<Matrix> = pairs.iter().map(|p| p.sc.values().clone()).collect();
    let (fc, sc) = if source.is_translated() {
        let (to_fc, to_sc) = translators.ok_or_else(|| {
            Error::InvalidArgument(format!("{source} features need a trained model"))
        })?;
        let fc = if use_fc { to_fc.translate_matrices(&real_sc)? } else { Vec::new() };
        let sc = if use_sc { to_sc.translate_matrices(&real_fc)? } else { Vec::new() };
        (fc, sc)
    } else {
        (real_fc, real_sc)
    };
    let rows = (0..pairs.len())
        .map(|i| {
            let mut r = Vec::new();
            if use_fc {
                r.extend(upper(&fc[i]));
            }
            if use_sc {
                r.extend(upper(&sc[i]));
            }
            r
        })
        .collect();
    FeatureSet::new(rows, pairs.iter().map(|p| p.label).collect(), source)
}

/// Per-feature z-scoring with training statistics (population std; constant
/// features keep scale 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c: f64,
    pub max_iter: usize,
    /// Stop once the objective changes by less than this, relatively.
    pub tol: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            max_iter: 10_000,
            tol: 1e-4,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("SVM c must be positive, got {}", self.c)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("SVM max_iter must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("SVM tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// One-vs-rest linear classifiers over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    /// Sorted class labels; index k owns `weights[k]`, `bias[k]`.
    pub classes: Vec<i64>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub standardizer: Standardizer,
}

/// Regularized hinge objective λ/2‖w‖² + mean(max(0, 1 − y(w·x + b))), with
/// the bias regularized like a weight on a constant feature.
fn objective(lambda: f64, w: &[f64], b: f64, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let reg = 0.5 * lambda * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y * (dot(w, x) + b)).max(0.0))
        .sum();
    reg + hinge / xs.len() as f64
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Full-batch Pegasos subgradient descent from zero weights (step 1/(λt),
/// λ = 1/(C·N)); returns the iterate with the lowest objective.
fn train_binary(xs: &[Vec<f64>], ys: &[f64], cfg: &SvmConfig) -> (Vec<f64>, f64) {
    let n = xs.len() as f64;
    let d = xs[0].len();
    let lambda = 1.0 / (cfg.c * n);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut prev = objective(lambda, &w, b, xs, ys);
    let mut best = (w.clone(), b, prev);
    let radius = 1.0 / lambda.sqrt();
    for t in 1..=cfg.max_iter {
        let eta = 1.0 / (lambda * t as f64);
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            if y * (dot(&w, x) + b) < 1.0 {
                for (g, v) in gw.iter_mut().zip(x) {
                    *g += y * v;
                }
                gb += y;
            }
        }
        let shrink = 1.0 - eta * lambda;
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi = shrink * *wi + eta * g / n;
        }
        b = shrink * b + eta * gb / n;
        let norm = (w.iter().map(|v| v * v).sum::<f64>() + b * b).sqrt();
        if norm > radius {
            let s = radius / norm;
            w.iter_mut().for_each(|v| *v *= s);
            b *= s;
        }
        let obj = objective(lambda, &w, b, xs, ys);
        if obj < best.2 {
            best = (w.clone(), b, obj);
        }
        if (prev - obj).abs() <= cfg.tol * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        prev = obj;
    }
    (best.0, best.1)
}

pub fn train_linear_svm(train: &FeatureSet, cfg: &SvmConfig) -> Result<LinearSvm> {
    cfg.validate()?;
    let mut classes = train.labels.clone();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "training labels contain a single class ({})",
            classes[0]
        )));
    }
    let standardizer = Standardizer::fit(&train.rows);
    let xs: Vec<Vec<f64>> = train.rows.iter().map(|r| standardizer.apply(r)).collect();
    let (weights, bias) = classes
        .iter()
        .map(|&c| {
            let ys: Vec<f64> = train.labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            train_binary(&xs, &ys, cfg)
        })
        .unzip();
    Ok(LinearSvm {
        classes,
        weights,
        bias,
        standardizer,
    })
}

impl LinearSvm {
    /// Decision score of every class for one raw feature vector.
    pub fn scores(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.standardizer.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.standardizer.mean.len(),
                found: row.len(),
            });
        }
        let z = self.standardizer.apply(row);
        Ok(self.weights.iter().zip(&self.bias).map(|(w, b)| dot(w, &z) + b).collect())
    }

    /// Predicted labels (argmax score, ties to the smaller class index) and
    /// per-class scores.
    pub fn predict_scores(&self, test: &FeatureSet) -> Result<(Vec<i64>, Vec<Vec<f64>>)> {
        let scores = test.rows.iter().map(|r| self.scores(r)).collect::<Result<Vec<_>>>()?;
        let labels = scores.iter().map(|s| self.classes[argmax(s)]).collect();
        Ok((labels, scores))
    }
}

fn argmax(s: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in s.iter().enumerate().skip(1) {
        if v > s[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
}

/// Area under the ROC curve with tied scores joined by a straight segment
/// (equivalently, the Mann–Whitney statistic counting ties as ½).
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let pos = positive.iter().filter(|&&p| p).count();
    let neg = positive.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let (tp0, fp0) = (tp, fp);
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
    }
    Some(area / (pos * neg) as f64)
}

/// `scores[i][k]` is the decision score of `classes[k]` for sample i. With two
/// classes AUC uses the margin `s₁ − s₀`; otherwise it is the macro average of
/// per-class one-vs-rest AUCs over classes present in `truth`.
pub fn classification_metrics(
    pred: &[i64],
    scores: &[Vec<f64>],
    truth: &[i64],
    classes: &[i64],
) -> Result<ClassifierMetrics> {
    if truth.is_empty() {
        return Err(Error::InvalidArgument("no samples to score".into()));
    }
    if pred.len() != truth.len() || scores.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions and {} score rows for {} labels",
            pred.len(),
            scores.len(),
            truth.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| s.len() != classes.len()) {
        return Err(Error::DimensionMismatch {
            expected: classes.len(),
            found: bad.len(),
        });
    }
    let total = truth.len() as f64;
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();

    let mut labels: Vec<i64> = truth.iter().chain(pred).copied().collect();
    labels.sort_unstable();
    labels.dedup();
    let (mut precision, mut recall, mut f1) = (0.0, 0.0, 0.0);
    for &c in &labels {
        let support = truth.iter().filter(|&&t| t == c).count();
        if support == 0 {
            continue;
        }
        let tp = pred.iter().zip(truth).filter(|&(&p, &t)| p == c && t == c).count() as f64;
        let predicted = pred.iter().filter(|&&p| p == c).count() as f64;
        let p = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let r = tp / support as f64;
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        let w = support as f64 / total;
        precision += w * p;
        recall += w * r;
        f1 += w * f;
    }

    let auc = if classes.len() == 2 {
        let margin: Vec<f64> = scores.iter().map(|s| s[1] - s[0]).collect();
        let positive: Vec<bool> = truth.iter().map(|&t| t == classes[1]).collect();
        roc_auc(&margin, &positive)
    } else {
        let per: Vec<f64> = classes
            .iter()
            .enumerate()
            .filter_map(|(k, &c)| {
                let s: Vec<f64> = scores.iter().map(|s| s[k]).collect();
                let positive: Vec<bool> = truth.iter().map(|&t| t == c).collect();
                roc_auc(&s, &positive)
            })
            .collect();
        (!per.is_empty()).then(|| per.iter().sum::<f64>() / per.len() as f64)
    }
    .ok_or_else(|| Error::InvalidArgument("AUC needs both positive and negative samples".into()))?;

    Ok(ClassifierMetrics {
        accuracy: 100.0 * correct as f64 / total,
        precision: 100.0 * precision,
        recall: 100.0 * recall,
        f1: 100.0 * f1,
        auc: 100.0 * auc,
    })
}

pub fn evaluate_svm(train: &FeatureSet, test: &FeatureSet, cfg: &SvmConfig) -> Result<ClassifierMetrics> {
    let svm = train_linear_svm(train, cfg)?;
    let (pred, scores) = svm.predict_scores(test)?;
    classification_metrics(&pred, &scores, &test.labels, &svm.classes)
}

/// One line of the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub classifier: String,
    pub dataset: String,
    pub testing_data: String,
    pub metrics: ClassifierMetrics,
}

pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let parse = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(parse)?;
    w.write_record(["classifier", "dataset", "testing_data", "accuracy", "precision", "recall", "f1", "auc"])
        .map_err(parse)?;
    for r in rows {
        let m = &r.metrics;
        let mut rec = vec![r.classifier.clone(), r.dataset.clone(), r.testing_data.clone()];
        rec.extend([m.accuracy, m.precision, m.recall, m.f1, m.auc].map(|v| format!("{v:.2}")));
        w.write_record(&rec).map_err(parse)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Trains on real train-split features of each modality and tests on the
/// real and the translated test split.
pub fn classification_study(
    manifest: &DatasetManifest,
    ckpt: &ModelCheckpoint,
    dataset: &str,
    cfg: &SvmConfig,
) -> Result<Vec<MetricsRow>> {
    if ckpt.model_config().n != manifest.n {
        return Err(Error::Shape(format!(
            "checkpoint was built for n = {}, dataset has n = {}",
            ckpt.model_config().n,
            manifest.n
        )));
    }
    let train = manifest.load_split(Split::Train)?;
    let test = manifest.load_split(Split::Test)?;
    let translators: (&dyn Translate, &dyn Translate) = (&ckpt.models.g_fc, &ckpt.models.g_sc);
    let mut rows = Vec::new();
    for (real, translated) in [
        (FeatureSource::RealFc, FeatureSource::TranslatedFc),
        (FeatureSource::RealSc, FeatureSource::TranslatedSc),
        (FeatureSource::RealBoth, FeatureSource::TranslatedBoth),
    ] {
        let svm = train_linear_svm(&build_features(&train, real, None)?, cfg)?;
        for source in [real, translated] {
            let test_set = build_features(&test, source, Some(translators))?;
            let (pred, scores) = svm.predict_scores(&test_set)?;
            rows.push(MetricsRow {
                classifier: "linear_svm".into(),
                dataset: dataset.into(),
                testing_data: source.title().into(),
                metrics: classification_metrics(&pred, &scores, &test_set.labels, &svm.classes)?,
            });
        }
    }
    Ok(rows)
}
