//! Connectome matrices, CSV/manifest ingestion and the matrix transforms the
//! rest of the toolkit builds on (symmetrization, SC scaling, thresholding,
//! feature vectorization).

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for asymmetry and range checks on ingestion.
pub const INGEST_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Fc,
    Sc,
}

impl Domain {
    pub fn other(self) -> Domain {
        match self {
            Domain::Fc => Domain::Sc,
            Domain::Sc => Domain::Fc,
        }
    }

    pub fn diagonal(self) -> f64 {
        match self {
            Domain::Fc => 1.0,
            Domain::Sc => 0.0,
        }
    }

    /// Closed value range of off-diagonal entries.
    pub fn range(self) -> (f64, f64) {
        match self {
            Domain::Fc => (-1.0, 1.0),
            Domain::Sc => (0.0, 1.0),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Fc => f.write_str("FC"),
            Domain::Sc => f.write_str("SC"),
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fc" => Ok(Domain::Fc),
            "sc" => Ok(Domain::Sc),
            other => Err(Error::InvalidArgument(format!("unknown domain {other:?}"))),
        }
    }
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Shape(format!(
                "{} values cannot form a {n}x{n} matrix",
                data.len()
            )));
        }
        Ok(Matrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NonSquare {
                    rows: n,
                    row: r,
                    cols: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Largest |m[i][j] - m[j][i]| and where it occurs.
    pub fn max_asymmetry(&self) -> (f64, usize, usize) {
        let mut worst = (0.0, 0, 0);
        for i in 0..self.n {
            for j in i + 1..self.n {
                let d = (self.get(i, j) - self.get(j, i)).abs();
                if d > worst.0 {
                    worst = (d, i, j);
                }
            }
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Returns (M + Mᵀ)/2. The result is exactly symmetric because the two
/// mirrored entries are computed from the same commutative sum.
pub fn symmetrize(m: &Matrix) -> Matrix {
    Matrix::from_fn(m.n(), |i, j| (m.get(i, j) + m.get(j, i)) * 0.5)
}

/// Like [`symmetrize`], but takes raw rows and rejects non-square input.
pub fn symmetrize_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    Matrix::from_rows(rows).map(|m| symmetrize(&m))
}

/// A validated FC or SC connectome.
#[derive(Debug, Clone, PartialEq)]
pub struct Connectome {
    domain: Domain,
    subject_id: String,
    label: Option<i64>,
    values: Matrix,
}

impl Connectome {
    /// Wraps `values` after checking every domain invariant exactly.
    pub fn new(
        domain: Domain,
        values: Matrix,
        subject_id: impl Into<String>,
        label: Option<i64>,
    ) -> Result<Self> {
        check_finite(&values)?;
        let (diff, row, col) = values.max_asymmetry();
        if diff > 0.0 {
            return Err(Error::Asymmetric {
                row,
                col,
                max_diff: diff,
                tol: 0.0,
            });
        }
        let (lo, hi) = domain.range();
        let n = values.n();
        for i in 0..n {
            if values.get(i, i) != domain.diagonal() {
                return Err(Error::OutOfRange {
                    domain,
                    row: i,
                    col: i,
                    value: values.get(i, i),
                });
            }
            for j in 0..n {
                let v = values.get(i, j);
                if i != j && !(lo..=hi).contains(&v) {
                    return Err(Error::OutOfRange {
                        domain,
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        Ok(Connectome {
            domain,
            subject_id: subject_id.into(),
            label,
            values,
        })
    }

    /// Ingestion path: tolerates asymmetry and range overshoot up to
    /// [`INGEST_TOL`], then symmetrizes, clamps and forces the diagonal.
    pub fn from_matrix(
        domain: Domain,
        values: Matrix,
        subject_id: impl Into<String>,
        label: Option<i64>,
    ) -> Result<Self> {
        check_finite(&values)?;
        let (diff, row, col) = values.max_asymmetry();
        if diff > INGEST_TOL {
            return Err(Error::Asymmetric {
                row,
                col,
                max_diff: diff,
                tol: INGEST_TOL,
            });
        }
        let (lo, hi) = domain.range();
        let n = values.n();
        for i in 0..n {
            for j in 0..n {
                let v = values.get(i, j);
                if i != j && (v < lo - INGEST_TOL || v > hi + INGEST_TOL) {
                    return Err(Error::OutOfRange {
                        domain,
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        let mut sym = symmetrize(&values);
        for i in 0..n {
            for j in 0..n {
                let v = if i == j {
                    domain.diagonal()
                } else {
                    sym.get(i, j).clamp(lo, hi)
                };
                sym.set(i, j, v);
            }
        }
        Connectome::new(domain, sym, subject_id, label)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn n(&self) -> usize {
        self.values.n()
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn label(&self) -> Option<i64> {
        self.label
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn with_identity(mut self, subject_id: impl Into<String>, label: Option<i64>) -> Self {
        self.subject_id = subject_id.into();
        self.label = label;
        self
    }
}

fn check_finite(m: &Matrix) -> Result<()> {
    let n = m.n();
    for (k, v) in m.as_slice().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: k / n,
                col: k % n,
            });
        }
    }
    Ok(())
}

/// Reads a headerless CSV of numeric rows into a square matrix.
pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                let field = field.trim();
                field.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("line {}: {field:?} is not a number", lineno + 1),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "empty matrix file".into(),
        });
    }
    Matrix::from_rows(&rows)
}

/// Writes a matrix as headerless CSV. Values use the shortest representation
/// that parses back to the identical `f64`.
pub fn write_matrix_csv(m: &Matrix, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut line = String::new();
    for i in 0..m.n() {
        line.clear();
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:?}"));
        }
        line.push('\n');
        out.write_all(line.as_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_connectome(path: &Path, domain: Domain, expected_n: Option<usize>) -> Result<Connectome> {
    let m = read_matrix_csv(path)?;
    if let Some(expected) = expected_n {
        if m.n() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: m.n(),
            });
        }
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Connectome::from_matrix(domain, m, id, None)
}

pub fn save_connectome(c: &Connectome, path: &Path) -> Result<()> {
    write_matrix_csv(c.values(), path)
}

/// Log-scales raw fiber counts into [0, 1]: `ln(1+s) / ln(1+sc_max)`.
/// `sc_max` defaults to the largest entry. Returns the scale actually used.
pub fn normalize_sc(raw: &Matrix, sc_max: Option<f64>) -> Result<(Connectome, f64)> {
    check_finite(raw)?;
    let n = raw.n();
    for i in 0..n {
        for j in 0..n {
            if raw.get(i, j) < 0.0 {
                return Err(Error::OutOfRange {
                    domain: Domain::Sc,
                    row: i,
                    col: j,
                    value: raw.get(i, j),
                });
            }
        }
    }
    let scale = match sc_max {
        Some(s) if s <= 0.0 || !s.is_finite() => {
            return Err(Error::InvalidArgument(format!("sc_max must be positive, got {s}")))
        }
        Some(s) => s,
        None => raw.max_abs(),
    };
    let denom = scale.ln_1p();
    let sym = symmetrize(raw);
    let values = Matrix::from_fn(n, |i, j| {
        if i == j || denom == 0.0 {
            0.0
        } else {
            (sym.get(i, j).ln_1p() / denom).clamp(0.0, 1.0)
        }
    });
    let c = Connectome::new(Domain::Sc, values, "", None)?;
    Ok((c, scale))
}

/// Inverse of [`normalize_sc`]: `exp(s' * ln(1+sc_max)) - 1`.
pub fn denormalize_sc(c: &Connectome, sc_max: f64) -> Result<Matrix> {
    if c.domain() != Domain::Sc {
        return Err(Error::DomainMismatch {
            expected: Domain::Sc,
            found: c.domain(),
        });
    }
    if sc_max <= 0.0 || !sc_max.is_finite() {
        return Err(Error::InvalidArgument(format!("sc_max must be positive, got {sc_max}")));
    }
    let denom = sc_max.ln_1p();
    Ok(c.values().map(|v| (v * denom).exp_m1()))
}

/// Undirected graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryGraph {
    n: usize,
    adjacency: Vec<bool>,
}

impl BinaryGraph {
    pub fn empty(n: usize) -> Self {
        BinaryGraph {
            n,
            adjacency: vec![false; n * n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = BinaryGraph::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) out of bounds for n={n}")));
            }
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at node {i}")));
            }
            g.add_edge(i, j);
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        debug_assert!(i != j);
        self.adjacency[i * self.n + j] = true;
        self.adjacency[j * self.n + i] = true;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    /// Edges as (i, j) with i < j, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).filter(move |&j| self.has_edge(i, j)).map(move |j| (i, j)))
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.has_edge(i, j))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum ThresholdMode {
    /// Keep off-diagonal edges with |w| > τ.
    Absolute(f64),
    /// Keep the ⌊ρ·n(n−1)/2⌋ strongest off-diagonal |w|.
    Proportional(f64),
}

/// Number of edges kept by proportional thresholding on `n` nodes.
pub fn proportional_edge_count(n: usize, rho: f64) -> usize {
    let pairs = n * n.saturating_sub(1) / 2;
    // guard against products like 0.1 * 30 landing a hair below an integer
    ((rho * pairs as f64) + 1e-9).floor() as usize
}

/// Upper-triangle entries ranked by descending magnitude; ties by (i, j).
pub fn ranked_edges(m: &Matrix) -> Vec<(usize, usize, f64)> {
    let n = m.n();
    let mut edges: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, m.get(i, j)))
        .filter(|&(_, _, w)| w != 0.0)
        .collect();
    edges.sort_by(|a, b| {
        b.2.abs()
            .total_cmp(&a.2.abs())
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    edges
}

pub fn threshold_binary(c: &Connectome, mode: ThresholdMode) -> Result<BinaryGraph> {
    let m = c.values();
    let n = m.n();
    let mut g = BinaryGraph::empty(n);
    match mode {
        ThresholdMode::Absolute(tau) => {
            if !(tau >= 0.0) {
                return Err(Error::InvalidArgument(format!("absolute threshold must be >= 0, got {tau}")));
            }
            for i in 0..n {
                for j in i + 1..n {
                    if m.get(i, j).abs() > tau {
                        g.add_edge(i, j);
                    }
                }
            }
        }
        ThresholdMode::Proportional(rho) => {
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(Error::InvalidArgument(format!("proportion must lie in (0, 1], got {rho}")));
            }
            let keep = proportional_edge_count(n, rho);
            for (i, j, _) in ranked_edges(m).into_iter().take(keep) {
                g.add_edge(i, j);
            }
        }
    }
    Ok(g)
}

/// Strict upper triangle in row-major order, length n(n−1)/2.
pub fn vectorize_upper(c: &Connectome) -> Vec<f64> {
    let m = c.values();
    let n = m.n();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        out.extend_from_slice(&m.row(i)[i + 1..]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectEntry {
    pub id: String,
    pub fc: String,
    pub sc: String,
    pub label: i64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub n: usize,
    pub sc_max: f64,
    pub subjects: Vec<SubjectEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

/// One subject's paired connectomes.
#[derive(Debug, Clone)]
pub struct SubjectPair {
    pub id: String,
    pub label: i64,
    pub fc: Connectome,
    pub sc: Connectome,
}

impl DatasetManifest {
    pub fn new(n: usize, sc_max: f64, subjects: Vec<SubjectEntry>, base_dir: impl Into<PathBuf>) -> Self {
        DatasetManifest {
            n,
            sc_max,
            subjects,
            base_dir: base_dir.into(),
        }
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }

    /// (train, test) subject counts.
    pub fn split_counts(&self) -> (usize, usize) {
        let train = self.subjects.iter().filter(|s| s.split == Split::Train).count();
        (train, self.subjects.len() - train)
    }

    pub fn entries(&self, split: Split) -> impl Iterator<Item = &SubjectEntry> {
        self.subjects.iter().filter(move |s| s.split == split)
    }

    /// Loads one subject. SC files holding raw counts (any entry above 1) are
    /// log-scaled with the manifest's `sc_max`.
    pub fn load_pair(&self, entry: &SubjectEntry) -> Result<SubjectPair> {
        let fc = load_connectome(&self.resolve(&entry.fc), Domain::Fc, Some(self.n)).map_err(|e| with_subject(e, &entry.id))?;
        let sc_path = self.resolve(&entry.sc);
        let raw = read_matrix_csv(&sc_path)?;
        if raw.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: raw.n(),
            });
        }
        let sc = if raw.max_abs() > 1.0 + INGEST_TOL {
            let (max_diff, row, col) = raw.max_asymmetry();
            if max_diff > INGEST_TOL {
                return Err(Error::Asymmetric {
                    row,
                    col,
                    max_diff,
                    tol: INGEST_TOL,
                });
            }
            normalize_sc(&raw, Some(self.sc_max))?.0
        } else {
            Connectome::from_matrix(Domain::Sc, raw, "", None)?
        };
        Ok(SubjectPair {
            id: entry.id.clone(),
            label: entry.label,
            fc: fc.with_identity(entry.id.clone(), Some(entry.label)),
            sc: sc.with_identity(entry.id.clone(), Some(entry.label)),
        })
    }

    pub fn load_split(&self, split: Split) -> Result<Vec<SubjectPair>> {
        self.entries(split).map(|e| self.load_pair(e)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }
}

fn with_subject(e: Error, id: &str) -> Error {
    match e {
        Error::Io { .. } | Error::Parse { .. } => e,
        other => Error::Manifest(format!("subject {id}: {other}")),
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if manifest.n < 2 {
        return Err(Error::Manifest(format!("n must be at least 2, got {}", manifest.n)));
    }
    if !(manifest.sc_max > 0.0 && manifest.sc_max.is_finite()) {
        return Err(Error::Manifest(format!("sc_max must be positive, got {}", manifest.sc_max)));
    }
    let mut seen = std::collections::HashSet::new();
    for s in &manifest.subjects {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::Manifest(format!("duplicate subject id {:?}", s.id)));
        }
        for rel in [&s.fc, &s.sc] {
            if rel.is_empty() {
                return Err(Error::Manifest(format!("subject {:?} has an empty path", s.id)));
            }
            let p = manifest.resolve(rel);
            if !p.is_file() {
                return Err(Error::Manifest(format!("subject {:?}: missing file {}", s.id, p.display())));
            }
        }
    }
    Ok(manifest)
}
