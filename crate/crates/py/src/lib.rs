use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use sfcgan::checkpoint::ModelCheckpoint;
use sfcgan::connectome::{BinaryGraph, Connectome, Domain, Matrix};
use sfcgan::eval::{matrix_similarity, modularity};
use sfcgan::synth::{gen_dataset, SynthConfig};

fn py_err(e: sfcgan::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyIOError::new_err(e.to_string())
    }
}

fn domain(name: &str) -> PyResult<Domain> {
    match name {
        "fc" => Ok(Domain::Fc),
        "sc" => Ok(Domain::Sc),
        other => Err(PyValueError::new_err(format!("domain must be \"fc\" or \"sc\", got {other:?}"))),
    }
}

/// A trained checkpoint holding both generators.
#[pyclass(frozen)]
struct Model {
    ckpt: ModelCheckpoint,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Model {
            ckpt: ModelCheckpoint::load(&path).map_err(py_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.ckpt.model_config().n
    }

    #[getter]
    fn epoch(&self) -> usize {
        self.ckpt.epoch
    }

    /// Translates a connectome of domain `source` ("fc" or "sc") into the
    /// other domain; rows in, rows out.
    fn translate(&self, py: Python<'_>, matrix: Vec<Vec<f64>>, source: &str) -> PyResult<Vec<Vec<f64>>> {
        let source = domain(source)?;
        let values = Matrix::from_rows(&matrix).map_err(py_err)?;
        let x = Connectome::new(source, values, "input", None).map_err(py_err)?;
        let g = match source {
            Domain::Fc => &self.ckpt.models.g_sc,
            Domain::Sc => &self.ckpt.models.g_fc,
        };
        let y = py.detach(|| g.translate(&x)).map_err(py_err)?;
        Ok(y.values().to_rows())
    }
}

/// Writes a synthetic paired dataset to `out_dir`; returns the subject count.
#[pyfunction]
#[pyo3(signature = (out_dir, n = 32, subjects_per_class = 50, seed = 0))]
fn synthesize(py: Python<'_>, out_dir: PathBuf, n: usize, subjects_per_class: usize, seed: u64) -> PyResult<usize> {
    let cfg = SynthConfig {
        n,
        subjects_per_class,
        seed,
        ..SynthConfig::default()
    };
    let manifest = py.detach(|| gen_dataset(&cfg, &out_dir)).map_err(py_err)?;
    Ok(manifest.subjects.len())
}

/// MSE, MAE, SSIM, Pearson and cosine (the last three in percent).
#[pyfunction]
fn similarity(truth: Vec<Vec<f64>>, pred: Vec<Vec<f64>>, domain_name: &str) -> PyResult<(f64, f64, f64, f64, f64)> {
    let t = Matrix::from_rows(&truth).map_err(py_err)?;
    let p = Matrix::from_rows(&pred).map_err(py_err)?;
    let m = matrix_similarity(&t, &p, domain(domain_name)?).map_err(py_err)?;
    Ok((m.mse, m.mae, m.ssim, m.pearson, m.cosine))
}

/// Greedy modularity of an undirected graph: (Q, community label per node).
#[pyfunction(name = "modularity")]
fn graph_modularity(n: usize, edges: Vec<(usize, usize)>) -> PyResult<(f64, Vec<usize>)> {
    let g = BinaryGraph::from_edges(n, &edges).map_err(py_err)?;
    let (q, p) = modularity(&g).map_err(py_err)?;
    Ok((q, p.labels))
}

#[pymodule]
#[pyo3(name = "sfcgan")]
fn sfcgan_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(similarity, m)?)?;
    m.add_function(wrap_pyfunction!(graph_modularity, m)?)?;
    Ok(())
}
