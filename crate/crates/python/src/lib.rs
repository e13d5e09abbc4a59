//! Python bindings: field arithmetic, the repairable code, and the simulator.
//!
//! Fragments cross the boundary as `bytes` in the same self-describing format
//! the CLI writes to disk, so they can be saved and reloaded freely.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use hsrc::codec::{self, read_fragment, write_fragment};
use hsrc::combinatorics::{build_triplets, enumerate_bases};
use hsrc::sim::{self, AvailabilityModel, ExperimentConfig, SynthSpec, TraceSource};
use hsrc::{CodeParams, DataObject, FieldElement, PolicyConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// GF(2^m) with elements given as integers.
#[pyclass(frozen)]
struct Field {
    inner: hsrc::Field,
}

impl Field {
    fn el(&self, v: u64) -> PyResult<FieldElement> {
        self.inner.element(v).map_err(value_err)
    }
}

#[pymethods]
impl Field {
    #[new]
    #[pyo3(signature = (m, modulus = None))]
    fn new(m: u32, modulus: Option<u64>) -> PyResult<Self> {
        let inner = match modulus {
            Some(p) => hsrc::Field::new(m, p),
            None => hsrc::Field::with_default_modulus(m),
        }
        .map_err(value_err)?;
        Ok(Field { inner })
    }

    #[getter]
    fn m(&self) -> u32 {
        self.inner.degree()
    }

    #[getter]
    fn modulus(&self) -> u64 {
        self.inner.modulus()
    }

    fn add(&self, a: u64, b: u64) -> PyResult<u64> {
        Ok(hsrc::gf::add(self.el(a)?, self.el(b)?).bits() as u64)
    }

    fn mul(&self, a: u64, b: u64) -> PyResult<u64> {
        Ok(self.inner.mul(self.el(a)?, self.el(b)?).bits() as u64)
    }

    fn square(&self, a: u64) -> PyResult<u64> {
        Ok(self.inner.square(self.el(a)?).bits() as u64)
    }

    fn pow(&self, a: u64, e: u64) -> PyResult<u64> {
        Ok(self.inner.pow(self.el(a)?, e).bits() as u64)
    }

    fn inv(&self, a: u64) -> PyResult<u64> {
        let x = self.inner.inv(self.el(a)?).ok_or_else(|| PyValueError::new_err("zero has no inverse"))?;
        Ok(x.bits() as u64)
    }

    fn __repr__(&self) -> String {
        format!("Field(m={}, modulus={:#x})", self.inner.degree(), self.inner.modulus())
    }
}

/// An `<n, k>` code over GF(2^m).
#[pyclass(frozen)]
struct Code {
    params: CodeParams,
}

#[pymethods]
impl Code {
    #[new]
    #[pyo3(signature = (n, k, m = 8, modulus = None))]
    fn new(n: usize, k: usize, m: u32, modulus: Option<u64>) -> PyResult<Self> {
        let params = match modulus {
            Some(p) => CodeParams::with_field(n, k, Arc::new(hsrc::Field::new(m, p).map_err(value_err)?)),
            None => CodeParams::new(n, k, m),
        }
        .map_err(value_err)?;
        Ok(Code { params })
    }

    #[getter]
    fn n(&self) -> usize {
        self.params.n()
    }

    #[getter]
    fn k(&self) -> usize {
        self.params.k()
    }

    #[getter]
    fn m(&self) -> u32 {
        self.params.m()
    }

    /// Encode `data` into `n` fragments, returned in node order 1..=n.
    fn encode<'py>(&self, py: Python<'py>, data: &[u8]) -> PyResult<Vec<Bound<'py, PyBytes>>> {
        let set = codec::encode(&DataObject::from_bytes(data.to_vec()), &self.params).map_err(value_err)?;
        set.fragments
            .iter()
            .map(|f| {
                let mut buf = Vec::new();
                write_fragment(&mut buf, f, &self.params).map_err(value_err)?;
                Ok(PyBytes::new(py, &buf))
            })
            .collect()
    }

    /// Recover the object from fragments whose evaluation points span the code.
    fn decode<'py>(&self, py: Python<'py>, fragments: Vec<Vec<u8>>) -> PyResult<Bound<'py, PyBytes>> {
        let frags = fragments
            .iter()
            .map(|b| read_fragment(b.as_slice()).map(|(_, f)| f).map_err(value_err))
            .collect::<PyResult<Vec<_>>>()?;
        let obj = codec::decode(&frags, &self.params).map_err(value_err)?;
        Ok(PyBytes::new(py, obj.bytes()))
    }

    /// Regenerate node `target`'s fragment from two others by xor.
    fn repair<'py>(&self, py: Python<'py>, a: &[u8], b: &[u8], target: usize) -> PyResult<Bound<'py, PyBytes>> {
        let (_, fa) = read_fragment(a).map_err(value_err)?;
        let (_, fb) = read_fragment(b).map_err(value_err)?;
        let out = codec::repair(&fa, &fb, target, &self.params).map_err(value_err)?;
        let mut buf = Vec::new();
        write_fragment(&mut buf, &out, &self.params).map_err(value_err)?;
        Ok(PyBytes::new(py, &buf))
    }

    /// Every repair triplet `(i, j, k)`: nodes i and j regenerate k.
    fn triplets(&self) -> Vec<(usize, usize, usize)> {
        build_triplets(&self.params).all().iter().map(|t| (t.src_a, t.src_b, t.dst)).collect()
    }

    /// Every k-subset of nodes that can decode, in lexicographic order.
    fn bases(&self) -> Vec<Vec<usize>> {
        enumerate_bases(&self.params).into_iter().map(|b| b.members).collect()
    }

    fn __repr__(&self) -> String {
        format!("Code(n={}, k={}, m={})", self.params.n(), self.params.k(), self.params.m())
    }
}

/// Run an experiment described by a JSON config; returns the JSON report.
#[pyfunction]
#[pyo3(signature = (config_json, jobs = None))]
fn run_experiment(py: Python<'_>, config_json: &str, jobs: Option<usize>) -> PyResult<String> {
    let mut config: ExperimentConfig = serde_json::from_str(config_json).map_err(value_err)?;
    config.jobs = jobs;
    let report = py.detach(|| sim::run_experiment(&config)).map_err(value_err)?;
    serde_json::to_string(&report).map_err(value_err)
}

/// Compare policies against the naive baseline on Bernoulli-q synthetic traces.
#[pyfunction]
#[pyo3(signature = (
    n, k, q, *, m = 8, policies = None, runs = 20, steps = 120, tau = 3600.0, seed = 0,
    up_bps = (20e3, 200e3), down_multiplier = 4.0, source_up_bps = None, jobs = None,
))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    n: usize,
    k: usize,
    q: f64,
    m: u32,
    policies: Option<Vec<String>>,
    runs: usize,
    steps: usize,
    tau: f64,
    seed: u64,
    up_bps: (f64, f64),
    down_multiplier: f64,
    source_up_bps: Option<f64>,
    jobs: Option<usize>,
) -> PyResult<String> {
    let policies = match policies {
        Some(names) => names.iter().map(|s| s.parse().map_err(value_err)).collect::<PyResult<Vec<PolicyConfig>>>()?,
        None => PolicyConfig::named().to_vec(),
    };
    let config = ExperimentConfig {
        n,
        k,
        m,
        policies,
        trace: TraceSource::Synthetic(SynthSpec {
            n,
            steps,
            tau,
            model: AvailabilityModel::Bernoulli { q },
            up_bps,
            down_multiplier,
            source_up_bps: source_up_bps.unwrap_or(up_bps.1),
            source_churn: false,
        }),
        runs,
        steps,
        tau,
        seed,
        jobs,
    };
    let report = py.detach(|| sim::run_experiment(&config)).map_err(value_err)?;
    serde_json::to_string(&report).map_err(value_err)
}

#[pymodule]
fn hsrc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Field>()?;
    m.add_class::<Code>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
