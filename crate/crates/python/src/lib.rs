//! Python bindings: CD arithmetic, small in-memory networks, the synthetic
//! generator and the command-line entry point.

use ::disruptr::bias;
use ::disruptr::cd_engine::{self, CdRecord, Counts, Window};
use ::disruptr::corpus::{Anchor, CitationNetwork as CoreNetwork, NodeSpec, Source};
use ::disruptr::synth::{self, SynthParams};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_anchor(anchor: &str) -> PyResult<Anchor> {
    match anchor {
        "publication" => Ok(Anchor::Publication),
        "filing" => Ok(Anchor::Filing),
        other => Err(value_err(format!("unknown anchor `{other}`"))),
    }
}

/// CD index from citer counts; `None` when there are no citers.
#[pyfunction]
fn cd_value(n_f: i64, n_c: i64, n_p: i64) -> PyResult<Option<f64>> {
    cd_engine::cd_value(n_f, n_c, n_p).map_err(value_err)
}

fn record(source: Source, counts: (u64, u64, u64)) -> CdRecord {
    let c = Counts::new(counts.0, counts.1, counts.2);
    CdRecord {
        family_id: String::new(),
        source,
        n_f: c.n_f,
        n_c: c.n_c,
        n_p: c.n_p,
        n_backward: 0,
        cd: c.cd(),
        window_years: 5,
        anchor: Anchor::Publication,
    }
}

/// Restricted minus extended CD for `(n_f, n_c, n_p)` triples.
#[pyfunction]
fn delta_cd(restricted: (u64, u64, u64), extended: (u64, u64, u64)) -> PyResult<Option<f64>> {
    bias::delta_cd(&record(Source::Restricted, restricted), &record(Source::Extended, extended)).map_err(value_err)
}

/// Effect of moving `delta` combined citers to either single-sided bucket.
#[pyfunction]
fn multiplier_check<'py>(py: Python<'py>, n_f: u64, n_c: u64, n_p: u64, delta: u64) -> PyResult<Bound<'py, PyDict>> {
    let a = bias::multiplier_check(Counts::new(n_f, n_c, n_p), delta).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("base_cd", a.base_cd)?;
    d.set_item("cd_c_to_f", a.cd_c_to_f)?;
    d.set_item("cd_c_to_p", a.cd_c_to_p)?;
    d.set_item("delta_cd_c_to_f", a.delta_cd_c_to_f)?;
    d.set_item("delta_cd_c_to_p", a.delta_cd_c_to_p)?;
    d.set_item("numerator_change_c_to_f", a.numerator_change_c_to_f)?;
    d.set_item("numerator_change_c_to_p", a.numerator_change_c_to_p)?;
    d.set_item("denominator", a.denominator)?;
    Ok(d)
}

/// Family-level citation network.
#[pyclass(name = "Network", frozen)]
struct Network {
    inner: CoreNetwork,
}

#[pymethods]
impl Network {
    /// `nodes` holds `(family_id, pub_year, filing_year)`; `edges` holds
    /// `(citing, cited)` family ids.
    #[new]
    #[pyo3(signature = (nodes, edges, restricted = false))]
    fn new(nodes: Vec<(String, i32, Option<i32>)>, edges: Vec<(String, String)>, restricted: bool) -> PyResult<Self> {
        let source = if restricted { Source::Restricted } else { Source::Extended };
        let specs = nodes.into_iter().map(|(family_id, pub_year, filing_year)| NodeSpec {
            family_id,
            pub_year,
            filing_year,
        });
        let inner = CoreNetwork::from_family_edges(source, specs, &edges).map_err(value_err)?;
        Ok(Network { inner })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn edges(&self) -> Vec<(String, String)> {
        self.inner.edge_ids()
    }

    /// `(n_f, n_c, n_p)` for `focal`.
    #[pyo3(signature = (focal, window = 5, anchor = "publication", strict_start = false))]
    fn counts(&self, focal: &str, window: u32, anchor: &str, strict_start: bool) -> PyResult<(u64, u64, u64)> {
        let w = Window {
            anchor: parse_anchor(anchor)?,
            years: window,
            strict_start,
        };
        let c = cd_engine::count_components(&self.inner, focal, &w).map_err(value_err)?;
        Ok((c.n_f, c.n_c, c.n_p))
    }

    #[pyo3(signature = (focal, window = 5, anchor = "publication", strict_start = false))]
    fn cd(&self, focal: &str, window: u32, anchor: &str, strict_start: bool) -> PyResult<Option<f64>> {
        let (f, c, p) = self.counts(focal, window, anchor, strict_start)?;
        Ok(Counts::new(f, c, p).cd())
    }

    fn __repr__(&self) -> String {
        format!("Network(nodes={}, edges={})", self.inner.node_count(), self.inner.edge_count())
    }
}

/// Generates a synthetic corpus and writes it to `out`. Returns the
/// written paths.
#[pyfunction]
#[pyo3(signature = (out, seed = 0, preset = "mirage", families = None))]
fn simulate(out: &str, seed: u64, preset: &str, families: Option<u64>) -> PyResult<Vec<String>> {
    let mut params = match preset {
        "mirage" => SynthParams::mirage(),
        "symmetric" => SynthParams::symmetric(),
        "no-truncation" => SynthParams::no_truncation(),
        other => return Err(value_err(format!("unknown preset `{other}`"))),
    };
    if let Some(n) = families {
        params = params.with_total_families(n);
    }
    let corpus = synth::generate(&params, seed).map_err(value_err)?;
    let paths = corpus.write(out).map_err(value_err)?;
    Ok(paths.into_iter().map(|p| p.display().to_string()).collect())
}

/// Runs the command line with `args` (without the program name) and
/// returns the exit code.
#[pyfunction]
fn run(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("disruptr".to_string()).chain(args).collect();
    py.detach(|| ::disruptr::cli::run(argv))
}

#[pymodule]
fn disruptr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(cd_value, m)?)?;
    m.add_function(wrap_pyfunction!(delta_cd, m)?)?;
    m.add_function(wrap_pyfunction!(multiplier_check, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_class::<Network>()?;
    Ok(())
}
