//! Python module `difftree_py`: frames, trees, adjustment and sequential runs.
//!
//! Long computations release the interpreter lock; reports cross the
//! boundary as JSON text.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use difftree::adjust::{self, Estimator, NullOptions, NullProvenance, NullSample, Statistic};
use difftree::data::load_csv;
use difftree::sequential::{self, NullSource, SequentialOptions, WindowPlan};
use difftree::{AtomicModel, CountMatrix, FrameConfig, GrowConfig, PruneRule};

fn err(e: difftree::Error) -> PyErr {
    match e {
        difftree::Error::Io { .. } | difftree::Error::Csv(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn statistic(raw_p: bool) -> Statistic {
    if raw_p {
        Statistic::Raw
    } else {
        Statistic::Bonferroni
    }
}

/// Grouped event table loaded from CSV under a TOML schema.
#[pyclass(frozen)]
struct Frame {
    inner: difftree::Frame,
}

#[pymethods]
impl Frame {
    /// `paths`: one file per group unless the schema groups rows itself.
    #[staticmethod]
    fn load(paths: Vec<String>, schema_toml: &str) -> PyResult<Self> {
        let config = FrameConfig::from_toml_str(schema_toml).map_err(err)?;
        let inner = load_csv(&paths, &config).map_err(err)?;
        Ok(Frame { inner })
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn group_labels(&self) -> Vec<String> {
        self.inner.group_labels().to_vec()
    }

    #[getter]
    fn group_sizes(&self) -> Vec<usize> {
        self.inner.group_sizes()
    }

    fn __repr__(&self) -> String {
        format!(
            "Frame(rows={}, groups={:?})",
            self.inner.n_rows(),
            self.inner.group_labels()
        )
    }
}

/// Tree growing parameters; defaults as in the library.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Config {
    inner: GrowConfig,
}

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (min_child=None, gamma=2.0, p_cut=1e-6, prune="pmin", alpha=None, exposures=None, multinomial=false))]
    fn new(
        min_child: Option<usize>,
        gamma: f64,
        p_cut: f64,
        prune: &str,
        alpha: Option<f64>,
        exposures: Option<Vec<f64>>,
        multinomial: bool,
    ) -> PyResult<Self> {
        let model = match (exposures, multinomial) {
            (Some(_), true) => {
                return Err(PyValueError::new_err(
                    "exposures and multinomial are exclusive",
                ))
            }
            (Some(e), false) => AtomicModel::Exposure { exposures: e },
            (None, true) => AtomicModel::Multinomial,
            (None, false) => AtomicModel::Poisson,
        };
        let inner = GrowConfig {
            min_child_total: min_child,
            gamma,
            p_cut,
            alpha,
            prune_rule: prune.parse::<PruneRule>().map_err(err)?,
            model,
            ..GrowConfig::default()
        };
        inner.validate().map_err(err)?;
        Ok(Config { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("config serializes")
    }
}

fn config_or_default(config: Option<Config>) -> GrowConfig {
    config.map(|c| c.inner).unwrap_or_default()
}

/// A grown and pruned tree.
#[pyclass(frozen)]
struct Tree {
    inner: difftree::DiffTree,
}

#[pymethods]
impl Tree {
    #[getter]
    fn min_p(&self) -> f64 {
        self.inner.min_p()
    }

    /// Number of candidate splits examined (`m`).
    #[getter]
    fn test_count(&self) -> u64 {
        self.inner.test_count
    }

    #[getter]
    fn p_bonferroni(&self) -> f64 {
        adjust::bonferroni(self.inner.min_p(), self.inner.test_count)
    }

    fn render(&self) -> String {
        self.inner.render_text()
    }

    fn to_json(&self) -> String {
        self.inner.report().to_json()
    }

    /// Counts per dataset at the most significant terminal node.
    fn top_counts(&self) -> Vec<Vec<u64>> {
        self.inner.top_pattern().counts.by_dataset()
    }
}

#[pyfunction]
#[pyo3(signature = (frame, config=None))]
fn grow(py: Python<'_>, frame: &Frame, config: Option<Config>) -> PyResult<Tree> {
    let config = config_or_default(config);
    let f = frame.inner.clone();
    let inner = py
        .detach(move || difftree::tree::grow(&f, &config))
        .map_err(err)?;
    Ok(Tree { inner })
}

/// Poisson homogeneity test of a levels x datasets table: `(W, dof, p)`.
#[pyfunction]
fn poisson_homogeneity(counts: Vec<Vec<u64>>) -> PyResult<(f64, u32, f64)> {
    let m = CountMatrix::from_rows(&counts).map_err(err)?;
    let t = difftree::stats::poisson_homogeneity(&m).map_err(err)?;
    Ok((t.statistic, t.dof, t.p))
}

#[pyfunction]
fn chisq_sf(x: f64, dof: u32) -> PyResult<f64> {
    Ok(difftree::chisq_sf(x, dof).map_err(err)?.p)
}

#[pyfunction]
fn bonferroni(p: f64, m: u64) -> f64 {
    adjust::bonferroni(p, m)
}

/// Permutation-adjusted p-value of `p` against null values.
#[pyfunction]
fn interpolate(p: f64, null: Vec<f64>) -> PyResult<f64> {
    let sample = NullSample::new(
        null,
        0,
        NullProvenance::SelfPermutation,
        Estimator::Tree,
        Statistic::Bonferroni,
    )
    .map_err(err)?;
    Ok(adjust::interpolate(p, &sample))
}

/// Sorted null values from `r` coin-toss reallocations of `frame`.
#[pyfunction]
#[pyo3(signature = (frame, r, seed, config=None, bag=None, raw_p=false))]
fn permutation_null(
    py: Python<'_>,
    frame: &Frame,
    r: usize,
    seed: u64,
    config: Option<Config>,
    bag: Option<usize>,
    raw_p: bool,
) -> PyResult<Vec<f64>> {
    let config = config_or_default(config);
    let f = frame.inner.clone();
    let options = NullOptions {
        estimator: bag.map_or(Estimator::Tree, |b| Estimator::Bagged { b }),
        statistic: statistic(raw_p),
        provenance: NullProvenance::SelfPermutation,
    };
    let d = f.n_groups();
    let sample = py
        .detach(move || adjust::permutation_null_with(&f, d, r, &config, seed, &options))
        .map_err(err)?;
    Ok(sample.values().to_vec())
}

/// `(median, values)` of `b` bootstrap trees.
#[pyfunction]
#[pyo3(signature = (frame, b, seed, config=None, raw_p=false))]
fn bag_estimate(
    py: Python<'_>,
    frame: &Frame,
    b: usize,
    seed: u64,
    config: Option<Config>,
    raw_p: bool,
) -> PyResult<(f64, Vec<f64>)> {
    let config = config_or_default(config);
    let f = frame.inner.clone();
    let est = py
        .detach(move || adjust::bag_estimate_with(&f, b, &config, seed, statistic(raw_p)))
        .map_err(err)?;
    Ok((est.median, est.values))
}

/// Sliding-window detection over a frame with a time column; JSON report.
#[pyfunction]
#[pyo3(signature = (frame, window_days, step_days, r, seed, config=None, bag=None))]
fn sequential_detect(
    py: Python<'_>,
    frame: &Frame,
    window_days: i64,
    step_days: i64,
    r: usize,
    seed: u64,
    config: Option<Config>,
    bag: Option<usize>,
) -> PyResult<String> {
    let options = SequentialOptions {
        grow: config_or_default(config),
        statistic: Statistic::Bonferroni,
        r,
        bagging: bag,
        seed,
    };
    let f = frame.inner.clone();
    let report = py
        .detach(move || -> difftree::Result<_> {
            let plan = WindowPlan::for_frame(&f, window_days, step_days)?;
            let nulls = sequential::build_nulls(&f, &plan, &NullSource::FirstWindows, &options)?;
            sequential::run_sequential(&f, &plan, &nulls, &options)
        })
        .map_err(err)?;
    Ok(serde_json::to_string(&report).expect("report serializes"))
}

#[pymodule]
fn difftree_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Frame>()?;
    m.add_class::<Config>()?;
    m.add_class::<Tree>()?;
    m.add_function(wrap_pyfunction!(grow, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_homogeneity, m)?)?;
    m.add_function(wrap_pyfunction!(chisq_sf, m)?)?;
    m.add_function(wrap_pyfunction!(bonferroni, m)?)?;
    m.add_function(wrap_pyfunction!(interpolate, m)?)?;
    m.add_function(wrap_pyfunction!(permutation_null, m)?)?;
    m.add_function(wrap_pyfunction!(bag_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(sequential_detect, m)?)?;
    Ok(())
}
