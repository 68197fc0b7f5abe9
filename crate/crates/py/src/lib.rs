//! Python bindings over the core workbench.

use std::collections::BTreeSet;
use std::path::PathBuf;

use ::mirrorglass as mg;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn err(e: mg::Error) -> PyErr {
    match e {
        mg::Error::InvalidArgument(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any().unbind(),
            None => n.as_f64().into_pyobject(py)?.into_any().unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(a) => {
            let l = PyList::empty(py);
            for x in a {
                l.append(to_py(py, x)?)?;
            }
            l.into_any().unbind()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any().unbind()
        }
    })
}

fn json<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &v)
}

/// Interleaved RGB image in display space, values in [0, 1].
#[pyclass(name = "Image", frozen, from_py_object)]
#[derive(Clone)]
struct PyImage(mg::Image);

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: usize, height: usize, data: Vec<f32>) -> PyResult<Self> {
        mg::Image::from_data(width, height, mg::ImageStage::Display, data)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height
    }

    fn data(&self) -> Vec<f32> {
        self.0.data.clone()
    }

    /// 8-bit RGB bytes, row-major.
    fn to_rgb8<'py>(&self, py: Python<'py>) -> Bound<'py, pyo3::types::PyBytes> {
        pyo3::types::PyBytes::new(py, &self.0.to_rgb8())
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.0.width, self.0.height)
    }
}

/// A dataset entry with its 64x64 image.
#[pyclass(name = "Stimulus", frozen, get_all)]
struct PyStimulus {
    image_id: String,
    /// "mirror", "glass" or "unknown".
    material: String,
    pair_id: Option<String>,
    image: Py<PyImage>,
}

fn material_name(m: mg::synthgen::dataset::Material) -> String {
    serde_json::to_value(m)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// Render `pairs` mirror/glass pairs plus `externals` unlabeled images.
#[pyfunction]
#[pyo3(signature = (pairs, size = 256, seed = 0, externals = 0))]
fn generate_dataset(
    py: Python<'_>,
    pairs: usize,
    size: usize,
    seed: u64,
    externals: usize,
) -> PyResult<Vec<PyStimulus>> {
    let cfg = mg::synthgen::DatasetConfig {
        pairs,
        render: mg::synthgen::RenderConfig {
            size,
            ..Default::default()
        },
        seed,
        ..Default::default()
    };
    let mut all = py.detach(|| mg::synthgen::generate(&cfg)).map_err(err)?;
    all.extend(
        py.detach(|| mg::synthgen::generate_external(&cfg, externals))
            .map_err(err)?,
    );
    all.into_iter()
        .map(|s| {
            Ok(PyStimulus {
                image_id: s.entry.image_id,
                material: material_name(s.entry.material),
                pair_id: s.entry.pair_id,
                image: Py::new(py, PyImage(s.image))?,
            })
        })
        .collect()
}

/// Reflected and transmitted Fresnel fractions for unit vectors.
#[pyfunction]
fn fresnel_split(incident: [f64; 3], normal: [f64; 3], ior: f64) -> PyResult<(f64, f64)> {
    let v = |a: [f64; 3]| mg::synthgen::Vec3::new(a[0], a[1], a[2]);
    mg::synthgen::fresnel_split(v(incident), v(normal), ior).map_err(err)
}

/// Eight color-histogram moments.
#[pyfunction]
fn color_hist(image: &PyImage) -> Vec<f64> {
    mg::features::color_hist_features(&image.0)
}

/// Texture-statistics extractor for square images of one size.
#[pyclass(name = "PsExtractor")]
struct PyPsExtractor(mg::features::PsExtractor);

#[pymethods]
impl PyPsExtractor {
    #[new]
    #[pyo3(signature = (size = 64))]
    fn new(size: usize) -> PyResult<Self> {
        mg::features::PsExtractor::new(size, Default::default())
            .map(Self)
            .map_err(err)
    }

    fn extract(&mut self, image: &PyImage) -> PyResult<Vec<f64>> {
        self.0.extract(&image.0).map_err(err)
    }
}

/// Representational dissimilarity matrix.
#[pyclass(name = "Rdm", frozen)]
struct PyRdm(mg::rsa::Rdm);

#[pymethods]
impl PyRdm {
    /// Pairwise |s_i - s_j| over one score per image.
    #[staticmethod]
    fn from_scores(names: Vec<String>, scores: Vec<f64>) -> PyResult<Self> {
        mg::rsa::rdm_from_scores(names, &scores)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        mg::rsa::Rdm::read(&path).map(Self).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.0.names.clone()
    }

    /// Rows of the full matrix.
    fn matrix(&self) -> Vec<Vec<f64>> {
        self.0.data.chunks(self.0.n).map(<[f64]>::to_vec).collect()
    }

    /// Spearman correlation of the upper triangles.
    fn correlate(&self, other: &PyRdm) -> PyResult<f64> {
        mg::rsa::correlate_rdms(&self.0, &other.0).map_err(err)
    }

    #[pyo3(signature = (dims = 2))]
    fn mds(&self, py: Python<'_>, dims: usize) -> PyResult<Py<PyAny>> {
        let r = mg::rsa::classical_mds(&self.0.data, self.0.n, dims).map_err(err)?;
        json(py, &r)
    }
}

/// Two-tailed t-test; returns (t, df, p).
#[pyfunction]
#[pyo3(signature = (a, b, paired = false))]
fn ttest(a: Vec<f64>, b: Vec<f64>, paired: bool) -> PyResult<(f64, usize, f64)> {
    let mode = if paired {
        mg::rsa::TTestMode::Paired
    } else {
        mg::rsa::TTestMode::TwoSample
    };
    let r = mg::rsa::ttest(&a, &b, mode).map_err(err)?;
    Ok((r.t, r.df, r.p))
}

/// Quintile bin (1..=5) of a normalized score.
#[pyfunction]
fn bin_assign(score: f64) -> PyResult<u8> {
    mg::funnel::bin_assign(score).map_err(err)
}

/// Trained network loaded from disk.
#[pyclass(name = "CnnModel")]
struct PyCnnModel(mg::cnn::CnnModel);

#[pymethods]
impl PyCnnModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        mg::cnn::CnnModel::load(&path).map(Self).map_err(err)
    }

    /// Mirror probability per 64x64 image.
    fn score(&mut self, py: Python<'_>, images: Vec<PyImage>) -> PyResult<Vec<f64>> {
        let imgs: Vec<&mg::Image> = images.iter().map(|i| &i.0).collect();
        let set = mg::cnn::ImageSet::new(&imgs, vec![0; imgs.len()]).map_err(err)?;
        let m = &mut self.0;
        py.detach(|| mg::cnn::score_set(m, &set)).map_err(err)
    }
}

/// Simulate the selection rounds and run the funnel; returns stage counts
/// and the diagnostic set.
#[pyfunction]
#[pyo3(signature = (preset = "desk", seed = 0))]
fn simulate_funnel(py: Python<'_>, preset: &str, seed: u64) -> PyResult<Py<PyAny>> {
    let cfg = mg::funnel::FunnelConfig::preset(preset).map_err(err)?;
    let sim = match preset {
        "paper" => mg::funnel::SimConfig::paper(),
        _ => mg::funnel::SimConfig::desk(),
    };
    let run = py
        .detach(|| {
            let pop = mg::funnel::synthetic_population(
                sim.a1_images + sim.veridical_images,
                sim.b1_images,
                seed,
            );
            let s = mg::funnel::simulate(&pop, &cfg, &sim, seed)?;
            mg::funnel::run_funnel(&s.records, &s.catalog, &cfg, &BTreeSet::new(), seed)
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("counts", json(py, &run.counts)?)?;
    d.set_item("set", json(py, &run.set)?)?;
    Ok(d.into_any().unbind())
}

/// Best value per iteration of a search over `-|x - c|^2` with a seeded
/// centre `c` in the unit cube.
#[pyfunction]
#[pyo3(signature = (dims, iterations, seed = 0))]
fn toy_search(dims: usize, iterations: usize, seed: u64) -> PyResult<Vec<f64>> {
    let mut r = mg::rng::rng_for(seed, "toy-centre");
    let centre: Vec<f64> = (0..dims).map(|_| rand::Rng::random(&mut r)).collect();
    let cfg = mg::search::BhsConfig {
        iterations,
        seed,
        ..Default::default()
    };
    let trace = mg::search::maximize(
        dims,
        &cfg,
        |u| u.to_vec(),
        |_, u| {
            Ok(mg::search::Outcome::value(mg::search::toy_objective(
                u, &centre,
            )))
        },
    )
    .map_err(err)?;
    let mut best = f64::NEG_INFINITY;
    Ok(trace
        .iter()
        .map(|t| {
            best = best.max(t.2);
            best
        })
        .collect())
}

/// Run every stage into `out`; returns the summary and manifest digest.
#[pyfunction]
#[pyo3(signature = (out, preset = "desk", seed = 0))]
fn run_pipeline(py: Python<'_>, out: PathBuf, preset: &str, seed: u64) -> PyResult<Py<PyAny>> {
    let cfg = mg::expserve::PipelineConfig::preset(preset).map_err(err)?;
    let run = py
        .detach(|| mg::expserve::pipeline(&cfg, seed, &out))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("summary", json(py, &run.summary)?)?;
    d.set_item("digest", run.manifest.digest())?;
    Ok(d.into_any().unbind())
}

#[pymodule]
fn mirrorglass(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyStimulus>()?;
    m.add_class::<PyPsExtractor>()?;
    m.add_class::<PyRdm>()?;
    m.add_class::<PyCnnModel>()?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(fresnel_split, m)?)?;
    m.add_function(wrap_pyfunction!(color_hist, m)?)?;
    m.add_function(wrap_pyfunction!(ttest, m)?)?;
    m.add_function(wrap_pyfunction!(bin_assign, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_funnel, m)?)?;
    m.add_function(wrap_pyfunction!(toy_search, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
