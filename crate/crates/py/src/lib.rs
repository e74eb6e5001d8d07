//! Python bindings for `robust_svm`.
//!
//! Norms are passed as `"l1"`, `"l2"` or `"linf"`; samples as lists of rows
//! with `±1` labels. Every error from the core crate becomes `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use robust_svm::consistency::{self, PairingMetric};
use robust_svm::kernel::{self, KernelSpec};
use robust_svm::probabilistic::{self, BudgetPrior, BuiltinDisturbance, DisturbanceModel};
use robust_svm::solver::{self, SolverConfig};
use robust_svm::uncertainty::{self, Aggregation, AtomicSet, SublinearSet};
use robust_svm::{synthetic, NormSpec};

fn err(e: robust_svm::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn norm(name: &str) -> PyResult<NormSpec> {
    match name {
        "l1" => Ok(NormSpec::L1),
        "l2" => Ok(NormSpec::L2),
        "linf" => Ok(NormSpec::Linf),
        other => Err(PyValueError::new_err(format!("unknown norm '{other}'"))),
    }
}

fn kernel_spec(name: &str, param: f64) -> PyResult<KernelSpec> {
    let spec = match name {
        "linear" => KernelSpec::Linear,
        "poly" => {
            if param.fract() != 0.0 || param < 1.0 {
                return Err(PyValueError::new_err("polynomial degree must be a positive integer"));
            }
            KernelSpec::Polynomial { degree: param as u32 }
        }
        "rbf" => KernelSpec::Gaussian { gamma: param },
        "indicator" => KernelSpec::Indicator,
        other => return Err(PyValueError::new_err(format!("unknown kernel '{other}'"))),
    };
    spec.validate().map_err(err)?;
    Ok(spec)
}

fn solver_config(max_iters: usize, tolerance: f64) -> SolverConfig {
    SolverConfig {
        max_iters,
        tolerance,
        ..SolverConfig::default()
    }
}

#[pyclass(name = "Dataset", frozen)]
#[derive(Clone)]
struct PyDataset {
    inner: robust_svm::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> PyResult<Self> {
        let inner = robust_svm::Dataset::from_rows(rows, &labels).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let loaded = robust_svm::libsvm::load_dataset(path).map_err(err)?;
        Ok(Self { inner: loaded.dataset })
    }

    #[staticmethod]
    #[pyo3(signature = (m, dim, separation=2.0, sigma=1.0, seed=0))]
    fn gaussian_blobs(m: usize, dim: usize, separation: f64, sigma: f64, seed: u64) -> PyResult<Self> {
        let inner = synthetic::gaussian_blobs(m, dim, separation, sigma, seed).map_err(err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        robust_svm::libsvm::write_dataset(path, &self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.iter().map(|s| s.x.clone()).collect()
    }

    fn labels(&self) -> Vec<f64> {
        self.inner.iter().map(|s| s.y.value()).collect()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "LinearClassifier", frozen)]
#[derive(Clone)]
struct PyLinearClassifier {
    inner: robust_svm::LinearClassifier,
}

#[pymethods]
impl PyLinearClassifier {
    #[new]
    fn new(w: Vec<f64>, b: f64) -> PyResult<Self> {
        Ok(Self {
            inner: robust_svm::LinearClassifier::new(w, b).map_err(err)?,
        })
    }

    #[getter]
    fn w(&self) -> Vec<f64> {
        self.inner.w.clone()
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }

    fn decision(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.decision(&x).map_err(err)
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.predict(&x).map_err(err)?.value())
    }

    fn empirical_hinge(&self, ds: &PyDataset) -> PyResult<f64> {
        self.inner.empirical_hinge(&ds.inner).map_err(err)
    }

    fn classification_error(&self, ds: &PyDataset) -> PyResult<f64> {
        self.inner.classification_error(&ds.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("LinearClassifier(w={:?}, b={})", self.inner.w, self.inner.b)
    }
}

#[pyclass(name = "KernelClassifier", frozen)]
struct PyKernelClassifier {
    inner: kernel::KernelClassifier,
}

#[pymethods]
impl PyKernelClassifier {
    #[getter]
    fn alphas(&self) -> Vec<f64> {
        self.inner.alphas.clone()
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }

    fn decision(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.decision(&x).map_err(err)
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.predict(&x).map_err(err)?.value())
    }

    fn rkhs_norm(&self) -> PyResult<f64> {
        self.inner.rkhs_norm().map_err(err)
    }

    fn average_hinge(&self, ds: &PyDataset) -> PyResult<f64> {
        self.inner.average_hinge(&ds.inner).map_err(err)
    }

    fn classification_error(&self, ds: &PyDataset) -> PyResult<f64> {
        self.inner.classification_error(&ds.inner).map_err(err)
    }
}

/// Returns `(classifier, objective, converged)` for `c·‖w‖ + Σ hinge`.
#[pyfunction]
#[pyo3(signature = (ds, c, norm_name="l2", max_iters=100_000, tolerance=1e-10))]
fn train_regularized(
    py: Python<'_>,
    ds: &PyDataset,
    c: f64,
    norm_name: &str,
    max_iters: usize,
    tolerance: f64,
) -> PyResult<(PyLinearClassifier, f64, bool)> {
    let n = norm(norm_name)?;
    let cfg = solver_config(max_iters, tolerance);
    let r = py
        .allow_threads(|| solver::train_regularized(&ds.inner, &n, c, &cfg))
        .map_err(err)?;
    Ok((PyLinearClassifier { inner: r.classifier }, r.objective, r.converged))
}

/// Trains against `Σ‖δᵢ‖* ≤ radius`, measured in the dual of `norm_name`.
#[pyfunction]
#[pyo3(signature = (ds, radius, norm_name="l2", max_iters=100_000, tolerance=1e-10))]
fn train_robust(
    py: Python<'_>,
    ds: &PyDataset,
    radius: f64,
    norm_name: &str,
    max_iters: usize,
    tolerance: f64,
) -> PyResult<(PyLinearClassifier, f64, bool)> {
    let set = sum_budget(norm_name, radius)?;
    let cfg = solver_config(max_iters, tolerance);
    let r = py
        .allow_threads(|| solver::train_robust(&ds.inner, &set, &cfg))
        .map_err(err)?;
    Ok((PyLinearClassifier { inner: r.classifier }, r.objective, r.separable))
}

fn sum_budget(norm_name: &str, radius: f64) -> PyResult<SublinearSet> {
    let dual = match norm(norm_name)? {
        NormSpec::L1 => NormSpec::Linf,
        NormSpec::Linf => NormSpec::L1,
        other => other,
    };
    let atomic = AtomicSet::norm_ball(dual, radius).map_err(err)?;
    Ok(SublinearSet::new(atomic, Aggregation::SumBudget))
}

/// `(value, is_exact)`: hinge plus support, exact when some sample is misclassified.
#[pyfunction]
#[pyo3(signature = (clf, ds, radius, norm_name="l2"))]
fn worst_case_loss(clf: &PyLinearClassifier, ds: &PyDataset, radius: f64, norm_name: &str) -> PyResult<(f64, bool)> {
    let set = sum_budget(norm_name, radius)?;
    let u = uncertainty::worst_case_loss_upper(&clf.inner, &ds.inner, &set).map_err(err)?;
    Ok((u.value, u.is_exact))
}

#[pyfunction]
#[pyo3(signature = (ds, c, kernel_name="rbf", param=1.0, max_iters=100_000, tolerance=1e-10))]
fn train_kernel(
    py: Python<'_>,
    ds: &PyDataset,
    c: f64,
    kernel_name: &str,
    param: f64,
    max_iters: usize,
    tolerance: f64,
) -> PyResult<(PyKernelClassifier, f64)> {
    let spec = kernel_spec(kernel_name, param)?;
    let cfg = solver_config(max_iters, tolerance);
    let r = py
        .allow_threads(|| kernel::train_kernel_regularized(&ds.inner, &spec, c, &cfg))
        .map_err(err)?;
    Ok((PyKernelClassifier { inner: r.classifier }, r.objective))
}

#[pyfunction]
#[pyo3(signature = (x, z, kernel_name="rbf", param=1.0))]
fn feature_distance(x: Vec<f64>, z: Vec<f64>, kernel_name: &str, param: f64) -> PyResult<f64> {
    kernel::feature_distance(&kernel_spec(kernel_name, param)?, &x, &z).map_err(err)
}

/// Budget covering the total disturbance with probability `1 − eta` under
/// i.i.d. Gaussian disturbances of scale `sigma`.
#[pyfunction]
#[pyo3(signature = (m, dim, sigma, eta, draws=10_000, seed=0, norm_name="l2"))]
fn calibrate_chance(
    py: Python<'_>,
    m: usize,
    dim: usize,
    sigma: f64,
    eta: f64,
    draws: usize,
    seed: u64,
    norm_name: &str,
) -> PyResult<f64> {
    let dm = DisturbanceModel::builtin(BuiltinDisturbance::Gaussian { sigma }, norm(norm_name)?, m, dim).map_err(err)?;
    py.allow_threads(|| probabilistic::calibrate_chance(&dm, m, eta, draws, seed))
        .map_err(err)
}

/// Prior mean of the budget; `atoms` are `(value, probability)` pairs.
#[pyfunction]
fn bayes_regularizer(atoms: Vec<(f64, f64)>) -> PyResult<f64> {
    probabilistic::bayes_regularizer(&BudgetPrior::Discrete { atoms }).map_err(err)
}

/// `(matched, gamma)` for the largest same-label pairing within distance `c`.
#[pyfunction]
fn max_pairings(train: &PyDataset, test: &PyDataset, c: f64) -> PyResult<(usize, f64)> {
    let r = consistency::max_pairings_exact(&train.inner, &test.inner, c, &PairingMetric::SampleL2).map_err(err)?;
    Ok((r.matched, r.gamma))
}

/// `(test_error, error_bound, test_avg_hinge, hinge_bound)`.
#[pyfunction]
fn generalization_bound(
    clf: &PyLinearClassifier,
    train: &PyDataset,
    test: &PyDataset,
    c: f64,
) -> PyResult<(f64, f64, f64, f64)> {
    let pairing = consistency::max_pairings_exact(&train.inner, &test.inner, c, &PairingMetric::SampleL2).map_err(err)?;
    let k = consistency::empirical_k(&train.inner, &test.inner);
    let r = consistency::generalization_bound(&clf.inner, &train.inner, &test.inner, c, &pairing, k).map_err(err)?;
    Ok((r.test_error, r.error_bound, r.test_avg_hinge, r.hinge_bound))
}

#[pymodule]
fn robust_svm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyLinearClassifier>()?;
    m.add_class::<PyKernelClassifier>()?;
    m.add_function(wrap_pyfunction!(train_regularized, m)?)?;
    m.add_function(wrap_pyfunction!(train_robust, m)?)?;
    m.add_function(wrap_pyfunction!(worst_case_loss, m)?)?;
    m.add_function(wrap_pyfunction!(train_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(feature_distance, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_chance, m)?)?;
    m.add_function(wrap_pyfunction!(bayes_regularizer, m)?)?;
    m.add_function(wrap_pyfunction!(max_pairings, m)?)?;
    m.add_function(wrap_pyfunction!(generalization_bound, m)?)?;
    Ok(())
}
