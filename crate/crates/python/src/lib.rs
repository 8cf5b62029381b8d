//! Python bindings: `import macp`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use macp_core::harness::{self, RateMode, ScenarioConfig, SweepAxis};
use macp_core::reduction::{self, SppInstance};
use macp_core::{CachingPolicy, InstanceParams, MacpError, SimConfig, SimMode};

fn err(e: MacpError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Instance", frozen, skip_from_py_object)]
pub struct Instance(macp_core::Instance);

#[pymethods]
impl Instance {
    #[new]
    #[pyo3(signature = (cache_size, cost_backhaul, cost_mbs_tx, cost_scbs_tx, demand, deadline))]
    fn new(
        cache_size: Vec<usize>,
        cost_backhaul: f64,
        cost_mbs_tx: f64,
        cost_scbs_tx: Vec<f64>,
        demand: Vec<Vec<f64>>,
        deadline: f64,
    ) -> PyResult<Self> {
        let params = InstanceParams {
            num_scbs: cache_size.len(),
            num_files: demand.first().map_or(0, Vec::len),
            cache_size,
            cost_backhaul,
            cost_mbs_tx,
            cost_scbs_tx,
            demand,
            deadline,
        };
        macp_core::Instance::new(params).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        macp_core::Instance::from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(err)
    }

    #[getter]
    fn num_scbs(&self) -> usize {
        self.0.num_scbs()
    }

    #[getter]
    fn num_files(&self) -> usize {
        self.0.num_files()
    }

    #[getter]
    fn deadline(&self) -> f64 {
        self.0.deadline()
    }

    /// Request rate of `file` in `area` (0 = MBS-only area, n + 1 = SCBS n).
    fn rate(&self, area: usize, file: usize) -> PyResult<f64> {
        self.check(area, file)?;
        Ok(self.0.rate(area, file))
    }

    fn area_probability(&self, area: usize, file: usize) -> PyResult<f64> {
        self.check(area, file)?;
        Ok(self.0.area_probability(area, file))
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(num_scbs={}, num_files={}, deadline={})",
            self.0.num_scbs(),
            self.0.num_files(),
            self.0.deadline()
        )
    }
}

impl Instance {
    fn check(&self, area: usize, file: usize) -> PyResult<()> {
        if area >= self.0.num_areas() || file >= self.0.num_files() {
            return Err(PyValueError::new_err(format!("area {area} / file {file} out of range")));
        }
        Ok(())
    }
}

#[pyclass(name = "CachingPolicy", frozen, skip_from_py_object)]
pub struct Policy(CachingPolicy);

#[pymethods]
impl Policy {
    /// From a 0/1 matrix with one row per SCBS.
    #[new]
    fn new(rows: Vec<Vec<u8>>) -> PyResult<Self> {
        CachingPolicy::from_rows(&rows).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        CachingPolicy::from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(err)
    }

    fn rows(&self) -> Vec<Vec<u32>> {
        rows_of(&self.0)
    }

    fn is_cached(&self, scbs: usize, file: usize) -> PyResult<bool> {
        if scbs >= self.0.num_scbs() || file >= self.0.num_files() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.0.is_cached(scbs, file))
    }

    fn __repr__(&self) -> String {
        format!("CachingPolicy({:?})", self.0.to_rows())
    }
}

fn rows_of(policy: &CachingPolicy) -> Vec<Vec<u32>> {
    policy
        .to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(u32::from).collect())
        .collect()
}

#[pyclass(name = "CostBreakdown", frozen, get_all, skip_from_py_object)]
pub struct CostBreakdown {
    total: f64,
    per_file: Vec<f64>,
    mbs_component: f64,
    scbs_component: f64,
}

impl From<macp_core::CostBreakdown> for CostBreakdown {
    fn from(c: macp_core::CostBreakdown) -> Self {
        Self {
            total: c.total,
            per_file: c.per_file,
            mbs_component: c.mbs_component,
            scbs_component: c.scbs_component,
        }
    }
}

#[pyclass(name = "SolverReport", frozen, skip_from_py_object)]
pub struct SolverReport(macp_core::SolverReport);

#[pymethods]
impl SolverReport {
    #[getter]
    fn policy(&self) -> Policy {
        Policy(self.0.policy.clone())
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.0.objective
    }

    /// `(iteration, scbs, file, objective)` per greedy step.
    #[getter]
    fn trace(&self) -> Vec<(usize, usize, usize, f64)> {
        self.0
            .trace
            .iter()
            .map(|t| (t.iteration, t.scbs, t.file, t.objective))
            .collect()
    }

    #[getter]
    fn evaluations(&self) -> u64 {
        self.0.evaluations
    }
}

#[pyclass(name = "SimReport", frozen, get_all, skip_from_py_object)]
pub struct SimReport {
    mean_cost_per_period: f64,
    std_error: f64,
    periods: u64,
    mbs_transmissions: u64,
    scbs_transmissions: u64,
    unicast_transmissions: u64,
}

#[pyfunction]
fn request_probability(rate: f64, deadline: f64) -> PyResult<f64> {
    macp_core::request_probability(rate, deadline).map_err(err)
}

#[pyfunction]
fn cost_closed_form(instance: &Instance, policy: &Policy) -> PyResult<CostBreakdown> {
    macp_core::cost_closed_form(&instance.0, &policy.0).map(Into::into).map_err(err)
}

#[pyfunction]
fn cost_bruteforce(instance: &Instance, policy: &Policy) -> PyResult<CostBreakdown> {
    macp_core::cost_bruteforce(&instance.0, &policy.0).map(Into::into).map_err(err)
}

#[pyfunction]
fn cost_unicast(instance: &Instance, policy: &Policy) -> PyResult<CostBreakdown> {
    macp_core::cost_unicast(&instance.0, &policy.0).map(Into::into).map_err(err)
}

#[pyfunction]
fn greedy_macp(py: Python<'_>, instance: &Instance) -> SolverReport {
    SolverReport(py.detach(|| macp_core::greedy_macp(&instance.0)))
}

#[pyfunction]
fn popularity_placement(instance: &Instance) -> Policy {
    Policy(macp_core::popularity_placement(&instance.0))
}

#[pyfunction]
fn exact_optimal(py: Python<'_>, instance: &Instance) -> PyResult<SolverReport> {
    py.detach(|| macp_core::exact_optimal(&instance.0))
        .map(SolverReport)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (instance, policy, periods, mode = "multicast", seed = 0))]
fn simulate(
    py: Python<'_>,
    instance: &Instance,
    policy: &Policy,
    periods: u64,
    mode: &str,
    seed: u64,
) -> PyResult<SimReport> {
    let mode: SimMode = mode.parse().map_err(PyValueError::new_err)?;
    let config = SimConfig { periods, mode, seed };
    let r = py
        .detach(|| macp_core::simulate(&instance.0, &policy.0, &config))
        .map_err(err)?;
    Ok(SimReport {
        mean_cost_per_period: r.mean_cost_per_period,
        std_error: r.std_error,
        periods: r.periods,
        mbs_transmissions: r.mbs_transmissions,
        scbs_transmissions: r.scbs_transmissions,
        unicast_transmissions: r.unicast_transmissions,
    })
}

fn scenario_config(json: Option<&str>, seed: Option<u64>) -> PyResult<ScenarioConfig> {
    let mut cfg = match json {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Synthetic instance. `config` is ScenarioConfig JSON (missing fields take
/// their defaults); the remaining arguments override it.
#[pyfunction]
#[pyo3(signature = (config = None, *, num_scbs = None, num_files = None, cache_size = None, deadline = None, zipf_shape = None, rate_mode = None, seed = None))]
#[allow(clippy::too_many_arguments)]
fn generate_scenario(
    config: Option<&str>,
    num_scbs: Option<usize>,
    num_files: Option<usize>,
    cache_size: Option<usize>,
    deadline: Option<f64>,
    zipf_shape: Option<f64>,
    rate_mode: Option<&str>,
    seed: Option<u64>,
) -> PyResult<Instance> {
    let mut cfg = scenario_config(config, seed)?;
    cfg.num_scbs = num_scbs.unwrap_or(cfg.num_scbs);
    cfg.num_files = num_files.unwrap_or(cfg.num_files);
    cfg.cache_size = cache_size.unwrap_or(cfg.cache_size);
    cfg.deadline = deadline.unwrap_or(cfg.deadline);
    cfg.zipf_shape = zipf_shape.unwrap_or(cfg.zipf_shape);
    match rate_mode {
        None => {}
        Some("per_scbs_total") => cfg.rate_mode = RateMode::PerScbsTotal,
        Some("per_pair") => cfg.rate_mode = RateMode::PerPair,
        Some(other) => return Err(PyValueError::new_err(format!("unknown rate mode {other:?}"))),
    }
    harness::generate_scenario(&cfg).map(Instance).map_err(err)
}

/// Runs a sweep and returns the CSV text.
#[pyfunction]
#[pyo3(signature = (axis, values = None, replications = 5, sim_periods = None, config = None, seed = None))]
fn sweep(
    py: Python<'_>,
    axis: &str,
    values: Option<Vec<f64>>,
    replications: usize,
    sim_periods: Option<u64>,
    config: Option<&str>,
    seed: Option<u64>,
) -> PyResult<String> {
    let cfg = scenario_config(config, seed)?;
    let axis: SweepAxis = axis.parse().map_err(err)?;
    let values = values.unwrap_or_else(|| axis.default_values(&cfg));
    py.detach(|| {
        harness::sweep(&cfg, axis, &values, replications, sim_periods)?.to_csv_string()
    })
    .map_err(err)
}

type Witness = (bool, Option<Vec<Vec<u32>>>, Option<f64>);

fn spp(elements: Vec<u32>, subsets: Vec<Vec<u32>>, target: usize) -> PyResult<SppInstance> {
    SppInstance::new(elements, subsets, target).map_err(err)
}

/// Set packing decision: `(satisfiable, chosen subset indices or None)`.
#[pyfunction]
fn spp_decide(
    elements: Vec<u32>,
    subsets: Vec<Vec<u32>>,
    target: usize,
) -> PyResult<(bool, Option<Vec<usize>>)> {
    let out = reduction::spp_decide(&spp(elements, subsets, target)?).map_err(err)?;
    Ok((out.satisfiable, out.witness))
}

/// Decides the reduced threshold instance: `(satisfiable, witness rows or
/// None, witness cost or None)`.
#[pyfunction]
fn macdp_decide_reduced(
    py: Python<'_>,
    elements: Vec<u32>,
    subsets: Vec<Vec<u32>>,
    target: usize,
) -> PyResult<Witness> {
    let instance = spp(elements, subsets, target)?;
    let out = py
        .detach(|| reduction::macdp_decide(&reduction::spp_to_macdp(&instance)?))
        .map_err(err)?;
    Ok((
        out.satisfiable,
        out.witness.as_ref().map(rows_of),
        out.witness_cost,
    ))
}

/// The reduced decision instance as JSON.
#[pyfunction]
fn spp_to_macdp(elements: Vec<u32>, subsets: Vec<Vec<u32>>, target: usize) -> PyResult<String> {
    let d = reduction::spp_to_macdp(&spp(elements, subsets, target)?).map_err(err)?;
    serde_json::to_string(&d).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn macp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<Policy>()?;
    m.add_class::<CostBreakdown>()?;
    m.add_class::<SolverReport>()?;
    m.add_class::<SimReport>()?;
    m.add_function(wrap_pyfunction!(request_probability, m)?)?;
    m.add_function(wrap_pyfunction!(cost_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(cost_bruteforce, m)?)?;
    m.add_function(wrap_pyfunction!(cost_unicast, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_macp, m)?)?;
    m.add_function(wrap_pyfunction!(popularity_placement, m)?)?;
    m.add_function(wrap_pyfunction!(exact_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(spp_decide, m)?)?;
    m.add_function(wrap_pyfunction!(macdp_decide_reduced, m)?)?;
    m.add_function(wrap_pyfunction!(spp_to_macdp, m)?)?;
    Ok(())
}
