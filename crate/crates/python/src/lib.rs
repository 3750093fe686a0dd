//! Python bindings: channel specs, joint pmfs, simulation configs and the
//! simulation, sweep and exact-evaluation entry points.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use relaysim_core::config::{parse_config_str, DEFAULT_SAMPLES};
use relaysim_core::engine::{self, SweepAxis};
use relaysim_core::{channel, detectors, output, pmf};
use relaysim_core::{
    BerEstimate, ChannelMode, CsiRedraw, DetectorKind, Error, JointPmf, MarginalSet, PmfScheme, SimConfig, Symbol,
    TopologyKind,
};
use serde::de::DeserializeOwned;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Read { .. } | Error::Write { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_name<T: DeserializeOwned>(what: &str, value: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(value.to_owned()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} `{value}`")))
}

fn symbol(x: i64) -> PyResult<Symbol> {
    match x {
        1 => Ok(Symbol::Plus),
        -1 => Ok(Symbol::Minus),
        _ => Err(to_py(Error::InvalidSymbol(x))),
    }
}

/// One link: noise variance plus either the fading envelope (known CSI) or
/// its Rayleigh scale (known statistics).
#[pyclass(name = "ChannelSpec", module = "relaysim", frozen)]
struct PyChannelSpec(relaysim_core::ChannelSpec);

#[pymethods]
impl PyChannelSpec {
    #[staticmethod]
    fn known_csi(h: f64, noise_variance: f64) -> PyResult<Self> {
        relaysim_core::ChannelSpec::known_csi(h, noise_variance).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn known_stats(sigma_h_sq: f64, noise_variance: f64) -> PyResult<Self> {
        relaysim_core::ChannelSpec::known_stats(sigma_h_sq, noise_variance).map(Self).map_err(to_py)
    }

    #[getter]
    fn noise_variance(&self) -> f64 {
        self.0.noise_variance()
    }

    #[getter]
    fn snr(&self) -> f64 {
        self.0.snr()
    }

    fn likelihood(&self, y: f64, x: i64) -> PyResult<f64> {
        Ok(self.0.likelihood(y, symbol(x)?))
    }

    fn llr(&self, y: f64) -> f64 {
        self.0.llr(y)
    }

    /// Error probability of a sign decision on this link.
    fn ber_first_hop(&self) -> f64 {
        channel::ber_first_hop(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Joint pmf of a group's decisions given `x = +1`; bit `i` of an index is
/// set when node `i` decided `+1`.
#[pyclass(name = "JointPmf", module = "relaysim", frozen)]
struct PyJointPmf(JointPmf);

#[pymethods]
impl PyJointPmf {
    #[new]
    fn new(n: usize, probs: Vec<f64>) -> PyResult<Self> {
        JointPmf::new(n, probs).map(Self).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.0.probs().to_vec()
    }

    fn prob(&self, index: usize) -> f64 {
        self.0.prob(index)
    }

    fn mirror(&self) -> Self {
        Self(self.0.mirror())
    }

    /// Per-node probabilities of a correct decision.
    fn marginals(&self) -> Vec<f64> {
        self.0.marginals().p_correct().to_vec()
    }

    fn marginalize(&self, nodes: Vec<usize>) -> PyResult<Self> {
        self.0.marginalize(&nodes).map(Self).map_err(to_py)
    }

    fn total_variation(&self, other: &PyJointPmf) -> f64 {
        self.0.total_variation(&other.0)
    }

    fn __len__(&self) -> usize {
        self.0.probs().len()
    }

    fn __repr__(&self) -> String {
        format!("JointPmf(n={}, probs={:?})", self.0.n(), self.0.probs())
    }
}

#[pyclass(name = "BerEstimate", module = "relaysim", frozen)]
struct PyBerEstimate(BerEstimate);

#[pymethods]
impl PyBerEstimate {
    #[getter]
    fn errors(&self) -> u64 {
        self.0.errors
    }

    #[getter]
    fn trials(&self) -> u64 {
        self.0.trials
    }

    #[getter]
    fn ber(&self) -> f64 {
        self.0.ber
    }

    #[getter]
    fn ci95_halfwidth(&self) -> f64 {
        self.0.ci95_halfwidth
    }

    #[getter]
    fn std_error(&self) -> f64 {
        self.0.std_error()
    }

    fn __repr__(&self) -> String {
        format!("BerEstimate(ber={}, errors={}, trials={})", self.0.ber, self.0.errors, self.0.trials)
    }
}

/// A simulation configuration. Names follow the experiment-file keys.
#[pyclass(name = "SimConfig", module = "relaysim", frozen)]
struct PySimConfig(SimConfig);

#[pymethods]
impl PySimConfig {
    #[new]
    #[pyo3(signature = (
        topology, hops, nodes_per_group, mode, snr_db, detector, *,
        pmf_scheme = None, samples = None, pilots = None, n_f = None, quant_bits = None,
        trials = 1_000_000, seed = 0, csi_redraw = "per_campaign"
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        topology: &str,
        hops: usize,
        nodes_per_group: usize,
        mode: &str,
        snr_db: f64,
        detector: &str,
        pmf_scheme: Option<&str>,
        samples: Option<u64>,
        pilots: Option<u64>,
        n_f: Option<usize>,
        quant_bits: Option<u32>,
        trials: u64,
        seed: u64,
        csi_redraw: &str,
    ) -> PyResult<Self> {
        let detector: DetectorKind = parse_name("detector", detector)?;
        let scheme = match (pmf_scheme, detector) {
            (None, DetectorKind::Id) | (Some("id" | "id_analytic" | "id_quantized"), _) => {
                Some(PmfScheme::Id { samples: samples.unwrap_or(DEFAULT_SAMPLES), quant_bits })
            }
            (None, _) => None,
            (Some("mcs"), _) => Some(PmfScheme::Mcs { samples: samples.unwrap_or(DEFAULT_SAMPLES) }),
            (Some("ps"), _) => Some(PmfScheme::Ps { pilots: pilots.unwrap_or(DEFAULT_SAMPLES) }),
            (Some("pjp"), _) => Some(PmfScheme::Pjp { n_f }),
            (Some(other), _) => return Err(PyValueError::new_err(format!("unknown pmf_scheme `{other}`"))),
        };
        let mut config = SimConfig::new(
            parse_name::<TopologyKind>("topology", topology)?,
            hops,
            nodes_per_group,
            parse_name::<ChannelMode>("mode", mode)?,
            snr_db,
            detector,
        )
        .with_trials(trials)
        .with_seed(seed)
        .with_csi_redraw(parse_name::<CsiRedraw>("csi_redraw", csi_redraw)?);
        config.pmf_scheme = scheme;
        config.validate().map_err(to_py)?;
        Ok(Self(config))
    }

    #[getter]
    fn hops(&self) -> usize {
        self.0.hops()
    }

    #[getter]
    fn group_sizes(&self) -> Vec<usize> {
        self.0.group_sizes.clone()
    }

    #[getter]
    fn snr_db(&self) -> f64 {
        self.0.snr_db
    }

    #[getter]
    fn detector(&self) -> &'static str {
        self.0.detector.as_str()
    }

    #[getter]
    fn pmf_scheme(&self) -> Option<&'static str> {
        self.0.pmf_scheme.map(|s| s.label())
    }

    #[getter]
    fn trials(&self) -> u64 {
        self.0.trials
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    fn with_trials(&self, trials: u64) -> Self {
        Self(self.0.clone().with_trials(trials))
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self(self.0.clone().with_seed(seed))
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Monte Carlo BER of `config`. Runs without holding the GIL.
#[pyfunction]
fn simulate_ber(py: Python<'_>, config: &PySimConfig) -> PyResult<PyBerEstimate> {
    let config = config.0.clone();
    py.detach(|| engine::simulate_ber(&config)).map(PyBerEstimate).map_err(to_py)
}

/// One `(config, estimate)` pair per value of `axis`.
#[pyfunction]
fn sweep(
    py: Python<'_>,
    config: &PySimConfig,
    axis: &str,
    values: Vec<f64>,
) -> PyResult<Vec<(PySimConfig, PyBerEstimate)>> {
    let axis: SweepAxis = parse_name("sweep axis", axis)?;
    let config = config.0.clone();
    let points = py.detach(|| engine::sweep(&config, axis, &values)).map_err(to_py)?;
    Ok(points.into_iter().map(|p| (PySimConfig(p.config), PyBerEstimate(p.estimate))).collect())
}

/// Exact BER of a small known-CSI network.
#[pyfunction]
fn exact_ber_small(py: Python<'_>, config: &PySimConfig) -> PyResult<f64> {
    let config = config.0.clone();
    py.detach(|| engine::exact_ber_small(&config)).map_err(to_py)
}

/// Runs every experiment of a TOML experiment document and returns
/// `{name: csv_text}`.
#[pyfunction]
fn run_experiments(py: Python<'_>, text: &str) -> PyResult<Vec<(String, String)>> {
    let experiments = parse_config_str(text).map_err(to_py)?;
    py.detach(|| {
        experiments
            .iter()
            .map(|e| e.run().map(|points| (e.name.clone(), output::csv_table(&e.name, &points))))
            .collect::<Result<Vec<_>, _>>()
    })
    .map_err(to_py)
}

/// Least-norm projection of a unit-sum vector onto the simplex; returns
/// `(p, xi, correction_norm)`.
#[pyfunction]
fn project_simplex(b: Vec<f64>) -> PyResult<(Vec<f64>, f64, f64)> {
    let r = pmf::project_simplex(&b).map_err(to_py)?;
    Ok((r.p_hat, r.xi, r.correction_norm))
}

/// Pilot-based pmf estimate from sign-pattern frequencies.
#[pyfunction]
fn estimate_ps(p_kappa: Vec<f64>, per_node_pc: Vec<f64>) -> PyResult<PyJointPmf> {
    pmf::estimate_ps_from_frequencies(&p_kappa, &per_node_pc).map(PyJointPmf).map_err(to_py)
}

#[pyfunction]
fn product_pmf(p_correct: Vec<f64>) -> PyResult<PyJointPmf> {
    let marginals = MarginalSet::new(p_correct).map_err(to_py)?;
    pmf::product_pmf(&marginals).map(PyJointPmf).map_err(to_py)
}

#[pyfunction]
fn pjp_pmf(n: usize, n_f: usize) -> PyResult<PyJointPmf> {
    pmf::pjp_pmf(n, n_f).map(PyJointPmf).map_err(to_py)
}

/// Log-ratio of the independent-decisions rule; decide `+1` when `≥ 0`.
#[pyfunction]
fn id_statistic(p_correct: Vec<f64>, llrs: Vec<f64>) -> PyResult<f64> {
    if p_correct.len() != llrs.len() {
        return Err(PyValueError::new_err("p_correct and llrs differ in length"));
    }
    Ok(detectors::id_statistic(&p_correct, &llrs))
}

/// Log-ratio of the MAP rule under `pmf`; decide `+1` when `≥ 0`.
#[pyfunction]
fn map_statistic(pmf: &PyJointPmf, llrs: Vec<f64>) -> PyResult<f64> {
    if pmf.0.n() != llrs.len() {
        return Err(PyValueError::new_err("pmf size and llrs differ in length"));
    }
    Ok(detectors::map_statistic(pmf.0.probs(), &llrs, &mut Vec::new()))
}

#[pymodule]
fn relaysim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannelSpec>()?;
    m.add_class::<PyJointPmf>()?;
    m.add_class::<PyBerEstimate>()?;
    m.add_class::<PySimConfig>()?;
    m.add_function(wrap_pyfunction!(simulate_ber, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(exact_ber_small, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiments, m)?)?;
    m.add_function(wrap_pyfunction!(project_simplex, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_ps, m)?)?;
    m.add_function(wrap_pyfunction!(product_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(pjp_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(id_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(map_statistic, m)?)?;
    Ok(())
}
