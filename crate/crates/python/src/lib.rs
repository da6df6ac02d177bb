// SPDX-License-Identifier: Apache-2.0

//! Python bindings for `flp_adversary`.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use flp_adversary::adversary::{find_bivalent_init, Adversary as CoreAdversary, AdversaryError, Variant};
use flp_adversary::model::{
    apply_action, decided_map, Action, Bit, InitVector, ModelError, ProcessId, Schedule, State,
};
use flp_adversary::oracle::{
    certify_bivalent, certify_bivalent_via, check_agreement, find_blocking, v_possible,
    wt_excluding, AgreementOutcome, Fork, SearchBudget, SearchError, Valence,
};
use flp_adversary::protocols::{make_initial, Builtin, Protocol as _};
use flp_adversary::trace::TraceFile;
use flp_adversary::verify;

create_exception!(flp_adversary_py, SearchExhausted, PyException, "No verdict within the search budget.");
create_exception!(flp_adversary_py, Blocked, PyException, "The remaining processes can never decide.");

fn model_err(e: ModelError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn search_err(e: SearchError) -> PyErr {
    match e {
        SearchError::SearchExhausted {
            frontier_empty: true,
            ..
        }
        | SearchError::Blocked { .. } => Blocked::new_err(e.to_string()),
        SearchError::InvalidBudget | SearchError::InvalidQuorum { .. } => {
            PyValueError::new_err(e.to_string())
        }
        SearchError::Model(m) => model_err(m),
        _ => SearchExhausted::new_err(e.to_string()),
    }
}

fn adversary_err(e: AdversaryError) -> PyErr {
    match e {
        AdversaryError::Search(s) => search_err(s),
        AdversaryError::Model(m) => model_err(m),
        AdversaryError::PreconditionViolated(_) => PyValueError::new_err(e.to_string()),
        other => PyException::new_err(other.to_string()),
    }
}

fn budget(depth: usize, max_states: usize) -> PyResult<SearchBudget> {
    SearchBudget::new(depth, max_states).map_err(search_err)
}

fn process(p: &Builtin, i: usize) -> PyResult<ProcessId> {
    ProcessId::try_new(i, p.n())
        .ok_or_else(|| PyIndexError::new_err(format!("process must be in 1..={}", p.n())))
}

fn bit(v: u8) -> PyResult<Bit> {
    Bit::from_u8(v).ok_or_else(|| PyValueError::new_err("value must be 0 or 1"))
}

fn actions(s: &Schedule) -> Vec<String> {
    s.actions().iter().map(Action::to_string).collect()
}

/// A built-in protocol instance.
#[pyclass(name = "Protocol", module = "flp_adversary_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProtocol {
    inner: Builtin,
}

#[pymethods]
impl PyProtocol {
    #[new]
    fn new(name: &str, n: usize) -> PyResult<Self> {
        Builtin::from_name(name, n)
            .map(|inner| PyProtocol { inner })
            .map_err(model_err)
    }

    #[staticmethod]
    fn names() -> Vec<&'static str> {
        Builtin::NAMES.to_vec()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Initial state for an input bitstring, process 1 first.
    fn initial_state(&self, init: &str) -> PyResult<PyState> {
        let iv: InitVector = init
            .parse()
            .map_err(|e| PyValueError::new_err(format!("{e}")))?;
        let state = make_initial(&self.inner, &iv).map_err(model_err)?;
        Ok(PyState {
            protocol: self.inner.clone(),
            state,
        })
    }

    #[pyo3(signature = (depth = 12, max_states = 2_000_000))]
    fn check_agreement<'py>(
        &self,
        py: Python<'py>,
        depth: usize,
        max_states: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        match check_agreement(&self.inner, budget(depth, max_states)?).map_err(search_err)? {
            AgreementOutcome::Violation(v) => {
                d.set_item("violation", true)?;
                d.set_item("init_vector", v.init.to_string())?;
                d.set_item("schedule", actions(v.execution.actions()))?;
                d.set_item("zero", v.zero.index())?;
                d.set_item("one", v.one.index())?;
            }
            AgreementOutcome::Clean {
                depth,
                exhaustive,
                states,
            } => {
                d.set_item("violation", false)?;
                d.set_item("depth", depth)?;
                d.set_item("exhaustive", exhaustive)?;
                d.set_item("states", states)?;
            }
        }
        Ok(d)
    }

    /// A certified blocking scenario, or `None` if none exists.
    #[pyo3(signature = (depth = 12, max_states = 2_000_000))]
    fn find_blocking<'py>(
        &self,
        py: Python<'py>,
        depth: usize,
        max_states: usize,
    ) -> PyResult<Option<Bound<'py, PyDict>>> {
        let Some(b) = find_blocking(&self.inner, budget(depth, max_states)?).map_err(search_err)?
        else {
            return Ok(None);
        };
        let d = PyDict::new(py);
        d.set_item("init_vector", b.init.to_string())?;
        d.set_item("path", actions(b.path.actions()))?;
        d.set_item("excluded", b.excluded.index())?;
        d.set_item("closure_states", b.closure_states)?;
        d.set_item(
            "state",
            PyState {
                protocol: self.inner.clone(),
                state: b.state().clone(),
            },
        )?;
        Ok(Some(d))
    }

    #[pyo3(signature = (depth = 12, max_states = 2_000_000))]
    fn find_bivalent_init<'py>(
        &self,
        py: Python<'py>,
        depth: usize,
        max_states: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let bi = find_bivalent_init(&self.inner, budget(depth, max_states)?).map_err(adversary_err)?;
        let d = PyDict::new(py);
        d.set_item("k", bi.k)?;
        d.set_item("init_vector", bi.init.to_string())?;
        d.set_item(
            "state",
            PyState {
                protocol: self.inner.clone(),
                state: bi.state.clone(),
            },
        )?;
        d.set_item("fork", fork_dict(py, &bi.fork)?)?;
        let ladder: Vec<Vec<u8>> = bi
            .ladder_values
            .iter()
            .map(|r| r.iter().map(|b| b.as_u8()).collect())
            .collect();
        d.set_item("ladder", ladder)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Protocol({:?}, {})", self.inner.name(), self.inner.n())
    }
}

fn fork_dict<'py, L: Clone + PartialEq, M: Clone + PartialEq>(
    py: Python<'py>,
    fork: &Fork<L, M>,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("zero", actions(fork.branch(Bit::Zero).actions()))?;
    d.set_item("one", actions(fork.branch(Bit::One).actions()))?;
    Ok(d)
}

/// An immutable global state.
#[pyclass(name = "State", module = "flp_adversary_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyState {
    protocol: Builtin,
    state: State<Builtin>,
}

#[pymethods]
impl PyState {
    #[getter]
    fn digest(&self) -> String {
        self.state.digest().to_string()
    }

    #[getter]
    fn n(&self) -> usize {
        self.state.n()
    }

    #[getter]
    fn in_flight(&self) -> usize {
        self.state.in_flight()
    }

    fn enabled_actions(&self) -> Vec<String> {
        self.state
            .enabled_actions()
            .iter()
            .map(Action::to_string)
            .collect()
    }

    /// Applies one action, written as `deliver S->R` or `null P`.
    fn apply(&self, action: &str) -> PyResult<PyState> {
        let a: Action = action
            .parse()
            .map_err(|e| PyValueError::new_err(format!("{e}")))?;
        let state = apply_action(&self.protocol, &self.state, a).map_err(model_err)?;
        Ok(PyState {
            protocol: self.protocol.clone(),
            state,
        })
    }

    fn run(&self, schedule: Vec<String>) -> PyResult<PyState> {
        schedule
            .iter()
            .try_fold(self.clone(), |s, a| s.apply(a))
    }

    /// Each process's decision, `None` where undecided.
    fn decided(&self) -> PyResult<Vec<Option<u8>>> {
        Ok(decided_map(&self.protocol, &self.state)
            .map_err(model_err)?
            .into_iter()
            .map(|d| d.map(Bit::as_u8))
            .collect())
    }

    fn __eq__(&self, other: &PyState) -> bool {
        self.state == other.state
    }

    fn __hash__(&self) -> u64 {
        let d = self.state.digest().0;
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }

    fn __repr__(&self) -> String {
        format!("State({}, in_flight={})", &self.digest()[..12], self.in_flight())
    }
}

/// `wt(state, Q_exclude)`: the shortest deciding execution avoiding `exclude`.
#[pyfunction]
#[pyo3(signature = (state, exclude, depth = 12, max_states = 2_000_000))]
fn witness<'py>(
    py: Python<'py>,
    state: &PyState,
    exclude: usize,
    depth: usize,
    max_states: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let i = process(&state.protocol, exclude)?;
    let w = wt_excluding(&state.protocol, &state.state, i, budget(depth, max_states)?)
        .map_err(search_err)?;
    let d = PyDict::new(py);
    d.set_item("schedule", actions(w.schedule()))?;
    d.set_item("decider", w.decider.index())?;
    d.set_item("value", w.value.as_u8())?;
    d.set_item("end_digest", w.end_digest.to_string())?;
    d.set_item("visited", w.visited)?;
    Ok(d)
}

#[pyfunction(name = "v_possible")]
#[pyo3(signature = (state, value, depth = 12, max_states = 2_000_000))]
fn py_v_possible(state: &PyState, value: u8, depth: usize, max_states: usize) -> PyResult<bool> {
    v_possible(&state.protocol, &state.state, bit(value)?, budget(depth, max_states)?)
        .map(|r| r.is_possible())
        .map_err(search_err)
}

/// Returns "bivalent", "0", "1" or "none"; with `via`, both branches avoid
/// that process.
#[pyfunction(name = "certify_bivalent")]
#[pyo3(signature = (state, via = None, depth = 12, max_states = 2_000_000))]
fn py_certify_bivalent(
    state: &PyState,
    via: Option<usize>,
    depth: usize,
    max_states: usize,
) -> PyResult<&'static str> {
    let b = budget(depth, max_states)?;
    let v = match via {
        Some(i) => certify_bivalent_via(&state.protocol, &state.state, process(&state.protocol, i)?, b),
        None => certify_bivalent(&state.protocol, &state.state, b),
    }
    .map_err(search_err)?;
    Ok(match v {
        Valence::Bivalent(_) => "bivalent",
        Valence::Univalent(Bit::Zero) => "0",
        Valence::Univalent(Bit::One) => "1",
        Valence::NoDecision => "none",
    })
}

/// Lazy generator of an execution in which no process decides.
#[pyclass(name = "Adversary", module = "flp_adversary_py")]
struct PyAdversary {
    inner: CoreAdversary<Builtin>,
}

#[pymethods]
impl PyAdversary {
    #[new]
    #[pyo3(signature = (protocol, variant = "program", depth = 12, max_states = 2_000_000))]
    fn new(protocol: &PyProtocol, variant: &str, depth: usize, max_states: usize) -> PyResult<Self> {
        let variant: Variant = variant.parse().map_err(PyValueError::new_err)?;
        let inner = CoreAdversary::new(protocol.inner.clone(), budget(depth, max_states)?, variant)
            .map_err(adversary_err)?;
        Ok(PyAdversary { inner })
    }

    #[getter]
    fn initial_state(&self) -> PyState {
        PyState {
            protocol: self.inner.protocol().clone(),
            state: self.inner.initial_state().clone(),
        }
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.bivalent_init().k
    }

    #[getter]
    fn init_vector(&self) -> String {
        self.inner.bivalent_init().init.to_string()
    }

    #[getter]
    fn steps_taken(&self) -> usize {
        self.inner.steps().len()
    }

    #[getter]
    fn rounds(&self) -> usize {
        self.inner.snapshot().round
    }

    fn step<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let k = self.inner.steps().len();
        self.nth_step(py, k)
    }

    /// Step `k` (0-based), generating earlier steps as needed.
    fn nth_step<'py>(&mut self, py: Python<'py>, k: usize) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.nth_step(k).map_err(adversary_err)?.clone();
        let d = PyDict::new(py);
        d.set_item("index", s.index)?;
        d.set_item("process", s.process.index())?;
        d.set_item("extension", actions(&s.extension))?;
        d.set_item("action", s.action.to_string())?;
        d.set_item("digest", s.digest.to_string())?;
        d.set_item(
            "fork_mode",
            serde_json::to_value(s.fork_mode)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string)),
        )?;
        d.set_item(
            "state",
            PyState {
                protocol: self.inner.protocol().clone(),
                state: s.state.clone(),
            },
        )?;
        Ok(d)
    }

    /// The trace file text for the steps generated so far.
    fn trace(&self) -> String {
        TraceFile::from_adversary(&self.inner).to_text()
    }
}

/// Replays a trace and returns its certificate as a dict.
#[pyfunction]
#[pyo3(signature = (text, certify_prefix = 20, depth = None))]
fn verify_trace<'py>(
    py: Python<'py>,
    text: &str,
    certify_prefix: usize,
    depth: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let trace = TraceFile::parse(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let p = Builtin::from_name(&trace.header.protocol, trace.header.n).map_err(model_err)?;
    let mut b = trace.header.budget;
    if let Some(d) = depth {
        b = budget(d, b.max_states)?;
    }
    let cert = verify::verify_trace(&trace, &p, b, certify_prefix)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let d = PyDict::new(py);
    d.set_item("steps_checked", cert.steps_checked)?;
    d.set_item("bivalence_certified_prefix", cert.bivalence_certified_prefix)?;
    d.set_item("fairness_ok", cert.fairness_ok)?;
    d.set_item("indecision_ok", cert.indecision_ok)?;
    let violations = PyList::empty(py);
    for v in &cert.violations {
        violations.append((v.step, v.detail.clone()))?;
    }
    d.set_item("violations", violations)?;
    Ok(d)
}

/// Seeded commutativity trials; returns (pairs checked, counterexample count).
#[pyfunction]
#[pyo3(signature = (protocol, trials = 100, seed = 0, depth = 6))]
fn commutativity_suite(protocol: &PyProtocol, trials: usize, seed: u64, depth: usize) -> (usize, usize) {
    let v = verify::commutativity_suite(&protocol.inner, trials, seed, depth);
    (v.pairs_checked, v.counterexamples.len())
}

#[pymodule]
fn flp_adversary_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProtocol>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyAdversary>()?;
    m.add_function(wrap_pyfunction!(witness, m)?)?;
    m.add_function(wrap_pyfunction!(py_v_possible, m)?)?;
    m.add_function(wrap_pyfunction!(py_certify_bivalent, m)?)?;
    m.add_function(wrap_pyfunction!(verify_trace, m)?)?;
    m.add_function(wrap_pyfunction!(commutativity_suite, m)?)?;
    m.add("SearchExhausted", m.py().get_type::<SearchExhausted>())?;
    m.add("Blocked", m.py().get_type::<Blocked>())?;
    Ok(())
}
