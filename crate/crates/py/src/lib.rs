//! Python bindings.
//!
//! Artifacts cross the boundary as JSON text; reports come back as plain
//! Python dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::{json, Value};

use popforge::analysis::{explore_post, lemma_oracle_suite, simulate_seeds, verify_artifact, Level, SimOptions, VerifyOptions};
use popforge::construction::{build_example_program, build_threshold_program, level_constant, threshold_k};
use popforge::machine::Machine;
use popforge::program::{Program, ProgramSemantics};
use popforge::protocol::{compile_protocol, Protocol, ProtocolSemantics};
use popforge::{canonical_json, Predicate};

fn err(e: popforge::Error) -> PyErr {
    match e {
        popforge::Error::CapExceeded { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

fn big_int<'py>(py: Python<'py>, digits: String) -> PyResult<Bound<'py, PyAny>> {
    py.import("builtins")?.getattr("int")?.call1((digits,))
}

fn need_levels(n: u32) -> PyResult<()> {
    if n == 0 {
        return Err(PyValueError::new_err("n must be at least 1"));
    }
    Ok(())
}

/// N_i as an exact integer.
#[pyfunction]
fn level_constant_of(py: Python<'_>, i: u32) -> PyResult<Bound<'_, PyAny>> {
    need_levels(i)?;
    big_int(py, level_constant(i).to_string())
}

/// Threshold decided by the n-level construction.
#[pyfunction]
fn threshold(py: Python<'_>, n: u32) -> PyResult<Bound<'_, PyAny>> {
    need_levels(n)?;
    big_int(py, threshold_k(n).to_string())
}

/// Program JSON for `kind` in {"threshold", "example"}.
#[pyfunction]
#[pyo3(signature = (kind, n=1))]
fn generate(kind: &str, n: u32) -> PyResult<String> {
    match kind {
        "threshold" => {
            need_levels(n)?;
            Ok(build_threshold_program(n).to_json())
        }
        "example" => Ok(build_example_program().to_json()),
        _ => Err(PyValueError::new_err(format!("unknown kind `{kind}`"))),
    }
}

fn parse_program(text: &str) -> PyResult<Program> {
    let p = Program::from_json(text).map_err(err)?;
    p.check().map_err(err)?;
    Ok(p)
}

/// Lowers a program. Returns `(machine_json, map)`.
#[pyfunction]
fn lower<'py>(py: Python<'py>, program: &str) -> PyResult<(String, Bound<'py, PyAny>)> {
    let p = parse_program(program)?;
    let (m, map) = popforge::lowering::lower(&p).map_err(err)?;
    let map = serde_json::to_value(&map).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((m.to_json().map_err(err)?, to_py(py, &map)?))
}

/// Compiles a machine. Returns `(protocol_json, stats)`.
#[pyfunction]
fn compile<'py>(py: Python<'py>, machine: &str) -> PyResult<(String, Bound<'py, PyAny>)> {
    let m = Machine::from_json(machine).map_err(err)?;
    m.check().map_err(err)?;
    let c = compile_protocol(&m).map_err(err)?;
    let stats = serde_json::to_value(&c.stats).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((c.protocol.to_json().map_err(err)?, to_py(py, &stats)?))
}

/// Verdict per population size in `m_min..=m_max` against `expect`.
#[pyfunction]
#[pyo3(signature = (level, artifact, expect, m_max, m_min=0, cap=None))]
fn verify<'py>(
    py: Python<'py>,
    level: &str,
    artifact: &str,
    expect: &str,
    m_max: u64,
    m_min: u64,
    cap: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let level: Level = level.parse().map_err(err)?;
    let expected: Predicate = expect.parse().map_err(err)?;
    let mut opts = VerifyOptions::default();
    if let Some(cap) = cap {
        opts.cap = cap;
    }
    let ms: Vec<u64> = (m_min..=m_max).collect();
    let report = py.detach(|| verify_artifact(level, artifact, &ms, &expected, opts)).map_err(err)?;
    let v = serde_json::to_value(&report).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &v)
}

/// Seeded runs of a protocol from `m` agents.
#[pyfunction]
#[pyo3(signature = (protocol, m, seeds=10, first_seed=0, max_steps=100_000_000, window=2_000_000))]
fn simulate<'py>(
    py: Python<'py>,
    protocol: &str,
    m: u64,
    seeds: u64,
    first_seed: u64,
    max_steps: u64,
    window: u64,
) -> PyResult<Bound<'py, PyAny>> {
    if m < 2 {
        return Err(PyValueError::new_err("simulation needs at least 2 agents"));
    }
    let p = Protocol::from_json(protocol).map_err(err)?;
    let sem = ProtocolSemantics::new(&p).map_err(err)?;
    let c0 = sem.initial_config(m).map_err(err)?;
    let runs = py.detach(|| simulate_seeds(&sem, &c0, first_seed..first_seed + seeds, SimOptions { max_steps, window }));
    let v = serde_json::to_value(&runs).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &v)
}

/// Post-set of procedure `proc` from the register counts in `regs`.
#[pyfunction]
#[pyo3(signature = (program, proc, regs, cap=1_000_000))]
fn post<'py>(
    py: Python<'py>,
    program: &str,
    proc: &str,
    regs: std::collections::HashMap<String, u64>,
    cap: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let p = parse_program(program)?;
    let mut c = vec![0; p.registers.len()];
    for (name, k) in regs {
        let i = p.register_index(&name).ok_or_else(|| PyValueError::new_err(format!("unknown register `{name}`")))?;
        c[i] = k;
    }
    let sem = ProgramSemantics::new(&p).map_err(err)?;
    let post = explore_post(&sem, proc, &c, cap).map_err(err)?;
    to_py(py, &post.to_json(&p.registers))
}

/// Exhaustive check of the procedure lemmas for 1 or 2 levels.
#[pyfunction]
#[pyo3(signature = (n=1, max_total=4))]
fn lemmas(py: Python<'_>, n: u32, max_total: u64) -> PyResult<Bound<'_, PyAny>> {
    let r = py.detach(|| lemma_oracle_suite(n, max_total)).map_err(err)?;
    let v = json!({
        "passed": r.passed(),
        "report": serde_json::to_value(&r).map_err(|e| PyValueError::new_err(e.to_string()))?,
    });
    to_py(py, &v)
}

/// Re-serialises any JSON text with sorted keys.
#[pyfunction]
fn canonical(text: &str) -> PyResult<String> {
    let v: Value = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    canonical_json(&v).map_err(err)
}

#[pymodule]
fn popforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(level_constant_of, m)?)?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(lower, m)?)?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(post, m)?)?;
    m.add_function(wrap_pyfunction!(lemmas, m)?)?;
    m.add_function(wrap_pyfunction!(canonical, m)?)?;
    Ok(())
}
