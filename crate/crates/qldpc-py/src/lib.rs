//! Python bindings for the qldpc toolkit: code construction, noise folding,
//! the protocol oracle, a single memory-experiment operating point, and the
//! analysis helpers.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qldpc::analysis;
use qldpc::circuit::{build_memory_experiment, Basis};
use qldpc::codes;
use qldpc::decoder::{BpConfig, OsdConfig, WindowedDecoder};
use qldpc::distill::{self, FoldedNoise};
use qldpc::pauli_engine::{build_detector_model, sample_shots};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A CSS code: check matrices, logicals, and parameters.
#[pyclass(name = "CssCode")]
struct PyCssCode {
    inner: codes::CssCode,
}

#[pymethods]
impl PyCssCode {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn d_upper(&self) -> Option<usize> {
        self.inner.d_upper
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.family.clone()
    }

    /// Row supports of the X check matrix.
    fn hx(&self) -> Vec<Vec<usize>> {
        self.inner.hx.row_supports().to_vec()
    }

    /// Row supports of the Z check matrix.
    fn hz(&self) -> Vec<Vec<usize>> {
        self.inner.hz.row_supports().to_vec()
    }

    /// Row supports of the logical X operators.
    fn lx(&self) -> Vec<Vec<usize>> {
        self.inner.lx.row_supports().to_vec()
    }

    /// Row supports of the logical Z operators.
    fn lz(&self) -> Vec<Vec<usize>> {
        self.inner.lz.row_supports().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "CssCode(n={}, k={}, d_upper={:?}, family={:?})",
            self.inner.n, self.inner.k, self.inner.d_upper, self.inner.family
        )
    }
}

/// Hypergraph-product family instance (index 1-3).
#[pyfunction]
#[pyo3(signature = (index, seed=7))]
fn hgp_code(index: usize, seed: u64) -> PyResult<PyCssCode> {
    Ok(PyCssCode { inner: codes::hgp_family_instance(index, seed).map_err(err)? })
}

/// Lifted-product family instance (index 1-4).
#[pyfunction]
fn lp_code(index: usize) -> PyResult<PyCssCode> {
    Ok(PyCssCode { inner: codes::lp_family_instance(index).map_err(err)? })
}

/// Rotated-layout surface code of distance d (as a hypergraph product of
/// repetition codes).
#[pyfunction]
fn surface_code(d: usize) -> PyResult<PyCssCode> {
    Ok(PyCssCode { inner: codes::surface_code(d).map_err(err)? })
}

/// Tail-biting spatially coupled toric code of distance d.
#[pyfunction]
fn toric_sc_code(d: usize) -> PyResult<PyCssCode> {
    Ok(PyCssCode { inner: codes::sc_hgp(&codes::ScSpec::toric(d)).map_err(err)? })
}

/// Effective single-sided Bell depolarizing strength: 2p - (4/3)p^2.
#[pyfunction]
fn fold_bell_noise(p_bell: f64) -> PyResult<f64> {
    distill::fold_bell_noise(p_bell).map_err(err)
}

/// Effective single-sided gate noise: 2p.
#[pyfunction]
fn fold_gate_noise(p_gate: f64) -> PyResult<f64> {
    distill::fold_gate_noise(p_gate).map_err(err)
}

/// Per-cycle logical error rate: 1 - (1 - p)^(1/cycles).
#[pyfunction]
fn per_cycle(p_block_total: f64, cycles: usize) -> f64 {
    analysis::per_cycle(p_block_total, cycles)
}

/// Combine Z/X block error rates: 1 - (1 - p_z)(1 - p_x).
#[pyfunction]
fn combine_bases(p_z: f64, p_x: f64) -> f64 {
    analysis::combine_bases(p_z, p_x)
}

/// Direct two-node protocol oracle. Returns (rate, stderr, failures, shots).
#[pyfunction]
fn two_sided_oracle(
    code: &PyCssCode,
    p_bell: f64,
    p_gate: f64,
    shots: u64,
    seed: u64,
) -> PyResult<(f64, f64, u64, u64)> {
    let noise = FoldedNoise::new(p_bell, p_gate).map_err(err)?;
    let e = distill::two_sided_oracle(&code.inner, &noise, shots, seed).map_err(err)?;
    Ok((e.rate, e.stderr, e.failures, e.shots))
}

/// Folded single-node oracle. Returns (rate, stderr, failures, shots).
#[pyfunction]
fn folded_oracle(
    code: &PyCssCode,
    p_bell: f64,
    p_gate: f64,
    shots: u64,
    seed: u64,
) -> PyResult<(f64, f64, u64, u64)> {
    let noise = FoldedNoise::new(p_bell, p_gate).map_err(err)?;
    let e = distill::folded_oracle(&code.inner, &noise, shots, seed).map_err(err)?;
    Ok((e.rate, e.stderr, e.failures, e.shots))
}

/// Simulate one memory-experiment operating point with the windowed BP+OSD
/// decoder under folded noise. Returns (shots, failures).
#[pyfunction]
#[pyo3(signature = (code, basis, rounds, cycles_per_round, p_bell_eff, p_gate_eff, shots, seed, osd_sweep=10))]
#[allow(clippy::too_many_arguments)]
fn memory_point(
    py: Python<'_>,
    code: &PyCssCode,
    basis: &str,
    rounds: usize,
    cycles_per_round: usize,
    p_bell_eff: f64,
    p_gate_eff: f64,
    shots: usize,
    seed: u64,
    osd_sweep: usize,
) -> PyResult<(u64, u64)> {
    let basis: Basis = basis.parse().map_err(err)?;
    let code = &code.inner;
    let noise = FoldedNoise::from_effective(p_bell_eff, p_gate_eff).map_err(err)?;
    py.allow_threads(move || {
        let circuit =
            build_memory_experiment(code, basis, rounds, cycles_per_round, &noise, 0.0);
        let model = build_detector_model(&circuit).map_err(err)?;
        let m_total = code.hz.rows() + code.hx.rows();
        let decoder = WindowedDecoder::new(
            &model,
            rounds,
            cycles_per_round,
            m_total,
            BpConfig::default(),
            OsdConfig { order: 0, sweep: osd_sweep },
        )
        .map_err(err)?;
        let batch = sample_shots(&model, shots, seed);
        let mut failures = 0u64;
        for s in 0..shots {
            let mut syn = vec![0u8; model.n_detectors];
            for (d, bit) in syn.iter_mut().enumerate() {
                *bit = batch.detector_bit(s, d) as u8;
            }
            let out = decoder.decode(&syn).map_err(err)?;
            let wrong = out
                .predicted_observables
                .iter()
                .enumerate()
                .any(|(k, &pred)| (pred == 1) != batch.observable_bit(s, k));
            failures += wrong as u64;
        }
        Ok((shots as u64, failures))
    })
}

/// Fit the subthreshold ansatz P = A (p / p_th)^(B n^C) to
/// (code, p, shots, failures, cycles, n) tuples. Returns a parameter dict.
#[pyfunction]
fn fit_subthreshold(
    points: Vec<(String, f64, u64, u64, usize, f64)>,
) -> PyResult<std::collections::HashMap<String, f64>> {
    let pts: Vec<analysis::LerPoint> = points
        .iter()
        .map(|(code, p, shots, failures, cycles, n)| {
            analysis::LerPoint::new(code, *p, *shots, *failures, *cycles, *n)
        })
        .collect();
    let fit = analysis::fit_subthreshold(&pts).map_err(err)?;
    Ok(fit.params.iter().cloned().collect())
}

#[pymodule]
fn qldpc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCssCode>()?;
    m.add_function(wrap_pyfunction!(hgp_code, m)?)?;
    m.add_function(wrap_pyfunction!(lp_code, m)?)?;
    m.add_function(wrap_pyfunction!(surface_code, m)?)?;
    m.add_function(wrap_pyfunction!(toric_sc_code, m)?)?;
    m.add_function(wrap_pyfunction!(fold_bell_noise, m)?)?;
    m.add_function(wrap_pyfunction!(fold_gate_noise, m)?)?;
    m.add_function(wrap_pyfunction!(per_cycle, m)?)?;
    m.add_function(wrap_pyfunction!(combine_bases, m)?)?;
    m.add_function(wrap_pyfunction!(two_sided_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(folded_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(memory_point, m)?)?;
    m.add_function(wrap_pyfunction!(fit_subthreshold, m)?)?;
    Ok(())
}
