//! Python bindings: constellations, allocation plans, closed-form error
//! rates and the link simulator.

use std::path::Path;

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyTuple;

use csma_core::mapping::{
    build_address_bit_plan, build_lookup_plan, build_qos_plan, build_single_user_plan,
    format_lookup_table, parse_lookup_table, AddressBitLayout,
};
use csma_core::report::reports_to_csv;
use csma_core::{analytics, config, mapping, Demapped};

fn err(e: csma_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Unit-energy Gray-labelled square QAM.
#[pyclass(name = "Constellation", module = "csma", frozen)]
struct PyConstellation {
    inner: csma_core::Constellation,
}

#[pymethods]
impl PyConstellation {
    #[new]
    fn new(order: u32) -> PyResult<Self> {
        Ok(Self {
            inner: csma_core::Constellation::qam(order).map_err(err)?,
        })
    }

    #[getter]
    fn order(&self) -> u32 {
        self.inner.order()
    }

    #[getter]
    fn bits_per_symbol(&self) -> u32 {
        self.inner.bits_per_symbol()
    }

    fn modulate(&self, label: u32) -> PyResult<Complex64> {
        if label >= self.inner.order() {
            return Err(PyValueError::new_err(format!("label {label} out of range")));
        }
        Ok(self.inner.modulate(label))
    }

    /// Label of the nearest point.
    fn detect(&self, received: Complex64) -> u32 {
        self.inner.detect(received)
    }

    /// Points as complex numbers, indexed by label.
    fn points(&self) -> Vec<Complex64> {
        (0..self.inner.order())
            .map(|l| self.inner.modulate(l))
            .collect()
    }

    fn mean_energy(&self) -> f64 {
        self.inner.mean_energy()
    }

    /// `(full_dmin, [per-user dmin])`.
    #[pyo3(signature = (plan=None))]
    fn min_distance(&self, plan: Option<&PyAllocationPlan>) -> PyResult<(f64, Vec<f64>)> {
        let r = self
            .inner
            .min_distance(plan.map(|p| &p.inner))
            .map_err(err)?;
        Ok((r.full_constellation_dmin, r.per_user_dmin))
    }

    fn __repr__(&self) -> String {
        format!("Constellation({})", self.inner.order())
    }
}

/// Partition of a constellation's labels among users.
#[pyclass(name = "AllocationPlan", module = "csma", frozen)]
struct PyAllocationPlan {
    inner: mapping::AllocationPlan,
}

#[pymethods]
impl PyAllocationPlan {
    /// Users addressed by the label bits at `positions`.
    #[staticmethod]
    fn address_bits(order: u32, positions: Vec<u32>) -> PyResult<Self> {
        let layout = AddressBitLayout::new(order, &positions).map_err(err)?;
        Ok(Self {
            inner: build_address_bit_plan(&layout).map_err(err)?,
        })
    }

    /// Explicit table, one `user_id,data_word,codeword` row per line.
    #[staticmethod]
    fn lookup(order: u32, table: &str) -> PyResult<Self> {
        let rows = parse_lookup_table(table).map_err(err)?;
        Ok(Self {
            inner: build_lookup_plan(order, &rows).map_err(err)?,
        })
    }

    /// One user per entry of `bits`, each owning `2**bits[i]` labels.
    #[staticmethod]
    fn qos(order: u32, bits: Vec<u32>) -> PyResult<Self> {
        Ok(Self {
            inner: build_qos_plan(order, &bits).map_err(err)?,
        })
    }

    #[staticmethod]
    fn single(order: u32) -> PyResult<Self> {
        Ok(Self {
            inner: build_single_user_plan(order).map_err(err)?,
        })
    }

    #[getter]
    fn order(&self) -> u32 {
        self.inner.order()
    }

    fn user_ids(&self) -> Vec<u32> {
        self.inner.user_ids()
    }

    fn data_bits(&self, user_id: u32) -> PyResult<u32> {
        self.inner
            .user(user_id)
            .map(|u| u.data_bits())
            .ok_or_else(|| PyValueError::new_err(format!("unknown user {user_id}")))
    }

    fn map_symbol(&self, user_id: u32, data_word: u32) -> PyResult<u32> {
        self.inner.map_symbol(user_id, data_word).map_err(err)
    }

    /// `(user_id, data_word)`, or `None` for an unallocated label.
    fn demap_symbol(&self, label: u32) -> Option<(u32, u32)> {
        match self.inner.demap_symbol(label) {
            Demapped::User { user_id, data_word } => Some((user_id, data_word)),
            Demapped::Unallocated => None,
        }
    }

    /// Per-user throughput factor as a `fractions.Fraction`.
    fn throughput_reduction<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let t = self.inner.throughput_reduction().map_err(err)?;
        fraction(py, *t.numer(), *t.denom())
    }

    fn table(&self) -> String {
        format_lookup_table(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "AllocationPlan(order={}, users={:?})",
            self.inner.order(),
            self.inner.user_ids()
        )
    }
}

fn fraction(py: Python<'_>, num: u64, den: u64) -> PyResult<Bound<'_, PyAny>> {
    let args = PyTuple::new(py, [num, den])?;
    py.import("fractions")?.getattr("Fraction")?.call1(args)
}

/// Users per modulator when each sends `data_bits` of a `log2 order`-bit label.
#[pyfunction]
fn capacity_enhancement(order: u32, data_bits: u32) -> PyResult<u64> {
    mapping::capacity_enhancement(order, data_bits).map_err(err)
}

/// Per-user throughput factor as a `fractions.Fraction`.
#[pyfunction]
fn throughput_reduction(
    py: Python<'_>,
    order: u32,
    address_bits: u32,
) -> PyResult<Bound<'_, PyAny>> {
    let t = mapping::throughput_reduction(order, address_bits).map_err(err)?;
    fraction(py, *t.numer(), *t.denom())
}

#[pyfunction]
fn q_function(x: f64) -> f64 {
    analytics::q_function(x)
}

#[pyfunction]
fn ser_mqam(order: u64, symbol_snr: f64) -> PyResult<f64> {
    analytics::ser_mqam(order, symbol_snr).map_err(err)
}

#[pyfunction]
fn ser_data_width(data_bits: u32, symbol_snr: f64) -> PyResult<f64> {
    analytics::ser_data_width(data_bits, symbol_snr).map_err(err)
}

#[pyfunction]
fn ser_shared(data_bits: u32, address_bits: u32, symbol_snr: f64) -> PyResult<f64> {
    analytics::ser_shared(data_bits, address_bits, symbol_snr).map_err(err)
}

#[pyfunction]
fn ber_gray_approx(order: u64, symbol_snr: f64) -> PyResult<f64> {
    analytics::ber_gray_approx(order, symbol_snr).map_err(err)
}

/// Runs every experiment of a config text and returns the report CSV.
/// `lookup:` paths resolve against `base_dir`.
#[pyfunction]
#[pyo3(signature = (config_text, base_dir=".", seed=None))]
fn run_experiment(
    py: Python<'_>,
    config_text: &str,
    base_dir: &str,
    seed: Option<u64>,
) -> PyResult<String> {
    let mut runs = config::parse_config(config_text, Path::new(base_dir)).map_err(err)?;
    if let Some(seed) = seed {
        for r in &mut runs {
            r.seed = seed;
        }
    }
    let reports = py
        .detach(|| {
            runs.iter()
                .map(csma_core::run_experiment)
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(err)?;
    Ok(match reports.as_slice() {
        [single] => single.to_csv(),
        many => reports_to_csv(many),
    })
}

#[pymodule]
fn csma(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConstellation>()?;
    m.add_class::<PyAllocationPlan>()?;
    m.add_function(wrap_pyfunction!(capacity_enhancement, m)?)?;
    m.add_function(wrap_pyfunction!(throughput_reduction, m)?)?;
    m.add_function(wrap_pyfunction!(q_function, m)?)?;
    m.add_function(wrap_pyfunction!(ser_mqam, m)?)?;
    m.add_function(wrap_pyfunction!(ser_data_width, m)?)?;
    m.add_function(wrap_pyfunction!(ser_shared, m)?)?;
    m.add_function(wrap_pyfunction!(ber_gray_approx, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
