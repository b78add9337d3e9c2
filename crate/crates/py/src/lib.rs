//! Python bindings: `import toa_sim`.

use num_complex::Complex64 as C64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use toa_core::cli::{absorption_point, compute_distributions};
use toa_core::config::{BackendChoice, RunConfig};
use toa_core::dynamics::{Backend, PacketEvolution};
use toa_core::model::{cesium, AtomLaserConfig, RabiProfile, ValidatedConfig};
use toa_core::packet::{GaussianComponent, PacketSpec};
use toa_core::series::TimeGrid;
use toa_core::{regime, scattering, transfer, Error};

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        1 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Atom and beam parameters. `profile` is "sharp" or "gaussian"; for a
/// Gaussian beam `omega` is the area parameter Ω₀.
#[pyclass(name = "AtomLaser", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyAtomLaser {
    inner: ValidatedConfig,
}

#[pymethods]
impl PyAtomLaser {
    #[new]
    #[pyo3(signature = (omega, beam_width, mass = cesium::MASS, gamma = cesium::GAMMA, profile = "sharp", center = None, width = None))]
    fn new(omega: f64, beam_width: f64, mass: f64, gamma: f64, profile: &str, center: Option<f64>, width: Option<f64>) -> PyResult<Self> {
        let profile = match profile {
            "sharp" => RabiProfile::SharpEdged { omega },
            "gaussian" => RabiProfile::Gaussian {
                omega0: omega,
                center: center.unwrap_or(0.5 * beam_width),
                width: width.ok_or_else(|| PyValueError::new_err("gaussian profile needs width"))?,
            },
            o => return Err(PyValueError::new_err(format!("unknown profile '{o}'"))),
        };
        let inner = AtomLaserConfig { mass, gamma, profile, beam_width }.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter]
    fn beam_width(&self) -> f64 {
        self.inner.beam_width()
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    /// Photon detection probability A(v). `backend` is "auto", "analytic"
    /// or "transfer".
    #[pyo3(signature = (v, backend = "auto", slices = transfer::DEFAULT_SLICES))]
    fn absorption(&self, v: f64, backend: &str, slices: usize) -> PyResult<f64> {
        match backend.parse::<BackendChoice>().map_err(py_err)? {
            BackendChoice::Analytic => scattering::absorption_at(&self.inner, v),
            BackendChoice::Transfer => transfer::absorption_profile(&self.inner, v, slices),
            BackendChoice::Auto if self.inner.profile().is_sharp() => scattering::absorption_at(&self.inner, v),
            BackendChoice::Auto => transfer::absorption_profile(&self.inner, v, slices),
        }
        .map_err(py_err)
    }

    /// (R1, R2, T1, T2) amplitudes at velocity `v`.
    fn amplitudes(&self, v: f64) -> PyResult<(C64, C64, C64, C64)> {
        let k = self.inner.wavenumber(v);
        let s = Backend::auto(&self.inner).solve(k, &self.inner).map_err(py_err)?;
        Ok((s.r1, s.r2, s.t1_at_edge(), s.t2_at_edge()))
    }

    /// Regime report as a dict.
    #[pyo3(signature = (v, delta_t, much_less = regime::DEFAULT_MUCH_LESS))]
    fn classify<'py>(&self, py: Python<'py>, v: f64, delta_t: f64, much_less: f64) -> PyResult<Bound<'py, PyDict>> {
        let r = regime::classify(&self.inner, v, delta_t, much_less).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("driving", regime::driving_name(r.driving))?;
        d.set_item("reflection", r.reflection_flag)?;
        d.set_item("beam_class", regime::beam_name(r.beam_class))?;
        d.set_item("penetration_length", r.penetration_length)?;
        d.set_item("ridge_index", r.ridge_index)?;
        let terms = PyDict::new(py);
        for t in &r.terms {
            terms.set_item(t.name, t.margin)?;
        }
        d.set_item("margins", terms)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "AtomLaser(omega={:e}, beam_width={:e}, gamma={:e}, mass={:e})",
            self.inner.omega(),
            self.inner.beam_width(),
            self.inner.gamma(),
            self.inner.mass()
        )
    }
}

/// Coherent sum of Gaussian components, each a tuple
/// (v, delta_x, waist_position, waist_time[, weight_re[, weight_im]]).
#[pyclass(name = "Packet", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPacket {
    inner: PacketSpec,
}

#[pymethods]
impl PyPacket {
    #[new]
    #[pyo3(signature = (components, mass = cesium::MASS))]
    fn new(components: Vec<Vec<f64>>, mass: f64) -> PyResult<Self> {
        let comps = components
            .into_iter()
            .map(|f| {
                let c = match f.len() {
                    4..=6 => GaussianComponent::new(f[0], f[1], f[2], f[3]),
                    _ => return Err(PyValueError::new_err("a component has 4 to 6 entries")),
                };
                let w = C64::new(f.get(4).copied().unwrap_or(1.0), f.get(5).copied().unwrap_or(0.0));
                Ok(c.with_weight(w))
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self { inner: PacketSpec::new(comps, mass).map_err(py_err)? })
    }

    fn norm(&self) -> f64 {
        self.inner.analytic_norm()
    }

    /// Exact first-photon density γP₂(t) on `n` times spanning [t0, t1],
    /// with the survival probability N(t).
    fn first_photon_density(&self, laser: &PyAtomLaser, t0: f64, t1: f64, n: usize) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let times = TimeGrid::spanning(t0, t1, n).map_err(py_err)?;
        let (mut ev, domain) = PacketEvolution::for_span(self.inner.clone(), laser.inner.clone(), t0, t1).map_err(py_err)?;
        let d = ev.first_photon_density(&times, &domain).map_err(py_err)?;
        Ok((times.times().collect(), d.pi.values, d.survival.values))
    }
}

/// Builds a run configuration from an optional preset, `key = value` text
/// and a list of "key=value" overrides.
fn run_config(preset: Option<&str>, text: &str, overrides: Vec<String>) -> PyResult<RunConfig> {
    let mut cfg = match preset {
        Some(p) => RunConfig::preset(p),
        None => Ok(RunConfig::default()),
    }
    .map_err(py_err)?;
    cfg.apply_text(text).map_err(py_err)?;
    for o in overrides {
        cfg.set_pair(&o).map_err(py_err)?;
    }
    Ok(cfg)
}

/// J, Π, Π_id, normalised Π_id and Π_K columns as a dict of lists.
#[pyfunction]
#[pyo3(signature = (preset = None, text = "", overrides = Vec::new()))]
fn distributions<'py>(py: Python<'py>, preset: Option<&str>, text: &str, overrides: Vec<String>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = run_config(preset, text, overrides)?;
    let d = compute_distributions(&cfg).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("t", d.flux.series.grid().times().collect::<Vec<_>>())?;
    out.set_item("J", d.flux.series.values)?;
    out.set_item("Pi", d.pi.series.values)?;
    out.set_item("Pi_id", d.ideal.series.values)?;
    out.set_item("Pi_id_normalized", d.ideal_normalized.series.values)?;
    out.set_item("Pi_K", d.kijowski.series.values)?;
    out.set_item("warnings", d.warnings)?;
    Ok(out)
}

/// A(v, Ω) on the configured map grid, as a list of rows (v, Ω, A); failed
/// points carry NaN.
#[pyfunction]
#[pyo3(signature = (preset = None, text = "", overrides = Vec::new()))]
fn absorption_map(preset: Option<&str>, text: &str, overrides: Vec<String>) -> PyResult<Vec<(f64, f64, f64)>> {
    let cfg = run_config(preset, text, overrides)?;
    let (vs, omegas) = cfg.map_axes().map_err(py_err)?;
    let mut rows = Vec::with_capacity(vs.len() * omegas.len());
    for &v in &vs {
        for &o in &omegas {
            rows.push((v, o, absorption_point(&cfg, v, o).unwrap_or(f64::NAN)));
        }
    }
    Ok(rows)
}

#[pyfunction]
#[pyo3(signature = (beam_width, gamma = cesium::GAMMA, mass = cesium::MASS))]
fn critical_temperature(beam_width: f64, gamma: f64, mass: f64) -> f64 {
    regime::critical_temperature(beam_width, gamma, mass)
}

#[pyfunction]
fn ridge_velocity(beam_width: f64, omega: f64, n: usize) -> f64 {
    regime::ridge_velocity(beam_width, omega, n)
}

#[pyfunction]
fn penetration_length(v: f64, gamma: f64, omega: f64) -> f64 {
    regime::penetration_length(v, gamma, omega)
}

#[pymodule]
fn toa_sim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAtomLaser>()?;
    m.add_class::<PyPacket>()?;
    m.add_function(wrap_pyfunction!(distributions, m)?)?;
    m.add_function(wrap_pyfunction!(absorption_map, m)?)?;
    m.add_function(wrap_pyfunction!(critical_temperature, m)?)?;
    m.add_function(wrap_pyfunction!(ridge_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(penetration_length, m)?)?;
    m.add("CESIUM_MASS", cesium::MASS)?;
    m.add("CESIUM_GAMMA", cesium::GAMMA)?;
    Ok(())
}
