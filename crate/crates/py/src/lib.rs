//! Python bindings: metric profiles, flow runs, the blowdown soliton and
//! blow-up alignment, mirroring the CLI pipeline.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use bergerflow_core::blowup::{align_distance, extract_blowup_sequence, parabolic_rescale};
use bergerflow_core::calabi::{g2_deviation, run_scalar_to_time, CalabiState};
use bergerflow_core::curvature::compute_curvatures;
use bergerflow_core::diagnostics::{compute_diagnostics, psi_field};
use bergerflow_core::error::Error;
use bergerflow_core::flow::{self, RunOptions};
use bergerflow_core::grid::SpatialGrid;
use bergerflow_core::initial::{
    construct_and_validate, FShape, PhiFn, SeedParams,
};
use bergerflow_core::profile::MetricProfile;
use bergerflow_core::soliton::{
    ode_residuals, soliton_system_residuals, SolitonProfile, SOLITON_LAMBDA,
};

fn err(e: Error) -> PyErr {
    match e {
        Error::Parameter(_) | Error::Config(_) | Error::Contract(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// A warped Berger metric profile on the fixed computational grid.
#[pyclass(name = "Profile", from_py_object)]
#[derive(Clone)]
struct PyProfile {
    inner: MetricProfile,
}

#[pymethods]
impl PyProfile {
    /// Build a member of the seed family of initial metrics.
    #[staticmethod]
    #[pyo3(signature = (alpha, delta, epsilon, nodes, length=std::f64::consts::PI,
                        f_shape="half_sine", phi_fn="constant", cap_fraction=0.25,
                        bump_width=0.5))]
    #[allow(clippy::too_many_arguments)]
    fn seed(
        alpha: f64,
        delta: f64,
        epsilon: f64,
        nodes: usize,
        length: f64,
        f_shape: &str,
        phi_fn: &str,
        cap_fraction: f64,
        bump_width: f64,
    ) -> PyResult<Self> {
        let f_shape = match f_shape {
            "half_sine" => FShape::HalfSine { length },
            "plateau" => FShape::Plateau {
                length,
                cap_fraction,
            },
            other => return Err(PyValueError::new_err(format!("unknown f_shape {other:?}"))),
        };
        let phi_fn = match phi_fn {
            "constant" => PhiFn::Constant,
            "bump" => PhiFn::Bump {
                width_fraction: bump_width,
            },
            other => return Err(PyValueError::new_err(format!("unknown phi_fn {other:?}"))),
        };
        let params = SeedParams {
            f_shape,
            alpha,
            delta,
            epsilon,
            phi_fn,
        };
        let grid = SpatialGrid::new(nodes).map_err(err)?;
        let (profile, report) = construct_and_validate(&params, &grid).map_err(err)?;
        if !report.all_passed() {
            return Err(PyValueError::new_err(format!(
                "seed fails the closeness assumptions: {report:?}"
            )));
        }
        Ok(PyProfile { inner: profile })
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn f(&self) -> Vec<f64> {
        self.inner.f.clone()
    }

    #[getter]
    fn g(&self) -> Vec<f64> {
        self.inner.g.clone()
    }

    #[getter]
    fn jac(&self) -> Vec<f64> {
        self.inner.jac.clone()
    }

    fn arclength(&self) -> Vec<f64> {
        self.inner.arclength()
    }

    fn psi(&self) -> Vec<f64> {
        psi_field(&self.inner)
    }

    /// The four sectional curvatures and the scalar curvature.
    fn curvatures<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let k = compute_curvatures(&self.inner).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("k01", k.k01)?;
        d.set_item("k02", k.k02)?;
        d.set_item("k12", k.k12)?;
        d.set_item("k23", k.k23)?;
        d.set_item("r", k.r)?;
        Ok(d)
    }

    /// Scalar diagnostics and the closeness flags for the given delta.
    fn diagnostics<'py>(&self, py: Python<'py>, delta: f64) -> PyResult<Bound<'py, PyDict>> {
        let r = compute_diagnostics(&self.inner, delta).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("t", r.t)?;
        d.set_item("mu", r.mu)?;
        d.set_item("mu_argmin", r.mu_argmin)?;
        d.set_item("g_plus", r.g_plus)?;
        d.set_item("psi_min", r.psi_min)?;
        d.set_item("psi_max", r.psi_max)?;
        d.set_item("f_cal_max_abs", r.f_cal_max_abs)?;
        d.set_item("fs_min", r.fs_min)?;
        d.set_item("fs_max", r.fs_max)?;
        d.set_item("sup_curv", r.sup_curv)?;
        d.set_item("q_min", r.q_min)?;
        d.set_item("threshold", r.threshold)?;
        d.set_item("flags", r.assumption_flags.to_vec())?;
        Ok(d)
    }

    /// One explicit flow step.
    fn step(&self, dt: f64) -> PyResult<Self> {
        Ok(PyProfile {
            inner: flow::step(&self.inner, dt).map_err(err)?,
        })
    }

    /// Parabolic rescale by K about t_center.
    #[pyo3(signature = (k, t_center=0.0))]
    fn rescale(&self, k: f64, t_center: f64) -> PyResult<Self> {
        Ok(PyProfile {
            inner: parabolic_rescale(&self.inner, k, t_center).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Profile(nodes={}, t={:.6}, mu={:.6})",
            self.inner.node_count(),
            self.inner.t,
            self.inner.g.iter().cloned().fold(f64::INFINITY, f64::min)
        )
    }
}

fn run_options(
    cfl: f64,
    mu_stop_fraction: f64,
    remesh_ratio: f64,
    record_stride: usize,
    delta: f64,
) -> RunOptions {
    let mut opts = RunOptions::default();
    opts.control.cfl = cfl;
    opts.stop.mu_stop_fraction = mu_stop_fraction;
    opts.remesh_ratio = remesh_ratio;
    opts.record_stride = record_stride;
    opts.delta = delta;
    opts
}

/// Drive the flow to its stop criterion; returns the diagnostic series and
/// the singular-time estimate.
#[pyfunction]
#[pyo3(signature = (profile, delta=0.5, mu_stop_fraction=0.1, cfl=0.2,
                    remesh_ratio=2.0, record_stride=25))]
fn run_flow<'py>(
    py: Python<'py>,
    profile: &PyProfile,
    delta: f64,
    mu_stop_fraction: f64,
    cfl: f64,
    remesh_ratio: f64,
    record_stride: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = run_options(cfl, mu_stop_fraction, remesh_ratio, record_stride, delta);
    let traj = flow::run(&profile.inner, &opts).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("steps", traj.steps)?;
    d.set_item("stop_reason", format!("{:?}", traj.stop_reason))?;
    d.set_item("remesh_count", traj.remesh_count)?;
    d.set_item("t", traj.series.iter().map(|r| r.t).collect::<Vec<_>>())?;
    d.set_item("mu", traj.series.iter().map(|r| r.mu).collect::<Vec<_>>())?;
    d.set_item(
        "psi_max",
        traj.series.iter().map(|r| r.psi_max).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "threshold",
        traj.series.iter().map(|r| r.threshold).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "sup_curv",
        traj.series.iter().map(|r| r.sup_curv).collect::<Vec<_>>(),
    )?;
    d.set_item("t_est", traj.t_est)?;
    d.set_item("slope", traj.fit.map(|f| f.slope))?;
    d.set_item(
        "final",
        PyProfile {
            inner: traj.final_profile().clone(),
        }
        .into_pyobject(py)?,
    )?;
    Ok(d)
}

/// Run the flow, extract geometrically spaced blow-up frames at the
/// crushing pole, and align each against the blowdown soliton.
#[pyfunction]
#[pyo3(signature = (profile, delta=0.5, frames=5, mu_last_fraction=0.1,
                    window=5.0, mu_stop_fraction=0.05))]
fn blowup_alignments<'py>(
    py: Python<'py>,
    profile: &PyProfile,
    delta: f64,
    frames: usize,
    mu_last_fraction: f64,
    window: f64,
    mu_stop_fraction: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let opts = run_options(0.2, mu_stop_fraction, 2.0, 25, delta);
    let traj = flow::run(&profile.inner, &opts).map_err(err)?;
    let frames = extract_blowup_sequence(&traj, frames, mu_last_fraction).map_err(err)?;
    let soliton = SolitonProfile::build(-10.0, 10.0, 2048, 0.0).map_err(err)?;
    let mut out = Vec::new();
    for (k, fr) in frames.iter().enumerate() {
        let a = align_distance(fr, &soliton, window).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("k", k)?;
        d.set_item("t_k", fr.t_center)?;
        d.set_item("K", fr.k)?;
        d.set_item("chi", a.chi)?;
        d.set_item("scale", a.scale)?;
        d.set_item("dist", a.dist)?;
        d.set_item("dist_f", a.dist_f)?;
        out.push(d);
    }
    Ok(out)
}

/// Solve the soliton's implicit relation at each r.
#[pyfunction]
#[pyo3(signature = (r, chi=0.0))]
fn solve_phi(r: Vec<f64>, chi: f64) -> PyResult<Vec<f64>> {
    bergerflow_core::soliton::solve_phi(&r, chi).map_err(err)
}

/// Blowdown-soliton profile samples and verification residuals.
#[pyfunction]
#[pyo3(signature = (r_min=-10.0, r_max=10.0, nodes=4096, chi=0.0))]
fn soliton_profile<'py>(
    py: Python<'py>,
    r_min: f64,
    r_max: f64,
    nodes: usize,
    chi: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let prof = SolitonProfile::build(r_min, r_max, nodes, chi).map_err(err)?;
    let ode = ode_residuals(&prof);
    let sys = soliton_system_residuals(&prof, SOLITON_LAMBDA).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("r", prof.r.clone())?;
    d.set_item("phi", prof.phi.clone())?;
    d.set_item("s", prof.s.clone())?;
    d.set_item("f", prof.f.clone())?;
    d.set_item("g", prof.g.clone())?;
    d.set_item("res1_max", ode.res1_max)?;
    d.set_item("res2_max", ode.res2_max)?;
    d.set_item("h1d_max", sys.h1d_max)?;
    d.set_item("g2d_max", sys.g2d_max)?;
    d.set_item("f_cal_max", sys.f_cal_max)?;
    d.set_item("lambda", sys.lambda)?;
    Ok(d)
}

/// Twin comparison: full system vs the scalar reduction from the same
/// Kahler seed, to half the Kahler singular time. Returns the max relative
/// deviation of g^2.
#[pyfunction]
#[pyo3(signature = (profile,))]
fn twin_deviation(profile: &PyProfile) -> PyResult<f64> {
    let mu0 = profile
        .inner
        .g
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let t_end = mu0 * mu0 / 8.0;
    let ctrl = RunOptions::default().control;
    let full = flow::run_to_time(&profile.inner, t_end, &ctrl).map_err(err)?;
    let scalar = run_scalar_to_time(
        &CalabiState::from_profile(&profile.inner).map_err(err)?,
        t_end,
        &ctrl,
    )
    .map_err(err)?;
    Ok(g2_deviation(&full, &scalar))
}

#[pymodule]
fn bergerflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProfile>()?;
    m.add_function(wrap_pyfunction!(run_flow, m)?)?;
    m.add_function(wrap_pyfunction!(blowup_alignments, m)?)?;
    m.add_function(wrap_pyfunction!(solve_phi, m)?)?;
    m.add_function(wrap_pyfunction!(soliton_profile, m)?)?;
    m.add_function(wrap_pyfunction!(twin_deviation, m)?)?;
    Ok(())
}
