//! Explicit time stepping of the flow, singular-time estimation, and the
//! trajectory bookkeeping consumed by the verification suites.
//!
//! The system is advanced on the fixed x grid with classical RK4. The pole
//! values use the reduced equations (f pinned to zero, g by its even-parity
//! limit), the Jacobian carries the gauge, and the step size follows the
//! parabolic bound with a curvature guard that only engages late in the run.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{compute_diagnostics, DiagnosticRecord};
use crate::error::{Error, Result};
use crate::initial::validate_closeness;
use crate::interp::lagrange6_resample;
use crate::profile::MetricProfile;
use crate::stencil::{d1_segment, d2_segment};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepControl {
    /// fraction of the parabolic stability bound, default 0.2
    pub cfl: f64,
    /// length^2 scale below which mu^2 shrinks the step (reaction stiffness)
    pub curvature_guard: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            cfl: 0.2,
            curvature_guard: 2.5e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StopCriteria {
    /// stop when mu <= mu_stop_fraction * mu(0)
    pub mu_stop_fraction: f64,
    pub dt_floor: f64,
    /// t_max = t_max_factor * mu(0)^2
    pub t_max_factor: f64,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria {
            mu_stop_fraction: 0.02,
            dt_floor: 1e-12,
            t_max_factor: 2.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOptions {
    pub control: StepControl,
    pub stop: StopCriteria,
    /// steps between diagnostic records
    pub record_stride: usize,
    /// keep a snapshot whenever mu drops below this fraction of the last kept one
    pub snapshot_mu_ratio: f64,
    /// resample to uniform arclength when max/min node spacing exceeds this
    pub remesh_ratio: f64,
    pub remesh_enabled: bool,
    /// delta for the diagnostic flags
    pub delta: f64,
    /// require the closeness report to pass before running
    pub require_closeness: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            control: StepControl::default(),
            stop: StopCriteria::default(),
            record_stride: 25,
            snapshot_mu_ratio: 0.985,
            remesh_ratio: 10.0,
            remesh_enabled: true,
            delta: 0.5,
            require_closeness: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StopReason {
    MuStop,
    DtFloor,
    TMax,
    BlowThrough { detail: String },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitQuality {
    pub slope: f64,
    pub intercept: f64,
    /// rms fit residual relative to the mu^2 range of the window
    pub rel_residual: f64,
    /// slope inside [-12, -4] widened by 0.5
    pub slope_in_window: bool,
    pub window_len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub snapshots: Vec<MetricProfile>,
    pub series: Vec<DiagnosticRecord>,
    pub stop_reason: StopReason,
    pub remesh_count: usize,
    pub steps: u64,
    pub t_est: Option<f64>,
    pub fit: Option<FitQuality>,
    /// (t, sup|kappa| * (T_est - t)) for every record, when T_est is known
    pub type1_ratio_series: Vec<(f64, f64)>,
}

impl FlowTrajectory {
    pub fn final_profile(&self) -> &MetricProfile {
        self.snapshots.last().expect("trajectory has snapshots")
    }
}

struct Rhs {
    df: Vec<f64>,
    dg: Vec<f64>,
    djac: Vec<f64>,
}

fn rhs(p: &MetricProfile) -> Rhs {
    let n = p.node_count();
    let d = p.derivs();
    let mut df = vec![0.0; n];
    let mut dg = vec![0.0; n];
    let mut djac = vec![0.0; n];
    for i in 0..n {
        let f = p.f[i];
        let g = p.g[i];
        let g2 = g * g;
        let g3 = g2 * g;
        let g4 = g2 * g2;
        df[i] = d.fss[i] + 2.0 * d.gs[i] / g * d.fs[i] - 2.0 * f * f * f / g4;
        dg[i] = d.gss[i] + d.fsgs_f[i] + d.gs[i] * d.gs[i] / g + 2.0 * (f * f - 2.0 * g2) / g3;
        djac[i] = (d.fss_f[i] + 2.0 * d.gss[i] / g) * p.jac[i];
    }
    df[0] = 0.0;
    df[n - 1] = 0.0;
    Rhs { df, dg, djac }
}

fn advanced(p: &MetricProfile, base: &MetricProfile, k: &Rhs, w: f64) -> MetricProfile {
    let n = p.node_count();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut jac = vec![0.0; n];
    for i in 0..n {
        f[i] = base.f[i] + w * k.df[i];
        g[i] = base.g[i] + w * k.dg[i];
        jac[i] = base.jac[i] + w * k.djac[i];
    }
    f[0] = 0.0;
    f[n - 1] = 0.0;
    MetricProfile {
        grid: p.grid.clone(),
        f,
        g,
        jac,
        t: base.t + w,
    }
}

fn state_is_sane(p: &MetricProfile) -> std::result::Result<(), String> {
    let n = p.node_count();
    for i in 0..n {
        if !(p.f[i].is_finite() && p.g[i].is_finite() && p.jac[i].is_finite()) {
            return Err(format!("non-finite state at node {i}"));
        }
        if p.g[i] <= 0.0 {
            return Err(format!("g[{i}] = {} <= 0", p.g[i]));
        }
        if p.jac[i] <= 0.0 {
            return Err(format!("jac[{i}] = {} <= 0", p.jac[i]));
        }
    }
    for i in 1..n - 1 {
        if p.f[i] <= 0.0 {
            return Err(format!("f[{i}] = {} <= 0", p.f[i]));
        }
    }
    Ok(())
}

/// Smallest node spacing in arclength.
pub fn min_spacing(p: &MetricProfile) -> f64 {
    let jmin = p.jac.iter().cloned().fold(f64::INFINITY, f64::min);
    jmin * p.grid.h()
}

/// Adaptive step size: parabolic bound with the late-time curvature guard.
pub fn suggested_dt(p: &MetricProfile, control: &StepControl) -> f64 {
    let ds = min_spacing(p);
    let mu = p.g.iter().cloned().fold(f64::INFINITY, f64::min);
    control.cfl * ds * ds / (control.curvature_guard / (mu * mu)).max(1.0)
}

/// One RK4 step. dt = 0 returns the input unchanged; a non-finite or
/// non-positive state after the step is reported as blow-through carrying
/// the last valid profile.
pub fn step(p: &MetricProfile, dt: f64) -> Result<MetricProfile> {
    if dt == 0.0 {
        return Ok(p.clone());
    }
    if !(dt > 0.0) {
        return Err(Error::Contract(format!("dt = {dt} must be nonnegative")));
    }
    let ds = min_spacing(p);
    if dt > ds * ds {
        return Err(Error::Contract(format!(
            "dt = {dt} exceeds the parabolic stability bound {}",
            ds * ds
        )));
    }
    let k1 = rhs(p);
    let p2 = advanced(p, p, &k1, 0.5 * dt);
    let k2 = rhs(&p2);
    let p3 = advanced(p, p, &k2, 0.5 * dt);
    let k3 = rhs(&p3);
    let p4 = advanced(p, p, &k3, dt);
    let k4 = rhs(&p4);

    let n = p.node_count();
    let sixth = dt / 6.0;
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut jac = vec![0.0; n];
    for i in 0..n {
        f[i] = p.f[i] + sixth * (k1.df[i] + 2.0 * k2.df[i] + 2.0 * k3.df[i] + k4.df[i]);
        g[i] = p.g[i] + sixth * (k1.dg[i] + 2.0 * k2.dg[i] + 2.0 * k3.dg[i] + k4.dg[i]);
        jac[i] = p.jac[i] + sixth * (k1.djac[i] + 2.0 * k2.djac[i] + 2.0 * k3.djac[i] + k4.djac[i]);
    }
    f[0] = 0.0;
    f[n - 1] = 0.0;
    let out = MetricProfile {
        grid: p.grid.clone(),
        f,
        g,
        jac,
        t: p.t + dt,
    };
    if let Err(detail) = state_is_sane(&out) {
        return Err(Error::BlowThrough {
            t: p.t,
            detail,
            last_valid: Box::new(p.clone()),
        });
    }
    Ok(out)
}

/// Resample (f, g) onto a uniform arclength grid.
///
/// Pole nodes are kept exactly and the Jacobian becomes constant. The
/// interpolant sees a parity ghost extension across each pole (f odd, g
/// even), so the resampled fields keep the closing behavior instead of
/// picking up one-sided end-slope artifacts exactly where the diagnostics
/// are most sensitive.
pub fn remesh_uniform(p: &MetricProfile) -> Result<MetricProfile> {
    const GHOSTS: usize = 4;
    let n = p.node_count();
    let s = p.arclength();
    let span = s[n - 1] - s[0];
    let s_new: Vec<f64> = (0..n)
        .map(|i| {
            if i == n - 1 {
                s[n - 1]
            } else {
                s[0] + span * i as f64 / (n - 1) as f64
            }
        })
        .collect();

    let extend = |field: &[f64], odd: bool| -> (Vec<f64>, Vec<f64>) {
        let m = n + 2 * GHOSTS;
        let mut sx = Vec::with_capacity(m);
        let mut ux = Vec::with_capacity(m);
        for k in (1..=GHOSTS).rev() {
            sx.push(2.0 * s[0] - s[k]);
            ux.push(if odd { 2.0 * field[0] - field[k] } else { field[k] });
        }
        sx.extend_from_slice(&s);
        ux.extend_from_slice(field);
        for k in 1..=GHOSTS {
            sx.push(2.0 * s[n - 1] - s[n - 1 - k]);
            ux.push(if odd {
                2.0 * field[n - 1] - field[n - 1 - k]
            } else {
                field[n - 1 - k]
            });
        }
        (sx, ux)
    };

    let (sf, uf) = extend(&p.f, true);
    let (sg, ug) = extend(&p.g, false);
    let mut f = lagrange6_resample(&sf, &uf, &s_new);
    let g = lagrange6_resample(&sg, &ug, &s_new);
    f[0] = 0.0;
    f[n - 1] = 0.0;
    let jac = vec![span / 2.0; n];
    MetricProfile::new(p.grid.clone(), f, g, jac, p.t)
}

/// Spacing distortion max(jac)/min(jac).
pub fn spacing_distortion(p: &MetricProfile) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &j in &p.jac {
        lo = lo.min(j);
        hi = hi.max(j);
    }
    hi / lo
}

/// Resumable bookkeeping of a run in progress. Everything that influences
/// the remaining evolution or the emitted series lives here, so a resumed
/// run is bit-for-bit the same as an uninterrupted one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunBook {
    pub state: MetricProfile,
    pub series: Vec<DiagnosticRecord>,
    pub snapshots: Vec<MetricProfile>,
    pub steps: u64,
    pub mu_last_snapshot: f64,
    pub remesh_count: usize,
    pub last_recorded_step: Option<u64>,
    /// mu(0), fixed at start; the stop thresholds derive from it
    pub mu0: f64,
}

pub fn start_book(profile: &MetricProfile, opts: &RunOptions) -> Result<RunBook> {
    if opts.require_closeness {
        let report = validate_closeness(profile, opts.delta)?;
        if !report.all_passed() {
            return Err(Error::Parameter(format!(
                "initial data fails the closeness assumptions: {report:?}"
            )));
        }
    }
    let mu0 = profile.g.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(RunBook {
        state: profile.clone(),
        series: Vec::new(),
        snapshots: Vec::new(),
        steps: 0,
        mu_last_snapshot: f64::INFINITY,
        remesh_count: 0,
        last_recorded_step: None,
        mu0,
    })
}

/// One iteration of the run loop: record if due, check the stop criteria,
/// advance one step (with the optional remesh). Returns the stop reason
/// once one fires.
pub fn advance(book: &mut RunBook, opts: &RunOptions) -> Result<Option<StopReason>> {
    let mu_stop = opts.stop.mu_stop_fraction * book.mu0;
    let t_max = opts.stop.t_max_factor * book.mu0 * book.mu0;
    let mu = book.state.g.iter().cloned().fold(f64::INFINITY, f64::min);

    if book.steps % opts.record_stride as u64 == 0 && book.last_recorded_step != Some(book.steps) {
        book.series.push(compute_diagnostics(&book.state, opts.delta)?);
        book.last_recorded_step = Some(book.steps);
        if mu <= opts.snapshot_mu_ratio * book.mu_last_snapshot {
            book.snapshots.push(book.state.clone());
            book.mu_last_snapshot = mu;
        }
    }
    if mu <= mu_stop {
        return Ok(Some(StopReason::MuStop));
    }
    if book.state.t >= t_max {
        return Ok(Some(StopReason::TMax));
    }
    let dt = suggested_dt(&book.state, &opts.control).min(t_max - book.state.t);
    if dt < opts.stop.dt_floor {
        return Ok(Some(StopReason::DtFloor));
    }
    match step(&book.state, dt) {
        Ok(next) => book.state = next,
        Err(Error::BlowThrough { detail, last_valid, .. }) => {
            book.state = *last_valid;
            return Ok(Some(StopReason::BlowThrough { detail }));
        }
        Err(e) => return Err(e),
    }
    book.steps += 1;
    if opts.remesh_enabled && spacing_distortion(&book.state) > opts.remesh_ratio {
        book.state = remesh_uniform(&book.state)?;
        book.remesh_count += 1;
    }
    Ok(None)
}

/// Close out the bookkeeping: final record/snapshot, singular-time fit.
pub fn finish(mut book: RunBook, opts: &RunOptions, stop_reason: StopReason) -> Result<FlowTrajectory> {
    if book.last_recorded_step != Some(book.steps) {
        book.series.push(compute_diagnostics(&book.state, opts.delta)?);
    }
    if book
        .snapshots
        .last()
        .map(|p| p.t != book.state.t)
        .unwrap_or(true)
    {
        book.snapshots.push(book.state.clone());
    }
    let mut traj = FlowTrajectory {
        snapshots: book.snapshots,
        series: book.series,
        stop_reason,
        remesh_count: book.remesh_count,
        steps: book.steps,
        t_est: None,
        fit: None,
        type1_ratio_series: Vec::new(),
    };
    if let Ok((t_est, fit)) = estimate_singular_time(&traj.series) {
        traj.t_est = Some(t_est);
        traj.fit = Some(fit);
        traj.type1_ratio_series = type1_ratios(&traj.series, t_est);
    }
    Ok(traj)
}

/// Drive the flow until a stop criterion fires.
pub fn run(profile: &MetricProfile, opts: &RunOptions) -> Result<FlowTrajectory> {
    let mut book = start_book(profile, opts)?;
    let reason = loop {
        if let Some(reason) = advance(&mut book, opts)? {
            break reason;
        }
    };
    finish(book, opts, reason)
}

/// Advance to exactly `t_end` with the adaptive policy (no remesh, no
/// records): the twin-comparison runner.
pub fn run_to_time(
    profile: &MetricProfile,
    t_end: f64,
    control: &StepControl,
) -> Result<MetricProfile> {
    let mut state = profile.clone();
    while state.t < t_end {
        let dt = suggested_dt(&state, control).min(t_end - state.t);
        state = step(&state, dt)?;
    }
    Ok(state)
}

fn linear_fit(tail: &[&DiagnosticRecord]) -> Result<(f64, f64, f64)> {
    let n = tail.len() as f64;
    let t0 = tail[0].t; // shift for conditioning
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for r in tail {
        let t = r.t - t0;
        let y = r.mu * r.mu;
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let denom = n * stt - st * st;
    if denom.abs() < f64::EPSILON * stt.max(1.0) {
        return Err(Error::Estimation("degenerate time window".into()));
    }
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n - slope * t0;
    Ok((slope, intercept, t0))
}

/// Least-squares extrapolation of mu^2 to zero.
///
/// The quality report fits the final 20% of the records (at least 10). The
/// returned time refines that fit on the last decade of mu^2, where the
/// crush rate has settled; the wide window drifts with the slowly varying
/// slope and lands a few mu^2-widths late otherwise. Errors when the tail
/// is not strictly decreasing.
pub fn estimate_singular_time(series: &[DiagnosticRecord]) -> Result<(f64, FitQuality)> {
    if series.len() < 10 {
        return Err(Error::Estimation(format!(
            "need at least 10 records, have {}",
            series.len()
        )));
    }
    let window = (series.len() / 5).max(10);
    let tail: Vec<&DiagnosticRecord> = series[series.len() - window..].iter().collect();
    for w in tail.windows(2) {
        if w[1].mu >= w[0].mu {
            return Err(Error::Estimation(format!(
                "mu is not strictly decreasing near t = {}",
                w[0].t
            )));
        }
    }
    let (slope, intercept, _) = linear_fit(&tail)?;
    if !(slope < 0.0) {
        return Err(Error::Estimation(format!("fitted slope {slope} is not negative")));
    }
    let mut ss = 0.0;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for r in &tail {
        let y = r.mu * r.mu;
        let e = y - (intercept + slope * r.t);
        ss += e * e;
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    let range = (ymax - ymin).max(f64::EPSILON);
    let fit = FitQuality {
        slope,
        intercept,
        rel_residual: (ss / tail.len() as f64).sqrt() / range,
        slope_in_window: (-12.0 - 0.5..=-4.0 + 0.5).contains(&slope),
        window_len: tail.len(),
    };

    // asymptotic refinement: last decade of mu^2
    let mu2_end = tail.last().unwrap().mu.powi(2);
    let narrow: Vec<&DiagnosticRecord> = tail
        .iter()
        .copied()
        .filter(|r| r.mu * r.mu <= 10.0 * mu2_end)
        .collect();
    let t_est = if narrow.len() >= 10 {
        let (s2, i2, _) = linear_fit(&narrow)?;
        if s2 < 0.0 {
            -i2 / s2
        } else {
            -intercept / slope
        }
    } else {
        -intercept / slope
    };
    Ok((t_est, fit))
}

/// sup|kappa| * (T_est - t) for every record before T_est.
pub fn type1_ratios(series: &[DiagnosticRecord], t_est: f64) -> Vec<(f64, f64)> {
    series
        .iter()
        .filter(|r| r.t < t_est)
        .map(|r| (r.t, r.sup_curv * (t_est - r.t)))
        .collect()
}

/// Records inside the last `decades` powers of ten of T_est - t.
pub fn tail_records<'a>(
    series: &'a [DiagnosticRecord],
    t_est: f64,
    decades: f64,
) -> Vec<&'a DiagnosticRecord> {
    let last = series.iter().rev().find(|r| r.t < t_est);
    let Some(last) = last else { return Vec::new() };
    let gap_end = t_est - last.t;
    series
        .iter()
        .filter(|r| {
            let gap = t_est - r.t;
            gap > 0.0 && gap <= gap_end * 10f64.powf(decades)
        })
        .collect()
}

/// RK4 on an open segment: the three outermost nodes at each end are held
/// fixed and the interior uses plain one-sided stencils. `h` is the spacing
/// of the computational coordinate and `jac` = ds/dcoordinate.
pub fn step_segment(
    f: &[f64],
    g: &[f64],
    jac: &[f64],
    h: f64,
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = f.len();
    if n < 16 {
        return Err(Error::Contract("segment too short".into()));
    }
    let seg_rhs = |f: &[f64], g: &[f64], jac: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let fx = d1_segment(f, h);
        let fxx = d2_segment(f, h);
        let gx = d1_segment(g, h);
        let gxx = d2_segment(g, h);
        let jx = d1_segment(jac, h);
        let mut df = vec![0.0; n];
        let mut dg = vec![0.0; n];
        let mut dj = vec![0.0; n];
        for i in 3..n - 3 {
            let j = jac[i];
            let j2 = j * j;
            let fs = fx[i] / j;
            let gs = gx[i] / j;
            let fss = (fxx[i] - fx[i] * jx[i] / j) / j2;
            let gss = (gxx[i] - gx[i] * jx[i] / j) / j2;
            let fi = f[i];
            let gi = g[i];
            let g2 = gi * gi;
            df[i] = fss + 2.0 * gs / gi * fs - 2.0 * fi * fi * fi / (g2 * g2);
            dg[i] = gss + (fs / fi + gs / gi) * gs + 2.0 * (fi * fi - 2.0 * g2) / (g2 * gi);
            dj[i] = (fss / fi + 2.0 * gss / gi) * j;
        }
        (df, dg, dj)
    };

    let axpy = |base: &[f64], k: &[f64], w: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, v)| b + w * v).collect()
    };

    let (k1f, k1g, k1j) = seg_rhs(f, g, jac);
    let (f2, g2, j2) = (
        axpy(f, &k1f, 0.5 * dt),
        axpy(g, &k1g, 0.5 * dt),
        axpy(jac, &k1j, 0.5 * dt),
    );
    let (k2f, k2g, k2j) = seg_rhs(&f2, &g2, &j2);
    let (f3, g3, j3) = (
        axpy(f, &k2f, 0.5 * dt),
        axpy(g, &k2g, 0.5 * dt),
        axpy(jac, &k2j, 0.5 * dt),
    );
    let (k3f, k3g, k3j) = seg_rhs(&f3, &g3, &j3);
    let (f4, g4, j4) = (
        axpy(f, &k3f, dt),
        axpy(g, &k3g, dt),
        axpy(jac, &k3j, dt),
    );
    let (k4f, k4g, k4j) = seg_rhs(&f4, &g4, &j4);

    let sixth = dt / 6.0;
    let mut fo = f.to_vec();
    let mut go = g.to_vec();
    let mut jo = jac.to_vec();
    for i in 3..n - 3 {
        fo[i] = f[i] + sixth * (k1f[i] + 2.0 * k2f[i] + 2.0 * k3f[i] + k4f[i]);
        go[i] = g[i] + sixth * (k1g[i] + 2.0 * k2g[i] + 2.0 * k3g[i] + k4g[i]);
        jo[i] = jac[i] + sixth * (k1j[i] + 2.0 * k2j[i] + 2.0 * k3j[i] + k4j[i]);
        if !(fo[i].is_finite() && go[i] > 0.0 && jo[i] > 0.0) {
            return Err(Error::Contract(format!("segment step left a bad state at node {i}")));
        }
    }
    Ok((fo, go, jo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;
    use crate::initial::{construct_initial_metric, FShape, PhiFn, SeedParams};
    use std::f64::consts::PI;

    fn seed(eps: f64, n: usize) -> MetricProfile {
        let params = SeedParams {
            f_shape: FShape::HalfSine { length: PI },
            alpha: 1.0,
            delta: 0.5,
            epsilon: eps,
            phi_fn: PhiFn::Constant,
        };
        construct_initial_metric(&params, &SpatialGrid::new(n).unwrap()).unwrap()
    }

    #[test]
    fn zero_step_is_identity() {
        let p = seed(0.0, 65);
        let q = step(&p, 0.0).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn oversized_step_rejected() {
        let p = seed(0.0, 65);
        assert!(step(&p, 1.0).is_err());
    }

    #[test]
    fn kahler_pole_rate_is_minus_four() {
        // d/dt g^2(s_-) = 4 g g_ss - 8 = -4 at t=0 for eps = 0;
        // oracle: small-dt finite difference of the stepped profile
        let p = seed(0.0, 513);
        let dt = 1e-7;
        let q = step(&p, dt).unwrap();
        let rate = (q.g[0] * q.g[0] - p.g[0] * p.g[0]) / dt;
        assert!((rate + 4.0).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn eps_pole_rate_in_window() {
        // eps = 0.05: rate = 4 (1 - eps) - 8 = -4.2, inside [-12, -4]
        let p = seed(0.05, 513);
        let dt = 1e-7;
        let q = step(&p, dt).unwrap();
        let rate = (q.g[0] * q.g[0] - p.g[0] * p.g[0]) / dt;
        assert!((rate + 4.2).abs() < 0.01, "rate {rate}");
        assert!((-12.0..=-4.0).contains(&rate));
    }

    #[test]
    fn estimate_t_exact_linear_data() {
        let fake = |slope: f64, n: usize| -> Vec<DiagnosticRecord> {
            (0..n)
                .map(|i| {
                    let t = i as f64 * 0.001;
                    let mu2: f64 = 1.0 + slope * t;
                    DiagnosticRecord {
                        t,
                        mu: mu2.sqrt(),
                        mu_argmin: 0,
                        g_plus: 2.0,
                        psi_min: 0.0,
                        psi_max: 0.0,
                        f_cal_max_abs: 0.0,
                        fs_min: -1.0,
                        fs_max: 1.0,
                        gs_max: 0.5,
                        sup_curv: 1.0,
                        q_min: 0.0,
                        threshold: 1.0,
                        assumption_flags: [true; 5],
                    }
                })
                .collect()
        };
        let (t_est, fit) = estimate_singular_time(&fake(-4.0, 50)).unwrap();
        assert!((t_est - 0.25).abs() < 1e-12, "{t_est}");
        assert!((fit.slope + 4.0).abs() < 1e-9);
        assert!(fit.slope_in_window);
        assert!(fit.rel_residual < 1e-9);

        let (t_est, fit) = estimate_singular_time(&fake(-9.0, 50)).unwrap();
        assert!((t_est - 1.0 / 9.0).abs() < 1e-12, "{t_est}");
        assert!((fit.slope + 9.0).abs() < 1e-8);
        assert!(fit.slope_in_window);

        // non-monotone tail is an estimation error
        let mut bad = fake(-4.0, 50);
        bad[48].mu = bad[47].mu + 0.01;
        assert!(estimate_singular_time(&bad).is_err());
    }

    #[test]
    fn type1_toy_ratio() {
        // shrinking-sphere toy: sup|kappa| = 1/(2 (T - t)) gives ratio 1/2
        let t_final = 0.25;
        let series: Vec<DiagnosticRecord> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.005;
                DiagnosticRecord {
                    t,
                    mu: (t_final - t).sqrt(),
                    mu_argmin: 0,
                    g_plus: 2.0,
                    psi_min: 0.0,
                    psi_max: 0.0,
                    f_cal_max_abs: 0.0,
                    fs_min: -1.0,
                    fs_max: 1.0,
                    gs_max: 0.5,
                    sup_curv: 1.0 / (2.0 * (t_final - t)),
                    q_min: 0.0,
                    threshold: 1.0,
                    assumption_flags: [true; 5],
                }
            })
            .collect();
        for (_, ratio) in type1_ratios(&series, t_final) {
            assert!((ratio - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn remesh_restores_uniform_spacing() {
        let p = seed(0.0, 257);
        // distort the jacobian (smooth, even-class, positive)
        let n = p.node_count();
        let jac: Vec<f64> = (0..n)
            .map(|i| {
                let x = p.grid.x(i);
                PI / 2.0 * (1.0 + 0.8 * (PI * (x + 1.0)).cos())
            })
            .collect();
        // rebuild a consistent profile on the distorted gauge: same f(s), g(s)
        let mut q = p.clone();
        q.jac = jac;
        let s = q.arclength();
        let span = s[n - 1] - s[0];
        for i in 0..n {
            let u = (s[i] - s[0]) * PI / span;
            q.f[i] = u.sin();
            q.g[i] = (1.0 + 2.0 * (1.0 - u.cos())).sqrt();
        }
        q.f[0] = 0.0;
        q.f[n - 1] = 0.0;
        assert!(spacing_distortion(&q) > 4.0);
        let r = remesh_uniform(&q).unwrap();
        assert!(spacing_distortion(&r) < 1.0 + 1e-12);
        // geometry preserved: compare g against the analytic profile in s
        let s_r = r.arclength();
        for i in 0..n {
            let u = (s_r[i] - s_r[0]) * PI / span;
            let exact = (1.0 + 2.0 * (1.0 - u.cos())).sqrt();
            assert!((r.g[i] - exact).abs() < 2e-4, "node {i}");
        }
    }

    #[test]
    fn blow_through_carries_last_valid_state() {
        // poison a profile so a legal-size step collapses g
        let p = seed(0.0, 65);
        let mut q = p.clone();
        for v in q.g.iter_mut() {
            *v = 1e-3; // curvature reaction ~ -4/g blows g negative
        }
        let dt = min_spacing(&q).powi(2) * 0.9;
        match step(&q, dt) {
            Err(Error::BlowThrough { last_valid, .. }) => {
                assert_eq!(last_valid.t, q.t);
            }
            other => panic!("expected blow-through, got {other:?}"),
        }
    }
}
