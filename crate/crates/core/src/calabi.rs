//! Scalar reduction of the flow for Kahler data, and the consistency checks
//! that tie the full system to it (u-residual, theta residual, rho drift).
//!
//! On a Kahler profile the whole system is determined by v = g^2, which
//! evolves by v_t = 2 v_ss + v_s^2 / v - 8. The gauge is carried
//! algebraically: for Kahler data the Calabi coordinate of a fixed grid
//! node never moves, which pins ds/dx = jac0 * sqrt(v_x / v_x(0)). Driving
//! jac by its rate equation with f reconstructed through jac itself is
//! anti-diffusive in the gauge channel and blows up at grid scale; the
//! conserved-coordinate form is the same continuum system without that
//! feedback loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{step, suggested_dt, StepControl};
use crate::grid::SpatialGrid;
use crate::profile::MetricProfile;
use crate::stencil::{d1_closed, d1_segment, d2_closed, d2_segment, Parity};

/// Scalar Calabi state: v = g^2 on the fixed grid plus the frozen gauge
/// reference (initial Jacobian and initial v_x).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalabiState {
    pub grid: SpatialGrid,
    pub v: Vec<f64>,
    pub t: f64,
    jac0: Vec<f64>,
    vx0: Vec<f64>,
    /// l'Hopital pole values of v_x / v_x(0), refreshed per evaluation
    vxx0: Vec<f64>,
}

impl CalabiState {
    /// Build from a Kahler metric profile.
    pub fn from_profile(p: &MetricProfile) -> Result<Self> {
        let v: Vec<f64> = p.g.iter().map(|g| g * g).collect();
        let h = p.grid.h();
        let vx0 = d1_closed(&v, h, Parity::Even);
        let vxx0 = d2_closed(&v, h, Parity::Even);
        let state = CalabiState {
            grid: p.grid.clone(),
            v,
            t: p.t,
            jac0: p.jac.clone(),
            vx0,
            vxx0,
        };
        state.validate()?;
        Ok(state)
    }

    /// v > 0, v_s = 0 at the poles, u/s^2 -> 1 near s_- (a constant-in-s v
    /// cannot close the poles and is rejected here).
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.node_count();
        if let Some(i) = self.v.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::InvalidProfile(format!("v[{i}] = {} <= 0", self.v[i])));
        }
        if let Some(i) = self.jac0.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::InvalidProfile(format!("jac0[{i}] <= 0, index {i}")));
        }
        for i in 1..n - 1 {
            if !(self.vx0[i] > 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "v_x[{i}] = {} <= 0; v must increase strictly in the interior",
                    self.vx0[i]
                )));
            }
        }
        let p = self.reconstruct_unchecked();
        let d1 = p.d_ds(&self.v, 1, Parity::Even)?;
        let tol = crate::diagnostics::flag_tolerance(&p);
        for (pole, inner) in [(0usize, 2usize), (n - 1, n - 3)] {
            if d1[pole].abs() > tol {
                return Err(Error::InvalidProfile(format!(
                    "v_s does not vanish at pole node {pole}"
                )));
            }
            let s = p.arclength();
            let dist = (s[inner] - s[pole]).abs();
            let u = p.f[inner] * p.f[inner];
            let ratio = u / (dist * dist);
            if !(0.5..=1.5).contains(&ratio) {
                return Err(Error::InvalidProfile(format!(
                    "u/s^2 = {ratio} near pole {pole}; the poles do not close"
                )));
            }
        }
        Ok(())
    }

    /// Gauge Jacobian for the current v: jac0 * sqrt(v_x / v_x(0)), with the
    /// pole ratio taken by l'Hopital from the second x-derivatives.
    pub fn gauge_jac(&self) -> Vec<f64> {
        self.gauge_jac_of(&self.v)
    }

    fn gauge_jac_of(&self, v: &[f64]) -> Vec<f64> {
        let n = self.grid.node_count();
        let h = self.grid.h();
        let vx = d1_closed(v, h, Parity::Even);
        let mut jac = vec![0.0; n];
        for i in 1..n - 1 {
            let ratio = vx[i] / self.vx0[i];
            jac[i] = self.jac0[i] * ratio.max(0.0).sqrt();
        }
        let vxx = d2_closed(v, h, Parity::Even);
        for pole in [0usize, n - 1] {
            let ratio = vxx[pole] / self.vxx0[pole];
            jac[pole] = self.jac0[pole] * ratio.max(0.0).sqrt();
        }
        jac
    }

    /// Kahler reconstruction f = v_s / 2, g = sqrt(v).
    pub fn reconstruct(&self) -> Result<MetricProfile> {
        let p = self.reconstruct_unchecked();
        if let Some(i) = p.f[1..p.node_count() - 1].iter().position(|&x| x <= 0.0) {
            return Err(Error::InvalidProfile(format!(
                "reconstructed f[{}] <= 0; v is not spatially monotone",
                i + 1
            )));
        }
        Ok(p)
    }

    pub(crate) fn reconstruct_unchecked(&self) -> MetricProfile {
        let n = self.grid.node_count();
        let h = self.grid.h();
        let jac = self.gauge_jac();
        let vx = d1_closed(&self.v, h, Parity::Even);
        let mut f: Vec<f64> = (0..n).map(|i| 0.5 * vx[i] / jac[i]).collect();
        f[0] = 0.0;
        f[n - 1] = 0.0;
        MetricProfile {
            grid: self.grid.clone(),
            f,
            g: self.v.iter().map(|v| v.sqrt()).collect(),
            jac,
            t: self.t,
        }
    }

    fn rhs(&self, v: &[f64]) -> Vec<f64> {
        let n = self.grid.node_count();
        let h = self.grid.h();
        let jac = self.gauge_jac_of(v);
        let vx = d1_closed(v, h, Parity::Even);
        let vxx = d2_closed(v, h, Parity::Even);
        let jx = d1_closed(&jac, h, Parity::Even);
        let mut dv = vec![0.0; n];
        for i in 0..n {
            let j = jac[i];
            let vs = vx[i] / j;
            let vss = (vxx[i] - vx[i] * jx[i] / j) / (j * j);
            dv[i] = 2.0 * vss + vs * vs / v[i] - 8.0;
        }
        dv
    }
}

/// One RK4 step of the scalar flow. dt = 0 returns the input unchanged.
pub fn evolve_calabi_v(state: &CalabiState, dt: f64) -> Result<CalabiState> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    if !(dt > 0.0) {
        return Err(Error::Contract(format!("dt = {dt} must be nonnegative")));
    }
    let axpy = |base: &[f64], k: &[f64], w: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, v)| b + w * v).collect()
    };
    let k1 = state.rhs(&state.v);
    let k2 = state.rhs(&axpy(&state.v, &k1, 0.5 * dt));
    let k3 = state.rhs(&axpy(&state.v, &k2, 0.5 * dt));
    let k4 = state.rhs(&axpy(&state.v, &k3, dt));
    let n = state.grid.node_count();
    let sixth = dt / 6.0;
    let mut v = vec![0.0; n];
    for i in 0..n {
        v[i] = state.v[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if !(v[i].is_finite() && v[i] > 0.0) {
            return Err(Error::BlowThrough {
                t: state.t,
                detail: format!("scalar flow lost positivity at node {i}"),
                last_valid: Box::new(state.reconstruct_unchecked()),
            });
        }
    }
    Ok(CalabiState {
        grid: state.grid.clone(),
        v,
        t: state.t + dt,
        jac0: state.jac0.clone(),
        vx0: state.vx0.clone(),
        vxx0: state.vxx0.clone(),
    })
}

/// Advance the scalar flow to exactly t_end with the shared step policy.
pub fn run_scalar_to_time(
    state: &CalabiState,
    t_end: f64,
    control: &StepControl,
) -> Result<CalabiState> {
    let mut s = state.clone();
    while s.t < t_end {
        let p = s.reconstruct_unchecked();
        let dt = (0.5 * suggested_dt(&p, control)).min(t_end - s.t);
        s = evolve_calabi_v(&s, dt)?;
    }
    Ok(s)
}

/// Residual of the v-only evolution of u = v_s^2 / 4 across one time step.
///
/// Both states must live on the same grid; the right side is evaluated at
/// the earlier state, so the residual is O(dt) + O(h^2). With the conserved
/// gauge, u = v_x * v_x(0) / (2 jac0)^2 is linear in v_x, so the time
/// difference is taken through the stencil of v_after - v_before and stays
/// free of catastrophic cancellation even for tiny dt.
pub fn u_consistency(before: &CalabiState, after: &CalabiState) -> Result<f64> {
    if before.grid != after.grid {
        return Err(Error::Contract("states on different grids".into()));
    }
    let dt = after.t - before.t;
    if !(dt > 0.0) {
        return Err(Error::Contract(format!("dt = {dt} must be positive")));
    }
    let p = before.reconstruct_unchecked();
    let vs = p.d_ds(&before.v, 1, Parity::Even)?;
    let vss = p.d_ds(&before.v, 2, Parity::Even)?;
    let vsss = p.d_ds(&vss, 1, Parity::Even)?;
    let n = before.grid.node_count();
    let h = before.grid.h();
    let dv: Vec<f64> = (0..n).map(|i| after.v[i] - before.v[i]).collect();
    let dvx = d1_closed(&dv, h, Parity::Even);
    let mut worst = 0.0f64;
    for i in 0..n {
        let du = dvx[i] * before.vx0[i] / (4.0 * before.jac0[i] * before.jac0[i]);
        let rhs = 0.5 * vs[i] * vsss[i] + 0.5 * vss[i] * vs[i] * vs[i] / before.v[i]
            - 0.25 * vs[i].powi(4) / (before.v[i] * before.v[i]);
        worst = worst.max((du / dt - rhs).abs());
    }
    Ok(worst)
}

/// Band where g_s is safely positive: the maximal contiguous run around the
/// largest g_s with g_s >= 0.05 * max.
pub fn monotone_band(p: &MetricProfile) -> Result<(usize, usize)> {
    let d = p.derivs();
    let (mut imax, mut best) = (0usize, f64::NEG_INFINITY);
    for (i, &v) in d.gs.iter().enumerate() {
        if v > best {
            best = v;
            imax = i;
        }
    }
    let cutoff = 0.05 * best;
    if !(best > 0.0) {
        return Err(Error::EmptyBand("g_s is nowhere positive".into()));
    }
    let mut lo = imax;
    while lo > 0 && d.gs[lo - 1] >= cutoff {
        lo -= 1;
    }
    let mut hi = imax;
    let n = p.node_count();
    while hi + 1 < n && d.gs[hi + 1] >= cutoff {
        hi += 1;
    }
    if hi - lo + 1 < 12 {
        return Err(Error::EmptyBand(format!(
            "monotone band [{lo}, {hi}] too short"
        )));
    }
    Ok((lo, hi))
}

/// theta = f / (g g_s) on the retained band. Returns the band bounds and
/// the samples (indexed from the band start).
pub fn theta_field(p: &MetricProfile) -> Result<((usize, usize), Vec<f64>)> {
    let (lo, hi) = monotone_band(p)?;
    let d = p.derivs();
    let theta = (lo..=hi)
        .map(|i| p.f[i] / (p.g[i] * d.gs[i]))
        .collect();
    Ok(((lo, hi), theta))
}

/// Residual of theta's evolution equation across one full-system step.
///
/// The time derivative is measured from the stepped profile; the right side
///
/// ```text
/// theta_ss + (3 g_ss/g_s + g_s/g) theta_s + theta_s^2/theta
///          + 2 (f g_s - 2 f_s g)/g^3 * (theta^2 - 1)
/// ```
///
/// is evaluated at the earlier state, so the residual is O(dt) + O(h^2).
pub fn theta_residual(p: &MetricProfile, dt: f64) -> Result<f64> {
    let after = step(p, dt)?;
    let ((lo, hi), th_b) = theta_field(p)?;
    let ((lo_a, hi_a), th_a) = theta_field(&after)?;
    let lo_c = lo.max(lo_a);
    let hi_c = hi.min(hi_a);
    if hi_c.saturating_sub(lo_c) < 12 {
        return Err(Error::EmptyBand("band shrank across the step".into()));
    }
    let d = p.derivs();
    let h = p.grid.h();
    // derivatives of theta on the band via segment stencils + gauge chain
    let band: Vec<f64> = th_b[(lo_c - lo)..=(hi_c - lo)].to_vec();
    let tx = d1_segment(&band, h);
    let txx = d2_segment(&band, h);
    let jband: Vec<f64> = p.jac[lo_c..=hi_c].to_vec();
    let jx = d1_segment(&jband, h);
    let mut worst = 0.0f64;
    for k in 3..band.len() - 3 {
        let i = lo_c + k;
        let j = jband[k];
        let th = band[k];
        let ths = tx[k] / j;
        let thss = (txx[k] - tx[k] * jx[k] / j) / (j * j);
        let g = p.g[i];
        let coeff = 2.0 * (p.f[i] * d.gs[i] - 2.0 * d.fs[i] * g) / (g * g * g);
        let rhs = thss
            + (3.0 * d.gss[i] / d.gs[i] + d.gs[i] / g) * ths
            + ths * ths / th
            + coeff * (th * th - 1.0);
        let measured = (th_a[i - lo_a] - th) / dt;
        worst = worst.max((measured - rhs).abs());
    }
    Ok(worst)
}

/// Integrand of the gauge-coordinate drift and its cumulative value,
/// anchored to zero at x = 0.
///
/// The integrand (in the fixed-coordinate measure) is
/// g_ss/g - f_s g_s/(f g) + f^2/g^4; it vanishes pointwise on Kahler data
/// and at the poles. The drift integrates it against d(rho) = 2 jac/f dx,
/// doubled per the evolution law.
pub fn rho_drift(p: &MetricProfile) -> (Vec<f64>, Vec<f64>) {
    let n = p.node_count();
    let d = p.derivs();
    let mut w = vec![0.0; n];
    for i in 0..n {
        let g = p.g[i];
        let g2 = g * g;
        w[i] = d.gss[i] / g - d.fsgs_f[i] / g + p.f[i] * p.f[i] / (g2 * g2);
    }
    // d(drift)/dx = 2 w * (2 jac / f); integrable at the poles where w -> 0
    let mut rate = vec![0.0; n];
    for i in 1..n - 1 {
        rate[i] = 4.0 * w[i] * p.jac[i] / p.f[i];
    }
    let raw = crate::quad::cumulative_simpson(&rate, p.grid.h());
    let anchor = match p.grid.center_node() {
        Some(mid) => raw[mid],
        None => {
            let lo = n / 2 - 1;
            0.5 * (raw[lo] + raw[lo + 1])
        }
    };
    let drift = raw.iter().map(|v| v - anchor).collect();
    (w, drift)
}

/// Max relative deviation of g^2 between a full-system profile and a scalar
/// state at the same time on the same grid.
pub fn g2_deviation(full: &MetricProfile, scalar: &CalabiState) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..full.node_count() {
        let a = full.g[i] * full.g[i];
        let b = scalar.v[i];
        worst = worst.max(((a - b) / b).abs());
    }
    worst
}
