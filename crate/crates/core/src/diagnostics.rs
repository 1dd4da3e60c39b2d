//! Per-profile scalar diagnostics and the closeness-assumption flags.

use serde::{Deserialize, Serialize};

use crate::curvature::compute_curvatures;
use crate::error::Result;
use crate::profile::MetricProfile;

/// Tolerance used by all flag checks, per the artifact convention 10 h^2.
pub fn flag_tolerance(profile: &MetricProfile) -> f64 {
    let h = profile.grid.h();
    10.0 * h * h
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub t: f64,
    /// spatial minimum of g
    pub mu: f64,
    pub mu_argmin: usize,
    /// g at the s_+ pole
    pub g_plus: f64,
    pub psi_min: f64,
    pub psi_max: f64,
    /// max |f - g g_s|
    pub f_cal_max_abs: f64,
    pub fs_min: f64,
    pub fs_max: f64,
    /// max g_s over nodes (criterion: stays below 1)
    pub gs_max: f64,
    /// max |kappa| over nodes and planes
    pub sup_curv: f64,
    /// min of Q = g g_ss - g_s^2 - 2 f_s^2 (monitored, not gated)
    pub q_min: f64,
    /// g^2(s_+) - 3 g^2(s_-)
    pub threshold: f64,
    /// closeness assumptions (a)..(e), each within 10 h^2
    pub assumption_flags: [bool; 5],
}

impl DiagnosticRecord {
    pub fn all_flags(&self) -> bool {
        self.assumption_flags.iter().all(|&b| b)
    }
}

/// Kahler deviation psi = (g g_s / f)^2 - 1.
///
/// Interior nodes use the direct formula; pole nodes use the limit
/// (g g_ss)^2 - 1, and the two nodes next to each pole blend the two
/// expressions linearly to suppress the round-off amplified by f -> 0.
pub fn psi_field(profile: &MetricProfile) -> Vec<f64> {
    let d = profile.derivs();
    psi_from_parts(profile, &d.gs, &d.gss)
}

pub(crate) fn psi_from_parts(profile: &MetricProfile, gs: &[f64], gss: &[f64]) -> Vec<f64> {
    let n = profile.node_count();
    let mut psi = vec![0.0; n];
    let pole_form = |i: usize| {
        let w = profile.g[i] * gss[i];
        w * w - 1.0
    };
    for i in 1..n - 1 {
        let w = profile.g[i] * gs[i] / profile.f[i];
        psi[i] = w * w - 1.0;
    }
    psi[0] = pole_form(0);
    psi[n - 1] = pole_form(n - 1);
    for (i, w) in [(1usize, 1.0 / 3.0), (2usize, 2.0 / 3.0)] {
        psi[i] = w * psi[i] + (1.0 - w) * pole_form(i);
        let j = n - 1 - i;
        psi[j] = w * psi[j] + (1.0 - w) * pole_form(j);
    }
    psi
}

/// Calabi residual F = f - g g_s (exactly zero at the poles by parity).
pub fn f_cal_field(profile: &MetricProfile) -> Vec<f64> {
    let d = profile.derivs();
    (0..profile.node_count())
        .map(|i| profile.f[i] - profile.g[i] * d.gs[i])
        .collect()
}

pub fn compute_diagnostics(profile: &MetricProfile, delta: f64) -> Result<DiagnosticRecord> {
    let n = profile.node_count();
    let d = profile.derivs();
    let curv = compute_curvatures(profile)?;
    let psi = psi_from_parts(profile, &d.gs, &d.gss);

    let (mut mu, mut mu_argmin) = (f64::INFINITY, 0usize);
    for (i, &gi) in profile.g.iter().enumerate() {
        if gi < mu {
            mu = gi;
            mu_argmin = i;
        }
    }
    let g_plus = profile.g[n - 1];
    let g_minus = profile.g[0];
    let threshold = g_plus * g_plus - 3.0 * g_minus * g_minus;

    let mut psi_min = f64::INFINITY;
    let mut psi_max = f64::NEG_INFINITY;
    for &v in &psi {
        psi_min = psi_min.min(v);
        psi_max = psi_max.max(v);
    }

    let mut f_cal_max_abs = 0.0f64;
    for i in 0..n {
        f_cal_max_abs = f_cal_max_abs.max((profile.f[i] - profile.g[i] * d.gs[i]).abs());
    }

    let mut fs_min = f64::INFINITY;
    let mut fs_max = f64::NEG_INFINITY;
    for &v in &d.fs {
        fs_min = fs_min.min(v);
        fs_max = fs_max.max(v);
    }

    let mut q_min = f64::INFINITY;
    for i in 0..n {
        let q = profile.g[i] * d.gss[i] - d.gs[i] * d.gs[i] - 2.0 * d.fs[i] * d.fs[i];
        q_min = q_min.min(q);
    }

    let gs_max = d.gs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = flag_tolerance(profile);
    let max_f_minus_g = (0..n)
        .map(|i| profile.f[i] - profile.g[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let gs_min = d.gs.iter().cloned().fold(f64::INFINITY, f64::min);
    let fs_abs_max = fs_max.abs().max(fs_min.abs());
    let assumption_flags = [
        max_f_minus_g <= tol,                       // (a) f <= g
        psi_max <= tol,                             // (b) g |g_s| <= f
        fs_abs_max <= 2.0 / 3.0f64.sqrt() + tol,    // (c)
        threshold >= delta * delta - tol,           // (d)
        gs_min >= -tol,                             // (e) g_s >= 0
    ];

    Ok(DiagnosticRecord {
        t: profile.t,
        mu,
        mu_argmin,
        g_plus,
        psi_min,
        psi_max,
        f_cal_max_abs,
        fs_min,
        fs_max,
        gs_max,
        sup_curv: curv.sup_abs(),
        q_min,
        threshold,
        assumption_flags,
    })
}
