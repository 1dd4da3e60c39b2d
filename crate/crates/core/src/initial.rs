//! Construction of the seed family of initial metrics.
//!
//! The family is built from a fiber profile f on [s_-, s_+] with |f_s| <= 1
//! (equality only at the poles) and a weight 1 - eps <= phi <= 1, via
//!
//! ```text
//! g^2(s) = alpha^2 + 2 * integral over [s_-, s] of phi f
//! ```
//!
//! subject to alpha^2 + delta^2 <= A^2/2, eps <= alpha^2/A^2 and
//! eps <= delta^2/A^2 with A^2 = 2 * integral f. Accepted parameters always
//! produce a profile satisfying all five closeness assumptions.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{compute_diagnostics, flag_tolerance};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::profile::MetricProfile;
use crate::quad::{cumulative_simpson, integrate_simpson};

/// Fiber-size generator for f(s) on [s_-, s_+].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FShape {
    /// f = (L/pi) sin(pi (s - s_-)/L); |f_s| = |cos| <= 1.
    HalfSine { length: f64 },
    /// f constant on a middle band with polynomial caps of width
    /// cap_fraction * length at each end; f_s = (1 - v^2)^3 on the caps.
    Plateau { length: f64, cap_fraction: f64 },
}

impl FShape {
    pub fn length(&self) -> f64 {
        match *self {
            FShape::HalfSine { length } => length,
            FShape::Plateau { length, .. } => length,
        }
    }

    /// f at distance u from the s_- pole, u in [0, length].
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            FShape::HalfSine { length } => {
                (length / std::f64::consts::PI) * (std::f64::consts::PI * u / length).sin()
            }
            FShape::Plateau {
                length,
                cap_fraction,
            } => {
                let w = cap_fraction * length;
                let cap = |d: f64| {
                    // integral of (1 - v^2)^3 from 0 to d/w, times w
                    let v = (d / w).clamp(0.0, 1.0);
                    let v2 = v * v;
                    w * v * (1.0 - v2 + 0.6 * v2 * v2 - v2 * v2 * v2 / 7.0)
                };
                let plateau = cap(w);
                if u <= w {
                    cap(u)
                } else if u >= length - w {
                    cap(length - u)
                } else {
                    plateau
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let l = self.length();
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Parameter(format!("f_shape length = {l} must be positive")));
        }
        if let FShape::Plateau { cap_fraction, .. } = *self {
            if !(cap_fraction > 0.0 && cap_fraction <= 0.5) {
                return Err(Error::Parameter(format!(
                    "plateau cap_fraction = {cap_fraction} must lie in (0, 0.5]"
                )));
            }
        }
        Ok(())
    }
}

/// Weight generator phi(s) with 1 - eps <= phi <= 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiFn {
    /// phi = 1 - eps everywhere. Accepted for any eps, with a warning when
    /// eps > 0 (the family nominally asks for a nonconstant weight there).
    Constant,
    /// phi = 1 - eps * (1 - z^2)^3 on a band of the given width fraction
    /// centered in [s_-, s_+]; phi = 1 outside the band.
    Bump { width_fraction: f64 },
}

impl PhiFn {
    pub fn eval(&self, u: f64, length: f64, eps: f64) -> f64 {
        match *self {
            PhiFn::Constant => 1.0 - eps,
            PhiFn::Bump { width_fraction } => {
                let half = 0.5 * width_fraction * length;
                let z = (u - 0.5 * length) / half;
                if z.abs() >= 1.0 {
                    1.0
                } else {
                    let w = 1.0 - z * z;
                    1.0 - eps * w * w * w
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let PhiFn::Bump { width_fraction } = *self {
            if !(width_fraction > 0.0 && width_fraction <= 1.0) {
                return Err(Error::Parameter(format!(
                    "bump width_fraction = {width_fraction} must lie in (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedParams {
    pub f_shape: FShape,
    pub alpha: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub phi_fn: PhiFn,
}

impl SeedParams {
    /// Check the family constraints against A^2 computed on the given grid.
    pub fn validate(&self, grid: &SpatialGrid) -> Result<f64> {
        self.f_shape.validate()?;
        self.phi_fn.validate()?;
        if !(self.alpha > 0.0) {
            return Err(Error::Parameter(format!("alpha = {} must be positive", self.alpha)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Parameter(format!("delta = {} must be positive", self.delta)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::Parameter(format!(
                "epsilon = {} must lie in [0, 1)",
                self.epsilon
            )));
        }
        let (f, _, jac) = self.sample_f(grid);
        let weighted: Vec<f64> = f.iter().map(|v| v * jac).collect();
        let a2 = compute_a2(&weighted, grid.h())?;
        if self.alpha * self.alpha + self.delta * self.delta > a2 / 2.0 {
            return Err(Error::Parameter(format!(
                "alpha^2 + delta^2 = {} exceeds A^2/2 = {}",
                self.alpha * self.alpha + self.delta * self.delta,
                a2 / 2.0
            )));
        }
        if self.epsilon > self.alpha * self.alpha / a2 {
            return Err(Error::Parameter(format!(
                "epsilon = {} exceeds alpha^2/A^2 = {}",
                self.epsilon,
                self.alpha * self.alpha / a2
            )));
        }
        if self.epsilon > self.delta * self.delta / a2 {
            return Err(Error::Parameter(format!(
                "epsilon = {} exceeds delta^2/A^2 = {}",
                self.epsilon,
                self.delta * self.delta / a2
            )));
        }
        Ok(a2)
    }

    fn sample_f(&self, grid: &SpatialGrid) -> (Vec<f64>, Vec<f64>, f64) {
        let n = grid.node_count();
        let length = self.f_shape.length();
        let jac = length / 2.0;
        let mut f = vec![0.0; n];
        let mut phi = vec![0.0; n];
        for i in 0..n {
            let u = jac * (grid.x(i) + 1.0);
            f[i] = self.f_shape.eval(u);
            phi[i] = self.phi_fn.eval(u, length, self.epsilon);
        }
        f[0] = 0.0;
        f[n - 1] = 0.0;
        (f, phi, jac)
    }
}

/// A^2 = 2 * integral of f ds, by composite Simpson. `weighted` must already
/// carry the ds/dx factor.
pub fn compute_a2(weighted: &[f64], h: f64) -> Result<f64> {
    if let Some(i) = weighted.iter().position(|&v| v < 0.0) {
        return Err(Error::Parameter(format!(
            "f[{i}] = {} is negative; the fiber profile must be nonnegative",
            weighted[i]
        )));
    }
    Ok(2.0 * integrate_simpson(weighted, h))
}

/// Build the seed metric for validated parameters.
pub fn construct_initial_metric(params: &SeedParams, grid: &SpatialGrid) -> Result<MetricProfile> {
    params.validate(grid)?;
    let (f, phi, jac) = params.sample_f(grid);
    let n = grid.node_count();
    let integrand: Vec<f64> = (0..n).map(|i| 2.0 * phi[i] * f[i] * jac).collect();
    let accum = cumulative_simpson(&integrand, grid.h());
    let mut g = vec![0.0; n];
    for i in 0..n {
        let g2 = params.alpha * params.alpha + accum[i];
        if g2 <= 0.0 {
            return Err(Error::Parameter(format!("g^2 = {g2} <= 0 at node {i}")));
        }
        g[i] = g2.sqrt();
    }
    MetricProfile::new(grid.clone(), f, g, vec![jac; n], 0.0)
}

/// One closeness assumption with its worst-case margin.
///
/// `margin` is the amount by which the inequality holds (negative means
/// violated); `node` is where the worst case occurs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlagMargin {
    pub passed: bool,
    pub margin: f64,
    pub node: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosenessReport {
    /// (a) f <= g
    pub a_ordering: FlagMargin,
    /// (b) g |g_s| <= f, i.e. psi <= 0
    pub b_kahler_pinching: FlagMargin,
    /// (c) |f_s| <= 2/sqrt(3)
    pub c_gradient: FlagMargin,
    /// (d) g^2(s_+) - 3 g^2(s_-) >= delta^2
    pub d_threshold: FlagMargin,
    /// (e) g_s >= 0, strict in the interior
    pub e_monotone: FlagMargin,
    pub tolerance: f64,
    /// set when a constant phi was used with eps > 0
    pub constant_phi_warning: bool,
}

impl ClosenessReport {
    pub fn all_passed(&self) -> bool {
        self.a_ordering.passed
            && self.b_kahler_pinching.passed
            && self.c_gradient.passed
            && self.d_threshold.passed
            && self.e_monotone.passed
    }
}

/// Evaluate the five closeness assumptions with numeric margins.
pub fn validate_closeness(profile: &MetricProfile, delta: f64) -> Result<ClosenessReport> {
    let n = profile.node_count();
    let d = profile.derivs();
    let psi = crate::diagnostics::psi_from_parts(profile, &d.gs, &d.gss);
    let tol = flag_tolerance(profile);

    let worst = |values: Box<dyn Iterator<Item = (usize, f64)> + '_>| -> FlagMargin {
        let (node, margin) = values
            .reduce(|a, b| if b.1 < a.1 { b } else { a })
            .expect("non-empty profile");
        FlagMargin {
            passed: margin >= -tol,
            margin,
            node,
        }
    };

    let a = worst(Box::new(
        (0..n).map(|i| (i, profile.g[i] - profile.f[i])),
    ));
    let b = worst(Box::new(psi.iter().enumerate().map(|(i, &v)| (i, -v))));
    let c = worst(Box::new(
        d.fs
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, 2.0 / 3.0f64.sqrt() - v.abs())),
    ));
    let g_plus = profile.g[n - 1];
    let g_minus = profile.g[0];
    let d_flag = FlagMargin {
        passed: g_plus * g_plus - 3.0 * g_minus * g_minus - delta * delta >= -tol,
        margin: g_plus * g_plus - 3.0 * g_minus * g_minus - delta * delta,
        node: 0,
    };
    let e = worst(Box::new(d.gs.iter().enumerate().map(|(i, &v)| (i, v))));

    Ok(ClosenessReport {
        a_ordering: a,
        b_kahler_pinching: b,
        c_gradient: c,
        d_threshold: d_flag,
        e_monotone: e,
        tolerance: tol,
        constant_phi_warning: false,
    })
}

/// Construct and validate in one call; the report carries the constant-phi
/// warning when applicable.
pub fn construct_and_validate(
    params: &SeedParams,
    grid: &SpatialGrid,
) -> Result<(MetricProfile, ClosenessReport)> {
    let profile = construct_initial_metric(params, grid)?;
    let mut report = validate_closeness(&profile, params.delta)?;
    report.constant_phi_warning = params.epsilon > 0.0 && params.phi_fn == PhiFn::Constant;
    Ok((profile, report))
}

/// Convenience: diagnostics record for a freshly constructed seed.
pub fn seed_diagnostics(params: &SeedParams, grid: &SpatialGrid) -> Result<crate::diagnostics::DiagnosticRecord> {
    let profile = construct_initial_metric(params, grid)?;
    compute_diagnostics(&profile, params.delta)
}
