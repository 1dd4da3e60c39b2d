//! Warped Berger metric profiles on the fixed computational grid.
//!
//! A profile stores the two warping functions (f, g) and the arclength
//! Jacobian ds/dx on a shared grid. f closes to 0 with unit one-sided slope
//! at both poles, g stays positive, and all arclength derivatives go through
//! the Jacobian chain rule with parity-closed stencils.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::quad::cumulative_simpson;
use crate::stencil::{d1_closed, d2_closed, Parity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricProfile {
    pub grid: SpatialGrid,
    /// Hopf-fiber size; odd-class, zero at both poles.
    pub f: Vec<f64>,
    /// Base-sphere size; even-class, positive everywhere.
    pub g: Vec<f64>,
    /// Arclength Jacobian ds/dx; even-class, positive everywhere.
    pub jac: Vec<f64>,
    /// Flow time (length^2 units).
    pub t: f64,
}

impl MetricProfile {
    pub fn new(grid: SpatialGrid, f: Vec<f64>, g: Vec<f64>, jac: Vec<f64>, t: f64) -> Result<Self> {
        let n = grid.node_count();
        if f.len() != n || g.len() != n || jac.len() != n {
            return Err(Error::InvalidProfile(format!(
                "array lengths ({}, {}, {}) do not match grid ({n})",
                f.len(),
                g.len(),
                jac.len()
            )));
        }
        for (name, arr) in [("f", &f), ("g", &g), ("jac", &jac)] {
            if let Some(i) = arr.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidProfile(format!(
                    "{name}[{i}] is not finite"
                )));
            }
        }
        if f[0] != 0.0 || f[n - 1] != 0.0 {
            return Err(Error::InvalidProfile(
                "f must vanish exactly at the pole nodes".into(),
            ));
        }
        if let Some(i) = f[1..n - 1].iter().position(|&v| v <= 0.0) {
            return Err(Error::InvalidProfile(format!(
                "f[{}] = {} is not positive at an interior node",
                i + 1,
                f[i + 1]
            )));
        }
        if let Some(i) = g.iter().position(|&v| v <= 0.0) {
            return Err(Error::InvalidProfile(format!("g[{i}] = {} <= 0", g[i])));
        }
        if let Some(i) = jac.iter().position(|&v| v <= 0.0) {
            return Err(Error::InvalidProfile(format!("jac[{i}] = {} <= 0", jac[i])));
        }
        Ok(MetricProfile { grid, f, g, jac, t })
    }

    pub fn node_count(&self) -> usize {
        self.grid.node_count()
    }

    /// Arclength s(x), anchored so that s = 0 at x = 0.
    ///
    /// With an even node count no node sits at x = 0 and the anchor value is
    /// interpolated linearly between the two middle nodes.
    pub fn arclength(&self) -> Vec<f64> {
        let raw = cumulative_simpson(&self.jac, self.grid.h());
        let anchor = match self.grid.center_node() {
            Some(mid) => raw[mid],
            None => {
                let lo = self.node_count() / 2 - 1;
                0.5 * (raw[lo] + raw[lo + 1])
            }
        };
        raw.iter().map(|v| v - anchor).collect()
    }

    pub fn s_minus(&self) -> f64 {
        self.arclength()[0]
    }

    pub fn s_plus(&self) -> f64 {
        *self.arclength().last().unwrap()
    }

    /// Arclength derivative of a field sampled on this profile's grid.
    ///
    /// `order` is 1 or 2; the caller declares the parity class of the field
    /// (odd-like f, even-like g). The second derivative agrees with a
    /// repeated first derivative to O(h^2).
    pub fn d_ds(&self, field: &[f64], order: u32, parity: Parity) -> Result<Vec<f64>> {
        if field.len() != self.node_count() {
            return Err(Error::Contract(format!(
                "field length {} does not match grid {}",
                field.len(),
                self.node_count()
            )));
        }
        let h = self.grid.h();
        match order {
            1 => {
                let ux = d1_closed(field, h, parity);
                Ok(ux
                    .iter()
                    .zip(&self.jac)
                    .map(|(u, j)| u / j)
                    .collect())
            }
            2 => {
                let ux = d1_closed(field, h, parity);
                let uxx = d2_closed(field, h, parity);
                let jx = d1_closed(&self.jac, h, Parity::Even);
                Ok((0..field.len())
                    .map(|i| (uxx[i] - ux[i] * jx[i] / self.jac[i]) / (self.jac[i] * self.jac[i]))
                    .collect())
            }
            _ => Err(Error::Contract(format!("derivative order {order} not supported"))),
        }
    }

    /// First and second arclength derivatives of f and g plus the two
    /// pole-regularized ratios the flow and curvature formulas share.
    pub(crate) fn derivs(&self) -> Derivs {
        let n = self.node_count();
        let h = self.grid.h();
        let fx = d1_closed(&self.f, h, Parity::Odd);
        let fxx = d2_closed(&self.f, h, Parity::Odd);
        let gx = d1_closed(&self.g, h, Parity::Even);
        let gxx = d2_closed(&self.g, h, Parity::Even);
        let jx = d1_closed(&self.jac, h, Parity::Even);

        let mut fs = vec![0.0; n];
        let mut fss = vec![0.0; n];
        let mut gs = vec![0.0; n];
        let mut gss = vec![0.0; n];
        for i in 0..n {
            let j = self.jac[i];
            let j2 = j * j;
            fs[i] = fx[i] / j;
            gs[i] = gx[i] / j;
            fss[i] = (fxx[i] - fx[i] * jx[i] / j) / j2;
            gss[i] = (gxx[i] - gx[i] * jx[i] / j) / j2;
        }

        // f_s g_s / f: direct off the poles, l'Hopital limit g_ss at them,
        // averaged blend at the first interior node to tame the f -> 0
        // round-off amplification.
        let mut fsgs_f = vec![0.0; n];
        for i in 1..n - 1 {
            fsgs_f[i] = fs[i] * gs[i] / self.f[i];
        }
        fsgs_f[0] = gss[0];
        fsgs_f[n - 1] = gss[n - 1];
        fsgs_f[1] = 0.5 * fsgs_f[1] + 0.25 * (fsgs_f[0] + fsgs_f[2]);
        fsgs_f[n - 2] = 0.5 * fsgs_f[n - 2] + 0.25 * (fsgs_f[n - 1] + fsgs_f[n - 3]);

        // f_ss / f: pole limit is f_sss / f_s; f_ss is odd-class with exact
        // zero at the pole, so its one-node difference gives f_sss there.
        let mut fss_f = vec![0.0; n];
        for i in 1..n - 1 {
            fss_f[i] = fss[i] / self.f[i];
        }
        let hs_l = h * self.jac[0];
        let hs_r = h * self.jac[n - 1];
        fss_f[0] = fss[1] / hs_l / fs[0];
        fss_f[n - 1] = -fss[n - 2] / hs_r / fs[n - 1];
        fss_f[1] = 0.5 * fss_f[1] + 0.25 * (fss_f[0] + fss_f[2]);
        fss_f[n - 2] = 0.5 * fss_f[n - 2] + 0.25 * (fss_f[n - 1] + fss_f[n - 3]);

        Derivs {
            fs,
            fss,
            gs,
            gss,
            fsgs_f,
            fss_f,
        }
    }
}

/// Arclength derivatives and regularized ratios of one profile.
#[derive(Debug, Clone)]
pub(crate) struct Derivs {
    pub fs: Vec<f64>,
    pub fss: Vec<f64>,
    pub gs: Vec<f64>,
    pub gss: Vec<f64>,
    /// f_s g_s / f with its pole limit g_ss substituted at the poles.
    pub fsgs_f: Vec<f64>,
    /// f_ss / f with its pole limit f_sss / f_s substituted at the poles.
    pub fss_f: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn half_sine_profile(n: usize) -> MetricProfile {
        // f = sin(s - s_-) on s in [-pi/2, pi/2], g^2 = 1 + 2(1 - cos(s - s_-)),
        // jac = pi/2: the eps = 0 seed family at unit alpha.
        let grid = SpatialGrid::new(n).unwrap();
        let jac = vec![PI / 2.0; n];
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; n];
        for i in 0..n {
            let u = PI / 2.0 * (grid.x(i) + 1.0); // s - s_-
            f[i] = u.sin();
            g[i] = (1.0 + 2.0 * (1.0 - u.cos())).sqrt();
        }
        f[0] = 0.0;
        f[n - 1] = 0.0;
        MetricProfile::new(grid, f, g, jac, 0.0).unwrap()
    }

    #[test]
    fn arclength_unit_jacobian() {
        let grid = SpatialGrid::new(65).unwrap();
        let n = grid.node_count();
        let mut f: Vec<f64> = (0..n)
            .map(|i| (PI / 2.0 * (grid.x(i) + 1.0)).sin())
            .collect();
        f[0] = 0.0;
        f[n - 1] = 0.0;
        let p = MetricProfile::new(grid.clone(), f, vec![1.0; n], vec![1.0; n], 0.0).unwrap();
        let s = p.arclength();
        for i in 0..n {
            assert!((s[i] - grid.x(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn arclength_constant_scaling() {
        let p = half_sine_profile(129);
        let s = p.arclength();
        assert!((s[128] - s[0] - PI).abs() < 1e-12);
        assert!((p.s_plus() - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn arclength_matches_trapezoid_oracle() {
        // independent oracle: cumulative trapezoid of the same Jacobian
        let p = half_sine_profile(257);
        let h = p.grid.h();
        let mut trap = vec![0.0; p.node_count()];
        for i in 1..p.node_count() {
            trap[i] = trap[i - 1] + 0.5 * h * (p.jac[i - 1] + p.jac[i]);
        }
        let span = trap[p.node_count() - 1] - trap[0];
        let s = p.arclength();
        let tol = 10.0 * h * h;
        assert!((span - PI).abs() < tol);
        assert!(((s[p.node_count() - 1] - s[0]) - span).abs() < tol);
    }

    #[test]
    fn d_ds_of_arclength_is_one() {
        let p = half_sine_profile(129);
        let s = p.arclength();
        let ds = p.d_ds(&s, 1, Parity::Odd).unwrap();
        let tol = 10.0 * p.grid.h() * p.grid.h();
        for (i, v) in ds.iter().enumerate() {
            assert!((v - 1.0).abs() < tol, "node {i}: {v}");
        }
    }

    #[test]
    fn d_ds_even_field_vanishes_at_poles() {
        // g^2 = 1 + 2(1 - cos u): g_s = sin u / g vanishes at both poles
        let p = half_sine_profile(257);
        let gs = p.d_ds(&p.g, 1, Parity::Even).unwrap();
        let tol = 10.0 * p.grid.h() * p.grid.h();
        assert!(gs[0].abs() < tol);
        assert!(gs[p.node_count() - 1].abs() < tol);
        // interior check against the analytic derivative
        let s = p.arclength();
        for i in 1..p.node_count() - 1 {
            let u = s[i] + PI / 2.0;
            let exact = u.sin() / p.g[i];
            assert!((gs[i] - exact).abs() < tol, "node {i}");
        }
    }

    #[test]
    fn d_ds_second_derivative_of_sine() {
        let p = half_sine_profile(257);
        let fss = p.d_ds(&p.f, 2, Parity::Odd).unwrap();
        let s = p.arclength();
        let tol = 10.0 * p.grid.h() * p.grid.h();
        for i in 0..p.node_count() {
            let u = s[i] + PI / 2.0;
            assert!((fss[i] + u.sin()).abs() < tol, "node {i}: {}", fss[i]);
        }
    }

    #[test]
    fn second_derivative_consistent_with_repeated_first() {
        let p = half_sine_profile(257);
        let g1 = p.d_ds(&p.g, 1, Parity::Even).unwrap();
        let g2a = p.d_ds(&g1, 1, Parity::Odd).unwrap();
        let g2b = p.d_ds(&p.g, 2, Parity::Even).unwrap();
        let tol = 10.0 * p.grid.h() * p.grid.h();
        for i in 0..p.node_count() {
            assert!((g2a[i] - g2b[i]).abs() < tol, "node {i}");
        }
    }

    #[test]
    fn closing_slopes() {
        let p = half_sine_profile(513);
        let d = p.derivs();
        let tol = 10.0 * p.grid.h() * p.grid.h();
        assert!((d.fs[0] - 1.0).abs() < tol);
        assert!((d.fs[p.node_count() - 1] + 1.0).abs() < tol);
    }

    #[test]
    fn regularized_ratios_at_poles() {
        // eps = 0 data: f_s g_s / f -> g_ss = (phi f_s - g_s^2)/g at the poles
        // with phi = 1, i.e. g_ss(s_-) = 1 / g(s_-) = 1.
        let p = half_sine_profile(513);
        let d = p.derivs();
        let tol = 20.0 * p.grid.h() * p.grid.h();
        assert!((d.fsgs_f[0] - 1.0).abs() < tol, "{}", d.fsgs_f[0]);
        // f = sin u: f_ss/f = -1 everywhere including the poles
        for i in 0..p.node_count() {
            assert!((d.fss_f[i] + 1.0).abs() < 30.0 * tol, "node {i}: {}", d.fss_f[i]);
        }
    }

    #[test]
    fn rejects_bad_profiles() {
        let grid = SpatialGrid::new(65).unwrap();
        let n = grid.node_count();
        let f: Vec<f64> = (0..n)
            .map(|i| (PI / 2.0 * (grid.x(i) + 1.0)).sin().max(0.0))
            .collect();
        let mut f0 = f.clone();
        f0[0] = 0.0;
        f0[n - 1] = 0.0;
        // non-positive jacobian
        let mut jac = vec![1.0; n];
        jac[10] = 0.0;
        assert!(MetricProfile::new(grid.clone(), f0.clone(), vec![1.0; n], jac, 0.0).is_err());
        // g <= 0
        let mut g = vec![1.0; n];
        g[3] = -0.5;
        assert!(MetricProfile::new(grid.clone(), f0.clone(), g, vec![1.0; n], 0.0).is_err());
        // f not pinned at pole
        let mut f1 = f0.clone();
        f1[0] = 1e-3;
        assert!(MetricProfile::new(grid, f1, vec![1.0; n], vec![1.0; n], 0.0).is_err());
    }
}
