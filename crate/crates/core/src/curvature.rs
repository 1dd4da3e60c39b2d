//! Sectional curvatures of a warped Berger profile.
//!
//! Only the four distinct kappas of the ansatz are computed. Pole nodes get
//! the l'Hopital limits: f_s g_s/(f g) -> g_ss/g, f^2/g^4 -> 0 and
//! g_s^2/g^2 -> 0, which force k12 = k02 there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::MetricProfile;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureField {
    /// -f_ss/f (plane spanned by the radial direction and the Hopf fiber)
    pub k01: Vec<f64>,
    /// -g_ss/g (= k03)
    pub k02: Vec<f64>,
    /// f^2/g^4 - f_s g_s/(f g) (= k31)
    pub k12: Vec<f64>,
    /// (4g^2 - 3f^2)/g^4 - g_s^2/g^2
    pub k23: Vec<f64>,
    /// scalar curvature k01 + 2 k02 + 2 k12 + k23
    pub r: Vec<f64>,
}

impl CurvatureField {
    /// Largest |kappa| over all nodes and all four planes.
    pub fn sup_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for arr in [&self.k01, &self.k02, &self.k12, &self.k23] {
            for &v in arr.iter() {
                m = m.max(v.abs());
            }
        }
        m
    }
}

pub fn compute_curvatures(profile: &MetricProfile) -> Result<CurvatureField> {
    let n = profile.node_count();
    if let Some(i) = profile.g.iter().position(|&v| v <= 0.0) {
        return Err(Error::InvalidProfile(format!("g[{i}] <= 0")));
    }
    if let Some(i) = profile.f[1..n - 1].iter().position(|&v| v <= 0.0) {
        return Err(Error::InvalidProfile(format!(
            "f[{}] <= 0 at an interior node",
            i + 1
        )));
    }
    let d = profile.derivs();
    let mut k01 = vec![0.0; n];
    let mut k02 = vec![0.0; n];
    let mut k12 = vec![0.0; n];
    let mut k23 = vec![0.0; n];
    let mut r = vec![0.0; n];
    for i in 0..n {
        let f = profile.f[i];
        let g = profile.g[i];
        let g2 = g * g;
        let g4 = g2 * g2;
        k01[i] = -d.fss_f[i];
        k02[i] = -d.gss[i] / g;
        k12[i] = f * f / g4 - d.fsgs_f[i] / g;
        k23[i] = (4.0 * g2 - 3.0 * f * f) / g4 - d.gs[i] * d.gs[i] / g2;
        r[i] = k01[i] + 2.0 * k02[i] + 2.0 * k12[i] + k23[i];
    }
    // smoothness forces the mixed plane to agree with the base plane at the
    // poles; the regularized ratio already encodes this, pin it exactly
    k12[0] = k02[0];
    k12[n - 1] = k02[n - 1];
    r[0] = k01[0] + 2.0 * k02[0] + 2.0 * k12[0] + k23[0];
    r[n - 1] = k01[n - 1] + 2.0 * k02[n - 1] + 2.0 * k12[n - 1] + k23[n - 1];
    Ok(CurvatureField {
        k01,
        k02,
        k12,
        k23,
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;
    use std::f64::consts::PI;

    fn kahler_profile(n: usize) -> MetricProfile {
        let grid = SpatialGrid::new(n).unwrap();
        let jac = vec![PI / 2.0; n];
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; n];
        for i in 0..n {
            let u = PI / 2.0 * (grid.x(i) + 1.0);
            f[i] = u.sin();
            g[i] = (1.0 + 2.0 * (1.0 - u.cos())).sqrt();
        }
        f[0] = 0.0;
        f[n - 1] = 0.0;
        MetricProfile::new(grid, f, g, jac, 0.0).unwrap()
    }

    #[test]
    fn kahler_profile_has_k12_equal_k02() {
        let p = kahler_profile(513);
        let k = compute_curvatures(&p).unwrap();
        let tol = 10.0 * p.grid.h() * p.grid.h();
        for i in 0..p.node_count() {
            assert!((k.k12[i] - k.k02[i]).abs() < tol, "node {i}");
        }
    }

    #[test]
    fn pole_k23_is_four_over_g_squared() {
        // g(s_-) = 1, f ~ s - s_- near the pole, g_ss(s_-) = 1
        let p = kahler_profile(513);
        let k = compute_curvatures(&p).unwrap();
        let tol = 10.0 * p.grid.h() * p.grid.h();
        assert!((k.k23[0] - 4.0).abs() < tol, "{}", k.k23[0]);
    }

    #[test]
    fn scalar_curvature_combination() {
        let p = kahler_profile(129);
        let k = compute_curvatures(&p).unwrap();
        for i in 0..p.node_count() {
            let expect = k.k01[i] + 2.0 * k.k02[i] + 2.0 * k.k12[i] + k.k23[i];
            assert_eq!(k.r[i], expect);
        }
    }

    #[test]
    fn curvatures_commute_with_parabolic_rescaling() {
        let p = kahler_profile(129);
        let kap: f64 = 4.0;
        let sq = kap.sqrt();
        let q = MetricProfile::new(
            p.grid.clone(),
            p.f.iter().map(|v| v * sq).collect(),
            p.g.iter().map(|v| v * sq).collect(),
            p.jac.iter().map(|v| v * sq).collect(),
            0.0,
        )
        .unwrap();
        let k0 = compute_curvatures(&p).unwrap();
        let k1 = compute_curvatures(&q).unwrap();
        for i in 0..p.node_count() {
            for (a, b) in [
                (k0.k01[i], k1.k01[i]),
                (k0.k02[i], k1.k02[i]),
                (k0.k12[i], k1.k12[i]),
                (k0.k23[i], k1.k23[i]),
            ] {
                let scaled = a / kap;
                let denom = scaled.abs().max(1e-300);
                assert!(
                    ((b - scaled) / denom).abs() < 1e-12,
                    "node {i}: {b} vs {scaled}"
                );
            }
        }
    }

    #[test]
    fn refinement_order_at_least_two() {
        let err = |n: usize| {
            let p = kahler_profile(n);
            let k = compute_curvatures(&p).unwrap();
            let s = p.arclength();
            // analytic k02 for g^2 = 1 + 2(1 - cos u): g_ss/g = (cos u - g_s^2)/g^2
            (0..n)
                .map(|i| {
                    let u = s[i] + PI / 2.0;
                    let g2 = p.g[i] * p.g[i];
                    let gs = u.sin() / p.g[i];
                    let exact = -(u.cos() - gs * gs) / g2;
                    (k.k02[i] - exact).abs()
                })
                .fold(0.0f64, f64::max)
        };
        let e1 = err(129);
        let e2 = err(257);
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "order {order} (e1 {e1}, e2 {e2})");
    }
}
