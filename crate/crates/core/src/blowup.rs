//! Parabolic rescaling at the crushing pole and alignment against the
//! blowdown soliton.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::profile::MetricProfile;
use crate::quad::cumulative_simpson;
use crate::soliton::{implicit_forward, solve_phi_at, SolitonProfile};

/// Rescale the metric by K and recenter time: lengths scale by sqrt(K),
/// curvatures by 1/K, t by K (t - t_center).
pub fn parabolic_rescale(p: &MetricProfile, k: f64, t_center: f64) -> Result<MetricProfile> {
    if !(k > 0.0) {
        return Err(Error::Parameter(format!("rescale factor K = {k} must be positive")));
    }
    let s = k.sqrt();
    Ok(MetricProfile {
        grid: p.grid.clone(),
        f: p.f.iter().map(|v| v * s).collect(),
        g: p.g.iter().map(|v| v * s).collect(),
        jac: p.jac.iter().map(|v| v * s).collect(),
        t: k * (p.t - t_center),
    })
}

/// One rescaled snapshot with its anchored Calabi coordinate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RescaledFrame {
    pub k: f64,
    pub t_center: f64,
    pub profile: MetricProfile,
    /// Calabi coordinate per node; -inf/+inf at the pole nodes. rho = 0
    /// where g^2 crosses twice the rescaled minimum (a gauge-free marker).
    pub rho: Vec<f64>,
}

/// Calabi coordinate of a profile, anchored at the g^2 = 2 min(g)^2
/// crossing nearest the s_- pole.
pub fn anchored_rho(p: &MetricProfile) -> Result<Vec<f64>> {
    let n = p.node_count();
    let h = p.grid.h();
    // accumulate d(rho)/dx = 2 jac / f from the first interior node; the
    // pole nodes sit at -inf/+inf.
    let mut rate = vec![0.0; n];
    for i in 1..n - 1 {
        rate[i] = 2.0 * p.jac[i] / p.f[i];
    }
    let interior = &rate[1..n - 1];
    let cum = cumulative_simpson(interior, h);
    let mut rho = vec![0.0; n];
    rho[0] = f64::NEG_INFINITY;
    rho[n - 1] = f64::INFINITY;
    rho[1..n - 1].copy_from_slice(&cum);

    let mu = p.g.iter().cloned().fold(f64::INFINITY, f64::min);
    let target = 2.0 * mu * mu;
    let mut anchor = None;
    for i in 1..n - 1 {
        let a = p.g[i - 1] * p.g[i - 1];
        let b = p.g[i] * p.g[i];
        if a < target && b >= target {
            // linear interpolation in g^2 between the two nodes; fall back
            // to the right node when the left one is the pole (rho = -inf)
            let w = (target - a) / (b - a);
            anchor = Some(if i == 1 {
                rho[1]
            } else {
                rho[i - 1] + w * (rho[i] - rho[i - 1])
            });
            break;
        }
    }
    let anchor = anchor.ok_or_else(|| {
        Error::Alignment("no g^2 = 2 mu^2 crossing found for the rho anchor".into())
    })?;
    for v in rho[1..n - 1].iter_mut() {
        *v -= anchor;
    }
    Ok(rho)
}

/// Pick blow-up frames at times with T_est - t_k decreasing geometrically
/// (factor 2), the last one at the snapshot where mu first drops below
/// mu_last_fraction * mu(0).
pub fn extract_blowup_sequence(
    traj: &FlowTrajectory,
    count: usize,
    mu_last_fraction: f64,
) -> Result<Vec<RescaledFrame>> {
    if count < 3 {
        return Err(Error::Extraction(format!("count = {count} < 3")));
    }
    let t_est = traj
        .t_est
        .ok_or_else(|| Error::Extraction("trajectory has no singular-time estimate".into()))?;
    if traj.snapshots.len() < count + 2 {
        return Err(Error::Extraction(
            "too few snapshots near the singular time; use a denser output stride".into(),
        ));
    }
    let mu_of = |p: &MetricProfile| p.g.iter().cloned().fold(f64::INFINITY, f64::min);
    let mu0 = mu_of(&traj.snapshots[0]);
    let last = traj
        .snapshots
        .iter()
        .position(|p| mu_of(p) <= mu_last_fraction * mu0)
        .ok_or_else(|| {
            Error::Extraction(format!(
                "run never reached mu <= {mu_last_fraction} * mu(0); extend the run"
            ))
        })?;
    let gap_last = t_est - traj.snapshots[last].t;
    if !(gap_last > 0.0) {
        return Err(Error::Extraction("chosen frame lies past T_est".into()));
    }

    let mut chosen = Vec::with_capacity(count);
    for k in 0..count {
        let gap = gap_last * 2f64.powi((count - 1 - k) as i32);
        let target = t_est - gap;
        let idx = traj
            .snapshots
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let da = (a.1.t - target).abs();
                let db = (b.1.t - target).abs();
                da.partial_cmp(&db).unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        let err = (traj.snapshots[idx].t - target).abs();
        if err > 0.35 * gap {
            return Err(Error::Extraction(format!(
                "no snapshot within 35% of T_est - {gap:.3e}; use a denser output stride"
            )));
        }
        if chosen.last() == Some(&idx) {
            return Err(Error::Extraction(
                "consecutive frames map to the same snapshot; use a denser output stride".into(),
            ));
        }
        chosen.push(idx);
    }

    let mut frames = Vec::with_capacity(count);
    for idx in chosen {
        let snap = &traj.snapshots[idx];
        let mu = mu_of(snap);
        let k = 1.0 / (mu * mu);
        let profile = parabolic_rescale(snap, k, snap.t)?;
        let rho = anchored_rho(&profile)?;
        frames.push(RescaledFrame {
            k,
            t_center: snap.t,
            profile,
            rho,
        });
    }
    Ok(frames)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AlignResult {
    pub chi: f64,
    pub scale: f64,
    /// relative sup-distance of g^2 on the window at the optimum
    pub dist: f64,
    /// relative sup-distance of f^2 at the same (chi, scale)
    pub dist_f: f64,
    pub window_nodes: usize,
}

/// Distance from a rescaled frame to the soliton family, minimized over the
/// translation chi and the scale sigma applied to the soliton potential.
///
/// For fixed chi the optimal sigma for the relative sup-distance has the
/// closed form (max q + min q)/2 with q = g^2 / phi, giving the distance
/// (max q - min q)/(max q + min q); chi is then a 1-D search: coarse grid
/// followed by golden-section refinement. Fully deterministic.
pub fn align_distance(
    frame: &RescaledFrame,
    soliton: &SolitonProfile,
    half_window: f64,
) -> Result<AlignResult> {
    let n = frame.profile.node_count();
    let mut idx = Vec::new();
    for i in 1..n - 1 {
        if frame.rho[i].is_finite() && frame.rho[i].abs() <= half_window {
            idx.push(i);
        }
    }
    let rho_min = frame.rho[1];
    let rho_max = frame.rho[n - 2];
    if rho_min > -half_window || rho_max < half_window || idx.len() < 16 {
        return Err(Error::Alignment(format!(
            "frame covers rho in [{rho_min:.2}, {rho_max:.2}], need [-{half_window}, {half_window}]"
        )));
    }

    let g2: Vec<f64> = idx
        .iter()
        .map(|&i| frame.profile.g[i] * frame.profile.g[i])
        .collect();
    let rho: Vec<f64> = idx.iter().map(|&i| frame.rho[i]).collect();

    let dist_of = |chi: f64| -> Result<(f64, f64)> {
        let mut qmin = f64::INFINITY;
        let mut qmax = f64::NEG_INFINITY;
        for (k, &r) in rho.iter().enumerate() {
            let phi = solve_phi_at(r + chi, soliton.chi)?;
            let q = g2[k] / phi;
            qmin = qmin.min(q);
            qmax = qmax.max(q);
        }
        let sigma = 0.5 * (qmin + qmax);
        Ok(((qmax - qmin) / (qmax + qmin), sigma))
    };

    // center the search where the soliton's own anchor sits
    let chi0 = implicit_forward(2.0, soliton.chi);
    let mut best_chi = chi0;
    let mut best = f64::INFINITY;
    let coarse = 121;
    for j in 0..coarse {
        let chi = chi0 - 3.0 + 6.0 * j as f64 / (coarse - 1) as f64;
        let (d, _) = dist_of(chi)?;
        if d < best {
            best = d;
            best_chi = chi;
        }
    }
    // golden-section refinement on the bracketing interval
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best_chi - 0.06, best_chi + 0.06);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let mut fc = dist_of(c)?.0;
    let mut fd = dist_of(d)?.0;
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = dist_of(c)?.0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = dist_of(d)?.0;
        }
        if (b - a).abs() < 1e-11 {
            break;
        }
    }
    let chi_star = 0.5 * (a + b);
    let (dist, scale) = dist_of(chi_star)?;

    // secondary check of f^2 against the derived potential slope
    let mut dist_f = 0.0f64;
    for &i in &idx {
        let phi = solve_phi_at(frame.rho[i] + chi_star, soliton.chi)?;
        let expect = scale * crate::soliton::phi_r_ode1(phi);
        let have = frame.profile.f[i] * frame.profile.f[i];
        dist_f = dist_f.max(((have - expect) / expect).abs());
    }

    Ok(AlignResult {
        chi: chi_star,
        scale,
        dist,
        dist_f,
        window_nodes: idx.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::psi_field;
    use crate::flow::{estimate_singular_time, StopReason};
    use crate::grid::SpatialGrid;
    use crate::soliton::{phi_r_ode1, solve_phi_at};
    use std::f64::consts::PI;

    fn kahler_seed(n: usize) -> MetricProfile {
        let params = crate::initial::SeedParams {
            f_shape: crate::initial::FShape::HalfSine { length: PI },
            alpha: 1.0,
            delta: 0.5,
            epsilon: 0.0,
            phi_fn: crate::initial::PhiFn::Constant,
        };
        crate::initial::construct_initial_metric(&params, &SpatialGrid::new(n).unwrap()).unwrap()
    }

    #[test]
    fn rescale_scaling_laws_exact() {
        let p = kahler_seed(129);
        let q = parabolic_rescale(&p, 4.0, 0.0).unwrap();
        // arclengths double, g^2 quadruples
        let sp = p.arclength();
        let sq = q.arclength();
        for i in 0..p.node_count() {
            assert_eq!(q.g[i], 2.0 * p.g[i]);
            assert!((sq[i] - 2.0 * sp[i]).abs() < 1e-13);
        }
        // K = 1 is the identity
        let r = parabolic_rescale(&p, 1.0, 0.0).unwrap();
        assert_eq!(r, p);
        // K = 1/mu^2 makes the rescaled minimum exactly 1
        let mu = p.g.iter().cloned().fold(f64::INFINITY, f64::min);
        let u = parabolic_rescale(&p, 1.0 / (mu * mu), p.t).unwrap();
        let mu_u = u.g.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(mu_u, 1.0);
    }

    #[test]
    fn psi_invariant_under_rescale() {
        let p = kahler_seed(129);
        let q = parabolic_rescale(&p, 7.3, 0.0).unwrap();
        let a = psi_field(&p);
        let b = psi_field(&q);
        for i in 0..p.node_count() {
            // dimensionless: identical up to rounding in the scaled arrays
            assert!((a[i] - b[i]).abs() < 1e-12, "node {i}");
        }
    }

    #[test]
    fn self_alignment_recovers_gauge() {
        // frame = soliton shifted by +1.3 in rho and scaled by 0.5
        let sol = SolitonProfile::build(-10.0, 10.0, 1024, 0.0).unwrap();
        let n = 1025usize;
        let grid = SpatialGrid::new(n).unwrap();
        let (chi0, sigma0) = (1.3f64, 0.5f64);
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut jac = vec![0.0; n];
        let mut rho = vec![0.0; n];
        // sample the shifted soliton on rho in [-7, 7]
        for i in 0..n {
            let r = -7.0 + 14.0 * i as f64 / (n - 1) as f64;
            let phi = solve_phi_at(r - chi0, 0.0).unwrap();
            g[i] = (sigma0 * phi).sqrt();
            f[i] = (sigma0 * phi_r_ode1(phi)).sqrt();
            jac[i] = 1.0;
            rho[i] = r;
        }
        f[0] = 0.0;
        f[n - 1] = 0.0; // placate the profile invariant; outside the window
        let frame = RescaledFrame {
            k: 1.0,
            t_center: 0.0,
            profile: MetricProfile {
                grid,
                f,
                g,
                jac,
                t: 0.0,
            },
            rho,
        };
        let a = align_distance(&frame, &sol, 5.0).unwrap();
        assert!((a.chi - (-chi0)).abs() < 1e-6, "chi {}", a.chi);
        assert!((a.scale - sigma0).abs() < 1e-6, "scale {}", a.scale);
        assert!(a.dist < 1e-8, "dist {}", a.dist);
    }

    #[test]
    fn controlled_perturbation_distance() {
        // 1% multiplicative ripple on g^2 -> dist about 0.01 within factor 2
        let sol = SolitonProfile::build(-10.0, 10.0, 1024, 0.0).unwrap();
        let n = 1025usize;
        let grid = SpatialGrid::new(n).unwrap();
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut rho = vec![0.0; n];
        for i in 0..n {
            let r = -7.0 + 14.0 * i as f64 / (n - 1) as f64;
            let phi = solve_phi_at(r, 0.0).unwrap();
            let ripple = 1.0 + 0.01 * (7.0 * r).sin();
            g[i] = (phi * ripple).sqrt();
            f[i] = phi_r_ode1(phi).sqrt();
            rho[i] = r;
        }
        f[0] = 0.0;
        f[n - 1] = 0.0;
        let frame = RescaledFrame {
            k: 1.0,
            t_center: 0.0,
            profile: MetricProfile {
                grid,
                f,
                g,
                jac: vec![1.0; n],
                t: 0.0,
            },
            rho,
        };
        let a = align_distance(&frame, &sol, 5.0).unwrap();
        assert!(a.dist > 0.005 && a.dist < 0.02, "dist {}", a.dist);
    }

    #[test]
    fn insufficient_window_is_an_error() {
        let sol = SolitonProfile::build(-10.0, 10.0, 512, 0.0).unwrap();
        let n = 129usize;
        let grid = SpatialGrid::new(n).unwrap();
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut rho = vec![0.0; n];
        for i in 0..n {
            let r = -2.0 + 4.0 * i as f64 / (n - 1) as f64; // covers only [-2, 2]
            let phi = solve_phi_at(r, 0.0).unwrap();
            g[i] = phi.sqrt();
            f[i] = phi_r_ode1(phi).sqrt();
            rho[i] = r;
        }
        f[0] = 0.0;
        f[n - 1] = 0.0;
        let frame = RescaledFrame {
            k: 1.0,
            t_center: 0.0,
            profile: MetricProfile {
                grid,
                f,
                g,
                jac: vec![1.0; n],
                t: 0.0,
            },
            rho,
        };
        assert!(align_distance(&frame, &sol, 5.0).is_err());
    }

    /// Soliton evolved by its own scaling law: phi(r, t) = c phi0(r + beta)
    /// with c = 1 - 4t and beta = -sqrt(2) ln c, capped smoothly on the far
    /// side to close the profile.
    fn synthetic_snapshot(t: f64, n: usize) -> MetricProfile {
        let grid = SpatialGrid::new(n).unwrap();
        let c = 1.0 - 4.0 * t;
        let beta = -std::f64::consts::SQRT_2 * c.ln();
        let (r_min, r_max) = (-16.0, 8.0);
        let x_sol = 0.6; // soliton portion of the x-axis
        let dr_dx = (r_max - r_min) / (1.0 + x_sol);
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut jac = vec![0.0; n];
        let mut g2_end = 0.0;
        let mut fe = 0.0;
        for i in 0..n {
            let x = grid.x(i);
            if x <= x_sol {
                let r = r_min + (x + 1.0) * dr_dx;
                let phi = solve_phi_at(r + beta, 0.0).unwrap();
                let phi_r = phi_r_ode1(phi);
                g[i] = (c * phi).sqrt();
                f[i] = (c * phi_r).sqrt();
                jac[i] = 0.5 * f[i] * dr_dx;
                g2_end = c * phi;
                fe = f[i];
            } else {
                // smooth cap: f tapers to zero, g keeps rising gently
                let w = (x - x_sol) / (1.0 - x_sol);
                let taper = (0.5 * PI * w).cos().powi(2);
                f[i] = fe * taper.max(0.0);
                g[i] = (g2_end * (1.0 + 0.5 * w)).sqrt();
                jac[i] = jac[i - 1];
            }
        }
        f[0] = 0.0;
        f[n - 1] = 0.0;
        MetricProfile {
            grid,
            f,
            g,
            jac,
            t,
        }
    }

    #[test]
    fn exactly_self_similar_input_gives_identical_frames() {
        let n = 1025usize;
        let times: Vec<f64> = (0..96).map(|k| 0.25 * (1.0 - 0.97f64.powi(k + 1))).collect();
        let snapshots: Vec<MetricProfile> =
            times.iter().map(|&t| synthetic_snapshot(t, n)).collect();
        let series: Vec<_> = snapshots
            .iter()
            .map(|p| crate::diagnostics::compute_diagnostics(p, 0.1).unwrap())
            .collect();
        let (t_est, _) = estimate_singular_time(&series).unwrap();
        assert!((t_est - 0.25).abs() < 2e-3, "T_est {t_est}");
        let traj = FlowTrajectory {
            snapshots,
            series,
            stop_reason: StopReason::MuStop,
            remesh_count: 0,
            steps: 0,
            t_est: Some(t_est),
            fit: None,
            type1_ratio_series: Vec::new(),
        };
        let sol = SolitonProfile::build(-10.0, 10.0, 1024, 0.0).unwrap();
        let frames = extract_blowup_sequence(&traj, 4, 0.3).unwrap();
        let mut dists = Vec::new();
        for fr in &frames {
            let a = align_distance(fr, &sol, 5.0).unwrap();
            dists.push(a.dist);
        }
        // every frame is the same geometry: distances all at the sampling floor
        for (k, &d) in dists.iter().enumerate() {
            assert!(d < 5e-4, "frame {k}: dist {d}");
        }
        let spread = dists.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - dists.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 2e-4, "spread {spread}");
    }

    #[test]
    fn alignment_invariant_under_regauging() {
        // re-gauging the frame by (chi, sigma) must not change the distance
        let sol = SolitonProfile::build(-10.0, 10.0, 1024, 0.0).unwrap();
        let base = synthetic_snapshot(0.1, 1025);
        let mu = base.g.iter().cloned().fold(f64::INFINITY, f64::min);
        let k = 1.0 / (mu * mu);
        let prof = parabolic_rescale(&base, k, base.t).unwrap();
        let rho = anchored_rho(&prof).unwrap();
        let frame = RescaledFrame {
            k,
            t_center: base.t,
            profile: prof,
            rho,
        };
        let a0 = align_distance(&frame, &sol, 5.0).unwrap();
        // regauge: scale the metric and shift the rho labels
        let prof2 = parabolic_rescale(&frame.profile, 1.7, frame.profile.t).unwrap();
        let rho2: Vec<f64> = frame.rho.iter().map(|r| r + 0.9).collect();
        let frame2 = RescaledFrame {
            k,
            t_center: base.t,
            profile: prof2,
            rho: rho2,
        };
        let a1 = align_distance(&frame2, &sol, 5.0).unwrap();
        assert!((a0.dist - a1.dist).abs() < 1e-6, "{} vs {}", a0.dist, a1.dist);
        assert!((a1.chi - (a0.chi - 0.9)).abs() < 1e-5);
        assert!((a1.scale - 1.7 * a0.scale).abs() < 1e-4 * a0.scale.max(1.0));
    }
}
