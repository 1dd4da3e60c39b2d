//! Finite-difference stencils on the uniform x grid.
//!
//! Interior nodes use 4th-order centered stencils. The two nodes at each end
//! use 2nd-order centered stencils closed by a parity ghost extension: an
//! odd-class field reflects as 2*u(pole) - u, an even-class field reflects
//! as-is. This realizes the smooth closing of the metric over the poles at
//! the discrete level, so no one-sided extrapolation is needed there.
//!
//! A separate "segment" mode (plain one-sided ends, no ghosts) serves open
//! intervals such as truncated soliton profiles.

/// Reflection class of a field across the poles.
///
/// `Odd` reflects about the pole value (for f, whose pole value is 0, this is
/// plain sign flip); `Even` reflects unchanged (g, jac, v = g^2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

#[inline]
fn ghost(u: &[f64], parity: Parity, pole: usize, k: usize) -> f64 {
    // value at the node k steps beyond the pole
    let n = u.len();
    let inner = if pole == 0 { k } else { n - 1 - k };
    match parity {
        Parity::Even => u[inner],
        Parity::Odd => 2.0 * u[pole] - u[inner],
    }
}

/// First x-derivative with parity-closed poles.
pub fn d1_closed(u: &[f64], h: f64, parity: Parity) -> Vec<f64> {
    let n = u.len();
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (u[i - 2] - 8.0 * u[i - 1] + 8.0 * u[i + 1] - u[i + 2]) / (12.0 * h);
    }
    // poles: centered 3-point with one ghost layer
    d[0] = (u[1] - ghost(u, parity, 0, 1)) / (2.0 * h);
    d[n - 1] = (ghost(u, parity, n - 1, 1) - u[n - 2]) / (2.0 * h);
    d[1] = (u[2] - u[0]) / (2.0 * h);
    d[n - 2] = (u[n - 1] - u[n - 3]) / (2.0 * h);
    if let Parity::Even = parity {
        // centered difference of an even extension vanishes identically
        d[0] = 0.0;
        d[n - 1] = 0.0;
    }
    d
}

/// Second x-derivative with parity-closed poles.
pub fn d2_closed(u: &[f64], h: f64, parity: Parity) -> Vec<f64> {
    let n = u.len();
    let h2 = h * h;
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (-u[i - 2] + 16.0 * u[i - 1] - 30.0 * u[i] + 16.0 * u[i + 1] - u[i + 2])
            / (12.0 * h2);
    }
    d[0] = (ghost(u, parity, 0, 1) - 2.0 * u[0] + u[1]) / h2;
    d[n - 1] = (u[n - 2] - 2.0 * u[n - 1] + ghost(u, parity, n - 1, 1)) / h2;
    d[1] = (u[0] - 2.0 * u[1] + u[2]) / h2;
    d[n - 2] = (u[n - 3] - 2.0 * u[n - 2] + u[n - 1]) / h2;
    if let Parity::Odd = parity {
        // odd extension about the pole value has zero second difference there
        d[0] = 0.0;
        d[n - 1] = 0.0;
    }
    d
}

/// First x-derivative on an open segment (one-sided 4th-order ends).
pub fn d1_segment(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (u[i - 2] - 8.0 * u[i - 1] + 8.0 * u[i + 1] - u[i + 2]) / (12.0 * h);
    }
    d[0] = (-25.0 * u[0] + 48.0 * u[1] - 36.0 * u[2] + 16.0 * u[3] - 3.0 * u[4]) / (12.0 * h);
    d[1] = (-3.0 * u[0] - 10.0 * u[1] + 18.0 * u[2] - 6.0 * u[3] + u[4]) / (12.0 * h);
    d[n - 2] =
        (3.0 * u[n - 1] + 10.0 * u[n - 2] - 18.0 * u[n - 3] + 6.0 * u[n - 4] - u[n - 5]) / (12.0 * h);
    d[n - 1] = (25.0 * u[n - 1] - 48.0 * u[n - 2] + 36.0 * u[n - 3] - 16.0 * u[n - 4]
        + 3.0 * u[n - 5])
        / (12.0 * h);
    d
}

/// Second x-derivative on an open segment (one-sided 2nd-order ends).
pub fn d2_segment(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let h2 = h * h;
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (-u[i - 2] + 16.0 * u[i - 1] - 30.0 * u[i] + 16.0 * u[i + 1] - u[i + 2])
            / (12.0 * h2);
    }
    d[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h2;
    d[1] = (u[0] - 2.0 * u[1] + u[2]) / h2;
    d[n - 2] = (u[n - 3] - 2.0 * u[n - 2] + u[n - 1]) / h2;
    d[n - 1] = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / h2;
    d
}
