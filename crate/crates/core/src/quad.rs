//! Composite Simpson quadrature on the uniform grid.

/// Cumulative integral of `y` with node spacing `h`, anchored to 0 at the
/// first node. Even-index increments use the standard Simpson panel; the
/// first half-panel integrates the parabola through the first three nodes.
pub fn cumulative_simpson(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 3, "need at least 3 nodes");
    let mut c = vec![0.0; n];
    c[1] = h / 12.0 * (5.0 * y[0] + 8.0 * y[1] - y[2]);
    for i in 2..n {
        c[i] = c[i - 2] + h / 3.0 * (y[i - 2] + 4.0 * y[i - 1] + y[i]);
    }
    c
}

/// Definite integral over the whole grid.
pub fn integrate_simpson(y: &[f64], h: f64) -> f64 {
    *cumulative_simpson(y, h).last().unwrap()
}
