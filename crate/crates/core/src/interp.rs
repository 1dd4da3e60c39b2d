//! Local polynomial resampling for the remesh step.
//!
//! The remesh feeds the resampled fields straight back into second-derivative
//! stencils, so the interpolant's error must stay smooth to second
//! differences. A C^1 shape-preserving cubic fails that: its curvature jumps
//! at the knots read as O(h) noise in g_ss at the new nodes, worst at the
//! poles where the diagnostics are most sensitive. A sliding 6-point Lagrange
//! polynomial keeps the error at O(h^6) with only O(h^6) jumps between
//! intervals, i.e. O(h^4) noise in second differences.

/// Evaluate the local 6-point Lagrange interpolant through (x, y) at the
/// query points. Queries are clamped to the data range; x must be strictly
/// increasing. Queries must be nondecreasing (the window slides forward).
pub fn lagrange6_resample(x: &[f64], y: &[f64], xq: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 6);
    let n = x.len();
    let mut out = Vec::with_capacity(xq.len());
    let mut seg = 0usize; // left node of the bracketing interval
    for &q in xq {
        let qq = q.clamp(x[0], x[n - 1]);
        while seg + 2 < n && x[seg + 1] < qq {
            seg += 1;
        }
        while seg > 0 && x[seg] > qq {
            seg -= 1;
        }
        // center a 6-node window on the bracketing interval
        let lo = seg.saturating_sub(2).min(n - 6);
        let xs = &x[lo..lo + 6];
        let ys = &y[lo..lo + 6];
        let mut acc = 0.0;
        for j in 0..6 {
            let mut w = ys[j];
            for k in 0..6 {
                if k != j {
                    w *= (qq - xs[k]) / (xs[j] - xs[k]);
                }
            }
            acc += w;
        }
        out.push(acc);
    }
    out
}
