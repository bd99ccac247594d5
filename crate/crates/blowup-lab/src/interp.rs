//! Cubic (4-point Lagrange) interpolation on uniform grids.
//!
//! This is the one sampling primitive shared by the similarity transform
//! (physical snapshot → ball grid) and the energy module (ball grid →
//! quadrature nodes). Matching the solver's second-order accuracy with a
//! cubic leaves interpolation below the discretization error budget.

/// A uniform axis `x_i = x0 + i·dx`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformAxis {
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
}

impl UniformAxis {
    pub fn new(x0: f64, dx: f64, n: usize) -> Self {
        assert!(n >= 4, "cubic interpolation needs at least 4 nodes");
        assert!(dx > 0.0);
        UniformAxis { x0, dx, n }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + self.dx * i as f64
    }

    pub fn x_last(&self) -> f64 {
        self.x(self.n - 1)
    }

    /// Offset-based position lookup. Callers that need translation-invariant
    /// arithmetic pass `x - x0` they computed themselves.
    fn cell_of_offset(&self, off: f64) -> (usize, f64) {
        let pos = off / self.dx;
        // stencil anchor so that nodes anchor-1 .. anchor+2 are in range
        let anchor = (pos.floor() as isize).clamp(1, self.n as isize - 3) as usize;
        (anchor, pos - anchor as f64)
    }

    pub fn contains_offset(&self, off: f64) -> bool {
        off >= 0.0 && off <= self.dx * (self.n - 1) as f64
    }
}

#[inline]
fn lagrange_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

#[inline]
fn lagrange_deriv_weights(t: f64) -> [f64; 4] {
    [
        -(3.0 * t * t - 6.0 * t + 2.0) / 6.0,
        (3.0 * t * t - 4.0 * t - 1.0) / 2.0,
        -(3.0 * t * t - 2.0 * t - 2.0) / 2.0,
        (3.0 * t * t - 1.0) / 6.0,
    ]
}

/// Cubic sample at offset `off = x - axis.x0`. The offset must lie within the
/// axis span; near the ends the stencil shifts one-sided.
pub fn sample_offset(axis: &UniformAxis, values: &[f64], off: f64) -> f64 {
    debug_assert_eq!(values.len(), axis.n);
    let (anchor, t) = axis.cell_of_offset(off);
    let w = lagrange_weights(t);
    w[0] * values[anchor - 1]
        + w[1] * values[anchor]
        + w[2] * values[anchor + 1]
        + w[3] * values[anchor + 2]
}

/// Derivative of the cubic interpolant at offset `off`.
pub fn sample_deriv_offset(axis: &UniformAxis, values: &[f64], off: f64) -> f64 {
    debug_assert_eq!(values.len(), axis.n);
    let (anchor, t) = axis.cell_of_offset(off);
    let w = lagrange_deriv_weights(t);
    (w[0] * values[anchor - 1]
        + w[1] * values[anchor]
        + w[2] * values[anchor + 1]
        + w[3] * values[anchor + 2])
        / axis.dx
}

pub fn sample(axis: &UniformAxis, values: &[f64], x: f64) -> f64 {
    sample_offset(axis, values, x - axis.x0)
}

pub fn sample_deriv(axis: &UniformAxis, values: &[f64], x: f64) -> f64 {
    sample_deriv_offset(axis, values, x - axis.x0)
}

/// Sample allowing linear extension beyond the axis ends, using the end value
/// and the one-sided interpolant slope there. Used for the thin boundary
/// layer `1-η < |y| < 1` where quadrature nodes fall outside stored data and
/// the degenerate weight suppresses the extension error.
pub fn sample_extrap(axis: &UniformAxis, values: &[f64], x: f64) -> f64 {
    let off = x - axis.x0;
    let span = axis.dx * (axis.n - 1) as f64;
    if off < 0.0 {
        values[0] + off * sample_deriv_offset(axis, values, 0.0)
    } else if off > span {
        values[axis.n - 1] + (off - span) * sample_deriv_offset(axis, values, span)
    } else {
        sample_offset(axis, values, off)
    }
}

/// Derivative companion to [`sample_extrap`] (constant beyond the ends).
pub fn sample_deriv_extrap(axis: &UniformAxis, values: &[f64], x: f64) -> f64 {
    let off = x - axis.x0;
    let span = axis.dx * (axis.n - 1) as f64;
    let clamped = off.clamp(0.0, span);
    sample_deriv_offset(axis, values, clamped)
}

/// Centered second-order differences on a uniform grid; one-sided
/// second-order stencils at the two ends.
pub fn gradient_centered(dx: f64, values: &[f64]) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 3);
    let mut g = vec![0.0; n];
    g[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dx);
    for i in 1..n - 1 {
        g[i] = (values[i + 1] - values[i - 1]) / (2.0 * dx);
    }
    g[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dx);
    g
}
