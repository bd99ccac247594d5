//! Self-similar variables: `y = (x-x0)/(T0-t)`, `s = -log(T0-t)`,
//! `w(y,s) = (T0-t)^{2/(p-1)} u(x,t)`.
//!
//! Blow-up of `u` at `t → T0` becomes long-time behaviour of `w` as
//! `s → ∞`. The transformed equation reads
//!
//! ```text
//! w_ss = (1/ρ) div(ρ∇w - ρ(y·∇w)y) - 2(p+1)/(p-1)² w + |w|^{p-1}w
//!        - (p+3)/(p-1) w_s - 2 y·∇w_s + e^{-2ps/(p-1)} f(e^{2s/(p-1)} w)
//! ```
//!
//! with `ρ(y) = (1-|y|²)^α`. The primary path reconstructs `(w, w_s)` from
//! physical snapshots (the boundary `|y| = 1` never enters); the interior
//! stepper [`step_w`] exists for cross-validation only.

use crate::error::{Error, Result};
use crate::interp::{gradient_centered, sample_offset, UniformAxis};
use crate::model::{derive_constants, ModelParams};
use crate::quad::sphere_area;
use crate::wave::{GridKind, Snapshot};

/// Scaling frame: center `x0` and scaling time `t0` with `0 < t0 ≤ T(x0)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimilarityFrame {
    pub x0: f64,
    pub t0: f64,
}

/// Similarity-variable snapshot on a ball grid strictly inside `|y| < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WState {
    pub s: f64,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub ws: Vec<f64>,
    pub frame: SimilarityFrame,
    pub kind: GridKind,
    pub dim: u32,
}

impl WState {
    pub fn validate(&self) -> Result<()> {
        if self.y.len() != self.w.len() || self.y.len() != self.ws.len() {
            return Err(Error::Transform("inconsistent array lengths".into()));
        }
        if self.y.iter().any(|&y| y.abs() >= 1.0) {
            return Err(Error::Transform("ball nodes must satisfy |y| < 1".into()));
        }
        if self.w.iter().chain(&self.ws).any(|v| !v.is_finite()) {
            return Err(Error::Transform("non-finite similarity values".into()));
        }
        Ok(())
    }

    /// Spacing of the (uniform) y grid.
    pub fn dy(&self) -> f64 {
        self.y[1] - self.y[0]
    }
}

/// Uniform ball nodes for a transform: `[-(1-eta), 1-eta]` on a line,
/// `[0, 1-eta]` radially.
pub fn ball_nodes(kind: GridKind, eta: f64, n: usize) -> Vec<f64> {
    let lim = 1.0 - eta;
    match kind {
        GridKind::Line => {
            let h = 2.0 * lim / (n - 1) as f64;
            (0..n).map(|i| -lim + h * i as f64).collect()
        }
        GridKind::Radial => {
            let h = lim / (n - 1) as f64;
            (0..n).map(|i| h * i as f64).collect()
        }
    }
}

/// Reconstruct `(w, ∂_s w)` on `y_nodes` from a physical snapshot.
///
/// `w` is cubic-interpolated from the grid; the similarity-time derivative
/// uses the chain rule `∂_s w = -(2/(p-1))w - y·∇_y w + e^{-(p+1)s/(p-1)} u_t`
/// with `∇_y w` from centered differences on the y grid.
pub fn to_similarity(
    snapshot: &Snapshot,
    frame: &SimilarityFrame,
    params: &ModelParams,
    y_nodes: &[f64],
) -> Result<WState> {
    let lam = frame.t0 - snapshot.state.t;
    if !(lam > 0.0) {
        return Err(Error::Transform(format!(
            "snapshot time {} is not before the scaling time {}",
            snapshot.state.t, frame.t0
        )));
    }
    if y_nodes.len() < 4 {
        return Err(Error::Transform("need at least 4 ball nodes".into()));
    }
    if snapshot.kind == GridKind::Radial && frame.x0 != 0.0 {
        return Err(Error::Transform(
            "radial runs only support frames centered at 0".into(),
        ));
    }
    let q = 2.0 / (params.p - 1.0);
    let lam_q = lam.powf(q);
    let lam_q1 = lam_q * lam;
    let axis = snapshot.axis;
    // translation-invariant offset: (x0 - axis origin) computed first
    let base = frame.x0 - axis.x0;
    let mut w = Vec::with_capacity(y_nodes.len());
    let mut ut_term = Vec::with_capacity(y_nodes.len());
    for &y in y_nodes {
        if y.abs() >= 1.0 {
            return Err(Error::Transform(format!(
                "ball node |y| = {} not inside the ball",
                y.abs()
            )));
        }
        let off = base + y * lam;
        if !axis.contains_offset(off) {
            return Err(Error::Transform(format!(
                "node y = {y} maps to x outside the snapshot domain (offset {off})"
            )));
        }
        w.push(lam_q * sample_offset(&axis, &snapshot.state.u, off));
        ut_term.push(lam_q1 * sample_offset(&axis, &snapshot.state.ut, off));
    }
    let dy = y_nodes[1] - y_nodes[0];
    let w_y = gradient_centered(dy, &w);
    let ws = (0..y_nodes.len())
        .map(|i| -q * w[i] - y_nodes[i] * w_y[i] + ut_term[i])
        .collect();
    let state = WState {
        s: -lam.ln(),
        y: y_nodes.to_vec(),
        w,
        ws,
        frame: *frame,
        kind: snapshot.kind,
        dim: snapshot.dim,
    };
    state.validate()?;
    Ok(state)
}

// ---------------------------------------------------------------------------
// transformed-equation right-hand side and residual
// ---------------------------------------------------------------------------

fn second_derivative(dy: f64, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let inv = 1.0 / (dy * dy);
    let mut d = vec![0.0; n];
    d[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) * inv;
    for i in 1..n - 1 {
        d[i] = (v[i - 1] - 2.0 * v[i] + v[i + 1]) * inv;
    }
    d[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) * inv;
    d
}

/// Right-hand side of the transformed equation at one slice.
fn eq1_rhs(
    y: &[f64],
    w: &[f64],
    ws: &[f64],
    s: f64,
    params: &ModelParams,
    kind: GridKind,
    dim: u32,
) -> Vec<f64> {
    let consts = derive_constants(params);
    let alpha = consts.alpha;
    let p = params.p;
    let c_lin = 2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0));
    let c_damp = (p + 3.0) / (p - 1.0);
    let dy = y[1] - y[0];
    let w_y = gradient_centered(dy, w);
    let w_yy = second_derivative(dy, w);
    let ws_y = gradient_centered(dy, ws);
    let scale_in = (2.0 * s / (p - 1.0)).exp();
    let scale_out = (-2.0 * p * s / (p - 1.0)).exp();
    (0..y.len())
        .map(|i| {
            let yi = y[i];
            let om = 1.0 - yi * yi;
            let elliptic = match kind {
                GridKind::Line => om * w_yy[i] - 2.0 * (1.0 + alpha) * yi * w_y[i],
                GridKind::Radial => {
                    if yi == 0.0 {
                        // symmetric origin: N·w_rr with w_r(0) = 0
                        dim as f64 * 2.0 * (w[1] - w[0]) / (dy * dy)
                    } else {
                        om * w_yy[i] + (dim as f64 - 1.0) * om * w_y[i] / yi
                            - 2.0 * (1.0 + alpha) * yi * w_y[i]
                    }
                }
            };
            let perturb = if params.perturbed {
                scale_out * params.perturbation(scale_in * w[i])
            } else {
                0.0
            };
            elliptic - c_lin * w[i] + params.power_term(w[i]) - c_damp * ws[i] - 2.0 * yi * ws_y[i]
                + perturb
        })
        .collect()
}

/// Residual of the transformed equation from three consecutive slices at
/// uniform `Δs`: `∂²_s w` by central difference minus the full right-hand
/// side at the middle slice, measured in the `ρ`-weighted L² norm.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub residual: Vec<f64>,
    pub norm: f64,
}

pub fn eq1_residual(
    prev: &WState,
    mid: &WState,
    next: &WState,
    params: &ModelParams,
) -> Result<ResidualReport> {
    let ds1 = mid.s - prev.s;
    let ds2 = next.s - mid.s;
    if !(ds1 > 0.0) || (ds2 - ds1).abs() > 1e-9 * ds1 {
        return Err(Error::Transform(format!(
            "slices must be uniformly spaced in s (got {ds1}, {ds2})"
        )));
    }
    if prev.y != mid.y || next.y != mid.y {
        return Err(Error::Transform("slices must share one y grid".into()));
    }
    let rhs = eq1_rhs(&mid.y, &mid.w, &mid.ws, mid.s, params, mid.kind, mid.dim);
    let inv_ds2 = 1.0 / (ds1 * ds1);
    let residual: Vec<f64> = (0..mid.y.len())
        .map(|i| (next.w[i] - 2.0 * mid.w[i] + prev.w[i]) * inv_ds2 - rhs[i])
        .collect();
    let alpha = derive_constants(params).alpha;
    let norm = weighted_l2(&mid.y, &residual, alpha, mid.kind, mid.dim);
    Ok(ResidualReport { residual, norm })
}

/// Trapezoid `ρ`-weighted L² norm on the stored ball grid (radial grids pick
/// up the surface factor).
fn weighted_l2(y: &[f64], v: &[f64], alpha: f64, kind: GridKind, dim: u32) -> f64 {
    let h = y[1] - y[0];
    let mut acc = 0.0;
    for i in 0..y.len() {
        let rho = (1.0 - y[i] * y[i]).powf(alpha);
        let geom = match kind {
            GridKind::Line => 1.0,
            GridKind::Radial => sphere_area(dim) * y[i].abs().powi(dim as i32 - 1),
        };
        let trapz = if i == 0 || i == y.len() - 1 { 0.5 } else { 1.0 };
        acc += trapz * v[i] * v[i] * rho * geom;
    }
    (acc * h).sqrt()
}

// ---------------------------------------------------------------------------
// rescaling family
// ---------------------------------------------------------------------------

/// Anything that can be sampled in similarity variables.
pub trait WSource {
    fn s_range(&self) -> (f64, f64);
    /// Sample `(w, ∂_s w)` on the given (uniform) y nodes.
    fn sample(&self, y: &[f64], s: f64) -> Result<(Vec<f64>, Vec<f64>)>;
}

/// A stored uniform-in-`s` series of slices, cubic-interpolated in `s` and
/// `y`. This is how converged runs are re-sampled for the rescaling checks.
#[derive(Debug, Clone)]
pub struct WSeries {
    pub s0: f64,
    pub ds: f64,
    pub y: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub ws: Vec<Vec<f64>>,
    pub frame: SimilarityFrame,
    pub kind: GridKind,
    pub dim: u32,
}

impl WSeries {
    pub fn from_states(states: &[WState]) -> Result<Self> {
        if states.len() < 4 {
            return Err(Error::Transform("series needs at least 4 slices".into()));
        }
        let ds = states[1].s - states[0].s;
        for pair in states.windows(2) {
            if ((pair[1].s - pair[0].s) - ds).abs() > 1e-9 * ds {
                return Err(Error::Transform("series must be uniform in s".into()));
            }
            if pair[1].y != pair[0].y {
                return Err(Error::Transform("series must share one y grid".into()));
            }
        }
        Ok(WSeries {
            s0: states[0].s,
            ds,
            y: states[0].y.clone(),
            w: states.iter().map(|st| st.w.clone()).collect(),
            ws: states.iter().map(|st| st.ws.clone()).collect(),
            frame: states[0].frame,
            kind: states[0].kind,
            dim: states[0].dim,
        })
    }

    fn y_axis(&self) -> UniformAxis {
        UniformAxis::new(self.y[0], self.y[1] - self.y[0], self.y.len())
    }
}

impl WSource for WSeries {
    fn s_range(&self) -> (f64, f64) {
        (self.s0, self.s0 + self.ds * (self.w.len() - 1) as f64)
    }

    fn sample(&self, y: &[f64], s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (lo, hi) = self.s_range();
        if s < lo - 1e-12 || s > hi + 1e-12 {
            return Err(Error::Transform(format!(
                "requested s = {s} outside the stored range [{lo}, {hi}]"
            )));
        }
        // cubic in s: 4-slice stencil around s
        let pos = (s - self.s0) / self.ds;
        let anchor = (pos.floor() as isize).clamp(1, self.w.len() as isize - 3) as usize;
        let t = pos - anchor as f64;
        let c = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ];
        let blend = |rows: &[Vec<f64>]| -> Vec<f64> {
            (0..self.y.len())
                .map(|k| {
                    c[0] * rows[anchor - 1][k]
                        + c[1] * rows[anchor][k]
                        + c[2] * rows[anchor + 1][k]
                        + c[3] * rows[anchor + 2][k]
                })
                .collect()
        };
        let w_slice = blend(&self.w);
        let ws_slice = blend(&self.ws);
        let axis = self.y_axis();
        let span = axis.dx * (axis.n - 1) as f64;
        let mut w_out = Vec::with_capacity(y.len());
        let mut ws_out = Vec::with_capacity(y.len());
        for &yi in y {
            let off = yi - self.y[0];
            if off < -1e-12 || off > span + 1e-12 {
                return Err(Error::Transform(format!(
                    "requested node y = {yi} outside the stored grid"
                )));
            }
            let off = off.clamp(0.0, span);
            w_out.push(sample_offset(&axis, &w_slice, off));
            ws_out.push(sample_offset(&axis, &ws_slice, off));
        }
        Ok((w_out, ws_out))
    }
}

/// Closure-backed source for synthetic fields.
pub struct FnSource<F: Fn(f64, f64) -> (f64, f64)> {
    pub s_lo: f64,
    pub s_hi: f64,
    pub f: F,
}

impl<F: Fn(f64, f64) -> (f64, f64)> WSource for FnSource<F> {
    fn s_range(&self) -> (f64, f64) {
        (self.s_lo, self.s_hi)
    }
    fn sample(&self, y: &[f64], s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut w = Vec::with_capacity(y.len());
        let mut ws = Vec::with_capacity(y.len());
        for &yi in y {
            let (a, b) = (self.f)(yi, s);
            w.push(a);
            ws.push(b);
        }
        Ok((w, ws))
    }
}

/// How to obtain `∂_s` of the rescaled family.
#[derive(Debug, Clone, Copy)]
pub enum RescaleDeriv {
    /// Exact chain rule through the source's `(w, ∂_s w)` and `∇_y w`.
    ChainRule,
    /// Centered finite difference of the rescaled values in `s`.
    FiniteDifference { h: f64 },
}

/// The rescaling `w^δ(y,s) = (1+δe^s)^{-2/(p-1)} w(y/(1+δe^s), -log(δ+e^{-s}))`,
/// which maps solutions of the transformed equation to solutions; `δ = 0` is
/// the identity.
pub fn delta_rescale(
    source: &dyn WSource,
    params: &ModelParams,
    frame: SimilarityFrame,
    kind: GridKind,
    dim: u32,
    delta: f64,
    s: f64,
    y_nodes: &[f64],
    deriv: RescaleDeriv,
) -> Result<WState> {
    if delta < 0.0 {
        return Err(Error::Transform(
            "rescaling parameter must be nonnegative".into(),
        ));
    }
    let q = 2.0 / (params.p - 1.0);
    let rescale_values = |s_eval: f64| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let m = 1.0 + delta * s_eval.exp();
        let s_src = -(delta + (-s_eval).exp()).ln();
        let y_src: Vec<f64> = y_nodes.iter().map(|&y| y / m).collect();
        let (w_src, ws_src) = source.sample(&y_src, s_src)?;
        Ok((w_src, ws_src, m))
    };

    let (w_src, ws_src, m) = rescale_values(s)?;
    let amp = m.powf(-q);
    let w_out: Vec<f64> = w_src.iter().map(|&v| amp * v).collect();
    let ws_out: Vec<f64> = match deriv {
        RescaleDeriv::ChainRule => {
            let h_src = (y_nodes[1] - y_nodes[0]) / m;
            let w_grad = gradient_centered(h_src, &w_src);
            (0..y_nodes.len())
                .map(|i| {
                    let y_src = y_nodes[i] / m;
                    amp / m * (ws_src[i] - (m - 1.0) * (q * w_src[i] + y_src * w_grad[i]))
                })
                .collect()
        }
        RescaleDeriv::FiniteDifference { h } => {
            let (w_plus, _, m_plus) = rescale_values(s + h)?;
            let (w_minus, _, m_minus) = rescale_values(s - h)?;
            let (ap, am) = (m_plus.powf(-q), m_minus.powf(-q));
            (0..y_nodes.len())
                .map(|i| (ap * w_plus[i] - am * w_minus[i]) / (2.0 * h))
                .collect()
        }
    };
    let state = WState {
        s,
        y: y_nodes.to_vec(),
        w: w_out,
        ws: ws_out,
        frame,
        kind,
        dim,
    };
    state.validate()?;
    Ok(state)
}

// ---------------------------------------------------------------------------
// interior stepper (validation path)
// ---------------------------------------------------------------------------

/// One explicit step of the transformed equation on the interior grid
/// `|y| ≤ 1-eta` (midpoint RK2). The end nodes are refreshed by quadratic
/// extrapolation: outflow along the characteristics, no incoming data.
///
/// This is a cross-validation path only; the transform-from-physical route
/// is the primary one.
pub fn step_w(state: &WState, ds: f64, params: &ModelParams, eta: f64) -> Result<WState> {
    state.validate()?;
    let n = state.y.len();
    let h = state.dy();
    let y_max = state.y.iter().fold(0.0f64, |m, &y| m.max(y.abs()));
    if y_max > 1.0 - eta + 1e-12 {
        return Err(Error::Transform(format!(
            "grid reaches |y| = {y_max}, beyond the interior cutoff 1-eta = {}",
            1.0 - eta
        )));
    }
    // outgoing characteristic speed is |y| + 1
    if !(ds > 0.0 && ds <= 0.5 * h / (1.0 + y_max)) {
        return Err(Error::Transform(format!(
            "ds must lie in (0, {}] for this grid, got {ds}",
            0.5 * h / (1.0 + y_max)
        )));
    }
    let norm0 = weighted_l2(&state.y, &state.w, 0.0, state.kind, state.dim)
        + weighted_l2(&state.y, &state.ws, 0.0, state.kind, state.dim);

    let extrapolate_ends = |v: &mut Vec<f64>, radial: bool| {
        let n = v.len();
        if !radial {
            v[0] = 3.0 * v[1] - 3.0 * v[2] + v[3];
        }
        v[n - 1] = 3.0 * v[n - 2] - 3.0 * v[n - 3] + v[n - 4];
    };
    let radial = state.kind == GridKind::Radial;

    // k1 at s
    let k1 = eq1_rhs(
        &state.y, &state.w, &state.ws, state.s, params, state.kind, state.dim,
    );
    let mut w_mid: Vec<f64> = (0..n)
        .map(|i| state.w[i] + 0.5 * ds * state.ws[i])
        .collect();
    let mut ws_mid: Vec<f64> = (0..n).map(|i| state.ws[i] + 0.5 * ds * k1[i]).collect();
    extrapolate_ends(&mut w_mid, radial);
    extrapolate_ends(&mut ws_mid, radial);

    // k2 at s + ds/2
    let k2 = eq1_rhs(
        &state.y,
        &w_mid,
        &ws_mid,
        state.s + 0.5 * ds,
        params,
        state.kind,
        state.dim,
    );
    let mut w_new: Vec<f64> = (0..n).map(|i| state.w[i] + ds * ws_mid[i]).collect();
    let mut ws_new: Vec<f64> = (0..n).map(|i| state.ws[i] + ds * k2[i]).collect();
    extrapolate_ends(&mut w_new, radial);
    extrapolate_ends(&mut ws_new, radial);

    let norm1 = weighted_l2(&state.y, &w_new, 0.0, state.kind, state.dim)
        + weighted_l2(&state.y, &ws_new, 0.0, state.kind, state.dim);
    if !norm1.is_finite() || norm1 > 10.0 * norm0.max(1e-12) {
        return Err(Error::Solver(format!(
            "interior step unstable (norm {norm0:.3e} -> {norm1:.3e}); reduce ds"
        )));
    }
    Ok(WState {
        s: state.s + ds,
        y: state.y.clone(),
        w: w_new,
        ws: ws_new,
        frame: state.frame,
        kind: state.kind,
        dim: state.dim,
    })
}
