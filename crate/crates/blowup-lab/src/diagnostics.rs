//! Verdicts over report series: one-sided monotonicity of `H` against the
//! integrated dissipation, automatic selection of the damping constant `θ`,
//! the negativity blow-up flag, windowed bound envelopes, and the
//! self-similar-normalized norm track in physical variables.

use serde::Serialize;

use crate::energy::EnergyReport;
use crate::error::{Error, Result};
use crate::interp::{gradient_centered, sample_offset};
use crate::model::ModelParams;
use crate::quad::sphere_area;
use crate::wave::{GridKind, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
#[serde(untagged)]
pub enum ThetaChoice {
    Auto(AutoTag),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// Monotonicity checks apply from this similarity time on (≥ 1).
    pub s1: f64,
    pub theta: ThetaChoice,
    /// Relative slack for the discrete decrease inequality; the effective
    /// tolerance also absorbs the trapezoid error `~10·Δs²` per pair.
    pub tolerance: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            s1: 1.0,
            theta: ThetaChoice::Auto(AutoTag::Auto),
            tolerance: 1e-3,
        }
    }
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s1 >= 1.0) {
            return Err(Error::Config(format!(
                "s1 must be at least 1, got {}",
                self.s1
            )));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config("tolerance must be nonnegative".into()));
        }
        if let ThetaChoice::Fixed(t) = self.theta {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("theta must be nonnegative, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Violation {
    pub s_lo: f64,
    pub s_hi: f64,
    /// Amount by which `H(s2) - H(s1) + α∫D` exceeded the tolerance.
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub violations: Vec<Violation>,
    /// Largest excess over the tolerance (0 when the check passes).
    pub worst_excess: f64,
    pub pairs: usize,
}

impl MonotonicityReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Per-pair slack: the configured relative tolerance on the local `H` scale
/// plus `10·Δs²` of the pair's dissipation integral (covering the trapezoid
/// error of `∫D ds`, which is what actually enters the inequality).
fn pair_tolerance(cfg: &DiagnosticsConfig, ds: f64, h1: f64, h2: f64, diss: f64) -> f64 {
    cfg.tolerance * h1.abs().max(h2.abs()).max(1e-12) + 10.0 * ds * ds * diss.abs()
}

fn check_series(reports: &[EnergyReport], cfg: &DiagnosticsConfig) -> Result<()> {
    for pair in reports.windows(2) {
        if pair[1].s <= pair[0].s {
            return Err(Error::InvalidParams("reports must be sorted in s".into()));
        }
        if pair[1].theta != pair[0].theta {
            return Err(Error::InvalidParams(
                "reports mix different theta values".into(),
            ));
        }
    }
    if let Some(first) = reports.first() {
        if first.s < cfg.s1 - 1e-12 {
            return Err(Error::InvalidParams(format!(
                "series starts at s = {} before the monotonicity onset {}",
                first.s, cfg.s1
            )));
        }
    }
    Ok(())
}

/// Check `H(s2) - H(s1) + α·∫_{s1}^{s2} D ds ≤ tol` for every adjacent pair
/// (trapezoid for the dissipation integral).
pub fn monotonicity_check(
    reports: &[EnergyReport],
    alpha: f64,
    cfg: &DiagnosticsConfig,
) -> Result<MonotonicityReport> {
    check_series(reports, cfg)?;
    let mut violations = Vec::new();
    let mut worst: f64 = 0.0;
    for pair in reports.windows(2) {
        let (r1, r2) = (&pair[0], &pair[1]);
        let ds = r2.s - r1.s;
        let diss = alpha * 0.5 * (r1.d + r2.d) * ds;
        let lhs = r2.h - r1.h + diss;
        let tol = pair_tolerance(cfg, ds, r1.h, r2.h, diss);
        if lhs > tol {
            violations.push(Violation {
                s_lo: r1.s,
                s_hi: r2.s,
                excess: lhs - tol,
            });
            worst = worst.max(lhs - tol);
        }
    }
    Ok(MonotonicityReport {
        violations,
        worst_excess: worst,
        pairs: reports.len().saturating_sub(1),
    })
}

/// Smallest `θ ≥ 0` (bisection to 1e-3, capped at 1e6) for which the
/// monotonicity check passes on a series computed with `θ = 0`. The `θ`
/// term only ever decreases in `s`, so raising `θ` never hurts and the
/// predicate is monotone.
pub fn choose_theta(
    reports_theta0: &[EnergyReport],
    params: &ModelParams,
    alpha: f64,
    cfg: &DiagnosticsConfig,
) -> Result<f64> {
    check_series(reports_theta0, cfg)?;
    if reports_theta0.iter().any(|r| r.theta != 0.0) {
        return Err(Error::InvalidParams(
            "theta search needs a series computed with theta = 0".into(),
        ));
    }
    if reports_theta0.len() < 2 {
        return Ok(0.0);
    }
    let passes = |theta: f64| -> bool {
        for pair in reports_theta0.windows(2) {
            let (r1, r2) = (&pair[0], &pair[1]);
            let h1 = r1.h_with_theta(params, theta);
            let h2 = r2.h_with_theta(params, theta);
            let ds = r2.s - r1.s;
            let diss = alpha * 0.5 * (r1.d + r2.d) * ds;
            let lhs = h2 - h1 + diss;
            if lhs > pair_tolerance(cfg, ds, h1, h2, diss) {
                return false;
            }
        }
        true
    };
    if passes(0.0) {
        return Ok(0.0);
    }
    const CAP: f64 = 1e6;
    if !passes(CAP) {
        return Err(Error::Fit(
            "no damping constant up to 1e6 restores monotonicity; the discretization is too coarse"
                .into(),
        ));
    }
    let (mut lo, mut hi) = (0.0f64, CAP);
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The negativity flag: a state with `H < 0` (at an admissible `s`) cannot
/// be part of a global solution, so the physical run behind it must
/// saturate in finite time.
pub fn blowup_flag(report: &EnergyReport) -> bool {
    report.h < 0.0
}

/// Windowed envelopes backing the boundedness statements.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundsReport {
    /// `min_s (‖w‖_{H¹} + ‖∂_s w‖_{L²})` over the window.
    pub eps0_emp: f64,
    /// `max_s` of the same quantity.
    pub k_emp: f64,
    pub e_min: f64,
    pub e_max: f64,
    /// Trapezoid `∫ D ds` over the window.
    pub cumulative_dissipation: f64,
    pub window: (f64, f64),
}

pub fn window_bounds(reports: &[EnergyReport]) -> Result<BoundsReport> {
    if reports.len() < 2 {
        return Err(Error::InvalidParams(
            "bounds need at least two reports".into(),
        ));
    }
    let mut eps0 = f64::INFINITY;
    let mut k_emp = f64::NEG_INFINITY;
    let mut e_min = f64::INFINITY;
    let mut e_max = f64::NEG_INFINITY;
    let mut cumulative = 0.0;
    for (idx, r) in reports.iter().enumerate() {
        let norm = r.h1_norm + r.l2_ws;
        eps0 = eps0.min(norm);
        k_emp = k_emp.max(norm);
        e_min = e_min.min(r.e);
        e_max = e_max.max(r.e);
        if idx + 1 < reports.len() {
            let ds = reports[idx + 1].s - r.s;
            cumulative += 0.5 * (r.d + reports[idx + 1].d) * ds;
        }
    }
    Ok(BoundsReport {
        eps0_emp: eps0,
        k_emp,
        e_min,
        e_max,
        cumulative_dissipation: cumulative,
        window: (reports[0].s, reports.last().unwrap().s),
    })
}

// ---------------------------------------------------------------------------
// physical-side normalized norm track
// ---------------------------------------------------------------------------

/// One sample of the self-similar-normalized norms over the shrinking ball
/// `B(x0, T-t)`:
/// `Q(t) = (T-t)^{2/(p-1)-N/2} ‖u‖_{L²(B)} +
///         (T-t)^{2/(p-1)+1-N/2} (‖u_t‖_{L²(B)} + ‖∇u‖_{L²(B)})`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RatePoint {
    pub t: f64,
    pub q: f64,
    pub radius: f64,
}

/// Clipped trapezoid of `v²·geom` over a ball around the frame center, with
/// cubic-interpolated values at the exact endpoints. All positions are
/// handled as offsets `ξ = x - x0` (with `base = axis.x0 - x0` computed
/// once), so translating the grid and the center together reproduces the
/// result bit for bit.
fn masked_l2(snapshot: &Snapshot, values: &[f64], base: f64, lo: f64, hi: f64) -> f64 {
    let axis = snapshot.axis;
    let geom = |xi: f64| -> f64 {
        match snapshot.kind {
            GridKind::Line => 1.0,
            // radial frames sit at the origin, so the offset is the radius
            GridKind::Radial => sphere_area(snapshot.dim) * xi.abs().powi(snapshot.dim as i32 - 1),
        }
    };
    let v2 = |xi: f64| -> f64 {
        let v = sample_offset(&axis, values, xi - base);
        v * v * geom(xi)
    };
    let j0 = ((lo - base) / axis.dx).ceil().max(0.0) as usize;
    let j1 = (((hi - base) / axis.dx).floor() as usize).min(axis.n - 1);
    let node = |j: usize| base + axis.dx * j as f64;
    if j1 <= j0 {
        // fewer than two nodes inside: single trapezoid on interpolants
        return 0.5 * (v2(lo) + v2(hi)) * (hi - lo);
    }
    let mut acc = 0.0;
    for j in j0..j1 {
        let (xa, xb) = (node(j), node(j + 1));
        acc += 0.5 * (v2(xa) + v2(xb)) * (xb - xa);
    }
    acc += 0.5 * (v2(lo) + v2(node(j0))) * (node(j0) - lo);
    acc += 0.5 * (v2(node(j1)) + v2(hi)) * (hi - node(j1));
    acc
}

/// Evaluate the normalized norm track over the window
/// `t ∈ [max(T-e^{-ŝ0}, 3T/4), T)` with `ŝ0 = max(s1, -log(T/4))`, stopping
/// once the ball covers fewer than three grid cells.
pub fn rate_track(
    snapshots: &[Snapshot],
    t_blow: f64,
    x0: f64,
    params: &ModelParams,
    s1: f64,
) -> Result<Vec<RatePoint>> {
    if !(t_blow.is_finite() && t_blow > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need a finite blow-up time, got {t_blow}"
        )));
    }
    let s_hat = s1.max(-(t_blow / 4.0).ln());
    let t_start = (t_blow - (-s_hat).exp()).max(0.75 * t_blow);
    let q_exp = 2.0 / (params.p - 1.0);
    let half_n = params.n as f64 / 2.0;
    let mut track = Vec::new();
    for snap in snapshots {
        let t = snap.state.t;
        if t < t_start || t >= t_blow {
            continue;
        }
        let radius = t_blow - t;
        if radius < 3.0 * snap.axis.dx {
            break;
        }
        // offsets from the frame center
        let base = snap.axis.x0 - x0;
        let (lo, hi) = match snap.kind {
            GridKind::Line => (-radius, radius),
            GridKind::Radial => (0.0, radius),
        };
        let span = snap.axis.dx * (snap.axis.n - 1) as f64;
        if lo < base - 1e-12 || hi > base + span + 1e-12 {
            continue; // window does not cover the ball
        }
        let grad = gradient_centered(snap.axis.dx, &snap.state.u);
        let l2_u = masked_l2(snap, &snap.state.u, base, lo, hi).sqrt();
        let l2_ut = masked_l2(snap, &snap.state.ut, base, lo, hi).sqrt();
        let l2_ux = masked_l2(snap, &grad, base, lo, hi).sqrt();
        let q = radius.powf(q_exp - half_n) * l2_u
            + radius.powf(q_exp + 1.0 - half_n) * (l2_ut + l2_ux);
        track.push(RatePoint { t, q, radius });
    }
    if track.is_empty() {
        return Err(Error::InvalidParams(
            "no snapshots fall inside the normalized-track window".into(),
        ));
    }
    Ok(track)
}

/// CLI verdict record.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictJson {
    pub check: String,
    pub window: (f64, f64),
    pub pass: bool,
    pub worst_excess: f64,
    pub empirical_constants: std::collections::BTreeMap<String, f64>,
}
