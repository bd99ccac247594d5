//! The weighted functionals on the unit ball: `E0`, the perturbation
//! potential `I`, the cross term `J`, `E = E0 + I + J`, and the damped
//! Lyapunov candidate
//! `H = exp((p+3)/((a-1) s^{b-1}))·E + θ e^{-(p+1)s/(p-1)}`,
//! together with the boundary-degenerate dissipation
//! `D = ∫ (∂_s w)² ρ/(1-|y|²) dy`, the source-work terms feeding the energy
//! balance, norms, and the Hardy ratio.
//!
//! Each integral carries its weight exponent inside a dedicated Gauss–Jacobi
//! rule (`β = α` for most, `α-1` for the dissipation, `α+1` for the weighted
//! gradient), so the degeneracy at `|y| = 1` lives in the rule, not in the
//! integrand. Fields are stored on an interior grid `|y| ≤ 1-η`; the thin
//! boundary layer is covered by linear extension of the interpolant, an
//! error the degenerate weight suppresses.

use crate::error::{Error, Result};
use crate::interp::{sample_deriv_extrap, sample_extrap, UniformAxis};
use crate::model::{derive_constants, DerivedConstants, FTable, ModelParams};
use crate::quad::QuadRule;
use crate::similarity::WState;
use crate::wave::GridKind;

/// One row of the report series: every functional at one similarity time.
/// `e = e0 + i + j` and the `h` formula hold exactly by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub s: f64,
    pub e0: f64,
    pub i: f64,
    pub j: f64,
    pub e: f64,
    pub h: f64,
    /// Dissipation `∫ (∂_s w)² ρ/(1-|y|²) dy ≥ 0`.
    pub d: f64,
    /// Source-work term `(2(p+1)/(p-1)) e^{-2(p+1)s/(p-1)} ∫ F(e^{2s/(p-1)}w) ρ`.
    pub sigma01: f64,
    /// Source-work term `-(2/(p-1)) e^{-2ps/(p-1)} ∫ f(e^{2s/(p-1)}w)·w ρ`.
    pub sigma02: f64,
    /// `∫ |w|^{p+1} ρ dy ≥ 0`.
    pub lp1: f64,
    /// Unweighted `‖w‖_{H¹(B)}`.
    pub h1_norm: f64,
    /// Unweighted `‖∂_s w‖_{L²(B)}`.
    pub l2_ws: f64,
    pub theta: f64,
}

impl EnergyReport {
    /// The damping factor multiplying `E` inside `H`.
    pub fn h_envelope(params: &ModelParams, consts: &DerivedConstants, s: f64) -> f64 {
        ((params.p + 3.0) / ((params.a - 1.0) * s.powf(consts.b - 1.0))).exp()
    }

    /// The `θ`-linear tail `e^{-(p+1)s/(p-1)}`.
    pub fn theta_tail(params: &ModelParams, s: f64) -> f64 {
        (-(params.p + 1.0) * s / (params.p - 1.0)).exp()
    }

    /// Re-evaluate `h` for a different `θ` (the formula is `θ`-linear).
    pub fn h_with_theta(&self, params: &ModelParams, theta: f64) -> f64 {
        self.h + (theta - self.theta) * Self::theta_tail(params, self.s)
    }
}

/// Precomputed quadrature context for one model and grid geometry.
pub struct EnergyCtx {
    pub params: ModelParams,
    pub consts: DerivedConstants,
    pub kind: GridKind,
    pub dim: u32,
    rule_alpha: QuadRule,
    rule_alpha_m1: QuadRule,
    rule_alpha_p1: QuadRule,
    rule_flat: QuadRule,
    ftable: FTable,
}

struct Resampled {
    w: Vec<f64>,
    w_grad: Vec<f64>,
    ws: Vec<f64>,
}

impl EnergyCtx {
    pub fn new(params: &ModelParams, kind: GridKind, n_quad: usize) -> Result<Self> {
        params.validate()?;
        let consts = derive_constants(params);
        let dim = params.n;
        let mk = |beta: f64| -> Result<QuadRule> {
            match kind {
                GridKind::Line => QuadRule::line(n_quad, beta),
                GridKind::Radial => QuadRule::radial(n_quad, beta, dim),
            }
        };
        Ok(EnergyCtx {
            params: *params,
            consts,
            kind,
            dim,
            rule_alpha: mk(consts.alpha)?,
            rule_alpha_m1: mk(consts.alpha - 1.0)?,
            rule_alpha_p1: mk(consts.alpha + 1.0)?,
            rule_flat: mk(0.0)?,
            ftable: FTable::new(params)?,
        })
    }

    fn check_state(&self, state: &WState) -> Result<()> {
        state.validate()?;
        if state.kind != self.kind {
            return Err(Error::Transform(
                "state geometry does not match the context".into(),
            ));
        }
        Ok(())
    }

    fn resample(&self, state: &WState, rule: &QuadRule) -> Resampled {
        let axis = UniformAxis::new(state.y[0], state.dy(), state.y.len());
        let mut w = Vec::with_capacity(rule.len());
        let mut w_grad = Vec::with_capacity(rule.len());
        let mut ws = Vec::with_capacity(rule.len());
        for &node in &rule.nodes {
            w.push(sample_extrap(&axis, &state.w, node));
            w_grad.push(sample_deriv_extrap(&axis, &state.w, node));
            ws.push(sample_extrap(&axis, &state.ws, node));
        }
        Resampled { w, w_grad, ws }
    }

    /// Unperturbed energy
    /// `E0 = ∫ (½ w_s² + ½|∇w|² - ½(y·∇w)² + (p+1)/(p-1)² w² - |w|^{p+1}/(p+1)) ρ`.
    pub fn e0(&self, state: &WState) -> Result<f64> {
        self.check_state(state)?;
        let (quad, potential) = self.e0_parts(state);
        Ok(quad - potential)
    }

    /// The quadratic part and the potential part of `E0`, separately
    /// (their scalings under `w ↦ λw` differ).
    pub fn e0_parts(&self, state: &WState) -> (f64, f64) {
        let r = self.resample(state, &self.rule_alpha);
        let p = self.params.p;
        let c_w2 = (p + 1.0) / ((p - 1.0) * (p - 1.0));
        let mut quad = 0.0;
        let mut pot = 0.0;
        for (k, (&node, &weight)) in self
            .rule_alpha
            .nodes
            .iter()
            .zip(&self.rule_alpha.weights)
            .enumerate()
        {
            // |∇w|² - (y·∇w)² = w_y² (1-y²) for radial profiles
            let grad2 = r.w_grad[k] * r.w_grad[k] * (1.0 - node * node);
            quad += weight * (0.5 * r.ws[k] * r.ws[k] + 0.5 * grad2 + c_w2 * r.w[k] * r.w[k]);
            pot += weight * abs_pow_p1(r.w[k], p) / (p + 1.0);
        }
        (quad, pot)
    }

    /// Perturbation potential
    /// `I = -e^{-2(p+1)s/(p-1)} ∫ F(e^{2s/(p-1)} w) ρ dy` (zero with the
    /// perturbation off).
    pub fn i_term(&self, state: &WState) -> Result<f64> {
        self.check_state(state)?;
        if !self.params.perturbed {
            return Ok(0.0);
        }
        let p = self.params.p;
        let r = self.resample(state, &self.rule_alpha);
        let scale_in = (2.0 * state.s / (p - 1.0)).exp();
        let scale_out = (-2.0 * (p + 1.0) * state.s / (p - 1.0)).exp();
        let mut acc = 0.0;
        for (k, &weight) in self.rule_alpha.weights.iter().enumerate() {
            acc += weight * self.ftable.eval(scale_in * r.w[k]);
        }
        Ok(-scale_out * acc)
    }

    /// Cross term `J = -s^{-b} ∫ w ∂_s w ρ dy`; requires `s > 0`.
    pub fn j_term(&self, state: &WState) -> Result<f64> {
        self.check_state(state)?;
        if !(state.s > 0.0) {
            return Err(Error::Transform(format!(
                "cross term needs s > 0 (frames are normalized so s0 >= 1); got s = {}",
                state.s
            )));
        }
        let r = self.resample(state, &self.rule_alpha);
        let mut acc = 0.0;
        for (k, &weight) in self.rule_alpha.weights.iter().enumerate() {
            acc += weight * r.w[k] * r.ws[k];
        }
        Ok(-acc / state.s.powf(self.consts.b))
    }

    /// The full report at one slice. Requires `s ≥ 1` so the damping factor
    /// in `h` stays within its design range.
    pub fn report(&self, state: &WState, theta: f64) -> Result<EnergyReport> {
        self.check_state(state)?;
        if !(state.s >= 1.0) {
            return Err(Error::Transform(format!(
                "reports need s >= 1, got {} (choose a smaller scaling time)",
                state.s
            )));
        }
        let p = self.params.p;
        let (quad, potential) = self.e0_parts(state);
        let e0 = quad - potential;
        let i = self.i_term(state)?;
        let j = self.j_term(state)?;
        let e = e0 + i + j;
        let h = EnergyReport::h_envelope(&self.params, &self.consts, state.s) * e
            + theta * EnergyReport::theta_tail(&self.params, state.s);

        // dissipation: integrand ws², weight exponent α-1
        let rm1 = self.resample(state, &self.rule_alpha_m1);
        let mut d = 0.0;
        for (k, &weight) in self.rule_alpha_m1.weights.iter().enumerate() {
            d += weight * rm1.ws[k] * rm1.ws[k];
        }

        // source-work terms and the |w|^{p+1} mass on the α rule
        let ra = self.resample(state, &self.rule_alpha);
        let scale_in = (2.0 * state.s / (p - 1.0)).exp();
        let mut lp1 = 0.0;
        let mut sum_f_big = 0.0;
        let mut sum_f_w = 0.0;
        for (k, &weight) in self.rule_alpha.weights.iter().enumerate() {
            lp1 += weight * abs_pow_p1(ra.w[k], p);
            if self.params.perturbed {
                sum_f_big += weight * self.ftable.eval(scale_in * ra.w[k]);
                sum_f_w += weight * self.params.perturbation(scale_in * ra.w[k]) * ra.w[k];
            }
        }
        let sigma01 = 2.0 * (p + 1.0) / (p - 1.0)
            * (-2.0 * (p + 1.0) * state.s / (p - 1.0)).exp()
            * sum_f_big;
        let sigma02 = -2.0 / (p - 1.0) * (-2.0 * p * state.s / (p - 1.0)).exp() * sum_f_w;

        // unweighted ball norms
        let rf = self.resample(state, &self.rule_flat);
        let mut h1 = 0.0;
        let mut l2ws = 0.0;
        for (k, &weight) in self.rule_flat.weights.iter().enumerate() {
            h1 += weight * (rf.w[k] * rf.w[k] + rf.w_grad[k] * rf.w_grad[k]);
            l2ws += weight * rf.ws[k] * rf.ws[k];
        }

        Ok(EnergyReport {
            s: state.s,
            e0,
            i,
            j,
            e,
            h,
            d,
            sigma01,
            sigma02,
            lp1,
            h1_norm: h1.sqrt(),
            l2_ws: l2ws.sqrt(),
            theta,
        })
    }

    /// Empirical Hardy ratio
    /// `∫ w²|y|² ρ/(1-|y|²) ÷ (∫ |∇w|² ρ (1-|y|²) + ∫ w² ρ)`, zero for the
    /// zero field.
    pub fn hardy_ratio(&self, state: &WState) -> Result<f64> {
        self.check_state(state)?;
        let rm1 = self.resample(state, &self.rule_alpha_m1);
        let mut numer = 0.0;
        for (k, (&node, &weight)) in self
            .rule_alpha_m1
            .nodes
            .iter()
            .zip(&self.rule_alpha_m1.weights)
            .enumerate()
        {
            numer += weight * rm1.w[k] * rm1.w[k] * node * node;
        }
        let rp1 = self.resample(state, &self.rule_alpha_p1);
        let mut denom = 0.0;
        for (k, &weight) in self.rule_alpha_p1.weights.iter().enumerate() {
            denom += weight * rp1.w_grad[k] * rp1.w_grad[k];
        }
        let ra = self.resample(state, &self.rule_alpha);
        for (k, &weight) in self.rule_alpha.weights.iter().enumerate() {
            denom += weight * ra.w[k] * ra.w[k];
        }
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok(numer / denom)
    }
}

#[inline]
fn abs_pow_p1(w: f64, p: f64) -> f64 {
    if p == 3.0 {
        let w2 = w * w;
        w2 * w2
    } else if p == 2.0 {
        let x = w.abs();
        x * x * x
    } else {
        w.abs().powf(p + 1.0)
    }
}

/// Discrete residual of the energy balance
/// `d/ds(E0 + I) = -2α ∫ (∂_s w)² ρ/(1-|y|²) + Σ0`:
/// `[(E0+I)(s+Δs) - (E0+I)(s)]/Δs + 2α·D_mid - Σ0_mid`, with the
/// dissipation and source-work terms evaluated at the interval midpoint.
/// Vanishes at `O(Δs²)` plus the spatial error.
pub fn energy_balance_residual(
    r1: &EnergyReport,
    r2: &EnergyReport,
    d_mid: f64,
    sigma_mid: f64,
    alpha: f64,
) -> f64 {
    let ds = r2.s - r1.s;
    ((r2.e0 + r2.i) - (r1.e0 + r1.i)) / ds + 2.0 * alpha * d_mid - sigma_mid
}

/// Smallest constant `C` for which the one-sided bound
/// `Σ0 ≤ C e^{-(p+1)s/(p-1)} + C s^{-a} ∫|w|^{p+1}ρ` holds at this report,
/// where `Σ0 = Σ0¹ + Σ0²` is the signed source-work sum. Diagnostic only;
/// zero when the perturbation is off or the sum is negative.
pub fn sigma0_margin(report: &EnergyReport, params: &ModelParams) -> f64 {
    let sigma = (report.sigma01 + report.sigma02).max(0.0);
    if sigma == 0.0 {
        return 0.0;
    }
    let tail = EnergyReport::theta_tail(params, report.s);
    sigma / (tail + report.s.powf(-params.a) * report.lp1)
}

/// Trapezoid average of the `|w|^{p+1}` mass over a unit window `[s, s+1]`.
/// The reports must cover the window with uniform spacing.
pub fn lp1_time_average(reports: &[EnergyReport]) -> Result<f64> {
    if reports.len() < 2 {
        return Err(Error::InvalidParams("need at least two reports".into()));
    }
    let ds = reports[1].s - reports[0].s;
    for pair in reports.windows(2) {
        if ((pair[1].s - pair[0].s) - ds).abs() > 1e-9 * ds {
            return Err(Error::InvalidParams(
                "reports must be uniformly spaced".into(),
            ));
        }
    }
    let span = reports.last().unwrap().s - reports[0].s;
    if (span - 1.0).abs() > 0.5 * ds {
        return Err(Error::InvalidParams(format!(
            "reports must cover a unit window, got span {span}"
        )));
    }
    let mut acc = 0.0;
    for (k, r) in reports.iter().enumerate() {
        let trapz = if k == 0 || k == reports.len() - 1 {
            0.5
        } else {
            1.0
        };
        acc += trapz * r.lp1;
    }
    Ok(acc * ds / span)
}
