//! The space-independent blow-up ODE `v'' = |v|^{p-1}v + f(v)` and
//! power-law rate fitting against `v ~ A (T-t)^{-β}`.
//!
//! Integration uses velocity-Verlet with deterministic step halving keyed to
//! the growth of `v`: the step is halved (never enlarged) whenever
//! `|v|^{(p-1)/2}·dt` exceeds a CFL-like constant, so steps shrink
//! geometrically toward the blow-up time and accepted points are roughly
//! log-spaced in `T - t`.

use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeStop {
    /// `v` reached the requested threshold: blow-up detected.
    Threshold,
    /// Step budget exhausted without reaching the threshold.
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct OdeTrajectory {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub vdot: Vec<f64>,
    pub stopped_at: OdeStop,
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub max_steps: usize,
    /// Halve `dt` whenever `|v|^{(p-1)/2}·dt` exceeds this.
    pub growth_cfl: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            max_steps: 2_000_000,
            growth_cfl: 0.1,
        }
    }
}

/// Integrate from `(v0, v1)` until `v ≥ threshold` or the step budget runs
/// out. Every accepted step is stored.
pub fn integrate_ode(
    params: &ModelParams,
    v0: f64,
    v1: f64,
    threshold: f64,
    dt0: f64,
    opts: &OdeOptions,
) -> Result<OdeTrajectory> {
    if !(threshold > v0.max(1.0)) {
        return Err(Error::InvalidParams(format!(
            "threshold must exceed max(1, v0) = {}, got {threshold}",
            v0.max(1.0)
        )));
    }
    if !(dt0 > 0.0 && dt0.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "dt0 must be positive, got {dt0}"
        )));
    }

    let half_pm1 = 0.5 * (params.p - 1.0);
    let mut t = 0.0;
    let mut v = v0;
    let mut w = v1;
    let mut dt = dt0;
    let mut acc = params.source_term(v);

    let mut out = OdeTrajectory {
        t: vec![t],
        v: vec![v],
        vdot: vec![w],
        stopped_at: OdeStop::MaxSteps,
    };

    for _ in 0..opts.max_steps {
        while v.abs().powf(half_pm1) * dt > opts.growth_cfl {
            dt *= 0.5;
        }
        let v_new = v + dt * (w + 0.5 * dt * acc);
        let acc_new = params.source_term(v_new);
        let w_new = w + 0.5 * dt * (acc + acc_new);
        if !v_new.is_finite() || !w_new.is_finite() {
            // overflow past the threshold in one step: saturation, not a fault
            out.stopped_at = OdeStop::Threshold;
            return Ok(out);
        }
        t += dt;
        v = v_new;
        w = w_new;
        acc = acc_new;
        out.t.push(t);
        out.v.push(v);
        out.vdot.push(w);
        if v >= threshold {
            out.stopped_at = OdeStop::Threshold;
            return Ok(out);
        }
    }
    Ok(out)
}

/// Result of the joint three-parameter fit `v ≈ A (T-t)^{-β}`.
#[derive(Debug, Clone, Copy)]
pub struct BlowupFit {
    pub t_est: f64,
    pub exponent_est: f64,
    /// Amplitude read off at the theoretical exponent `2/(p-1)`:
    /// the tail average of `v·(T-t)^{2/(p-1)}`.
    pub kappa_est: f64,
    /// RMS residual of the fit in log-log coordinates.
    pub residual: f64,
}

/// Joint power-law fit on `(t, v)` samples: least squares of
/// `log v = log A - β log(T - t)` over `(T, β, A)`. The problem is linear in
/// `(log A, β)` for fixed `T`, so the outer search is one-dimensional
/// (variable-projection Gauss–Newton, bracketed by a linear extrapolation of
/// `1/v^{1/β_hint}`, which is asymptotically linear in `t`).
#[derive(Debug, Clone, Copy)]
pub struct PowerLawFit {
    pub t_blow: f64,
    pub exponent: f64,
    pub amplitude: f64,
    pub rms: f64,
}

fn profile_rss(ts: &[f64], zs: &[f64], t_blow: f64) -> (f64, f64, f64) {
    // linear LS of z = c - β·log(T - t); returns (rss, c, beta)
    let n = ts.len() as f64;
    let mut ml = 0.0;
    let mut mz = 0.0;
    for (&t, &z) in ts.iter().zip(zs) {
        ml += (t_blow - t).ln();
        mz += z;
    }
    ml /= n;
    mz /= n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (&t, &z) in ts.iter().zip(zs) {
        let dl = (t_blow - t).ln() - ml;
        cov += dl * (z - mz);
        var += dl * dl;
    }
    let beta = -cov / var;
    let c = mz + beta * ml;
    let mut rss = 0.0;
    for (&t, &z) in ts.iter().zip(zs) {
        let r = z - (c - beta * (t_blow - t).ln());
        rss += r * r;
    }
    (rss, c, beta)
}

/// Golden-section minimizer over `t_blow` in `(t_last, hi]`; `f` must be
/// smooth. Returns the minimizing abscissa.
fn golden_min(mut lo: f64, mut hi: f64, scale: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..240 {
        if f1 > f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        }
        if hi - lo <= 1e-16 * scale {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn fit_power_law(ts: &[f64], vs: &[f64], beta_hint: f64) -> Result<PowerLawFit> {
    if ts.len() != vs.len() || ts.len() < 8 {
        return Err(Error::Fit(format!(
            "need at least 8 samples, got {}",
            ts.len()
        )));
    }
    if vs.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Fit("power-law fit needs positive samples".into()));
    }
    for pair in ts.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Fit(
                "sample times must be strictly increasing".into(),
            ));
        }
    }
    let zs: Vec<f64> = vs.iter().map(|&v| v.ln()).collect();
    let t_last = *ts.last().unwrap();
    let span = t_last - ts[0];

    // bracket T: linear extrapolation of g = v^{-1/β_hint} to zero
    let g_last = vs[ts.len() - 1].powf(-1.0 / beta_hint);
    let g_prev = vs[ts.len() - 2].powf(-1.0 / beta_hint);
    let slope = (g_prev - g_last) / (t_last - ts[ts.len() - 2]);
    let richardson = if slope > 0.0 {
        t_last + g_last / slope
    } else {
        t_last + 0.1 * span
    };
    let lo = t_last + 1e-12 * span.max(t_last.abs());
    let mut hi = (2.0 * (richardson - t_last)).max(1e-9 * span) + t_last;
    // widen until the minimum is interior
    for _ in 0..60 {
        let probe = profile_rss(ts, &zs, hi).0;
        let inner = profile_rss(ts, &zs, t_last + 0.5 * (hi - t_last)).0;
        if probe > inner {
            break;
        }
        hi = t_last + 2.0 * (hi - t_last);
    }

    let t_blow = golden_min(lo, hi, t_last.abs() + span, &|t| profile_rss(ts, &zs, t).0);
    let (rss, c, beta) = profile_rss(ts, &zs, t_blow);
    if !(beta > 0.0) {
        return Err(Error::Fit(format!(
            "fitted exponent is not positive ({beta})"
        )));
    }
    Ok(PowerLawFit {
        t_blow,
        exponent: beta,
        amplitude: c.exp(),
        rms: (rss / ts.len() as f64).sqrt(),
    })
}

/// Single-parameter fit with the exponent frozen: minimizes the variance of
/// `log v + β₀ log(T - t)` over `T`. Returns `(T, rms)`.
pub fn fit_frozen_exponent(ts: &[f64], vs: &[f64], beta0: f64) -> Result<(f64, f64)> {
    if ts.len() != vs.len() || ts.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 samples, got {}",
            ts.len()
        )));
    }
    if vs.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Fit("fit needs positive samples".into()));
    }
    let zs: Vec<f64> = vs.iter().map(|&v| v.ln()).collect();
    let t_last = *ts.last().unwrap();
    let span = t_last - ts[0];
    let rss = move |t_blow: f64| {
        let mut mean = 0.0;
        for (&t, &z) in ts.iter().zip(&zs) {
            mean += z + beta0 * (t_blow - t).ln();
        }
        mean /= ts.len() as f64;
        let mut acc = 0.0;
        for (&t, &z) in ts.iter().zip(&zs) {
            let r = z + beta0 * (t_blow - t).ln() - mean;
            acc += r * r;
        }
        acc
    };
    let lo = t_last + 1e-12 * span.max(t_last.abs());
    let mut hi = t_last + 2.0 * span;
    for _ in 0..60 {
        if rss(hi) > rss(t_last + 0.5 * (hi - t_last)) {
            break;
        }
        hi = t_last + 2.0 * (hi - t_last);
    }
    let t_blow = golden_min(lo, hi, t_last.abs() + span, &rss);
    Ok((t_blow, (rss(t_blow) / ts.len() as f64).sqrt()))
}

/// Fit the blow-up asymptotics from a trajectory that reached its threshold.
/// The fitting window is the final decade of growth.
pub fn fit_blowup(params: &ModelParams, traj: &OdeTrajectory) -> Result<BlowupFit> {
    if traj.stopped_at != OdeStop::Threshold {
        return Err(Error::Fit(
            "trajectory did not reach the blow-up threshold".into(),
        ));
    }
    let v_last = *traj.v.last().unwrap();
    let v_ref = 10.0 * traj.v[0].abs().max(0.1 * v_last.abs() / 1e6);
    let grown = traj.v.iter().filter(|&&v| v > v_ref).count();
    if grown < 50 {
        return Err(Error::Fit(format!(
            "need at least 50 samples past 10x the initial value, got {grown}"
        )));
    }
    let start = traj
        .v
        .iter()
        .position(|&v| v >= 0.1 * v_last)
        .expect("last value is in its own decade");
    let ts = &traj.t[start..];
    let vs = &traj.v[start..];
    for pair in vs.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Fit(
                "non-monotone tail; asymptotic regime not reached".into(),
            ));
        }
    }
    let beta_theory = 2.0 / (params.p - 1.0);
    let fit = fit_power_law(ts, vs, beta_theory)?;
    let kappa_est = ts
        .iter()
        .zip(vs)
        .map(|(&t, &v)| v * (fit.t_blow - t).powf(beta_theory))
        .sum::<f64>()
        / ts.len() as f64;
    Ok(BlowupFit {
        t_est: fit.t_blow,
        exponent_est: fit.exponent,
        kappa_est,
        residual: fit.rms,
    })
}

/// Initial data on the unperturbed self-similar manifold
/// `v(t) = κ/(T-t)^{2/(p-1)}` with `v(0) = v0`: returns `(v1, T)`.
pub fn manifold_velocity(params: &ModelParams, kappa: f64, v0: f64) -> (f64, f64) {
    let q = 2.0 / (params.p - 1.0);
    let t_blow = (kappa / v0).powf(1.0 / q);
    let v1 = q * kappa / t_blow.powf(q + 1.0);
    (v1, t_blow)
}
