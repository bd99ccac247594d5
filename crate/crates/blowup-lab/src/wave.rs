//! Explicit solver for `u_tt = Δu + |u|^{p-1}u + f(u)` on a periodic line,
//! an absorbing line, or radially in N dimensions, run to finite-time
//! blow-up, plus estimation of the blow-up surface `T(x)`.
//!
//! Time stepping is leapfrog in velocity-Verlet form (identical `u` sequence
//! to the central second difference). The step only ever shrinks: it is
//! halved whenever the frozen-coefficient stiffness of the source at the
//! running amplitude would violate the local CFL bound, so growing solutions
//! get geometrically refined steps and a rerun of the same config replays
//! the same step sequence bit for bit. Steps are additionally clipped to
//! land exactly on scheduled snapshot times.

use crate::error::{Error, Result};
use crate::interp::UniformAxis;
use crate::model::ModelParams;
use crate::ode::fit_frozen_exponent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Line,
    Radial,
}

impl std::fmt::Display for GridKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridKind::Line => write!(f, "line"),
            GridKind::Radial => write!(f, "radial"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// First-order outflow (`u_t = ∓u_x`) at the lateral ends.
    Absorbing,
}

/// Uniform spatial grid. Periodic line grids cover `[x_min, x_max)` with
/// `n` nodes; absorbing and radial grids include both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub kind: GridKind,
    pub x_min: f64,
    pub dx: f64,
    pub n: usize,
    pub dim: u32,
    pub boundary: Boundary,
}

impl Grid {
    pub fn line(x_min: f64, x_max: f64, n: usize, boundary: Boundary) -> Result<Self> {
        if !(x_max > x_min) || n < 16 {
            return Err(Error::InvalidParams(format!(
                "line grid needs x_max > x_min and n >= 16 (got [{x_min}, {x_max}], n = {n})"
            )));
        }
        let dx = match boundary {
            Boundary::Periodic => (x_max - x_min) / n as f64,
            Boundary::Absorbing => (x_max - x_min) / (n - 1) as f64,
        };
        Ok(Grid {
            kind: GridKind::Line,
            x_min,
            dx,
            n,
            dim: 1,
            boundary,
        })
    }

    /// Radial grid on `[0, r_max]` with a symmetry node at the origin and an
    /// absorbing outer boundary.
    pub fn radial(r_max: f64, n: usize, dim: u32) -> Result<Self> {
        if !(r_max > 0.0) || n < 16 || dim < 1 {
            return Err(Error::InvalidParams(format!(
                "radial grid needs r_max > 0, n >= 16, dim >= 1 (got {r_max}, {n}, {dim})"
            )));
        }
        Ok(Grid {
            kind: GridKind::Radial,
            x_min: 0.0,
            dx: r_max / (n - 1) as f64,
            n,
            dim,
            boundary: Boundary::Absorbing,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + self.dx * i as f64
    }

    pub fn axis(&self) -> UniformAxis {
        UniformAxis::new(self.x_min, self.dx, self.n)
    }
}

/// Physical-space snapshot: the fields at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
}

impl FieldState {
    pub fn zero(n: usize) -> Self {
        FieldState {
            t: 0.0,
            u: vec![0.0; n],
            ut: vec![0.0; n],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().all(|v| v.is_finite()) && self.ut.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_u(&self) -> f64 {
        self.u.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }
}

/// A stored snapshot, possibly windowed to a sub-range of the grid.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub kind: GridKind,
    pub dim: u32,
    pub axis: UniformAxis,
    pub state: FieldState,
}

/// Strided per-node `|u|` histories recorded during a run.
#[derive(Debug, Clone)]
pub struct NodeHistory {
    pub stride: usize,
    /// Positions of the recorded nodes.
    pub x: Vec<f64>,
    pub times: Vec<f64>,
    /// One row per recorded event, `|u|` at the strided nodes.
    pub values: Vec<Vec<f64>>,
}

// ---------------------------------------------------------------------------
// stepping engine
// ---------------------------------------------------------------------------

struct Engine<'a> {
    grid: &'a Grid,
    params: &'a ModelParams,
    t: f64,
    u: Vec<f64>,
    ut: Vec<f64>,
    acc: Vec<f64>,
    u_next: Vec<f64>,
    acc_next: Vec<f64>,
}

enum StepResult {
    Ok { max_abs: f64 },
    NonFinite,
}

impl<'a> Engine<'a> {
    fn new(grid: &'a Grid, params: &'a ModelParams, init: FieldState) -> Self {
        let n = grid.n;
        let mut engine = Engine {
            grid,
            params,
            t: init.t,
            u: init.u,
            ut: init.ut,
            acc: vec![0.0; n],
            u_next: vec![0.0; n],
            acc_next: vec![0.0; n],
        };
        let u = std::mem::take(&mut engine.u);
        engine.accel_into(&u);
        engine.u = u;
        engine.acc.copy_from_slice(&engine.acc_next);
        engine
    }

    /// Laplacian plus source into `acc_next`. Boundary entries follow the
    /// grid's rule; absorbing ends are left at zero (they are advected, not
    /// accelerated).
    fn accel_into(&mut self, u: &[f64]) {
        let n = self.grid.n;
        let inv_dx2 = 1.0 / (self.grid.dx * self.grid.dx);
        let acc = &mut self.acc_next;
        let params = self.params;
        match (self.grid.kind, self.grid.boundary) {
            (GridKind::Line, Boundary::Periodic) => {
                for (i, w) in u.windows(3).enumerate() {
                    acc[i + 1] = (w[0] - 2.0 * w[1] + w[2]) * inv_dx2 + params.source_term(w[1]);
                }
                acc[0] = (u[n - 1] - 2.0 * u[0] + u[1]) * inv_dx2 + params.source_term(u[0]);
                acc[n - 1] =
                    (u[n - 2] - 2.0 * u[n - 1] + u[0]) * inv_dx2 + params.source_term(u[n - 1]);
            }
            (GridKind::Line, Boundary::Absorbing) => {
                for (i, w) in u.windows(3).enumerate() {
                    acc[i + 1] = (w[0] - 2.0 * w[1] + w[2]) * inv_dx2 + params.source_term(w[1]);
                }
                acc[0] = 0.0;
                acc[n - 1] = 0.0;
            }
            (GridKind::Radial, _) => {
                let dim = self.grid.dim as f64;
                // symmetry node: Δu(0) = N·u_rr(0) ≈ 2N (u1 - u0)/dx²
                acc[0] = 2.0 * dim * (u[1] - u[0]) * inv_dx2 + params.source_term(u[0]);
                let half_inv_dx = 0.5 / self.grid.dx;
                for (i, w) in u.windows(3).enumerate() {
                    let r = self.grid.x(i + 1);
                    acc[i + 1] = (w[0] - 2.0 * w[1] + w[2]) * inv_dx2
                        + (dim - 1.0) / r * (w[2] - w[0]) * half_inv_dx
                        + params.source_term(w[1]);
                }
                acc[n - 1] = 0.0;
            }
        }
    }

    fn advance(&mut self, dt: f64) -> StepResult {
        let n = self.grid.n;
        let absorbing_line = matches!(
            (self.grid.kind, self.grid.boundary),
            (GridKind::Line, Boundary::Absorbing)
        );
        let absorbing_outer = absorbing_line || self.grid.kind == GridKind::Radial;

        {
            let (u, ut, acc, u_next) = (&self.u, &self.ut, &self.acc, &mut self.u_next);
            for i in 0..n {
                u_next[i] = u[i] + dt * (ut[i] + 0.5 * dt * acc[i]);
            }
            if absorbing_line {
                u_next[0] = u[0] + dt * (u[1] - u[0]) / self.grid.dx;
            }
            if absorbing_outer {
                u_next[n - 1] = u[n - 1] - dt * (u[n - 1] - u[n - 2]) / self.grid.dx;
            }
        }
        let u_next = std::mem::take(&mut self.u_next);
        self.accel_into(&u_next);
        self.u_next = u_next;

        let mut max_abs = 0.0f64;
        {
            let (ut, acc, acc_next) = (&mut self.ut, &self.acc, &self.acc_next);
            for i in 0..n {
                ut[i] += 0.5 * dt * (acc[i] + acc_next[i]);
                max_abs = max_abs.max(self.u_next[i].abs());
            }
            if absorbing_line {
                ut[0] = (self.u_next[1] - self.u_next[0]) / self.grid.dx;
            }
            if absorbing_outer {
                ut[n - 1] = -(self.u_next[n - 1] - self.u_next[n - 2]) / self.grid.dx;
            }
        }
        if !max_abs.is_finite() {
            return StepResult::NonFinite;
        }
        std::mem::swap(&mut self.u, &mut self.u_next);
        std::mem::swap(&mut self.acc, &mut self.acc_next);
        self.t += dt;
        StepResult::Ok { max_abs }
    }

    fn state(&self) -> FieldState {
        FieldState {
            t: self.t,
            u: self.u.clone(),
            ut: self.ut.clone(),
        }
    }

    fn snapshot(&self, center: f64, half_width: Option<f64>) -> Snapshot {
        let (mut i0, mut i1) = match half_width {
            None => (0, self.grid.n - 1),
            Some(w) => {
                let lo = ((center - w - self.grid.x_min) / self.grid.dx).floor() as isize - 2;
                let hi = ((center + w - self.grid.x_min) / self.grid.dx).ceil() as isize + 2;
                let lo = lo.clamp(0, self.grid.n as isize - 1) as usize;
                let hi = hi.clamp(lo as isize, self.grid.n as isize - 1) as usize;
                (lo, hi)
            }
        };
        // cubic interpolation needs at least 4 nodes
        while i1 - i0 < 3 {
            i0 = i0.saturating_sub(1);
            i1 = (i1 + 1).min(self.grid.n - 1);
        }
        Snapshot {
            kind: self.grid.kind,
            dim: self.grid.dim,
            axis: UniformAxis::new(self.grid.x(i0), self.grid.dx, i1 - i0 + 1),
            state: FieldState {
                t: self.t,
                u: self.u[i0..=i1].to_vec(),
                ut: self.ut[i0..=i1].to_vec(),
            },
        }
    }
}

/// One explicit leapfrog update. Requires `dt ≤ 0.5·dx` and a finite state;
/// a non-finite result is returned as the saturation signal carrying the
/// last finite state.
pub enum StepOutcome {
    Advanced(FieldState),
    Saturated(FieldState),
}

pub fn step(state: &FieldState, dt: f64, params: &ModelParams, grid: &Grid) -> Result<StepOutcome> {
    if state.u.len() != grid.n || state.ut.len() != grid.n {
        return Err(Error::Solver(format!(
            "state has {} nodes, grid has {}",
            state.u.len(),
            grid.n
        )));
    }
    if !(dt > 0.0 && dt <= 0.5 * grid.dx) {
        return Err(Error::Solver(format!(
            "time step must satisfy 0 < dt <= 0.5 dx = {}, got {dt}",
            0.5 * grid.dx
        )));
    }
    if !state.is_finite() {
        return Err(Error::Solver("state contains non-finite values".into()));
    }
    let mut engine = Engine::new(grid, params, state.clone());
    match engine.advance(dt) {
        StepResult::Ok { .. } => Ok(StepOutcome::Advanced(engine.state())),
        StepResult::NonFinite => Ok(StepOutcome::Saturated(state.clone())),
    }
}

// ---------------------------------------------------------------------------
// full runs
// ---------------------------------------------------------------------------

/// A requested exact-time snapshot; `half_width` trims storage to a window
/// around `center` (full domain when `None`).
#[derive(Debug, Clone, Copy)]
pub struct ScheduledSnapshot {
    pub t: f64,
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// dt as a fraction of dx (kept ≤ 0.5 by validation).
    pub cfl: f64,
    /// Bound on `dt·ω(max|u|)` for the frozen-coefficient source stiffness
    /// `ω`; exceeding it halves dt (dt never grows back).
    pub source_cfl: f64,
    /// Saturation threshold on `max|u|`.
    pub u_max: f64,
    pub max_steps: usize,
    /// Optional hard stop (used when the analysis window ends before
    /// saturation).
    pub stop_time: Option<f64>,
    /// Exact-time snapshots, strictly increasing.
    pub schedule: Vec<ScheduledSnapshot>,
    /// Center for snapshot windows.
    pub window_center: f64,
    /// Emit full-domain snapshots every time `max|u|` grows by this ratio
    /// (`None` disables).
    pub growth_snapshot_ratio: Option<f64>,
    /// Record strided history rows at this `max|u|` growth ratio.
    pub history_growth_ratio: f64,
    /// Also record history rows at least this often in time.
    pub history_dt: f64,
    /// Node stride for histories; 0 picks `ceil(n/1024)`.
    pub surface_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cfl: 0.4,
            source_cfl: 0.2,
            u_max: 1e7,
            max_steps: 400_000,
            stop_time: None,
            schedule: Vec::new(),
            window_center: 0.0,
            growth_snapshot_ratio: Some(2.0),
            // fine enough that every node keeps >= 20 events per growth
            // decade even when steps outpace the levels near saturation
            history_growth_ratio: 2f64.powf(1.0 / 12.0),
            history_dt: f64::INFINITY,
            surface_stride: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStop {
    /// `max|u|` reached the saturation threshold (or overflowed).
    Saturated,
    /// Reached the configured stop time.
    TimeLimit,
    /// Step budget exhausted: bounded on the explored horizon.
    StepBudget,
}

#[derive(Debug)]
pub struct RunOutput {
    pub snapshots: Vec<Snapshot>,
    pub history: NodeHistory,
    pub stop: RunStop,
    pub final_state: FieldState,
    pub steps: usize,
    pub dt_final: f64,
}

pub fn run_to_blowup(
    init: FieldState,
    params: &ModelParams,
    grid: &Grid,
    config: &SolverConfig,
) -> Result<RunOutput> {
    if init.u.len() != grid.n || init.ut.len() != grid.n {
        return Err(Error::Solver(
            "initial state does not match the grid".into(),
        ));
    }
    if !init.is_finite() {
        return Err(Error::Solver(
            "initial state contains non-finite values".into(),
        ));
    }
    if !(config.cfl > 0.0 && config.cfl <= 0.5) {
        return Err(Error::Solver(format!(
            "cfl must be in (0, 0.5], got {}",
            config.cfl
        )));
    }
    for pair in config.schedule.windows(2) {
        if pair[1].t <= pair[0].t {
            return Err(Error::Solver(
                "snapshot schedule must be strictly increasing".into(),
            ));
        }
    }
    let stride = if config.surface_stride == 0 {
        grid.n.div_ceil(1024)
    } else {
        config.surface_stride
    };

    let mut engine = Engine::new(grid, params, init);
    let mut dt = config.cfl * grid.dx;
    let mut max_abs = engine.u.iter().fold(0.0f64, |m, &v| m.max(v.abs()));

    let mut history = NodeHistory {
        stride,
        x: (0..grid.n).step_by(stride).map(|i| grid.x(i)).collect(),
        times: Vec::new(),
        values: Vec::new(),
    };
    let record_history = |h: &mut NodeHistory, t: f64, u: &[f64]| {
        h.times.push(t);
        h.values
            .push(u.iter().step_by(stride).map(|v| v.abs()).collect());
    };
    record_history(&mut history, engine.t, &engine.u);
    let mut hist_level = max_abs.max(1e-12) * config.history_growth_ratio;
    let mut hist_t = engine.t + config.history_dt;

    let mut snapshots = Vec::new();
    let mut growth_level = f64::INFINITY;
    if let Some(ratio) = config.growth_snapshot_ratio {
        snapshots.push(engine.snapshot(config.window_center, None));
        growth_level = max_abs.max(1e-12) * ratio;
    }
    let mut schedule_iter = config.schedule.iter().peekable();
    // schedule entries at or before the initial time are emitted immediately
    while let Some(&&ScheduledSnapshot { t, half_width }) = schedule_iter.peek() {
        if t <= engine.t + 1e-14 * (1.0 + engine.t.abs()) {
            snapshots.push(engine.snapshot(config.window_center, half_width));
            schedule_iter.next();
        } else {
            break;
        }
    }

    let mut stop = RunStop::StepBudget;
    let mut steps = 0usize;
    while steps < config.max_steps {
        // deterministic halving: growth of max|u| only ever shrinks dt
        while dt * params.stiffness_freq(max_abs) > config.source_cfl {
            dt *= 0.5;
        }
        // clip onto exact events (scheduled snapshot or stop time)
        let mut event_t = f64::INFINITY;
        if let Some(&&ScheduledSnapshot { t, .. }) = schedule_iter.peek() {
            event_t = t;
        }
        if let Some(ts) = config.stop_time {
            event_t = event_t.min(ts);
        }
        let step_dt = if engine.t + dt >= event_t {
            event_t - engine.t
        } else {
            dt
        };

        if step_dt > 0.0 {
            match engine.advance(step_dt) {
                StepResult::Ok { max_abs: m } => max_abs = m,
                StepResult::NonFinite => {
                    stop = RunStop::Saturated;
                    break;
                }
            }
            steps += 1;
        }

        // emit events that we just landed on
        while let Some(&&ScheduledSnapshot { t, half_width }) = schedule_iter.peek() {
            if t <= engine.t + 1e-14 * (1.0 + engine.t.abs()) {
                snapshots.push(engine.snapshot(config.window_center, half_width));
                schedule_iter.next();
            } else {
                break;
            }
        }
        if max_abs >= hist_level || engine.t >= hist_t {
            record_history(&mut history, engine.t, &engine.u);
            hist_level = max_abs.max(1e-12) * config.history_growth_ratio;
            hist_t = engine.t + config.history_dt;
        }
        if max_abs >= growth_level {
            snapshots.push(engine.snapshot(config.window_center, None));
            growth_level = max_abs * config.growth_snapshot_ratio.unwrap_or(2.0);
        }

        if max_abs >= config.u_max {
            stop = RunStop::Saturated;
            break;
        }
        if let Some(ts) = config.stop_time {
            if engine.t >= ts - 1e-14 * (1.0 + ts.abs()) {
                stop = RunStop::TimeLimit;
                break;
            }
        }
        // an event exactly at the current time was consumed by the emission
        // loop above, so the next iteration's clip is strictly positive
    }
    if history.times.last() != Some(&engine.t) {
        record_history(&mut history, engine.t, &engine.u);
    }
    Ok(RunOutput {
        snapshots,
        history,
        stop,
        final_state: engine.state(),
        steps,
        dt_final: dt,
    })
}

// ---------------------------------------------------------------------------
// blow-up surface
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitQuality {
    Ok,
    NoGrowth,
    NonMonotone,
    TooFewPoints,
}

/// Per-node blow-up times with the non-characteristic verdict near the
/// minimizing point. Unresolved nodes carry `+∞`.
#[derive(Debug, Clone)]
pub struct BlowupSurface {
    pub x: Vec<f64>,
    pub t_blow: Vec<f64>,
    pub quality: Vec<FitQuality>,
    pub x_star: f64,
    pub t_min: f64,
    pub slope_max: f64,
    pub non_characteristic: bool,
}

/// Frozen-exponent blow-up time from one node's `|u|` history: fit
/// `|u| ≈ C (T-t)^{-2/(p-1)}` over the node's final decade of growth.
/// Needs ≥ 20 points in that decade and a monotone tail.
pub fn estimate_t_series(times: &[f64], values: &[f64], exponent: f64) -> (f64, FitQuality) {
    debug_assert_eq!(times.len(), values.len());
    if values.len() < 20 {
        return (f64::INFINITY, FitQuality::TooFewPoints);
    }
    let (mut peak_idx, mut peak) = (0usize, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > peak {
            peak = v;
            peak_idx = i;
        }
    }
    let first = values[0].abs();
    if !(peak >= 10.0 * first.max(1e-12)) {
        return (f64::INFINITY, FitQuality::NoGrowth);
    }
    let mut start = peak_idx;
    while start > 0 && values[start - 1] >= 0.1 * peak {
        start -= 1;
    }
    let tail_t = &times[start..=peak_idx];
    let tail_v = &values[start..=peak_idx];
    if tail_t.len() < 20 {
        return (f64::INFINITY, FitQuality::TooFewPoints);
    }
    if tail_v.windows(2).any(|w| w[1] < w[0]) {
        return (f64::INFINITY, FitQuality::NonMonotone);
    }
    match fit_frozen_exponent(tail_t, tail_v, exponent) {
        Ok((t_blow, _rms)) => (t_blow, FitQuality::Ok),
        Err(_) => (f64::INFINITY, FitQuality::NonMonotone),
    }
}

/// Constructs the blow-up surface from a run's node histories and checks the
/// Lipschitz slope in a window around the minimizing node.
pub fn estimate_surface(
    history: &NodeHistory,
    params: &ModelParams,
    slope_window: f64,
    slope_margin: f64,
) -> Result<BlowupSurface> {
    let n = history.x.len();
    if n < 3 || history.times.len() < 3 {
        return Err(Error::Fit("history too short to estimate a surface".into()));
    }
    let exponent = 2.0 / (params.p - 1.0);
    let mut t_blow = vec![f64::INFINITY; n];
    let mut quality = vec![FitQuality::NoGrowth; n];
    let mut column = vec![0.0; history.times.len()];
    for j in 0..n {
        for (k, row) in history.values.iter().enumerate() {
            column[k] = row[j];
        }
        let (t, q) = estimate_t_series(&history.times, &column, exponent);
        t_blow[j] = t;
        quality[j] = q;
    }
    let (mut star, mut t_min) = (None, f64::INFINITY);
    for (j, &t) in t_blow.iter().enumerate() {
        if t < t_min {
            t_min = t;
            star = Some(j);
        }
    }
    let star = star.ok_or_else(|| Error::NoBlowup("no node shows finite-time growth".into()))?;
    let x_star = history.x[star];
    let check = non_characteristic_slope(&history.x, &t_blow, x_star, slope_window);
    Ok(BlowupSurface {
        x: history.x.clone(),
        t_blow,
        quality,
        x_star,
        t_min,
        slope_max: check.slope,
        non_characteristic: matches!(check.verdict, Verdict::NonCharacteristic)
            && check.slope <= 1.0 - slope_margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    NonCharacteristic,
    Characteristic,
    Inconclusive,
}

#[derive(Debug, Clone, Copy)]
pub struct NcCheck {
    pub verdict: Verdict,
    /// Max finite-difference slope of `T` over the window.
    pub slope: f64,
    pub finite_nodes: usize,
}

fn non_characteristic_slope(x: &[f64], t_blow: &[f64], x0: f64, window: f64) -> NcCheck {
    let mut slope: f64 = 0.0;
    let mut finite = 0usize;
    let mut pairs = 0usize;
    for j in 0..x.len() {
        if (x[j] - x0).abs() > window || !t_blow[j].is_finite() {
            continue;
        }
        finite += 1;
        if j + 1 < x.len() && (x[j + 1] - x0).abs() <= window && t_blow[j + 1].is_finite() {
            slope = slope.max((t_blow[j + 1] - t_blow[j]).abs() / (x[j + 1] - x[j]));
            pairs += 1;
        }
    }
    if finite < 3 || pairs == 0 {
        return NcCheck {
            verdict: Verdict::Inconclusive,
            slope: f64::NAN,
            finite_nodes: finite,
        };
    }
    NcCheck {
        verdict: Verdict::NonCharacteristic,
        slope,
        finite_nodes: finite,
    }
}

/// Slope check of an estimated surface around `x0`: verdict is
/// non-characteristic iff the max local slope stays below `1 - margin`.
pub fn non_characteristic_check(
    surface: &BlowupSurface,
    x0: f64,
    window: f64,
    margin: f64,
) -> NcCheck {
    let mut check = non_characteristic_slope(&surface.x, &surface.t_blow, x0, window);
    if let Verdict::NonCharacteristic = check.verdict {
        if !(check.slope <= 1.0 - margin) {
            check.verdict = Verdict::Characteristic;
        }
    }
    check
}

/// Gaussian bump initial data at rest.
pub fn bump_init(grid: &Grid, amplitude: f64, width: f64, center: f64) -> FieldState {
    let u = (0..grid.n)
        .map(|i| {
            let d = (grid.x(i) - center) / width;
            amplitude * (-d * d).exp()
        })
        .collect();
    FieldState {
        t: 0.0,
        u,
        ut: vec![0.0; grid.n],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_constants;
    use crate::ode::{integrate_ode, manifold_velocity, OdeOptions};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn params(p: f64, a: f64, perturbed: bool) -> ModelParams {
        ModelParams::new(p, a, 1.0, 1, perturbed).unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let p = params(3.0, 2.0, true);
        let grid = Grid::line(-1.0, 1.0, 64, Boundary::Periodic).unwrap();
        let cfg = SolverConfig {
            max_steps: 500,
            ..Default::default()
        };
        let out = run_to_blowup(FieldState::zero(grid.n), &p, &grid, &cfg).unwrap();
        assert_eq!(out.stop, RunStop::StepBudget);
        assert!(out.final_state.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn space_independent_data_tracks_ode() {
        // constant fields on a periodic grid: the Laplacian vanishes and each
        // node follows the space-independent equation
        let p = params(3.0, 2.0, true);
        let grid = Grid::line(-1.0, 1.0, 256, Boundary::Periodic).unwrap();
        let c = derive_constants(&p);
        let v0 = 5.0;
        let (v1, _) = manifold_velocity(&p, c.kappa, v0);
        let init = FieldState {
            t: 0.0,
            u: vec![v0; grid.n],
            ut: vec![v1; grid.n],
        };
        let cfg = SolverConfig {
            u_max: 1e5,
            max_steps: 2_000_000,
            ..Default::default()
        };
        let out = run_to_blowup(init, &p, &grid, &cfg).unwrap();
        assert_eq!(out.stop, RunStop::Saturated);
        // every node identical
        let f = &out.final_state;
        assert!(f.u.iter().all(|&v| v == f.u[0]));

        // reference ODE integration evaluated at the same time via the dense
        // step list
        let reference = integrate_ode(&p, v0, v1, 2e5, 1e-5, &OdeOptions::default()).unwrap();
        let t_probe = f.t * 0.7;
        let k = out
            .history
            .times
            .iter()
            .position(|&t| t >= t_probe)
            .unwrap();
        let t_k = out.history.times[k];
        let u_k = out.history.values[k][0];
        let j = reference.t.iter().position(|&t| t >= t_k).unwrap();
        // linear interp of the reference
        let (ta, tb) = (reference.t[j - 1], reference.t[j]);
        let (va, vb) = (reference.v[j - 1], reference.v[j]);
        let v_ref = va + (vb - va) * (t_k - ta) / (tb - ta);
        assert_relative_eq!(u_k, v_ref, max_relative = 1e-3);
    }

    #[test]
    fn linear_pulse_translates_at_unit_speed() {
        // negligible-amplitude pulse: d'Alembert right-mover u = g(x - t)
        let p = params(3.0, 2.0, false);
        let grid = Grid::line(-2.0, 2.0, 512, Boundary::Periodic).unwrap();
        let g = |x: f64| 1e-3 * (-(x / 0.25).powi(2)).exp();
        let gp = |x: f64| -2.0 * x / (0.25 * 0.25) * 1e-3 * (-(x / 0.25).powi(2)).exp();
        let init = FieldState {
            t: 0.0,
            u: (0..grid.n).map(|i| g(grid.x(i))).collect(),
            ut: (0..grid.n).map(|i| -gp(grid.x(i))).collect(),
        };
        let l2 = |v: &[f64]| (v.iter().map(|&x| x * x).sum::<f64>() * grid.dx).sqrt();
        let n0 = l2(&init.u);
        let cfg = SolverConfig {
            stop_time: Some(1.0),
            max_steps: 100_000,
            growth_snapshot_ratio: None,
            ..Default::default()
        };
        let out = run_to_blowup(init, &p, &grid, &cfg).unwrap();
        assert_eq!(out.stop, RunStop::TimeLimit);
        assert_abs_diff_eq!(out.final_state.t, 1.0, epsilon = 1e-12);
        let exact: Vec<f64> = (0..grid.n).map(|i| g(grid.x(i) - 1.0)).collect();
        let err: Vec<f64> = out
            .final_state
            .u
            .iter()
            .zip(&exact)
            .map(|(&a, &b)| a - b)
            .collect();
        assert!(l2(&err) / n0 < 0.01, "translation error {}", l2(&err) / n0);
        assert_relative_eq!(l2(&out.final_state.u), n0, max_relative = 0.01);
    }

    #[test]
    fn finite_speed_of_propagation() {
        let p = params(3.0, 2.0, true);
        let grid = Grid::line(-4.0, 4.0, 1024, Boundary::Periodic).unwrap();
        // narrow Gaussian: supported in |x| <= 1 to round-off (tail ~ 1e-20)
        let init = FieldState {
            t: 0.0,
            u: (0..grid.n)
                .map(|i| {
                    let x = grid.x(i);
                    if x.abs() < 1.0 {
                        0.5 * (-(x / 0.15).powi(2)).exp()
                    } else {
                        0.0
                    }
                })
                .collect(),
            ut: vec![0.0; grid.n],
        };
        let cfg = SolverConfig {
            stop_time: Some(1.5),
            max_steps: 100_000,
            growth_snapshot_ratio: None,
            ..Default::default()
        };
        let out = run_to_blowup(init, &p, &grid, &cfg).unwrap();
        let max_amp = out.final_state.max_abs_u();
        for i in 0..grid.n {
            let x = grid.x(i);
            if x.abs() > 1.0 + out.final_state.t + 3.0 * grid.dx {
                assert!(
                    out.final_state.u[i].abs() <= 1e-8 * max_amp,
                    "leakage {} beyond the light cone at x = {x}",
                    out.final_state.u[i]
                );
            }
        }
    }

    #[test]
    fn radial_space_independent_equilibrium_of_laplacian() {
        // constant data: radial Laplacian vanishes including at the origin
        let p = params(3.0, 2.0, true);
        let grid = Grid::radial(2.0, 128, 3).unwrap();
        let init = FieldState {
            t: 0.0,
            u: vec![2.0; grid.n],
            ut: vec![0.0; grid.n],
        };
        let mut state = init;
        let dt = 0.3 * grid.dx;
        let steps = 50;
        for _ in 0..steps {
            match step(&state, dt, &p, &grid).unwrap() {
                StepOutcome::Advanced(s) => state = s,
                StepOutcome::Saturated(_) => panic!("should not saturate"),
            }
        }
        // nodes outside the outer boundary's numerical cone (one cell per
        // step) evolve identically; the origin's symmetry stencil is exact
        let mid = state.u[grid.n / 4];
        for i in 0..grid.n - steps - 8 {
            assert_relative_eq!(state.u[i], mid, max_relative = 1e-12);
        }
        assert!(mid > 2.0, "source must grow a positive constant state");
    }

    #[test]
    fn scheduled_snapshots_land_exactly() {
        let p = params(3.0, 2.0, false);
        let grid = Grid::line(-1.0, 1.0, 64, Boundary::Periodic).unwrap();
        let init = FieldState {
            t: 0.0,
            u: vec![0.1; grid.n],
            ut: vec![0.0; grid.n],
        };
        let schedule = vec![
            ScheduledSnapshot {
                t: 0.01,
                half_width: None,
            },
            ScheduledSnapshot {
                t: 0.025,
                half_width: Some(0.5),
            },
            ScheduledSnapshot {
                t: 0.04,
                half_width: None,
            },
        ];
        let cfg = SolverConfig {
            schedule,
            stop_time: Some(0.05),
            growth_snapshot_ratio: None,
            max_steps: 10_000,
            ..Default::default()
        };
        let out = run_to_blowup(init, &p, &grid, &cfg).unwrap();
        let times: Vec<f64> = out.snapshots.iter().map(|s| s.state.t).collect();
        assert_eq!(times.len(), 3);
        assert_abs_diff_eq!(times[0], 0.01, epsilon = 1e-13);
        assert_abs_diff_eq!(times[1], 0.025, epsilon = 1e-13);
        assert_abs_diff_eq!(times[2], 0.04, epsilon = 1e-13);
        // windowed snapshot is smaller
        assert!(out.snapshots[1].state.u.len() < grid.n);
    }

    #[test]
    fn space_independent_surface_is_flat() {
        let p = params(3.0, 2.0, true);
        let grid = Grid::line(-1.0, 1.0, 128, Boundary::Periodic).unwrap();
        let c = derive_constants(&p);
        let (v1, _) = manifold_velocity(&p, c.kappa, 5.0);
        let init = FieldState {
            t: 0.0,
            u: vec![5.0; grid.n],
            ut: vec![v1; grid.n],
        };
        let cfg = SolverConfig {
            u_max: 1e6,
            max_steps: 2_000_000,
            ..Default::default()
        };
        let out = run_to_blowup(init, &p, &grid, &cfg).unwrap();
        let surface = estimate_surface(&out.history, &p, 0.5, 0.05).unwrap();
        let t0 = surface.t_blow[0];
        assert!(t0.is_finite());
        for &t in &surface.t_blow {
            assert_abs_diff_eq!(t, t0, epsilon = 1e-9 * t0);
        }
        assert!(surface.slope_max < 1e-6);
        assert!(surface.non_characteristic);

        // matches the ODE blow-up time estimate
        let traj = integrate_ode(&p, 5.0, v1, 1e8, 1e-5, &OdeOptions::default()).unwrap();
        let fit = crate::ode::fit_blowup(&p, &traj).unwrap();
        assert_relative_eq!(t0, fit.t_est, max_relative = 1e-3);
    }

    #[test]
    fn synthetic_history_recovers_blow_time() {
        let times: Vec<f64> = (0..120).map(|i| 0.69 * i as f64 / 120.0).collect();
        let values: Vec<f64> = times.iter().map(|&t| 2.0 * (0.7 - t).powf(-1.0)).collect();
        let (t, q) = estimate_t_series(&times, &values, 1.0);
        assert_eq!(q, FitQuality::Ok);
        assert_abs_diff_eq!(t, 0.7, epsilon = 1e-6);
    }

    #[test]
    fn out_of_cone_node_gets_infinity() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.01).collect();
        let flat = vec![1e-14; 50];
        let (t, q) = estimate_t_series(&times, &flat, 1.0);
        assert!(t.is_infinite());
        assert_eq!(q, FitQuality::NoGrowth);
    }

    #[test]
    fn characteristic_cone_is_flagged() {
        // synthetic surface T(x) = T0 - |x - x0|: slope exactly 1
        let x: Vec<f64> = (0..41).map(|i| -1.0 + i as f64 * 0.05).collect();
        let t_blow: Vec<f64> = x.iter().map(|&xi| 1.0 - xi.abs()).collect();
        let surface = BlowupSurface {
            x: x.clone(),
            t_blow: t_blow.clone(),
            quality: vec![FitQuality::Ok; x.len()],
            x_star: 0.0,
            t_min: 0.0,
            slope_max: 1.0,
            non_characteristic: false,
        };
        let check = non_characteristic_check(&surface, 0.0, 0.4, 0.05);
        assert_eq!(check.verdict, Verdict::Characteristic);
        assert_abs_diff_eq!(check.slope, 1.0, epsilon = 1e-12);

        // flat surface passes
        let flat = BlowupSurface {
            t_blow: vec![0.8; x.len()],
            ..surface
        };
        let check = non_characteristic_check(&flat, 0.0, 0.4, 0.05);
        assert_eq!(check.verdict, Verdict::NonCharacteristic);
        assert_eq!(check.slope, 0.0);
    }

    #[test]
    fn too_few_finite_nodes_is_inconclusive() {
        let x = vec![-0.1, 0.0, 0.1, 0.2];
        let t_blow = vec![f64::INFINITY, 0.5, f64::INFINITY, f64::INFINITY];
        let surface = BlowupSurface {
            x,
            t_blow,
            quality: vec![FitQuality::Ok; 4],
            x_star: 0.0,
            t_min: 0.5,
            slope_max: f64::NAN,
            non_characteristic: false,
        };
        let check = non_characteristic_check(&surface, 0.0, 0.3, 0.05);
        assert_eq!(check.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn step_rejects_cfl_violation() {
        let p = params(3.0, 2.0, false);
        let grid = Grid::line(-1.0, 1.0, 64, Boundary::Periodic).unwrap();
        let state = FieldState::zero(grid.n);
        assert!(step(&state, grid.dx, &p, &grid).is_err());
        assert!(step(&state, 0.4 * grid.dx, &p, &grid).is_ok());
    }

    #[test]
    fn discrete_lipschitz_bound_on_bump_surface() {
        let p = params(3.0, 2.0, true);
        let grid = Grid::line(-1.5, 1.5, 2048, Boundary::Periodic).unwrap();
        let init = bump_init(&grid, 10.0, 0.4, 0.0);
        let cfg = SolverConfig {
            u_max: 1e7,
            max_steps: 4_000_000,
            ..Default::default()
        };
        let out = run_to_blowup(init, &p, &grid, &cfg).unwrap();
        assert_eq!(out.stop, RunStop::Saturated);
        let surface = estimate_surface(&out.history, &p, 0.2, 0.05).unwrap();
        assert!(surface.non_characteristic, "slope {}", surface.slope_max);
        assert!(
            surface.x_star.abs() < 0.05,
            "the surface minimum must sit at the bump center, got {}",
            surface.x_star
        );
        let hx = surface.x[1] - surface.x[0];
        for j in 0..surface.x.len() - 1 {
            let (a, b) = (surface.t_blow[j], surface.t_blow[j + 1]);
            if a.is_finite() && b.is_finite() && (surface.x[j] - surface.x_star).abs() < 0.3 {
                assert!(
                    (b - a).abs() <= hx * 1.25,
                    "Lipschitz violation at x = {}: |ΔT| = {} vs dx = {hx}",
                    surface.x[j],
                    (b - a).abs()
                );
            }
        }
    }
}
