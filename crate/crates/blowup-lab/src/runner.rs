//! Orchestration: turn a validated config into runs, report series, verdict
//! files, and plot data. All outputs are deterministic; rerunning a config
//! rewrites byte-identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::config::{DiagSettings, InitConfig, RunConfig, SnapshotFormat, SweepConfig, T0Choice};
use crate::diagnostics::{
    blowup_flag, choose_theta, monotonicity_check, rate_track, window_bounds, BoundsReport,
    MonotonicityReport, RatePoint, ThetaChoice, VerdictJson,
};
use crate::energy::{
    energy_balance_residual, lp1_time_average, sigma0_margin, EnergyCtx, EnergyReport,
};
use crate::error::{Error, Result};
use crate::interp::sample;
use crate::io;
use crate::model::derive_constants;
use crate::ode::{fit_blowup, integrate_ode, manifold_velocity, BlowupFit, OdeOptions, OdeStop};
use crate::similarity::{ball_nodes, to_similarity, SimilarityFrame, WState};
use crate::wave::{
    bump_init, estimate_surface, non_characteristic_check, run_to_blowup, BlowupSurface,
    FieldState, Grid, GridKind, NcCheck, RunOutput, RunStop, ScheduledSnapshot, Snapshot,
    SolverConfig, Verdict,
};

/// Pre-runs estimating the scaling time stop at this amplitude.
const PRERUN_U_MAX: f64 = 1e5;

// ---------------------------------------------------------------------------
// grid and initial data
// ---------------------------------------------------------------------------

pub fn build_grid(cfg: &RunConfig) -> Result<Grid> {
    match cfg.grid.kind {
        GridKind::Line => Grid::line(
            cfg.grid.x_min,
            cfg.grid.x_max,
            cfg.grid.nx,
            cfg.grid.boundary,
        ),
        GridKind::Radial => Grid::radial(cfg.grid.x_max, cfg.grid.nx, cfg.model.n),
    }
}

pub fn build_init(cfg: &RunConfig, grid: &Grid) -> Result<FieldState> {
    match &cfg.init {
        InitConfig::Zero => Ok(FieldState::zero(grid.n)),
        InitConfig::Bump {
            amplitude,
            width,
            center,
        } => Ok(bump_init(grid, *amplitude, *width, *center)),
        InitConfig::OdeManifold { v0 } => {
            let consts = derive_constants(&cfg.model);
            let (v1, _) = manifold_velocity(&cfg.model, consts.kappa, *v0);
            Ok(FieldState {
                t: 0.0,
                u: vec![*v0; grid.n],
                ut: vec![v1; grid.n],
            })
        }
        InitConfig::File { path } => {
            let snap = load_snapshot_file(Path::new(path))?;
            let axis = snap.axis;
            let span_ok =
                grid.x(0) >= axis.x0 - 1e-12 && grid.x(grid.n - 1) <= axis.x_last() + 1e-12;
            if !span_ok {
                return Err(Error::Config(format!(
                    "initial-data file covers [{}, {}], grid needs [{}, {}]",
                    axis.x0,
                    axis.x_last(),
                    grid.x(0),
                    grid.x(grid.n - 1)
                )));
            }
            let u = (0..grid.n)
                .map(|i| sample(&axis, &snap.state.u, grid.x(i)))
                .collect();
            let ut = (0..grid.n)
                .map(|i| sample(&axis, &snap.state.ut, grid.x(i)))
                .collect();
            Ok(FieldState { t: 0.0, u, ut })
        }
    }
}

fn load_snapshot_file(path: &Path) -> Result<Snapshot> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(b"BLSNAP") {
        io::parse_snapshot_bin(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::parse(0, "snapshot file is neither binary nor UTF-8"))?;
        io::parse_snapshot_csv(&text)
    }
}

// ---------------------------------------------------------------------------
// the space-independent command
// ---------------------------------------------------------------------------

#[derive(Debug, serde::Serialize)]
pub struct OdeFitJson {
    pub t_est: f64,
    pub exponent_est: f64,
    pub kappa_est: f64,
    pub residual: f64,
}

pub fn run_ode(cfg: &RunConfig, out_dir: &Path) -> Result<BlowupFit> {
    let (v0, v1) = match &cfg.init {
        InitConfig::Zero => (0.0, 0.0),
        InitConfig::Bump { amplitude, .. } => (*amplitude, 0.0),
        InitConfig::OdeManifold { v0 } => {
            let consts = derive_constants(&cfg.model);
            let (v1, _) = manifold_velocity(&cfg.model, consts.kappa, *v0);
            (*v0, v1)
        }
        InitConfig::File { .. } => {
            return Err(Error::Config(
                "the ode command does not take file initial data".into(),
            ))
        }
    };
    let opts = OdeOptions {
        max_steps: cfg.solver.max_steps.min(2_000_000),
        ..Default::default()
    };
    let traj = integrate_ode(
        &cfg.model,
        v0,
        v1,
        cfg.solver.ode_threshold,
        cfg.solver.dt0,
        &opts,
    )?;
    io::save(
        &out_dir.join("ode_trajectory.csv"),
        &io::write_trajectory_csv(&traj.t, &traj.v, &traj.vdot),
    )?;
    if traj.stopped_at != OdeStop::Threshold {
        return Err(Error::NoBlowup(
            "the trajectory stayed below the threshold".into(),
        ));
    }
    let fit = fit_blowup(&cfg.model, &traj)?;
    let json = serde_json::to_string_pretty(&OdeFitJson {
        t_est: fit.t_est,
        exponent_est: fit.exponent_est,
        kappa_est: fit.kappa_est,
        residual: fit.residual,
    })?;
    io::save(&out_dir.join("ode_fit.json"), &json)?;
    Ok(fit)
}

// ---------------------------------------------------------------------------
// scaling-time estimation (coarse pre-runs)
// ---------------------------------------------------------------------------

fn coarse_config(cfg: &RunConfig, factor: usize) -> RunConfig {
    let mut coarse = cfg.clone();
    // factor-scaled floor keeps the two pre-runs at genuinely different
    // resolutions (their difference feeds the safety margin)
    let floor = (2048 / factor.max(1)).max(192);
    coarse.grid.nx = (cfg.grid.nx / factor).max(floor).min(cfg.grid.nx);
    coarse
}

/// Run a (usually coarsened) copy of the config deep into the growth regime
/// and estimate the blow-up surface from its node histories.
fn surface_run(cfg: &RunConfig) -> Result<(BlowupSurface, f64)> {
    let grid = build_grid(cfg)?;
    let init = build_init(cfg, &grid)?;
    let solver = SolverConfig {
        cfl: cfg.solver.cfl,
        // tighter stiffness bound: keeps enough history events per decade
        // for the per-node fits even near saturation
        source_cfl: cfg.solver.source_cfl.min(0.1),
        u_max: PRERUN_U_MAX.min(cfg.solver.u_max),
        max_steps: cfg.solver.max_steps,
        growth_snapshot_ratio: None,
        window_center: cfg.frame.x0,
        ..Default::default()
    };
    let out = run_to_blowup(init, &cfg.model, &grid, &solver)?;
    if out.stop != RunStop::Saturated {
        return Err(Error::NoBlowup(
            "the field stayed bounded on the explored horizon; no scaling time exists".into(),
        ));
    }
    let surface = estimate_surface(
        &out.history,
        &cfg.model,
        cfg.diag.nc_window,
        cfg.diag.nc_margin,
    )?;
    let t_hat = t_at(&surface.x, &surface.t_blow, cfg.frame.x0)?;
    Ok((surface, t_hat))
}

fn estimate_t_at_x0(cfg: &RunConfig) -> Result<f64> {
    surface_run(cfg).map(|(_, t_hat)| t_hat)
}

fn t_at(x: &[f64], t_blow: &[f64], x0: f64) -> Result<f64> {
    let mut best = (f64::INFINITY, f64::INFINITY);
    for (xi, ti) in x.iter().zip(t_blow) {
        let d = (xi - x0).abs();
        if d < best.0 && ti.is_finite() {
            best = (d, *ti);
        }
    }
    if best.1.is_finite() {
        Ok(best.1)
    } else {
        Err(Error::NoBlowup(format!(
            "no finite blow-up time near x0 = {x0}"
        )))
    }
}

/// The scheduling frame: either the configured fixed scaling time or a
/// safety-margined coarse estimate `T̂ - margin` (staying below the true
/// blow-up time keeps every scheduled snapshot inside the domain of
/// definition; the transform is valid for any scaling time at or below it).
fn scheduling_frame(cfg: &RunConfig) -> Result<(SimilarityFrame, f64)> {
    match cfg.frame.t0 {
        T0Choice::Fixed(t0) => Ok((
            SimilarityFrame {
                x0: cfg.frame.x0,
                t0,
            },
            0.0,
        )),
        T0Choice::Auto(_) => {
            let t4 = estimate_t_at_x0(&coarse_config(cfg, 4))?;
            let t8 = estimate_t_at_x0(&coarse_config(cfg, 8))?;
            let margin = (3.0 * (t4 - t8).abs()).max(2e-5 * t4.max(1.0));
            Ok((
                SimilarityFrame {
                    x0: cfg.frame.x0,
                    t0: t4 - margin,
                },
                margin,
            ))
        }
    }
}

// ---------------------------------------------------------------------------
// the simulate command
// ---------------------------------------------------------------------------

#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct FrameJson {
    pub x0: f64,
    pub t0: f64,
    /// Finest estimate of the blow-up time at x0 from this run.
    pub t_hat: f64,
    pub margin: f64,
}

pub struct SimArtifacts {
    pub grid: Grid,
    pub snapshots: Vec<Snapshot>,
    pub frame: SimilarityFrame,
    pub t_hat: f64,
    pub surface: BlowupSurface,
    pub nc: NcCheck,
    pub stop: RunStop,
    pub center_fit: Option<BlowupFit>,
}

/// Half-grid similarity times of the diagnostics window.
fn report_times(diag: &DiagSettings) -> Vec<f64> {
    let hs = 0.5 * diag.ds;
    let count = ((diag.s_hi - diag.s_lo) / hs).round() as usize;
    (0..=count).map(|j| diag.s_lo + hs * j as f64).collect()
}

fn snapshot_schedule(
    cfg: &RunConfig,
    frame: &SimilarityFrame,
    margin: f64,
    dx: f64,
) -> Result<Vec<ScheduledSnapshot>> {
    // the similarity clock starts at s0 = -log t0 (negative for slow runs);
    // the report window must begin strictly after it so every scheduled
    // snapshot time is positive, and reports themselves require s >= 1
    let s0 = -frame.t0.ln();
    if cfg.diag.s_lo <= s0 + 0.1 {
        return Err(Error::Config(format!(
            "diagnostics window starts at s_lo = {} but the scaling time {:.4} only admits \
             s > {s0:.3}; raise s_lo or use larger-amplitude data",
            cfg.diag.s_lo, frame.t0
        )));
    }
    Ok(report_times(&cfg.diag)
        .iter()
        .map(|&s| {
            let lam = (-s).exp();
            ScheduledSnapshot {
                t: frame.t0 - lam,
                half_width: Some(1.3 * lam + 2.0 * margin + 8.0 * dx),
            }
        })
        .collect())
}

fn center_fit(
    output: &RunOutput,
    params: &crate::model::ModelParams,
    x0: f64,
) -> Option<BlowupFit> {
    let history = &output.history;
    let j = history
        .x
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x0).abs().total_cmp(&(b.1 - x0).abs()))?
        .0;
    let times = &history.times;
    let values: Vec<f64> = history.values.iter().map(|row| row[j]).collect();
    let peak = values.iter().cloned().fold(0.0f64, f64::max);
    let start = values.iter().position(|&v| v >= 0.1 * peak)?;
    if times.len() - start < 12 {
        return None;
    }
    let beta = 2.0 / (params.p - 1.0);
    let fit = crate::ode::fit_power_law(&times[start..], &values[start..], beta).ok()?;
    let kappa = times[start..]
        .iter()
        .zip(&values[start..])
        .map(|(&t, &v)| v * (fit.t_blow - t).powf(beta))
        .sum::<f64>()
        / (times.len() - start) as f64;
    Some(BlowupFit {
        t_est: fit.t_blow,
        exponent_est: fit.exponent,
        kappa_est: kappa,
        residual: fit.rms,
    })
}

pub fn run_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<SimArtifacts> {
    cfg.validate()?;
    let grid = build_grid(cfg)?;
    let (mut frame, mut margin) = scheduling_frame(cfg)?;

    // If the coarse estimate of the scaling time sits above the true
    // blow-up time of this grid, the run saturates before the schedule
    // completes; in that case the failed run itself went deep, so its own
    // surface gives a far better estimate for a retry.
    let mut output = None;
    for attempt in 0..3 {
        let schedule = snapshot_schedule(cfg, &frame, margin, grid.dx)?;
        let last_scheduled = schedule.last().map(|s| s.t).unwrap_or(0.0);
        let stop_time = frame.t0 - (-(cfg.diag.s_hi + 0.1)).exp();
        let solver = SolverConfig {
            cfl: cfg.solver.cfl,
            source_cfl: cfg.solver.source_cfl,
            u_max: cfg.solver.u_max,
            max_steps: cfg.solver.max_steps,
            stop_time: Some(stop_time),
            schedule,
            window_center: frame.x0,
            growth_snapshot_ratio: Some(cfg.solver.snapshot_growth),
            ..Default::default()
        };
        let init = build_init(cfg, &grid)?;
        let attempt_output = run_to_blowup(init, &cfg.model, &grid, &solver)?;
        match attempt_output.stop {
            RunStop::StepBudget => {
                return Err(Error::NoBlowup(
                    "step budget exhausted before the analysis window".into(),
                ))
            }
            RunStop::Saturated if attempt_output.final_state.t < last_scheduled && attempt < 2 => {
                let surface = estimate_surface(
                    &attempt_output.history,
                    &cfg.model,
                    cfg.diag.nc_window,
                    cfg.diag.nc_margin,
                )?;
                let t_hat = t_at(&surface.x, &surface.t_blow, frame.x0)?;
                margin = (1e-4 * t_hat).max(2e-5);
                frame.t0 = t_hat - margin;
                continue;
            }
            RunStop::Saturated if attempt_output.final_state.t < last_scheduled => {
                // a different point beats the frame center to blow-up; the
                // frame can never reach its window
                let hint = estimate_surface(
                    &attempt_output.history,
                    &cfg.model,
                    cfg.diag.nc_window,
                    cfg.diag.nc_margin,
                )
                .map(|s| {
                    format!(
                        "the earliest blow-up sits at x = {:.4} (T = {:.4}), frame center is \
                         x0 = {:.4} (T = {:.4})",
                        s.x_star,
                        s.t_min,
                        frame.x0,
                        frame.t0 + margin
                    )
                })
                .unwrap_or_else(|_| "the blow-up surface could not be resolved".into());
                return Err(Error::Solver(format!(
                    "run keeps saturating at t = {:.4} before the analysis window completes; \
                     {hint}; move x0, raise u_max, or shorten the window",
                    attempt_output.final_state.t
                )));
            }
            _ => {}
        }
        output = Some(attempt_output);
        break;
    }
    let output = output.expect("loop either breaks with output or returns");

    // the main run stops at the end of the analysis window; when that is too
    // shallow for the per-node fits, the surface comes from a coarse run that
    // goes deep into the growth regime instead
    let (surface, t_hat) = match estimate_surface(
        &output.history,
        &cfg.model,
        cfg.diag.nc_window,
        cfg.diag.nc_margin,
    ) {
        Ok(surface) => {
            let t_hat = t_at(&surface.x, &surface.t_blow, frame.x0)?;
            (surface, t_hat)
        }
        Err(_) => surface_run(&coarse_config(cfg, 4))?,
    };
    let nc = non_characteristic_check(&surface, frame.x0, cfg.diag.nc_window, cfg.diag.nc_margin);
    let fit = center_fit(&output, &cfg.model, frame.x0);

    // ---- emit files ----
    io::save(&out_dir.join("run.json"), &cfg.to_json())?;
    let mut index = Vec::new();
    for (k, snap) in output.snapshots.iter().enumerate() {
        let name = match cfg.output.format {
            SnapshotFormat::Csv => format!("snap_{k:05}.csv"),
            SnapshotFormat::Binary => format!("snap_{k:05}.bin"),
        };
        let path = out_dir.join("snapshots").join(&name);
        match cfg.output.format {
            SnapshotFormat::Csv => io::save(&path, &io::write_snapshot_csv(snap))?,
            SnapshotFormat::Binary => io::save_bytes(&path, &io::write_snapshot_bin(snap))?,
        }
        index.push((name, snap.state.t));
    }
    io::save(
        &out_dir.join("snapshots").join("index.csv"),
        &io::write_index(&index),
    )?;

    let slopes: Vec<f64> = (0..surface.x.len())
        .map(|j| {
            let mut slope: f64 = f64::NAN;
            if j > 0 && surface.t_blow[j].is_finite() && surface.t_blow[j - 1].is_finite() {
                slope = ((surface.t_blow[j] - surface.t_blow[j - 1])
                    / (surface.x[j] - surface.x[j - 1]))
                    .abs();
            }
            if j + 1 < surface.x.len()
                && surface.t_blow[j].is_finite()
                && surface.t_blow[j + 1].is_finite()
            {
                let right = ((surface.t_blow[j + 1] - surface.t_blow[j])
                    / (surface.x[j + 1] - surface.x[j]))
                    .abs();
                slope = if slope.is_nan() {
                    right
                } else {
                    slope.max(right)
                };
            }
            slope
        })
        .collect();
    io::save(
        &out_dir.join("surface.csv"),
        &io::write_surface_csv(&surface.x, &surface.t_blow, &slopes),
    )?;

    let frame_json = serde_json::to_string_pretty(&FrameJson {
        x0: frame.x0,
        t0: frame.t0,
        t_hat,
        margin,
    })?;
    io::save(&out_dir.join("frame.json"), &frame_json)?;

    let mut constants = BTreeMap::new();
    constants.insert("slope_max".to_string(), nc.slope);
    constants.insert("t_min".to_string(), surface.t_min);
    constants.insert("t_hat_x0".to_string(), t_hat);
    constants.insert("x_star".to_string(), surface.x_star);
    let verdict = VerdictJson {
        check: "non_characteristic".into(),
        window: (frame.x0 - cfg.diag.nc_window, frame.x0 + cfg.diag.nc_window),
        pass: matches!(nc.verdict, Verdict::NonCharacteristic),
        worst_excess: (nc.slope - (1.0 - cfg.diag.nc_margin)).max(0.0),
        empirical_constants: constants,
    };
    io::save(
        &out_dir.join("sim_verdict.json"),
        &serde_json::to_string_pretty(&verdict)?,
    )?;

    Ok(SimArtifacts {
        grid,
        snapshots: output.snapshots,
        frame,
        t_hat,
        surface,
        nc,
        stop: output.stop,
        center_fit: fit,
    })
}

/// Reload previously written artifacts, or `None` when the directory has no
/// snapshot index yet.
pub fn load_sim_artifacts(cfg: &RunConfig, out_dir: &Path) -> Result<Option<SimArtifacts>> {
    let index_path = out_dir.join("snapshots").join("index.csv");
    let frame_path = out_dir.join("frame.json");
    let surface_path = out_dir.join("surface.csv");
    if !(index_path.exists() && frame_path.exists() && surface_path.exists()) {
        return Ok(None);
    }
    let index = io::parse_index(&std::fs::read_to_string(&index_path)?)?;
    let mut snapshots = Vec::with_capacity(index.len());
    for (name, _t) in &index {
        snapshots.push(load_snapshot_file(&out_dir.join("snapshots").join(name))?);
    }
    let frame_json: FrameJson = serde_json::from_str(&std::fs::read_to_string(&frame_path)?)?;
    // stored snapshots were scheduled for the stored frame; a conflicting
    // fixed frame in the config cannot be honored against these files
    if frame_json.x0 != cfg.frame.x0 {
        return Err(Error::Config(format!(
            "stored snapshots use the frame center x0 = {}, the config asks for {}",
            frame_json.x0, cfg.frame.x0
        )));
    }
    if let T0Choice::Fixed(t0) = cfg.frame.t0 {
        if (t0 - frame_json.t0).abs() > 1e-12 * (1.0 + t0.abs()) {
            return Err(Error::Config(format!(
                "stored snapshots use the scaling time t0 = {}, the config fixes {}",
                frame_json.t0, t0
            )));
        }
    }
    let rows = io::parse_surface_csv(&std::fs::read_to_string(&surface_path)?)?;
    let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let t_blow: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let surface = {
        let (mut star, mut t_min) = (0usize, f64::INFINITY);
        for (j, &t) in t_blow.iter().enumerate() {
            if t < t_min {
                t_min = t;
                star = j;
            }
        }
        BlowupSurface {
            x_star: x.get(star).copied().unwrap_or(frame_json.x0),
            t_min,
            slope_max: f64::NAN,
            non_characteristic: false,
            quality: vec![crate::wave::FitQuality::Ok; x.len()],
            x: x.clone(),
            t_blow: t_blow.clone(),
        }
    };
    let nc = non_characteristic_check(
        &surface,
        frame_json.x0,
        cfg.diag.nc_window,
        cfg.diag.nc_margin,
    );
    let grid = build_grid(cfg)?;
    Ok(Some(SimArtifacts {
        grid,
        snapshots,
        frame: SimilarityFrame {
            x0: frame_json.x0,
            t0: frame_json.t0,
        },
        t_hat: frame_json.t_hat,
        surface,
        nc,
        stop: RunStop::TimeLimit,
        center_fit: None,
    }))
}

// ---------------------------------------------------------------------------
// the energy-report command
// ---------------------------------------------------------------------------

pub struct EnergyOutcome {
    /// Ball slices on the half grid (spacing ds/2).
    pub states: Vec<WState>,
    /// Reports on the half grid with the selected damping constant applied.
    pub reports: Vec<EnergyReport>,
    pub theta: f64,
    /// Monotonicity verdict on the ds grid.
    pub mono: MonotonicityReport,
    /// `(s_mid, residual)` of the energy balance per ds pair.
    pub balance: Vec<(f64, f64)>,
    pub bounds: BoundsReport,
    /// Max Hardy ratio over the window at the configured quadrature order
    /// and at double the order.
    pub hardy: (f64, f64),
    pub sigma_max: f64,
    /// Unit-window averages of the `|w|^{p+1}` mass.
    pub lp1_windows: Vec<f64>,
    pub track: Vec<RatePoint>,
    pub s0: f64,
    pub alpha: f64,
}

impl EnergyOutcome {
    /// Reports on the ds grid (every other half-grid entry).
    pub fn reports_main(&self) -> Vec<EnergyReport> {
        self.reports.iter().step_by(2).copied().collect()
    }

    pub fn any_flagged(&self) -> bool {
        self.reports.iter().any(blowup_flag)
    }
}

pub fn energy_series(art: &SimArtifacts, cfg: &RunConfig) -> Result<EnergyOutcome> {
    let ctx = EnergyCtx::new(&cfg.model, art.grid.kind, cfg.diag.quad_n)?;
    let ctx_fine = EnergyCtx::new(&cfg.model, art.grid.kind, 2 * cfg.diag.quad_n)?;
    let y = ball_nodes(art.grid.kind, cfg.diag.eta, cfg.diag.ny);
    let times = report_times(&cfg.diag);

    // sort snapshots by time for scheduling lookups
    let mut by_time: Vec<&Snapshot> = art.snapshots.iter().collect();
    by_time.sort_by(|a, b| a.state.t.total_cmp(&b.state.t));

    let mut states = Vec::with_capacity(times.len());
    for &s in &times {
        let t_j = art.frame.t0 - (-s).exp();
        let snap = by_time
            .binary_search_by(|probe| probe.state.t.total_cmp(&t_j))
            .ok()
            .map(|idx| by_time[idx])
            .or_else(|| {
                by_time
                    .iter()
                    .find(|probe| (probe.state.t - t_j).abs() <= 1e-11 * (1.0 + t_j.abs()))
                    .copied()
            })
            .ok_or_else(|| {
                Error::Transform(format!("no stored snapshot matches s = {s} (t = {t_j})"))
            })?;
        states.push(to_similarity(snap, &art.frame, &cfg.model, &y)?);
    }

    let raw: Vec<EnergyReport> = states
        .iter()
        .map(|st| ctx.report(st, 0.0))
        .collect::<Result<_>>()?;

    let main_raw: Vec<EnergyReport> = raw.iter().step_by(2).copied().collect();
    let theta = match cfg.diag.mono.theta {
        ThetaChoice::Fixed(t) => t,
        ThetaChoice::Auto(_) => {
            choose_theta(&main_raw, &cfg.model, ctx.consts.alpha, &cfg.diag.mono)?
        }
    };
    let reports: Vec<EnergyReport> = raw
        .iter()
        .map(|r| {
            let mut adj = *r;
            adj.h = r.h_with_theta(&cfg.model, theta);
            adj.theta = theta;
            adj
        })
        .collect();

    let main: Vec<EnergyReport> = reports.iter().step_by(2).copied().collect();
    let mono = monotonicity_check(&main, ctx.consts.alpha, &cfg.diag.mono)?;

    let mut balance = Vec::new();
    for k in 0..main.len() - 1 {
        let mid = &reports[2 * k + 1];
        let sigma_mid = mid.sigma01 + mid.sigma02;
        let r = energy_balance_residual(&main[k], &main[k + 1], mid.d, sigma_mid, ctx.consts.alpha);
        balance.push((mid.s, r));
    }

    let s0 = -art.frame.t0.ln();
    let lo = (s0 + 1.0).max(cfg.diag.s_lo);
    let hi = (s0 + 6.0).min(cfg.diag.s_hi);
    let windowed: Vec<EnergyReport> = main
        .iter()
        .filter(|r| r.s >= lo - 1e-9 && r.s <= hi + 1e-9)
        .copied()
        .collect();
    let bounds = window_bounds(if windowed.len() >= 2 {
        &windowed
    } else {
        &main
    })?;

    let mut hardy = (0.0f64, 0.0f64);
    for st in states.iter().step_by(2) {
        hardy.0 = hardy.0.max(ctx.hardy_ratio(st)?);
        hardy.1 = hardy.1.max(ctx_fine.hardy_ratio(st)?);
    }
    let sigma_max = reports
        .iter()
        .map(|r| sigma0_margin(r, &cfg.model))
        .fold(0.0f64, f64::max);

    let mut lp1_windows = Vec::new();
    let per_unit = (1.0 / cfg.diag.ds).round() as usize;
    if ((1.0 / cfg.diag.ds) - per_unit as f64).abs() < 1e-9 && per_unit >= 2 {
        let mut start = 0usize;
        while start + per_unit < main.len() {
            lp1_windows.push(lp1_time_average(&main[start..=start + per_unit])?);
            start += per_unit;
        }
    }

    let track = rate_track(
        &art.snapshots,
        art.t_hat,
        art.frame.x0,
        &cfg.model,
        cfg.diag.mono.s1,
    )?;

    Ok(EnergyOutcome {
        states,
        reports,
        theta,
        mono,
        balance,
        bounds,
        hardy,
        sigma_max,
        lp1_windows,
        track,
        s0,
        alpha: ctx.consts.alpha,
    })
}

fn write_energy_outputs(out: &EnergyOutcome, cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    io::save(
        &out_dir.join("energy_reports.csv"),
        &io::write_energy_csv(&out.reports),
    )?;

    let mut constants = BTreeMap::new();
    constants.insert("theta".into(), out.theta);
    constants.insert("alpha".into(), out.alpha);
    let mono_verdict = VerdictJson {
        check: "h_monotonicity".into(),
        window: (cfg.diag.s_lo, cfg.diag.s_hi),
        pass: out.mono.pass(),
        worst_excess: out.mono.worst_excess,
        empirical_constants: constants,
    };
    io::save(
        &out_dir.join("verdict_monotonicity.json"),
        &serde_json::to_string_pretty(&mono_verdict)?,
    )?;

    let mut constants = BTreeMap::new();
    constants.insert("hardy_max".into(), out.hardy.0);
    constants.insert("hardy_max_refined".into(), out.hardy.1);
    constants.insert("sigma_margin_max".into(), out.sigma_max);
    constants.insert("eps0_emp".into(), out.bounds.eps0_emp);
    constants.insert("k_emp".into(), out.bounds.k_emp);
    constants.insert("e_min".into(), out.bounds.e_min);
    constants.insert("e_max".into(), out.bounds.e_max);
    constants.insert(
        "cumulative_dissipation".into(),
        out.bounds.cumulative_dissipation,
    );
    let balance_max = out.balance.iter().map(|b| b.1.abs()).fold(0.0f64, f64::max);
    constants.insert("balance_residual_max".into(), balance_max);
    if let (Some(lo), Some(hi)) = (
        out.track.iter().map(|p| p.q).min_by(f64::total_cmp),
        out.track.iter().map(|p| p.q).max_by(f64::total_cmp),
    ) {
        constants.insert("q_min".into(), lo);
        constants.insert("q_max".into(), hi);
    }
    let diag_verdict = VerdictJson {
        check: "bounds_and_constants".into(),
        window: out.bounds.window,
        pass: out.bounds.eps0_emp > 0.0 && out.bounds.k_emp.is_finite(),
        worst_excess: 0.0,
        empirical_constants: constants,
    };
    io::save(
        &out_dir.join("diagnostics.json"),
        &serde_json::to_string_pretty(&diag_verdict)?,
    )?;

    let s: Vec<f64> = out.reports.iter().map(|r| r.s).collect();
    let plot = |name: &str, ys: Vec<f64>| -> Result<()> {
        io::save(
            &out_dir.join("plots").join(format!("{name}.dat")),
            &io::write_plot_data(&s, &ys),
        )
    };
    plot("s_vs_H", out.reports.iter().map(|r| r.h).collect())?;
    plot("s_vs_D", out.reports.iter().map(|r| r.d).collect())?;
    plot("s_vs_lp1", out.reports.iter().map(|r| r.lp1).collect())?;
    io::save(
        &out_dir.join("plots").join("plot.gp"),
        &io::write_plot_stub(&["s_vs_H", "s_vs_D", "s_vs_lp1"]),
    )?;

    if cfg.output.dump_wstates {
        for (k, st) in out.states.iter().enumerate() {
            let file = io::WStateFile {
                s: st.s,
                x0: st.frame.x0,
                t0: st.frame.t0,
                p: cfg.model.p,
                a: cfg.model.a,
                y: st.y.clone(),
                w: st.w.clone(),
                ws: st.ws.clone(),
            };
            io::save(
                &out_dir.join("wstates").join(format!("ws_{k:05}.csv")),
                &io::write_wstate_csv(&file),
            )?;
        }
    }
    Ok(())
}

pub fn run_energy_report(cfg: &RunConfig, out_dir: &Path) -> Result<EnergyOutcome> {
    cfg.validate()?;
    let art = match load_sim_artifacts(cfg, out_dir)? {
        Some(art) => art,
        None => run_simulate(cfg, out_dir)?,
    };
    let outcome = energy_series(&art, cfg)?;
    write_energy_outputs(&outcome, cfg, out_dir)?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub p: f64,
    pub a: f64,
    pub amplitude: f64,
    pub exponent_est: f64,
    pub kappa_est: f64,
    pub theta: f64,
    pub monotone: bool,
    pub q_ratio: f64,
    pub status: String,
}

pub fn run_sweep(sweep: &SweepConfig, out_dir: &Path) -> Result<Vec<SweepRow>> {
    sweep.validate()?;
    let runs = sweep.expand();
    let threads = {
        let env_cap = std::env::var("BLOWUP_LAB_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .unwrap_or(usize::MAX);
        sweep.parallelism.min(env_cap).min(runs.len()).max(1)
    };

    let rows: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; runs.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= runs.len() {
                    break;
                }
                let cfg = &runs[idx];
                let amp = match &cfg.init {
                    InitConfig::Bump { amplitude, .. } => *amplitude,
                    InitConfig::OdeManifold { v0 } => *v0,
                    _ => f64::NAN,
                };
                let run_dir = out_dir.join(format!(
                    "run_{idx:03}_p{}_a{}_amp{}",
                    cfg.model.p, cfg.model.a, amp
                ));
                let row = match run_one_sweep_entry(cfg, &run_dir) {
                    Ok(row) => row,
                    Err(err) => SweepRow {
                        p: cfg.model.p,
                        a: cfg.model.a,
                        amplitude: amp,
                        exponent_est: f64::NAN,
                        kappa_est: f64::NAN,
                        theta: f64::NAN,
                        monotone: false,
                        q_ratio: f64::NAN,
                        status: format!("error: {err}"),
                    },
                };
                rows.lock().unwrap()[idx] = Some(row);
            });
        }
    });
    let rows: Vec<SweepRow> = rows.into_inner().unwrap().into_iter().flatten().collect();

    let mut summary = String::from(
        "p,a,amplitude,exponent_est,kappa_est,theta,monotonicity_pass,q_envelope_ratio,status\n",
    );
    for row in &rows {
        use std::fmt::Write as _;
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{},{}",
            row.p,
            row.a,
            row.amplitude,
            row.exponent_est,
            row.kappa_est,
            row.theta,
            row.monotone,
            row.q_ratio,
            row.status
        );
    }
    io::save(&out_dir.join("summary.csv"), &summary)?;

    let failures = rows.iter().filter(|r| r.status != "ok").count();
    if failures > 0 {
        return Err(Error::Solver(format!(
            "{failures} of {} sweep runs failed (see {})",
            rows.len(),
            out_dir.join("summary.csv").display()
        )));
    }
    Ok(rows)
}

fn run_one_sweep_entry(cfg: &RunConfig, run_dir: &Path) -> Result<SweepRow> {
    let art = run_simulate(cfg, run_dir)?;
    let outcome = energy_series(&art, cfg)?;
    write_energy_outputs(&outcome, cfg, run_dir)?;
    let (q_lo, q_hi) = outcome
        .track
        .iter()
        .fold((f64::INFINITY, 0.0f64), |acc, p| {
            (acc.0.min(p.q), acc.1.max(p.q))
        });
    let amp = match &cfg.init {
        InitConfig::Bump { amplitude, .. } => *amplitude,
        InitConfig::OdeManifold { v0 } => *v0,
        _ => f64::NAN,
    };
    let (exponent, kappa) = art
        .center_fit
        .map(|f| (f.exponent_est, f.kappa_est))
        .unwrap_or((f64::NAN, f64::NAN));
    Ok(SweepRow {
        p: cfg.model.p,
        a: cfg.model.a,
        amplitude: amp,
        exponent_est: exponent,
        kappa_est: kappa,
        theta: outcome.theta,
        monotone: outcome.mono.pass(),
        q_ratio: if q_lo > 0.0 { q_hi / q_lo } else { f64::NAN },
        status: "ok".into(),
    })
}

/// Exit-code contract of the command line: 0 ok, 2 config error,
/// 3 no blow-up, 4 numerical failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParams(_) | Error::Parse { .. } | Error::Json(_) => 2,
        Error::NoBlowup(_) => 3,
        _ => 4,
    }
}

pub fn resolve_out_dir(cfg_dir: &str, cli_out: Option<&PathBuf>) -> PathBuf {
    cli_out.cloned().unwrap_or_else(|| PathBuf::from(cfg_dir))
}
