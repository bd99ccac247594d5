//! Run and sweep configuration: versioned JSON with strict validation.

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsConfig;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::wave::{Boundary, GridKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub model: ModelParams,
    pub grid: GridConfig,
    pub init: InitConfig,
    #[serde(default)]
    pub frame: FrameConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub diag: DiagSettings,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub kind: GridKind,
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
}

fn default_boundary() -> Boundary {
    Boundary::Periodic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Zero,
    Bump {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    OdeManifold {
        v0: f64,
    },
    File {
        path: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum T0Choice {
    Auto(AutoWord),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoWord {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameConfig {
    pub x0: f64,
    pub t0: T0Choice,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            x0: 0.0,
            t0: T0Choice::Auto(AutoWord::Auto),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Initial step for the space-independent integrator.
    pub dt0: f64,
    /// Threshold for the space-independent integrator.
    pub ode_threshold: f64,
    /// Grid CFL fraction (dt = cfl·dx), at most 0.5.
    pub cfl: f64,
    /// Source-stiffness bound triggering step halving.
    pub source_cfl: f64,
    /// Saturation threshold on `max|u|`.
    pub u_max: f64,
    pub max_steps: usize,
    /// Full snapshots every time `max|u|` grows by this factor.
    pub snapshot_growth: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            dt0: 1e-3,
            ode_threshold: 1e8,
            cfl: 0.4,
            source_cfl: 0.2,
            u_max: 1e7,
            max_steps: 4_000_000,
            snapshot_growth: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagSettings {
    /// Diagnostics window in similarity time and its spacing.
    pub s_lo: f64,
    pub s_hi: f64,
    pub ds: f64,
    /// Interior cutoff: ball fields live on `|y| ≤ 1-eta`.
    pub eta: f64,
    /// Ball nodes for transforms.
    pub ny: usize,
    /// Quadrature order for the functionals.
    pub quad_n: usize,
    /// Window and slope margin for the non-characteristic verdict.
    pub nc_window: f64,
    pub nc_margin: f64,
    #[serde(flatten)]
    pub mono: DiagnosticsConfig,
}

impl Default for DiagSettings {
    fn default() -> Self {
        DiagSettings {
            s_lo: 2.0,
            s_hi: 6.0,
            ds: 0.05,
            eta: 0.05,
            ny: 257,
            quad_n: 64,
            nc_window: 0.1,
            nc_margin: 0.05,
            mono: DiagnosticsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub format: SnapshotFormat,
    pub dump_wstates: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            format: SnapshotFormat::Csv,
            dump_wstates: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema version {} (this build reads {SCHEMA_VERSION})",
                self.schema
            )));
        }
        self.model
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let g = &self.grid;
        if g.nx < 16 {
            return Err(Error::Config(format!(
                "nx must be at least 16, got {}",
                g.nx
            )));
        }
        if !(g.x_max > g.x_min) {
            return Err(Error::Config("grid needs x_max > x_min".into()));
        }
        match g.kind {
            GridKind::Radial => {
                if g.x_min != 0.0 {
                    return Err(Error::Config("radial grids must start at r = 0".into()));
                }
                if g.boundary == Boundary::Periodic {
                    return Err(Error::Config(
                        "radial grids use the absorbing boundary".into(),
                    ));
                }
                if self.frame.x0 != 0.0 {
                    return Err(Error::Config("radial frames must sit at the origin".into()));
                }
            }
            GridKind::Line => {
                if self.model.n != 1 {
                    return Err(Error::Config(
                        "line grids are one-dimensional (model.n = 1)".into(),
                    ));
                }
            }
        }
        match &self.init {
            InitConfig::Bump {
                amplitude, width, ..
            } => {
                if !(*width > 0.0) || !amplitude.is_finite() {
                    return Err(Error::Config("bump preset needs a positive width".into()));
                }
            }
            InitConfig::OdeManifold { v0 } => {
                if !(*v0 > 0.0) {
                    return Err(Error::Config("manifold preset needs v0 > 0".into()));
                }
            }
            InitConfig::File { path } => {
                if path.is_empty() {
                    return Err(Error::Config("file preset needs a path".into()));
                }
            }
            InitConfig::Zero => {}
        }
        if let T0Choice::Fixed(t0) = self.frame.t0 {
            if !(t0 > 0.0 && t0.is_finite()) {
                return Err(Error::Config(format!(
                    "frame t0 must be positive, got {t0}"
                )));
            }
        }
        let s = &self.solver;
        if !(s.dt0 > 0.0) || !(s.u_max > 1.0) || !(s.ode_threshold > 1.0) {
            return Err(Error::Config("solver settings must be positive".into()));
        }
        if !(s.cfl > 0.0 && s.cfl <= 0.5) {
            return Err(Error::Config(format!(
                "cfl must lie in (0, 0.5], got {}",
                s.cfl
            )));
        }
        if !(s.source_cfl > 0.0 && s.source_cfl <= 1.0) {
            return Err(Error::Config("source_cfl must lie in (0, 1]".into()));
        }
        if !(s.snapshot_growth > 1.0) {
            return Err(Error::Config("snapshot_growth must exceed 1".into()));
        }
        let d = &self.diag;
        d.mono.validate()?;
        if !(d.s_lo >= 1.0 && d.s_hi > d.s_lo && d.ds > 0.0) {
            return Err(Error::Config(
                "diagnostics need 1 <= s_lo < s_hi and a positive ds (frames are normalized so s >= 1)"
                    .into(),
            ));
        }
        if ((d.s_hi - d.s_lo) / d.ds).fract().abs() > 1e-9
            && (1.0 - ((d.s_hi - d.s_lo) / d.ds).fract()).abs() > 1e-9
        {
            return Err(Error::Config(
                "ds must divide the window s_hi - s_lo".into(),
            ));
        }
        if !(d.eta > 0.0 && d.eta < 0.5) {
            return Err(Error::Config("eta must lie in (0, 0.5)".into()));
        }
        if d.ny < 16 || d.quad_n < 8 {
            return Err(Error::Config("ny >= 16 and quad_n >= 8 required".into()));
        }
        if !(d.nc_window > 0.0) || !(d.nc_margin > 0.0 && d.nc_margin < 1.0) {
            return Err(Error::Config(
                "bad non-characteristic check window/margin".into(),
            ));
        }
        if self.output.dir.is_empty() {
            return Err(Error::Config("output dir must not be empty".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepAxes {
    pub p: Vec<f64>,
    pub a: Vec<f64>,
    pub amplitude: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema: u32,
    pub base: RunConfig,
    #[serde(default)]
    pub axes: SweepAxes,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_parallelism() -> usize {
    1
}

fn default_cap() -> usize {
    64
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema version {}",
                self.schema
            )));
        }
        self.base.validate()?;
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        let size = self.size();
        if size == 0 {
            return Err(Error::Config("sweep axes produce no runs".into()));
        }
        if size > self.cap {
            return Err(Error::Config(format!(
                "sweep size {size} exceeds the configured cap {}",
                self.cap
            )));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.axis_p().len() * self.axis_a().len() * self.axis_amp().len()
    }

    pub fn axis_p(&self) -> Vec<f64> {
        if self.axes.p.is_empty() {
            vec![self.base.model.p]
        } else {
            self.axes.p.clone()
        }
    }

    pub fn axis_a(&self) -> Vec<f64> {
        if self.axes.a.is_empty() {
            vec![self.base.model.a]
        } else {
            self.axes.a.clone()
        }
    }

    pub fn axis_amp(&self) -> Vec<f64> {
        if self.axes.amplitude.is_empty() {
            let amp = match &self.base.init {
                InitConfig::Bump { amplitude, .. } => *amplitude,
                InitConfig::OdeManifold { v0 } => *v0,
                _ => 1.0,
            };
            vec![amp]
        } else {
            self.axes.amplitude.clone()
        }
    }

    /// Materialize the run list in deterministic (p, a, amplitude) order.
    pub fn expand(&self) -> Vec<RunConfig> {
        let mut runs = Vec::new();
        for &p in &self.axis_p() {
            for &a in &self.axis_a() {
                for &amp in &self.axis_amp() {
                    let mut cfg = self.base.clone();
                    cfg.model.p = p;
                    cfg.model.a = a;
                    match &mut cfg.init {
                        InitConfig::Bump { amplitude, .. } => *amplitude = amp,
                        InitConfig::OdeManifold { v0 } => *v0 = amp,
                        _ => {}
                    }
                    runs.push(cfg);
                }
            }
        }
        runs
    }
}

/// A ready-to-edit sample configuration.
pub fn example_run_config() -> RunConfig {
    RunConfig {
        schema: SCHEMA_VERSION,
        model: ModelParams {
            p: 3.0,
            a: 2.0,
            m: 1.0,
            n: 1,
            perturbed: true,
        },
        grid: GridConfig {
            kind: GridKind::Line,
            x_min: -0.75,
            x_max: 0.75,
            nx: 3000,
            boundary: Boundary::Periodic,
        },
        init: InitConfig::Bump {
            amplitude: 7.5,
            width: 0.45,
            center: 0.0,
        },
        frame: FrameConfig::default(),
        solver: SolverSettings::default(),
        diag: DiagSettings {
            s_hi: 4.0,
            ..Default::default()
        },
        output: OutputConfig::default(),
    }
}
