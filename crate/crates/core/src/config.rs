//! Plain-text run configuration: `section.key = value` lines, `#` comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::classical::{ArchScan, Carrier, Initialization, ReturnDetector};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::potential::{PotentialSpec, DEFAULT_A0, DEFAULT_L};
use crate::pulse::PulseSpec;
use crate::spectral::{default_sigma, Window};
use crate::tdse::{Absorber, PropagationSchedule};

/// Ground-state energy used for harmonic energies of classical returns unless
/// overridden.
pub const REFERENCE_EPSILON0: f64 = -0.66995;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_min: -800.0,
            x_max: 800.0,
            n_points: 16384,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Softcore,
    Truncated,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "softcore" | "softcore-long" | "long" => Some(Variant::Softcore),
            "truncated" | "softcore-truncated" => Some(Variant::Truncated),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Variant::Softcore => "softcore",
            Variant::Truncated => "truncated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialConfig {
    pub variant: Variant,
    pub a0: f64,
    pub l: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Softcore,
            a0: DEFAULT_A0,
            l: DEFAULT_L,
        }
    }
}

impl PotentialConfig {
    pub fn spec(&self) -> Result<PotentialSpec> {
        self.spec_for(self.variant)
    }

    /// The configured taper applied to either variant.
    pub fn spec_for(&self, variant: Variant) -> Result<PotentialSpec> {
        match variant {
            Variant::Softcore => Ok(PotentialSpec::SoftcoreLong),
            Variant::Truncated => PotentialSpec::truncated(self.a0, self.l),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    /// `None`: `tau0 / 4096`.
    pub dt: Option<f64>,
    /// `None`: end of the pulse.
    pub t_end: Option<f64>,
    pub snapshot_stride: usize,
    pub record_stride: usize,
    pub absorber: bool,
    pub absorber_width: f64,
    pub absorber_exponent: f64,
    /// Write every snapshot to a `BHH1` stream.
    pub write_snapshots: bool,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let a = Absorber::default();
        Self {
            dt: None,
            t_end: None,
            snapshot_stride: 8,
            record_stride: 1,
            absorber: true,
            absorber_width: a.width,
            absorber_exponent: a.exponent,
            write_snapshots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BohmianConfig {
    pub x0: Vec<f64>,
    pub rho_floor: f64,
}

/// 61 starts uniformly spaced over `[-3, 3]` plus the central and the
/// `x0 = 1.8` trajectories.
pub fn default_x0() -> Vec<f64> {
    let mut v: Vec<f64> = (0..61).map(|i| -3.0 + 0.1 * i as f64).collect();
    v.push(0.0);
    v.push(1.8);
    v
}

impl Default for BohmianConfig {
    fn default() -> Self {
        Self {
            x0: default_x0(),
            rho_floor: crate::bohmian::DEFAULT_RHO_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalConfig {
    pub n_points: usize,
    pub excursion_cycles: f64,
    pub x_exit: f64,
    /// `None`: `tau0 / 8192`.
    pub dt: Option<f64>,
    pub initialization: Initialization,
    pub epsilon0: f64,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            n_points: 4000,
            excursion_cycles: 1.6,
            x_exit: ReturnDetector::DEFAULT_X_EXIT,
            dt: None,
            initialization: Initialization::EscapeVelocity { sign: 1.0 },
            epsilon0: REFERENCE_EPSILON0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    /// `None`: `1 / (3 omega)`.
    pub sigma: Option<f64>,
    pub window: Window,
    pub t_points_per_cycle: usize,
    pub harmonic_max: f64,
    pub harmonic_step: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            sigma: None,
            window: Window::Hann,
            t_points_per_cycle: 40,
            harmonic_max: 80.0,
            harmonic_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    pub pulse: PulseSpec,
    pub schedule: ScheduleConfig,
    pub bohmian: BohmianConfig,
    pub classical: ClassicalConfig,
    pub spectral: SpectralConfig,
    /// Number of bound states reported by the eigen pipeline.
    pub eigen_states: usize,
    pub output: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            potential: PotentialConfig::default(),
            pulse: PulseSpec::default(),
            schedule: ScheduleConfig::default(),
            bohmian: BohmianConfig::default(),
            classical: ClassicalConfig::default(),
            spectral: SpectralConfig::default(),
            eigen_states: 7,
            output: PathBuf::from("out"),
            seed: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "grid.x_min",
    "grid.x_max",
    "grid.n_points",
    "potential.variant",
    "potential.a0",
    "potential.L",
    "pulse.E0",
    "pulse.omega",
    "pulse.n_ramp",
    "pulse.n_flat",
    "schedule.dt",
    "schedule.t_end",
    "schedule.snapshot_stride",
    "schedule.record_stride",
    "schedule.absorber",
    "schedule.absorber_width",
    "schedule.absorber_exponent",
    "schedule.write_snapshots",
    "bohmian.x0",
    "bohmian.rho_floor",
    "classical.n_points",
    "classical.excursion_cycles",
    "classical.x_exit",
    "classical.dt",
    "classical.initialization",
    "classical.epsilon0",
    "spectral.sigma",
    "spectral.window",
    "spectral.t_points_per_cycle",
    "spectral.harmonic_max",
    "spectral.harmonic_step",
    "eigen.n_states",
    "output.dir",
    "run.seed",
];

impl RunConfig {
    pub fn grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.grid.x_min, self.grid.x_max, self.grid.n_points)
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        self.potential.spec()
    }

    pub fn carrier(&self) -> Carrier {
        Carrier::from(&self.pulse)
    }

    pub fn propagation_schedule(&self) -> PropagationSchedule {
        let mut s = PropagationSchedule::for_pulse(&self.pulse);
        if let Some(dt) = self.schedule.dt {
            s.dt = dt;
        }
        if let Some(t) = self.schedule.t_end {
            s.t_end = t;
        }
        s.snapshot_stride = self.schedule.snapshot_stride;
        s.record_stride = self.schedule.record_stride;
        s.absorber = self.schedule.absorber.then_some(Absorber {
            width: self.schedule.absorber_width,
            exponent: self.schedule.absorber_exponent,
        });
        s
    }

    pub fn arch_scan(&self) -> ArchScan {
        let mut scan = ArchScan::for_carrier(&self.carrier());
        scan.n_points = self.classical.n_points;
        scan.max_excursion_cycles = self.classical.excursion_cycles;
        scan.x_exit = self.classical.x_exit;
        if let Some(dt) = self.classical.dt {
            scan.dt = dt;
        }
        scan.initialization = self.classical.initialization;
        scan
    }

    pub fn sigma(&self) -> f64 {
        self.spectral.sigma.unwrap_or_else(|| default_sigma(self.pulse.omega))
    }

    /// Checks every nested invariant; the error names the violated one.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.potential.spec()?;
        self.pulse.validate()?;
        self.propagation_schedule().validate(&grid)?;
        if self.bohmian.x0.is_empty() {
            return Err(Error::Config("bohmian.x0 must list at least one start".into()));
        }
        if let Some(x) = self.bohmian.x0.iter().find(|x| !grid.contains(**x)) {
            return Err(Error::Config(format!("bohmian.x0 entry {x} lies outside the grid")));
        }
        if !(self.bohmian.rho_floor > 0.0) {
            return Err(Error::Config("bohmian.rho_floor must be > 0".into()));
        }
        let c = &self.classical;
        if c.n_points == 0 {
            return Err(Error::Config("classical.n_points must be >= 1".into()));
        }
        if !(c.excursion_cycles > 0.0 && c.x_exit > 0.0) {
            return Err(Error::Config(
                "classical.excursion_cycles and classical.x_exit must be > 0".into(),
            ));
        }
        if matches!(c.dt, Some(dt) if !(dt > 0.0)) {
            return Err(Error::Config("classical.dt must be > 0".into()));
        }
        if !(c.epsilon0 < 0.0) {
            return Err(Error::Config("classical.epsilon0 must be a bound energy < 0".into()));
        }
        let s = &self.spectral;
        if !(self.sigma() > 0.0) {
            return Err(Error::Config("spectral.sigma must be > 0".into()));
        }
        if s.t_points_per_cycle == 0 || !(s.harmonic_max > 0.0 && s.harmonic_step > 0.0) {
            return Err(Error::Config(
                "spectral lattice needs t_points_per_cycle >= 1, harmonic_max > 0 and harmonic_step > 0"
                    .into(),
            ));
        }
        if self.eigen_states == 0 {
            return Err(Error::Config("eigen.n_states must be >= 1".into()));
        }
        Ok(())
    }

    /// Every key with its effective value, for manifests.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("grid.x_min", self.grid.x_min.to_string());
        put("grid.x_max", self.grid.x_max.to_string());
        put("grid.n_points", self.grid.n_points.to_string());
        put("potential.variant", self.potential.variant.label().into());
        put("potential.a0", self.potential.a0.to_string());
        put("potential.L", self.potential.l.to_string());
        put("pulse.E0", self.pulse.e0.to_string());
        put("pulse.omega", self.pulse.omega.to_string());
        put("pulse.n_ramp", self.pulse.n_ramp.to_string());
        put("pulse.n_flat", self.pulse.n_flat.to_string());
        let sched = self.propagation_schedule();
        put("schedule.dt", sched.dt.to_string());
        put("schedule.t_end", sched.t_end.to_string());
        put("schedule.snapshot_stride", sched.snapshot_stride.to_string());
        put("schedule.record_stride", sched.record_stride.to_string());
        put("schedule.absorber", on_off(self.schedule.absorber).into());
        put("schedule.absorber_width", self.schedule.absorber_width.to_string());
        put("schedule.absorber_exponent", self.schedule.absorber_exponent.to_string());
        put("schedule.write_snapshots", on_off(self.schedule.write_snapshots).into());
        let x0: Vec<String> = self.bohmian.x0.iter().map(|x| x.to_string()).collect();
        put("bohmian.x0", x0.join(","));
        put("bohmian.rho_floor", self.bohmian.rho_floor.to_string());
        let scan = self.arch_scan();
        put("classical.n_points", scan.n_points.to_string());
        put("classical.excursion_cycles", scan.max_excursion_cycles.to_string());
        put("classical.x_exit", scan.x_exit.to_string());
        put("classical.dt", scan.dt.to_string());
        let init = match self.classical.initialization {
            Initialization::EscapeVelocity { .. } => "escape",
            Initialization::TurningPoint => "turning-point",
        };
        put("classical.initialization", init.into());
        put("classical.epsilon0", self.classical.epsilon0.to_string());
        put("spectral.sigma", self.sigma().to_string());
        let window = match self.spectral.window {
            Window::None => "none",
            Window::Hann => "hann",
        };
        put("spectral.window", window.into());
        put("spectral.t_points_per_cycle", self.spectral.t_points_per_cycle.to_string());
        put("spectral.harmonic_max", self.spectral.harmonic_max.to_string());
        put("spectral.harmonic_step", self.spectral.harmonic_step.to_string());
        put("eigen.n_states", self.eigen_states.to_string());
        put("output.dir", self.output.display().to_string());
        put("run.seed", self.seed.to_string());
        m
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "on" | "true" | "yes" | "1" => Some(true),
        "off" | "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

/// Parses config text; `path` is only used in error messages.
pub fn parse_config_str(text: &str, path: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `section.key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown key `{key}`")));
        }
        if let Some(prev) = seen.insert(key.to_string(), line_no) {
            return Err(err(format!("duplicate key `{key}` (first set on line {prev})")));
        }
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| err(format!("`{key}` expects a number, got `{value}`")))
        };
        let count = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|_| err(format!("`{key}` expects a non-negative integer, got `{value}`")))
        };
        let flag = || -> Result<bool> {
            parse_bool(value).ok_or_else(|| err(format!("`{key}` expects on/off, got `{value}`")))
        };
        match key {
            "grid.x_min" => cfg.grid.x_min = num()?,
            "grid.x_max" => cfg.grid.x_max = num()?,
            "grid.n_points" => cfg.grid.n_points = count()?,
            "potential.variant" => {
                cfg.potential.variant = Variant::parse(value)
                    .ok_or_else(|| err(format!("unknown potential variant `{value}`")))?
            }
            "potential.a0" => cfg.potential.a0 = num()?,
            "potential.L" => cfg.potential.l = num()?,
            "pulse.E0" => cfg.pulse.e0 = num()?,
            "pulse.omega" => cfg.pulse.omega = num()?,
            "pulse.n_ramp" => cfg.pulse.n_ramp = num()?,
            "pulse.n_flat" => cfg.pulse.n_flat = num()?,
            "schedule.dt" => cfg.schedule.dt = Some(num()?),
            "schedule.t_end" => cfg.schedule.t_end = Some(num()?),
            "schedule.snapshot_stride" => cfg.schedule.snapshot_stride = count()?,
            "schedule.record_stride" => cfg.schedule.record_stride = count()?,
            "schedule.absorber" => cfg.schedule.absorber = flag()?,
            "schedule.absorber_width" => cfg.schedule.absorber_width = num()?,
            "schedule.absorber_exponent" => cfg.schedule.absorber_exponent = num()?,
            "schedule.write_snapshots" => cfg.schedule.write_snapshots = flag()?,
            "bohmian.x0" => {
                cfg.bohmian.x0 = if value == "default" {
                    default_x0()
                } else {
                    value
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| err(format!("`bohmian.x0` expects a comma list, got `{value}`")))?
                }
            }
            "bohmian.rho_floor" => cfg.bohmian.rho_floor = num()?,
            "classical.n_points" => cfg.classical.n_points = count()?,
            "classical.excursion_cycles" => cfg.classical.excursion_cycles = num()?,
            "classical.x_exit" => cfg.classical.x_exit = num()?,
            "classical.dt" => cfg.classical.dt = Some(num()?),
            "classical.initialization" => {
                cfg.classical.initialization = match value {
                    "escape" => Initialization::EscapeVelocity { sign: 1.0 },
                    "turning-point" => Initialization::TurningPoint,
                    _ => return Err(err(format!("unknown initialization `{value}`"))),
                }
            }
            "classical.epsilon0" => cfg.classical.epsilon0 = num()?,
            "spectral.sigma" => cfg.spectral.sigma = Some(num()?),
            "spectral.window" => {
                cfg.spectral.window = match value {
                    "none" => Window::None,
                    "hann" => Window::Hann,
                    _ => return Err(err(format!("unknown window `{value}`"))),
                }
            }
            "spectral.t_points_per_cycle" => cfg.spectral.t_points_per_cycle = count()?,
            "spectral.harmonic_max" => cfg.spectral.harmonic_max = num()?,
            "spectral.harmonic_step" => cfg.spectral.harmonic_step = num()?,
            "eigen.n_states" => cfg.eigen_states = count()?,
            "output.dir" => cfg.output = PathBuf::from(value),
            "run.seed" => {
                cfg.seed = value
                    .parse()
                    .map_err(|_| err(format!("`run.seed` expects an integer, got `{value}`")))?
            }
            _ => unreachable!("key list and match arms disagree on `{key}`"),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, path)
}
