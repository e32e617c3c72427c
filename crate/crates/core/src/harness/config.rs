//! Plain-text `section.key = value` configuration.
//!
//! Lines starting with `#` are comments; lists are comma separated. Unknown
//! keys are rejected so that typos surface immediately.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::compressible::PhysParams;
use crate::constitutive::{PotentialSpec, PressureLaw, ViscosityLaw};
use crate::error::{Error, Result};
use crate::grid::{BcMode, Grid};
use crate::linsolve::CgOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityProfile {
    /// Density in hydrostatic balance with the initial capillary and
    /// inertial forces.
    Balanced,
    Cosine,
    Sine,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VelocityProfile {
    None,
    /// Single cell vortex from a `sin^2 sin^2` stream function (2D only).
    Vortex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConcentrationProfile {
    TanhStripe,
    Cosine,
}

macro_rules! named_enum {
    ($ty:ty, $what:literal, $($name:literal => $variant:expr),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    _ => Err(format!(concat!("unknown ", $what, " '{}' (expected one of: {})"), s, [$($name),+].join(", "))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

named_enum!(DensityProfile, "density profile",
    "balanced" => DensityProfile::Balanced,
    "cos" => DensityProfile::Cosine,
    "sin" => DensityProfile::Sine,
    "zero" => DensityProfile::Zero);
named_enum!(VelocityProfile, "velocity profile",
    "none" => VelocityProfile::None,
    "vortex" => VelocityProfile::Vortex);
named_enum!(ConcentrationProfile, "concentration profile",
    "tanh_stripe" => ConcentrationProfile::TanhStripe,
    "cos" => ConcentrationProfile::Cosine);

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub bc: BcMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicsConfig {
    pub gamma: f64,
    pub a: f64,
    pub kappa: f64,
    pub c_t: f64,
    pub nu0: f64,
    pub nu1: f64,
    pub eta0: f64,
    pub mobility: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeConfig {
    pub t_end: f64,
    pub cfl: f64,
    pub sample_every: f64,
    pub solver_tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    /// Minimum fitted order for the sweep to count as passing.
    pub fit_threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcConfig {
    pub density: DensityProfile,
    pub density_amplitude: f64,
    pub velocity: VelocityProfile,
    pub velocity_amplitude: f64,
    pub concentration: ConcentrationProfile,
    pub c_amplitude: f64,
    pub c_width: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub emit_fields: bool,
    pub emit_plots: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub grid: GridConfig,
    pub physics: PhysicsConfig,
    pub time: TimeConfig,
    pub sweep: SweepConfig,
    pub ic: IcConfig,
    pub output: OutputConfig,
    /// Mach parameter for single compressible runs.
    pub run_epsilon: f64,
    /// Non-fatal findings from validation.
    pub warnings: Vec<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            grid: GridConfig {
                nx: 128,
                ny: 1,
                lx: 8.0,
                ly: 8.0,
                bc: BcMode::Walls,
            },
            physics: PhysicsConfig {
                gamma: 2.4,
                a: 1.0,
                kappa: 1.0,
                c_t: 2.0,
                nu0: 0.1,
                nu1: 0.02,
                eta0: 0.05,
                mobility: 1.0,
            },
            time: TimeConfig {
                t_end: 0.2,
                cfl: 0.4,
                sample_every: 0.01,
                solver_tol: 1e-10,
                max_iter: 500,
            },
            sweep: SweepConfig {
                epsilons: vec![0.4, 0.2, 0.1, 0.05],
                fit_threshold: 0.8,
            },
            ic: IcConfig {
                density: DensityProfile::Balanced,
                density_amplitude: 1.0,
                velocity: VelocityProfile::None,
                velocity_amplitude: 0.5,
                concentration: ConcentrationProfile::TanhStripe,
                c_amplitude: 0.8,
                c_width: 1.0,
            },
            output: OutputConfig {
                directory: PathBuf::from("out"),
                emit_fields: false,
                emit_plots: true,
            },
            run_epsilon: 0.1,
            warnings: Vec::new(),
        }
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, found '{s}'")),
    }
}

fn parse_num<T: FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse::<T>().map_err(|_| format!("cannot parse '{s}' as a number"))
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(parse_num::<f64>)
        .collect()
}

impl Config {
    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value;
        match key {
            "grid.nx" => self.grid.nx = parse_num(v)?,
            "grid.ny" => self.grid.ny = parse_num(v)?,
            "grid.lx" => self.grid.lx = parse_num(v)?,
            "grid.ly" => self.grid.ly = parse_num(v)?,
            "grid.bc" | "grid.bc_mode" => self.grid.bc = v.parse().map_err(|e: Error| e.to_string())?,
            "physics.gamma" => self.physics.gamma = parse_num(v)?,
            "physics.a" => self.physics.a = parse_num(v)?,
            "physics.kappa" => self.physics.kappa = parse_num(v)?,
            "physics.c_t" => self.physics.c_t = parse_num(v)?,
            "physics.nu0" => self.physics.nu0 = parse_num(v)?,
            "physics.nu1" => self.physics.nu1 = parse_num(v)?,
            "physics.eta0" => self.physics.eta0 = parse_num(v)?,
            "physics.mobility" => self.physics.mobility = parse_num(v)?,
            "time.t_end" => self.time.t_end = parse_num(v)?,
            "time.cfl" => self.time.cfl = parse_num(v)?,
            "time.sample_every" => self.time.sample_every = parse_num(v)?,
            "time.solver_tol" => self.time.solver_tol = parse_num(v)?,
            "time.max_iter" => self.time.max_iter = parse_num(v)?,
            "sweep.epsilons" => self.sweep.epsilons = parse_list(v)?,
            "sweep.fit_threshold" => self.sweep.fit_threshold = parse_num(v)?,
            "ic.density" => self.ic.density = v.parse()?,
            "ic.density_amplitude" => self.ic.density_amplitude = parse_num(v)?,
            "ic.velocity" => self.ic.velocity = v.parse()?,
            "ic.velocity_amplitude" => self.ic.velocity_amplitude = parse_num(v)?,
            "ic.concentration" => self.ic.concentration = v.parse()?,
            "ic.c_amplitude" => self.ic.c_amplitude = parse_num(v)?,
            "ic.c_width" => self.ic.c_width = parse_num(v)?,
            "output.directory" => self.output.directory = PathBuf::from(v),
            "output.emit_fields" => self.output.emit_fields = parse_bool(v)?,
            "output.emit_plots" => self.output.emit_plots = parse_bool(v)?,
            "run.epsilon" => self.run_epsilon = parse_num(v)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Parses configuration text; `origin` labels error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Config> {
        let mut cfg = Config::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: origin.to_string(),
                line: k + 1,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', found '{line}'")))?;
            let value = value.trim().trim_matches('"');
            cfg.set(key.trim(), value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every invariant and fills `warnings`.
    pub fn validate(&mut self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.grid()?;
        self.params()?;
        let t = &self.time;
        if !(t.t_end.is_finite() && t.t_end > 0.0) {
            return bad(format!("time.t_end = {} must be > 0", t.t_end));
        }
        if !(t.cfl > 0.0 && t.cfl <= 1.0) {
            return bad(format!("time.cfl = {} must lie in (0, 1]", t.cfl));
        }
        if !(t.sample_every > 0.0 && t.sample_every <= t.t_end) {
            return bad(format!("time.sample_every = {} must lie in (0, t_end]", t.sample_every));
        }
        let e = &self.sweep.epsilons;
        if e.len() < 3 {
            return bad(format!("sweep.epsilons needs at least 3 values, got {}", e.len()));
        }
        if e.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return bad("sweep.epsilons must be strictly positive".into());
        }
        if e.windows(2).any(|w| w[1] >= w[0]) {
            return bad("sweep.epsilons must be strictly decreasing".into());
        }
        if !(self.run_epsilon.is_finite() && self.run_epsilon > 0.0) {
            return bad(format!("run.epsilon = {} must be > 0", self.run_epsilon));
        }
        if self.physics.gamma <= 1.5 {
            return bad(format!("physics.gamma = {} must exceed 3/2", self.physics.gamma));
        }
        if self.ic.velocity == VelocityProfile::Vortex && self.grid.ny == 1 {
            return bad("ic.velocity = vortex needs a two-dimensional grid".into());
        }
        if !(self.ic.c_width > 0.0) {
            return bad(format!("ic.c_width = {} must be > 0", self.ic.c_width));
        }
        for (name, x) in [
            ("ic.density_amplitude", self.ic.density_amplitude),
            ("ic.velocity_amplitude", self.ic.velocity_amplitude),
            ("ic.c_amplitude", self.ic.c_amplitude),
            ("sweep.fit_threshold", self.sweep.fit_threshold),
        ] {
            if !x.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        self.warnings.clear();
        if self.physics.gamma < 12.0 / 5.0 {
            self.warnings.push(format!(
                "physics.gamma = {} is below 12/5; the convergence estimate is not guaranteed",
                self.physics.gamma
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        Grid::new(g.nx, g.ny, g.lx, g.ly, g.bc)
    }

    pub fn params(&self) -> Result<PhysParams> {
        let p = &self.physics;
        PhysParams::new(
            PressureLaw::new(p.gamma, p.a)?,
            PotentialSpec::new(p.kappa, p.c_t)?,
            ViscosityLaw::new(p.nu0, p.nu1, p.eta0)?,
            p.mobility,
            CgOptions {
                tol: self.time.solver_tol,
                max_iter: self.time.max_iter,
            },
        )
    }
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Config::parse(&text, &path.display().to_string())
}
