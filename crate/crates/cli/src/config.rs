//! JSON run configuration.
//!
//! Every physical quantity is either a bare number, read as SI, or an object
//! `{"value": 1e-10, "unit": "Torr"}`. Frequencies given in Hz, kHz or MHz
//! are cyclic and converted to rad/s with 2π. Unknown keys are rejected so
//! that a typo cannot silently fall back to a default.

use std::path::PathBuf;

use serde_json::{Map, Value};

use levcsl::experiments::{default_length_grid, default_omega_grid, linear_grid, log_grid};
use levcsl::params::{derive_cavity, AIR_MOLECULE_MASS_AMU};
use levcsl::{
    CavitySpec, Constants, Coupling, CslSpec, DriveSpec, EnvironmentSpec, NanosphereSpec,
    SweepAxis, SystemSpec, TrapDrive, TrapSpec,
};

use crate::units::Dimension;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error at `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

fn err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        message: message.into(),
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

/// Config failure, or a physics error met while resolving a ratio such as
/// `omega_over_kappa`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Physical(#[from] levcsl::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub axis: Option<SweepAxis>,
    /// Axis values in SI, or `None` for the default grid.
    pub values: Option<Vec<f64>>,
}

impl SweepConfig {
    /// Grid for `axis`, falling back to the default one.
    pub fn grid(&self, axis: SweepAxis, system: &SystemSpec) -> Result<Vec<f64>> {
        if let Some(a) = self.axis {
            if a != axis {
                return Err(err(
                    "sweep.axis",
                    format!("config sweeps `{}` but the command sweeps `{}`", a.name(), axis.name()),
                ));
            }
        }
        Ok(match (&self.values, axis) {
            (Some(v), _) => v.clone(),
            (None, SweepAxis::Omega) => default_omega_grid(),
            (None, SweepAxis::Length) => default_length_grid(system.cavity.mirror_curvature),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleConfig {
    Explicit {
        dt: f64,
        t_burn: f64,
        t_sample: f64,
        n_traj: usize,
    },
    Planned {
        target_rel_stderr: f64,
        n_traj: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    pub mode: OracleConfig,
    pub seed: Option<u64>,
    /// Refuse plans with more Euler–Maruyama steps than this.
    pub max_steps: f64,
}

pub const DEFAULT_TARGET_REL_STDERR: f64 = 0.02;
pub const DEFAULT_N_TRAJ: usize = 16;
pub const DEFAULT_MAX_STEPS: f64 = 1e10;

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            mode: OracleConfig::Planned {
                target_rel_stderr: DEFAULT_TARGET_REL_STDERR,
                n_traj: DEFAULT_N_TRAJ,
            },
            seed: None,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BoundConfig {
    pub precision: Option<f64>,
    pub lambda_lo: Option<f64>,
    pub lambda_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
    pub oracle: OracleSettings,
    pub bound: BoundConfig,
}

/// Object at `key` with only the listed fields allowed.
struct Section<'a> {
    key: String,
    map: &'a Map<String, Value>,
}

impl<'a> Section<'a> {
    fn new(key: &str, value: &'a Value, allowed: &[&str]) -> Result<Self> {
        let map = value
            .as_object()
            .ok_or_else(|| err(key, "expected a JSON object"))?;
        for k in map.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(err(
                    &join(key, k),
                    format!("unknown key; expected one of {}", allowed.join(", ")),
                ));
            }
        }
        Ok(Self {
            key: key.to_string(),
            map,
        })
    }

    fn path(&self, field: &str) -> String {
        join(&self.key, field)
    }

    fn get(&self, field: &str) -> Option<&'a Value> {
        self.map.get(field)
    }

    fn section(&self, field: &str, allowed: &[&str]) -> Result<Section<'a>> {
        let v = self
            .get(field)
            .ok_or_else(|| err(&self.path(field), "missing section"))?;
        Section::new(&self.path(field), v, allowed)
    }

    fn opt_section(&self, field: &str, allowed: &[&str]) -> Result<Option<Section<'a>>> {
        self.get(field)
            .map(|v| Section::new(&self.path(field), v, allowed))
            .transpose()
    }

    fn number(&self, field: &str) -> Result<f64> {
        let key = self.path(field);
        match self.get(field) {
            None => Err(err(&key, "missing (dimensionless number)")),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| err(&key, "expected a dimensionless number")),
        }
    }

    fn opt_number(&self, field: &str) -> Result<Option<f64>> {
        self.get(field).map(|_| self.number(field)).transpose()
    }

    fn count(&self, field: &str) -> Result<Option<usize>> {
        let key = self.path(field);
        self.get(field)
            .map(|v| {
                v.as_u64()
                    .map(|n| n as usize)
                    .ok_or_else(|| err(&key, "expected a non-negative integer"))
            })
            .transpose()
    }

    fn string(&self, field: &str) -> Result<Option<&'a str>> {
        let key = self.path(field);
        self.get(field)
            .map(|v| v.as_str().ok_or_else(|| err(&key, "expected a string")))
            .transpose()
    }

    fn quantity(&self, field: &str, dim: Dimension) -> Result<f64> {
        let key = self.path(field);
        match self.get(field) {
            None => Err(err(&key, format!("missing (unit {})", dim.si_unit()))),
            Some(v) => quantity(&key, v, dim, None),
        }
    }

    fn opt_quantity(&self, field: &str, dim: Dimension) -> Result<Option<f64>> {
        self.get(field)
            .map(|v| quantity(&self.path(field), v, dim, None))
            .transpose()
    }
}

fn join(parent: &str, field: &str) -> String {
    if parent.is_empty() {
        field.to_string()
    } else {
        format!("{parent}.{field}")
    }
}

/// A quantity in SI. `r_c` is the mirror curvature, for lengths given in
/// units of `R_c`.
fn quantity(key: &str, v: &Value, dim: Dimension, r_c: Option<f64>) -> Result<f64> {
    if let Some(x) = v.as_f64() {
        return Ok(x);
    }
    let obj = v.as_object().ok_or_else(|| {
        err(
            key,
            format!(
                "expected a number in {} or {{\"value\": x, \"unit\": u}}",
                dim.si_unit()
            ),
        )
    })?;
    for k in obj.keys() {
        if k != "value" && k != "unit" {
            return Err(err(&join(key, k), "unknown key; expected value, unit"));
        }
    }
    let value = obj
        .get("value")
        .and_then(Value::as_f64)
        .ok_or_else(|| err(&join(key, "value"), "expected a number"))?;
    let unit = obj
        .get("unit")
        .and_then(Value::as_str)
        .ok_or_else(|| err(&join(key, "unit"), "expected a unit string"))?;
    if let (Dimension::Length, "R_c", Some(rc)) = (dim, unit, r_c) {
        return Ok(value * rc);
    }
    match dim.factor(unit) {
        Some(f) => Ok(value * f),
        None => {
            let mut accepted = dim.accepted();
            if dim == Dimension::Length && r_c.is_some() {
                accepted.push("R_c");
            }
            Err(err(
                &join(key, "unit"),
                format!("unknown unit \"{unit}\"; expected one of {}", accepted.join(", ")),
            ))
        }
    }
}

fn parse_system(root: &Section) -> std::result::Result<SystemSpec, LoadError> {
    let system = root.section(
        "system",
        &["sphere", "cavity", "trap", "drive", "environment", "csl"],
    )?;

    let s = system.section("sphere", &["radius", "density", "permittivity"])?;
    let sphere = NanosphereSpec {
        radius: s.quantity("radius", Dimension::Length)?,
        density: s.quantity("density", Dimension::Density)?,
        permittivity: s.number("permittivity")?,
    };

    let c = system.section(
        "cavity",
        &["length", "mirror_curvature", "finesse", "wavelength"],
    )?;
    let cavity = CavitySpec {
        length: c.quantity("length", Dimension::Length)?,
        mirror_curvature: c.quantity("mirror_curvature", Dimension::Length)?,
        finesse: c.number("finesse")?,
        wavelength: c.quantity("wavelength", Dimension::Length)?,
    };

    let t = system.section(
        "trap",
        &[
            "numerical_aperture",
            "wavelength",
            "frequency",
            "power",
            "omega_over_kappa",
        ],
    )?;
    let choices = ["frequency", "power", "omega_over_kappa"];
    let given: Vec<&str> = choices.into_iter().filter(|k| t.get(k).is_some()).collect();
    if given.len() != 1 {
        return Err(err(&t.key, format!("give exactly one of {}", choices.join(", "))).into());
    }
    let drive = match given[0] {
        "frequency" => TrapDrive::Frequency(t.quantity("frequency", Dimension::Frequency)?),
        "power" => TrapDrive::Power(t.quantity("power", Dimension::Power)?),
        _ => {
            let ratio = t.number("omega_over_kappa")?;
            let kappa = derive_cavity(&cavity, &Constants::CODATA)?.kappa;
            TrapDrive::Frequency(ratio * kappa)
        }
    };
    let trap = TrapSpec {
        numerical_aperture: t.number("numerical_aperture")?,
        drive,
        wavelength: t
            .opt_quantity("wavelength", Dimension::Length)?
            .unwrap_or(cavity.wavelength),
    };

    let d = system.section(
        "drive",
        &["detuning_over_kappa", "coupling_over_kappa", "input_power"],
    )?;
    let coupling = match (d.get("coupling_over_kappa"), d.get("input_power")) {
        (Some(_), None) => Coupling::Ratio(d.number("coupling_over_kappa")?),
        (None, Some(_)) => Coupling::InputPower(d.quantity("input_power", Dimension::Power)?),
        _ => {
            return Err(err(&d.key, "give exactly one of coupling_over_kappa, input_power").into())
        }
    };
    let drive = DriveSpec {
        detuning_ratio: d.number("detuning_over_kappa")?,
        coupling,
    };

    let e = system.section(
        "environment",
        &["temperature", "pressure", "gas_molecule_mass"],
    )?;
    let mut environment = EnvironmentSpec::air(
        e.quantity("temperature", Dimension::Temperature)?,
        e.quantity("pressure", Dimension::Pressure)?,
    );
    environment.gas_molecule_mass = e
        .opt_quantity("gas_molecule_mass", Dimension::Mass)?
        .unwrap_or(AIR_MOLECULE_MASS_AMU * Constants::CODATA.amu);

    let k = system.section("csl", &["rate", "correlation_length", "enabled"])?;
    let enabled = match k.get("enabled") {
        None => true,
        Some(v) => v
            .as_bool()
            .ok_or_else(|| err(&k.path("enabled"), "expected true or false"))?,
    };
    let csl = CslSpec {
        rate: k.quantity("rate", Dimension::Rate)?,
        correlation_length: k.quantity("correlation_length", Dimension::Length)?,
        enabled,
    };

    Ok(SystemSpec {
        sphere,
        cavity,
        trap,
        drive,
        environment,
        csl,
    })
}

fn parse_sweep(root: &Section, system: &SystemSpec) -> Result<SweepConfig> {
    let Some(s) = root.opt_section("sweep", &["axis", "from", "to", "points", "spacing", "values"])?
    else {
        return Ok(SweepConfig {
            axis: None,
            values: None,
        });
    };
    let axis = match s.string("axis")? {
        None => None,
        Some("omega") => Some(SweepAxis::Omega),
        Some("L") => Some(SweepAxis::Length),
        Some(other) => {
            return Err(err(
                &s.path("axis"),
                format!("unknown axis \"{other}\"; expected omega or L"),
            ))
        }
    };
    let dim = match axis {
        Some(SweepAxis::Length) => Dimension::Length,
        Some(SweepAxis::Omega) => Dimension::Frequency,
        None if !s.map.is_empty() => return Err(err(&s.path("axis"), "missing (omega or L)")),
        None => Dimension::Frequency,
    };
    let rc = Some(system.cavity.mirror_curvature);
    let q = |field: &str, v: &Value| quantity(&s.path(field), v, dim, rc);

    if let Some(v) = s.get("values") {
        if ["from", "to", "points", "spacing"].iter().any(|k| s.get(k).is_some()) {
            return Err(err(&s.path("values"), "give either values or from/to/points"));
        }
        let list = v
            .as_array()
            .ok_or_else(|| err(&s.path("values"), "expected an array"))?;
        let values = list
            .iter()
            .enumerate()
            .map(|(i, x)| quantity(&format!("{}[{i}]", s.path("values")), x, dim, rc))
            .collect::<Result<Vec<_>>>()?;
        return Ok(SweepConfig {
            axis,
            values: Some(values),
        });
    }
    let from = s.get("from");
    let to = s.get("to");
    let values = match (from, to) {
        (None, None) => None,
        (Some(a), Some(b)) => {
            let (a, b) = (q("from", a)?, q("to", b)?);
            let n = s.count("points")?.unwrap_or(levcsl::experiments::DEFAULT_POINTS);
            if n < 2 {
                return Err(err(&s.path("points"), "need at least 2 points"));
            }
            let default_spacing = if axis == Some(SweepAxis::Omega) { "log" } else { "linear" };
            match s.string("spacing")?.unwrap_or(default_spacing) {
                "log" => Some(log_grid(a, b, n)),
                "linear" => Some(linear_grid(a, b, n)),
                other => {
                    return Err(err(
                        &s.path("spacing"),
                        format!("unknown spacing \"{other}\"; expected log or linear"),
                    ))
                }
            }
        }
        _ => return Err(err(&s.key, "give both from and to")),
    };
    Ok(SweepConfig { axis, values })
}

fn parse_output(root: &Section) -> Result<OutputConfig> {
    let Some(o) = root.opt_section("output", &["path", "format", "plot"])? else {
        return Ok(OutputConfig::default());
    };
    let format = match o.string("format")? {
        None => None,
        Some(f) => Some(Format::parse(f).ok_or_else(|| {
            err(&o.path("format"), format!("unknown format \"{f}\"; expected csv or json"))
        })?),
    };
    Ok(OutputConfig {
        path: o.string("path")?.map(PathBuf::from),
        format,
        plot: o.string("plot")?.map(PathBuf::from),
    })
}

fn parse_oracle(root: &Section) -> Result<OracleSettings> {
    let Some(o) = root.opt_section(
        "oracle",
        &[
            "dt",
            "t_burn",
            "t_sample",
            "n_traj",
            "seed",
            "target_rel_stderr",
            "max_steps",
        ],
    )?
    else {
        return Ok(OracleSettings::default());
    };
    let time = |field: &str| -> Result<Option<f64>> {
        o.get(field)
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| err(&o.path(field), "expected a number (unit s)"))
            })
            .transpose()
    };
    let n_traj = o.count("n_traj")?.unwrap_or(DEFAULT_N_TRAJ);
    let explicit = [time("dt")?, time("t_burn")?, time("t_sample")?];
    let mode = match explicit {
        [Some(dt), Some(t_burn), Some(t_sample)] => {
            if o.get("target_rel_stderr").is_some() {
                return Err(err(
                    &o.path("target_rel_stderr"),
                    "not allowed together with dt, t_burn, t_sample",
                ));
            }
            OracleConfig::Explicit {
                dt,
                t_burn,
                t_sample,
                n_traj,
            }
        }
        [None, None, None] => OracleConfig::Planned {
            target_rel_stderr: o
                .opt_number("target_rel_stderr")?
                .unwrap_or(DEFAULT_TARGET_REL_STDERR),
            n_traj,
        },
        _ => return Err(err(&o.key, "give all of dt, t_burn, t_sample (unit s) or none")),
    };
    Ok(OracleSettings {
        mode,
        seed: o.count("seed")?.map(|s| s as u64),
        max_steps: o.opt_number("max_steps")?.unwrap_or(DEFAULT_MAX_STEPS),
    })
}

fn parse_bound(root: &Section) -> Result<BoundConfig> {
    let Some(b) = root.opt_section("bound", &["precision", "lambda_lo", "lambda_hi"])? else {
        return Ok(BoundConfig::default());
    };
    Ok(BoundConfig {
        precision: b.opt_number("precision")?,
        lambda_lo: b.opt_quantity("lambda_lo", Dimension::Rate)?,
        lambda_hi: b.opt_quantity("lambda_hi", Dimension::Rate)?,
    })
}

impl RunConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, LoadError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| err("<document>", format!("invalid JSON: {e}")))?;
        let root = Section::new("", &value, &["system", "sweep", "output", "oracle", "bound"])?;
        let system = parse_system(&root)?;
        Ok(RunConfig {
            sweep: parse_sweep(&root, &system)?,
            output: parse_output(&root)?,
            oracle: parse_oracle(&root)?,
            bound: parse_bound(&root)?,
            system,
        })
    }
}

/// Config key and SI unit for a library field name such as `cavity.length`.
pub fn describe_field(field: &str) -> (String, &'static str) {
    let unit = match field {
        "sphere.radius" | "cavity.length" | "cavity.mirror_curvature" | "cavity.wavelength"
        | "trap.wavelength" | "csl.correlation_length" => "m",
        "sphere.density" => "kg/m3",
        "trap.frequency" | "omega" => "rad/s",
        "trap.power" | "drive.input_power" => "W",
        "environment.temperature" => "K",
        "environment.pressure" => "Pa",
        "environment.gas_molecule_mass" => "kg",
        "csl.rate" => "s^-1",
        _ => "dimensionless",
    };
    let key = match field {
        "drive.detuning_ratio" => "system.drive.detuning_over_kappa".to_string(),
        "precision" => "bound.precision".to_string(),
        "lambda bracket" => "bound.lambda_lo".to_string(),
        "omega" => "sweep".to_string(),
        f => format!("system.{f}"),
    };
    (key, unit)
}
