//! `levcsl`: command-line front end for the phase-noise model.
//!
//! Exit codes: 0 success, 1 invalid config or arguments, 2 physical-domain
//! error (instability, `L ≥ 2R_c`, no bound bracket, infeasible oracle plan),
//! 3 I/O failure.

mod config;
mod output;
mod plot;
mod units;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use levcsl::experiments::{detectable_lambda_bound_with, BoundOptions, TableRow};
use levcsl::oracle::{convergence_report, SimConfig};
use levcsl::steady_state::{evaluate, Evaluation, QY};
use levcsl::{discriminability, BoundOutcome, DiffusionBudget, Error, Protocol, SweepAxis};

use config::{describe_field, ConfigError, Format, LoadError, OracleConfig, RunConfig};
use output::Report;

#[derive(Parser)]
#[command(name = "levcsl", version, about = "Phase-quadrature noise of a cavity-levitated nanosphere with and without CSL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the momentum-diffusion budget at the configured point.
    Rates(Common),
    /// Print ⟨Y²⟩ and the stationary covariance at the configured point.
    SteadyState(Common),
    /// Sweep the trapping frequency at fixed cavity.
    SweepOmega(SweepArgs),
    /// Sweep the cavity length at fixed ω/κ, Δ/κ and G/κ.
    SweepLength(SweepArgs),
    /// Smallest collapse rate resolvable at a given measurement precision.
    Bound(BoundArgs),
    /// Cross-check the Lyapunov solve with Euler–Maruyama trajectories.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value_t = CslMode::Both)]
    csl: CslMode,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Defaults to the config, then the output extension.
    #[arg(long, value_parser = parse_format)]
    format: Option<Format>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Also draw the sweep as an SVG.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    common: Common,
    /// Relative measurement precision, e.g. 0.015.
    #[arg(long)]
    precision: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CslMode {
    On,
    Off,
    Both,
}

impl CslMode {
    fn settings(self) -> &'static [(&'static str, bool)] {
        match self {
            CslMode::On => &[("csl_on", true)],
            CslMode::Off => &[("csl_off", false)],
            CslMode::Both => &[("csl_on", true), ("csl_off", false)],
        }
    }
}

fn parse_format(s: &str) -> Result<Format, String> {
    Format::parse(s).ok_or_else(|| format!("unknown format \"{s}\"; expected csv or json"))
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Physical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Physical(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Physical(m) | Failure::Io(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Config(e) => e.into(),
            LoadError::Physical(e) => e.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec { field, reason } => {
                let (key, unit) = describe_field(field);
                Failure::Config(format!("config error at `{key}` (unit {unit}): {reason}"))
            }
            e if e.is_input_error() => Failure::Config(e.to_string()),
            e => Failure::Physical(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(&common.config).map_err(|e| io_failure(&common.config, e))?;
    let cfg = RunConfig::from_json(&text)?;
    cfg.system.validate()?;
    Ok(cfg)
}

/// Resolved destination and format.
struct Sink {
    path: Option<PathBuf>,
    format: Format,
}

impl Sink {
    fn new(common: &Common, cfg: &RunConfig, default: Format) -> Self {
        let path = common.output.clone().or_else(|| cfg.output.path.clone());
        let from_ext = path
            .as_ref()
            .and_then(|p| p.extension())
            .and_then(|e| e.to_str())
            .and_then(Format::parse);
        Self {
            format: common
                .format
                .or(cfg.output.format)
                .or(from_ext)
                .unwrap_or(default),
            path,
        }
    }

    fn write(&self, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
        match &self.path {
            None => {
                let stdout = io::stdout();
                let mut lock = stdout.lock();
                match f(&mut lock) {
                    // a closed pipe (`| head`) is not an error
                    Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
                        Err(Failure::Io(format!("stdout: {e}")))
                    }
                    _ => Ok(()),
                }
            }
            Some(p) => {
                let mut buf = Vec::new();
                f(&mut buf).map_err(|e| io_failure(p, e))?;
                fs::write(p, buf).map_err(|e| io_failure(p, e))
            }
        }
    }
}

fn push_budget(r: &mut Report, prefix: &str, b: &DiffusionBudget) {
    r.push(format!("{prefix}.D_t"), b.trap_scattering, "s^-1");
    r.push(format!("{prefix}.D_c"), b.cavity_scattering, "s^-1");
    r.push(format!("{prefix}.D_a"), b.gas, "s^-1");
    r.push(format!("{prefix}.lambda_sph"), b.collapse, "s^-1");
    r.push(format!("{prefix}.total_mech"), b.total, "s^-1");
}

fn push_point(r: &mut Report, ev: &Evaluation) {
    let d = &ev.derived;
    r.push("kappa", d.kappa, "rad/s");
    r.push("omega", d.omega, "rad/s");
    r.push("detuning", d.detuning, "rad/s");
    r.push("coupling", d.coupling, "rad/s");
    r.push("gamma", d.gamma, "s^-1");
    r.push("trap_power", d.trap_power, "W");
    r.push("input_power", d.input_power, "W");
}

fn rates(args: &Common) -> Result<(), Failure> {
    let cfg = load(args)?;
    let mut report = Report::default();
    for (i, &(name, on)) in args.csl.settings().iter().enumerate() {
        let spec = cfg.system.with_csl(on);
        let derived = spec.derive()?;
        let budget = levcsl::noise::budget(&spec, &derived)?;
        if i == 0 {
            report.push("kappa", derived.kappa, "rad/s");
            report.push("omega", derived.omega, "rad/s");
            report.push("gamma", derived.gamma, "s^-1");
        }
        push_budget(&mut report, name, &budget);
    }
    let sink = Sink::new(args, &cfg, Format::Json);
    sink.write(|w| report.write(w, sink.format))
}

fn steady_state(args: &Common) -> Result<(), Failure> {
    let cfg = load(args)?;
    let mut report = Report::default();
    let mut y2 = Vec::new();
    for (i, &(name, on)) in args.csl.settings().iter().enumerate() {
        let ev = evaluate(&cfg.system.with_csl(on))?;
        if i == 0 {
            push_point(&mut report, &ev);
        }
        push_budget(&mut report, name, &ev.budget);
        report.push(format!("{name}.Y2"), ev.state.y2, "dimensionless");
        report.push(format!("{name}.residual"), ev.state.residual_norm, "dimensionless");
        report.push(
            format!("{name}.spectral_abscissa"),
            ev.stability.spectral_abscissa,
            "s^-1",
        );
        let labels = ["x", "p", "X", "Y"];
        for a in 0..4 {
            for b in a..4 {
                report.push(
                    format!("{name}.V_{}{}", labels[a], labels[b]),
                    ev.state.covariance[(a, b)],
                    "dimensionless",
                );
            }
        }
        y2.push(ev.state.y2);
    }
    if let [on, off] = y2[..] {
        report.push("rel_diff", (on - off) / off, "dimensionless");
    }
    let sink = Sink::new(args, &cfg, Format::Json);
    sink.write(|w| report.write(w, sink.format))
}

fn sweep(args: &SweepArgs, axis: SweepAxis) -> Result<(), Failure> {
    let common = &args.common;
    let cfg = load(common)?;
    let grid = cfg.sweep.grid(axis, &cfg.system)?;
    let result = match axis {
        SweepAxis::Omega => levcsl::sweep_omega(&cfg.system, &grid)?,
        SweepAxis::Length => levcsl::sweep_length(&cfg.system, &grid)?,
    };
    let mut table = discriminability(&result);
    if common.csl != CslMode::Both {
        for row in &mut table.rows {
            mask(row, common.csl);
        }
        table.max_rel_diff = f64::NAN;
        table.argmax = None;
    }
    let sink = Sink::new(common, &cfg, Format::Csv);
    sink.write(|w| match sink.format {
        Format::Csv => output::write_sweep_csv(w, &table.rows).map_err(io::Error::other),
        Format::Json => output::write_json(w, &output::sweep_json(axis, &table)),
    })?;
    if let Some(path) = args.plot.clone().or_else(|| cfg.output.plot.clone()) {
        fs::write(&path, plot::render(axis, &table.rows)).map_err(|e| io_failure(&path, e))?;
    }
    Ok(())
}

fn mask(row: &mut TableRow, mode: CslMode) {
    row.rel_diff = None;
    match mode {
        CslMode::On => row.y2_off = None,
        CslMode::Off => row.y2_on = None,
        CslMode::Both => {}
    }
}

fn bound(args: &BoundArgs) -> Result<(), Failure> {
    let common = &args.common;
    let cfg = load(common)?;
    let precision = args.precision.or(cfg.bound.precision).ok_or_else(|| {
        Failure::Config(
            "config error at `bound.precision`: missing (dimensionless); pass --precision".into(),
        )
    })?;
    let axis = cfg.sweep.axis.unwrap_or(SweepAxis::Length);
    let grid = cfg.sweep.grid(axis, &cfg.system)?;
    let protocol = match axis {
        SweepAxis::Omega => Protocol::Omega(grid),
        SweepAxis::Length => Protocol::Length(grid),
    };
    let defaults = BoundOptions::default();
    let opts = BoundOptions {
        lambda_lo: cfg.bound.lambda_lo.unwrap_or(defaults.lambda_lo),
        lambda_hi: cfg.bound.lambda_hi.unwrap_or(defaults.lambda_hi),
        ..defaults
    };
    let outcome = detectable_lambda_bound_with(&cfg.system, &protocol, precision, &opts)?;

    let mut report = Report::default();
    report.note("protocol", axis.name());
    report.push("precision", precision, "dimensionless");
    let failure = match outcome {
        BoundOutcome::Found(r) => {
            report.note("outcome", "found");
            report.push("lambda_star", r.lambda_star, "s^-1");
            report.push("bracket_lo", r.bracket.0, "s^-1");
            report.push("bracket_hi", r.bracket.1, "s^-1");
            report.push("iterations", r.iterations as f64, "count");
            report.push("max_rel_diff", r.max_rel_diff, "dimensionless");
            report.note("converged", r.converged.to_string());
            None
        }
        BoundOutcome::NoBracket {
            lambda_lo,
            lambda_hi,
            rel_diff_lo,
            rel_diff_hi,
        } => {
            report.note("outcome", "no_bracket");
            report.push("lambda_lo", lambda_lo, "s^-1");
            report.push("lambda_hi", lambda_hi, "s^-1");
            report.push("rel_diff_lo", rel_diff_lo, "dimensionless");
            report.push("rel_diff_hi", rel_diff_hi, "dimensionless");
            Some(Failure::Physical(format!(
                "precision {precision} is not crossed between λ = {lambda_lo:e} \
                 (rel_diff {rel_diff_lo:e}) and λ = {lambda_hi:e} (rel_diff {rel_diff_hi:e}) s^-1"
            )))
        }
    };
    let sink = Sink::new(common, &cfg, Format::Json);
    sink.write(|w| report.write(w, sink.format))?;
    failure.map_or(Ok(()), Err)
}

fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    let common = &args.common;
    let cfg = load(common)?;
    let seed = args.seed.or(cfg.oracle.seed).unwrap_or(0);
    let mut report = Report::default();
    report.push("seed", seed as f64, "dimensionless");
    let mut agree = true;
    for &(name, on) in common.csl.settings() {
        let ev = evaluate(&cfg.system.with_csl(on))?;
        let model = &ev.model;
        let sim = match cfg.oracle.mode {
            OracleConfig::Explicit {
                dt,
                t_burn,
                t_sample,
                n_traj,
            } => SimConfig {
                dt,
                t_burn,
                t_sample,
                n_traj,
                seed,
            },
            OracleConfig::Planned {
                target_rel_stderr,
                n_traj,
            } => SimConfig::planned(model, target_rel_stderr, n_traj, seed)?,
        };
        // the halving check runs once at dt and once at dt/2
        let steps = 3.0 * sim.total_steps();
        if steps > cfg.oracle.max_steps {
            return Err(Failure::Physical(format!(
                "{name}: the oracle needs {steps:.3e} Euler–Maruyama steps \
                 (dt = {:.3e} s, t_burn = {:.3e} s, t_sample = {:.3e} s, n_traj = {}), \
                 over oracle.max_steps = {:e}",
                sim.dt, sim.t_burn, sim.t_sample, sim.n_traj, cfg.oracle.max_steps
            )));
        }
        sim.validate(model)?;
        let conv = convergence_report(model, &sim)?;
        let est = &conv.coarse;
        let exact = ev.state.covariance;
        let z_y2 = (est.covariance[(QY, QY)] - exact[(QY, QY)]) / est.stderr[(QY, QY)];
        let mut z_max: f64 = 0.0;
        for i in 0..4 {
            for j in i..4 {
                if est.stderr[(i, j)] > 0.0 {
                    z_max = z_max.max((est.covariance[(i, j)] - exact[(i, j)]).abs() / est.stderr[(i, j)]);
                }
            }
        }
        let ok = z_y2.abs() <= 3.0 && !conv.flagged;
        agree &= ok;
        report.push(format!("{name}.Y2_lyapunov"), exact[(QY, QY)], "dimensionless");
        report.push(format!("{name}.Y2_oracle"), est.covariance[(QY, QY)], "dimensionless");
        report.push(format!("{name}.Y2_stderr"), est.stderr[(QY, QY)], "dimensionless");
        report.push(format!("{name}.Y2_z"), z_y2, "dimensionless");
        report.push(format!("{name}.max_entry_z"), z_max, "dimensionless");
        report.push(
            format!("{name}.halving_shift_in_stderr"),
            conv.max_shift_in_stderr,
            "dimensionless",
        );
        report.push(format!("{name}.dt"), sim.dt, "s");
        report.push(format!("{name}.t_burn"), sim.t_burn, "s");
        report.push(format!("{name}.t_sample"), sim.t_sample, "s");
        report.push(format!("{name}.n_traj"), sim.n_traj as f64, "count");
        report.push(format!("{name}.steps"), steps, "count");
        report.note(format!("{name}.agreement"), if ok { "pass" } else { "fail" });
    }
    report.note("agreement", if agree { "pass" } else { "fail" });
    let sink = Sink::new(common, &cfg, Format::Json);
    sink.write(|w| report.write(w, sink.format))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Rates(a) => rates(a),
        Command::SteadyState(a) => steady_state(a),
        Command::SweepOmega(a) => sweep(a, SweepAxis::Omega),
        Command::SweepLength(a) => sweep(a, SweepAxis::Length),
        Command::Bound(a) => bound(a),
        Command::Verify(a) => verify(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("levcsl: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
