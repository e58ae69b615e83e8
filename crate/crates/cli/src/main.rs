mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tase_core::io::{real, write_json, write_trajectory_csv, SweepCsvWriter};
use tase_core::{
    final_state_report, locate_ep, propagate_adiabatic, propagate_direct, sweep, table1, Basis, Direction, Error,
    InitialSpec, Method, SweepSpec, Table1,
};

use config::{ConfigError, Format, RunConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_NO_EP: u8 = 2;
const EXIT_PROPAGATION: u8 = 3;
const EXIT_PRECONDITION: u8 = 4;
const EXIT_SWEEP_FAILED: u8 = 5;

#[derive(Parser)]
#[command(
    name = "tase",
    version,
    about = "Drive a two-resonance non-Hermitian model around its exceptional point"
)]
struct Cli {
    /// JSON run configuration (sections: system, loop, integrator, initial, output)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; defaults to the config's output.path, else standard output
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for sweeps (default: available parallelism)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the closed-form exceptional point
    LocateEp,
    /// Propagate the configured initial state once around the loop
    Simulate(SimulateArgs),
    /// Both directions from both basis states, exact vs adiabatic prediction
    Table1(BasisArg),
    /// Grid over loop duration and amplitude scale
    Sweep(SweepArgs),
    /// Winding number of the discriminant and the signed EP distance rho
    Winding {
        #[arg(long, default_value_t = 4096)]
        samples: usize,
    },
}

#[derive(Args)]
struct BasisArg {
    /// Basis for final-state populations
    #[arg(long, default_value = "loop-start", value_parser = ["bare", "loop-start"])]
    basis: String,
}

#[derive(Args)]
struct SimulateArgs {
    /// Overrides loop.direction from the config
    #[arg(long, value_parser = ["cw", "ccw"])]
    direction: Option<String>,
    #[arg(long, default_value = "direct", value_parser = ["direct", "adiabatic"])]
    method: String,
    #[command(flatten)]
    basis: BasisArg,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated loop durations T
    #[arg(long, value_delimiter = ',', default_value = "100,200,300,400,500,600,700,800")]
    durations: Vec<f64>,
    /// Comma-separated factors applied to both semi-axes of the configured loop
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.55,0.8,1.05,1.3,1.55,1.8,2.05")]
    amp_scales: Vec<f64>,
    /// Overrides loop.direction from the config
    #[arg(long, value_parser = ["cw", "ccw"])]
    direction: Option<String>,
    /// Start every cell from the equal superposition or from the config's initial state
    #[arg(long, default_value = "equal", value_parser = ["equal", "config"])]
    initial: String,
    /// Relative phase of the equal superposition
    #[arg(long, default_value_t = 0.0)]
    phase: f64,
    #[arg(long, default_value_t = 1000.0)]
    ratio_min: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
    survival_levels: Vec<f64>,
    #[command(flatten)]
    basis: BasisArg,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }
}

fn fail(code: u8, e: &Error) -> Failure {
    let text = e.to_string();
    let message = if text.starts_with(e.kind()) {
        text
    } else {
        format!("{text} ({})", e.kind())
    };
    Failure { code, message }
}

fn config_failure(e: &Error) -> Failure {
    fail(EXIT_CONFIG, e)
}

fn io_failure(e: io::Error) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: format!("cannot write output: {e}"),
    }
}

/// Exit code for errors raised while computing.
fn classify(e: &Error) -> Failure {
    match e {
        Error::NoFiniteEp | Error::NegativeAmplitude { .. } => fail(EXIT_NO_EP, e),
        Error::Precondition(_) => fail(EXIT_PRECONDITION, e),
        Error::InvalidParameter { .. } => config_failure(e),
        _ => fail(EXIT_PROPAGATION, e),
    }
}

struct Context {
    cfg: RunConfig,
    output: Option<PathBuf>,
    format: Format,
    jobs: usize,
}

impl Context {
    fn writer(&self) -> Result<Box<dyn Write>, Failure> {
        match &self.output {
            Some(p) => Ok(Box::new(BufWriter::new(File::create(p).map_err(|e| Failure {
                code: EXIT_CONFIG,
                message: format!("cannot create {}: {e}", p.display()),
            })?))),
            None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        }
    }

    /// Summary lines go to stdout unless stdout carries the data itself.
    fn summary(&self, line: &str) {
        if self.output.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
}

fn parse_basis(s: &str) -> Basis {
    s.parse().expect("clap restricts the basis values")
}

fn parse_direction(s: &Option<String>, fallback: Direction) -> Direction {
    s.as_deref()
        .map(|d| d.parse().expect("clap restricts the direction values"))
        .unwrap_or(fallback)
}

/// Shortest decimal that survives rounding to 15 significant digits, so the
/// closed-form EP prints as 0.2 rather than 0.19999999999999998.
fn tidy(x: f64) -> f64 {
    format!("{x:.14e}").parse().unwrap_or(x)
}

fn cmd_locate_ep(ctx: &Context) -> Result<(), Failure> {
    let ep = locate_ep(&ctx.cfg.params).map_err(|e| classify(&e))?;
    println!(
        "omega_ep={:?} eps0_ep={:?} residual={:e}",
        tidy(ep.field.omega),
        tidy(ep.field.eps0),
        ep.residual
    );
    if ctx.output.is_some() {
        let mut w = ctx.writer()?;
        match ctx.format {
            Format::Json => write_json(&ep, &mut w).map_err(|e| classify(&e))?,
            Format::Csv => {
                writeln!(w, "omega_ep,eps0_ep,residual").map_err(io_failure)?;
                writeln!(
                    w,
                    "{},{},{}",
                    real(ep.field.omega),
                    real(ep.field.eps0),
                    real(ep.residual)
                )
                .map_err(io_failure)?;
            }
        }
        w.flush().map_err(io_failure)?;
    }
    Ok(())
}

fn cmd_simulate(ctx: &Context, args: &SimulateArgs) -> Result<(), Failure> {
    let lp = ctx
        .cfg
        .lp
        .with_direction(parse_direction(&args.direction, ctx.cfg.lp.direction));
    let method: Method = args.method.parse().map_err(|e| config_failure(&e))?;
    let basis = parse_basis(&args.basis.basis);
    let p = &ctx.cfg.params;
    let traj = match method {
        Method::Direct => propagate_direct(p, &lp, &ctx.cfg.initial, &ctx.cfg.integrator),
        Method::Adiabatic => propagate_adiabatic(p, &lp, &ctx.cfg.initial, &ctx.cfg.integrator),
    }
    .map_err(|e| fail(EXIT_PROPAGATION, &e))?;
    let rep = final_state_report(&traj, basis, "config").map_err(|e| fail(EXIT_PROPAGATION, &e))?;

    let mut w = ctx.writer()?;
    match ctx.format {
        Format::Csv => write_trajectory_csv(&traj, &mut w),
        Format::Json => write_json(&traj, &mut w),
    }
    .map_err(|e| classify(&e))?;
    w.flush().map_err(io_failure)?;

    ctx.summary(&format!(
        "direction={} method={} basis={} dominant={} ratio={} survival={} records={}",
        lp.direction.as_str(),
        args.method,
        args.basis.basis,
        rep.dominant_label(),
        real(rep.ratio),
        real(rep.survival),
        traj.len()
    ));
    Ok(())
}

fn write_table_csv(t: &Table1, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "direction,initial,final_adiabatic,final_exact,ratio,survival")?;
    for r in &t.rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.direction.as_str(),
            r.initial.label(),
            r.adiabatic_final.label(),
            r.exact_final.map_or("none", |s| s.label()),
            real(r.ratio),
            real(r.survival)
        )?;
    }
    Ok(())
}

fn cmd_table1(ctx: &Context, args: &BasisArg) -> Result<(), Failure> {
    let t = table1(
        &ctx.cfg.params,
        &ctx.cfg.lp,
        &ctx.cfg.integrator,
        parse_basis(&args.basis),
    )
    .map_err(|e| classify(&e))?;
    print!("{}", t.render());
    if ctx.output.is_some() {
        let mut w = ctx.writer()?;
        match ctx.format {
            Format::Json => write_json(&t, &mut w).map_err(|e| classify(&e))?,
            Format::Csv => write_table_csv(&t, &mut w).map_err(io_failure)?,
        }
        w.flush().map_err(io_failure)?;
    }
    Ok(())
}

fn cmd_sweep(ctx: &Context, args: &SweepArgs) -> Result<(), Failure> {
    let template = ctx
        .cfg
        .lp
        .with_direction(parse_direction(&args.direction, ctx.cfg.lp.direction));
    let spec = SweepSpec {
        durations: args.durations.clone(),
        amp_scales: args.amp_scales.clone(),
        template,
        initial: if args.initial == "config" {
            InitialSpec::Explicit { state: ctx.cfg.initial }
        } else {
            InitialSpec::EqualSuperposition { phase: args.phase }
        },
        basis: parse_basis(&args.basis.basis),
        ratio_min: args.ratio_min,
        survival_levels: args.survival_levels.clone(),
    };
    spec.validate().map_err(|e| config_failure(&e))?;

    let rows = spec.durations.len();
    let mut csv = match ctx.format {
        Format::Csv => Some(SweepCsvWriter::new(ctx.writer()?).map_err(io_failure)?),
        Format::Json => None,
    };
    let mut write_error = None;
    let mut done = 0;
    let result = sweep(&spec, &ctx.cfg.params, &ctx.cfg.integrator, ctx.jobs, |row| {
        done += 1;
        let passing = row.iter().filter(|c| c.pass_ratio).count();
        let failed = row.iter().filter(|c| c.error.is_some()).count();
        eprintln!(
            "sweep: row {done}/{rows} T={} done, {passing} passing, {failed} failed",
            row[0].duration
        );
        if let Some(w) = csv.as_mut() {
            if let Err(e) = w.write_row(row) {
                write_error.get_or_insert(e);
            }
        }
    })
    .map_err(|e| classify(&e))?;
    if let Some(e) = write_error {
        return Err(io_failure(e));
    }
    if ctx.format == Format::Json {
        let mut w = ctx.writer()?;
        write_json(&result, &mut w).map_err(|e| classify(&e))?;
        w.flush().map_err(io_failure)?;
    }

    let (pass, positive) = result.ratio_pass_counts();
    ctx.summary(&format!(
        "cells={} pass_ratio={pass} pass_ratio_with_rho_positive={positive} survival_monotone_in_T={}",
        result.cells.len(),
        result.survival_monotone_in_duration()
    ));
    if result.all_failed() {
        return Err(Failure {
            code: EXIT_SWEEP_FAILED,
            message: "every sweep cell failed".into(),
        });
    }
    Ok(())
}

fn cmd_winding(ctx: &Context, samples: usize) -> Result<(), Failure> {
    let w = ctx
        .cfg
        .lp
        .winding_number(&ctx.cfg.params, samples)
        .map_err(|e| match e {
            Error::InvalidParameter { .. } => config_failure(&e),
            _ => fail(EXIT_PROPAGATION, &e),
        })?;
    let ep = locate_ep(&ctx.cfg.params).map_err(|e| classify(&e))?;
    println!("winding={w} rho={:?}", tidy(ctx.cfg.lp.rho(&ep)));
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = config::load(cli.config.as_deref())?;
    let output = cli.output.clone().or_else(|| cfg.output.path.clone());
    let format = cli.format.or(cfg.output.format).unwrap_or(Format::Csv);
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(Failure {
            code: EXIT_CONFIG,
            message: "--jobs must be at least 1".into(),
        });
    }
    let ctx = Context {
        cfg,
        output,
        format,
        jobs,
    };
    match &cli.command {
        Command::LocateEp => cmd_locate_ep(&ctx),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Table1(a) => cmd_table1(&ctx, a),
        Command::Sweep(a) => cmd_sweep(&ctx, a),
        Command::Winding { samples } => cmd_winding(&ctx, *samples),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
