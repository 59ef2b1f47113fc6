//! `mwion`: microwave ionization curves of Rydberg hydrogen.
//!
//! Exit status 0 on success, 2 for invalid input or configuration,
//! 3 when the numerics fail (norm drift, step underflow), 1 for I/O errors.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use mwion_core::classical::{self, ClassicalOptions};
use mwion_core::ensemble::{self, CurveLabel, CurveMeta, DroopProfile, IonizationCurve, Method, COMPUTED_M0};
use mwion_core::stark::{self, Extremum};
use mwion_core::sweep::{self, FieldGrid, MethodSet, SweepConfig, SweepControl};
use mwion_core::Error;

use config::{FileConfig, ModelArgs};
use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "mwion", version, about = "Microwave ionization of Rydberg hydrogen, quantum and classical")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quantum ionization curve for one m0.
    QuantumCurve(CurveArgs),
    /// Classical ionization curve for one m0 window.
    ClassicalCurve(ClassicalArgs),
    /// m-average a directory of per-m0 curves.
    Average(AverageArgs),
    /// Apply the beam-profile droop correction to one curve.
    Droop(DroopArgs),
    /// Run or resume a full figure reproduction.
    Reproduce(ReproduceArgs),
    /// Dump a dipole matrix as CSV.
    Matelem(MatelemArgs),
}

#[derive(Debug, clap::Args)]
struct CurveArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Magnetic quantum number.
    #[arg(long, allow_negative_numbers = true)]
    m0: Option<i32>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct ClassicalArgs {
    #[command(flatten)]
    curve: CurveArgs,
    /// Write per-trajectory outcomes, one CSV per field, into this directory.
    #[arg(long, value_name = "DIR")]
    dump_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Debug, clap::Args)]
struct AverageArgs {
    /// Directory holding m{m0}_{method}.csv for every computed m0.
    #[arg(long)]
    in_dir: PathBuf,
    #[arg(long, default_value = "quantum")]
    method: Method,
    #[arg(long, value_enum, default_value = "off")]
    droop: Toggle,
    /// Relative field drop at the beam edge.
    #[arg(long, default_value_t = DroopProfile::default().drop)]
    droop_drop: f64,
    #[arg(long, default_value_t = 37)]
    n0: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct DroopArgs {
    /// Input curve CSV.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = DroopProfile::default().drop)]
    droop_drop: f64,
    #[arg(long, default_value_t = DroopProfile::default().nodes)]
    droop_nodes: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    N37,
    N37Desk,
}

#[derive(Debug, clap::Args)]
struct ReproduceArgs {
    #[arg(long, value_enum, default_value = "n37")]
    preset: Preset,
    #[command(flatten)]
    model: ModelArgs,
    /// quantum, classical or both.
    #[arg(long)]
    method: Option<MethodSet>,
    /// Print the task count and exit.
    #[arg(long)]
    dry_run: bool,
    #[arg(long, default_value = "reproduce-out")]
    out_dir: PathBuf,
    /// Checkpoint file [default: <out-dir>/checkpoint.txt].
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Stop after this many new tasks (the checkpoint keeps them).
    #[arg(long)]
    stop_after: Option<usize>,
    /// Log every finished task to stderr.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Debug, clap::Args)]
struct MatelemArgs {
    #[arg(long, allow_negative_numbers = true, default_value_t = 0)]
    m: i32,
    #[arg(long, default_value_t = 30)]
    basis_lo: u32,
    #[arg(long, default_value_t = 100)]
    basis_hi: u32,
    /// Use the downhill extremal states instead of the uphill ones.
    #[arg(long)]
    downhill: bool,
    #[arg(long, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A message and the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    msg: String,
    usage: bool,
}

impl Failure {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into(), usage: false }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into(), usage: true }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() {
            3
        } else if matches!(e, Error::Io(_)) {
            1
        } else {
            2
        };
        Self { code, msg: e.to_string(), usage: false }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self { code: 1, msg: e.to_string(), usage: false }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            if f.usage {
                let mut cmd = Cli::command();
                let usage = match cmd.find_subcommand_mut(name) {
                    Some(sub) => sub.render_usage(),
                    None => cmd.render_usage(),
                };
                eprintln!("\n{usage}");
            }
            ExitCode::from(f.code)
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::QuantumCurve(_) => "quantum-curve",
            Command::ClassicalCurve(_) => "classical-curve",
            Command::Average(_) => "average",
            Command::Droop(_) => "droop",
            Command::Reproduce(_) => "reproduce",
            Command::Matelem(_) => "matelem",
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::QuantumCurve(args) => curve(args, Method::Quantum, None),
        Command::ClassicalCurve(args) => curve(args.curve, Method::Classical, args.dump_dir),
        Command::Average(args) => average(args),
        Command::Droop(args) => droop(args),
        Command::Reproduce(args) => reproduce(args),
        Command::Matelem(args) => matelem(args),
    }
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

/// Write to `out` or stdout through a buffer.
fn emit(out: Option<&Path>, write: impl FnOnce(&mut Vec<u8>) -> mwion_core::Result<()>) -> CliResult {
    let mut buf = Vec::new();
    write(&mut buf)?;
    match out {
        Some(p) => fs::write(p, buf)?,
        None => io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn curve(args: CurveArgs, method: Method, dump_dir: Option<PathBuf>) -> CliResult {
    let file = FileConfig::load(args.model.config.as_deref())?;
    args.model.require_curve_inputs(&file)?;
    let cfg = args.model.apply(&file, SweepConfig::preset_n37())?;
    let m0 = args.m0.or(file.m0).unwrap_or(0);
    let methods = match method {
        Method::Quantum => MethodSet::Quantum,
        Method::Classical => MethodSet::Classical,
    };
    let cfg = SweepConfig { m0_set: vec![m0], methods, convergence: None, ..cfg };
    if method == Method::Classical && cfg.trajectories == 0 {
        return Err(Failure::invalid("--trajectories must be at least 1"));
    }

    let started = Instant::now();
    let mut manifest = RunManifest::start(command_line(), cfg.canonical());
    let curve = match &dump_dir {
        Some(dir) => classical_with_dump(&cfg, m0, dir, &mut manifest)?,
        None => sweep::compute_curve(&cfg, method, m0)?,
    };
    manifest.tasks.push((format!("{method} m0={m0}"), started.elapsed().as_secs_f64(), 1));
    emit(args.out.as_deref(), |buf| curve.write_csv(buf))?;

    if let Some(out) = &args.out {
        manifest.outputs.insert(0, out.clone());
        manifest.write(&manifest_path(out), Path::new(""))?;
    }
    Ok(())
}

/// Classical curve computed field by field, keeping every trajectory.
fn classical_with_dump(cfg: &SweepConfig, m0: i32, dir: &Path, manifest: &mut RunManifest) -> CliResult<IonizationCurve> {
    let cfg = SweepConfig { methods: MethodSet::Classical, convergence: None, ..cfg.clone() };
    FieldGrid::new(cfg.grid.lo, cfg.grid.hi, cfg.grid.step)?;
    fs::create_dir_all(dir)?;
    let sampler = sweep::classical_sampler(&cfg, m0)?;
    let opts = ClassicalOptions { rtol: cfg.classical_rtol, ..ClassicalOptions::default() };
    let pool = rayon_pool(cfg.workers)?;
    let mut samples = Vec::with_capacity(cfg.grid.len());
    for index in 0..cfg.grid.len() {
        let field = cfg.grid.value(index);
        let drive = cfg.drive(field)?;
        let outcomes = pool.install(|| classical::run_ensemble(&sampler, &drive, cfg.trajectories, cfg.n_cut, index as u64, &opts))?;
        let name = format!("trajectories_m{m0}_E{field}.csv");
        let mut buf = Vec::new();
        classical::write_outcomes(&mut buf, &outcomes)?;
        fs::write(dir.join(&name), buf)?;
        manifest.outputs.push(dir.join(name));
        samples.push((field, classical::ionized_fraction(&outcomes)));
    }
    let meta = CurveMeta { n0: cfg.n0, label: CurveLabel::M(m0), method: Method::Classical, droop: false };
    Ok(IonizationCurve::from_samples(&samples, meta)?)
}

fn rayon_pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Failure::invalid(format!("worker pool: {e}")))
}

fn read_curve(path: &Path, meta: CurveMeta) -> CliResult<IonizationCurve> {
    let file = fs::File::open(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    IonizationCurve::read_csv(io::BufReader::new(file), meta).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn average(args: AverageArgs) -> CliResult {
    let mut curves = BTreeMap::new();
    for m0 in COMPUTED_M0 {
        let path = args.in_dir.join(format!("m{m0}_{}.csv", args.method));
        if !path.exists() {
            return Err(Failure::invalid(format!("missing curve for m0 = {m0}: {}", path.display())));
        }
        let meta = CurveMeta { n0: args.n0, label: CurveLabel::M(m0), method: args.method, droop: false };
        curves.insert(m0, read_curve(&path, meta)?);
    }
    let mut avg = ensemble::m_average(&curves)?;
    if args.droop == Toggle::On {
        avg = ensemble::droop_correct(&avg, &DroopProfile { drop: args.droop_drop, ..DroopProfile::default() })?;
    }
    emit(args.out.as_deref(), |buf| avg.write_csv(buf))
}

fn droop(args: DroopArgs) -> CliResult {
    let meta = CurveMeta { n0: 0, label: CurveLabel::Averaged, method: Method::Quantum, droop: false };
    let curve = read_curve(&args.input, meta)?;
    let profile = DroopProfile { drop: args.droop_drop, nodes: args.droop_nodes };
    let corrected = ensemble::droop_correct(&curve, &profile)?;
    emit(args.out.as_deref(), |buf| corrected.write_csv(buf))
}

fn reproduce(args: ReproduceArgs) -> CliResult {
    let base = match args.preset {
        Preset::N37 => SweepConfig::preset_n37(),
        Preset::N37Desk => SweepConfig::preset_n37_desk(),
    };
    let file = FileConfig::load(args.model.config.as_deref())?;
    let mut cfg = args.model.apply(&file, base)?;
    if let Some(m) = args.method {
        cfg.methods = m;
    }
    cfg.validate()?;

    let tasks = cfg.tasks();
    if args.dry_run {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &tasks {
            *counts.entry(t.kind.tag()).or_default() += 1;
        }
        println!("tasks {}", tasks.len());
        for (kind, n) in counts {
            println!("  {kind} {n}");
        }
        println!("fingerprint {}", cfg.fingerprint());
        return Ok(());
    }

    fs::create_dir_all(&args.out_dir)?;
    let checkpoint = args.checkpoint.clone().unwrap_or_else(|| args.out_dir.join("checkpoint.txt"));
    let control = SweepControl {
        checkpoint: Some(checkpoint),
        stop_after: args.stop_after,
        verbose: args.verbose,
        ..SweepControl::default()
    };
    let mut manifest = RunManifest::start(command_line(), cfg.canonical());
    manifest.fingerprint = Some(cfg.fingerprint());
    if args.stop_after.is_some() {
        let outcome = sweep::run_sweep(&cfg, &control)?;
        if !outcome.complete {
            eprintln!("stopped after {} new tasks; {} of {} done", outcome.executed, outcome.records.len(), tasks.len());
            return Ok(());
        }
    }
    let bundle = sweep::reproduce_figure(&cfg, &args.out_dir, &control)?;
    for (task, rec) in &bundle.outcome.records {
        manifest.tasks.push((cfg.describe(task).replace(' ', "_"), rec.runtime_s, rec.attempts));
    }
    manifest.outputs = bundle.files.clone();
    manifest.write(&args.out_dir.join("manifest.txt"), &args.out_dir)?;
    println!("wrote {} files to {}", bundle.files.len(), args.out_dir.display());
    Ok(())
}

fn matelem(args: MatelemArgs) -> CliResult {
    let extremum = if args.downhill { Extremum::Downhill } else { Extremum::Uphill };
    if args.basis_hi < args.basis_lo {
        return Err(Failure::invalid("--basis-hi must be at least --basis-lo"));
    }
    let basis = match &args.cache_dir {
        Some(dir) => stark::load_or_build(dir, args.m, args.basis_lo, args.basis_hi, extremum)?,
        None => stark::build_dipole_matrix_with(args.m, args.basis_lo.max(args.m.unsigned_abs() + 1), args.basis_hi, extremum)?,
    };
    emit(args.out.as_deref(), |buf| stark::write_matrix_csv(buf, &basis))
}
