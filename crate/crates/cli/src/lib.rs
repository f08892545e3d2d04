//! Command-line front end for `seqdescent`: solves, level-set dumps,
//! benchmarks, gradient checks and grid-oracle queries.
//!
//! Exit codes: 0 success, 1 expectation failure, 2 usage error,
//! 3 numeric error.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use seqdescent::bench::{
    builtin_cases, checks_table, find_case, grid_oracle, iteration_table, run_benchmark,
    summary_table,
};
use seqdescent::{compute_level_set, descend, solve, EvalCounter, SgdConfig, Vector};

use config::{parse_box, parse_list, FilterArg, Format, RunConfig};
use output::{levelset_table, trace_table, write_file, write_table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] seqdescent::Error),
    #[error("{0} expectation(s) failed")]
    Expectations(usize),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("config file {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Expectations(_) => 1,
            CliError::Core(e) if e.is_numeric() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "seqdescent",
    version,
    about = "Global minimization by sequential steepest descent"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the solver and write its report, descent trace and per-iteration table.
    Solve(RunArgs),
    /// Write the refined level set of an objective at a given value.
    LevelsetDump(LevelsetArgs),
    /// Run benchmark cases against their expectations.
    Bench(BenchArgs),
    /// Compare analytic gradients with central differences.
    GradCheck(GradCheckArgs),
    /// Exhaustive grid minimum, polished by one descent.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub objective: Option<String>,
    /// Start point `x1,x2,...`; drawn from --seed when absent.
    #[arg(long, allow_hyphen_values = true, value_name = "X1,X2,...")]
    pub start: Option<String>,
    /// Replacement domain `lo1,hi1,lo2,hi2,...`.
    #[arg(long = "box", allow_hyphen_values = true, value_name = "LO1,HI1,...")]
    pub domain: Option<String>,
    /// Region where level sets are sampled; must lie inside the domain.
    #[arg(long, allow_hyphen_values = true, value_name = "LO1,HI1,...")]
    pub levelset_box: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub grid_resolution: Option<usize>,
    #[arg(long, value_enum)]
    pub filter_mode: Option<FilterArg>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Output directory; defaults to $SEQDESCENT_OUT_DIR, then `seqdescent-out`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// TOML file with run settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl RunArgs {
    fn run_config(&self) -> Result<RunConfig, CliError> {
        let list = |s: &Option<String>| s.as_deref().map(parse_list).transpose();
        let flags = RunConfig {
            objective: self.objective.clone(),
            start: list(&self.start)?,
            domain: list(&self.domain)?,
            levelset_box: list(&self.levelset_box)?,
            seed: self.seed,
            grid_resolution: self.grid_resolution,
            filter_mode: self.filter_mode,
            max_outer: self.max_outer,
            out_dir: self.out_dir.clone(),
            format: self.format,
            ..Default::default()
        };
        match &self.config {
            Some(path) => Ok(flags.over(RunConfig::from_file(path)?)),
            None => Ok(flags),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct LevelsetArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Level value to sample.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "at_minimum_of")]
    pub level: Option<f64>,
    /// Descend from this point and sample the level of the minimum found.
    #[arg(long, allow_hyphen_values = true, value_name = "X1,X2,...")]
    pub at_minimum_of: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Case to run; repeat for several. All cases run when absent.
    #[arg(long = "case")]
    pub cases: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub grid_resolution: Option<usize>,
    #[arg(long, value_enum)]
    pub filter_mode: Option<FilterArg>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct GradCheckArgs {
    #[arg(long)]
    pub objective: String,
    /// Random interior points to check.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Extra point `x1,x2,...`; may be repeated.
    #[arg(long = "point", allow_hyphen_values = true)]
    pub points: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub rel_tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub objective: String,
    /// Grid nodes per axis.
    #[arg(long, default_value_t = 400)]
    pub resolution: usize,
    /// Region to search; the objective's domain when absent.
    #[arg(long = "box", allow_hyphen_values = true, value_name = "LO1,HI1,...")]
    pub domain: Option<String>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Errors are reported on `err`.
pub fn run_from_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 2;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match run(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Solve(a) => cmd_solve(&a, out),
        Command::LevelsetDump(a) => cmd_levelset_dump(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
        Command::GradCheck(a) => cmd_grad_check(&a, out),
        Command::Oracle(a) => cmd_oracle(&a, out),
    }
}

fn say(out: &mut dyn Write, line: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

pub fn cmd_solve(args: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let rc = args.run_config()?;
    let obj = rc.objective()?;
    let cfg = rc.sgd_config(&obj)?;
    let start = rc.start()?;
    let report = solve(&obj, &cfg, start.as_ref())?;

    let dir = rc.out_dir();
    let name = obj.name();
    let json_path = dir.join(format!("{name}-report.json"));
    write_file(&json_path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let trace = write_table(
        &dir,
        &format!("{name}-trace"),
        &trace_table(&report),
        rc.format(),
    )?;
    let iters = write_table(
        &dir,
        &format!("{name}-iterations"),
        &iteration_table(&report),
        rc.format(),
    )?;

    say(out, format!("objective     {name}"))?;
    say(out, format!("start         {}", report.start))?;
    for (k, m) in report.minima.iter().enumerate() {
        say(out, format!("minimum {k:<5} f = {}  x = {}", m.f, m.x))?;
    }
    say(
        out,
        format!("best          f = {}  x = {}", report.best.f, report.best.x),
    )?;
    say(
        out,
        format!(
            "searches      {} ({} rejected restarts)",
            report.local_search_count, report.rejected_restarts
        ),
    )?;
    say(out, format!("termination   {}", report.termination.label()))?;
    for p in [&json_path, &trace, &iters] {
        say(out, format!("wrote         {}", p.display()))?;
    }
    Ok(())
}

pub fn cmd_levelset_dump(args: &LevelsetArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let rc = args.run.run_config()?;
    let obj = rc.objective()?;
    let cfg: SgdConfig = rc.sgd_config(&obj)?;
    let counter = EvalCounter::new();
    let level = match (args.level, &args.at_minimum_of) {
        (Some(level), None) => level,
        (None, Some(point)) => {
            let x0 = Vector::new(parse_list(point)?)?;
            descend(&obj, &x0, &cfg.descent, &counter)?.f
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --level or --at-minimum-of".into(),
            ))
        }
    };
    let region = match &cfg.levelset_region {
        Some(r) if obj.domain().contains_box(r) => r.clone(),
        Some(_) => {
            return Err(CliError::Usage(
                "--levelset-box must lie inside the domain".into(),
            ))
        }
        None => obj.domain().clone(),
    };
    let set = compute_level_set(&obj, level, &region, &cfg.levelset, &counter)?;
    let table = levelset_table(obj.dimension(), &set.candidates);
    let path = write_table(
        &rc.out_dir(),
        &format!("{}-levelset", obj.name()),
        &table,
        rc.format(),
    )?;
    say(out, format!("level         {level}"))?;
    say(
        out,
        format!("region        [{} .. {}]", region.lower(), region.upper()),
    )?;
    say(out, format!("brackets      {}", set.brackets))?;
    say(out, format!("points        {}", set.candidates.len()))?;
    say(out, format!("wrote         {}", path.display()))?;
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cases = if args.cases.is_empty() {
        builtin_cases()
    } else {
        args.cases
            .iter()
            .map(|n| find_case(n))
            .collect::<Result<Vec<_>, _>>()?
    };
    let mut cfg = SgdConfig::default();
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.filter_mode {
        cfg.levelset.filter_mode = v.into();
    }
    if let Some(v) = args.max_outer {
        cfg.max_outer = v;
    }
    for case in &mut cases {
        if let Some(v) = args.grid_resolution {
            case.grid_resolution = Some(v);
        }
    }
    cfg.validate()?;
    let format = args.format.unwrap_or_default();
    let dir = RunConfig {
        out_dir: args.out_dir.clone(),
        ..Default::default()
    }
    .out_dir();

    let mut reports = Vec::new();
    for case in &cases {
        let report = run_benchmark(case, &cfg)?;
        write_table(
            &dir,
            &format!("bench-{}", case.name),
            &iteration_table(&report.solve),
            format,
        )?;
        say(
            out,
            format!(
                "== {} ({})",
                case.name,
                if report.passed { "pass" } else { "FAIL" }
            ),
        )?;
        say(
            out,
            format!(
                "   domain         [{} .. {}]",
                case.objective.domain().lower(),
                case.objective.domain().upper()
            ),
        )?;
        say(
            out,
            format!(
                "   level-set box  [{} .. {}]",
                report.solve.levelset_region.lower(),
                report.solve.levelset_region.upper()
            ),
        )?;
        say(
            out,
            format!("   minima         {:?}", report.solve.minima_values()),
        )?;
        say(
            out,
            format!(
                "   best           f = {}  x = {}",
                report.solve.best.f, report.solve.best.x
            ),
        )?;
        say(
            out,
            format!(
                "   oracle         f = {}  x = {}  on [{} .. {}] at {} nodes/axis",
                report.oracle.f,
                report.oracle.x,
                report.oracle.region.lower(),
                report.oracle.region.upper(),
                report.oracle.resolution
            ),
        )?;
        if let Some(s) = &report.screen {
            say(
                out,
                format!(
                    "   screen         f = {}  x = {}  on [{} .. {}] at {} nodes/axis",
                    s.f,
                    s.x,
                    s.region.lower(),
                    s.region.upper(),
                    s.resolution
                ),
            )?;
        }
        say(
            out,
            format!(
                "   searches       sgd {}  multistart {} (reached oracle: {})",
                report.local_search_count, report.baseline.count, report.baseline.success
            ),
        )?;
        for c in &report.claims {
            let x = c.x.as_ref().map_or(String::new(), |x| format!(" x = {x}"));
            let claimed = c
                .claimed_f
                .map_or(String::new(), |f| format!(" claimed f = {f}"));
            let here = c.f_at_x.map_or(String::new(), |f| format!(" f here = {f}"));
            say(out, format!("   [paper] {}:{x}{claimed}{here}", c.label))?;
        }
        for c in &report.checks {
            say(
                out,
                format!(
                    "   [{}] {:<5} {}: expected {}, measured {}",
                    c.provenance.label(),
                    if c.passed { "ok" } else { "FAIL" },
                    c.description,
                    c.expected,
                    c.measured
                ),
            )?;
        }
        reports.push(report);
    }
    let summary = write_table(&dir, "bench-summary", &summary_table(&reports), format)?;
    let checks = write_table(&dir, "bench-checks", &checks_table(&reports), format)?;
    say(
        out,
        format!("wrote {} and {}", summary.display(), checks.display()),
    )?;

    let failed: Vec<_> = reports
        .iter()
        .flat_map(|r| {
            r.checks
                .iter()
                .filter(|c| !c.passed)
                .map(move |c| (&r.case, c))
        })
        .collect();
    if failed.is_empty() {
        return Ok(());
    }
    say(out, "failed expectations:")?;
    say(
        out,
        format!(
            "  {:<20} {:<36} {:<15} {:<28} {}",
            "case", "check", "provenance", "expected", "measured"
        ),
    )?;
    for (case, c) in &failed {
        say(
            out,
            format!(
                "  {:<20} {:<36} {:<15} {:<28} {}",
                case,
                c.description,
                c.provenance.label(),
                c.expected,
                c.measured
            ),
        )?;
    }
    Err(CliError::Expectations(failed.len()))
}

pub fn cmd_grad_check(args: &GradCheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let obj = seqdescent::lookup(&args.objective)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut points: Vec<Vector> = (0..args.samples)
        .map(|_| obj.domain().sample(&mut rng))
        .collect();
    for p in &args.points {
        points.push(Vector::new(parse_list(p)?)?);
    }
    if points.is_empty() {
        return Err(CliError::Usage(
            "nothing to check: --samples is 0 and no --point given".into(),
        ));
    }
    let report = obj.gradient_check(&points, args.rel_tol)?;
    let worst = report
        .checks
        .iter()
        .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
        .expect("at least one point");
    say(out, format!("objective       {}", obj.name()))?;
    say(out, format!("points          {}", report.checks.len()))?;
    say(out, format!("max rel error   {}", report.max_rel_error))?;
    say(out, format!("worst point     {}", worst.x))?;
    say(out, format!("tolerance       {}", report.rel_tol))?;
    say(
        out,
        format!(
            "result          {}",
            if report.passed { "pass" } else { "FAIL" }
        ),
    )?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Expectations(
            report
                .checks
                .iter()
                .filter(|c| c.rel_error > args.rel_tol)
                .count(),
        ))
    }
}

pub fn cmd_oracle(args: &OracleArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let obj = seqdescent::lookup(&args.objective)?;
    let region = match &args.domain {
        Some(s) => parse_box(&parse_list(s)?)?,
        None => obj.domain().clone(),
    };
    let counter = EvalCounter::new();
    let r = grid_oracle(
        &obj,
        &region,
        args.resolution,
        &SgdConfig::default().descent,
        &counter,
    )?;
    say(out, format!("objective     {}", obj.name()))?;
    say(
        out,
        format!(
            "region        [{} .. {}] at {} nodes/axis",
            region.lower(),
            region.upper(),
            r.resolution
        ),
    )?;
    say(
        out,
        format!("grid minimum  f = {}  x = {}", r.grid_f, r.grid_x),
    )?;
    say(out, format!("polished      f = {}  x = {}", r.f, r.x))?;
    Ok(())
}
