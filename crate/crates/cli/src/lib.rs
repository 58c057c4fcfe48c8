//! Argument parsing and command execution for the `bsd` binary.
//!
//! Exit codes: 0 when every executed check passed (or the command is
//! informational), 1 when a check failed or a flow left the domain, 2 for
//! usage and I/O errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use bsd_geometry::calculus::FdConfig;
use bsd_geometry::domains::{DomainSpec, FactorKind, DEFAULT_MARGIN};
use bsd_geometry::embeddings::flow_gradient;
use bsd_geometry::geometry::{dc_length_sq, gradient_length_sq, metric_at};
use bsd_geometry::verify::{run_check, run_suite, CheckParams, CheckReport, PotentialChoice, SuiteConfig, STATEMENTS};
use bsd_geometry::GeomError;
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use serde_json::json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Domains listed by `list-domains` when no `--domain` is given.
pub const REGISTRY_SAMPLES: [&str; 8] = [
    "disc",
    "ball:2",
    "ball:3",
    "polydisc:2",
    "polydisc:3",
    "typeI:2,2",
    "typeI:2,3",
    "typeI:3,3",
];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PotentialArg {
    Standard,
    Ko,
    KoPerturbed,
}

/// Numerical Kähler geometry of bounded symmetric domains.
///
/// Domains are products of `disc`, `ball:n`, `polydisc:n` and `typeI:p,q`
/// joined with `x`, e.g. `typeI:2,2xball:2`. Points are comma-separated
/// interleaved real,imaginary pairs: `--point 0.5,0,0,0.1` is
/// `(0.5, 0.1i)`.
#[derive(Debug, Parser)]
#[command(name = "bsd", version)]
struct Cli {
    #[command(subcommand)]
    command: CommandArg,

    /// Domain descriptor.
    #[arg(long, global = true, default_value = "disc")]
    domain: String,

    /// Ricci constant K > 0 of the metric.
    #[arg(long = "K", global = true, default_value_t = 1.0, allow_negative_numbers = true)]
    ricci: f64,

    /// Potential of the metric.
    #[arg(long, global = true, value_enum, default_value_t = PotentialArg::Standard)]
    potential: PotentialArg,

    /// Comma-separated phases of the disc coordinates (constant-length potentials).
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    theta: Vec<f64>,

    /// Unit boundary point of the ball factors, interleaved re,im.
    #[arg(long, global = true, allow_hyphen_values = true)]
    direction: Option<String>,

    /// Coefficient c of the perturbation 2 Re(c·(z¹)²) for `ko-perturbed`.
    #[arg(long, global = true, default_value_t = 0.1, allow_negative_numbers = true)]
    perturb: f64,

    /// Number of sample points (suite: overrides every entry).
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Sampler seed.
    #[arg(long, global = true, env = "BSD_SEED", default_value_t = 42)]
    seed: u64,

    /// Sampling margin in (0, 1): points stay inside the domain shrunk by it.
    #[arg(long, global = true, default_value_t = DEFAULT_MARGIN)]
    margin: f64,

    /// Step of first finite-difference derivatives.
    #[arg(long, global = true)]
    fd_step: Option<f64>,

    /// Disable Richardson extrapolation.
    #[arg(long, global = true)]
    no_richardson: bool,

    /// Tolerance override: `VALUE` for `check`, `ID=VALUE` for `suite`. Repeatable.
    #[arg(long, global = true)]
    tol: Vec<String>,

    /// Output format (default: csv for `flow`, json otherwise).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum CommandArg {
    /// Print rank, genus and L² of registered domains.
    ListDomains,
    /// Evaluate the potential and gradient length at a point.
    Eval {
        /// Point, interleaved re,im.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Run one check and print its reports.
    Check {
        /// One of: kahler-einstein, rigidity, lower-bound, disc-curvature,
        /// polydisc-curvature, gradient-identities, bochner, schwarz-pick,
        /// dc-relation.
        name: String,
    },
    /// Integrate the gradient flow and print the trajectory.
    Flow {
        /// Start point, interleaved re,im.
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        #[arg(long, default_value_t = 2.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Run the default check suite.
    Suite {
        /// Replace a factor's genus, e.g. `typeI:2,2=5` (negative control).
        #[arg(long)]
        genus_override: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    ListDomains,
    Eval { point: Vec<C64> },
    Check { statement: String },
    Flow { start: Vec<C64>, t_max: f64, dt: f64 },
    Suite { genus_override: Option<(FactorKind, u32)> },
}

/// Validated settings of one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub command: Command,
    pub domain: DomainSpec,
    pub potential: PotentialChoice,
    pub samples: Option<usize>,
    pub seed: u64,
    pub margin: f64,
    pub fd: FdConfig,
    /// `(None, t)` applies to the single check; `(Some(id), t)` to suite entries.
    pub tolerances: Vec<(Option<String>, f64)>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `re,im,re,im,…` into complex coordinates.
pub fn parse_point(s: &str) -> Result<Vec<C64>, CliError> {
    let xs = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage(format!("bad point {s:?}: {e}")))?;
    if xs.is_empty() || xs.len() % 2 != 0 {
        return Err(usage(format!("point {s:?} needs an even number of reals (re,im pairs)")));
    }
    Ok(xs.chunks(2).map(|p| C64::new(p[0], p[1])).collect())
}

fn parse_genus_override(s: &str) -> Result<(FactorKind, u32), CliError> {
    let (kind, genus) = s
        .split_once('=')
        .ok_or_else(|| usage(format!("genus override {s:?} must look like typeI:2,2=5")))?;
    let kind: FactorKind = kind.parse()?;
    let genus = genus
        .parse()
        .map_err(|e| usage(format!("bad genus in {s:?}: {e}")))?;
    Ok((kind, genus))
}

fn parse_tolerance(s: &str) -> Result<(Option<String>, f64), CliError> {
    let (id, value) = match s.split_once('=') {
        Some((id, v)) => (Some(id.to_string()), v),
        None => (None, s),
    };
    let t: f64 = value
        .parse()
        .map_err(|e| usage(format!("bad tolerance {s:?}: {e}")))?;
    if t.is_nan() || t < 0.0 {
        return Err(usage(format!("tolerance must be non-negative, got {t}")));
    }
    Ok((id, t))
}

/// Parses and validates a full argument vector (including the program name).
pub fn parse_args<I, T>(argv: I) -> Result<CliConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    if !(cli.ricci > 0.0 && cli.ricci.is_finite()) {
        return Err(usage(format!("--K must be positive, got {}", cli.ricci)));
    }
    if !(cli.margin > 0.0 && cli.margin < 1.0) {
        return Err(usage(format!("--margin must lie in (0, 1), got {}", cli.margin)));
    }
    if cli.samples == Some(0) {
        return Err(usage("--samples must be at least 1"));
    }
    let domain = DomainSpec::parse(&cli.domain, cli.ricci)?;
    let direction = cli.direction.as_deref().map(parse_point).transpose()?;
    let potential = match cli.potential {
        PotentialArg::Standard => PotentialChoice::Standard,
        PotentialArg::Ko => PotentialChoice::Ko {
            thetas: cli.theta.clone(),
            direction,
        },
        PotentialArg::KoPerturbed => PotentialChoice::KoPerturbed {
            thetas: cli.theta.clone(),
            direction,
            coeff: C64::new(cli.perturb, 0.0),
        },
    };
    let mut fd = FdConfig::default();
    if let Some(h) = cli.fd_step {
        fd = fd.with_step(h);
    }
    if cli.no_richardson {
        fd = fd.without_richardson();
    }
    fd.validate()?;
    let tolerances = cli.tol.iter().map(|t| parse_tolerance(t)).collect::<Result<Vec<_>, _>>()?;
    let command = match cli.command {
        CommandArg::ListDomains => Command::ListDomains,
        CommandArg::Eval { point } => Command::Eval {
            point: parse_point(&point)?,
        },
        CommandArg::Check { name } => {
            if !STATEMENTS.contains(&name.as_str()) {
                return Err(usage(format!("unknown check {name:?}; expected one of {}", STATEMENTS.join(", "))));
            }
            Command::Check { statement: name }
        }
        CommandArg::Flow { start, t_max, dt } => Command::Flow {
            start: parse_point(&start)?,
            t_max,
            dt,
        },
        CommandArg::Suite { genus_override } => Command::Suite {
            genus_override: genus_override.as_deref().map(parse_genus_override).transpose()?,
        },
    };
    let format = cli.format.unwrap_or(match command {
        Command::Flow { .. } => Format::Csv,
        _ => Format::Json,
    });
    Ok(CliConfig {
        command,
        domain,
        potential,
        samples: cli.samples,
        seed: cli.seed,
        margin: cli.margin,
        fd,
        tolerances,
        output: cli.output,
        format,
    })
}

/// Writes the command's output to `out` and returns the exit code.
pub fn run_to<W: Write>(cfg: &CliConfig, out: W) -> Result<i32, CliError> {
    match &cfg.command {
        Command::ListDomains => list_domains(cfg, out),
        Command::Eval { point } => eval(cfg, point, out),
        Command::Check { statement } => {
            let mut params = CheckParams {
                samples: cfg.samples.unwrap_or(50),
                seed: cfg.seed,
                margin: cfg.margin,
                tolerance: None,
                fd: cfg.fd,
            };
            params.tolerance = cfg
                .tolerances
                .iter()
                .rev()
                .find(|(id, _)| id.as_deref().is_none_or(|id| id == statement))
                .map(|(_, t)| *t);
            let reports = run_check(statement, &cfg.domain, &cfg.potential, &params)?;
            emit_reports(cfg.format, &reports, out)
        }
        Command::Flow { start, t_max, dt } => flow(cfg, start, *t_max, *dt, out),
        Command::Suite { genus_override } => {
            let mut suite = SuiteConfig::default().with_seed(cfg.seed);
            suite.margin = cfg.margin;
            suite.fd = cfg.fd;
            suite.genus_override = *genus_override;
            if let Some(n) = cfg.samples {
                suite.entries.iter_mut().for_each(|e| e.samples = n);
            }
            for (id, t) in &cfg.tolerances {
                let id = id
                    .clone()
                    .ok_or_else(|| usage("suite tolerances must be given as ID=VALUE"))?;
                suite.tolerances.push((id, *t));
            }
            let reports = run_suite(&suite)?;
            emit_reports(cfg.format, &reports, out)
        }
    }
}

/// Runs the command against `--output` or stdout; errors become exit code 2.
pub fn run(cfg: &CliConfig) -> i32 {
    let result = match &cfg.output {
        Some(path) => File::create(path)
            .map_err(CliError::from)
            .and_then(|f| run_to(cfg, BufWriter::new(f))),
        None => run_to(cfg, io::stdout().lock()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bsd: {e}");
            EXIT_USAGE
        }
    }
}

fn emit_reports<W: Write>(format: Format, reports: &[CheckReport], mut out: W) -> Result<i32, CliError> {
    match format {
        Format::Json => {
            for r in reports {
                writeln!(out, "{}", serde_json::to_string(r)?)?;
            }
            out.flush()?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CheckReport::COLUMNS)?;
            for r in reports {
                w.write_record(r.to_row())?;
            }
            w.flush()?;
        }
    }
    for r in reports.iter().filter(|r| !r.passed) {
        log::warn!("{} on {} failed: residual {:e} > {:e}", r.statement_id, r.domain, r.max_residual, r.tolerance);
    }
    Ok(if reports.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_FAILED })
}

fn list_domains<W: Write>(cfg: &CliConfig, mut out: W) -> Result<i32, CliError> {
    let k = cfg.domain.ricci_constant();
    let domains: Vec<DomainSpec> = REGISTRY_SAMPLES
        .iter()
        .map(|d| DomainSpec::parse(d, k))
        .collect::<Result<_, _>>()?;
    let rows: Vec<serde_json::Value> = domains
        .iter()
        .map(|d| {
            let genus: Vec<u32> = d.factors().iter().map(|f| f.genus()).collect();
            json!({
                "domain": d.descriptor(),
                "dim": d.dim(),
                "rank": d.rank(),
                "genus": genus.iter().map(u32::to_string).collect::<Vec<_>>().join("+"),
                "khl_length_sq": d.khl_length_sq(),
                "gradient_length_sq": d.khl_length_sq() / k,
                "disc_curvature": -2.0 * k / d.khl_length_sq(),
            })
        })
        .collect();
    write_table(cfg.format, &rows, &mut out)?;
    Ok(EXIT_OK)
}

fn write_table<W: Write>(format: Format, rows: &[serde_json::Value], out: &mut W) -> Result<(), CliError> {
    match format {
        Format::Json => {
            for r in rows {
                writeln!(out, "{r}")?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            if let Some(first) = rows.first().and_then(|r| r.as_object()) {
                w.write_record(first.keys())?;
            }
            for r in rows {
                let obj = r.as_object().expect("rows are objects");
                w.write_record(obj.values().map(|v| match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                }))?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}

fn eval<W: Write>(cfg: &CliConfig, point: &[C64], mut out: W) -> Result<i32, CliError> {
    let m = cfg.potential.build(&cfg.domain, cfg.fd)?;
    let d = &cfg.domain;
    if point.len() != d.dim() {
        return Err(usage(format!("--point has {} coordinates, {} needs {}", point.len(), d.descriptor(), d.dim())));
    }
    let row = json!({
        "domain": d.descriptor(),
        "potential": cfg.potential.name(),
        "phi": m.potential().eval(point)?,
        "gradient_length_sq": gradient_length_sq(&m, point)?,
        "dc_length_sq": dc_length_sq(&m, point)?,
        "bound": d.khl_length_sq() / d.ricci_constant(),
        "metric_log_det": metric_at(&m, point)?.log_det()?,
    });
    write_table(cfg.format, &[row], &mut out)?;
    Ok(EXIT_OK)
}

fn flow<W: Write>(cfg: &CliConfig, start: &[C64], t_max: f64, dt: f64, mut out: W) -> Result<i32, CliError> {
    let m = cfg.potential.build(&cfg.domain, cfg.fd)?;
    let traj = flow_gradient(&m, start, t_max, dt, cfg.margin)?;
    match cfg.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            let mut header = vec!["t".to_string()];
            for i in 1..=start.len() {
                header.push(format!("re{i}"));
                header.push(format!("im{i}"));
            }
            w.write_record(&header)?;
            for (t, p) in traj.times.iter().zip(&traj.points) {
                let mut row = vec![t.to_string()];
                for c in p.iter() {
                    row.push(c.re.to_string());
                    row.push(c.im.to_string());
                }
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            for (t, p) in traj.times.iter().zip(&traj.points) {
                let z: Vec<[f64; 2]> = p.iter().map(|c| [c.re, c.im]).collect();
                writeln!(out, "{}", json!({ "t": t, "z": z }))?;
            }
        }
    }
    out.flush()?;
    if traj.escaped {
        eprintln!(
            "bsd: flow left the domain (margin {}) after t = {}",
            cfg.margin,
            traj.times.last().copied().unwrap_or(0.0)
        );
        return Ok(EXIT_FAILED);
    }
    Ok(EXIT_OK)
}
