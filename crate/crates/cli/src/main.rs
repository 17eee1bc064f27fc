mod commands;
mod config;
mod report;
mod validate;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use commands::{GridPoint, Outcome, SpectralInput};
use config::{CliError, CliResult, EXIT_CONFIG, EXIT_VERDICT};
use serde_json::Value;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "wplab", version, about = "Weil-Petersson and Kähler-Einstein numerical laboratory", args_override_self = true)]
struct Cli {
    /// JSON object of flag values for the subcommand; flags given on the
    /// command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackendArg {
    Geometric,
    Spectral,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Solve for the Kähler-Einstein metric on a mesh.
    KeSolve {
        /// Mesh file, or `fixture:<level>` for the built-in genus-2 surface.
        #[arg(long)]
        mesh: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 20)]
        max_iter: usize,
        /// Amplitude of the bump applied to the seed metric.
        #[arg(long, default_value_t = 0.5)]
        perturb: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weil-Petersson norm and φ at points of a Schiffer family.
    Wp {
        /// Family JSON file, or `schiffer:<level>`.
        #[arg(long)]
        family: String,
        /// `center` or `i,j`; repeat for several points.
        #[arg(long, default_value = "center")]
        at: Vec<GridPoint>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Curvature formulas of twisted Hodge bundles.
    Curvature {
        #[arg(long, value_enum)]
        backend: BackendArg,
        /// Geometric: family JSON or `schiffer:<level>`. Spectral: model
        /// JSON or `random:<count>:<seed>`.
        #[arg(long)]
        input: String,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Wall-clock limit in seconds for the Hessian oracle.
        #[arg(long)]
        time_limit: Option<f64>,
    },
    /// Finsler metric with negative holomorphic curvature.
    Finsler {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
    },
    /// Ahlfors-Schwarz comparison of a density on the unit disk.
    Schwarz {
        /// Disk metric JSON, `poincare:<A>` or `vanishing:<A>`.
        #[arg(long)]
        metric: String,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run the full oracle suite.
    Validate {
        #[arg(long, default_value_t = 2)]
        level: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "validate-report")]
        out_dir: PathBuf,
    },
}

/// Turns a JSON object into `--flag value` arguments.
fn config_args(path: &Path) -> CliResult<Vec<OsString>> {
    let bytes = config::read_input(path)?;
    let value: Value = serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let Value::Object(map) = value else {
        return Err(CliError::Config(format!("{}: expected a JSON object", path.display())));
    };
    let mut out = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        let items = match v {
            Value::Array(items) => items,
            other => vec![other],
        };
        for item in items {
            match item {
                Value::String(s) => out.extend([flag.clone().into(), s.into()]),
                Value::Number(n) => out.extend([flag.clone().into(), n.to_string().into()]),
                other => return Err(CliError::Config(format!("{}: unsupported value for {key}: {other}", path.display()))),
            }
        }
    }
    Ok(out)
}

/// Value of `--config` (either `--config PATH` or `--config=PATH`).
fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    argv.iter().enumerate().find_map(|(i, a)| {
        let a = a.to_str()?;
        if a == "--config" {
            argv.get(i + 1).map(PathBuf::from)
        } else {
            a.strip_prefix("--config=").map(PathBuf::from)
        }
    })
}

fn parse() -> CliResult<Cli> {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let Some(path) = config_path(&argv) else {
        return Ok(Cli::try_parse_from(&argv).unwrap_or_else(|e| e.exit()));
    };
    let names: Vec<String> = Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect();
    let Some(pos) = argv.iter().skip(1).position(|a| a.to_str().is_some_and(|a| names.iter().any(|n| n == a))) else {
        return Ok(Cli::try_parse_from(&argv).unwrap_or_else(|e| e.exit()));
    };
    let pos = pos + 1;
    let mut merged = argv[..=pos].to_vec();
    merged.extend(config_args(&path)?);
    merged.extend_from_slice(&argv[pos + 1..]);
    Cli::try_parse_from(&merged).map_err(|e| CliError::Config(e.to_string()))
}

fn spectral_input(arg: &str) -> CliResult<(SpectralInput<'_>, Option<String>)> {
    if let Some(rest) = arg.strip_prefix("random:") {
        let (count, seed) = rest.split_once(':').unwrap_or((rest, "0"));
        let bad = || CliError::Config(format!("expected random:<count>:<seed>, got {arg:?}"));
        return Ok((SpectralInput::Random { count: count.parse().map_err(|_| bad())?, seed: seed.parse().map_err(|_| bad())? }, None));
    }
    let bytes = config::read_input(Path::new(arg))?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::Config(format!("{arg} is not UTF-8")))?;
    Ok((SpectralInput::Random { count: 0, seed: 0 }, Some(text)))
}

fn run(cli: Cli) -> CliResult<(Outcome, PathBuf)> {
    let threads = config::threads()?;
    Ok(match cli.cmd {
        Cmd::KeSolve { mesh, tol, max_iter, perturb, out } => (commands::ke_solve(&mesh, tol, max_iter, perturb)?, out),
        Cmd::Wp { family, at, report } => {
            let (spec, bytes) = config::family_arg(&family)?;
            (commands::wp(&spec, bytes.as_deref(), &at, threads)?, report)
        }
        Cmd::Curvature { backend: BackendArg::Geometric, input, report, seed, time_limit } => {
            let (spec, bytes) = config::family_arg(&input)?;
            (commands::curvature_geometric(&spec, bytes.as_deref(), seed, threads, time_limit)?, report)
        }
        Cmd::Curvature { backend: BackendArg::Spectral, input, report, seed, .. } => {
            let outcome = match spectral_input(&input)? {
                (_, Some(text)) => commands::curvature_spectral(SpectralInput::File { name: &input, text: &text }, seed)?,
                (random, None) => commands::curvature_spectral(random, seed)?,
            };
            (outcome, report)
        }
        Cmd::Finsler { n, c, trials, seed, report } => (commands::finsler(n, c, trials, seed)?, report),
        Cmd::Schwarz { metric, report } => {
            let (spec, bytes) = config::disk_arg(&metric)?;
            (commands::schwarz(&spec, bytes.as_deref())?, report)
        }
        Cmd::Validate { level, seed, out_dir } => (validate::validate(level, seed, threads)?, out_dir.join("validate.json")),
    })
}

fn main() -> ExitCode {
    let result = parse().and_then(run);
    let (outcome, path) = match result {
        Ok(x) => x,
        Err(e) => {
            eprintln!("wplab: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let digest = match report::emit(&path, &outcome.report, &outcome.tables) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("wplab: cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let failed = outcome.report.failed();
    println!("{} checks, {} failed; report {} sha256 {digest}", outcome.report.checks.len(), failed.len(), path.display());
    for c in &failed {
        eprintln!("FAIL {}: {:e} (required {} {:e}; {})", c.name, c.value, serde_json::to_string(&c.comparison).unwrap_or_default(), c.tolerance, c.oracle);
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERDICT)
    }
}
