mod commands;
mod parse;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use elliptic_core::Error;

#[derive(Parser)]
#[command(name = "elliptic", version, about = "Audits, solvers and certificates for elliptic structures on C²")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Structure document (JSON) or, for `crofton`, a surface patch.
    #[arg(long)]
    #[serde(skip)]
    pub input: Option<PathBuf>,
    /// Directory for report.json and CSV output; stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Ellipticity and twisted-structure audits of a fiber.
    Audit(commands::AuditArgs),
    /// Local curve through a point with a prescribed jet.
    Solve(commands::SolveArgs),
    /// Roots certifying that the dual of the example field is not linear.
    DualNonlinearity(commands::DualArgs),
    /// Monte Carlo Crofton pairing of a surface patch with a line family.
    Crofton(commands::CroftonArgs),
    /// Sampled positivity of a 2-form on the planes of a field.
    Taming(commands::TamingArgs),
    /// Plücker and genus arithmetic for nodal-cuspidal profiles.
    Plucker(commands::PluckerArgs),
    /// Ellipticity along the retraction of a fiber to a constant one.
    Retract(commands::RetractArgs),
}

pub enum Failure {
    Core(Error),
    Usage(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

pub type CmdResult<T> = Result<T, Failure>;

fn run(cli: Cli) -> CmdResult<()> {
    let start = Instant::now();
    let (name, common, out) = match &cli.command {
        Command::Audit(a) => ("audit", &a.common, commands::audit(a)?),
        Command::Solve(a) => ("solve", &a.common, commands::solve(a)?),
        Command::DualNonlinearity(a) => ("dual-nonlinearity", &a.common, commands::dual(a)?),
        Command::Crofton(a) => ("crofton", &a.common, commands::crofton(a)?),
        Command::Taming(a) => ("taming", &a.common, commands::taming(a)?),
        Command::Plucker(a) => ("plucker", &a.common, commands::plucker(a)?),
        Command::Retract(a) => ("retract", &a.common, commands::retract(a)?),
    };
    let inputs = json!({ "command": name, "args": out.args, "input": out.input });
    let rep = report::RunReport {
        command: name.to_string(),
        version: elliptic_core::VERSION.to_string(),
        inputs_digest: report::digest(&inputs),
        seed: out.seed,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        payload: out.payload,
        warnings: out.warnings,
    };
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    let format = common.format.unwrap_or(out.default_format);
    if format == Format::Csv && out.csv.is_none() {
        return Err(Failure::Usage(format!("`{name}` has no CSV output")));
    }
    let text = serde_json::to_string_pretty(&rep).expect("reports serialize") + "\n";
    match &common.out {
        Some(dir) => {
            let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", dir.display()));
            report::write(dir, "report.json", &text).map_err(io)?;
            if format == Format::Csv {
                report::write(dir, &format!("{name}.csv"), out.csv.as_deref().unwrap_or_default()).map_err(io)?;
            }
        }
        None => {
            let body = if format == Format::Csv { out.csv.unwrap_or_default() } else { text };
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(body.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(Failure::Io(format!("stdout: {e}"))),
                _ => {}
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
