//! `fracvar`: batch experiments on dyadic grids. Each subcommand writes a
//! `summary.json` and CSV tables into `<out>/<command>/`.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Status;
use output::Output;

const EXIT_USAGE: u8 = 1;
const EXIT_PRECONDITION: u8 = 2;
const EXIT_REPORT: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "fracvar",
    version,
    about = "Fractional variation, degree fields and fractal domains on dyadic grids"
)]
struct Cli {
    /// Output root; each command writes into a subdirectory named after it.
    #[arg(long, global = true, env = "FRACVAR_OUT", default_value = "fracvar-out")]
    out: PathBuf,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Snowflake ledger, indicator raster and box-counting dimension.
    Koch(commands::KochArgs),
    /// Whitney decomposition of a domain.
    Whitney(commands::WhitneyArgs),
    /// Dyadic decomposition with rate fit and interpolation checks.
    Decompose(commands::DecomposeArgs),
    /// Lower bound for the fractional variation over a test-map suite.
    Varest(commands::VarestArgs),
    /// Degree field of a sampled map.
    Degree(commands::DegreeArgs),
    /// Pushforward of a block-constant function.
    Pushforward(commands::PushforwardArgs),
    /// Circle Stieltjes sums and Young ratios.
    Young(commands::YoungArgs),
    /// Decomposition certificate from a mass ledger.
    Certify(commands::CertifyArgs),
    /// Runs every acceptance check.
    Report(commands::ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Koch(_) => "koch",
            Command::Whitney(_) => "whitney",
            Command::Decompose(_) => "decompose",
            Command::Varest(_) => "varest",
            Command::Degree(_) => "degree",
            Command::Pushforward(_) => "pushforward",
            Command::Young(_) => "young",
            Command::Certify(_) => "certify",
            Command::Report(_) => "report",
        }
    }

    fn run(&self, out: Output) -> fracvar::Result<Status> {
        match self {
            Command::Koch(a) => commands::koch(a, out),
            Command::Whitney(a) => commands::whitney_cmd(a, out),
            Command::Decompose(a) => commands::decompose_cmd(a, out),
            Command::Varest(a) => commands::varest(a, out),
            Command::Degree(a) => commands::degree(a, out),
            Command::Pushforward(a) => commands::pushforward_cmd(a, out),
            Command::Young(a) => commands::young(a, out),
            Command::Certify(a) => commands::certify(a, out),
            Command::Report(a) => commands::report(a, out),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let name = cli.command.name();
    let result = Output::new(cli.out.join(name)).and_then(|out| cli.command.run(out));
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::ReportFailed) => {
            eprintln!("error: some acceptance checks failed");
            ExitCode::from(EXIT_REPORT)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_PRECONDITION)
        }
    }
}
