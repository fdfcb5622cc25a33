use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use wpcert::commands::{self, Command, Context};
use wpcert::{bundled, CliError, Format, RunConfig};

/// Wasserstein-p normal approximation certificates for sums of locally
/// dependent random variables.
#[derive(Parser)]
#[command(name = "wpcert", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Configuration file, or `bundled:NAME` for a shipped configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<String>,
    /// Master seed (overrides the configuration's `seed`).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Directory for report files (default: $OUTPUT_DIR if set).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Format of the report printed to standard output.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Remainder table and Wasserstein-p bounds for a model.
    Bound,
    /// Rate experiment: distances over a size ladder and log-log fits.
    Simulate,
    /// Cumulant matching for given targets.
    Match,
    /// Non-uniform tail bounds over a threshold grid.
    Tail,
    /// Stein-equation solutions and residuals.
    Stein,
    /// Golden-value checks of the exact oracles.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Table,
}

fn load_config(arg: Option<&str>, cmd: Command) -> Result<(RunConfig, Option<PathBuf>), CliError> {
    let Some(arg) = arg else {
        if cmd == Command::Selftest {
            return Ok((RunConfig::default(), None));
        }
        return Err(CliError::Input("--config is required for this command".into()));
    };
    if let Some(name) = arg.strip_prefix(bundled::PREFIX) {
        let text = bundled::get(name).ok_or_else(|| {
            CliError::Input(format!("unknown bundled config '{name}' (available: {})", bundled::names().join(", ")))
        })?;
        return Ok((RunConfig::parse(text)?, None));
    }
    let path = PathBuf::from(arg);
    let cfg = RunConfig::load(&path)?;
    let base = path.parent().map(|p| if p.as_os_str().is_empty() { PathBuf::from(".") } else { p.to_path_buf() });
    Ok((cfg, base))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cmd = match cli.command {
        Cmd::Bound => Command::Bound,
        Cmd::Simulate => Command::Simulate,
        Cmd::Match => Command::Match,
        Cmd::Tail => Command::Tail,
        Cmd::Stein => Command::Stein,
        Cmd::Selftest => Command::Selftest,
    };
    let format = match cli.format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
        FormatArg::Table => Format::Table,
    };
    let (cfg, base) = load_config(cli.config.as_deref(), cmd)?;
    cfg.check_allowed(&commands::known_keys())?;
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let ctx = Context::new(&cfg, cli.seed, workers, base)?;
    let out_dir = cli.out.clone().or_else(|| std::env::var_os("OUTPUT_DIR").map(PathBuf::from));

    let (output, failures) = commands::execute(cmd, &cfg, &ctx)?;
    print!("{}", output.render(format));
    if let Some(dir) = out_dir {
        output.write_to(&dir)?;
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::SelftestFailed(failures))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wpcert: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
