use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavesrc_lab::commands::{self, Options};

#[derive(Parser)]
#[command(name = "wavesrc", version, about = "Time-domain inverse source experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run config (TOML).
    #[arg(long, global = true, default_value = "configs/default.toml")]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise boundary data.
    Forward {
        /// Also export the dataset as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Reconstruct the source from a dataset.
    Invert {
        /// Dataset container; defaults to `<out>/dataset.bin`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run the stability sweep.
    Sweep,
    /// Run the verification checks.
    Check {
        /// Check this dataset instead of synthesising clean data.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> wavesrc_lab::Result<bool> {
    let opts = Options { config: cli.global.config, out: cli.global.out, seed: cli.global.seed };
    match cli.command {
        Command::Forward { csv } => print(&commands::forward(&opts, csv)?.lines),
        Command::Invert { dataset } => {
            let path = match dataset {
                Some(p) => p,
                None => opts.load()?.output.join("dataset.bin"),
            };
            print(&commands::invert(&opts, &path)?.lines)
        }
        Command::Sweep => {
            let out = commands::sweep(&opts)?;
            print(&out.lines);
            return Ok(out.report.verdict.passed);
        }
        Command::Check { dataset } => {
            let report = commands::check(&opts, dataset.as_deref())?;
            for r in &report.results {
                println!("{r}");
            }
            let ok = report.passed();
            println!("{}", if ok { "all checks PASS" } else { "some checks FAIL" });
            return Ok(ok);
        }
    }
    Ok(true)
}

fn print(lines: &[String]) {
    for l in lines {
        println!("{l}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.global.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let is_sweep = matches!(cli.command, Command::Sweep);
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        // A failed verdict is a result, not an error.
        Ok(false) if is_sweep => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
