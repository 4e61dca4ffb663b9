use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use scarlab::{load_config, run, Experiment};

/// Large-N scar kinetics experiments.
#[derive(Parser)]
#[command(name = "scarlab", version)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: Experiment,
    /// Path to a `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Also write an SVG line plot for every CSV.
    #[arg(long)]
    emit_svg: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match load_config(&cli.config, Some(cli.experiment)) {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    cfg.emit_svg |= cli.emit_svg;
    match run(&cfg) {
        Ok(report) => {
            // A closed stdout (e.g. piped into `head`) must not fail a finished run.
            let mut out = std::io::stdout().lock();
            for (k, v) in &report.outcome.derived {
                let _ = writeln!(out, "{k} = {v}");
            }
            for f in &report.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
