use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use procmap_cli::args::Cli;
use procmap_cli::commands::run;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(e.exit_code());
        }
    };
    for note in &outcome.notes {
        eprintln!("{note}");
    }
    let text = outcome.report.render(cli.format);
    let written = match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(if outcome.failed { 1 } else { 0 })
}
