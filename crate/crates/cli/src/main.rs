use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nonlocal_cli::run::output_root;
use nonlocal_cli::{emit_plots, run_experiment, selftest, CliError, ExperimentConfig, RunManifest};

#[derive(Parser)]
#[command(name = "nonlocal", version, about = "Nonlocal-to-local convergence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the k-sweep described by a config and write its outputs.
    Run {
        config: PathBuf,
        /// Output directory (defaults to `output.dir` next to the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (overrides `output.workers`).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Re-render the SVG plots of a finished run.
    Plot { manifest: PathBuf },
    /// Run the built-in invariant battery.
    Selftest,
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().filter(|p| !p.as_os_str().is_empty()).map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::load(path).map_err(|i| CliError::Validation(vec![i]))
}

fn print_manifest(m: &RunManifest, dir: &Path) {
    println!("run `{}` -> {}", m.name, dir.display());
    for (k, g) in m.summary.ks.iter().zip(&m.summary.sup_gaps) {
        println!("  k = {k:>8}  sup gap = {g:.6e}");
    }
    match (&m.summary.rate, &m.summary.rate_note) {
        (Some(r), _) => println!("  fitted slope {:.4} ({:?})", r.fitted_slope, r.status),
        (None, Some(note)) => println!("  no rate fit: {note}"),
        _ => {}
    }
    for c in &m.checks {
        println!("  check {}: {} ({})", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    println!("  {} files, {:.1}s", m.outputs.len(), m.wall_clock_seconds);
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, workers } => {
            let mut cfg = load(&config)?;
            if let Some(w) = workers {
                cfg.output.workers = w;
            }
            let base = base_dir(&config);
            let dir = output_root(&cfg, &base, out.as_deref());
            match run_experiment(&cfg, &base, &dir) {
                Ok(m) => {
                    print_manifest(&m, &dir);
                    Ok(())
                }
                Err(CliError::Acceptance(m)) => {
                    print_manifest(&m, &dir);
                    Err(CliError::Acceptance(m))
                }
                Err(e) => Err(e),
            }
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let issues = cfg.validate(&base_dir(&config));
            if issues.is_empty() {
                println!("ok: {}", config.display());
                Ok(())
            } else {
                Err(CliError::Validation(issues))
            }
        }
        Command::Plot { manifest } => {
            for p in emit_plots(&manifest)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Selftest => {
            let results = selftest::run_selftest();
            for c in &results {
                println!("{}: {} | {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
            }
            let failed = results.iter().filter(|c| !c.passed).count();
            println!("selftest: {}/{} passed", results.len() - failed, results.len());
            if failed > 0 {
                std::process::exit(3);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
