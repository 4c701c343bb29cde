use std::path::PathBuf;
use std::process::ExitCode;

use alpha_lattice_cli::{load_spec, parse_spec, run, Command, RunOptions, STANDARD_SPEC};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Target {
    /// Use the `command` named in the spec.
    Run,
    KernelCheck,
    Moments,
    Simulate,
    GradientDecay,
    FiniteSpeed,
    TripleNorm,
    Galerkin,
    Mixing,
    Duhamel,
    Limit,
}

impl Target {
    fn command(self) -> Option<Command> {
        Some(match self {
            Target::Run => return None,
            Target::KernelCheck => Command::KernelCheck,
            Target::Moments => Command::Moments,
            Target::Simulate => Command::Simulate,
            Target::GradientDecay => Command::GradientDecay,
            Target::FiniteSpeed => Command::FiniteSpeed,
            Target::TripleNorm => Command::TripleNorm,
            Target::Galerkin => Command::Galerkin,
            Target::Mixing => Command::Mixing,
            Target::Duhamel => Command::Duhamel,
            Target::Limit => Command::Limit,
        })
    }
}

/// Numerical checks for lattice systems driven by alpha-stable noise.
///
/// Exit status: 0 when every check passes, 1 when a check fails or the run
/// stops early, 2 for an invalid spec or arguments, 3 for I/O errors.
#[derive(Debug, Parser)]
#[command(name = "alpha-lattice", version)]
struct Cli {
    #[arg(value_enum)]
    command: Target,
    /// Spec document (TOML) or a previous run's manifest.json; defaults to the
    /// shipped standard small model.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Override `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the spec's output_dir, else out/<command>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override `sim.n_paths`.
    #[arg(long)]
    paths: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let spec = match &cli.spec {
        Some(path) => load_spec(path),
        None => parse_spec(STANDARD_SPEC).map_err(Into::into),
    };
    let spec = match spec {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if matches!(e, alpha_lattice_cli::RunError::Io { .. }) { 3 } else { 2 });
        }
    };
    let command = match cli.command.command().or(spec.command) {
        Some(c) => c,
        None => {
            eprintln!("error: the spec names no command; pass one explicitly");
            return ExitCode::from(2);
        }
    };
    if let (Some(named), Some(wanted)) = (spec.command, cli.command.command()) {
        if named != wanted {
            eprintln!("note: spec names command {named}; running {wanted} as requested");
        }
    }
    if cli.workers == Some(0) {
        eprintln!("error: --workers must be positive");
        return ExitCode::from(2);
    }
    let opts = RunOptions {
        seed: cli.seed,
        paths: cli.paths,
        out: cli.out.clone(),
        workers: cli.workers,
    };
    let outcome = match run(&spec, command, &opts) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(match e {
                alpha_lattice_cli::RunError::Spec(_) => 2,
                alpha_lattice_cli::RunError::Io { .. } => 3,
            });
        }
    };
    let digest = std::fs::read_to_string(outcome.out_dir.join(alpha_lattice_cli::report::DIGEST_FILE)).unwrap_or_default();
    if outcome.pass() {
        if !cli.quiet {
            print!("{digest}");
            println!("wrote {}", outcome.out_dir.display());
        }
        ExitCode::SUCCESS
    } else {
        if !cli.quiet {
            print!("{digest}");
        }
        if let Some(e) = &outcome.report.error {
            eprintln!("{command} stopped early: {e}");
        }
        for name in outcome.report.failed() {
            eprintln!("failed check: {name}");
        }
        ExitCode::from(1)
    }
}
