use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flockmf_cli::acceptance::{verify_all, Mutation, Suite};
use flockmf_cli::config::{ExperimentConfig, ExperimentKind, SCHEMA};
use flockmf_cli::plot::{emit_plot_data, PlotKind};
use flockmf_cli::run::run_dir;
use flockmf_cli::{run_experiment, CliError, RunOptions};

/// Simulations and diagnostics for Cucker–Smale flocking with nonlinear velocity couplings.
#[derive(Parser)]
#[command(name = "flockmf", version)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Root of the run directories.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Recompute even if the run directory exists.
    #[arg(long, global = true)]
    force: bool,
    /// Print an annotated config and exit.
    #[arg(long)]
    print_schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the particle system and record diameters.
    Simulate,
    /// Measure the decay rates of the velocity diameter.
    Rates,
    /// Distance between two solutions against the stability envelope.
    Stability,
    /// Empirical Cauchy test between ensembles of increasing size.
    Cauchy,
    /// Coupling between N-agent systems and the mean-field flow.
    Poc,
    /// Noisy coupling on the torus.
    Stochastic,
    /// Comparison-lemma grid and Lyapunov functionals.
    Lemmas,
    /// Run the acceptance criteria.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        suite: Suite,
        /// Flip the sign of the alignment map in the inequality checks.
        #[arg(long)]
        mutate_alignment_sign: bool,
    },
    /// Write plot-ready series for a finished run.
    PlotData {
        /// Run directory; defaults to the directory of --config under --out.
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: PlotKind,
    },
}

fn load(cli: &Cli, kind: Option<ExperimentKind>) -> Result<ExperimentConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::MissingInput("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg = match kind {
        Some(k) => ExperimentConfig::from_toml_as(&text, k)?,
        None => ExperimentConfig::from_toml(&text)?,
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    Ok(cfg)
}

fn experiment(cli: &Cli, kind: ExperimentKind) -> Result<bool, CliError> {
    let cfg = load(cli, Some(kind))?;
    let (manifest, dir) = run_experiment(&cfg, &cli.out, &RunOptions { force: cli.force })?;
    for c in &manifest.checks {
        println!("{}", c.line());
    }
    if let Some(f) = &manifest.failure {
        eprintln!("run failed: {f}");
    }
    println!("{} {}", if manifest.passed { "PASS" } else { "FAIL" }, dir.display());
    Ok(manifest.passed)
}

fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    let kind = match &cli.command {
        None => return Err(CliError::MissingInput("a subcommand is required (see --help)".into())),
        Some(Command::Simulate) => ExperimentKind::Simulate,
        Some(Command::Rates) => ExperimentKind::FlockingRates,
        Some(Command::Stability) => ExperimentKind::Stability,
        Some(Command::Cauchy) => ExperimentKind::Cauchy,
        Some(Command::Poc) => ExperimentKind::Poc,
        Some(Command::Stochastic) => ExperimentKind::StochasticCoupling,
        Some(Command::Lemmas) => ExperimentKind::LemmaLab,
        Some(Command::Verify { suite, mutate_alignment_sign }) => {
            if let Some(t) = cli.threads {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            let mutation = if *mutate_alignment_sign { Mutation::FlipAlignmentSign } else { Mutation::None };
            let report = verify_all(*suite, mutation, |r| println!("{}", r.line()));
            fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
            let name = format!("verify-{}.json", if *suite == Suite::Fast { "fast" } else { "full" });
            let path = cli.out.join(name);
            let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Manifest(e.to_string()))?;
            fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
            println!("{} summary: {}", if report.passed { "PASS" } else { "FAIL" }, path.display());
            return Ok(report.passed);
        }
        Some(Command::PlotData { run, kind }) => {
            let dir = match run {
                Some(d) => d.clone(),
                None => run_dir(&cli.out, &load(cli, None)?),
            };
            println!("{}", emit_plot_data(&dir, *kind)?.display());
            return Ok(true);
        }
    };
    experiment(cli, kind)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_schema {
        print!("{SCHEMA}");
        return ExitCode::SUCCESS;
    }
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
