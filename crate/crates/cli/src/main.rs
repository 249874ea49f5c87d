use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uncle_forge::{
    run_cached, Backend, CliError, ConfigOverrides, Experiment, ExperimentConfig, RunDocument, SizeRange, Store,
    EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_OK,
};

#[derive(Parser)]
#[command(name = "uncle-forge", version, about = "Parent and uncle Hamiltonian experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Null spaces and lowest excitations of GHZ parent and uncle chains.
    GhzGap,
    /// Full uncle spectra and their level spacing.
    Density,
    /// Perturbed kernels as epsilon goes to zero.
    EpsilonLimit,
    /// Torus ground spaces, parity obstructions and pattern counts.
    ToricGround,
    /// Rayleigh quotients of domain-wall and two-defect states.
    PhiSweep,
    /// Intersection of the two window kernels on a 2x3 patch.
    Prop1,
    /// Energies of concatenated localized states.
    Additivity,
    /// Every experiment in turn.
    All,
}

#[derive(Args)]
struct Common {
    /// JSON file with experiment config fields; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: $UNCLE_FORGE_OUT, then ./uncle-forge-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sizes as A..B or A..B:STEP.
    #[arg(long, global = true)]
    sizes: Option<SizeRange>,
    #[arg(long, global = true, value_enum)]
    backend: Option<Backend>,
    /// Comma-separated r values.
    #[arg(long, global = true, value_delimiter = ',')]
    r_values: Option<Vec<usize>>,
    /// Comma-separated, strictly descending epsilon values.
    #[arg(long, global = true, value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    iteration_cap: Option<usize>,
    #[arg(long, global = true)]
    tau_null: Option<f64>,
    #[arg(long, global = true)]
    tau_gap: Option<f64>,
    #[arg(long, global = true)]
    lanczos_tol: Option<f64>,
    /// Print the result documents as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// No summary on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    /// Recompute even when a cached result exists.
    #[arg(long, global = true)]
    force: bool,
}

fn overrides(common: &Common) -> Result<ConfigOverrides, CliError> {
    let file = match &common.config {
        Some(p) => ConfigOverrides::from_json(&std::fs::read_to_string(p)?)?,
        None => ConfigOverrides::default(),
    };
    let mut tolerances = None;
    if common.tau_null.is_some() || common.tau_gap.is_some() || common.lanczos_tol.is_some() {
        let mut t = file.tolerances.clone().unwrap_or_default();
        t.tau_null = common.tau_null.unwrap_or(t.tau_null);
        t.tau_gap = common.tau_gap.unwrap_or(t.tau_gap);
        t.lanczos = common.lanczos_tol.unwrap_or(t.lanczos);
        tolerances = Some(t);
    }
    let cli = ConfigOverrides {
        experiment: None,
        sizes: common.sizes,
        r_values: common.r_values.clone(),
        eps_grid: common.eps_grid.clone(),
        seed: common.seed,
        tolerances,
        iteration_cap: common.iteration_cap,
        out: common.out.clone(),
        backend: common.backend,
    };
    Ok(file.merged(cli))
}

fn experiments(cmd: Command) -> Vec<Experiment> {
    match cmd {
        Command::GhzGap => vec![Experiment::GhzGap],
        Command::Density => vec![Experiment::Density],
        Command::EpsilonLimit => vec![Experiment::EpsilonLimit],
        Command::ToricGround => vec![Experiment::ToricGround],
        Command::PhiSweep => vec![Experiment::PhiSweep],
        Command::Prop1 => vec![Experiment::Prop1],
        Command::Additivity => vec![Experiment::Additivity],
        Command::All => Experiment::ALL.to_vec(),
    }
}

fn execute(cli: &Cli) -> Result<Vec<RunDocument>, CliError> {
    let o = overrides(&cli.common)?;
    let store = Store::open(Store::resolve_root(o.out.as_deref()))?;
    let mut docs = Vec::new();
    for exp in experiments(cli.command) {
        let config = ExperimentConfig::resolve(exp, &o)?;
        let (doc, cached) = run_cached(&config, &store, cli.common.force)?;
        if !cli.common.quiet {
            let note = if cached { " (cached)" } else { "" };
            eprintln!("{}{note}: {} records -> {}", doc.experiment, doc.records.len(), store.json_path(&config).display());
            for c in &doc.checks {
                eprintln!("  [{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
            }
        }
        docs.push(doc);
    }
    Ok(docs)
}

fn main() -> ExitCode {
    // Usage errors exit with 1; 2 is reserved for failed checks.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let docs = match execute(&cli) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    if cli.common.json {
        let text = if docs.len() == 1 { serde_json::to_string_pretty(&docs[0]) } else { serde_json::to_string_pretty(&docs) };
        match text {
            Ok(t) => println!("{t}"),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_ERROR as u8);
            }
        }
    }
    if docs.iter().all(RunDocument::passed) {
        ExitCode::from(EXIT_OK as u8)
    } else {
        ExitCode::from(EXIT_CHECK_FAILED as u8)
    }
}
