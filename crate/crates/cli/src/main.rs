use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use risnet_core::experiment::{
    run_experiment, selftest, write_results, Experiment, OutputFormat, ResultTable,
};
use risnet_core::scenario::{FigureId, Overrides};

#[derive(Parser)]
#[command(name = "risnet", version, about = "Multi-RIS downlink experiments: sweeps, presets and self checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Master seed; overrides the experiment file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte-Carlo samples per row (0 = deterministic outputs only).
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// csv or json; defaults to the output file extension, then csv.
    #[arg(long, global = true)]
    format: Option<OutputFormat>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "RISNET_THREADS")]
    threads: Option<usize>,

    /// Scenario override such as `m=32`, `p_max_dbm=30` or `tau_c=1000`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON file.
    Run { config: PathBuf },
    /// Run one of the built-in figure sweeps.
    Preset { figure: FigureId },
    /// Check an experiment file without running it.
    Validate { config: PathBuf },
    /// Run the invariant checks at toy dimensions.
    Selftest,
}

impl Common {
    fn apply(&self, exp: &mut Experiment) -> Result<()> {
        let mut overrides = Overrides::default();
        for s in &self.overrides {
            overrides.set(s)?;
        }
        exp.apply_overrides(&overrides);
        if let Some(seed) = self.seed {
            exp.seed = seed;
        }
        if let Some(n) = self.samples {
            exp.mc_samples = n;
        }
        Ok(())
    }

    fn destination(&self, exp: &Experiment) -> (Option<PathBuf>, OutputFormat) {
        let path = self.out.clone().or_else(|| exp.output.as_ref().map(|o| o.path.clone()));
        let from_ext = path
            .as_deref()
            .and_then(Path::extension)
            .and_then(|e| e.to_str())
            .and_then(|e| e.parse().ok());
        let format = self
            .format
            .or(exp.output.as_ref().map(|o| o.format))
            .or(from_ext)
            .unwrap_or_default();
        (path, format)
    }
}

fn load(path: &Path) -> Result<Experiment> {
    Experiment::from_file(path).with_context(|| format!("reading experiment {}", path.display()))
}

fn emit(table: &ResultTable, path: Option<&Path>, format: OutputFormat) -> Result<()> {
    match path {
        Some(p) => {
            let file = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_results(table, format, std::io::BufWriter::new(file))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_results(table, format, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn execute(mut exp: Experiment, common: &Common) -> Result<ExitCode> {
    common.apply(&mut exp)?;
    let (path, format) = common.destination(&exp);
    let table = run_experiment(&exp)?;
    emit(&table, path.as_deref(), format)?;
    let failed: Vec<_> = table.failures().collect();
    for r in &failed {
        eprintln!(
            "point {} ({} {:?}): {}",
            r.point_index, r.protocol, r.design, r.status
        );
    }
    if failed.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} of {} rows failed", failed.len(), table.rows.len());
        Ok(ExitCode::from(2))
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match &cli.command {
        Command::Run { config } => execute(load(config)?, &cli.common),
        Command::Preset { figure } => execute(Experiment::preset(*figure), &cli.common),
        Command::Validate { config } => {
            let mut exp = load(config)?;
            cli.common.apply(&mut exp)?;
            exp.validate()?;
            let template = exp.scenario.to_template()?;
            template.build().context("building the base scenario")?;
            println!(
                "{}: {} sweep points over {:?}, {} protocols, {} designs",
                exp.name,
                exp.sweep.values.len(),
                exp.sweep.axis,
                exp.protocols.len(),
                exp.designs.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest => {
            if !cli.common.overrides.is_empty() {
                bail!("selftest runs fixed toy scenarios and takes no overrides");
            }
            let report = selftest(cli.common.seed.unwrap_or(0))?;
            print!("{report}");
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
