use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qrouter_cli::{
    preset, run_dynamics, run_steady, run_sweep, write_dynamics, write_herald, write_steady, write_sweep, CliError,
    Format, Scenario, PRESETS,
};

#[derive(Parser)]
#[command(name = "qrouter", version, about = "Flux-qubit controlled single-photon router simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state transmission and reflection windows.
    Steady(RunArgs),
    /// Full master-equation run with routing, entanglement and heralding figures of merit.
    Dynamics(RunArgs),
    /// One dynamics run per value of the scenario's [sweep] parameter.
    Sweep(RunArgs),
    /// Dynamics run reporting only the heralded photonic states.
    Herald(RunArgs),
    /// Built-in scenario files.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// Names and descriptions of the built-in scenarios.
    List,
    /// Print a built-in scenario as TOML.
    Show { name: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Name of a built-in scenario.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; files go to `<out>/<scenario name>/`.
    #[arg(long, env = "QROUTER_OUT")]
    out: Option<PathBuf>,
    /// Overrides the formats listed in the scenario.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Number of output samples.
    #[arg(long)]
    samples: Option<usize>,
    /// Relative tolerance of the integrator.
    #[arg(long)]
    rtol: Option<f64>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn scenario(&self) -> Result<Scenario, CliError> {
        match (&self.config, &self.preset) {
            (Some(path), _) => Scenario::load(path),
            (None, Some(name)) => preset(name),
            (None, None) => Err(CliError::Config("one of --config or --preset is required".into())),
        }
    }

    fn out_dir(&self, s: &Scenario) -> PathBuf {
        let base = self.out.clone().or_else(|| s.outputs.dir.clone()).unwrap_or_else(|| PathBuf::from("qrouter-out"));
        base.join(&s.name)
    }

    fn formats(&self, s: &Scenario) -> Vec<Format> {
        match self.format {
            Some(FormatArg::Csv) => vec![Format::Csv],
            Some(FormatArg::Json) => vec![Format::Json],
            None => s.outputs.formats.clone(),
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.samples.is_some_and(|n| n < 2) {
            return Err(CliError::Config("--samples must be at least 2".into()));
        }
        if self.rtol.is_some_and(|r| !(r > 0.0 && r < 1.0)) {
            return Err(CliError::Config("--rtol must lie in (0, 1)".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        Ok(())
    }
}

fn list_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let args = match &cli.command {
        Command::Presets { action: PresetAction::List } => {
            for (name, _) in PRESETS {
                let s = preset(name)?;
                println!("{name:<14} {}", s.description);
            }
            return Ok(());
        }
        Command::Presets { action: PresetAction::Show { name } } => {
            print!("{}", preset(name)?.to_toml());
            return Ok(());
        }
        Command::Steady(a) | Command::Dynamics(a) | Command::Sweep(a) | Command::Herald(a) => a,
    };
    args.validate()?;
    let scenario = args.scenario()?;
    let dir = args.out_dir(&scenario);
    let formats = args.formats(&scenario);
    let opts = scenario.evolve_options(args.samples, args.rtol);
    let start = Instant::now();

    match &cli.command {
        Command::Steady(_) => {
            let out = run_steady(&scenario)?;
            for w in &out.summaries {
                let width = w.width.map_or("n/a".to_string(), |x| format!("{x:.4e}"));
                println!(
                    "|{}>: center {:.4e}, peak T {:.4}, T >= 0.5 width {width}",
                    w.flux_state.label(),
                    w.center,
                    w.peak_transmission
                );
            }
            list_written(&write_steady(&out, &dir, &formats)?);
        }
        Command::Dynamics(_) => {
            let out = run_dynamics(&scenario, &opts)?;
            println!("{}", out.summary());
            list_written(&write_dynamics(&out, &scenario.name, &dir, &formats)?);
        }
        Command::Herald(_) => {
            let out = run_dynamics(&scenario, &opts)?;
            match &out.herald {
                Some(h) => println!("{}", serde_json::to_string_pretty(h)?),
                None => println!("no heralding: one Bell branch carries no probability"),
            }
            list_written(&[write_herald(&out, &dir)?]);
        }
        Command::Sweep(_) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(args.threads.unwrap_or(0))
                .build()
                .map_err(|e| CliError::Io(e.into()))?;
            let out = pool.install(|| run_sweep(&scenario, &opts))?;
            for row in &out.rows {
                match &row.result {
                    Ok(m) => println!(
                        "[{}] {} = {:e}: e_R {:.4} e_L {:.4} F {:.4} C {:.4}",
                        row.index, out.parameter, row.value, m.e_r, m.e_l, m.fidelity, m.concurrence
                    ),
                    Err(e) => println!("[{}] {} = {:e}: failed: {e}", row.index, out.parameter, row.value),
                }
            }
            list_written(&write_sweep(&out, &dir, &formats)?);
            if out.failures() == out.rows.len() {
                let first = out.rows.into_iter().next().and_then(|r| r.result.err());
                return Err(first.unwrap_or_else(|| CliError::Config("sweep produced no rows".into())));
            }
        }
        Command::Presets { .. } => unreachable!(),
    }
    eprintln!("done in {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qrouter: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
