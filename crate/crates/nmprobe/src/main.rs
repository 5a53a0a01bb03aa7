use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nmprobe::config::read_config_value;
use nmprobe::runner::{parse_values, Axis, Overrides};
use nmprobe::{RunError, RunResult};

#[derive(Parser)]
#[command(name = "nmprobe", version, about = "Simulate entanglement-probe experiments on a three-qubit register")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run(Common),
    /// Run a scenario once per value of a parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// gamma, a_in, omega or shots.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Use tomography with this many shots per setting.
    #[arg(long)]
    shots: Option<u64>,
    /// Override a config value, e.g. `--set scenario.gamma=1.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            shots: self.shots,
            set: self.set.clone(),
        }
    }

    fn pool(&self) -> RunResult<rayon::ThreadPool> {
        let jobs = match self.jobs {
            Some(0) => return Err(RunError::Config("--jobs must be at least 1".into())),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| RunError::Config(e.to_string()))
    }
}

fn execute(cli: Cli) -> RunResult<()> {
    match cli.command {
        Command::Run(c) => {
            let config = read_config_value(&c.config)?;
            let report = c.pool()?.install(|| nmprobe::run(config, &c.overrides(), &c.out))?;
            println!("{} -> {}", report.scenario, c.out.display());
            for (k, v) in &report.scalars {
                println!("  {k} = {v}");
            }
        }
        Command::Sweep { common: c, axis, values } => {
            let axis: Axis = axis.parse()?;
            let values = parse_values(&values)?;
            let config = read_config_value(&c.config)?;
            let outcome = c
                .pool()?
                .install(|| nmprobe::sweep(config, &c.overrides(), axis, &values, &c.out))?;
            println!("{} runs over {} -> {}", outcome.reports.len(), axis.name(), outcome.summary.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
