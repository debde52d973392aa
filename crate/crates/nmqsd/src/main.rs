use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use nmqsd::config::{load_config, Overrides};
use nmqsd::runner;

/// Non-Markovian QSD ensembles for two qubits in a common bath.
///
/// Settings merge as flags over `--config` file over preset defaults. A run
/// manifest can be passed back as `--config` to repeat the run.
#[derive(Debug, Parser)]
#[command(name = "nmqsd", version)]
struct Cli {
    /// fig1 … fig6, or custom.
    #[arg(long)]
    preset: Option<String>,
    /// Flat `key = value` file; `manifest.*` keys are ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    trajectories: Option<String>,
    /// Trajectory step.
    #[arg(long)]
    dt: Option<String>,
    /// Coefficient-grid step Δc.
    #[arg(long)]
    coeff_dt: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    /// Memory rates, comma separated or repeated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    gamma: Vec<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
    /// linear, nonlinear or approx.
    #[arg(long)]
    mode: Option<String>,
}

impl Cli {
    fn overrides(self) -> Overrides {
        let mut entries = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                entries.push((k.to_string(), v));
            }
        };
        put("seed", self.seed);
        put("trajectories", self.trajectories);
        put("dt", self.dt);
        put("coeff_dt", self.coeff_dt);
        put("horizon", self.horizon);
        put("gamma", (!self.gamma.is_empty()).then(|| self.gamma.join(",")));
        put("workers", self.workers);
        put("out", self.out.map(|p| p.display().to_string()));
        put("svg", self.svg.then(|| "true".to_string()));
        put("mode", self.mode);
        Overrides { preset: self.preset, config: self.config, entries }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = load_config(&cli.overrides()).and_then(|cfg| runner::run(&cfg));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nmqsd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
