use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use infograd::harness::{run_experiment, run_validation_suite, write_outputs, Experiment, ExperimentConfig, TAGS};
use infograd::Result;

/// Score-based information gradients for Gaussian channels.
#[derive(Debug, Parser)]
#[command(name = "infograd", version)]
struct Cli {
    /// e1_scalar_gradient, e2_vector_gradient, e3_mi_maximize, e4_tanh_maximize, e5_ib_optimize or validate
    experiment: String,
    /// Flat `key = value` config file applied over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seed; wins over INFOGRAD_SEED and config files.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Validation only: run the checks with this tag.
    #[arg(long)]
    tag: Option<String>,
    /// Validation only: multiply every threshold by this factor.
    #[arg(long)]
    tolerance_scale: Option<f64>,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let experiment: Experiment = cli.experiment.parse()?;
    let mut cfg = ExperimentConfig::from_env(experiment)?;
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for spec in &cli.set {
        cfg.apply_override(spec)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(scale) = cli.tolerance_scale {
        cfg.set("tolerance_scale", &format!("{scale:?}"))?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = build_config(cli)?;
    if cfg.experiment == Experiment::Validate {
        if let Some(tag) = cli.tag.as_deref().filter(|t| !TAGS.contains(t)) {
            return Err(infograd::Error::ConfigInvalid(format!("unknown tag `{tag}`; known: {}", TAGS.join(", "))));
        }
        let report = run_validation_suite(cfg.seed(), cli.tag.as_deref(), cfg.float("tolerance_scale"))?;
        let lines = report.to_json_lines();
        print!("{lines}");
        std::fs::create_dir_all(&cli.out)?;
        std::fs::write(cli.out.join("validate.jsonl"), &lines)?;
        std::fs::write(cli.out.join("validate.config"), cfg.echo())?;
        return Ok(report.all_passed());
    }
    if cli.tag.is_some() {
        return Err(infograd::Error::ConfigInvalid("--tag only applies to validate".into()));
    }
    let output = run_experiment(&cfg)?;
    for path in write_outputs(&cfg, &output, &cli.out)? {
        eprintln!("wrote {}", path.display());
    }
    if let Some(err) = &output.aborted {
        eprintln!("error: run aborted: {err}");
        return Ok(false);
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
