use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wmlab_core::config::ExperimentConfig;
use wmlab_core::runner::{exit_code, Run, Stage};
use wmlab_core::LabError;

#[derive(Parser, Debug)]
#[command(name = "wmlab", version, about = "Frame-component wave map experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory; defaults to the config `out`, then `runs/<hash>`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate data, evolve, store the trajectory.
    Simulate(Common),
    /// Envelopes, S_k and mixed norms, product decomposition.
    Analyze(Common),
    /// Potential, U chain and effectiveness report.
    Renorm(Common),
    /// Amplitude sweep with slope fits.
    Sweep(Common),
    /// Invariant suite; exits 1 on any failure.
    Check(Common),
    /// Collate artifacts into summary.json.
    Report(Common),
    /// Run one stage, or simulate → analyze → renorm → report.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "NAME", value_parser = parse_stage)]
        stage: Option<Stage>,
    },
    /// Print the fully resolved default config.
    Defaults,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    Stage::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
        format!("unknown stage '{s}', expected one of {}", names.join(", "))
    })
}

fn load(common: &Common) -> Result<Run, LabError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let hash = cfg.hash();
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs").join(&hash[..12]));
    Run::new(cfg, out)
}

fn execute(run: &Run, stages: &[Stage]) -> Result<bool, LabError> {
    let mut ok = true;
    for &stage in stages {
        let rec = run.stage(stage)?;
        let metrics: Vec<String> = rec.metrics.iter().map(|(k, v)| format!("{k}={v:.4e}")).collect();
        println!("[{}] {} -> {}", stage.name(), metrics.join(" "), rec.outputs.join(", "));
        if stage == Stage::Check && rec.metrics.get("passed") != Some(&1.0) {
            eprintln!("[check] failed; see {}", run.path("check.json").display());
            ok = false;
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, stages): (Common, Vec<Stage>) = match cli.command {
        Command::Simulate(c) => (c, vec![Stage::Simulate]),
        Command::Analyze(c) => (c, vec![Stage::Analyze]),
        Command::Renorm(c) => (c, vec![Stage::Renorm]),
        Command::Sweep(c) => (c, vec![Stage::Sweep]),
        Command::Check(c) => (c, vec![Stage::Check]),
        Command::Report(c) => (c, vec![Stage::Report]),
        Command::Run { common, stage } => (common, stage.map_or(Stage::PIPELINE.to_vec(), |s| vec![s])),
        Command::Defaults => {
            return match ExperimentConfig::default().to_toml() {
                Ok(t) => {
                    print!("{t}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    let result = load(&common).and_then(|run| {
        println!("config {} seed {} -> {}", &run.hash[..12], run.config.seed, run.out.display());
        execute(&run, &stages)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
