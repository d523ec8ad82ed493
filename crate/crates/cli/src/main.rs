use std::path::PathBuf;
use std::process::ExitCode;

use bowen_lab::{run, threads_from_env, ConfigError, RunConfig, Suite};
use clap::Parser;

#[derive(Parser, Debug)]
#[command(name = "bowen-lab", version, about = "Bowen-ball, linearization and splitting experiments")]
struct Cli {
    /// linearize | distortion | spectrum | splitting | full
    suite: Suite,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn prepare(cli: &Cli) -> Result<(RunConfig, PathBuf, Option<usize>), ConfigError> {
    let mut cfg = RunConfig::load(&cli.config)?;
    cfg.resolve_suite(cli.suite)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = Some(d.clone());
    }
    let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    cfg.validate()?;
    Ok((cfg, out, threads_from_env()?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, out, threads) = match prepare(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("bowen-lab: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run(&cfg, threads) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("bowen-lab: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = report.write(&out) {
        eprintln!("bowen-lab: writing {}: {e}", out.display());
        return ExitCode::from(1);
    }
    for (name, v) in &report.verdicts {
        println!("{name}: {}", serde_json::to_value(v).unwrap().as_str().unwrap_or("?"));
    }
    for (suite, msg) in &report.diagnostics {
        eprintln!("{suite}: {msg}");
    }
    ExitCode::from(report.exit_code() as u8)
}
