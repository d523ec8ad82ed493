//! Batch driver for the bowen-core experiments: config parsing, suites and
//! deterministic CSV/JSON reports.

pub mod config;
pub mod model;
pub mod report;
pub mod suites;

use std::time::Instant;

pub use config::{ConfigError, RunConfig, Suite};
pub use report::RunReport;
pub use suites::{SuiteOutput, Table, Verdict};

/// Environment variable capping the worker count.
pub const THREADS_VAR: &str = "BOWEN_LAB_THREADS";

/// Worker count requested through [`THREADS_VAR`], if any.
pub fn threads_from_env() -> Result<Option<usize>, ConfigError> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(ConfigError(format!("{THREADS_VAR} must be a positive integer, got `{s}`"))),
        },
    }
}

/// Runs the configured suite on a pool of `threads` workers (the rayon
/// default when `None`). Errors inside a suite mark it failed.
pub fn run(cfg: &RunConfig, threads: Option<usize>) -> Result<RunReport, ConfigError> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| ConfigError(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let mut report = RunReport::new(cfg.clone(), pool.current_num_threads());
    for part in cfg.suite().parts() {
        if part == Suite::Splitting && cfg.suite() == Suite::Full && !cfg.system.is_split() {
            continue;
        }
        match pool.install(|| suites::run_part(cfg, part)) {
            Ok(out) => {
                for (k, v) in &out.verdicts {
                    report.record(k, *v);
                }
                report.parts.push(out);
            }
            Err(e) => {
                report.record(&format!("{part}_completed"), Verdict::Fail);
                report.diagnostics.push((part.name().to_string(), e.to_string()));
            }
        }
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}
