//! Multi-replication experiment runner. Replications are independent — each
//! draws from its own random stream block — so they run in parallel; every
//! file write goes to a replication-scoped directory, and the summary is
//! independent of thread count and scheduling.

use crate::args::ExperimentArgs;
use crate::commands::{require_output, resolve_config};
use crate::errors::{CliError, CliResult};
use crate::io;
use crate::pipeline::{fit_pipeline, score_replication};
use mefm::metrics::{aggregate, ReplicationReport};
use mefm::simulate::{assemble_dataset, DGPConfig};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub fn cmd_experiment(
    args: &ExperimentArgs,
    seed: Option<u64>,
    output: &Option<PathBuf>,
) -> CliResult<()> {
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let (mut cfg, label) = resolve_config(&args.source)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out = require_output(output)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    io::write_text(&out.join("config.conf"), &cfg.to_kv())?;
    let tuning = args.tuning.to_config();

    let results: Vec<Result<ReplicationReport, String>> = (0..args.reps)
        .into_par_iter()
        .map(|rep| run_replication(&cfg, &label, rep, &tuning, out, args.resume))
        .collect();

    let mut reports = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (rep, result) in results.into_iter().enumerate() {
        match result {
            Ok(r) => reports.push(r),
            Err(e) => {
                log::error!("replication {rep} failed: {e}");
                failures.push(rep);
            }
        }
    }
    if reports.is_empty() {
        return Err(CliError::Numerical(format!(
            "all {} replications failed",
            args.reps
        )));
    }
    if !failures.is_empty() {
        log::warn!(
            "{} of {} replications failed (indices {failures:?})",
            failures.len(),
            args.reps
        );
    }
    let rows = aggregate(&reports)?;
    io::write_summary(
        &out.join("summary.csv"),
        &label,
        &rows,
        failures.len(),
        args.reps,
    )?;
    log::info!(
        "aggregated {} replications into {}",
        reports.len(),
        out.join("summary.csv").display()
    );
    Ok(())
}

fn run_replication(
    base: &DGPConfig,
    label: &str,
    rep: u64,
    tuning: &mefm::dafl::TuningConfig,
    out: &Path,
    resume: bool,
) -> Result<ReplicationReport, String> {
    let rep_dir = out.join(format!("rep_{rep:04}"));
    let report_path = rep_dir.join("report.json");
    if resume && report_path.exists() {
        match io::read_report(&report_path) {
            Ok(r) => return Ok(r),
            Err(e) => log::warn!("replication {rep}: re-running ({e})"),
        }
    }
    let cfg = DGPConfig {
        replication: rep,
        ..base.clone()
    };
    let start = Instant::now();
    let report = (|| -> mefm::Result<ReplicationReport> {
        let ds = assemble_dataset(&cfg)?;
        let fit = fit_pipeline(&ds.x, cfg.k_r, cfg.k_c, tuning)?;
        score_replication(label, rep, &ds, &fit, start.elapsed().as_secs_f64())
    })()
    .map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&rep_dir).map_err(|e| format!("{}: {e}", rep_dir.display()))?;
    io::write_report(&report_path, &report).map_err(|e| e.to_string())?;
    Ok(report)
}
