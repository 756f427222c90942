//! The single-shot subcommands: simulate, fit, evaluate, oracles.

use crate::args::{EvaluateArgs, FileFormat, FitArgs, OraclesArgs, ScenarioSource, SimulateArgs};
use crate::errors::{CliError, CliResult};
use crate::io;
use crate::pipeline::fit_pipeline;
use mefm::metrics::{block_scores, mse, space_distance, ReplicationReport};
use mefm::model::MatrixSeries;
use mefm::simulate::{assemble_dataset, scenario, DGPConfig};
use std::fs;
use std::path::{Path, PathBuf};

/// Resolves --scenario / --config into a configuration and a display label.
pub fn resolve_config(source: &ScenarioSource) -> CliResult<(DGPConfig, String)> {
    match (&source.scenario, &source.config) {
        (Some(name), None) => Ok((scenario(name)?, name.clone())),
        (None, Some(path)) => {
            let text = io::read_text(path)?;
            let cfg = DGPConfig::from_kv(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "custom".to_string());
            Ok((cfg, label))
        }
        _ => Err(CliError::Usage(
            "pass exactly one of --scenario <name> or --config <file>".into(),
        )),
    }
}

pub fn require_output(output: &Option<PathBuf>) -> CliResult<&Path> {
    output
        .as_deref()
        .ok_or_else(|| CliError::Usage("--output is required for this command".into()))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn cmd_simulate(
    args: &SimulateArgs,
    seed: Option<u64>,
    output: &Option<PathBuf>,
    format: FileFormat,
) -> CliResult<()> {
    let (mut cfg, _) = resolve_config(&args.source)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(rep) = args.rep {
        cfg.replication = rep;
    }
    let out = require_output(output)?;
    ensure_dir(out)?;

    let ds = assemble_dataset(&cfg)?;
    io::write_text(&out.join("config.conf"), &cfg.to_kv())?;
    io::write_tensor(
        &out.join(io::tensor_file_name("x", format)),
        ds.x.data(),
        format,
    )?;
    io::write_mu(&out.join("mu.csv"), &ds.truth.mu)?;
    io::write_effects(&out.join("alpha.csv"), &ds.truth.alpha)?;
    io::write_effects(&out.join("beta.csv"), &ds.truth.beta)?;
    io::write_tensor(
        &out.join(io::tensor_file_name("common", format)),
        &ds.truth.common,
        format,
    )?;
    io::write_blocks(&out.join("alpha_blocks.csv"), &ds.alpha_blocks)?;
    io::write_blocks(&out.join("beta_blocks.csv"), &ds.beta_blocks)?;
    io::write_matrix(&out.join("a_r.csv"), &ds.a_r)?;
    io::write_matrix(&out.join("a_c.csv"), &ds.a_c)?;
    log::info!(
        "wrote dataset with dims {:?} to {}",
        ds.x.dims(),
        out.display()
    );
    Ok(())
}

pub fn cmd_fit(args: &FitArgs, output: &Option<PathBuf>, format: FileFormat) -> CliResult<()> {
    let out = require_output(output)?;
    let x = MatrixSeries::new(io::read_tensor(&args.input)?)
        .map_err(|e| CliError::malformed(&args.input, e))?;
    let tuning = args.tuning.to_config();
    let fit = fit_pipeline(&x, args.k_r, args.k_c, &tuning)?;

    ensure_dir(out)?;
    io::write_mu(&out.join("mu.csv"), &fit.effects.mu)?;
    io::write_effects(&out.join("alpha_init.csv"), &fit.effects.alpha)?;
    io::write_effects(&out.join("beta_init.csv"), &fit.effects.beta)?;
    io::write_effects(&out.join("alpha_final.csv"), &fit.sparse.alpha_final)?;
    io::write_effects(&out.join("beta_final.csv"), &fit.sparse.beta_final)?;
    io::write_blocks(&out.join("alpha_blocks.csv"), &fit.sparse.alpha_blocks)?;
    io::write_blocks(&out.join("beta_blocks.csv"), &fit.sparse.beta_blocks)?;
    io::write_matrix(&out.join("q_r.csv"), &fit.factors.q_r)?;
    io::write_matrix(&out.join("q_c.csv"), &fit.factors.q_c)?;
    io::write_tensor(
        &out.join(io::tensor_file_name("f_z", format)),
        &fit.f_z,
        format,
    )?;
    io::write_tensor(
        &out.join(io::tensor_file_name("common", format)),
        &fit.common,
        format,
    )?;
    io::write_lambdas(
        &out.join("lambda.csv"),
        &fit.sparse.alpha_tuning,
        &fit.sparse.beta_tuning,
    )?;
    io::write_cp_curves(
        &out.join("cp_curves.csv"),
        &fit.sparse.alpha_tuning,
        &fit.sparse.beta_tuning,
    )?;
    log::info!("wrote estimates to {}", out.display());
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs, output: &Option<PathBuf>) -> CliResult<()> {
    let report_path = require_output(output)?;
    let truth = &args.truth;
    let est = &args.estimates;

    let true_mu = io::read_mu(&truth.join("mu.csv"))?;
    let true_alpha = io::read_effects(&truth.join("alpha.csv"))?;
    let true_beta = io::read_effects(&truth.join("beta.csv"))?;
    let true_common = io::read_tensor_stem(truth, "common")?;
    let (t_len, p) = true_alpha.dim();
    let q = true_beta.ncols();
    let alpha_blocks = io::read_blocks(&truth.join("alpha_blocks.csv"), p, t_len)?;
    let beta_blocks = io::read_blocks(&truth.join("beta_blocks.csv"), q, t_len)?;
    let a_r = io::read_matrix(&truth.join("a_r.csv"))?;
    let a_c = io::read_matrix(&truth.join("a_c.csv"))?;
    let rep = match io::read_text(&truth.join("config.conf")) {
        Ok(text) => DGPConfig::from_kv(&text)
            .map(|c| c.replication)
            .unwrap_or(0),
        Err(_) => 0,
    };

    let est_mu = io::read_mu(&est.join("mu.csv"))?;
    let est_alpha_init = io::read_effects(&est.join("alpha_init.csv"))?;
    let est_beta_init = io::read_effects(&est.join("beta_init.csv"))?;
    let est_alpha_final = io::read_effects(&est.join("alpha_final.csv"))?;
    let est_beta_final = io::read_effects(&est.join("beta_final.csv"))?;
    let est_common = io::read_tensor_stem(est, "common")?;
    let q_r = io::read_matrix(&est.join("q_r.csv"))?;
    let q_c = io::read_matrix(&est.join("q_c.csv"))?;
    let (lambda_alpha, lambda_beta) = match io::read_lambdas(&est.join("lambda.csv")) {
        Ok(pair) => pair,
        Err(e) => {
            log::debug!("no penalty levels recorded: {e}");
            (Vec::new(), Vec::new())
        }
    };

    let alpha_scores = block_scores(&alpha_blocks, &est_alpha_final)?;
    let beta_scores = block_scores(&beta_blocks, &est_beta_final)?;
    let report = ReplicationReport {
        scenario: args.scenario.clone(),
        rep,
        mse_mu: mse(&true_mu, &est_mu)?,
        mse_alpha_init: mse(&true_alpha, &est_alpha_init)?,
        mse_beta_init: mse(&true_beta, &est_beta_init)?,
        mse_alpha_final: mse(&true_alpha, &est_alpha_final)?,
        mse_beta_final: mse(&true_beta, &est_beta_final)?,
        mse_common: mse(&true_common, &est_common)?,
        dist_q_r: space_distance(a_r.view(), q_r.view())?,
        dist_q_c: space_distance(a_c.view(), q_c.view())?,
        sens_alpha: alpha_scores.sensitivity,
        spec_alpha: alpha_scores.specificity,
        sens_beta: beta_scores.sensitivity,
        spec_beta: beta_scores.specificity,
        lambda_alpha,
        lambda_beta,
        wall_secs: 0.0,
    };
    if let Some(parent) = report_path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    io::write_report(report_path, &report)
}

pub fn cmd_oracles(args: &OraclesArgs, output: &Option<PathBuf>) -> CliResult<()> {
    let (p_star, run_len) = mefm::simulate::prop1_oracles(args.pi_s, args.pi_b)?;
    let text = format!("p_star,expected_zero_run\n{p_star:.16e},{run_len:.16e}\n");
    print!("{text}");
    if let Some(path) = output {
        io::write_text(path, &text)?;
    }
    Ok(())
}
