//! The estimation pipeline shared by `fit`, `evaluate`, and `experiment`:
//! initial effects → residual projection → factor structure → sparse final
//! effects, plus the scoring of one fitted replication against its truth.

use mefm::dafl::{fit_sparse_effects, SparseEffectsFit, TuningConfig};
use mefm::metrics::{block_scores, mse, space_distance, ReplicationReport};
use mefm::model::{
    estimate_factors, estimate_loadings, initial_effects, residual_series, FactorEstimate,
    InitialEffects, MatrixSeries, ModelConfig,
};
use mefm::simulate::SimulatedDataset;
use ndarray::Array3;

pub struct FitOutput {
    pub effects: InitialEffects,
    pub factors: FactorEstimate,
    pub f_z: Array3<f64>,
    pub common: Array3<f64>,
    pub sparse: SparseEffectsFit,
}

pub fn fit_pipeline(
    x: &MatrixSeries,
    k_r: usize,
    k_c: usize,
    tuning: &TuningConfig,
) -> mefm::Result<FitOutput> {
    let effects = initial_effects(x);
    let residuals = residual_series(x, &effects)?;
    let factors = estimate_loadings(&residuals, &ModelConfig::new(k_r, k_c))?;
    let (f_z, common) = estimate_factors(x, &residuals, &factors)?;
    let sparse = fit_sparse_effects(&effects.alpha, &effects.beta, tuning)?;
    Ok(FitOutput {
        effects,
        factors,
        f_z,
        common,
        sparse,
    })
}

/// Scores a fit against the dataset it was estimated from.
pub fn score_replication(
    scenario: &str,
    rep: u64,
    ds: &SimulatedDataset,
    fit: &FitOutput,
    wall_secs: f64,
) -> mefm::Result<ReplicationReport> {
    let alpha_scores = block_scores(&ds.alpha_blocks, &fit.sparse.alpha_final)?;
    let beta_scores = block_scores(&ds.beta_blocks, &fit.sparse.beta_final)?;
    Ok(ReplicationReport {
        scenario: scenario.to_string(),
        rep,
        mse_mu: mse(&ds.truth.mu, &fit.effects.mu)?,
        mse_alpha_init: mse(&ds.truth.alpha, &fit.effects.alpha)?,
        mse_beta_init: mse(&ds.truth.beta, &fit.effects.beta)?,
        mse_alpha_final: mse(&ds.truth.alpha, &fit.sparse.alpha_final)?,
        mse_beta_final: mse(&ds.truth.beta, &fit.sparse.beta_final)?,
        mse_common: mse(&ds.truth.common, &fit.common)?,
        dist_q_r: space_distance(ds.a_r.view(), fit.factors.q_r.view())?,
        dist_q_c: space_distance(ds.a_c.view(), fit.factors.q_c.view())?,
        sens_alpha: alpha_scores.sensitivity,
        spec_alpha: alpha_scores.specificity,
        sens_beta: beta_scores.sensitivity,
        spec_beta: beta_scores.specificity,
        lambda_alpha: fit
            .sparse
            .alpha_tuning
            .iter()
            .map(|t| t.chosen_lambda)
            .collect(),
        lambda_beta: fit
            .sparse
            .beta_tuning
            .iter()
            .map(|t| t.chosen_lambda)
            .collect(),
        wall_secs,
    })
}
