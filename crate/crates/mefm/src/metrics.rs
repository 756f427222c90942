//! Scoring of estimates against simulated truth.

use crate::dafl::BlockSets;
use crate::error::{Error, Result};
use crate::linalg;
use ndarray::{Array, ArrayView2, Dimension};
use serde::{Deserialize, Serialize};

/// Tolerance for "the estimate is zero" when scoring specificity.
pub const SCORE_ZERO_TOL: f64 = 1e-10;

/// Mean squared error normalized by the total number of entries: for a
/// series of T arrays with d entries each, `Σ_t ‖truth_t − est_t‖_F² / (T d)`.
pub fn mse<D: Dimension>(truth: &Array<f64, D>, estimate: &Array<f64, D>) -> Result<f64> {
    if truth.shape() != estimate.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", truth.shape()),
            got: format!("{:?}", estimate.shape()),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("mse of empty arrays".into()));
    }
    let sum: f64 = truth
        .iter()
        .zip(estimate.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / truth.len() as f64)
}

/// Distance between the column spaces of two full-column-rank matrices: the
/// spectral norm of the difference of their orthogonal projectors. 0 for
/// equal spans, 1 for orthogonal ones.
pub fn space_distance(q: ArrayView2<f64>, qhat: ArrayView2<f64>) -> Result<f64> {
    if q.nrows() != qhat.nrows() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} rows", q.nrows()),
            got: format!("{} rows", qhat.nrows()),
        });
    }
    let p1 = projector(q)?;
    let p2 = projector(qhat)?;
    let diff = p1 - p2;
    Ok(linalg::singular_values(&diff)
        .first()
        .copied()
        .unwrap_or(0.0))
}

fn projector(q: ArrayView2<f64>) -> Result<nalgebra::DMatrix<f64>> {
    let (n, k) = (q.nrows(), q.ncols());
    if k == 0 || n < k {
        return Err(Error::InvalidInput(format!(
            "projector needs an n×k matrix with 1 <= k <= n, got {n}×{k}"
        )));
    }
    let m = linalg::to_nalgebra(q);
    let svd = m.svd(true, false);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || svd.singular_values.min() <= 1e-10 * smax {
        return Err(Error::Degenerate(format!(
            "projector input {n}×{k} is rank deficient"
        )));
    }
    let u = svd.u.expect("left singular vectors requested");
    Ok(&u * u.transpose())
}

/// Pooled sensitivity/specificity of one effect family. `None` marks a score
/// whose denominator is empty (no truly dense or no truly sparse entries).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockScore {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

/// Scores estimated effects against the true blocks, pooling counts over all
/// indices: sensitivity is the fraction of truly dense (t, i) cells with a
/// strictly positive estimate, specificity the fraction of truly sparse
/// cells with a (numerically) zero estimate.
pub fn block_scores(
    true_blocks: &[BlockSets],
    estimate: &ndarray::Array2<f64>,
) -> Result<BlockScore> {
    let (t_len, n_idx) = estimate.dim();
    if true_blocks.len() != n_idx {
        return Err(Error::DimensionMismatch {
            expected: format!("{n_idx} block sets"),
            got: format!("{}", true_blocks.len()),
        });
    }
    let mut dense_total = 0usize;
    let mut dense_hit = 0usize;
    let mut sparse_total = 0usize;
    let mut sparse_hit = 0usize;
    for (i, blocks) in true_blocks.iter().enumerate() {
        if blocks.series_len() != t_len {
            return Err(Error::DimensionMismatch {
                expected: format!("block sets over {t_len} times"),
                got: format!("{} at index {i}", blocks.series_len()),
            });
        }
        for &t in &blocks.dense {
            dense_total += 1;
            if estimate[[t, i]] > 0.0 {
                dense_hit += 1;
            }
        }
        for &t in &blocks.sparse {
            sparse_total += 1;
            if estimate[[t, i]].abs() <= SCORE_ZERO_TOL {
                sparse_hit += 1;
            }
        }
    }
    let ratio = |hit: usize, total: usize| (total > 0).then(|| hit as f64 / total as f64);
    Ok(BlockScore {
        sensitivity: ratio(dense_hit, dense_total),
        specificity: ratio(sparse_hit, sparse_total),
    })
}

/// Everything scored on one simulated replication.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub scenario: String,
    pub rep: u64,
    pub mse_mu: f64,
    pub mse_alpha_init: f64,
    pub mse_beta_init: f64,
    pub mse_alpha_final: f64,
    pub mse_beta_final: f64,
    pub mse_common: f64,
    pub dist_q_r: f64,
    pub dist_q_c: f64,
    pub sens_alpha: Option<f64>,
    pub spec_alpha: Option<f64>,
    pub sens_beta: Option<f64>,
    pub spec_beta: Option<f64>,
    /// Chosen penalty level per row-effect (resp. column-effect) series.
    pub lambda_alpha: Vec<f64>,
    pub lambda_beta: Vec<f64>,
    pub wall_secs: f64,
}

/// Mean/sd/median of one metric across replications. `n` counts the
/// replications where the metric was defined; `sd` is `None` when fewer than
/// two values contribute.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub sd: Option<f64>,
    pub median: f64,
    pub n: usize,
}

fn summarize(metric: &str, values: Vec<f64>) -> Option<MetricSummary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (n >= 2).then(|| {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    });
    let mut sorted = values;
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Some(MetricSummary {
        metric: metric.to_string(),
        mean,
        sd,
        median,
        n,
    })
}

fn vec_mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Aggregates replication reports metric by metric. Undefined scores are
/// excluded per metric (`n` reports how many contributed); metrics undefined
/// everywhere are dropped. Wall-clock time is deliberately not aggregated —
/// summaries must be reproducible across machines and thread counts.
pub fn aggregate(reports: &[ReplicationReport]) -> Result<Vec<MetricSummary>> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("no reports to aggregate".into()));
    }
    let collect = |f: &dyn Fn(&ReplicationReport) -> Option<f64>| -> Vec<f64> {
        reports.iter().filter_map(f).collect()
    };
    let metrics: [(&str, Box<dyn Fn(&ReplicationReport) -> Option<f64>>); 14] = [
        ("mse_mu", Box::new(|r| Some(r.mse_mu))),
        ("mse_alpha_init", Box::new(|r| Some(r.mse_alpha_init))),
        ("mse_beta_init", Box::new(|r| Some(r.mse_beta_init))),
        ("mse_alpha_final", Box::new(|r| Some(r.mse_alpha_final))),
        ("mse_beta_final", Box::new(|r| Some(r.mse_beta_final))),
        ("mse_common", Box::new(|r| Some(r.mse_common))),
        ("dist_q_r", Box::new(|r| Some(r.dist_q_r))),
        ("dist_q_c", Box::new(|r| Some(r.dist_q_c))),
        ("sens_alpha", Box::new(|r| r.sens_alpha)),
        ("spec_alpha", Box::new(|r| r.spec_alpha)),
        ("sens_beta", Box::new(|r| r.sens_beta)),
        ("spec_beta", Box::new(|r| r.spec_beta)),
        ("mean_lambda_alpha", Box::new(|r| vec_mean(&r.lambda_alpha))),
        ("mean_lambda_beta", Box::new(|r| vec_mean(&r.lambda_beta))),
    ];
    Ok(metrics
        .iter()
        .filter_map(|(name, f)| summarize(name, collect(f)))
        .collect())
}
