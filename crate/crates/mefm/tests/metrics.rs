//! Tests for the scoring layer: entrywise error, column-space distance
//! (checked against an independent Gram–Schmidt + power-iteration oracle),
//! block classification scores, and report aggregation.

use mefm::dafl::BlockSets;
use mefm::metrics::{
    aggregate, block_scores, mse, space_distance, BlockScore, ReplicationReport, SCORE_ZERO_TOL,
};
use mefm::Error;
use ndarray::{arr1, arr2, Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

// ---------------------------------------------------------------------------
// Mean squared error.

#[test]
fn mse_hand_values() {
    let a = arr1(&[1.0, 2.0, 3.0]);
    assert_eq!(mse(&a, &a).unwrap(), 0.0);

    let truth = arr1(&[0.0, 0.0]);
    let est = arr1(&[1.0, 2.0]);
    assert!((mse(&truth, &est).unwrap() - 2.5).abs() < 1e-15);

    // 2x2x2 series: squared entries 1..64 average to 25.5.
    let truth = Array3::<f64>::zeros((2, 2, 2));
    let est =
        Array3::from_shape_vec((2, 2, 2), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
    assert!((mse(&truth, &est).unwrap() - 25.5).abs() < 1e-15);
}

#[test]
fn mse_rejects_shape_mismatch_and_empty_input() {
    let a = arr2(&[[1.0, 2.0], [3.0, 4.0]]);
    let b = arr2(&[[1.0], [3.0]]);
    assert!(matches!(mse(&a, &b), Err(Error::DimensionMismatch { .. })));
    let e = Array2::<f64>::zeros((0, 3));
    assert!(mse(&e, &e).is_err());
}

// ---------------------------------------------------------------------------
// Column-space distance.

/// Orthonormal basis by modified Gram–Schmidt (independent of the library's
/// SVD-based projector).
fn gram_schmidt(m: &Array2<f64>) -> Array2<f64> {
    let (n, k) = m.dim();
    let mut q = m.clone();
    for j in 0..k {
        for prev in 0..j {
            let dot: f64 = (0..n).map(|i| q[[i, j]] * q[[i, prev]]).sum();
            for i in 0..n {
                q[[i, j]] -= dot * q[[i, prev]];
            }
        }
        let norm: f64 = (0..n).map(|i| q[[i, j]] * q[[i, j]]).sum::<f64>().sqrt();
        assert!(norm > 1e-10, "oracle input must be full rank");
        for i in 0..n {
            q[[i, j]] /= norm;
        }
    }
    q
}

/// Spectral norm of the projector difference via power iteration on its
/// square (symmetric PSD, so the iteration converges to the top eigenvalue).
fn distance_oracle(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let qa = gram_schmidt(a);
    let qb = gram_schmidt(b);
    let proj = |q: &Array2<f64>| q.dot(&q.t());
    let s = proj(&qa) - proj(&qb);
    let s2 = s.dot(&s);
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) * 0.1).collect();
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let mut w = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                w[i] += s2[[i, j]] * v[j];
            }
        }
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for x in &mut w {
            *x /= norm;
        }
        lambda = norm;
        v = w;
    }
    lambda.sqrt()
}

#[test]
fn space_distance_is_zero_for_equal_spans() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let q = Array2::from_shape_fn((8, 2), |_| StandardNormal.sample(&mut rng));
    assert!(space_distance(q.view(), q.view()).unwrap() <= 1e-12);

    // The same span through an invertible column mix.
    let mix = arr2(&[[2.0, 1.0], [0.0, -1.0]]);
    let mixed = q.dot(&mix);
    assert!(space_distance(q.view(), mixed.view()).unwrap() <= 1e-10);
}

#[test]
fn space_distance_is_one_for_orthogonal_spans() {
    let e1 = arr2(&[[1.0], [0.0], [0.0]]);
    let e2 = arr2(&[[0.0], [1.0], [0.0]]);
    let d = space_distance(e1.view(), e2.view()).unwrap();
    assert!((d - 1.0).abs() <= 1e-12);
}

#[test]
fn space_distance_matches_the_power_iteration_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for k in [1usize, 2, 3] {
        for _ in 0..10 {
            let a = Array2::from_shape_fn((10, k), |_| StandardNormal.sample(&mut rng));
            let b = Array2::from_shape_fn((10, k), |_| StandardNormal.sample(&mut rng));
            let lib = space_distance(a.view(), b.view()).unwrap();
            let oracle = distance_oracle(&a, &b);
            assert!(
                (lib - oracle).abs() <= 1e-8,
                "k={k}: library {lib} vs oracle {oracle}"
            );
            assert!((0.0..=1.0 + 1e-12).contains(&lib));
        }
    }
}

#[test]
fn space_distance_rejects_degenerate_and_mismatched_input() {
    // Duplicated column: rank deficient.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let col = Array2::from_shape_fn((6, 1), |_| StandardNormal.sample(&mut rng));
    let mut dup = Array2::<f64>::zeros((6, 2));
    dup.column_mut(0).assign(&col.column(0));
    dup.column_mut(1).assign(&col.column(0));
    let ok = Array2::from_shape_fn((6, 2), |_| StandardNormal.sample(&mut rng));
    assert!(matches!(
        space_distance(dup.view(), ok.view()),
        Err(Error::Degenerate(_))
    ));

    let other = Array2::<f64>::zeros((5, 2));
    assert!(matches!(
        space_distance(ok.view(), other.view()),
        Err(Error::DimensionMismatch { .. })
    ));

    let wide = Array2::<f64>::ones((2, 4));
    assert!(space_distance(wide.view(), wide.view()).is_err());
}

// ---------------------------------------------------------------------------
// Block classification scores.

fn blocks(sparse: &[usize], dense: &[usize]) -> BlockSets {
    BlockSets {
        sparse: sparse.to_vec(),
        dense: dense.to_vec(),
    }
}

#[test]
fn block_scores_worked_example() {
    // One series of length 4, truly zero at times 0 and 2. The estimate
    // recovers both dense values but only one of the two zeros.
    let truth = vec![blocks(&[0, 2], &[1, 3])];
    let est = arr2(&[[0.0], [0.5], [0.2], [0.9]]);
    let score = block_scores(&truth, &est).unwrap();
    assert_eq!(
        score,
        BlockScore {
            sensitivity: Some(1.0),
            specificity: Some(0.5),
        }
    );
}

#[test]
fn block_scores_pool_counts_rather_than_average_series() {
    // Index 0: two sparse cells, one recovered. Index 1: one sparse cell,
    // recovered. Pooling gives 2/3; averaging per-series rates would give 3/4.
    let truth = vec![blocks(&[0, 1], &[2]), blocks(&[2], &[0, 1])];
    let est = arr2(&[
        [0.0, 1.0], //
        [0.3, 2.0],
        [1.5, 0.0],
    ]);
    let score = block_scores(&truth, &est).unwrap();
    assert_eq!(score.sensitivity, Some(1.0));
    let spec = score.specificity.unwrap();
    assert!((spec - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn block_scores_apply_the_zero_tolerance_and_sign_rule() {
    let truth = vec![blocks(&[0, 1], &[2, 3])];
    // |v| <= tol counts as zero; a sign flip is not a positive recovery.
    let est = arr2(&[[-SCORE_ZERO_TOL], [2.0 * SCORE_ZERO_TOL], [-0.4], [0.7]]);
    let score = block_scores(&truth, &est).unwrap();
    assert_eq!(score.specificity, Some(0.5));
    assert_eq!(score.sensitivity, Some(0.5));
}

#[test]
fn block_scores_are_undefined_without_a_denominator() {
    let truth = vec![blocks(&[], &[0, 1])];
    let est = arr2(&[[1.0], [1.0]]);
    let score = block_scores(&truth, &est).unwrap();
    assert_eq!(score.sensitivity, Some(1.0));
    assert_eq!(score.specificity, None);

    let truth = vec![blocks(&[0, 1], &[])];
    let score = block_scores(&truth, &est).unwrap();
    assert_eq!(score.sensitivity, None);
    assert_eq!(score.specificity, Some(0.0));
}

#[test]
fn block_scores_reject_mismatched_shapes() {
    let est = arr2(&[[0.0], [1.0]]);
    assert!(matches!(
        block_scores(&[], &est),
        Err(Error::DimensionMismatch { .. })
    ));
    // Block sets must cover exactly the estimate's time length.
    let truth = vec![blocks(&[0], &[1, 2])];
    assert!(block_scores(&truth, &est).is_err());
}

// ---------------------------------------------------------------------------
// Aggregation.

fn report(scenario: &str, rep: u64, value: f64) -> ReplicationReport {
    ReplicationReport {
        scenario: scenario.into(),
        rep,
        mse_mu: value,
        mse_alpha_init: value,
        mse_beta_init: value,
        mse_alpha_final: value,
        mse_beta_final: value,
        mse_common: value,
        dist_q_r: value,
        dist_q_c: value,
        sens_alpha: Some(1.0),
        spec_alpha: Some(value),
        sens_beta: None,
        spec_beta: None,
        lambda_alpha: vec![value, value + 1.0],
        lambda_beta: vec![],
        wall_secs: 123.0,
    }
}

fn find<'a>(
    rows: &'a [mefm::metrics::MetricSummary],
    name: &str,
) -> &'a mefm::metrics::MetricSummary {
    rows.iter().find(|r| r.metric == name).unwrap_or_else(|| {
        panic!(
            "metric {name} missing from {:?}",
            rows.iter().map(|r| &r.metric).collect::<Vec<_>>()
        )
    })
}

#[test]
fn aggregate_computes_mean_sd_median_per_metric() {
    let rows = aggregate(&[report("Ia", 0, 0.0), report("Ia", 1, 1.0)]).unwrap();
    let mu = find(&rows, "mse_mu");
    assert_eq!(mu.n, 2);
    assert!((mu.mean - 0.5).abs() < 1e-15);
    assert!((mu.median - 0.5).abs() < 1e-15);
    assert!((mu.sd.unwrap() - 0.5f64.sqrt()).abs() < 1e-12);

    // lambda vectors aggregate through their per-replication means.
    let la = find(&rows, "mean_lambda_alpha");
    assert!((la.mean - 1.0).abs() < 1e-15); // (0.5 + 1.5) / 2

    // Odd count: the median is the middle order statistic.
    let rows = aggregate(&[
        report("Ia", 0, 3.0),
        report("Ia", 1, -1.0),
        report("Ia", 2, 0.5),
    ])
    .unwrap();
    assert_eq!(find(&rows, "mse_common").median, 0.5);
}

#[test]
fn aggregate_excludes_undefined_scores_and_drops_empty_metrics() {
    let mut a = report("Ia", 0, 0.2);
    let b = report("Ia", 1, 0.4);
    a.spec_alpha = None;
    let rows = aggregate(&[a, b]).unwrap();

    let spec = find(&rows, "spec_alpha");
    assert_eq!(spec.n, 1);
    assert_eq!(spec.mean, 0.4);
    assert_eq!(spec.sd, None);

    // sens_beta / spec_beta / lambda_beta are undefined in every report.
    for absent in ["sens_beta", "spec_beta", "mean_lambda_beta"] {
        assert!(
            rows.iter().all(|r| r.metric != absent),
            "{absent} should be dropped"
        );
    }
    // Wall-clock time never aggregates: summaries stay machine-independent.
    assert!(rows.iter().all(|r| r.metric != "wall_secs"));
}

#[test]
fn aggregate_rejects_empty_input_and_single_report_has_no_sd() {
    assert!(aggregate(&[]).is_err());
    let rows = aggregate(&[report("Ia", 0, 0.7)]).unwrap();
    let mu = find(&rows, "mse_mu");
    assert_eq!((mu.n, mu.sd), (1, None));
    assert_eq!(mu.mean, 0.7);
    assert_eq!(mu.median, 0.7);
}
