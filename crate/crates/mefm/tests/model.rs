use mefm::model::{
    estimate_factors, estimate_loadings, initial_effects, reconstruct, residual_series,
    MEFMComponents, MatrixSeries, ModelConfig,
};
use mefm::Error;
use ndarray::{arr2, Array1, Array2, Array3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_series(t_len: usize, p: usize, q: usize, seed: u64) -> MatrixSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = Array3::from_shape_fn((t_len, p, q), |_| StandardNormal.sample(&mut rng));
    MatrixSeries::new(data).unwrap()
}

// ---------------------------------------------------------------------------
// Independent eigensolver: classical cyclic Jacobi on a dense symmetric
// matrix, kept free of any shared code with the library path.

fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..200 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() < 1e-13 {
            break;
        }
        for pidx in 0..n {
            for qidx in pidx + 1..n {
                let apq = m[[pidx, qidx]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[qidx, qidx]] - m[[pidx, pidx]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, pidx]];
                    let mkq = m[[k, qidx]];
                    m[[k, pidx]] = c * mkp - s * mkq;
                    m[[k, qidx]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[pidx, k]];
                    let mqk = m[[qidx, k]];
                    m[[pidx, k]] = c * mpk - s * mqk;
                    m[[qidx, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, pidx]];
                    let vkq = v[[k, qidx]];
                    v[[k, pidx]] = c * vkp - s * vkq;
                    v[[k, qidx]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap());
    let vals = order.iter().map(|&i| m[[i, i]]).collect();
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        vecs.column_mut(col).assign(&v.column(i));
    }
    (vals, vecs)
}

fn projector(q: &Array2<f64>) -> Array2<f64> {
    q.dot(&q.t())
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Initial estimators.

#[test]
fn initial_effects_worked_example() {
    // Hand-computed: row means, column means, and the grand mean of two 2×2
    // slices.
    let mut data = Array3::zeros((2, 2, 2));
    data.index_axis_mut(Axis(0), 0)
        .assign(&arr2(&[[1.0, 4.0], [3.0, 6.0]]));
    data.index_axis_mut(Axis(0), 1)
        .assign(&arr2(&[[2.0, 1.0], [0.0, 5.0]]));
    let x = MatrixSeries::new(data).unwrap();
    let eff = initial_effects(&x);
    assert_eq!(eff.alpha[[0, 0]], 0.0);
    assert!((eff.alpha[[0, 1]] - 2.0).abs() < 1e-15);
    assert_eq!(eff.beta[[0, 0]], 0.0);
    assert!((eff.beta[[0, 1]] - 3.0).abs() < 1e-15);
    assert!((eff.mu[0] - 1.0).abs() < 1e-15);
    assert_eq!(eff.alpha[[1, 0]], 0.0);
    assert!((eff.alpha[[1, 1]] - 1.0).abs() < 1e-15);
    assert_eq!(eff.beta[[1, 0]], 0.0);
    assert!((eff.beta[[1, 1]] - 2.0).abs() < 1e-15);
    assert!((eff.mu[1] - 0.5).abs() < 1e-15);
}

#[test]
fn initial_effects_minimum_is_exact_zero() {
    let x = random_series(30, 11, 7, 42);
    let eff = initial_effects(&x);
    for t in 0..30 {
        let arow = eff.alpha.row(t);
        let brow = eff.beta.row(t);
        assert!(
            arow.iter().any(|&v| v == 0.0),
            "alpha[{t}] lacks an exact zero"
        );
        assert!(
            brow.iter().any(|&v| v == 0.0),
            "beta[{t}] lacks an exact zero"
        );
        assert!(arow.iter().all(|&v| v >= 0.0));
        assert!(brow.iter().all(|&v| v >= 0.0));
    }
    // The identified-form invariant holds for the initial estimates as well.
    let comps = MEFMComponents {
        mu: eff.mu.clone(),
        alpha: eff.alpha.clone(),
        beta: eff.beta.clone(),
        common: Array3::zeros((30, 11, 7)),
    };
    comps.validate().unwrap();
}

#[test]
fn residual_equals_double_centering() {
    let x = random_series(12, 9, 5, 7);
    let eff = initial_effects(&x);
    let resid = residual_series(&x, &eff).unwrap();
    // Independent route: L_t = M_p X_t M_q with M_a = I − 11'/a.
    let (t_len, p, q) = x.dims();
    let m_p = Array2::from_shape_fn((p, p), |(i, j)| {
        (if i == j { 1.0 } else { 0.0 }) - 1.0 / p as f64
    });
    let m_q = Array2::from_shape_fn((q, q), |(i, j)| {
        (if i == j { 1.0 } else { 0.0 }) - 1.0 / q as f64
    });
    for t in 0..t_len {
        let direct = m_p.dot(&x.slice_t(t)).dot(&m_q);
        let diff = max_abs_diff(&direct, &resid.index_axis(Axis(0), t).to_owned());
        assert!(diff < 1e-12, "t={t}: max deviation {diff}");
    }
}

#[test]
fn residual_rejects_mismatched_effects() {
    let x = random_series(5, 4, 3, 1);
    let other = initial_effects(&random_series(5, 4, 4, 2));
    assert!(matches!(
        residual_series(&x, &other),
        Err(Error::DimensionMismatch { .. })
    ));
}

// ---------------------------------------------------------------------------
// Loading estimation.

#[test]
fn loadings_match_jacobi_oracle() {
    let x = random_series(40, 10, 8, 99);
    let eff = initial_effects(&x);
    let resid = residual_series(&x, &eff).unwrap();
    let fe = estimate_loadings(&resid, &ModelConfig::new(2, 3)).unwrap();

    // Oracle: build the row scatter by hand and diagonalize with Jacobi.
    let (t_len, p, _q) = x.dims();
    let mut scatter = Array2::<f64>::zeros((p, p));
    for t in 0..t_len {
        let lt = resid.index_axis(Axis(0), t);
        scatter = scatter + lt.dot(&lt.t());
    }
    scatter.mapv_inplace(|v| v / t_len as f64);
    let (vals, vecs) = jacobi_eigen(&scatter);

    for k in 0..2 {
        let rel = (fe.eig_r[k] - vals[k]).abs() / vals[0].max(1e-30);
        assert!(
            rel < 1e-10,
            "eigenvalue {k}: {} vs oracle {}",
            fe.eig_r[k],
            vals[k]
        );
    }
    let top: Array2<f64> = vecs.slice(ndarray::s![.., ..2]).to_owned();
    let gap = max_abs_diff(&projector(&fe.q_r), &projector(&top));
    assert!(gap < 1e-8, "projector deviation {gap}");
}

#[test]
fn loadings_orthonormal_centered_and_sign_fixed() {
    let x = random_series(25, 12, 9, 3);
    let eff = initial_effects(&x);
    let resid = residual_series(&x, &eff).unwrap();
    let fe = estimate_loadings(&resid, &ModelConfig::new(3, 2)).unwrap();
    for (q, dim) in [(&fe.q_r, 12usize), (&fe.q_c, 9usize)] {
        let gram = q.t().dot(q);
        let eye = Array2::<f64>::eye(q.ncols());
        assert!(max_abs_diff(&gram, &eye) < 1e-10);
        let ones = Array1::<f64>::ones(dim);
        for col in q.columns() {
            assert!(col.dot(&ones).abs() < 1e-8, "column not orthogonal to ones");
        }
        for col in q.columns() {
            let mut best = 0usize;
            for (i, v) in col.iter().enumerate() {
                if v.abs() > col[best].abs() {
                    best = i;
                }
            }
            assert!(col[best] > 0.0, "largest-magnitude entry must be positive");
        }
    }
    assert!(fe.eig_r.windows(2).into_iter().all(|w| w[0] >= w[1]));
    assert!(fe.f_z.is_none());
}

#[test]
fn loadings_reject_bad_rank_and_zero_input() {
    let resid = Array3::<f64>::zeros((4, 5, 5));
    assert!(matches!(
        estimate_loadings(&resid, &ModelConfig::new(2, 2)),
        Err(Error::Degenerate(_))
    ));
    let x = random_series(4, 5, 5, 8);
    let eff = initial_effects(&x);
    let resid = residual_series(&x, &eff).unwrap();
    for bad in [
        ModelConfig::new(0, 2),
        ModelConfig::new(2, 5),
        ModelConfig::new(5, 2),
    ] {
        assert!(matches!(
            estimate_loadings(&resid, &bad),
            Err(Error::InvalidInput(_))
        ));
    }
}

#[test]
fn loading_space_invariant_under_column_permutation() {
    let x = random_series(30, 8, 6, 11);
    let eff = initial_effects(&x);
    let resid = residual_series(&x, &eff).unwrap();
    let fe = estimate_loadings(&resid, &ModelConfig::new(2, 2)).unwrap();

    // Permute the columns of every X_t consistently and rerun the pipeline.
    let perm = [3usize, 0, 5, 1, 4, 2];
    let (t_len, p, q) = x.dims();
    let mut permuted = Array3::zeros((t_len, p, q));
    for t in 0..t_len {
        for i in 0..p {
            for (jnew, &jold) in perm.iter().enumerate() {
                permuted[[t, i, jnew]] = x.data()[[t, i, jold]];
            }
        }
    }
    let xp = MatrixSeries::new(permuted).unwrap();
    let effp = initial_effects(&xp);
    let residp = residual_series(&xp, &effp).unwrap();
    let fep = estimate_loadings(&residp, &ModelConfig::new(2, 2)).unwrap();
    let d = mefm::metrics::space_distance(fe.q_r.view(), fep.q_r.view()).unwrap();
    assert!(
        d < 1e-8,
        "row loading space moved under column permutation: {d}"
    );
}

// ---------------------------------------------------------------------------
// Factor extraction and reconstruction.

#[test]
fn common_component_is_double_projection() {
    let x = random_series(15, 10, 7, 21);
    let eff = initial_effects(&x);
    let resid = residual_series(&x, &eff).unwrap();
    let fe = estimate_loadings(&resid, &ModelConfig::new(2, 2)).unwrap();
    let (f_z, common) = estimate_factors(&x, &resid, &fe).unwrap();
    assert_eq!(f_z.dim(), (15, 2, 2));
    let p_r = projector(&fe.q_r);
    let p_c = projector(&fe.q_c);
    for t in 0..15 {
        let direct = p_r.dot(&x.slice_t(t)).dot(&p_c);
        let diff = max_abs_diff(&direct, &common.index_axis(Axis(0), t).to_owned());
        assert!(
            diff <= 1e-10,
            "t={t}: projection identity violated by {diff}"
        );
        let fz_direct = fe.q_r.t().dot(&resid.index_axis(Axis(0), t)).dot(&fe.q_c);
        let fdiff = max_abs_diff(&fz_direct, &f_z.index_axis(Axis(0), t).to_owned());
        assert!(fdiff <= 1e-12);
    }
}

#[test]
fn estimate_factors_rejects_mismatched_shapes() {
    let x = random_series(6, 5, 4, 2);
    let eff = initial_effects(&x);
    let resid = residual_series(&x, &eff).unwrap();
    let fe = estimate_loadings(&resid, &ModelConfig::new(2, 2)).unwrap();
    let short = resid.slice(ndarray::s![..4, .., ..]).to_owned();
    assert!(matches!(
        estimate_factors(&x, &short, &fe),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn reconstruct_assembles_components() {
    let (t_len, p, q) = (4usize, 3usize, 5usize);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut alpha = Array2::from_shape_fn((t_len, p), |_| {
        let v: f64 = StandardNormal.sample(&mut rng);
        v.abs()
    });
    let mut beta = Array2::from_shape_fn((t_len, q), |_| {
        let v: f64 = StandardNormal.sample(&mut rng);
        v.abs()
    });
    for t in 0..t_len {
        alpha[[t, t % p]] = 0.0;
        beta[[t, t % q]] = 0.0;
    }
    let mu = Array1::from_shape_fn(t_len, |t| t as f64 - 1.5);
    let common = Array3::from_shape_fn((t_len, p, q), |_| StandardNormal.sample(&mut rng));
    let comps = MEFMComponents {
        mu: mu.clone(),
        alpha: alpha.clone(),
        beta: beta.clone(),
        common: common.clone(),
    };
    let x = reconstruct(&comps).unwrap();
    for t in 0..t_len {
        for i in 0..p {
            for j in 0..q {
                let want = mu[t] + alpha[[t, i]] + beta[[t, j]] + common[[t, i, j]];
                assert!((x.data()[[t, i, j]] - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn reconstruct_rejects_unidentified_components() {
    let comps = MEFMComponents {
        mu: Array1::zeros(3),
        alpha: Array2::from_elem((3, 4), 0.5), // minimum never zero
        beta: Array2::zeros((3, 4)),
        common: Array3::zeros((3, 4, 4)),
    };
    assert!(matches!(reconstruct(&comps), Err(Error::Identification(_))));
    let comps = MEFMComponents {
        mu: Array1::zeros(3),
        alpha: {
            let mut a = Array2::zeros((3, 4));
            a[[1, 2]] = -0.25;
            a
        },
        beta: Array2::zeros((3, 4)),
        common: Array3::zeros((3, 4, 4)),
    };
    assert!(matches!(reconstruct(&comps), Err(Error::Identification(_))));
}

#[test]
fn matrix_series_validates_input() {
    assert!(MatrixSeries::new(Array3::zeros((1, 3, 3))).is_err());
    assert!(MatrixSeries::new(Array3::zeros((3, 1, 3))).is_err());
    let mut bad = Array3::zeros((3, 3, 3));
    bad[[1, 1, 1]] = f64::NAN;
    assert!(matches!(
        MatrixSeries::new(bad),
        Err(Error::InvalidInput(_))
    ));
}
