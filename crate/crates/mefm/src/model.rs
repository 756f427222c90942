//! Data model, closed-form initial estimators, residual projection, and the
//! eigendecomposition-based factor-structure estimators.

use crate::error::{Error, Result};
use crate::linalg;
use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use rayon::prelude::*;

/// A length-T series of p×q observation matrices, validated on construction:
/// every entry finite, T ≥ 2, p ≥ 2, q ≥ 2. Axis order is (t, i, j).
#[derive(Debug, Clone)]
pub struct MatrixSeries {
    data: Array3<f64>,
}

impl MatrixSeries {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (t, p, q) = data.dim();
        if t < 2 || p < 2 || q < 2 {
            return Err(Error::InvalidInput(format!(
                "series needs T, p, q all >= 2; got ({t}, {p}, {q})"
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(
                "series contains a non-finite entry".into(),
            ));
        }
        Ok(Self { data })
    }

    /// (T, p, q)
    pub fn dims(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn slice_t(&self, t: usize) -> ArrayView2<'_, f64> {
        self.data.slice(s![t, .., ..])
    }
}

/// Noise-free model components. `alpha` is T×p, `beta` is T×q, `common` is
/// T×p×q. Identification: for every t the minimum of `alpha[t,·]` and of
/// `beta[t,·]` is exactly zero and all effect entries are nonnegative.
#[derive(Debug, Clone)]
pub struct MEFMComponents {
    pub mu: Array1<f64>,
    pub alpha: Array2<f64>,
    pub beta: Array2<f64>,
    pub common: Array3<f64>,
}

impl MEFMComponents {
    /// Checks the identification invariants. Effects produced by this crate
    /// (generator or estimators) satisfy them exactly: the per-t minimum is a
    /// literal 0.0 because it is set by construction or by subtracting the
    /// minimum from itself.
    pub fn validate(&self) -> Result<()> {
        let t_len = self.mu.len();
        let (ta, _p) = self.alpha.dim();
        let (tb, _q) = self.beta.dim();
        let (tc, _, _) = self.common.dim();
        if ta != t_len || tb != t_len || tc != t_len {
            return Err(Error::DimensionMismatch {
                expected: format!("T = {t_len} on every component"),
                got: format!("alpha T = {ta}, beta T = {tb}, common T = {tc}"),
            });
        }
        for (name, eff) in [("alpha", &self.alpha), ("beta", &self.beta)] {
            for (t, row) in eff.outer_iter().enumerate() {
                let mut min = f64::INFINITY;
                for &v in row {
                    if !(v >= 0.0) {
                        return Err(Error::Identification(format!(
                            "{name}[{t}] has a negative or non-finite entry ({v})"
                        )));
                    }
                    min = min.min(v);
                }
                if min != 0.0 {
                    return Err(Error::Identification(format!(
                        "{name}[{t}] has minimum {min}, expected an exact zero"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Estimated factor structure. `q_r` (p×k_r) and `q_c` (q×k_c) have
/// orthonormal columns orthogonal to the all-ones direction; eigenvalues are
/// sorted nonincreasing. `f_z` stays `None` until the factor series has been
/// extracted. The `ambiguous_gap_*` flags record that the k-th and (k+1)-th
/// scatter eigenvalues were equal within 1e-12, i.e. the returned subspace is
/// not uniquely determined by the data.
#[derive(Debug, Clone)]
pub struct FactorEstimate {
    pub q_r: Array2<f64>,
    pub q_c: Array2<f64>,
    pub eig_r: Array1<f64>,
    pub eig_c: Array1<f64>,
    pub f_z: Option<Array3<f64>>,
    pub ambiguous_gap_r: bool,
    pub ambiguous_gap_c: bool,
}

/// How eigenvector signs are pinned down (the column space is the identified
/// object; the sign is a reporting convention).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignConvention {
    /// Flip each column so its largest-magnitude entry is positive; ties
    /// broken by the lowest index.
    #[default]
    LargestAbsPositive,
}

#[derive(Debug, Clone, Copy)]
pub struct ModelConfig {
    pub k_r: usize,
    pub k_c: usize,
    pub sign_convention: SignConvention,
}

impl ModelConfig {
    pub fn new(k_r: usize, k_c: usize) -> Self {
        Self {
            k_r,
            k_c,
            sign_convention: SignConvention::default(),
        }
    }
}

/// Initial estimates of the base and main effects.
#[derive(Debug, Clone)]
pub struct InitialEffects {
    pub mu: Array1<f64>,
    pub alpha: Array2<f64>,
    pub beta: Array2<f64>,
}

/// Closed-form initial estimators. For each t, with row sums r = X_t 1_q and
/// column sums c = X_t' 1_p:
///
/// ```text
/// alpha~[t] = r/q − 1_p · min(r)/q
/// beta~[t]  = c/p − 1_q · min(c)/p
/// mu~[t]    = 1' X_t 1 /(pq) − mean(alpha~[t]) − mean(beta~[t])
/// ```
///
/// Each alpha~[t] / beta~[t] is nonnegative with an exact 0.0 at its argmin:
/// the minimum is subtracted from itself, and IEEE subtraction of the minimum
/// from any larger value cannot produce a negative.
pub fn initial_effects(x: &MatrixSeries) -> InitialEffects {
    let (t_len, p, q) = x.dims();
    let mut mu = Array1::zeros(t_len);
    let mut alpha = Array2::zeros((t_len, p));
    let mut beta = Array2::zeros((t_len, q));
    for t in 0..t_len {
        let xt = x.slice_t(t);
        let row_means = xt.mean_axis(Axis(1)).expect("q >= 2");
        let col_means = xt.mean_axis(Axis(0)).expect("p >= 2");
        let min_r = row_means.iter().copied().fold(f64::INFINITY, f64::min);
        let min_c = col_means.iter().copied().fold(f64::INFINITY, f64::min);
        let grand = row_means.mean().expect("p >= 2");
        for i in 0..p {
            alpha[[t, i]] = row_means[i] - min_r;
        }
        for j in 0..q {
            beta[[t, j]] = col_means[j] - min_c;
        }
        let alpha_mean = alpha.row(t).mean().expect("p >= 2");
        let beta_mean = beta.row(t).mean().expect("q >= 2");
        mu[t] = grand - alpha_mean - beta_mean;
    }
    InitialEffects { mu, alpha, beta }
}

/// Residual after removing the estimated base and main effects:
/// `L~_t = X_t − mu~_t 1 1' − alpha~_t 1' − 1 beta~_t'`.
///
/// Algebraically this equals the double centering `M_p X_t M_q` with
/// `M_a = I − 1 1'/a`; the subtraction form is used so the function is exact
/// on the decomposition it was handed.
pub fn residual_series(x: &MatrixSeries, effects: &InitialEffects) -> Result<Array3<f64>> {
    let (t_len, p, q) = x.dims();
    if effects.mu.len() != t_len
        || effects.alpha.dim() != (t_len, p)
        || effects.beta.dim() != (t_len, q)
    {
        return Err(Error::DimensionMismatch {
            expected: format!("effects shaped for (T={t_len}, p={p}, q={q})"),
            got: format!(
                "mu len {}, alpha {:?}, beta {:?}",
                effects.mu.len(),
                effects.alpha.dim(),
                effects.beta.dim()
            ),
        });
    }
    let mut out = Array3::zeros((t_len, p, q));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(t, mut lt)| {
            let xt = x.slice_t(t);
            for i in 0..p {
                for j in 0..q {
                    lt[[i, j]] =
                        xt[[i, j]] - effects.mu[t] - effects.alpha[[t, i]] - effects.beta[[t, j]];
                }
            }
        });
    Ok(out)
}

fn fix_column_signs(m: &mut Array2<f64>, _convention: SignConvention) {
    for mut col in m.columns_mut() {
        let mut best = 0usize;
        let mut best_abs = f64::NEG_INFINITY;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}

/// Estimates the loading spaces from the residual series: `q_r` holds the top
/// k_r eigenvectors of the row scatter `T^{-1} Σ_t L~_t L~_t'`, `q_c` the top
/// k_c eigenvectors of the column scatter `T^{-1} Σ_t L~_t' L~_t`. Scatter
/// sums run in ascending t so results do not depend on scheduling.
pub fn estimate_loadings(l: &Array3<f64>, cfg: &ModelConfig) -> Result<FactorEstimate> {
    let (t_len, p, q) = l.dim();
    if cfg.k_r == 0 || cfg.k_c == 0 || cfg.k_r >= p || cfg.k_c >= q {
        return Err(Error::InvalidInput(format!(
            "need 0 < k_r < p and 0 < k_c < q; got k_r={}, k_c={}, p={p}, q={q}",
            cfg.k_r, cfg.k_c
        )));
    }
    let mut scatter_r = Array2::<f64>::zeros((p, p));
    let mut scatter_c = Array2::<f64>::zeros((q, q));
    for t in 0..t_len {
        let lt = l.slice(s![t, .., ..]);
        scatter_r += &lt.dot(&lt.t());
        scatter_c += &lt.t().dot(&lt);
    }
    let norm = 1.0 / t_len as f64;
    scatter_r.mapv_inplace(|v| v * norm);
    scatter_c.mapv_inplace(|v| v * norm);
    if scatter_r.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate(
            "residual series is identically zero; loading spaces are undefined".into(),
        ));
    }

    let (eval_r, evec_r) = linalg::sym_eigen_desc(scatter_r.view());
    let (eval_c, evec_c) = linalg::sym_eigen_desc(scatter_c.view());

    let gap_flag = |vals: &Array1<f64>, k: usize| -> bool {
        let ambiguous = (vals[k - 1] - vals[k]).abs() <= 1e-12;
        if ambiguous {
            log::warn!(
                "eigenvalue gap at position {k} is below 1e-12 ({} vs {}); the selected subspace is ambiguous",
                vals[k - 1],
                vals[k]
            );
        }
        ambiguous
    };
    let ambiguous_gap_r = gap_flag(&eval_r, cfg.k_r);
    let ambiguous_gap_c = gap_flag(&eval_c, cfg.k_c);

    let mut q_r = evec_r.slice(s![.., ..cfg.k_r]).to_owned();
    let mut q_c = evec_c.slice(s![.., ..cfg.k_c]).to_owned();
    fix_column_signs(&mut q_r, cfg.sign_convention);
    fix_column_signs(&mut q_c, cfg.sign_convention);

    Ok(FactorEstimate {
        q_r,
        q_c,
        eig_r: eval_r.slice(s![..cfg.k_r]).to_owned(),
        eig_c: eval_c.slice(s![..cfg.k_c]).to_owned(),
        f_z: None,
        ambiguous_gap_r,
        ambiguous_gap_c,
    })
}

/// Extracts the factor series and the common component:
/// `f_z[t] = q_r' L~_t q_c` and `common[t] = q_r q_r' X_t q_c q_c'`.
pub fn estimate_factors(
    x: &MatrixSeries,
    l: &Array3<f64>,
    fe: &FactorEstimate,
) -> Result<(Array3<f64>, Array3<f64>)> {
    let (t_len, p, q) = x.dims();
    if l.dim() != (t_len, p, q) {
        return Err(Error::DimensionMismatch {
            expected: format!("residuals of shape ({t_len}, {p}, {q})"),
            got: format!("{:?}", l.dim()),
        });
    }
    if fe.q_r.nrows() != p || fe.q_c.nrows() != q {
        return Err(Error::DimensionMismatch {
            expected: format!("loadings with p={p} and q={q} rows"),
            got: format!("q_r {:?}, q_c {:?}", fe.q_r.dim(), fe.q_c.dim()),
        });
    }
    let (k_r, k_c) = (fe.q_r.ncols(), fe.q_c.ncols());
    let mut f_z = Array3::zeros((t_len, k_r, k_c));
    let mut common = Array3::zeros((t_len, p, q));
    f_z.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(common.axis_iter_mut(Axis(0)).into_par_iter())
        .enumerate()
        .for_each(|(t, (mut fz_t, mut c_t))| {
            let lt = l.slice(s![t, .., ..]);
            fz_t.assign(&fe.q_r.t().dot(&lt).dot(&fe.q_c));
            // q_r (q_r' X q_c) q_c' — grouped to keep the inner products small.
            let core = fe.q_r.t().dot(&x.slice_t(t)).dot(&fe.q_c);
            c_t.assign(&fe.q_r.dot(&core).dot(&fe.q_c.t()));
        });
    Ok((f_z, common))
}

/// Rebuilds the noise-free series from validated components.
pub fn reconstruct(decomp: &MEFMComponents) -> Result<MatrixSeries> {
    decomp.validate()?;
    let t_len = decomp.mu.len();
    let p = decomp.alpha.ncols();
    let q = decomp.beta.ncols();
    if decomp.common.dim() != (t_len, p, q) {
        return Err(Error::DimensionMismatch {
            expected: format!("common of shape ({t_len}, {p}, {q})"),
            got: format!("{:?}", decomp.common.dim()),
        });
    }
    let mut data = Array3::zeros((t_len, p, q));
    for t in 0..t_len {
        for i in 0..p {
            for j in 0..q {
                data[[t, i, j]] = decomp.mu[t]
                    + decomp.alpha[[t, i]]
                    + decomp.beta[[t, j]]
                    + decomp.common[[t, i, j]];
            }
        }
    }
    MatrixSeries::new(data)
}
