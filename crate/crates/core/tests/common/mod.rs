//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Number of subsets of each size (index = size) of the `n x t` grid that
/// contain at least one complete period, by exhaustive enumeration.
pub fn full_column_counts(n: usize, t: usize) -> Vec<u64> {
    let cells = n * t;
    assert!(cells <= 20);
    let mut counts = vec![0u64; cells + 1];
    let columns: Vec<u32> = (0..t).map(|c| ((1u32 << n) - 1) << (c * n)).collect();
    for mask in 0u32..(1u32 << cells) {
        if columns.iter().any(|&col| mask & col == col && col != 0) {
            counts[mask.count_ones() as usize] += 1;
        }
    }
    counts
}

/// Exact `C(m, k)` in `u128`, for small arguments.
pub fn choose(m: u64, k: u64) -> u128 {
    if k > m {
        return 0;
    }
    let mut acc = 1u128;
    for i in 0..k.min(m - k) {
        acc = acc * u128::from(m - i) / u128::from(i + 1);
    }
    acc
}

/// Conditional moments of every state `x_0..x_T` given the observed cells,
/// computed by building the joint Gaussian of states and observations and
/// conditioning in one dense step.
pub struct DenseSmoother {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    /// `Cov(x_t, x_{t-1} | data)` for `t = 1..T`.
    pub lag: Vec<DMatrix<f64>>,
    pub loglik: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn dense_smoother(
    values: &DMatrix<f64>,
    observed: &DMatrix<bool>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    mu0: &DVector<f64>,
    omega0: &DMatrix<f64>,
    eps: f64,
) -> DenseSmoother {
    let n = values.nrows();
    let t_len = values.ncols();
    let m = c.nrows();
    let dim = m * (t_len + 1);
    // prior mean and covariance of the stacked states
    let mut mean = DVector::zeros(dim);
    let mut cov = DMatrix::zeros(dim, dim);
    let mut var_t = omega0.clone();
    let mut mu_t = mu0.clone();
    mean.rows_mut(0, m).copy_from(&mu_t);
    cov.view_mut((0, 0), (m, m)).copy_from(&var_t);
    for t in 1..=t_len {
        mu_t = c * &mu_t;
        var_t = c * &var_t * c.transpose() + q;
        mean.rows_mut(t * m, m).copy_from(&mu_t);
        cov.view_mut((t * m, t * m), (m, m)).copy_from(&var_t);
        // Cov(x_t, x_s) = C Cov(x_{t-1}, x_s) for s < t
        for s in 0..t {
            let prev = cov.view(((t - 1) * m, s * m), (m, m)).into_owned();
            let block = c * prev;
            cov.view_mut((t * m, s * m), (m, m)).copy_from(&block);
            cov.view_mut((s * m, t * m), (m, m)).copy_from(&block.transpose());
        }
    }
    // observed cells pick state coordinate i of x_t (t is 1-based in the stack)
    let picks: Vec<usize> =
        (0..t_len).flat_map(|t| (0..n).filter(move |&i| observed[(i, t)]).map(move |i| (t + 1) * m + i)).collect();
    let k = picks.len();
    let y = DVector::from_fn(k, |a, _| values[(picks[a] % m, picks[a] / m - 1)]);
    let mu_y = DVector::from_fn(k, |a, _| mean[picks[a]]);
    let mut s_yy = DMatrix::from_fn(k, k, |a, b| cov[(picks[a], picks[b])]);
    for a in 0..k {
        s_yy[(a, a)] += eps;
    }
    let s_xy = DMatrix::from_fn(dim, k, |r, b| cov[(r, picks[b])]);
    let (post_mean, post_cov, loglik) = if k == 0 {
        (mean.clone(), cov.clone(), 0.0)
    } else {
        let chol = s_yy.clone().cholesky().expect("observation covariance is SPD");
        let resid = &y - &mu_y;
        let gain = chol.solve(&s_xy.transpose()).transpose();
        let pm = &mean + &gain * &resid;
        let pc = &cov - &gain * s_xy.transpose();
        let l = chol.l();
        let logdet: f64 = 2.0 * (0..k).map(|i| l[(i, i)].ln()).sum::<f64>();
        let quad = resid.dot(&chol.solve(&resid));
        let ll = -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad);
        (pm, pc, ll)
    };
    let means = (0..=t_len).map(|t| post_mean.rows(t * m, m).into_owned()).collect();
    let covs = (0..=t_len).map(|t| post_cov.view((t * m, t * m), (m, m)).into_owned()).collect();
    let lag = (1..=t_len).map(|t| post_cov.view((t * m, (t - 1) * m), (m, m)).into_owned()).collect();
    DenseSmoother { means, covs, lag, loglik }
}

/// Solves `(X'X / r + diag(ridge)) b = X'y / r` for every column of `y`;
/// rows of the result are equations.
pub fn ridge(y: &DMatrix<f64>, x: &DMatrix<f64>, ridge: &[f64]) -> DMatrix<f64> {
    let r = x.nrows() as f64;
    let mut a = x.transpose() * x / r;
    for (j, w) in ridge.iter().enumerate() {
        a[(j, j)] += w;
    }
    let b = a.lu().solve(&(x.transpose() * y / r)).expect("nonsingular normal equations");
    b.transpose()
}

pub fn ols(y: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    ridge(y, x, &vec![0.0; x.ncols()])
}

/// Regression rows for a VAR(p) on a complete `n x T` panel: targets are
/// periods `p..T` (0-based), regressors `(y_{t-1}, ..., y_{t-p})`.
pub fn var_design(values: &DMatrix<f64>, p: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = values.nrows();
    let rows = values.ncols() - p;
    let y = DMatrix::from_fn(rows, n, |r, i| values[(i, r + p)]);
    let x = DMatrix::from_fn(rows, n * p, |r, j| values[(j % n, r + p - 1 - j / n)]);
    (y, x)
}

/// Subtracts each row's mean.
pub fn centre(values: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = values.clone();
    for i in 0..out.nrows() {
        let m = out.row(i).mean();
        out.row_mut(i).add_scalar_mut(-m);
    }
    out
}

/// Expanding-window AR(1) pseudo out-of-sample MSE for a single complete
/// series: for `t = t0..T-1` fit OLS without intercept on the series
/// centred with the window mean, forecast period `t + 1`.
pub fn expanding_ar1_mse(y: &[f64], t0: usize) -> f64 {
    let t_len = y.len();
    let mut total = 0.0;
    for t in t0..t_len {
        let w = &y[..t];
        let m = w.iter().sum::<f64>() / t as f64;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for s in 1..t {
            sxy += (w[s] - m) * (w[s - 1] - m);
            sxx += (w[s - 1] - m) * (w[s - 1] - m);
        }
        let phi = sxy / sxx;
        let f = m + phi * (w[t - 1] - m);
        total += (y[t] - f).powi(2);
    }
    total / (t_len - t0) as f64
}
