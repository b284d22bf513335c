//! Companion-form state space for a VAR(p) observed with small measurement
//! noise, and a Kalman filter / fixed-interval smoother that handles
//! arbitrary missing cells by deleting the unobserved measurement rows.
//!
//! State at period `t` is `x_t = (y_t', y_{t-1}', ..., y_{t-p+1}')'`; the
//! measurement is `y_t = B x_t + e_t` with `B = [I_n 0]` and `R = eps * I_n`.
//! Index `0` of every per-period vector refers to the initial state `x_0`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, companion, spd_inverse, symmetrize};
use crate::model::TimeSeriesDataset;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceParams {
    pub n: usize,
    pub p: usize,
    /// `n x np` selection matrix `[I_n 0]`.
    pub b: DMatrix<f64>,
    /// `n x n` measurement covariance `eps * I_n`.
    pub r: DMatrix<f64>,
    /// `np x np` companion transition matrix.
    pub c: DMatrix<f64>,
    /// `np x np` state innovation covariance, nonzero only in the top-left block.
    pub q: DMatrix<f64>,
    pub mu0: DVector<f64>,
    pub omega0: DMatrix<f64>,
    pub epsilon: f64,
}

impl StateSpaceParams {
    pub fn state_dim(&self) -> usize {
        self.n * self.p
    }

    /// VAR coefficients, the first `n` rows of the transition matrix.
    pub fn psi(&self) -> DMatrix<f64> {
        self.c.rows(0, self.n).into_owned()
    }

    pub fn sigma(&self) -> DMatrix<f64> {
        self.q.view((0, 0), (self.n, self.n)).into_owned()
    }
}

/// Assembles the companion system for coefficients `psi` (`n x np`) and
/// innovation covariance `sigma`.
pub fn build_state_space(
    psi: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    mu0: DVector<f64>,
    omega0: DMatrix<f64>,
    epsilon: f64,
) -> Result<StateSpaceParams> {
    let n = psi.nrows();
    let np = psi.ncols();
    if n == 0 || !np.is_multiple_of(n) {
        return Err(Error::dim(format!("psi is {n}x{np}, expected n x np")));
    }
    if sigma.shape() != (n, n) || mu0.len() != np || omega0.shape() != (np, np) {
        return Err(Error::dim("sigma, mu0 or omega0 does not match psi"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::domain("measurement noise epsilon must be positive"));
    }
    if !all_finite(psi) || !all_finite(&omega0) || mu0.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite state-space parameters"));
    }
    let asym = (sigma - sigma.transpose()).amax();
    if asym > 1e-10 * sigma.amax().max(1.0) || Cholesky::new(sigma.clone()).is_none() {
        return Err(Error::numerical("innovation covariance is not symmetric positive definite"));
    }
    let mut b = DMatrix::zeros(n, np);
    b.view_mut((0, 0), (n, n)).fill_with_identity();
    let mut q = DMatrix::zeros(np, np);
    q.view_mut((0, 0), (n, n)).copy_from(sigma);
    Ok(StateSpaceParams {
        n,
        p: np / n,
        b,
        r: DMatrix::identity(n, n) * epsilon,
        c: companion(psi),
        q,
        mu0,
        omega0,
        epsilon,
    })
}

/// Filtered moments. `x_filt[t]` / `p_filt[t]` are `x_{t|t}` for `t = 0..=T`
/// (`t = 0` is the prior); `x_pred[t-1]` / `p_pred[t-1]` are `x_{t|t-1}` for
/// `t = 1..=T`.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub x_pred: Vec<DVector<f64>>,
    pub p_pred: Vec<DMatrix<f64>>,
    pub x_filt: Vec<DVector<f64>>,
    pub p_filt: Vec<DMatrix<f64>>,
    /// Gaussian log-likelihood of the observed entries.
    pub loglik: f64,
}

impl FilterOutput {
    /// One-step prediction of the measurement for the period after the last
    /// filtered one, `B C x_{T|T}`.
    pub fn next_measurement(&self, params: &StateSpaceParams) -> DVector<f64> {
        let last = self.x_filt.last().expect("filter output holds the prior");
        (&params.c * last).rows(0, params.n).into_owned()
    }
}

/// Smoothed moments for `t = 0..=T` and lag-one covariances
/// `p_lag[t-1] = Cov(x_t, x_{t-1} | all data)` for `t = 1..=T`.
#[derive(Debug, Clone)]
pub struct SmootherOutput {
    pub x_smooth: Vec<DVector<f64>>,
    pub p_smooth: Vec<DMatrix<f64>>,
    pub p_lag: Vec<DMatrix<f64>>,
    pub loglik: f64,
}

impl SmootherOutput {
    pub fn periods(&self) -> usize {
        self.p_lag.len()
    }
}

fn check_dims(data: &TimeSeriesDataset, params: &StateSpaceParams) -> Result<()> {
    if data.n() != params.n {
        return Err(Error::dim(format!("data has {} series, model has {}", data.n(), params.n)));
    }
    Ok(())
}

/// `C x` for the companion matrix built from the first `n` rows of `c`.
fn companion_mul(c: &DMatrix<f64>, n: usize, x: &DVector<f64>) -> DVector<f64> {
    let m = x.len();
    let mut out = DVector::zeros(m);
    out.rows_mut(0, n).copy_from(&(c.rows(0, n) * x));
    if m > n {
        out.rows_mut(n, m - n).copy_from(&x.rows(0, m - n));
    }
    out
}

/// `C P` for the companion matrix: the top block is `Psi P`, the rest is
/// `P` shifted down by `n` rows.
fn companion_left(c: &DMatrix<f64>, n: usize, p: &DMatrix<f64>) -> DMatrix<f64> {
    let m = p.nrows();
    let mut out = DMatrix::zeros(m, p.ncols());
    out.rows_mut(0, n).copy_from(&(c.rows(0, n) * p));
    if m > n {
        out.rows_mut(n, m - n).copy_from(&p.rows(0, m - n));
    }
    out
}

/// `C P C' + Q` using the companion structure.
fn companion_sandwich(c: &DMatrix<f64>, n: usize, p: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let m = p.nrows();
    let psi = c.rows(0, n);
    let a = psi * p; // n x m
    let mut out = DMatrix::zeros(m, m);
    out.view_mut((0, 0), (n, n)).copy_from(&(&a * psi.transpose()));
    if m > n {
        let top_right = a.columns(0, m - n).into_owned();
        out.view_mut((0, n), (n, m - n)).copy_from(&top_right);
        out.view_mut((n, 0), (m - n, n)).copy_from(&top_right.transpose());
        out.view_mut((n, n), (m - n, m - n)).copy_from(&p.view((0, 0), (m - n, m - n)));
    }
    out += q;
    out
}

pub fn kalman_filter(data: &TimeSeriesDataset, params: &StateSpaceParams) -> Result<FilterOutput> {
    check_dims(data, params)?;
    let t_len = data.periods();
    let m = params.state_dim();
    let n = params.n;

    let mut out = FilterOutput {
        x_pred: Vec::with_capacity(t_len),
        p_pred: Vec::with_capacity(t_len),
        x_filt: Vec::with_capacity(t_len + 1),
        p_filt: Vec::with_capacity(t_len + 1),
        loglik: 0.0,
    };
    out.x_filt.push(params.mu0.clone());
    out.p_filt.push(params.omega0.clone());

    let mut obs = Vec::with_capacity(params.n);
    for t in 0..t_len {
        let x_prev = &out.x_filt[t];
        let p_prev = &out.p_filt[t];
        let x_pred = companion_mul(&params.c, n, x_prev);
        let mut p_pred = companion_sandwich(&params.c, n, p_prev, &params.q);
        symmetrize(&mut p_pred);

        obs.clear();
        obs.extend((0..params.n).filter(|&i| data.is_observed(i, t)));
        let (x_f, p_f) = if obs.is_empty() {
            (x_pred.clone(), p_pred.clone())
        } else {
            let k = obs.len();
            let mut f = DMatrix::from_fn(k, k, |a, b| p_pred[(obs[a], obs[b])]);
            for a in 0..k {
                f[(a, a)] += params.epsilon;
            }
            let f_inv = spd_inverse(&f).map_err(|e| at_period(t + 1, e))?;
            let v = DVector::from_fn(k, |a, _| data.values()[(obs[a], t)] - x_pred[obs[a]]);
            let pht = DMatrix::from_fn(m, k, |r, a| p_pred[(r, obs[a])]);
            let gain = &pht * &f_inv.inverse;
            let x_f = &x_pred + &gain * &v;
            // Joseph form: (I - K H) P (I - K H)' + K R K'
            let mut a_mat = DMatrix::identity(m, m);
            for (col, &i) in obs.iter().enumerate() {
                for r in 0..m {
                    a_mat[(r, i)] -= gain[(r, col)];
                }
            }
            let mut p_f = &a_mat * &p_pred * a_mat.transpose() + (&gain * gain.transpose()) * params.epsilon;
            symmetrize(&mut p_f);
            let quad = v.dot(&(&f_inv.inverse * &v));
            out.loglik -= 0.5 * (k as f64 * LN_2PI + f_inv.log_det + quad);
            (x_f, p_f)
        };
        if !x_f.iter().all(|v| v.is_finite()) || !all_finite(&p_f) || !out.loglik.is_finite() {
            return Err(Error::NumericalAt { period: t + 1, message: "non-finite filter state".into() });
        }
        out.x_pred.push(x_pred);
        out.p_pred.push(p_pred);
        out.x_filt.push(x_f);
        out.p_filt.push(p_f);
    }
    Ok(out)
}

fn at_period(period: usize, e: Error) -> Error {
    Error::NumericalAt { period, message: alloc::string::ToString::to_string(&e) }
}

/// Rauch-Tung-Striebel smoother with lag-one covariances.
pub fn kalman_smoother(data: &TimeSeriesDataset, params: &StateSpaceParams) -> Result<SmootherOutput> {
    let filt = kalman_filter(data, params)?;
    smooth_filtered(&filt, params)
}

pub fn smooth_filtered(filt: &FilterOutput, params: &StateSpaceParams) -> Result<SmootherOutput> {
    let t_len = filt.x_pred.len();
    let n = params.n;
    let mut x_s = filt.x_filt.clone();
    let mut p_s = filt.p_filt.clone();
    let mut p_lag = alloc::vec![DMatrix::zeros(0, 0); t_len];
    for t in (0..t_len).rev() {
        // J_t' = P_{t+1|t}^{-1} C P_{t|t}
        let cp = companion_left(&params.c, n, &filt.p_filt[t]);
        let jt = match Cholesky::new(filt.p_pred[t].clone()) {
            Some(ch) => ch.solve(&cp),
            None => spd_inverse(&filt.p_pred[t]).map_err(|e| at_period(t, e))?.inverse * cp,
        };
        if !all_finite(&jt) {
            return Err(Error::NumericalAt { period: t, message: "non-finite smoother gain".into() });
        }
        let j = jt.transpose();
        let dx = &x_s[t + 1] - &filt.x_pred[t];
        x_s[t] = &filt.x_filt[t] + &j * dx;
        let dp = &p_s[t + 1] - &filt.p_pred[t];
        let mut p = &filt.p_filt[t] + &j * dp * &jt;
        symmetrize(&mut p);
        if !all_finite(&p) {
            return Err(Error::NumericalAt { period: t, message: "non-finite smoothed covariance".into() });
        }
        p_lag[t] = &p_s[t + 1] * &jt;
        p_s[t] = p;
    }
    Ok(SmootherOutput { x_smooth: x_s, p_smooth: p_s, p_lag, loglik: filt.loglik })
}
