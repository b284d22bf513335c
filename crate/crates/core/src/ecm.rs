//! Penalised maximum-likelihood VAR under the lag-decaying elastic-net
//! penalty, estimated by ECM over the companion state space.
//!
//! Everything in this module works on standardised data: each series is
//! centred and scaled by the mean and sample standard deviation of its
//! observed cells. [`VarParameters`] keeps the constants so forecasts can be
//! mapped back to original units.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, discrete_lyapunov, min_eigenvalue, spd_solve, spectral_radius, symmetrize};
use crate::math;
use crate::model::{Hyperparameters, TimeSeriesDataset};
use crate::state_space::{build_state_space, kalman_filter, kalman_smoother, SmootherOutput, StateSpaceParams};

/// Diagonal jitter added to the smoothed initial covariance.
pub const OMEGA0_JITTER: f64 = 1e-12;

/// Relative floor on the eigenvalues of the innovation covariance, only
/// reached by unpenalised fits to degenerate data.
pub const SIGMA_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcmConfig {
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Measurement noise, LASSO approximation offset and the stabiliser in
    /// the convergence ratio.
    pub epsilon: f64,
    /// Sweeps allowed to the coordinate-descent initialiser.
    pub cd_max_iter: usize,
    /// Coordinate descent stops once no coefficient moves more than this.
    pub cd_tol: f64,
}

impl Default for EcmConfig {
    fn default() -> Self {
        Self { max_iter: 1000, rel_tol: 1e-3, epsilon: 1e-8, cd_max_iter: 10_000, cd_tol: 1e-12 }
    }
}

impl EcmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.cd_max_iter == 0 {
            return Err(Error::domain("max_iter must be >= 1"));
        }
        if ![self.rel_tol, self.epsilon, self.cd_tol].iter().all(|&v| v > 0.0) {
            return Err(Error::domain("rel_tol, epsilon and cd_tol must be positive"));
        }
        Ok(())
    }
}

/// Per-series centring and scaling constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    pub fn identity(n: usize) -> Self {
        Self { means: alloc::vec![0.0; n], scales: alloc::vec![1.0; n] }
    }

    /// Observed-sample mean and standard deviation of every series. A series
    /// with no observations gets mean 0; scale falls back to 1 when fewer
    /// than two cells are observed or the series is constant.
    pub fn fit(data: &TimeSeriesDataset) -> Self {
        let n = data.n();
        let mut means = alloc::vec![0.0; n];
        let mut scales = alloc::vec![1.0; n];
        for i in 0..n {
            let obs: Vec<f64> = (0..data.periods()).filter_map(|t| data.get(i, t)).collect();
            if obs.is_empty() {
                continue;
            }
            let m = obs.iter().sum::<f64>() / obs.len() as f64;
            means[i] = m;
            if obs.len() > 1 {
                let var = obs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (obs.len() - 1) as f64;
                let sd = math::sqrt(var);
                if sd > 0.0 && sd.is_finite() {
                    scales[i] = sd;
                }
            }
        }
        Self { means, scales }
    }

    pub fn apply(&self, data: &TimeSeriesDataset) -> TimeSeriesDataset {
        data.map_observed(|i, v| (v - self.means[i]) / self.scales[i])
    }

    pub fn invert(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(z.len(), |i, _| self.means[i] + self.scales[i] * z[i])
    }
}

/// Estimated VAR. `psi` (`n x np`, lag-major columns) and `sigma` are in
/// standardised units; see [`VarParameters::psi_original`].
#[derive(Debug, Clone, PartialEq)]
pub struct VarParameters {
    pub psi: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub hyper: Hyperparameters,
    pub mu0: DVector<f64>,
    pub omega0: DMatrix<f64>,
    pub standardization: Standardization,
}

impl VarParameters {
    pub fn n(&self) -> usize {
        self.psi.nrows()
    }

    pub fn state_space(&self, epsilon: f64) -> Result<StateSpaceParams> {
        build_state_space(&self.psi, &self.sigma, self.mu0.clone(), self.omega0.clone(), epsilon)
    }

    /// Coefficients for the centred series in original units.
    pub fn psi_original(&self) -> DMatrix<f64> {
        let n = self.n();
        let s = &self.standardization.scales;
        DMatrix::from_fn(n, self.psi.ncols(), |i, j| self.psi[(i, j)] * s[i] / s[j % n])
    }

    pub fn sigma_original(&self) -> DMatrix<f64> {
        let s = &self.standardization.scales;
        DMatrix::from_fn(self.n(), self.n(), |i, j| self.sigma[(i, j)] * s[i] * s[j])
    }
}

/// Smoothed sufficient statistics for one CM step.
#[derive(Debug, Clone, PartialEq)]
pub struct EStepStats {
    pub d_hat: DMatrix<f64>,
    pub e_hat: DMatrix<f64>,
    pub f_hat: DMatrix<f64>,
    pub g_hat: DMatrix<f64>,
}

/// `Gamma` as the vector of its diagonal: `lambda * beta^(j / n)` for the
/// 0-based coefficient index `j`.
pub fn penalty_weights(hyper: &Hyperparameters, n: usize) -> Vec<f64> {
    (0..n * hyper.p).map(|j| hyper.lambda * math::powi(hyper.beta, (j / n) as i32)).collect()
}

pub fn penalty_matrix(hyper: &Hyperparameters, n: usize) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(penalty_weights(hyper, n)))
}

/// Elementwise `sqrt(1 / (|psi| + eps))`.
pub fn phi_dot(psi: &DMatrix<f64>, epsilon: f64) -> DMatrix<f64> {
    psi.map(|v| math::sqrt(1.0 / (v.abs() + epsilon)))
}

/// Elementwise `1 / (|psi| + eps)`, the square of [`phi_dot`].
pub fn phi(psi: &DMatrix<f64>, epsilon: f64) -> DMatrix<f64> {
    psi.map(|v| 1.0 / (v.abs() + epsilon))
}

pub fn soft_threshold(z: f64, zeta: f64) -> f64 {
    if z > zeta {
        z - zeta
    } else if z < -zeta {
        z + zeta
    } else {
        0.0
    }
}

/// Exact elastic-net penalty `g` summed over all equations.
pub fn elastic_net_penalty(psi: &DMatrix<f64>, hyper: &Hyperparameters) -> f64 {
    let w = penalty_weights(hyper, psi.nrows());
    let mut total = 0.0;
    for i in 0..psi.nrows() {
        for (j, wj) in w.iter().enumerate() {
            let v = psi[(i, j)];
            total += wj * (0.5 * (1.0 - hyper.alpha) * v * v + hyper.alpha * v.abs());
        }
    }
    total
}

pub fn estep_statistics(sm: &SmootherOutput, n: usize, p: usize) -> Result<EStepStats> {
    let m = n * p;
    let t_len = sm.periods();
    if sm.x_smooth.len() != t_len + 1 || sm.p_smooth.len() != t_len + 1 {
        return Err(Error::dim("smoother output lengths are inconsistent"));
    }
    if sm.x_smooth.iter().any(|x| x.len() != m) || sm.p_smooth.iter().any(|p| p.shape() != (m, m)) {
        return Err(Error::dim(format!("smoother state dimension differs from n*p = {m}")));
    }
    let x0 = &sm.x_smooth[0];
    let d_hat = x0 * x0.transpose() + &sm.p_smooth[0];
    let mut e_hat = DMatrix::zeros(n, n);
    let mut f_hat = DMatrix::zeros(n, m);
    let mut g_hat = DMatrix::zeros(m, m);
    for t in 1..=t_len {
        let xt = &sm.x_smooth[t];
        let xp = &sm.x_smooth[t - 1];
        let head = xt.rows(0, n);
        e_hat += head * head.transpose() + sm.p_smooth[t].view((0, 0), (n, n));
        f_hat += head * xp.transpose() + sm.p_lag[t - 1].rows(0, n);
        g_hat += xp * xp.transpose() + &sm.p_smooth[t - 1];
    }
    symmetrize(&mut e_hat);
    symmetrize(&mut g_hat);
    Ok(EStepStats { d_hat, e_hat, f_hat, g_hat })
}

/// Output of one conditional-maximisation step.
#[derive(Debug, Clone, PartialEq)]
pub struct CmUpdate {
    pub mu0: DVector<f64>,
    pub omega0: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

/// Closed-form CM step. `psi_k` is the current coefficient iterate, which
/// sets the local quadratic approximation of the LASSO term. `periods` is
/// the sample length `T`.
pub fn cm_step(
    stats: &EStepStats,
    hyper: &Hyperparameters,
    psi_k: &DMatrix<f64>,
    sm: &SmootherOutput,
    periods: usize,
    epsilon: f64,
) -> Result<CmUpdate> {
    let n = stats.e_hat.nrows();
    let m = stats.g_hat.nrows();
    if psi_k.shape() != (n, m) || m != n * hyper.p || periods == 0 {
        return Err(Error::dim("CM-step inputs do not match n, p"));
    }
    let gamma = penalty_weights(hyper, n);
    let phi_k = phi(psi_k, epsilon);
    let phi_dot_k = phi_dot(psi_k, epsilon);

    let mut psi = DMatrix::zeros(n, m);
    for i in 0..n {
        let mut a = stats.g_hat.clone();
        for r in 0..m {
            a[(r, r)] += gamma[r] * ((1.0 - hyper.alpha) + hyper.alpha * phi_k[(i, r)]);
        }
        let rhs = stats.f_hat.row(i).transpose();
        let row = match Cholesky::new(a.clone()) {
            Some(ch) => ch.solve(&rhs),
            None if hyper.lambda == 0.0 => {
                return Err(Error::numerical(
                    "singular second-moment matrix in the unpenalised coefficient update; use lambda > 0",
                ))
            }
            None => spd_solve(&a, &rhs)?,
        };
        psi.set_row(i, &row.transpose());
    }

    let t = periods as f64;
    let gdiag = DMatrix::from_diagonal(&DVector::from_vec(gamma));
    let fp = &stats.f_hat * psi.transpose();
    let mut sigma = (&stats.e_hat - &fp - fp.transpose() + &psi * &stats.g_hat * psi.transpose()) / t;
    if hyper.lambda > 0.0 {
        let pd = psi.component_mul(&phi_dot_k);
        sigma += (&psi * &gdiag * psi.transpose()) * ((1.0 - hyper.alpha) / t);
        sigma += (&pd * &gdiag * pd.transpose()) * (hyper.alpha / t);
    }
    symmetrize(&mut sigma);

    let mut omega0 = sm.p_smooth[0].clone();
    for d in 0..m {
        omega0[(d, d)] += OMEGA0_JITTER;
    }
    symmetrize(&mut omega0);
    if !all_finite(&psi) || !all_finite(&sigma) {
        return Err(Error::numerical("non-finite CM-step update"));
    }
    Ok(CmUpdate { mu0: sm.x_smooth[0].clone(), omega0, psi, sigma })
}

/// Coordinate-descent fit of the initialiser.
#[derive(Debug, Clone, PartialEq)]
pub struct CdFit {
    pub psi: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    /// Largest number of sweeps used by any equation.
    pub sweeps: usize,
    /// False when some equation hit `cd_max_iter`.
    pub converged: bool,
}

/// Lagged design for a complete panel: targets `y_t` for `t = p..T-1`
/// (0-based) and regressors `(y_{t-1}', ..., y_{t-p}')'`.
pub fn lagged_design(data: &DMatrix<f64>, p: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = data.nrows();
    let rows = data.ncols() - p;
    let y = DMatrix::from_fn(rows, n, |r, i| data[(i, r + p)]);
    let x = DMatrix::from_fn(rows, n * p, |r, j| data[(j % n, r + p - 1 - j / n)]);
    (y, x)
}

/// Elastic-net VAR fitted equation by equation on a complete panel (missing
/// cells must already be imputed; the mask is ignored).
pub fn coordinate_descent_elastic_net(
    imputed: &TimeSeriesDataset,
    hyper: &Hyperparameters,
    config: &EcmConfig,
) -> Result<CdFit> {
    hyper.validate()?;
    let n = imputed.n();
    let p = hyper.p;
    let t_len = imputed.periods();
    if t_len <= p {
        return Err(Error::domain(format!("need T > p, got T = {t_len}, p = {p}")));
    }
    let rows = (t_len - p) as f64;
    let (y, x) = lagged_design(imputed.values(), p);
    let gram = (x.transpose() * &x) / rows;
    let xty = (x.transpose() * &y) / rows;
    let w = penalty_weights(hyper, n);
    let m = n * p;

    let mut psi = DMatrix::zeros(n, m);
    let mut sweeps = 0;
    let mut converged = true;
    for i in 0..n {
        let mut b = DVector::<f64>::zeros(m);
        let mut done = false;
        for sweep in 1..=config.cd_max_iter {
            let mut delta: f64 = 0.0;
            for r in 0..m {
                let denom = gram[(r, r)] + (1.0 - hyper.alpha) * w[r];
                let partial = xty[(r, i)] - gram.row(r).dot(&b.transpose()) + gram[(r, r)] * b[r];
                let new = if denom > 0.0 { soft_threshold(partial, hyper.alpha * w[r]) / denom } else { 0.0 };
                delta = delta.max((new - b[r]).abs());
                b[r] = new;
            }
            sweeps = sweeps.max(sweep);
            if delta <= config.cd_tol {
                done = true;
                break;
            }
        }
        converged &= done;
        psi.set_row(i, &b.transpose());
    }
    let resid = &y - &x * psi.transpose();
    let mut sigma = (resid.transpose() * &resid) / rows;
    symmetrize(&mut sigma);
    Ok(CdFit { psi, sigma, sweeps, converged })
}

/// Observed-data log-likelihood minus the exact elastic-net penalty.
pub fn penalized_loglik(data: &TimeSeriesDataset, params: &StateSpaceParams, hyper: &Hyperparameters) -> Result<f64> {
    let f = kalman_filter(data, params)?;
    Ok(f.loglik - elastic_net_penalty(&params.psi(), hyper))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcmDiagnostics {
    pub iterations: usize,
    /// Monitor value for every parameter set the smoother was run with.
    pub monitor: Vec<f64>,
    pub converged: bool,
    /// Smallest eigenvalue of each innovation covariance iterate before any
    /// flooring, starting with the initialiser.
    pub sigma_min_eig: Vec<f64>,
    pub init_converged: bool,
    /// Observed-data log-likelihood of the returned parameters.
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcmFit {
    pub params: VarParameters,
    pub diagnostics: EcmDiagnostics,
}

fn floor_sigma(sigma: &mut DMatrix<f64>) {
    let n = sigma.nrows();
    let scale = (sigma.trace() / n as f64).abs().max(1.0);
    let min = min_eigenvalue(sigma);
    let floor = SIGMA_FLOOR * scale;
    if min.is_nan() || min <= floor {
        let shift = floor - if min.is_finite() { min } else { 0.0 };
        for d in 0..n {
            sigma[(d, d)] += shift;
        }
    }
}

/// Default prior for the presample state: zero mean and the stationary
/// covariance when the system is stable, `10 I` otherwise.
pub fn default_initial_state(psi: &DMatrix<f64>, sigma: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let m = psi.ncols();
    let n = psi.nrows();
    let c = crate::linalg::companion(psi);
    let mut q = DMatrix::zeros(m, m);
    q.view_mut((0, 0), (n, n)).copy_from(sigma);
    let omega = if spectral_radius(&c) < 1.0 { discrete_lyapunov(&c, &q) } else { None };
    let omega = omega.filter(|o| Cholesky::new(o.clone() + DMatrix::identity(m, m) * OMEGA0_JITTER).is_some());
    (DVector::zeros(m), omega.unwrap_or_else(|| DMatrix::identity(m, m) * 10.0))
}

/// Estimates the penalised VAR by ECM, initialised by coordinate descent on
/// the mean-imputed standardised data.
pub fn ecm_estimate(data: &TimeSeriesDataset, hyper: &Hyperparameters, config: &EcmConfig) -> Result<EcmFit> {
    ecm_estimate_from(data, hyper, config, None)
}

/// As [`ecm_estimate`], optionally starting from an earlier fit (same `n`
/// and `p`) instead of the coordinate-descent initialiser.
pub fn ecm_estimate_from(
    data: &TimeSeriesDataset,
    hyper: &Hyperparameters,
    config: &EcmConfig,
    warm: Option<&VarParameters>,
) -> Result<EcmFit> {
    hyper.validate()?;
    config.validate()?;
    let n = data.n();
    let p = hyper.p;
    let t_len = data.periods();
    if t_len <= p {
        return Err(Error::domain(format!("need T > p, got T = {t_len}, p = {p}")));
    }
    if data.observed_count() == 0 {
        return Err(Error::domain("estimation window has no observations"));
    }
    let standardization = Standardization::fit(data);
    let z = standardization.apply(data);

    let mut min_eigs = Vec::new();
    let (mut psi, mut sigma, mut mu0, mut omega0, init_converged) = match warm {
        Some(w) if w.psi.shape() == (n, n * p) => {
            // carry the coefficients over in the new window's units; the
            // presample prior is rebuilt because a collapsed Omega0 would pin
            // mu0 to the previous window's scale
            let s_old = &w.standardization.scales;
            let s_new = &standardization.scales;
            let psi = DMatrix::from_fn(n, n * p, |i, j| {
                w.psi[(i, j)] * (s_old[i] / s_old[j % n]) * (s_new[j % n] / s_new[i])
            });
            let sigma = DMatrix::from_fn(n, n, |i, j| w.sigma[(i, j)] * (s_old[i] * s_old[j]) / (s_new[i] * s_new[j]));
            let (mu0, omega0) = default_initial_state(&psi, &sigma);
            (psi, sigma, mu0, omega0, true)
        }
        _ => {
            let cd = coordinate_descent_elastic_net(&z, hyper, config)?;
            let mut sigma = cd.sigma;
            min_eigs.push(min_eigenvalue(&sigma));
            floor_sigma(&mut sigma);
            let (mu0, omega0) = default_initial_state(&cd.psi, &sigma);
            (cd.psi, sigma, mu0, omega0, cd.converged)
        }
    };
    if warm.is_some() && min_eigs.is_empty() {
        min_eigs.push(min_eigenvalue(&sigma));
        floor_sigma(&mut sigma);
    }

    let mut monitor: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut loglik = f64::NAN;
    let mut iterations = 0;
    for k in 1..=config.max_iter {
        iterations = k;
        let wrap = |e: Error| Error::Ecm { iteration: k, source: alloc::boxed::Box::new(e) };
        let ss = build_state_space(&psi, &sigma, mu0.clone(), omega0.clone(), config.epsilon).map_err(wrap)?;
        let sm = kalman_smoother(&z, &ss).map_err(wrap)?;
        let value = sm.loglik - elastic_net_penalty(&psi, hyper);
        loglik = sm.loglik;
        if let Some(&prev) = monitor.last() {
            let rel = (value - prev).abs() / (prev.abs() + config.epsilon);
            monitor.push(value);
            if rel < config.rel_tol {
                converged = true;
                break;
            }
        } else {
            monitor.push(value);
        }
        if k == config.max_iter {
            break;
        }
        let stats = estep_statistics(&sm, n, p).map_err(wrap)?;
        let upd = cm_step(&stats, hyper, &psi, &sm, t_len, config.epsilon).map_err(wrap)?;
        min_eigs.push(min_eigenvalue(&upd.sigma));
        psi = upd.psi;
        sigma = upd.sigma;
        floor_sigma(&mut sigma);
        mu0 = upd.mu0;
        omega0 = upd.omega0;
    }
    Ok(EcmFit {
        params: VarParameters { psi, sigma, hyper: *hyper, mu0, omega0, standardization },
        diagnostics: EcmDiagnostics { iterations, monitor, converged, sigma_min_eig: min_eigs, init_converged, loglik },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hp(p: usize, lambda: f64, alpha: f64, beta: f64) -> Hyperparameters {
        Hyperparameters::new(p, lambda, alpha, beta).unwrap()
    }

    fn random_panel(n: usize, t: usize, seed: u64) -> TimeSeriesDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = DMatrix::zeros(n, t);
        for c in 1..t {
            for i in 0..n {
                v[(i, c)] = 0.5 * v[(i, c - 1)] + 0.1 * v[((i + 1) % n, c - 1)] + rng.random_range(-1.0..1.0);
            }
        }
        TimeSeriesDataset::complete(v).unwrap()
    }

    #[test]
    fn penalty_matrix_examples() {
        let d = penalty_matrix(&hp(2, 1.0, 0.5, 2.0), 2);
        assert_eq!(d, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 2.0, 2.0])));
        assert_eq!(penalty_matrix(&hp(2, 0.0, 0.5, 2.0), 2), DMatrix::zeros(4, 4));
        let d = penalty_matrix(&hp(3, 2.0, 0.5, 3.0), 1);
        assert_eq!(d, DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 6.0, 18.0])));
    }

    #[test]
    fn phi_dot_examples() {
        let m = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let d = phi_dot(&m, 1e-8);
        assert_relative_eq!(d[(0, 0)], 1e4, max_relative = 1e-12);
        assert!((d[(0, 1)] - 1.0).abs() < 1e-8);
        assert_eq!(phi_dot(&DMatrix::from_element(1, 1, -3.0), 1.0)[(0, 0)], 0.5);
        let sq = d.component_mul(&d);
        assert_relative_eq!(sq, phi(&m, 1e-8), max_relative = 1e-12);
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
        assert_eq!(soft_threshold(-0.3, 0.5), 0.0);
        assert_eq!(soft_threshold(0.0, 1.0), 0.0);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
    }

    fn dummy_smoother(m: usize) -> SmootherOutput {
        SmootherOutput {
            x_smooth: vec![DVector::zeros(m)],
            p_smooth: vec![DMatrix::identity(m, m)],
            p_lag: vec![],
            loglik: 0.0,
        }
    }

    #[test]
    fn cm_step_scalar() {
        let stats = EStepStats {
            d_hat: DMatrix::from_element(1, 1, 1.0),
            e_hat: DMatrix::from_element(1, 1, 3.0),
            f_hat: DMatrix::from_element(1, 1, 1.0),
            g_hat: DMatrix::from_element(1, 1, 2.0),
        };
        let u = cm_step(&stats, &hp(1, 1.0, 0.0, 1.0), &DMatrix::zeros(1, 1), &dummy_smoother(1), 4, 1e-8).unwrap();
        assert_relative_eq!(u.psi[(0, 0)], 1.0 / 3.0, epsilon = 1e-15);
        // (3 - 2/3 + 2/9) / 4 + (1/9) / 4
        assert_relative_eq!(u.sigma[(0, 0)], (3.0 - 2.0 / 3.0 + 2.0 / 9.0 + 1.0 / 9.0) / 4.0, epsilon = 1e-14);
        assert_relative_eq!(u.omega0[(0, 0)], 1.0 + OMEGA0_JITTER, epsilon = 1e-15);
    }

    #[test]
    fn cm_step_unpenalised_is_normal_equations() {
        let g = DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 2.0]);
        let f = DMatrix::from_row_slice(2, 2, &[1.0, -0.4, 0.2, 0.7]);
        let stats = EStepStats {
            d_hat: DMatrix::identity(2, 2),
            e_hat: DMatrix::identity(2, 2) * 5.0,
            f_hat: f.clone(),
            g_hat: g.clone(),
        };
        let u = cm_step(&stats, &hp(1, 0.0, 0.3, 1.0), &DMatrix::zeros(2, 2), &dummy_smoother(2), 10, 1e-8).unwrap();
        assert_relative_eq!(u.psi, &f * g.try_inverse().unwrap(), epsilon = 1e-12);
        let singular = EStepStats { g_hat: DMatrix::zeros(2, 2), ..stats };
        let err = cm_step(&singular, &hp(1, 0.0, 0.3, 1.0), &DMatrix::zeros(2, 2), &dummy_smoother(2), 10, 1e-8);
        assert!(matches!(err, Err(Error::Numerical(msg)) if msg.contains("lambda > 0")));
    }

    #[test]
    fn estep_without_covariances() {
        let xs: Vec<DVector<f64>> = (0..4).map(|t| DVector::from_vec(vec![t as f64, 1.0 - t as f64])).collect();
        let sm = SmootherOutput {
            x_smooth: xs.clone(),
            p_smooth: vec![DMatrix::zeros(2, 2); 4],
            p_lag: vec![DMatrix::zeros(2, 2); 3],
            loglik: 0.0,
        };
        let s = estep_statistics(&sm, 1, 2).unwrap();
        let e: f64 = (1..4).map(|t| xs[t][0] * xs[t][0]).sum();
        assert_eq!(s.e_hat[(0, 0)], e);
        let g: DMatrix<f64> = (0..3).map(|t| &xs[t] * xs[t].transpose()).fold(DMatrix::zeros(2, 2), |a, b| a + b);
        assert_eq!(s.g_hat, g);
        assert_eq!(s.d_hat, &xs[0] * xs[0].transpose());
        assert!(estep_statistics(&sm, 2, 2).is_err());
    }

    fn ols(y: &DMatrix<f64>, x: &DMatrix<f64>, ridge: &[f64]) -> DMatrix<f64> {
        let rows = x.nrows() as f64;
        let mut a = x.transpose() * x / rows;
        for (r, w) in ridge.iter().enumerate() {
            a[(r, r)] += w;
        }
        (a.try_inverse().unwrap() * (x.transpose() * y / rows)).transpose()
    }

    #[test]
    fn coordinate_descent_oracles() {
        let cfg = EcmConfig::default();
        for seed in 0..5 {
            let data = random_panel(2, 40, seed);
            let (y, x) = lagged_design(data.values(), 2);
            let fit = coordinate_descent_elastic_net(&data, &hp(2, 0.0, 0.7, 2.0), &cfg).unwrap();
            assert!(fit.converged);
            assert!((fit.psi - ols(&y, &x, &[0.0; 4])).amax() < 1e-6);
            let h = hp(2, 0.3, 0.0, 2.0);
            let fit = coordinate_descent_elastic_net(&data, &h, &cfg).unwrap();
            assert!((fit.psi - ols(&y, &x, &penalty_weights(&h, 2))).amax() < 1e-6);
            let fit = coordinate_descent_elastic_net(&data, &hp(2, 1e6, 1.0, 1.0), &cfg).unwrap();
            assert_eq!(fit.psi.amax(), 0.0);
        }
    }

    #[test]
    fn monitor_without_penalty_is_loglik() {
        let data = random_panel(2, 15, 3);
        let psi = DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.0, 0.3]);
        let ss = build_state_space(&psi, &DMatrix::identity(2, 2), DVector::zeros(2), DMatrix::identity(2, 2), 1e-8)
            .unwrap();
        let f = kalman_filter(&data, &ss).unwrap().loglik;
        assert_eq!(penalized_loglik(&data, &ss, &hp(1, 0.0, 0.5, 1.0)).unwrap(), f);
        let pen = 2.0 * (0.25 * (0.16 + 0.01 + 0.09) + 0.5 * 0.8);
        assert_relative_eq!(penalized_loglik(&data, &ss, &hp(1, 2.0, 0.5, 1.0)).unwrap(), f - pen, epsilon = 1e-9);
        let ss0 = build_state_space(
            &DMatrix::zeros(2, 2),
            &DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::identity(2, 2),
            1e-8,
        )
        .unwrap();
        let f0 = kalman_filter(&data, &ss0).unwrap().loglik;
        assert_eq!(penalized_loglik(&data, &ss0, &hp(1, 3.0, 0.5, 2.0)).unwrap(), f0);
    }

    #[test]
    fn penalised_fit_has_pd_sigma() {
        let data = random_panel(3, 30, 11);
        let fit = ecm_estimate(&data, &hp(2, 0.5, 0.5, 2.0), &EcmConfig::default()).unwrap();
        assert!(fit.diagnostics.sigma_min_eig.iter().all(|&v| v > 0.0));
        assert!(min_eigenvalue(&fit.params.sigma) > 0.0);
        assert!(fit.diagnostics.iterations >= 1);
    }

    #[test]
    fn masked_cells_do_not_leak() {
        let base = random_panel(2, 25, 5);
        let mut mask = base.mask().clone();
        mask[(0, 4)] = false;
        mask[(1, 10)] = false;
        let a = TimeSeriesDataset::new(base.values().clone(), mask.clone()).unwrap();
        let mut v = base.values().clone();
        v[(0, 4)] = 1e9;
        v[(1, 10)] = -7.0;
        let b = TimeSeriesDataset::new(v, mask).unwrap();
        let h = hp(1, 0.2, 0.5, 1.0);
        let fa = ecm_estimate(&a, &h, &EcmConfig::default()).unwrap();
        let fb = ecm_estimate(&b, &h, &EcmConfig::default()).unwrap();
        assert_eq!(fa, fb);
    }

    #[test]
    fn rejects_short_windows() {
        let data = random_panel(2, 3, 1);
        assert!(ecm_estimate(&data, &hp(3, 0.1, 0.5, 1.0), &EcmConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn phi_commutes_with_diagonal_penalty(
            vals in proptest::collection::vec(-3.0f64..3.0, 6),
            lambda in 0.0f64..5.0,
            beta in 1.0f64..5.0,
        ) {
            let psi = DMatrix::from_row_slice(2, 3, &vals);
            let h = Hyperparameters::new(3, lambda, 0.5, beta).unwrap();
            let gamma = penalty_matrix(&h, 1);
            let ph = phi(&psi, 1e-8);
            let lhs = (&psi * &gamma).component_mul(&ph);
            let rhs = psi.component_mul(&ph) * &gamma;
            let scale = lhs.amax().max(1.0);
            prop_assert!((lhs - rhs).amax() <= 1e-12 * scale);
        }
    }
}
