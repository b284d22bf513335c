//! Synthetic stable VAR panels and missing-cell injection.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ecm::{Standardization, VarParameters};
use crate::error::{Error, Result};
use crate::linalg::{companion, discrete_lyapunov, spectral_radius};
use crate::math;
use crate::model::{Hyperparameters, TimeSeriesDataset};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub t: usize,
    /// Target companion spectral radius, in `(0, 1)`.
    pub spectral_radius: f64,
    /// Probability that a coefficient is set to zero.
    pub sparsity: f64,
    pub sigma_scale: f64,
    pub burn_in: usize,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(n: usize, p: usize, t: usize, seed: u64) -> Self {
        Self { n, p, t, spectral_radius: 0.8, sparsity: 0.0, sigma_scale: 1.0, burn_in: 100, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.t == 0 {
            return Err(Error::domain("n, p and T must be >= 1"));
        }
        if !(self.spectral_radius > 0.0 && self.spectral_radius < 1.0) {
            return Err(Error::domain("spectral radius must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(Error::domain("sparsity must lie in [0, 1]"));
        }
        if !(self.sigma_scale > 0.0 && self.sigma_scale.is_finite()) {
            return Err(Error::domain("sigma_scale must be positive"));
        }
        Ok(())
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws a stable VAR and simulates it. Returns the panel and the true
/// parameters (original units, zero mean, stationary initial covariance).
///
/// Sparsity is applied first; lag block `l` is then scaled by `c^l`, which
/// scales every companion eigenvalue by `c`, so the target radius is hit
/// exactly. If every coefficient is zeroed the process is white noise.
pub fn simulate_var(spec: &SimSpec) -> Result<(TimeSeriesDataset, VarParameters)> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let m = n * p;
    let mut rng = rng::stream(spec.seed, Stream::Synthetic);

    let mut psi = DMatrix::from_fn(n, m, |_, _| normal(&mut rng));
    for v in psi.iter_mut() {
        if rng.random::<f64>() < spec.sparsity {
            *v = 0.0;
        }
    }
    let rho = spectral_radius(&companion(&psi));
    if rho > 0.0 {
        let c = spec.spectral_radius / rho;
        for j in 0..m {
            let lag = (j / n + 1) as i32;
            let f = math::powi(c, lag);
            for i in 0..n {
                psi[(i, j)] *= f;
            }
        }
    }

    let l = DMatrix::from_fn(n, n, |_, _| normal(&mut rng));
    let sigma = (&l * l.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5) * spec.sigma_scale;
    let c = companion(&psi);
    let mut q = DMatrix::zeros(m, m);
    q.view_mut((0, 0), (n, n)).copy_from(&sigma);
    let omega = discrete_lyapunov(&c, &q).ok_or_else(|| Error::numerical("simulated VAR is not stable"))?;

    let truth = VarParameters {
        psi,
        sigma,
        hyper: Hyperparameters::new(p, 0.0, 0.0, 1.0)?,
        mu0: DVector::zeros(m),
        omega0: omega,
        standardization: Standardization::identity(n),
    };
    let values = run_path(&truth, spec.t, spec.burn_in, &mut rng)?;
    Ok((values, truth))
}

/// Simulates a fresh path of length `t` from known zero-mean parameters
/// (`omega0` must be the stationary state covariance), e.g. the truth
/// returned by [`simulate_var`]. Shocks come from the synthetic stream of
/// `seed`.
pub fn simulate_path(truth: &VarParameters, t: usize, burn_in: usize, seed: u64) -> Result<TimeSeriesDataset> {
    if t == 0 {
        return Err(Error::domain("T must be >= 1"));
    }
    let mut rng = rng::stream(seed, Stream::Synthetic);
    run_path(truth, t, burn_in, &mut rng)
}

fn run_path<R: Rng>(truth: &VarParameters, t: usize, burn_in: usize, rng: &mut R) -> Result<TimeSeriesDataset> {
    let (psi, sigma, omega) = (&truth.psi, &truth.sigma, &truth.omega0);
    let n = psi.nrows();
    let m = psi.ncols();
    if sigma.shape() != (n, n) || omega.shape() != (m, m) {
        return Err(Error::dim("parameter shapes do not match"));
    }
    let chol_sigma = Cholesky::new(sigma.clone()).ok_or_else(|| Error::numerical("simulated sigma is not SPD"))?.l();
    // stationary covariance is only PSD when p > 1 in degenerate cases; jitter
    let mut jittered = omega.clone();
    for d in 0..m {
        jittered[(d, d)] += 1e-12 * omega[(d, d)].abs().max(1.0);
    }
    let chol_omega = Cholesky::new(jittered).ok_or_else(|| Error::numerical("stationary covariance is not PSD"))?.l();

    let mut x = &chol_omega * DVector::from_fn(m, |_, _| normal(rng));
    let mut values = DMatrix::zeros(n, t);
    for step in 0..burn_in + t {
        let shock = &chol_sigma * DVector::from_fn(n, |_, _| normal(rng));
        let head = psi * &x + shock;
        let mut next = DVector::zeros(m);
        next.rows_mut(0, n).copy_from(&head);
        if m > n {
            next.rows_mut(n, m - n).copy_from(&x.rows(0, m - n));
        }
        x = next;
        if step >= burn_in {
            values.set_column(step - burn_in, &x.rows(0, n));
        }
    }
    TimeSeriesDataset::complete(values)
}

/// Masks `round(fraction * n * T)` cells in runs of up to `block_len`
/// consecutive periods, never touching the first `keep_leading` periods.
/// Only observed cells count towards the target.
pub fn inject_missing(
    data: &TimeSeriesDataset,
    fraction: f64,
    seed: u64,
    block_len: usize,
    keep_leading: usize,
) -> Result<TimeSeriesDataset> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::domain("fraction must lie in [0, 1)"));
    }
    if block_len == 0 {
        return Err(Error::domain("block_len must be >= 1"));
    }
    let (n, t) = (data.n(), data.periods());
    let target = math::round(fraction * (n * t) as f64) as usize;
    if target == 0 {
        return Ok(data.clone());
    }
    let eligible: usize = (keep_leading.min(t)..t).map(|c| (0..n).filter(|&i| data.is_observed(i, c)).count()).sum();
    if keep_leading >= t || target > eligible {
        return Err(Error::domain(format!(
            "cannot mask {target} cells: only {eligible} observed cells after the first {keep_leading} periods"
        )));
    }
    let mut rng = rng::stream(seed, Stream::Missing);
    let mut mask = data.mask().clone();
    let mut masked = 0usize;
    while masked < target {
        let i = rng.random_range(0..n);
        let start = rng.random_range(keep_leading..t);
        for c in start..(start + block_len).min(t) {
            if masked == target {
                break;
            }
            if mask[(i, c)] {
                mask[(i, c)] = false;
                masked += 1;
            }
        }
    }
    let values: Vec<f64> = data.values().iter().copied().collect();
    TimeSeriesDataset::new(DMatrix::from_vec(n, t, values), mask)?.with_names(data.names().to_vec())
}
