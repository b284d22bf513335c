mod common;

use ajk_core::linalg::{discrete_lyapunov, min_eigenvalue};
use ajk_core::state_space::*;
use ajk_core::TimeSeriesDataset;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Instance {
    data: TimeSeriesDataset,
    params: StateSpaceParams,
}

fn instance(seed: u64, eps: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3);
    let p = rng.random_range(1..=2);
    let t = rng.random_range(3..=8);
    let mut psi = DMatrix::from_fn(n, n * p, |_, _| 0.4 * rng.sample::<f64, _>(StandardNormal));
    // keep the system stable
    loop {
        let r = ajk_core::linalg::spectral_radius(&ajk_core::linalg::companion(&psi));
        if r < 0.95 {
            break;
        }
        psi *= 0.8;
    }
    let l = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let sigma = &l * l.transpose() * 0.3 + DMatrix::identity(n, n) * 0.2;
    let m = n * p;
    let mu0 = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let omega0 = &a * a.transpose() * 0.5 + DMatrix::identity(m, m) * 0.1;
    let values = DMatrix::from_fn(n, t, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
    let mut mask = DMatrix::from_fn(n, t, |_, _| rng.random::<f64>() > 0.3);
    // leave one period fully missing now and then
    if rng.random::<bool>() {
        let c = rng.random_range(0..t);
        mask.column_mut(c).fill(false);
    }
    mask[(0, t - 1)] = true;
    let data = TimeSeriesDataset::new(values, mask).unwrap();
    let params = build_state_space(&psi, &sigma, mu0, omega0, eps).unwrap();
    Instance { data, params }
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.amax()
}

#[test]
fn smoother_matches_dense_conditioning() {
    for seed in 0..50 {
        let Instance { data, params } = instance(seed, 1e-2);
        let got = kalman_smoother(&data, &params).unwrap();
        let want = common::dense_smoother(
            data.values(),
            data.mask(),
            &params.c,
            &params.q,
            &params.mu0,
            &params.omega0,
            params.epsilon,
        );
        for t in 0..=data.periods() {
            let dm = (&got.x_smooth[t] - &want.means[t]).amax();
            let dc = max_abs(&(&got.p_smooth[t] - &want.covs[t]));
            assert!(dm < 1e-8 && dc < 1e-8, "seed {seed} t {t}: {dm} {dc}");
        }
        for t in 0..data.periods() {
            let dl = max_abs(&(&got.p_lag[t] - &want.lag[t]));
            assert!(dl < 1e-8, "seed {seed} lag {t}: {dl}");
        }
        assert!((got.loglik - want.loglik).abs() < 1e-8 * want.loglik.abs().max(1.0), "seed {seed}");
    }
}

#[test]
fn filter_loglik_matches_dense() {
    for seed in 100..120 {
        let Instance { data, params } = instance(seed, 1e-3);
        let f = kalman_filter(&data, &params).unwrap();
        let want = common::dense_smoother(
            data.values(),
            data.mask(),
            &params.c,
            &params.q,
            &params.mu0,
            &params.omega0,
            params.epsilon,
        );
        assert!((f.loglik - want.loglik).abs() < 1e-8 * want.loglik.abs().max(1.0));
    }
}

#[test]
fn nearly_exact_measurement_recovers_observations() {
    for seed in 200..210 {
        let Instance { data, params } = instance(seed, 1e-8);
        let sm = kalman_smoother(&data, &params).unwrap();
        for t in 0..data.periods() {
            for i in 0..data.n() {
                if let Some(v) = data.get(i, t) {
                    assert!((sm.x_smooth[t + 1][i] - v).abs() < 1e-5 * v.abs().max(1.0), "seed {seed}");
                }
            }
        }
    }
}

/// Only the final cell is observed, so every filtered moment before it is
/// the prior pushed through the transition.
fn last_cell_only(data: &TimeSeriesDataset) -> TimeSeriesDataset {
    let mut mask = DMatrix::from_element(data.n(), data.periods(), false);
    mask[(0, data.periods() - 1)] = true;
    TimeSeriesDataset::new(data.values().clone(), mask).unwrap()
}

#[test]
fn unobserved_periods_propagate_prior() {
    let Instance { data, params } = instance(7, 1e-2);
    let sparse = last_cell_only(&data);
    let f = kalman_filter(&sparse, &params).unwrap();
    let mut mean = params.mu0.clone();
    let mut cov = params.omega0.clone();
    for t in 1..=data.periods() {
        mean = &params.c * mean;
        cov = &params.c * cov * params.c.transpose() + &params.q;
        assert!((&f.x_pred[t - 1] - &mean).amax() < 1e-10);
        assert!(max_abs(&(&f.p_pred[t - 1] - &cov)) < 1e-10);
        if t < data.periods() {
            assert!((&f.x_filt[t] - &mean).amax() < 1e-10);
        }
    }
}

#[test]
fn stationary_prior_is_preserved_without_data() {
    let psi = DMatrix::from_row_slice(1, 2, &[0.5, 0.2]);
    let sigma = DMatrix::from_element(1, 1, 1.0);
    let mut q = DMatrix::zeros(2, 2);
    q[(0, 0)] = 1.0;
    let c = ajk_core::linalg::companion(&psi);
    let omega = discrete_lyapunov(&c, &q).unwrap();
    let params = build_state_space(&psi, &sigma, DVector::zeros(2), omega.clone(), 1e-3).unwrap();
    let sparse = last_cell_only(&TimeSeriesDataset::complete(DMatrix::zeros(1, 6)).unwrap());
    let f = kalman_filter(&sparse, &params).unwrap();
    for p in &f.p_pred {
        assert!(max_abs(&(p - &omega)) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smoothed_covariances_are_psd(seed in any::<u64>(), eps in 1e-6f64..1.0) {
        let Instance { data, params } = instance(seed, eps);
        let sm = kalman_smoother(&data, &params).unwrap();
        let f = kalman_filter(&data, &params).unwrap();
        for p in sm.p_smooth.iter().chain(f.p_filt.iter()).chain(f.p_pred.iter()) {
            prop_assert!((p - p.transpose()).amax() < 1e-9 * p.amax().max(1.0));
            prop_assert!(min_eigenvalue(p) > -1e-9 * p.amax().max(1.0));
        }
        // smoothing never increases uncertainty relative to filtering
        for t in 0..=data.periods() {
            prop_assert!(sm.p_smooth[t].trace() <= f.p_filt[t].trace() + 1e-9 * f.p_filt[t].trace().max(1.0));
        }
        prop_assert!((sm.loglik - f.loglik).abs() < 1e-12 * f.loglik.abs().max(1.0));
    }
}
