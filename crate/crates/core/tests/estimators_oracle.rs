mod common;

use ajk_core::ecm::EcmConfig;
use ajk_core::estimators::*;
use ajk_core::exec::Sequential;
use ajk_core::simulation::{inject_missing, simulate_var, SimSpec};
use ajk_core::subsampling::{block_family, draw_artificial_family};
use ajk_core::*;
use nalgebra::DMatrix;

fn hp(p: usize, lambda: f64, alpha: f64, beta: f64) -> Hyperparameters {
    Hyperparameters::new(p, lambda, alpha, beta).unwrap()
}

fn oos(n: usize, t0: usize) -> ErrorSpec {
    ErrorSpec::new(ErrorKind::PseudoOos, t0, WeightVector::equal(n))
}

/// With lambda = 0 the ECM fixed point is least squares conditional on the
/// first observation; the presample covariance collapses only like 1/k, so
/// the comparison runs far past the default tolerance and is relative.
#[test]
fn expanding_window_matches_ols() {
    let (d, _) = simulate_var(&SimSpec { spectral_radius: 0.6, ..SimSpec::new(1, 1, 14, 21) }).unwrap();
    let y: Vec<f64> = (0..14).map(|t| d.get(0, t).unwrap()).collect();
    let cfg = EcmConfig { rel_tol: 1e-14, max_iter: 100_000, ..EcmConfig::default() };
    let got = pseudo_oos_error(&d, &hp(1, 0.0, 0.0, 1.0), &oos(1, 9), &cfg).unwrap();
    let want = common::expanding_ar1_mse(&y, 9);
    assert!(((got - want) / want).abs() < 1e-4, "{got} vs {want}");
}

#[test]
fn duplicated_series_with_half_weights() {
    let (d, _) = simulate_var(&SimSpec::new(1, 1, 20, 3)).unwrap();
    let twice = TimeSeriesDataset::complete(DMatrix::from_fn(2, 20, |_, t| d.get(0, t).unwrap())).unwrap();
    let cfg = EcmConfig::default();
    // identical series make the lambda = 0 moment matrices singular; a ridge
    // penalty treats both copies symmetrically
    let h = hp(1, 0.5, 0.0, 1.0);
    let weights = |w: Vec<f64>| ErrorSpec::new(ErrorKind::PseudoOos, 15, WeightVector::new(w).unwrap());
    let rec = pseudo_oos_detail(&twice, &h, &weights(vec![0.5, 0.5]), &cfg).unwrap();
    for f in &rec.forecasts {
        assert!((f[0] - f[1]).abs() < 1e-8);
    }
    let half = rec.mean_loss();
    let one = pseudo_oos_error(&twice, &h, &weights(vec![1.0, 0.0]), &cfg).unwrap();
    assert!((half - one).abs() < 1e-8 * one.max(1.0));
}

#[test]
fn weight_on_one_series_gives_its_error() {
    let (d, _) = simulate_var(&SimSpec::new(2, 1, 30, 5)).unwrap();
    let cfg = EcmConfig::default();
    let h = hp(1, 0.2, 0.5, 1.0);
    let spec = ErrorSpec::new(ErrorKind::InSample, 0, WeightVector::new(vec![0.0, 1.0]).unwrap());
    let rec = insample_detail(&d, &h, &spec, &cfg).unwrap();
    let manual: f64 =
        rec.forecasts.iter().enumerate().map(|(k, f)| (d.get(1, 1 + k).unwrap() - f[1]).powi(2)).sum::<f64>() / 29.0;
    assert!((rec.mean_loss() - manual).abs() < 1e-12 * manual);
}

#[test]
fn deterministic_data_has_zero_insample_error() {
    // an alternating series is an exact AR(1) with coefficient -1 after centring
    let v = DMatrix::from_fn(1, 30, |_, t| if t % 2 == 0 { 1.0 } else { -1.0 });
    let d = TimeSeriesDataset::complete(v).unwrap();
    let cfg = EcmConfig { rel_tol: 1e-10, ..EcmConfig::default() };
    let spec = ErrorSpec::new(ErrorKind::InSample, 0, WeightVector::equal(1));
    let e = insample_error(&d, &hp(1, 0.0, 0.0, 1.0), &spec, &cfg).unwrap();
    assert!(e < 1e-6, "{e}");
}

#[test]
fn jackknife_is_mean_of_patterns() {
    let (base, _) = simulate_var(&SimSpec::new(2, 1, 16, 8)).unwrap();
    let data = inject_missing(&base, 0.05, 1, 1, 4).unwrap();
    let cfg = EcmConfig::default();
    let h = hp(1, 0.3, 0.5, 2.0);
    let spec = oos(2, 12);
    let fam = draw_artificial_family(2, 16, 3, 6, 17, true).unwrap();
    let out = jackknife_error(&data, &h, &fam, &spec, &cfg, &Sequential).unwrap();
    let per: Vec<f64> =
        fam.iter().map(|p| pseudo_oos_error(&apply_pattern(&data, p).unwrap(), &h, &spec, &cfg).unwrap()).collect();
    assert_eq!(out.failures, 0);
    assert_eq!(out.error, per.iter().sum::<f64>() / per.len() as f64);
    assert!(out.error >= 0.0);

    let blocks = block_family(2, 16, 3).unwrap();
    assert_eq!(blocks.len(), 14);
    let b = jackknife_error(&data, &h, &blocks, &spec, &cfg, &Sequential).unwrap();
    assert!(b.error >= 0.0 && b.error.is_finite());
}

#[test]
fn series_permutation_is_equivariant() {
    let (d, _) = simulate_var(&SimSpec::new(3, 1, 25, 9)).unwrap();
    let perm = [2, 0, 1];
    let dp = d.select_series(&perm).unwrap();
    let w = [0.2, 0.3, 0.5];
    let wp: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
    let cfg = EcmConfig::default();
    for h in [hp(1, 0.0, 0.0, 1.0), hp(1, 0.7, 0.4, 2.0)] {
        let a = pseudo_oos_error(
            &d,
            &h,
            &ErrorSpec::new(ErrorKind::PseudoOos, 20, WeightVector::new(w.to_vec()).unwrap()),
            &cfg,
        )
        .unwrap();
        let b = pseudo_oos_error(
            &dp,
            &h,
            &ErrorSpec::new(ErrorKind::PseudoOos, 20, WeightVector::new(wp.clone()).unwrap()),
            &cfg,
        )
        .unwrap();
        assert!((a - b).abs() < 1e-8 * a, "{a} vs {b}");
    }
}

#[test]
fn masked_values_do_not_change_estimates() {
    let (d, _) = simulate_var(&SimSpec::new(2, 1, 20, 10)).unwrap();
    let m = inject_missing(&d, 0.1, 3, 1, 4).unwrap();
    let mut poisoned = d.values().clone();
    for t in 0..20 {
        for i in 0..2 {
            if !m.is_observed(i, t) {
                poisoned[(i, t)] = 1e12;
            }
        }
    }
    let p = TimeSeriesDataset::new(poisoned, m.mask().clone()).unwrap();
    let cfg = EcmConfig::default();
    let h = hp(1, 0.4, 0.5, 1.0);
    let spec = oos(2, 15);
    assert_eq!(pseudo_oos_error(&m, &h, &spec, &cfg).unwrap(), pseudo_oos_error(&p, &h, &spec, &cfg).unwrap());
}
