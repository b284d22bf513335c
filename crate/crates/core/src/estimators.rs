//! Estimators of the expected one-step forecast loss: in-sample, pseudo
//! out-of-sample and jackknife (block and artificial families).
//!
//! Periods are counted as in the public API: the sample is `1..=T` and
//! `t0` is the last period of the presample. The forecast of period `t + 1`
//! uses parameters estimated on periods `1..=t`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::ecm::{ecm_estimate_from, EcmConfig, VarParameters};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::model::{apply_pattern, loss, Hyperparameters, SubsampleFamily, TimeSeriesDataset, WeightVector};
use crate::state_space::kalman_filter;
use crate::subsampling::FamilySpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorKind {
    InSample,
    PseudoOos,
    Jackknife(FamilySpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSpec {
    pub kind: ErrorKind,
    /// Last presample period; ignored by the in-sample estimator.
    pub t0: usize,
    /// Re-estimate every `stride` forecast origins.
    pub stride: usize,
    pub weights: WeightVector,
    /// Rescale the weights of observed series to the full total (off by default).
    pub rescale: bool,
}

impl ErrorSpec {
    pub fn new(kind: ErrorKind, t0: usize, weights: WeightVector) -> Self {
        Self { kind, t0, stride: 1, weights, rescale: false }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn validate(&self, n: usize, periods: usize, p: usize) -> Result<()> {
        if self.weights.len() != n {
            return Err(Error::dim(format!("{} weights for {} series", self.weights.len(), n)));
        }
        if self.stride == 0 {
            return Err(Error::domain("stride must be >= 1"));
        }
        if self.kind != ErrorKind::InSample {
            // the first estimation window needs at least one regression target
            if self.t0 <= p || self.t0 >= periods {
                return Err(Error::domain(format!(
                    "t0 = {} must satisfy p < t0 <= T - 1 (p = {p}, T = {periods})",
                    self.t0
                )));
            }
        }
        Ok(())
    }
}

/// One-step forecast `B C x_{t|t}` of the period after `prefix`, in original
/// units. The prefix is standardised with the constants stored in `params`.
pub fn one_step_forecast(
    params: &VarParameters,
    prefix: &TimeSeriesDataset,
    config: &EcmConfig,
) -> Result<DVector<f64>> {
    let p = params.hyper.p;
    if prefix.periods() < p {
        return Err(Error::domain(format!("prefix of {} periods is shorter than p = {p}", prefix.periods())));
    }
    if prefix.n() != params.n() {
        return Err(Error::dim("prefix and parameters disagree on n"));
    }
    let ss = params.state_space(config.epsilon)?;
    let z = params.standardization.apply(prefix);
    let f = kalman_filter(&z, &ss)?;
    Ok(params.standardization.invert(&f.next_measurement(&ss)))
}

/// Predictions for columns `from..to` (zero-based) from one filter pass with
/// fixed parameters; each uses only earlier columns.
fn predictions(
    params: &VarParameters,
    data: &TimeSeriesDataset,
    from: usize,
    to: usize,
    config: &EcmConfig,
) -> Result<Vec<DVector<f64>>> {
    let ss = params.state_space(config.epsilon)?;
    let z = params.standardization.apply(&data.prefix(to)?);
    let f = kalman_filter(&z, &ss)?;
    Ok((from..to).map(|c| params.standardization.invert(&f.x_pred[c].rows(0, params.n()).into_owned())).collect())
}

/// Per-period losses and forecasts behind an error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    /// One-based period being forecast.
    pub periods: Vec<usize>,
    pub forecasts: Vec<DVector<f64>>,
    pub losses: Vec<f64>,
}

impl ForecastRecord {
    pub fn mean_loss(&self) -> f64 {
        self.losses.iter().sum::<f64>() / self.losses.len() as f64
    }
}

fn score(data: &TimeSeriesDataset, column: usize, forecast: &DVector<f64>, spec: &ErrorSpec) -> Result<f64> {
    loss(&data.column(column), forecast.as_slice(), &spec.weights, spec.rescale)
}

pub fn insample_detail(
    data: &TimeSeriesDataset,
    hyper: &Hyperparameters,
    spec: &ErrorSpec,
    config: &EcmConfig,
) -> Result<ForecastRecord> {
    spec.validate(data.n(), data.periods(), hyper.p)?;
    let t_len = data.periods();
    let fit = ecm_estimate_from(data, hyper, config, None)?;
    let forecasts = predictions(&fit.params, data, hyper.p, t_len, config)?;
    let mut losses = Vec::with_capacity(forecasts.len());
    for (k, f) in forecasts.iter().enumerate() {
        losses.push(score(data, hyper.p + k, f, spec)?);
    }
    Ok(ForecastRecord { periods: (hyper.p + 1..=t_len).collect(), forecasts, losses })
}

/// Mean loss of the full-sample fit over periods `p+1..=T`.
pub fn insample_error(
    data: &TimeSeriesDataset,
    hyper: &Hyperparameters,
    spec: &ErrorSpec,
    config: &EcmConfig,
) -> Result<f64> {
    Ok(insample_detail(data, hyper, spec, config)?.mean_loss())
}

/// Expanding-window forecasts of periods `t0+1..=T`. Parameters are
/// re-estimated on `1..=t` whenever `(t - t0)` is a multiple of the stride,
/// warm-started from the previous window.
pub fn pseudo_oos_detail(
    data: &TimeSeriesDataset,
    hyper: &Hyperparameters,
    spec: &ErrorSpec,
    config: &EcmConfig,
) -> Result<ForecastRecord> {
    spec.validate(data.n(), data.periods(), hyper.p)?;
    let t_len = data.periods();
    let mut rec = ForecastRecord { periods: Vec::new(), forecasts: Vec::new(), losses: Vec::new() };
    let mut warm: Option<VarParameters> = None;
    let mut t = spec.t0;
    while t < t_len {
        let end = (t + spec.stride).min(t_len);
        let window = data.prefix(t)?;
        let fit = ecm_estimate_from(&window, hyper, config, warm.as_ref())
            .map_err(|e| Error::Window { period: t, source: alloc::boxed::Box::new(e) })?;
        let preds = predictions(&fit.params, data, t, end, config)
            .map_err(|e| Error::Window { period: t, source: alloc::boxed::Box::new(e) })?;
        for (k, f) in preds.into_iter().enumerate() {
            rec.losses.push(score(data, t + k, &f, spec)?);
            rec.periods.push(t + k + 1);
            rec.forecasts.push(f);
        }
        warm = Some(fit.params);
        t = end;
    }
    Ok(rec)
}

pub fn pseudo_oos_error(
    data: &TimeSeriesDataset,
    hyper: &Hyperparameters,
    spec: &ErrorSpec,
    config: &EcmConfig,
) -> Result<f64> {
    Ok(pseudo_oos_detail(data, hyper, spec, config)?.mean_loss())
}

#[derive(Debug, Clone, PartialEq)]
pub struct JackknifeOutcome {
    /// Mean of the successful per-pattern errors.
    pub error: f64,
    /// Per-pattern pseudo out-of-sample errors, in family order.
    pub per_pattern: Vec<Result<f64>>,
    pub failures: usize,
}

/// Jackknife average of pseudo out-of-sample errors over the deleted
/// datasets. Losses are scored against the deleted data, so artificially
/// removed targets do not count. Failed patterns are dropped from the mean.
pub fn jackknife_error<E: Executor>(
    data: &TimeSeriesDataset,
    hyper: &Hyperparameters,
    family: &SubsampleFamily,
    spec: &ErrorSpec,
    config: &EcmConfig,
    exec: &E,
) -> Result<JackknifeOutcome> {
    if family.is_empty() {
        return Err(Error::domain("empty subsample family"));
    }
    spec.validate(data.n(), data.periods(), hyper.p)?;
    let per_pattern = exec.map(family.len(), |j| {
        let deleted = apply_pattern(data, &family[j])?;
        pseudo_oos_error(&deleted, hyper, spec, config)
    });
    let mut sum = 0.0;
    let mut ok = 0usize;
    for v in per_pattern.iter().flatten() {
        sum += v;
        ok += 1;
    }
    if ok == 0 {
        return Err(Error::AllPatternsFailed(family.len()));
    }
    Ok(JackknifeOutcome { error: sum / ok as f64, failures: family.len() - ok, per_pattern })
}

/// Scalar error estimate with the soft-failure count of jackknife patterns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub value: f64,
    pub patterns: usize,
    pub failed_patterns: usize,
}

/// An [`ErrorSpec`] bound to a dataset, with its deletion family built once.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub data: &'a TimeSeriesDataset,
    pub spec: ErrorSpec,
    pub config: EcmConfig,
    family: Option<SubsampleFamily>,
}

impl<'a> Evaluator<'a> {
    pub fn new(data: &'a TimeSeriesDataset, spec: ErrorSpec, config: EcmConfig) -> Result<Self> {
        config.validate()?;
        let family = match spec.kind {
            ErrorKind::Jackknife(fs) => Some(fs.build(data.n(), data.periods())?),
            _ => None,
        };
        Ok(Self { data, spec, config, family })
    }

    pub fn family(&self) -> Option<&SubsampleFamily> {
        self.family.as_ref()
    }

    pub fn evaluate<E: Executor>(&self, hyper: &Hyperparameters, exec: &E) -> Result<ErrorEstimate> {
        match (&self.spec.kind, &self.family) {
            (ErrorKind::InSample, _) => Ok(ErrorEstimate {
                value: insample_error(self.data, hyper, &self.spec, &self.config)?,
                patterns: 0,
                failed_patterns: 0,
            }),
            (ErrorKind::PseudoOos, _) => Ok(ErrorEstimate {
                value: pseudo_oos_error(self.data, hyper, &self.spec, &self.config)?,
                patterns: 0,
                failed_patterns: 0,
            }),
            (ErrorKind::Jackknife(_), Some(family)) => {
                let out = jackknife_error(self.data, hyper, family, &self.spec, &self.config, exec)?;
                Ok(ErrorEstimate { value: out.error, patterns: family.len(), failed_patterns: out.failures })
            }
            (ErrorKind::Jackknife(_), None) => Err(Error::domain("jackknife family was not built")),
        }
    }
}
