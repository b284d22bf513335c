//! The `tune`, `evaluate` and `simulate` commands.

use std::path::{Path, PathBuf};

use ajk_core::combinatorics::optimal_d;
use ajk_core::ecm::EcmConfig;
use ajk_core::estimators::{pseudo_oos_detail, ErrorKind, ErrorSpec};
use ajk_core::exec::Executor;
use ajk_core::rng::{self, Stream, RNG_ALGORITHM};
use ajk_core::search::{grid_search, random_candidates, SearchRegion, SearchResult};
use ajk_core::simulation::{inject_missing, simulate_var, SimSpec};
use ajk_core::subsampling::{FamilyKind, FamilySpec};
use ajk_core::{loss, Hyperparameters, WeightVector};

use crate::config::{DSpec, EstimatorConfig, RunConfig};
use crate::data::{read_csv, write_csv_file, Panel};
use crate::error::{CliError, Result};
use crate::report::*;

const TOOL: &str = "ajk";
const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A configuration resolved against its data.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub panel: Panel,
    pub tuning: Panel,
    pub spec: ErrorSpec,
    pub ecm: EcmConfig,
    pub region: SearchRegion,
    pub d_auto: bool,
    pub family_seed: u64,
    /// Non-fatal findings about the data, e.g. series never observed.
    pub warnings: Vec<String>,
}

fn tuning_periods(cfg: &RunConfig, total: usize) -> Result<usize> {
    let t = match cfg.tune_periods {
        Some(spec) => spec.resolve(total, "tune_periods")?,
        None => total,
    };
    if t == 0 || t > total {
        return Err(CliError::config(format!("tune_periods = {t} outside 1..={total}")));
    }
    Ok(t)
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let panel = read_csv(&cfg.data)?;
    prepare_with(cfg, panel)
}

pub fn prepare_with(cfg: &RunConfig, panel: Panel) -> Result<Prepared> {
    cfg.validate()?;
    let t_tune = tuning_periods(cfg, panel.data.periods())?;
    let tuning = panel.prefix(t_tune)?;
    let n = tuning.data.n();
    let weights = WeightVector::new(cfg.weights.resolve(tuning.data.names())?)?;
    let t0 = cfg.t0.resolve(t_tune, "t0")?;
    let region = cfg.region.to_region();
    let family_seed = rng::derive_seed(cfg.seed, Stream::Family);
    let mut d_auto = false;
    let kind = match cfg.estimator {
        EstimatorConfig::Insample => ErrorKind::InSample,
        EstimatorConfig::PseudoOos => ErrorKind::PseudoOos,
        EstimatorConfig::BlockJackknife { q } => {
            ErrorKind::Jackknife(FamilySpec { kind: FamilyKind::Block { q }, seed: family_seed })
        }
        EstimatorConfig::ArtificialJackknife { d, m, exclude_full_columns } => {
            let d = match d {
                DSpec::Fixed(d) => d,
                DSpec::Auto => {
                    d_auto = true;
                    optimal_d(n as u64, t_tune as u64)?.d as usize
                }
            };
            ErrorKind::Jackknife(FamilySpec {
                kind: FamilyKind::Artificial { d, m, exclude_full_columns },
                seed: family_seed,
            })
        }
    };
    if kind != ErrorKind::InSample {
        let p_max = region.p_set.iter().copied().max().unwrap_or(1);
        if t0 <= p_max || t0 >= t_tune {
            return Err(CliError::config(format!(
                "t0 = {t0} must satisfy max(p) < t0 < T with max(p) = {p_max} and T = {t_tune} tuning periods"
            )));
        }
    }
    let spec = ErrorSpec { kind, t0, stride: cfg.stride, weights, rescale: cfg.rescale_weights };
    let warnings = tuning
        .data
        .fully_missing_series()
        .into_iter()
        .map(|i| {
            format!(
                "series '{}' has no observation in the tuning sample and adds nothing to any loss",
                tuning.data.names()[i]
            )
        })
        .collect();
    Ok(Prepared { panel, tuning, spec, ecm: cfg.ecm_config(), region, d_auto, family_seed, warnings })
}

pub struct TuneOutcome {
    pub report: SelectionReport,
    pub result: SearchResult,
}

pub fn tune<E: Executor>(cfg: &RunConfig, prepared: &Prepared, exec: &E) -> Result<TuneOutcome> {
    let candidates = random_candidates(&prepared.region, cfg.candidates, cfg.seed)?;
    let result = grid_search(&prepared.tuning.data, &candidates, &prepared.spec, &prepared.ecm, exec)?;
    let report = selection_report(cfg, prepared, &result);
    Ok(TuneOutcome { report, result })
}

fn estimator_info(cfg: &RunConfig, prepared: &Prepared) -> EstimatorInfo {
    let s = &prepared.spec;
    let mut info = EstimatorInfo {
        kind: "",
        t0: s.t0,
        stride: s.stride,
        weights: s.weights.as_slice().to_vec(),
        rescale_weights: s.rescale,
        q: None,
        d: None,
        d_auto: None,
        m: None,
        exclude_full_columns: None,
        patterns: 0,
    };
    match (cfg.estimator, s.kind) {
        (EstimatorConfig::Insample, _) => info.kind = "insample",
        (EstimatorConfig::PseudoOos, _) => info.kind = "pseudo_oos",
        (EstimatorConfig::BlockJackknife { q }, _) => {
            info.kind = "block_jackknife";
            info.q = Some(q);
            info.patterns = prepared.tuning.data.periods() - q + 1;
        }
        (_, ErrorKind::Jackknife(FamilySpec { kind: FamilyKind::Artificial { d, m, exclude_full_columns }, .. })) => {
            info.kind = "artificial_jackknife";
            info.d = Some(d);
            info.d_auto = Some(prepared.d_auto);
            info.m = Some(m);
            info.exclude_full_columns = Some(exclude_full_columns);
            info.patterns = m;
        }
        _ => unreachable!("estimator kinds are resolved together"),
    }
    info
}

fn selection_report(cfg: &RunConfig, prepared: &Prepared, result: &SearchResult) -> SelectionReport {
    let tuning = &prepared.tuning;
    let trace = result
        .trace
        .iter()
        .enumerate()
        .map(|(index, e)| {
            let h = &e.candidate;
            let (error, patterns, failed_patterns, status, message) = match &e.outcome {
                Ok(est) => (Some(est.value), est.patterns, est.failed_patterns, "ok", None),
                Err(err) => (None, 0, 0, "failed", Some(err.to_string())),
            };
            TraceRow {
                index,
                p: h.p,
                lambda: h.lambda,
                alpha: h.alpha,
                beta: h.beta,
                error,
                patterns,
                failed_patterns,
                status,
                message,
            }
        })
        .collect();
    SelectionReport {
        schema_version: SCHEMA_VERSION,
        tool: TOOL,
        version: VERSION,
        seed: cfg.seed,
        config: cfg.clone(),
        rng: RngInfo {
            algorithm: RNG_ALGORITHM,
            candidate_stream: Stream::Candidates as u64,
            family_stream: Stream::Family as u64,
            family_seed: prepared.family_seed,
        },
        data: DataInfo {
            series: tuning.data.names().to_vec(),
            periods: prepared.panel.data.periods(),
            tuning_periods: tuning.data.periods(),
            first_label: tuning.labels[0].clone(),
            last_tuning_label: tuning.labels[tuning.labels.len() - 1].clone(),
            observed_cells: tuning.data.observed_count(),
        },
        estimator: estimator_info(cfg, prepared),
        selection: SelectionInfo {
            gamma: Gamma::from(&result.best),
            error: result.best_error,
            candidate_index: result.best_index,
        },
        candidates: result.trace.len(),
        failed_candidates: result.failures(),
        warnings: prepared.warnings.clone(),
        trace,
    }
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::data(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_trace_csv(path: &Path, report: &SelectionReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "index",
        "p",
        "lambda",
        "alpha",
        "beta",
        "error",
        "patterns",
        "failed_patterns",
        "status",
        "message",
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in &report.trace {
        w.write_record([
            r.index.to_string(),
            r.p.to_string(),
            fmt(r.lambda),
            fmt(r.alpha),
            fmt(r.beta),
            r.error.map(fmt).unwrap_or_default(),
            r.patterns.to_string(),
            r.failed_patterns.to_string(),
            r.status.to_string(),
            r.message.clone().unwrap_or_default(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Runs `tune` and writes `selection.json` and `trace.csv` into the output
/// directory. Returns the paths written.
pub fn run_tune<E: Executor>(cfg: &RunConfig, exec: &E) -> Result<(TuneOutcome, Vec<PathBuf>)> {
    let prepared = prepare(cfg)?;
    let outcome = tune(cfg, &prepared, exec)?;
    ensure_dir(&cfg.output_dir)?;
    let sel = cfg.output_dir.join("selection.json");
    let trace = cfg.output_dir.join("trace.csv");
    write_text(&sel, &to_json(&outcome.report))?;
    write_trace_csv(&trace, &outcome.report)?;
    Ok((outcome, vec![sel, trace]))
}

/// Reads the selected hyperparameters from a `selection.json`.
pub fn read_selection(path: &Path) -> Result<Hyperparameters> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let s = &v["selection"];
    let get =
        |k: &str| s[k].as_f64().ok_or_else(|| CliError::config(format!("{}: selection.{k} missing", path.display())));
    let p = s["p"].as_u64().ok_or_else(|| CliError::config(format!("{}: selection.p missing", path.display())))?;
    Ok(Hyperparameters::new(p as usize, get("lambda")?, get("alpha")?, get("beta")?)?)
}

pub struct EvaluationOutcome {
    pub report: EvaluationReport,
    /// Rows of the long-format CSV: label, series, actual, forecast, random walk.
    pub rows: Vec<(String, String, Option<f64>, f64, f64)>,
}

/// Rolling one-step evaluation of fixed hyperparameters on the periods
/// after the tuning sample, against the no-change forecast.
pub fn evaluate(cfg: &RunConfig, panel: Panel, hyper: &Hyperparameters) -> Result<EvaluationOutcome> {
    cfg.validate()?;
    let total = panel.data.periods();
    let t_tune = tuning_periods(cfg, total)?;
    if t_tune >= total {
        return Err(CliError::config(format!(
            "evaluation needs periods after the tuning sample; tune_periods = {t_tune} covers all {total}"
        )));
    }
    if t_tune <= hyper.p {
        return Err(CliError::config(format!("tuning sample of {t_tune} periods is too short for p = {}", hyper.p)));
    }
    let d = &panel.data;
    let n = d.n();
    let weights = WeightVector::new(cfg.weights.resolve(d.names())?)?;
    let spec = ErrorSpec {
        kind: ErrorKind::PseudoOos,
        t0: t_tune,
        stride: cfg.stride,
        weights: weights.clone(),
        rescale: cfg.rescale_weights,
    };
    let rec = pseudo_oos_detail(d, hyper, &spec, &cfg.ecm_config())?;

    let mut rows = Vec::new();
    let mut sse = vec![0.0; n];
    let mut sse_rw = vec![0.0; n];
    let mut counts = vec![0usize; n];
    let mut total_loss = 0.0;
    let mut total_rw = 0.0;
    for (k, &period) in rec.periods.iter().enumerate() {
        let c = period - 1;
        let actual = d.column(c);
        let mut rw = vec![0.0; n];
        for (i, slot) in rw.iter_mut().enumerate() {
            *slot = (0..c).rev().find_map(|s| d.get(i, s)).ok_or_else(|| {
                CliError::data(format!("series '{}' has no observation before period {period}", d.names()[i]))
            })?;
        }
        let f = &rec.forecasts[k];
        total_loss += rec.losses[k];
        total_rw += loss(&actual, &rw, &weights, cfg.rescale_weights)?;
        for i in 0..n {
            if let Some(a) = actual[i] {
                sse[i] += (a - f[i]).powi(2);
                sse_rw[i] += (a - rw[i]).powi(2);
                counts[i] += 1;
            }
            rows.push((panel.labels[c].clone(), d.names()[i].clone(), actual[i], f[i], rw[i]));
        }
    }
    let periods = rec.periods.len() as f64;
    let ratio = |a: f64, b: f64| (b > 0.0).then(|| a / b);
    let per_series = (0..n)
        .map(|i| {
            let k = counts[i].max(1) as f64;
            SeriesScore {
                series: d.names()[i].clone(),
                weight: weights.as_slice()[i],
                forecasts: counts[i],
                mse: sse[i] / k,
                random_walk_mse: sse_rw[i] / k,
                relative_mse: ratio(sse[i], sse_rw[i]),
            }
        })
        .collect();
    let (first, last) = (rec.periods[0], rec.periods[rec.periods.len() - 1]);
    let report = EvaluationReport {
        schema_version: SCHEMA_VERSION,
        tool: TOOL,
        version: VERSION,
        seed: cfg.seed,
        config: cfg.clone(),
        hyperparameters: Gamma::from(hyper),
        first_forecast_period: first,
        last_forecast_period: last,
        first_forecast_label: panel.labels[first - 1].clone(),
        last_forecast_label: panel.labels[last - 1].clone(),
        weighted_mse: total_loss / periods,
        random_walk_weighted_mse: total_rw / periods,
        relative_weighted_mse: ratio(total_loss, total_rw),
        per_series,
    };
    Ok(EvaluationOutcome { report, rows })
}

pub fn run_evaluate(cfg: &RunConfig, hyper: &Hyperparameters) -> Result<(EvaluationOutcome, Vec<PathBuf>)> {
    let panel = read_csv(&cfg.data)?;
    let out = evaluate(cfg, panel, hyper)?;
    ensure_dir(&cfg.output_dir)?;
    let json = cfg.output_dir.join("evaluation.json");
    let csv_path = cfg.output_dir.join("evaluation.csv");
    write_text(&json, &to_json(&out.report))?;
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| csv_err(&csv_path, e))?;
    w.write_record(["period", "series", "actual", "forecast", "random_walk"]).map_err(|e| csv_err(&csv_path, e))?;
    for (label, series, actual, f, rw) in &out.rows {
        w.write_record([
            label.clone(),
            series.clone(),
            actual.map(fmt).unwrap_or_else(|| "NA".into()),
            fmt(*f),
            fmt(*rw),
        ])
        .map_err(|e| csv_err(&csv_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&csv_path, e))?;
    Ok((out, vec![json, csv_path]))
}

/// Options of the `simulate` command beyond [`SimSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateOptions {
    pub spec: SimSpec,
    pub missing_fraction: f64,
    pub block_len: usize,
}

pub fn simulate(opts: &SimulateOptions) -> Result<(Panel, TruthReport)> {
    let spec = &opts.spec;
    let (data, truth) = simulate_var(spec)?;
    let names: Vec<String> = (1..=spec.n).map(|i| format!("y{i}")).collect();
    let data = data.with_names(names.clone())?;
    // keep a fully observed lead so that estimation windows exist
    let data = inject_missing(&data, opts.missing_fraction, spec.seed, opts.block_len, spec.p + 2)?;
    let panel = Panel { data, time_header: "period".into(), labels: (1..=spec.t).map(|t| t.to_string()).collect() };
    let rows =
        |m: &ajk_core::nalgebra::DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    let report = TruthReport {
        schema_version: SCHEMA_VERSION,
        tool: TOOL,
        version: VERSION,
        seed: spec.seed,
        n: spec.n,
        p: spec.p,
        t: spec.t,
        spectral_radius: spec.spectral_radius,
        sparsity: spec.sparsity,
        sigma_scale: spec.sigma_scale,
        burn_in: spec.burn_in,
        missing_fraction: opts.missing_fraction,
        block_len: opts.block_len,
        series: names,
        psi: rows(&truth.psi),
        sigma: rows(&truth.sigma),
    };
    Ok((panel, report))
}

pub fn run_simulate(opts: &SimulateOptions, output_dir: &Path) -> Result<Vec<PathBuf>> {
    let (panel, truth) = simulate(opts)?;
    ensure_dir(output_dir)?;
    let csv_path = output_dir.join("simulated.csv");
    let json = output_dir.join("truth.json");
    write_csv_file(&csv_path, &panel)?;
    write_text(&json, &to_json(&truth))?;
    Ok(vec![csv_path, json])
}
