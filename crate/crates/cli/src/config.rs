//! Run configuration: a TOML (or JSON) document plus command-line overrides.
//!
//! Keys (all optional except `data`):
//!
//! ```toml
//! data = "panel.csv"
//! seed = 0
//! candidates = 1000
//! tune_periods = 160        # or a fraction of T; default: all periods
//! t0 = 0.5                  # last presample period, or a fraction of the tuning sample
//! stride = 1
//! weights = "equal"         # or [0.2, 0.8], or { equal_over = ["a", "b"] }
//! rescale_weights = false
//! workers = 4               # never written to reports
//!
//! [estimator]
//! kind = "artificial_jackknife"   # insample | pseudo_oos | block_jackknife | artificial_jackknife
//! d = "auto"                      # or an integer
//! m = 5000
//! exclude_full_columns = true
//! # q = 4                         # block_jackknife only
//!
//! [region]
//! p = [1, 2, 3, 4, 5]
//! lambda = [1e-4, 5.0]
//! alpha = [0.0, 1.0]
//! beta = [1.0, 5.0]
//!
//! [ecm]
//! max_iter = 1000
//! rel_tol = 1e-3
//! epsilon = 1e-8
//! cd_max_iter = 10000
//! cd_tol = 1e-12
//! ```

use std::path::{Path, PathBuf};

use ajk_core::ecm::EcmConfig;
use ajk_core::search::SearchRegion;
use ajk_core::subsampling::DEFAULT_FAMILY_SIZE;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// A period given either as a 1-based count or as a fraction in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PeriodSpec {
    Count(usize),
    Fraction(f64),
}

impl PeriodSpec {
    /// `floor(fraction * total)` for fractions, the count itself otherwise.
    pub fn resolve(&self, total: usize, what: &str) -> Result<usize> {
        match *self {
            PeriodSpec::Count(c) => Ok(c),
            PeriodSpec::Fraction(f) if f > 0.0 && f < 1.0 => Ok((f * total as f64).floor() as usize),
            PeriodSpec::Fraction(f) => Err(CliError::config(format!("{what} fraction {f} is not in (0, 1)"))),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if let Ok(c) = s.parse::<usize>() {
            return Ok(PeriodSpec::Count(c));
        }
        s.parse::<f64>()
            .map(PeriodSpec::Fraction)
            .map_err(|_| CliError::config(format!("'{s}' is neither a period count nor a fraction")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DRaw", into = "DRaw")]
pub enum DSpec {
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DRaw {
    Int(usize),
    Str(String),
}

impl TryFrom<DRaw> for DSpec {
    type Error = String;
    fn try_from(r: DRaw) -> std::result::Result<Self, String> {
        match r {
            DRaw::Int(d) => Ok(DSpec::Fixed(d)),
            DRaw::Str(s) if s == "auto" => Ok(DSpec::Auto),
            DRaw::Str(s) => Err(format!("d must be an integer or \"auto\", got \"{s}\"")),
        }
    }
}

impl From<DSpec> for DRaw {
    fn from(d: DSpec) -> Self {
        match d {
            DSpec::Auto => DRaw::Str("auto".into()),
            DSpec::Fixed(d) => DRaw::Int(d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    Insample,
    PseudoOos,
    BlockJackknife {
        q: usize,
    },
    ArtificialJackknife {
        #[serde(default = "auto")]
        d: DSpec,
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default = "yes")]
        exclude_full_columns: bool,
    },
}

fn auto() -> DSpec {
    DSpec::Auto
}
fn default_m() -> usize {
    DEFAULT_FAMILY_SIZE
}
fn yes() -> bool {
    true
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig::ArtificialJackknife { d: DSpec::Auto, m: DEFAULT_FAMILY_SIZE, exclude_full_columns: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightsRaw", into = "WeightsRaw")]
pub enum WeightsConfig {
    #[default]
    Equal,
    Values(Vec<f64>),
    EqualOver(Vec<String>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WeightsRaw {
    Tag(String),
    Values(Vec<f64>),
    Over { equal_over: Vec<String> },
}

impl TryFrom<WeightsRaw> for WeightsConfig {
    type Error = String;
    fn try_from(r: WeightsRaw) -> std::result::Result<Self, String> {
        match r {
            WeightsRaw::Tag(s) if s == "equal" => Ok(WeightsConfig::Equal),
            WeightsRaw::Tag(s) => {
                Err(format!("weights must be \"equal\", a list or {{ equal_over = [...] }}, got \"{s}\""))
            }
            WeightsRaw::Values(v) => Ok(WeightsConfig::Values(v)),
            WeightsRaw::Over { equal_over } => Ok(WeightsConfig::EqualOver(equal_over)),
        }
    }
}

impl From<WeightsConfig> for WeightsRaw {
    fn from(w: WeightsConfig) -> Self {
        match w {
            WeightsConfig::Equal => WeightsRaw::Tag("equal".into()),
            WeightsConfig::Values(v) => WeightsRaw::Values(v),
            WeightsConfig::EqualOver(s) => WeightsRaw::Over { equal_over: s },
        }
    }
}

impl WeightsConfig {
    pub fn resolve(&self, names: &[String]) -> Result<Vec<f64>> {
        let n = names.len();
        match self {
            WeightsConfig::Equal => Ok(vec![1.0 / n as f64; n]),
            WeightsConfig::Values(v) if v.len() == n => Ok(v.clone()),
            WeightsConfig::Values(v) => Err(CliError::config(format!("{} weights given for {n} series", v.len()))),
            WeightsConfig::EqualOver(subset) => {
                if subset.is_empty() {
                    return Err(CliError::config("equal_over needs at least one series"));
                }
                let mut w = vec![0.0; n];
                for s in subset {
                    let i = names
                        .iter()
                        .position(|x| x == s)
                        .ok_or_else(|| CliError::config(format!("equal_over names unknown series '{s}'")))?;
                    w[i] = 1.0;
                }
                let k = w.iter().filter(|&&x| x > 0.0).count() as f64;
                Ok(w.into_iter().map(|x| x / k).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub p: Vec<usize>,
    pub lambda: [f64; 2],
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
}

impl Default for RegionConfig {
    fn default() -> Self {
        let r = SearchRegion::default();
        Self {
            p: r.p_set,
            lambda: [r.lambda_range.0, r.lambda_range.1],
            alpha: [r.alpha_range.0, r.alpha_range.1],
            beta: [r.beta_range.0, r.beta_range.1],
        }
    }
}

impl RegionConfig {
    pub fn to_region(&self) -> SearchRegion {
        SearchRegion {
            p_set: self.p.clone(),
            lambda_range: (self.lambda[0], self.lambda[1]),
            alpha_range: (self.alpha[0], self.alpha[1]),
            beta_range: (self.beta[0], self.beta[1]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EcmSection {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub epsilon: f64,
    pub cd_max_iter: usize,
    pub cd_tol: f64,
}

impl Default for EcmSection {
    fn default() -> Self {
        let c = EcmConfig::default();
        Self {
            max_iter: c.max_iter,
            rel_tol: c.rel_tol,
            epsilon: c.epsilon,
            cd_max_iter: c.cd_max_iter,
            cd_tol: c.cd_tol,
        }
    }
}

impl From<EcmSection> for EcmConfig {
    fn from(s: EcmSection) -> Self {
        EcmConfig {
            max_iter: s.max_iter,
            rel_tol: s.rel_tol,
            epsilon: s.epsilon,
            cd_max_iter: s.cd_max_iter,
            cd_tol: s.cd_tol,
        }
    }
}

fn default_candidates() -> usize {
    1000
}
fn default_t0() -> PeriodSpec {
    PeriodSpec::Fraction(0.5)
}
fn default_stride() -> usize {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("ajk-out")
}

/// Everything a run depends on. `output_dir` and `workers` only affect
/// where and how fast a run happens, so reports leave them out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    #[serde(default)]
    pub tune_periods: Option<PeriodSpec>,
    #[serde(default = "default_t0")]
    pub t0: PeriodSpec,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub rescale_weights: bool,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub region: RegionConfig,
    #[serde(default)]
    pub ecm: EcmSection,
    #[serde(default = "default_output", skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
}

impl RunConfig {
    /// Defaults for everything but the data path.
    pub fn new(data: impl Into<PathBuf>) -> Self {
        Self {
            data: data.into(),
            seed: 0,
            candidates: default_candidates(),
            tune_periods: None,
            t0: default_t0(),
            stride: default_stride(),
            weights: WeightsConfig::Equal,
            rescale_weights: false,
            estimator: EstimatorConfig::default(),
            region: RegionConfig::default(),
            ecm: EcmSection::default(),
            output_dir: default_output(),
            workers: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string().trim().replace('\n', " ")))
    }

    /// Accepts a JSON run configuration or a report that embeds one under
    /// `config`, so reports can be replayed.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        let inner = match v.get("config") {
            Some(c) if v.get("schema_version").is_some() => c.clone(),
            _ => v,
        };
        serde_json::from_value(inner).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg =
            if path.extension().is_some_and(|e| e == "json") { Self::from_json(&text) } else { Self::from_toml(&text) };
        cfg.map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn ecm_config(&self) -> EcmConfig {
        self.ecm.into()
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates == 0 {
            return Err(CliError::config("candidates must be >= 1"));
        }
        if self.stride == 0 {
            return Err(CliError::config("stride must be >= 1"));
        }
        self.region.to_region().validate()?;
        self.ecm_config().validate()?;
        match self.estimator {
            EstimatorConfig::BlockJackknife { q: 0 } => Err(CliError::config("block length q must be >= 1")),
            EstimatorConfig::ArtificialJackknife { m: 0, .. } => Err(CliError::config("m must be >= 1")),
            EstimatorConfig::ArtificialJackknife { d: DSpec::Fixed(0), .. } => Err(CliError::config("d must be >= 1")),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml("data = \"x.csv\"").unwrap();
        assert_eq!(c, RunConfig::new("x.csv"));
        assert_eq!(c.region.p, vec![1, 2, 3, 4, 5]);
        assert_eq!(
            c.estimator,
            EstimatorConfig::ArtificialJackknife { d: DSpec::Auto, m: 5000, exclude_full_columns: true }
        );
    }

    #[test]
    fn full_config() {
        let c = RunConfig::from_toml(
            r#"
            data = "x.csv"
            seed = 9
            t0 = 40
            tune_periods = 0.8
            weights = { equal_over = ["a"] }
            [estimator]
            kind = "block_jackknife"
            q = 4
            [region]
            p = [1, 2]
            lambda = [0.1, 1.0]
            alpha = [0.0, 0.5]
            beta = [1.0, 2.0]
            [ecm]
            max_iter = 50
            "#,
        )
        .unwrap();
        assert_eq!(c.t0, PeriodSpec::Count(40));
        assert_eq!(c.tune_periods, Some(PeriodSpec::Fraction(0.8)));
        assert_eq!(c.estimator, EstimatorConfig::BlockJackknife { q: 4 });
        assert_eq!(c.ecm.max_iter, 50);
        assert_eq!(c.ecm.rel_tol, 1e-3);
        let names = vec!["a".to_string(), "b".to_string()];
        assert_eq!(c.weights.resolve(&names).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn d_spec_forms() {
        let c =
            RunConfig::from_toml("data = \"x\"\n[estimator]\nkind = \"artificial_jackknife\"\nd = 3\nm = 10").unwrap();
        assert_eq!(
            c.estimator,
            EstimatorConfig::ArtificialJackknife { d: DSpec::Fixed(3), m: 10, exclude_full_columns: true }
        );
        assert!(
            RunConfig::from_toml("data = \"x\"\n[estimator]\nkind = \"artificial_jackknife\"\nd = \"most\"").is_err()
        );
        assert!(RunConfig::from_toml("data = \"x\"\nbogus = 1").is_err());
        assert!(RunConfig::from_toml("data = \"x\"\n[estimator]\nkind = \"nope\"").is_err());
    }

    #[test]
    fn json_round_trip_skips_run_location() {
        let mut c = RunConfig::new("x.csv");
        c.workers = Some(3);
        c.weights = WeightsConfig::Values(vec![0.25, 0.75]);
        let json = serde_json::to_string(&c).unwrap();
        assert!(!json.contains("workers") && !json.contains("output_dir"));
        let back = RunConfig::from_json(&json).unwrap();
        assert_eq!(back.workers, None);
        assert_eq!(back.weights, c.weights);
        let report = format!("{{\"schema_version\": 1, \"config\": {json}}}");
        assert_eq!(RunConfig::from_json(&report).unwrap(), back);
    }

    #[test]
    fn period_specs() {
        assert_eq!(PeriodSpec::parse("40").unwrap(), PeriodSpec::Count(40));
        assert_eq!(PeriodSpec::parse("0.5").unwrap().resolve(81, "t0").unwrap(), 40);
        assert!(PeriodSpec::Fraction(1.5).resolve(10, "t0").is_err());
        assert!(PeriodSpec::parse("abc").is_err());
    }

    #[test]
    fn weights() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(WeightsConfig::Equal.resolve(&names).unwrap(), vec![1.0 / 3.0; 3]);
        assert!(WeightsConfig::Values(vec![1.0]).resolve(&names).is_err());
        assert!(WeightsConfig::EqualOver(vec!["z".into()]).resolve(&names).is_err());
        assert_eq!(
            WeightsConfig::EqualOver(vec!["a".into(), "c".into()]).resolve(&names).unwrap(),
            vec![0.5, 0.0, 0.5]
        );
    }
}
