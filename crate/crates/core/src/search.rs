//! Random and grid search over the hyperparameter region.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;

use crate::ecm::EcmConfig;
use crate::error::{Error, Result};
use crate::estimators::{ErrorEstimate, ErrorSpec, Evaluator};
use crate::exec::{Executor, Sequential};
use crate::model::{Hyperparameters, TimeSeriesDataset};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchRegion {
    pub p_set: Vec<usize>,
    pub lambda_range: (f64, f64),
    pub alpha_range: (f64, f64),
    pub beta_range: (f64, f64),
}

impl Default for SearchRegion {
    /// `p in {1..5}`, `lambda in [1e-4, 5]`, `alpha in [0, 1]`, `beta in [1, 5]`.
    fn default() -> Self {
        Self { p_set: (1..=5).collect(), lambda_range: (1e-4, 5.0), alpha_range: (0.0, 1.0), beta_range: (1.0, 5.0) }
    }
}

impl SearchRegion {
    pub fn singleton(h: &Hyperparameters) -> Self {
        Self {
            p_set: alloc::vec![h.p],
            lambda_range: (h.lambda, h.lambda),
            alpha_range: (h.alpha, h.alpha),
            beta_range: (h.beta, h.beta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_set.is_empty() || self.p_set.contains(&0) {
            return Err(Error::domain("p_set must be non-empty with every p >= 1"));
        }
        let ranges = [("lambda", self.lambda_range), ("alpha", self.alpha_range), ("beta", self.beta_range)];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::domain(format!("{name} range [{lo}, {hi}] is not a finite interval")));
            }
        }
        if self.lambda_range.0 < 0.0 {
            return Err(Error::domain("lambda range must be nonnegative"));
        }
        if self.alpha_range.0 < 0.0 || self.alpha_range.1 > 1.0 {
            return Err(Error::domain("alpha range must lie in [0, 1]"));
        }
        if self.beta_range.0 < 1.0 {
            return Err(Error::domain("beta range must lie in [1, inf)"));
        }
        Ok(())
    }

    /// Number of distinct points, `None` when some range is a proper interval.
    fn distinct_points(&self) -> Option<usize> {
        let degenerate = [self.lambda_range, self.alpha_range, self.beta_range].iter().all(|(lo, hi)| lo == hi);
        degenerate.then(|| self.p_set.iter().collect::<BTreeSet<_>>().len())
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        (lo + (hi - lo) * rng.random::<f64>()).min(hi)
    }
}

/// `count` distinct candidates drawn uniformly from the region using the
/// candidate stream of `seed`. Duplicates (exact equality) are redrawn.
pub fn random_candidates(region: &SearchRegion, count: usize, seed: u64) -> Result<Vec<Hyperparameters>> {
    region.validate()?;
    if count == 0 {
        return Err(Error::domain("candidate count must be >= 1"));
    }
    if let Some(k) = region.distinct_points() {
        if count > k {
            return Err(Error::Capacity { requested: count.to_string(), available: k.to_string() });
        }
    }
    let mut rng = rng::stream(seed, Stream::Candidates);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = region.p_set[rng.random_range(0..region.p_set.len())];
        let lambda = uniform(&mut rng, region.lambda_range);
        let alpha = uniform(&mut rng, region.alpha_range);
        let beta = uniform(&mut rng, region.beta_range);
        if seen.insert((p, lambda.to_bits(), alpha.to_bits(), beta.to_bits())) {
            out.push(Hyperparameters::new(p, lambda, alpha, beta)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub candidate: Hyperparameters,
    pub outcome: Result<ErrorEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: Hyperparameters,
    pub best_error: f64,
    /// Position of `best` in the candidate list.
    pub best_index: usize,
    /// One entry per candidate, in candidate order.
    pub trace: Vec<TraceEntry>,
}

impl SearchResult {
    pub fn failures(&self) -> usize {
        self.trace.iter().filter(|e| e.outcome.is_err()).count()
    }
}

/// Evaluates `eval` at every candidate and returns the first minimiser.
/// Non-finite values count as failures.
pub fn grid_search_with<E, F>(candidates: &[Hyperparameters], exec: &E, eval: F) -> Result<SearchResult>
where
    E: Executor,
    F: Fn(&Hyperparameters) -> Result<ErrorEstimate> + Sync,
{
    if candidates.is_empty() {
        return Err(Error::domain("no candidates to search"));
    }
    let outcomes = exec.map(candidates.len(), |k| {
        eval(&candidates[k]).and_then(|e| {
            if e.value.is_finite() {
                Ok(e)
            } else {
                Err(Error::numerical("non-finite error estimate"))
            }
        })
    });
    let mut best: Option<(usize, f64)> = None;
    for (k, o) in outcomes.iter().enumerate() {
        if let Ok(e) = o {
            if best.is_none_or(|(_, v)| e.value < v) {
                best = Some((k, e.value));
            }
        }
    }
    let (best_index, best_error) = best.ok_or(Error::AllCandidatesFailed(candidates.len()))?;
    let trace = candidates.iter().zip(outcomes).map(|(c, outcome)| TraceEntry { candidate: *c, outcome }).collect();
    Ok(SearchResult { best: candidates[best_index], best_error, best_index, trace })
}

/// Grid search of an error estimator. Candidates are dispatched through
/// `exec`; jackknife patterns of one candidate run sequentially.
pub fn grid_search<E: Executor>(
    data: &TimeSeriesDataset,
    candidates: &[Hyperparameters],
    spec: &ErrorSpec,
    config: &EcmConfig,
    exec: &E,
) -> Result<SearchResult> {
    let evaluator = Evaluator::new(data, spec.clone(), *config)?;
    grid_search_with(candidates, exec, |h| evaluator.evaluate(h, &Sequential))
}

/// Outcome of [`select_hyperparameters`] with what is needed to replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub result: SearchResult,
    pub seed: u64,
    pub spec: ErrorSpec,
    pub config: EcmConfig,
    pub region: SearchRegion,
}

/// Random search: `count` candidates from the region, then grid search.
pub fn select_hyperparameters<E: Executor>(
    data: &TimeSeriesDataset,
    region: &SearchRegion,
    spec: &ErrorSpec,
    count: usize,
    seed: u64,
    config: &EcmConfig,
    exec: &E,
) -> Result<Selection> {
    let candidates = random_candidates(region, count, seed)?;
    let result = grid_search(data, &candidates, spec, config, exec)?;
    Ok(Selection { result, seed, spec: spec.clone(), config: *config, region: region.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn est(v: f64) -> Result<ErrorEstimate> {
        Ok(ErrorEstimate { value: v, patterns: 0, failed_patterns: 0 })
    }

    #[test]
    fn singleton_region() {
        let h = Hyperparameters::new(2, 0.3, 0.4, 1.5).unwrap();
        let c = random_candidates(&SearchRegion::singleton(&h), 1, 9).unwrap();
        assert_eq!(c, vec![h]);
        assert!(matches!(random_candidates(&SearchRegion::singleton(&h), 2, 9), Err(Error::Capacity { .. })));
    }

    #[test]
    fn default_region_draws() {
        let r = SearchRegion::default();
        let a = random_candidates(&r, 1000, 42).unwrap();
        assert_eq!(a, random_candidates(&r, 1000, 42).unwrap());
        let set: BTreeSet<_> =
            a.iter().map(|h| (h.p, h.lambda.to_bits(), h.alpha.to_bits(), h.beta.to_bits())).collect();
        assert_eq!(set.len(), 1000);
        for h in &a {
            assert!((1..=5).contains(&h.p));
            assert!(h.lambda >= 1e-4 && h.lambda <= 5.0);
            assert!(h.alpha >= 0.0 && h.alpha <= 1.0);
            assert!(h.beta >= 1.0 && h.beta <= 5.0);
        }
        assert_ne!(a, random_candidates(&r, 1000, 43).unwrap());
    }

    #[test]
    fn invalid_regions() {
        let r = SearchRegion { alpha_range: (0.5, 1.5), ..SearchRegion::default() };
        assert!(random_candidates(&r, 1, 0).is_err());
        let mut r = SearchRegion::default();
        r.p_set.clear();
        assert!(random_candidates(&r, 1, 0).is_err());
        assert!(random_candidates(&SearchRegion::default(), 0, 0).is_err());
    }

    #[test]
    fn monotone_mock_picks_smallest_lambda() {
        let c = random_candidates(&SearchRegion::default(), 50, 1).unwrap();
        let r = grid_search_with(&c, &Sequential, |h| est(h.lambda)).unwrap();
        let min = c.iter().map(|h| h.lambda).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best.lambda, min);
        assert_eq!(r.trace.len(), 50);
        assert!(r.trace.iter().all(|e| e.outcome.as_ref().unwrap().value >= r.best_error));
    }

    #[test]
    fn ties_go_to_first() {
        let c = random_candidates(&SearchRegion::default(), 3, 2).unwrap();
        let r = grid_search_with(&c, &Sequential, |_| est(1.0)).unwrap();
        assert_eq!(r.best_index, 0);
        let r = grid_search_with(&c[..1], &Sequential, |_| est(99.0)).unwrap();
        assert_eq!(r.best, c[0]);
    }

    #[test]
    fn failures_are_recorded() {
        let c = random_candidates(&SearchRegion::default(), 4, 3).unwrap();
        let r = grid_search_with(&c, &Sequential, |h| {
            if h == &c[0] || h == &c[2] {
                Err(Error::numerical("boom"))
            } else {
                est(f64::from(h.p as u32))
            }
        })
        .unwrap();
        assert_eq!(r.failures(), 2);
        assert!(r.best_index == 1 || r.best_index == 3);
        let all = grid_search_with(&c, &Sequential, |_| est(f64::NAN));
        assert!(matches!(all, Err(Error::AllCandidatesFailed(4))));
    }
}
