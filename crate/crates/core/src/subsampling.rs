//! Deletion-pattern families: contiguous blocks of periods and random
//! `d`-subsets of the cell grid.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;

use crate::combinatorics::{binomial, count_all_missing_patterns, BigCount};
use crate::error::{Error, Result};
use crate::model::{SubsampleFamily, SubsamplePattern};
use crate::rng;

/// Default number of random patterns in an artificial family.
pub const DEFAULT_FAMILY_SIZE: usize = 5000;

/// Combinations are enumerated outright (instead of rejection sampling)
/// when the admissible set is at most this large and at most twice `m`.
const ENUMERATION_LIMIT: u128 = 200_000;

/// How a deletion family is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// Every run of `q` consecutive periods, all series.
    Block { q: usize },
    /// `m` distinct random `d`-subsets of the grid.
    Artificial { d: usize, m: usize, exclude_full_columns: bool },
    /// The family `{{}}`, which reproduces the plain pseudo out-of-sample error.
    SingleEmpty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    /// Only used by [`FamilyKind::Artificial`].
    pub seed: u64,
}

impl FamilySpec {
    pub fn build(&self, n: usize, t: usize) -> Result<SubsampleFamily> {
        match self.kind {
            FamilyKind::Block { q } => block_family(n, t, q),
            FamilyKind::Artificial { d, m, exclude_full_columns } => {
                draw_artificial_family(n, t, d, m, self.seed, exclude_full_columns)
            }
            FamilyKind::SingleEmpty => Ok(vec![SubsamplePattern::empty()]),
        }
    }
}

/// The `T - q + 1` patterns deleting periods `j..j+q-1` for every series.
pub fn block_family(n: usize, t: usize, q: usize) -> Result<SubsampleFamily> {
    if n == 0 || q == 0 || q > t {
        return Err(Error::domain(format!("block length q = {q} outside 1..={t}")));
    }
    Ok((0..=t - q)
        .map(|start| {
            let cells = (start..start + q).flat_map(|c| (0..n).map(move |i| (i, c))).collect();
            SubsamplePattern::from_zero_based(cells)
        })
        .collect())
}

/// Number of admissible `d`-subsets.
pub fn admissible_count(n: usize, t: usize, d: usize, exclude_full_columns: bool) -> Result<BigCount> {
    let total = binomial((n * t) as u64, d as u64);
    if !exclude_full_columns {
        return Ok(total);
    }
    let bad = count_all_missing_patterns(n as u64, t as u64, d as u64)?;
    Ok(BigCount(total.0 - bad.0))
}

/// Draws `m` distinct `d`-subsets of the `n x T` grid, uniformly over the
/// admissible combinations. Deterministic given `seed`.
pub fn draw_artificial_family(
    n: usize,
    t: usize,
    d: usize,
    m: usize,
    seed: u64,
    exclude_full_columns: bool,
) -> Result<SubsampleFamily> {
    let cells = n * t;
    if n == 0 || t == 0 || d == 0 || d > cells {
        return Err(Error::domain(format!("d = {d} outside 1..={cells}")));
    }
    if m == 0 {
        return Err(Error::domain("family size m must be >= 1"));
    }
    let capacity = admissible_count(n, t, d, exclude_full_columns)?;
    if BigCount::from(m as u64) > capacity {
        return Err(Error::Capacity { requested: m.to_string(), available: capacity.to_string() });
    }
    let mut rng = rng::seeded(seed);
    let small = capacity.to_u128().filter(|&c| c <= ENUMERATION_LIMIT && c <= 2 * m as u128);
    if small.is_some() {
        let all = enumerate_admissible(n, t, d, exclude_full_columns);
        let picks = index::sample(&mut rng, all.len(), m);
        return Ok(picks.into_iter().map(|k| to_pattern(n, &all[k])).collect());
    }

    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut family = Vec::with_capacity(m);
    while family.len() < m {
        let mut draw = index::sample(&mut rng, cells, d).into_vec();
        draw.sort_unstable();
        if exclude_full_columns && has_full_column(n, &draw) {
            continue;
        }
        if seen.contains(&draw) {
            continue;
        }
        family.push(to_pattern(n, &draw));
        seen.insert(draw);
    }
    Ok(family)
}

fn to_pattern(n: usize, sorted_cells: &[usize]) -> SubsamplePattern {
    SubsamplePattern::from_zero_based(sorted_cells.iter().map(|&k| (k % n, k / n)).collect())
}

/// Cells are numbered period-major (`period * n + series`), so a sorted list
/// covers a full period when `n` consecutive entries share `k / n`.
fn has_full_column(n: usize, sorted_cells: &[usize]) -> bool {
    sorted_cells.windows(n).any(|w| w[0] % n == 0 && w[n - 1] == w[0] + n - 1)
}

fn enumerate_admissible(n: usize, t: usize, d: usize, exclude: bool) -> Vec<Vec<usize>> {
    let cells = n * t;
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        if !(exclude && has_full_column(n, &idx)) {
            out.push(idx.clone());
        }
        // next combination in lexicographic order
        let mut k = d;
        while k > 0 && idx[k - 1] == cells - d + k - 1 {
            k -= 1;
        }
        if k == 0 {
            return out;
        }
        idx[k - 1] += 1;
        for j in k..d {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
