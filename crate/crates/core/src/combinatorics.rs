//! Exact binomial arithmetic and the choice of the number of artificial
//! deletions `d`.
//!
//! The objective for `d` trades the number of distinct `d`-subsets of the
//! `n x T` cell grid against the number of those subsets that blank out an
//! entire time period. Both terms are huge and of comparable magnitude, so
//! everything here is done in exact signed integers.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::{BigInt, BigUint};

use crate::error::{Error, Result};

/// Exact arbitrary-precision count.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BigCount(pub BigInt);

impl BigCount {
    pub fn zero() -> Self {
        Self(BigInt::from(0u8))
    }

    pub fn as_bigint(&self) -> &BigInt {
        &self.0
    }

    /// Value as `u128` when it is nonnegative and fits.
    pub fn to_u128(&self) -> Option<u128> {
        u128::try_from(&self.0).ok()
    }
}

impl From<u64> for BigCount {
    fn from(v: u64) -> Self {
        Self(BigInt::from(v))
    }
}

impl fmt::Display for BigCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// `C(m, k)`, zero when `k > m`.
pub fn binomial(m: u64, k: u64) -> BigCount {
    BigCount(BigInt::from(binomial_u(m, k)))
}

fn binomial_u(m: u64, k: u64) -> BigUint {
    if k > m {
        return BigUint::from(0u8);
    }
    let k = k.min(m - k);
    let mut acc = BigUint::from(1u8);
    for i in 0..k {
        acc *= m - i;
        acc /= i + 1;
    }
    acc
}

/// Row `[C(m, 0), ..., C(m, m)]`.
fn binomial_row(m: u64) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(m as usize + 1);
    let mut cur = BigUint::from(1u8);
    row.push(cur.clone());
    for k in 0..m {
        cur = cur * (m - k) / (k + 1);
        row.push(cur.clone());
    }
    row
}

fn check_grid(n: u64, t: u64) -> Result<()> {
    if n == 0 || t == 0 {
        return Err(Error::domain("grid needs n >= 1 and T >= 1"));
    }
    n.checked_mul(t).map(|_| ()).ok_or_else(|| Error::domain("n*T overflows"))
}

/// Number of `d`-subsets of the `n x T` grid containing at least one complete
/// time period, by inclusion-exclusion over the periods that are fully deleted.
pub fn count_all_missing_patterns(n: u64, t: u64, d: u64) -> Result<BigCount> {
    check_grid(n, t)?;
    let cells = n * t;
    if d == 0 || d > cells {
        return Err(Error::domain(alloc::format!("d = {d} outside 1..={cells}")));
    }
    let upper = (d / n).min(t);
    let mut total = BigInt::from(0u8);
    for i in 1..=upper {
        let term = BigInt::from(binomial_u(t, i) * binomial_u(cells - i * n, d - i * n));
        if i % 2 == 1 {
            total += term;
        } else {
            total -= term;
        }
    }
    Ok(BigCount(total))
}

/// Result of [`optimal_d`]: the chosen `d` and the objective for every
/// `d = 1..=nT` (`profile[d - 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalD {
    pub d: u64,
    pub profile: Vec<BigCount>,
}

/// Objective `C(nT, d) - count_all_missing_patterns(n, T, d)` for every `d`.
pub fn objective_profile(n: u64, t: u64) -> Result<Vec<BigCount>> {
    check_grid(n, t)?;
    let cells = n * t;
    let mut profile: Vec<BigInt> = binomial_row(cells).into_iter().map(BigInt::from).collect();
    let mut scratch = vec![BigInt::from(0u8); profile.len()];
    for i in 1..=t {
        let choose = BigInt::from(binomial_u(t, i));
        let row = binomial_row(cells - i * n);
        for (k, c) in row.into_iter().enumerate() {
            let term = &choose * BigInt::from(c);
            let slot = &mut scratch[k + (i * n) as usize];
            if i % 2 == 1 {
                *slot += term;
            } else {
                *slot -= term;
            }
        }
    }
    for (p, s) in profile.iter_mut().zip(scratch) {
        *p -= s;
    }
    Ok(profile.into_iter().skip(1).map(BigCount).collect())
}

/// The `d` in `1..=nT` maximising the objective; ties go to the smallest `d`.
pub fn optimal_d(n: u64, t: u64) -> Result<OptimalD> {
    let profile = objective_profile(n, t)?;
    let mut best = 0usize;
    for (k, v) in profile.iter().enumerate() {
        if v > &profile[best] {
            best = k;
        }
    }
    Ok(OptimalD { d: best as u64 + 1, profile })
}
