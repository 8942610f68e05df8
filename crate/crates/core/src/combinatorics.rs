//! Counting and enumerating distinct group-label assignments.
//!
//! The distinct relabelings of n = n_1 + ... + n_k observations into ordered
//! groups form a mixed-radix space of nested combinations, ordered by the
//! combinatorial number system (lexicographic combinations). A balanced
//! two-group two-sided statistic collapses mirror-image assignments; that
//! space is halved and the representative keeping observation 0 in the first
//! group is the one enumerated.

use serde::Serialize;
use thiserror::Error;

/// Counts above this are no longer exactly representable as f64; the exact-p
/// machinery downstream degrades to the upper bound past it.
pub const OVERFLOW_THRESHOLD: u64 = 1 << 53;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    OneSided,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CombinatoricsError {
    #[error("need at least 2 groups, got {got}")]
    TooFewGroups { got: usize },
    #[error("group {group} is empty")]
    EmptyGroup { group: usize },
    #[error("two-sided statistics over 3+ groups with repeated sizes have an unspecified collision structure")]
    TwoSidedRepeatedSizes,
    #[error("assignment space too large for exact enumeration")]
    SpaceOverflow,
    #[error("rank {rank} out of range for a space of {total}")]
    RankOutOfRange { rank: u64, total: u64 },
    #[error("assignment has {got} labels, expected {expected}")]
    AssignmentLength { expected: usize, got: usize },
    #[error("label {label} out of range for {groups} groups")]
    LabelOutOfRange { label: usize, groups: usize },
    #[error("assignment group counts do not match the configuration")]
    WrongGroupCounts,
}

/// Group sizes plus the sidedness of the statistic they will feed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupConfig {
    sizes: Vec<usize>,
    sidedness: Sidedness,
}

impl GroupConfig {
    pub fn new(sizes: Vec<usize>, sidedness: Sidedness) -> Result<Self, CombinatoricsError> {
        if sizes.len() < 2 {
            return Err(CombinatoricsError::TooFewGroups { got: sizes.len() });
        }
        if let Some(group) = sizes.iter().position(|&n| n == 0) {
            return Err(CombinatoricsError::EmptyGroup { group });
        }
        Ok(Self { sizes, sidedness })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn sidedness(&self) -> Sidedness {
        self.sidedness
    }

    pub fn n_observations(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Mirror-image assignments coincide: balanced two-group, two-sided.
    fn halved(&self) -> bool {
        self.sidedness == Sidedness::TwoSided
            && self.sizes.len() == 2
            && self.sizes[0] == self.sizes[1]
    }
}

/// Size of an assignment space: the exact count when it fits a u64, plus a
/// flag set once the count exceeds [`OVERFLOW_THRESHOLD`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpaceCount {
    total: Option<u64>,
    overflowed: bool,
}

impl SpaceCount {
    pub fn total(&self) -> Option<u64> {
        self.total
    }

    pub fn is_overflowed(&self) -> bool {
        self.overflowed
    }
}

/// Number of distinct achievable statistic values for the configuration.
pub fn count_space(config: &GroupConfig) -> Result<SpaceCount, CombinatoricsError> {
    if config.sidedness == Sidedness::TwoSided && config.sizes.len() >= 3 {
        let mut sorted = config.sizes.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(CombinatoricsError::TwoSidedRepeatedSizes);
        }
    }
    let raw = multinomial_u128(&config.sizes);
    let exact = match raw {
        Some(t) if config.halved() => Some(t / 2),
        other => other,
    };
    Ok(match exact.map(u64::try_from) {
        Some(Ok(total)) => SpaceCount {
            total: Some(total),
            overflowed: total > OVERFLOW_THRESHOLD,
        },
        _ => SpaceCount {
            total: None,
            overflowed: true,
        },
    })
}

/// The rank-th assignment in canonical order, as a per-observation label
/// vector. Requires a non-overflowed space and 0 <= rank < total.
pub fn unrank(config: &GroupConfig, rank: u64) -> Result<Vec<usize>, CombinatoricsError> {
    let sc = count_space(config)?;
    if sc.overflowed {
        return Err(CombinatoricsError::SpaceOverflow);
    }
    let total = sc.total.expect("non-overflowed count is exact");
    if rank >= total {
        return Err(CombinatoricsError::RankOutOfRange { rank, total });
    }
    let n = config.n_observations();
    let suffix = suffix_products(&config.sizes, n);
    let mut available: Vec<usize> = (0..n).collect();
    let mut labels = vec![0usize; n];
    let mut r = rank as u128;
    for (j, &nj) in config.sizes.iter().enumerate() {
        let digit = r / suffix[j];
        r %= suffix[j];
        let combo = unrank_combination(available.len(), nj, digit);
        for &pos in combo.iter().rev() {
            let obs = available.remove(pos);
            labels[obs] = j;
        }
    }
    Ok(labels)
}

/// Inverse of [`unrank`]; mirror-image assignments of a halved space rank to
/// their canonical representative.
pub fn rank(config: &GroupConfig, assignment: &[usize]) -> Result<u64, CombinatoricsError> {
    let sc = count_space(config)?;
    if sc.overflowed {
        return Err(CombinatoricsError::SpaceOverflow);
    }
    let n = config.n_observations();
    if assignment.len() != n {
        return Err(CombinatoricsError::AssignmentLength {
            expected: n,
            got: assignment.len(),
        });
    }
    let k = config.sizes.len();
    let mut counts = vec![0usize; k];
    for &label in assignment {
        if label >= k {
            return Err(CombinatoricsError::LabelOutOfRange { label, groups: k });
        }
        counts[label] += 1;
    }
    if counts != config.sizes {
        return Err(CombinatoricsError::WrongGroupCounts);
    }

    let flipped;
    let assignment = if config.halved() && assignment[0] != 0 {
        flipped = assignment.iter().map(|&l| 1 - l).collect::<Vec<_>>();
        &flipped[..]
    } else {
        assignment
    };

    let suffix = suffix_products(&config.sizes, n);
    let mut available: Vec<usize> = (0..n).collect();
    let mut r: u128 = 0;
    for j in 0..k {
        let positions: Vec<usize> = available
            .iter()
            .enumerate()
            .filter(|&(_, &obs)| assignment[obs] == j)
            .map(|(pos, _)| pos)
            .collect();
        r += rank_combination(available.len(), &positions) * suffix[j];
        for &pos in positions.iter().rev() {
            available.remove(pos);
        }
    }
    Ok(r as u64)
}

/// suffix[j] = product of the combination radices of groups after j; the
/// mixed-radix place value of group j's digit.
fn suffix_products(sizes: &[usize], n: usize) -> Vec<u128> {
    let k = sizes.len();
    let mut radices = Vec::with_capacity(k);
    let mut remaining = n as u64;
    for &nj in sizes {
        radices.push(binom_u128(remaining, nj as u64).expect("space already bounded"));
        remaining -= nj as u64;
    }
    let mut suffix = vec![1u128; k];
    for j in (0..k - 1).rev() {
        suffix[j] = suffix[j + 1] * radices[j + 1];
    }
    suffix
}

/// Exact binomial coefficient, None on u128 overflow. The running product
/// multiplies before it divides, so values near u128::MAX can report overflow
/// early; everything up to u64::MAX computes exactly, which is all the space
/// counting needs.
fn binom_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k {
        // c * (n-k+i) / i is the exact partial coefficient C(n-k+i, i)
        c = c.checked_mul((n - k + i) as u128)? / (i as u128);
    }
    Some(c)
}

fn multinomial_u128(sizes: &[usize]) -> Option<u128> {
    let mut total: u128 = 1;
    let mut cum: u64 = 0;
    for &nj in sizes {
        cum = cum.checked_add(nj as u64)?;
        total = total.checked_mul(binom_u128(cum, nj as u64)?)?;
    }
    Some(total)
}

/// The rank-th k-subset of {0..n-1} in lexicographic order.
fn unrank_combination(n: usize, k: usize, mut r: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut k_left = k as u64;
    let mut x = 0usize;
    while k_left > 0 {
        debug_assert!(x < n);
        let c = binom_u128((n - 1 - x) as u64, k_left - 1).expect("bounded");
        if r < c {
            out.push(x);
            k_left -= 1;
        } else {
            r -= c;
        }
        x += 1;
    }
    out
}

/// Lexicographic rank of an ascending k-subset of {0..n-1}.
fn rank_combination(n: usize, positions: &[usize]) -> u128 {
    let k = positions.len();
    let mut r: u128 = 0;
    let mut next = 0usize;
    for (i, &pos) in positions.iter().enumerate() {
        for x in next..pos {
            r += binom_u128((n - 1 - x) as u64, (k - 1 - i) as u64).expect("bounded");
        }
        next = pos + 1;
    }
    r
}
