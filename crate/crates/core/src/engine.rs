//! Runs randomization tests on two-group data.
//!
//! Three drivers share the same exceedance count b = #{draws with a resampled
//! statistic >= the observed one}:
//!
//! * [`exhaustive_test`]: every distinct relabeling except the observed one;
//! * [`sample_without_replacement`]: m distinct relabelings drawn uniformly,
//!   again excluding the observed one, so (b+1)/(m+1) is exact;
//! * [`sample_with_replacement`]: m independent shuffles, which can repeat,
//!   so the report routes through the finite-space exact estimators.
//!
//! Exceedance uses >= on the sided statistic. A resampled split in which
//! every group is internally constant has no t statistic; it counts as an
//! exceedance, which only makes the test more conservative, and the result
//! carries a `tied_values` flag since only tied data can produce one.

use std::collections::HashSet;
use std::io::Read;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::combinatorics::{
    count_space, rank, unrank, CombinatoricsError, GroupConfig, Sidedness, SpaceCount,
};
use crate::pvalue::{p_exact, p_upper, Method, NullSpace, PValueReport, TestOutcome};

/// Largest space [`exhaustive_test`] will enumerate without an explicit
/// budget override.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("values and labels differ in length: {values} vs {labels}")]
    LengthMismatch { values: usize, labels: usize },
    #[error("need at least two groups")]
    TooFewGroups,
    #[error("group {group} has no observations")]
    EmptyGroup { group: usize },
    #[error("value at index {index} is not finite")]
    NonFiniteValue { index: usize },
    #[error("statistic works on exactly two groups, got {got}")]
    StatisticRequiresTwoGroups { got: usize },
    #[error("group {group} has {size} observation(s); the t statistic needs two")]
    GroupTooSmall { group: usize, size: usize },
    #[error("observed statistic is degenerate: no spread within any group")]
    DegenerateStatistic,
    #[error("need at least one draw")]
    NoDraws,
    #[error("requested {requested} distinct relabelings but only {available} exist")]
    NotEnoughPermutations { requested: u64, available: u64 },
    #[error("assignment space too large to enumerate distinct relabelings")]
    UnrankUnavailable,
    #[error("space holds {total} assignments, over the enumeration budget {budget}")]
    BudgetExceeded { total: u64, budget: u64 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv needs the exact header 'value,group'")]
    BadCsvHeader,
    #[error("csv row {row}: cannot parse '{field}' as a number")]
    BadCsvNumber { row: usize, field: String },
    #[error("csv has no data rows")]
    EmptyCsv,
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
}

/// Validated observations: finite values, contiguous group labels 0..k with
/// every group inhabited.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    labels: Vec<usize>,
    group_sizes: Vec<usize>,
    tied: bool,
}

impl Dataset {
    pub fn new(values: Vec<f64>, labels: Vec<usize>) -> Result<Self, EngineError> {
        if values.len() != labels.len() {
            return Err(EngineError::LengthMismatch {
                values: values.len(),
                labels: labels.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(EngineError::NonFiniteValue { index });
        }
        let groups = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
        if groups < 2 {
            return Err(EngineError::TooFewGroups);
        }
        let mut group_sizes = vec![0usize; groups];
        for &l in &labels {
            group_sizes[l] += 1;
        }
        if let Some(group) = group_sizes.iter().position(|&n| n == 0) {
            return Err(EngineError::EmptyGroup { group });
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let tied = sorted.windows(2).any(|w| w[0] == w[1]);
        Ok(Self {
            values,
            labels,
            group_sizes,
            tied,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn has_ties(&self) -> bool {
        self.tied
    }
}

/// Reads `value,group` CSV rows. Group names map to labels in first-appearance
/// order; the returned vector records that mapping.
pub fn read_csv<R: Read>(reader: R) -> Result<(Dataset, Vec<String>), EngineError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?;
    if headers.len() != 2
        || !headers[0].eq_ignore_ascii_case("value")
        || !headers[1].eq_ignore_ascii_case("group")
    {
        return Err(EngineError::BadCsvHeader);
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let raw = &record[0];
        let value: f64 = raw.parse().map_err(|_| EngineError::BadCsvNumber {
            row,
            field: raw.to_string(),
        })?;
        let name = &record[1];
        let label = match names.iter().position(|n| n == name) {
            Some(pos) => pos,
            None => {
                names.push(name.to_string());
                names.len() - 1
            }
        };
        values.push(value);
        labels.push(label);
    }
    if values.is_empty() {
        return Err(EngineError::EmptyCsv);
    }
    let data = Dataset::new(values, labels)?;
    Ok((data, names))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    DiffOfMeans,
    TwoSampleT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StatisticSpec {
    pub kind: StatKind,
    pub sidedness: Sidedness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Exhaustive,
    WithoutReplacement,
    WithReplacement,
}

/// Everything one test run produces. `seed` is None for the deterministic
/// exhaustive driver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermTestResult {
    pub t_obs: f64,
    pub outcome: TestOutcome,
    pub space: NullSpace,
    pub report: PValueReport,
    pub sampling: SamplingMode,
    pub seed: Option<u64>,
    pub tied_values: bool,
}

fn apply_sidedness(raw: f64, sidedness: Sidedness) -> f64 {
    match sidedness {
        Sidedness::OneSided => raw,
        Sidedness::TwoSided => raw.abs(),
    }
}

/// Group sums accumulated in observation order, so a fixed dataset always
/// produces bitwise-identical statistics. None means zero pooled variance.
fn raw_two_group_statistic(values: &[f64], labels: &[usize], kind: StatKind) -> Option<f64> {
    let mut sum = [0.0f64; 2];
    let mut n = [0usize; 2];
    for (v, &l) in values.iter().zip(labels) {
        sum[l] += v;
        n[l] += 1;
    }
    let mean = [sum[0] / n[0] as f64, sum[1] / n[1] as f64];
    match kind {
        StatKind::DiffOfMeans => Some(mean[0] - mean[1]),
        StatKind::TwoSampleT => {
            let mut ss = 0.0;
            for (v, &l) in values.iter().zip(labels) {
                let d = v - mean[l];
                ss += d * d;
            }
            if ss == 0.0 {
                return None;
            }
            let pooled = ss / (n[0] + n[1] - 2) as f64;
            let se = (pooled * (1.0 / n[0] as f64 + 1.0 / n[1] as f64)).sqrt();
            Some((mean[0] - mean[1]) / se)
        }
    }
}

fn validate_spec(data: &Dataset, spec: &StatisticSpec) -> Result<(), EngineError> {
    let k = data.group_sizes.len();
    if k != 2 {
        return Err(EngineError::StatisticRequiresTwoGroups { got: k });
    }
    if spec.kind == StatKind::TwoSampleT {
        if let Some((group, &size)) = data
            .group_sizes
            .iter()
            .enumerate()
            .find(|&(_, &size)| size < 2)
        {
            return Err(EngineError::GroupTooSmall { group, size });
        }
    }
    Ok(())
}

/// The sided observed statistic, after validating the data fit the kind.
pub fn compute_statistic(data: &Dataset, spec: &StatisticSpec) -> Result<f64, EngineError> {
    validate_spec(data, spec)?;
    let raw = raw_two_group_statistic(&data.values, &data.labels, spec.kind)
        .ok_or(EngineError::DegenerateStatistic)?;
    Ok(apply_sidedness(raw, spec.sidedness))
}

fn exceeds(values: &[f64], labels: &[usize], spec: &StatisticSpec, t_obs: f64) -> bool {
    match raw_two_group_statistic(values, labels, spec.kind) {
        Some(raw) => apply_sidedness(raw, spec.sidedness) >= t_obs,
        None => true,
    }
}

fn space_for(data: &Dataset, spec: &StatisticSpec) -> Result<(GroupConfig, SpaceCount), EngineError> {
    let config = GroupConfig::new(data.group_sizes.clone(), spec.sidedness)?;
    let count = count_space(&config)?;
    Ok((config, count))
}

/// Without-replacement and exhaustive draws are distinct relabelings, where
/// (b+1)/(m+1) is the exact p-value, not a bound.
fn ratio_report(outcome: &TestOutcome) -> PValueReport {
    let pu = p_upper(outcome);
    PValueReport {
        p_hat: outcome.n_exceed() as f64 / outcome.n_draws() as f64,
        p_upper: pu,
        p_exact: pu,
        abs_error_bound: 0.0,
        method: Method::UpperBoundLimit,
    }
}

pub fn exhaustive_test(data: &Dataset, spec: &StatisticSpec) -> Result<PermTestResult, EngineError> {
    exhaustive_test_with_budget(data, spec, DEFAULT_ENUMERATION_BUDGET)
}

/// Enumerates every relabeling except the observed one.
pub fn exhaustive_test_with_budget(
    data: &Dataset,
    spec: &StatisticSpec,
    budget: u64,
) -> Result<PermTestResult, EngineError> {
    let t_obs = compute_statistic(data, spec)?;
    let (config, count) = space_for(data, spec)?;
    if count.is_overflowed() {
        return Err(EngineError::UnrankUnavailable);
    }
    let total = count.total().expect("not overflowed");
    if total > budget {
        return Err(EngineError::BudgetExceeded { total, budget });
    }
    if total <= 1 {
        return Err(EngineError::NotEnoughPermutations {
            requested: 1,
            available: 0,
        });
    }
    let r_obs = rank(&config, &data.labels)?;
    let mut b = 0u64;
    for r in 0..total {
        if r == r_obs {
            continue;
        }
        let labels = unrank(&config, r)?;
        if exceeds(&data.values, &labels, spec, t_obs) {
            b += 1;
        }
    }
    let outcome = TestOutcome::new(b, total - 1).expect("b <= total - 1");
    Ok(PermTestResult {
        t_obs,
        outcome,
        space: NullSpace::from_space_count(&count),
        report: ratio_report(&outcome),
        sampling: SamplingMode::Exhaustive,
        seed: None,
        tied_values: data.tied,
    })
}

/// n_draws distinct relabelings, uniform without replacement, excluding the
/// observed one.
pub fn sample_without_replacement(
    data: &Dataset,
    spec: &StatisticSpec,
    n_draws: u64,
    seed: u64,
) -> Result<PermTestResult, EngineError> {
    let t_obs = compute_statistic(data, spec)?;
    let (config, count) = space_for(data, spec)?;
    if count.is_overflowed() {
        return Err(EngineError::UnrankUnavailable);
    }
    let total = count.total().expect("not overflowed");
    let available = total - 1;
    if n_draws == 0 {
        return Err(EngineError::NoDraws);
    }
    if n_draws > available {
        return Err(EngineError::NotEnoughPermutations {
            requested: n_draws,
            available,
        });
    }
    let r_obs = rank(&config, &data.labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = 0u64;
    for r in floyd_sample(&mut rng, available, n_draws) {
        // shift the sampled rank past the observed one: uniform over the rest
        let r = if r >= r_obs { r + 1 } else { r };
        let labels = unrank(&config, r)?;
        if exceeds(&data.values, &labels, spec, t_obs) {
            b += 1;
        }
    }
    let outcome = TestOutcome::new(b, n_draws).expect("b <= n_draws");
    Ok(PermTestResult {
        t_obs,
        outcome,
        space: NullSpace::from_space_count(&count),
        report: ratio_report(&outcome),
        sampling: SamplingMode::WithoutReplacement,
        seed: Some(seed),
        tied_values: data.tied,
    })
}

/// n_draws independent uniform shuffles of the labels; draws can repeat, so
/// the p-value report routes through the exact estimators for the counted
/// space (or the upper-bound limit when the count overflowed).
pub fn sample_with_replacement(
    data: &Dataset,
    spec: &StatisticSpec,
    n_draws: u64,
    seed: u64,
) -> Result<PermTestResult, EngineError> {
    let t_obs = compute_statistic(data, spec)?;
    let (_, count) = space_for(data, spec)?;
    if n_draws == 0 {
        return Err(EngineError::NoDraws);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = data.labels.clone();
    let mut b = 0u64;
    for _ in 0..n_draws {
        labels.shuffle(&mut rng);
        if exceeds(&data.values, &labels, spec, t_obs) {
            b += 1;
        }
    }
    let outcome = TestOutcome::new(b, n_draws).expect("b <= n_draws");
    let space = NullSpace::from_space_count(&count);
    Ok(PermTestResult {
        t_obs,
        outcome,
        space,
        report: p_exact(&outcome, &space),
        sampling: SamplingMode::WithReplacement,
        seed: Some(seed),
        tied_values: data.tied,
    })
}

/// k distinct values uniform over 0..n by Floyd's algorithm: O(k) work and
/// memory no matter how large n is.
fn floyd_sample(rng: &mut ChaCha8Rng, n: u64, k: u64) -> Vec<u64> {
    debug_assert!(k <= n);
    let mut seen = HashSet::with_capacity(k as usize);
    let mut out = Vec::with_capacity(k as usize);
    for j in (n - k)..n {
        let t = rng.gen_range(0..=j);
        let pick = if seen.contains(&t) { j } else { t };
        seen.insert(pick);
        out.push(pick);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floyd_draws_are_distinct_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(n, k) in &[(10u64, 3u64), (251, 100), (251, 251), (1, 1), (7, 6)] {
            let s = floyd_sample(&mut rng, n, k);
            assert_eq!(s.len(), k as usize);
            let set: HashSet<u64> = s.iter().copied().collect();
            assert_eq!(set.len(), k as usize, "n={n} k={k}");
            assert!(s.iter().all(|&x| x < n));
        }
    }

    #[test]
    fn floyd_with_k_equal_n_is_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = floyd_sample(&mut rng, 40, 40);
        s.sort_unstable();
        let want: Vec<u64> = (0..40).collect();
        assert_eq!(s, want);
    }

    #[test]
    fn floyd_is_roughly_uniform() {
        // 3000 samples of 2 from 6: each value appears ~1000 times
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0u32; 6];
        for _ in 0..3000 {
            for x in floyd_sample(&mut rng, 6, 2) {
                counts[x as usize] += 1;
            }
        }
        for (x, &c) in counts.iter().enumerate() {
            assert!((800..1200).contains(&c), "value {x} appeared {c} times");
        }
    }

    #[test]
    fn degenerate_permuted_split_counts_as_exceedance() {
        // [1,1,2,2] split as {1,1},{2,2} has zero within-group spread
        let values = [1.0, 1.0, 2.0, 2.0];
        assert_eq!(
            raw_two_group_statistic(&values, &[0, 0, 1, 1], StatKind::TwoSampleT),
            None
        );
        let spec = StatisticSpec {
            kind: StatKind::TwoSampleT,
            sidedness: Sidedness::TwoSided,
        };
        assert!(exceeds(&values, &[0, 0, 1, 1], &spec, 10.0));
    }

    #[test]
    fn observed_order_of_groups_sets_the_sign() {
        let d = Dataset::new(vec![5.0, 1.0], vec![0, 1]).unwrap();
        let spec = StatisticSpec {
            kind: StatKind::DiffOfMeans,
            sidedness: Sidedness::OneSided,
        };
        assert_eq!(compute_statistic(&d, &spec).unwrap(), 4.0);
    }
}
