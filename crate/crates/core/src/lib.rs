//! Randomization-inference toolkit.
//!
//! Permutation and Monte Carlo tests report a p-value built from `b`, the
//! number of resampled statistics at least as extreme as the observed one,
//! out of `m` draws. The plug-in estimate `b/m` can be zero and inflates the
//! type I error; the quantities in [`pvalue`] never are. [`combinatorics`]
//! counts and enumerates the distinct group relabelings, [`engine`] runs the
//! tests on data, and [`sim`] holds the simulation experiments that check the
//! calibration claims empirically.

pub mod combinatorics;
pub mod engine;
pub mod pvalue;
pub mod sim;

mod quad;
mod special;

pub use combinatorics::{count_space, rank, unrank, GroupConfig, Sidedness, SpaceCount};
pub use engine::{
    compute_statistic, exhaustive_test, exhaustive_test_with_budget, read_csv,
    sample_with_replacement, sample_without_replacement, Dataset, PermTestResult, SamplingMode,
    StatKind, StatisticSpec,
};
pub use pvalue::{
    binomial_cdf, p_exact, p_exact_integral, p_exact_sum, p_upper, type1_rate, Method, NullSpace,
    PValueReport, TestOutcome,
};
