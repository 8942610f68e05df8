//! Simulation experiments that check the calibration properties empirically:
//! the exact type-I-error staircase of the plug-in estimate, the inflation
//! ratio of the never-zero ratio estimate over the exact p-value, familywise
//! error behavior across many simultaneous tests, and a three-arm power
//! comparison of the samplers.
//!
//! Every experiment derives one ChaCha substream per replicate (or per run)
//! from the base seed, and threads only partition replicate ranges, so
//! results are bitwise independent of the thread count.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::combinatorics::{CombinatoricsError, Sidedness};
use crate::engine::{
    exhaustive_test, sample_with_replacement, sample_without_replacement, Dataset, EngineError,
    StatKind, StatisticSpec,
};
use crate::pvalue::{p_exact, type1_rate, NullSpace, PValueError, TestOutcome};
use crate::special::reg_gamma_upper;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("alpha grid must be strictly increasing inside (0, 1)")]
    BadAlphaGrid,
    #[error("need at least one replicate")]
    ZeroReplicates,
    #[error("need at least one gene")]
    ZeroGenes,
    #[error("effect size must be nonnegative")]
    NegativeEffect,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error(transparent)]
    PValue(#[from] PValueError),
}

/// Shared experiment parameters; each experiment reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub replicates: u64,
    pub m: u64,
    pub alpha_grid: Vec<f64>,
    pub genes: usize,
    pub effect_size: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StairPoint {
    pub alpha: f64,
    pub theoretical: f64,
    pub empirical: f64,
    pub se: f64,
    /// Rejection rate of the never-zero ratio estimate at the same level.
    pub empirical_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaircaseReport {
    pub m: u64,
    pub replicates: u64,
    pub points: Vec<StairPoint>,
    /// Histogram of the exceedance count b over all replicates (length m+1).
    pub phat_counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioRow {
    pub n_exceed: u64,
    pub p_upper: f64,
    pub p_exact: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub m: u64,
    pub m_t: u64,
    pub rows: Vec<RatioRow>,
}

/// How the familywise-error experiment generates each gene's test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum FwerMode {
    /// Null p-value drawn uniformly, exceedances drawn binomially: the
    /// two-stage model of a test whose null space is effectively unbounded.
    TwoStage,
    /// Full data pipeline: normal null data of the given group sizes, tested
    /// by with-replacement sampling.
    FullData { sizes: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FwerRun {
    pub run: u64,
    /// Genes whose plug-in estimate b/m was exactly zero.
    pub zero_phat: u64,
    pub bonferroni_phat: u64,
    pub holm_phat: u64,
    pub bonferroni_exact: u64,
    pub holm_exact: u64,
    pub min_p_exact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FwerReport {
    pub genes: usize,
    pub m: u64,
    pub level: f64,
    pub runs: Vec<FwerRun>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerPoint {
    pub alpha: f64,
    pub power_wor: f64,
    pub se_wor: f64,
    pub power_wr: f64,
    pub se_wr: f64,
    pub power_exhaustive: f64,
    pub se_exhaustive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerReport {
    pub m: u64,
    pub replicates: u64,
    pub effect_size: f64,
    pub sizes: Vec<usize>,
    pub points: Vec<PowerPoint>,
}

fn validate_grid(grid: &[f64]) -> Result<(), SimError> {
    if grid.is_empty() {
        return Err(SimError::BadAlphaGrid);
    }
    let mut last = 0.0;
    for &alpha in grid {
        if !(alpha > last && alpha < 1.0) {
            return Err(SimError::BadAlphaGrid);
        }
        last = alpha;
    }
    Ok(())
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Splits 0..total into contiguous chunks, one thread each, and returns the
/// chunk results in order. Workers derive their randomness from per-index
/// streams, so the chunking never shows in the output.
fn run_chunked<T, F>(total: u64, threads: usize, worker: F) -> Result<Vec<T>, SimError>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<T, SimError> + Sync,
{
    let threads = threads.clamp(1, total.max(1).min(512) as usize);
    if threads == 1 {
        return Ok(vec![worker(0..total)?]);
    }
    let chunk = total.div_ceil(threads as u64);
    let ranges: Vec<Range<u64>> = (0..threads as u64)
        .map(|i| (i * chunk)..((i + 1) * chunk).min(total))
        .filter(|r| r.start < r.end)
        .collect();
    let worker = &worker;
    let results: Vec<Result<T, SimError>> = std::thread::scope(|s| {
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| s.spawn(move || worker(r)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation worker panicked"))
            .collect()
    });
    results.into_iter().collect()
}

/// Type-I-error staircase of the plug-in estimate b/m under the two-stage
/// null model: a uniform null p-value, then binomial exceedances. The
/// empirical rejection rate at each grid level sits on the staircase
/// (floor(m alpha) + 1)/(m + 1), always above alpha, while the never-zero
/// ratio estimate stays at or below it.
pub fn type1_staircase(cfg: &SimConfig, threads: usize) -> Result<StaircaseReport, SimError> {
    validate_grid(&cfg.alpha_grid)?;
    if cfg.replicates == 0 {
        return Err(SimError::ZeroReplicates);
    }
    let m = cfg.m;
    let hists = run_chunked(cfg.replicates, threads, |range| {
        let mut hist = vec![0u64; m as usize + 1];
        for rep in range {
            let mut rng = stream_rng(cfg.seed, rep);
            let p_inf: f64 = rng.gen();
            let b = Binomial::new(m, p_inf)
                .expect("uniform draw is a probability")
                .sample(&mut rng);
            hist[b as usize] += 1;
        }
        Ok(hist)
    })?;
    let mut phat_counts = vec![0u64; m as usize + 1];
    for hist in hists {
        for (total, part) in phat_counts.iter_mut().zip(hist) {
            *total += part;
        }
    }

    let n = cfg.replicates as f64;
    let points = cfg
        .alpha_grid
        .iter()
        .map(|&alpha| {
            let mut c_plug = 0u64;
            let mut c_upper = 0u64;
            for (b, &count) in phat_counts.iter().enumerate() {
                if b as f64 / m as f64 <= alpha {
                    c_plug += count;
                }
                if (b as f64 + 1.0) / (m as f64 + 1.0) <= alpha {
                    c_upper += count;
                }
            }
            let empirical = c_plug as f64 / n;
            StairPoint {
                alpha,
                theoretical: type1_rate(m, alpha),
                empirical,
                se: (empirical * (1.0 - empirical) / n).sqrt(),
                empirical_upper: c_upper as f64 / n,
            }
        })
        .collect();

    Ok(StaircaseReport {
        m,
        replicates: cfg.replicates,
        points,
        phat_counts,
    })
}

/// Ratio of the never-zero estimate (b+1)/(m+1) to the exact p-value, for
/// every exceedance count b over a space of m_t + 1 assignments. The ratio
/// exceeds 1 everywhere except the saturated row b = m.
pub fn ratio_curve(m: u64, m_t: u64) -> Result<RatioReport, SimError> {
    let space = NullSpace::Finite(m_t);
    let mut rows = Vec::with_capacity(m as usize + 1);
    for b in 0..=m {
        let outcome = TestOutcome::new(b, m)?;
        let report = p_exact(&outcome, &space);
        rows.push(RatioRow {
            n_exceed: b,
            p_upper: report.p_upper,
            p_exact: report.p_exact,
            ratio: report.p_upper / report.p_exact,
        });
    }
    Ok(RatioReport { m, m_t, rows })
}

/// Count of hypotheses with p <= level/n.
pub fn bonferroni_rejections(ps: &[f64], level: f64) -> usize {
    if ps.is_empty() {
        return 0;
    }
    let cutoff = level / ps.len() as f64;
    ps.iter().filter(|&&p| p <= cutoff).count()
}

/// Step-down count: sort ascending, reject while p_(i) <= level/(n-i), stop
/// at the first survivor.
pub fn holm_rejections(ps: &[f64], level: f64) -> usize {
    let n = ps.len();
    let mut sorted = ps.to_vec();
    sorted.sort_by(f64::total_cmp);
    for (i, &p) in sorted.iter().enumerate() {
        if p > level / (n - i) as f64 {
            return i;
        }
    }
    n
}

/// Familywise-error experiment: many simultaneous null tests per run, with
/// multiple-testing corrections applied to the plug-in estimates and to the
/// exact p-values. Plug-in estimates hit zero and sail through any
/// correction; exact p-values are floored at 1/(m+1) and cannot.
pub fn fwer_demo(
    cfg: &SimConfig,
    mode: &FwerMode,
    threads: usize,
) -> Result<FwerReport, SimError> {
    validate_grid(&cfg.alpha_grid)?;
    if cfg.replicates == 0 {
        return Err(SimError::ZeroReplicates);
    }
    if cfg.genes == 0 {
        return Err(SimError::ZeroGenes);
    }
    let level = cfg.alpha_grid[0];
    let chunks = run_chunked(cfg.replicates, threads, |range| {
        let mut runs = Vec::with_capacity((range.end - range.start) as usize);
        for run in range {
            runs.push(fwer_run(cfg, mode, level, run)?);
        }
        Ok(runs)
    })?;
    Ok(FwerReport {
        genes: cfg.genes,
        m: cfg.m,
        level,
        runs: chunks.into_iter().flatten().collect(),
    })
}

fn fwer_run(cfg: &SimConfig, mode: &FwerMode, level: f64, run: u64) -> Result<FwerRun, SimError> {
    let mut rng = stream_rng(cfg.seed, run);
    let m = cfg.m;
    let mut phat = Vec::with_capacity(cfg.genes);
    let mut pex = Vec::with_capacity(cfg.genes);
    match mode {
        FwerMode::TwoStage => {
            for _ in 0..cfg.genes {
                let p_inf: f64 = rng.gen();
                let b = Binomial::new(m, p_inf)
                    .expect("uniform draw is a probability")
                    .sample(&mut rng);
                phat.push(b as f64 / m as f64);
                // the two-stage model has no finite assignment space, so the
                // exact p-value is the ratio itself
                let outcome = TestOutcome::new(b, m)?;
                pex.push(p_exact(&outcome, &NullSpace::Infinite).p_exact);
            }
        }
        FwerMode::FullData { sizes } => {
            let spec = StatisticSpec {
                kind: StatKind::TwoSampleT,
                sidedness: Sidedness::OneSided,
            };
            let labels: Vec<usize> = sizes
                .iter()
                .enumerate()
                .flat_map(|(g, &n)| std::iter::repeat(g).take(n))
                .collect();
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            for _ in 0..cfg.genes {
                let values: Vec<f64> = (0..labels.len()).map(|_| normal.sample(&mut rng)).collect();
                let engine_seed: u64 = rng.gen();
                let data = Dataset::new(values, labels.clone())?;
                let result = sample_with_replacement(&data, &spec, m, engine_seed)?;
                phat.push(result.report.p_hat);
                pex.push(result.report.p_exact);
            }
        }
    }
    let zero_phat = phat.iter().filter(|&&p| p == 0.0).count() as u64;
    let min_p_exact = pex.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(FwerRun {
        run,
        zero_phat,
        bonferroni_phat: bonferroni_rejections(&phat, level) as u64,
        holm_phat: holm_rejections(&phat, level) as u64,
        bonferroni_exact: bonferroni_rejections(&pex, level) as u64,
        holm_exact: holm_rejections(&pex, level) as u64,
        min_p_exact,
    })
}

/// Three-arm power comparison on shifted-normal two-group data: distinct
/// relabelings scored by the exact ratio, with-replacement shuffles scored
/// by the exact estimator, and full enumeration as the ceiling.
pub fn power_compare(
    cfg: &SimConfig,
    sizes: &[usize],
    threads: usize,
) -> Result<PowerReport, SimError> {
    validate_grid(&cfg.alpha_grid)?;
    if cfg.replicates == 0 {
        return Err(SimError::ZeroReplicates);
    }
    if cfg.effect_size < 0.0 {
        return Err(SimError::NegativeEffect);
    }
    let spec = StatisticSpec {
        kind: StatKind::TwoSampleT,
        sidedness: Sidedness::OneSided,
    };
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &n)| std::iter::repeat(g).take(n))
        .collect();
    let n_alpha = cfg.alpha_grid.len();
    // counts[alpha_index] = rejections per arm [wor, wr, exhaustive]
    let chunks = run_chunked(cfg.replicates, threads, |range| {
        let shifted = Normal::new(cfg.effect_size, 1.0).expect("finite mean");
        let baseline = Normal::new(0.0, 1.0).expect("unit normal");
        let mut counts = vec![[0u64; 3]; n_alpha];
        for rep in range {
            let mut rng = stream_rng(cfg.seed, rep);
            let values: Vec<f64> = labels
                .iter()
                .map(|&g| {
                    if g == 0 {
                        shifted.sample(&mut rng)
                    } else {
                        baseline.sample(&mut rng)
                    }
                })
                .collect();
            let wor_seed: u64 = rng.gen();
            let wr_seed: u64 = rng.gen();
            let data = Dataset::new(values, labels.clone())?;
            let p_wor = sample_without_replacement(&data, &spec, cfg.m, wor_seed)?
                .report
                .p_exact;
            let p_wr = sample_with_replacement(&data, &spec, cfg.m, wr_seed)?
                .report
                .p_exact;
            let p_ex = exhaustive_test(&data, &spec)?.report.p_exact;
            for (i, &alpha) in cfg.alpha_grid.iter().enumerate() {
                counts[i][0] += u64::from(p_wor <= alpha);
                counts[i][1] += u64::from(p_wr <= alpha);
                counts[i][2] += u64::from(p_ex <= alpha);
            }
        }
        Ok(counts)
    })?;
    let mut totals = vec![[0u64; 3]; n_alpha];
    for chunk in chunks {
        for (total, part) in totals.iter_mut().zip(chunk) {
            for (t, p) in total.iter_mut().zip(part) {
                *t += p;
            }
        }
    }
    let n = cfg.replicates as f64;
    let se = |p: f64| (p * (1.0 - p) / n).sqrt();
    let points = cfg
        .alpha_grid
        .iter()
        .zip(&totals)
        .map(|(&alpha, counts)| {
            let power_wor = counts[0] as f64 / n;
            let power_wr = counts[1] as f64 / n;
            let power_exhaustive = counts[2] as f64 / n;
            PowerPoint {
                alpha,
                power_wor,
                se_wor: se(power_wor),
                power_wr,
                se_wr: se(power_wr),
                power_exhaustive,
                se_exhaustive: se(power_exhaustive),
            }
        })
        .collect();
    Ok(PowerReport {
        m: cfg.m,
        replicates: cfg.replicates,
        effect_size: cfg.effect_size,
        sizes: sizes.to_vec(),
        points,
    })
}

/// Pearson goodness-of-fit statistic of the counts against a uniform
/// expectation, and its chi-square upper tail on len-1 degrees of freedom.
pub fn chi_square_uniform(counts: &[u64]) -> (f64, f64) {
    debug_assert!(counts.len() >= 2);
    let k = counts.len() as f64;
    let n: u64 = counts.iter().sum();
    let expected = n as f64 / k;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let p = reg_gamma_upper((k - 1.0) / 2.0, stat / 2.0);
    (stat, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation_accepts_interior_ascending_grids() {
        assert!(validate_grid(&[0.01, 0.05, 0.5]).is_ok());
        assert!(validate_grid(&[0.5]).is_ok());
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[0.05, 0.05]).is_err());
        assert!(validate_grid(&[-0.1, 0.5]).is_err());
    }

    #[test]
    fn chunking_covers_the_range_exactly_once() {
        for &(total, threads) in &[(10u64, 3usize), (1, 4), (100, 7), (5, 5), (0, 2)] {
            let chunks = run_chunked(total, threads, |r| Ok(r.collect::<Vec<u64>>())).unwrap();
            let flat: Vec<u64> = chunks.into_iter().flatten().collect();
            let want: Vec<u64> = (0..total).collect();
            assert_eq!(flat, want, "total={total} threads={threads}");
        }
    }

    #[test]
    fn substreams_differ_but_reproduce() {
        let mut a = stream_rng(1, 0);
        let mut b = stream_rng(1, 1);
        let mut a2 = stream_rng(1, 0);
        let xa: f64 = a.gen();
        let xb: f64 = b.gen();
        let xa2: f64 = a2.gen();
        assert_ne!(xa, xb);
        assert_eq!(xa, xa2);
    }

    #[test]
    fn ratio_rows_use_the_dispatcher() {
        let report = ratio_curve(10, 40).unwrap();
        assert_eq!(report.rows.len(), 11);
        let row = &report.rows[0];
        let want = p_exact(
            &TestOutcome::new(0, 10).unwrap(),
            &NullSpace::Finite(40),
        );
        assert_eq!(row.p_exact, want.p_exact);
        assert_eq!(row.p_upper, want.p_upper);
    }
}
