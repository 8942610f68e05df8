//! Command-line front end: exact p-values for a reported exceedance count
//! (`permp`), relabeling-space counting (`count`), permutation tests on CSV
//! data (`test`), and the calibration experiments (`simulate`).
//!
//! Exit codes: 0 success, 2 validation or parse failure, 3 degenerate
//! statistic (zero pooled variance in the observed data).

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use permtest::combinatorics::CombinatoricsError;
use permtest::engine::{EngineError, DEFAULT_ENUMERATION_BUDGET};
use permtest::pvalue::PValueError;
use permtest::sim::{
    fwer_demo, power_compare, ratio_curve, type1_staircase, FwerMode, SimConfig, SimError,
};
use permtest::{
    count_space, exhaustive_test_with_budget, p_exact, read_csv, sample_with_replacement,
    sample_without_replacement, GroupConfig, Method, NullSpace, Sidedness, StatKind,
    StatisticSpec, TestOutcome,
};

#[derive(Parser)]
#[command(
    name = "permtest",
    version,
    about = "Exact p-values for Monte Carlo and permutation tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact p-value for b exceedances in m draws over a given null space
    Permp(PermpArgs),
    /// Count the distinct group relabelings for a size configuration
    Count(CountArgs),
    /// Run a permutation test on a CSV file with value,group columns
    Test(TestArgs),
    /// Run a calibration experiment and emit its table
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SidedArg {
    One,
    Two,
}

impl From<SidedArg> for Sidedness {
    fn from(s: SidedArg) -> Self {
        match s {
            SidedArg::One => Sidedness::OneSided,
            SidedArg::Two => Sidedness::TwoSided,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Plain,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatArg {
    DiffOfMeans,
    TwoSampleT,
}

impl From<StatArg> for StatKind {
    fn from(s: StatArg) -> Self {
        match s {
            StatArg::DiffOfMeans => StatKind::DiffOfMeans,
            StatArg::TwoSampleT => StatKind::TwoSampleT,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exhaustive,
    WithoutReplacement,
    WithReplacement,
}

#[derive(Clone, Copy, ValueEnum)]
enum FwerModeArg {
    TwoStage,
    FullData,
}

#[derive(Args)]
#[command(group(ArgGroup::new("space").required(true).args(["sizes", "mt", "mt_infinite"])))]
struct PermpArgs {
    /// Exceedance count: draws at least as extreme as the observed statistic
    #[arg(long)]
    b: u64,
    /// Number of draws
    #[arg(long)]
    m: u64,
    /// Comma-separated group sizes; the space of distinct relabelings is
    /// counted from these
    #[arg(long)]
    sizes: Option<String>,
    /// Number of distinct non-observed statistic values, when known directly
    #[arg(long)]
    mt: Option<u64>,
    /// Treat the space of distinct statistics as unbounded
    #[arg(long)]
    mt_infinite: bool,
    /// Sidedness of the test; affects the space counted from --sizes
    #[arg(long, value_enum, default_value_t = SidedArg::One)]
    sided: SidedArg,
    /// plain prints 9-decimal key=value lines; json prints the full report
    #[arg(long, value_enum, default_value_t = FormatArg::Plain)]
    format: FormatArg,
}

#[derive(Args)]
struct CountArgs {
    /// Comma-separated group sizes, e.g. 5,5
    #[arg(long)]
    sizes: String,
    #[arg(long, value_enum, default_value_t = SidedArg::One)]
    sided: SidedArg,
}

#[derive(Args)]
struct TestArgs {
    /// CSV file with a header and value,group columns
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = StatArg::TwoSampleT)]
    statistic: StatArg,
    #[arg(long, value_enum, default_value_t = SidedArg::One)]
    sided: SidedArg,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Number of sampled relabelings (sampled modes only)
    #[arg(long)]
    m: Option<u64>,
    /// RNG seed for sampled modes; generated and reported when absent
    #[arg(long)]
    seed: Option<u64>,
    /// Cap on the full-enumeration size (exhaustive mode only)
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
    budget: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(subcommand)]
    experiment: Experiment,
}

#[derive(Subcommand)]
enum Experiment {
    /// Type-I error of the plug-in rule b/m <= alpha on the grid j/100
    Staircase(StairArgs),
    /// Ratio of the (b+1)/(m+1) bound to the exact p-value for every b
    Ratio(RatioArgs),
    /// Familywise-error demonstration across many simultaneous null tests
    Fwer(FwerArgs),
    /// Power comparison across sampling modes on shifted-normal data
    Power(PowerArgs),
}

#[derive(Args)]
struct StairArgs {
    /// Draws per replicate
    #[arg(long)]
    m: u64,
    #[arg(long)]
    replicates: u64,
    /// Master seed; generated and reported when absent
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Write the CSV table here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RatioArgs {
    /// Draws per test
    #[arg(long)]
    m: u64,
    /// Number of distinct non-observed statistic values
    #[arg(long)]
    mt: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FwerArgs {
    /// Simultaneous null tests per run
    #[arg(long)]
    genes: usize,
    /// Draws per test
    #[arg(long)]
    m: u64,
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// Familywise level for the corrections
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, value_enum, default_value_t = FwerModeArg::TwoStage)]
    mode: FwerModeArg,
    /// Group sizes for full-data mode, e.g. 4,4
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PowerArgs {
    /// Comma-separated group sizes, e.g. 5,5
    #[arg(long)]
    sizes: String,
    /// Sampled relabelings per replicate
    #[arg(long)]
    m: u64,
    #[arg(long)]
    replicates: u64,
    /// Mean shift applied to the first group
    #[arg(long)]
    effect: f64,
    /// Rejection level
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    msg: String,
}

fn fail2(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        msg: msg.into(),
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = if matches!(e, EngineError::DegenerateStatistic) {
            3
        } else {
            2
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<CombinatoricsError> for Failure {
    fn from(e: CombinatoricsError) -> Self {
        fail2(e.to_string())
    }
}

impl From<PValueError> for Failure {
    fn from(e: PValueError) -> Self {
        fail2(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Engine(inner) => inner.into(),
            other => fail2(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Permp(a) => cmd_permp(&a),
        Command::Count(a) => cmd_count(&a),
        Command::Test(a) => cmd_test(&a),
        Command::Simulate(a) => match a.experiment {
            Experiment::Staircase(s) => cmd_staircase(&s),
            Experiment::Ratio(r) => cmd_ratio(&r),
            Experiment::Fwer(f) => cmd_fwer(&f),
            Experiment::Power(p) => cmd_power(&p),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn parse_sizes(raw: &str) -> Result<Vec<usize>, Failure> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| fail2(format!("bad group size {part:?} in --sizes")))
        })
        .collect()
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::ExactSum => "exact_sum",
        Method::IntegralApprox => "integral_approx",
        Method::UpperBoundLimit => "upper_bound_limit",
    }
}

fn cmd_permp(a: &PermpArgs) -> Result<(), Failure> {
    let outcome = TestOutcome::new(a.b, a.m)?;
    let space = if a.mt_infinite {
        NullSpace::Infinite
    } else if let Some(mt) = a.mt {
        NullSpace::Finite(mt)
    } else {
        let sizes = parse_sizes(a.sizes.as_deref().expect("clap group"))?;
        let config = GroupConfig::new(sizes, a.sided.into())?;
        NullSpace::from_space_count(&count_space(&config)?)
    };
    let report = p_exact(&outcome, &space);
    match a.format {
        FormatArg::Plain => {
            println!("p_hat={:.9}", report.p_hat);
            println!("p_upper={:.9}", report.p_upper);
            println!("p_exact={:.9}", report.p_exact);
            println!("abs_error_bound={:.9}", report.abs_error_bound);
            println!("method={}", method_name(report.method));
        }
        FormatArg::Json => {
            println!("{}", serde_json::to_string_pretty(&report).expect("plain data"));
        }
    }
    Ok(())
}

fn cmd_count(a: &CountArgs) -> Result<(), Failure> {
    let sizes = parse_sizes(&a.sizes)?;
    let config = GroupConfig::new(sizes, a.sided.into())?;
    let count = count_space(&config)?;
    match count.total() {
        Some(total) => println!("total={total} overflowed={}", count.is_overflowed()),
        None => println!("total=none overflowed=true"),
    }
    Ok(())
}

fn cmd_test(a: &TestArgs) -> Result<(), Failure> {
    let file = File::open(&a.data)
        .map_err(|e| fail2(format!("cannot open {}: {e}", a.data.display())))?;
    let (dataset, _group_names) = read_csv(file)?;
    let spec = StatisticSpec {
        kind: a.statistic.into(),
        sidedness: a.sided.into(),
    };
    let result = match a.mode {
        ModeArg::Exhaustive => {
            if a.m.is_some() {
                return Err(fail2("--m is not used with --mode exhaustive"));
            }
            if a.seed.is_some() {
                return Err(fail2("--seed is not used with --mode exhaustive"));
            }
            exhaustive_test_with_budget(&dataset, &spec, a.budget)?
        }
        ModeArg::WithoutReplacement | ModeArg::WithReplacement => {
            let m = a.m.ok_or_else(|| fail2("--m is required for sampled modes"))?;
            let seed = a.seed.unwrap_or_else(rand::random);
            match a.mode {
                ModeArg::WithoutReplacement => sample_without_replacement(&dataset, &spec, m, seed)?,
                _ => sample_with_replacement(&dataset, &spec, m, seed)?,
            }
        }
    };
    if result.tied_values {
        eprintln!("warning: tied values in the data; tied permuted statistics count as exceedances");
    }
    println!("{}", serde_json::to_string_pretty(&result).expect("plain data"));
    Ok(())
}

/// Table goes to --out (summary on stdout) or to stdout (summary on stderr),
/// so piped output is always just the table.
fn emit(out: Option<&Path>, table: &str, summary: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            std::fs::write(path, table)
                .map_err(|e| fail2(format!("cannot write {}: {e}", path.display())))?;
            println!("{summary}");
        }
        None => {
            print!("{table}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn cmd_staircase(a: &StairArgs) -> Result<(), Failure> {
    let seed = a.seed.unwrap_or_else(rand::random);
    let cfg = SimConfig {
        replicates: a.replicates,
        m: a.m,
        alpha_grid: (1..=99).map(|j| j as f64 / 100.0).collect(),
        genes: 1,
        effect_size: 0.0,
        seed,
    };
    let report = type1_staircase(&cfg, a.threads)?;
    let mut table = String::from("alpha,theoretical,empirical,se,empirical_upper\n");
    let mut max_dev = 0.0f64;
    for p in &report.points {
        max_dev = max_dev.max((p.empirical - p.theoretical).abs());
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            p.alpha, p.theoretical, p.empirical, p.se, p.empirical_upper
        ));
    }
    let summary = format!(
        "experiment=staircase m={} replicates={} seed={seed} points={} max_abs_dev={max_dev:.6}",
        a.m,
        a.replicates,
        report.points.len()
    );
    emit(a.out.as_deref(), &table, &summary)
}

fn cmd_ratio(a: &RatioArgs) -> Result<(), Failure> {
    let report = ratio_curve(a.m, a.mt)?;
    let mut table = String::from("b,p_upper,p_exact,ratio\n");
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = 0.0f64;
    for r in &report.rows {
        min_ratio = min_ratio.min(r.ratio);
        max_ratio = max_ratio.max(r.ratio);
        table.push_str(&format!(
            "{},{},{},{}\n",
            r.n_exceed, r.p_upper, r.p_exact, r.ratio
        ));
    }
    let summary = format!(
        "experiment=ratio m={} mt={} rows={} min_ratio={min_ratio:.9} max_ratio={max_ratio:.9}",
        a.m,
        a.mt,
        report.rows.len()
    );
    emit(a.out.as_deref(), &table, &summary)
}

fn cmd_fwer(a: &FwerArgs) -> Result<(), Failure> {
    let seed = a.seed.unwrap_or_else(rand::random);
    let mode = match a.mode {
        FwerModeArg::TwoStage => {
            if a.sizes.is_some() {
                return Err(fail2("--sizes is only used with --mode full-data"));
            }
            FwerMode::TwoStage
        }
        FwerModeArg::FullData => {
            let raw = a
                .sizes
                .as_deref()
                .ok_or_else(|| fail2("--sizes is required for --mode full-data"))?;
            FwerMode::FullData {
                sizes: parse_sizes(raw)?,
            }
        }
    };
    let cfg = SimConfig {
        replicates: a.runs,
        m: a.m,
        alpha_grid: vec![a.level],
        genes: a.genes,
        effect_size: 0.0,
        seed,
    };
    let report = fwer_demo(&cfg, &mode, a.threads)?;
    let mut table =
        String::from("run,zero_phat,bonferroni_phat,holm_phat,bonferroni_exact,holm_exact,min_p_exact\n");
    let mut zero_total = 0u64;
    let mut bonf_phat_runs = 0u64;
    let mut bonf_exact_runs = 0u64;
    for r in &report.runs {
        zero_total += r.zero_phat;
        bonf_phat_runs += u64::from(r.bonferroni_phat > 0);
        bonf_exact_runs += u64::from(r.bonferroni_exact > 0);
        table.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.run, r.zero_phat, r.bonferroni_phat, r.holm_phat, r.bonferroni_exact, r.holm_exact,
            r.min_p_exact
        ));
    }
    let summary = format!(
        "experiment=fwer genes={} m={} runs={} level={} seed={seed} mean_zero_phat={:.2} \
         bonferroni_phat_runs={bonf_phat_runs} bonferroni_exact_runs={bonf_exact_runs}",
        a.genes,
        a.m,
        a.runs,
        a.level,
        zero_total as f64 / report.runs.len() as f64
    );
    emit(a.out.as_deref(), &table, &summary)
}

fn cmd_power(a: &PowerArgs) -> Result<(), Failure> {
    let seed = a.seed.unwrap_or_else(rand::random);
    let sizes = parse_sizes(&a.sizes)?;
    let cfg = SimConfig {
        replicates: a.replicates,
        m: a.m,
        alpha_grid: vec![a.alpha],
        genes: 1,
        effect_size: a.effect,
        seed,
    };
    let report = power_compare(&cfg, &sizes, a.threads)?;
    let mut table =
        String::from("alpha,power_wor,se_wor,power_wr,se_wr,power_exhaustive,se_exhaustive\n");
    for p in &report.points {
        table.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.alpha, p.power_wor, p.se_wor, p.power_wr, p.se_wr, p.power_exhaustive,
            p.se_exhaustive
        ));
    }
    let pt = &report.points[0];
    let summary = format!(
        "experiment=power sizes={} m={} replicates={} effect={} alpha={} seed={seed} \
         power_wor={:.4} power_wr={:.4} power_exhaustive={:.4}",
        a.sizes, a.m, a.replicates, a.effect, a.alpha, pt.power_wor, pt.power_wr,
        pt.power_exhaustive
    );
    emit(a.out.as_deref(), &table, &summary)
}
