//! Nonparametric significance machinery: two-sided Wilcoxon rank-sum tests
//! between score groups and a Monte Carlo Lilliefors normality test.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::eval::{OutcomeGroup, ScoredSample};
use crate::scores::ScorerSpec;

/// How a p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMethod {
    Exact,
    NormalApprox,
    MonteCarlo,
}

impl TestMethod {
    pub fn name(self) -> &'static str {
        match self {
            TestMethod::Exact => "exact",
            TestMethod::NormalApprox => "normal_approx",
            TestMethod::MonteCarlo => "monte_carlo",
        }
    }
}

/// Outcome of a significance test.
#[derive(Debug, Clone, Copy)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub n1: usize,
    pub n2: usize,
}

/// Method selection for the rank-sum test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    /// Exact enumeration when n1 + n2 <= 16, normal approximation otherwise.
    Auto,
    Exact,
    NormalApprox,
}

const WILCOXON_EXACT_LIMIT: usize = 16;

/// Largest combined size accepted by the exact path; C(20, 10) enumeration
/// is still instant, anything beyond is a caller mistake.
const WILCOXON_EXACT_HARD_CAP: usize = 20;

fn validate_sample(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidInput(format!("sample {name} is empty")));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sample {name} contains a non-finite value"
        )));
    }
    Ok(())
}

/// Midranks of the pooled data, in pooled-sorted order, plus the tie-group
/// sizes.
fn pooled_midranks(xs: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<bool>, Vec<usize>) {
    let mut tagged: Vec<(f64, bool)> = xs
        .iter()
        .map(|&v| (v, true))
        .chain(ys.iter().map(|&v| (v, false)))
        .collect();
    tagged.sort_by(|a, b| a.0.total_cmp(&b.0));

    let n = tagged.len();
    let mut ranks = vec![0.0; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && tagged[j].0 == tagged[i].0 {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for rank in ranks.iter_mut().take(j).skip(i) {
            *rank = midrank;
        }
        tie_sizes.push(j - i);
        i = j;
    }
    let membership = tagged.into_iter().map(|(_, is_x)| is_x).collect();
    (ranks, membership, tie_sizes)
}

/// Count the arrangements (subsets of size `take`) whose U statistic is at
/// least as far from the null mean as `threshold`.
fn count_extreme_arrangements(
    ranks: &[f64],
    start: usize,
    take: usize,
    rank_sum: f64,
    offset: f64,
    mu: f64,
    threshold: f64,
    hits: &mut u64,
    total: &mut u64,
) {
    if take == 0 {
        *total += 1;
        let u = rank_sum - offset;
        // Midranks are dyadic, so this comparison is exact.
        if (u - mu).abs() >= threshold {
            *hits += 1;
        }
        return;
    }
    if ranks.len() - start < take {
        return;
    }
    count_extreme_arrangements(
        ranks,
        start + 1,
        take - 1,
        rank_sum + ranks[start],
        offset,
        mu,
        threshold,
        hits,
        total,
    );
    count_extreme_arrangements(
        ranks, start + 1, take, rank_sum, offset, mu, threshold, hits, total,
    );
}

/// Two-sided Wilcoxon rank-sum test. The statistic is the Mann-Whitney U of
/// `xs` (pairs where x exceeds y, ties half).
pub fn wilcoxon_rank_sum(xs: &[f64], ys: &[f64]) -> Result<TestResult> {
    wilcoxon_rank_sum_with(xs, ys, WilcoxonMethod::Auto)
}

pub fn wilcoxon_rank_sum_with(
    xs: &[f64],
    ys: &[f64],
    method: WilcoxonMethod,
) -> Result<TestResult> {
    validate_sample("xs", xs)?;
    validate_sample("ys", ys)?;
    let (n1, n2) = (xs.len(), ys.len());
    let n = n1 + n2;

    let (ranks, membership, tie_sizes) = pooled_midranks(xs, ys);
    let rank_sum: f64 = ranks
        .iter()
        .zip(&membership)
        .filter(|(_, &is_x)| is_x)
        .map(|(&r, _)| r)
        .sum();
    let u = rank_sum - (n1 * (n1 + 1)) as f64 / 2.0;
    let mu = (n1 * n2) as f64 / 2.0;

    let use_exact = match method {
        WilcoxonMethod::Exact => {
            if n > WILCOXON_EXACT_HARD_CAP {
                return Err(Error::InvalidInput(format!(
                    "exact rank-sum enumeration limited to n1+n2 <= {WILCOXON_EXACT_HARD_CAP}, got {n}"
                )));
            }
            true
        }
        WilcoxonMethod::NormalApprox => false,
        WilcoxonMethod::Auto => n <= WILCOXON_EXACT_LIMIT,
    };

    let (p_value, method) = if use_exact {
        let mut hits = 0u64;
        let mut total = 0u64;
        count_extreme_arrangements(
            &ranks,
            0,
            n1,
            0.0,
            (n1 * (n1 + 1)) as f64 / 2.0,
            mu,
            (u - mu).abs(),
            &mut hits,
            &mut total,
        );
        (hits as f64 / total as f64, TestMethod::Exact)
    } else {
        let tie_term: f64 = tie_sizes
            .iter()
            .map(|&t| (t * t * t - t) as f64)
            .sum();
        let variance = (n1 * n2) as f64 / 12.0
            * ((n + 1) as f64 - tie_term / (n * (n - 1)) as f64);
        let p = if variance <= 0.0 {
            1.0
        } else {
            let z = ((u - mu).abs() - 0.5).max(0.0) / variance.sqrt();
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            (2.0 * normal.cdf(-z)).min(1.0)
        };
        (p, TestMethod::NormalApprox)
    };

    Ok(TestResult {
        statistic: u,
        p_value,
        method,
        n1,
        n2,
    })
}

/// Lilliefors test configuration and provenance.
#[derive(Debug, Clone, Copy)]
pub struct LillieforsOutcome {
    pub test: TestResult,
    pub alpha: f64,
    pub rejected: bool,
    pub sims: usize,
    pub seed: u64,
}

pub const DEFAULT_LILLIEFORS_SIMS: usize = 10_000;

/// Kolmogorov-Smirnov distance between the empirical CDF of a sorted sample
/// and the normal fitted to it.
fn lilliefors_statistic(sorted: &[f64], normal: &Normal) -> Result<f64> {
    let n = sorted.len();
    let nf = n as f64;
    let mean = sorted.iter().sum::<f64>() / nf;
    let variance = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if variance <= 0.0 {
        return Err(Error::InvalidInput(
            "sample has zero variance; normality is undefined".into(),
        ));
    }
    let sd = variance.sqrt();
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal.cdf((x - mean) / sd);
        let d_plus = (i + 1) as f64 / nf - cdf;
        let d_minus = cdf - i as f64 / nf;
        d = d.max(d_plus).max(d_minus);
    }
    Ok(d)
}

/// Lilliefors normality test with a Monte Carlo p-value: `sims` Gaussian
/// samples of the same size are drawn and refit, and the p-value is the
/// add-one-smoothed fraction with a statistic at least as large.
pub fn lilliefors(xs: &[f64], alpha: f64, sims: usize, seed: u64) -> Result<LillieforsOutcome> {
    if xs.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "Lilliefors test needs n >= 5, got {}",
            xs.len()
        )));
    }
    validate_sample("xs", xs)?;
    if sims == 0 {
        return Err(Error::InvalidInput("sims must be positive".into()));
    }

    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let observed = lilliefors_statistic(&sorted, &normal)?;

    let n = xs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = vec![0.0f64; n];
    let mut at_least_as_extreme = 0usize;
    for _ in 0..sims {
        for slot in draw.iter_mut() {
            *slot = rng.sample(StandardNormal);
        }
        draw.sort_by(f64::total_cmp);
        let simulated =
            lilliefors_statistic(&draw, &normal).expect("simulated sample has variance");
        if simulated >= observed {
            at_least_as_extreme += 1;
        }
    }
    let p_value = (1 + at_least_as_extreme) as f64 / (sims + 1) as f64;

    Ok(LillieforsOutcome {
        test: TestResult {
            statistic: observed,
            p_value,
            method: TestMethod::MonteCarlo,
            n1: n,
            n2: 0,
        },
        alpha,
        rejected: p_value < alpha,
        sims,
        seed,
    })
}

/// Which pair of outcome groups a comparison covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupPair {
    CpIp,
    CpNs,
    IpNs,
}

impl GroupPair {
    pub const ALL: [GroupPair; 3] = [GroupPair::CpIp, GroupPair::CpNs, GroupPair::IpNs];

    pub fn name(self) -> &'static str {
        match self {
            GroupPair::CpIp => "cp_vs_ip",
            GroupPair::CpNs => "cp_vs_ns",
            GroupPair::IpNs => "ip_vs_ns",
        }
    }

    fn groups(self) -> (OutcomeGroup, OutcomeGroup) {
        match self {
            GroupPair::CpIp => (OutcomeGroup::Cp, OutcomeGroup::Ip),
            GroupPair::CpNs => (OutcomeGroup::Cp, OutcomeGroup::Ns),
            GroupPair::IpNs => (OutcomeGroup::Ip, OutcomeGroup::Ns),
        }
    }
}

/// Normality pre-check for one outcome group. `outcome` is None when the
/// group is too small or has no spread for the test to apply.
#[derive(Debug, Clone)]
pub struct NormalityCheck {
    pub group: OutcomeGroup,
    pub n: usize,
    pub outcome: Option<LillieforsOutcome>,
    pub note: Option<String>,
}

/// Pairwise rank-sum results between CP, IP, and NS scores, with per-group
/// normality pre-checks.
#[derive(Debug, Clone)]
pub struct GroupComparisonReport {
    pub scorer: ScorerSpec,
    pub normality: Vec<NormalityCheck>,
    pub comparisons: Vec<(GroupPair, TestResult)>,
}

/// Compare oriented scores between the three outcome groups. All three
/// groups must be non-empty.
pub fn group_comparison(
    samples: &[ScoredSample],
    spec: ScorerSpec,
    lilliefors_sims: usize,
    seed: u64,
) -> Result<GroupComparisonReport> {
    let mut by_group: [Vec<f64>; 3] = Default::default();
    for sample in samples {
        let idx = OutcomeGroup::ALL
            .iter()
            .position(|g| *g == sample.group)
            .expect("group is one of CP/IP/NS");
        by_group[idx].push(sample.oriented_score);
    }
    for (group, scores) in OutcomeGroup::ALL.iter().zip(&by_group) {
        if scores.is_empty() {
            return Err(Error::InvalidInput(format!(
                "group {} is empty; all three outcome groups are required",
                group.name()
            )));
        }
    }

    let mut normality = Vec::new();
    for (offset, (group, scores)) in OutcomeGroup::ALL.iter().zip(&by_group).enumerate() {
        let check = if scores.len() < 5 {
            NormalityCheck {
                group: *group,
                n: scores.len(),
                outcome: None,
                note: Some("fewer than 5 samples".into()),
            }
        } else {
            match lilliefors(scores, 0.05, lilliefors_sims, seed.wrapping_add(offset as u64)) {
                Ok(outcome) => NormalityCheck {
                    group: *group,
                    n: scores.len(),
                    outcome: Some(outcome),
                    note: None,
                },
                Err(err) => NormalityCheck {
                    group: *group,
                    n: scores.len(),
                    outcome: None,
                    note: Some(err.to_string()),
                },
            }
        };
        normality.push(check);
    }

    let scores_of = |g: OutcomeGroup| -> &Vec<f64> {
        &by_group[OutcomeGroup::ALL.iter().position(|x| *x == g).unwrap()]
    };
    let mut comparisons = Vec::new();
    for pair in GroupPair::ALL {
        let (a, b) = pair.groups();
        comparisons.push((pair, wilcoxon_rank_sum(scores_of(a), scores_of(b))?));
    }

    Ok(GroupComparisonReport {
        scorer: spec,
        normality,
        comparisons,
    })
}
