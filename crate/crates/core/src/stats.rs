//! Location tests, effect sizes, multiplicity control, bootstrap
//! intervals, rank correlation and concordance.
//!
//! Exact small-sample paths (Mann-Whitney, permutation, Wilcoxon) are used
//! when the number of arrangements to enumerate is at most
//! [`DEFAULT_EXACT_LIMIT`]; the `_with_limit` variants take the cutoff
//! explicitly.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal, StudentsT};
use thiserror::Error;

pub const DEFAULT_EXACT_LIMIT: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("statistic undefined: {0}")]
    Degenerate(String),
}

type Result<T> = std::result::Result<T, StatsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sidedness {
    #[serde(rename = "one_sided_greater")]
    Greater,
    #[serde(rename = "one_sided_less")]
    Less,
    #[serde(rename = "two_sided")]
    TwoSided,
}

impl std::str::FromStr for Sidedness {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "greater" | "one_sided_greater" => Ok(Sidedness::Greater),
            "less" | "one_sided_less" => Ok(Sidedness::Less),
            "two_sided" | "two-sided" => Ok(Sidedness::TwoSided),
            other => Err(format!("unknown sidedness {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub sidedness: Sidedness,
    pub n1: usize,
    pub n2: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    /// True when the p-value comes from full enumeration.
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    HedgesG,
    CliffsDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub kind: EffectKind,
    pub value: f64,
    /// `(delta + 1) / 2` for Cliff's delta.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Percentile,
    Bca,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: CiMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid normal")
}

fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn check_finite(name: &str, x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::InvalidArgument(format!("{name} has non-finite values")));
    }
    Ok(())
}

fn need(name: &str, x: &[f64], n: usize) -> Result<()> {
    if x.len() < n {
        return Err(StatsError::InvalidArgument(format!(
            "{name} needs at least {n} values, got {}",
            x.len()
        )));
    }
    check_finite(name, x)
}

/// p-value from a statistic with a continuous null given its CDF and
/// survival function at the observed value.
fn sided_p(side: Sidedness, cdf: f64, sf: f64) -> f64 {
    clamp_p(match side {
        Sidedness::Greater => sf,
        Sidedness::Less => cdf,
        Sidedness::TwoSided => 2.0 * cdf.min(sf),
    })
}

fn t_p(t: f64, df: f64, side: Sidedness) -> f64 {
    if t.is_infinite() {
        return sided_p(side, if t > 0.0 { 1.0 } else { 0.0 }, if t > 0.0 { 0.0 } else { 1.0 });
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
    sided_p(side, dist.cdf(t), dist.sf(t))
}

/// Welch's unequal-variance t-test of mean(a) - mean(b) with
/// Satterthwaite degrees of freedom.
pub fn welch_t(a: &[f64], b: &[f64], side: Sidedness) -> Result<TestResult> {
    need("a", a, 2)?;
    need("b", b, 2)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(StatsError::Degenerate("both samples have zero variance".into()));
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TestResult {
        statistic: t,
        p_value: t_p(t, df, side),
        sidedness: side,
        n1: a.len(),
        n2: b.len(),
        df: Some(df),
        exact: false,
    })
}

/// Midranks (1-based) of `x` and the tie-group sizes.
pub fn midranks(x: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// `C(n, k)` as a float (may be inexact for huge values).
pub fn binomial_coefficient(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Null distribution of the Mann-Whitney U for sizes (m, n) without ties:
/// counts of arrangements per U value, from the Gaussian binomial
/// coefficient `prod_{i=1..m} (1 - q^(n+i)) / (1 - q^i)`.
fn mwu_null_counts(m: usize, n: usize) -> Vec<f64> {
    let (m, n) = (m.min(n), m.max(n));
    let len = m * n + 1;
    let mut c = vec![0.0; len];
    c[0] = 1.0;
    for i in 1..=m {
        let shift = n + i;
        for k in (shift..len).rev() {
            c[k] -= c[k - shift];
        }
        for k in i..len {
            c[k] += c[k - i];
        }
    }
    c
}

/// Mann-Whitney U for a vs b; U counts pairs with a > b plus half the
/// ties. `Greater` tests a stochastically larger.
pub fn mann_whitney_u(a: &[f64], b: &[f64], side: Sidedness) -> Result<TestResult> {
    mann_whitney_u_with_limit(a, b, side, DEFAULT_EXACT_LIMIT)
}

pub fn mann_whitney_u_with_limit(
    a: &[f64],
    b: &[f64],
    side: Sidedness,
    exact_limit: f64,
) -> Result<TestResult> {
    need("a", a, 1)?;
    need("b", b, 1)?;
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let ra: f64 = ranks[..n1].iter().sum();
    let u = ra - (n1 * (n1 + 1)) as f64 / 2.0;

    if ties.is_empty() && binomial_coefficient(n, n1) <= exact_limit {
        let counts = mwu_null_counts(n1, n2);
        let total: f64 = counts.iter().sum();
        let ui = u.round() as usize;
        let ge: f64 = counts[ui..].iter().sum::<f64>() / total;
        let le: f64 = counts[..=ui].iter().sum::<f64>() / total;
        let p = match side {
            Sidedness::Greater => ge,
            Sidedness::Less => le,
            Sidedness::TwoSided => 2.0 * ge.min(le),
        };
        return Ok(TestResult {
            statistic: u,
            p_value: clamp_p(p),
            sidedness: side,
            n1,
            n2,
            df: None,
            exact: true,
        });
    }

    let (f1, f2, nf) = (n1 as f64, n2 as f64, n as f64);
    let mu = f1 * f2 / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = f1 * f2 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let sd = var.sqrt();
        let z = std_normal();
        match side {
            Sidedness::Greater => z.sf((u - mu - 0.5) / sd),
            Sidedness::Less => z.cdf((u - mu + 0.5) / sd),
            Sidedness::TwoSided => 2.0 * z.sf(((u - mu).abs() - 0.5) / sd),
        }
    };
    Ok(TestResult {
        statistic: u,
        p_value: clamp_p(p),
        sidedness: side,
        n1,
        n2,
        df: None,
        exact: false,
    })
}

/// One-sided two-sample KS: `D+ = sup_x (F_b(x) - F_a(x))`, large when a
/// is shifted right of b. Asymptotic `p = exp(-2 m n D^2 / (m + n))`.
pub fn ks_test_right(a: &[f64], b: &[f64]) -> Result<TestResult> {
    need("a", a, 1)?;
    need("b", b, 1)?;
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (m, n) = (sa.len(), sb.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < m || j < n {
        let x = match (sa.get(i), sb.get(j)) {
            (Some(&xa), Some(&xb)) => xa.min(xb),
            (Some(&xa), None) => xa,
            (None, Some(&xb)) => xb,
            (None, None) => unreachable!(),
        };
        while i < m && sa[i] <= x {
            i += 1;
        }
        while j < n && sb[j] <= x {
            j += 1;
        }
        d = d.max(j as f64 / n as f64 - i as f64 / m as f64);
    }
    let (mf, nf) = (m as f64, n as f64);
    Ok(TestResult {
        statistic: d,
        p_value: clamp_p((-2.0 * mf * nf * d * d / (mf + nf)).exp()),
        sidedness: Sidedness::Greater,
        n1: m,
        n2: n,
        df: None,
        exact: false,
    })
}

fn tail_count(stat: f64, observed: f64, side: Sidedness) -> bool {
    let tol = 1e-12 * observed.abs().max(1.0);
    match side {
        Sidedness::Greater => stat >= observed - tol,
        Sidedness::Less => stat <= observed + tol,
        Sidedness::TwoSided => stat.abs() >= observed.abs() - tol,
    }
}

/// Permutation test on mean(a) - mean(b). Full enumeration of group
/// assignments when their number is within the exact limit (p counts the
/// observed assignment); otherwise `(1 + hits) / (1 + iterations)` from
/// seeded shuffles.
pub fn permutation_mean_test(
    a: &[f64],
    b: &[f64],
    iterations: usize,
    seed: u64,
    side: Sidedness,
) -> Result<TestResult> {
    permutation_mean_test_with_limit(a, b, iterations, seed, side, DEFAULT_EXACT_LIMIT)
}

pub fn permutation_mean_test_with_limit(
    a: &[f64],
    b: &[f64],
    iterations: usize,
    seed: u64,
    side: Sidedness,
    exact_limit: f64,
) -> Result<TestResult> {
    need("a", a, 1)?;
    need("b", b, 1)?;
    if iterations == 0 {
        return Err(StatsError::InvalidArgument("iterations must be >= 1".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let total: f64 = pooled.iter().sum();
    let diff = |sum_a: f64| sum_a / n1 as f64 - (total - sum_a) / n2 as f64;
    let observed = mean(a) - mean(b);

    let (p, exact) = if binomial_coefficient(n1 + n2, n1) <= exact_limit {
        let n = pooled.len();
        let mut idx: Vec<usize> = (0..n1).collect();
        let (mut hits, mut count) = (0u64, 0u64);
        loop {
            let s: f64 = idx.iter().map(|&i| pooled[i]).sum();
            count += 1;
            hits += u64::from(tail_count(diff(s), observed, side));
            // next combination in lexicographic order
            let mut k = n1;
            while k > 0 && idx[k - 1] == n - n1 + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            idx[k - 1] += 1;
            for t in k..n1 {
                idx[t] = idx[t - 1] + 1;
            }
        }
        (hits as f64 / count as f64, true)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut work = pooled.clone();
        let mut hits = 0u64;
        for _ in 0..iterations {
            work.shuffle(&mut rng);
            let s: f64 = work[..n1].iter().sum();
            hits += u64::from(tail_count(diff(s), observed, side));
        }
        ((1 + hits) as f64 / (1 + iterations) as f64, false)
    };
    Ok(TestResult {
        statistic: observed,
        p_value: clamp_p(p),
        sidedness: side,
        n1,
        n2,
        df: None,
        exact,
    })
}

/// Holm step-down adjustment, returned in input order.
pub fn holm_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::InvalidArgument(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));
    let mut out = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        let adj = ((m - rank) as f64 * p_values[i]).min(1.0);
        running = running.max(adj);
        out[i] = running;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub level: f64,
    pub method: CiMethod,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            level: 0.95,
            method: CiMethod::Bca,
            iterations: 10_000,
            seed: 0,
        }
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn check_bootstrap(opts: &BootstrapOptions) -> Result<()> {
    if opts.iterations < 100 {
        return Err(StatsError::InvalidArgument("bootstrap needs >= 100 iterations".into()));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(StatsError::InvalidArgument("level must be in (0, 1)".into()));
    }
    Ok(())
}

/// Percentile or BCa interval from bootstrap replicates, the full-sample
/// estimate and jackknife leave-one-out estimates.
fn interval(
    mut replicates: Vec<f64>,
    estimate: f64,
    jackknife: &[f64],
    opts: &BootstrapOptions,
) -> IntervalEstimate {
    replicates.sort_by(f64::total_cmp);
    let alpha = (1.0 - opts.level) / 2.0;
    let percentile = |warning: Option<String>| IntervalEstimate {
        lower: quantile_sorted(&replicates, alpha),
        upper: quantile_sorted(&replicates, 1.0 - alpha),
        level: opts.level,
        method: CiMethod::Percentile,
        warning,
    };
    if opts.method == CiMethod::Percentile {
        return percentile(None);
    }
    let z = std_normal();
    let below = replicates.iter().filter(|&&r| r < estimate).count() as f64;
    let prop = below / replicates.len() as f64;
    let jm = mean(jackknife);
    let (num, den) = jackknife.iter().fold((0.0, 0.0), |(n, d), &t| {
        let u = jm - t;
        (n + u * u * u, d + u * u)
    });
    if prop <= 0.0 || prop >= 1.0 || den == 0.0 {
        return percentile(Some(
            "BCa undefined for a constant statistic; percentile interval used".into(),
        ));
    }
    let z0 = z.inverse_cdf(prop);
    let accel = num / (6.0 * den.powf(1.5));
    let adjust = |q: f64| {
        let zq = z.inverse_cdf(q);
        z.cdf(z0 + (z0 + zq) / (1.0 - accel * (z0 + zq)))
    };
    let (lo, hi) = (adjust(alpha), adjust(1.0 - alpha));
    if !(lo.is_finite() && hi.is_finite()) {
        return percentile(Some("BCa adjustment not finite; percentile interval used".into()));
    }
    IntervalEstimate {
        lower: quantile_sorted(&replicates, lo),
        upper: quantile_sorted(&replicates, hi),
        level: opts.level,
        method: CiMethod::Bca,
        warning: None,
    }
}

/// Bootstrap interval for a one-sample statistic.
pub fn bootstrap_ci(
    sample: &[f64],
    statistic: &dyn Fn(&[f64]) -> f64,
    opts: &BootstrapOptions,
) -> Result<IntervalEstimate> {
    need("sample", sample, 2)?;
    check_bootstrap(opts)?;
    let n = sample.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut buf = vec![0.0; n];
    let replicates: Vec<f64> = (0..opts.iterations)
        .map(|_| {
            for slot in buf.iter_mut() {
                *slot = sample[rng.random_range(0..n)];
            }
            statistic(&buf)
        })
        .collect();
    let jackknife: Vec<f64> = (0..n)
        .map(|i| {
            let loo: Vec<f64> = sample
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| v)
                .collect();
            statistic(&loo)
        })
        .collect();
    Ok(interval(replicates, statistic(sample), &jackknife, opts))
}

/// Bootstrap interval for a two-sample statistic; each group is
/// resampled independently.
pub fn bootstrap_ci_two_sample(
    a: &[f64],
    b: &[f64],
    statistic: &dyn Fn(&[f64], &[f64]) -> f64,
    opts: &BootstrapOptions,
) -> Result<IntervalEstimate> {
    need("a", a, 2)?;
    need("b", b, 2)?;
    check_bootstrap(opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut ba, mut bb) = (vec![0.0; a.len()], vec![0.0; b.len()]);
    let replicates: Vec<f64> = (0..opts.iterations)
        .map(|_| {
            for slot in ba.iter_mut() {
                *slot = a[rng.random_range(0..a.len())];
            }
            for slot in bb.iter_mut() {
                *slot = b[rng.random_range(0..b.len())];
            }
            statistic(&ba, &bb)
        })
        .collect();
    let drop = |x: &[f64], i: usize| -> Vec<f64> {
        x.iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .collect()
    };
    let jackknife: Vec<f64> = (0..a.len())
        .map(|i| statistic(&drop(a, i), b))
        .chain((0..b.len()).map(|i| statistic(a, &drop(b, i))))
        .collect();
    Ok(interval(replicates, statistic(a, b), &jackknife, opts))
}

pub fn sample_mean(x: &[f64]) -> f64 {
    mean(x)
}

pub fn sample_median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Bias-corrected standardized mean difference (pooled SD).
pub fn hedges_g(a: &[f64], b: &[f64]) -> Result<EffectSize> {
    need("a", a, 2)?;
    need("b", b, 2)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        return Err(StatsError::Degenerate("zero pooled variance".into()));
    }
    let j = 1.0 - 3.0 / (4.0 * (na + nb) - 9.0);
    Ok(EffectSize {
        kind: EffectKind::HedgesG,
        value: j * (mean(a) - mean(b)) / pooled,
        auc: None,
    })
}

pub fn auc_from_delta(delta: f64) -> f64 {
    (delta + 1.0) / 2.0
}

/// `(#{a_i > b_j} - #{a_i < b_j}) / (n1 n2)`.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<EffectSize> {
    need("a", a, 1)?;
    need("b", b, 1)?;
    let mut sb = b.to_vec();
    sb.sort_by(f64::total_cmp);
    let (mut greater, mut less) = (0u64, 0u64);
    for &x in a {
        let below = sb.partition_point(|&v| v < x);
        let not_above = sb.partition_point(|&v| v <= x);
        greater += below as u64;
        less += (sb.len() - not_above) as u64;
    }
    let delta = (greater as f64 - less as f64) / (a.len() * b.len()) as f64;
    Ok(EffectSize {
        kind: EffectKind::CliffsDelta,
        value: delta,
        auc: Some(auc_from_delta(delta)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of midranks; two-sided p from
/// `t = rho sqrt((n - 2) / (1 - rho^2))` with n - 2 df.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<SpearmanResult> {
    if x.len() != y.len() {
        return Err(StatsError::InvalidArgument("x and y lengths differ".into()));
    }
    need("x", x, 3)?;
    need("y", y, 3)?;
    let (rx, _) = midranks(x);
    let (ry, _) = midranks(y);
    let rho = pearson(&rx, &ry).ok_or_else(|| StatsError::Degenerate("constant input".into()))?;
    let n = x.len();
    let df = (n - 2) as f64;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        t_p(rho * (df / (1.0 - rho * rho)).sqrt(), df, Sidedness::TwoSided)
    };
    Ok(SpearmanResult { rho, p_value: p, n })
}

/// Kendall's coefficient of concordance for `k` judges (rows) scoring
/// `n` items (columns). Rows are converted to midranks; ties corrected.
pub fn kendall_w(rankings: &[Vec<f64>]) -> Result<f64> {
    let k = rankings.len();
    if k < 2 {
        return Err(StatsError::InvalidArgument("need at least 2 judges".into()));
    }
    let n = rankings[0].len();
    if n < 2 || rankings.iter().any(|r| r.len() != n) {
        return Err(StatsError::InvalidArgument(
            "every judge must rank the same >= 2 items".into(),
        ));
    }
    let mut sums = vec![0.0; n];
    let mut tie_total = 0.0;
    for row in rankings {
        check_finite("ranking", row)?;
        let (r, ties) = midranks(row);
        for (s, v) in sums.iter_mut().zip(&r) {
            *s += v;
        }
        tie_total += ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    }
    let m = mean(&sums);
    let s: f64 = sums.iter().map(|r| (r - m) * (r - m)).sum();
    let (kf, nf) = (k as f64, n as f64);
    let denom = kf * kf * (nf * nf * nf - nf) - kf * tie_total;
    if denom <= 0.0 {
        return Err(StatsError::Degenerate("every judge tied every item".into()));
    }
    Ok((12.0 * s / denom).clamp(0.0, 1.0))
}

fn nonzero(diffs: &[f64]) -> Vec<f64> {
    diffs.iter().copied().filter(|&d| d != 0.0).collect()
}

/// One-sample t-test of the differences against zero.
pub fn paired_t(diffs: &[f64], side: Sidedness) -> Result<TestResult> {
    need("differences", diffs, 2)?;
    let n = diffs.len() as f64;
    let sd = variance(diffs).sqrt();
    if sd == 0.0 {
        return Err(StatsError::Degenerate("differences have zero variance".into()));
    }
    let t = mean(diffs) / (sd / n.sqrt());
    Ok(TestResult {
        statistic: t,
        p_value: t_p(t, n - 1.0, side),
        sidedness: side,
        n1: diffs.len(),
        n2: diffs.len(),
        df: Some(n - 1.0),
        exact: false,
    })
}

/// Binomial sign test on the nonzero differences; statistic is the number
/// of positive differences.
pub fn sign_test(diffs: &[f64], side: Sidedness) -> Result<TestResult> {
    check_finite("differences", diffs)?;
    let d = nonzero(diffs);
    if d.is_empty() {
        return Err(StatsError::Degenerate("all differences are zero".into()));
    }
    let n = d.len() as u64;
    let k = d.iter().filter(|&&x| x > 0.0).count() as u64;
    let bin = Binomial::new(0.5, n).expect("valid binomial");
    let le = bin.cdf(k);
    // P(X >= k) = P(X <= n - k) by symmetry
    let ge = bin.cdf(n - k);
    let p = match side {
        Sidedness::Greater => ge,
        Sidedness::Less => le,
        Sidedness::TwoSided => 2.0 * le.min(ge),
    };
    Ok(TestResult {
        statistic: k as f64,
        p_value: clamp_p(p),
        sidedness: side,
        n1: d.len(),
        n2: d.len(),
        df: None,
        exact: true,
    })
}

/// Wilcoxon signed-rank test on the nonzero differences; statistic is
/// W+, the sum of midranks of positive differences. Exact over all 2^n
/// sign patterns (doubled midranks keep the sums integral) within the
/// exact limit, else normal approximation with tie and continuity
/// corrections.
pub fn wilcoxon_signed_rank(diffs: &[f64], side: Sidedness) -> Result<TestResult> {
    wilcoxon_signed_rank_with_limit(diffs, side, DEFAULT_EXACT_LIMIT)
}

pub fn wilcoxon_signed_rank_with_limit(
    diffs: &[f64],
    side: Sidedness,
    exact_limit: f64,
) -> Result<TestResult> {
    check_finite("differences", diffs)?;
    let d = nonzero(diffs);
    if d.is_empty() {
        return Err(StatsError::Degenerate("all differences are zero".into()));
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&d)
        .filter(|(_, &x)| x > 0.0)
        .map(|(r, _)| r)
        .sum();
    let nf = n as f64;

    if 2f64.powi(n as i32) <= exact_limit {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max: usize = doubled.iter().sum();
        let mut counts = vec![0.0f64; max + 1];
        counts[0] = 1.0;
        for &r in &doubled {
            for s in (r..=max).rev() {
                counts[s] += counts[s - r];
            }
        }
        let total = 2f64.powi(n as i32);
        let obs = (2.0 * w_plus).round() as usize;
        let ge = counts[obs..].iter().sum::<f64>() / total;
        let le = counts[..=obs].iter().sum::<f64>() / total;
        let p = match side {
            Sidedness::Greater => ge,
            Sidedness::Less => le,
            Sidedness::TwoSided => 2.0 * ge.min(le),
        };
        return Ok(TestResult {
            statistic: w_plus,
            p_value: clamp_p(p),
            sidedness: side,
            n1: n,
            n2: n,
            df: None,
            exact: true,
        });
    }

    let mu = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = std_normal();
    let sd = var.sqrt();
    let p = match side {
        Sidedness::Greater => z.sf((w_plus - mu - 0.5) / sd),
        Sidedness::Less => z.cdf((w_plus - mu + 0.5) / sd),
        Sidedness::TwoSided => 2.0 * z.sf(((w_plus - mu).abs() - 0.5) / sd),
    };
    Ok(TestResult {
        statistic: w_plus,
        p_value: clamp_p(p),
        sidedness: side,
        n1: n,
        n2: n,
        df: None,
        exact: false,
    })
}

/// Paired comparison of `a` against `b` (differences `a - b`). Tests that
/// are undefined for the data are absent and explained in `notes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSuite {
    pub n: usize,
    pub zero_differences: usize,
    pub mean_diff: f64,
    /// Positive differences over all pairs.
    pub positive_fraction: f64,
    pub paired_t: Option<TestResult>,
    pub wilcoxon: Option<TestResult>,
    pub sign_test: Option<TestResult>,
    pub mean_diff_ci: Option<IntervalEstimate>,
    pub notes: Vec<String>,
}

/// Paired t and Wilcoxon use `side`; the sign test is two-sided.
pub fn paired_suite(
    a: &[f64],
    b: &[f64],
    side: Sidedness,
    bootstrap: &BootstrapOptions,
) -> Result<PairedSuite> {
    if a.len() != b.len() {
        return Err(StatsError::InvalidArgument("paired samples differ in length".into()));
    }
    need("a", a, 2)?;
    need("b", b, 2)?;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut notes = Vec::new();
    let mut keep = |name: &str, r: Result<TestResult>| match r {
        Ok(t) => Some(t),
        Err(e) => {
            notes.push(format!("{name}: {e}"));
            None
        }
    };
    let paired_t = keep("paired_t", paired_t(&diffs, side));
    let wilcoxon = keep("wilcoxon", wilcoxon_signed_rank(&diffs, side));
    let sign = keep("sign_test", sign_test(&diffs, Sidedness::TwoSided));
    let ci = match bootstrap_ci(&diffs, &sample_mean, bootstrap) {
        Ok(ci) => Some(ci),
        Err(e) => {
            notes.push(format!("bootstrap: {e}"));
            None
        }
    };
    Ok(PairedSuite {
        n: diffs.len(),
        zero_differences: diffs.iter().filter(|&&d| d == 0.0).count(),
        mean_diff: mean(&diffs),
        positive_fraction: diffs.iter().filter(|&&d| d > 0.0).count() as f64 / diffs.len() as f64,
        paired_t,
        wilcoxon,
        sign_test: sign,
        mean_diff_ci: ci,
        notes,
    })
}

/// Two-group comparison of one metric: seen (a) against unseen (b).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_diff: f64,
    pub median_diff: f64,
    pub mean_diff_ci: Option<IntervalEstimate>,
    pub hedges_g: Option<f64>,
    pub cliffs_delta: f64,
    pub auc: f64,
    pub welch: Option<TestResult>,
    pub mann_whitney: TestResult,
    pub ks_right: TestResult,
    pub permutation: TestResult,
    pub holm_welch: Option<f64>,
    pub holm_mann_whitney: f64,
    pub holm_ks_right: f64,
    pub holm_permutation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupReportOptions {
    pub permutation_iterations: usize,
    pub bootstrap: BootstrapOptions,
}

impl Default for GroupReportOptions {
    fn default() -> Self {
        GroupReportOptions {
            permutation_iterations: 10_000,
            bootstrap: BootstrapOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    /// Metrics over which each test's p-values are Holm-adjusted.
    pub holm_family: Vec<String>,
    pub metrics: Vec<MetricComparison>,
}

/// One-sided (a > b) comparisons for each `(name, a, b)` metric, with
/// Holm adjustment of each test's p-values across the listed metrics.
pub fn compare_groups(
    metrics: &[(String, Vec<f64>, Vec<f64>)],
    opts: &GroupReportOptions,
) -> Result<GroupReport> {
    let side = Sidedness::Greater;
    let mut out = Vec::with_capacity(metrics.len());
    for (i, (name, a, b)) in metrics.iter().enumerate() {
        need(name, a, 2)?;
        need(name, b, 2)?;
        let delta = cliffs_delta(a, b)?;
        let boot = BootstrapOptions {
            seed: opts.bootstrap.seed.wrapping_add(i as u64),
            ..opts.bootstrap
        };
        out.push(MetricComparison {
            metric: name.clone(),
            n_a: a.len(),
            n_b: b.len(),
            mean_a: mean(a),
            mean_b: mean(b),
            mean_diff: mean(a) - mean(b),
            median_diff: sample_median(a) - sample_median(b),
            mean_diff_ci: bootstrap_ci_two_sample(a, b, &|x, y| mean(x) - mean(y), &boot).ok(),
            hedges_g: hedges_g(a, b).ok().map(|g| g.value),
            cliffs_delta: delta.value,
            auc: delta.auc.unwrap_or(0.5),
            welch: welch_t(a, b, side).ok(),
            mann_whitney: mann_whitney_u(a, b, side)?,
            ks_right: ks_test_right(a, b)?,
            permutation: permutation_mean_test(
                a,
                b,
                opts.permutation_iterations,
                opts.bootstrap.seed.wrapping_add(1000 + i as u64),
                side,
            )?,
            holm_welch: None,
            holm_mann_whitney: 1.0,
            holm_ks_right: 1.0,
            holm_permutation: 1.0,
        });
    }
    let adjust = |ps: Vec<f64>| holm_adjust(&ps);
    let mwu = adjust(out.iter().map(|m| m.mann_whitney.p_value).collect())?;
    let ks = adjust(out.iter().map(|m| m.ks_right.p_value).collect())?;
    let perm = adjust(out.iter().map(|m| m.permutation.p_value).collect())?;
    // a metric without a Welch p counts as p = 1 in the family
    let welch = adjust(
        out.iter()
            .map(|m| m.welch.as_ref().map_or(1.0, |t| t.p_value))
            .collect(),
    )?;
    for (i, m) in out.iter_mut().enumerate() {
        m.holm_mann_whitney = mwu[i];
        m.holm_ks_right = ks[i];
        m.holm_permutation = perm[i];
        m.holm_welch = m.welch.as_ref().map(|_| welch[i]);
    }
    Ok(GroupReport {
        holm_family: metrics.iter().map(|m| m.0.clone()).collect(),
        metrics: out,
    })
}

fn fmt_p(p: f64) -> String {
    if p < 1e-3 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

pub fn render_group_report(report: &GroupReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Holm family: {}", report.holm_family.join(", "));
    let _ = writeln!(
        out,
        "{:<10} {:>8} {:>8} {:>8} {:>22} {:>7} {:>7} {:>6} {:>10} {:>10} {:>10} {:>10}",
        "metric", "mean_a", "mean_b", "diff", "95% CI", "g", "delta", "AUC", "p_welch*", "p_mwu*",
        "p_ks*", "p_perm*"
    );
    for m in &report.metrics {
        let ci = m
            .mean_diff_ci
            .as_ref()
            .map_or("-".to_string(), |c| format!("[{:.4}, {:.4}]", c.lower, c.upper));
        let _ = writeln!(
            out,
            "{:<10} {:>8.4} {:>8.4} {:>8.4} {:>22} {:>7} {:>7.3} {:>6.3} {:>10} {:>10} {:>10} {:>10}",
            m.metric,
            m.mean_a,
            m.mean_b,
            m.mean_diff,
            ci,
            m.hedges_g.map_or("-".to_string(), |g| format!("{g:.3}")),
            m.cliffs_delta,
            m.auc,
            m.holm_welch.map_or("-".to_string(), fmt_p),
            fmt_p(m.holm_mann_whitney),
            fmt_p(m.holm_ks_right),
            fmt_p(m.holm_permutation),
        );
    }
    let _ = writeln!(out, "* one-sided (a > b), Holm-adjusted across the family");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welch_hand_formula() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 4.0, 6.0, 8.0, 11.0];
        let r = welch_t(&a, &b, Sidedness::TwoSided).unwrap();
        // means 3 and 6.2; variances 2.5 and 12.2
        let se = (2.5f64 / 5.0 + 12.2 / 5.0).sqrt();
        assert!((r.statistic - (3.0 - 6.2) / se).abs() < 1e-9);
        let df = (0.5f64 + 2.44).powi(2) / (0.25 / 4.0 + 2.44f64.powi(2) / 4.0);
        assert!((r.df.unwrap() - df).abs() < 1e-9);

        let same = welch_t(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], Sidedness::TwoSided).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert!((same.p_value - 1.0).abs() < 1e-12);
        let shifted = welch_t(&[11.0, 12.0, 13.0], &[1.0, 2.0, 3.0], Sidedness::Greater).unwrap();
        assert!(shifted.p_value < 0.01);
        assert!(welch_t(&[1.0, 1.0], &[2.0, 2.0], Sidedness::Greater).is_err());
    }

    #[test]
    fn mwu_exact_small() {
        let r = mann_whitney_u(&[3.0, 4.0], &[1.0, 2.0], Sidedness::Greater).unwrap();
        assert_eq!(r.statistic, 4.0);
        assert_eq!(r.p_value, 1.0 / 6.0);
        assert!(r.exact);
        let s = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], Sidedness::Greater).unwrap();
        assert_eq!(s.statistic, 0.0);
        let tied = mann_whitney_u(&[5.0; 4], &[5.0; 6], Sidedness::TwoSided).unwrap();
        assert_eq!(tied.p_value, 1.0);
    }

    #[test]
    fn mwu_null_counts_match_binomial() {
        for (m, n) in [(1, 1), (2, 2), (3, 5), (4, 4), (1, 9)] {
            let c = mwu_null_counts(m, n);
            assert_eq!(c.iter().sum::<f64>(), binomial_coefficient(m + n, m));
            assert!(c.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn ks_right_cases() {
        let a = [1.0, 2.0, 3.0];
        let r = ks_test_right(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let r = ks_test_right(&[10.0, 11.0, 12.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
        // ECDF table: a = {2,4,6,8}, b = {1,3,5,7}; F_b - F_a peaks at 1/4
        let r = ks_test_right(&[2.0, 4.0, 6.0, 8.0], &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert_eq!(r.statistic, 0.25);
    }

    #[test]
    fn permutation_exact_and_seeded() {
        let r = permutation_mean_test(&[2.0], &[1.0], 10, 0, Sidedness::Greater).unwrap();
        assert_eq!(r.p_value, 0.5);
        assert!(r.exact);
        let a: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64 + 0.5).collect();
        let p1 = permutation_mean_test(&a, &b, 2000, 42, Sidedness::Greater).unwrap();
        let p2 = permutation_mean_test(&a, &b, 2000, 42, Sidedness::Greater).unwrap();
        assert_eq!(p1, p2);
        assert!(!p1.exact);
        let same = permutation_mean_test(&a, &a, 2000, 1, Sidedness::TwoSided).unwrap();
        assert!(same.p_value > 0.95);
    }

    #[test]
    fn holm_example() {
        assert_eq!(holm_adjust(&[0.01, 0.04, 0.03]).unwrap(), vec![0.03, 0.06, 0.06]);
        assert_eq!(holm_adjust(&[0.2]).unwrap(), vec![0.2]);
        assert!(holm_adjust(&[1.5]).is_err());
        assert!(holm_adjust(&[f64::NAN]).is_err());
    }

    #[test]
    fn bootstrap_constant_and_seeded() {
        let c = [2.5; 20];
        for method in [CiMethod::Percentile, CiMethod::Bca] {
            let opts = BootstrapOptions {
                method,
                iterations: 500,
                ..Default::default()
            };
            let ci = bootstrap_ci(&c, &sample_mean, &opts).unwrap();
            assert_eq!((ci.lower, ci.upper), (2.5, 2.5));
        }
        let x: Vec<f64> = (0..25).map(|i| ((i * 37) % 11) as f64).collect();
        let opts = BootstrapOptions {
            iterations: 1000,
            seed: 9,
            ..Default::default()
        };
        let a = bootstrap_ci(&x, &sample_mean, &opts).unwrap();
        assert_eq!(a, bootstrap_ci(&x, &sample_mean, &opts).unwrap());
        assert!(a.lower <= a.upper);
        assert_eq!(a.method, CiMethod::Bca);
    }

    #[test]
    fn effect_sizes() {
        let g = hedges_g(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(g.value, 0.0);
        let d = cliffs_delta(&[3.0, 4.0], &[1.0, 2.0]).unwrap();
        assert_eq!(d.value, 1.0);
        assert_eq!(d.auc, Some(1.0));
        assert!((auc_from_delta(0.149) - 0.5745).abs() < 1e-12);
        // g = J * d with d = 1 / 1 for unit-variance samples
        let g = hedges_g(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]).unwrap();
        assert!((g.value - (1.0 - 3.0 / 15.0)).abs() < 1e-12);
    }

    #[test]
    fn spearman_cases() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman_rho(&x, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap().rho, 1.0);
        assert_eq!(spearman_rho(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap().rho, -1.0);
        assert!(spearman_rho(&x, &[1.0; 5]).is_err());
        // midranks x: 1.5 1.5 3 4 5.5 5.5, y: 1 2.5 2.5 4.5 4.5 6
        let r = spearman_rho(
            &[1.0, 1.0, 2.0, 3.0, 4.0, 4.0],
            &[1.0, 2.0, 2.0, 3.0, 3.0, 4.0],
        )
        .unwrap();
        let rx = [1.5, 1.5, 3.0, 4.0, 5.5, 5.5];
        let ry = [1.0, 2.5, 2.5, 4.5, 4.5, 6.0];
        let m = 3.5;
        let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - m) * (b - m)).sum();
        let sxx: f64 = rx.iter().map(|a| (a - m) * (a - m)).sum();
        let syy: f64 = ry.iter().map(|b| (b - m) * (b - m)).sum();
        assert!((r.rho - sxy / (sxx * syy).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn kendall_cases() {
        let same = vec![vec![1.0, 2.0, 3.0, 4.0]; 3];
        assert!((kendall_w(&same).unwrap() - 1.0).abs() < 1e-12);
        let rev = vec![vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]];
        assert_eq!(kendall_w(&rev).unwrap(), 0.0);
        let a = vec![vec![1.0, 3.0, 2.0, 4.0], vec![2.0, 3.0, 1.0, 4.0]];
        let b = vec![vec![4.0, 2.0, 3.0, 1.0], vec![4.0, 1.0, 3.0, 2.0]];
        assert!((kendall_w(&a).unwrap() - kendall_w(&b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn sign_test_fourteen_pairs() {
        let mut d = vec![-1.0; 12];
        d.extend([1.0, 1.0]);
        let r = sign_test(&d, Sidedness::TwoSided).unwrap();
        assert!((r.p_value - 212.0 / 16384.0).abs() < 1e-12);
        assert!(sign_test(&[0.0, 0.0], Sidedness::TwoSided).is_err());
    }

    #[test]
    fn wilcoxon_small() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], Sidedness::Greater).unwrap();
        assert_eq!(r.statistic, 6.0);
        assert_eq!(r.p_value, 0.125);
        assert!(r.exact);
    }

    #[test]
    fn paired_suite_equal_inputs() {
        let a = [0.5, 0.6, 0.7];
        let s = paired_suite(&a, &a, Sidedness::TwoSided, &BootstrapOptions {
            iterations: 200,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(s.mean_diff, 0.0);
        assert!(s.sign_test.is_none());
        assert!(s.wilcoxon.is_none());
        assert_eq!(s.zero_differences, 3);
        assert!(!s.notes.is_empty());
    }

    #[test]
    fn group_report_holm() {
        let seen: Vec<f64> = (0..40).map(|i| 0.3 + (i % 7) as f64 * 0.01).collect();
        let unseen: Vec<f64> = (0..40).map(|i| 0.28 + (i % 5) as f64 * 0.01).collect();
        let metrics: Vec<(String, Vec<f64>, Vec<f64>)> = ["p1", "p2"]
            .iter()
            .map(|m| (m.to_string(), seen.clone(), unseen.clone()))
            .collect();
        let opts = GroupReportOptions {
            permutation_iterations: 500,
            bootstrap: BootstrapOptions {
                iterations: 200,
                ..Default::default()
            },
        };
        let r = compare_groups(&metrics, &opts).unwrap();
        for m in &r.metrics {
            assert!(m.holm_mann_whitney >= m.mann_whitney.p_value);
        }
        assert!(render_group_report(&r).contains("Holm family: p1, p2"));
    }
}
