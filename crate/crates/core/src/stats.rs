//! Hypothesis tests used by the verification experiments.
//!
//! Every test returns a [`TestReport`] carrying its statistic, an asymptotic
//! p-value and a verdict at the report's `alpha` (default
//! [`DEFAULT_ALPHA`]). A report passes when `p_value >= alpha`.

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::{arg, Result};

pub const DEFAULT_ALPHA: f64 = 0.001;
const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReportMetadata {
    pub experiment: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub test: String,
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub verdict: Verdict,
    pub alpha: f64,
    pub metadata: ReportMetadata,
}

impl TestReport {
    fn new(test: &str, statistic: f64, p_value: f64, n1: usize, n2: usize) -> Self {
        let p_value = if p_value.is_nan() { 0.0 } else { p_value.clamp(0.0, 1.0) };
        let mut r = TestReport {
            test: test.to_string(),
            statistic,
            p_value,
            n1,
            n2,
            verdict: Verdict::Pass,
            alpha: DEFAULT_ALPHA,
            metadata: ReportMetadata::default(),
        };
        r.decide();
        r
    }

    fn decide(&mut self) {
        self.verdict = if self.p_value >= self.alpha { Verdict::Pass } else { Verdict::Fail };
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self.decide();
        self
    }

    pub fn with_metadata(mut self, experiment: impl Into<String>, seed: u64) -> Self {
        self.metadata = ReportMetadata { experiment: experiment.into(), seed: Some(seed) };
        self
    }

    /// Replaces the test name, e.g. to record which level was compared.
    pub fn named(mut self, test: impl Into<String>) -> Self {
        self.test = test.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Kolmogorov tail `Q(λ) = 2 Σ_{j>=1} (-1)^{j-1} e^{-2 j² λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    // below this the alternating series converges too slowly and Q is 1 to
    // double precision anyway
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return arg("sample contains NaN");
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<TestReport> {
    if xs.is_empty() || ys.is_empty() {
        return arg("KS test needs two nonempty samples");
    }
    let a = sorted(xs)?;
    let b = sorted(ys)?;
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let x = a[i].min(b[j]);
        while i < n1 && a[i] == x {
            i += 1;
        }
        while j < n2 && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let en = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    Ok(TestReport::new("ks_two_sample", d, kolmogorov_q(en.sqrt() * d), n1, n2))
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestReport> {
    if xs.is_empty() {
        return arg("KS test needs a nonempty sample");
    }
    let a = sorted(xs)?;
    let n = a.len() as f64;
    let d = a
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    Ok(TestReport::new("ks_one_sample", d, kolmogorov_q(n.sqrt() * d), a.len(), 0))
}

/// CDF `1 - (1-x)^{len-1}` of one coordinate of a uniform point on the
/// simplex with `len` coordinates, i.e. `Beta(1, len-1)`.
pub fn simplex_marginal_cdf(len: usize) -> impl Fn(f64) -> f64 {
    move |x| {
        if len <= 1 {
            if x >= 1.0 {
                1.0
            } else {
                0.0
            }
        } else {
            1.0 - (1.0 - x.clamp(0.0, 1.0)).powi(len as i32 - 1)
        }
    }
}

/// Pearson goodness of fit. `expected` holds cell weights and is normalised
/// internally. Neighbouring cells are pooled left to right until each pooled
/// cell expects at least 5 observations; a short remainder joins the last
/// pooled cell.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<TestReport> {
    if observed.len() != expected.len() {
        return arg(format!(
            "chi-square needs matching dimensions, got {} observed and {} expected cells",
            observed.len(),
            expected.len()
        ));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return arg("chi-square needs at least one observation");
    }
    if expected.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return arg("expected cell weights must be finite and >= 0");
    }
    let total: f64 = expected.iter().sum();
    if !(total > 0.0) {
        return arg("expected cell weights must have positive sum");
    }
    let nf = n as f64;
    if observed.iter().zip(expected).any(|(&o, &e)| o > 0 && e == 0.0) {
        return Ok(TestReport::new("chi_square_gof", f64::INFINITY, 0.0, n as usize, 0));
    }

    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        if e == 0.0 {
            continue;
        }
        acc.0 += o as f64;
        acc.1 += nf * e / total;
        if acc.1 >= MIN_EXPECTED {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    if cells.len() < 2 {
        return Ok(TestReport::new("chi_square_gof", 0.0, 1.0, n as usize, 0));
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = (cells.len() - 1) as f64;
    let p = ChiSquared::new(df).expect("positive degrees of freedom").sf(stat);
    Ok(TestReport::new("chi_square_gof", stat, p, n as usize, 0))
}

/// Chi-square test of homogeneity for two count vectors over the same cells
/// (columns with too few expected counts are pooled as in [`chi_square_gof`]).
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<TestReport> {
    if a.len() != b.len() {
        return arg("two-sample chi-square needs matching dimensions");
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return arg("two-sample chi-square needs observations on both sides");
    }
    let n = na + nb;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        acc.0 += x as f64;
        acc.1 += y as f64;
        let smaller_expected = (acc.0 + acc.1) * na.min(nb) / n;
        if smaller_expected >= MIN_EXPECTED {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    let (n1, n2) = (na as usize, nb as usize);
    if cells.len() < 2 {
        return Ok(TestReport::new("chi_square_two_sample", 0.0, 1.0, n1, n2));
    }
    let stat: f64 = cells
        .iter()
        .map(|&(x, y)| {
            let col = x + y;
            let (ex, ey) = (col * na / n, col * nb / n);
            (x - ex).powi(2) / ex + (y - ey).powi(2) / ey
        })
        .sum();
    let df = (cells.len() - 1) as f64;
    let p = ChiSquared::new(df).expect("positive degrees of freedom").sf(stat);
    Ok(TestReport::new("chi_square_two_sample", stat, p, n1, n2))
}

/// `P(|Z| >= |z|)` for a standard normal `Z`.
pub fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

pub fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// z-test of `E[X] = target`. The statistic is `|z|`.
pub fn mean_z_test(xs: &[f64], target: f64) -> Result<TestReport> {
    if xs.len() < 30 {
        return arg(format!("mean z-test needs at least 30 observations, got {}", xs.len()));
    }
    let (mean, sd) = mean_and_sd(xs);
    let (z, p) = if sd == 0.0 {
        if mean == target {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let z = (mean - target) / (sd / (xs.len() as f64).sqrt());
        (z.abs(), normal_two_sided(z))
    };
    Ok(TestReport::new("mean_z_test", z, p, xs.len(), 0))
}

/// Sample covariance matrix of observation rows.
pub fn covariance_matrix(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let means: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in i..d {
                cov[i][j] += (r[i] - means[i]) * (r[j] - means[j]);
            }
        }
    }
    let denom = (n as f64 - 1.0).max(1.0);
    #[allow(clippy::needless_range_loop)]
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

/// Bootstrap standard errors of every covariance entry.
pub fn bootstrap_covariance_se<R: Rng + ?Sized>(rows: &[Vec<f64>], resamples: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let mut sum = vec![vec![0.0; d]; d];
    let mut sum_sq = vec![vec![0.0; d]; d];
    let mut sample: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..resamples {
        sample.clear();
        sample.extend((0..n).map(|_| rows[rng.random_range(0..n)].clone()));
        let c = covariance_matrix(&sample);
        for i in 0..d {
            for j in 0..d {
                sum[i][j] += c[i][j];
                sum_sq[i][j] += c[i][j] * c[i][j];
            }
        }
    }
    let b = resamples as f64;
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let m = sum[i][j] / b;
                    ((sum_sq[i][j] / b - m * m).max(0.0) * b / (b - 1.0).max(1.0)).sqrt()
                })
                .collect()
        })
        .collect()
}

/// Entrywise comparison of two matrices: fails when some entry differs by
/// more than `multiple` standard errors. The statistic is the largest
/// standardised difference; the p-value is its Bonferroni-adjusted normal
/// tail and `alpha` is set to the tail at `multiple`, so the verdict agrees
/// with the threshold rule.
pub fn covariance_compare(a: &[Vec<f64>], b: &[Vec<f64>], se: &[Vec<f64>], multiple: f64) -> Result<TestReport> {
    let d = a.len();
    if b.len() != d || se.len() != d || a.iter().chain(b).chain(se).any(|r| r.len() != d) {
        return arg("covariance comparison needs square matrices of equal size");
    }
    let mut worst: f64 = 0.0;
    let mut entries = 0usize;
    for i in 0..d {
        for j in i..d {
            entries += 1;
            let diff = (a[i][j] - b[i][j]).abs();
            let z = if diff == 0.0 {
                0.0
            } else if se[i][j] > 0.0 {
                diff / se[i][j]
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
    }
    let m = entries.max(1) as f64;
    let p = (m * normal_two_sided(worst)).min(1.0);
    let alpha = (m * normal_two_sided(multiple)).min(1.0);
    Ok(TestReport::new("covariance_compare", worst, p, d, d).with_alpha(alpha))
}

/// A deterministic check over `n` cases: passes (p = 1) when no case
/// failed, fails (p = 0) otherwise. The statistic is the failure count.
pub fn exact_check(test: &str, failures: usize, n: usize) -> TestReport {
    let p = if failures == 0 { 1.0 } else { 0.0 };
    TestReport::new(test, failures as f64, p, n, 0)
}

/// Tests zero correlation: fails when `|ρ| >= multiple / √n`. The statistic
/// is `|ρ| √n` and `alpha` is the two-sided normal tail at `multiple`.
pub fn correlation_test(xs: &[f64], ys: &[f64], multiple: f64) -> Result<TestReport> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return arg("correlation test needs two samples of equal length >= 3");
    }
    let z = correlation(xs, ys).abs() * (xs.len() as f64).sqrt();
    Ok(TestReport::new("correlation_test", z, normal_two_sided(z), xs.len(), ys.len())
        .with_alpha(normal_two_sided(multiple)))
}

/// Pearson correlation of two equally long samples (0 if either is constant).
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, sx) = mean_and_sd(xs);
    let (my, sy) = mean_and_sd(ys);
    if sx == 0.0 || sy == 0.0 {
        return 0.0;
    }
    let n = xs.len() as f64;
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / ((n - 1.0) * sx * sy)
}
