//! The finite measure Λ on `[0, 1]` and every rate derived from it.
//!
//! Λ is represented as a Dirac mass at 0 plus a finite mixture of Beta
//! densities plus finitely many atoms in `(0, 1]`. All merger rates
//!
//! ```text
//! λ_{n,k} = ∫ x^{k-2} (1-x)^{n-k} Λ(dx)
//! ```
//!
//! then have closed forms (Beta functions for the density part), which are
//! evaluated in log space so that `n` can reach the tens of thousands.

mod cdi;

pub use cdi::{cdi_check, CdiDiagnostics, CdiVerdict};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::numeric::{choose2, exp_defect, integrate_with_breaks, ln_beta, ln_choose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBeta")]
pub struct BetaComponent {
    pub a: f64,
    pub b: f64,
    pub weight: f64,
}

impl BetaComponent {
    fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0 && self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::Config(format!("Beta parameters must be > 0, got a={}, b={}", self.a, self.b)));
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::Config(format!("Beta weight must be finite and >= 0, got {}", self.weight)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAtom")]
pub struct PointAtom {
    pub x: f64,
    pub weight: f64,
}

impl PointAtom {
    fn validate(&self) -> Result<()> {
        if !(self.x > 0.0 && self.x <= 1.0) {
            return Err(Error::Config(format!("atom location must lie in (0, 1], got {}", self.x)));
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::Config(format!("atom weight must be finite and >= 0, got {}", self.weight)));
        }
        Ok(())
    }
}

// Components are validated while their array is being read, so parse errors
// carry the position of the offending entry.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeta {
    a: f64,
    b: f64,
    weight: f64,
}

impl TryFrom<RawBeta> for BetaComponent {
    type Error = Error;

    fn try_from(r: RawBeta) -> Result<Self> {
        let c = BetaComponent { a: r.a, b: r.b, weight: r.weight };
        c.validate().map(|_| c)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtom {
    x: f64,
    weight: f64,
}

impl TryFrom<RawAtom> for PointAtom {
    type Error = Error;

    fn try_from(r: RawAtom) -> Result<Self> {
        let p = PointAtom { x: r.x, weight: r.weight };
        p.validate().map(|_| p)
    }
}

/// One additive piece of Λ, weight included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Component {
    /// `w · δ_0`
    Kingman { weight: f64 },
    /// `w · Beta(a, b)` density on `(0, 1)`
    Beta { a: f64, b: f64, weight: f64 },
    /// `w · δ_x`, `x ∈ (0, 1]`
    Atom { x: f64, weight: f64 },
}

impl Component {
    pub fn weight(&self) -> f64 {
        match *self {
            Component::Kingman { weight } | Component::Beta { weight, .. } | Component::Atom { weight, .. } => weight,
        }
    }

    /// `ln( C(n,k) ∫ x^{k-2}(1-x)^{n-k} ν(dx) )`, `-inf` when the term vanishes.
    pub fn ln_merger_term(&self, n: u64, k: u64) -> f64 {
        debug_assert!((2..=n).contains(&k));
        let w = self.weight();
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            Component::Kingman { .. } => {
                if k == 2 {
                    w.ln() + ln_choose(n, 2)
                } else {
                    f64::NEG_INFINITY
                }
            }
            Component::Beta { a, b, .. } => {
                w.ln() + ln_choose(n, k) + ln_beta((k - 2) as f64 + a, (n - k) as f64 + b) - ln_beta(a, b)
            }
            Component::Atom { x, .. } => {
                if x >= 1.0 {
                    return if k == n { w.ln() } else { f64::NEG_INFINITY };
                }
                w.ln() + ln_choose(n, k) + (k - 2) as f64 * x.ln() + (n - k) as f64 * (-x).ln_1p()
            }
        }
    }

    /// Ratio `t(k+1) / t(k)` of consecutive merger terms at fixed `n`
    /// (only meaningful where `t(k) > 0`).
    pub(crate) fn merger_ratio(&self, n: u64, k: u64) -> f64 {
        let binom = (n - k) as f64 / (k + 1) as f64;
        match *self {
            Component::Kingman { .. } => 0.0,
            Component::Beta { a, b, .. } => binom * ((k - 2) as f64 + a) / ((n - k - 1) as f64 + b),
            Component::Atom { x, .. } => binom * x / (1.0 - x),
        }
    }

    /// Merger terms `C(n,k) λ_{n,k}` for `k = 2..=n`, added into `out[k-2]`.
    fn accumulate_merger_terms(&self, n: u64, out: &mut [f64]) {
        if self.weight() <= 0.0 {
            return;
        }
        match *self {
            Component::Kingman { weight } => out[0] += weight * choose2(n),
            Component::Atom { x, weight } if x >= 1.0 => out[(n - 2) as usize] += weight,
            _ => {
                let mut ln_t = self.ln_merger_term(n, 2);
                for k in 2..=n {
                    out[(k - 2) as usize] += ln_t.exp();
                    if k < n {
                        ln_t += self.merger_ratio(n, k).ln();
                    }
                }
            }
        }
    }

    /// `Σ_k C(n,k) λ_{n,k}` for this component alone.
    pub fn merger_total(&self, n: u64) -> f64 {
        let mut terms = vec![0.0; (n - 1) as usize];
        self.accumulate_merger_terms(n, &mut terms);
        terms.iter().sum()
    }

    /// `∫ (1-x)^i ν(dx)`.
    pub fn survival_moment(&self, i: u64) -> f64 {
        match *self {
            Component::Kingman { weight } => weight,
            Component::Beta { a, b, weight } => weight * (ln_beta(a, b + i as f64) - ln_beta(a, b)).exp(),
            Component::Atom { x, weight } => {
                if i == 0 {
                    weight
                } else {
                    weight * (i as f64 * (-x).ln_1p()).exp()
                }
            }
        }
    }

    /// Draws a merger size `k ∈ {2..=n}` with probability proportional to
    /// `C(n,k) λ_{n,k}` for this component alone. `total` must be the sum of
    /// those terms. Inversion walking upward from `k = 2`, so the cost is
    /// proportional to the size drawn.
    pub fn sample_merger_size<R: Rng + ?Sized>(&self, n: u64, total: f64, rng: &mut R) -> u64 {
        match *self {
            Component::Kingman { .. } => 2,
            Component::Atom { x, .. } if x >= 1.0 => n,
            _ => {
                let target = rng.random::<f64>() * total;
                let mut ln_t = self.ln_merger_term(n, 2);
                let mut acc = 0.0;
                let mut last_positive = 2;
                for k in 2..=n {
                    let t = ln_t.exp();
                    if t > 0.0 {
                        last_positive = k;
                    }
                    acc += t;
                    if acc > target {
                        return k;
                    }
                    if k < n {
                        ln_t += self.merger_ratio(n, k).ln();
                    }
                }
                last_positive
            }
        }
    }

    fn psi(&self, u: f64) -> f64 {
        match *self {
            Component::Kingman { weight } => weight * u * u,
            Component::Atom { x, weight } => weight * exp_defect(x * u) / (x * x),
            Component::Beta { a, b, weight } => weight * psi_beta(a, b, u),
        }
    }
}

/// `∫_0^1 (e^{-xu} - 1 + xu) x^{-2} Beta(a,b)(dx)` by adaptive quadrature.
///
/// The interval is split at 1/2; on each half the substitution
/// `x = s^{1/a}` (resp. `1 - x = s^{1/b}`) absorbs the endpoint power so the
/// integrand is bounded. Breakpoints around `x ≈ 1/u` resolve the
/// transition of the kernel from `u²/2` to `u/x`.
fn psi_beta(a: f64, b: f64, u: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    const REL_TOL: f64 = 1e-9;
    let ln_norm = ln_beta(a, b);
    let kernel = |x: f64| {
        let y = x * u;
        if y < 1e-4 {
            u * u * (0.5 - y * (1.0 / 6.0 - y / 24.0))
        } else {
            exp_defect(y) / (x * x)
        }
    };

    // left half, x in (0, 1/2]: x = s^{1/a}, x^{a-1} dx = ds / a
    let s_max = 0.5f64.powf(a);
    let left = |s: f64| {
        let x = s.powf(1.0 / a);
        kernel(x) * ((b - 1.0) * (-x).ln_1p() - ln_norm).exp() / a
    };
    let mut breaks = vec![0.0];
    for scale in [0.01, 0.1, 1.0, 10.0, 100.0] {
        let x = scale / u;
        if x < 0.5 {
            breaks.push(x.powf(a));
        }
    }
    breaks.push(s_max);
    let lhs = integrate_with_breaks(left, &breaks, REL_TOL);

    // right half, x in [1/2, 1): 1 - x = s^{1/b}, (1-x)^{b-1} dx = ds / b
    let right = |s: f64| {
        let x = 1.0 - s.powf(1.0 / b);
        kernel(x) * ((a - 1.0) * x.ln() - ln_norm).exp() / b
    };
    let rhs = integrate_with_breaks(right, &[0.0, 0.5f64.powf(b)], REL_TOL);
    lhs + rhs
}

/// Normalised pmf over an increasing integer support together with the
/// total rate it was normalised by.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePmf {
    pub support: Vec<u64>,
    pub probs: Vec<f64>,
    pub total_rate: f64,
}

impl RatePmf {
    pub(crate) fn from_rates(support: Vec<u64>, rates: Vec<f64>) -> Result<Self> {
        let total: f64 = rates.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateMeasure("all event rates vanish".to_string()));
        }
        let probs = rates.into_iter().map(|r| r / total).collect();
        Ok(RatePmf { support, probs, total_rate: total })
    }

    /// Probability of `value` (0 outside the support).
    pub fn prob(&self, value: u64) -> f64 {
        match self.support.binary_search(&value) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(&s, &p)| s as f64 * p).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (&s, &p) in self.support.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return s;
            }
        }
        // rounding left a sliver of mass above the last cumulative value
        *self
            .support
            .iter()
            .zip(&self.probs)
            .rev()
            .find(|(_, &p)| p > 0.0)
            .map(|(s, _)| s)
            .expect("pmf has positive mass")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLambda {
    #[serde(default)]
    atom0: f64,
    #[serde(default)]
    beta: Vec<BetaComponent>,
    #[serde(default)]
    atoms: Vec<PointAtom>,
}

impl TryFrom<RawLambda> for LambdaMeasure {
    type Error = Error;

    fn try_from(raw: RawLambda) -> Result<Self> {
        LambdaMeasure::new(raw.atom0, raw.beta, raw.atoms)
    }
}

/// A finite measure Λ on `[0, 1]`.
///
/// Serialises as `{"atom0": w, "beta": [{"a", "b", "weight"}], "atoms": [{"x", "weight"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLambda")]
pub struct LambdaMeasure {
    pub atom0: f64,
    #[serde(rename = "beta")]
    pub beta_components: Vec<BetaComponent>,
    #[serde(rename = "atoms")]
    pub point_atoms: Vec<PointAtom>,
}

impl LambdaMeasure {
    pub fn new(atom0: f64, beta_components: Vec<BetaComponent>, point_atoms: Vec<PointAtom>) -> Result<Self> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(atom0 >= 0.0 && atom0.is_finite()) {
            return bad(format!("atom0 must be finite and >= 0, got {atom0}"));
        }
        for c in &beta_components {
            c.validate()?;
        }
        for p in &point_atoms {
            p.validate()?;
        }
        let m = LambdaMeasure { atom0, beta_components, point_atoms };
        let total = m.total_mass();
        if !(total > 0.0 && total.is_finite()) {
            return bad("total mass must be strictly positive and finite".to_string());
        }
        Ok(m)
    }

    /// `w · δ_0`: the Moran model forward, Kingman's coalescent backward.
    pub fn kingman(weight: f64) -> Self {
        Self::new(weight, vec![], vec![]).expect("valid Kingman measure")
    }

    /// Unit-mass `Beta(a, b)`; `Beta(2-α, α)` gives the Beta-coalescents.
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        Self::new(0.0, vec![BetaComponent { a, b, weight: 1.0 }], vec![])
    }

    /// Lebesgue measure on `[0, 1]` (Bolthausen–Sznitman).
    pub fn uniform() -> Self {
        Self::beta(1.0, 1.0).expect("valid uniform measure")
    }

    /// Unit atom at `x ∈ (0, 1]`.
    pub fn dirac(x: f64) -> Result<Self> {
        Self::new(0.0, vec![], vec![PointAtom { x, weight: 1.0 }])
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// `c · Λ`, which runs every process `c` times faster.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return arg(format!("time scale must be finite and > 0, got {c}"));
        }
        let mut m = self.clone();
        m.atom0 *= c;
        m.beta_components.iter_mut().for_each(|b| b.weight *= c);
        m.point_atoms.iter_mut().for_each(|p| p.weight *= c);
        Ok(m)
    }

    pub fn total_mass(&self) -> f64 {
        self.atom0
            + self.beta_components.iter().map(|c| c.weight).sum::<f64>()
            + self.point_atoms.iter().map(|p| p.weight).sum::<f64>()
    }

    /// True when Λ only charges 0 (binary mergers only).
    pub fn is_binary(&self) -> bool {
        self.atom0 > 0.0
            && self.beta_components.iter().all(|c| c.weight == 0.0)
            && self.point_atoms.iter().all(|p| p.weight == 0.0)
    }

    /// Nonzero components, Kingman part first.
    pub fn components(&self) -> Vec<Component> {
        let mut out = Vec::new();
        if self.atom0 > 0.0 {
            out.push(Component::Kingman { weight: self.atom0 });
        }
        out.extend(self.beta_components.iter().filter(|c| c.weight > 0.0).map(|c| Component::Beta {
            a: c.a,
            b: c.b,
            weight: c.weight,
        }));
        out.extend(
            self.point_atoms.iter().filter(|p| p.weight > 0.0).map(|p| Component::Atom { x: p.x, weight: p.weight }),
        );
        out
    }

    /// Rate `λ_{n,k}` at which one given `k`-subset of `n` lineages merges.
    pub fn lambda_nk(&self, n: u64, k: u64) -> Result<f64> {
        if n < 2 || !(2..=n).contains(&k) {
            return arg(format!("lambda_nk needs 2 <= k <= n, got n={n}, k={k}"));
        }
        let ln_binom = ln_choose(n, k);
        Ok(self.components().iter().map(|c| (c.ln_merger_term(n, k) - ln_binom).exp()).sum())
    }

    /// `C(n,k) λ_{n,k}` for `k = 2..=n` (entry `k-2`).
    pub fn merger_rates(&self, n: u64) -> Result<Vec<f64>> {
        if n < 2 {
            return arg(format!("merger rates need n >= 2, got {n}"));
        }
        let mut out = vec![0.0; (n - 1) as usize];
        for c in self.components() {
            c.accumulate_merger_terms(n, &mut out);
        }
        Ok(out)
    }

    /// Law of `Y^n`: value `k-1` has weight `C(n,k) λ_{n,k}`, normalised by the
    /// sum of those weights.
    pub fn y_n_pmf(&self, n: u64) -> Result<RatePmf> {
        let rates = self.merger_rates(n)?;
        RatePmf::from_rates((1..n).collect(), rates)
    }

    /// Jump law of a fixation line sitting at level `j`: an LD event hitting
    /// `m >= 2` of the first `j` levels moves it by `m - 1`.
    pub fn fixation_jump_rates(&self, j: u64) -> Result<RatePmf> {
        if j < 2 {
            return arg(format!("fixation line level must be >= 2, got {j}"));
        }
        let rates = self.merger_rates(j)?;
        RatePmf::from_rates((1..j).collect(), rates)
    }

    /// Total rate of LD events with at least two of their levels in `[j]`:
    /// `Λ({0}) C(j,2) + ∫ x^{-2} P(Bin(j, x) >= 2) Λ_{(0,1]}(dx)`.
    ///
    /// Evaluated through the telescoping identity
    /// `R(l+1) - R(l) = l ∫ (1-x)^{l-1} Λ(dx)`, which is independent of the
    /// per-size merger terms used by [`Self::merger_rates`].
    pub fn ld_event_rate(&self, j: u64) -> Result<f64> {
        if j < 2 {
            return arg(format!("LD event rate needs j >= 2, got {j}"));
        }
        let comps = self.components();
        Ok((1..j).map(|i| i as f64 * comps.iter().map(|c| c.survival_moment(i - 1)).sum::<f64>()).sum())
    }

    /// `ψ(u) = Λ({0}) u² + ∫_{(0,1)} (e^{-xu} - 1 + xu) x^{-2} Λ(dx)`.
    ///
    /// Atoms at `x = 1` are included in the integral term.
    pub fn psi(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0 && u.is_finite()) {
            return arg(format!("psi needs a finite u >= 0, got {u}"));
        }
        Ok(self.components().iter().map(|c| c.psi(u)).sum())
    }
}

impl FromStr for LambdaMeasure {
    type Err = serde_json::Error;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::from_json(s)
    }
}

impl fmt::Display for LambdaMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.atom0 > 0.0 {
            parts.push(format!("{}·δ0", self.atom0));
        }
        for c in &self.beta_components {
            parts.push(format!("{}·Beta({}, {})", c.weight, c.a, c.b));
        }
        for p in &self.point_atoms {
            parts.push(format!("{}·δ{}", p.weight, p.x));
        }
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn beta_half() -> LambdaMeasure {
        LambdaMeasure::beta(0.5, 1.5).unwrap()
    }

    /// Quadrature of `∫ f(x) Λ(dx)` for a single Beta component, used as an
    /// oracle for the closed forms.
    fn beta_quad(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let norm = ln_beta(a, b).exp();
        // x = s^{1/a} on the left half, 1 - x = s^{1/b} on the right half
        let left = integrate(
            |s: f64| {
                let x = s.powf(1.0 / a);
                f(x) * (1.0 - x).powf(b - 1.0) / a
            },
            0.0,
            0.5f64.powf(a),
            1e-12,
        );
        let right = integrate(
            |s: f64| {
                let x = 1.0 - s.powf(1.0 / b);
                f(x) * x.powf(a - 1.0) / b
            },
            0.0,
            0.5f64.powf(b),
            1e-12,
        );
        (left + right) / norm
    }

    #[test]
    fn lambda_nk_kingman() {
        let k = LambdaMeasure::kingman(1.0);
        assert_eq!(k.lambda_nk(10, 2).unwrap(), 1.0);
        assert_eq!(k.lambda_nk(10, 3).unwrap(), 0.0);
    }

    #[test]
    fn lambda_nk_uniform_matches_beta_integral_and_quadrature() {
        let u = LambdaMeasure::uniform();
        let v = u.lambda_nk(5, 3).unwrap();
        assert_relative_eq!(v, 1.0 / 12.0, max_relative = 1e-12);
        let q = beta_quad(1.0, 1.0, |x| x * (1.0 - x).powi(2));
        assert_relative_eq!(v, q, max_relative = 1e-9);
    }

    #[test]
    fn lambda_nk_argument_errors() {
        let k = LambdaMeasure::kingman(1.0);
        assert!(matches!(k.lambda_nk(5, 1), Err(Error::Argument(_))));
        assert!(matches!(k.lambda_nk(5, 6), Err(Error::Argument(_))));
        assert!(matches!(k.lambda_nk(1, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn merger_table_matches_pointwise_formula() {
        let m = LambdaMeasure::new(
            0.3,
            vec![BetaComponent { a: 0.5, b: 1.5, weight: 1.0 }],
            vec![PointAtom { x: 0.2, weight: 0.4 }, PointAtom { x: 1.0, weight: 0.1 }],
        )
        .unwrap();
        for n in [2u64, 3, 7, 40, 300] {
            let table = m.merger_rates(n).unwrap();
            for k in 2..=n {
                let direct = ln_choose(n, k).exp() * m.lambda_nk(n, k).unwrap();
                assert_relative_eq!(table[(k - 2) as usize], direct, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn psi_examples() {
        let k = LambdaMeasure::kingman(1.0);
        assert_eq!(k.psi(3.0).unwrap(), 9.0);
        assert_eq!(beta_half().psi(0.0).unwrap(), 0.0);
        let d1 = LambdaMeasure::dirac(1.0).unwrap();
        assert_relative_eq!(d1.psi(2.0).unwrap(), (-2.0f64).exp() + 1.0, max_relative = 1e-14);
        assert_relative_eq!(d1.psi(2.0).unwrap(), 1.135_335_283_236_612_7, max_relative = 1e-12);
    }

    #[test]
    fn psi_beta_matches_direct_quadrature() {
        for &(a, b) in &[(1.0, 1.0), (0.5, 1.5), (2.0, 3.0)] {
            let m = LambdaMeasure::beta(a, b).unwrap();
            for &u in &[0.5, 10.0, 1e3] {
                let oracle = beta_quad(a, b, |x| {
                    let y = x * u;
                    if y < 1e-3 {
                        u * u * (0.5 - y / 6.0 + y * y / 24.0)
                    } else {
                        ((-y).exp() - 1.0 + y) / (x * x)
                    }
                });
                assert_relative_eq!(m.psi(u).unwrap(), oracle, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn psi_uniform_closed_form() {
        // For Λ = Lebesgue, ψ(u) = u ∫_0^u (e^{-y} - 1 + y) y^{-2} dy, and the
        // inner integral equals ln u + γ_E - 1 + E_1(u) + (1 - e^{-u})/u.
        let m = LambdaMeasure::uniform();
        let u = 50.0;
        let inner = integrate(|y: f64| exp_defect(y) / (y * y), 0.0, u, 1e-13);
        assert_relative_eq!(m.psi(u).unwrap(), u * inner, max_relative = 1e-8);
    }

    #[test]
    fn y_n_pmf_examples() {
        let k = LambdaMeasure::kingman(2.0);
        for n in [2u64, 5, 50] {
            let p = k.y_n_pmf(n).unwrap();
            assert_eq!(p.prob(1), 1.0);
        }
        let u = LambdaMeasure::uniform().y_n_pmf(3).unwrap();
        assert_eq!(u.support, vec![1, 2]);
        assert_relative_eq!(u.probs[0], 0.75, max_relative = 1e-12);
        assert_relative_eq!(u.probs[1], 0.25, max_relative = 1e-12);
        assert_relative_eq!(u.total_rate, 2.0, max_relative = 1e-12);
        // quadrature oracle for the numerators 3/2 and 1/2
        let n2 = 3.0 * beta_quad(1.0, 1.0, |x| 1.0 - x);
        let n3 = beta_quad(1.0, 1.0, |x| x);
        assert_relative_eq!(n2 / (n2 + n3), 0.75, max_relative = 1e-9);
    }

    #[test]
    fn fixation_jump_rates_examples() {
        let k = LambdaMeasure::kingman(1.0);
        let r = k.fixation_jump_rates(5).unwrap();
        assert_eq!(r.total_rate, 10.0);
        assert_eq!(r.prob(1), 1.0);
        let u = LambdaMeasure::uniform().fixation_jump_rates(3).unwrap();
        assert_relative_eq!(u.total_rate, 2.0, max_relative = 1e-12);
        assert_relative_eq!(u.prob(1), 0.75, max_relative = 1e-12);
        assert!(matches!(k.fixation_jump_rates(1), Err(Error::Argument(_))));
    }

    #[test]
    fn ld_event_rate_examples() {
        assert_eq!(LambdaMeasure::kingman(1.0).ld_event_rate(6).unwrap(), 15.0);
        assert_relative_eq!(LambdaMeasure::dirac(1.0).unwrap().ld_event_rate(3).unwrap(), 1.0, max_relative = 1e-14);
        assert!(LambdaMeasure::kingman(1.0).ld_event_rate(1).is_err());
    }

    #[test]
    fn binomial_identity_against_quadrature() {
        // Σ_k C(n,k) λ_{n,k} = ∫ x^{-2}(1 - (1-x)^n - n x (1-x)^{n-1}) Λ(dx)
        let (a, b) = (0.5, 1.5);
        let m = beta_half();
        for n in [2u64, 3, 10, 60] {
            let sum: f64 = m.merger_rates(n).unwrap().iter().sum();
            let nf = n as f64;
            let oracle = beta_quad(a, b, |x| {
                // the expansion avoids cancellation at tiny x
                if x < 1e-6 {
                    0.5 * nf * (nf - 1.0) * (1.0 - (nf - 2.0) * 2.0 * x / 3.0)
                } else {
                    (1.0 - (1.0 - x).powf(nf) - nf * x * (1.0 - x).powf(nf - 1.0)) / (x * x)
                }
            });
            assert_relative_eq!(sum, oracle, max_relative = 1e-9);
            assert_relative_eq!(m.ld_event_rate(n).unwrap(), sum, max_relative = 1e-11);
        }
    }

    #[test]
    fn degenerate_and_invalid_measures() {
        assert!(LambdaMeasure::new(0.0, vec![], vec![]).is_err());
        assert!(LambdaMeasure::dirac(0.0).is_err());
        assert!(LambdaMeasure::dirac(1.5).is_err());
        assert!(LambdaMeasure::beta(0.0, 1.0).is_err());
        assert!(LambdaMeasure::new(-1.0, vec![], vec![PointAtom { x: 0.5, weight: 2.0 }]).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let text =
            r#"{"atom0": 0.5, "beta": [{"a": 0.5, "b": 1.5, "weight": 1.0}], "atoms": [{"x": 0.25, "weight": 0.1}]}"#;
        let m: LambdaMeasure = text.parse().unwrap();
        assert_eq!(m.atom0, 0.5);
        assert_eq!(m.beta_components.len(), 1);
        let back: LambdaMeasure = serde_json::to_string(&m).unwrap().parse().unwrap();
        assert_eq!(back, m);
        assert!(LambdaMeasure::from_json(r#"{"atom0": 1, "extra": 2}"#).is_err());
        let err = LambdaMeasure::from_json("{\n\"atoms\": [{\"x\": 2.0, \"weight\": 1}]\n}").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn sample_merger_size_follows_terms() {
        use rand::SeedableRng;
        let c = Component::Beta { a: 0.5, b: 1.5, weight: 1.0 };
        let n = 12u64;
        let mut terms = vec![0.0; (n - 1) as usize];
        c.accumulate_merger_terms(n, &mut terms);
        let total: f64 = terms.iter().sum();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let reps = 200_000;
        let mut counts = vec![0usize; (n - 1) as usize];
        for _ in 0..reps {
            counts[(c.sample_merger_size(n, total, &mut rng) - 2) as usize] += 1;
        }
        for (i, &cnt) in counts.iter().enumerate() {
            let p = terms[i] / total;
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            assert!((cnt as f64 / reps as f64 - p).abs() < 5.0 * se + 1e-9, "k={}", i + 2);
        }
    }

    proptest! {
        #[test]
        fn pmfs_agree_and_normalise(n in 2u64..200, a in 0.2f64..3.0, b in 0.2f64..3.0, w0 in 0.0f64..2.0) {
            let m = LambdaMeasure::new(w0, vec![BetaComponent { a, b, weight: 1.0 }], vec![]).unwrap();
            let y = m.y_n_pmf(n).unwrap();
            let f = m.fixation_jump_rates(n).unwrap();
            prop_assert!((y.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (p, q) in y.probs.iter().zip(&f.probs) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
            let r = m.ld_event_rate(n).unwrap();
            prop_assert!((r - f.total_rate).abs() <= 1e-9 * r);
        }

        #[test]
        fn lambda_nk_nonincreasing_in_n(k in 2u64..20, extra in 0u64..50, a in 0.2f64..3.0, b in 0.2f64..3.0) {
            let m = LambdaMeasure::beta(a, b).unwrap();
            let n = k + extra;
            let here = m.lambda_nk(n, k).unwrap();
            let next = m.lambda_nk(n + 1, k).unwrap();
            prop_assert!(next <= here * (1.0 + 1e-12));
        }

        #[test]
        fn ld_event_rate_strictly_increasing(j in 2u64..300, a in 0.2f64..3.0, b in 0.2f64..3.0) {
            let m = LambdaMeasure::beta(a, b).unwrap();
            prop_assert!(m.ld_event_rate(j + 1).unwrap() > m.ld_event_rate(j).unwrap());
        }
    }

    #[test]
    fn psi_nondecreasing_and_convex_on_grid() {
        for m in [beta_half(), LambdaMeasure::uniform(), LambdaMeasure::kingman(1.0)] {
            let grid: Vec<f64> = (0..40).map(|i| 10f64.powf(i as f64 * 0.2)).collect();
            let vals: Vec<f64> = grid.iter().map(|&u| m.psi(u).unwrap()).collect();
            for w in vals.windows(2) {
                assert!(w[1] >= w[0]);
            }
            for i in 1..grid.len() - 1 {
                // convexity via slopes on the (non-uniform) grid
                let s1 = (vals[i] - vals[i - 1]) / (grid[i] - grid[i - 1]);
                let s2 = (vals[i + 1] - vals[i]) / (grid[i + 1] - grid[i]);
                assert!(s2 >= s1 * (1.0 - 1e-8), "{m} at u={}", grid[i]);
            }
        }
    }

    #[test]
    fn scaling_multiplies_every_rate() {
        let m = LambdaMeasure::new(
            0.5,
            vec![BetaComponent { a: 0.5, b: 1.5, weight: 1.0 }],
            vec![PointAtom { x: 0.3, weight: 2.0 }],
        )
        .unwrap();
        let s = m.scaled(3.0).unwrap();
        for (n, k) in [(2, 2), (7, 3), (20, 20)] {
            assert_relative_eq!(s.lambda_nk(n, k).unwrap(), 3.0 * m.lambda_nk(n, k).unwrap(), max_relative = 1e-12);
        }
        assert!(m.scaled(0.0).is_err());
        assert!(m.scaled(f64::NAN).is_err());
    }
}
