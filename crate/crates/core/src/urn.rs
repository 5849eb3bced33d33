//! Urns with random reinforcement and their particle representation.
//!
//! An urn holds `B_u` balls of each color `u`. At each step `b ~ p^{U}` is
//! drawn for the current total `U`, a ball is drawn uniformly and `b` balls
//! of its color are added. The Λ-urn takes `p^l` to be the law of `Y^l`.
//!
//! The particle system orders the balls: a uniform set `S` of `b + 1`
//! positions among `U + b` is drawn, and `b` copies of the color found at
//! `min S` are inserted at the other positions of `S`. Colors are 0-based
//! here.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::lambda::{Component, LambdaMeasure, RatePmf};
use crate::lookdown::overshoot;
use crate::partition::MassPartition;
use crate::replicate::run_replicates;

/// Default truncation `M_cut` of the limit `m_∞`.
pub const DEFAULT_M_CUT: u64 = 100_000;
/// Default state budget of [`exact_enumerate`].
pub const DEFAULT_STATE_BOUND: usize = 1_000_000;
/// Default threshold of [`degeneracy_probe`].
pub const DEFAULT_DEGENERACY_THRESHOLD: f64 = 1e-3;

/// A family `(p^l)` of laws on the positive integers, indexed by urn size.
pub trait GrowthLaw: Sync {
    /// Draws the number of balls added to an urn holding `l` balls.
    fn sample<R: Rng + ?Sized>(&self, l: u64, rng: &mut R) -> u64;

    /// `p^l` in floating point.
    fn pmf(&self, l: u64) -> Result<RatePmf>;

    /// `p^l` in exact arithmetic, when it has finite support and is known
    /// exactly.
    fn exact_pmf(&self, _l: u64) -> Option<Vec<(u64, BigRational)>> {
        None
    }
}

/// `p^l = δ_1`: the Pólya urn.
#[derive(Debug, Clone, Copy, Default)]
pub struct KingmanGrowth;

impl GrowthLaw for KingmanGrowth {
    fn sample<R: Rng + ?Sized>(&self, _l: u64, _rng: &mut R) -> u64 {
        1
    }

    fn pmf(&self, _l: u64) -> Result<RatePmf> {
        RatePmf::from_rates(vec![1], vec![1.0])
    }

    fn exact_pmf(&self, _l: u64) -> Option<Vec<(u64, BigRational)>> {
        Some(vec![(1, BigRational::one())])
    }
}

/// The same finite-support law at every urn size, given exactly.
#[derive(Debug, Clone)]
pub struct FiniteGrowth {
    table: Vec<(u64, BigRational)>,
}

impl FiniteGrowth {
    pub fn new(table: Vec<(u64, BigRational)>) -> Result<Self> {
        if table.is_empty() || table.iter().any(|(b, p)| *b == 0 || p <= &BigRational::zero()) {
            return arg("growth law needs positive sizes with positive probabilities");
        }
        let total: BigRational = table.iter().map(|(_, p)| p.clone()).sum();
        if !total.is_one() {
            return arg(format!("growth law probabilities sum to {total}, not 1"));
        }
        let mut table = table;
        table.sort_by_key(|(b, _)| *b);
        if table.windows(2).any(|w| w[0].0 == w[1].0) {
            return arg("growth law sizes must be distinct");
        }
        Ok(FiniteGrowth { table })
    }
}

impl GrowthLaw for FiniteGrowth {
    fn sample<R: Rng + ?Sized>(&self, _l: u64, rng: &mut R) -> u64 {
        let mut u: f64 = rng.random();
        for (b, p) in &self.table {
            let p = p.to_f64().unwrap_or(0.0);
            if u < p {
                return *b;
            }
            u -= p;
        }
        self.table[self.table.len() - 1].0
    }

    fn pmf(&self, _l: u64) -> Result<RatePmf> {
        RatePmf::from_rates(
            self.table.iter().map(|(b, _)| *b).collect(),
            self.table.iter().map(|(_, p)| p.to_f64().unwrap_or(0.0)).collect(),
        )
    }

    fn exact_pmf(&self, _l: u64) -> Option<Vec<(u64, BigRational)>> {
        Some(self.table.clone())
    }
}

/// Per-component tables backing the Λ-urn sampler.
struct ComponentTable {
    component: Component,
    /// `∫ (1-x)^i ν(dx)` for `i = 0..max_l`
    survival: Vec<f64>,
    /// total rate `Σ_k C(l,k) λ_{l,k}` at index `l`
    total: Vec<f64>,
}

/// Which growth law a [`LambdaGrowth`] draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaUrnLaw {
    /// `p^l` = law of `Y^l`, the merger size of `l` lineages minus one.
    #[default]
    MergerSize,
    /// `p^l` = jump law of a look-down fixation line sitting at level
    /// `l + 1`: the `m - 1` extra hits among levels `1..=l+1` plus the levels
    /// of the same event skipped above them. This is the law of the window
    /// below a fixation line; it agrees with `MergerSize` for Λ = δ₀.
    Lookdown,
}

/// Reported in place of an infinite jump (an event hitting every level).
pub const EXPLOSION: u64 = 1 << 50;

/// Growth laws derived from a measure Λ.
///
/// Rates are tabulated up to `max_l`; a draw first picks a component of Λ in
/// proportion to its total rate and then walks the merger terms of that
/// component upward from `k = 2`, so it costs `O(Y^l)` rather than `O(l)`.
pub struct LambdaGrowth {
    lambda: LambdaMeasure,
    tables: Vec<ComponentTable>,
    max_l: u64,
    law: LambdaUrnLaw,
}

impl LambdaGrowth {
    /// `p^l` = law of `Y^l`.
    pub fn new(lambda: &LambdaMeasure, max_l: u64) -> Result<Self> {
        Self::with_law(lambda, max_l, LambdaUrnLaw::MergerSize)
    }

    pub fn with_law(lambda: &LambdaMeasure, max_l: u64, law: LambdaUrnLaw) -> Result<Self> {
        // rejects measures without any merger
        lambda.y_n_pmf(2)?;
        let max_l = max_l.max(2) + 1;
        let tables = lambda
            .components()
            .into_iter()
            .map(|component| {
                let mut survival = Vec::with_capacity(max_l as usize);
                let mut s = component.survival_moment(0);
                for i in 0..max_l {
                    survival.push(s);
                    s = match component {
                        Component::Kingman { .. } => s,
                        Component::Beta { a, b, .. } => s * (b + i as f64) / (a + b + i as f64),
                        Component::Atom { x, .. } => s * (1.0 - x),
                    };
                }
                let mut total = vec![0.0; max_l as usize + 1];
                for l in 2..=max_l as usize {
                    total[l] = total[l - 1] + (l - 1) as f64 * survival[l - 2];
                }
                ComponentTable { component, survival, total }
            })
            .collect();
        Ok(LambdaGrowth { lambda: lambda.clone(), tables, max_l, law })
    }

    pub fn lambda(&self) -> &LambdaMeasure {
        &self.lambda
    }

    pub fn law(&self) -> LambdaUrnLaw {
        self.law
    }

    /// Picks a component in proportion to its total rate at size `n`, then
    /// a merger size `k` from it.
    fn draw_merger<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> (Component, u64) {
        if n > self.max_l {
            let totals: Vec<f64> = self.tables.iter().map(|t| t.component.merger_total(n)).collect();
            let i = pick(&totals, rng);
            let c = self.tables[i].component;
            return (c, c.sample_merger_size(n, totals[i], rng));
        }
        let i = if self.tables.len() == 1 {
            0
        } else {
            let totals: Vec<f64> = self.tables.iter().map(|t| t.total[n as usize]).collect();
            pick(&totals, rng)
        };
        let t = &self.tables[i];
        (t.component, Self::walk(t, n, rng))
    }

    fn walk<R: Rng + ?Sized>(table: &ComponentTable, l: u64, rng: &mut R) -> u64 {
        let c = &table.component;
        let total = table.total[l as usize];
        match *c {
            Component::Kingman { .. } => return 2,
            Component::Atom { x, .. } if x >= 1.0 => return l,
            _ => {}
        }
        // C(l,2) λ_{l,2} = C(l,2) ∫ (1-x)^{l-2} ν(dx)
        let mut term = 0.5 * (l * (l - 1)) as f64 * table.survival[(l - 2) as usize];
        if !(term > 1e-250) {
            return c.sample_merger_size(l, total, rng);
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last_positive = 2;
        for k in 2..=l {
            if term > 0.0 {
                last_positive = k;
            }
            acc += term;
            if acc > target {
                return k;
            }
            if k < l {
                term *= c.merger_ratio(l, k);
            }
        }
        last_positive
    }
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

impl GrowthLaw for LambdaGrowth {
    fn sample<R: Rng + ?Sized>(&self, l: u64, rng: &mut R) -> u64 {
        match self.law {
            LambdaUrnLaw::MergerSize => {
                if l < 2 {
                    // a single ball never changes frequencies; add one
                    return 1;
                }
                self.draw_merger(l, rng).1 - 1
            }
            LambdaUrnLaw::Lookdown => {
                let j = l + 1;
                let (c, m) = self.draw_merger(j, rng);
                match overshoot(&c, j, m, rng) {
                    Some(extra) => (m - 1 + extra).min(EXPLOSION),
                    None => EXPLOSION,
                }
            }
        }
    }

    fn pmf(&self, l: u64) -> Result<RatePmf> {
        match self.law {
            LambdaUrnLaw::MergerSize if l < 2 => RatePmf::from_rates(vec![1], vec![1.0]),
            LambdaUrnLaw::MergerSize => self.lambda.y_n_pmf(l),
            LambdaUrnLaw::Lookdown => {
                Err(Error::Unsupported("the look-down growth law has unbounded support".to_string()))
            }
        }
    }
}

/// Color counts `B(n)` after `n` steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UrnState {
    pub counts: Vec<u64>,
    pub step: u64,
}

impl UrnState {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.iter().sum::<u64>() == 0 {
            return arg("urn must hold at least one ball");
        }
        Ok(UrnState { counts, step: 0 })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn frequencies(&self) -> MassPartition {
        MassPartition::from_counts(&self.counts).expect("nonempty urn")
    }

    /// Draws a color with probability proportional to its count.
    fn draw_color<R: Rng + ?Sized>(&self, total: u64, rng: &mut R) -> usize {
        let mut ball = rng.random_range(0..total);
        for (u, &c) in self.counts.iter().enumerate() {
            if ball < c {
                return u;
            }
            ball -= c;
        }
        unreachable!("ball index below total")
    }

    fn step_in_place<G: GrowthLaw, R: Rng + ?Sized>(&mut self, total: u64, law: &G, rng: &mut R) -> u64 {
        let b = law.sample(total, rng);
        let u = self.draw_color(total, rng);
        self.counts[u] += b;
        self.step += 1;
        b
    }
}

/// One urn step.
pub fn urn_step<G: GrowthLaw, R: Rng + ?Sized>(state: &UrnState, law: &G, rng: &mut R) -> Result<UrnState> {
    let total = state.total();
    if total == 0 {
        return arg("cannot draw from an empty urn");
    }
    let mut next = state.clone();
    next.step_in_place(total, law, rng);
    Ok(next)
}

/// Ordered colors `V(n)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParticleState {
    pub colors: Vec<u32>,
    pub step: u64,
}

impl ParticleState {
    pub fn color_counts(&self, num_colors: usize) -> Vec<u64> {
        let mut c = vec![0u64; num_colors];
        for &u in &self.colors {
            c[u as usize] += 1;
        }
        c
    }
}

/// `σ_S^u`: the vector of length `len(v) + |positions|` with `color` at the
/// given sorted 0-based `positions` and the entries of `v`, in order,
/// elsewhere.
pub fn insert_copies(v: &[u32], positions: &[usize], color: u32) -> Vec<u32> {
    let len = v.len() + positions.len();
    let mut out = Vec::with_capacity(len);
    let mut src = v.iter();
    let mut pos = positions.iter().peekable();
    for i in 0..len {
        if pos.peek() == Some(&&i) {
            pos.next();
            out.push(color);
        } else {
            out.push(*src.next().expect("positions lie inside the output"));
        }
    }
    out
}

/// Deletes the entries at the given sorted positions (inverse of
/// [`insert_copies`]).
pub fn remove_positions(w: &[u32], positions: &[usize]) -> Vec<u32> {
    let mut pos = positions.iter().peekable();
    let mut out = Vec::with_capacity(w.len().saturating_sub(positions.len()));
    for (i, &x) in w.iter().enumerate() {
        if pos.peek() == Some(&&i) {
            pos.next();
        } else {
            out.push(x);
        }
    }
    out
}

/// One step of the particle system.
pub fn particle_step<G: GrowthLaw, R: Rng + ?Sized>(
    state: &ParticleState,
    law: &G,
    rng: &mut R,
) -> Result<ParticleState> {
    let u_n = state.colors.len();
    if u_n == 0 {
        return arg("particle state must be nonempty");
    }
    let b = law.sample(u_n as u64, rng) as usize;
    let mut s: Vec<usize> = index::sample(rng, u_n + b, b + 1).into_vec();
    s.sort_unstable();
    let color = state.colors[s[0]];
    Ok(ParticleState { colors: insert_copies(&state.colors, &s[1..], color), step: state.step + 1 })
}

/// A uniform arrangement of the multiset with color counts `counts`.
pub fn sample_p_b<R: Rng + ?Sized>(counts: &[u64], rng: &mut R) -> Result<ParticleState> {
    if counts.iter().sum::<u64>() == 0 {
        return arg("color counts must not all be zero");
    }
    let mut colors: Vec<u32> =
        counts.iter().enumerate().flat_map(|(u, &c)| std::iter::repeat_n(u as u32, c as usize)).collect();
    colors.shuffle(rng);
    Ok(ParticleState { colors, step: 0 })
}

/// Runs the urn from `initial` until it holds at least `m_cut` balls and
/// returns the color frequencies, an approximation of `m_∞` whose
/// coordinates still move by about `m_cut^{-1/2}`.
pub fn run_urn_to_limit<G: GrowthLaw, R: Rng + ?Sized>(
    law: &G,
    initial: &[u64],
    m_cut: u64,
    rng: &mut R,
) -> Result<MassPartition> {
    let mut state = UrnState::new(initial.to_vec())?;
    let mut total = state.total();
    if m_cut <= total {
        return arg(format!("M_cut = {m_cut} must exceed the initial ball count {total}"));
    }
    if state.counts.iter().filter(|&&c| c > 0).count() == 1 {
        return Ok(state.frequencies());
    }
    while total < m_cut {
        total += state.step_in_place(total, law, rng);
    }
    Ok(state.frequencies())
}

/// [`run_urn_to_limit`] for the Λ-urn. Builds the rate tables on every call;
/// loops should construct a [`LambdaGrowth`] once instead.
pub fn run_to_limit<R: Rng + ?Sized>(
    lambda: &LambdaMeasure,
    initial: &[u64],
    m_cut: u64,
    rng: &mut R,
) -> Result<MassPartition> {
    let law = LambdaGrowth::new(lambda, m_cut)?;
    run_urn_to_limit(&law, initial, m_cut, rng)
}

/// Sample of `D_k^Λ`: the Λ-urn limit from one ball of each of `k` colors.
pub fn sample_d_k<G: GrowthLaw, R: Rng + ?Sized>(law: &G, k: usize, m_cut: u64, rng: &mut R) -> Result<MassPartition> {
    if k == 0 {
        return arg("D_k needs k >= 1");
    }
    if k == 1 {
        return Ok(MassPartition::unit());
    }
    run_urn_to_limit(law, &vec![1; k], m_cut, rng)
}

#[derive(Debug, Clone, Serialize)]
pub struct DegeneracyReport {
    pub k: usize,
    pub m_cut: u64,
    pub threshold: f64,
    pub reps: usize,
    /// Fraction of samples with some coordinate below `threshold`.
    pub fraction: f64,
    /// 95% Wilson interval for `fraction`.
    pub interval: (f64, f64),
    /// Smallest coordinate of each sample.
    pub min_freqs: Vec<f64>,
}

/// Estimates how often `D_k^Λ` has a coordinate below `threshold`.
pub fn degeneracy_probe(
    lambda: &LambdaMeasure,
    law: LambdaUrnLaw,
    k: usize,
    m_cut: u64,
    reps: usize,
    threshold: f64,
    seed: u64,
) -> Result<DegeneracyReport> {
    if reps == 0 {
        return arg("degeneracy probe needs at least one replicate");
    }
    let law = LambdaGrowth::with_law(lambda, m_cut, law)?;
    let min_freqs = run_replicates(seed, reps, |rng, _| sample_d_k(&law, k, m_cut, rng).map(|m| m.min()))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let hits = min_freqs.iter().filter(|&&m| m < threshold).count();
    let fraction = hits as f64 / reps as f64;
    Ok(DegeneracyReport { k, m_cut, threshold, reps, fraction, interval: wilson_interval(hits, reps, 1.96), min_freqs })
}

fn wilson_interval(hits: usize, n: usize, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = hits as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Urn,
    Particle,
}

/// Exact law after `n` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLaw {
    /// Law of the color counts: `B(n)` for the urn, `B̄(n)` for the particle
    /// system.
    pub counts: BTreeMap<Vec<u64>, BigRational>,
    /// Law of `V(n)` (particle model only).
    pub particles: Option<BTreeMap<Vec<u32>, BigRational>>,
}

fn rational(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// All distinct arrangements of the multiset with the given color counts.
fn arrangements(counts: &[u64]) -> Vec<Vec<u32>> {
    fn go(counts: &mut [u64], prefix: &mut Vec<u32>, len: usize, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == len {
            out.push(prefix.clone());
            return;
        }
        for u in 0..counts.len() {
            if counts[u] > 0 {
                counts[u] -= 1;
                prefix.push(u as u32);
                go(counts, prefix, len, out);
                prefix.pop();
                counts[u] += 1;
            }
        }
    }
    let len = counts.iter().sum::<u64>() as usize;
    let mut out = Vec::new();
    go(&mut counts.to_vec(), &mut Vec::new(), len, &mut out);
    out
}

/// All sorted `size`-subsets of `0..n`.
fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < size - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, size, &mut Vec::new(), &mut out);
    out
}

/// Enumerates every outcome of `n_steps <= 5` steps with exact rational
/// probabilities. The particle model starts from the uniform arrangement
/// `P_{B0}`. Fails with a capacity error once more than `bound` weighted
/// outcomes would have to be expanded in one step.
pub fn exact_enumerate<G: GrowthLaw>(
    model: Model,
    law: &G,
    initial: &[u64],
    n_steps: usize,
    bound: usize,
) -> Result<ExactLaw> {
    if n_steps > 5 {
        return arg(format!("exact enumeration supports at most 5 steps, got {n_steps}"));
    }
    if initial.iter().sum::<u64>() == 0 {
        return arg("initial urn must hold at least one ball");
    }
    let c = initial.len();
    let exact = |l: u64| {
        law.exact_pmf(l)
            .ok_or_else(|| Error::Unsupported(format!("growth law at size {l} has no exact finite-support form")))
    };
    match model {
        Model::Urn => {
            let mut states = BTreeMap::from([(initial.to_vec(), BigRational::one())]);
            for _ in 0..n_steps {
                let mut next: BTreeMap<Vec<u64>, BigRational> = BTreeMap::new();
                let mut expanded = 0usize;
                for (counts, p) in &states {
                    let total: u64 = counts.iter().sum();
                    let pmf = exact(total)?;
                    expanded += pmf.len() * c;
                    if expanded > bound {
                        return Err(Error::Capacity { states: expanded, bound });
                    }
                    for (b, pb) in &pmf {
                        for u in 0..c {
                            if counts[u] == 0 {
                                continue;
                            }
                            let mut nc = counts.clone();
                            nc[u] += b;
                            let w = p * pb * rational(counts[u]) / rational(total);
                            *next.entry(nc).or_insert_with(BigRational::zero) += w;
                        }
                    }
                }
                states = next;
            }
            Ok(ExactLaw { counts: states, particles: None })
        }
        Model::Particle => {
            let start = arrangements(initial);
            if start.len() > bound {
                return Err(Error::Capacity { states: start.len(), bound });
            }
            let p0 = BigRational::new(BigInt::one(), BigInt::from(start.len()));
            let mut states: BTreeMap<Vec<u32>, BigRational> = start.into_iter().map(|v| (v, p0.clone())).collect();
            for _ in 0..n_steps {
                let mut next: BTreeMap<Vec<u32>, BigRational> = BTreeMap::new();
                let mut expanded = 0usize;
                for (v, p) in &states {
                    let u_n = v.len();
                    let pmf = exact(u_n as u64)?;
                    for (b, pb) in &pmf {
                        let b = *b as usize;
                        let sets = subsets(u_n + b, b + 1);
                        expanded += sets.len();
                        if expanded > bound {
                            return Err(Error::Capacity { states: expanded, bound });
                        }
                        let w = p * pb / rational(sets.len() as u64);
                        for s in sets {
                            let w_next = insert_copies(v, &s[1..], v[s[0]]);
                            *next.entry(w_next).or_insert_with(BigRational::zero) += w.clone();
                        }
                    }
                }
                states = next;
            }
            let mut counts: BTreeMap<Vec<u64>, BigRational> = BTreeMap::new();
            for (v, p) in &states {
                let mut cnt = vec![0u64; c];
                for &u in v {
                    cnt[u as usize] += 1;
                }
                *counts.entry(cnt).or_insert_with(BigRational::zero) += p.clone();
            }
            Ok(ExactLaw { counts, particles: Some(states) })
        }
    }
}

/// Total variation distance between two exact laws.
pub fn total_variation<K: Ord + Clone>(a: &BTreeMap<K, BigRational>, b: &BTreeMap<K, BigRational>) -> BigRational {
    let zero = BigRational::zero();
    let keys: std::collections::BTreeSet<&K> = a.keys().chain(b.keys()).collect();
    let sum: BigRational = keys
        .into_iter()
        .map(|k| {
            let d = a.get(k).unwrap_or(&zero) - b.get(k).unwrap_or(&zero);
            if d < zero {
                -d
            } else {
                d
            }
        })
        .sum();
    sum / rational(2)
}

/// True when, for every count vector with positive probability, every
/// arrangement of it appears in `particles` with the same probability.
pub fn conditionally_uniform(law: &ExactLaw) -> bool {
    let Some(particles) = &law.particles else {
        return false;
    };
    law.counts.iter().all(|(counts, p)| {
        let all = arrangements(counts);
        let each = p / rational(all.len() as u64);
        all.iter().all(|v| particles.get(v) == Some(&each))
    })
}

/// Probability mass of an exact law (1 for a law produced by
/// [`exact_enumerate`]).
pub fn total_mass<K>(law: &BTreeMap<K, BigRational>) -> BigRational {
    law.values().cloned().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replicate::replicate_rng;
    use crate::stats::{chi_square_gof, ks_one_sample, simplex_marginal_cdf};
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn kingman_urn_first_step() {
        let mut rng = replicate_rng(40, 0);
        let s = UrnState::new(vec![1, 1]).unwrap();
        let mut first = 0;
        for _ in 0..10_000 {
            let n = urn_step(&s, &KingmanGrowth, &mut rng).unwrap();
            assert!(n.counts == vec![2, 1] || n.counts == vec![1, 2]);
            if n.counts[0] == 2 {
                first += 1;
            }
        }
        assert!(chi_square_gof(&[first, 10_000 - first], &[1.0, 1.0]).unwrap().passed());
        let single = UrnState::new(vec![3]).unwrap();
        let n = urn_step(&single, &KingmanGrowth, &mut rng).unwrap();
        assert_eq!((n.counts[0], n.frequencies().as_slice()[0]), (4, 1.0));
        assert!(UrnState::new(vec![0, 0]).is_err());
    }

    #[test]
    fn particle_step_example_and_round_trip() {
        assert_eq!(insert_copies(&[0, 1], &[1], 0), vec![0, 0, 1]);
        assert_eq!(remove_positions(&[0, 0, 1], &[1]), vec![0, 1]);
        let mut rng = replicate_rng(41, 0);
        let law = LambdaGrowth::new(&LambdaMeasure::beta(0.5, 1.5).unwrap(), 1000).unwrap();
        let mut state = sample_p_b(&[3, 2, 4], &mut rng).unwrap();
        for _ in 0..200 {
            let next = particle_step(&state, &law, &mut rng).unwrap();
            assert!(next.colors.len() > state.colors.len());
            state = next;
        }
    }

    proptest! {
        #[test]
        fn sigma_round_trip(v in prop::collection::vec(0u32..4, 1..12), b in 1usize..5, seed in any::<u64>(), color in 0u32..4) {
            let mut rng = replicate_rng(seed, 0);
            let mut s: Vec<usize> = index::sample(&mut rng, v.len() + b, b).into_vec();
            s.sort_unstable();
            let w = insert_copies(&v, &s, color);
            prop_assert_eq!(w.len(), v.len() + b);
            prop_assert!(s.iter().all(|&i| w[i] == color));
            prop_assert_eq!(remove_positions(&w, &s), v);
        }

        #[test]
        fn particle_counts_form_an_urn_path(seed in any::<u64>()) {
            let mut rng = replicate_rng(seed, 1);
            let law = LambdaGrowth::new(&LambdaMeasure::uniform(), 200).unwrap();
            let mut v = sample_p_b(&[1, 2, 1], &mut rng).unwrap();
            for _ in 0..20 {
                let before = v.color_counts(3);
                v = particle_step(&v, &law, &mut rng).unwrap();
                let after = v.color_counts(3);
                let grown: Vec<usize> = (0..3).filter(|&u| after[u] != before[u]).collect();
                prop_assert_eq!(grown.len(), 1);
                prop_assert!(after[grown[0]] > before[grown[0]]);
            }
        }
    }

    #[test]
    fn p_b_examples() {
        let mut rng = replicate_rng(42, 0);
        assert_eq!(sample_p_b(&[2, 0], &mut rng).unwrap().colors, vec![0, 0]);
        assert!(sample_p_b(&[0, 0], &mut rng).is_err());
        let arr = arrangements(&[2, 1]);
        let mut hits = vec![0u64; arr.len()];
        for _ in 0..100_000 {
            let v = sample_p_b(&[2, 1], &mut rng).unwrap().colors;
            hits[arr.iter().position(|a| *a == v).unwrap()] += 1;
        }
        assert_eq!(arr.len(), 3);
        assert!(chi_square_gof(&hits, &[1.0; 3]).unwrap().passed());
    }

    #[test]
    fn lambda_growth_matches_y_law() {
        let lambda = LambdaMeasure::new(
            0.3,
            vec![crate::lambda::BetaComponent { a: 0.5, b: 1.5, weight: 1.0 }],
            vec![crate::lambda::PointAtom { x: 0.4, weight: 0.5 }],
        )
        .unwrap();
        let law = LambdaGrowth::new(&lambda, 100).unwrap();
        let mut rng = replicate_rng(43, 0);
        for l in [2u64, 3, 10, 60] {
            let pmf = lambda.y_n_pmf(l).unwrap();
            let mut counts = vec![0u64; (l - 1) as usize];
            for _ in 0..100_000 {
                counts[(law.sample(l, &mut rng) - 1) as usize] += 1;
            }
            let rep = chi_square_gof(&counts, &pmf.probs).unwrap();
            assert!(rep.passed(), "l={l}: {rep:?}");
        }
        // totals from the telescoped tables equal the summed merger terms
        for t in &law.tables {
            for l in [2u64, 7, 50] {
                let direct = t.component.merger_total(l);
                assert!((t.total[l as usize] - direct).abs() <= 1e-10 * direct);
            }
        }
    }

    #[test]
    fn kingman_limit_is_uniform_dirichlet() {
        let mut rng = replicate_rng(44, 0);
        let xs: Vec<f64> =
            (0..2000).map(|_| run_urn_to_limit(&KingmanGrowth, &[1, 1, 1, 1], 5000, &mut rng).unwrap()[1]).collect();
        assert!(ks_one_sample(&xs, simplex_marginal_cdf(4)).unwrap().passed());
        assert_eq!(run_urn_to_limit(&KingmanGrowth, &[0, 3], 100, &mut rng).unwrap().as_slice(), &[0.0, 1.0]);
        assert!(run_urn_to_limit(&KingmanGrowth, &[5, 5], 10, &mut rng).is_err());
    }

    #[test]
    fn single_steps_are_martingale_increments() {
        let mut rng = replicate_rng(45, 0);
        for lambda in [LambdaMeasure::kingman(1.0), LambdaMeasure::beta(0.5, 1.5).unwrap()] {
            let law = LambdaGrowth::new(&lambda, 100).unwrap();
            let s = UrnState::new(vec![5, 2, 1]).unwrap();
            let f0 = s.frequencies();
            let reps = 100_000;
            for u in 0..3 {
                let incs: Vec<f64> =
                    (0..reps).map(|_| urn_step(&s, &law, &mut rng).unwrap().frequencies()[u] - f0[u]).collect();
                let rep = crate::stats::mean_z_test(&incs, 0.0).unwrap();
                assert!(rep.statistic < 3.0, "{rep:?}");
            }
        }
    }

    #[test]
    fn exact_urn_examples() {
        let law = exact_enumerate(Model::Urn, &KingmanGrowth, &[1, 1], 2, DEFAULT_STATE_BOUND).unwrap();
        assert_eq!(total_mass(&law.counts), BigRational::one());
        assert_eq!(law.counts[&vec![3, 1]], r(1, 3));
        let law = exact_enumerate(Model::Urn, &KingmanGrowth, &[1, 1], 5, DEFAULT_STATE_BOUND).unwrap();
        assert_eq!(law.counts.len(), 6);
        assert!(law.counts.values().all(|p| *p == r(1, 6)));
    }

    #[test]
    fn exact_particle_matches_urn() {
        let two = FiniteGrowth::new(vec![(1, r(1, 2)), (2, r(1, 2))]).unwrap();
        for n in 0..=4 {
            let urn = exact_enumerate(Model::Urn, &KingmanGrowth, &[1, 1], n, DEFAULT_STATE_BOUND).unwrap();
            let par = exact_enumerate(Model::Particle, &KingmanGrowth, &[1, 1], n, DEFAULT_STATE_BOUND).unwrap();
            assert!(total_variation(&urn.counts, &par.counts).is_zero());
            assert!(conditionally_uniform(&par));
            assert_eq!(total_mass(par.particles.as_ref().unwrap()), BigRational::one());
        }
        for n in 0..=3 {
            let urn = exact_enumerate(Model::Urn, &two, &[2, 1], n, DEFAULT_STATE_BOUND).unwrap();
            let par = exact_enumerate(Model::Particle, &two, &[2, 1], n, DEFAULT_STATE_BOUND).unwrap();
            assert!(total_variation(&urn.counts, &par.counts).is_zero());
            assert!(conditionally_uniform(&par));
        }
    }

    #[test]
    fn exact_enumeration_limits() {
        assert!(matches!(
            exact_enumerate(Model::Particle, &KingmanGrowth, &[2, 2], 5, 100),
            Err(Error::Capacity { .. })
        ));
        let law = LambdaGrowth::new(&LambdaMeasure::uniform(), 10).unwrap();
        assert!(matches!(
            exact_enumerate(Model::Urn, &law, &[1, 1], 2, DEFAULT_STATE_BOUND),
            Err(Error::Unsupported(_))
        ));
        assert!(exact_enumerate(Model::Urn, &KingmanGrowth, &[1, 1], 6, DEFAULT_STATE_BOUND).is_err());
        assert!(FiniteGrowth::new(vec![(1, r(1, 3))]).is_err());
    }

    #[test]
    fn degeneracy_probe_examples() {
        let kingman = LambdaMeasure::kingman(1.0);
        let rep = degeneracy_probe(&kingman, LambdaUrnLaw::MergerSize, 1, 1000, 10, 1e-3, 1).unwrap();
        assert_eq!(rep.fraction, 0.0);
        let rep = degeneracy_probe(&kingman, LambdaUrnLaw::Lookdown, 5, 20_000, 300, 1e-3, 2).unwrap();
        // min of a uniform point on the 4-simplex: P(min < t) = 1 - (1 - 5t)^4
        let ks = ks_one_sample(&rep.min_freqs, |t| 1.0 - (1.0 - 5.0 * t.clamp(0.0, 0.2)).powi(4)).unwrap();
        assert!(ks.passed(), "{ks:?}");
        assert!(rep.interval.0 <= rep.fraction && rep.fraction <= rep.interval.1);
    }
}
