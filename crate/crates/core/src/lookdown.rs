//! The look-down construction on the first `N` levels.
//!
//! LD events are sets `A` of levels. At an event every level of `A` takes
//! the type of level `min A`, and the particles previously above `min A`
//! move up, keeping their order, onto the levels outside `A`. Only the part
//! of `A` inside `[N]` matters for the first `N` levels, and events with
//! fewer than two levels in `[N]` change nothing there.
//!
//! The `k`-th fixation line `L^k` follows the particle that started at
//! level `k`. It leaves `[N]` exactly when the `k`-th initial type goes
//! extinct among the first `N` levels.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::lambda::{Component, LambdaMeasure, RatePmf};

/// An LD event restricted to `[N]`: time and the sorted levels hit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdEvent {
    pub t: f64,
    pub levels: Vec<u64>,
}

/// Path of one fixation line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixationPath {
    pub k: u64,
    /// `(time, level)` starting with `(0, k)`; the final entry is the first
    /// level above `N` (`u64::MAX` when the exact level is unknown).
    pub steps: Vec<(f64, u64)>,
    /// First time the line exceeds `N`.
    pub exit_time: f64,
}

impl FixationPath {
    /// Level at time `t` (right-continuous).
    pub fn level_at(&self, t: f64) -> u64 {
        let i = self.steps.partition_point(|&(s, _)| s <= t);
        self.steps[i.max(1) - 1].1
    }

    /// First time the line exceeds `m` (`T̂^{m,k}` for every `m` up to the
    /// simulated `N`).
    pub fn exit_time_above(&self, m: u64) -> f64 {
        self.steps.iter().find(|&&(_, l)| l > m).map_or(f64::INFINITY, |&(t, _)| t)
    }

    /// `(level before, jump size)` for every jump that stayed inside `[N]`,
    /// plus the exit jump when its size is known.
    pub fn jumps(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.steps.windows(2).filter(|w| w[1].1 != u64::MAX).map(|w| (w[0].1, w[1].1 - w[0].1))
    }
}

/// How a fixation line moves when an event hits `m >= 2` of the levels up
/// to its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpRule {
    /// The line moves up by `m - 1`.
    #[default]
    HitCount,
    /// The line moves to the `(m - 1)`-th level above it that is not in
    /// `A`, as the look-down shift prescribes; levels of `A` above the line
    /// are skipped, adding a negative-binomial overshoot.
    OrderPreserving,
}

/// Jump laws of a fixation line at every level `2..=N`.
pub struct LineRates {
    lambda: LambdaMeasure,
    n: u64,
    levels: Vec<RatePmf>,
}

impl LineRates {
    pub fn new(lambda: &LambdaMeasure, n: u64) -> Result<Self> {
        if n < 2 {
            return arg(format!("number of levels must be >= 2, got {n}"));
        }
        let levels = (2..=n).map(|j| lambda.fixation_jump_rates(j)).collect::<Result<_>>()?;
        Ok(LineRates { lambda: lambda.clone(), n, levels })
    }

    pub fn at(&self, j: u64) -> &RatePmf {
        &self.levels[(j - 2) as usize]
    }

    /// Given an event hitting `m` of the first `j` levels, draws how many
    /// further levels of `A` the shifted particle has to skip.
    fn overshoot<R: Rng + ?Sized>(&self, j: u64, m: u64, rng: &mut R) -> Option<u64> {
        let comps = self.lambda.components();
        let weights: Vec<f64> = comps.iter().map(|c| c.ln_merger_term(j, m).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut chosen = comps[comps.len() - 1];
        for (c, w) in comps.iter().zip(&weights) {
            if target < *w {
                chosen = *c;
                break;
            }
            target -= w;
        }
        overshoot(&chosen, j, m, rng)
    }
}

/// Number of further levels of `A` skipped by the particle at level `j` when
/// an event of component `c` hits `m >= 2` of the levels `1..=j`; `None`
/// when every level is hit (the particle leaves for good).
pub(crate) fn overshoot<R: Rng + ?Sized>(c: &Component, j: u64, m: u64, rng: &mut R) -> Option<u64> {
    // Reading levels above j, each is in A with probability x. The overshoot
    // counts levels in A met before m - 1 levels outside A.
    let needed = (m - 1) as f64;
    match *c {
        Component::Kingman { .. } => Some(0),
        Component::Atom { x, .. } => {
            if x >= 1.0 {
                return None;
            }
            if needed * x / (1.0 - x) < SEQUENTIAL_LIMIT {
                return Some(sequential_overshoot(m - 1, rng, |_, _| x));
            }
            mixed_overshoot(x, m, rng)
        }
        Component::Beta { a, b, .. } => {
            // x given (component, m) for the x^{-2}-weighted intensity
            let (alpha, beta) = (a + (m - 2) as f64, b + (j - m) as f64);
            if beta > 1.0 && needed * alpha / (beta - 1.0) < SEQUENTIAL_LIMIT {
                // Pólya sequence: integrates x out exactly
                return Some(sequential_overshoot(m - 1, rng, |hits, misses| {
                    (alpha + hits as f64) / (alpha + beta + (hits + misses) as f64)
                }));
            }
            let x = Beta::new(alpha, beta).expect("positive parameters").sample(rng);
            mixed_overshoot(x, m, rng)
        }
    }
}

/// Expected overshoot below which levels are read one by one.
const SEQUENTIAL_LIMIT: f64 = 32.0;

fn sequential_overshoot<R: Rng + ?Sized>(misses_needed: u64, rng: &mut R, hit_prob: impl Fn(u64, u64) -> f64) -> u64 {
    let (mut hits, mut misses) = (0, 0);
    while misses < misses_needed {
        if rng.random::<f64>() < hit_prob(hits, misses) {
            hits += 1;
        } else {
            misses += 1;
        }
    }
    hits
}

/// Negative binomial overshoot for a known `x`, as a Gamma-Poisson mixture.
fn mixed_overshoot<R: Rng + ?Sized>(x: f64, m: u64, rng: &mut R) -> Option<u64> {
    if x >= 1.0 {
        return None;
    }
    if x <= 0.0 {
        return Some(0);
    }
    let g: f64 = Gamma::new((m - 1) as f64, 1.0).expect("shape >= 1").sample(rng);
    let mean = g * x / (1.0 - x);
    if !mean.is_finite() || mean > 1e15 {
        return None;
    }
    if mean <= 0.0 {
        return Some(0);
    }
    Some(Poisson::new(mean).expect("positive mean").sample(rng) as u64)
}

/// Runs the `k`-th fixation line on `[N]` from its autonomous jump law:
/// at level `j` it waits an exponential time of rate `ld_event_rate(j)` and
/// jumps by a size drawn from `fixation_jump_rates(j)`.
pub fn simulate_fixation_line<R: Rng + ?Sized>(
    lambda: &LambdaMeasure,
    k: u64,
    n: u64,
    rng: &mut R,
) -> Result<FixationPath> {
    check_line_args(k, n)?;
    let rates = LineRates::new(lambda, n)?;
    Ok(run_fixation_line(&rates, k, JumpRule::HitCount, rng))
}

fn check_line_args(k: u64, n: u64) -> Result<()> {
    if !(2..=n).contains(&k) {
        return arg(format!("fixation line needs 2 <= k <= N, got k={k}, N={n}"));
    }
    Ok(())
}

pub fn run_fixation_line<R: Rng + ?Sized>(rates: &LineRates, k: u64, rule: JumpRule, rng: &mut R) -> FixationPath {
    let n = rates.n;
    let mut t = 0.0;
    let mut level = k;
    let mut steps = vec![(0.0, k)];
    while level <= n {
        let pmf = rates.at(level);
        let e: f64 = Exp1.sample(rng);
        t += e / pmf.total_rate;
        let hit = pmf.sample(rng);
        level = match rule {
            JumpRule::HitCount => level + hit,
            JumpRule::OrderPreserving => match rates.overshoot(level, hit + 1, rng) {
                Some(extra) => level.saturating_add(hit).saturating_add(extra),
                None => u64::MAX,
            },
        };
        steps.push((t, level));
    }
    FixationPath { k, steps, exit_time: t }
}

/// Generator of LD events with at least two levels in `[N]`.
pub struct LdStream {
    n: u64,
    total_rate: f64,
    components: Vec<(Component, f64)>,
}

impl LdStream {
    pub fn new(lambda: &LambdaMeasure, n: u64) -> Result<Self> {
        if n < 2 {
            return arg(format!("number of levels must be >= 2, got {n}"));
        }
        let mut components = Vec::new();
        for c in lambda.components() {
            let rate = c.merger_total(n);
            if rate > 0.0 {
                components.push((c, rate));
            }
        }
        let total_rate = components.iter().map(|c| c.1).sum();
        if !(total_rate > 0.0) {
            return Err(Error::DegenerateMeasure("no LD events hit two levels".to_string()));
        }
        Ok(LdStream { n, total_rate, components })
    }

    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    /// The next event after time `t`.
    pub fn next_event<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> LdEvent {
        let e: f64 = Exp1.sample(rng);
        let t = t + e / self.total_rate;
        let mut target = rng.random::<f64>() * self.total_rate;
        let mut chosen = self.components[self.components.len() - 1];
        for c in &self.components {
            if target < c.1 {
                chosen = *c;
                break;
            }
            target -= c.1;
        }
        let m = chosen.0.sample_merger_size(self.n, chosen.1, rng);
        let mut levels: Vec<u64> =
            index::sample(rng, self.n as usize, m as usize).into_iter().map(|i| i as u64 + 1).collect();
        levels.sort_unstable();
        LdEvent { t, levels }
    }
}

/// New level of the particle at `level` after event `a` (sorted), or `None`
/// if it is pushed above `n`.
pub fn shifted_level(level: u64, a: &[u64], n: u64) -> Option<u64> {
    let low = a[0];
    if low >= level {
        return Some(level);
    }
    let mut target = level;
    for &e in &a[1..] {
        if e <= target {
            target += 1;
        } else {
            break;
        }
    }
    (target <= n).then_some(target)
}

/// Applies an event to the types on levels `1..=n` (`types[i]` is level `i+1`).
pub fn apply_event(types: &mut [u32], a: &[u64]) {
    let low = a[0] as usize;
    let parent = types[low - 1];
    let old = types[low..].to_vec();
    let mut src = old.iter();
    let mut hits = a[1..].iter().peekable();
    for level in low + 1..=types.len() {
        if hits.peek().is_some_and(|&&h| h as usize == level) {
            hits.next();
            types[level - 1] = parent;
        } else {
            types[level - 1] = *src.next().expect("enough particles below");
        }
    }
}

/// Several fixation lines driven by one event stream.
pub fn simulate_lines<R: Rng + ?Sized>(stream: &LdStream, ks: &[u64], rng: &mut R) -> Result<Vec<FixationPath>> {
    let n = stream.n;
    for &k in ks {
        check_line_args(k, n)?;
    }
    let mut paths: Vec<FixationPath> =
        ks.iter().map(|&k| FixationPath { k, steps: vec![(0.0, k)], exit_time: f64::INFINITY }).collect();
    let mut t = 0.0;
    let mut alive = paths.len();
    while alive > 0 {
        let ev = stream.next_event(t, rng);
        t = ev.t;
        for p in paths.iter_mut().filter(|p| p.exit_time.is_infinite()) {
            let level = p.steps.last().expect("nonempty").1;
            match shifted_level(level, &ev.levels, n) {
                Some(l) if l == level => {}
                Some(l) => p.steps.push((t, l)),
                None => {
                    p.steps.push((t, u64::MAX));
                    p.exit_time = t;
                    alive -= 1;
                }
            }
        }
    }
    Ok(paths)
}

/// Types on levels `[N]` after each event up to `horizon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LookdownTypes {
    pub n: u64,
    /// `(time, types)`, starting from distinct types `0..N` at time 0.
    pub path: Vec<(f64, Vec<u32>)>,
}

impl LookdownTypes {
    pub fn types_at(&self, t: f64) -> &[u32] {
        let i = self.path.partition_point(|(s, _)| *s <= t);
        &self.path[i.max(1) - 1].1
    }

    pub fn distinct_at(&self, t: f64) -> usize {
        let mut v = self.types_at(t).to_vec();
        v.sort_unstable();
        v.dedup();
        v.len()
    }
}

pub fn simulate_lookdown_types<R: Rng + ?Sized>(
    lambda: &LambdaMeasure,
    n: u64,
    horizon: f64,
    rng: &mut R,
) -> Result<LookdownTypes> {
    let stream = LdStream::new(lambda, n)?;
    Ok(run_lookdown_types(&stream, horizon, rng))
}

pub fn run_lookdown_types<R: Rng + ?Sized>(stream: &LdStream, horizon: f64, rng: &mut R) -> LookdownTypes {
    let mut types: Vec<u32> = (0..stream.n as u32).collect();
    let mut path = vec![(0.0, types.clone())];
    let mut t = 0.0;
    loop {
        let ev = stream.next_event(t, rng);
        if ev.t > horizon {
            break;
        }
        t = ev.t;
        apply_event(&mut types, &ev.levels);
        path.push((t, types.clone()));
    }
    LookdownTypes { n: stream.n, path }
}

/// Path `Z(0..=N+1-k)` of the level of line `k-1` counted at the jumps of
/// line `k`, and its final value `R^{N,k}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZChain {
    pub path: Vec<u64>,
    pub r: u64,
}

/// Binary case only: from `Z(0) = k - 1`, `Z` steps up by one with
/// probability `C(Z, 2) / C(j + k, 2)` at step `j`.
pub fn simulate_z_chain<R: Rng + ?Sized>(lambda: &LambdaMeasure, k: u64, n: u64, rng: &mut R) -> Result<ZChain> {
    if !lambda.is_binary() {
        return Err(Error::Unsupported("the Z-chain describes binary (Kingman) look-down only".to_string()));
    }
    if !(3..=n).contains(&k) {
        return arg(format!("Z-chain needs 3 <= k <= N, got k={k}, N={n}"));
    }
    let mut z = k - 1;
    let mut path = vec![z];
    for j in 0..=(n - k) {
        let top = j + k;
        let p = (z * (z - 1)) as f64 / (top * (top - 1)) as f64;
        if rng.random::<f64>() < p {
            z += 1;
        }
        path.push(z);
    }
    Ok(ZChain { path, r: z })
}
