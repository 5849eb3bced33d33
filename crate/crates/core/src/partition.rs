//! Finite mass partitions, Dirichlet laws and random coupon collection.

use std::ops::Index;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson};
use serde::Serialize;

use crate::error::{arg, Error, Result};

const SUM_TOLERANCE: f64 = 1e-10;
/// Integer Gamma shapes up to this bound are drawn as sums of exponentials.
const SMALL_SHAPE: u64 = 16;

/// A finite vector of nonnegative frequencies summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MassPartition {
    freqs: Vec<f64>,
}

impl MassPartition {
    pub fn new(freqs: Vec<f64>) -> Result<Self> {
        if freqs.is_empty() {
            return arg("mass partition must have at least one coordinate");
        }
        if freqs.iter().any(|f| !(*f >= 0.0 && f.is_finite())) {
            return arg("mass partition coordinates must be finite and >= 0");
        }
        let total: f64 = freqs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return arg(format!("mass partition sums to {total}, not 1"));
        }
        Ok(MassPartition { freqs })
    }

    /// Normalises arbitrary nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return arg("weights must be nonnegative with positive sum");
        }
        Ok(MassPartition { freqs: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return arg("counts must have positive sum");
        }
        let t = total as f64;
        Ok(MassPartition { freqs: counts.iter().map(|&c| c as f64 / t).collect() })
    }

    pub fn unit() -> Self {
        MassPartition { freqs: vec![1.0] }
    }

    /// Number of coordinates `λ(u)`.
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.freqs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.freqs
    }

    /// All coordinates strictly positive.
    pub fn non_degenerate(&self) -> bool {
        self.freqs.iter().all(|&f| f > 0.0)
    }

    pub fn max(&self) -> f64 {
        self.freqs.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.freqs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn total(&self) -> f64 {
        self.freqs.iter().sum()
    }

    /// Coordinates sorted in decreasing order.
    pub fn ranked(&self) -> Vec<f64> {
        let mut v = self.freqs.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    fn renormalized(mut freqs: Vec<f64>) -> Self {
        let total: f64 = freqs.iter().sum();
        if (total - 1.0).abs() > f64::EPSILON {
            freqs.iter_mut().for_each(|f| *f /= total);
        }
        MassPartition { freqs }
    }
}

impl Index<usize> for MassPartition {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.freqs[i]
    }
}

/// Result of collecting every coupon of a mass partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CouponResult {
    /// Draw counts before the final draw, coordinate `last` removed; the
    /// other coordinates keep their order.
    pub counts: Vec<u64>,
    /// 0-based index of the coupon collected last.
    pub last: usize,
    /// Total number of draws `T`.
    pub total_draws: u64,
}

fn gamma_integer<R: Rng + ?Sized>(shape: u64, rng: &mut R) -> f64 {
    if shape <= SMALL_SHAPE {
        (0..shape).map(|_| -> f64 { Exp1.sample(rng) }).sum::<f64>()
    } else {
        Gamma::new(shape as f64, 1.0).expect("positive shape").sample(rng)
    }
}

/// Draws from `Dirichlet(params)`; all-ones parameters give the uniform law
/// on the simplex.
pub fn sample_dirichlet<R: Rng + ?Sized>(params: &[u64], rng: &mut R) -> Result<MassPartition> {
    if params.is_empty() {
        return arg("Dirichlet parameters must be nonempty");
    }
    if params.contains(&0) {
        return arg("Dirichlet parameters must be >= 1");
    }
    if params.len() == 1 {
        return Ok(MassPartition::unit());
    }
    loop {
        let g: Vec<f64> = params.iter().map(|&p| gamma_integer(p, rng)).collect();
        if g.iter().all(|&x| x > 0.0) {
            return Ok(MassPartition::renormalized(g));
        }
    }
}

/// Collects coupons drawn i.i.d. from `m` until every index has appeared.
///
/// Uses the Poisson embedding: coupon `i` arrives at the epochs of an
/// independent rate-`m_i` Poisson process. The last coupon `J` is the one
/// with the latest first arrival `τ`, and given the first arrivals `E_i`,
/// coupon `i ≠ J` was drawn `1 + Poisson(m_i (τ - E_i))` times before `τ`.
/// The embedded label sequence is i.i.d. with law `m`, so this reproduces
/// the discrete procedure in `O(λ(m))` work regardless of how long the
/// collection takes.
pub fn coupon_collect<R: Rng + ?Sized>(m: &MassPartition, rng: &mut R) -> Result<CouponResult> {
    if !m.non_degenerate() {
        return Err(Error::DegeneratePartition(
            "coupon collection never terminates when a coordinate is 0".to_string(),
        ));
    }
    if m.len() == 1 {
        return Ok(CouponResult { counts: vec![], last: 0, total_draws: 1 });
    }
    let first: Vec<f64> = m
        .as_slice()
        .iter()
        .map(|&p| {
            let e: f64 = Exp1.sample(rng);
            e / p
        })
        .collect();
    let (last, &tau) = first.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty");
    let mut counts = Vec::with_capacity(m.len() - 1);
    for (i, (&p, &e)) in m.as_slice().iter().zip(&first).enumerate() {
        if i == last {
            continue;
        }
        let mean = p * (tau - e);
        let extra = if mean > 0.0 {
            if mean > 1e15 {
                return Err(Error::Argument(format!("coupon collection too long (expected {mean:e} draws)")));
            }
            Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
        } else {
            0
        };
        counts.push(1 + extra);
    }
    let total_draws = counts.iter().sum::<u64>() + 1;
    Ok(CouponResult { counts, last, total_draws })
}

/// Merges coordinates `i` and `j`; the sum takes the place of the smaller
/// index.
pub fn merge_blocks(m: &MassPartition, i: usize, j: usize) -> Result<MassPartition> {
    let n = m.len();
    if i == j || i >= n || j >= n {
        return arg(format!("cannot merge blocks {i} and {j} of a partition of length {n}"));
    }
    let (lo, hi) = (i.min(j), i.max(j));
    let mut freqs = m.freqs.clone();
    freqs[lo] += freqs[hi];
    freqs.remove(hi);
    if freqs.len() == 1 {
        return Ok(MassPartition::unit());
    }
    Ok(MassPartition { freqs })
}

/// Picks a coordinate with probability equal to its mass and splits it
/// uniformly into `(U m_i, (1-U) m_i)`, the two pieces at `i` and `i + 1`.
pub fn size_biased_fragment<R: Rng + ?Sized>(m: &MassPartition, rng: &mut R) -> MassPartition {
    let pick = size_biased_index(m, rng);
    let u: f64 = rng.random();
    let mass = m.freqs[pick];
    // larger piece as a product, smaller as an exact difference (Sterbenz),
    // so the two pieces add back to `mass` bit for bit
    let big = u.max(1.0 - u) * mass;
    let small = mass - big;
    let (first, second) = if u >= 0.5 { (big, small) } else { (small, big) };
    let mut freqs = m.freqs.clone();
    freqs[pick] = first;
    freqs.insert(pick + 1, second);
    MassPartition { freqs }
}

pub(crate) fn size_biased_index<R: Rng + ?Sized>(m: &MassPartition, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * m.total();
    let mut acc = 0.0;
    for (i, &f) in m.freqs.iter().enumerate() {
        acc += f;
        if target < acc {
            return i;
        }
    }
    m.freqs.iter().rposition(|&f| f > 0.0).expect("positive mass")
}
