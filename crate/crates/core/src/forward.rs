//! The `(N, Λ)`-Fleming-Viot model forward in time.
//!
//! Every `k`-subset of the `N` individuals carries a clock of rate
//! `λ_{N,k}`; when it rings, one uniform member of the subset reproduces and
//! its `k - 1` partners die. The simulator aggregates the clocks by size and
//! tracks the number of surviving initial alleles (`Â^N`).

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{arg, Result};
use crate::lambda::{LambdaMeasure, RatePmf};
use crate::partition::MassPartition;
use crate::trajectory::{RunOptions, Trajectory};

/// Path of `Â^N` with extinction times `T̂^{N,k}` and allele-frequency
/// snapshots.
pub type ForwardRecord = Trajectory;

/// Total event rate and event-size law: `per_k(k) = C(N,k) λ_{N,k}`.
/// The returned pmf has support `k = 2..=N`.
pub fn forward_event_rate(lambda: &LambdaMeasure, n: u64) -> Result<RatePmf> {
    if n < 2 {
        return arg(format!("population size must be >= 2, got {n}"));
    }
    let rates = lambda.merger_rates(n)?;
    RatePmf::from_rates((2..=n).collect(), rates)
}

/// `N` individuals with allele labels `0..N`.
#[derive(Debug, Clone)]
pub struct Population {
    alleles: Vec<u32>,
    counts: Vec<u32>,
    distinct: u64,
    /// scratch permutation used to draw event participants
    order: Vec<u32>,
    pub t: f64,
}

impl Population {
    pub fn new(n: usize) -> Self {
        Population {
            alleles: (0..n as u32).collect(),
            counts: vec![1; n],
            distinct: n as u64,
            order: (0..n as u32).collect(),
            t: 0.0,
        }
    }

    pub fn size(&self) -> usize {
        self.alleles.len()
    }

    pub fn alleles(&self) -> &[u32] {
        &self.alleles
    }

    /// Number of initial alleles still carried by someone.
    pub fn distinct(&self) -> u64 {
        self.distinct
    }

    /// Sizes of the surviving alleles, ordered by allele label.
    pub fn allele_counts(&self) -> Vec<u64> {
        self.counts.iter().filter(|&&c| c > 0).map(|&c| u64::from(c)).collect()
    }

    /// The allele carried by everyone, once one has fixed.
    pub fn fixed_allele(&self) -> Option<u32> {
        (self.distinct == 1).then(|| self.alleles[0])
    }

    fn replace(&mut self, child: usize, allele: u32) {
        let old = self.alleles[child];
        if old == allele {
            return;
        }
        self.alleles[child] = allele;
        self.counts[allele as usize] += 1;
        self.counts[old as usize] -= 1;
        if self.counts[old as usize] == 0 {
            self.distinct -= 1;
        }
    }

    /// One reproduction event involving `k` uniformly chosen individuals.
    pub fn reproduce<R: Rng + ?Sized>(&mut self, k: usize, rng: &mut R) {
        let n = self.size();
        if k == 2 {
            let parent = rng.random_range(0..n);
            let mut child = rng.random_range(0..n - 1);
            if child >= parent {
                child += 1;
            }
            let allele = self.alleles[parent];
            self.replace(child, allele);
            return;
        }
        // partial Fisher-Yates: order[..k] becomes a uniform ordered k-subset
        for i in 0..k {
            let r = rng.random_range(i..n);
            self.order.swap(i, r);
        }
        let allele = self.alleles[self.order[0] as usize];
        for i in 1..k {
            let child = self.order[i] as usize;
            self.replace(child, allele);
        }
    }
}

/// Runs the model from `N` distinct alleles until one allele has fixed.
pub fn simulate_forward<R: Rng + ?Sized>(lambda: &LambdaMeasure, n: u64, rng: &mut R) -> Result<ForwardRecord> {
    simulate_forward_with(lambda, n, &RunOptions::default(), rng)
}

pub fn simulate_forward_with<R: Rng + ?Sized>(
    lambda: &LambdaMeasure,
    n: u64,
    opts: &RunOptions,
    rng: &mut R,
) -> Result<ForwardRecord> {
    let rates = forward_event_rate(lambda, n)?;
    Ok(run_population(&rates, n, opts, rng).0)
}

/// Like [`simulate_forward_with`] with a precomputed rate table, also
/// returning the final population.
pub fn run_population<R: Rng + ?Sized>(
    rates: &RatePmf,
    n: u64,
    opts: &RunOptions,
    rng: &mut R,
) -> (ForwardRecord, Population) {
    let mut pop = Population::new(n as usize);
    let mut rec = Trajectory::start(n);
    let binary = rates.support.len() == 1 || rates.probs[1..].iter().all(|&p| p == 0.0);
    let stop = opts.stop_at.max(1);
    while pop.distinct > stop {
        let e: f64 = Exp1.sample(rng);
        pop.t += e / rates.total_rate;
        let k = if binary { 2 } else { rates.sample(rng) };
        let before = pop.distinct;
        pop.reproduce(k as usize, rng);
        if pop.distinct < before {
            rec.record(pop.t, pop.distinct, &opts.snapshots, || pop.allele_counts());
        }
    }
    (rec, pop)
}

/// `π̂^N_k`: allele frequencies at each recorded extinction time.
pub fn haplotype_block_sequence(rec: &ForwardRecord) -> Vec<(u64, MassPartition)> {
    rec.block_sequence()
}
