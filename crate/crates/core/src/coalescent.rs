//! The `(N, Λ)`-coalescent: the genealogy of the whole population, run
//! backward in time until a single ancestor remains.
//!
//! Blocks are tracked by size only. With `b` blocks, each `k`-subset merges
//! at rate `λ_{b,k}`.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{arg, Result};
use crate::lambda::{LambdaMeasure, RatePmf};
use crate::partition::MassPartition;
use crate::trajectory::{RunOptions, Trajectory};

/// Path of `A^N` with coalescence times `T^{N,k}` and block-size snapshots.
pub type CoalescentRecord = Trajectory;

/// Tables with at most this many block counts are cached.
const CACHE_LIMIT: u64 = 4096;

/// Block sizes and current time.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalescentState {
    pub block_sizes: Vec<u64>,
    pub t: f64,
}

impl CoalescentState {
    pub fn new(n: u64) -> Self {
        CoalescentState { block_sizes: vec![1; n as usize], t: 0.0 }
    }

    /// Merges `k` uniformly chosen blocks into one.
    pub fn merge_random<R: Rng + ?Sized>(&mut self, k: usize, rng: &mut R) {
        let b = self.block_sizes.len();
        move_random_to_tail(&mut self.block_sizes, k, rng);
        let merged: u64 = self.block_sizes.drain(b - k..).sum();
        self.block_sizes.push(merged);
    }
}

/// Moves a uniformly chosen `k`-subset of `v` to its last `k` positions.
pub(crate) fn move_random_to_tail<T, R: Rng + ?Sized>(v: &mut [T], k: usize, rng: &mut R) {
    let b = v.len();
    for i in 0..k {
        let last = b - 1 - i;
        let r = rng.random_range(0..=last);
        v.swap(r, last);
    }
}

/// Merger-size laws for every block count `b <= n`, computed on demand and
/// shared between replicates.
pub struct CoalescentRates {
    lambda: LambdaMeasure,
    n: u64,
    tables: Vec<OnceLock<RatePmf>>,
}

impl CoalescentRates {
    pub fn new(lambda: &LambdaMeasure, n: u64) -> Result<Self> {
        if n < 2 {
            return arg(format!("sample size must be >= 2, got {n}"));
        }
        // surfaces a degenerate measure before any replicate runs
        lambda.y_n_pmf(2)?;
        let cached = if n <= CACHE_LIMIT { n as usize + 1 } else { 0 };
        Ok(CoalescentRates { lambda: lambda.clone(), n, tables: (0..cached).map(|_| OnceLock::new()).collect() })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Law of the merger size `k` with `b` blocks (support `2..=b`).
    fn with_table<T>(&self, b: u64, f: impl FnOnce(&RatePmf) -> T) -> T {
        let build = || {
            let rates = self.lambda.merger_rates(b).expect("b >= 2");
            RatePmf::from_rates((2..=b).collect(), rates).expect("positive rate")
        };
        match self.tables.get(b as usize) {
            Some(cell) => f(cell.get_or_init(build)),
            None => f(&build()),
        }
    }

    pub fn total_rate(&self, b: u64) -> f64 {
        self.with_table(b, |t| t.total_rate)
    }
}

pub fn simulate_coalescent<R: Rng + ?Sized>(lambda: &LambdaMeasure, n: u64, rng: &mut R) -> Result<CoalescentRecord> {
    let rates = CoalescentRates::new(lambda, n)?;
    Ok(simulate_coalescent_with(&rates, &RunOptions::default(), rng))
}

pub fn simulate_coalescent_with<R: Rng + ?Sized>(
    rates: &CoalescentRates,
    opts: &RunOptions,
    rng: &mut R,
) -> CoalescentRecord {
    run_state(rates, opts, rng).0
}

/// Runs the coalescent, also returning the final state.
pub fn run_state<R: Rng + ?Sized>(
    rates: &CoalescentRates,
    opts: &RunOptions,
    rng: &mut R,
) -> (CoalescentRecord, CoalescentState) {
    let n = rates.n;
    let mut state = CoalescentState::new(n);
    let mut rec = Trajectory::start(n);
    let binary = rates.lambda.is_binary();
    let pair_rate = rates.lambda.atom0;
    let stop = opts.stop_at.max(1);
    let mut b = n;
    while b > stop {
        let e: f64 = Exp1.sample(rng);
        let k = if binary {
            state.t += e / (pair_rate * 0.5 * (b * (b - 1)) as f64);
            2
        } else {
            rates.with_table(b, |table| {
                state.t += e / table.total_rate;
                table.sample(rng)
            })
        };
        state.merge_random(k as usize, rng);
        b -= k - 1;
        rec.record(state.t, b, &opts.snapshots, || state.block_sizes.clone());
    }
    (rec, state)
}

/// True when `after` is `before` with two of its entries replaced by their
/// sum (as multisets).
pub fn is_pairwise_merge(before: &[u64], after: &[u64]) -> bool {
    if before.len() != after.len() + 1 {
        return false;
    }
    let mut target = after.to_vec();
    target.sort_unstable();
    for i in 0..before.len() {
        for j in i + 1..before.len() {
            let mut merged: Vec<u64> =
                before.iter().enumerate().filter(|&(l, _)| l != i && l != j).map(|(_, &s)| s).collect();
            merged.push(before[i] + before[j]);
            merged.sort_unstable();
            if merged == target {
                return true;
            }
        }
    }
    false
}

/// `π^N_k`: block frequencies at each recorded coalescence time.
pub fn ancestral_block_sequence(rec: &CoalescentRecord) -> Vec<(u64, MassPartition)> {
    rec.block_sequence()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replicate::replicate_rng;
    use crate::stats::{chi_square_gof, mean_z_test};
    use approx::assert_relative_eq;

    #[test]
    fn kingman_jumps_are_single_mergers() {
        let mut rng = replicate_rng(20, 0);
        for _ in 0..100 {
            let rec = simulate_coalescent(&LambdaMeasure::kingman(1.0), 30, &mut rng).unwrap();
            assert!(rec.jumps().all(|j| j.2 == 1));
            assert_eq!(rec.current(), 1);
            for (k, snap) in &rec.snapshots {
                assert_eq!(snap.len() as u64, k - 1);
                assert_eq!(snap.iter().sum::<u64>(), 30);
            }
        }
    }

    #[test]
    fn kingman_tmrca_mean() {
        let mut rng = replicate_rng(21, 0);
        let rates = CoalescentRates::new(&LambdaMeasure::kingman(1.0), 20).unwrap();
        let opts = RunOptions::times_only();
        let ts: Vec<f64> =
            (0..100_000).map(|_| simulate_coalescent_with(&rates, &opts, &mut rng).level_time(2).unwrap()).collect();
        let r = mean_z_test(&ts, 2.0 * (1.0 - 1.0 / 20.0)).unwrap();
        assert!(r.statistic < 3.0, "{r:?}");
    }

    #[test]
    fn kingman_holding_time_at_k_blocks() {
        // time spent at 6 blocks is Exp(15)
        let mut rng = replicate_rng(22, 0);
        let rates = CoalescentRates::new(&LambdaMeasure::kingman(1.0), 6).unwrap();
        let hs: Vec<f64> = (0..50_000)
            .map(|_| simulate_coalescent_with(&rates, &RunOptions::times_only(), &mut rng).path[1].0)
            .collect();
        let r = mean_z_test(&hs, 1.0 / 15.0).unwrap();
        assert!(r.statistic < 4.0, "{r:?}");
    }

    #[test]
    fn uniform_merger_rate_example() {
        assert_relative_eq!(LambdaMeasure::uniform().lambda_nk(5, 3).unwrap(), 1.0 / 12.0, max_relative = 1e-12);
    }

    #[test]
    fn multiple_mergers_occur() {
        let mut rng = replicate_rng(23, 0);
        let lambda = LambdaMeasure::beta(0.5, 1.5).unwrap();
        let rates = CoalescentRates::new(&lambda, 30).unwrap();
        let big = (0..500)
            .flat_map(|_| {
                simulate_coalescent_with(&rates, &RunOptions::default(), &mut rng)
                    .jumps()
                    .map(|j| j.2)
                    .collect::<Vec<_>>()
            })
            .filter(|&s| s > 1)
            .count();
        assert!(big > 0);
        let rec = simulate_coalescent_with(&rates, &RunOptions::default(), &mut rng);
        assert!(rec.snapshots.iter().all(|(k, s)| (s.len() as u64) < *k && s.iter().sum::<u64>() == 30));
    }

    #[test]
    fn pair_choice_is_uniform() {
        let mut rng = replicate_rng(24, 0);
        let b = 6;
        let mut freq = vec![0u64; b * b];
        for _ in 0..60_000 {
            let mut ids: Vec<usize> = (0..b).collect();
            move_random_to_tail(&mut ids, 2, &mut rng);
            let (i, j) = (ids[b - 2].min(ids[b - 1]), ids[b - 2].max(ids[b - 1]));
            freq[i * b + j] += 1;
        }
        let pairs: Vec<u64> =
            (0..b).flat_map(|i| (i + 1..b).map(move |j| (i, j))).map(|(i, j)| freq[i * b + j]).collect();
        assert_eq!(pairs.iter().sum::<u64>(), 60_000);
        let r = chi_square_gof(&pairs, &vec![1.0; pairs.len()]).unwrap();
        assert!(r.passed(), "{r:?}");
        // each pair within 4 SE of 2 / (b (b-1))
        let p = 2.0 / (b * (b - 1)) as f64;
        let se = (p * (1.0 - p) / 60_000.0).sqrt();
        assert!(pairs.iter().all(|&c| (c as f64 / 60_000.0 - p).abs() < 4.0 * se));
    }

    #[test]
    fn kingman_snapshot_steps_are_pairwise_merges() {
        let mut rng = replicate_rng(25, 0);
        let rec = simulate_coalescent(&LambdaMeasure::kingman(1.0), 40, &mut rng).unwrap();
        for k in 3..=40 {
            assert!(is_pairwise_merge(&rec.snapshots[&k], &rec.snapshots[&(k - 1)]));
        }
        assert!(is_pairwise_merge(&[1, 2, 3], &[3, 3]));
        assert!(!is_pairwise_merge(&[1, 1, 4], &[3, 3]));
        assert!(!is_pairwise_merge(&[1, 1, 1, 1], &[2, 2]));
    }
}
