//! Piecewise-constant counting paths shared by the forward and backward
//! simulators.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::partition::MassPartition;

/// Which levels `k` get a frequency snapshot at `T^{N,k}`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SnapshotLevels {
    #[default]
    All,
    Only(Vec<u64>),
    None,
}

impl SnapshotLevels {
    fn wants_any(&self, lo: u64, hi: u64) -> bool {
        match self {
            SnapshotLevels::All => lo <= hi,
            SnapshotLevels::Only(ks) => ks.iter().any(|k| (lo..=hi).contains(k)),
            SnapshotLevels::None => false,
        }
    }

    fn contains(&self, k: u64) -> bool {
        match self {
            SnapshotLevels::All => true,
            SnapshotLevels::Only(ks) => ks.contains(&k),
            SnapshotLevels::None => false,
        }
    }
}

/// Options common to the forward and backward simulators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub snapshots: SnapshotLevels,
    /// Stop as soon as the count is at most this value (1 runs to the end).
    pub stop_at: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { snapshots: SnapshotLevels::All, stop_at: 1 }
    }
}

impl RunOptions {
    pub fn only(levels: Vec<u64>) -> Self {
        let stop_at = levels.iter().copied().min().map_or(1, |k| k.saturating_sub(1).max(1));
        RunOptions { snapshots: SnapshotLevels::Only(levels), stop_at }
    }

    pub fn times_only() -> Self {
        RunOptions { snapshots: SnapshotLevels::None, stop_at: 1 }
    }
}

/// A nonincreasing counting path started at `n` (the allele count `Â^N` or
/// the block count `A^N`).
///
/// The path is right-continuous: `path[i] = (t, c)` means the count is `c`
/// from time `t` until the next entry. A jump from `a` to `b < a` at time `t`
/// sets `T^{N,k} = t` for every crossed level `k ∈ (b, a]`, and the snapshot
/// attached to each of those levels is the state just after the jump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub n: u64,
    pub path: Vec<(f64, u64)>,
    /// Integer counts (allele or block sizes) keyed by level `k`.
    pub snapshots: BTreeMap<u64, Vec<u64>>,
}

impl Trajectory {
    pub(crate) fn start(n: u64) -> Self {
        Trajectory { n, path: vec![(0.0, n)], snapshots: BTreeMap::new() }
    }

    pub fn current(&self) -> u64 {
        self.path.last().expect("path starts at n").1
    }

    /// Appends a jump to `new_count`; `sizes` is called only when one of the
    /// crossed levels wants a snapshot.
    pub(crate) fn record(&mut self, t: f64, new_count: u64, levels: &SnapshotLevels, sizes: impl FnOnce() -> Vec<u64>) {
        let old = self.current();
        debug_assert!(new_count < old);
        self.path.push((t, new_count));
        if levels.wants_any(new_count + 1, old) {
            let snap = sizes();
            for k in (new_count + 1..=old).filter(|&k| levels.contains(k)) {
                self.snapshots.insert(k, snap.clone());
            }
        }
    }

    /// `T^{N,k} = sup{t : count_t >= k}`, `None` if the run stopped before
    /// the count fell below `k` or `k` is outside `2..=n`.
    pub fn level_time(&self, k: u64) -> Option<f64> {
        if k > self.n {
            return None;
        }
        // counts decrease along the path, so the first entry below k is the crossing
        let i = self.path.partition_point(|&(_, c)| c >= k);
        self.path.get(i).map(|&(t, _)| t)
    }

    /// `T^{N,k}` for `k = 2..=n` (levels not yet crossed are omitted).
    pub fn level_times(&self) -> Vec<(u64, f64)> {
        (2..=self.n).filter_map(|k| self.level_time(k).map(|t| (k, t))).collect()
    }

    /// Count at time `t`.
    pub fn count_at(&self, t: f64) -> u64 {
        let i = self.path.partition_point(|&(s, _)| s <= t);
        self.path[i.max(1) - 1].1
    }

    /// `(time, new count, jump size)` for each jump.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, u64, u64)> + '_ {
        self.path.windows(2).map(|w| (w[1].0, w[1].1, w[0].1 - w[1].1))
    }

    /// Time of the final jump (absorption at 1 for a complete run).
    pub fn end_time(&self) -> f64 {
        self.path.last().expect("nonempty").0
    }

    pub fn snapshot(&self, k: u64) -> Option<MassPartition> {
        self.snapshots.get(&k).map(|c| MassPartition::from_counts(c).expect("snapshot counts sum to n"))
    }

    /// Snapshots as `(k, partition)` in increasing `k`.
    pub fn block_sequence(&self) -> Vec<(u64, MassPartition)> {
        self.snapshots.keys().map(|&k| (k, self.snapshot(k).expect("key present"))).collect()
    }
}
