//! Samplers for the `N → ∞` limits of the block processes.
//!
//! The ancestral chain starts from a uniform point of the simplex and merges
//! a uniform pair at each step; the fragmentation chain runs the same
//! marginals upward by splitting a size-biased block. The haplotype chains
//! step down by collecting coupons from the current partition and
//! resampling: with Dirichlet weights for binary mergers, with Λ-urn limits
//! in general.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::lambda::LambdaMeasure;
use crate::partition::{coupon_collect, merge_blocks, sample_dirichlet, size_biased_fragment, MassPartition};
use crate::urn::{run_urn_to_limit, sample_d_k, GrowthLaw, KingmanGrowth, LambdaGrowth, LambdaUrnLaw, DEFAULT_M_CUT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainKind {
    Ancestral,
    HaplotypeBinary,
    HaplotypeLambda,
    Fragmentation,
}

/// One realisation of a chain.
#[derive(Debug, Clone, Serialize)]
pub struct ChainRun {
    pub kind: ChainKind,
    /// Starting index `K`.
    pub start: u64,
    /// `(k, partition)` in the order generated; the partition at `k` has
    /// `k - 1` coordinates.
    pub partitions: Vec<(u64, MassPartition)>,
    /// Urn truncation used for Λ-urn limits.
    pub m_cut: Option<u64>,
    pub warnings: Vec<String>,
    /// True when the run stopped early on a degenerate partition.
    pub aborted: bool,
}

impl ChainRun {
    fn new(kind: ChainKind, start: u64) -> Self {
        ChainRun { kind, start, partitions: Vec::new(), m_cut: None, warnings: Vec::new(), aborted: false }
    }

    pub fn at(&self, k: u64) -> Option<&MassPartition> {
        self.partitions.iter().find(|(j, _)| *j == k).map(|(_, p)| p)
    }
}

fn check_start(k: u64) -> Result<()> {
    if k < 2 {
        return arg(format!("chains start at K >= 2, got {k}"));
    }
    Ok(())
}

/// `π^∞_k` for `k = K, …, 2`.
pub fn ancestral_chain<R: Rng + ?Sized>(k: u64, rng: &mut R) -> Result<ChainRun> {
    check_start(k)?;
    let mut run = ChainRun::new(ChainKind::Ancestral, k);
    let mut m = sample_dirichlet(&vec![1; (k - 1) as usize], rng)?;
    for level in (2..=k).rev() {
        let next = if m.len() > 1 {
            let i = rng.random_range(0..m.len());
            let mut j = rng.random_range(0..m.len() - 1);
            if j >= i {
                j += 1;
            }
            Some(merge_blocks(&m, i, j)?)
        } else {
            None
        };
        run.partitions.push((level, m));
        match next {
            Some(n) => m = n,
            None => break,
        }
    }
    Ok(run)
}

/// Runs upward from `(1.0)` at `k = 2` to length `K - 1`.
pub fn fragmentation_chain<R: Rng + ?Sized>(k: u64, rng: &mut R) -> Result<ChainRun> {
    check_start(k)?;
    let mut run = ChainRun::new(ChainKind::Fragmentation, k);
    let mut m = MassPartition::unit();
    for level in 2..=k {
        if level > 2 {
            m = size_biased_fragment(&m, rng);
        }
        run.partitions.push((level, m.clone()));
    }
    Ok(run)
}

/// `π̂^∞_k` for `k = K, …, 2` with binary mergers.
pub fn haplotype_chain_binary<R: Rng + ?Sized>(k: u64, rng: &mut R) -> Result<ChainRun> {
    check_start(k)?;
    let mut run = ChainRun::new(ChainKind::HaplotypeBinary, k);
    let mut m = sample_dirichlet(&vec![1; (k - 1) as usize], rng)?;
    run.partitions.push((k, m.clone()));
    for level in (2..k).rev() {
        let coupons = coupon_collect(&m, rng)?;
        m = sample_dirichlet(&coupons.counts, rng)?;
        run.partitions.push((level, m.clone()));
    }
    Ok(run)
}

/// Options of the general haplotype chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaChainOptions {
    pub m_cut: u64,
    /// A sampled partition with a coordinate at or below this value aborts
    /// the run.
    pub degeneracy_threshold: f64,
}

impl Default for LambdaChainOptions {
    fn default() -> Self {
        LambdaChainOptions { m_cut: DEFAULT_M_CUT, degeneracy_threshold: 0.0 }
    }
}

/// `π̂^∞_k` for `k = K, …, 2` under Λ. The measure is assumed to come down
/// from infinity without simultaneous extinctions; neither is checked here.
///
/// The urns grow by the look-down jump law ([`LambdaUrnLaw::Lookdown`]),
/// which is the law of the allele counts below a fixation line.
pub fn haplotype_chain_lambda<R: Rng + ?Sized>(
    lambda: &LambdaMeasure,
    k: u64,
    m_cut: u64,
    rng: &mut R,
) -> Result<ChainRun> {
    let opts = LambdaChainOptions { m_cut, ..Default::default() };
    if lambda.is_binary() {
        return haplotype_chain_with(&KingmanGrowth, k, &opts, rng);
    }
    let law = LambdaGrowth::with_law(lambda, m_cut, LambdaUrnLaw::Lookdown)?;
    haplotype_chain_with(&law, k, &opts, rng)
}

/// [`haplotype_chain_lambda`] with a prebuilt growth law.
pub fn haplotype_chain_with<G: GrowthLaw, R: Rng + ?Sized>(
    law: &G,
    k: u64,
    opts: &LambdaChainOptions,
    rng: &mut R,
) -> Result<ChainRun> {
    check_start(k)?;
    let mut run = ChainRun::new(ChainKind::HaplotypeLambda, k);
    run.m_cut = Some(opts.m_cut);
    let mut m = sample_d_k(law, (k - 1) as usize, opts.m_cut, rng)?;
    for level in (2..=k).rev() {
        if level < k {
            let coupons = match coupon_collect(&m, rng) {
                Ok(c) => c,
                Err(e) => {
                    run.warnings.push(format!("k = {}: {e}", level + 1));
                    run.aborted = true;
                    break;
                }
            };
            let start: u64 = coupons.counts.iter().sum();
            m = if coupons.counts.len() == 1 {
                MassPartition::unit()
            } else {
                run_urn_to_limit(law, &coupons.counts, opts.m_cut.max(start + 1), rng)?
            };
        }
        let degenerate = m.min() <= opts.degeneracy_threshold;
        run.partitions.push((level, m.clone()));
        if degenerate && m.len() > 1 {
            run.warnings.push(format!(
                "k = {level}: coordinate {:e} at or below the degeneracy threshold {:e}",
                m.min(),
                opts.degeneracy_threshold
            ));
            run.aborted = true;
            break;
        }
    }
    Ok(run)
}

/// Number of coordinates of `next` that equal, bit for bit, a distinct
/// coordinate of `prev`.
pub fn preserved_coordinates(prev: &MassPartition, next: &MassPartition) -> usize {
    let mut pool: Vec<u64> = prev.as_slice().iter().map(|x| x.to_bits()).collect();
    let mut hits = 0;
    for x in next.as_slice() {
        if let Some(i) = pool.iter().position(|&b| b == x.to_bits()) {
            pool.swap_remove(i);
            hits += 1;
        }
    }
    hits
}
