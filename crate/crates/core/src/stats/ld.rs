//! Pairwise linkage disequilibrium from aggregable sums.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{GenotypeMatrix, SnpId};
use crate::stats::chi2::{chi2_1_survival, RankTable};
use crate::stats::Removal;

/// The five additive sums a member outsources for one SNP pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairCorrelationStats {
    pub sum_l: u64,
    pub sum_r: u64,
    pub sum_lr: u64,
    pub sum_l2: u64,
    pub sum_r2: u64,
    pub n: u64,
}

impl PairCorrelationStats {
    pub fn contingency(&self) -> Result<PairwiseContingency> {
        if self.sum_l2 != self.sum_l || self.sum_r2 != self.sum_r {
            return Err(Error::InconsistentStats(format!(
                "squared sums ({}, {}) differ from plain sums ({}, {}) for binary data",
                self.sum_l2, self.sum_r2, self.sum_l, self.sum_r
            )));
        }
        let n = self.n as i128;
        let c11 = self.sum_lr as i128;
        let c10 = self.sum_l as i128 - c11;
        let c01 = self.sum_r as i128 - c11;
        let c00 = n - self.sum_l as i128 - c01;
        if c10 < 0 || c01 < 0 || c00 < 0 {
            return Err(Error::InconsistentStats(format!(
                "negative contingency cell from sums {self:?}"
            )));
        }
        Ok(PairwiseContingency {
            c00: c00 as u64,
            c01: c01 as u64,
            c10: c10 as u64,
            c11: c11 as u64,
        })
    }
}

/// Joint allele counts of two SNPs; `cXY` counts individuals with allele X at
/// the left SNP and Y at the right SNP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseContingency {
    pub c00: u64,
    pub c01: u64,
    pub c10: u64,
    pub c11: u64,
}

impl PairwiseContingency {
    pub fn row0(&self) -> u64 {
        self.c00 + self.c01
    }
    pub fn row1(&self) -> u64 {
        self.c10 + self.c11
    }
    pub fn col0(&self) -> u64 {
        self.c00 + self.c10
    }
    pub fn col1(&self) -> u64 {
        self.c01 + self.c11
    }
    pub fn total(&self) -> u64 {
        self.c00 + self.c01 + self.c10 + self.c11
    }

    /// Squared correlation; 0 when either SNP is constant.
    pub fn r_squared(&self) -> f64 {
        let margins = [self.row0(), self.row1(), self.col0(), self.col1()];
        if margins.contains(&0) {
            return 0.0;
        }
        let cross = self.c00 as i128 * self.c11 as i128 - self.c01 as i128 * self.c10 as i128;
        let num = (cross * cross) as f64;
        let den = margins.iter().map(|&m| m as f64).product::<f64>();
        (num / den).min(1.0)
    }
}

pub fn pair_stats(m: &GenotypeMatrix, l: &SnpId, r: &SnpId) -> Result<PairCorrelationStats> {
    let left = m.column_of(l)?;
    let right = m.column_of(r)?;
    let mut s = PairCorrelationStats {
        n: m.n_individuals() as u64,
        ..Default::default()
    };
    for (&a, &b) in left.iter().zip(right) {
        let (a, b) = (a as u64, b as u64);
        s.sum_l += a;
        s.sum_r += b;
        s.sum_lr += a * b;
        s.sum_l2 += a * a;
        s.sum_r2 += b * b;
    }
    Ok(s)
}

pub fn merge_pair_stats(parts: &[PairCorrelationStats]) -> Result<PairCorrelationStats> {
    if parts.is_empty() {
        return Err(Error::validation("cannot merge zero pair statistics"));
    }
    Ok(parts.iter().fold(PairCorrelationStats::default(), |acc, p| PairCorrelationStats {
        sum_l: acc.sum_l + p.sum_l,
        sum_r: acc.sum_r + p.sum_r,
        sum_lr: acc.sum_lr + p.sum_lr,
        sum_l2: acc.sum_l2 + p.sum_l2,
        sum_r2: acc.sum_r2 + p.sum_r2,
        n: acc.n + p.n,
    }))
}

pub fn r_squared(s: &PairCorrelationStats) -> Result<f64> {
    if s.n == 0 {
        return Err(Error::validation("r-squared over an empty population"));
    }
    Ok(s.contingency()?.r_squared())
}

/// p-value of `n * r2` under chi-square(1).
pub fn ld_p_value(r2: f64, n: u64) -> f64 {
    chi2_1_survival(n as f64 * r2)
}

/// Anything that can produce merged pair statistics on demand.
pub trait PairStatsSource {
    fn pair_stats(&mut self, left: &SnpId, right: &SnpId) -> Result<PairCorrelationStats>;
}

/// Merges the statistics of several matrices (case shards plus reference).
pub struct PooledPairs<'a> {
    pub matrices: Vec<&'a GenotypeMatrix>,
}

impl PairStatsSource for PooledPairs<'_> {
    fn pair_stats(&mut self, left: &SnpId, right: &SnpId) -> Result<PairCorrelationStats> {
        let parts = self
            .matrices
            .iter()
            .map(|m| pair_stats(m, left, right))
            .collect::<Result<Vec<_>>>()?;
        merge_pair_stats(&parts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdOutcome {
    pub retained: Vec<SnpId>,
    pub removed: Vec<Removal>,
    pub evaluations: usize,
}

/// Resumable survivor scan over a candidate list.
///
/// The survivor is compared with the next candidate. Independent pairs retire
/// the survivor into the output and promote the candidate; dependent pairs keep
/// whichever SNP has the better chi-square rank as the survivor. The last
/// survivor is always retained.
#[derive(Debug, Clone)]
pub struct LdScan {
    candidates: Vec<SnpId>,
    ranks: RankTable,
    cutoff: f64,
    survivor: usize,
    next: usize,
    retained: Vec<SnpId>,
    removed: Vec<Removal>,
    evaluations: usize,
    finished: bool,
}

impl LdScan {
    pub fn new(candidates: Vec<SnpId>, ranks: RankTable, cutoff: f64) -> Result<Self> {
        if let Some(missing) = candidates.iter().find(|s| ranks.get(s).is_none()) {
            return Err(Error::validation(format!("no chi-square rank for {missing}")));
        }
        let mut scan = LdScan {
            candidates,
            ranks,
            cutoff,
            survivor: 0,
            next: 1,
            retained: Vec::new(),
            removed: Vec::new(),
            evaluations: 0,
            finished: false,
        };
        scan.settle();
        Ok(scan)
    }

    fn settle(&mut self) {
        if self.finished {
            return;
        }
        if self.candidates.is_empty() {
            self.finished = true;
        } else if self.next >= self.candidates.len() {
            self.retained.push(self.candidates[self.survivor].clone());
            self.finished = true;
        }
    }

    /// The pair whose merged statistics the scan needs next.
    pub fn pending(&self) -> Option<(&SnpId, &SnpId)> {
        (!self.finished).then(|| (&self.candidates[self.survivor], &self.candidates[self.next]))
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn supply(&mut self, stats: &PairCorrelationStats) -> Result<()> {
        if self.finished {
            return Err(Error::Protocol("LD scan already finished".into()));
        }
        let r2 = r_squared(stats)?;
        let p = ld_p_value(r2, stats.n);
        self.evaluations += 1;
        let (s, c) = (self.survivor, self.next);
        if p > self.cutoff {
            self.retained.push(self.candidates[s].clone());
            self.survivor = c;
        } else {
            let rank_s = self.ranks.get(&self.candidates[s]).expect("checked in new");
            let rank_c = self.ranks.get(&self.candidates[c]).expect("checked in new");
            // ties keep the current survivor
            let (winner, loser) = if rank_c.outranks(rank_s) { (c, s) } else { (s, c) };
            self.removed.push(Removal {
                snp: self.candidates[loser].clone(),
                metric: p,
            });
            self.survivor = winner;
        }
        self.next += 1;
        self.settle();
        Ok(())
    }

    pub fn finish(self) -> Result<LdOutcome> {
        if !self.finished {
            return Err(Error::Protocol("LD scan finished early".into()));
        }
        Ok(LdOutcome {
            retained: self.retained,
            removed: self.removed,
            evaluations: self.evaluations,
        })
    }
}

pub fn greedy_ld_filter(
    candidates: &[SnpId],
    source: &mut dyn PairStatsSource,
    ranks: &RankTable,
    ld_cutoff: f64,
) -> Result<LdOutcome> {
    let mut scan = LdScan::new(candidates.to_vec(), ranks.clone(), ld_cutoff)?;
    while let Some((l, r)) = scan.pending() {
        let (l, r) = (l.clone(), r.clone());
        let stats = source.pair_stats(&l, &r)?;
        scan.supply(&stats)?;
    }
    scan.finish()
}
