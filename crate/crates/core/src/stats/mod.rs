//! Pure statistics shared by the protocol leader and the baselines.

pub mod chi2;
pub mod counts;
pub mod ld;
pub mod lr;

use serde::{Deserialize, Serialize};

use crate::genotype::SnpId;
use crate::protocol::Phase;

pub use chi2::{chi2_1_survival, chi2_rank, Chi2Rank, RankTable};
pub use counts::{
    allele_counts, filter_maf, global_maf, positions_in, AlleleCountVector, AlleleFreqVector,
};
pub use ld::{
    greedy_ld_filter, ld_p_value, merge_pair_stats, pair_stats, r_squared, LdOutcome, LdScan,
    PairCorrelationStats, PairStatsSource, PairwiseContingency, PooledPairs,
};
pub use lr::{
    identification_power, lr_contribution, lr_matrix, lr_test_select, upper_quantile, LrMatrix,
    LrSelection, FREQ_EPSILON,
};

/// A SNP dropped by a phase, with the metric that decided it: the pooled
/// frequency (MAF), the pair p-value (LD) or the discrimination score (LR).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub snp: SnpId,
    pub metric: f64,
}

/// Retained SNPs after each of the three phases.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseLists {
    pub maf: Vec<SnpId>,
    pub ld: Vec<SnpId>,
    pub lr: Vec<SnpId>,
}

impl PhaseLists {
    pub fn get(&self, phase: Phase) -> Option<&[SnpId]> {
        match phase {
            Phase::Maf => Some(&self.maf),
            Phase::Ld => Some(&self.ld),
            Phase::Lr => Some(&self.lr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseAudit {
    pub phase: Phase,
    pub removed: Vec<Removal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyVerdict {
    pub lists: PhaseLists,
    pub audit: Vec<PhaseAudit>,
}

impl PrivacyVerdict {
    /// The final release set.
    pub fn retained(&self) -> &[SnpId] {
        &self.lists.lr
    }
}

/// Elements of `list` present in every one of `others`, in `list` order.
pub fn intersect_ordered(list: &[SnpId], others: &[Vec<SnpId>]) -> Vec<SnpId> {
    let sets: Vec<std::collections::HashSet<u32>> = others
        .iter()
        .map(|o| o.iter().map(|s| s.index).collect())
        .collect();
    list.iter()
        .filter(|s| sets.iter().all(|set| set.contains(&s.index)))
        .cloned()
        .collect()
}

/// Removals of `input` that did not survive into `kept`, each tagged with the
/// metric reported by `metric`.
pub fn removals(
    input: &[SnpId],
    kept: &[SnpId],
    mut metric: impl FnMut(&SnpId) -> f64,
) -> Vec<Removal> {
    let kept: std::collections::HashSet<u32> = kept.iter().map(|s| s.index).collect();
    input
        .iter()
        .filter(|s| !kept.contains(&s.index))
        .map(|s| Removal {
            snp: s.clone(),
            metric: metric(s),
        })
        .collect()
}
