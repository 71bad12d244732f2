//! Reference pipelines: the centralized analysis over pooled data, its
//! phase-wise collusion counterpart, and the naive scheme that intersects
//! purely local analyses.

use serde::{Deserialize, Serialize};

use crate::collusion::CollusionPlan;
use crate::config::StudyConfig;
use crate::error::{Error, Result};
use crate::genotype::{FederationDataset, GenotypeMatrix, Population, SnpId};
use crate::stats::{
    allele_counts, chi2_rank, filter_maf, global_maf, greedy_ld_filter, intersect_ordered,
    lr_matrix, lr_test_select, positions_in, AlleleCountVector, PhaseLists, PooledPairs, RankTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    Centralized,
    NaiveDistributed,
    GenDPR,
    GenDPRCollusion,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Centralized => "centralized",
            Arm::NaiveDistributed => "naive",
            Arm::GenDPR => "gendpr",
            Arm::GenDPRCollusion => "collusion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub arm: Arm,
    pub lists: PhaseLists,
    /// Lists of each independently analysed part: shards for the naive arm,
    /// combinations for collusion runs, empty otherwise.
    pub components: Vec<PhaseLists>,
}

impl BaselineReport {
    pub fn retained(&self) -> &[SnpId] {
        &self.lists.lr
    }
}

/// Runs every phase on each pooled group, intersecting across groups after
/// each phase. A single group is the plain centralized analysis.
fn phasewise(
    groups: &[GenotypeMatrix],
    reference: &GenotypeMatrix,
    config: &StudyConfig,
) -> Result<(PhaseLists, Vec<PhaseLists>)> {
    let desired = &config.desired;
    let ref_counts = allele_counts(reference, desired)?;
    let group_counts = groups
        .iter()
        .map(|g| allele_counts(g, desired))
        .collect::<Result<Vec<_>>>()?;
    let mut parts = vec![PhaseLists::default(); groups.len()];

    for (p, counts) in parts.iter_mut().zip(&group_counts) {
        let (freqs, _) = global_maf(&[counts], &ref_counts)?;
        p.maf = filter_maf(&freqs, config.maf_cutoff, desired)?;
    }
    let maf = intersect_ordered(desired, &parts.iter().map(|p| p.maf.clone()).collect::<Vec<_>>());

    let pos = positions_in(desired, &maf)?;
    let ref_sel = ref_counts.select(&pos);
    for ((p, counts), group) in parts.iter_mut().zip(&group_counts).zip(groups) {
        let ranks = chi2_rank(&counts.select(&pos), &ref_sel)?;
        let table = RankTable::new(&maf, &ranks)?;
        let mut source = PooledPairs {
            matrices: vec![group, reference],
        };
        p.ld = greedy_ld_filter(&maf, &mut source, &table, config.ld_cutoff)?.retained;
    }
    let ld = intersect_ordered(&maf, &parts.iter().map(|p| p.ld.clone()).collect::<Vec<_>>());

    let pos = positions_in(desired, &ld)?;
    let ref_freqs = ref_counts.select(&pos).frequencies();
    for ((p, counts), group) in parts.iter_mut().zip(&group_counts).zip(groups) {
        let case_freqs = counts.select(&pos).frequencies();
        let case_lr = lr_matrix(group, &ld, &case_freqs, &ref_freqs)?;
        let null = lr_matrix(reference, &ld, &case_freqs, &ref_freqs)?;
        p.lr = lr_test_select(&case_lr, &null, config.alpha, config.power_threshold)?.retained;
    }
    let lr = intersect_ordered(&ld, &parts.iter().map(|p| p.lr.clone()).collect::<Vec<_>>());
    Ok((PhaseLists { maf, ld, lr }, parts))
}

/// The three phases applied directly to the pooled case matrix.
pub fn centralized_pipeline(
    pooled_case: &GenotypeMatrix,
    reference: &GenotypeMatrix,
    config: &StudyConfig,
) -> Result<BaselineReport> {
    let (lists, _) = phasewise(std::slice::from_ref(pooled_case), reference, config)?;
    Ok(BaselineReport {
        arm: Arm::Centralized,
        lists,
        components: Vec::new(),
    })
}

/// Pools each combination's shards and runs the phase-wise
/// per-combination-then-intersect procedure without any messaging.
pub fn centralized_collusion_pipeline(
    dataset: &FederationDataset,
    config: &StudyConfig,
    plan: &CollusionPlan,
) -> Result<BaselineReport> {
    let shards = dataset.shards();
    let groups = plan
        .combinations
        .iter()
        .map(|c| {
            let parts: Vec<&GenotypeMatrix> = c
                .members
                .iter()
                .map(|m| {
                    shards
                        .get(m.0 as usize)
                        .ok_or_else(|| Error::Config(format!("combination names unknown member {m}")))
                })
                .collect::<Result<_>>()?;
            GenotypeMatrix::concat_rows(Population::Case, &parts)
        })
        .collect::<Result<Vec<_>>>()?;
    let (lists, components) = phasewise(&groups, dataset.reference(), config)?;
    Ok(BaselineReport {
        arm: if plan.is_trivial() { Arm::Centralized } else { Arm::GenDPRCollusion },
        lists,
        components,
    })
}

/// Global MAF, then LD and LR evaluated on each shard alone (with the public
/// reference) and intersected. Shard-local frequencies stand in for the
/// pooled case frequencies, which is exactly what makes this arm wrong.
pub fn naive_pipeline(
    shards: &[GenotypeMatrix],
    reference: &GenotypeMatrix,
    config: &StudyConfig,
) -> Result<BaselineReport> {
    if shards.is_empty() {
        return Err(Error::validation("naive pipeline needs at least one shard"));
    }
    let desired = &config.desired;
    let ref_counts = allele_counts(reference, desired)?;
    let shard_counts = shards
        .iter()
        .map(|s| allele_counts(s, desired))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&AlleleCountVector> = shard_counts.iter().collect();
    let (freqs, _) = global_maf(&refs, &ref_counts)?;
    let maf = filter_maf(&freqs, config.maf_cutoff, desired)?;
    let mut parts = vec![
        PhaseLists {
            maf: maf.clone(),
            ..Default::default()
        };
        shards.len()
    ];

    let pos = positions_in(desired, &maf)?;
    let ref_sel = ref_counts.select(&pos);
    for ((p, counts), shard) in parts.iter_mut().zip(&shard_counts).zip(shards) {
        let ranks = chi2_rank(&counts.select(&pos), &ref_sel)?;
        let table = RankTable::new(&maf, &ranks)?;
        let mut source = PooledPairs {
            matrices: vec![shard, reference],
        };
        p.ld = greedy_ld_filter(&maf, &mut source, &table, config.ld_cutoff)?.retained;
    }
    let ld = intersect_ordered(&maf, &parts.iter().map(|p| p.ld.clone()).collect::<Vec<_>>());

    let pos = positions_in(desired, &ld)?;
    let ref_freqs = ref_counts.select(&pos).frequencies();
    for ((p, counts), shard) in parts.iter_mut().zip(&shard_counts).zip(shards) {
        let local_freqs = counts.select(&pos).frequencies();
        let case_lr = lr_matrix(shard, &ld, &local_freqs, &ref_freqs)?;
        let null = lr_matrix(reference, &ld, &local_freqs, &ref_freqs)?;
        p.lr = lr_test_select(&case_lr, &null, config.alpha, config.power_threshold)?.retained;
    }
    let lr = intersect_ordered(&ld, &parts.iter().map(|p| p.lr.clone()).collect::<Vec<_>>());
    Ok(BaselineReport {
        arm: Arm::NaiveDistributed,
        lists: PhaseLists { maf, ld, lr },
        components: parts,
    })
}
