//! Collusion tolerance: analyse every subset of members that colluders could
//! isolate and release only what every subset agrees is safe.

use serde::{Deserialize, Serialize};

use crate::config::{CollusionMode, StudyConfig};
use crate::error::{Error, Result};
use crate::genotype::{FederationDataset, SnpId};
use crate::protocol::{run_protocol_with_plan, NodeId, ProtocolOptions};
use crate::stats::PrivacyVerdict;

/// A subset of `G - f` members analysed as if the other `f` colluded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CombinationId {
    pub ordinal: u32,
    /// Sorted ascending.
    pub members: Vec<NodeId>,
}

impl CombinationId {
    pub fn contains(&self, node: NodeId) -> bool {
        self.members.binary_search(&node).is_ok()
    }
}

/// Size-`(G - f)` subsets of `0..G` in lexicographic order, numbered densely.
pub fn enumerate_combinations(gdos: usize, colluders: usize) -> Result<Vec<CombinationId>> {
    if colluders >= gdos {
        return Err(Error::Config(format!(
            "colluders ({colluders}) must be fewer than members ({gdos})"
        )));
    }
    let k = gdos - colluders;
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(CombinationId {
            ordinal: out.len() as u32,
            members: current.iter().map(|&i| NodeId(i as u16)).collect(),
        });
        // advance to the next k-subset
        let Some(i) = (0..k).rev().find(|&i| current[i] < gdos - k + i) else {
            break;
        };
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollusionPlan {
    pub mode: CollusionMode,
    pub combinations: Vec<CombinationId>,
}

impl CollusionPlan {
    pub fn new(gdos: usize, mode: CollusionMode) -> Result<Self> {
        let combinations = match mode {
            CollusionMode::Fixed(f) => enumerate_combinations(gdos, f)?,
            CollusionMode::Conservative => {
                if gdos < 2 {
                    return Err(Error::Config("conservative mode needs at least 2 members".into()));
                }
                let mut all = Vec::new();
                for f in 1..gdos {
                    for mut c in enumerate_combinations(gdos, f)? {
                        c.ordinal = all.len() as u32;
                        all.push(c);
                    }
                }
                all
            }
        };
        Ok(CollusionPlan { mode, combinations })
    }

    /// True when the plan is the plain, collusion-free analysis.
    pub fn is_trivial(&self) -> bool {
        self.mode == CollusionMode::Fixed(0)
    }

    /// Identifier carried on messages for a combination; absent for the
    /// trivial plan.
    pub fn tag(&self, combination: &CombinationId) -> Option<u32> {
        (!self.is_trivial()).then_some(combination.ordinal)
    }
}

/// Runs the distributed protocol with every phase evaluated per combination
/// and intersected before broadcast.
pub fn run_collusion_pipeline(
    dataset: &FederationDataset,
    config: &StudyConfig,
    plan: &CollusionPlan,
) -> Result<PrivacyVerdict> {
    run_protocol_with_plan(dataset, config, plan, &ProtocolOptions::default()).map(|o| o.verdict)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnerabilityReport {
    pub vulnerable: Vec<SnpId>,
    /// Share of the collusion-free release that collusion tolerance removes.
    pub percent_of_release: f64,
}

/// SNPs released without collusion tolerance that the tolerant run withholds.
pub fn vulnerable_snps(
    without: &PrivacyVerdict,
    with_tolerance: &PrivacyVerdict,
    desired: &[SnpId],
) -> Result<VulnerabilityReport> {
    let in_desired = |v: &PrivacyVerdict| {
        let idx: std::collections::HashSet<u32> = desired.iter().map(|s| s.index).collect();
        v.retained().iter().all(|s| idx.contains(&s.index))
    };
    if !in_desired(without) || !in_desired(with_tolerance) {
        return Err(Error::validation("verdicts were not computed over the same desired SNP list"));
    }
    let kept: std::collections::HashSet<u32> =
        with_tolerance.retained().iter().map(|s| s.index).collect();
    let vulnerable: Vec<SnpId> = without
        .retained()
        .iter()
        .filter(|s| !kept.contains(&s.index))
        .cloned()
        .collect();
    let base = without.retained().len();
    let percent_of_release = if base == 0 {
        0.0
    } else {
        100.0 * vulnerable.len() as f64 / base as f64
    };
    Ok(VulnerabilityReport {
        vulnerable,
        percent_of_release,
    })
}
