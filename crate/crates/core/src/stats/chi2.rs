use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::genotype::SnpId;
use crate::stats::counts::AlleleCountVector;

/// Survival function of the chi-square distribution with one degree of freedom.
pub fn chi2_1_survival(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    erfc((x / 2.0).sqrt())
}

/// Association strength of one SNP between case and control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chi2Rank {
    pub statistic: f64,
    pub p_value: f64,
    /// Set when a rescaled control cell was empty and the statistic was
    /// pinned to +inf.
    pub degenerate: bool,
}

impl Chi2Rank {
    /// Smaller p-value wins; the statistic breaks ties once p underflows.
    pub fn outranks(&self, other: &Chi2Rank) -> bool {
        self.p_value < other.p_value
            || (self.p_value == other.p_value && self.statistic > other.statistic)
    }
}

/// Two-cell chi-square per SNP with control counts rescaled to the case total.
pub fn chi2_rank(case: &AlleleCountVector, control: &AlleleCountVector) -> Result<Vec<Chi2Rank>> {
    if case.len() != control.len() {
        return Err(Error::validation(format!(
            "case has {} SNPs, control has {}",
            case.len(),
            control.len()
        )));
    }
    if control.n_individuals == 0 {
        return Err(Error::validation("control population is empty"));
    }
    let n_case = case.n_individuals as f64;
    let scale = n_case / control.n_individuals as f64;
    Ok(case
        .counts
        .iter()
        .zip(&control.counts)
        .map(|(&case_minor, &control_minor)| {
            let observed = [n_case - case_minor as f64, case_minor as f64];
            let expected = [
                (control.n_individuals - control_minor) as f64 * scale,
                control_minor as f64 * scale,
            ];
            if expected.contains(&0.0) {
                return Chi2Rank {
                    statistic: f64::INFINITY,
                    p_value: 0.0,
                    degenerate: true,
                };
            }
            let statistic: f64 = observed
                .iter()
                .zip(&expected)
                .map(|(o, e)| (o - e) * (o - e) / e)
                .sum();
            Chi2Rank {
                statistic,
                p_value: chi2_1_survival(statistic),
                degenerate: false,
            }
        })
        .collect())
}

/// Chi-square ranks keyed by SNP.
#[derive(Debug, Clone, Default)]
pub struct RankTable {
    ranks: std::collections::HashMap<u32, Chi2Rank>,
}

impl RankTable {
    pub fn new(snps: &[SnpId], ranks: &[Chi2Rank]) -> Result<Self> {
        if snps.len() != ranks.len() {
            return Err(Error::validation(format!(
                "{} ranks for {} SNPs",
                ranks.len(),
                snps.len()
            )));
        }
        Ok(RankTable {
            ranks: snps.iter().map(|s| s.index).zip(ranks.iter().copied()).collect(),
        })
    }

    pub fn get(&self, snp: &SnpId) -> Option<&Chi2Rank> {
        self.ranks.get(&snp.index)
    }
}
