use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{GenotypeMatrix, SnpId};

/// Per-SNP minor-allele counts over one population, aligned with a candidate
/// SNP list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlleleCountVector {
    pub counts: Vec<u32>,
    pub n_individuals: u32,
}

impl AlleleCountVector {
    pub fn new(counts: Vec<u32>, n_individuals: u32) -> Result<Self> {
        if let Some(c) = counts.iter().find(|&&c| c > n_individuals) {
            return Err(Error::validation(format!(
                "allele count {c} exceeds population size {n_individuals}"
            )));
        }
        Ok(AlleleCountVector {
            counts,
            n_individuals,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Element-wise sum of count vectors from disjoint populations.
    pub fn merge(parts: &[&AlleleCountVector]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::validation("cannot merge zero count vectors"));
        };
        let mut counts = vec![0u32; first.len()];
        let mut n: u32 = 0;
        for p in parts {
            if p.len() != counts.len() {
                return Err(Error::validation(format!(
                    "count vector length {} differs from {}",
                    p.len(),
                    counts.len()
                )));
            }
            for (acc, &c) in counts.iter_mut().zip(&p.counts) {
                *acc = acc
                    .checked_add(c)
                    .ok_or_else(|| Error::validation("allele count overflow"))?;
            }
            n = n
                .checked_add(p.n_individuals)
                .ok_or_else(|| Error::validation("population size overflow"))?;
        }
        Self::new(counts, n)
    }

    pub fn frequencies(&self) -> AlleleFreqVector {
        let n = self.n_individuals as f64;
        AlleleFreqVector {
            freqs: self
                .counts
                .iter()
                .map(|&c| if self.n_individuals == 0 { 0.0 } else { c as f64 / n })
                .collect(),
        }
    }

    pub fn select(&self, positions: &[usize]) -> Self {
        AlleleCountVector {
            counts: positions.iter().map(|&p| self.counts[p]).collect(),
            n_individuals: self.n_individuals,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlleleFreqVector {
    pub freqs: Vec<f64>,
}

impl AlleleFreqVector {
    pub fn new(freqs: Vec<f64>) -> Result<Self> {
        if let Some(f) = freqs.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::validation(format!("frequency {f} outside [0, 1]")));
        }
        Ok(AlleleFreqVector { freqs })
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn select(&self, positions: &[usize]) -> Self {
        AlleleFreqVector {
            freqs: positions.iter().map(|&p| self.freqs[p]).collect(),
        }
    }
}

/// Position of every `wanted` SNP inside `list`.
pub fn positions_in(list: &[SnpId], wanted: &[SnpId]) -> Result<Vec<usize>> {
    let lookup: std::collections::HashMap<u32, usize> =
        list.iter().enumerate().map(|(i, s)| (s.index, i)).collect();
    wanted
        .iter()
        .map(|s| {
            lookup
                .get(&s.index)
                .copied()
                .ok_or_else(|| Error::validation(format!("SNP {s} not in candidate list")))
        })
        .collect()
}

pub fn allele_counts(m: &GenotypeMatrix, candidates: &[SnpId]) -> Result<AlleleCountVector> {
    let counts = candidates
        .iter()
        .map(|snp| {
            let col = m.column_of(snp)?;
            Ok(col.iter().map(|&v| v as u32).sum())
        })
        .collect::<Result<Vec<u32>>>()?;
    AlleleCountVector::new(counts, m.n_individuals() as u32)
}

/// Pools case counts from every member with the reference counts (added once)
/// and returns per-SNP frequencies together with the pooled population size.
pub fn global_maf(
    locals: &[&AlleleCountVector],
    reference: &AlleleCountVector,
) -> Result<(AlleleFreqVector, u64)> {
    if locals.is_empty() {
        return Err(Error::validation("global MAF needs at least one case count vector"));
    }
    let len = reference.len();
    let mut totals = vec![0u64; len];
    let mut n_total = reference.n_individuals as u64;
    for v in locals {
        if v.len() != len {
            return Err(Error::validation(format!(
                "count vector length {} differs from reference length {len}",
                v.len()
            )));
        }
        n_total += v.n_individuals as u64;
        for (t, &c) in totals.iter_mut().zip(&v.counts) {
            *t += c as u64;
        }
    }
    if n_total == 0 {
        return Err(Error::validation("pooled population is empty"));
    }
    for (t, &c) in totals.iter_mut().zip(&reference.counts) {
        *t += c as u64;
    }
    let freqs = totals.iter().map(|&t| t as f64 / n_total as f64).collect();
    Ok((AlleleFreqVector { freqs }, n_total))
}

/// Keeps SNPs whose pooled frequency is at least `cutoff`, in input order.
pub fn filter_maf(freqs: &AlleleFreqVector, cutoff: f64, candidates: &[SnpId]) -> Result<Vec<SnpId>> {
    if freqs.len() != candidates.len() {
        return Err(Error::validation(format!(
            "{} frequencies for {} candidates",
            freqs.len(),
            candidates.len()
        )));
    }
    Ok(candidates
        .iter()
        .zip(&freqs.freqs)
        .filter(|(_, &f)| f >= cutoff)
        .map(|(s, _)| s.clone())
        .collect())
}
