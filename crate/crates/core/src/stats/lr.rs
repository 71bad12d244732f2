//! Likelihood-ratio membership scores and the subset search that bounds
//! identification power.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{GenotypeMatrix, SnpId};
use crate::stats::counts::AlleleFreqVector;
use crate::stats::Removal;

/// Frequencies are clamped to `[FREQ_EPSILON, 1 - FREQ_EPSILON]` before logs.
pub const FREQ_EPSILON: f64 = 1e-6;

/// Per-individual, per-SNP log-likelihood-ratio contributions, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrMatrix {
    pub individuals: Vec<String>,
    pub snps: Vec<SnpId>,
    pub values: Vec<f64>,
}

impl LrMatrix {
    pub fn new(individuals: Vec<String>, snps: Vec<SnpId>, values: Vec<f64>) -> Result<Self> {
        if values.len() != individuals.len() * snps.len() {
            return Err(Error::validation(format!(
                "LR buffer holds {} values, expected {}x{}",
                values.len(),
                individuals.len(),
                snps.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("LR matrix contains non-finite values"));
        }
        Ok(LrMatrix {
            individuals,
            snps,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.individuals.len()
    }

    pub fn n_cols(&self) -> usize {
        self.snps.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.snps.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.snps.len();
        &self.values[row * c..(row + 1) * c]
    }

    /// Stacks matrices over the same SNP columns.
    pub fn concat_rows(parts: &[&LrMatrix]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::validation("cannot concatenate zero LR matrices"));
        };
        if let Some(bad) = parts.iter().find(|p| p.snps != first.snps) {
            return Err(Error::validation(format!(
                "LR submatrix columns {:?} differ from {:?}",
                bad.snps.iter().map(|s| s.index).collect::<Vec<_>>(),
                first.snps.iter().map(|s| s.index).collect::<Vec<_>>()
            )));
        }
        Ok(LrMatrix {
            individuals: parts.iter().flat_map(|p| p.individuals.iter().cloned()).collect(),
            snps: first.snps.clone(),
            values: parts.iter().flat_map(|p| p.values.iter().copied()).collect(),
        })
    }
}

fn clamp(f: f64) -> f64 {
    f.clamp(FREQ_EPSILON, 1.0 - FREQ_EPSILON)
}

/// LR contribution of carrying (`minor = true`) or not carrying the minor
/// allele at a SNP with case frequency `case` and reference frequency
/// `reference`.
pub fn lr_contribution(minor: bool, case: f64, reference: f64) -> f64 {
    let (case, reference) = (clamp(case), clamp(reference));
    if minor {
        case.ln() - reference.ln()
    } else {
        (1.0 - case).ln() - (1.0 - reference).ln()
    }
}

/// LR contributions of every individual of `m` over `snps`; the frequency
/// vectors are aligned with `snps`.
pub fn lr_matrix(
    m: &GenotypeMatrix,
    snps: &[SnpId],
    case_freqs: &AlleleFreqVector,
    ref_freqs: &AlleleFreqVector,
) -> Result<LrMatrix> {
    if case_freqs.len() != snps.len() || ref_freqs.len() != snps.len() {
        return Err(Error::validation(format!(
            "frequency vectors ({}, {}) not aligned with {} SNPs",
            case_freqs.len(),
            ref_freqs.len(),
            snps.len()
        )));
    }
    let cols = snps
        .iter()
        .map(|s| m.column_index(s))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<(f64, f64)> = case_freqs
        .freqs
        .iter()
        .zip(&ref_freqs.freqs)
        .map(|(&c, &r)| (lr_contribution(false, c, r), lr_contribution(true, c, r)))
        .collect();
    let n = m.n_individuals();
    let mut values = Vec::with_capacity(n * snps.len());
    for row in 0..n {
        values.extend(cols.iter().zip(&weights).map(|(&col, &(w0, w1))| {
            if m.get(row, col) == 1 {
                w1
            } else {
                w0
            }
        }));
    }
    LrMatrix::new(m.individuals().to_vec(), snps.to_vec(), values)
}

/// Smallest value `v` such that at least `q` of `values` are `<= v`.
pub fn upper_quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((q * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[k.min(sorted.len()) - 1]
}

/// Detection threshold and power of an LR test whose per-individual scores
/// are already summed over the chosen SNP subset.
pub fn power_from_scores(case_scores: &[f64], null_scores: &[f64], alpha: f64) -> (f64, f64) {
    let threshold = upper_quantile(null_scores, 1.0 - alpha);
    if case_scores.is_empty() {
        return (threshold, 0.0);
    }
    let detected = case_scores.iter().filter(|&&s| s > threshold).count();
    (threshold, detected as f64 / case_scores.len() as f64)
}

/// Identification power of the LR test restricted to the columns in `subset`.
pub fn identification_power(
    case_lr: &LrMatrix,
    null_lr: &LrMatrix,
    subset: &[SnpId],
    alpha: f64,
) -> Result<f64> {
    let cols = |m: &LrMatrix| -> Result<Vec<usize>> {
        crate::stats::counts::positions_in(&m.snps, subset)
    };
    let (case_cols, null_cols) = (cols(case_lr)?, cols(null_lr)?);
    let scores = |m: &LrMatrix, cols: &[usize]| -> Vec<f64> {
        (0..m.n_rows())
            .map(|r| cols.iter().map(|&c| m.get(r, c)).sum())
            .collect()
    };
    let (_, power) = power_from_scores(
        &scores(case_lr, &case_cols),
        &scores(null_lr, &null_cols),
        alpha,
    );
    Ok(power)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSelection {
    pub retained: Vec<SnpId>,
    /// Removal order, each with its discrimination score.
    pub removed: Vec<Removal>,
    pub initial_power: f64,
    pub final_power: f64,
    pub threshold: f64,
}

/// Greedily drops the most discriminating SNP until the LR test's power on
/// the case rows falls below `power_threshold`.
///
/// Scores are summed over columns in ascending SNP index, so the result does
/// not depend on the input column order.
pub fn lr_test_select(
    case_lr: &LrMatrix,
    null_lr: &LrMatrix,
    alpha: f64,
    power_threshold: f64,
) -> Result<LrSelection> {
    if null_lr.n_rows() == 0 {
        return Err(Error::validation("LR test needs a non-empty null population"));
    }
    if case_lr.snps.len() != null_lr.snps.len()
        || crate::stats::counts::positions_in(&null_lr.snps, &case_lr.snps).is_err()
    {
        return Err(Error::validation("case and null LR matrices have different SNP columns"));
    }
    let null_pos = crate::stats::counts::positions_in(&null_lr.snps, &case_lr.snps)?;

    // canonical column order
    let mut order: Vec<usize> = (0..case_lr.n_cols()).collect();
    order.sort_by_key(|&c| case_lr.snps[c].index);

    let column_mean = |m: &LrMatrix, col: usize| -> f64 {
        if m.n_rows() == 0 {
            return 0.0;
        }
        (0..m.n_rows()).map(|r| m.get(r, col)).sum::<f64>() / m.n_rows() as f64
    };
    let delta: Vec<f64> = (0..case_lr.n_cols())
        .map(|c| column_mean(case_lr, c) - column_mean(null_lr, null_pos[c]))
        .collect();

    let mut case_scores: Vec<f64> = (0..case_lr.n_rows())
        .map(|r| order.iter().map(|&c| case_lr.get(r, c)).sum())
        .collect();
    let mut null_scores: Vec<f64> = (0..null_lr.n_rows())
        .map(|r| order.iter().map(|&c| null_lr.get(r, null_pos[c])).sum())
        .collect();

    let mut active = vec![true; case_lr.n_cols()];
    let mut removed = Vec::new();
    let (mut threshold, initial_power) = power_from_scores(&case_scores, &null_scores, alpha);
    let mut power = initial_power;

    while power >= power_threshold {
        let Some(worst) = order
            .iter()
            .copied()
            .filter(|&c| active[c])
            .max_by(|&a, &b| {
                delta[a]
                    .total_cmp(&delta[b])
                    .then(case_lr.snps[b].index.cmp(&case_lr.snps[a].index))
            })
        else {
            break;
        };
        active[worst] = false;
        for (r, s) in case_scores.iter_mut().enumerate() {
            *s -= case_lr.get(r, worst);
        }
        for (r, s) in null_scores.iter_mut().enumerate() {
            *s -= null_lr.get(r, null_pos[worst]);
        }
        removed.push(Removal {
            snp: case_lr.snps[worst].clone(),
            metric: delta[worst],
        });
        (threshold, power) = power_from_scores(&case_scores, &null_scores, alpha);
        if active.iter().all(|a| !a) {
            break;
        }
    }

    Ok(LrSelection {
        retained: case_lr
            .snps
            .iter()
            .zip(&active)
            .filter(|(_, &a)| a)
            .map(|(s, _)| s.clone())
            .collect(),
        removed,
        initial_power,
        final_power: power,
        threshold,
    })
}
