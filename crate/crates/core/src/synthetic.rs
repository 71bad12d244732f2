//! Seeded synthetic federations, used in place of access-restricted cohorts.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{split_equally, FederationDataset, GenotypeMatrix, Population, SnpId};

/// Minor-allele frequency of one SNP in each population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnpProfile {
    pub label: String,
    pub case_freq: f64,
    pub reference_freq: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SyntheticProfile {
    pub snps: Vec<SnpProfile>,
}

impl SyntheticProfile {
    /// Same frequency in both populations for every SNP.
    pub fn uniform(freqs: &[f64]) -> Self {
        SyntheticProfile {
            snps: freqs
                .iter()
                .enumerate()
                .map(|(i, &f)| SnpProfile {
                    label: format!("snp{}", i + 1),
                    case_freq: f,
                    reference_freq: f,
                })
                .collect(),
        }
    }

    /// Reference frequencies drawn from U(0.005, 0.5). One SNP in five is
    /// associated: its case frequency moves by U(0.04, 0.12) in a random
    /// direction. The rest have identical frequencies in both populations.
    pub fn random(n_snps: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f11_e5a7_1c00);
        let snps = (0..n_snps)
            .map(|i| {
                let reference_freq: f64 = rng.gen_range(0.005..0.5);
                let shift = if rng.gen_bool(0.2) {
                    let magnitude: f64 = rng.gen_range(0.04..0.12);
                    if rng.gen_bool(0.5) {
                        magnitude
                    } else {
                        -magnitude
                    }
                } else {
                    0.0
                };
                SnpProfile {
                    label: format!("snp{}", i + 1),
                    case_freq: (reference_freq + shift).clamp(0.0, 1.0),
                    reference_freq,
                }
            })
            .collect();
        SyntheticProfile { snps }
    }

    pub fn len(&self) -> usize {
        self.snps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snps.is_empty()
    }

    pub fn snp_ids(&self) -> Vec<SnpId> {
        self.snps
            .iter()
            .enumerate()
            .map(|(i, p)| SnpId {
                index: i as u32,
                label: p.label.clone(),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.snps.iter().enumerate() {
            if p.label.is_empty() {
                return Err(Error::validation(format!("profile SNP {i} has an empty label")));
            }
            for f in [p.case_freq, p.reference_freq] {
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::validation(format!(
                        "profile frequency {f} for {} outside [0, 1]",
                        p.label
                    )));
                }
            }
        }
        Ok(())
    }

    /// One `label,frequency_case,frequency_reference` line per SNP.
    pub fn parse(text: &str) -> Result<Self> {
        let mut snps = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: i + 1,
                    column: fields.len().min(3) + 1,
                    reason: "expected label,frequency_case,frequency_reference".into(),
                });
            }
            let freq = |col: usize| {
                fields[col].parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    column: col + 1,
                    reason: e.to_string(),
                })
            };
            snps.push(SnpProfile {
                label: fields[0].to_string(),
                case_freq: freq(1)?,
                reference_freq: freq(2)?,
            });
        }
        let profile = SyntheticProfile { snps };
        profile.validate()?;
        Ok(profile)
    }

    pub fn to_text(&self) -> String {
        self.snps
            .iter()
            .map(|p| format!("{},{},{}\n", p.label, p.case_freq, p.reference_freq))
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }
}

fn draw_matrix(
    rng: &mut ChaCha8Rng,
    population: Population,
    n: usize,
    snps: &[SnpId],
    freqs: impl Iterator<Item = f64>,
) -> Result<GenotypeMatrix> {
    let prefix = match population {
        Population::Case => "case",
        Population::Reference => "ref",
    };
    let individuals = (0..n).map(|i| format!("{prefix}{i}")).collect();
    let mut alleles = Vec::with_capacity(n * snps.len());
    for f in freqs {
        alleles.extend((0..n).map(|_| u8::from(rng.gen_bool(f))));
    }
    GenotypeMatrix::from_columns(population, individuals, snps.to_vec(), alleles)
}

/// Draws every cell independently from Bernoulli(freq) of its population and
/// splits the case cohort equally across `gdos` members. Identical arguments
/// give a bit-identical dataset.
pub fn generate_synthetic(
    n_case: usize,
    n_reference: usize,
    profile: &SyntheticProfile,
    gdos: usize,
    rng_seed: u64,
) -> Result<FederationDataset> {
    if n_case == 0 || n_reference == 0 {
        return Err(Error::validation("population sizes must be positive"));
    }
    if profile.is_empty() {
        return Err(Error::validation("profile lists no SNPs"));
    }
    profile.validate()?;
    let snps = profile.snp_ids();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let case = draw_matrix(
        &mut rng,
        Population::Case,
        n_case,
        &snps,
        profile.snps.iter().map(|p| p.case_freq),
    )?;
    let reference = draw_matrix(
        &mut rng,
        Population::Reference,
        n_reference,
        &snps,
        profile.snps.iter().map(|p| p.reference_freq),
    )?;
    FederationDataset::new(split_equally(&case, gdos)?, reference)
}
