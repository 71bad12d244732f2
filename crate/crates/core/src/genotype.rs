//! Genomes, populations and federation datasets.
//!
//! Every individual carries one binary value per SNP: 0 for the major allele,
//! 1 for the minor allele. Matrices are stored column-major since almost every
//! statistic walks a SNP column.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SnpId {
    /// Position in the original study SNP list.
    pub index: u32,
    pub label: String,
}

impl SnpId {
    pub fn new(index: u32, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(Error::validation(format!("SNP {index} has an empty label")));
        }
        Ok(SnpId { index, label })
    }
}

impl fmt::Display for SnpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.label, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Population {
    Case,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenotypeMatrix {
    population: Population,
    individuals: Vec<String>,
    snps: Vec<SnpId>,
    /// Column-major: `alleles[col * n_rows + row]`.
    alleles: Vec<u8>,
    column_of: HashMap<u32, usize>,
}

impl GenotypeMatrix {
    /// Builds a matrix from row-major data.
    pub fn from_rows(
        population: Population,
        individuals: Vec<String>,
        snps: Vec<SnpId>,
        rows: &[Vec<u8>],
    ) -> Result<Self> {
        if rows.len() != individuals.len() {
            return Err(Error::validation(format!(
                "{} rows for {} individuals",
                rows.len(),
                individuals.len()
            )));
        }
        let n = rows.len();
        let mut alleles = vec![0u8; n * snps.len()];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != snps.len() {
                return Err(Error::validation(format!(
                    "ragged row {r}: {} cells, expected {}",
                    row.len(),
                    snps.len()
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                alleles[c * n + r] = v;
            }
        }
        Self::from_columns(population, individuals, snps, alleles)
    }

    /// Builds a matrix from column-major allele data.
    pub fn from_columns(
        population: Population,
        individuals: Vec<String>,
        snps: Vec<SnpId>,
        alleles: Vec<u8>,
    ) -> Result<Self> {
        if alleles.len() != individuals.len() * snps.len() {
            return Err(Error::validation(format!(
                "allele buffer holds {} cells, expected {}x{}",
                alleles.len(),
                individuals.len(),
                snps.len()
            )));
        }
        if let Some(pos) = alleles.iter().position(|&v| v > 1) {
            let n = individuals.len().max(1);
            return Err(Error::validation(format!(
                "non-binary allele {} at row {}, column {}",
                alleles[pos],
                pos % n,
                pos / n
            )));
        }
        let mut seen = HashSet::with_capacity(individuals.len());
        for id in &individuals {
            if !seen.insert(id.as_str()) {
                return Err(Error::validation(format!("duplicate individual id {id:?}")));
            }
        }
        let mut column_of = HashMap::with_capacity(snps.len());
        for (c, snp) in snps.iter().enumerate() {
            if snp.label.is_empty() {
                return Err(Error::validation(format!("SNP {} has an empty label", snp.index)));
            }
            if column_of.insert(snp.index, c).is_some() {
                return Err(Error::validation(format!("duplicate SNP index {}", snp.index)));
            }
        }
        Ok(GenotypeMatrix {
            population,
            individuals,
            snps,
            alleles,
            column_of,
        })
    }

    pub fn population(&self) -> Population {
        self.population
    }

    pub fn individuals(&self) -> &[String] {
        &self.individuals
    }

    pub fn snps(&self) -> &[SnpId] {
        &self.snps
    }

    pub fn n_individuals(&self) -> usize {
        self.individuals.len()
    }

    pub fn n_snps(&self) -> usize {
        self.snps.len()
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.alleles[col * self.individuals.len() + row]
    }

    pub fn column(&self, col: usize) -> &[u8] {
        let n = self.individuals.len();
        &self.alleles[col * n..(col + 1) * n]
    }

    /// Column position of a study SNP, or a validation error if the matrix
    /// does not carry it.
    pub fn column_index(&self, snp: &SnpId) -> Result<usize> {
        self.column_of
            .get(&snp.index)
            .copied()
            .ok_or_else(|| Error::validation(format!("unknown SNP {snp}")))
    }

    pub fn column_of(&self, snp: &SnpId) -> Result<&[u8]> {
        Ok(self.column(self.column_index(snp)?))
    }

    pub fn row(&self, row: usize) -> Vec<u8> {
        (0..self.snps.len()).map(|c| self.get(row, c)).collect()
    }

    /// Sub-matrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let n = self.individuals.len();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::validation(format!("row {bad} out of range ({n} rows)")));
        }
        let individuals = rows.iter().map(|&r| self.individuals[r].clone()).collect();
        let mut alleles = Vec::with_capacity(rows.len() * self.snps.len());
        for c in 0..self.snps.len() {
            let col = self.column(c);
            alleles.extend(rows.iter().map(|&r| col[r]));
        }
        Self::from_columns(self.population, individuals, self.snps.clone(), alleles)
    }

    /// Row-wise concatenation. All parts must share the SNP columns.
    pub fn concat_rows(population: Population, parts: &[&GenotypeMatrix]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::validation("cannot concatenate zero matrices"));
        };
        for p in &parts[1..] {
            if p.snps != first.snps {
                return Err(Error::validation("matrices disagree on SNP columns"));
            }
        }
        let individuals: Vec<String> = parts
            .iter()
            .flat_map(|p| p.individuals.iter().cloned())
            .collect();
        let mut alleles = Vec::with_capacity(individuals.len() * first.snps.len());
        for c in 0..first.snps.len() {
            for p in parts {
                alleles.extend_from_slice(p.column(c));
            }
        }
        Self::from_columns(population, individuals, first.snps.clone(), alleles)
    }

    /// Parses the dense text format:
    /// `id,<label1>,...` then one `individual,<0|1>,...` line per individual.
    pub fn parse(text: &str, population: Population) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let Some((_, header)) = lines.next() else {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                reason: "missing header".into(),
            });
        };
        let mut fields = header.split(',');
        if fields.next() != Some("id") {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                reason: "header must start with `id`".into(),
            });
        }
        let snps = fields
            .enumerate()
            .map(|(i, label)| {
                SnpId::new(i as u32, label.trim()).map_err(|_| Error::Parse {
                    line: 1,
                    column: i + 2,
                    reason: "empty SNP label".into(),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut individuals = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let line_no = i + 1;
            let mut fields = line.split(',');
            let id = fields.next().unwrap_or_default().trim().to_string();
            let row = fields
                .enumerate()
                .map(|(c, cell)| match cell.trim() {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(Error::Parse {
                        line: line_no,
                        column: c + 2,
                        reason: format!("allele must be 0 or 1, found {other:?}"),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != snps.len() {
                return Err(Error::validation(format!(
                    "ragged row at line {line_no}: {} cells, expected {}",
                    row.len(),
                    snps.len()
                )));
            }
            individuals.push(id);
            rows.push(row);
        }
        Self::from_rows(population, individuals, snps, &rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("id");
        for snp in &self.snps {
            out.push(',');
            out.push_str(&snp.label);
        }
        out.push('\n');
        for (r, id) in self.individuals.iter().enumerate() {
            out.push_str(id);
            for c in 0..self.snps.len() {
                out.push(',');
                out.push(if self.get(r, c) == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_matrix(path: impl AsRef<Path>, population: Population) -> Result<GenotypeMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    GenotypeMatrix::parse(&text, population)
}

pub fn write_matrix(path: impl AsRef<Path>, matrix: &GenotypeMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Splits case individuals into `gdos` contiguous shards whose sizes differ by
/// at most one; the first `n % gdos` shards get the extra row.
pub fn split_equally(case: &GenotypeMatrix, gdos: usize) -> Result<Vec<GenotypeMatrix>> {
    let n = case.n_individuals();
    if gdos == 0 {
        return Err(Error::validation("cannot split into zero shards"));
    }
    if gdos > n {
        return Err(Error::validation(format!(
            "cannot split {n} individuals across {gdos} members"
        )));
    }
    let base = n / gdos;
    let extra = n % gdos;
    let mut start = 0;
    (0..gdos)
        .map(|g| {
            let len = base + usize::from(g < extra);
            let rows: Vec<usize> = (start..start + len).collect();
            start += len;
            case.select_rows(&rows)
        })
        .collect()
}

/// Case shards, one per federation member, plus the leader-held reference.
#[derive(Debug, Clone)]
pub struct FederationDataset {
    shards: Vec<GenotypeMatrix>,
    reference: GenotypeMatrix,
}

impl FederationDataset {
    pub fn new(shards: Vec<GenotypeMatrix>, reference: GenotypeMatrix) -> Result<Self> {
        if shards.is_empty() {
            return Err(Error::validation("federation needs at least one case shard"));
        }
        let mut seen = HashSet::new();
        for (g, shard) in shards.iter().enumerate() {
            if shard.snps != reference.snps {
                return Err(Error::validation(format!(
                    "shard {g} SNP columns differ from the reference"
                )));
            }
            for id in shard.individuals() {
                if !seen.insert(id.as_str()) {
                    return Err(Error::validation(format!(
                        "individual {id:?} appears in more than one shard"
                    )));
                }
            }
        }
        Ok(FederationDataset { shards, reference })
    }

    /// Shards the pooled case matrix across `gdos` members.
    pub fn from_pooled(case: &GenotypeMatrix, reference: GenotypeMatrix, gdos: usize) -> Result<Self> {
        Self::new(split_equally(case, gdos)?, reference)
    }

    pub fn shards(&self) -> &[GenotypeMatrix] {
        &self.shards
    }

    pub fn reference(&self) -> &GenotypeMatrix {
        &self.reference
    }

    pub fn gdos(&self) -> usize {
        self.shards.len()
    }

    pub fn snps(&self) -> &[SnpId] {
        self.reference.snps()
    }

    /// Row-concatenation of all shards in member order.
    pub fn pooled_case(&self) -> GenotypeMatrix {
        let parts: Vec<&GenotypeMatrix> = self.shards.iter().collect();
        GenotypeMatrix::concat_rows(Population::Case, &parts)
            .expect("shards validated to share SNP columns")
    }

    pub fn reshard(&self, gdos: usize) -> Result<Self> {
        Self::from_pooled(&self.pooled_case(), self.reference.clone(), gdos)
    }
}
