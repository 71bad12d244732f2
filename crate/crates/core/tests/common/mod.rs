#![allow(dead_code)]

use gendpr::{
    generate_synthetic, FederationDataset, GenotypeMatrix, Population, SnpId, StudyConfig,
    SyntheticProfile,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn snps(n: usize) -> Vec<SnpId> {
    (0..n).map(|i| SnpId::new(i as u32, format!("s{i}")).unwrap()).collect()
}

pub fn synthetic(l: usize, n_case: usize, gdos: usize, seed: u64) -> (FederationDataset, StudyConfig) {
    let profile = SyntheticProfile::random(l, seed);
    let ds = generate_synthetic(n_case, n_case.max(500), &profile, gdos, seed).unwrap();
    let cfg = StudyConfig::new(profile.snp_ids(), gdos, seed);
    (ds, cfg)
}

fn relink(m: &GenotypeMatrix, rng: &mut ChaCha8Rng, noise: f64) -> GenotypeMatrix {
    let n = m.n_individuals();
    let mut data = Vec::with_capacity(n * m.n_snps());
    for c in 0..m.n_snps() {
        if c % 3 == 1 {
            let prev = m.column(c - 1);
            data.extend(prev.iter().map(|&v| if rng.gen_bool(noise) { 1 - v } else { v }));
        } else {
            data.extend_from_slice(m.column(c));
        }
    }
    GenotypeMatrix::from_columns(m.population(), m.individuals().to_vec(), m.snps().to_vec(), data).unwrap()
}

/// Same dataset with every third column replaced by a noisy copy of its left
/// neighbour, so the LD phase has work to do.
pub fn linked(ds: &FederationDataset, seed: u64) -> FederationDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shards = ds.shards().iter().map(|s| relink(s, &mut rng, 0.15)).collect();
    FederationDataset::new(shards, relink(ds.reference(), &mut rng, 0.15)).unwrap()
}

fn block(prefix: &str, cells: &[((u8, u8), usize)]) -> (Vec<String>, Vec<[u8; 2]>) {
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for &((l, r), count) in cells {
        for _ in 0..count {
            ids.push(format!("{prefix}{}", ids.len()));
            rows.push([l, r]);
        }
    }
    (ids, rows)
}

fn two_snp_matrix(pop: Population, prefix: &str, cells: &[((u8, u8), usize)]) -> GenotypeMatrix {
    let (ids, rows) = block(prefix, cells);
    let rows: Vec<Vec<u8>> = rows.iter().map(|r| r.to_vec()).collect();
    GenotypeMatrix::from_rows(pop, ids, snps(2), &rows).unwrap()
}

/// Two shards that are each uncorrelated at the SNP pair but correlated once
/// pooled, plus a balanced reference.
pub fn simpson_fixture() -> (FederationDataset, StudyConfig) {
    let a = two_snp_matrix(Population::Case, "a", &[((1, 1), 64), ((1, 0), 16), ((0, 1), 16), ((0, 0), 4)]);
    let b = two_snp_matrix(Population::Case, "b", &[((1, 1), 4), ((1, 0), 16), ((0, 1), 16), ((0, 0), 64)]);
    let reference = two_snp_matrix(
        Population::Reference,
        "r",
        &[((1, 1), 10), ((1, 0), 10), ((0, 1), 10), ((0, 0), 10)],
    );
    let ds = FederationDataset::new(vec![a, b], reference).unwrap();
    (ds, StudyConfig::new(snps(2), 2, 1))
}

/// Identical shards whose SNPs are either duplicated or exactly independent,
/// with the same frequencies as the reference.
pub fn homogeneous_fixture(gdos: usize) -> (FederationDataset, StudyConfig) {
    let factorial = |pop: Population, prefix: &str, reps: usize| {
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for rep in 0..reps {
            for bits in 0..8u8 {
                ids.push(format!("{prefix}{rep}-{bits}"));
                let (a, b, c) = (bits & 1, (bits >> 1) & 1, (bits >> 2) & 1);
                data.push(vec![a, a, b, c]);
            }
        }
        GenotypeMatrix::from_rows(pop, ids, snps(4), &data).unwrap()
    };
    let shards = (0..gdos).map(|g| factorial(Population::Case, &format!("g{g}-"), 10)).collect();
    let ds = FederationDataset::new(shards, factorial(Population::Reference, "ref", 10)).unwrap();
    (ds, StudyConfig::new(snps(4), gdos, 3))
}
