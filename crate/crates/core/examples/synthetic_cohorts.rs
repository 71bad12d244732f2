//! Seeded synthetic cohorts: build a profile, draw a federation, save the
//! pooled case and reference matrices in the text format the CLI reads.
//!
//!     cargo run --example synthetic_cohorts -- /tmp/cohort

use std::path::PathBuf;

use gendpr::genotype::write_matrix;
use gendpr::stats::allele_counts;
use gendpr::{generate_synthetic, SyntheticProfile};

fn main() -> gendpr::Result<()> {
    let dir: PathBuf = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("gendpr-cohort"));
    std::fs::create_dir_all(&dir).map_err(|e| gendpr::Error::Io { path: dir.display().to_string(), source: e })?;

    let profile = SyntheticProfile::random(8, 3);
    let ds = generate_synthetic(500, 400, &profile, 3, 3)?;
    let snps = profile.snp_ids();
    let case = allele_counts(&ds.pooled_case(), &snps)?.frequencies();
    let reference = allele_counts(ds.reference(), &snps)?.frequencies();
    println!("{:<6} {:>8} {:>8} {:>8} {:>8}", "snp", "case p", "drawn", "ref p", "drawn");
    for (i, p) in profile.snps.iter().enumerate() {
        println!("{:<6} {:>8.3} {:>8.3} {:>8.3} {:>8.3}", p.label, p.case_freq, case.freqs[i], p.reference_freq, reference.freqs[i]);
    }
    println!("shards: {:?}", ds.shards().iter().map(|s| s.n_individuals()).collect::<Vec<_>>());

    write_matrix(dir.join("case.csv"), &ds.pooled_case())?;
    write_matrix(dir.join("reference.csv"), ds.reference())?;
    std::fs::write(dir.join("profile.csv"), profile.to_text()).map_err(|e| gendpr::Error::Io { path: dir.display().to_string(), source: e })?;
    println!("wrote case.csv, reference.csv and profile.csv to {}", dir.display());
    Ok(())
}
