//! The distributed protocol against both reference pipelines: it reproduces
//! the centralized verdict, while intersecting purely local analyses does not.
//!
//!     cargo run --release --example oracle_comparison

use gendpr::report::diff_arms;
use gendpr::{
    centralized_pipeline, generate_synthetic, naive_pipeline, run_protocol, Arm, BaselineReport,
    FederationDataset, GenotypeMatrix, Population, ProtocolOptions, SnpId, StudyConfig,
    SyntheticProfile,
};

fn cells(pop: Population, prefix: &str, counts: [usize; 4]) -> gendpr::Result<GenotypeMatrix> {
    // counts of (1,1), (1,0), (0,1), (0,0)
    let patterns = [[1, 1], [1, 0], [0, 1], [0, 0]];
    let rows: Vec<Vec<u8>> = patterns
        .iter()
        .zip(counts)
        .flat_map(|(p, n)| std::iter::repeat_n(p.to_vec(), n))
        .collect();
    let ids = (0..rows.len()).map(|i| format!("{prefix}{i}")).collect();
    let snps = vec![SnpId::new(0, "rs_a")?, SnpId::new(1, "rs_b")?];
    GenotypeMatrix::from_rows(pop, ids, snps, &rows)
}

fn show(title: &str, ds: &FederationDataset, cfg: &StudyConfig) -> gendpr::Result<()> {
    let central = centralized_pipeline(&ds.pooled_case(), ds.reference(), cfg)?;
    let naive = naive_pipeline(ds.shards(), ds.reference(), cfg)?;
    let protocol = BaselineReport {
        arm: Arm::GenDPR,
        lists: run_protocol(ds, cfg, &ProtocolOptions::default())?.verdict.lists,
        components: Vec::new(),
    };
    println!("== {title}");
    for r in [&central, &naive, &protocol] {
        println!("  {:<12} MAF {:>4}  LD {:>4}  LR {:>4}", r.arm.name(), r.lists.maf.len(), r.lists.ld.len(), r.lists.lr.len());
    }
    println!("  gendpr vs centralized: {} differing phases", diff_arms(&protocol, &central).len());
    for d in diff_arms(&naive, &central) {
        println!("  naive vs centralized at {:?}: only naive {:?}, only centralized {:?}", d.phase, d.only_left, d.only_right);
    }
    Ok(())
}

fn main() -> gendpr::Result<()> {
    // each shard is uncorrelated at the pair on its own; pooled, it is not
    let a = cells(Population::Case, "a", [64, 16, 16, 4])?;
    let b = cells(Population::Case, "b", [4, 16, 16, 64])?;
    let reference = cells(Population::Reference, "r", [10, 10, 10, 10])?;
    let ds = FederationDataset::new(vec![a, b], reference)?;
    let cfg = StudyConfig::new(ds.snps().to_vec(), 2, 1);
    show("heterogeneous shards", &ds, &cfg)?;

    let profile = SyntheticProfile::random(500, 8);
    let ds = generate_synthetic(800, 800, &profile, 4, 8)?;
    let cfg = StudyConfig::new(profile.snp_ids(), 4, 8);
    show("synthetic, 4 members", &ds, &cfg)
}
