//! How many SNPs a plain run would release that some coalition of members
//! could isolate, for every fixed coalition size and the conservative union.
//!
//!     cargo run --release --example collusion_tolerance

use gendpr::{
    generate_synthetic, run_collusion_pipeline, run_protocol, vulnerable_snps, CollusionMode,
    CollusionPlan, ProtocolOptions, StudyConfig, SyntheticProfile,
};

fn main() -> gendpr::Result<()> {
    for g in 3..=5 {
        let profile = SyntheticProfile::random(300, g as u64);
        let ds = generate_synthetic(600, 600, &profile, g, g as u64)?;
        let cfg = StudyConfig::new(profile.snp_ids(), g, 1);
        let base = run_protocol(&ds, &cfg, &ProtocolOptions::default())?.verdict;
        println!("G={g}: {} SNPs released without collusion tolerance", base.retained().len());

        let mut modes: Vec<CollusionMode> = (1..g).map(CollusionMode::Fixed).collect();
        modes.push(CollusionMode::Conservative);
        for mode in modes {
            let plan = CollusionPlan::new(g, mode)?;
            let tolerant = run_collusion_pipeline(&ds, &cfg.clone().with_collusion(mode), &plan)?;
            let v = vulnerable_snps(&base, &tolerant, &cfg.desired)?;
            println!(
                "  {:<14} {:>3} combinations  safe {:>4}  vulnerable {:>3} ({:.1}%)",
                format!("{mode:?}"),
                plan.combinations.len(),
                tolerant.retained().len(),
                v.vulnerable.len(),
                v.percent_of_release
            );
        }
    }
    Ok(())
}
