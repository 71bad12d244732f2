//! The likelihood-ratio membership test on its own: identification power of
//! the full SNP set, and what the greedy selection keeps to push it under the
//! threshold.
//!
//!     cargo run --release --example lr_power

use gendpr::stats::{allele_counts, identification_power, lr_matrix, lr_test_select};
use gendpr::{generate_synthetic, SyntheticProfile};

fn main() -> gendpr::Result<()> {
    for n_case in [100, 300, 1000] {
        let profile = SyntheticProfile::random(1000, 5);
        let ds = generate_synthetic(n_case, 1000, &profile, 2, 5)?;
        let snps = profile.snp_ids();
        let case = ds.pooled_case();
        let p_hat = allele_counts(&case, &snps)?.frequencies();
        let p = allele_counts(ds.reference(), &snps)?.frequencies();
        let case_lr = lr_matrix(&case, &snps, &p_hat, &p)?;
        let null_lr = lr_matrix(ds.reference(), &snps, &p_hat, &p)?;

        let full = identification_power(&case_lr, &null_lr, &snps, 0.1)?;
        let sel = lr_test_select(&case_lr, &null_lr, 0.1, 0.9)?;
        println!(
            "N_case={n_case:>5}: power {full:.3} on all {} SNPs; keeps {} with power {:.3} (threshold score {:.2})",
            snps.len(),
            sel.retained.len(),
            sel.final_power,
            sel.threshold
        );
    }
    Ok(())
}
