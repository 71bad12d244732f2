//! Runs the leader-coordinated protocol on a synthetic five-member federation
//! and prints the per-phase verdict and the traffic it took.
//!
//!     cargo run --release --example federated_verification

use gendpr::report::metric_rows;
use gendpr::{generate_synthetic, run_protocol, ProtocolOptions, StudyConfig, SyntheticProfile};

fn main() -> gendpr::Result<()> {
    env_logger::init();
    let profile = SyntheticProfile::random(1000, 42);
    let dataset = generate_synthetic(1000, 1000, &profile, 5, 42)?;
    let config = StudyConfig::new(profile.snp_ids(), 5, 42);

    let out = run_protocol(&dataset, &config, &ProtocolOptions::default())?;
    let lists = &out.verdict.lists;
    println!("leader: {}", out.leader);
    println!("desired {}  -> MAF {}  -> LD {}  -> LR {}", config.desired.len(), lists.maf.len(), lists.ld.len(), lists.lr.len());
    for audit in &out.verdict.audit {
        let worst = audit.removed.first().map(|r| format!(" (first: {} at {:.3e})", r.snp, r.metric)).unwrap_or_default();
        println!("  {:?}: removed {}{worst}", audit.phase, audit.removed.len());
    }

    println!("\n{:<6} {:<17} {:>6} {:>10} {:>10} {:>8}", "phase", "kind", "msgs", "plain", "sealed", "ovh %");
    for row in metric_rows(&out.metrics) {
        println!(
            "{:<6} {:<17} {:>6} {:>10} {:>10} {:>8.2}",
            format!("{:?}", row.phase),
            format!("{:?}", row.kind),
            row.messages,
            row.plaintext_bytes,
            row.sealed_bytes,
            100.0 * row.relative_overhead
        );
    }
    for (phase, d) in &out.phase_durations {
        println!("{phase:?} took {:.1} ms", d.as_secs_f64() * 1e3);
    }
    Ok(())
}
