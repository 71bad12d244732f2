//! Runs all four arms through the report layer, saves the JSON report and
//! diffs it against a second run with a different member count.
//!
//!     cargo run --release --example study_report

use gendpr::report::{compare, run_study, Mode, RunSpec};
use gendpr::CollusionMode;

fn main() -> gendpr::Result<()> {
    let spec = RunSpec {
        mode: Mode::All,
        gdos: 3,
        colluders: CollusionMode::Conservative,
        snps: 400,
        case_size: 600,
        ref_size: 600,
        seed: 11,
        ..Default::default()
    };
    let report = run_study(&spec)?;
    let path = std::env::temp_dir().join("gendpr-study.json");
    report.write(&path)?;
    println!("report written to {}", path.display());
    for arm in &report.arms {
        println!("  {:<12} L_safe {}", arm.arm.name(), arm.retained().len());
    }
    if let Some(v) = &report.vulnerability {
        println!("  vulnerable without tolerance: {} ({:.1}%)", v.vulnerable.len(), v.percent_of_release);
    }

    // same data, resharded across 6 members
    let other = run_study(&RunSpec { gdos: 6, ..spec })?;
    let diffs = compare(&report, &other)?;
    let gendpr_diffs = diffs.iter().filter(|d| d.left == gendpr::Arm::GenDPR).count();
    println!("3 vs 6 members: {} differing phases overall, {gendpr_diffs} for gendpr", diffs.len());
    Ok(())
}
