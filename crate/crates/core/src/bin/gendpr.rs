use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use gendpr::config::{DEFAULT_ALPHA, DEFAULT_LD_CUTOFF, DEFAULT_MAF_CUTOFF, DEFAULT_POWER_THRESHOLD};
use gendpr::report::{compare, run_study, Mode, RunReport, RunSpec};
use gendpr::{CollusionMode, Error};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Gendpr,
    Centralized,
    Naive,
    Collusion,
    All,
}

fn parse_colluders(s: &str) -> Result<CollusionMode, String> {
    if s.eq_ignore_ascii_case("conservative") {
        return Ok(CollusionMode::Conservative);
    }
    s.parse::<usize>()
        .map(CollusionMode::Fixed)
        .map_err(|_| format!("expected a number or `conservative`, got {s:?}"))
}

/// Verify which SNPs a genome federation can safely release.
#[derive(Debug, Parser)]
#[command(name = "gendpr", version)]
struct Cli {
    #[arg(long, value_enum, default_value = "gendpr")]
    mode: ModeArg,
    #[arg(long, default_value_t = 3)]
    gdos: usize,
    /// Colluding members tolerated by the collusion arm, or `conservative`.
    #[arg(long, default_value = "1", value_parser = parse_colluders)]
    colluders: CollusionMode,
    #[arg(long, default_value_t = 1000)]
    snps: usize,
    #[arg(long, default_value_t = 1000)]
    case_size: usize,
    #[arg(long, default_value_t = 1000)]
    ref_size: usize,
    #[arg(long, default_value_t = DEFAULT_MAF_CUTOFF)]
    maf_cutoff: f64,
    #[arg(long, default_value_t = DEFAULT_LD_CUTOFF)]
    ld_cutoff: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_POWER_THRESHOLD)]
    power: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    case_file: Option<PathBuf>,
    #[arg(long)]
    ref_file: Option<PathBuf>,
    #[arg(long)]
    profile_file: Option<PathBuf>,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    /// Diff two saved reports instead of running.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    compare: Option<Vec<PathBuf>>,
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) => ExitCode::from(2),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    if let Some(paths) = &cli.compare {
        let loaded = paths.iter().map(RunReport::load).collect::<Result<Vec<_>, _>>();
        let diffs = match loaded.and_then(|r| compare(&r[0], &r[1])) {
            Ok(d) => d,
            Err(e @ Error::Io { .. }) | Err(e @ Error::Parse { .. }) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            Err(e) => return exit_for(&e),
        };
        for d in &diffs {
            let labels = |v: &[gendpr::SnpId]| v.iter().map(|s| s.label.as_str()).collect::<Vec<_>>().join(",");
            println!(
                "{:?} {} vs {}: only left [{}], only right [{}]",
                d.phase,
                d.left.name(),
                d.right.name(),
                labels(&d.only_left),
                labels(&d.only_right)
            );
        }
        if diffs.is_empty() {
            println!("no differences");
            return ExitCode::SUCCESS;
        }
        return ExitCode::FAILURE;
    }

    let spec = RunSpec {
        mode: match cli.mode {
            ModeArg::Gendpr => Mode::Gendpr,
            ModeArg::Centralized => Mode::Centralized,
            ModeArg::Naive => Mode::Naive,
            ModeArg::Collusion => Mode::Collusion,
            ModeArg::All => Mode::All,
        },
        gdos: cli.gdos,
        colluders: cli.colluders,
        snps: cli.snps,
        case_size: cli.case_size,
        ref_size: cli.ref_size,
        maf_cutoff: cli.maf_cutoff,
        ld_cutoff: cli.ld_cutoff,
        alpha: cli.alpha,
        power_threshold: cli.power,
        seed: cli.seed,
        case_file: cli.case_file,
        ref_file: cli.ref_file,
        profile_file: cli.profile_file,
        repetitions: cli.repetitions,
    };
    if let Err(e) = spec.validate() {
        return exit_for(&e);
    }
    let report = match run_study(&spec) {
        Ok(r) => r,
        Err(e) => return exit_for(&e),
    };
    for arm in &report.arms {
        eprintln!(
            "{:<12} L'={:<5} L''={:<5} L_safe={}",
            arm.arm.name(),
            arm.lists.maf.len(),
            arm.lists.ld.len(),
            arm.lists.lr.len()
        );
    }
    match &cli.out {
        Some(path) => {
            if let Err(e) = report.write(path) {
                return exit_for(&e);
            }
        }
        None => println!("{}", report.to_json()),
    }
    ExitCode::SUCCESS
}
