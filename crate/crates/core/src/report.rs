//! Study runs and their machine-readable reports.
//!
//! Everything in a [`RunReport`] except the `timing` section is a pure
//! function of the [`RunSpec`], so two runs with the same spec serialize to
//! identical bytes once timing is stripped.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::baselines::{centralized_pipeline, naive_pipeline, Arm, BaselineReport};
use crate::collusion::{vulnerable_snps, CollusionPlan, VulnerabilityReport};
use crate::config::{
    CollusionMode, StudyConfig, DEFAULT_ALPHA, DEFAULT_LD_CUTOFF, DEFAULT_MAF_CUTOFF,
    DEFAULT_POWER_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::genotype::{load_matrix, FederationDataset, Population, SnpId};
use crate::protocol::{run_protocol_with_plan, MessageKind, NodeId, Phase, ProtocolOptions};
use crate::synthetic::{generate_synthetic, SyntheticProfile};
use crate::transport::ChannelMetrics;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Gendpr,
    Centralized,
    Naive,
    Collusion,
    All,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub mode: Mode,
    pub gdos: usize,
    /// Coalition model for the collusion arm.
    pub colluders: CollusionMode,
    pub snps: usize,
    pub case_size: usize,
    pub ref_size: usize,
    pub maf_cutoff: f64,
    pub ld_cutoff: f64,
    pub alpha: f64,
    pub power_threshold: f64,
    pub seed: u64,
    pub case_file: Option<PathBuf>,
    pub ref_file: Option<PathBuf>,
    pub profile_file: Option<PathBuf>,
    pub repetitions: usize,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            mode: Mode::Gendpr,
            gdos: 3,
            colluders: CollusionMode::Fixed(1),
            snps: 1000,
            case_size: 1000,
            ref_size: 1000,
            maf_cutoff: DEFAULT_MAF_CUTOFF,
            ld_cutoff: DEFAULT_LD_CUTOFF,
            alpha: DEFAULT_ALPHA,
            power_threshold: DEFAULT_POWER_THRESHOLD,
            seed: 0,
            case_file: None,
            ref_file: None,
            profile_file: None,
            repetitions: 1,
        }
    }
}

impl RunSpec {
    /// Flag-level checks; failures here are usage errors.
    pub fn validate(&self) -> Result<()> {
        if self.gdos < 2 {
            return Err(Error::Config(format!("--gdos must be at least 2, got {}", self.gdos)));
        }
        if let CollusionMode::Fixed(f) = self.colluders {
            if f >= self.gdos {
                return Err(Error::Config(format!(
                    "--colluders ({f}) must be smaller than --gdos ({})",
                    self.gdos
                )));
            }
        }
        if self.case_file.is_some() != self.ref_file.is_some() {
            return Err(Error::Config("--case-file and --ref-file must be given together".into()));
        }
        if self.case_file.is_some() && self.profile_file.is_some() {
            return Err(Error::Config("--profile-file only applies to synthetic data".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("--repetitions must be at least 1".into()));
        }
        Ok(())
    }

    /// Loads the real dataset or generates the synthetic one.
    pub fn dataset(&self) -> Result<FederationDataset> {
        if let (Some(case), Some(reference)) = (&self.case_file, &self.ref_file) {
            let case = load_matrix(case, Population::Case)?;
            let reference = load_matrix(reference, Population::Reference)?;
            return FederationDataset::from_pooled(&case, reference, self.gdos);
        }
        let profile = match &self.profile_file {
            Some(p) => SyntheticProfile::load(p)?,
            None => SyntheticProfile::random(self.snps, self.seed),
        };
        generate_synthetic(self.case_size, self.ref_size, &profile, self.gdos, self.seed)
    }

    pub fn study_config(&self, desired: Vec<SnpId>) -> StudyConfig {
        StudyConfig {
            maf_cutoff: self.maf_cutoff,
            ld_cutoff: self.ld_cutoff,
            alpha: self.alpha,
            power_threshold: self.power_threshold,
            ..StudyConfig::new(desired, self.gdos, self.seed)
        }
    }

    fn arms(&self) -> Vec<Arm> {
        match self.mode {
            Mode::Gendpr => vec![Arm::GenDPR],
            Mode::Centralized => vec![Arm::Centralized],
            Mode::Naive => vec![Arm::NaiveDistributed],
            Mode::Collusion => vec![Arm::GenDPR, Arm::GenDPRCollusion],
            Mode::All => vec![
                Arm::Centralized,
                Arm::NaiveDistributed,
                Arm::GenDPR,
                Arm::GenDPRCollusion,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub phase: Phase,
    pub kind: MessageKind,
    pub messages: u64,
    pub plaintext_bytes: u64,
    pub sealed_bytes: u64,
    pub relative_overhead: f64,
}

pub fn metric_rows(metrics: &ChannelMetrics) -> Vec<MetricRow> {
    metrics
        .entries()
        .map(|(&(phase, kind), c)| MetricRow {
            phase,
            kind,
            messages: c.messages,
            plaintext_bytes: c.plaintext_bytes,
            sealed_bytes: c.sealed_bytes,
            relative_overhead: c.relative_overhead(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmMetrics {
    pub arm: Arm,
    pub combinations: usize,
    pub rows: Vec<MetricRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmTiming {
    pub arm: Arm,
    /// Mean over repetitions.
    pub total_ms: f64,
    pub phases_ms: Vec<(Phase, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub repetitions: usize,
    pub arms: Vec<ArmTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub spec: RunSpec,
    pub leader: Option<NodeId>,
    pub desired: usize,
    pub arms: Vec<BaselineReport>,
    pub vulnerability: Option<VulnerabilityReport>,
    pub metrics: Vec<ArmMetrics>,
    /// Excluded from the determinism guarantee.
    pub timing: Timing,
}

impl RunReport {
    pub fn arm(&self, arm: Arm) -> Option<&BaselineReport> {
        self.arms.iter().find(|a| a.arm == arm)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// JSON of everything except timing.
    pub fn deterministic_json(&self) -> String {
        let mut copy = self.clone();
        copy.timing = Timing::default();
        copy.to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: RunReport =
            serde_json::from_str(text).map_err(|e| Error::Parse {
                line: e.line(),
                column: e.column(),
                reason: e.to_string(),
            })?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "report schema {} is not supported (expected {SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Executes every arm of the spec and assembles the report.
pub fn run_study(spec: &RunSpec) -> Result<RunReport> {
    spec.validate()?;
    let dataset = spec.dataset()?;
    let desired = dataset.snps().to_vec();
    let config = spec.study_config(desired.clone());
    config.validate()?;

    let mut arms = Vec::new();
    let mut metrics = Vec::new();
    let mut timing = Timing {
        repetitions: spec.repetitions,
        arms: Vec::new(),
    };
    let mut leader = None;
    for arm in spec.arms() {
        let mut total = Duration::ZERO;
        let mut phases: Vec<(Phase, Duration)> = Vec::new();
        let mut result = None;
        for _ in 0..spec.repetitions {
            let start = Instant::now();
            let (report, extra) = run_arm(arm, &dataset, &config, spec.colluders)?;
            total += start.elapsed();
            if let Some((l, m, combos, durations)) = extra {
                leader = Some(l);
                for (i, (p, d)) in durations.into_iter().enumerate() {
                    match phases.get_mut(i) {
                        Some(slot) => slot.1 += d,
                        None => phases.push((p, d)),
                    }
                }
                if result.is_none() {
                    metrics.push(ArmMetrics {
                        arm,
                        combinations: combos,
                        rows: metric_rows(&m),
                    });
                }
            }
            result.get_or_insert(report);
        }
        let k = spec.repetitions as f64;
        timing.arms.push(ArmTiming {
            arm,
            total_ms: ms(total) / k,
            phases_ms: phases.into_iter().map(|(p, d)| (p, ms(d) / k)).collect(),
        });
        arms.push(result.expect("at least one repetition"));
    }

    let vulnerability = match (
        arms.iter().find(|a| a.arm == Arm::GenDPR),
        arms.iter().find(|a| a.arm == Arm::GenDPRCollusion),
    ) {
        (Some(base), Some(tolerant)) => Some(vulnerable_snps(
            &verdict_of(base),
            &verdict_of(tolerant),
            &desired,
        )?),
        _ => None,
    };

    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        leader,
        desired: desired.len(),
        arms,
        vulnerability,
        metrics,
        timing,
    })
}

fn verdict_of(r: &BaselineReport) -> crate::stats::PrivacyVerdict {
    crate::stats::PrivacyVerdict {
        lists: r.lists.clone(),
        audit: Vec::new(),
    }
}

type ProtocolExtras = (NodeId, ChannelMetrics, usize, Vec<(Phase, Duration)>);

fn run_arm(
    arm: Arm,
    dataset: &FederationDataset,
    config: &StudyConfig,
    colluders: CollusionMode,
) -> Result<(BaselineReport, Option<ProtocolExtras>)> {
    match arm {
        Arm::Centralized => Ok((centralized_pipeline(&dataset.pooled_case(), dataset.reference(), config)?, None)),
        Arm::NaiveDistributed => Ok((naive_pipeline(dataset.shards(), dataset.reference(), config)?, None)),
        Arm::GenDPR | Arm::GenDPRCollusion => {
            let mode = if arm == Arm::GenDPR { CollusionMode::Fixed(0) } else { colluders };
            let config = config.clone().with_collusion(mode);
            let plan = CollusionPlan::new(config.gdos, mode)?;
            let out = run_protocol_with_plan(dataset, &config, &plan, &ProtocolOptions::default())?;
            let report = BaselineReport {
                arm,
                lists: out.verdict.lists,
                components: if plan.is_trivial() { Vec::new() } else { out.per_combination },
            };
            Ok((report, Some((out.leader, out.metrics, plan.combinations.len(), out.phase_durations))))
        }
    }
}

/// Per-phase set difference between two arms' lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseDiff {
    pub left: Arm,
    pub right: Arm,
    pub phase: Phase,
    pub only_left: Vec<SnpId>,
    pub only_right: Vec<SnpId>,
}

pub fn diff_arms(a: &BaselineReport, b: &BaselineReport) -> Vec<PhaseDiff> {
    [Phase::Maf, Phase::Ld, Phase::Lr]
        .into_iter()
        .filter_map(|phase| {
            let la = a.lists.get(phase).unwrap_or_default();
            let lb = b.lists.get(phase).unwrap_or_default();
            let sa: BTreeSet<u32> = la.iter().map(|s| s.index).collect();
            let sb: BTreeSet<u32> = lb.iter().map(|s| s.index).collect();
            let only_left: Vec<SnpId> = la.iter().filter(|s| !sb.contains(&s.index)).cloned().collect();
            let only_right: Vec<SnpId> = lb.iter().filter(|s| !sa.contains(&s.index)).cloned().collect();
            (!only_left.is_empty() || !only_right.is_empty()).then_some(PhaseDiff {
                left: a.arm,
                right: b.arm,
                phase,
                only_left,
                only_right,
            })
        })
        .collect()
}

/// Compares matching arms of two reports. Two single-arm reports of
/// different arms are compared with each other.
pub fn compare(a: &RunReport, b: &RunReport) -> Result<Vec<PhaseDiff>> {
    let same_data = a.desired == b.desired
        && a.spec.seed == b.spec.seed
        && a.spec.case_file == b.spec.case_file
        && a.spec.profile_file == b.spec.profile_file
        && (a.spec.case_file.is_some() || a.spec.snps == b.spec.snps);
    if !same_data {
        return Err(Error::Config("reports were produced from different desired SNP lists".into()));
    }
    let mut pairs: Vec<(&BaselineReport, &BaselineReport)> = a
        .arms
        .iter()
        .filter_map(|x| b.arm(x.arm).map(|y| (x, y)))
        .collect();
    if pairs.is_empty() {
        if let ([x], [y]) = (a.arms.as_slice(), b.arms.as_slice()) {
            pairs.push((x, y));
        } else {
            return Err(Error::Config("reports share no comparable arm".into()));
        }
    }
    Ok(pairs.into_iter().flat_map(|(x, y)| diff_arms(x, y)).collect())
}
