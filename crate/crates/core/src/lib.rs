//! Privacy verification for federated genome-wide association studies.
//!
//! A set of genome data owners, each holding a private shard of case genomes,
//! jointly decide which SNPs of a desired list can be released without
//! enabling membership inference. Three filters run in sequence over the
//! pooled data: minor-allele frequency, linkage disequilibrium and a
//! likelihood-ratio test bounding identification power. The distributed
//! protocol in [`protocol`] reaches exactly the verdict a trusted party
//! would reach on pooled data ([`baselines::centralized_pipeline`]) while
//! only aggregate statistics ever leave a member.

pub mod baselines;
pub mod collusion;
pub mod config;
pub mod error;
pub mod genotype;
pub mod protocol;
pub mod report;
pub mod stats;
pub mod synthetic;
pub mod transport;

pub use baselines::{centralized_collusion_pipeline, centralized_pipeline, naive_pipeline, Arm, BaselineReport};
pub use collusion::{enumerate_combinations, run_collusion_pipeline, vulnerable_snps, CollusionPlan, CombinationId};
pub use config::{CollusionMode, StudyConfig};
pub use error::{Error, Result};
pub use genotype::{FederationDataset, GenotypeMatrix, Population, SnpId};
pub use protocol::{run_protocol, run_protocol_with_plan, NodeId, ProtocolOptions, ProtocolOutcome};
pub use stats::{PhaseLists, PrivacyVerdict};
pub use synthetic::{generate_synthetic, SyntheticProfile};
