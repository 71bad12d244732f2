use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::SnpId;

pub const DEFAULT_MAF_CUTOFF: f64 = 0.05;
pub const DEFAULT_LD_CUTOFF: f64 = 1e-5;
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_POWER_THRESHOLD: f64 = 0.9;

/// How many colluding members the release must withstand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollusionMode {
    Fixed(usize),
    /// Every coalition size from 1 to G-1.
    Conservative,
}

impl Default for CollusionMode {
    fn default() -> Self {
        CollusionMode::Fixed(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// The desired release set, in study order.
    pub desired: Vec<SnpId>,
    pub maf_cutoff: f64,
    pub ld_cutoff: f64,
    pub alpha: f64,
    pub power_threshold: f64,
    pub gdos: usize,
    pub collusion: CollusionMode,
    pub rng_seed: u64,
}

impl StudyConfig {
    pub fn new(desired: Vec<SnpId>, gdos: usize, rng_seed: u64) -> Self {
        StudyConfig {
            desired,
            maf_cutoff: DEFAULT_MAF_CUTOFF,
            ld_cutoff: DEFAULT_LD_CUTOFF,
            alpha: DEFAULT_ALPHA,
            power_threshold: DEFAULT_POWER_THRESHOLD,
            gdos,
            collusion: CollusionMode::Fixed(0),
            rng_seed,
        }
    }

    pub fn with_collusion(mut self, collusion: CollusionMode) -> Self {
        self.collusion = collusion;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.maf_cutoff > 0.0 && self.maf_cutoff < 0.5) {
            return Err(Error::Config(format!(
                "maf_cutoff must lie in (0, 0.5), got {}",
                self.maf_cutoff
            )));
        }
        if !(self.ld_cutoff > 0.0 && self.ld_cutoff < 1.0) {
            return Err(Error::Config(format!(
                "ld_cutoff must lie in (0, 1), got {}",
                self.ld_cutoff
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.power_threshold > 0.0 && self.power_threshold < 1.0) {
            return Err(Error::Config(format!(
                "power_threshold must lie in (0, 1), got {}",
                self.power_threshold
            )));
        }
        if self.gdos < 2 {
            return Err(Error::Config(format!(
                "a federation needs at least 2 members, got {}",
                self.gdos
            )));
        }
        if let CollusionMode::Fixed(f) = self.collusion {
            if f >= self.gdos {
                return Err(Error::Config(format!(
                    "colluders ({f}) must be fewer than members ({})",
                    self.gdos
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for snp in &self.desired {
            if !seen.insert(snp.index) {
                return Err(Error::Config(format!("SNP {snp} listed twice in the release set")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> StudyConfig {
        StudyConfig::new(vec![SnpId::new(0, "a").unwrap()], 3, 1)
    }

    #[test]
    fn defaults_validate() {
        config().validate().unwrap();
    }

    #[test]
    fn colluders_must_be_fewer_than_members() {
        assert!(config().with_collusion(CollusionMode::Fixed(3)).validate().is_err());
        config().with_collusion(CollusionMode::Fixed(2)).validate().unwrap();
    }

    #[test]
    fn cutoffs_are_range_checked() {
        let mut c = config();
        c.maf_cutoff = 0.5;
        assert!(c.validate().is_err());
        let mut c = config();
        c.ld_cutoff = 0.0;
        assert!(c.validate().is_err());
        let mut c = config();
        c.gdos = 1;
        assert!(c.validate().is_err());
    }
}
