use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::genotype::{GenotypeMatrix, SnpId};
use crate::protocol::{NodeId, Payload, Phase, ProtocolMessage};
use crate::stats::{allele_counts, lr_matrix, pair_stats, AlleleFreqVector};

/// A non-leader federation member. It only answers the leader.
#[derive(Debug)]
pub struct Member {
    id: NodeId,
    leader: NodeId,
    measurement: String,
    shard: GenotypeMatrix,
    desired: Vec<SnpId>,
    by_index: HashMap<u32, SnpId>,
    phase: Phase,
    maf_list: Vec<SnpId>,
    release: Option<Vec<SnpId>>,
}

impl Member {
    pub fn new(
        id: NodeId,
        leader: NodeId,
        measurement: impl Into<String>,
        shard: GenotypeMatrix,
        desired: Vec<SnpId>,
    ) -> Self {
        let by_index = desired.iter().map(|s| (s.index, s.clone())).collect();
        Member {
            id,
            leader,
            measurement: measurement.into(),
            shard,
            desired,
            by_index,
            phase: Phase::Setup,
            maf_list: Vec::new(),
            release: None,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// The final release set, once broadcast.
    pub fn release(&self) -> Option<&[SnpId]> {
        self.release.as_deref()
    }

    fn reply(&self, combination: Option<u32>, payload: Payload) -> ProtocolMessage {
        ProtocolMessage::new(self.id, self.leader, combination, payload)
    }

    fn unexpected(&self, msg: &ProtocolMessage) -> Error {
        Error::UnexpectedMessage {
            node: self.id,
            kind: msg.kind(),
            phase: self.phase,
        }
    }

    fn resolve(&self, indices: &[u32], allowed: &[SnpId]) -> Result<Vec<SnpId>> {
        let allowed: std::collections::HashSet<u32> = allowed.iter().map(|s| s.index).collect();
        indices
            .iter()
            .map(|i| {
                self.by_index
                    .get(i)
                    .filter(|s| allowed.contains(&s.index))
                    .cloned()
                    .ok_or_else(|| Error::Protocol(format!("{}: SNP index {i} not expected", self.id)))
            })
            .collect()
    }

    pub fn handle(&mut self, msg: &ProtocolMessage) -> Result<Vec<ProtocolMessage>> {
        if msg.sender != self.leader || msg.receiver != self.id {
            return Err(Error::Protocol(format!(
                "{} received a message from {} addressed to {}",
                self.id, msg.sender, msg.receiver
            )));
        }
        msg.check_consistent()?;
        match (&msg.payload, self.phase) {
            (Payload::AttestHello { measurement }, Phase::Setup) => {
                if *measurement != self.measurement {
                    return Err(Error::Attestation {
                        a: self.id,
                        b: msg.sender,
                    });
                }
                let counts = allele_counts(&self.shard, &self.desired)?;
                self.phase = Phase::Maf;
                Ok(vec![
                    self.reply(
                        None,
                        Payload::AttestAck {
                            measurement: self.measurement.clone(),
                            case_size: counts.n_individuals,
                        },
                    ),
                    self.reply(None, Payload::CaseCounts { counts: counts.counts }),
                ])
            }
            (Payload::BroadcastMaf { retained }, Phase::Maf) => {
                self.maf_list = self.resolve(retained, &self.desired)?;
                self.phase = Phase::Ld;
                Ok(vec![])
            }
            (Payload::PairStatsRequest { left, right }, Phase::Ld) => {
                let pair = self.resolve(&[*left, *right], &self.maf_list)?;
                let stats = pair_stats(&self.shard, &pair[0], &pair[1])?;
                Ok(vec![self.reply(
                    msg.combination,
                    Payload::PairStats {
                        left: *left,
                        right: *right,
                        stats,
                    },
                )])
            }
            (
                Payload::BroadcastLd {
                    retained,
                    case_freqs,
                    ref_freqs,
                },
                Phase::Ld | Phase::Lr,
            ) => {
                let snps = self.resolve(retained, &self.maf_list)?;
                let lr = lr_matrix(
                    &self.shard,
                    &snps,
                    &AlleleFreqVector::new(case_freqs.clone())?,
                    &AlleleFreqVector::new(ref_freqs.clone())?,
                )?;
                self.phase = Phase::Lr;
                Ok(vec![self.reply(
                    msg.combination,
                    Payload::LrSubmatrix {
                        rows: lr.n_rows() as u32,
                        cols: lr.n_cols() as u32,
                        values: lr.values,
                    },
                )])
            }
            (Payload::BroadcastSafe { retained }, Phase::Lr) => {
                self.release = Some(self.resolve(retained, &self.desired)?);
                self.phase = Phase::Done;
                Ok(vec![])
            }
            _ => Err(self.unexpected(msg)),
        }
    }
}
