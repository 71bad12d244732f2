//! The leader-coordinated three-phase protocol.
//!
//! Every member holds one case shard. The elected leader also holds the
//! reference population. Members only ever send counts, pair sums and LR
//! values; the leader only ever sends SNP index lists and frequency vectors.

mod harness;
mod leader;
mod member;
pub mod wire;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::PairCorrelationStats;

pub use harness::{
    run_protocol, run_protocol_with_plan, ProtocolOptions, ProtocolOutcome, Scheduler, TraceEntry,
};
pub use leader::Leader;
pub use member::Member;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u16);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gdo{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Leader,
    Member,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Setup,
    Maf,
    Ld,
    Lr,
    Done,
}

impl Phase {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => Phase::Setup,
            1 => Phase::Maf,
            2 => Phase::Ld,
            3 => Phase::Lr,
            4 => Phase::Done,
            other => return Err(Error::Wire(format!("unknown phase code {other}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageKind {
    AttestHello,
    AttestAck,
    CaseCounts,
    PairStatsRequest,
    PairStats,
    LrSubmatrix,
    /// Retained list after the MAF phase.
    BroadcastMaf,
    /// Retained list after the LD phase with case and reference frequencies.
    BroadcastLd,
    /// Final release set.
    BroadcastSafe,
}

impl MessageKind {
    pub const ALL: [MessageKind; 9] = [
        MessageKind::AttestHello,
        MessageKind::AttestAck,
        MessageKind::CaseCounts,
        MessageKind::PairStatsRequest,
        MessageKind::PairStats,
        MessageKind::LrSubmatrix,
        MessageKind::BroadcastMaf,
        MessageKind::BroadcastLd,
        MessageKind::BroadcastSafe,
    ];

    /// The phase a message of this kind belongs to.
    pub fn phase(self) -> Phase {
        match self {
            MessageKind::AttestHello | MessageKind::AttestAck => Phase::Setup,
            MessageKind::CaseCounts | MessageKind::BroadcastMaf => Phase::Maf,
            MessageKind::PairStatsRequest | MessageKind::PairStats | MessageKind::BroadcastLd => {
                Phase::Ld
            }
            MessageKind::LrSubmatrix => Phase::Lr,
            MessageKind::BroadcastSafe => Phase::Done,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        MessageKind::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::Wire(format!("unknown message kind {code}")))
    }
}

/// What a payload reveals, for the no-genome-leakage audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PayloadClass {
    Attestation,
    Counts,
    PairSums,
    IndexList,
    Frequencies,
    LrValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    AttestHello {
        measurement: String,
    },
    /// Confirms the channel key and reports the member's case cohort size.
    AttestAck {
        measurement: String,
        case_size: u32,
    },
    /// Minor-allele counts over the whole desired SNP list.
    CaseCounts {
        counts: Vec<u32>,
    },
    PairStatsRequest {
        left: u32,
        right: u32,
    },
    PairStats {
        left: u32,
        right: u32,
        stats: PairCorrelationStats,
    },
    /// Row-major LR values over the broadcast LD-phase list.
    LrSubmatrix {
        rows: u32,
        cols: u32,
        values: Vec<f64>,
    },
    BroadcastMaf {
        retained: Vec<u32>,
    },
    BroadcastLd {
        retained: Vec<u32>,
        case_freqs: Vec<f64>,
        ref_freqs: Vec<f64>,
    },
    BroadcastSafe {
        retained: Vec<u32>,
    },
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::AttestHello { .. } => MessageKind::AttestHello,
            Payload::AttestAck { .. } => MessageKind::AttestAck,
            Payload::CaseCounts { .. } => MessageKind::CaseCounts,
            Payload::PairStatsRequest { .. } => MessageKind::PairStatsRequest,
            Payload::PairStats { .. } => MessageKind::PairStats,
            Payload::LrSubmatrix { .. } => MessageKind::LrSubmatrix,
            Payload::BroadcastMaf { .. } => MessageKind::BroadcastMaf,
            Payload::BroadcastLd { .. } => MessageKind::BroadcastLd,
            Payload::BroadcastSafe { .. } => MessageKind::BroadcastSafe,
        }
    }

    /// Every class of information the payload carries.
    pub fn classes(&self) -> &'static [PayloadClass] {
        use PayloadClass::*;
        match self {
            Payload::AttestHello { .. } => &[Attestation],
            Payload::AttestAck { .. } => &[Attestation, Counts],
            Payload::CaseCounts { .. } => &[Counts],
            Payload::PairStatsRequest { .. } => &[IndexList],
            Payload::PairStats { .. } => &[IndexList, PairSums],
            Payload::LrSubmatrix { .. } => &[LrValues],
            Payload::BroadcastMaf { .. } | Payload::BroadcastSafe { .. } => &[IndexList],
            Payload::BroadcastLd { .. } => &[IndexList, Frequencies],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolMessage {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub phase: Phase,
    pub combination: Option<u32>,
    pub payload: Payload,
}

impl ProtocolMessage {
    pub fn new(sender: NodeId, receiver: NodeId, combination: Option<u32>, payload: Payload) -> Self {
        ProtocolMessage {
            sender,
            receiver,
            phase: payload.kind().phase(),
            combination,
            payload,
        }
    }

    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }

    pub fn check_consistent(&self) -> Result<()> {
        if self.phase != self.kind().phase() {
            return Err(Error::Protocol(format!(
                "{:?} tagged with phase {:?}",
                self.kind(),
                self.phase
            )));
        }
        Ok(())
    }
}

/// Uniformly picks the leader among `gdos` members.
pub fn elect_leader(gdos: usize, rng_seed: u64) -> Result<NodeId> {
    if gdos < 2 {
        return Err(Error::Config(format!(
            "leader election needs at least 2 members, got {gdos}"
        )));
    }
    if gdos > u16::MAX as usize {
        return Err(Error::Config(format!("too many members: {gdos}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(NodeId(rng.gen_range(0..gdos) as u16))
}
