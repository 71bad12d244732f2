//! In-process deployment: one leader and `G - 1` members connected by
//! attested channels over per-pair FIFO byte queues, driven by a
//! deterministic single-threaded scheduler.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collusion::CollusionPlan;
use crate::config::StudyConfig;
use crate::error::{Error, Result};
use crate::genotype::{FederationDataset, SnpId};
use crate::protocol::{elect_leader, Leader, Member, MessageKind, NodeId, Phase, ProtocolMessage};
use crate::stats::{LrSelection, PhaseLists, PrivacyVerdict};
use crate::transport::{
    attest_handshake, ChannelMetrics, Enclave, SealedEnvelope, SecureChannel, TRUSTED_MEASUREMENT,
};

/// Order in which pending envelopes are delivered. Each directed pair is
/// always FIFO; `Shuffled` interleaves pairs pseudo-randomly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheduler {
    #[default]
    Fifo,
    Shuffled(u64),
}

#[derive(Debug, Clone)]
pub struct ProtocolOptions {
    pub scheduler: Scheduler,
    pub barrier_timeout: Duration,
    /// Members that receive but never answer.
    pub silent_members: Vec<NodeId>,
    /// Keep every delivered plaintext message in the outcome.
    pub record_messages: bool,
    /// Enclave measurement per node; unlisted nodes run the trusted build.
    pub measurements: BTreeMap<NodeId, String>,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        ProtocolOptions {
            scheduler: Scheduler::Fifo,
            barrier_timeout: Duration::from_secs(30),
            silent_members: Vec::new(),
            record_messages: false,
            measurements: BTreeMap::new(),
        }
    }
}

/// One sealed envelope as it crossed the transport.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub phase: Phase,
    pub kind: MessageKind,
    pub combination: Option<u32>,
    pub sequence: u64,
    pub plaintext_len: usize,
    pub sealed_len: usize,
}

#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub leader: NodeId,
    pub verdict: PrivacyVerdict,
    pub per_combination: Vec<PhaseLists>,
    pub selections: Vec<LrSelection>,
    pub metrics: ChannelMetrics,
    pub trace: Vec<TraceEntry>,
    pub messages: Vec<ProtocolMessage>,
    /// Final release as recorded by each non-leader member.
    pub member_releases: BTreeMap<NodeId, Vec<SnpId>>,
    /// Wall-clock time the leader spent in each phase.
    pub phase_durations: Vec<(Phase, Duration)>,
    pub ld_evaluations: usize,
}

pub fn run_protocol(
    dataset: &FederationDataset,
    config: &StudyConfig,
    options: &ProtocolOptions,
) -> Result<ProtocolOutcome> {
    let plan = CollusionPlan::new(config.gdos, config.collusion)?;
    run_protocol_with_plan(dataset, config, &plan, options)
}

struct Network {
    queues: BTreeMap<(NodeId, NodeId), VecDeque<Vec<u8>>>,
    order: VecDeque<(NodeId, NodeId)>,
    rng: Option<ChaCha8Rng>,
    metrics: ChannelMetrics,
    trace: Vec<TraceEntry>,
}

impl Network {
    fn push(&mut self, env: &SealedEnvelope) {
        let h = &env.header;
        self.metrics.record(env);
        self.trace.push(TraceEntry {
            sender: h.sender,
            receiver: h.receiver,
            phase: h.phase,
            kind: h.kind,
            combination: h.combination,
            sequence: h.sequence,
            plaintext_len: env.plaintext_len(),
            sealed_len: env.wire_len(),
        });
        let key = (h.sender, h.receiver);
        self.queues.entry(key).or_default().push_back(env.to_bytes());
        self.order.push_back(key);
    }

    fn pop(&mut self) -> Option<Vec<u8>> {
        let key = match &mut self.rng {
            None => self.order.pop_front()?,
            Some(rng) => {
                let ready: Vec<(NodeId, NodeId)> = self
                    .queues
                    .iter()
                    .filter(|(_, q)| !q.is_empty())
                    .map(|(k, _)| *k)
                    .collect();
                if ready.is_empty() {
                    return None;
                }
                ready[rng.gen_range(0..ready.len())]
            }
        };
        self.queues.get_mut(&key)?.pop_front()
    }
}

/// Runs the full protocol under an explicit collusion plan.
pub fn run_protocol_with_plan(
    dataset: &FederationDataset,
    config: &StudyConfig,
    plan: &CollusionPlan,
    options: &ProtocolOptions,
) -> Result<ProtocolOutcome> {
    config.validate()?;
    let gdos = dataset.gdos();
    if gdos != config.gdos {
        return Err(Error::Config(format!(
            "dataset has {gdos} shards but the configuration expects {}",
            config.gdos
        )));
    }
    if plan.combinations.iter().any(|c| c.members.iter().any(|m| m.0 as usize >= gdos)) {
        return Err(Error::Config("collusion plan references unknown members".into()));
    }
    let leader_id = elect_leader(gdos, config.rng_seed)?;
    let nodes: Vec<NodeId> = (0..gdos as u16).map(NodeId).collect();
    let measurement = |n: NodeId| {
        options
            .measurements
            .get(&n)
            .cloned()
            .unwrap_or_else(|| TRUSTED_MEASUREMENT.to_string())
    };
    log::info!("{gdos} members, leader {leader_id}, {} combinations", plan.combinations.len());

    // star topology: every member attests to the leader only
    let leader_enclave = Enclave::new(leader_id, measurement(leader_id));
    let mut leader_channels: HashMap<NodeId, SecureChannel> = HashMap::new();
    let mut member_channels: HashMap<NodeId, SecureChannel> = HashMap::new();
    for &n in nodes.iter().filter(|&&n| n != leader_id) {
        let (kl, km) = attest_handshake(&leader_enclave, &Enclave::new(n, measurement(n)), config.rng_seed)?;
        leader_channels.insert(n, SecureChannel::new(leader_id, n, &kl));
        member_channels.insert(n, SecureChannel::new(n, leader_id, &km));
    }

    let shards = dataset.shards();
    let mut leader = Leader::new(
        leader_id,
        nodes.clone(),
        measurement(leader_id),
        shards[leader_id.0 as usize].clone(),
        dataset.reference().clone(),
        config.clone(),
        plan.clone(),
    );
    let mut members: BTreeMap<NodeId, Member> = nodes
        .iter()
        .filter(|&&n| n != leader_id)
        .map(|&n| {
            let m = Member::new(n, leader_id, measurement(n), shards[n.0 as usize].clone(), config.desired.clone());
            (n, m)
        })
        .collect();

    let mut net = Network {
        queues: BTreeMap::new(),
        order: VecDeque::new(),
        rng: match options.scheduler {
            Scheduler::Fifo => None,
            Scheduler::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        },
        metrics: ChannelMetrics::default(),
        trace: Vec::new(),
    };
    let mut messages = Vec::new();
    let mut phase_durations = Vec::new();
    let mut phase_started = (leader.phase(), Instant::now());

    let send = |net: &mut Network, channels: &mut HashMap<NodeId, SecureChannel>, key: NodeId, out: Vec<ProtocolMessage>| -> Result<()> {
        for msg in out {
            let ch = channels
                .get_mut(&key)
                .ok_or_else(|| Error::Channel(format!("no channel for {}", msg.receiver)))?;
            net.push(&ch.seal(&msg)?);
        }
        Ok(())
    };
    let out = leader.start()?;
    for m in &out {
        send(&mut net, &mut leader_channels, m.receiver, vec![m.clone()])?;
    }

    while let Some(bytes) = net.pop() {
        let env = SealedEnvelope::from_bytes(&bytes)?;
        let (from, to) = (env.header.sender, env.header.receiver);
        if to == leader_id {
            let msg = leader_channels
                .get_mut(&from)
                .ok_or_else(|| Error::Channel(format!("no channel from {from}")))?
                .unseal(&env)?;
            let out = leader.handle(&msg)?;
            if options.record_messages {
                messages.push(msg);
            }
            for m in out {
                let r = m.receiver;
                send(&mut net, &mut leader_channels, r, vec![m])?;
            }
            if leader.phase() != phase_started.0 {
                phase_durations.push((phase_started.0, phase_started.1.elapsed()));
                phase_started = (leader.phase(), Instant::now());
            }
        } else {
            let msg = member_channels
                .get_mut(&to)
                .ok_or_else(|| Error::Channel(format!("no channel at {to}")))?
                .unseal(&env)?;
            if options.record_messages {
                messages.push(msg.clone());
            }
            if options.silent_members.contains(&to) {
                continue;
            }
            let member = members.get_mut(&to).expect("member exists for every channel");
            let out = member.handle(&msg)?;
            send(&mut net, &mut member_channels, to, out)?;
        }
    }

    let Some(verdict) = leader.verdict() else {
        let missing = leader.missing();
        log::error!("barrier in {:?} never completed; missing {missing:?}", leader.phase());
        return Err(Error::BarrierTimeout {
            phase: leader.phase(),
            missing,
            timeout: options.barrier_timeout,
        });
    };
    let member_releases = members
        .iter()
        .map(|(&n, m)| {
            m.release()
                .map(|r| (n, r.to_vec()))
                .ok_or_else(|| Error::Protocol(format!("{n} never received the final release")))
        })
        .collect::<Result<_>>()?;

    Ok(ProtocolOutcome {
        leader: leader_id,
        verdict,
        per_combination: leader.per_combination().to_vec(),
        selections: leader.selections().to_vec(),
        metrics: net.metrics,
        trace: net.trace,
        messages,
        member_releases,
        phase_durations,
        ld_evaluations: leader.ld_evaluations(),
    })
}
