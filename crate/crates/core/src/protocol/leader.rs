//! The coordinating member: aggregates inputs per phase, runs the analyses
//! over every combination of the plan and broadcasts intersected results.

use std::collections::{BTreeMap, BTreeSet};

use crate::collusion::{CollusionPlan, CombinationId};
use crate::config::StudyConfig;
use crate::error::{Error, Result};
use crate::genotype::{GenotypeMatrix, SnpId};
use crate::protocol::{NodeId, Payload, Phase, ProtocolMessage};
use crate::stats::{
    allele_counts, chi2_rank, filter_maf, global_maf, intersect_ordered, lr_matrix,
    lr_test_select, merge_pair_stats, pair_stats, positions_in, AlleleCountVector, LdOutcome,
    LdScan, LrMatrix, LrSelection, PairCorrelationStats, PhaseAudit, PhaseLists, PrivacyVerdict,
    RankTable, Removal,
};

#[derive(Debug)]
struct ComboScan {
    scan: LdScan,
    awaiting: BTreeSet<NodeId>,
    parts: Vec<PairCorrelationStats>,
}

#[derive(Debug)]
pub struct Leader {
    id: NodeId,
    members: Vec<NodeId>,
    measurement: String,
    shard: GenotypeMatrix,
    reference: GenotypeMatrix,
    config: StudyConfig,
    plan: CollusionPlan,
    phase: Phase,

    case_sizes: BTreeMap<NodeId, u32>,
    counts: BTreeMap<NodeId, AlleleCountVector>,
    reference_counts: Option<AlleleCountVector>,
    combo_counts: Vec<AlleleCountVector>,

    scans: Vec<ComboScan>,
    lr_pending: BTreeSet<(NodeId, u32)>,
    lr_parts: BTreeMap<(u32, NodeId), LrMatrix>,
    nulls: Vec<LrMatrix>,

    lists: PhaseLists,
    audit: Vec<PhaseAudit>,
    per_combination: Vec<PhaseLists>,
    selections: Vec<LrSelection>,
    ld_evaluations: usize,
}

impl Leader {
    pub fn new(
        id: NodeId,
        members: Vec<NodeId>,
        measurement: impl Into<String>,
        shard: GenotypeMatrix,
        reference: GenotypeMatrix,
        config: StudyConfig,
        plan: CollusionPlan,
    ) -> Self {
        let mut members = members;
        members.sort();
        members.retain(|&m| m != id);
        let n_combos = plan.combinations.len();
        Leader {
            id,
            members,
            measurement: measurement.into(),
            shard,
            reference,
            config,
            plan,
            phase: Phase::Setup,
            case_sizes: BTreeMap::new(),
            counts: BTreeMap::new(),
            reference_counts: None,
            combo_counts: Vec::new(),
            scans: Vec::new(),
            lr_pending: BTreeSet::new(),
            lr_parts: BTreeMap::new(),
            nulls: Vec::new(),
            lists: PhaseLists::default(),
            audit: Vec::new(),
            per_combination: vec![PhaseLists::default(); n_combos],
            selections: Vec::new(),
            ld_evaluations: 0,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    pub fn verdict(&self) -> Option<PrivacyVerdict> {
        self.is_done().then(|| PrivacyVerdict {
            lists: self.lists.clone(),
            audit: self.audit.clone(),
        })
    }

    /// Per-combination retained lists, in plan order.
    pub fn per_combination(&self) -> &[PhaseLists] {
        &self.per_combination
    }

    /// LR-test outcome per combination, in plan order.
    pub fn selections(&self) -> &[LrSelection] {
        &self.selections
    }

    pub fn ld_evaluations(&self) -> usize {
        self.ld_evaluations
    }

    /// Members whose input the current phase barrier still waits for.
    pub fn missing(&self) -> Vec<NodeId> {
        let set: BTreeSet<NodeId> = match self.phase {
            Phase::Setup | Phase::Maf => self
                .members
                .iter()
                .copied()
                .filter(|m| !self.counts.contains_key(m))
                .collect(),
            Phase::Ld => self.scans.iter().flat_map(|s| s.awaiting.iter().copied()).collect(),
            Phase::Lr => self.lr_pending.iter().map(|&(n, _)| n).collect(),
            Phase::Done => BTreeSet::new(),
        };
        set.into_iter().collect()
    }

    fn send(&self, to: NodeId, combination: Option<u32>, payload: Payload) -> ProtocolMessage {
        ProtocolMessage::new(self.id, to, combination, payload)
    }

    fn broadcast(&self, payload: Payload) -> Vec<ProtocolMessage> {
        self.members
            .iter()
            .map(|&m| self.send(m, None, payload.clone()))
            .collect()
    }

    fn remote_members<'a>(&'a self, combo: &'a CombinationId) -> impl Iterator<Item = NodeId> + 'a {
        combo.members.iter().copied().filter(move |&m| m != self.id)
    }

    fn combo_index(&self, tag: Option<u32>) -> Result<usize> {
        match (tag, self.plan.is_trivial()) {
            (None, true) => Ok(0),
            (Some(t), false) if (t as usize) < self.plan.combinations.len() => Ok(t as usize),
            _ => Err(Error::Protocol(format!("unexpected combination tag {tag:?}"))),
        }
    }

    /// Computes the leader's local statistics and greets every member.
    pub fn start(&mut self) -> Result<Vec<ProtocolMessage>> {
        if self.phase != Phase::Setup {
            return Err(Error::Protocol("leader already started".into()));
        }
        let desired = &self.config.desired;
        let own = allele_counts(&self.shard, desired)?;
        self.case_sizes.insert(self.id, own.n_individuals);
        self.counts.insert(self.id, own);
        self.reference_counts = Some(allele_counts(&self.reference, desired)?);
        self.phase = Phase::Maf;
        Ok(self.broadcast(Payload::AttestHello {
            measurement: self.measurement.clone(),
        }))
    }

    pub fn handle(&mut self, msg: &ProtocolMessage) -> Result<Vec<ProtocolMessage>> {
        if msg.receiver != self.id || !self.members.contains(&msg.sender) {
            return Err(Error::Protocol(format!(
                "leader {} received a message from {} addressed to {}",
                self.id, msg.sender, msg.receiver
            )));
        }
        msg.check_consistent()?;
        let unexpected = || Error::UnexpectedMessage {
            node: self.id,
            kind: msg.kind(),
            phase: self.phase,
        };
        match (&msg.payload, self.phase) {
            (Payload::AttestAck { measurement, case_size }, Phase::Maf) => {
                if *measurement != self.measurement {
                    return Err(Error::Attestation {
                        a: self.id,
                        b: msg.sender,
                    });
                }
                if self.case_sizes.insert(msg.sender, *case_size).is_some() {
                    return Err(unexpected());
                }
                Ok(vec![])
            }
            (Payload::CaseCounts { counts }, Phase::Maf) => {
                let Some(&n) = self.case_sizes.get(&msg.sender) else {
                    return Err(Error::Protocol(format!(
                        "counts from {} before attestation",
                        msg.sender
                    )));
                };
                if self.counts.contains_key(&msg.sender) {
                    return Err(unexpected());
                }
                if counts.len() != self.config.desired.len() {
                    return Err(Error::validation(format!(
                        "{} sent {} counts for {} desired SNPs",
                        msg.sender,
                        counts.len(),
                        self.config.desired.len()
                    )));
                }
                self.counts
                    .insert(msg.sender, AlleleCountVector::new(counts.clone(), n)?);
                if self.counts.len() == self.members.len() + 1 {
                    self.finish_maf()
                } else {
                    Ok(vec![])
                }
            }
            (Payload::PairStats { left, right, stats }, Phase::Ld) => {
                let c = self.combo_index(msg.combination)?;
                let scan = &mut self.scans[c];
                let expected = scan
                    .scan
                    .pending()
                    .map(|(l, r)| (l.index, r.index))
                    .filter(|&p| p == (*left, *right));
                if expected.is_none() || !scan.awaiting.remove(&msg.sender) {
                    return Err(Error::Protocol(format!(
                        "unsolicited pair statistics ({left}, {right}) from {}",
                        msg.sender
                    )));
                }
                scan.parts.push(*stats);
                if !scan.awaiting.is_empty() {
                    return Ok(vec![]);
                }
                let merged = merge_pair_stats(&scan.parts)?;
                scan.parts.clear();
                scan.scan.supply(&merged)?;
                let mut out = self.advance_scan(c)?;
                if self.scans.iter().all(|s| s.scan.is_finished()) {
                    out.extend(self.finish_ld()?);
                }
                Ok(out)
            }
            (Payload::LrSubmatrix { rows, cols, values }, Phase::Lr) => {
                let c = self.combo_index(msg.combination)?;
                let ordinal = self.plan.combinations[c].ordinal;
                if !self.lr_pending.remove(&(msg.sender, ordinal)) {
                    return Err(unexpected());
                }
                let expected_rows = self.case_sizes[&msg.sender];
                if *cols as usize != self.lists.ld.len() || *rows != expected_rows {
                    return Err(Error::validation(format!(
                        "LR submatrix from {} is {rows}x{cols}, expected {expected_rows}x{}",
                        msg.sender,
                        self.lists.ld.len()
                    )));
                }
                let individuals = (0..*rows).map(|r| format!("{}/{r}", msg.sender)).collect();
                let lr = LrMatrix::new(individuals, self.lists.ld.clone(), values.clone())?;
                self.lr_parts.insert((ordinal, msg.sender), lr);
                if self.lr_pending.is_empty() {
                    self.finish_lr()
                } else {
                    Ok(vec![])
                }
            }
            _ => Err(unexpected()),
        }
    }

    fn finish_maf(&mut self) -> Result<Vec<ProtocolMessage>> {
        let desired = self.config.desired.clone();
        let reference = self.reference_counts.clone().expect("set in start");
        let mut lists = Vec::with_capacity(self.plan.combinations.len());
        let mut freqs = Vec::with_capacity(self.plan.combinations.len());
        for (c, combo) in self.plan.combinations.iter().enumerate() {
            // leader-local counts are folded in last
            let mut locals: Vec<&AlleleCountVector> = combo
                .members
                .iter()
                .filter(|&&m| m != self.id)
                .map(|m| &self.counts[m])
                .collect();
            if combo.contains(self.id) {
                locals.push(&self.counts[&self.id]);
            }
            let (f, _) = global_maf(&locals, &reference)?;
            let kept = filter_maf(&f, self.config.maf_cutoff, &desired)?;
            self.per_combination[c].maf = kept.clone();
            let merged = AlleleCountVector::merge(&locals)?;
            self.combo_counts.push(merged);
            lists.push(kept);
            freqs.push(f);
        }
        self.lists.maf = intersect_ordered(&desired, &lists);
        let removed = first_removals(&desired, &self.lists.maf, &lists, |c, snp| {
            let pos = positions_in(&desired, std::slice::from_ref(snp)).expect("desired")[0];
            freqs[c].freqs[pos]
        });
        self.audit.push(PhaseAudit {
            phase: Phase::Maf,
            removed,
        });

        let mut out = self.broadcast(Payload::BroadcastMaf {
            retained: self.lists.maf.iter().map(|s| s.index).collect(),
        });
        out.extend(self.start_ld()?);
        Ok(out)
    }

    fn start_ld(&mut self) -> Result<Vec<ProtocolMessage>> {
        self.phase = Phase::Ld;
        let pos = positions_in(&self.config.desired, &self.lists.maf)?;
        let reference = self.reference_counts.as_ref().expect("set in start").select(&pos);
        for counts in &self.combo_counts {
            let ranks = chi2_rank(&counts.select(&pos), &reference)?;
            let table = RankTable::new(&self.lists.maf, &ranks)?;
            self.scans.push(ComboScan {
                scan: LdScan::new(self.lists.maf.clone(), table, self.config.ld_cutoff)?,
                awaiting: BTreeSet::new(),
                parts: Vec::new(),
            });
        }
        let mut out = Vec::new();
        for c in 0..self.scans.len() {
            out.extend(self.advance_scan(c)?);
        }
        if self.scans.iter().all(|s| s.scan.is_finished()) {
            out.extend(self.finish_ld()?);
        }
        Ok(out)
    }

    /// Moves combination `c`'s scan forward until it needs member input.
    fn advance_scan(&mut self, c: usize) -> Result<Vec<ProtocolMessage>> {
        let combo = self.plan.combinations[c].clone();
        let tag = self.plan.tag(&combo);
        let remote: Vec<NodeId> = self.remote_members(&combo).collect();
        loop {
            let Some((l, r)) = self.scans[c].scan.pending() else {
                return Ok(vec![]);
            };
            let (l, r) = (l.clone(), r.clone());
            let mut local = vec![pair_stats(&self.reference, &l, &r)?];
            if combo.contains(self.id) {
                local.push(pair_stats(&self.shard, &l, &r)?);
            }
            if remote.is_empty() {
                let merged = merge_pair_stats(&local)?;
                self.scans[c].scan.supply(&merged)?;
                continue;
            }
            let scan = &mut self.scans[c];
            scan.parts = local;
            scan.awaiting = remote.iter().copied().collect();
            return Ok(remote
                .iter()
                .map(|&m| {
                    self.send(
                        m,
                        tag,
                        Payload::PairStatsRequest {
                            left: l.index,
                            right: r.index,
                        },
                    )
                })
                .collect());
        }
    }

    fn finish_ld(&mut self) -> Result<Vec<ProtocolMessage>> {
        let outcomes: Vec<LdOutcome> = std::mem::take(&mut self.scans)
            .into_iter()
            .map(|s| s.scan.finish())
            .collect::<Result<_>>()?;
        self.ld_evaluations = outcomes.iter().map(|o| o.evaluations).sum();
        let lists: Vec<Vec<SnpId>> = outcomes.iter().map(|o| o.retained.clone()).collect();
        for (c, l) in lists.iter().enumerate() {
            self.per_combination[c].ld = l.clone();
        }
        self.lists.ld = intersect_ordered(&self.lists.maf, &lists);
        let removed = first_removals(&self.lists.maf, &self.lists.ld, &lists, |c, snp| {
            metric_of(&outcomes[c].removed, snp)
        });
        self.audit.push(PhaseAudit {
            phase: Phase::Ld,
            removed,
        });
        self.start_lr()
    }

    fn start_lr(&mut self) -> Result<Vec<ProtocolMessage>> {
        self.phase = Phase::Lr;
        let snps = self.lists.ld.clone();
        let pos = positions_in(&self.config.desired, &snps)?;
        let ref_freqs = self
            .reference_counts
            .as_ref()
            .expect("set in start")
            .select(&pos)
            .frequencies();
        let retained: Vec<u32> = snps.iter().map(|s| s.index).collect();
        let mut out = Vec::new();
        for c in 0..self.plan.combinations.len() {
            let combo = self.plan.combinations[c].clone();
            let case_freqs = self.combo_counts[c].select(&pos).frequencies();
            self.nulls
                .push(lr_matrix(&self.reference, &snps, &case_freqs, &ref_freqs)?);
            if combo.contains(self.id) {
                let own = lr_matrix(&self.shard, &snps, &case_freqs, &ref_freqs)?;
                self.lr_parts.insert((combo.ordinal, self.id), own);
            }
            let tag = self.plan.tag(&combo);
            let remote: Vec<NodeId> = self.remote_members(&combo).collect();
            for m in remote {
                self.lr_pending.insert((m, combo.ordinal));
                out.push(self.send(
                    m,
                    tag,
                    Payload::BroadcastLd {
                        retained: retained.clone(),
                        case_freqs: case_freqs.freqs.clone(),
                        ref_freqs: ref_freqs.freqs.clone(),
                    },
                ));
            }
        }
        if self.lr_pending.is_empty() {
            out.extend(self.finish_lr()?);
        }
        Ok(out)
    }

    fn finish_lr(&mut self) -> Result<Vec<ProtocolMessage>> {
        let mut lists = Vec::with_capacity(self.plan.combinations.len());
        for (c, combo) in self.plan.combinations.iter().enumerate() {
            // rows stacked in member order regardless of arrival order
            let parts: Vec<&LrMatrix> = combo
                .members
                .iter()
                .map(|m| &self.lr_parts[&(combo.ordinal, *m)])
                .collect();
            let full = LrMatrix::concat_rows(&parts)?;
            let selection = lr_test_select(
                &full,
                &self.nulls[c],
                self.config.alpha,
                self.config.power_threshold,
            )?;
            self.per_combination[c].lr = selection.retained.clone();
            lists.push(selection.retained.clone());
            self.selections.push(selection);
        }
        self.lists.lr = intersect_ordered(&self.lists.ld, &lists);
        let removed = first_removals(&self.lists.ld, &self.lists.lr, &lists, |c, snp| {
            metric_of(&self.selections[c].removed, snp)
        });
        self.audit.push(PhaseAudit {
            phase: Phase::Lr,
            removed,
        });
        self.lr_parts.clear();
        self.phase = Phase::Done;
        Ok(self.broadcast(Payload::BroadcastSafe {
            retained: self.lists.lr.iter().map(|s| s.index).collect(),
        }))
    }
}

fn metric_of(removed: &[Removal], snp: &SnpId) -> f64 {
    removed
        .iter()
        .find(|r| r.snp.index == snp.index)
        .map_or(f64::NAN, |r| r.metric)
}

/// Audit entries for SNPs of `input` missing from `kept`, each attributed to
/// the first combination that dropped it.
fn first_removals(
    input: &[SnpId],
    kept: &[SnpId],
    per_combo: &[Vec<SnpId>],
    mut metric: impl FnMut(usize, &SnpId) -> f64,
) -> Vec<Removal> {
    let sets: Vec<BTreeSet<u32>> = per_combo
        .iter()
        .map(|l| l.iter().map(|s| s.index).collect())
        .collect();
    crate::stats::removals(input, kept, |snp| {
        let c = sets
            .iter()
            .position(|s| !s.contains(&snp.index))
            .expect("removed SNP is missing from some combination");
        metric(c, snp)
    })
}
