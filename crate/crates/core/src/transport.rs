//! Simulated enclave-to-enclave channels.
//!
//! Keys come from a mock attestation handshake that compares enclave
//! measurements. Every protocol message is sealed with AES-256-GCM; the
//! envelope header is bound as associated data.
//!
//! Envelope layout (little-endian):
//!
//! ```text
//! kind u8 | sender u16 | receiver u16 | phase u8 | combination u32 |
//! sequence u64 | nonce [12] | ciphertext_len u32 | ciphertext | tag [16]
//! ```
//!
//! `combination` is `u32::MAX` outside collusion-tolerant runs.

use std::collections::BTreeMap;

use aes_gcm::aead::{Aead, KeyInit, Payload as AeadPayload};
use aes_gcm::{Aes256Gcm, Key, Nonce};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::protocol::wire::{decode_payload, encode_payload};
use crate::protocol::{MessageKind, NodeId, Phase, ProtocolMessage};

pub const HEADER_LEN: usize = 1 + 2 + 2 + 1 + 4 + 8 + 12 + 4;
pub const TAG_LEN: usize = 16;
/// Framing bytes added to every payload.
pub const ENVELOPE_OVERHEAD: usize = HEADER_LEN + TAG_LEN;

const NO_COMBINATION: u32 = u32::MAX;

/// The code identity an enclave reports during attestation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enclave {
    pub node: NodeId,
    pub measurement: String,
}

impl Enclave {
    pub fn new(node: NodeId, measurement: impl Into<String>) -> Self {
        Enclave {
            node,
            measurement: measurement.into(),
        }
    }
}

/// Measurement of the unmodified verification enclave.
pub const TRUSTED_MEASUREMENT: &str = "gendpr-verifier-enclave-v1";

#[derive(Clone, PartialEq, Eq)]
pub struct ChannelKey([u8; 32]);

impl ChannelKey {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl std::fmt::Debug for ChannelKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ChannelKey(..)")
    }
}

fn derive_key(own: &Enclave, peer: &Enclave, rng_seed: u64) -> ChannelKey {
    let (lo, hi) = if own.node <= peer.node { (own, peer) } else { (peer, own) };
    let mut h = Sha256::new();
    h.update(b"gendpr/channel-key/v1");
    h.update(rng_seed.to_le_bytes());
    for e in [lo, hi] {
        h.update(e.node.0.to_le_bytes());
        h.update((e.measurement.len() as u32).to_le_bytes());
        h.update(e.measurement.as_bytes());
    }
    ChannelKey(h.finalize().into())
}

/// Mutual attestation between two enclaves. Each side checks that the peer
/// runs the same measured code, then both derive the channel key; the pair is
/// returned as `(key at a, key at b)`.
pub fn attest_handshake(a: &Enclave, b: &Enclave, rng_seed: u64) -> Result<(ChannelKey, ChannelKey)> {
    if a.node == b.node {
        return Err(Error::Config(format!("{} cannot attest to itself", a.node)));
    }
    if a.measurement != b.measurement {
        return Err(Error::Attestation { a: a.node, b: b.node });
    }
    Ok((derive_key(a, b, rng_seed), derive_key(b, a, rng_seed)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvelopeHeader {
    pub kind: MessageKind,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub phase: Phase,
    pub combination: Option<u32>,
    pub sequence: u64,
    pub nonce: [u8; 12],
}

impl EnvelopeHeader {
    fn encode(&self, ciphertext_len: u32) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN);
        out.push(self.kind.code());
        out.extend_from_slice(&self.sender.0.to_le_bytes());
        out.extend_from_slice(&self.receiver.0.to_le_bytes());
        out.push(self.phase.code());
        out.extend_from_slice(&self.combination.unwrap_or(NO_COMBINATION).to_le_bytes());
        out.extend_from_slice(&self.sequence.to_le_bytes());
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&ciphertext_len.to_le_bytes());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedEnvelope {
    pub header: EnvelopeHeader,
    pub ciphertext: Vec<u8>,
    pub tag: [u8; TAG_LEN],
}

impl SealedEnvelope {
    fn aad(&self) -> Vec<u8> {
        self.header.encode(self.ciphertext.len() as u32)
    }

    /// Plaintext payload size; GCM ciphertext is as long as its plaintext.
    pub fn plaintext_len(&self) -> usize {
        self.ciphertext.len()
    }

    pub fn wire_len(&self) -> usize {
        ENVELOPE_OVERHEAD + self.ciphertext.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.aad();
        out.extend_from_slice(&self.ciphertext);
        out.extend_from_slice(&self.tag);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < ENVELOPE_OVERHEAD {
            return Err(Error::Wire(format!("envelope of {} bytes is too short", bytes.len())));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let kind = MessageKind::from_code(bytes[0])?;
        let sender = NodeId(u16_at(1));
        let receiver = NodeId(u16_at(3));
        let phase = Phase::from_code(bytes[5])?;
        let combination = match u32_at(6) {
            NO_COMBINATION => None,
            c => Some(c),
        };
        let sequence = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
        let nonce: [u8; 12] = bytes[18..30].try_into().unwrap();
        let len = u32_at(30) as usize;
        if bytes.len() != ENVELOPE_OVERHEAD + len {
            return Err(Error::Wire(format!(
                "envelope declares {len} ciphertext bytes but carries {}",
                bytes.len() - ENVELOPE_OVERHEAD
            )));
        }
        Ok(SealedEnvelope {
            header: EnvelopeHeader {
                kind,
                sender,
                receiver,
                phase,
                combination,
                sequence,
                nonce,
            },
            ciphertext: bytes[HEADER_LEN..HEADER_LEN + len].to_vec(),
            tag: bytes[HEADER_LEN + len..].try_into().unwrap(),
        })
    }
}

/// One end of a mutually attested channel: seals outgoing messages and opens
/// incoming ones, rejecting replays.
pub struct SecureChannel {
    local: NodeId,
    peer: NodeId,
    cipher: Aes256Gcm,
    next_send: u64,
    max_send: u64,
    last_received: Option<u64>,
}

impl SecureChannel {
    pub fn new(local: NodeId, peer: NodeId, key: &ChannelKey) -> Self {
        SecureChannel {
            local,
            peer,
            cipher: Aes256Gcm::new(Key::<Aes256Gcm>::from_slice(key.as_bytes())),
            next_send: 0,
            max_send: u64::MAX,
            last_received: None,
        }
    }

    /// Caps the number of envelopes this end may seal.
    pub fn with_send_limit(mut self, limit: u64) -> Self {
        self.max_send = limit;
        self
    }

    pub fn peer(&self) -> NodeId {
        self.peer
    }

    fn nonce(sequence: u64, sender: NodeId, receiver: NodeId) -> [u8; 12] {
        let mut n = [0u8; 12];
        n[..8].copy_from_slice(&sequence.to_le_bytes());
        n[8..10].copy_from_slice(&sender.0.to_le_bytes());
        n[10..].copy_from_slice(&receiver.0.to_le_bytes());
        n
    }

    pub fn seal(&mut self, msg: &ProtocolMessage) -> Result<SealedEnvelope> {
        if msg.sender != self.local || msg.receiver != self.peer {
            return Err(Error::Channel(format!(
                "message {} -> {} on channel {} -> {}",
                msg.sender, msg.receiver, self.local, self.peer
            )));
        }
        msg.check_consistent()?;
        if self.next_send >= self.max_send {
            return Err(Error::Channel(format!(
                "nonce space exhausted on {} -> {}",
                self.local, self.peer
            )));
        }
        let sequence = self.next_send;
        let header = EnvelopeHeader {
            kind: msg.kind(),
            sender: self.local,
            receiver: self.peer,
            phase: msg.phase,
            combination: msg.combination,
            sequence,
            nonce: Self::nonce(sequence, self.local, self.peer),
        };
        let plaintext = encode_payload(&msg.payload);
        let aad = header.encode(plaintext.len() as u32);
        let mut sealed = self
            .cipher
            .encrypt(
                Nonce::from_slice(&header.nonce),
                AeadPayload {
                    msg: &plaintext,
                    aad: &aad,
                },
            )
            .map_err(|_| Error::Channel("encryption failed".into()))?;
        let tag: [u8; TAG_LEN] = sealed.split_off(plaintext.len()).try_into().unwrap();
        self.next_send += 1;
        Ok(SealedEnvelope {
            header,
            ciphertext: sealed,
            tag,
        })
    }

    pub fn unseal(&mut self, env: &SealedEnvelope) -> Result<ProtocolMessage> {
        let h = &env.header;
        let auth_err = || Error::Authentication {
            sender: h.sender,
            sequence: h.sequence,
        };
        if h.sender != self.peer || h.receiver != self.local {
            log::warn!(
                "security event: envelope {} -> {} arrived on channel {} <- {}",
                h.sender,
                h.receiver,
                self.local,
                self.peer
            );
            return Err(auth_err());
        }
        let mut buf = env.ciphertext.clone();
        buf.extend_from_slice(&env.tag);
        let plaintext = self
            .cipher
            .decrypt(
                Nonce::from_slice(&h.nonce),
                AeadPayload {
                    msg: &buf,
                    aad: &env.aad(),
                },
            )
            .map_err(|_| {
                log::warn!("security event: authentication failure on envelope from {}", h.sender);
                auth_err()
            })?;
        if let Some(last) = self.last_received {
            if h.sequence <= last {
                log::warn!("security event: replay of seq {} from {}", h.sequence, h.sender);
                return Err(Error::Replay {
                    sender: h.sender,
                    sequence: h.sequence,
                    last,
                });
            }
        }
        let payload = decode_payload(h.kind, &plaintext)?;
        let msg = ProtocolMessage {
            sender: h.sender,
            receiver: h.receiver,
            phase: h.phase,
            combination: h.combination,
            payload,
        };
        msg.check_consistent()?;
        self.last_received = Some(h.sequence);
        Ok(msg)
    }
}

/// Byte and message counters per (phase, kind).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficCounter {
    pub messages: u64,
    pub plaintext_bytes: u64,
    pub sealed_bytes: u64,
}

impl TrafficCounter {
    fn add(&mut self, other: &TrafficCounter) {
        self.messages += other.messages;
        self.plaintext_bytes += other.plaintext_bytes;
        self.sealed_bytes += other.sealed_bytes;
    }

    /// Sealed bytes over plaintext bytes, minus one.
    pub fn relative_overhead(&self) -> f64 {
        if self.plaintext_bytes == 0 {
            return 0.0;
        }
        self.sealed_bytes as f64 / self.plaintext_bytes as f64 - 1.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChannelMetrics {
    entries: BTreeMap<(Phase, MessageKind), TrafficCounter>,
}

impl ChannelMetrics {
    pub fn record(&mut self, env: &SealedEnvelope) {
        let c = self
            .entries
            .entry((env.header.phase, env.header.kind))
            .or_default();
        c.messages += 1;
        c.plaintext_bytes += env.plaintext_len() as u64;
        c.sealed_bytes += env.wire_len() as u64;
    }

    pub fn get(&self, phase: Phase, kind: MessageKind) -> TrafficCounter {
        self.entries.get(&(phase, kind)).copied().unwrap_or_default()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(Phase, MessageKind), &TrafficCounter)> {
        self.entries.iter()
    }

    pub fn total(&self) -> TrafficCounter {
        let mut t = TrafficCounter::default();
        self.entries.values().for_each(|c| t.add(c));
        t
    }

    pub fn merge(&mut self, other: &ChannelMetrics) {
        for (k, c) in &other.entries {
            self.entries.entry(*k).or_default().add(c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Payload;

    fn pair() -> (SecureChannel, SecureChannel) {
        let a = Enclave::new(NodeId(0), TRUSTED_MEASUREMENT);
        let b = Enclave::new(NodeId(1), TRUSTED_MEASUREMENT);
        let (ka, kb) = attest_handshake(&a, &b, 42).unwrap();
        (SecureChannel::new(NodeId(0), NodeId(1), &ka), SecureChannel::new(NodeId(1), NodeId(0), &kb))
    }

    fn counts(v: Vec<u32>) -> ProtocolMessage {
        ProtocolMessage::new(NodeId(0), NodeId(1), None, Payload::CaseCounts { counts: v })
    }

    #[test]
    fn handshake_agrees_and_rejects_tampered_enclave() {
        let a = Enclave::new(NodeId(0), TRUSTED_MEASUREMENT);
        let b = Enclave::new(NodeId(3), TRUSTED_MEASUREMENT);
        let (ka, kb) = attest_handshake(&a, &b, 1).unwrap();
        assert_eq!(ka, kb);
        let evil = Enclave::new(NodeId(3), "patched-enclave");
        assert!(matches!(attest_handshake(&a, &evil, 1), Err(Error::Attestation { .. })));
    }

    #[test]
    fn distinct_pairs_get_distinct_keys() {
        let enclaves: Vec<Enclave> = (0..6).map(|i| Enclave::new(NodeId(i), TRUSTED_MEASUREMENT)).collect();
        let mut keys = Vec::new();
        for i in 0..6 {
            for j in i + 1..6 {
                keys.push(attest_handshake(&enclaves[i], &enclaves[j], 5).unwrap().0);
            }
        }
        for i in 0..keys.len() {
            for j in i + 1..keys.len() {
                assert_ne!(keys[i], keys[j]);
            }
        }
    }

    #[test]
    fn round_trip_and_wire_bytes() {
        let (mut tx, mut rx) = pair();
        let m = counts(vec![1, 2, 3]);
        let env = tx.seal(&m).unwrap();
        let parsed = SealedEnvelope::from_bytes(&env.to_bytes()).unwrap();
        assert_eq!(parsed, env);
        assert_eq!(rx.unseal(&parsed).unwrap(), m);
        assert_eq!(env.plaintext_len(), 12);
        assert_eq!(env.wire_len(), 12 + ENVELOPE_OVERHEAD);
    }

    #[test]
    fn bit_flip_fails_authentication() {
        let (mut tx, mut rx) = pair();
        let mut env = tx.seal(&counts(vec![9; 4])).unwrap();
        env.ciphertext[3] ^= 0x01;
        assert!(matches!(rx.unseal(&env), Err(Error::Authentication { .. })));
        let mut env = tx.seal(&counts(vec![9; 4])).unwrap();
        env.header.combination = Some(7);
        assert!(matches!(rx.unseal(&env), Err(Error::Authentication { .. })));
    }

    #[test]
    fn replay_is_rejected_without_state_change() {
        let (mut tx, mut rx) = pair();
        let first = tx.seal(&counts(vec![1])).unwrap();
        let second = tx.seal(&counts(vec![2])).unwrap();
        rx.unseal(&first).unwrap();
        assert!(matches!(rx.unseal(&first), Err(Error::Replay { .. })));
        assert_eq!(rx.unseal(&second).unwrap(), counts(vec![2]));
    }

    #[test]
    fn foreign_key_fails_authentication() {
        let (mut tx, _) = pair();
        let c = Enclave::new(NodeId(2), TRUSTED_MEASUREMENT);
        let b = Enclave::new(NodeId(1), TRUSTED_MEASUREMENT);
        let (_, kb_other) = attest_handshake(&c, &b, 42).unwrap();
        let mut wrong = SecureChannel::new(NodeId(1), NodeId(0), &kb_other);
        let env = tx.seal(&counts(vec![1])).unwrap();
        assert!(matches!(wrong.unseal(&env), Err(Error::Authentication { .. })));
    }

    #[test]
    fn nonce_exhaustion_is_fail_stop() {
        let (tx, _) = pair();
        let mut tx = tx.with_send_limit(1);
        tx.seal(&counts(vec![1])).unwrap();
        assert!(matches!(tx.seal(&counts(vec![1])), Err(Error::Channel(_))));
    }

    #[test]
    fn equal_length_plaintexts_never_collide() {
        let (mut tx, _) = pair();
        let a = tx.seal(&counts(vec![1, 2])).unwrap();
        let b = tx.seal(&counts(vec![2, 1])).unwrap();
        let c = tx.seal(&counts(vec![1, 2])).unwrap();
        assert_ne!(a.ciphertext, b.ciphertext);
        assert_ne!(a.ciphertext, c.ciphertext);
    }

    #[test]
    fn metrics_overhead_is_constant_per_message() {
        let (mut tx, _) = pair();
        let mut metrics = ChannelMetrics::default();
        for n in [1usize, 10, 1000] {
            let env = tx.seal(&counts(vec![0; n])).unwrap();
            assert_eq!(env.wire_len() - env.plaintext_len(), ENVELOPE_OVERHEAD);
            metrics.record(&env);
        }
        let t = metrics.get(Phase::Maf, MessageKind::CaseCounts);
        assert_eq!(t.messages, 3);
        assert_eq!(t.plaintext_bytes, 4 * 1011);
        assert_eq!(t.sealed_bytes, 4 * 1011 + 3 * ENVELOPE_OVERHEAD as u64);
    }
}
