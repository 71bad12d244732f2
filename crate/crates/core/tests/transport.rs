use gendpr::protocol::{Payload, ProtocolMessage};
use gendpr::transport::{
    attest_handshake, Enclave, SealedEnvelope, SecureChannel, ENVELOPE_OVERHEAD, TRUSTED_MEASUREMENT,
};
use gendpr::{Error, NodeId};
use proptest::prelude::*;

fn channel(a: u16, b: u16, seed: u64) -> (SecureChannel, SecureChannel) {
    let ea = Enclave::new(NodeId(a), TRUSTED_MEASUREMENT);
    let eb = Enclave::new(NodeId(b), TRUSTED_MEASUREMENT);
    let (ka, kb) = attest_handshake(&ea, &eb, seed).unwrap();
    (SecureChannel::new(NodeId(a), NodeId(b), &ka), SecureChannel::new(NodeId(b), NodeId(a), &kb))
}

#[test]
fn every_pair_gets_its_own_key() {
    let mut keys = Vec::new();
    for a in 0..6u16 {
        for b in a + 1..6 {
            let (ka, kb) = attest_handshake(
                &Enclave::new(NodeId(a), TRUSTED_MEASUREMENT),
                &Enclave::new(NodeId(b), TRUSTED_MEASUREMENT),
                1,
            )
            .unwrap();
            assert_eq!(ka.as_bytes(), kb.as_bytes());
            keys.push(*ka.as_bytes());
        }
    }
    let n = keys.len();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), n);
}

#[test]
fn envelope_from_another_pair_is_rejected() {
    let (mut tx, _) = channel(0, 1, 3);
    let (_, mut other_rx) = channel(2, 1, 3);
    let msg = ProtocolMessage::new(NodeId(0), NodeId(1), None, Payload::BroadcastMaf { retained: vec![1] });
    let env = tx.seal(&msg).unwrap();
    assert!(matches!(other_rx.unseal(&env), Err(Error::Authentication { .. })));
}

#[test]
fn header_tampering_is_detected() {
    let (mut tx, mut rx) = channel(0, 1, 3);
    let msg = ProtocolMessage::new(NodeId(0), NodeId(1), Some(2), Payload::PairStatsRequest { left: 0, right: 1 });
    let mut env = tx.seal(&msg).unwrap();
    env.header.combination = Some(3);
    assert!(matches!(rx.unseal(&env), Err(Error::Authentication { .. })));
}

fn payloads() -> impl Strategy<Value = Payload> {
    prop_oneof![
        prop::collection::vec(any::<u32>(), 0..300).prop_map(|counts| Payload::CaseCounts { counts }),
        prop::collection::vec(any::<u32>(), 0..300).prop_map(|retained| Payload::BroadcastSafe { retained }),
        (1u32..20, 1u32..20).prop_flat_map(|(r, c)| {
            prop::collection::vec(-10.0f64..10.0, (r * c) as usize)
                .prop_map(move |values| Payload::LrSubmatrix { rows: r, cols: c, values })
        }),
    ]
}

proptest! {
    #[test]
    fn sealed_stream_round_trips_with_constant_overhead(ps in prop::collection::vec(payloads(), 1..12), flip in any::<prop::sample::Index>()) {
        let (mut tx, mut rx) = channel(0, 1, 9);
        for p in ps {
            let msg = ProtocolMessage::new(NodeId(0), NodeId(1), None, p);
            let env = tx.seal(&msg).unwrap();
            prop_assert_eq!(env.wire_len() - env.plaintext_len(), ENVELOPE_OVERHEAD);
            let bytes = env.to_bytes();
            prop_assert_eq!(bytes.len(), env.wire_len());

            let mut tampered = bytes.clone();
            let i = flip.index(tampered.len());
            tampered[i] ^= 0x01;
            if let Ok(t) = SealedEnvelope::from_bytes(&tampered) {
                prop_assert!(rx.unseal(&t).is_err());
            }
            let back = rx.unseal(&SealedEnvelope::from_bytes(&bytes).unwrap()).unwrap();
            prop_assert_eq!(back, msg);
        }
    }

    #[test]
    fn equal_length_plaintexts_never_share_ciphertext(a in prop::collection::vec(any::<u32>(), 1..50), seed in any::<u64>()) {
        let (mut tx, _) = channel(0, 1, seed);
        let b: Vec<u32> = a.iter().map(|x| x.wrapping_add(1)).collect();
        let ea = tx.seal(&ProtocolMessage::new(NodeId(0), NodeId(1), None, Payload::CaseCounts { counts: a.clone() })).unwrap();
        let eb = tx.seal(&ProtocolMessage::new(NodeId(0), NodeId(1), None, Payload::CaseCounts { counts: b })).unwrap();
        let ea2 = tx.seal(&ProtocolMessage::new(NodeId(0), NodeId(1), None, Payload::CaseCounts { counts: a })).unwrap();
        prop_assert_ne!(&ea.ciphertext, &eb.ciphertext);
        prop_assert_ne!(&ea.ciphertext, &ea2.ciphertext);
    }
}
