//! Attested channel between two enclaves: sealing, tamper and replay
//! rejection, and the fixed per-message envelope cost.
//!
//!     cargo run --example secure_channel

use gendpr::protocol::{Payload, ProtocolMessage};
use gendpr::transport::{attest_handshake, Enclave, SecureChannel, ENVELOPE_OVERHEAD, TRUSTED_MEASUREMENT};
use gendpr::NodeId;

fn main() -> gendpr::Result<()> {
    let leader = Enclave::new(NodeId(0), TRUSTED_MEASUREMENT);
    let member = Enclave::new(NodeId(1), TRUSTED_MEASUREMENT);
    let rogue = Enclave::new(NodeId(2), "modified-build");
    println!("rogue handshake: {}", attest_handshake(&leader, &rogue, 7).unwrap_err());

    let (k_member, k_leader) = attest_handshake(&member, &leader, 7)?;
    let mut tx = SecureChannel::new(NodeId(1), NodeId(0), &k_member);
    let mut rx = SecureChannel::new(NodeId(0), NodeId(1), &k_leader);

    for l in [10usize, 1_000, 100_000] {
        let msg = ProtocolMessage::new(NodeId(1), NodeId(0), None, Payload::CaseCounts { counts: vec![3; l] });
        let env = tx.seal(&msg)?;
        assert_eq!(rx.unseal(&env)?, msg);
        println!(
            "L={l:>6}: plaintext {:>6} B, sealed {:>6} B, overhead {:.3}%",
            env.plaintext_len(),
            env.wire_len(),
            100.0 * ENVELOPE_OVERHEAD as f64 / env.plaintext_len() as f64
        );
        if l == 10 {
            println!("replay: {}", rx.unseal(&env).unwrap_err());
        }
    }

    let msg = ProtocolMessage::new(NodeId(1), NodeId(0), None, Payload::BroadcastMaf { retained: vec![4, 8] });
    let mut env = tx.seal(&msg)?;
    env.ciphertext[0] ^= 0x80;
    println!("bit flip: {}", rx.unseal(&env).unwrap_err());
    Ok(())
}
