//! Little-endian payload framing. Counts and indices are `u32`, LR values
//! and frequencies are `f64`. A `CaseCounts` body is exactly four bytes per
//! desired SNP.

use crate::error::{Error, Result};
use crate::protocol::{MessageKind, Payload};
use crate::stats::PairCorrelationStats;

struct Writer(Vec<u8>);

impl Writer {
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u16(s.len() as u16);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn u32_list(&mut self, v: &[u32]) {
        self.u32(v.len() as u32);
        v.iter().for_each(|&x| self.u32(x));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Wire(format!("payload truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Wire(e.to_string()))
    }
    fn count(&mut self, elem: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(Error::Wire(format!("list of {n} elements overruns payload")));
        }
        Ok(n)
    }
    fn u32_list(&mut self) -> Result<Vec<u32>> {
        let n = self.count(4)?;
        (0..n).map(|_| self.u32()).collect()
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Wire(format!(
                "{} trailing payload bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn narrow(v: u64, what: &str) -> u32 {
    u32::try_from(v).unwrap_or_else(|_| panic!("{what} {v} exceeds the 32-bit wire range"))
}

pub fn encode_payload(payload: &Payload) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    match payload {
        Payload::AttestHello { measurement } => w.str(measurement),
        Payload::AttestAck {
            measurement,
            case_size,
        } => {
            w.str(measurement);
            w.u32(*case_size);
        }
        Payload::CaseCounts { counts } => counts.iter().for_each(|&c| w.u32(c)),
        Payload::PairStatsRequest { left, right } => {
            w.u32(*left);
            w.u32(*right);
        }
        Payload::PairStats { left, right, stats } => {
            w.u32(*left);
            w.u32(*right);
            for v in [stats.sum_l, stats.sum_r, stats.sum_lr, stats.sum_l2, stats.sum_r2, stats.n] {
                w.u32(narrow(v, "pair sum"));
            }
        }
        Payload::LrSubmatrix { rows, cols, values } => {
            w.u32(*rows);
            w.u32(*cols);
            values.iter().for_each(|&v| w.f64(v));
        }
        Payload::BroadcastMaf { retained } | Payload::BroadcastSafe { retained } => {
            w.u32_list(retained)
        }
        Payload::BroadcastLd {
            retained,
            case_freqs,
            ref_freqs,
        } => {
            w.u32_list(retained);
            case_freqs.iter().for_each(|&v| w.f64(v));
            ref_freqs.iter().for_each(|&v| w.f64(v));
        }
    }
    w.0
}

pub fn decode_payload(kind: MessageKind, bytes: &[u8]) -> Result<Payload> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let payload = match kind {
        MessageKind::AttestHello => Payload::AttestHello {
            measurement: r.str()?,
        },
        MessageKind::AttestAck => Payload::AttestAck {
            measurement: r.str()?,
            case_size: r.u32()?,
        },
        MessageKind::CaseCounts => {
            if !bytes.len().is_multiple_of(4) {
                return Err(Error::Wire(format!(
                    "count payload of {} bytes is not a multiple of 4",
                    bytes.len()
                )));
            }
            Payload::CaseCounts {
                counts: (0..bytes.len() / 4).map(|_| r.u32()).collect::<Result<_>>()?,
            }
        }
        MessageKind::PairStatsRequest => Payload::PairStatsRequest {
            left: r.u32()?,
            right: r.u32()?,
        },
        MessageKind::PairStats => {
            let left = r.u32()?;
            let right = r.u32()?;
            let mut s = [0u64; 6];
            for v in &mut s {
                *v = r.u32()? as u64;
            }
            Payload::PairStats {
                left,
                right,
                stats: PairCorrelationStats {
                    sum_l: s[0],
                    sum_r: s[1],
                    sum_lr: s[2],
                    sum_l2: s[3],
                    sum_r2: s[4],
                    n: s[5],
                },
            }
        }
        MessageKind::LrSubmatrix => {
            let rows = r.u32()?;
            let cols = r.u32()?;
            let n = (rows as usize)
                .checked_mul(cols as usize)
                .filter(|&n| n.saturating_mul(8) <= bytes.len())
                .ok_or_else(|| Error::Wire(format!("LR submatrix {rows}x{cols} overruns payload")))?;
            Payload::LrSubmatrix {
                rows,
                cols,
                values: r.f64s(n)?,
            }
        }
        MessageKind::BroadcastMaf => Payload::BroadcastMaf {
            retained: r.u32_list()?,
        },
        MessageKind::BroadcastSafe => Payload::BroadcastSafe {
            retained: r.u32_list()?,
        },
        MessageKind::BroadcastLd => {
            let retained = r.u32_list()?;
            let n = retained.len();
            Payload::BroadcastLd {
                retained,
                case_freqs: r.f64s(n)?,
                ref_freqs: r.f64s(n)?,
            }
        }
    };
    r.finish()?;
    Ok(payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn case_counts_are_four_bytes_per_snp() {
        let p = Payload::CaseCounts { counts: vec![7; 1000] };
        assert_eq!(encode_payload(&p).len(), 4000);
    }

    #[test]
    fn truncated_and_padded_payloads_fail() {
        let bytes = encode_payload(&Payload::PairStatsRequest { left: 1, right: 2 });
        assert!(decode_payload(MessageKind::PairStatsRequest, &bytes[..7]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(decode_payload(MessageKind::PairStatsRequest, &long).is_err());
        assert!(decode_payload(MessageKind::CaseCounts, &[1, 2, 3]).is_err());
        assert!(decode_payload(MessageKind::LrSubmatrix, &[255; 8]).is_err());
    }

    fn payloads() -> impl Strategy<Value = Payload> {
        let idx = prop::collection::vec(any::<u32>(), 0..20);
        let freq = prop::num::f64::NORMAL;
        prop_oneof![
            "[a-z0-9]{0,16}".prop_map(|m| Payload::AttestHello { measurement: m }),
            ("[a-z]{0,8}", any::<u32>()).prop_map(|(m, n)| Payload::AttestAck { measurement: m, case_size: n }),
            idx.clone().prop_map(|counts| Payload::CaseCounts { counts }),
            (any::<u32>(), any::<u32>()).prop_map(|(left, right)| Payload::PairStatsRequest { left, right }),
            (any::<u32>(), any::<u32>(), prop::array::uniform6(any::<u32>())).prop_map(|(left, right, s)| {
                Payload::PairStats {
                    left,
                    right,
                    stats: PairCorrelationStats {
                        sum_l: s[0] as u64,
                        sum_r: s[1] as u64,
                        sum_lr: s[2] as u64,
                        sum_l2: s[3] as u64,
                        sum_r2: s[4] as u64,
                        n: s[5] as u64,
                    },
                }
            }),
            (0u32..5, 0u32..5).prop_flat_map(move |(r, c)| {
                prop::collection::vec(freq, (r * c) as usize)
                    .prop_map(move |values| Payload::LrSubmatrix { rows: r, cols: c, values })
            }),
            idx.clone().prop_map(|retained| Payload::BroadcastMaf { retained }),
            idx.clone().prop_map(|retained| Payload::BroadcastSafe { retained }),
            prop::collection::vec((any::<u32>(), 0.0f64..1.0, 0.0f64..1.0), 0..10).prop_map(|v| {
                Payload::BroadcastLd {
                    retained: v.iter().map(|t| t.0).collect(),
                    case_freqs: v.iter().map(|t| t.1).collect(),
                    ref_freqs: v.iter().map(|t| t.2).collect(),
                }
            }),
        ]
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(p in payloads()) {
            let bytes = encode_payload(&p);
            prop_assert_eq!(decode_payload(p.kind(), &bytes).unwrap(), p);
        }
    }
}
