//! Wire encoding of clauses and bit-level transmission over a binary symmetric channel.
//!
//! A wire message is the UTF-8 canonical text of a clause followed by a CRC-32 (IEEE 802.3:
//! reflected polynomial 0x04C11DB7, initial value and final xor all-ones).

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::infotheory::ChannelSpec;
use crate::kb::{canonicalize, parse_clause, Clause, ParseError};

/// Bits taken by the checksum trailer.
pub const CHECKSUM_BITS: u64 = 32;


#[derive(Clone, Debug, PartialEq, Error)]
pub enum WireError {
    #[error("checksum mismatch")]
    Checksum,
    #[error("payload is not valid UTF-8")]
    Utf8,
    #[error("payload does not parse: {0}")]
    Parse(#[from] ParseError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WireMessage {
    pub payload: Vec<u8>,
    pub checksum: u32,
}

impl WireMessage {
    /// Payload bits plus the checksum trailer.
    pub fn length_bits(&self) -> u64 { self.payload.len() as u64 * 8 + CHECKSUM_BITS }

    /// Whether the checksum matches the payload.
    pub fn verify(&self) -> bool { crc32fast::hash(&self.payload) == self.checksum }

    /// Payload followed by the big-endian checksum.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.payload.clone();
        out.extend_from_slice(&self.checksum.to_be_bytes());
        out
    }

    /// Inverse of [`WireMessage::to_bytes`]. Returns `None` when fewer than four bytes are given.
    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let split = bytes.len().checked_sub(4)?;
        let (payload, trailer) = bytes.split_at(split);
        Some(Self { payload: payload.to_vec(), checksum: u32::from_be_bytes(trailer.try_into().ok()?) })
    }
}

pub fn encode_message(message: &Clause) -> WireMessage {
    let payload = canonicalize(message).into_bytes();
    let checksum = crc32fast::hash(&payload);
    WireMessage { payload, checksum }
}

pub fn decode_message(wire: &WireMessage) -> Result<Clause, WireError> {
    if !wire.verify() {
        return Err(WireError::Checksum);
    }
    let text = std::str::from_utf8(&wire.payload).map_err(|_| WireError::Utf8)?;
    Ok(parse_clause(text)?)
}

/// `L(m)` in bits.
pub fn message_length(message: &Clause) -> u64 { encode_message(message).length_bits() }

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transmission {
    pub received: WireMessage,
    pub crc_ok: bool,
    pub bit_errors: u64,
}

/// Sends every bit (payload and checksum) through the channel, flipping each independently with
/// probability `epsilon`.
pub fn transmit<R: Rng + ?Sized>(wire: &WireMessage, channel: &ChannelSpec, rng: &mut R) -> Transmission {
    let mut bytes = wire.to_bytes();
    let mut bit_errors = 0;
    if channel.epsilon > 0.0 {
        for byte in &mut bytes {
            for bit in 0..8 {
                if rng.gen_bool(channel.epsilon) {
                    *byte ^= 1 << bit;
                    bit_errors += 1;
                }
            }
        }
    }
    let received = WireMessage::from_bytes(&bytes).expect("length preserved");
    let crc_ok = received.verify();
    Transmission { received, crc_ok, bit_errors }
}


#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn clause(s: &str) -> Clause { s.parse().unwrap() }

    #[test]
    fn encoding_lengths() {
        let w = encode_message(&clause("0.3::b."));
        assert_eq!(w.payload, b"0.3::b.");
        assert_eq!(w.length_bits(), 88);
        assert_eq!(message_length(&clause("1.0::a.")), 88);
        assert_eq!(message_length(&clause("a.")), 88);
        let w = encode_message(&clause("0.5::a :- b."));
        assert_eq!(w.payload, b"0.5::a :- b.");
        assert_eq!(w.length_bits(), 128);
    }

    #[test]
    fn crc_parameters() {
        // Standard check value of CRC-32/ISO-HDLC.
        assert_eq!(crc32fast::hash(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn round_trip() {
        for text in ["0.3::b.", "1.0::pass(X) :- mark(X,M), pass_score(S), M>=S.", "0.125::edge(a,-3)."] {
            let c = clause(text);
            assert_eq!(decode_message(&encode_message(&c)).unwrap(), c);
        }
    }

    #[test]
    fn noiseless_and_inverting_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = encode_message(&clause("0.5::a :- b."));
        let t = transmit(&w, &ChannelSpec::noiseless(), &mut rng);
        assert_eq!(t.received, w);
        assert!(t.crc_ok);
        let t = transmit(&w, &ChannelSpec::bsc(1.0).unwrap(), &mut rng);
        assert_eq!(t.bit_errors, w.length_bits());
        assert!(t.received.payload.iter().zip(&w.payload).all(|(r, s)| *r == !*s));
        assert_eq!(t.received.checksum, !w.checksum);
        assert!(!t.crc_ok);
        assert_eq!(decode_message(&t.received), Err(WireError::Checksum));
    }
}
