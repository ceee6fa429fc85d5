#![allow(dead_code)]

use rand::Rng;
use thetaprime_core::format::{read_header, VERSION_MAJOR};
use thetaprime_core::{Error, FormatError};

/// Kind of damage applied to an encoded dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Damage {
    PayloadBit,
    PayloadBytes,
    MajorVersion,
    HeaderByte,
    Truncation,
}

impl Damage {
    pub const ALL: [Damage; 5] = [
        Damage::PayloadBit,
        Damage::PayloadBytes,
        Damage::MajorVersion,
        Damage::HeaderByte,
        Damage::Truncation,
    ];
}

/// Applies one random instance of `damage` to a copy of `bytes`.
pub fn corrupt(bytes: &[u8], damage: Damage, rng: &mut impl Rng) -> Vec<u8> {
    let (_, payload_start) = read_header(bytes).expect("pristine input");
    let mut out = bytes.to_vec();
    match damage {
        Damage::PayloadBit => {
            let i = rng.gen_range(payload_start..out.len());
            out[i] ^= 1 << rng.gen_range(0..8);
        }
        Damage::PayloadBytes => {
            let n = rng.gen_range(1..=16);
            let start = rng.gen_range(payload_start..out.len() - n);
            for b in &mut out[start..start + n] {
                *b = b.wrapping_add(rng.gen_range(1..=255));
            }
        }
        Damage::MajorVersion => {
            let mut v = VERSION_MAJOR;
            while v == VERSION_MAJOR {
                v = rng.gen();
            }
            out[8..10].copy_from_slice(&v.to_le_bytes());
        }
        Damage::HeaderByte => {
            let i = rng.gen_range(0..payload_start);
            out[i] = out[i].wrapping_add(rng.gen_range(1..=255));
        }
        Damage::Truncation => {
            out.truncate(rng.gen_range(0..bytes.len()));
        }
    }
    out
}

/// Whether the reader's verdict is the one `damage` must produce.
pub fn detected(damage: Damage, result: &Result<thetaprime_core::Dataset, Error>) -> bool {
    match (damage, result) {
        (_, Ok(_)) => false,
        (Damage::PayloadBit | Damage::PayloadBytes, Err(e)) => {
            matches!(e, Error::Format(FormatError::InstanceChecksum { .. }))
        }
        (Damage::MajorVersion, Err(e)) => {
            matches!(e, Error::Format(FormatError::UnsupportedVersion { .. }))
        }
        (Damage::HeaderByte | Damage::Truncation, Err(_)) => true,
    }
}
