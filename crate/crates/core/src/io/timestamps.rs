//! Binary timestamp files.
//!
//! Layout, little-endian:
//!
//! | field | type |
//! |---|---|
//! | magic `PHTS` | 4 bytes |
//! | version | u16 |
//! | channel count `n` | u8 |
//! | duration | u64, ps |
//! | events per channel | `n` × u64 |
//! | config hash | 32 bytes |
//! | seed | u64 |
//!
//! followed by one record per event, `(channel: u8, time: u64 ps)`, ordered
//! by time and then channel.

use std::path::Path;

use crate::error::{Error, Result};
use crate::montecarlo::{Provenance, TimestampStream};

pub const MAGIC: [u8; 4] = *b"PHTS";
pub const FORMAT_VERSION: u16 = 1;
pub const RECORD_BYTES: usize = 9;

const FIXED_HEADER: usize = 4 + 2 + 1 + 8;

fn header_len(n_channels: usize) -> usize {
    FIXED_HEADER + 8 * n_channels + 32 + 8
}

pub fn encode_timestamps(stream: &TimestampStream) -> Result<Vec<u8>> {
    stream.validate()?;
    let n = stream.n_channels();
    let n_u8 = u8::try_from(n).map_err(|_| Error::Format(format!("{n} channels exceed the format limit of 255")))?;
    let total = stream.total_events() as usize;
    let mut out = Vec::with_capacity(header_len(n) + RECORD_BYTES * total);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(n_u8);
    out.extend_from_slice(&stream.duration_ps.to_le_bytes());
    for ch in &stream.channels {
        out.extend_from_slice(&(ch.len() as u64).to_le_bytes());
    }
    out.extend_from_slice(&stream.provenance.config_hash);
    out.extend_from_slice(&stream.provenance.seed.to_le_bytes());

    let mut records: Vec<(u64, u8)> = Vec::with_capacity(total);
    for (id, ch) in stream.channels.iter().enumerate() {
        records.extend(ch.iter().map(|&t| (t, id as u8)));
    }
    records.sort_unstable();
    for (t, ch) in records {
        out.push(ch);
        out.extend_from_slice(&t.to_le_bytes());
    }
    Ok(out)
}

pub fn write_timestamps(stream: &TimestampStream, path: &Path) -> Result<()> {
    super::write_file(path, &encode_timestamps(stream)?)
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode_timestamps(bytes: &[u8]) -> Result<TimestampStream> {
    if bytes.len() < 4 {
        return Err(Error::Format(format!("file of {} bytes has no header", bytes.len())));
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    if bytes.len() < FIXED_HEADER {
        return Err(Error::Format("truncated header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let n = bytes[6] as usize;
    let duration_ps = u64_at(bytes, 7);
    let hlen = header_len(n);
    if bytes.len() < hlen {
        return Err(Error::Format("truncated header".into()));
    }
    let counts: Vec<u64> = (0..n).map(|i| u64_at(bytes, FIXED_HEADER + 8 * i)).collect();
    let mut config_hash = [0u8; 32];
    config_hash.copy_from_slice(&bytes[FIXED_HEADER + 8 * n..FIXED_HEADER + 8 * n + 32]);
    let seed = u64_at(bytes, hlen - 8);

    let expected: u64 = counts.iter().sum();
    let body = &bytes[hlen..];
    let found = (body.len() / RECORD_BYTES) as u64;
    if found < expected {
        return Err(Error::Truncated { expected, found });
    }
    if body.len() as u64 != expected * RECORD_BYTES as u64 {
        return Err(Error::Format(format!(
            "{} record bytes present but the header declares {expected} records",
            body.len()
        )));
    }

    let mut channels: Vec<Vec<u64>> = counts.iter().map(|&c| Vec::with_capacity(c as usize)).collect();
    let mut prev: Option<(u64, u8)> = None;
    for (i, rec) in body.chunks_exact(RECORD_BYTES).enumerate() {
        let ch = rec[0];
        let t = u64_at(rec, 1);
        let list = channels
            .get_mut(ch as usize)
            .ok_or_else(|| Error::Format(format!("record {i} names channel {ch} of {n}")))?;
        if prev.is_some_and(|p| (t, ch) <= p) {
            return Err(Error::NonMonotonic {
                channel: ch,
                index: i as u64,
            });
        }
        if t > duration_ps {
            return Err(Error::Format(format!(
                "record {i} at {t} ps lies beyond the {duration_ps} ps acquisition"
            )));
        }
        list.push(t);
        prev = Some((t, ch));
    }
    for (id, (ch, &c)) in channels.iter().zip(&counts).enumerate() {
        if ch.len() as u64 != c {
            return Err(Error::Format(format!(
                "channel {id} has {} records but the header declares {c}",
                ch.len()
            )));
        }
    }
    let stream = TimestampStream {
        channels,
        duration_ps,
        provenance: Provenance::new(config_hash, seed),
    };
    stream.validate()?;
    Ok(stream)
}

pub fn read_timestamps(path: &Path) -> Result<TimestampStream> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_timestamps(&bytes)
}
