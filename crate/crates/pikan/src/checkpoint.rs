//! Versioned binary checkpoints: the full run configuration (TOML text)
//! plus the trained parameter vector, integrity-checked. Round-trips are
//! bit-exact.

use crate::error::{PikanError, Result};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"PIKANCKP";
const VERSION: u32 = 1;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Serializes config text and parameters:
/// magic, version, config length + bytes, parameter count + little-endian
/// f64 values, FNV-1a checksum of everything before it.
pub fn encode(config_toml: &str, theta: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + config_toml.len() + 8 * theta.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(config_toml.len() as u64).to_le_bytes());
    out.extend_from_slice(config_toml.as_bytes());
    out.extend_from_slice(&(theta.len() as u64).to_le_bytes());
    for &t in theta {
        out.extend_from_slice(&t.to_le_bytes());
    }
    let checksum = fnv1a(&out);
    out.extend_from_slice(&checksum.to_le_bytes());
    out
}

pub fn decode(bytes: &[u8]) -> Result<(String, Vec<f64>)> {
    let err = |msg: &str| PikanError::Checkpoint(msg.to_string());
    if bytes.len() < MAGIC.len() + 4 + 8 + 8 + 8 {
        return Err(err("truncated checkpoint"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if fnv1a(body) != stored {
        return Err(err("checksum mismatch: file corrupted"));
    }
    let mut cur = body;
    let mut take = |n: usize| -> Result<&[u8]> {
        if cur.len() < n {
            return Err(err("truncated checkpoint"));
        }
        let (head, rest) = cur.split_at(n);
        cur = rest;
        Ok(head)
    };
    if take(8)? != MAGIC {
        return Err(err("not a checkpoint file (bad magic)"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(PikanError::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let config_len = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let config = String::from_utf8(take(config_len)?.to_vec())
        .map_err(|_| err("embedded config is not valid UTF-8"))?;
    let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    if cur.len() != 8 * n {
        return Err(err("parameter payload length mismatch"));
    }
    let theta = cur
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((config, theta))
}

pub fn save(path: &Path, config_toml: &str, theta: &[f64]) -> Result<()> {
    let bytes = encode(config_toml, theta);
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(String, Vec<f64>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
