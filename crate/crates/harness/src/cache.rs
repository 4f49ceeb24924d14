//! Binary cache of solved desirability tables.
//!
//! Layout, little endian:
//!
//! | bytes | field                                        |
//! |-------|----------------------------------------------|
//! | 8     | magic `LSOCZTAB`                             |
//! | 4     | format version                               |
//! | 32    | SHA-256 of the canonical JSON scenario block |
//! | 4     | subsystem (central agent)                    |
//! | 4     | component task                               |
//! | 8     | state count `n`                              |
//! | 16 n  | records: state index (u64), `log Z` (f64)    |

use std::fs;
use std::path::Path;

use lsoc::discrete::DesirabilityTable;
use lsoc::scenarios::Scenario;
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 8] = b"LSOCZTAB";
pub const CACHE_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 32 + 4 + 4 + 8;

/// Stable hash of a scenario block.
pub fn fingerprint(scenario: &Scenario) -> [u8; 32] {
    let json = serde_json::to_vec(scenario).expect("scenarios serialise to JSON");
    Sha256::digest(&json).into()
}

/// What a cache file must match to be loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheKey {
    pub fingerprint: [u8; 32],
    pub subsystem: u32,
    pub component: u32,
    pub n_states: u64,
}

impl CacheKey {
    fn header(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.fingerprint);
        out.extend_from_slice(&self.subsystem.to_le_bytes());
        out.extend_from_slice(&self.component.to_le_bytes());
        out.extend_from_slice(&self.n_states.to_le_bytes());
        out
    }
}

pub fn encode_table(key: &CacheKey, table: &DesirabilityTable) -> Vec<u8> {
    let mut out = key.header();
    out.reserve(16 * table.len());
    for (i, v) in table.log_z().iter().enumerate() {
        out.extend_from_slice(&(i as u64).to_le_bytes());
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    out
}

pub fn write_table(path: &Path, key: &CacheKey, table: &DesirabilityTable) -> Result<()> {
    if table.len() as u64 != key.n_states {
        return Err(HarnessError::Cache {
            path: path.to_path_buf(),
            reason: format!("table has {} states, key says {}", table.len(), key.n_states),
        });
    }
    fs::write(path, encode_table(key, table)).map_err(|e| HarnessError::io(path, e))
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

/// Decodes a cache image, refusing anything that does not match `key`.
pub fn decode_table(bytes: &[u8], key: &CacheKey) -> std::result::Result<DesirabilityTable, String> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err("not a desirability cache".into());
    }
    let version = u32_at(bytes, 8);
    if version != CACHE_VERSION {
        return Err(format!("format version {version}, expected {CACHE_VERSION}"));
    }
    if bytes[12..44] != key.fingerprint {
        return Err(format!(
            "scenario fingerprint {} does not match {}",
            hex::encode(&bytes[12..44]),
            hex::encode(key.fingerprint)
        ));
    }
    let (subsystem, component, n) = (u32_at(bytes, 44), u32_at(bytes, 48), u64_at(bytes, 52));
    if (subsystem, component, n) != (key.subsystem, key.component, key.n_states) {
        return Err(format!(
            "holds subsystem {subsystem}, component {component}, {n} states; expected {}, {}, {}",
            key.subsystem, key.component, key.n_states
        ));
    }
    let body = &bytes[HEADER_LEN..];
    if body.len() as u64 != 16 * n {
        return Err(format!("expected {} record bytes, found {}", 16 * n, body.len()));
    }
    let mut log_z = Vec::with_capacity(n as usize);
    for (i, rec) in body.chunks_exact(16).enumerate() {
        if u64_at(rec, 0) != i as u64 {
            return Err(format!("record {i} is out of order"));
        }
        log_z.push(f64::from_bits(u64_at(rec, 8)));
    }
    DesirabilityTable::from_log(log_z).map_err(|e| e.to_string())
}

pub fn read_table(path: &Path, key: &CacheKey) -> Result<DesirabilityTable> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode_table(&bytes, key).map_err(|reason| HarnessError::Cache {
        path: path.to_path_buf(),
        reason,
    })
}
