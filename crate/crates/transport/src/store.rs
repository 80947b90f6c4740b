//! Append-only share log.
//!
//! File layout (all integers big-endian):
//!
//! ```text
//! header   "LMSTORE\0" | version u32 | role u32 | modulus u128
//! record   len u32 | crc32(payload) u32 | payload
//! payload  scheme u8 | timestamp_ms u64 | label_len u32 | label | share
//! ```
//!
//! On open the log is replayed up to the first short or corrupt record and
//! truncated there, so a crash mid-append loses at most the unacknowledged
//! record.

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use labelmask_core::Label;

use crate::error::{NetError, Result};
use crate::wire::Scheme;

pub const DATA_DIR_ENV: &str = "LABELMASK_DATA_DIR";
pub const LOG_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"LMSTORE\0";
const HEADER_LEN: usize = 8 + 4 + 4 + 16;
const RECORD_HEADER_LEN: usize = 8;

/// `$LABELMASK_DATA_DIR`, or `./labelmask-data` when unset.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("labelmask-data"))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoreRecord {
    pub label: Label,
    pub scheme: Scheme,
    pub role: usize,
    pub share: Vec<u8>,
    pub timestamp_ms: u64,
}

impl StoreRecord {
    pub fn new(label: Label, scheme: Scheme, role: usize, share: Vec<u8>) -> Self {
        let timestamp_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        StoreRecord {
            label,
            scheme,
            role,
            share,
            timestamp_ms,
        }
    }

    fn encode(&self) -> Vec<u8> {
        let label = self.label.as_bytes();
        let mut payload = Vec::with_capacity(13 + label.len() + self.share.len());
        payload.push(self.scheme.tag());
        payload.extend_from_slice(&self.timestamp_ms.to_be_bytes());
        payload.extend_from_slice(&(label.len() as u32).to_be_bytes());
        payload.extend_from_slice(label);
        payload.extend_from_slice(&self.share);

        let mut out = Vec::with_capacity(RECORD_HEADER_LEN + payload.len());
        out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&crc32fast::hash(&payload).to_be_bytes());
        out.extend_from_slice(&payload);
        out
    }

    fn decode(payload: &[u8], role: usize) -> Option<StoreRecord> {
        let scheme = Scheme::from_tag(*payload.first()?)?;
        let timestamp_ms = u64::from_be_bytes(payload.get(1..9)?.try_into().ok()?);
        let label_len = u32::from_be_bytes(payload.get(9..13)?.try_into().ok()?) as usize;
        let label = Label::new(payload.get(13..13 + label_len)?.to_vec()).ok()?;
        let share = payload.get(13 + label_len..)?.to_vec();
        Some(StoreRecord {
            label,
            scheme,
            role,
            share,
            timestamp_ms,
        })
    }
}

/// What replay found.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Recovery {
    pub records: usize,
    /// Bytes cut from the tail because they did not form a whole, valid record.
    pub truncated_bytes: u64,
}

#[derive(Debug)]
pub struct ShareLog {
    file: File,
    path: PathBuf,
    role: usize,
    poisoned: bool,
}

impl ShareLog {
    pub fn file_name(role: usize) -> String {
        format!("role-{role}.lmlog")
    }

    /// Opens (creating if needed) the log for `role` in `dir` and replays it.
    pub fn open(dir: &Path, role: usize, modulus: u128) -> Result<(ShareLog, Vec<StoreRecord>, Recovery)> {
        fs::create_dir_all(dir)?;
        let path = dir.join(Self::file_name(role));
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;

        let mut recovery = Recovery::default();
        if bytes.len() < HEADER_LEN {
            // empty, or a crash before the header was complete
            recovery.truncated_bytes = bytes.len() as u64;
            file.set_len(0)?;
            file.seek(SeekFrom::Start(0))?;
            file.write_all(&header(role, modulus))?;
            file.sync_all()?;
            let log = ShareLog {
                file,
                path,
                role,
                poisoned: false,
            };
            return Ok((log, Vec::new(), recovery));
        }
        check_header(&bytes[..HEADER_LEN], role, modulus, &path)?;

        let mut records = Vec::new();
        let mut pos = HEADER_LEN;
        while let Some((rec, next)) = next_record(&bytes, pos, role) {
            records.push(rec);
            pos = next;
        }
        if pos < bytes.len() {
            recovery.truncated_bytes = (bytes.len() - pos) as u64;
            file.set_len(pos as u64)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        recovery.records = records.len();
        let log = ShareLog {
            file,
            path,
            role,
            poisoned: false,
        };
        Ok((log, records, recovery))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends and syncs one record; returns once it is on disk.
    pub fn append(&mut self, rec: &StoreRecord) -> Result<()> {
        if self.poisoned {
            return Err(NetError::Store("log unusable after an earlier write failure".into()));
        }
        if rec.role != self.role {
            return Err(NetError::Store(format!("record for role {} in log of role {}", rec.role, self.role)));
        }
        let res = self
            .file
            .write_all(&rec.encode())
            .and_then(|()| self.file.sync_data());
        if let Err(e) = res {
            self.poisoned = true;
            return Err(e.into());
        }
        Ok(())
    }
}

fn header(role: usize, modulus: u128) -> Vec<u8> {
    let mut h = Vec::with_capacity(HEADER_LEN);
    h.extend_from_slice(MAGIC);
    h.extend_from_slice(&LOG_VERSION.to_be_bytes());
    h.extend_from_slice(&(role as u32).to_be_bytes());
    h.extend_from_slice(&modulus.to_be_bytes());
    h
}

fn check_header(h: &[u8], role: usize, modulus: u128, path: &Path) -> Result<()> {
    let bad = |what: String| Err(NetError::Store(format!("{}: {what}", path.display())));
    if &h[..8] != MAGIC {
        return bad("not a share log".into());
    }
    let version = u32::from_be_bytes(h[8..12].try_into().unwrap());
    if version != LOG_VERSION {
        return bad(format!("log version {version}, expected {LOG_VERSION}"));
    }
    let r = u32::from_be_bytes(h[12..16].try_into().unwrap()) as usize;
    if r != role {
        return bad(format!("log belongs to role {r}, not {role}"));
    }
    let p = u128::from_be_bytes(h[16..32].try_into().unwrap());
    if p != modulus {
        return bad(format!("log uses modulus {p:#x}, not {modulus:#x}"));
    }
    Ok(())
}

fn next_record(bytes: &[u8], pos: usize, role: usize) -> Option<(StoreRecord, usize)> {
    let len = u32::from_be_bytes(bytes.get(pos..pos + 4)?.try_into().ok()?) as usize;
    let crc = u32::from_be_bytes(bytes.get(pos + 4..pos + 8)?.try_into().ok()?);
    let start = pos + RECORD_HEADER_LEN;
    let payload = bytes.get(start..start.checked_add(len)?)?;
    if crc32fast::hash(payload) != crc {
        return None;
    }
    Some((StoreRecord::decode(payload, role)?, start + len))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(label: &str, share: &[u8]) -> StoreRecord {
        StoreRecord::new(Label::new(label).unwrap(), Scheme::TwoServer, 1, share.to_vec())
    }

    #[test]
    fn replay_after_reopen() {
        let dir = tempfile::tempdir().unwrap();
        {
            let (mut log, recs, _) = ShareLog::open(dir.path(), 1, 97).unwrap();
            assert!(recs.is_empty());
            log.append(&rec("a", &[1, 2, 3])).unwrap();
            log.append(&rec("b", &[4])).unwrap();
        }
        let (_, recs, rec_info) = ShareLog::open(dir.path(), 1, 97).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].share, vec![1, 2, 3]);
        assert_eq!(recs[1].label.as_bytes(), b"b");
        assert_eq!(rec_info.truncated_bytes, 0);
    }

    #[test]
    fn torn_tail_is_cut_at_every_offset() {
        let dir = tempfile::tempdir().unwrap();
        {
            let (mut log, _, _) = ShareLog::open(dir.path(), 1, 97).unwrap();
            log.append(&rec("a", &[1; 10])).unwrap();
            log.append(&rec("b", &[2; 10])).unwrap();
        }
        let path = dir.path().join(ShareLog::file_name(1));
        let full = fs::read(&path).unwrap();
        let one_record = HEADER_LEN + (full.len() - HEADER_LEN) / 2;
        for cut in HEADER_LEN..full.len() {
            fs::write(&path, &full[..cut]).unwrap();
            let (_, recs, info) = ShareLog::open(dir.path(), 1, 97).unwrap();
            let want = if cut >= one_record { 1 } else { 0 };
            assert_eq!(recs.len(), want, "cut {cut}");
            assert_eq!(fs::metadata(&path).unwrap().len() as usize, cut - info.truncated_bytes as usize);
        }
    }

    #[test]
    fn corrupt_record_is_dropped_with_its_suffix() {
        let dir = tempfile::tempdir().unwrap();
        {
            let (mut log, _, _) = ShareLog::open(dir.path(), 1, 97).unwrap();
            log.append(&rec("a", &[1; 10])).unwrap();
            log.append(&rec("b", &[2; 10])).unwrap();
        }
        let path = dir.path().join(ShareLog::file_name(1));
        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x40;
        fs::write(&path, &bytes).unwrap();
        let (_, recs, info) = ShareLog::open(dir.path(), 1, 97).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(info.truncated_bytes > 0);
    }

    #[test]
    fn header_mismatch_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        drop(ShareLog::open(dir.path(), 1, 97).unwrap());
        fs::copy(
            dir.path().join(ShareLog::file_name(1)),
            dir.path().join(ShareLog::file_name(2)),
        )
        .unwrap();
        assert!(ShareLog::open(dir.path(), 2, 97).is_err());
        assert!(ShareLog::open(dir.path(), 1, 101).is_err());
    }
}
