//! Flat binary parameter container.
//!
//! Layout: 4-byte magic `CMPC`, u32 format version, u32 entry count, then
//! per entry: u32 name length + UTF-8 name, u32 rank + u64 dims, and the
//! values as little-endian f64. All integers little-endian.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

const MAGIC: &[u8; 4] = b"CMPC";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

/// A named parameter as stored in a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Writes entries sorted by name so identical parameter sets serialize to
/// identical bytes.
pub fn write_checkpoint(
    path: &Path,
    entries: &BTreeMap<String, ParamEntry>,
) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, entry) in entries {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(entry.shape.len() as u32).to_le_bytes())?;
        for &d in &entry.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in &entry.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<BTreeMap<String, ParamEntry>, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let count = read_u32(&mut r)? as usize;
    let mut entries = BTreeMap::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| CheckpointError::Corrupt("non-UTF-8 parameter name".into()))?;
        let rank = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            shape.push(u64::from_le_bytes(buf) as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        if entries.insert(name.clone(), ParamEntry { shape, data }).is_some() {
            return Err(CheckpointError::Corrupt(format!(
                "duplicate parameter name {name:?}"
            )));
        }
    }
    Ok(entries)
}

fn read_u32(r: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn round_trips_and_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let mut entries = BTreeMap::new();
        entries.insert(
            "head.weight".to_string(),
            ParamEntry {
                shape: vec![2, 3],
                data: vec![1.0, -0.5, 3.25, 0.0, f64::MIN_POSITIVE, 1e300],
            },
        );
        entries.insert(
            "head.bias".to_string(),
            ParamEntry {
                shape: vec![3],
                data: vec![0.1, 0.2, 0.3],
            },
        );
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        write_checkpoint(&p1, &entries).unwrap();
        write_checkpoint(&p2, &entries).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let back = read_checkpoint(&p1).unwrap();
        assert_eq!(back, entries);
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.ckpt");
        std::fs::write(&p, b"not a checkpoint").unwrap();
        assert!(matches!(read_checkpoint(&p), Err(CheckpointError::BadMagic)));
    }
}
