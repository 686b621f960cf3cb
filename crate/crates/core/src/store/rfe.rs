//! The `.rfe` binary embedding format.
//!
//! Layout, all little-endian:
//!
//! | offset | size        | field                    |
//! |--------|-------------|--------------------------|
//! | 0      | 4           | magic `RFE1`             |
//! | 4      | 4           | `u32` version (1)        |
//! | 8      | 4           | `u32` dim                |
//! | 12     | 8           | `u64` count              |
//! | 20     | count·dim·4 | `f32` rows, row-major    |
//!
//! The file carries no ids. Row `i` belongs to line `i` of the companion
//! manifest; a store loaded on its own gets its row numbers as ids.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::store::FeatureStore;

pub const MAGIC: [u8; 4] = *b"RFE1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 20;

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<FeatureStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_embeddings<R: Read>(mut reader: R) -> Result<FeatureStore> {
    let mut header = [0u8; HEADER_LEN as usize];
    let got = read_full(&mut reader, &mut header)?;
    if got < 4 || header[..4] != MAGIC {
        let mut found = [0u8; 4];
        found[..got.min(4)].copy_from_slice(&header[..got.min(4)]);
        return Err(Error::BadMagic { found });
    }
    if got < header.len() {
        return Err(Error::DimMismatch {
            what: "header bytes",
            expected: HEADER_LEN,
            found: got as u64,
        });
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as u64;
    let count = u64::from_le_bytes(header[12..20].try_into().unwrap());

    let expected = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or(Error::DimMismatch {
            what: "payload bytes",
            expected: u64::MAX,
            found: 0,
        })?;
    let mut payload = Vec::new();
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::io("<reader>", e))?;
    if payload.len() as u64 != expected {
        return Err(Error::DimMismatch {
            what: "payload bytes",
            expected,
            found: payload.len() as u64,
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let ids = (0..count).map(|i| i.to_string()).collect();
    FeatureStore::new(dim as usize, ids, data)
}

pub fn write_embeddings(store: &FeatureStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_embeddings_to(store, &mut writer)
        .and_then(|_| writer.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_embeddings_to<W: Write>(store: &FeatureStore, writer: &mut W) -> std::io::Result<()> {
    writer.write_all(&MAGIC)?;
    writer.write_all(&VERSION.to_le_bytes())?;
    writer.write_all(&(store.dim() as u32).to_le_bytes())?;
    writer.write_all(&(store.len() as u64).to_le_bytes())?;
    for x in store.as_slice() {
        writer.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::io("<reader>", e)),
        }
    }
    Ok(filled)
}
