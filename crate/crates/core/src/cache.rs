//! On-disk cache of sector blocks.
//!
//! File layout (little endian): magic `SVXB`, format version u32, rows u32, cols u32,
//! key digest (32 bytes), then rows·cols (re, im) f64 pairs in row-major order.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

pub const MAGIC: &[u8; 4] = b"SVXB";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 32;

/// Identifies one assembled block: chain, root, operator kind, arguments and sector.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockKey {
    pub sites: usize,
    pub order: u32,
    pub root_index: u32,
    pub operator: String,
    pub args: Vec<C64>,
    pub n_down: usize,
}

impl BlockKey {
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(FORMAT_VERSION.to_le_bytes());
        h.update((self.sites as u64).to_le_bytes());
        h.update(self.order.to_le_bytes());
        h.update(self.root_index.to_le_bytes());
        h.update((self.operator.len() as u64).to_le_bytes());
        h.update(self.operator.as_bytes());
        for a in &self.args {
            h.update(a.re.to_bits().to_le_bytes());
            h.update(a.im.to_bits().to_le_bytes());
        }
        h.update((self.n_down as u64).to_le_bytes());
        let out = h.finalize();
        let mut d = [0u8; 32];
        d.copy_from_slice(&out);
        d
    }

    fn file_name(&self) -> String {
        let d = self.digest();
        let hex: String = d.iter().map(|b| format!("{b:02x}")).collect();
        format!("{hex}.svxb")
    }
}

#[derive(Debug, Clone)]
pub struct SectorCache {
    dir: PathBuf,
}

pub fn encode(key: &BlockKey, m: &DMatrix<C64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    out.extend_from_slice(&key.digest());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.extend_from_slice(&m[(r, c)].re.to_le_bytes());
            out.extend_from_slice(&m[(r, c)].im.to_le_bytes());
        }
    }
    out
}

/// Parse a block; `expect` (if given) must match the stored key digest.
pub fn decode(bytes: &[u8], expect: Option<&BlockKey>) -> Result<DMatrix<C64>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != FORMAT_VERSION {
        return Err(Error::Cache(format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    let (rows, cols) = (u32_at(8) as usize, u32_at(12) as usize);
    if let Some(k) = expect {
        if bytes[16..48] != k.digest() {
            return Err(Error::Cache("key digest mismatch".into()));
        }
    }
    if bytes.len() != HEADER_LEN + 16 * rows * cols {
        return Err(Error::Cache("truncated payload".into()));
    }
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    Ok(DMatrix::from_fn(rows, cols, |r, c| {
        let o = HEADER_LEN + 16 * (r * cols + c);
        C64::new(f64_at(o), f64_at(o + 8))
    }))
}

/// Outcome of a garbage-collection sweep.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GcReport {
    pub kept: usize,
    pub removed: usize,
    pub bytes_freed: u64,
}

impl SectorCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(SectorCache { dir: dir.as_ref().to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn load(&self, key: &BlockKey) -> Option<DMatrix<C64>> {
        let bytes = fs::read(self.dir.join(key.file_name())).ok()?;
        decode(&bytes, Some(key)).ok()
    }

    pub fn store(&self, key: &BlockKey, m: &DMatrix<C64>) -> Result<()> {
        let path = self.dir.join(key.file_name());
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, encode(key, m))?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn get_or_build(
        &self,
        key: &BlockKey,
        build: impl FnOnce() -> Result<DMatrix<C64>>,
    ) -> Result<DMatrix<C64>> {
        if let Some(m) = self.load(key) {
            return Ok(m);
        }
        let m = build()?;
        self.store(key, &m)?;
        Ok(m)
    }

    /// Remove unreadable or outdated entries; with `purge_all` remove every entry.
    pub fn gc(&self, purge_all: bool) -> Result<GcReport> {
        let mut rep = GcReport::default();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            let is_block = path.extension().is_some_and(|e| e == "svxb");
            let is_tmp = path.extension().is_some_and(|e| e.to_string_lossy().starts_with("tmp"));
            if !is_block && !is_tmp {
                continue;
            }
            let bytes = fs::read(&path)?;
            let valid = is_block && decode(&bytes, None).is_ok();
            if purge_all || !valid {
                fs::remove_file(&path)?;
                rep.removed += 1;
                rep.bytes_freed += bytes.len() as u64;
            } else {
                rep.kept += 1;
            }
        }
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> BlockKey {
        BlockKey {
            sites: 4,
            order: 5,
            root_index: 1,
            operator: "Q".into(),
            args: vec![C64::new(0.1, 0.2)],
            n_down: 2,
        }
    }

    #[test]
    fn roundtrip_and_gc() {
        let dir = std::env::temp_dir().join(format!("svxb-test-{}", std::process::id()));
        let cache = SectorCache::open(&dir).unwrap();
        let m = DMatrix::from_fn(3, 2, |r, c| C64::new(r as f64, -(c as f64) * 0.5));
        cache.store(&key(), &m).unwrap();
        assert_eq!(cache.load(&key()).unwrap(), m);
        let mut other = key();
        other.n_down = 1;
        assert!(cache.load(&other).is_none());
        fs::write(dir.join("junk.svxb"), b"SVXB\x09\x00\x00\x00").unwrap();
        let rep = cache.gc(false).unwrap();
        assert_eq!((rep.kept, rep.removed), (1, 1));
        let rep = cache.gc(true).unwrap();
        assert_eq!(rep.removed, 1);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn header_layout() {
        let m = DMatrix::from_element(1, 1, C64::new(2.0, -1.0));
        let b = encode(&key(), &m);
        assert_eq!(&b[..4], MAGIC);
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), FORMAT_VERSION);
        assert_eq!(b.len(), HEADER_LEN + 16);
        assert!(decode(&b[..b.len() - 1], None).is_err());
    }
}
