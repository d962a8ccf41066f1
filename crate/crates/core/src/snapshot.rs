//! Versioned binary snapshots of a solved field.
//!
//! Layout: `b"DLEVSNAP"`, format version (`u32` LE), metadata length
//! (`u64` LE), JSON metadata, value count (`u64` LE), values (`f64` LE).

use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid2D, GridOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"DLEVSNAP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub domain_id: String,
    pub family: String,
    pub param: f64,
    pub domain: ConvexDomain,
    pub delta: f64,
    pub grid: GridOptions,
    pub lambda: f64,
    /// Eigenvalue on the grid of spacing `2 delta`, when it was solved.
    pub lambda_coarse: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub tool_version: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub meta: SnapshotMeta,
    pub u: Vec<f64>,
}

impl Snapshot {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta)?;
        let mut out = Vec::with_capacity(28 + meta.len() + 8 * self.u.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(self.u.len() as u64).to_le_bytes());
        for v in &self.u {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(|| Error::Snapshot("truncated".into()))?;
            pos += n;
            Ok(s)
        };
        if take(8)? != MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Snapshot(format!("unsupported format version {version}")));
        }
        let meta_len = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let meta: SnapshotMeta = serde_json::from_slice(take(meta_len)?)?;
        let count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let raw = take(count.checked_mul(8).ok_or_else(|| Error::Snapshot("bad count".into()))?)?;
        let u = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if pos != bytes.len() {
            return Err(Error::Snapshot("trailing bytes".into()));
        }
        Ok(Self { meta, u })
    }

    /// Writes the snapshot and returns the hex SHA-256 of the file contents.
    pub fn write(&self, path: &Path) -> Result<String> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, &bytes)?;
        Ok(sha256_hex(&bytes))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Rebuilds the grid the field lives on.
    pub fn grid(&self) -> Result<Grid2D> {
        let g = build_grid(&self.meta.domain, self.meta.delta, self.meta.grid)?;
        if g.len() != self.u.len() {
            return Err(Error::Snapshot(format!("{} values for a grid of {} nodes", self.u.len(), g.len())));
        }
        Ok(g)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BoundaryFunctionPair, Curve};

    fn sample() -> Snapshot {
        let d = ConvexDomain::from_normalized(
            BoundaryFunctionPair::new(0.0, 2.0, Curve::Const { value: 0.0 }, Curve::Const { value: 1.0 }).unwrap(),
        );
        let g = build_grid(&d, 1.0 / 32.0, GridOptions::default()).unwrap();
        Snapshot {
            meta: SnapshotMeta {
                domain_id: "rectangle_2".into(),
                family: "rectangle".into(),
                param: 2.0,
                domain: d,
                delta: 1.0 / 32.0,
                grid: GridOptions::default(),
                lambda: 12.3,
                lambda_coarse: None,
                iterations: 3,
                residual: 1e-12,
                tool_version: "0".into(),
            },
            u: (0..g.len()).map(|k| k as f64 * 0.1).collect(),
        }
    }

    #[test]
    fn round_trip_and_hash() {
        let s = sample();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.snap");
        let h = s.write(&p).unwrap();
        assert_eq!(h, sha256_file(&p).unwrap());
        let back = Snapshot::read(&p).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.grid().unwrap().len(), s.u.len());
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let bytes = sample().to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Snapshot::from_bytes(&bad), Err(Error::Snapshot(_))));
        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert!(matches!(Snapshot::from_bytes(&v2), Err(Error::Snapshot(_))));
        assert!(matches!(Snapshot::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Snapshot(_))));
    }
}
