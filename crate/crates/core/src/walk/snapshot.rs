//! Binary lattice snapshots.
//!
//! Layout, little-endian: magic `LRML1`, clock u64, node count u64, then per node in key
//! order: position 3 x i64, lifetime u64, span trace 3 x i64, phase trace f64, boson count
//! u64, and per boson its label (6 x i64), momentum f64, creation iteration u64 and
//! lifetime u64.

use std::collections::HashMap;
use std::io::{Read, Write};

use super::{Lattice, LatticeBoson, NodeState};
use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 5] = b"LRML1";

fn io_err(e: std::io::Error) -> Error {
    Error::Snapshot(e.to_string())
}

pub fn write_snapshot<W: Write>(lat: &Lattice, mut w: W) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&lat.clock.to_le_bytes());
    buf.extend_from_slice(&(lat.nodes.len() as u64).to_le_bytes());
    for ((x, t), node) in lat.sorted_nodes() {
        for c in x {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        buf.extend_from_slice(&t.to_le_bytes());
        for c in node.span_trace {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        buf.extend_from_slice(&node.phase_trace.to_le_bytes());
        buf.extend_from_slice(&(node.bosons.len() as u64).to_le_bytes());
        for ((a, b), lb) in &node.bosons {
            for c in a.iter().chain(b) {
                buf.extend_from_slice(&c.to_le_bytes());
            }
            buf.extend_from_slice(&lb.momentum.to_le_bytes());
            buf.extend_from_slice(&lb.created_at.to_le_bytes());
            buf.extend_from_slice(&lb.lifetime.to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(io_err)
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes8(&mut self) -> Result<[u8; 8]> {
        let mut b = [0u8; 8];
        self.inner.read_exact(&mut b).map_err(io_err)?;
        Ok(b)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes8()?))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.bytes8()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes8()?))
    }
    fn ivec(&mut self) -> Result<[i64; 3]> {
        Ok([self.i64()?, self.i64()?, self.i64()?])
    }
}

pub fn read_snapshot<R: Read>(r: R) -> Result<Lattice> {
    let mut r = Reader { inner: r };
    let mut magic = [0u8; 5];
    r.inner.read_exact(&mut magic).map_err(io_err)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Snapshot("bad magic header".into()));
    }
    let clock = r.u64()?;
    let count = r.u64()?;
    let mut nodes = HashMap::new();
    for _ in 0..count {
        let x = r.ivec()?;
        let t = r.u64()?;
        let mut node = NodeState {
            span_trace: r.ivec()?,
            phase_trace: r.f64()?,
            ..NodeState::default()
        };
        let bosons = r.u64()?;
        for _ in 0..bosons {
            let label = (r.ivec()?, r.ivec()?);
            let lb = LatticeBoson {
                momentum: r.f64()?,
                created_at: r.u64()?,
                lifetime: r.u64()?,
            };
            node.bosons.insert(label, lb);
        }
        if nodes.insert((x, t), node).is_some() {
            return Err(Error::Snapshot(format!("duplicate node {x:?} at lifetime {t}")));
        }
    }
    let mut rest = [0u8; 1];
    if r.inner.read(&mut rest).map_err(io_err)? != 0 {
        return Err(Error::Snapshot("trailing bytes".into()));
    }
    Ok(Lattice::from_parts(nodes, clock))
}
