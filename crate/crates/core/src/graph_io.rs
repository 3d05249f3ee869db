//! `VGP1` graph container.
//!
//! Little-endian: magic `VGP1`, `u32` graph count, then per graph
//! `u32 nodes, u32 edges, u8 feature_dim, u8 pseudo_dim, u8 label`,
//! the f32 node-feature block, `u32` (src, dst) pairs and the f32
//! pseudo-coordinate block.

use std::fs;
use std::path::Path;

use crate::container::Reader;
use crate::error::{Error, Result};
use crate::graph::RegionGraph;
use crate::volume::ClassLabel;

pub const MAGIC: &[u8; 4] = b"VGP1";

pub fn encode_graphs(graphs: &[RegionGraph]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(graphs.len() as u32).to_le_bytes());
    for (gi, g) in graphs.iter().enumerate() {
        if g.features.len() != g.nodes * g.feature_dim
            || g.pseudo.len() != g.edges.len() * g.pseudo_dim
        {
            return Err(Error::Structural(format!(
                "graph {gi}: block sizes disagree with header"
            )));
        }
        let small = |v: usize, what: &str| {
            u8::try_from(v).map_err(|_| Error::param(format!("graph {gi}: {what} {v} exceeds u8")))
        };
        out.extend_from_slice(&(g.nodes as u32).to_le_bytes());
        out.extend_from_slice(&(g.edges.len() as u32).to_le_bytes());
        out.push(small(g.feature_dim, "feature dim")?);
        out.push(small(g.pseudo_dim, "pseudo dim")?);
        out.push(g.label.index() as u8);
        for v in &g.features {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &(a, b) in &g.edges {
            out.extend_from_slice(&a.to_le_bytes());
            out.extend_from_slice(&b.to_le_bytes());
        }
        for v in &g.pseudo {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn f32_block(r: &mut Reader, n: usize, what: &str) -> Result<Vec<f32>> {
    let bytes = r.take(
        n.checked_mul(4)
            .ok_or_else(|| Error::format(r.pos as u64, format!("{what} size overflow")))?,
        what,
    )?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn decode_graphs(bytes: &[u8]) -> Result<Vec<RegionGraph>> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(0, "bad magic, expected VGP1"));
    }
    let count = r.u32("graph count")? as usize;
    let mut graphs = Vec::with_capacity(count.min(1 << 16));
    for gi in 0..count {
        let header_at = r.pos as u64;
        let nodes = r.u32(&format!("graph {gi} header"))? as usize;
        let n_edges = r.u32(&format!("graph {gi} header"))? as usize;
        let feature_dim = r.u8(&format!("graph {gi} header"))? as usize;
        let pseudo_dim = r.u8(&format!("graph {gi} header"))? as usize;
        let label_code = r.u8(&format!("graph {gi} header"))? as usize;
        let label = ClassLabel::from_index(label_code).map_err(|_| {
            Error::format(
                header_at,
                format!("graph {gi} header: label {label_code} out of range"),
            )
        })?;
        let features = f32_block(
            &mut r,
            nodes * feature_dim,
            &format!("graph {gi} feature section"),
        )?;
        let edge_at = r.pos as u64;
        let raw = r.take(n_edges * 8, &format!("graph {gi} edge section"))?;
        let edges: Vec<(u32, u32)> = raw
            .chunks_exact(8)
            .map(|c| {
                (
                    u32::from_le_bytes(c[..4].try_into().unwrap()),
                    u32::from_le_bytes(c[4..].try_into().unwrap()),
                )
            })
            .collect();
        if let Some(k) = edges
            .iter()
            .position(|&(a, b)| a as usize >= nodes || b as usize >= nodes)
        {
            return Err(Error::format(
                edge_at + 8 * k as u64,
                format!(
                    "graph {gi} edge section: edge {k} {:?} exceeds {nodes} nodes",
                    edges[k]
                ),
            ));
        }
        let pseudo = f32_block(
            &mut r,
            n_edges * pseudo_dim,
            &format!("graph {gi} pseudo section"),
        )?;
        graphs.push(RegionGraph {
            nodes,
            feature_dim,
            features,
            edges,
            pseudo_dim,
            pseudo,
            label,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::format(
            r.pos as u64,
            "trailing bytes after last graph",
        ));
    }
    Ok(graphs)
}

pub fn write_graphs(graphs: &[RegionGraph], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_graphs(graphs)?)?;
    Ok(())
}

pub fn read_graphs(path: impl AsRef<Path>) -> Result<Vec<RegionGraph>> {
    decode_graphs(&fs::read(path)?)
}
