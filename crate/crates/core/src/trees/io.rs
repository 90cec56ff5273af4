//! Tree files: the codebook container (reserved word naming the tree kind)
//! followed by a node count and pre-order node records.
//!
//! Record: kind `u8`, split coordinate `u16`, pivot value `f64`, entry `u32`,
//! all little-endian. GLA splits append both centroids (`4N` `f64`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::codebook::{read_codebook_with_reserved, read_f64, read_u32, write_entries, write_header, Codebook};
use crate::corelin::embed_into;
use crate::error::{Error, Result};

use super::{GlaNode, GlaTree, KdNode, KdTree, NearestNeighborTree};

const KIND_KD: u32 = 1;
const KIND_GLA: u32 = 2;

const NODE_LEAF: u8 = 0;
const NODE_KD: u8 = 1;
const NODE_GLA: u8 = 2;
const NODE_GLA_HALVED: u8 = 3;

/// Either tree kind, as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub enum Tree {
    Kd(KdTree),
    Gla(GlaTree),
}

impl Tree {
    pub fn as_nearest_neighbor(&self) -> &dyn NearestNeighborTree {
        match self {
            Tree::Kd(t) => t,
            Tree::Gla(t) => t,
        }
    }

    /// Codebook the tree indexes, in entry order.
    pub fn codebook(&self) -> Codebook {
        let (dim, points) = match self {
            Tree::Kd(t) => (t.dim(), (0..1u32 << t.bits()).map(|e| t.point(e)).collect::<Vec<_>>()),
            Tree::Gla(t) => (t.dim(), (0..1u32 << t.bits()).map(|e| t.point(e)).collect::<Vec<_>>()),
        };
        let entries: Vec<_> = points
            .into_iter()
            .map(|p| crate::corelin::UnitVector::from_vec_unchecked(crate::corelin::unembed(p)))
            .collect();
        Codebook::from_entries(dim, &entries).expect("tree holds a valid codebook")
    }
}

fn record<W: Write>(w: &mut W, kind: u8, dim: u16, value: f64, entry: u32) -> Result<()> {
    w.write_all(&[kind])?;
    w.write_all(&dim.to_le_bytes())?;
    w.write_all(&value.to_le_bytes())?;
    w.write_all(&entry.to_le_bytes())?;
    Ok(())
}

pub fn write_tree<W: Write>(tree: &Tree, mut w: W) -> Result<()> {
    let cb = tree.codebook();
    match tree {
        Tree::Kd(t) => {
            write_header(&mut w, &cb, KIND_KD)?;
            write_entries(&mut w, &cb)?;
            w.write_all(&(t.nodes().len() as u32).to_le_bytes())?;
            for node in t.nodes() {
                match *node {
                    KdNode::Leaf { entry } => record(&mut w, NODE_LEAF, 0, 0.0, entry)?,
                    KdNode::Split { dim, value, pivot, .. } => record(&mut w, NODE_KD, dim, value, pivot)?,
                }
            }
        }
        Tree::Gla(t) => {
            write_header(&mut w, &cb, KIND_GLA)?;
            write_entries(&mut w, &cb)?;
            w.write_all(&(t.nodes().len() as u32).to_le_bytes())?;
            for node in t.nodes() {
                match node {
                    GlaNode::Leaf { entry } => record(&mut w, NODE_LEAF, 0, 0.0, *entry)?,
                    GlaNode::Split {
                        centroids,
                        separation,
                        voronoi,
                        ..
                    } => {
                        let kind = if *voronoi { NODE_GLA } else { NODE_GLA_HALVED };
                        record(&mut w, kind, 0, *separation, u32::MAX)?;
                        for c in centroids.iter() {
                            w.write_all(&c.to_le_bytes())?;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

struct Record {
    kind: u8,
    dim: u16,
    value: f64,
    entry: u32,
}

fn read_record<R: Read>(r: &mut R) -> Result<Record> {
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let mut dim = [0u8; 2];
    r.read_exact(&mut dim)?;
    Ok(Record {
        kind: kind[0],
        dim: u16::from_le_bytes(dim),
        value: read_f64(r)?,
        entry: read_u32(r)?,
    })
}

fn points_of(cb: &Codebook) -> Vec<f64> {
    let dim2 = 2 * cb.dim();
    let mut points = vec![0.0; cb.len() * dim2];
    for (j, v) in cb.iter().enumerate() {
        embed_into(v, &mut points[j * dim2..(j + 1) * dim2]);
    }
    points
}

/// Re-links pre-order records into a tree, returning the right-child slots.
/// `split_of(i)` tells whether record `i` is internal.
fn link(count: usize, is_split: &[bool]) -> Result<Vec<u32>> {
    // right[i] for splits; iterative pre-order walk.
    let mut right = vec![0u32; count];
    let mut pending: Vec<(usize, u8)> = Vec::new();
    let mut next = 0usize;
    let bad = || Error::Format("tree records do not form a full binary tree".into());
    loop {
        if next >= count {
            return Err(bad());
        }
        let node = next;
        next += 1;
        if is_split[node] {
            pending.push((node, 0));
            continue;
        }
        // A leaf closes subtrees until some split still needs its right child.
        loop {
            match pending.last_mut() {
                None => {
                    return if next == count { Ok(right) } else { Err(bad()) };
                }
                Some((p, seen)) if *seen == 0 => {
                    *seen = 1;
                    right[*p] = next as u32;
                    break;
                }
                Some(_) => {
                    pending.pop();
                }
            }
        }
    }
}

pub fn read_tree<R: Read>(mut r: R) -> Result<Tree> {
    let (cb, kind) = read_codebook_with_reserved(&mut r)?;
    let count = read_u32(&mut r)? as usize;
    if count != 2 * cb.len() - 1 {
        return Err(Error::Format(format!("{count} nodes for {} entries", cb.len())));
    }
    let dim2 = 2 * cb.dim();
    let entry_ok = |e: u32| {
        if (e as usize) < cb.len() {
            Ok(e)
        } else {
            Err(Error::Format(format!("entry index {e} out of range")))
        }
    };
    match kind {
        KIND_KD => {
            let mut records = Vec::with_capacity(count);
            for _ in 0..count {
                records.push(read_record(&mut r)?);
            }
            let splits: Vec<bool> = records.iter().map(|x| x.kind == NODE_KD).collect();
            let right = link(count, &splits)?;
            let mut nodes = Vec::with_capacity(count);
            for (i, rec) in records.into_iter().enumerate() {
                nodes.push(match rec.kind {
                    NODE_LEAF => KdNode::Leaf { entry: entry_ok(rec.entry)? },
                    NODE_KD if (rec.dim as usize) < dim2 => KdNode::Split {
                        dim: rec.dim,
                        value: rec.value,
                        pivot: entry_ok(rec.entry)?,
                        right: right[i],
                    },
                    k => return Err(Error::Format(format!("bad kd node kind {k} / coordinate {}", rec.dim))),
                });
            }
            Ok(Tree::Kd(KdTree::from_parts(cb.dim(), cb.bits(), points_of(&cb), nodes)))
        }
        KIND_GLA => {
            let mut records = Vec::with_capacity(count);
            for _ in 0..count {
                let rec = read_record(&mut r)?;
                let centroids = if rec.kind == NODE_GLA || rec.kind == NODE_GLA_HALVED {
                    let mut c = vec![0.0; 2 * dim2];
                    for x in c.iter_mut() {
                        *x = read_f64(&mut r)?;
                    }
                    Some(c.into_boxed_slice())
                } else {
                    None
                };
                records.push((rec, centroids));
            }
            let splits: Vec<bool> = records.iter().map(|(_, c)| c.is_some()).collect();
            let right = link(count, &splits)?;
            let mut nodes = Vec::with_capacity(count);
            for (i, (rec, centroids)) in records.into_iter().enumerate() {
                nodes.push(match (rec.kind, centroids) {
                    (NODE_LEAF, None) => GlaNode::Leaf { entry: entry_ok(rec.entry)? },
                    (k, Some(centroids)) => GlaNode::Split {
                        centroids,
                        separation: rec.value,
                        voronoi: k == NODE_GLA,
                        right: right[i],
                    },
                    (k, None) => return Err(Error::Format(format!("bad GLA node kind {k}"))),
                });
            }
            Ok(Tree::Gla(GlaTree::from_parts(cb.dim(), cb.bits(), points_of(&cb), nodes)))
        }
        other => Err(Error::Format(format!("container holds no tree (kind {other})"))),
    }
}

pub fn save_tree(tree: &Tree, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tree(tree, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_tree(path: &Path) -> Result<Tree> {
    read_tree(BufReader::new(File::open(path)?))
}
