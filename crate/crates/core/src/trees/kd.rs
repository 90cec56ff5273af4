use crate::codebook::Codebook;
use crate::corelin::{check_dim, embed_into, unembed, OpCounter, UnitVector};
use crate::error::Result;

use super::{point, Incumbent, NearestNeighborTree, SearchReport, PRUNE_SLACK};

/// Node of a [`KdTree`], stored in pre-order: a split's left child is the
/// next node, its right child is at `right`.
#[derive(Clone, Debug, PartialEq)]
pub enum KdNode {
    Leaf {
        entry: u32,
    },
    Split {
        /// Real coordinate tested here, `depth mod 2N` (0-based).
        dim: u16,
        /// Coordinate of the pivot; left holds `<=`, right holds `>`.
        value: f64,
        /// Entry whose coordinate is closest to the median (routed left).
        pivot: u32,
        right: u32,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct KdTree {
    dim: usize,
    bits: u32,
    points: Vec<f64>,
    nodes: Vec<KdNode>,
}

/// Builds the kd-tree by repeated median pivoting; deterministic.
pub fn build_kd_tree(cb: &Codebook) -> KdTree {
    let dim2 = 2 * cb.dim();
    let mut points = vec![0.0; cb.len() * dim2];
    for (j, v) in cb.iter().enumerate() {
        embed_into(v, &mut points[j * dim2..(j + 1) * dim2]);
    }
    let mut idx: Vec<u32> = (0..cb.len() as u32).collect();
    let mut nodes = Vec::with_capacity(2 * cb.len() - 1);
    build(&mut nodes, &points, dim2, &mut idx, 0);
    KdTree {
        dim: cb.dim(),
        bits: cb.bits(),
        points,
        nodes,
    }
}

fn build(nodes: &mut Vec<KdNode>, points: &[f64], dim2: usize, idx: &mut [u32], depth: usize) {
    if idx.len() == 1 {
        nodes.push(KdNode::Leaf { entry: idx[0] });
        return;
    }
    let d = depth % dim2;
    let coord = |e: u32| points[e as usize * dim2 + d];
    idx.sort_unstable_by(|&a, &b| coord(a).total_cmp(&coord(b)).then(a.cmp(&b)));
    // Lower median: the element closest to the median, and never the last
    // one, so both sides are non-empty.
    let p = (idx.len() - 1) / 2;
    let pivot = idx[p];
    let at = nodes.len();
    nodes.push(KdNode::Split {
        dim: d as u16,
        value: coord(pivot),
        pivot,
        right: 0,
    });
    let (left, right) = idx.split_at_mut(p + 1);
    build(nodes, points, dim2, left, depth + 1);
    let right_at = nodes.len() as u32;
    if let KdNode::Split { right: r, .. } = &mut nodes[at] {
        *r = right_at;
    }
    build(nodes, points, dim2, right, depth + 1);
}

impl KdTree {
    pub(crate) fn from_parts(dim: usize, bits: u32, points: Vec<f64>, nodes: Vec<KdNode>) -> Self {
        Self { dim, bits, points, nodes }
    }

    /// Complex dimension `N` of the codebook.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn nodes(&self) -> &[KdNode] {
        &self.nodes
    }

    pub fn entry_count(&self) -> usize {
        1 << self.bits
    }

    /// Embedded coordinates of `entry`.
    pub fn point(&self, entry: u32) -> &[f64] {
        point(&self.points, 2 * self.dim, entry)
    }

    pub(crate) fn entry_vector(&self, entry: u32) -> UnitVector {
        UnitVector::from_vec_unchecked(unembed(self.point(entry)))
    }

    /// Entries in the subtree rooted at `node`, left to right.
    pub fn subtree_entries(&self, node: usize) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            match self.nodes[n] {
                KdNode::Leaf { entry } => out.push(entry),
                KdNode::Split { right, .. } => {
                    stack.push(right as usize);
                    stack.push(n + 1);
                }
            }
        }
        out
    }

    fn search(&self, node: usize, rd: f64, q: &mut Query, counter: &mut OpCounter) {
        q.visited += 1;
        match self.nodes[node] {
            KdNode::Leaf { entry } => q.best.offer(entry, &q.point, self.point(entry), counter),
            KdNode::Split { dim, value, right, .. } => {
                counter.add(1);
                let d = dim as usize;
                let diff = q.point[d] - value;
                let (near, far) = if diff <= 0.0 {
                    (node + 1, right as usize)
                } else {
                    (right as usize, node + 1)
                };
                self.search(near, rd, q, counter);
                // Incremental distance: swap this axis' old offset for the new one.
                let old = q.offsets[d];
                let far_rd = rd - old * old + diff * diff;
                if far_rd <= q.best.dist() + PRUNE_SLACK {
                    q.offsets[d] = diff;
                    self.search(far, far_rd, q, counter);
                    q.offsets[d] = old;
                }
            }
        }
    }
}

/// Per-query state of the backtracking search.
struct Query {
    point: Vec<f64>,
    /// Per-axis gap between the query and the current cell.
    offsets: Vec<f64>,
    best: Incumbent,
    visited: usize,
}

impl NearestNeighborTree for KdTree {
    /// Exact backtracking search (ball-within-bounds pruning).
    fn nearest(&self, u: &UnitVector, counter: &mut OpCounter) -> Result<SearchReport> {
        check_dim(self.dim, u.dim())?;
        let start = counter.macs();
        let mut q = Query {
            point: vec![0.0; 2 * self.dim],
            offsets: vec![0.0; 2 * self.dim],
            best: Incumbent::new(),
            visited: 0,
        };
        embed_into(u.as_slice(), &mut q.point);
        self.search(0, 0.0, &mut q, counter);
        Ok(SearchReport {
            index: q.best.index as usize,
            vector: self.entry_vector(q.best.index),
            score: q.best.dot,
            macs: counter.macs() - start,
            nodes_visited: q.visited,
        })
    }

    fn node_count(&self) -> usize {
        self.nodes.len()
    }
}
