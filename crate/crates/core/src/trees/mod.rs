//! Binary trees over an RVQ codebook.
//!
//! Both tree kinds work on the `2N`-real embedding `[Re v; Im v]` of each
//! entry, where Euclidean distance between unit vectors is `2 − 2 Re{u†v}`.
//!
//! * [`GlaTree`]: recursive two-cell generalized Lloyd splits.
//! * [`KdTree`]: median-pivot splits cycling through the `2N` coordinates.
//!
//! [`tree_nearest_neighbor`] quantizes an eigenvector through either tree;
//! [`modified_kd_search`] walks a kd-tree toward a large (or small) quadratic
//! form without computing any eigenvector.

mod gla;
mod io;
mod kd;
mod modified;

pub use gla::{build_gla_tree, GlaNode, GlaTree, GLA_MAX_ITERATIONS};
pub use io::{load_tree, read_tree, save_tree, write_tree, Tree};
pub use kd::{build_kd_tree, KdNode, KdTree};
pub use modified::{modified_kd_descent, modified_kd_search};

use crate::corelin::{embedded_dot, OpCounter, UnitVector};
use crate::error::Result;

/// Result of one tree search.
#[derive(Clone, Debug)]
pub struct SearchReport {
    pub index: usize,
    pub vector: UnitVector,
    /// `Re{u†v}` for nearest-neighbor searches, `v†Mv` for the modified search.
    pub score: f64,
    pub macs: u64,
    pub nodes_visited: usize,
}

/// A tree that can answer nearest-neighbor queries over its codebook.
pub trait NearestNeighborTree {
    fn nearest(&self, u: &UnitVector, counter: &mut OpCounter) -> Result<SearchReport>;

    fn node_count(&self) -> usize;
}

/// Nearest codebook entry to `u` in Euclidean distance.
///
/// Exact for [`KdTree`]. For [`GlaTree`] it is exact whenever every split
/// converged to a nearest-centroid partition, which holds unless a split fell
/// back to halving a degenerate group.
pub fn tree_nearest_neighbor<T: NearestNeighborTree + ?Sized>(
    tree: &T,
    u: &UnitVector,
    counter: &mut OpCounter,
) -> Result<SearchReport> {
    tree.nearest(u, counter)
}

/// Slack on pruning tests so rounding in `2 − 2·dot` never discards a tie.
const PRUNE_SLACK: f64 = 1e-12;

/// Best leaf so far during a nearest-neighbor descent.
struct Incumbent {
    index: u32,
    dot: f64,
}

impl Incumbent {
    fn new() -> Self {
        Self {
            index: u32::MAX,
            dot: f64::NEG_INFINITY,
        }
    }

    /// Squared distance between unit vectors.
    fn dist(&self) -> f64 {
        2.0 - 2.0 * self.dot
    }

    /// Same ordering as the exhaustive search: larger `Re{u†v}`, then lower index.
    fn offer(&mut self, index: u32, query: &[f64], point: &[f64], counter: &mut OpCounter) {
        counter.add((query.len() / 2) as u64);
        let dot = embedded_dot(query, point);
        if dot > self.dot || (dot == self.dot && index < self.index) {
            self.index = index;
            self.dot = dot;
        }
    }
}

#[inline]
fn point(points: &[f64], dim2: usize, entry: u32) -> &[f64] {
    let e = entry as usize;
    &points[e * dim2..(e + 1) * dim2]
}
