//! Eigenvector-free search of a kd-tree for a large (or small) `v†Mv`.
//!
//! Every internal node carries a pivot entry, so each node stands for a
//! concrete codeword. The descent scores the two children's codewords with the
//! quadratic form and follows the better one. A second pass from the root then
//! opens both subtrees below any pivot that beats the descent's result.

use std::collections::HashMap;
use std::collections::HashSet;

use crate::codebook::Objective;
use crate::corelin::{check_dim, CovarianceMatrix, OpCounter, RealEmbeddedCovariance};
use crate::error::Result;

use super::{KdNode, KdTree, SearchReport};

/// Descent followed by the compare pass.
pub fn modified_kd_search(
    tree: &KdTree,
    m: &CovarianceMatrix,
    objective: Objective,
    counter: &mut OpCounter,
) -> Result<SearchReport> {
    run(tree, m, objective, true, counter)
}

/// The descent alone, without the compare pass.
pub fn modified_kd_descent(
    tree: &KdTree,
    m: &CovarianceMatrix,
    objective: Objective,
    counter: &mut OpCounter,
) -> Result<SearchReport> {
    run(tree, m, objective, false, counter)
}

struct Walk<'a> {
    tree: &'a KdTree,
    form: RealEmbeddedCovariance,
    objective: Objective,
    /// Each codeword is scored at most once per search.
    scores: HashMap<u32, f64>,
    visited: HashSet<usize>,
    best: u32,
    best_score: f64,
}

impl Walk<'_> {
    fn score(&mut self, entry: u32, counter: &mut OpCounter) -> f64 {
        if let Some(&s) = self.scores.get(&entry) {
            return s;
        }
        let s = self.form.quadratic_form(self.tree.point(entry), counter);
        self.scores.insert(entry, s);
        s
    }

    /// The codeword a node stands for: its pivot, or a leaf's entry.
    fn codeword(&self, node: usize) -> u32 {
        match self.tree.nodes()[node] {
            KdNode::Leaf { entry } => entry,
            KdNode::Split { pivot, .. } => pivot,
        }
    }

    /// The child whose codeword scores better; ties go right.
    fn better_child(&mut self, left: usize, right: usize, counter: &mut OpCounter) -> usize {
        let sl = self.score(self.codeword(left), counter);
        let sr = self.score(self.codeword(right), counter);
        if self.objective.better(sl, sr) {
            left
        } else {
            right
        }
    }

    fn descend(&mut self, counter: &mut OpCounter) -> u32 {
        let mut node = 0;
        loop {
            self.visited.insert(node);
            match self.tree.nodes()[node] {
                KdNode::Leaf { entry } => return entry,
                KdNode::Split { right, .. } => node = self.better_child(node + 1, right as usize, counter),
            }
        }
    }

    fn offer(&mut self, entry: u32, counter: &mut OpCounter) -> bool {
        let s = self.score(entry, counter);
        let wins = self.objective.better(s, self.best_score);
        if wins {
            self.best = entry;
            self.best_score = s;
        }
        wins
    }

    fn compare(&mut self, node: usize, counter: &mut OpCounter) {
        self.visited.insert(node);
        match self.tree.nodes()[node] {
            KdNode::Leaf { entry } => {
                self.offer(entry, counter);
            }
            KdNode::Split { pivot, right, .. } => {
                if self.offer(pivot, counter) {
                    self.compare(node + 1, counter);
                    self.compare(right as usize, counter);
                } else {
                    let child = self.better_child(node + 1, right as usize, counter);
                    self.compare(child, counter);
                }
            }
        }
    }
}

fn run(
    tree: &KdTree,
    m: &CovarianceMatrix,
    objective: Objective,
    compare_pass: bool,
    counter: &mut OpCounter,
) -> Result<SearchReport> {
    check_dim(tree.dim(), m.dim())?;
    let start = counter.macs();
    let mut walk = Walk {
        tree,
        form: m.real_embedding(),
        objective,
        scores: HashMap::new(),
        visited: HashSet::new(),
        best: 0,
        best_score: 0.0,
    };
    let leaf = walk.descend(counter);
    walk.best = leaf;
    walk.best_score = walk.score(leaf, counter);
    if compare_pass {
        walk.compare(0, counter);
    }
    Ok(SearchReport {
        index: walk.best as usize,
        vector: tree.entry_vector(walk.best),
        score: walk.best_score,
        macs: counter.macs() - start,
        nodes_visited: walk.visited.len(),
    })
}
