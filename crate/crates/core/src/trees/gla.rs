use rand::Rng;

use crate::codebook::Codebook;
use crate::corelin::{check_dim, embed_into, embedded_dot, unembed, OpCounter, UnitVector};
use crate::error::Result;

use super::{point, Incumbent, NearestNeighborTree, SearchReport};

/// Lloyd iterations per split before settling for the current partition.
pub const GLA_MAX_ITERATIONS: usize = 50;

/// Groups up to this size seed with the exact farthest pair; larger ones use
/// a double sweep from a random entry.
const EXACT_PAIR_LIMIT: usize = 2048;

/// Node of a [`GlaTree`] in pre-order (left child follows its parent).
#[derive(Clone, Debug, PartialEq)]
pub enum GlaNode {
    Leaf {
        entry: u32,
    },
    Split {
        /// `c0` then `c1`, each `2N` reals.
        centroids: Box<[f64]>,
        /// `‖c0 − c1‖`.
        separation: f64,
        /// Whether the children are exactly the nearest-centroid cells, ties
        /// to `c0`. False only for degenerate groups split by halving.
        voronoi: bool,
        right: u32,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlaTree {
    dim: usize,
    bits: u32,
    points: Vec<f64>,
    nodes: Vec<GlaNode>,
}

/// Builds the tree by recursive two-centroid Lloyd splits. The RNG only picks
/// the sweep start for large groups.
pub fn build_gla_tree<R: Rng + ?Sized>(cb: &Codebook, rng: &mut R) -> GlaTree {
    let dim2 = 2 * cb.dim();
    let mut points = vec![0.0; cb.len() * dim2];
    for (j, v) in cb.iter().enumerate() {
        embed_into(v, &mut points[j * dim2..(j + 1) * dim2]);
    }
    let idx: Vec<u32> = (0..cb.len() as u32).collect();
    let mut nodes = Vec::with_capacity(2 * cb.len() - 1);
    build(&mut nodes, &points, dim2, idx, rng);
    GlaTree {
        dim: cb.dim(),
        bits: cb.bits(),
        points,
        nodes,
    }
}

fn build<R: Rng + ?Sized>(nodes: &mut Vec<GlaNode>, points: &[f64], dim2: usize, idx: Vec<u32>, rng: &mut R) {
    if idx.len() == 1 {
        nodes.push(GlaNode::Leaf { entry: idx[0] });
        return;
    }
    let split = split(points, dim2, &idx, rng);
    let at = nodes.len();
    nodes.push(GlaNode::Split {
        separation: sq_dist(&split.centroids[..dim2], &split.centroids[dim2..]).sqrt(),
        centroids: split.centroids,
        voronoi: split.voronoi,
        right: 0,
    });
    build(nodes, points, dim2, split.left, rng);
    let right_at = nodes.len() as u32;
    if let GlaNode::Split { right, .. } = &mut nodes[at] {
        *right = right_at;
    }
    build(nodes, points, dim2, split.right, rng);
}

struct Split {
    centroids: Box<[f64]>,
    left: Vec<u32>,
    right: Vec<u32>,
    voronoi: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn farthest_from(points: &[f64], dim2: usize, idx: &[u32], from: &[f64]) -> u32 {
    let mut best = (idx[0], f64::NEG_INFINITY);
    for &e in idx {
        let d = sq_dist(point(points, dim2, e), from);
        if d > best.1 {
            best = (e, d);
        }
    }
    best.0
}

fn seed_pair<R: Rng + ?Sized>(points: &[f64], dim2: usize, idx: &[u32], rng: &mut R) -> (u32, u32) {
    if idx.len() <= EXACT_PAIR_LIMIT {
        // Unit points: farthest apart means smallest inner product.
        let mut best = (idx[0], idx[1], f64::INFINITY);
        for (i, &a) in idx.iter().enumerate() {
            for &b in &idx[i + 1..] {
                let dot = embedded_dot(point(points, dim2, a), point(points, dim2, b));
                if dot < best.2 {
                    best = (a, b, dot);
                }
            }
        }
        (best.0, best.1)
    } else {
        let start = idx[rng.random_range(0..idx.len())];
        let a = farthest_from(points, dim2, idx, point(points, dim2, start));
        let b = farthest_from(points, dim2, idx, point(points, dim2, a));
        (a, b)
    }
}

fn split<R: Rng + ?Sized>(points: &[f64], dim2: usize, idx: &[u32], rng: &mut R) -> Split {
    let (a, b) = seed_pair(points, dim2, idx, rng);
    let mut c = vec![0.0; 2 * dim2];
    c[..dim2].copy_from_slice(point(points, dim2, a));
    c[dim2..].copy_from_slice(point(points, dim2, b));
    let mut assign = vec![u8::MAX; idx.len()];
    let mut converged = false;
    for _ in 0..GLA_MAX_ITERATIONS {
        let mut changed = false;
        for (slot, &e) in assign.iter_mut().zip(idx) {
            let side = nearest_side(&c, dim2, point(points, dim2, e));
            changed |= *slot != side;
            *slot = side;
        }
        if !changed {
            converged = true;
            break;
        }
        repair_empty_cell(points, dim2, idx, &c, &mut assign);
        recompute_centroids(points, dim2, idx, &assign, &mut c);
    }
    if !converged {
        log::debug!(
            "GLA split of {} entries hit {GLA_MAX_ITERATIONS} iterations; keeping the last centroids",
            idx.len()
        );
    }
    // The stored partition is exactly the nearest-centroid one, which is what
    // makes the hyperplane bound admissible at search time.
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for &e in idx {
        if nearest_side(&c, dim2, point(points, dim2, e)) == 0 {
            left.push(e);
        } else {
            right.push(e);
        }
    }
    if !left.is_empty() && !right.is_empty() {
        return Split {
            centroids: c.into_boxed_slice(),
            left,
            right,
            voronoi: true,
        };
    }
    log::warn!("GLA split of {} coincident entries; halving by index", idx.len());
    let (l, r) = idx.split_at(idx.len() / 2);
    for (half, k) in [(l, 0), (r, 1)] {
        let cen = mean(points, dim2, half);
        c[k * dim2..(k + 1) * dim2].copy_from_slice(&cen);
    }
    Split {
        centroids: c.into_boxed_slice(),
        left: l.to_vec(),
        right: r.to_vec(),
        voronoi: false,
    }
}

/// 0 if `p` is at least as close to `c0` as to `c1`.
#[inline]
fn nearest_side(c: &[f64], dim2: usize, p: &[f64]) -> u8 {
    let d0 = sq_dist(p, &c[..dim2]);
    let d1 = sq_dist(p, &c[dim2..]);
    u8::from(d1 < d0)
}

/// Moves the point farthest from the occupied cell's centroid into an empty cell.
fn repair_empty_cell(points: &[f64], dim2: usize, idx: &[u32], c: &[f64], assign: &mut [u8]) {
    let ones = assign.iter().filter(|&&s| s == 1).count();
    let empty = match ones {
        0 => 1u8,
        n if n == assign.len() => 0u8,
        _ => return,
    };
    let full = 1 - empty as usize;
    let centroid = &c[full * dim2..(full + 1) * dim2];
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &e) in idx.iter().enumerate() {
        let d = sq_dist(point(points, dim2, e), centroid);
        if d > best.1 {
            best = (i, d);
        }
    }
    assign[best.0] = empty;
}

fn recompute_centroids(points: &[f64], dim2: usize, idx: &[u32], assign: &[u8], c: &mut [f64]) {
    let mut sums = vec![0.0; 2 * dim2];
    let mut counts = [0usize; 2];
    for (&side, &e) in assign.iter().zip(idx) {
        let k = side as usize;
        counts[k] += 1;
        for (s, x) in sums[k * dim2..(k + 1) * dim2].iter_mut().zip(point(points, dim2, e)) {
            *s += x;
        }
    }
    for k in 0..2 {
        if counts[k] > 0 {
            for (dst, s) in c[k * dim2..(k + 1) * dim2].iter_mut().zip(&sums[k * dim2..(k + 1) * dim2]) {
                *dst = s / counts[k] as f64;
            }
        }
    }
}

fn mean(points: &[f64], dim2: usize, idx: &[u32]) -> Vec<f64> {
    let mut m = vec![0.0; dim2];
    for &e in idx {
        for (s, x) in m.iter_mut().zip(point(points, dim2, e)) {
            *s += x;
        }
    }
    m.iter_mut().for_each(|s| *s /= idx.len() as f64);
    m
}

impl GlaTree {
    pub(crate) fn from_parts(dim: usize, bits: u32, points: Vec<f64>, nodes: Vec<GlaNode>) -> Self {
        Self { dim, bits, points, nodes }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn nodes(&self) -> &[GlaNode] {
        &self.nodes
    }

    pub fn point(&self, entry: u32) -> &[f64] {
        point(&self.points, 2 * self.dim, entry)
    }

    /// Whether every split is an exact nearest-centroid partition.
    pub fn is_voronoi(&self) -> bool {
        self.nodes.iter().all(|n| !matches!(n, GlaNode::Split { voronoi: false, .. }))
    }

    pub fn subtree_entries(&self, node: usize) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            match self.nodes[n] {
                GlaNode::Leaf { entry } => out.push(entry),
                GlaNode::Split { right, .. } => {
                    stack.push(right as usize);
                    stack.push(n + 1);
                }
            }
        }
        out
    }

    /// Leaf reached by always taking the nearer centroid.
    pub fn greedy_leaf(&self, query: &[f64]) -> u32 {
        let dim2 = 2 * self.dim;
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                GlaNode::Leaf { entry } => return *entry,
                GlaNode::Split { centroids, right, .. } => {
                    n = if nearest_side(centroids, dim2, query) == 0 { n + 1 } else { *right as usize };
                }
            }
        }
    }

    fn search(&self, node: usize, query: &[f64], bound: f64, best: &mut Incumbent, visited: &mut usize, counter: &mut OpCounter) {
        if bound > best.dist() + super::PRUNE_SLACK {
            return;
        }
        *visited += 1;
        let dim2 = 2 * self.dim;
        match &self.nodes[node] {
            GlaNode::Leaf { entry } => best.offer(*entry, query, self.point(*entry), counter),
            GlaNode::Split {
                centroids,
                separation,
                voronoi,
                right,
            } => {
                counter.add(2 * self.dim as u64);
                let d0 = sq_dist(query, &centroids[..dim2]);
                let d1 = sq_dist(query, &centroids[dim2..]);
                let (near, far, d_near, d_far) = if d0 <= d1 {
                    (node + 1, *right as usize, d0, d1)
                } else {
                    (*right as usize, node + 1, d1, d0)
                };
                self.search(near, query, bound, best, visited, counter);
                let far_bound = if *voronoi {
                    // Squared distance from the query to the bisecting hyperplane.
                    let h = (d_far - d_near) / (2.0 * separation);
                    bound.max(h * h)
                } else {
                    bound
                };
                self.search(far, query, far_bound, best, visited, counter);
            }
        }
    }
}

impl NearestNeighborTree for GlaTree {
    /// Greedy descent with hyperplane-bounded backtracking.
    fn nearest(&self, u: &UnitVector, counter: &mut OpCounter) -> Result<SearchReport> {
        check_dim(self.dim, u.dim())?;
        let start = counter.macs();
        let mut query = vec![0.0; 2 * self.dim];
        embed_into(u.as_slice(), &mut query);
        let mut best = Incumbent::new();
        let mut visited = 0;
        self.search(0, &query, 0.0, &mut best, &mut visited, counter);
        Ok(SearchReport {
            index: best.index as usize,
            vector: UnitVector::from_vec_unchecked(unembed(self.point(best.index))),
            score: best.dot,
            macs: counter.macs() - start,
            nodes_visited: visited,
        })
    }

    fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{generate_rvq, select_nearest_neighbor};
    use crate::corelin::{ComplexVector, C64};
    use crate::rng::stream;
    use proptest::prelude::*;

    fn real_unit(x: &[f64]) -> UnitVector {
        let v = x.iter().map(|&a| C64::new(a, 0.0)).collect();
        UnitVector::normalize(ComplexVector::new(v).unwrap()).unwrap()
    }

    #[test]
    fn two_clusters_split_at_the_root() {
        let entries = [
            real_unit(&[1.0, 0.01]),
            real_unit(&[-1.0, 0.02]),
            real_unit(&[1.0, -0.01]),
            real_unit(&[-1.0, -0.02]),
        ];
        let cb = Codebook::from_entries(2, &entries).unwrap();
        let tree = build_gla_tree(&cb, &mut stream(1, 0, 0));
        let GlaNode::Split { right, .. } = tree.nodes()[0] else {
            panic!("root must split")
        };
        let mut left = tree.subtree_entries(1);
        let mut rest = tree.subtree_entries(right as usize);
        left.sort_unstable();
        rest.sort_unstable();
        let groups = [left, rest];
        assert!(groups.contains(&vec![0, 2]) && groups.contains(&vec![1, 3]), "{groups:?}");
    }

    #[test]
    fn single_entry_and_pair() {
        let cb = generate_rvq(2, 0, &mut stream(2, 0, 0)).unwrap();
        assert_eq!(build_gla_tree(&cb, &mut stream(3, 0, 0)).nodes(), &[GlaNode::Leaf { entry: 0 }]);
        let cb = generate_rvq(2, 1, &mut stream(2, 0, 0)).unwrap();
        let tree = build_gla_tree(&cb, &mut stream(3, 0, 0));
        assert_eq!(tree.node_count(), 3);
        assert!(tree.is_voronoi());
    }

    #[test]
    fn coincident_entries_fall_back_to_halving() {
        let e = real_unit(&[0.6, 0.8]);
        let cb = Codebook::from_entries(2, &[e.clone(), e.clone(), e.clone(), e]).unwrap();
        let tree = build_gla_tree(&cb, &mut stream(4, 0, 0));
        assert!(!tree.is_voronoi());
        let mut leaves = tree.subtree_entries(0);
        leaves.sort_unstable();
        assert_eq!(leaves, vec![0, 1, 2, 3]);
        let report = tree.nearest(&real_unit(&[0.6, 0.8]), &mut OpCounter::new()).unwrap();
        assert_eq!(report.index, 0);
    }

    #[test]
    fn large_groups_use_the_double_sweep() {
        let cb = generate_rvq(3, 12, &mut stream(5, 0, 0)).unwrap();
        let tree = build_gla_tree(&cb, &mut stream(6, 0, 0));
        assert!(tree.is_voronoi());
        assert_eq!(tree.node_count(), 2 * 4096 - 1);
        let mut rng = stream(7, 0, 0);
        for _ in 0..200 {
            let u = crate::channels::random_unit(3, &mut rng).unwrap();
            let want = select_nearest_neighbor(&cb, &u, &mut OpCounter::new()).unwrap().index;
            assert_eq!(tree.nearest(&u, &mut OpCounter::new()).unwrap().index, want);
        }
    }

    #[test]
    fn search_prunes_most_of_the_tree() {
        let cb = generate_rvq(3, 12, &mut stream(8, 0, 0)).unwrap();
        let tree = build_gla_tree(&cb, &mut stream(9, 0, 0));
        let mut rng = stream(10, 0, 0);
        let mut macs = 0;
        for _ in 0..100 {
            let u = crate::channels::random_unit(3, &mut rng).unwrap();
            macs += tree.nearest(&u, &mut OpCounter::new()).unwrap().macs;
        }
        let frac = macs as f64 / 100.0 / (4096.0 * 3.0);
        assert!(frac < 0.2, "{frac}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn entries_route_to_their_own_leaf(seed in 0u64..100_000, n in 1usize..5, bits in 0u32..9) {
            let cb = generate_rvq(n, bits, &mut stream(seed, 0, 0)).unwrap();
            let tree = build_gla_tree(&cb, &mut stream(seed, 1, 0));
            prop_assume!(tree.is_voronoi());
            let mut leaves = tree.subtree_entries(0);
            leaves.sort_unstable();
            prop_assert_eq!(leaves, (0..cb.len() as u32).collect::<Vec<_>>());
            for j in 0..cb.len() as u32 {
                prop_assert_eq!(tree.greedy_leaf(tree.point(j)), j);
            }
        }

        #[test]
        fn matches_exhaustive_search(seed in 0u64..100_000, n in 1usize..7, bits in 0u32..11) {
            let cb = generate_rvq(n, bits, &mut stream(seed, 0, 0)).unwrap();
            let tree = build_gla_tree(&cb, &mut stream(seed, 1, 0));
            let u = crate::channels::random_unit(n, &mut stream(seed, 2, 0)).unwrap();
            let want = select_nearest_neighbor(&cb, &u, &mut OpCounter::new()).unwrap().index;
            let report = tree.nearest(&u, &mut OpCounter::new()).unwrap();
            prop_assert_eq!(report.index, want);
            prop_assert!(report.nodes_visited <= tree.node_count());
        }
    }
}
