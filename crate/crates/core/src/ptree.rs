//! Spatial partition tree: recursive axis-aligned splits over the photo grid
//! whose leaves are the rectangular sub-regions of a solution.
//!
//! Split indices are absolute indices into the instance's longitude (column)
//! or latitude (row) list. A split `Longitude@k` sends columns `<= k` to the
//! first child and columns `> k` to the second; `Latitude@k` does the same
//! for rows. Nodes are stored in pre-order, so node ids double as the
//! deterministic scan order and a sub-tree's leaves are contiguous in
//! [`PartitionTree::leaves`].

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::geosum::GeoSums;
use crate::model::Rect;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("cannot form {wanted} nonempty sub-regions from {available} distinct photo positions")]
    TooFewCells { wanted: usize, available: usize },
    #[error("node {0} is a leaf")]
    LeafNode(usize),
    #[error("node {0} does not exist")]
    NoSuchNode(usize),
    #[error("stale hyperplane move on node {0}")]
    StaleMove(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    Longitude,
    Latitude,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::Longitude, Axis::Latitude];

    fn span(self, r: &Rect) -> (usize, usize) {
        match self {
            Axis::Longitude => (r.c_lt, r.c_gt),
            Axis::Latitude => (r.l_lo, r.l_hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Split {
    pub axis: Axis,
    pub index: usize,
}

impl Split {
    pub fn new(axis: Axis, index: usize) -> Self {
        Self { axis, index }
    }

    /// Child rectangles, or `None` if the index does not cut `r`.
    pub fn children(&self, r: &Rect) -> Option<(Rect, Rect)> {
        let (lo, hi) = self.axis.span(r);
        if self.index < lo || self.index >= hi {
            return None;
        }
        let k = self.index;
        Some(match self.axis {
            Axis::Longitude => (Rect { c_gt: k, ..*r }, Rect { c_lt: k + 1, ..*r }),
            Axis::Latitude => (Rect { l_hi: k, ..*r }, Rect { l_lo: k + 1, ..*r }),
        })
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axis = match self.axis {
            Axis::Longitude => "Lng",
            Axis::Latitude => "Lat",
        };
        write!(f, "{axis}@{}", self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub rect: Rect,
    pub split: Option<Split>,
    pub children: Option<[usize; 2]>,
    pub parent: Option<usize>,
    pub depth: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionTree {
    nodes: Vec<TreeNode>,
    leaves: Vec<usize>,
    depth: usize,
}

/// Changing one node's splitting hyperplane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HyperplaneMove {
    pub target: usize,
    pub from: Split,
    pub to: Split,
}

fn admissible_indices(g: &GeoSums, r: &Rect, axis: Axis) -> Vec<usize> {
    let (lo, hi) = axis.span(r);
    (lo..hi)
        .filter(|&k| {
            let (a, b) = Split::new(axis, k).children(r).expect("index in span");
            g.region_count(&a) > 0 && g.region_count(&b) > 0
        })
        .collect()
}

/// Picks a uniformly random admissible split of `r`: axis uniformly among the
/// axes that admit one, then index uniformly on that axis.
fn random_split<R: Rng + ?Sized>(g: &GeoSums, r: &Rect, rng: &mut R) -> Option<Split> {
    let options: Vec<(Axis, Vec<usize>)> = Axis::BOTH
        .iter()
        .map(|&a| (a, admissible_indices(g, r, a)))
        .filter(|(_, idx)| !idx.is_empty())
        .collect();
    let (axis, indices) = options.choose(rng)?;
    Some(Split::new(*axis, *indices.choose(rng)?))
}

fn is_splittable(g: &GeoSums, r: &Rect) -> bool {
    Axis::BOTH
        .iter()
        .any(|&a| !admissible_indices(g, r, a).is_empty())
}

impl PartitionTree {
    /// A single leaf covering the whole grid.
    pub fn root_only(g: &GeoSums) -> Self {
        Self {
            nodes: vec![TreeNode {
                rect: Rect::new(0, g.cols() - 1, 0, g.rows() - 1),
                split: None,
                children: None,
                parent: None,
                depth: 0,
            }],
            leaves: vec![0],
            depth: 0,
        }
    }

    /// Random splitting until `m` leaves exist.
    pub fn random<R: Rng + ?Sized>(g: &GeoSums, m: usize, rng: &mut R) -> Result<Self, TreeError> {
        if m == 0 || g.occupied_cells() < m {
            return Err(TreeError::TooFewCells {
                wanted: m,
                available: g.occupied_cells(),
            });
        }
        let mut tree = Self::root_only(g);
        tree.grow(g, 0, m, rng);
        tree.compact();
        Ok(tree)
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Leaf node ids in pre-order.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn leaf_rects(&self) -> Vec<Rect> {
        self.leaves.iter().map(|&l| self.nodes[l].rect).collect()
    }

    /// Maximum node depth.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn non_leaves_at_depth(&self, depth: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&n| self.nodes[n].depth == depth && !self.nodes[n].is_leaf())
            .collect()
    }

    /// Node ids of the sub-tree rooted at `node`, in pre-order.
    pub fn subtree(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            out.push(n);
            if let Some([a, b]) = self.nodes[n].children {
                stack.push(b);
                stack.push(a);
            }
        }
        out
    }

    pub fn leaf_count_under(&self, node: usize) -> usize {
        self.subtree(node)
            .into_iter()
            .filter(|&n| self.nodes[n].is_leaf())
            .count()
    }

    /// Position in [`PartitionTree::leaves`] of each leaf under `node`.
    pub fn leaf_positions_under(&self, node: usize) -> std::ops::Range<usize> {
        let under: Vec<usize> = self
            .subtree(node)
            .into_iter()
            .filter(|&n| self.nodes[n].is_leaf())
            .collect();
        let first = self
            .leaves
            .iter()
            .position(|&l| l == under[0])
            .expect("leaf listed");
        first..first + under.len()
    }

    /// Splits leaves under `start` at random until it holds `target` leaves.
    fn grow<R: Rng + ?Sized>(&mut self, g: &GeoSums, start: usize, target: usize, rng: &mut R) {
        let mut frontier = vec![start];
        while frontier.len() < target {
            let open: Vec<usize> = (0..frontier.len())
                .filter(|&i| is_splittable(g, &self.nodes[frontier[i]].rect))
                .collect();
            let &pick = open
                .choose(rng)
                .expect("a leaf with two distinct positions exists while leaves < cells");
            let leaf = frontier[pick];
            let rect = self.nodes[leaf].rect;
            let split = random_split(g, &rect, rng).expect("leaf is splittable");
            let (a, b) = split.children(&rect).expect("admissible split");
            let depth = self.nodes[leaf].depth + 1;
            let ia = self.nodes.len();
            for r in [a, b] {
                self.nodes.push(TreeNode {
                    rect: r,
                    split: None,
                    children: None,
                    parent: Some(leaf),
                    depth,
                });
            }
            self.nodes[leaf].split = Some(split);
            self.nodes[leaf].children = Some([ia, ia + 1]);
            frontier.swap_remove(pick);
            frontier.push(ia);
            frontier.push(ia + 1);
        }
    }

    /// Renumbers nodes in pre-order, dropping unreachable ones.
    fn compact(&mut self) {
        let order = self.subtree(0);
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        for (i, &n) in order.iter().enumerate() {
            new_id[n] = i;
        }
        let mut nodes = Vec::with_capacity(order.len());
        for &n in &order {
            let old = &self.nodes[n];
            nodes.push(TreeNode {
                rect: old.rect,
                split: old.split,
                children: old.children.map(|[a, b]| [new_id[a], new_id[b]]),
                parent: old.parent.map(|p| new_id[p]),
                depth: old.depth,
            });
        }
        self.leaves = (0..nodes.len()).filter(|&n| nodes[n].is_leaf()).collect();
        self.depth = nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        self.nodes = nodes;
    }

    /// Discards the sub-tree under a non-leaf `node` and regrows it randomly
    /// with the same number of leaves.
    pub fn reconstruct_subtree<R: Rng + ?Sized>(
        &self,
        g: &GeoSums,
        node: usize,
        rng: &mut R,
    ) -> Result<Self, TreeError> {
        let n = self.nodes.get(node).ok_or(TreeError::NoSuchNode(node))?;
        if n.is_leaf() {
            return Err(TreeError::LeafNode(node));
        }
        let leaves = self.leaf_count_under(node);
        let mut tree = self.clone();
        tree.nodes[node].children = None;
        tree.nodes[node].split = None;
        tree.grow(g, node, leaves, rng);
        tree.compact();
        Ok(tree)
    }

    /// New rects for the sub-tree under `target` if it switched to `split`,
    /// or `None` if a descendant split falls outside its rect or a leaf
    /// would be empty.
    fn respliced_rects(&self, g: &GeoSums, target: usize, split: Split) -> Option<Vec<(usize, Rect)>> {
        let mut out = Vec::new();
        let mut stack = vec![(target, self.nodes[target].rect)];
        while let Some((n, rect)) = stack.pop() {
            out.push((n, rect));
            let node = &self.nodes[n];
            match node.children {
                None => {
                    if g.region_count(&rect) == 0 {
                        return None;
                    }
                }
                Some([a, b]) => {
                    let s = if n == target {
                        split
                    } else {
                        node.split.expect("internal node has a split")
                    };
                    let (ra, rb) = s.children(&rect)?;
                    stack.push((b, rb));
                    stack.push((a, ra));
                }
            }
        }
        Some(out)
    }

    /// Every single-node hyperplane change inside the sub-tree rooted at
    /// `node` that keeps all leaves nonempty, ordered by (node pre-order,
    /// axis, index). The current split of each node is excluded.
    pub fn enumerate_hyperplane_moves(&self, g: &GeoSums, node: usize) -> Vec<HyperplaneMove> {
        let mut out = Vec::new();
        if node >= self.nodes.len() {
            return out;
        }
        for target in self.subtree(node) {
            let t = &self.nodes[target];
            let Some(current) = t.split else { continue };
            for axis in Axis::BOTH {
                let (lo, hi) = axis.span(&t.rect);
                for index in lo..hi {
                    let to = Split::new(axis, index);
                    if to == current {
                        continue;
                    }
                    if self.respliced_rects(g, target, to).is_some() {
                        out.push(HyperplaneMove {
                            target,
                            from: current,
                            to,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn apply_hyperplane_move(&self, g: &GeoSums, mv: &HyperplaneMove) -> Result<Self, TreeError> {
        let node = self
            .nodes
            .get(mv.target)
            .ok_or(TreeError::NoSuchNode(mv.target))?;
        if node.split != Some(mv.from) {
            return Err(TreeError::StaleMove(mv.target));
        }
        let rects = self
            .respliced_rects(g, mv.target, mv.to)
            .ok_or(TreeError::StaleMove(mv.target))?;
        let mut tree = self.clone();
        tree.nodes[mv.target].split = Some(mv.to);
        for (n, r) in rects {
            tree.nodes[n].rect = r;
        }
        Ok(tree)
    }

    /// Photo count per leaf, in leaf order.
    pub fn leaf_counts(&self, g: &GeoSums) -> Vec<usize> {
        self.leaves
            .iter()
            .map(|&l| g.region_count(&self.nodes[l].rect))
            .collect()
    }

    /// Structural self-check: shape, rect propagation, nonempty leaves and
    /// the leaves partitioning all photos.
    pub fn check(&self, g: &GeoSums) -> Vec<String> {
        let mut out = Vec::new();
        let root = &self.nodes[0];
        if root.rect != Rect::new(0, g.cols() - 1, 0, g.rows() - 1) {
            out.push(format!("root rect {} is not the full grid", root.rect));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match (n.children, n.split) {
                (None, None) => {
                    if g.region_count(&n.rect) == 0 {
                        out.push(format!("leaf {i} is empty"));
                    }
                }
                (Some([a, b]), Some(s)) => match s.children(&n.rect) {
                    Some((ra, rb)) => {
                        if self.nodes[a].rect != ra || self.nodes[b].rect != rb {
                            out.push(format!("node {i} children do not match split {s}"));
                        }
                        if self.nodes[a].depth != n.depth + 1 || self.nodes[b].depth != n.depth + 1 {
                            out.push(format!("node {i} children have wrong depth"));
                        }
                    }
                    None => out.push(format!("node {i} split {s} outside its rect")),
                },
                _ => out.push(format!("node {i} has inconsistent split/children")),
            }
        }
        let total: usize = self.leaf_counts(g).iter().sum();
        if total != g.total_count() {
            out.push(format!(
                "leaves hold {total} photos, instance has {}",
                g.total_count()
            ));
        }
        out
    }
}

impl fmt::Display for PartitionTree {
    /// Pre-order dump, one node per line, indented by depth.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in self.subtree(0) {
            let node = &self.nodes[n];
            let indent = "  ".repeat(node.depth);
            match node.split {
                Some(s) => writeln!(f, "{indent}n{n} d{} {} split {s}", node.depth, node.rect)?,
                None => writeln!(f, "{indent}n{n} d{} {} leaf", node.depth, node.rect)?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{t4, t9};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tree_from_splits(g: &GeoSums, splits: &[(usize, Split)]) -> PartitionTree {
        // splits applied in order to the given node id of the growing arena
        let mut tree = PartitionTree::root_only(g);
        for &(node, s) in splits {
            let rect = tree.nodes[node].rect;
            let (a, b) = s.children(&rect).unwrap();
            let ia = tree.nodes.len();
            let depth = tree.nodes[node].depth + 1;
            for r in [a, b] {
                tree.nodes.push(TreeNode {
                    rect: r,
                    split: None,
                    children: None,
                    parent: Some(node),
                    depth,
                });
            }
            tree.nodes[node].split = Some(s);
            tree.nodes[node].children = Some([ia, ia + 1]);
        }
        tree.compact();
        tree
    }

    #[test]
    fn t4_two_leaves_are_balanced() {
        let g = GeoSums::build(&t4());
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tree = PartitionTree::random(&g, 2, &mut rng).unwrap();
            assert_eq!(tree.leaf_counts(&g), vec![2, 2]);
        }
    }

    #[test]
    fn t9_full_refinement() {
        let g = GeoSums::build(&t9());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tree = PartitionTree::random(&g, 9, &mut rng).unwrap();
        assert_eq!(tree.leaf_counts(&g), vec![1; 9]);
        assert!(tree.check(&g).is_empty());
    }

    #[test]
    fn too_many_leaves_is_an_error() {
        let g = GeoSums::build(&t4());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            PartitionTree::random(&g, 5, &mut rng),
            Err(TreeError::TooFewCells {
                wanted: 5,
                available: 4
            })
        );
    }

    #[test]
    fn reconstructing_a_leaf_fails() {
        let g = GeoSums::build(&t4());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tree = PartitionTree::random(&g, 2, &mut rng).unwrap();
        let leaf = tree.leaves()[0];
        assert_eq!(
            tree.reconstruct_subtree(&g, leaf, &mut rng),
            Err(TreeError::LeafNode(leaf))
        );
    }

    #[test]
    fn reconstructing_a_row_keeps_the_only_refinement() {
        let g = GeoSums::build(&t9());
        // root: rows <= 0 vs rest; the bottom row is refined into 3 singletons
        let tree = tree_from_splits(
            &g,
            &[
                (0, Split::new(Axis::Latitude, 0)),
                (1, Split::new(Axis::Longitude, 0)),
                (4, Split::new(Axis::Longitude, 1)),
            ],
        );
        let row = 1;
        assert_eq!(tree.node(row).rect, Rect::new(0, 2, 0, 0));
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rebuilt = tree.reconstruct_subtree(&g, row, &mut rng).unwrap();
            let mut rects: Vec<Rect> = rebuilt.leaf_rects();
            rects.sort();
            let mut expected = tree.leaf_rects();
            expected.sort();
            assert_eq!(rects, expected);
        }
    }

    #[test]
    fn root_moves_on_t9() {
        let g = GeoSums::build(&t9());
        let tree = tree_from_splits(&g, &[(0, Split::new(Axis::Longitude, 0))]);
        let moves: Vec<Split> = tree
            .enumerate_hyperplane_moves(&g, 0)
            .into_iter()
            .map(|m| m.to)
            .collect();
        assert_eq!(
            moves,
            vec![
                Split::new(Axis::Longitude, 1),
                Split::new(Axis::Latitude, 0),
                Split::new(Axis::Latitude, 1)
            ]
        );
        assert_eq!(tree.leaf_counts(&g), vec![3, 6]);
        let mv = tree.enumerate_hyperplane_moves(&g, 0)[0];
        let moved = tree.apply_hyperplane_move(&g, &mv).unwrap();
        assert_eq!(moved.leaf_counts(&g), vec![6, 3]);
        assert!(moved.check(&g).is_empty());

        let back = HyperplaneMove {
            target: 0,
            from: mv.to,
            to: mv.from,
        };
        assert_eq!(moved.apply_hyperplane_move(&g, &back).unwrap(), tree);
        // the original move no longer applies to the moved tree
        assert_eq!(
            moved.apply_hyperplane_move(&g, &mv),
            Err(TreeError::StaleMove(0))
        );
    }

    #[test]
    fn strip_with_one_split_has_no_moves() {
        let g = GeoSums::build(&t9());
        // column 0 (a 1x3 strip) split into bottom cell and the 2 above;
        // the node over rows 1..=2 of column 0 is what we inspect
        let tree = tree_from_splits(
            &g,
            &[
                (0, Split::new(Axis::Longitude, 0)),
                (1, Split::new(Axis::Latitude, 0)),
                (4, Split::new(Axis::Latitude, 1)),
            ],
        );
        let strip = (0..tree.nodes().len())
            .find(|&n| tree.node(n).rect == Rect::new(0, 0, 1, 2))
            .unwrap();
        assert!(!tree.node(strip).is_leaf());
        assert!(tree.enumerate_hyperplane_moves(&g, strip).is_empty());
    }

    #[test]
    fn dump_is_preorder() {
        let g = GeoSums::build(&t4());
        let tree = tree_from_splits(&g, &[(0, Split::new(Axis::Longitude, 0))]);
        assert_eq!(
            tree.to_string(),
            "n0 d0 C[0..1] L[0..1] split Lng@0\n  n1 d1 C[0..0] L[0..1] leaf\n  n2 d1 C[1..1] L[0..1] leaf\n"
        );
    }
}
