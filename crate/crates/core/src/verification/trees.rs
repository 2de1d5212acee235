//! Enumeration of all non-isomorphic rooted trees with up to n buyers,
//! canonically labeled in breadth-first order. The exhaustiveness substrate
//! for the property suites.

use crate::error::{Error, Result};
use crate::network::{NodeId, SocialTree};

const MAX_BUYERS: usize = 9;

/// All non-isomorphic rooted trees with 1..=max_buyers buyers, smaller trees
/// first; within one size, trees follow the canonical level-sequence order.
///
/// Counts per buyer count are 1, 2, 4, 9, 20, 48, 115, 286, 719.
pub fn enumerate_rooted_trees(max_buyers: usize) -> Result<Vec<SocialTree>> {
    if !(1..=MAX_BUYERS).contains(&max_buyers) {
        return Err(Error::InvalidParameter("buyer bound must lie in 1..=9"));
    }
    let mut trees = Vec::new();
    for buyers in 1..=max_buyers {
        for levels in LevelSequences::new(buyers + 1) {
            trees.push(tree_from_levels(&levels));
        }
    }
    Ok(trees)
}

/// Canonical level sequences of rooted trees on `nodes` vertices (root at
/// level 1), in decreasing lexicographic order: the path first, the star
/// last. Each sequence is the preorder listing of node depths of the
/// canonical representative, so no two sequences are isomorphic.
struct LevelSequences {
    levels: Vec<usize>,
    done: bool,
}

impl LevelSequences {
    fn new(nodes: usize) -> Self {
        LevelSequences { levels: (1..=nodes).collect(), done: false }
    }
}

impl Iterator for LevelSequences {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let current = self.levels.clone();
        // Successor: find the rightmost entry above 2, drop it by one by
        // copying the segment that starts at its new parent.
        match self.levels.iter().rposition(|&l| l > 2) {
            None => self.done = true,
            Some(p) => {
                let q = self.levels[..p]
                    .iter()
                    .rposition(|&l| l == self.levels[p] - 1)
                    .expect("a shallower ancestor precedes any deep node");
                for i in p..self.levels.len() {
                    self.levels[i] = self.levels[i - (p - q)];
                }
            }
        }
        Some(current)
    }
}

/// Converts a preorder level sequence into a tree labeled in breadth-first
/// order (children of one node keep their canonical relative order).
fn tree_from_levels(levels: &[usize]) -> SocialTree {
    let n = levels.len();
    // Parent of position i: the nearest earlier position one level up.
    let mut parent_pos = vec![0usize; n];
    for i in 1..n {
        parent_pos[i] = (0..i)
            .rev()
            .find(|&j| levels[j] == levels[i] - 1)
            .expect("preorder sequence has an ancestor for every node");
    }
    let mut children_pos: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        children_pos[parent_pos[i]].push(i);
    }
    let mut id_of_pos = vec![0 as NodeId; n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    let mut next_id: NodeId = 0;
    let mut edges = Vec::with_capacity(n - 1);
    while let Some(pos) = queue.pop_front() {
        id_of_pos[pos] = next_id;
        next_id += 1;
        for &c in &children_pos[pos] {
            queue.push_back(c);
        }
    }
    for i in 1..n {
        edges.push((id_of_pos[parent_pos[i]], id_of_pos[i]));
    }
    SocialTree::from_edges(&edges).expect("level sequences encode valid trees")
}
