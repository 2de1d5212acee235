//! Tree-shaped social network, diffusion action profiles, and the derived
//! structure (branches, depths, seller-to-buyer paths) the mechanisms consume.
//!
//! The seller is node 0 and the root of the tree; buyers are 1..=k. A buyer's
//! diffusion neighbours are her children: she cannot re-inform her parent.

use crate::error::{ActionError, Error, Result};

pub type NodeId = usize;

/// The seller's reserved node id.
pub const SELLER: NodeId = 0;

/// A rooted tree over the seller and `k` buyers.
///
/// A freshly built tree contains every node. Effective trees produced by
/// [`SocialTree::effective_tree`] keep the original ids but mark pruned
/// buyers as absent, so depths and paths are preserved for the survivors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocialTree {
    parent: Vec<NodeId>,
    children: Vec<Vec<NodeId>>,
    present: Vec<bool>,
    present_buyers: usize,
}

impl SocialTree {
    /// Builds a validated tree from `(parent, child)` edges.
    ///
    /// Ids must be contiguous 0..=k with 0 the seller; every buyer needs
    /// exactly one parent and a path to the seller. An empty edge list is the
    /// k = 0 market.
    pub fn from_edges(edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let max_id = edges.iter().map(|&(p, c)| p.max(c)).max().unwrap_or(0);
        let node_count = max_id + 1;

        let mut parent: Vec<Option<NodeId>> = vec![None; node_count];
        let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); node_count];
        for &(p, c) in edges {
            if c == SELLER {
                return Err(Error::DuplicateParent { child: SELLER });
            }
            if parent[c].is_some() {
                return Err(Error::DuplicateParent { child: c });
            }
            parent[c] = Some(p);
            children[p].push(c);
        }
        for list in &mut children {
            list.sort_unstable();
        }

        // Contiguity: every id in 1..=max_id must occur as some child.
        for (id, p) in parent.iter().enumerate().skip(1) {
            if p.is_none() {
                // `id` was only ever used as a parent (or not at all).
                if children[id].is_empty() {
                    return Err(Error::NonContiguousIds { missing: id, max: max_id });
                }
                return Err(Error::Disconnected { node: id });
            }
        }

        // Reachability from the seller; unreached nodes with parents form a cycle.
        let mut reached = vec![false; node_count];
        reached[SELLER] = true;
        let mut queue = vec![SELLER];
        while let Some(node) = queue.pop() {
            for &c in &children[node] {
                reached[c] = true;
                queue.push(c);
            }
        }
        if reached.iter().any(|r| !r) {
            return Err(Error::CycleDetected);
        }

        let parent = parent.into_iter().map(|p| p.unwrap_or(SELLER)).collect();
        Ok(SocialTree {
            parent,
            children,
            present: vec![true; node_count],
            present_buyers: node_count - 1,
        })
    }

    /// Total number of buyers the tree was built with (pruned or not).
    pub fn buyer_count(&self) -> usize {
        self.parent.len() - 1
    }

    /// Number of buyers present in this (possibly pruned) tree.
    pub fn reachable_count(&self) -> usize {
        self.present_buyers
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node < self.present.len() && self.present[node]
    }

    /// Parent of a buyer; `None` for the seller.
    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        if node == SELLER {
            None
        } else {
            Some(self.parent[node])
        }
    }

    /// Children of `node` present in this tree, ascending.
    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.children[node]
    }

    pub fn seller_children(&self) -> &[NodeId] {
        &self.children[SELLER]
    }

    pub fn is_seller_child(&self, node: NodeId) -> bool {
        node != SELLER && self.parent[node] == SELLER
    }

    /// Buyers present in this tree, ascending.
    pub fn reachable_buyers(&self) -> impl Iterator<Item = NodeId> + '_ {
        (1..self.present.len()).filter(move |&n| self.present[n])
    }

    /// Buyers in breadth-first order from the seller.
    pub fn bfs_buyers(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.present_buyers);
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(SELLER);
        while let Some(node) = queue.pop_front() {
            if node != SELLER {
                order.push(node);
            }
            for &c in &self.children[node] {
                queue.push_back(c);
            }
        }
        order
    }

    /// Edge distance from the seller. Seller children have depth 1.
    pub fn depth(&self, node: NodeId) -> Result<usize> {
        if !self.contains(node) && node != SELLER {
            return Err(Error::UnknownNode { node });
        }
        let mut d = 0;
        let mut cur = node;
        while cur != SELLER {
            cur = self.parent[cur];
            d += 1;
        }
        Ok(d)
    }

    /// Buyers strictly between the seller and `node`, seller-first.
    ///
    /// These are the path buyers rewarded when `node` wins the item; a seller
    /// child has an empty path.
    pub fn path_to(&self, node: NodeId) -> Result<Vec<NodeId>> {
        if !self.contains(node) {
            return Err(Error::UnknownNode { node });
        }
        let mut path = Vec::new();
        let mut cur = self.parent[node];
        while cur != SELLER {
            path.push(cur);
            cur = self.parent[cur];
        }
        path.reverse();
        Ok(path)
    }

    /// The tree actually informed of the sale under `actions`.
    ///
    /// Buyers hidden by an ancestor are absent together with their whole
    /// subtree; the seller's own children are always informed. Strict
    /// validation rejects opt-outs; [`ProfileValidation::AllowOptOut`] admits
    /// nil reports from informed non-seller-children (used when exploring
    /// deviations) and prunes them like hidden buyers.
    pub fn effective_tree(
        &self,
        actions: &ActionProfile,
        mode: ProfileValidation,
    ) -> Result<SocialTree> {
        let participant = actions.participant_mask(self, mode)?;
        let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); self.parent.len()];
        for (node, list) in children.iter_mut().enumerate() {
            if node != SELLER && !participant[node] {
                continue;
            }
            let reported: &[NodeId] = if node == SELLER {
                &self.children[SELLER]
            } else {
                match actions.action(node) {
                    Action::Report(set) => set,
                    Action::Nil => &[],
                }
            };
            list.extend(reported.iter().copied().filter(|&c| participant[c]));
        }
        let present_buyers = participant.iter().skip(1).filter(|&&p| p).count();
        let mut present = participant;
        present[SELLER] = true;
        Ok(SocialTree { parent: self.parent.clone(), children, present, present_buyers })
    }

    /// Branch decomposition of a (possibly pruned) tree: one branch per
    /// present seller child, ordered by descending size with ties broken by
    /// ascending root id.
    pub fn branches(&self) -> BranchDecomposition {
        let mut branches: Vec<Branch> = Vec::new();
        let total = self.present_buyers;
        for &root in &self.children[SELLER] {
            if !self.present[root] {
                continue;
            }
            let mut members = Vec::new();
            let mut queue = vec![root];
            while let Some(node) = queue.pop() {
                members.push(node);
                queue.extend_from_slice(&self.children[node]);
            }
            members.sort_unstable();
            let size = members.len();
            branches.push(Branch { root, members, size, outside: total - size });
        }
        branches.sort_by(|a, b| b.size.cmp(&a.size).then(a.root.cmp(&b.root)));
        BranchDecomposition { branches, total }
    }
}

/// One subtree rooted at a seller child.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub root: NodeId,
    /// Buyers in the branch, ascending.
    pub members: Vec<NodeId>,
    pub size: usize,
    /// Buyers outside the branch; determines the branch price.
    pub outside: usize,
}

/// Ordered branch decomposition of an effective tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchDecomposition {
    branches: Vec<Branch>,
    total: usize,
}

impl BranchDecomposition {
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Total reachable buyers; equals the sum of branch sizes.
    pub fn total_buyers(&self) -> usize {
        self.total
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Branch> {
        self.branches.iter()
    }
}

/// A buyer's diffusion action: nil, or the set of children she informs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Action {
    Nil,
    /// Informed children, ascending; a subset of the buyer's true children.
    Report(Vec<NodeId>),
}

impl Action {
    pub fn is_nil(&self) -> bool {
        matches!(self, Action::Nil)
    }
}

/// How strictly a profile is validated against the feasibility closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileValidation {
    /// Informed buyers must report a set; nil is legal only when unreachable.
    Strict,
    /// Informed non-seller-children may report nil (opt out of the sale);
    /// the deviation space of the incentive checker includes this.
    AllowOptOut,
}

/// Per-buyer diffusion reports.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ActionProfile {
    actions: Vec<Action>,
}

impl ActionProfile {
    /// Full diffusion: every present buyer reports all her children; buyers
    /// pruned from the tree get nil.
    pub fn truthful(tree: &SocialTree) -> Self {
        let actions = (0..=tree.buyer_count())
            .map(|n| {
                if n == SELLER || !tree.contains(n) {
                    Action::Nil
                } else {
                    Action::Report(tree.children[n].clone())
                }
            })
            .collect();
        ActionProfile { actions }
    }

    /// Truthful profile with the given reports substituted, then normalized:
    /// buyers left uninformed by the substitution become nil together with
    /// their subtrees.
    ///
    /// Reported sets must be subsets of the true child sets.
    pub fn with_overrides(tree: &SocialTree, overrides: &[(NodeId, Action)]) -> Result<Self> {
        let mut profile = Self::truthful(tree);
        for (buyer, action) in overrides {
            if *buyer == SELLER || *buyer > tree.buyer_count() {
                return Err(Error::UnknownNode { node: *buyer });
            }
            if let Action::Report(set) = action {
                for &c in set {
                    if !tree.children[*buyer].contains(&c) {
                        return Err(Error::InfeasibleAction {
                            buyer: *buyer,
                            reason: ActionError::NotAChild { child: c },
                        });
                    }
                }
                let mut set = set.clone();
                set.sort_unstable();
                set.dedup();
                profile.actions[*buyer] = Action::Report(set);
            } else {
                profile.actions[*buyer] = Action::Nil;
            }
        }
        profile.normalize(tree);
        Ok(profile)
    }

    /// Marks every buyer not informed under the current plans as nil.
    fn normalize(&mut self, tree: &SocialTree) {
        let informed = self.informed_mask(tree);
        for (action, informed) in self.actions.iter_mut().zip(informed).skip(1) {
            if !informed {
                *action = Action::Nil;
            }
        }
    }

    /// Who ends up informed and participating if the current entries are
    /// executed: seller children are always informed; a deeper buyer is
    /// informed when her parent participates and reported her. A nil entry
    /// means not participating.
    fn informed_mask(&self, tree: &SocialTree) -> Vec<bool> {
        let mut informed = vec![false; self.actions.len()];
        for node in tree.bfs_buyers() {
            let p = tree.parent[node];
            let parent_participates =
                p == SELLER || (informed[p] && !self.actions[p].is_nil());
            if parent_participates {
                informed[node] = p == SELLER
                    || matches!(&self.actions[p], Action::Report(set) if set.contains(&node));
            }
        }
        informed
    }

    pub fn action(&self, buyer: NodeId) -> &Action {
        &self.actions[buyer]
    }

    /// Validates feasibility and returns the participant mask (true for
    /// buyers who are informed and did not opt out).
    pub fn participant_mask(
        &self,
        tree: &SocialTree,
        mode: ProfileValidation,
    ) -> Result<Vec<bool>> {
        if self.actions.len() != tree.buyer_count() + 1 {
            return Err(Error::InvalidParameter("action profile size does not match tree"));
        }
        for buyer in tree.reachable_buyers() {
            if let Action::Report(set) = &self.actions[buyer] {
                for &c in set {
                    if !tree.children[buyer].contains(&c) {
                        return Err(Error::InfeasibleAction {
                            buyer,
                            reason: ActionError::NotAChild { child: c },
                        });
                    }
                }
            }
        }
        let informed = self.informed_mask(tree);
        let mut participant = vec![false; self.actions.len()];
        for (buyer, entry) in self.actions.iter().enumerate().skip(1) {
            let nil = entry.is_nil();
            if informed[buyer] {
                if nil {
                    if tree.is_seller_child(buyer) {
                        return Err(Error::InfeasibleAction {
                            buyer,
                            reason: ActionError::SellerChildOptOut,
                        });
                    }
                    if mode == ProfileValidation::Strict {
                        return Err(Error::InfeasibleAction {
                            buyer,
                            reason: ActionError::ReachableNil,
                        });
                    }
                } else {
                    participant[buyer] = true;
                }
            } else if !nil {
                return Err(Error::InfeasibleAction {
                    buyer,
                    reason: ActionError::UnreachableReport,
                });
            }
        }
        Ok(participant)
    }
}

/// Enumerates feasible action profiles of `tree`.
///
/// With a deviator, only her report varies over the 2^c subsets of her c
/// children (others truthful); subsets appear in ascending bitmask order over
/// her sorted child list. Without one, all distinct feasible profiles are
/// produced by closure enumeration: every informed buyer chooses a subset of
/// her children, top-down.
pub fn enumerate_action_profiles(
    tree: &SocialTree,
    deviator: Option<NodeId>,
) -> Result<Vec<ActionProfile>> {
    if let Some(d) = deviator {
        if d == SELLER || !tree.contains(d) {
            return Err(Error::UnknownNode { node: d });
        }
        let children = tree.children(d);
        let mut profiles = Vec::with_capacity(1 << children.len());
        for mask in 0u64..(1u64 << children.len()) {
            let subset: Vec<NodeId> = children
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &c)| c)
                .collect();
            profiles.push(ActionProfile::with_overrides(tree, &[(d, Action::Report(subset))])?);
        }
        return Ok(profiles);
    }

    // Closure enumeration: process buyers in BFS order so each buyer's
    // informed status is settled before her own subset is chosen.
    let order = tree.bfs_buyers();
    let mut profiles = Vec::new();
    let mut actions = vec![Action::Nil; tree.buyer_count() + 1];
    fn recurse(
        tree: &SocialTree,
        order: &[NodeId],
        idx: usize,
        actions: &mut Vec<Action>,
        out: &mut Vec<ActionProfile>,
    ) {
        if idx == order.len() {
            out.push(ActionProfile { actions: actions.clone() });
            return;
        }
        let buyer = order[idx];
        let p = tree.parent[buyer];
        let informed = p == SELLER
            || matches!(&actions[p], Action::Report(set) if set.contains(&buyer));
        if !informed {
            actions[buyer] = Action::Nil;
            recurse(tree, order, idx + 1, actions, out);
            return;
        }
        let children = tree.children(buyer);
        for mask in 0u64..(1u64 << children.len()) {
            let subset: Vec<NodeId> = children
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &c)| c)
                .collect();
            actions[buyer] = Action::Report(subset);
            recurse(tree, order, idx + 1, actions, out);
        }
        actions[buyer] = Action::Nil;
    }
    recurse(tree, &order, 0, &mut actions, &mut profiles);
    profiles.sort();
    profiles.dedup();
    Ok(profiles)
}
