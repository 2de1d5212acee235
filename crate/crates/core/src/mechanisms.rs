//! Execution of the posted-price mechanisms on concrete instances.
//!
//! `run_baseline` sells to the seller's neighbours at one posted price.
//! `run_fpdm` runs the diffusion mechanism: branches are visited largest
//! first, each priced for the buyers outside it; within the first branch that
//! has claimers the item goes to the claimer of smallest depth, then largest
//! reported child count, then a tie rule (seeded draw or exact enumeration).
//! The winner pays her branch price; buyers between her and the seller
//! receive geometric path rewards.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{
    ActionProfile, NodeId, ProfileValidation, SocialTree, SELLER,
};
use crate::pricing::{branch_prices, optimal_price};
use crate::scalar::{half, Scalar};

/// Private valuations, indexed by buyer id. Buyers pruned from the sale may
/// be left without one.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationProfile<S: Scalar> {
    values: Vec<Option<S>>,
}

impl<S: Scalar> ValuationProfile<S> {
    pub fn empty(buyer_count: usize) -> Self {
        ValuationProfile { values: vec![None; buyer_count + 1] }
    }

    /// Valuations for every buyer: `values[i]` belongs to buyer i + 1.
    pub fn from_full(values: &[S]) -> Result<Self> {
        let mut profile = Self::empty(values.len());
        for (i, &v) in values.iter().enumerate() {
            profile.set(i + 1, v)?;
        }
        Ok(profile)
    }

    pub fn from_pairs(buyer_count: usize, pairs: &[(NodeId, S)]) -> Result<Self> {
        let mut profile = Self::empty(buyer_count);
        for &(buyer, v) in pairs {
            if profile.get(buyer).is_some() {
                return Err(Error::InvalidParameter("duplicate valuation for a buyer"));
            }
            profile.set(buyer, v)?;
        }
        Ok(profile)
    }

    pub fn set(&mut self, buyer: NodeId, value: S) -> Result<()> {
        if buyer == SELLER || buyer >= self.values.len() {
            return Err(Error::UnknownNode { node: buyer });
        }
        if !(value >= S::zero() && value <= S::one()) {
            return Err(Error::ValuationOutOfRange { buyer });
        }
        self.values[buyer] = Some(value);
        Ok(())
    }

    pub fn get(&self, buyer: NodeId) -> Option<S> {
        self.values.get(buyer).copied().flatten()
    }

    pub fn buyer_count(&self) -> usize {
        self.values.len() - 1
    }

    fn require(&self, buyer: NodeId) -> Result<S> {
        self.get(buyer).ok_or(Error::MissingValuation { buyer })
    }

    /// Overwrites all buyer valuations without range checks; the scan loops
    /// construct values inside [0, 1] by design.
    pub(crate) fn fill_unchecked(&mut self, values: &[S]) {
        debug_assert_eq!(values.len() + 1, self.values.len());
        for (i, &v) in values.iter().enumerate() {
            self.values[i + 1] = Some(v);
        }
    }

    pub(crate) fn set_unchecked(&mut self, buyer: NodeId, value: S) {
        self.values[buyer] = Some(value);
    }
}

/// Whether path rewards may go negative when a branch price undercuts the
/// neighbourhood base price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// Payment table as printed: path buyers pay
    /// `(p_base - p_w) * alpha * (1/2)^d`, a reward only when `p_w > p_base`.
    Literal,
    /// Rewards floored at zero: `-max(0, p_w - p_base) * alpha * (1/2)^d`.
    /// Preserves individual rationality on every tree.
    Clamped,
}

/// Claim rule at the posted price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClaimThreshold {
    /// Valuation strictly above the price (baseline wording).
    Strict,
    /// Valuation at or above the price (diffusion wording).
    Weak,
}

/// Resolution of exact ties after the depth and child-count filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieMode {
    /// One uniform seeded draw.
    Seeded,
    /// Enumerate every tied winner with equal weight (exact expectations).
    Expectation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismConfig<S: Scalar> {
    /// Reward scale factor in [0, 1].
    pub alpha: S,
    pub reward_mode: RewardMode,
    pub threshold: ClaimThreshold,
    pub tie_mode: TieMode,
    /// Whether informed buyers may opt out (used by the deviation checker).
    pub validation: ProfileValidation,
}

impl<S: Scalar> MechanismConfig<S> {
    /// Diffusion-mechanism defaults: clamped rewards, weak claim threshold,
    /// seeded ties, strict profile validation.
    pub fn fpdm(alpha: S) -> Result<Self> {
        if !(alpha >= S::zero() && alpha <= S::one()) {
            return Err(Error::InvalidAlpha);
        }
        Ok(MechanismConfig {
            alpha,
            reward_mode: RewardMode::Clamped,
            threshold: ClaimThreshold::Weak,
            tie_mode: TieMode::Seeded,
            validation: ProfileValidation::Strict,
        })
    }

    /// Baseline defaults: strict claim threshold, seeded ties; alpha unused.
    pub fn baseline() -> Self {
        MechanismConfig {
            alpha: S::zero(),
            reward_mode: RewardMode::Clamped,
            threshold: ClaimThreshold::Strict,
            tie_mode: TieMode::Seeded,
            validation: ProfileValidation::Strict,
        }
    }

    pub fn with_reward_mode(mut self, mode: RewardMode) -> Self {
        self.reward_mode = mode;
        self
    }

    pub fn with_threshold(mut self, threshold: ClaimThreshold) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_tie_mode(mut self, tie_mode: TieMode) -> Self {
        self.tie_mode = tie_mode;
        self
    }

    pub fn with_validation(mut self, validation: ProfileValidation) -> Self {
        self.validation = validation;
        self
    }

    fn claims(&self, valuation: S, price: S) -> bool {
        match self.threshold {
            ClaimThreshold::Strict => valuation > price,
            ClaimThreshold::Weak => valuation >= price,
        }
    }

    fn check_alpha(&self) -> Result<()> {
        if self.alpha >= S::zero() && self.alpha <= S::one() {
            Ok(())
        } else {
            Err(Error::InvalidAlpha)
        }
    }
}

/// One branch visit during allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchVisit<S: Scalar> {
    pub root: NodeId,
    pub price: S,
    /// Claimers in the branch, ascending.
    pub claimers: Vec<NodeId>,
}

/// How the winner was singled out within the winning branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TieBreakTrace {
    pub claimers: Vec<NodeId>,
    /// Claimers of minimal depth.
    pub after_depth: Vec<NodeId>,
    /// Of those, claimers with the largest reported child count.
    pub after_children: Vec<NodeId>,
    pub chosen: NodeId,
    /// True when a seeded draw decided among several.
    pub seeded: bool,
}

/// Ordered record of the allocation decision.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTrace<S: Scalar> {
    pub visits: Vec<BranchVisit<S>>,
    pub tie_break: Option<TieBreakTrace>,
}

/// Result of one mechanism run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome<S: Scalar> {
    pub winner: Option<NodeId>,
    /// Root of the winning branch; `None` for the baseline or when unsold.
    pub winning_branch: Option<NodeId>,
    /// Price charged to the winner.
    pub price: Option<S>,
    /// Per-buyer payments, indexed by id; positive pays, negative receives.
    pub payments: Vec<S>,
    /// Winner's payment, zero when unsold.
    pub gross_revenue: S,
    /// Sum of all payments.
    pub net_revenue: S,
    pub trace: DecisionTrace<S>,
}

impl<S: Scalar> Outcome<S> {
    pub fn payment(&self, buyer: NodeId) -> S {
        self.payments[buyer]
    }

    pub fn is_sold(&self) -> bool {
        self.winner.is_some()
    }
}

/// Exact utilities `u_i = pi_i v_i - p_i` for an outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityVector<S: Scalar> {
    values: Vec<S>,
}

impl<S: Scalar> UtilityVector<S> {
    pub fn get(&self, buyer: NodeId) -> S {
        self.values[buyer]
    }

    /// Per-node utilities indexed by id (entry 0 is the seller's zero).
    pub fn values(&self) -> &[S] {
        &self.values
    }
}

/// Utilities of every buyer under `outcome`; the winner's valuation must be
/// present.
pub fn utilities<S: Scalar>(
    outcome: &Outcome<S>,
    valuations: &ValuationProfile<S>,
) -> Result<UtilityVector<S>> {
    // Subtract from zero so untouched buyers read +0.0, not -0.0.
    let mut values: Vec<S> =
        outcome.payments.iter().map(|&p| S::zero() - p).collect();
    values[0] = S::zero();
    if let Some(w) = outcome.winner {
        values[w] = valuations.require(w)? - outcome.payments[w];
    }
    Ok(UtilityVector { values })
}

/// An outcome together with its probability under the tie rule.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedOutcome<S: Scalar> {
    pub weight: S,
    pub outcome: Outcome<S>,
}

/// All outcomes a run can produce, with uniform weights over tied winners.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution<S: Scalar> {
    outcomes: Vec<WeightedOutcome<S>>,
}

impl<S: Scalar> OutcomeDistribution<S> {
    fn uniform(outcomes: Vec<Outcome<S>>) -> Self {
        let weight = S::from_count(outcomes.len()).recip();
        OutcomeDistribution {
            outcomes: outcomes.into_iter().map(|outcome| WeightedOutcome { weight, outcome }).collect(),
        }
    }

    pub fn outcomes(&self) -> &[WeightedOutcome<S>] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn total_weight(&self) -> S {
        self.outcomes.iter().map(|w| w.weight).sum()
    }

    /// Expected utility of one buyer; weights are uniform, so this is the
    /// order-fixed sum over outcomes divided by their count.
    pub fn expected_utility(&self, buyer: NodeId, valuations: &ValuationProfile<S>) -> Result<S> {
        let mut sum = S::zero();
        for w in &self.outcomes {
            sum = sum + utilities(&w.outcome, valuations)?.get(buyer);
        }
        Ok(sum / S::from_count(self.outcomes.len()))
    }

    pub fn expected_gross(&self) -> S {
        let sum: S = self.outcomes.iter().map(|w| w.outcome.gross_revenue).sum();
        sum / S::from_count(self.outcomes.len())
    }
}

struct MemberInfo<S: Scalar> {
    id: NodeId,
    depth: usize,
    reported_children: usize,
    /// Strict ancestors below the seller, with their depths.
    path: Vec<(NodeId, usize)>,
    _marker: std::marker::PhantomData<S>,
}

struct PreparedBranch<S: Scalar> {
    root: NodeId,
    price: S,
    /// Sorted by depth asc, reported child count desc, id asc, so the first
    /// claimer encountered is the allocation winner modulo exact ties.
    members: Vec<MemberInfo<S>>,
}

/// A validated diffusion-mechanism instance with everything that does not
/// depend on valuations precomputed: effective tree, branch order, prices,
/// depths, and reward paths.
pub(crate) struct PreparedFpdm<S: Scalar> {
    effective: SocialTree,
    branches: Vec<PreparedBranch<S>>,
    p_base: S,
    config: MechanismConfig<S>,
    buyer_count: usize,
}

pub(crate) struct Selection<S: Scalar> {
    visits: Vec<BranchVisit<S>>,
    winning: Option<WinnerSet>,
}

impl<S: Scalar> Selection<S> {
    pub(crate) fn winning(&self) -> Option<&WinnerSet> {
        self.winning.as_ref()
    }
}

pub(crate) struct WinnerSet {
    pub(crate) branch_index: usize,
    claimers: Vec<NodeId>,
    after_depth: Vec<NodeId>,
    /// Exactly tied winners, ascending.
    pub(crate) tied: Vec<NodeId>,
}

impl<S: Scalar> PreparedFpdm<S> {
    pub(crate) fn new(
        tree: &SocialTree,
        actions: &ActionProfile,
        config: &MechanismConfig<S>,
    ) -> Result<Self> {
        config.check_alpha()?;
        let effective = tree.effective_tree(actions, config.validation)?;
        let decomp = effective.branches();
        let prices: Vec<S> = branch_prices(&decomp);
        // The seller always informs her true neighbours, so the base price
        // refers to the true child count even if a deviation pruned one.
        let p_base = optimal_price(tree.seller_children().len());
        let branches = decomp
            .iter()
            .zip(prices.iter())
            .map(|(branch, &price)| {
                let mut members: Vec<MemberInfo<S>> = branch
                    .members
                    .iter()
                    .map(|&id| {
                        let depth = effective.depth(id).expect("branch member present");
                        let path = effective
                            .path_to(id)
                            .expect("branch member present")
                            .into_iter()
                            .map(|l| (l, effective.depth(l).expect("ancestor present")))
                            .collect();
                        MemberInfo {
                            id,
                            depth,
                            reported_children: effective.children(id).len(),
                            path,
                            _marker: std::marker::PhantomData,
                        }
                    })
                    .collect();
                members.sort_by(|a, b| {
                    a.depth
                        .cmp(&b.depth)
                        .then(b.reported_children.cmp(&a.reported_children))
                        .then(a.id.cmp(&b.id))
                });
                PreparedBranch { root: branch.root, price, members }
            })
            .collect();
        Ok(PreparedFpdm {
            effective,
            branches,
            p_base,
            config: *config,
            buyer_count: tree.buyer_count(),
        })
    }

    pub(crate) fn effective(&self) -> &SocialTree {
        &self.effective
    }

    pub(crate) fn branch_price(&self, index: usize) -> S {
        self.branches[index].price
    }

    pub(crate) fn branch_price_by_root(&self, root: NodeId) -> Option<S> {
        self.branches.iter().find(|b| b.root == root).map(|b| b.price)
    }

    /// Every reachable buyer with her branch index and reward path
    /// (ancestor, depth) pairs.
    pub(crate) fn members_with_paths(
        &self,
    ) -> impl Iterator<Item = (usize, NodeId, &[(NodeId, usize)])> {
        self.branches.iter().enumerate().flat_map(|(branch_index, branch)| {
            branch.members.iter().map(move |m| (branch_index, m.id, m.path.as_slice()))
        })
    }

    /// Payment charged to a path buyer at `depth` when the winner pays
    /// `price`; negative values are rewards.
    pub(crate) fn path_payment(&self, price: S, depth: usize) -> S {
        let scale = self.config.alpha * half::<S>().powi(depth as i32);
        match self.config.reward_mode {
            RewardMode::Literal => (self.p_base - price) * scale,
            RewardMode::Clamped => -(price - self.p_base).max(S::zero()) * scale,
        }
    }

    pub(crate) fn require_valuations(&self, valuations: &ValuationProfile<S>) -> Result<()> {
        if valuations.buyer_count() != self.buyer_count {
            return Err(Error::InvalidParameter("valuation profile size does not match tree"));
        }
        for buyer in self.effective.reachable_buyers() {
            valuations.require(buyer)?;
        }
        Ok(())
    }

    /// Visits branches in order and finds the exactly-tied winner set of the
    /// first branch with claimers.
    pub(crate) fn select(&self, valuations: &ValuationProfile<S>) -> Result<Selection<S>> {
        let mut visits = Vec::with_capacity(self.branches.len());
        for (branch_index, branch) in self.branches.iter().enumerate() {
            let mut best: Option<(usize, usize)> = None;
            let mut tied: Vec<NodeId> = Vec::new();
            let mut claimers: Vec<NodeId> = Vec::new();
            for m in &branch.members {
                if self.config.claims(valuations.require(m.id)?, branch.price) {
                    claimers.push(m.id);
                    match best {
                        None => {
                            best = Some((m.depth, m.reported_children));
                            tied.push(m.id);
                        }
                        Some(key) if (m.depth, m.reported_children) == key => tied.push(m.id),
                        Some(_) => {}
                    }
                }
            }
            claimers.sort_unstable();
            visits.push(BranchVisit { root: branch.root, price: branch.price, claimers: claimers.clone() });
            if let Some((depth, _)) = best {
                let after_depth: Vec<NodeId> = {
                    let mut v: Vec<NodeId> = branch
                        .members
                        .iter()
                        .filter(|m| m.depth == depth && claimers.binary_search(&m.id).is_ok())
                        .map(|m| m.id)
                        .collect();
                    v.sort_unstable();
                    v
                };
                tied.sort_unstable();
                return Ok(Selection {
                    visits,
                    winning: Some(WinnerSet { branch_index, claimers, after_depth, tied }),
                });
            }
        }
        Ok(Selection { visits, winning: None })
    }

    fn unsold_outcome(&self, visits: Vec<BranchVisit<S>>) -> Outcome<S> {
        Outcome {
            winner: None,
            winning_branch: None,
            price: None,
            payments: vec![S::zero(); self.buyer_count + 1],
            gross_revenue: S::zero(),
            net_revenue: S::zero(),
            trace: DecisionTrace { visits, tie_break: None },
        }
    }

    pub(crate) fn outcome_for(
        &self,
        selection: &Selection<S>,
        winner: NodeId,
        seeded: bool,
    ) -> Outcome<S> {
        let set = selection.winning.as_ref().expect("winner requires a winning set");
        let branch = &self.branches[set.branch_index];
        let price = branch.price;
        let mut payments = vec![S::zero(); self.buyer_count + 1];
        payments[winner] = price;
        let member = branch.members.iter().find(|m| m.id == winner).expect("winner in branch");
        let mut net = price;
        for &(l, depth) in &member.path {
            let p = self.path_payment(price, depth);
            payments[l] = p;
            net = net + p;
        }
        Outcome {
            winner: Some(winner),
            winning_branch: Some(branch.root),
            price: Some(price),
            payments,
            gross_revenue: price,
            net_revenue: net,
            trace: DecisionTrace {
                visits: selection.visits.clone(),
                tie_break: Some(TieBreakTrace {
                    claimers: set.claimers.clone(),
                    after_depth: set.after_depth.clone(),
                    after_children: set.tied.clone(),
                    chosen: winner,
                    seeded,
                }),
            },
        }
    }

    pub(crate) fn run_seeded(&self, valuations: &ValuationProfile<S>, seed: u64) -> Result<Outcome<S>> {
        let selection = self.select(valuations)?;
        match &selection.winning {
            None => Ok(self.unsold_outcome(selection.visits)),
            Some(set) => {
                let (winner, seeded) = if set.tied.len() == 1 {
                    (set.tied[0], false)
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (set.tied[rng.gen_range(0..set.tied.len())], true)
                };
                Ok(self.outcome_for(&selection, winner, seeded))
            }
        }
    }

    pub(crate) fn run_expectation(&self, valuations: &ValuationProfile<S>) -> Result<OutcomeDistribution<S>> {
        let selection = self.select(valuations)?;
        match &selection.winning {
            None => Ok(OutcomeDistribution::uniform(vec![self.unsold_outcome(selection.visits)])),
            Some(set) => Ok(OutcomeDistribution::uniform(
                set.tied.iter().map(|&w| self.outcome_for(&selection, w, false)).collect(),
            )),
        }
    }

    /// Gross revenue only, for simulation loops; same selection logic, no
    /// outcome allocation. The revenue is tie-invariant.
    pub(crate) fn gross_revenue(&self, valuations: &ValuationProfile<S>) -> Result<S> {
        let selection = self.select(valuations)?;
        Ok(match selection.winning {
            Some(set) => self.branches[set.branch_index].price,
            None => S::zero(),
        })
    }
}

/// Runs the diffusion mechanism, breaking exact ties with one seeded draw.
pub fn run_fpdm<S: Scalar>(
    tree: &SocialTree,
    actions: &ActionProfile,
    valuations: &ValuationProfile<S>,
    config: &MechanismConfig<S>,
    seed: u64,
) -> Result<Outcome<S>> {
    let prepared = PreparedFpdm::new(tree, actions, config)?;
    prepared.require_valuations(valuations)?;
    prepared.run_seeded(valuations, seed)
}

/// Runs the diffusion mechanism and enumerates every exactly-tied winner
/// with uniform weight.
pub fn run_fpdm_expectation<S: Scalar>(
    tree: &SocialTree,
    actions: &ActionProfile,
    valuations: &ValuationProfile<S>,
    config: &MechanismConfig<S>,
) -> Result<OutcomeDistribution<S>> {
    let prepared = PreparedFpdm::new(tree, actions, config)?;
    prepared.require_valuations(valuations)?;
    prepared.run_expectation(valuations)
}

fn baseline_claimers<S: Scalar>(
    valuations: &[S],
    price: S,
    config: &MechanismConfig<S>,
) -> Result<Vec<NodeId>> {
    if !(price >= S::zero() && price <= S::one()) {
        return Err(Error::InvalidPrice);
    }
    let mut claimers = Vec::new();
    for (i, &v) in valuations.iter().enumerate() {
        if !(v >= S::zero() && v <= S::one()) {
            return Err(Error::ValuationOutOfRange { buyer: i + 1 });
        }
        if config.claims(v, price) {
            claimers.push(i + 1);
        }
    }
    Ok(claimers)
}

fn baseline_outcome<S: Scalar>(
    valuations: &[S],
    price: S,
    claimers: &[NodeId],
    winner: Option<NodeId>,
    seeded: bool,
) -> Outcome<S> {
    let mut payments = vec![S::zero(); valuations.len() + 1];
    let (gross, tie_break) = match winner {
        Some(w) => {
            payments[w] = price;
            (
                price,
                Some(TieBreakTrace {
                    claimers: claimers.to_vec(),
                    after_depth: claimers.to_vec(),
                    after_children: claimers.to_vec(),
                    chosen: w,
                    seeded,
                }),
            )
        }
        None => (S::zero(), None),
    };
    Outcome {
        winner,
        winning_branch: None,
        price: winner.map(|_| price),
        payments,
        gross_revenue: gross,
        net_revenue: gross,
        trace: DecisionTrace {
            visits: vec![BranchVisit { root: SELLER, price, claimers: claimers.to_vec() }],
            tie_break,
        },
    }
}

/// Baseline mechanism: posts `price` to the neighbours whose valuations are
/// given (buyer i is `valuations[i - 1]`) and picks one claimer uniformly.
pub fn run_baseline<S: Scalar>(
    valuations: &[S],
    price: S,
    config: &MechanismConfig<S>,
    seed: u64,
) -> Result<Outcome<S>> {
    let claimers = baseline_claimers(valuations, price, config)?;
    let (winner, seeded) = match claimers.len() {
        0 => (None, false),
        1 => (Some(claimers[0]), false),
        n => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (Some(claimers[rng.gen_range(0..n)]), true)
        }
    };
    Ok(baseline_outcome(valuations, price, &claimers, winner, seeded))
}

/// Baseline mechanism with every claimer enumerated at uniform weight.
pub fn run_baseline_expectation<S: Scalar>(
    valuations: &[S],
    price: S,
    config: &MechanismConfig<S>,
) -> Result<OutcomeDistribution<S>> {
    let claimers = baseline_claimers(valuations, price, config)?;
    if claimers.is_empty() {
        return Ok(OutcomeDistribution::uniform(vec![baseline_outcome(
            valuations, price, &claimers, None, false,
        )]));
    }
    Ok(OutcomeDistribution::uniform(
        claimers
            .iter()
            .map(|&w| baseline_outcome(valuations, price, &claimers, Some(w), false))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Action;
    use approx::assert_abs_diff_eq;

    fn ten_buyer_tree() -> SocialTree {
        SocialTree::from_edges(&[
            (0, 1),
            (0, 2),
            (0, 3),
            (1, 4),
            (1, 5),
            (1, 6),
            (5, 10),
            (2, 7),
            (2, 8),
            (3, 9),
        ])
        .unwrap()
    }

    fn ten_buyer_valuations() -> ValuationProfile<f64> {
        ValuationProfile::from_full(&[0.6, 0.7, 0.7, 0.5, 0.8, 0.9, 0.3, 0.4, 0.1, 0.5]).unwrap()
    }

    #[test]
    fn ten_buyer_reference_run() {
        let tree = ten_buyer_tree();
        let vals = ten_buyer_valuations();
        let config = MechanismConfig::fpdm(0.1).unwrap().with_reward_mode(RewardMode::Literal);
        let outcome =
            run_fpdm(&tree, &ActionProfile::truthful(&tree), &vals, &config, 7).unwrap();

        assert_eq!(outcome.winner, Some(5));
        assert_eq!(outcome.winning_branch, Some(1));
        assert_abs_diff_eq!(outcome.price.unwrap(), 0.6988271187715792, epsilon = 1e-13);
        assert_abs_diff_eq!(outcome.payment(5), 0.6988271187715792, epsilon = 1e-13);
        assert_abs_diff_eq!(outcome.payment(1), -0.003443329691207133, epsilon = 1e-15);
        for buyer in [2, 3, 4, 6, 7, 8, 9, 10] {
            assert_eq!(outcome.payment(buyer), 0.0);
        }
        assert_abs_diff_eq!(outcome.gross_revenue, 0.6988271187715792, epsilon = 1e-13);
        assert_abs_diff_eq!(outcome.net_revenue, 0.6953837890803721, epsilon = 1e-13);

        let u = utilities(&outcome, &vals).unwrap();
        assert_abs_diff_eq!(u.get(5), 0.10117288122842075, epsilon = 1e-13);
        assert_abs_diff_eq!(u.get(1), 0.003443329691207133, epsilon = 1e-15);
        for buyer in [2, 3, 4, 6, 7, 8, 9, 10] {
            assert_eq!(u.get(buyer), 0.0);
        }

        // The clamp is inactive here: the branch price exceeds the base price.
        let clamped = config.with_reward_mode(RewardMode::Clamped);
        let outcome2 =
            run_fpdm(&tree, &ActionProfile::truthful(&tree), &vals, &clamped, 7).unwrap();
        assert_eq!(outcome2.payment(1), outcome.payment(1));

        // Decision trace: branch 1 first, claimers 5 and 6 at equal depth;
        // buyer 5's one reported child beats buyer 6's none.
        assert_eq!(outcome.trace.visits.len(), 1);
        assert_eq!(outcome.trace.visits[0].root, 1);
        assert_eq!(outcome.trace.visits[0].claimers, vec![5, 6]);
        let tie = outcome.trace.tie_break.as_ref().unwrap();
        assert_eq!(tie.after_depth, vec![5, 6]);
        assert_eq!(tie.after_children, vec![5]);
        assert_eq!(tie.chosen, 5);
        assert!(!tie.seeded);
    }

    #[test]
    fn unsold_when_nobody_claims() {
        let tree = ten_buyer_tree();
        let vals = ValuationProfile::from_full(&[0.1; 10]).unwrap();
        let config = MechanismConfig::fpdm(0.1).unwrap();
        let outcome =
            run_fpdm(&tree, &ActionProfile::truthful(&tree), &vals, &config, 0).unwrap();
        assert_eq!(outcome.winner, None);
        assert!(outcome.payments.iter().all(|&p| p == 0.0));
        assert_eq!(outcome.gross_revenue, 0.0);
        assert_eq!(outcome.net_revenue, 0.0);
        assert_eq!(outcome.trace.visits.len(), 3);
        let u = utilities(&outcome, &vals).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    // A single deep branch is priced at the 1/e limit, which sits below the
    // base price, so the literal payment table charges the path instead of
    // rewarding it; the clamp floors those charges at zero.
    #[test]
    fn chain_exhibits_reward_sign_flip() {
        let tree = SocialTree::from_edges(&[(0, 1), (1, 2), (2, 3)]).unwrap();
        let vals = ValuationProfile::from_full(&[0.1, 0.2, 0.95]).unwrap();
        let inv_e = 0.36787944117144233;

        let literal = MechanismConfig::fpdm(1.0).unwrap().with_reward_mode(RewardMode::Literal);
        let outcome =
            run_fpdm(&tree, &ActionProfile::truthful(&tree), &vals, &literal, 0).unwrap();
        assert_eq!(outcome.winner, Some(3));
        assert_abs_diff_eq!(outcome.payment(3), inv_e, epsilon = 1e-15);
        assert_abs_diff_eq!(outcome.payment(1), 0.06606027941427884, epsilon = 1e-15);
        assert_abs_diff_eq!(outcome.payment(2), 0.03303013970713942, epsilon = 1e-15);
        let u = utilities(&outcome, &vals).unwrap();
        assert!(u.get(1) < 0.0 && u.get(2) < 0.0);

        let clamped = literal.with_reward_mode(RewardMode::Clamped);
        let outcome =
            run_fpdm(&tree, &ActionProfile::truthful(&tree), &vals, &clamped, 0).unwrap();
        assert_eq!(outcome.payment(1), 0.0);
        assert_eq!(outcome.payment(2), 0.0);
        assert_eq!(outcome.net_revenue, outcome.gross_revenue);
    }

    #[test]
    fn baseline_star_expectation() {
        let config = MechanismConfig::<f64>::baseline();
        let price = crate::pricing::optimal_price::<f64>(3);
        let dist = run_baseline_expectation(&[0.6, 0.7, 0.7], price, &config).unwrap();
        assert_eq!(dist.len(), 2);
        let winners: Vec<NodeId> =
            dist.outcomes().iter().map(|w| w.outcome.winner.unwrap()).collect();
        assert_eq!(winners, vec![2, 3]);
        for w in dist.outcomes() {
            assert_abs_diff_eq!(w.weight, 0.5, epsilon = 0.0);
            assert_eq!(w.outcome.price, Some(price));
        }
        assert_abs_diff_eq!(dist.total_weight(), 1.0, epsilon = 1e-12);

        let outcome = run_baseline(&[0.6, 0.7, 0.7], price, &config, 3).unwrap();
        assert!(matches!(outcome.winner, Some(2) | Some(3)));
        assert!(outcome.trace.tie_break.unwrap().seeded);
    }

    #[test]
    fn baseline_forced_and_unsold() {
        let config = MechanismConfig::<f64>::baseline();
        let outcome = run_baseline(&[0.9], 0.5, &config, 0).unwrap();
        assert_eq!(outcome.winner, Some(1));
        assert_eq!(outcome.payment(1), 0.5);
        let vals = ValuationProfile::from_full(&[0.9]).unwrap();
        assert_abs_diff_eq!(utilities(&outcome, &vals).unwrap().get(1), 0.4, epsilon = 1e-15);

        let outcome = run_baseline(&[0.3, 0.2], 0.5, &config, 0).unwrap();
        assert_eq!(outcome.winner, None);
        assert_eq!(outcome.gross_revenue, 0.0);
    }

    #[test]
    fn claim_threshold_modes_differ_on_boundary() {
        let tree = SocialTree::from_edges(&[(0, 1), (0, 2)]).unwrap();
        // Both branch prices are exactly 0.5 (one outside buyer each).
        let vals = ValuationProfile::from_full(&[0.5, 0.25]).unwrap();
        let weak = MechanismConfig::fpdm(0.0).unwrap();
        let outcome = run_fpdm(&tree, &ActionProfile::truthful(&tree), &vals, &weak, 0).unwrap();
        assert_eq!(outcome.winner, Some(1));
        let u = utilities(&outcome, &vals).unwrap();
        assert_eq!(u.get(1), 0.0);

        let strict = weak.with_threshold(ClaimThreshold::Strict);
        let outcome = run_fpdm(&tree, &ActionProfile::truthful(&tree), &vals, &strict, 0).unwrap();
        assert_eq!(outcome.winner, None);
    }

    // Hiding one's own subtree cannot change one's branch price, but it can
    // cost the reported-children tie-break: with buyer 10 hidden, buyers 5
    // and 6 tie exactly and the win is no longer sure.
    #[test]
    fn deviation_keeps_branch_price_but_loses_tiebreak() {
        let tree = ten_buyer_tree();
        let vals = ten_buyer_valuations();
        let config = MechanismConfig::fpdm(0.1).unwrap().with_tie_mode(TieMode::Expectation);
        let truthful = ActionProfile::truthful(&tree);
        let deviant =
            ActionProfile::with_overrides(&tree, &[(5, Action::Report(vec![]))]).unwrap();

        let base = run_fpdm_expectation(&tree, &truthful, &vals, &config).unwrap();
        assert_eq!(base.len(), 1);
        let dev = run_fpdm_expectation(&tree, &deviant, &vals, &config).unwrap();
        assert_eq!(dev.len(), 2);
        for w in dev.outcomes() {
            assert_eq!(w.outcome.price, base.outcomes()[0].outcome.price);
            assert_eq!(w.outcome.winning_branch, Some(1));
        }
        let truthful_u = base.expected_utility(5, &vals).unwrap();
        let deviant_u = dev.expected_utility(5, &vals).unwrap();
        assert_abs_diff_eq!(truthful_u, 0.10117288122842075, epsilon = 1e-13);
        assert_abs_diff_eq!(deviant_u, truthful_u / 2.0, epsilon = 1e-13);
    }

    #[test]
    fn missing_valuation_for_reachable_buyer_errors() {
        let tree = ten_buyer_tree();
        let mut vals = ValuationProfile::empty(10);
        vals.set(1, 0.5).unwrap();
        let config = MechanismConfig::fpdm(0.1).unwrap();
        let err =
            run_fpdm(&tree, &ActionProfile::truthful(&tree), &vals, &config, 0).unwrap_err();
        assert!(matches!(err, Error::MissingValuation { .. }));

        // Pruned buyers may stay unvalued.
        let actions =
            ActionProfile::with_overrides(&tree, &[(1, Action::Report(vec![]))]).unwrap();
        let mut vals = ValuationProfile::empty(10);
        for buyer in [1, 2, 3, 7, 8, 9] {
            vals.set(buyer, 0.2).unwrap();
        }
        assert!(run_fpdm(&tree, &actions, &vals, &config, 0).is_ok());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert_eq!(MechanismConfig::fpdm(1.5).unwrap_err(), Error::InvalidAlpha);
        assert_eq!(MechanismConfig::fpdm(-0.1).unwrap_err(), Error::InvalidAlpha);
        let config = MechanismConfig::<f64>::baseline();
        assert_eq!(run_baseline(&[0.5], 1.5, &config, 0).unwrap_err(), Error::InvalidPrice);
        assert!(ValuationProfile::from_full(&[1.2]).is_err());
    }

    #[test]
    fn allocation_feasibility_invariants() {
        let tree = ten_buyer_tree();
        let vals = ten_buyer_valuations();
        let config = MechanismConfig::fpdm(0.3).unwrap();
        let actions =
            ActionProfile::with_overrides(&tree, &[(1, Action::Report(vec![4, 6]))]).unwrap();
        let outcome = run_fpdm(&tree, &actions, &vals, &config, 0).unwrap();
        // Winner must be reachable under the profile, claim at her branch
        // price, and the winning branch must be the first visited with
        // claimers.
        let w = outcome.winner.unwrap();
        let eff = tree.effective_tree(&actions, ProfileValidation::Strict).unwrap();
        assert!(eff.contains(w));
        assert!(vals.get(w).unwrap() >= outcome.price.unwrap());
        let last = outcome.trace.visits.last().unwrap();
        assert!(!last.claimers.is_empty());
        for v in &outcome.trace.visits[..outcome.trace.visits.len() - 1] {
            assert!(v.claimers.is_empty());
        }
        // Net revenue decomposes into gross plus path payments.
        let path_sum: f64 =
            (1..=10).filter(|&b| b != w).map(|b| outcome.payment(b)).sum();
        assert_abs_diff_eq!(outcome.net_revenue, outcome.gross_revenue + path_sum, epsilon = 1e-15);
    }
}
