//! Incentive compatibility: full diffusion should be a dominant strategy.
//!
//! For each buyer and each deviation (a proper subset of her children, plus
//! opting out for non-seller-children), the checker compares her expected
//! utility under exact tie enumeration against truthful play. Profitable
//! deviations are findings, not assertions. Three sub-invariants are exactly
//! assertable and reported as hard breaches if they ever fail:
//!
//! (a) a deviator's own branch price never moves (the buyers outside her
//!     branch are untouched by her report);
//! (b) a path buyer's utility is unchanged by her own deviations that leave
//!     the winner in place;
//! (c) buyers off the winner's path and outside the winning branch pay and
//!     receive exactly zero.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mechanisms::{
    MechanismConfig, Outcome, OutcomeDistribution, PreparedFpdm, ValuationProfile,
};
use crate::network::{Action, ActionProfile, NodeId, ProfileValidation, SocialTree, SELLER};
use crate::scalar::Scalar;
use crate::verification::valuations::ProfileSpace;
use crate::verification::{
    Bounded, Keyed, PropertyKind, PropertyReport, ValuationSource, Verdict, Violation,
    ViolationKey,
};

/// A single buyer's deviation from full diffusion.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum DeviantAction {
    /// Inform only this subset of children.
    Report(Vec<NodeId>),
    /// Stay out of the sale entirely (informed nil). Only available to
    /// non-seller-children; flagged separately in reports.
    OptOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcScope {
    /// All other buyers report truthfully.
    Unilateral,
    /// Quantify over every plan profile of the other buyers (<= 6 buyers).
    Full,
}

#[derive(Debug, Clone)]
pub struct IcOptions<S: Scalar> {
    pub source: ValuationSource<S>,
    pub config: MechanismConfig<S>,
    pub scope: IcScope,
    /// Include the opt-out deviation for non-seller-children.
    pub include_opt_out: bool,
    pub max_recorded: usize,
}

impl<S: Scalar> IcOptions<S> {
    pub fn new(source: ValuationSource<S>, config: MechanismConfig<S>) -> Self {
        IcOptions {
            source,
            config,
            scope: IcScope::Unilateral,
            include_opt_out: true,
            max_recorded: 32,
        }
    }

    pub fn with_scope(mut self, scope: IcScope) -> Self {
        self.scope = scope;
        self
    }
}

/// The exactly-assertable incentive sub-invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcInvariant {
    BranchPriceInvariance,
    PathUtilityInvariance,
    OffPathZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantBreach<S: Scalar> {
    pub invariant: IcInvariant,
    pub key: ViolationKey,
    pub buyer: NodeId,
    /// (truthful value, deviant value) for the two invariance checks;
    /// (payment, 0) for an off-path nonzero payment.
    pub values: (S, S),
}

impl<S: Scalar> Keyed for InvariantBreach<S> {
    fn sort_key(&self) -> ViolationKey {
        self.key
    }
}

const FULL_SCOPE_LIMIT: usize = 6;
const BREACH_CAP: usize = 256;

struct Comparison {
    deviator: NodeId,
    context: u64,
    deviation_index: u64,
    action: DeviantAction,
    /// Context plans for the other buyers (empty in unilateral scope).
    context_actions: Vec<(NodeId, Action)>,
    truthful_prep: usize,
    deviant_prep: usize,
}

fn branch_root_of(tree: &SocialTree, buyer: NodeId) -> NodeId {
    let mut cur = buyer;
    while tree.parent(cur) != Some(SELLER) {
        cur = tree.parent(cur).expect("buyer has a parent chain to the seller");
    }
    cur
}

fn subsets(children: &[NodeId]) -> Vec<Vec<NodeId>> {
    (0u64..(1u64 << children.len()))
        .map(|mask| {
            children
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &c)| c)
                .collect()
        })
        .collect()
}

/// Plan products over all buyers except `deviator`: every assignment of a
/// child subset to every other buyer, in lexicographic mask order.
fn other_plan_products(tree: &SocialTree, deviator: NodeId) -> Vec<Vec<(NodeId, Action)>> {
    let others: Vec<NodeId> = (1..=tree.buyer_count()).filter(|&b| b != deviator).collect();
    let mut products: Vec<Vec<(NodeId, Action)>> = vec![Vec::new()];
    for &buyer in &others {
        let child_subsets = subsets(tree.children(buyer));
        let mut next = Vec::with_capacity(products.len() * child_subsets.len());
        for plan in &products {
            for subset in &child_subsets {
                let mut extended = plan.clone();
                extended.push((buyer, Action::Report(subset.clone())));
                next.push(extended);
            }
        }
        products = next;
    }
    products
}

/// Runs the deviation scan.
pub fn check_ic<S: Scalar>(tree: &SocialTree, opts: &IcOptions<S>) -> Result<PropertyReport<S>> {
    let buyers = tree.buyer_count();
    if opts.scope == IcScope::Full && buyers > FULL_SCOPE_LIMIT {
        return Err(Error::ScopeTooLarge { buyers, limit: FULL_SCOPE_LIMIT });
    }
    let config = opts.config.with_validation(ProfileValidation::AllowOptOut);
    let space = ProfileSpace::new(buyers, &opts.source)?;

    // Prepared instances are deduplicated by normalized action profile.
    let mut preps: Vec<PreparedFpdm<S>> = Vec::new();
    let mut prep_index: BTreeMap<ActionProfile, usize> = BTreeMap::new();
    fn prepare<S: Scalar>(
        tree: &SocialTree,
        config: &MechanismConfig<S>,
        preps: &mut Vec<PreparedFpdm<S>>,
        prep_index: &mut BTreeMap<ActionProfile, usize>,
        profile: ActionProfile,
    ) -> Result<usize> {
        if let Some(&i) = prep_index.get(&profile) {
            return Ok(i);
        }
        preps.push(PreparedFpdm::new(tree, &profile, config)?);
        prep_index.insert(profile, preps.len() - 1);
        Ok(preps.len() - 1)
    }

    let mut comparisons: Vec<Comparison> = Vec::new();
    let mut build_breaches: Bounded<InvariantBreach<S>> = Bounded::new(BREACH_CAP);

    for deviator in 1..=buyers {
        let contexts: Vec<Vec<(NodeId, Action)>> = match opts.scope {
            IcScope::Unilateral => vec![Vec::new()],
            IcScope::Full => other_plan_products(tree, deviator),
        };
        let truthful_report = Action::Report(tree.children(deviator).to_vec());
        let mut deviations: Vec<DeviantAction> = subsets(tree.children(deviator))
            .into_iter()
            .filter(|s| s.len() != tree.children(deviator).len())
            .map(DeviantAction::Report)
            .collect();
        if opts.include_opt_out && !tree.is_seller_child(deviator) {
            deviations.push(DeviantAction::OptOut);
        }
        if deviations.is_empty() {
            continue;
        }
        let branch_root = branch_root_of(tree, deviator);

        for (context_idx, context) in contexts.iter().enumerate() {
            let mut truthful_overrides = context.clone();
            truthful_overrides.push((deviator, truthful_report.clone()));
            let truthful_profile = ActionProfile::with_overrides(tree, &truthful_overrides)?;
            // A buyer hidden by the context has no action to deviate with.
            if truthful_profile.action(deviator).is_nil() {
                continue;
            }
            let truthful_prep =
                prepare(tree, &config, &mut preps, &mut prep_index, truthful_profile)?;

            for (deviation_index, action) in deviations.iter().enumerate() {
                let entry = match action {
                    DeviantAction::Report(set) => Action::Report(set.clone()),
                    DeviantAction::OptOut => Action::Nil,
                };
                let mut overrides = context.clone();
                overrides.push((deviator, entry));
                let deviant_profile = ActionProfile::with_overrides(tree, &overrides)?;
                let deviant_prep =
                    prepare(tree, &config, &mut preps, &mut prep_index, deviant_profile)?;

                // Invariant (a): valuation-independent, checked at build time.
                let before = preps[truthful_prep].branch_price_by_root(branch_root);
                let after = preps[deviant_prep].branch_price_by_root(branch_root);
                if let (Some(before), Some(after)) = (before, after) {
                    if before != after {
                        build_breaches.push(InvariantBreach {
                            invariant: IcInvariant::BranchPriceInvariance,
                            key: ViolationKey {
                                context: context_idx as u64,
                                profile: 0,
                                deviation: deviation_index as u64,
                                winner: 0,
                                buyer: deviator,
                            },
                            buyer: deviator,
                            values: (before, after),
                        });
                    }
                }

                comparisons.push(Comparison {
                    deviator,
                    context: context_idx as u64,
                    deviation_index: deviation_index as u64,
                    action: action.clone(),
                    context_actions: context.clone(),
                    truthful_prep,
                    deviant_prep,
                });
            }
        }
    }

    let total = space.total();
    let chunk: u64 = match total {
        0..=4096 => 64,
        _ => 1024,
    };
    let starts: Vec<u64> = (0..total).step_by(chunk as usize).collect();

    let scan = starts
        .into_par_iter()
        .map(|start| {
            let end = (start + chunk).min(total);
            let mut values = vec![S::zero(); buyers];
            let mut profile = ValuationProfile::empty(buyers);
            let mut dists: Vec<Option<OutcomeDistribution<S>>> = vec![None; preps.len()];
            let mut instances = 0u64;
            let mut count = 0u64;
            let mut found = Bounded::new(opts.max_recorded);
            let mut breaches: Bounded<InvariantBreach<S>> = Bounded::new(BREACH_CAP);
            for index in start..end {
                space.fill(index, &mut values);
                profile.fill_unchecked(&values);
                for slot in dists.iter_mut() {
                    *slot = None;
                }
                for cmp in &comparisons {
                    for prep in [cmp.truthful_prep, cmp.deviant_prep] {
                        if dists[prep].is_none() {
                            let dist = preps[prep]
                                .run_expectation(&profile)
                                .expect("profiles cover all buyers");
                            check_off_path_zero(
                                tree, &dist, index, cmp.context, &mut breaches,
                            );
                            dists[prep] = Some(dist);
                        }
                    }
                    let truthful = dists[cmp.truthful_prep].as_ref().unwrap();
                    let deviant = dists[cmp.deviant_prep].as_ref().unwrap();
                    instances += 1;

                    let u_truth = truthful
                        .expected_utility(cmp.deviator, &profile)
                        .expect("winner valuations present");
                    let u_dev = deviant
                        .expected_utility(cmp.deviator, &profile)
                        .expect("winner valuations present");
                    if u_dev > u_truth {
                        count += 1;
                        found.push(Violation {
                            key: ViolationKey {
                                context: cmp.context,
                                profile: index,
                                deviation: cmp.deviation_index,
                                winner: 0,
                                buyer: cmp.deviator,
                            },
                            valuations: values.clone(),
                            buyer: cmp.deviator,
                            deviation: Some(cmp.action.clone()),
                            context_actions: cmp.context_actions.clone(),
                            truthful_utility: u_truth,
                            deviant_utility: Some(u_dev),
                            winner: None,
                        });
                    }

                    check_path_utility_invariance(
                        tree, cmp, truthful, deviant, index, &mut breaches,
                    );
                }
            }
            (instances, count, found, breaches)
        })
        .reduce(
            || (0u64, 0u64, Bounded::new(opts.max_recorded), Bounded::new(BREACH_CAP)),
            |(i1, c1, f1, b1), (i2, c2, f2, b2)| (i1 + i2, c1 + c2, f1.merge(f2), b1.merge(b2)),
        );

    let (instances, violation_count, found, scan_breaches) = scan;
    let breaches = build_breaches.merge(scan_breaches);
    Ok(PropertyReport {
        property: PropertyKind::IncentiveCompatibility,
        instances,
        violation_count,
        violations: found.into_vec(),
        invariant_breaches: breaches.into_vec(),
        verdict: if violation_count == 0 { Verdict::Clean } else { Verdict::Findings },
    })
}

/// Invariant (c): in every outcome, only the winner and her path carry
/// nonzero payments.
fn check_off_path_zero<S: Scalar>(
    tree: &SocialTree,
    dist: &OutcomeDistribution<S>,
    profile_index: u64,
    context: u64,
    breaches: &mut Bounded<InvariantBreach<S>>,
) {
    for weighted in dist.outcomes() {
        let outcome = &weighted.outcome;
        let path: Vec<NodeId> = match outcome.winner {
            Some(w) => tree.path_to(w).expect("winner exists in the base tree"),
            None => Vec::new(),
        };
        for buyer in 1..=tree.buyer_count() {
            if Some(buyer) == outcome.winner || path.contains(&buyer) {
                continue;
            }
            let payment = outcome.payment(buyer);
            if payment != S::zero() {
                breaches.push(InvariantBreach {
                    invariant: IcInvariant::OffPathZero,
                    key: ViolationKey {
                        context,
                        profile: profile_index,
                        deviation: 0,
                        winner: outcome.winner.unwrap_or(0),
                        buyer,
                    },
                    buyer,
                    values: (payment, S::zero()),
                });
            }
        }
    }
}

/// Invariant (b): when the deviator sits on the path of a winner who wins in
/// both runs, her utility is bitwise unchanged.
fn check_path_utility_invariance<S: Scalar>(
    tree: &SocialTree,
    cmp: &Comparison,
    truthful: &OutcomeDistribution<S>,
    deviant: &OutcomeDistribution<S>,
    profile_index: u64,
    breaches: &mut Bounded<InvariantBreach<S>>,
) {
    for tw in truthful.outcomes() {
        let Some(winner) = tw.outcome.winner else { continue };
        let path = tree.path_to(winner).expect("winner exists in the base tree");
        if !path.contains(&cmp.deviator) {
            continue;
        }
        let Some(dw) = find_winner(deviant, winner) else { continue };
        let before = -tw.outcome.payment(cmp.deviator);
        let after = -dw.payment(cmp.deviator);
        if before != after {
            breaches.push(InvariantBreach {
                invariant: IcInvariant::PathUtilityInvariance,
                key: ViolationKey {
                    context: cmp.context,
                    profile: profile_index,
                    deviation: cmp.deviation_index,
                    winner,
                    buyer: cmp.deviator,
                },
                buyer: cmp.deviator,
                values: (before, after),
            });
        }
    }
}

fn find_winner<S: Scalar>(dist: &OutcomeDistribution<S>, winner: NodeId) -> Option<&Outcome<S>> {
    dist.outcomes().iter().map(|w| &w.outcome).find(|o| o.winner == Some(winner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{run_fpdm_expectation, RewardMode};
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

    #[test]
    fn star_has_no_deviations() {
        let tree = SocialTree::from_edges(&[(0, 1), (0, 2), (0, 3)]).unwrap();
        let opts = IcOptions::new(
            ValuationSource::Grid { step: 0.2 },
            MechanismConfig::fpdm(0.1).unwrap(),
        );
        let report = check_ic(&tree, &opts).unwrap();
        assert_eq!(report.instances, 0);
        assert_eq!(report.violation_count, 0);
        assert!(report.is_clean());
    }

    #[test]
    fn chain_clamped_grid_is_clean() {
        let tree = SocialTree::from_edges(&[(0, 1), (1, 2)]).unwrap();
        let opts = IcOptions::new(
            ValuationSource::Grid { step: 0.1 },
            MechanismConfig::fpdm(0.1).unwrap(),
        );
        let report = check_ic(&tree, &opts).unwrap();
        // Two deviations (hide the child, opt out by the child) over 100
        // profiles.
        assert_eq!(report.instances, 200);
        assert_eq!(report.violation_count, 0);
        assert!(report.invariant_breaches.is_empty());
    }

    // On a single-branch chain the branch price 1/e sits below the base
    // price 1/2, so the literal table charges the path buyer; hiding the
    // child dodges that charge and is strictly profitable.
    #[test]
    fn chain_literal_grid_has_profitable_hiding() {
        let tree = SocialTree::from_edges(&[(0, 1), (1, 2)]).unwrap();
        let config =
            MechanismConfig::fpdm(0.1).unwrap().with_reward_mode(RewardMode::Literal);
        let opts = IcOptions::new(ValuationSource::Grid { step: 0.1 }, config);
        let report = check_ic(&tree, &opts).unwrap();
        assert!(report.violation_count > 0);
        assert!(report.invariant_breaches.is_empty());
        let v = &report.violations[0];
        assert_eq!(v.buyer, 1);
        assert_eq!(v.deviation, Some(DeviantAction::Report(vec![])));
        assert!(v.deviant_utility.unwrap() > v.truthful_utility);
    }

    // Two branches [3, 2]: the small branch is priced above the base price,
    // so its path buyer earns a real reward and forfeits it by hiding her
    // child: deviations are findable as harmful, never profitable.
    #[test]
    fn forfeited_reward_is_not_profitable_in_clamped_mode() {
        let tree =
            SocialTree::from_edges(&[(0, 1), (1, 3), (3, 4), (0, 2), (2, 5)]).unwrap();
        let config = MechanismConfig::fpdm(0.1).unwrap();
        let vals =
            ValuationProfile::from_full(&[0.05, 0.05, 0.05, 0.05, 0.95]).unwrap();
        let truthful = ActionProfile::truthful(&tree);
        let dist = run_fpdm_expectation(&tree, &truthful, &vals, &config).unwrap();
        assert_eq!(dist.outcomes()[0].outcome.winner, Some(5));
        let u2 = dist.expected_utility(2, &vals).unwrap();
        assert_abs_diff_eq!(u2, 0.002630512787890541, epsilon = 1e-15);

        let deviant =
            ActionProfile::with_overrides(&tree, &[(2, Action::Report(vec![]))]).unwrap();
        let dist = run_fpdm_expectation(&tree, &deviant, &vals, &config).unwrap();
        assert_eq!(dist.outcomes()[0].outcome.winner, None);
        assert_eq!(dist.expected_utility(2, &vals).unwrap(), 0.0);

        let opts = IcOptions::new(ValuationSource::Grid { step: 0.2 }, config);
        let report = check_ic(&tree, &opts).unwrap();
        assert_eq!(report.violation_count, 0);
        assert!(report.invariant_breaches.is_empty());
    }

    // The winner hiding her own child keeps the branch price (invariant a)
    // but costs her the reported-children tie-break, so her utility halves
    // under exact tie enumeration; still no *profitable* deviation.
    #[test]
    fn winner_hiding_child_keeps_price_loses_tiebreak() {
        let tree = ten_buyer_tree();
        let vals = ValuationProfile::from_full(&[
            0.6, 0.7, 0.7, 0.5, 0.8, 0.9, 0.3, 0.4, 0.1, 0.5,
        ])
        .unwrap();
        let config = MechanismConfig::fpdm(0.1).unwrap();
        let truthful = ActionProfile::truthful(&tree);
        let deviant =
            ActionProfile::with_overrides(&tree, &[(5, Action::Report(vec![]))]).unwrap();
        let t = run_fpdm_expectation(&tree, &truthful, &vals, &config).unwrap();
        let d = run_fpdm_expectation(&tree, &deviant, &vals, &config).unwrap();
        assert_eq!(
            t.outcomes()[0].outcome.price,
            d.outcomes()[0].outcome.price,
        );
        let u_t = t.expected_utility(5, &vals).unwrap();
        let u_d = d.expected_utility(5, &vals).unwrap();
        assert_abs_diff_eq!(u_d, u_t / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn full_scope_rejects_large_trees() {
        let tree = SocialTree::from_edges(&[
            (0, 1),
            (0, 2),
            (0, 3),
            (0, 4),
            (0, 5),
            (0, 6),
            (1, 7),
        ])
        .unwrap();
        let opts = IcOptions::new(
            ValuationSource::Grid { step: 0.2 },
            MechanismConfig::fpdm(0.1).unwrap(),
        )
        .with_scope(IcScope::Full);
        let err = check_ic(&tree, &opts).unwrap_err();
        assert_eq!(err, Error::ScopeTooLarge { buyers: 7, limit: 6 });
    }

    #[test]
    fn full_scope_runs_on_small_trees() {
        let tree = SocialTree::from_edges(&[(0, 1), (1, 2), (0, 3)]).unwrap();
        let opts = IcOptions::new(
            ValuationSource::Grid { step: 0.25 },
            MechanismConfig::fpdm(0.1).unwrap(),
        )
        .with_scope(IcScope::Full);
        let report = check_ic(&tree, &opts).unwrap();
        assert!(report.instances > 0);
        assert!(report.invariant_breaches.is_empty());
        assert_eq!(report.violation_count, 0);
    }

    #[test]
    fn violations_replay_exactly() {
        let tree = SocialTree::from_edges(&[(0, 1), (1, 2), (2, 3)]).unwrap();
        let config =
            MechanismConfig::fpdm(0.5).unwrap().with_reward_mode(RewardMode::Literal);
        let opts = IcOptions::new(ValuationSource::Grid { step: 0.2 }, config);
        let report = check_ic(&tree, &opts).unwrap();
        assert!(report.violation_count > 0);
        let replay_config = config.with_validation(ProfileValidation::AllowOptOut);
        for v in &report.violations {
            let vals = ValuationProfile::from_full(&v.valuations).unwrap();
            let mut overrides = v.context_actions.clone();
            overrides.push((
                v.buyer,
                match v.deviation.as_ref().unwrap() {
                    DeviantAction::Report(set) => Action::Report(set.clone()),
                    DeviantAction::OptOut => Action::Nil,
                },
            ));
            let deviant = ActionProfile::with_overrides(&tree, &overrides).unwrap();
            let mut truthful_overrides = v.context_actions.clone();
            truthful_overrides.push((v.buyer, Action::Report(tree.children(v.buyer).to_vec())));
            let truthful = ActionProfile::with_overrides(&tree, &truthful_overrides).unwrap();
            let u_truth = run_fpdm_expectation(&tree, &truthful, &vals, &replay_config)
                .unwrap()
                .expected_utility(v.buyer, &vals)
                .unwrap();
            let u_dev = run_fpdm_expectation(&tree, &deviant, &vals, &replay_config)
                .unwrap()
                .expected_utility(v.buyer, &vals)
                .unwrap();
            assert_eq!(u_truth, v.truthful_utility);
            assert_eq!(Some(u_dev), v.deviant_utility);
        }
    }
}
