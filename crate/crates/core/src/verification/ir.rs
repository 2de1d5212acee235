//! Individual rationality: under truthful reports, no buyer's utility may be
//! negative on any instance. The winner's utility is nonnegative by the
//! claim rule; the only risk is a path "reward" with the wrong sign, which
//! the literal payment table produces whenever the winning branch's price
//! falls below the base price.

use rayon::prelude::*;

use crate::error::Result;
use crate::mechanisms::{MechanismConfig, PreparedFpdm, ValuationProfile};
use crate::network::{ActionProfile, NodeId, SocialTree};
use crate::scalar::Scalar;
use crate::verification::valuations::ProfileSpace;
use crate::verification::{
    Bounded, PropertyKind, PropertyReport, ValuationSource, Verdict, Violation, ViolationKey,
};

#[derive(Debug, Clone)]
pub struct IrOptions<S: Scalar> {
    pub source: ValuationSource<S>,
    pub config: MechanismConfig<S>,
    /// Cap on recorded violation exemplars (totals are always exact).
    pub max_recorded: usize,
}

impl<S: Scalar> IrOptions<S> {
    pub fn new(source: ValuationSource<S>, config: MechanismConfig<S>) -> Self {
        IrOptions { source, config, max_recorded: 32 }
    }
}

const CHUNK: u64 = 8192;

/// Checks `u_i >= 0` for every buyer, over every valuation profile from the
/// source and every exactly-tied winner, under truthful reports.
///
/// Path utilities are valuation-independent per potential winner, so they are
/// precomputed once; the per-profile work is the mechanism's own selection.
pub fn check_ir<S: Scalar>(tree: &SocialTree, opts: &IrOptions<S>) -> Result<PropertyReport<S>> {
    let truthful = ActionProfile::truthful(tree);
    let prepared = PreparedFpdm::new(tree, &truthful, &opts.config)?;
    let buyers = tree.buyer_count();
    let space = ProfileSpace::new(buyers, &opts.source)?;

    // Per potential winner: her branch price and the path utilities paid out
    // if she wins.
    let mut winner_price = vec![S::zero(); buyers + 1];
    let mut path_utils: Vec<Vec<(NodeId, S)>> = vec![Vec::new(); buyers + 1];
    let mut worst_path_util = vec![S::zero(); buyers + 1];
    for (branch_index, id, path) in prepared.members_with_paths() {
        let price = prepared.branch_price(branch_index);
        let utils: Vec<(NodeId, S)> =
            path.iter().map(|&(l, d)| (l, -prepared.path_payment(price, d))).collect();
        worst_path_util[id] = utils.iter().map(|&(_, u)| u).fold(S::zero(), |a, b| a.min(b));
        winner_price[id] = price;
        path_utils[id] = utils;
    }

    let total = space.total();
    let chunks: Vec<u64> = (0..total).step_by(CHUNK as usize).collect();
    let (count, bounded) = chunks
        .into_par_iter()
        .map(|start| {
            let end = (start + CHUNK).min(total);
            let mut values = vec![S::zero(); buyers];
            let mut profile = ValuationProfile::empty(buyers);
            let mut count = 0u64;
            let mut bounded = Bounded::new(opts.max_recorded);
            for index in start..end {
                space.fill(index, &mut values);
                profile.fill_unchecked(&values);
                let selection = prepared.select(&profile).expect("profiles cover all buyers");
                let Some(set) = selection.winning() else { continue };
                for &w in &set.tied {
                    let winner_utility = values[w - 1] - winner_price[w];
                    if winner_utility < S::zero() {
                        count += 1;
                        bounded.push(Violation {
                            key: ViolationKey {
                                context: 0,
                                profile: index,
                                deviation: 0,
                                winner: w,
                                buyer: w,
                            },
                            valuations: values.clone(),
                            buyer: w,
                            deviation: None,
                            context_actions: Vec::new(),
                            truthful_utility: winner_utility,
                            deviant_utility: None,
                            winner: Some(w),
                        });
                    }
                    if worst_path_util[w] < S::zero() {
                        for &(l, u) in &path_utils[w] {
                            if u < S::zero() {
                                count += 1;
                                bounded.push(Violation {
                                    key: ViolationKey {
                                        context: 0,
                                        profile: index,
                                        deviation: 0,
                                        winner: w,
                                        buyer: l,
                                    },
                                    valuations: values.clone(),
                                    buyer: l,
                                    deviation: None,
                                    context_actions: Vec::new(),
                                    truthful_utility: u,
                                    deviant_utility: None,
                                    winner: Some(w),
                                });
                            }
                        }
                    }
                }
            }
            (count, bounded)
        })
        .reduce(
            || (0u64, Bounded::new(opts.max_recorded)),
            |(c1, b1), (c2, b2)| (c1 + c2, b1.merge(b2)),
        );

    Ok(PropertyReport {
        property: PropertyKind::IndividualRationality,
        instances: total,
        violation_count: count,
        violations: bounded.into_vec(),
        invariant_breaches: Vec::new(),
        verdict: if count == 0 { Verdict::Clean } else { Verdict::Findings },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{run_fpdm_expectation, utilities, RewardMode};
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

    /// Five seller neighbours, one of which has a child: the deep branch's
    /// price sits below the base price, the canonical reward-sign tree.
    fn star_with_one_chain() -> SocialTree {
        SocialTree::from_edges(&[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (1, 6)]).unwrap()
    }

    #[test]
    fn clamped_mode_is_clean_on_samples() {
        let tree = ten_buyer_tree();
        let opts = IrOptions::new(
            ValuationSource::Sampled { count: 4000, seed: 11 },
            MechanismConfig::fpdm(0.1).unwrap(),
        );
        let report = check_ir(&tree, &opts).unwrap();
        assert_eq!(report.instances, 4000);
        assert_eq!(report.violation_count, 0);
        assert!(report.is_clean());
    }

    #[test]
    fn literal_mode_flags_negative_path_rewards() {
        let tree = star_with_one_chain();
        let config =
            MechanismConfig::fpdm(0.1).unwrap().with_reward_mode(RewardMode::Literal);
        let opts = IrOptions::new(ValuationSource::Grid { step: 0.1 }, config);
        let report = check_ir(&tree, &opts).unwrap();
        assert_eq!(report.instances, 1_000_000);
        assert!(report.violation_count > 0);
        // Buyer 1 is charged whenever her child 6 wins.
        let v = &report.violations[0];
        assert_eq!(v.buyer, 1);
        assert_eq!(v.winner, Some(6));
        assert_abs_diff_eq!(v.truthful_utility, -0.0015043406897578611, epsilon = 1e-15);
    }

    #[test]
    fn violations_replay_exactly() {
        let tree = star_with_one_chain();
        let config =
            MechanismConfig::fpdm(0.1).unwrap().with_reward_mode(RewardMode::Literal);
        let opts = IrOptions::new(ValuationSource::Grid { step: 0.2 }, config);
        let report = check_ir(&tree, &opts).unwrap();
        assert!(report.violation_count > 0);
        for violation in &report.violations {
            let vals = ValuationProfile::from_full(&violation.valuations).unwrap();
            let dist =
                run_fpdm_expectation(&tree, &ActionProfile::truthful(&tree), &vals, &config)
                    .unwrap();
            let outcome = dist
                .outcomes()
                .iter()
                .map(|w| &w.outcome)
                .find(|o| o.winner == violation.winner)
                .expect("recorded winner is a reachable outcome");
            let u = utilities(outcome, &vals).unwrap();
            assert_eq!(u.get(violation.buyer), violation.truthful_utility);
        }
    }

    #[test]
    fn determinism_across_worker_counts() {
        let tree = star_with_one_chain();
        let config =
            MechanismConfig::fpdm(1.0).unwrap().with_reward_mode(RewardMode::Literal);
        let opts = IrOptions::new(ValuationSource::Grid { step: 0.25 }, config);
        let a = check_ir(&tree, &opts).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| check_ir(&tree, &opts).unwrap());
        assert_eq!(a, b);
    }
}
