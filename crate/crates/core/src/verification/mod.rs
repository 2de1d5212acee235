//! Property suites and oracles: exhaustive individual-rationality and
//! incentive-compatibility checks over small trees, Monte Carlo revenue
//! estimation against the closed forms, non-isomorphic rooted tree
//! enumeration, and the revenue dominance scan.
//!
//! Scans over valuation profiles run in parallel; reports are deterministic
//! regardless of worker count because violation exemplars keep the globally
//! smallest instance keys and totals are plain sums.

mod dominance;
mod ic;
mod ir;
mod monte_carlo;
mod trees;
mod valuations;

pub use dominance::{revenue_dominance_scan, DominanceReport, DominanceRow};
pub use ic::{check_ic, DeviantAction, IcInvariant, IcOptions, IcScope, InvariantBreach};
pub use ir::{check_ir, IrOptions};
pub use monte_carlo::{monte_carlo_baseline_revenue, monte_carlo_revenue, MonteCarloEstimate};
pub use trees::enumerate_rooted_trees;
pub use valuations::ValuationSource;

use crate::network::{Action, NodeId};
use crate::scalar::Scalar;

/// Which property a report covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyKind {
    IndividualRationality,
    IncentiveCompatibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Clean,
    Findings,
}

/// Canonical ordering key for a recorded violation; reports sort by it so
/// output is independent of scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ViolationKey {
    /// Index of the surrounding action context (0 when others are truthful).
    pub context: u64,
    /// Index of the valuation profile within its source.
    pub profile: u64,
    /// Index of the deviation under test (0 for IR).
    pub deviation: u64,
    /// Realized winner (0 when unsold or not applicable).
    pub winner: NodeId,
    /// The buyer whose utility is at issue.
    pub buyer: NodeId,
}

/// A replayable property violation: re-running the mechanism on the stored
/// instance reproduces the recorded utilities exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation<S: Scalar> {
    pub key: ViolationKey,
    /// Valuation of buyer i at index i - 1.
    pub valuations: Vec<S>,
    pub buyer: NodeId,
    /// The deviation that was profitable; `None` for IR violations.
    pub deviation: Option<DeviantAction>,
    /// Plans of the other buyers (empty when they are truthful).
    pub context_actions: Vec<(NodeId, Action)>,
    /// Buyer's utility under truthful play (IR: under the realized winner).
    pub truthful_utility: S,
    /// Buyer's expected utility under the deviation (IC only).
    pub deviant_utility: Option<S>,
    /// Realized winner for IR violations.
    pub winner: Option<NodeId>,
}

impl<S: Scalar> Keyed for Violation<S> {
    fn sort_key(&self) -> ViolationKey {
        self.key
    }
}

/// Outcome of one property suite run.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport<S: Scalar> {
    pub property: PropertyKind,
    /// Mechanism evaluations examined.
    pub instances: u64,
    /// Total violations found (exemplars below are capped).
    pub violation_count: u64,
    /// Violation exemplars with the smallest keys, sorted.
    pub violations: Vec<Violation<S>>,
    /// Breaches of the exactly-assertable incentive sub-invariants; always
    /// empty unless the mechanism itself is broken.
    pub invariant_breaches: Vec<InvariantBreach<S>>,
    pub verdict: Verdict,
}

impl<S: Scalar> PropertyReport<S> {
    pub fn is_clean(&self) -> bool {
        self.verdict == Verdict::Clean && self.invariant_breaches.is_empty()
    }
}

/// Anything orderable by a canonical instance key.
pub(crate) trait Keyed {
    fn sort_key(&self) -> ViolationKey;
}

/// Keeps the `cap` entries with the smallest keys. Merging two bounded sets
/// is associative and commutative, so parallel reduction over chunks yields
/// the same exemplars regardless of scheduling.
#[derive(Debug, Clone)]
pub(crate) struct Bounded<T: Keyed> {
    cap: usize,
    entries: Vec<T>,
}

impl<T: Keyed> Bounded<T> {
    pub(crate) fn new(cap: usize) -> Self {
        Bounded { cap, entries: Vec::new() }
    }

    pub(crate) fn push(&mut self, entry: T) {
        let key = entry.sort_key();
        let pos = self
            .entries
            .binary_search_by(|v| v.sort_key().cmp(&key))
            .unwrap_or_else(|p| p);
        if pos >= self.cap {
            return;
        }
        self.entries.insert(pos, entry);
        self.entries.truncate(self.cap);
    }

    pub(crate) fn merge(mut self, other: Self) -> Self {
        for v in other.entries {
            self.push(v);
        }
        self
    }

    pub(crate) fn into_vec(self) -> Vec<T> {
        self.entries
    }
}

/// Splitmix-style seed derivation: replication i draws from an rng seeded by
/// (master, i), so estimates are independent of scheduling.
pub(crate) fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
