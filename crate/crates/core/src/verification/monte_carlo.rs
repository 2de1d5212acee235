//! Seeded Monte Carlo estimation of expected gross revenue; the independent
//! oracle for the closed-form revenue expressions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mechanisms::{ClaimThreshold, MechanismConfig, PreparedFpdm, ValuationProfile};
use crate::network::{ActionProfile, SocialTree};
use crate::scalar::Scalar;
use crate::verification::derive_seed;

/// Mean gross revenue over i.i.d. uniform valuation draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate<S: Scalar> {
    pub replications: usize,
    pub mean: S,
    /// Sample standard deviation over sqrt(replications); zero for a single
    /// replication.
    pub std_error: S,
    pub seed: u64,
}

impl<S: Scalar> MonteCarloEstimate<S> {
    /// Standardized distance of `target` from the estimate; infinite when the
    /// standard error is zero and the mean differs.
    pub fn z_score(&self, target: S) -> S {
        if self.std_error > S::zero() {
            (self.mean - target) / self.std_error
        } else if self.mean == target {
            S::zero()
        } else {
            S::infinity()
        }
    }
}

fn summarize<S: Scalar>(revenues: Vec<S>, seed: u64) -> MonteCarloEstimate<S> {
    let n = revenues.len();
    let count = S::from_count(n);
    let mean = revenues.iter().copied().sum::<S>() / count;
    let std_error = if n > 1 {
        let ss: S = revenues.iter().map(|&r| (r - mean) * (r - mean)).sum();
        (ss / (count - S::one())).sqrt() / count.sqrt()
    } else {
        S::zero()
    };
    MonteCarloEstimate { replications: n, mean, std_error, seed }
}

/// Estimates the diffusion mechanism's expected gross revenue on `tree`
/// under `actions`. Replication i draws valuations for the reachable buyers
/// from an rng seeded by (seed, i), so the estimate does not depend on
/// scheduling; gross revenue is tie-invariant, so no tie draws are needed.
pub fn monte_carlo_revenue<S: Scalar>(
    tree: &SocialTree,
    actions: &ActionProfile,
    config: &MechanismConfig<S>,
    replications: usize,
    seed: u64,
) -> Result<MonteCarloEstimate<S>> {
    if replications == 0 {
        return Err(Error::InvalidParameter("replications must be positive"));
    }
    let prepared = PreparedFpdm::new(tree, actions, config)?;
    let reachable: Vec<_> = prepared.effective().reachable_buyers().collect();
    let buyers = tree.buyer_count();
    let revenues: Vec<S> = (0..replications as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, rep));
            let mut vals = ValuationProfile::empty(buyers);
            for &b in &reachable {
                vals.set_unchecked(b, S::from_config(rng.gen::<f64>()));
            }
            prepared.gross_revenue(&vals).expect("all reachable buyers valued")
        })
        .collect();
    Ok(summarize(revenues, seed))
}

/// Estimates the baseline mechanism's expected revenue posting `price` to
/// `neighbours` buyers.
pub fn monte_carlo_baseline_revenue<S: Scalar>(
    neighbours: usize,
    price: S,
    threshold: ClaimThreshold,
    replications: usize,
    seed: u64,
) -> Result<MonteCarloEstimate<S>> {
    if replications == 0 {
        return Err(Error::InvalidParameter("replications must be positive"));
    }
    if neighbours == 0 {
        return Err(Error::InvalidParameter("baseline needs at least one neighbour"));
    }
    if !(price >= S::zero() && price <= S::one()) {
        return Err(Error::InvalidPrice);
    }
    let revenues: Vec<S> = (0..replications as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, rep));
            let mut claimed = false;
            for _ in 0..neighbours {
                let v = S::from_config(rng.gen::<f64>());
                claimed |= match threshold {
                    ClaimThreshold::Strict => v > price,
                    ClaimThreshold::Weak => v >= price,
                };
            }
            if claimed {
                price
            } else {
                S::zero()
            }
        })
        .collect();
    Ok(summarize(revenues, seed))
}
