//! Closed-form pricing and expected revenue under uniform [0,1] valuations:
//! the optimal posted price for x buyers, the neighbourhood-only baseline,
//! the everyone-is-a-neighbour optimum, the diffusion mechanism's revenue for
//! a branch decomposition, and the single-deep-branch (chain) special case.

use crate::error::{Error, Result};
use crate::network::BranchDecomposition;
use crate::scalar::Scalar;

/// Optimal posted price for a market of `x` buyers: (1/(1+x))^(1/x).
///
/// The formula is undefined at x = 0; we return its analytic limit 1/e so
/// that a branch with no outside buyers still has a price.
pub fn optimal_price<S: Scalar>(x: usize) -> S {
    if x == 0 {
        return S::one().exp().recip();
    }
    let base = (S::one() + S::from_count(x)).recip();
    base.powf(S::from_count(x).recip())
}

/// Seller's maximum expected revenue posting to `x` buyers:
/// (x/(1+x)) * (1/(1+x))^(1/x); zero when the market is empty.
pub fn expected_revenue_base<S: Scalar>(x: usize) -> S {
    if x == 0 {
        return S::zero();
    }
    let xs = S::from_count(x);
    xs / (S::one() + xs) * optimal_price::<S>(x)
}

/// Expected revenue in the extreme network where all `k` buyers are the
/// seller's neighbours; the upper benchmark for any diffusion outcome.
pub fn expected_revenue_opt<S: Scalar>(k: usize) -> S {
    expected_revenue_base(k)
}

/// Per-branch posted prices, in decomposition order: branch i is priced for
/// the `outside` buyers beyond it.
pub fn branch_prices<S: Scalar>(decomp: &BranchDecomposition) -> Vec<S> {
    decomp.iter().map(|b| optimal_price(b.outside)).collect()
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.contains(&0) {
        return Err(Error::InvalidParameter("branch sizes must be positive"));
    }
    if sizes.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter("branch sizes must be non-increasing"));
    }
    Ok(())
}

/// Expected gross revenue of the diffusion mechanism on branches of the given
/// sizes (non-increasing): branch i sells at its price when all earlier
/// branches had every valuation below theirs,
/// `E = sum_i p_i * (prod_{j<i} p_j^{k_j}) * (1 - p_i^{k_i})`.
pub fn expected_revenue_fpdm<S: Scalar>(sizes: &[usize]) -> Result<S> {
    validate_sizes(sizes)?;
    let total: usize = sizes.iter().sum();
    let mut revenue = S::zero();
    let mut all_earlier_below = S::one();
    for &size in sizes {
        let price: S = optimal_price(total - size);
        let none_claims = price.powi(size as i32);
        revenue = revenue + price * all_earlier_below * (S::one() - none_claims);
        all_earlier_below = all_earlier_below * none_claims;
    }
    Ok(revenue)
}

/// Expected revenue when exactly one of `x` seller neighbours has
/// descendants, for `k` total buyers (so the deep branch holds k-x+1 buyers
/// and the other x-1 are singletons). Algebraically identical to
/// [`expected_revenue_fpdm`] on `[k-x+1, 1, ..., 1]`.
///
/// Exponents grow linearly in k; powf evaluates them in log space and
/// underflows to exactly zero, which keeps the k -> infinity limit clean.
pub fn chain_case_revenue<S: Scalar>(x: usize, k: usize) -> Result<S> {
    if x < 2 {
        return Err(Error::InvalidParameter("chain case needs at least two seller neighbours"));
    }
    if k < x {
        return Err(Error::InvalidParameter("total buyers cannot be fewer than neighbours"));
    }
    let xs = S::from_count(x);
    let ks = S::from_count(k);
    let inv_x = xs.recip();
    let inv_k = ks.recip();
    let deep_exponent = S::from_count(k - x + 1) / S::from_count(x - 1);
    let deep_unsold = inv_x.powf(deep_exponent);
    let deep_price = inv_x.powf(S::from_count(x - 1).recip());
    let single_price = inv_k.powf(S::from_count(k - 1).recip());
    let singles_unsold = inv_k.powf(S::from_count(x - 1) / S::from_count(k - 1));
    Ok((S::one() - deep_unsold) * deep_price
        + deep_unsold * (S::one() - singles_unsold) * single_price)
}

/// One row of a revenue curve: the diffusion revenue against both benchmarks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevenuePoint<S: Scalar> {
    /// Total buyers in the network.
    pub k: usize,
    /// Seller neighbours.
    pub x: usize,
    pub e_fpdm: S,
    pub e_base: S,
    pub e_opt: S,
    /// e_fpdm / e_opt; zero when e_opt is zero.
    pub ratio: S,
}

fn point<S: Scalar>(k: usize, x: usize, e_fpdm: S) -> RevenuePoint<S> {
    let e_base = expected_revenue_base(x);
    let e_opt = expected_revenue_opt(k);
    let ratio = if e_opt > S::zero() { e_fpdm / e_opt } else { S::zero() };
    RevenuePoint { k, x, e_fpdm, e_base, e_opt, ratio }
}

/// Revenue curve for the chain scenario: `x` fixed, one point per k in the
/// inclusive range.
pub fn revenue_curve_chain<S: Scalar>(
    x: usize,
    k_min: usize,
    k_max: usize,
) -> Result<Vec<RevenuePoint<S>>> {
    if k_min < x || k_max < k_min {
        return Err(Error::InvalidParameter("chain sweep needs x <= k_min <= k_max"));
    }
    (k_min..=k_max).map(|k| Ok(point(k, x, chain_case_revenue(x, k)?))).collect()
}

/// Revenue point for an explicit branch-size vector.
pub fn revenue_point<S: Scalar>(sizes: &[usize]) -> Result<RevenuePoint<S>> {
    let e_fpdm = expected_revenue_fpdm(sizes)?;
    Ok(point(sizes.iter().sum(), sizes.len(), e_fpdm))
}

/// Independent pricing oracle: maximizes (1 - p^x) * p over the grid
/// {step, 2 step, ...} < 1, ties to the smaller price. Agrees with
/// [`optimal_price`] to within one grid step.
pub fn brute_force_optimal_price<S: Scalar>(x: usize, step: S) -> Result<S> {
    if x == 0 {
        return Err(Error::InvalidParameter("grid oracle needs at least one buyer"));
    }
    if !(step > S::zero() && step <= S::from_config(0.01)) {
        return Err(Error::InvalidParameter("grid step must lie in (0, 0.01]"));
    }
    let mut best_price = step;
    let mut best_revenue = S::neg_infinity();
    let mut i = 1usize;
    loop {
        let p = S::from_count(i) * step;
        if p >= S::one() {
            break;
        }
        let revenue = (S::one() - p.powi(x as i32)) * p;
        if revenue > best_revenue {
            best_revenue = revenue;
            best_price = p;
        }
        i += 1;
    }
    Ok(best_price)
}
