//! Revenue dominance scan: compares the diffusion mechanism's closed-form
//! revenue against the neighbourhood baseline for every branch-size
//! partition up to a bound, recording the direction instead of asserting a
//! universal claim. Dominance genuinely fails exactly on all-singleton
//! decompositions, where no diffusion happened and sequential per-branch
//! posting loses to one simultaneous post.

use crate::error::{Error, Result};
use crate::pricing::{expected_revenue_base, expected_revenue_fpdm};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceRow<S: Scalar> {
    /// Branch sizes, non-increasing.
    pub sizes: Vec<usize>,
    pub e_fpdm: S,
    pub e_base: S,
    /// True when e_fpdm > e_base strictly.
    pub dominant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport<S: Scalar> {
    /// One row per partition, totals ascending, first part descending.
    pub rows: Vec<DominanceRow<S>>,
    /// Size vectors where the diffusion mechanism did not dominate.
    pub non_dominant: Vec<Vec<usize>>,
}

const MAX_TOTAL: usize = 14;

/// Scans every branch-size partition with total buyers <= `max_total`.
pub fn revenue_dominance_scan<S: Scalar>(max_total: usize) -> Result<DominanceReport<S>> {
    if !(1..=MAX_TOTAL).contains(&max_total) {
        return Err(Error::InvalidParameter("dominance scan bound must lie in 1..=14"));
    }
    let mut rows = Vec::new();
    for total in 1..=max_total {
        let mut prefix = Vec::new();
        partitions(total, total, &mut prefix, &mut |sizes| {
            let e_fpdm = expected_revenue_fpdm(sizes).expect("partition sizes are valid");
            let e_base = expected_revenue_base(sizes.len());
            rows.push(DominanceRow {
                sizes: sizes.to_vec(),
                e_fpdm,
                e_base,
                dominant: e_fpdm > e_base,
            });
        });
    }
    let non_dominant = rows.iter().filter(|r| !r.dominant).map(|r| r.sizes.clone()).collect();
    Ok(DominanceReport { rows, non_dominant })
}

fn partitions(rest: usize, max: usize, prefix: &mut Vec<usize>, emit: &mut impl FnMut(&[usize])) {
    if rest == 0 {
        emit(prefix);
        return;
    }
    for part in (1..=rest.min(max)).rev() {
        prefix.push(part);
        partitions(rest - part, part, prefix, emit);
        prefix.pop();
    }
}
