//! Valuation profile sources for the property suites: offset grids and
//! seeded samples.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::verification::derive_seed;

/// Where the valuation profiles of a check come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValuationSource<S: Scalar> {
    /// Every combination of the offset grid {step/2, 3 step/2, ...}; the
    /// offset keeps grid points away from posted prices so strict and weak
    /// claim thresholds agree on grid instances.
    Grid { step: S },
    /// `count` i.i.d. uniform profiles, derived from (seed, index).
    Sampled { count: u64, seed: u64 },
}

/// Enumerable space of valuation profiles over a fixed number of buyers.
pub(crate) struct ProfileSpace<S: Scalar> {
    buyers: usize,
    kind: SpaceKind<S>,
    total: u64,
}

enum SpaceKind<S: Scalar> {
    Grid { points: Vec<S> },
    Sampled { seed: u64 },
}

impl<S: Scalar> ProfileSpace<S> {
    pub(crate) fn new(buyers: usize, source: &ValuationSource<S>) -> Result<Self> {
        match *source {
            ValuationSource::Grid { step } => {
                if !(step > S::zero() && step <= S::from_config(0.5)) {
                    return Err(Error::InvalidParameter("grid step must lie in (0, 0.5]"));
                }
                let n = (S::one() / step).round().to_usize().unwrap_or(0).max(1);
                let points: Vec<S> = (0..n)
                    .map(|i| (S::from_count(i) + S::from_config(0.5)) * step)
                    .collect();
                let total = (points.len() as u64)
                    .checked_pow(buyers as u32)
                    .ok_or(Error::InvalidParameter("grid too large to enumerate"))?;
                Ok(ProfileSpace { buyers, kind: SpaceKind::Grid { points }, total })
            }
            ValuationSource::Sampled { count, seed } => {
                if count == 0 {
                    return Err(Error::InvalidParameter("sample count must be positive"));
                }
                Ok(ProfileSpace { buyers, kind: SpaceKind::Sampled { seed }, total: count })
            }
        }
    }

    pub(crate) fn total(&self) -> u64 {
        self.total
    }

    /// Writes profile `index` into `out` (buyer i at out[i - 1]).
    pub(crate) fn fill(&self, index: u64, out: &mut [S]) {
        debug_assert_eq!(out.len(), self.buyers);
        match &self.kind {
            SpaceKind::Grid { points } => {
                let n = points.len() as u64;
                let mut rest = index;
                for slot in out.iter_mut() {
                    *slot = points[(rest % n) as usize];
                    rest /= n;
                }
            }
            SpaceKind::Sampled { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(*seed, index));
                for slot in out.iter_mut() {
                    *slot = S::from_config(rng.gen::<f64>());
                }
            }
        }
    }
}
