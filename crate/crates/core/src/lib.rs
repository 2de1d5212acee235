//! Fixed-price diffusion mechanism over tree-shaped social networks.
//!
//! A seller at the root of a tree sells one item. Posting a price only
//! reaches her direct neighbours; the diffusion mechanism prices each
//! neighbour's subtree for the buyers *outside* it and pays geometric path
//! rewards, so buyers are willing to forward the sale to their children.
//!
//! The crate provides:
//! - [`network`]: trees, diffusion action profiles, branch decomposition;
//! - [`pricing`]: closed-form optimal prices and expected revenues;
//! - [`mechanisms`]: execution of the baseline posted-price mechanism and the
//!   diffusion mechanism, with configurable reward/threshold/tie modes;
//! - [`verification`]: exhaustive individual-rationality and
//!   incentive-compatibility suites, Monte Carlo revenue estimation, rooted
//!   tree enumeration, and the revenue dominance scan.
//!
//! All monetary arithmetic is generic over [`Scalar`] (f32 or f64); the
//! aliases below pin the f64 instantiations used by the CLI.

pub mod error;
pub mod mechanisms;
pub mod network;
pub mod pricing;
pub mod scalar;
pub mod verification;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision revenue curve row.
pub type RevenuePointF64 = pricing::RevenuePoint<f64>;
/// Double-precision mechanism configuration.
pub type MechanismConfigF64 = mechanisms::MechanismConfig<f64>;
/// Double-precision mechanism outcome.
pub type OutcomeF64 = mechanisms::Outcome<f64>;
/// Double-precision valuation profile.
pub type ValuationProfileF64 = mechanisms::ValuationProfile<f64>;
/// Double-precision Monte Carlo estimate.
pub type MonteCarloEstimateF64 = verification::MonteCarloEstimate<f64>;
/// Double-precision property report.
pub type PropertyReportF64 = verification::PropertyReport<f64>;
