//! Cost sharing for multi-feature community routers.
//!
//! Users bid in two stages for which router features get built and how the
//! manufacture cost is split between them. This crate contains
//!
//! * [`scenario`]: instance types, validation and the JSON file format;
//! * [`cost_sharing`]: the proportional sharing rule and its auxiliary share;
//! * [`mechanism`]: the auction itself, from winning bids to payments;
//! * [`strategies`]: truthful, equilibrium and fixed bid profiles;
//! * [`verifier`]: brute-force best responses and the equilibrium audit.
//!
//! All amounts are exact rationals ([`Money`]).

pub mod cost_sharing;
pub mod mechanism;
pub mod money;
pub mod scenario;
pub mod strategies;
pub mod verifier;

pub use money::Money;
