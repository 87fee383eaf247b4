//! Structure of the channel `Φ = Σ_y K_y`: fixed points, minimal invariant
//! subspaces, identifiability between models and relative entropy rates.

mod decompose;
mod entropy;
mod identifiability;
mod superop;

pub use decompose::{decompose, ChannelDecomposition, MinimalSubspace};
pub use entropy::{
    entropy_rate, entropy_rate_exhaustive, entropy_rate_monte_carlo, EntropyMode, EntropyRateEstimate,
    EXHAUSTIVE_WORD_LIMIT,
};
pub use identifiability::{
    check_identifiability, check_identifiability_states, IdentifiabilityReport, PairSeparation,
    ENUMERATION_BUDGET, SEPARATION_TOL,
};
pub use superop::{build_superoperator, fixed_point_space, FixedPointSpace, Superoperator, EIGEN_ONE_TOL, EIGEN_ONE_WARN};
