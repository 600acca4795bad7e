//! Borrowing of information between subtrials through Hellinger-weighted
//! commensurate predictive priors.

mod hellinger;
mod predictive;
mod proposed;
mod spike_slab;

pub use hellinger::{hellinger_normal, hellinger_numeric, trapezoid, DensityGrid, HellingerMatrix, NORMALISATION_TOLERANCE};
pub use predictive::{
    combine_mpp, marginal_cpp_moments, marginal_cpp_moments_simulated, slab_weight, softmax_weights,
    CommensurateComponent, MppPrior, WeightMatrix, DEFAULT_CPP_DRAWS, MIN_CPP_DRAWS,
};
pub use proposed::{analyze_proposed, build_mpp_priors, fit_with_mpp, ProposedAnalysis, ProposedConfig};
pub use spike_slab::{SpikeSlabPrior, DEFAULT_SLAB_LOWER, DEFAULT_SLAB_UPPER, DEFAULT_SPIKE};
