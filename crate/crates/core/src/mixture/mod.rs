//! Statistical mixtures of level processes, Gibbs weights and the stationary
//! process they generate.

mod gibbs;
mod mixed;
mod stationary;
mod weights;

pub use gibbs::{entropy, gibbs_weights, max_entropy, mean_energy, solve_beta, GibbsParameters};
pub use mixed::{level_normalization, mixed_joint_density, MixedProcess};
pub use stationary::StationaryProcess;
pub use weights::{WeightSequence, DEFAULT_DEFICIT_BOUND};
