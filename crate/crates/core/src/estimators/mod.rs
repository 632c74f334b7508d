//! Estimators for Banzhaf interactions of games too large to enumerate.

mod monte_carlo;
mod surrogate;

pub use monte_carlo::{mc_interaction, mc_interaction_map, McConfig, McEstimate};
pub use surrogate::{
    surrogate_predict, surrogate_train, Dense, SurrogateModel, TrainConfig, TrainingMeta,
    TrainingOutcome, DEFAULT_HIDDEN, MODEL_FORMAT_VERSION,
};
