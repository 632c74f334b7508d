//! Banzhaf values and Banzhaf interactions for cooperative games, with
//! cross-modal alignment games, hierarchical token merging, training
//! objectives, estimators for large games and an executable axiom bench.

pub mod axioms;
pub mod coalition;
pub mod cross_modal;
pub mod error;
pub mod estimators;
pub mod game;
pub mod hierarchy;
pub mod io;
pub mod matrix;
pub mod objectives;
pub mod pipeline;
pub mod synthetic;

pub use coalition::{Coalition, MAX_PLAYERS};
pub use cross_modal::{
    alignment_matrix, criterion_report, restricted_similarity, similarity, AlignmentMatrix,
    CrossModalGame, Modality, TokenSet,
};
pub use error::{Error, Result};
pub use game::{
    banzhaf_interaction_exact, banzhaf_value, interaction_matrix_exact, reduced_game, Game,
    InteractionMap, InteractionResult, Method, DEFAULT_EXACT_CAP, MAX_EXACT_CAP,
};
pub use matrix::Matrix;
