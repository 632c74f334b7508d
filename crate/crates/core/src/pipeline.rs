//! End-to-end evaluation of a batch of video-text pairs: level stacks,
//! per-level interaction maps, batch similarities and the full loss stack.

use serde::{Deserialize, Serialize};

use crate::cross_modal::{alignment_matrix, CrossModalGame, TokenSet};
use crate::error::{Error, Result};
use crate::estimators::{mc_interaction_map, surrogate_predict, McConfig, SurrogateModel};
use crate::game::{interaction_matrix_exact, InteractionMap};
use crate::hierarchy::{
    build_level_stack, ClusterResult, HierarchyConfig, LevelCounts, LevelName, LevelStack,
};
use crate::matrix::Matrix;
use crate::objectives::{
    total_loss, BatchSimilarities, LevelInputs, LossBreakdown, RelationshipMap, DEFAULT_ALPHA,
    DEFAULT_BETA, DEFAULT_TAU,
};

/// How the 36-player entity level is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityMethod {
    MonteCarlo,
    Surrogate,
}

/// Source of the relationship map `R` that interaction distributions are
/// matched against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationshipSource {
    /// Frame-word cosine alignment of the level.
    Alignment,
    /// The interaction map itself, so the interaction loss vanishes.
    Interaction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub hierarchy: HierarchyConfig,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub entity_method: EntityMethod,
    pub mc: McConfig,
    pub relationship: RelationshipSource,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            hierarchy: HierarchyConfig::default(),
            tau: DEFAULT_TAU,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            entity_method: EntityMethod::MonteCarlo,
            mc: McConfig::default(),
            relationship: RelationshipSource::Alignment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineMetadata {
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub counts: LevelCounts,
    pub entity_method: EntityMethod,
    pub samples: usize,
    pub seed: u64,
    pub relationship: RelationshipSource,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelOutput {
    pub level: LevelName,
    pub shape: (usize, usize),
    pub interaction: InteractionMap,
    pub similarity: f64,
    /// Clustering of the previous level that produced these tokens.
    pub visual_clusters: Option<ClusterResult>,
    pub textual_clusters: Option<ClusterResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutput {
    pub levels: Vec<LevelOutput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub metadata: PipelineMetadata,
    pub pairs: Vec<PairOutput>,
    /// One `B x B` video-by-text similarity matrix per level.
    pub batch_similarities: Vec<Matrix>,
    pub losses: LossBreakdown,
}

fn level_interaction(
    game: &CrossModalGame,
    level: LevelName,
    config: &PipelineConfig,
    model: Option<&SurrogateModel>,
    pair: usize,
) -> Result<InteractionMap> {
    let frames = game.frame_players();
    let words = game.word_players();
    if level != LevelName::Entity {
        return interaction_matrix_exact(&game.to_game()?, &frames, &words);
    }
    match config.entity_method {
        EntityMethod::MonteCarlo => {
            let mc = McConfig {
                seed: config.mc.seed.wrapping_add((pair as u64) << 32),
                ..config.mc
            };
            mc_interaction_map(&game.to_game()?, &frames, &words, &mc)
        }
        EntityMethod::Surrogate => {
            let model = model.ok_or_else(|| {
                Error::InvalidArgument("surrogate entity method needs a model".into())
            })?;
            surrogate_predict(model, game.alignment())
        }
    }
}

/// Runs the batch. Pair `b` is the positive match of video `b` and text `b`;
/// every other combination is a negative in the batch similarity matrices.
pub fn run_pipeline(
    pairs: &[(TokenSet, TokenSet)],
    config: &PipelineConfig,
    model: Option<&SurrogateModel>,
) -> Result<PipelineOutput> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "pipeline needs at least one video-text pair".into(),
        ));
    }
    config.mc.validate()?;
    let stacks: Vec<LevelStack> = pairs
        .iter()
        .map(|(v, t)| build_level_stack(v, t, &config.hierarchy))
        .collect::<Result<_>>()?;
    let b = pairs.len();

    let mut outputs: Vec<PairOutput> = Vec::with_capacity(b);
    let mut maps: [Vec<(RelationshipMap, InteractionMap)>; 3] = Default::default();
    for (k, stack) in stacks.iter().enumerate() {
        let mut levels = Vec::with_capacity(3);
        for (l, level) in stack.levels.iter().enumerate() {
            let game = CrossModalGame::from_tokens(&level.visual, &level.textual)?;
            let interaction = level_interaction(&game, level.name, config, model, k)?;
            let r = match config.relationship {
                RelationshipSource::Alignment => game.alignment().matrix().clone(),
                RelationshipSource::Interaction => interaction.values.clone(),
            };
            maps[l].push((RelationshipMap::new(r)?, interaction.clone()));
            levels.push(LevelOutput {
                level: level.name,
                shape: interaction.shape(),
                interaction,
                similarity: game.similarity(),
                visual_clusters: level.visual_clusters.clone(),
                textual_clusters: level.textual_clusters.clone(),
            });
        }
        outputs.push(PairOutput { levels });
    }

    let mut batch_similarities = Vec::with_capacity(3);
    let mut inputs = Vec::with_capacity(3);
    for (l, level_maps) in maps.into_iter().enumerate() {
        let mut s = Matrix::zeros(b, b);
        for (bv, sv) in stacks.iter().enumerate() {
            for (bt, st) in stacks.iter().enumerate() {
                let value = if bv == bt {
                    outputs[bv].levels[l].similarity
                } else {
                    let (v, t) = (&sv.levels[l].visual, &st.levels[l].textual);
                    let a = alignment_matrix(v, t)?;
                    CrossModalGame::new(a, v.weights().to_vec(), t.weights().to_vec())?.similarity()
                };
                s.set(bv, bt, value);
            }
        }
        batch_similarities.push(s.clone());
        inputs.push(LevelInputs {
            batch: BatchSimilarities::new(s, config.tau)?,
            maps: level_maps,
        });
    }
    let inputs: [LevelInputs; 3] = inputs
        .try_into()
        .map_err(|_| Error::InvalidArgument("expected three levels".into()))?;
    let losses = total_loss(&inputs, config.alpha, config.beta)?;

    Ok(PipelineOutput {
        metadata: PipelineMetadata {
            tau: config.tau,
            alpha: config.alpha,
            beta: config.beta,
            counts: config.hierarchy.counts,
            entity_method: config.entity_method,
            samples: config.mc.samples,
            seed: config.mc.seed,
            relationship: config.relationship,
            batch_size: b,
        },
        pairs: outputs,
        batch_similarities,
        losses,
    })
}
