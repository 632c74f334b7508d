use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::{Game, InteractionMap, Method};
use crate::matrix::Matrix;

/// Samples drawn from one random stream. Streams are indexed by chunk, so the
/// estimate does not depend on how chunks are scheduled.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    /// Pair every drawn coalition with its complement among the other players.
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 1024,
            seed: 0,
            antithetic: false,
        }
    }
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Result<Self> {
        let cfg = McConfig {
            samples,
            seed,
            antithetic: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidArgument(
                "Monte-Carlo sample count must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Independent draws behind the estimate (coalition pairs when antithetic).
    pub draws: usize,
}

#[derive(Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0.0 {
            return other;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + d * other.count / count,
            m2: self.m2 + other.m2 + d * d * self.count * other.count / count,
        }
    }
}

/// Unbiased Monte-Carlo estimate of the Banzhaf interaction of `{i, j}`.
///
/// Each other player joins the sampled coalition independently with
/// probability one half, which is exactly the uniform measure over coalitions
/// of the remaining players.
pub fn mc_interaction(game: &Game, i: usize, j: usize, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    game.check_pair(i, j)?;
    let free = game.active().without(i).without(j).bits();
    let term = |c: Coalition| {
        game.value(c.with(i).with(j)) + game.value(c)
            - game.value(c.with(i))
            - game.value(c.with(j))
    };
    let draws = if cfg.antithetic {
        cfg.samples.div_ceil(2)
    } else {
        cfg.samples
    };
    let chunks = draws.div_ceil(CHUNK);
    let partial: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(chunk as u64);
            let len = CHUNK.min(draws - chunk * CHUNK);
            let mut m = Moments::default();
            for _ in 0..len {
                let c = Coalition(rng.random::<u64>() & free);
                let x = if cfg.antithetic {
                    0.5 * (term(c) + term(Coalition(!c.bits() & free)))
                } else {
                    term(c)
                };
                m.push(x);
            }
            m
        })
        .collect();
    let total = partial.into_iter().fold(Moments::default(), Moments::merge);
    let std_error = if total.count > 1.0 {
        (total.m2 / (total.count - 1.0)).max(0.0).sqrt() / total.count.sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate: total.mean,
        std_error,
        draws,
    })
}

/// Estimates every `left x right` interaction. Pair `(r, c)` draws from
/// seed `cfg.seed + r * right.len() + c`, so each entry is reproducible alone.
pub fn mc_interaction_map(
    game: &Game,
    left: &[usize],
    right: &[usize],
    cfg: &McConfig,
) -> Result<InteractionMap> {
    let cols = right.len();
    let values = (0..left.len() * cols)
        .into_par_iter()
        .map(|k| {
            let pair_cfg = McConfig {
                seed: cfg.seed.wrapping_add(k as u64),
                ..*cfg
            };
            mc_interaction(game, left[k / cols], right[k % cols], &pair_cfg).map(|e| e.estimate)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(InteractionMap::new(
        Matrix::from_vec(left.len(), cols, values)?,
        Method::MonteCarlo,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::banzhaf_interaction_exact;

    #[test]
    fn two_players_is_exact() {
        let g = Game::from_table(vec![0.3, -0.2, 0.7, 1.9]).unwrap();
        let est = mc_interaction(&g, 0, 1, &McConfig::new(50, 3).unwrap()).unwrap();
        let exact = banzhaf_interaction_exact(&g, 0, 1).unwrap().value;
        assert!((est.estimate - exact).abs() < 1e-12);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn additive_is_zero() {
        let g = Game::additive(&[0.5, 1.5, -2.0, 0.25, 3.0, 1.0]).unwrap();
        let est = mc_interaction(&g, 1, 4, &McConfig::new(777, 11).unwrap()).unwrap();
        assert!(est.estimate.abs() < 1e-12);
        assert!(est.std_error < 1e-12);
    }

    #[test]
    fn seed_determinism() {
        let g = Game::quadratic_size(12).unwrap();
        let cfg = McConfig::new(3000, 42).unwrap();
        let a = mc_interaction(&g, 0, 5, &cfg).unwrap();
        let b = mc_interaction(&g, 0, 5, &cfg).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn handles_more_than_32_players() {
        let g = Game::new(40, "size", |c| (c.len() as f64).powi(3)).unwrap();
        let est = mc_interaction(&g, 0, 39, &McConfig::new(4096, 1).unwrap()).unwrap();
        // term = 6|C| + 6 for a cubic size game, mean |C| = 19
        assert!((est.estimate - 120.0).abs() < 5.0 * est.std_error.max(1e-9));
    }

    #[test]
    fn antithetic_draw_count() {
        let g = Game::quadratic_size(6).unwrap();
        let cfg = McConfig::new(9, 0).unwrap().antithetic(true);
        assert_eq!(mc_interaction(&g, 0, 1, &cfg).unwrap().draws, 5);
    }

    #[test]
    fn errors() {
        let g = Game::quadratic_size(4).unwrap();
        assert!(matches!(
            mc_interaction(&g, 2, 2, &McConfig::default()),
            Err(Error::SamePlayer(2))
        ));
        assert!(McConfig::new(0, 1).is_err());
    }
}
