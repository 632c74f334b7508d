//! Seeded generators for test inputs and surrogate training data.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::coalition::Coalition;
use crate::cross_modal::{alignment_matrix, AlignmentMatrix, CrossModalGame, Modality, TokenSet};
use crate::error::{Error, Result};
use crate::game::{interaction_matrix_exact, Game, InteractionMap};
use crate::matrix::Matrix;

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Standard normal tokens with uniform weights.
pub fn random_tokens(
    n: usize,
    dim: usize,
    modality: Modality,
    rng: &mut ChaCha8Rng,
) -> Result<TokenSet> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidArgument(
            "token sets need at least one token and one dimension".into(),
        ));
    }
    TokenSet::uniform(gaussian_matrix(n, dim, rng), modality)
}

/// Video/text token sets whose words are noisy copies of random frames, so
/// that some frame-word pairs are strongly aligned.
pub fn paired_tokens(
    n_visual: usize,
    n_textual: usize,
    dim: usize,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(TokenSet, TokenSet)> {
    let video = random_tokens(n_visual, dim, Modality::Visual, rng)?;
    let mut text = Matrix::zeros(n_textual, dim);
    for j in 0..n_textual {
        let src = rng.random_range(0..n_visual);
        for c in 0..dim {
            let e: f64 = rng.sample(StandardNormal);
            text.set(j, c, video.tokens().get(src, c) + noise * e);
        }
    }
    Ok((video, TokenSet::uniform(text, Modality::Textual)?))
}

/// Cosine alignment between independent Gaussian token sets.
pub fn random_alignment(
    n_visual: usize,
    n_textual: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<AlignmentMatrix> {
    let v = random_tokens(n_visual, dim, Modality::Visual, rng)?;
    let t = random_tokens(n_textual, dim, Modality::Textual, rng)?;
    alignment_matrix(&v, &t)
}

/// `m` isotropic Gaussian blobs of `per_blob` points with standard deviation
/// `sigma`, centers spaced `separation` apart along the first axis. Points are
/// shuffled; the second value holds each point's blob.
pub fn gaussian_blobs(
    m: usize,
    per_blob: usize,
    dim: usize,
    separation: f64,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Matrix, Vec<usize>)> {
    if m == 0 || per_blob == 0 || dim == 0 {
        return Err(Error::InvalidArgument(
            "blobs need positive count, size and dimension".into(),
        ));
    }
    let mut labels: Vec<usize> = (0..m)
        .flat_map(|b| std::iter::repeat_n(b, per_blob))
        .collect();
    labels.shuffle(rng);
    let points = Matrix::from_fn(labels.len(), dim, |i, c| {
        let center = if c == 0 {
            labels[i] as f64 * separation
        } else {
            0.0
        };
        center + sigma * rng.sample::<f64, _>(StandardNormal)
    });
    Ok((points, labels))
}

/// Payoffs drawn uniformly from `[-scale, scale]` for every coalition.
pub fn random_table_game(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Result<Game> {
    if n == 0 || n > 24 {
        return Err(Error::InvalidArgument(format!(
            "random tables support 1..=24 players, got {n}"
        )));
    }
    let table = (0..1usize << n)
        .map(|_| rng.random_range(-scale..=scale))
        .collect();
    Game::from_table(table)
}

/// Multilinear game `phi(S) = sum_T c_T [T ⊆ S]` over `terms` random
/// coalitions of one to `max_degree` players, with `c_T` standard normal.
pub fn random_polynomial_game(
    n: usize,
    terms: usize,
    max_degree: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Game> {
    if max_degree == 0 || max_degree > n {
        return Err(Error::InvalidArgument(format!(
            "degree {max_degree} invalid for {n} players"
        )));
    }
    let mut players: Vec<usize> = (0..n).collect();
    let mut monomials = Vec::with_capacity(terms);
    for _ in 0..terms {
        let degree = rng.random_range(1..=max_degree);
        players.shuffle(rng);
        let coeff: f64 = rng.sample(StandardNormal);
        monomials.push((
            Coalition::from_players(players[..degree].iter().copied()),
            coeff,
        ));
    }
    Game::new(n, "polynomial", move |s| {
        monomials
            .iter()
            .filter(|(t, _)| t.is_subset_of(s))
            .map(|(_, c)| c)
            .sum()
    })
}

/// Alignment matrices with their exact frame-word interaction maps.
pub fn surrogate_dataset(
    count: usize,
    n_visual: usize,
    n_textual: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(AlignmentMatrix, InteractionMap)>> {
    (0..count)
        .map(|_| {
            let a = random_alignment(n_visual, n_textual, dim, rng)?;
            let map = exact_cross_modal_map(&a)?;
            Ok((a, map))
        })
        .collect()
}

/// Exact interaction of every frame with every word under uniform weights.
pub fn exact_cross_modal_map(alignment: &AlignmentMatrix) -> Result<InteractionMap> {
    let cm = CrossModalGame::uniform(alignment.clone())?;
    let game = cm.to_game()?;
    interaction_matrix_exact(&game, &cm.frame_players(), &cm.word_players())
}
