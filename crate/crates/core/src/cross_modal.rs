//! Cross-modal characteristic function over frame and word tokens.
//!
//! Players `0..N_v` are video frames and `N_v..N_v + N_t` are text words. A
//! coalition is scored with the weighted max-alignment similarity restricted
//! to the frames and words it contains; a coalition missing either modality
//! scores exactly zero.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coalition::{Coalition, MAX_PLAYERS};
use crate::error::{Error, Result};
use crate::game::{exact_interaction_with_count, Game};
use crate::matrix::Matrix;

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Visual,
    Textual,
}

/// Embedded tokens of one modality with per-token pooling weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TokenSetRepr", into = "TokenSetRepr")]
pub struct TokenSet {
    tokens: Matrix,
    modality: Modality,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TokenSetRepr {
    modality: Modality,
    tokens: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

impl TryFrom<TokenSetRepr> for TokenSet {
    type Error = Error;

    fn try_from(r: TokenSetRepr) -> Result<Self> {
        TokenSet::new(Matrix::from_rows(&r.tokens)?, r.modality, r.weights)
    }
}

impl From<TokenSet> for TokenSetRepr {
    fn from(t: TokenSet) -> Self {
        TokenSetRepr {
            modality: t.modality,
            tokens: t.tokens.to_rows(),
            weights: Some(t.weights),
        }
    }
}

impl TokenSet {
    /// Validates the tokens; `weights` defaults to uniform.
    pub fn new(tokens: Matrix, modality: Modality, weights: Option<Vec<f64>>) -> Result<Self> {
        if tokens.rows() == 0 || tokens.cols() == 0 {
            return Err(Error::InvalidArgument("token set must be non-empty".into()));
        }
        for i in 0..tokens.rows() {
            let row = tokens.row(i);
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("token {i}")));
            }
            if norm(row) == 0.0 {
                return Err(Error::ZeroNorm { index: i });
            }
        }
        let weights = match weights {
            Some(w) => {
                validate_weights(&w, tokens.rows())?;
                w
            }
            None => uniform_weights(tokens.rows()),
        };
        Ok(TokenSet {
            tokens,
            modality,
            weights,
        })
    }

    pub fn uniform(tokens: Matrix, modality: Modality) -> Result<Self> {
        Self::new(tokens, modality, None)
    }

    pub fn count(&self) -> usize {
        self.tokens.rows()
    }

    pub fn dim(&self) -> usize {
        self.tokens.cols()
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn tokens(&self) -> &Matrix {
        &self.tokens
    }

    pub fn token(&self, i: usize) -> &[f64] {
        self.tokens.row(i)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn with_weights(self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.tokens, self.modality, Some(weights))
    }
}

pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn validate_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {n} tokens",
            w.len()
        )));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidWeights(
            "weights must be finite and non-negative".into(),
        ));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::InvalidWeights(format!(
            "weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarities between frames (rows) and words (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct AlignmentMatrix(Matrix);

impl TryFrom<Matrix> for AlignmentMatrix {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        AlignmentMatrix::new(m)
    }
}

impl From<AlignmentMatrix> for Matrix {
    fn from(a: AlignmentMatrix) -> Matrix {
        a.0
    }
}

impl AlignmentMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows() == 0 || m.cols() == 0 {
            return Err(Error::InvalidArgument(
                "alignment matrix must be non-empty".into(),
            ));
        }
        if let Some(v) = m.as_slice().iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "alignment entry {v} outside [-1, 1]"
            )));
        }
        Ok(AlignmentMatrix(m))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn n_visual(&self) -> usize {
        self.0.rows()
    }

    pub fn n_textual(&self) -> usize {
        self.0.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

/// Cosine similarity of every frame against every word.
pub fn alignment_matrix(video: &TokenSet, text: &TokenSet) -> Result<AlignmentMatrix> {
    if video.dim() != text.dim() {
        return Err(Error::DimensionMismatch(format!(
            "visual tokens have dim {}, textual tokens have dim {}",
            video.dim(),
            text.dim()
        )));
    }
    let vn: Vec<f64> = (0..video.count()).map(|i| norm(video.token(i))).collect();
    let tn: Vec<f64> = (0..text.count()).map(|j| norm(text.token(j))).collect();
    let m = Matrix::from_fn(video.count(), text.count(), |i, j| {
        let dot: f64 = video
            .token(i)
            .iter()
            .zip(text.token(j))
            .map(|(a, b)| a * b)
            .sum();
        (dot / (vn[i] * tn[j])).clamp(-1.0, 1.0)
    });
    AlignmentMatrix::new(m)
}

/// Half the sum of the weighted row-max (video-to-text) and weighted
/// column-max (text-to-video) alignment scores.
pub fn similarity(
    alignment: &AlignmentMatrix,
    weights_v: &[f64],
    weights_t: &[f64],
) -> Result<f64> {
    validate_weights(weights_v, alignment.n_visual())?;
    validate_weights(weights_t, alignment.n_textual())?;
    let rows = Coalition::full(alignment.n_visual()).bits();
    let cols = Coalition::full(alignment.n_textual()).bits();
    Ok(masked_similarity(
        alignment.matrix(),
        weights_v,
        weights_t,
        rows,
        cols,
        true,
        true,
    ))
}

/// Similarity restricted to the rows and columns in the masks. When a side is
/// partial, its surviving weights are renormalized to sum to one (uniform if
/// they carry no mass).
fn masked_similarity(
    a: &Matrix,
    wv: &[f64],
    wt: &[f64],
    rows: u64,
    cols: u64,
    full_rows: bool,
    full_cols: bool,
) -> f64 {
    let nt = a.cols();
    let mut col_max = [f64::NEG_INFINITY; MAX_PLAYERS];
    let mut v2t = 0.0;
    let mut mass_v = 0.0;
    let mut count_v = 0usize;
    let mut row_max_sum = 0.0;
    for i in Coalition(rows).players() {
        let row = a.row(i);
        let mut m = f64::NEG_INFINITY;
        for j in Coalition(cols).players() {
            let x = row[j];
            if x > m {
                m = x;
            }
            if x > col_max[j] {
                col_max[j] = x;
            }
        }
        v2t += wv[i] * m;
        mass_v += wv[i];
        row_max_sum += m;
        count_v += 1;
    }
    let mut t2v = 0.0;
    let mut mass_t = 0.0;
    let mut count_t = 0usize;
    let mut col_max_sum = 0.0;
    for j in Coalition(cols).players() {
        debug_assert!(j < nt);
        t2v += wt[j] * col_max[j];
        mass_t += wt[j];
        col_max_sum += col_max[j];
        count_t += 1;
    }
    if !full_rows {
        v2t = if mass_v > 0.0 {
            v2t / mass_v
        } else {
            row_max_sum / count_v as f64
        };
    }
    if !full_cols {
        t2v = if mass_t > 0.0 {
            t2v / mass_t
        } else {
            col_max_sum / count_t as f64
        };
    }
    0.5 * (v2t + t2v)
}

/// The cross-modal game: alignment scores plus pooling weights per modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossModalGame {
    alignment: AlignmentMatrix,
    weights_v: Vec<f64>,
    weights_t: Vec<f64>,
}

impl CrossModalGame {
    pub fn new(
        alignment: AlignmentMatrix,
        weights_v: Vec<f64>,
        weights_t: Vec<f64>,
    ) -> Result<Self> {
        let n = alignment.n_visual() + alignment.n_textual();
        if n > MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                n,
                max: MAX_PLAYERS,
            });
        }
        validate_weights(&weights_v, alignment.n_visual())?;
        validate_weights(&weights_t, alignment.n_textual())?;
        Ok(CrossModalGame {
            alignment,
            weights_v,
            weights_t,
        })
    }

    /// Uniform pooling weights on both sides.
    pub fn uniform(alignment: AlignmentMatrix) -> Result<Self> {
        let (nv, nt) = (alignment.n_visual(), alignment.n_textual());
        Self::new(alignment, uniform_weights(nv), uniform_weights(nt))
    }

    pub fn from_tokens(video: &TokenSet, text: &TokenSet) -> Result<Self> {
        let a = alignment_matrix(video, text)?;
        Self::new(a, video.weights().to_vec(), text.weights().to_vec())
    }

    pub fn alignment(&self) -> &AlignmentMatrix {
        &self.alignment
    }

    pub fn weights_v(&self) -> &[f64] {
        &self.weights_v
    }

    pub fn weights_t(&self) -> &[f64] {
        &self.weights_t
    }

    pub fn n_visual(&self) -> usize {
        self.alignment.n_visual()
    }

    pub fn n_textual(&self) -> usize {
        self.alignment.n_textual()
    }

    pub fn n_players(&self) -> usize {
        self.n_visual() + self.n_textual()
    }

    pub fn frame_player(&self, i: usize) -> usize {
        i
    }

    pub fn word_player(&self, j: usize) -> usize {
        self.n_visual() + j
    }

    pub fn frame_players(&self) -> Vec<usize> {
        (0..self.n_visual()).collect()
    }

    pub fn word_players(&self) -> Vec<usize> {
        (self.n_visual()..self.n_players()).collect()
    }

    pub fn similarity(&self) -> f64 {
        let rows = Coalition::full(self.n_visual()).bits();
        let cols = Coalition::full(self.n_textual()).bits();
        masked_similarity(
            self.alignment.matrix(),
            &self.weights_v,
            &self.weights_t,
            rows,
            cols,
            true,
            true,
        )
    }

    /// Wraps this characteristic function as a [`Game`] over `N_v + N_t` players.
    pub fn to_game(&self) -> Result<Game> {
        let inner = Arc::new(self.clone());
        Game::new(self.n_players(), "cross_modal", move |c| {
            restricted_similarity(&inner, c)
        })
    }
}

/// The characteristic function of the cross-modal game.
pub fn restricted_similarity(game: &CrossModalGame, coalition: Coalition) -> f64 {
    let nv = game.n_visual();
    let nt = game.n_textual();
    let full_rows = Coalition::full(nv).bits();
    let full_cols = Coalition::full(nt).bits();
    let rows = coalition.bits() & full_rows;
    let cols = (coalition.bits() >> nv) & full_cols;
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    masked_similarity(
        game.alignment.matrix(),
        &game.weights_v,
        &game.weights_t,
        rows,
        cols,
        rows == full_rows,
        cols == full_cols,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostic {
    pub frame: usize,
    pub word: usize,
    pub kind: PairKind,
    /// Expected change in score from the pair acting apart rather than as a
    /// bloc, averaged over coalitions of the other players.
    pub delta: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub pairs: Vec<PairDiagnostic>,
    /// Empty, frames-only and words-only coalitions all score exactly zero.
    pub zero_without_partners: bool,
}

/// Diagnostics for the three requirements on the characteristic function.
///
/// Strongly matched pairs should gain from acting as a bloc (`delta < 0`),
/// irrelevant pairs should lose (`delta > 0`). These are properties of the
/// data, so they are reported rather than enforced. The zero-score
/// requirement is structural and is checked on the empty set, the full frame
/// set, the full word set and every singleton.
pub fn criterion_report(
    game: &CrossModalGame,
    positive_pairs: &[(usize, usize)],
    negative_pairs: &[(usize, usize)],
) -> Result<CriterionReport> {
    let (nv, nt) = (game.n_visual(), game.n_textual());
    let frames = Coalition::full(nv);
    let words = Coalition(Coalition::full(nt).bits() << nv);
    let mut zero = restricted_similarity(game, Coalition::EMPTY) == 0.0
        && restricted_similarity(game, frames) == 0.0
        && restricted_similarity(game, words) == 0.0;
    for p in 0..game.n_players() {
        zero &= restricted_similarity(game, Coalition::singleton(p)) == 0.0;
    }

    let listed = positive_pairs
        .iter()
        .map(|&p| (p, PairKind::Positive))
        .chain(negative_pairs.iter().map(|&p| (p, PairKind::Negative)));
    let mut pairs = Vec::new();
    let mut as_game = None;
    for ((frame, word), kind) in listed {
        if frame >= nv || word >= nt {
            return Err(Error::InvalidArgument(format!(
                "pair ({frame}, {word}) outside a {nv}x{nt} alignment"
            )));
        }
        if as_game.is_none() {
            as_game = Some(game.to_game()?);
        }
        let g = as_game.as_ref().expect("initialized above");
        let (interaction, _) =
            exact_interaction_with_count(g, game.frame_player(frame), game.word_player(word))?;
        let delta = -interaction;
        let satisfied = match kind {
            PairKind::Positive => delta < 0.0,
            PairKind::Negative => delta > 0.0,
        };
        pairs.push(PairDiagnostic {
            frame,
            word,
            kind,
            delta,
            satisfied,
        });
    }
    Ok(CriterionReport {
        pairs,
        zero_without_partners: zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn am(rows: &[&[f64]]) -> AlignmentMatrix {
        AlignmentMatrix::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    fn tokens(rows: &[&[f64]], modality: Modality) -> TokenSet {
        TokenSet::uniform(Matrix::from_rows(rows).unwrap(), modality).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = tokens(&[&[s, s], &[1.0, 0.0]], Modality::Visual);
        let t = tokens(&[&[1.0, 0.0], &[0.0, 3.0]], Modality::Textual);
        let a = alignment_matrix(&v, &t).unwrap();
        assert!((a.get(0, 0) - s).abs() < 1e-15);
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.get(1, 1), 0.0);
    }

    #[test]
    fn alignment_errors() {
        let v = tokens(&[&[1.0, 0.0]], Modality::Visual);
        let t = tokens(&[&[1.0, 0.0, 0.0]], Modality::Textual);
        assert!(matches!(
            alignment_matrix(&v, &t),
            Err(Error::DimensionMismatch(_))
        ));
        let zero = TokenSet::uniform(Matrix::from_rows(&[[0.0, 0.0]]).unwrap(), Modality::Visual);
        assert!(matches!(zero, Err(Error::ZeroNorm { index: 0 })));
    }

    #[test]
    fn weights_are_validated() {
        let m = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(TokenSet::new(m.clone(), Modality::Visual, Some(vec![0.5, 0.6])).is_err());
        assert!(TokenSet::new(m.clone(), Modality::Visual, Some(vec![1.0])).is_err());
        assert!(TokenSet::new(m, Modality::Visual, Some(vec![0.25, 0.75])).is_ok());
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity(&am(&[&[0.8]]), &[1.0], &[1.0]).unwrap(), 0.8);
        let id = am(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(similarity(&id, &[0.5, 0.5], &[0.5, 0.5]).unwrap(), 1.0);
        let a = am(&[&[0.5, 0.2], &[0.1, 0.4]]);
        assert!((similarity(&a, &[0.5, 0.5], &[0.5, 0.5]).unwrap() - 0.45).abs() < 1e-15);
        assert!(similarity(&a, &[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn restricted_examples() {
        let a = am(&[&[0.5, 0.2], &[0.1, 0.4]]);
        let g = CrossModalGame::uniform(a.clone()).unwrap();
        let full = Coalition::full(4);
        assert_eq!(
            restricted_similarity(&g, full).to_bits(),
            similarity(&a, &[0.5, 0.5], &[0.5, 0.5]).unwrap().to_bits()
        );
        assert_eq!(
            restricted_similarity(&g, Coalition::from_players([0, 1])),
            0.0
        );
        assert_eq!(
            restricted_similarity(&g, Coalition::from_players([2, 3])),
            0.0
        );
        assert_eq!(restricted_similarity(&g, Coalition::EMPTY), 0.0);
        // frame 0 with word 1
        assert!((restricted_similarity(&g, Coalition::from_players([0, 3])) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_mass_side_falls_back_to_uniform() {
        let a = am(&[&[0.5, 0.2], &[0.1, 0.4]]);
        let g = CrossModalGame::new(a, vec![1.0, 0.0], vec![0.5, 0.5]).unwrap();
        // only frame 1 (weight 0) with both words
        let s = restricted_similarity(&g, Coalition::from_players([1, 2, 3]));
        assert!((s - 0.5 * (0.4 + 0.5 * (0.1 + 0.4))).abs() < 1e-15);
    }

    #[test]
    fn criterion_report_empty_lists() {
        let g = CrossModalGame::uniform(am(&[&[0.5, 0.2], &[0.1, 0.4]])).unwrap();
        let r = criterion_report(&g, &[], &[]).unwrap();
        assert!(r.pairs.is_empty());
        assert!(r.zero_without_partners);
    }

    #[test]
    fn criterion_report_signs() {
        let g = CrossModalGame::uniform(am(&[
            &[0.99, 0.1, 0.05],
            &[0.1, 0.02, 0.08],
            &[0.0, 0.1, 0.1],
        ]))
        .unwrap();
        let r = criterion_report(&g, &[(0, 0)], &[]).unwrap();
        assert!(r.pairs[0].satisfied, "{:?}", r.pairs[0]);

        let g = CrossModalGame::uniform(am(&[&[0.5, 0.3], &[0.4, -0.9]])).unwrap();
        let r = criterion_report(&g, &[], &[(1, 1)]).unwrap();
        assert_eq!(r.pairs[0].kind, PairKind::Negative);
        assert!(r.pairs[0].satisfied, "{:?}", r.pairs[0]);
        // hand enumeration: (-0.9 - 0.3 - 0.325 + 0) / 4
        assert!((r.pairs[0].delta - 1.525 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn criterion_report_rejects_bad_pairs() {
        let g = CrossModalGame::uniform(am(&[&[0.5, 0.2]])).unwrap();
        assert!(criterion_report(&g, &[(1, 0)], &[]).is_err());
        assert!(criterion_report(&g, &[], &[(0, 2)]).is_err());
    }

    #[test]
    fn token_set_json_round_trip() {
        let t = tokens(&[&[1.0, 2.0], &[0.5, -1.0]], Modality::Textual);
        let s = serde_json::to_string(&t).unwrap();
        let back: TokenSet = serde_json::from_str(&s).unwrap();
        assert_eq!(t, back);
        let bad = r#"{"modality":"visual","tokens":[[0.0,0.0]]}"#;
        assert!(serde_json::from_str::<TokenSet>(bad).is_err());
    }

    fn arb_alignment() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (1usize..6, 1usize..6).prop_flat_map(|(nv, nt)| {
            (
                Just(nv),
                Just(nt),
                prop::collection::vec(-1.0f64..=1.0, nv * nt),
            )
        })
    }

    proptest! {
        #[test]
        fn bounded_and_zero_without_partners((nv, nt, data) in arb_alignment(), mask in any::<u64>()) {
            let a = AlignmentMatrix::new(Matrix::from_vec(nv, nt, data).unwrap()).unwrap();
            let g = CrossModalGame::uniform(a).unwrap();
            let c = Coalition(mask & Coalition::full(nv + nt).bits());
            let s = restricted_similarity(&g, c);
            prop_assert!((-1.0..=1.0).contains(&s));
            let frames_only = Coalition(c.bits() & Coalition::full(nv).bits());
            let words_only = Coalition(c.bits() & !Coalition::full(nv).bits());
            prop_assert_eq!(restricted_similarity(&g, frames_only), 0.0);
            prop_assert_eq!(restricted_similarity(&g, words_only), 0.0);
        }

        #[test]
        fn frame_permutation_equivariance((nv, nt, data) in arb_alignment(), raw_w in prop::collection::vec(0.01f64..1.0, 6), shift in 0usize..6) {
            let a = Matrix::from_vec(nv, nt, data).unwrap();
            let total: f64 = raw_w[..nv].iter().sum();
            let wv: Vec<f64> = raw_w[..nv].iter().map(|w| w / total).collect();
            let wt = uniform_weights(nt);
            let perm: Vec<usize> = (0..nv).map(|i| (i + shift) % nv).collect();
            let pa = Matrix::from_fn(nv, nt, |i, j| a.get(perm[i], j));
            let pw: Vec<f64> = perm.iter().map(|&p| wv[p]).collect();
            let s1 = similarity(&AlignmentMatrix::new(a).unwrap(), &wv, &wt);
            let s2 = similarity(&AlignmentMatrix::new(pa).unwrap(), &pw, &wt);
            if let (Ok(s1), Ok(s2)) = (s1, s2) {
                prop_assert!((s1 - s2).abs() <= 1e-12);
            }
        }
    }
}
