//! Coalition games and exact Banzhaf computations.
//!
//! A [`Game`] pairs a player count with a characteristic function over
//! [`Coalition`]s. Exact Banzhaf values and pairwise Banzhaf interactions are
//! computed by enumerating every coalition of the remaining players, so they
//! are bounded by a configurable cap on the number of active players
//! (default [`DEFAULT_EXACT_CAP`]); larger games must go through
//! [`crate::estimators`].
//!
//! Payoff tables use little-endian coalition indexing: entry `m` of the table
//! is the payoff of the coalition whose bit `i` is set iff player `i` is a
//! member, so `table[0]` is the empty coalition and `table[2^n - 1]` the grand
//! coalition.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::{Coalition, MAX_PLAYERS};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_EXACT_CAP: usize = 20;
/// Largest cap accepted by [`Game::with_exact_cap`].
pub const MAX_EXACT_CAP: usize = 32;

pub type Evaluator = Arc<dyn Fn(Coalition) -> f64 + Send + Sync>;

/// How an interaction value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
    Surrogate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionResult {
    pub value: f64,
    pub pair: (usize, usize),
    pub method: Method,
}

/// Interaction values for a block of player pairs at one semantic level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionMap {
    pub values: Matrix,
    pub method: Method,
}

impl InteractionMap {
    pub fn new(values: Matrix, method: Method) -> Self {
        InteractionMap { values, method }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values.get(r, c)
    }
}

/// A cooperative game: `n` players and a deterministic characteristic function.
///
/// Players listed in the `absent` set have been removed from the game: their
/// bits are never set in coalitions handed to the evaluator and indices of
/// the remaining players are kept as-is.
#[derive(Clone)]
pub struct Game {
    n: usize,
    absent: Coalition,
    exact_cap: usize,
    label: String,
    phi: Evaluator,
}

impl fmt::Debug for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Game")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("absent", &self.absent)
            .field("exact_cap", &self.exact_cap)
            .finish_non_exhaustive()
    }
}

impl Game {
    /// Wraps an arbitrary characteristic function. The function must be
    /// deterministic and safe to call from several threads at once.
    pub fn new<F>(n: usize, label: impl Into<String>, phi: F) -> Result<Game>
    where
        F: Fn(Coalition) -> f64 + Send + Sync + 'static,
    {
        Self::from_evaluator(n, label, Arc::new(phi))
    }

    pub fn from_evaluator(n: usize, label: impl Into<String>, phi: Evaluator) -> Result<Game> {
        if n == 0 {
            return Err(Error::NoPlayers);
        }
        if n > MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                n,
                max: MAX_PLAYERS,
            });
        }
        Ok(Game {
            n,
            absent: Coalition::EMPTY,
            exact_cap: DEFAULT_EXACT_CAP,
            label: label.into(),
            phi,
        })
    }

    /// Game backed by an explicit payoff table of length `2^n`.
    pub fn from_table(values: Vec<f64>) -> Result<Game> {
        let len = values.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "payoff table length {len} is not 2^n for some n >= 1"
            )));
        }
        let n = len.trailing_zeros() as usize;
        if n > MAX_EXACT_CAP {
            return Err(Error::TooManyPlayers {
                n,
                max: MAX_EXACT_CAP,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("payoff of coalition {pos:#x}")));
        }
        let table: Arc<[f64]> = values.into();
        Game::new(n, "table", move |c| table[c.bits() as usize])
    }

    /// `phi(S) = sum of weights[i] for i in S`.
    pub fn additive(weights: &[f64]) -> Result<Game> {
        let w: Arc<[f64]> = weights.into();
        Game::new(weights.len(), "additive", move |c| {
            c.players().map(|i| w[i]).sum()
        })
    }

    /// `phi(S) = 1` iff `target` is a subset of `S`.
    pub fn unanimity(n: usize, target: Coalition) -> Result<Game> {
        Coalition::checked(target.bits(), n)?;
        Game::new(n, "unanimity", move |c| {
            if target.is_subset_of(c) {
                1.0
            } else {
                0.0
            }
        })
    }

    /// `phi(S) = 1` iff the dictator is a member of `S`.
    pub fn dictator(n: usize, dictator: usize) -> Result<Game> {
        if dictator >= n {
            return Err(Error::PlayerOutOfRange {
                player: dictator,
                n,
            });
        }
        Game::new(
            n,
            "dictator",
            move |c| {
                if c.contains(dictator) {
                    1.0
                } else {
                    0.0
                }
            },
        )
    }

    /// `phi(S) = |S|^2`.
    pub fn quadratic_size(n: usize) -> Result<Game> {
        Game::new(n, "quadratic_size", |c| {
            let k = c.len() as f64;
            k * k
        })
    }

    /// `a * g + b * h`, pointwise.
    pub fn linear_combination(a: f64, g: &Game, b: f64, h: &Game) -> Result<Game> {
        if g.n != h.n {
            return Err(Error::PlayerCountMismatch {
                left: g.n,
                right: h.n,
            });
        }
        let (pg, ph) = (g.phi.clone(), h.phi.clone());
        let mut out = Game::new(g.n, format!("{a}*{}+{b}*{}", g.label, h.label), move |c| {
            a * pg(c) + b * ph(c)
        })?;
        out.absent = g.absent.union(h.absent);
        out.exact_cap = g.exact_cap.min(h.exact_cap);
        Ok(out)
    }

    pub fn sum(g: &Game, h: &Game) -> Result<Game> {
        if g.n != h.n {
            return Err(Error::PlayerCountMismatch {
                left: g.n,
                right: h.n,
            });
        }
        let (pg, ph) = (g.phi.clone(), h.phi.clone());
        let mut out = Game::new(g.n, format!("{}+{}", g.label, h.label), move |c| {
            pg(c) + ph(c)
        })?;
        out.absent = g.absent.union(h.absent);
        out.exact_cap = g.exact_cap.min(h.exact_cap);
        Ok(out)
    }

    pub fn with_exact_cap(mut self, cap: usize) -> Result<Game> {
        if cap > MAX_EXACT_CAP {
            return Err(Error::InvalidArgument(format!(
                "exact cap {cap} exceeds the hard limit of {MAX_EXACT_CAP}"
            )));
        }
        self.exact_cap = cap;
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Game {
        self.label = label.into();
        self
    }

    /// The same game with player `j` removed. Indices are not renumbered.
    pub fn without_player(&self, j: usize) -> Result<Game> {
        self.check_player(j)?;
        let mut out = self.clone();
        out.absent = out.absent.with(j);
        Ok(out)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn exact_cap(&self) -> usize {
        self.exact_cap
    }

    pub fn absent(&self) -> Coalition {
        self.absent
    }

    /// Players still taking part in the game.
    pub fn active(&self) -> Coalition {
        Coalition::full(self.n).difference(self.absent)
    }

    pub fn active_count(&self) -> usize {
        self.active().len()
    }

    /// Characteristic function value.
    #[inline]
    pub fn value(&self, c: Coalition) -> f64 {
        (self.phi)(c)
    }

    pub fn evaluator(&self) -> Evaluator {
        self.phi.clone()
    }

    /// Payoff of every coalition in little-endian mask order.
    pub fn payoff_table(&self) -> Result<Vec<f64>> {
        self.ensure_exact_feasible(self.n)?;
        Ok((0..1u64 << self.n)
            .map(|m| self.value(Coalition(m)))
            .collect())
    }

    pub(crate) fn check_player(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::PlayerOutOfRange {
                player: i,
                n: self.n,
            });
        }
        if self.absent.contains(i) {
            return Err(Error::PlayerAbsent(i));
        }
        Ok(())
    }

    pub(crate) fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        self.check_player(i)?;
        self.check_player(j)?;
        if i == j {
            return Err(Error::SamePlayer(i));
        }
        Ok(())
    }

    fn ensure_exact_feasible(&self, players: usize) -> Result<()> {
        if players > self.exact_cap {
            return Err(Error::ExactInfeasible {
                players,
                cap: self.exact_cap,
            });
        }
        Ok(())
    }
}

/// Sums terms independently of their order: the result depends only on the
/// multiset of values.
pub(crate) fn order_independent_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &t in terms.iter() {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// Exact mean of the interaction term over all coalitions of the other active
/// players, together with the number of coalitions enumerated.
pub(crate) fn exact_interaction_with_count(
    game: &Game,
    i: usize,
    j: usize,
) -> Result<(f64, usize)> {
    game.check_pair(i, j)?;
    game.ensure_exact_feasible(game.active_count())?;
    let rest = game.active().without(i).without(j);
    let mut terms: Vec<f64> = rest
        .subsets()
        .map(|c| {
            game.value(c.with(i).with(j)) + game.value(c)
                - game.value(c.with(i))
                - game.value(c.with(j))
        })
        .collect();
    let count = terms.len();
    let sum = order_independent_sum(&mut terms);
    Ok((sum * 0.5f64.powi(rest.len() as i32), count))
}

/// Banzhaf value of player `i`: its average marginal contribution over every
/// coalition of the other active players.
pub fn banzhaf_value(game: &Game, i: usize) -> Result<f64> {
    game.check_player(i)?;
    game.ensure_exact_feasible(game.active_count())?;
    let rest = game.active().without(i);
    let mut terms: Vec<f64> = rest
        .subsets()
        .map(|c| game.value(c.with(i)) - game.value(c))
        .collect();
    let sum = order_independent_sum(&mut terms);
    Ok(sum * 0.5f64.powi(rest.len() as i32))
}

/// Exact Banzhaf interaction of the pair `{i, j}`.
pub fn banzhaf_interaction_exact(game: &Game, i: usize, j: usize) -> Result<InteractionResult> {
    let (value, _) = exact_interaction_with_count(game, i, j)?;
    Ok(InteractionResult {
        value,
        pair: (i, j),
        method: Method::Exact,
    })
}

/// Replaces the members of `coalition` with a single player standing for
/// their union. Surviving players keep their relative order and the merged
/// player is appended last.
pub fn reduced_game(game: &Game, coalition: Coalition) -> Result<Game> {
    if coalition.is_empty() {
        return Err(Error::EmptyCoalition);
    }
    Coalition::checked(coalition.bits(), game.n)?;
    if let Some(p) = coalition.intersection(game.absent).players().next() {
        return Err(Error::PlayerAbsent(p));
    }
    let survivors: Vec<usize> = (0..game.n).filter(|&p| !coalition.contains(p)).collect();
    let new_n = survivors.len() + 1;
    let mut expansion: Vec<u64> = survivors.iter().map(|&p| 1u64 << p).collect();
    expansion.push(coalition.bits());
    let absent = Coalition::from_players(
        survivors
            .iter()
            .enumerate()
            .filter(|(_, &p)| game.absent.contains(p))
            .map(|(k, _)| k),
    );

    let inner = game.phi.clone();
    let expansion: Arc<[u64]> = expansion.into();
    let mut out = Game::new(new_n, format!("reduced({})", game.label), move |c| {
        let original = c.players().fold(0u64, |m, k| m | expansion[k]);
        inner(Coalition(original))
    })?;
    out.absent = absent;
    out.exact_cap = game.exact_cap;
    Ok(out)
}

/// Exact interactions for every `(left[a], right[b])` pair.
pub fn interaction_matrix_exact(
    game: &Game,
    left: &[usize],
    right: &[usize],
) -> Result<InteractionMap> {
    for &p in left.iter().chain(right) {
        game.check_player(p)?;
    }
    if let Some(&p) = left.iter().find(|p| right.contains(p)) {
        return Err(Error::OverlappingPlayers(p));
    }
    game.ensure_exact_feasible(game.active_count())?;
    let cols = right.len();
    let values: Vec<f64> = (0..left.len() * cols)
        .into_par_iter()
        .map(|k| {
            exact_interaction_with_count(game, left[k / cols], right[k % cols]).map(|(v, _)| v)
        })
        .collect::<Result<_>>()?;
    Ok(InteractionMap::new(
        Matrix::from_vec(left.len(), cols, values)?,
        Method::Exact,
    ))
}
