//! Randomized checks that the exact Banzhaf interaction satisfies the
//! Symmetry, Dummy, Additivity and Recursivity axioms.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::cross_modal::CrossModalGame;
use crate::error::{Error, Result};
use crate::game::{banzhaf_interaction_exact, banzhaf_value, reduced_game, Game};
use crate::synthetic;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Additive,
    Unanimity,
    Dictator,
    QuadraticSize,
    RandomTable,
    CrossModal,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 6] = [
        FamilyKind::Additive,
        FamilyKind::Unanimity,
        FamilyKind::Dictator,
        FamilyKind::QuadraticSize,
        FamilyKind::RandomTable,
        FamilyKind::CrossModal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::Additive => "additive",
            FamilyKind::Unanimity => "unanimity",
            FamilyKind::Dictator => "dictator",
            FamilyKind::QuadraticSize => "quadratic_size",
            FamilyKind::RandomTable => "random_table",
            FamilyKind::CrossModal => "cross_modal",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown game family '{s}'")))
    }
}

/// A seeded generator of games of one family.
///
/// `params[0]`, when given, is the payoff scale for `additive` and
/// `random_table`, the membership probability of the target set for
/// `unanimity`, and the embedding dimension for `cross_modal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameFamily {
    pub kind: FamilyKind,
    #[serde(default)]
    pub params: Vec<f64>,
    pub seed: u64,
    /// Negative control: perturb every payoff with a call counter, making the
    /// characteristic function non-deterministic.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub nondeterministic: bool,
}

impl GameFamily {
    pub fn new(kind: FamilyKind, seed: u64) -> Self {
        GameFamily {
            kind,
            params: Vec::new(),
            seed,
            nondeterministic: false,
        }
    }

    fn param(&self, default: f64) -> f64 {
        self.params.first().copied().unwrap_or(default)
    }

    /// Draws one game with `n` players.
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Game> {
        let game = match self.kind {
            FamilyKind::Additive => {
                let s = self.param(1.0);
                let w: Vec<f64> = (0..n).map(|_| rng.random_range(-s..=s)).collect();
                Game::additive(&w)?
            }
            FamilyKind::Unanimity => {
                let p = self.param(0.5).clamp(0.0, 1.0);
                let mut target = Coalition::from_players((0..n).filter(|_| rng.random_bool(p)));
                if target.is_empty() {
                    target = Coalition::singleton(rng.random_range(0..n));
                }
                Game::unanimity(n, target)?
            }
            FamilyKind::Dictator => Game::dictator(n, rng.random_range(0..n))?,
            FamilyKind::QuadraticSize => Game::quadratic_size(n)?,
            FamilyKind::RandomTable => synthetic::random_table_game(n, self.param(1.0), rng)?,
            FamilyKind::CrossModal => {
                if n < 2 {
                    return Err(Error::InvalidArgument(
                        "cross-modal games need two players".into(),
                    ));
                }
                let dim = self.param(8.0).max(1.0) as usize;
                let nv = n / 2;
                let a = synthetic::random_alignment(nv, n - nv, dim, rng)?;
                CrossModalGame::uniform(a)?.to_game()?
            }
        };
        if self.nondeterministic {
            let counter = Arc::new(AtomicU64::new(0));
            let inner = game.evaluator();
            return Game::new(n, "nondeterministic", move |c| {
                let k = counter.fetch_add(1, Ordering::Relaxed);
                inner(c) + 1e-6 * (k % 7) as f64
            });
        }
        Ok(game)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Symmetry,
    Dummy,
    Additivity,
    Recursivity,
}

impl Axiom {
    pub const ALL: [Axiom; 4] = [
        Axiom::Symmetry,
        Axiom::Dummy,
        Axiom::Additivity,
        Axiom::Recursivity,
    ];

    fn min_players(self) -> usize {
        match self {
            Axiom::Symmetry => 4,
            Axiom::Recursivity => 3,
            Axiom::Dummy | Axiom::Additivity => 2,
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axiom::Symmetry => "symmetry",
            Axiom::Dummy => "dummy",
            Axiom::Additivity => "additivity",
            Axiom::Recursivity => "recursivity",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub trials: usize,
    pub min_players: usize,
    pub max_players: usize,
    pub tolerance: f64,
    /// Run trials on the rayon pool; results are identical either way.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            trials: 100,
            min_players: 3,
            max_players: 12,
            tolerance: DEFAULT_TOLERANCE,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub family: FamilyKind,
    pub seed: u64,
    pub trials: usize,
    pub max_abs_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl fmt::Display for AxiomReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<5} {:<12} {:<15} trials={:<4} max_violation={:.3e} tol={:.0e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.axiom.to_string(),
            self.family.as_str(),
            self.trials,
            self.max_abs_violation,
            self.tolerance
        )
    }
}

fn distinct_players(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    for slot in 0..k {
        let pick = rng.random_range(slot..n);
        all.swap(slot, pick);
    }
    all.truncate(k);
    all
}

fn symmetry_trial(family: &GameFamily, n: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let base = family.sample(n, rng)?;
    let p = distinct_players(rng, n, 4);
    let (a, b, c, d) = (p[0], p[1], p[2], p[3]);
    let swap = move |s: Coalition| {
        let mut out = s.without(a).without(b).without(c).without(d);
        for (from, to) in [(a, c), (c, a), (b, d), (d, b)] {
            if s.contains(from) {
                out = out.with(to);
            }
        }
        out
    };
    let inner = base.evaluator();
    // invariant under the transposition exchanging {a,b} with {c,d}
    let sym = Game::new(n, "symmetrized", move |s| 0.5 * (inner(s) + inner(swap(s))))?;
    let lhs = banzhaf_interaction_exact(&sym, a, b)?.value;
    let rhs = banzhaf_interaction_exact(&sym, c, d)?.value;
    Ok((lhs - rhs).abs())
}

fn dummy_trial(family: &GameFamily, n: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let base = family.sample(n, rng)?;
    let p = distinct_players(rng, n, 2);
    let (i, j) = (p[0], p[1]);
    let (ci, cj) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let inner = base.evaluator();
    let planted = Game::new(n, "planted_dummy", move |s| {
        inner(s.without(i).without(j))
            + if s.contains(i) { ci } else { 0.0 }
            + if s.contains(j) { cj } else { 0.0 }
    })?;
    Ok(banzhaf_interaction_exact(&planted, i, j)?.value.abs())
}

fn additivity_trial(family: &GameFamily, n: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let g = family.sample(n, rng)?;
    let h = family.sample(n, rng)?;
    let p = distinct_players(rng, n, 2);
    let sum = Game::sum(&g, &h)?;
    let lhs = banzhaf_interaction_exact(&sum, p[0], p[1])?.value;
    let rhs = banzhaf_interaction_exact(&g, p[0], p[1])?.value
        + banzhaf_interaction_exact(&h, p[0], p[1])?.value;
    Ok((lhs - rhs).abs())
}

fn recursivity_trial(family: &GameFamily, n: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let g = family.sample(n, rng)?;
    let p = distinct_players(rng, n, 2);
    let (i, j) = (p[0], p[1]);
    let merged = reduced_game(&g, Coalition::from_players([i, j]))?;
    let lhs = banzhaf_value(&merged, merged.n() - 1)?;
    let rhs = banzhaf_value(&g.without_player(j)?, i)?
        + banzhaf_value(&g.without_player(i)?, j)?
        + banzhaf_interaction_exact(&g, i, j)?.value;
    Ok((lhs - rhs).abs())
}

fn run_axiom(axiom: Axiom, family: &GameFamily, cfg: &BenchConfig) -> Result<AxiomReport> {
    let lo = cfg.min_players.max(axiom.min_players());
    if cfg.max_players < lo {
        return Err(Error::InvalidArgument(format!(
            "{axiom} needs at least {} players, max is {}",
            axiom.min_players(),
            cfg.max_players
        )));
    }
    let trial = |t: usize| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(family.seed);
        rng.set_stream(t as u64);
        let n = rng.random_range(lo..=cfg.max_players);
        match axiom {
            Axiom::Symmetry => symmetry_trial(family, n, &mut rng),
            Axiom::Dummy => dummy_trial(family, n, &mut rng),
            Axiom::Additivity => additivity_trial(family, n, &mut rng),
            Axiom::Recursivity => recursivity_trial(family, n, &mut rng),
        }
    };
    let violations: Vec<f64> = if cfg.parallel {
        (0..cfg.trials)
            .into_par_iter()
            .map(trial)
            .collect::<Result<_>>()?
    } else {
        (0..cfg.trials).map(trial).collect::<Result<_>>()?
    };
    // NaN counts as a violation
    let max_abs_violation = violations.into_iter().fold(0.0f64, |m, v| {
        if v.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.max(v)
        }
    });
    Ok(AxiomReport {
        axiom,
        family: family.kind,
        seed: family.seed,
        trials: cfg.trials,
        max_abs_violation,
        tolerance: cfg.tolerance,
        pass: max_abs_violation <= cfg.tolerance,
    })
}

/// Games symmetric under exchanging two disjoint pairs give both pairs the same interaction.
pub fn check_symmetry(family: &GameFamily, cfg: &BenchConfig) -> Result<AxiomReport> {
    run_axiom(Axiom::Symmetry, family, cfg)
}

/// A pair of additive contributors has zero interaction.
pub fn check_dummy(family: &GameFamily, cfg: &BenchConfig) -> Result<AxiomReport> {
    run_axiom(Axiom::Dummy, family, cfg)
}

/// Interaction of a sum of games is the sum of interactions.
pub fn check_additivity(family: &GameFamily, cfg: &BenchConfig) -> Result<AxiomReport> {
    run_axiom(Axiom::Additivity, family, cfg)
}

/// Banzhaf value of the merged pair equals the players' values without each
/// other plus their interaction.
pub fn check_recursivity(family: &GameFamily, cfg: &BenchConfig) -> Result<AxiomReport> {
    run_axiom(Axiom::Recursivity, family, cfg)
}

pub fn check(axiom: Axiom, family: &GameFamily, cfg: &BenchConfig) -> Result<AxiomReport> {
    run_axiom(axiom, family, cfg)
}

/// Every axiom over every family.
pub fn run_suite(families: &[GameFamily], cfg: &BenchConfig) -> Result<Vec<AxiomReport>> {
    let mut out = Vec::with_capacity(families.len() * 4);
    for family in families {
        for axiom in Axiom::ALL {
            out.push(run_axiom(axiom, family, cfg)?);
        }
    }
    Ok(out)
}

/// Interaction of a pair inside the target set of the unanimity game on all
/// `n` players. Nonzero, so the Dummy check must not hold for it.
pub fn dummy_negative_control(n: usize) -> Result<f64> {
    let g = Game::unanimity(n, Coalition::full(n))?;
    Ok(banzhaf_interaction_exact(&g, 0, 1)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> BenchConfig {
        BenchConfig {
            trials: 10,
            min_players: 3,
            max_players: 8,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn unanimity_symmetry_on_all_players() {
        let g = Game::unanimity(6, Coalition::full(6)).unwrap();
        let a = banzhaf_interaction_exact(&g, 0, 1).unwrap().value;
        let b = banzhaf_interaction_exact(&g, 2, 3).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn quadratic_size_pairs_equal() {
        let g = Game::quadratic_size(7).unwrap();
        let a = banzhaf_interaction_exact(&g, 0, 1).unwrap().value;
        let b = banzhaf_interaction_exact(&g, 4, 6).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn additive_additivity_and_recursivity_identities() {
        let g = Game::additive(&[0.2, -0.4, 1.1]).unwrap();
        let zero = Game::new(3, "zero", |_| 0.0).unwrap();
        let sum = Game::sum(&g, &zero).unwrap();
        assert_eq!(
            banzhaf_interaction_exact(&sum, 0, 2).unwrap().value,
            banzhaf_interaction_exact(&g, 0, 2).unwrap().value
        );
        let neg = Game::linear_combination(1.0, &g, -1.0, &g).unwrap();
        assert_eq!(banzhaf_interaction_exact(&neg, 0, 1).unwrap().value, 0.0);

        let merged = reduced_game(&g, Coalition::from_players([0, 1])).unwrap();
        let lhs = banzhaf_value(&merged, 1).unwrap();
        assert!((lhs - (0.2 - 0.4)).abs() < 1e-15);
    }

    #[test]
    fn and_game_recursivity_by_hand() {
        let g = Game::from_table(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let merged = reduced_game(&g, Coalition::from_players([0, 1])).unwrap();
        assert_eq!(banzhaf_value(&merged, 0).unwrap(), 1.0);
        assert_eq!(
            banzhaf_value(&g.without_player(1).unwrap(), 0).unwrap(),
            0.0
        );
        assert_eq!(
            banzhaf_value(&g.without_player(0).unwrap(), 1).unwrap(),
            0.0
        );
        assert_eq!(banzhaf_interaction_exact(&g, 0, 1).unwrap().value, 1.0);
    }

    #[test]
    fn negative_control_is_nonzero() {
        assert_eq!(dummy_negative_control(3).unwrap(), 0.5);
        assert!(dummy_negative_control(8).unwrap() > 0.0);
    }

    #[test]
    fn all_families_pass_quickly() {
        for kind in FamilyKind::ALL {
            let reports = run_suite(&[GameFamily::new(kind, 7)], &quick()).unwrap();
            for r in reports {
                assert!(r.pass, "{r}");
            }
        }
    }

    #[test]
    fn reports_are_deterministic_and_schedule_independent() {
        let fam = GameFamily::new(FamilyKind::RandomTable, 99);
        let seq = check_recursivity(&fam, &quick()).unwrap();
        let par = check_recursivity(
            &fam,
            &BenchConfig {
                parallel: true,
                ..quick()
            },
        )
        .unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq, check_recursivity(&fam, &quick()).unwrap());
    }

    #[test]
    fn nondeterministic_family_fails() {
        let mut fam = GameFamily::new(FamilyKind::RandomTable, 1);
        fam.nondeterministic = true;
        let r = check_additivity(&fam, &quick()).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn too_few_players_is_an_error() {
        let cfg = BenchConfig {
            min_players: 2,
            max_players: 3,
            ..quick()
        };
        assert!(check_symmetry(&GameFamily::new(FamilyKind::Additive, 0), &cfg).is_err());
        let cfg = BenchConfig {
            min_players: 2,
            max_players: 2,
            ..quick()
        };
        assert!(check_recursivity(&GameFamily::new(FamilyKind::Additive, 0), &cfg).is_err());
    }

    #[test]
    fn family_names_parse() {
        assert_eq!(
            "quadratic_size".parse::<FamilyKind>().unwrap(),
            FamilyKind::QuadraticSize
        );
        assert!("banana".parse::<FamilyKind>().is_err());
    }
}
