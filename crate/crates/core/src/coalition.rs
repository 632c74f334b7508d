//! Coalitions as bitmasks over player indices.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard upper bound on the number of players a game may have.
pub const MAX_PLAYERS: usize = 64;

/// A set of players, bit `i` set iff player `i` is a member.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coalition(pub u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    /// All players `0..n`.
    pub fn full(n: usize) -> Coalition {
        debug_assert!(n <= MAX_PLAYERS);
        if n >= 64 {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Coalition {
        Coalition(1u64 << i)
    }

    pub fn from_players<I: IntoIterator<Item = usize>>(players: I) -> Coalition {
        Coalition(players.into_iter().fold(0u64, |m, p| m | (1u64 << p)))
    }

    /// Validates that no bit at index `>= n` is set.
    pub fn checked(bits: u64, n: usize) -> Result<Coalition> {
        let c = Coalition(bits);
        if !c.is_subset_of(Coalition::full(n)) {
            return Err(Error::CoalitionOutOfRange { mask: bits, n });
        }
        Ok(c)
    }

    #[inline]
    pub fn bits(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn contains(self, i: usize) -> bool {
        i < 64 && self.0 >> i & 1 == 1
    }

    #[inline]
    pub fn with(self, i: usize) -> Coalition {
        Coalition(self.0 | (1u64 << i))
    }

    #[inline]
    pub fn without(self, i: usize) -> Coalition {
        Coalition(self.0 & !(1u64 << i))
    }

    #[inline]
    pub fn union(self, other: Coalition) -> Coalition {
        Coalition(self.0 | other.0)
    }

    #[inline]
    pub fn intersection(self, other: Coalition) -> Coalition {
        Coalition(self.0 & other.0)
    }

    #[inline]
    pub fn difference(self, other: Coalition) -> Coalition {
        Coalition(self.0 & !other.0)
    }

    #[inline]
    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Member indices in ascending order.
    pub fn players(self) -> Players {
        Players(self.0)
    }

    /// Every subset of `self`, starting from the empty set, in increasing mask order.
    pub fn subsets(self) -> Subsets {
        Subsets {
            universe: self.0,
            next: Some(0),
        }
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.players()).finish()
    }
}

pub struct Players(u64);

impl Iterator for Players {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Players {}

/// Carry-rippler enumeration of all subsets of a mask.
pub struct Subsets {
    universe: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = Coalition;

    fn next(&mut self) -> Option<Coalition> {
        let cur = self.next?;
        let succ = cur.wrapping_sub(self.universe) & self.universe;
        self.next = if succ == 0 { None } else { Some(succ) };
        Some(Coalition(cur))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_cover_power_set() {
        let u = Coalition::from_players([1, 3, 4]);
        let subs: Vec<_> = u.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|s| s.is_subset_of(u)));
        let mut sorted = subs.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 8);
    }

    #[test]
    fn empty_universe_yields_only_empty_set() {
        let subs: Vec<_> = Coalition::EMPTY.subsets().collect();
        assert_eq!(subs, vec![Coalition::EMPTY]);
    }

    #[test]
    fn full_handles_word_width() {
        assert_eq!(Coalition::full(64).bits(), u64::MAX);
        assert_eq!(Coalition::full(3).bits(), 0b111);
        assert_eq!(Coalition::full(0).bits(), 0);
    }

    #[test]
    fn checked_rejects_stray_bits() {
        assert!(Coalition::checked(0b1000, 3).is_err());
        assert!(Coalition::checked(0b0111, 3).is_ok());
    }

    #[test]
    fn players_ascending() {
        let c = Coalition::from_players([5, 0, 2]);
        assert_eq!(c.players().collect::<Vec<_>>(), vec![0, 2, 5]);
        assert_eq!(c.len(), 3);
    }
}
