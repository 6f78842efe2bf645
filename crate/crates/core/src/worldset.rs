//! Sets of worlds over a finite, indexed universe.

use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Index of a world inside its parent frame or object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WorldId(pub usize);

/// A subset of a universe of `n` worlds, stored as a bitset.
///
/// Ordering compares sets by their bitmask value (world 0 is the least
/// significant bit), which is the order enumeration produces.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct WorldSet {
    bits: FixedBitSet,
}

impl WorldSet {
    pub fn empty(universe: usize) -> Self {
        WorldSet {
            bits: FixedBitSet::with_capacity(universe),
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(universe);
        bits.insert_range(..);
        WorldSet { bits }
    }

    /// Builds the set whose members are the set bits of `mask`.
    ///
    /// Bits at or above `universe` are ignored.
    pub fn from_mask(mask: u64, universe: usize) -> Self {
        let mut set = WorldSet::empty(universe);
        for i in 0..universe.min(64) {
            if mask >> i & 1 == 1 {
                set.bits.insert(i);
            }
        }
        set
    }

    /// Builds a set from world indices, growing the universe when an index
    /// does not fit.
    pub fn from_ids<I: IntoIterator<Item = WorldId>>(universe: usize, ids: I) -> Self {
        let mut set = WorldSet::empty(universe);
        for id in ids {
            set.insert(id);
        }
        set
    }

    /// Number of worlds in the universe this set is drawn from.
    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn contains(&self, world: WorldId) -> bool {
        self.bits.contains(world.0)
    }

    pub fn insert(&mut self, world: WorldId) {
        self.bits.grow(world.0 + 1);
        self.bits.insert(world.0);
    }

    pub fn iter(&self) -> impl Iterator<Item = WorldId> + '_ {
        self.bits.ones().map(WorldId)
    }

    /// Complement within this set's universe.
    pub fn complement(&self) -> Self {
        let mut bits = self.bits.clone();
        bits.toggle_range(..);
        WorldSet { bits }
    }

    pub fn is_subset(&self, other: &WorldSet) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub fn union(&self, other: &WorldSet) -> Self {
        let mut bits = self.bits.clone();
        bits.grow(other.bits.len());
        bits.union_with(&other.bits);
        WorldSet { bits }
    }

    pub fn intersection(&self, other: &WorldSet) -> Self {
        let mut bits = self.bits.clone();
        bits.grow(other.bits.len());
        bits.intersect_with(&other.bits);
        WorldSet { bits }
    }

    /// Largest member index, if any.
    pub fn max_member(&self) -> Option<WorldId> {
        self.bits.ones().next_back().map(WorldId)
    }

    /// Bitmask of the first 64 worlds.
    pub fn mask(&self) -> u64 {
        self.bits
            .ones()
            .take_while(|&i| i < 64)
            .fold(0u64, |m, i| m | 1 << i)
    }

    /// Returns a copy whose universe is exactly `universe` worlds.
    ///
    /// Members at or beyond `universe` are dropped.
    pub fn with_universe(&self, universe: usize) -> Self {
        let mut set = WorldSet::empty(universe);
        for i in self.bits.ones().take_while(|&i| i < universe) {
            set.bits.insert(i);
        }
        set
    }
}

impl PartialOrd for WorldSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for WorldSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Compare as binary numbers: the highest differing bit decides.
        let a: Vec<usize> = self.bits.ones().collect();
        let b: Vec<usize> = other.bits.ones().collect();
        a.iter()
            .rev()
            .cmp(b.iter().rev())
            .then(self.universe().cmp(&other.universe()))
    }
}

impl fmt::Debug for WorldSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.bits.ones()).finish()
    }
}

impl Serialize for WorldSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            universe: usize,
            members: Vec<usize>,
        }
        Repr {
            universe: self.universe(),
            members: self.bits.ones().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for WorldSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            universe: usize,
            members: Vec<usize>,
        }
        let repr = Repr::deserialize(deserializer)?;
        Ok(WorldSet::from_ids(
            repr.universe,
            repr.members.into_iter().map(WorldId),
        ))
    }
}

/// Iterates every subset of an `n`-world universe in increasing bitmask
/// order. `n` must be below 64.
pub fn all_subsets(universe: usize) -> impl Iterator<Item = WorldSet> {
    assert!(universe < 64, "subset enumeration needs fewer than 64 worlds");
    (0..1u64 << universe).map(move |mask| WorldSet::from_mask(mask, universe))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_round_trip() {
        for mask in 0..64u64 {
            assert_eq!(WorldSet::from_mask(mask, 6).mask(), mask);
        }
    }

    #[test]
    fn ordering_follows_bitmask() {
        let sets: Vec<WorldSet> = all_subsets(5).collect();
        let mut sorted = sets.clone();
        sorted.sort();
        assert_eq!(sets, sorted);
    }

    #[test]
    fn complement_and_subset() {
        let s = WorldSet::from_mask(0b0101, 4);
        assert_eq!(s.complement().mask(), 0b1010);
        assert!(WorldSet::from_mask(0b0001, 4).is_subset(&s));
        assert!(!WorldSet::from_mask(0b0010, 4).is_subset(&s));
        assert!(WorldSet::empty(4).is_subset(&s));
        assert_eq!(WorldSet::full(4).len(), 4);
    }

    #[test]
    fn insert_grows_universe() {
        let mut s = WorldSet::empty(2);
        s.insert(WorldId(5));
        assert_eq!(s.universe(), 6);
        assert_eq!(s.max_member(), Some(WorldId(5)));
    }
}
