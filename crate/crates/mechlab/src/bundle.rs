//! Sets of items over a fixed universe `[0, m)`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest item universe a [`Bundle`] can describe.
pub const MAX_ITEMS: usize = 256;

const WORDS: usize = MAX_ITEMS / 64;

/// A subset of `[0, m)` stored as a fixed-width bitset.
///
/// Equality, hashing and ordering are structural; two bundles over
/// different universes are never equal.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bundle {
    m: u16,
    bits: [u64; WORDS],
}

impl Bundle {
    pub fn empty(m: usize) -> Bundle {
        assert!(m <= MAX_ITEMS, "universe of {m} items exceeds {MAX_ITEMS}");
        Bundle { m: m as u16, bits: [0; WORDS] }
    }

    pub fn full(m: usize) -> Bundle {
        let mut b = Bundle::empty(m);
        for i in 0..m {
            b.insert(i);
        }
        b
    }

    pub fn from_items(m: usize, items: &[usize]) -> Result<Bundle> {
        let mut b = Bundle::empty(m);
        for &i in items {
            if i >= m {
                return Err(Error::Dimension(format!("item {i} outside universe of {m}")));
            }
            b.insert(i);
        }
        Ok(b)
    }

    /// Bundle whose members are the set bits of `mask` (items below 64 only).
    pub fn from_mask(m: usize, mask: u64) -> Bundle {
        let mut b = Bundle::empty(m);
        let keep = if m >= 64 { u64::MAX } else { (1u64 << m) - 1 };
        b.bits[0] = mask & keep;
        b
    }

    /// The low 64 items as a mask. Panics when a higher item is present.
    pub fn mask(&self) -> u64 {
        assert!(self.bits[1..].iter().all(|&w| w == 0), "bundle does not fit in 64 bits");
        self.bits[0]
    }

    pub fn universe(&self) -> usize {
        self.m as usize
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.m as usize && self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.m as usize, "item {i} outside universe of {}", self.m);
        self.bits[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        if i < self.m as usize {
            self.bits[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn with(mut self, i: usize) -> Bundle {
        self.insert(i);
        self
    }

    pub fn without(mut self, i: usize) -> Bundle {
        self.remove(i);
        self
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn union(&self, o: &Bundle) -> Bundle {
        let mut b = *self;
        for (w, x) in b.bits.iter_mut().zip(o.bits.iter()) {
            *w |= x;
        }
        b
    }

    pub fn intersection(&self, o: &Bundle) -> Bundle {
        let mut b = *self;
        for (w, x) in b.bits.iter_mut().zip(o.bits.iter()) {
            *w &= x;
        }
        b
    }

    pub fn difference(&self, o: &Bundle) -> Bundle {
        let mut b = *self;
        for (w, x) in b.bits.iter_mut().zip(o.bits.iter()) {
            *w &= !x;
        }
        b
    }

    pub fn complement(&self) -> Bundle {
        Bundle::full(self.m as usize).difference(self)
    }

    pub fn is_subset(&self, o: &Bundle) -> bool {
        self.bits.iter().zip(o.bits.iter()).all(|(w, x)| w & !x == 0)
    }

    pub fn is_disjoint(&self, o: &Bundle) -> bool {
        self.bits.iter().zip(o.bits.iter()).all(|(w, x)| w & x == 0)
    }

    pub fn items(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.m as usize).filter(move |&i| self.contains(i))
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.items().collect()
    }

    /// Every subset of `[0, m)` in mask order. Requires `m < 64`.
    pub fn all(m: usize) -> impl Iterator<Item = Bundle> {
        assert!(m < 64, "cannot enumerate subsets of {m} items");
        (0..1u64 << m).map(move |mask| Bundle::from_mask(m, mask))
    }

    /// Same members, reinterpreted in a universe of size `m`.
    pub fn resized(&self, m: usize) -> Result<Bundle> {
        Bundle::from_items(m, &self.to_vec())
    }
}

impl fmt::Debug for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.items().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}/{}", self.m)
    }
}

impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.items().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Bundles serialize as their sorted item list; the universe comes from context.
impl Serialize for Bundle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_vec().serialize(s)
    }
}

/// Deserializes an item list into a bundle over the widest universe; callers
/// fix the universe with [`Bundle::resized`].
impl<'de> Deserialize<'de> for Bundle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Bundle, D::Error> {
        let items = Vec::<usize>::deserialize(d)?;
        Bundle::from_items(MAX_ITEMS, &items).map_err(serde::de::Error::custom)
    }
}
