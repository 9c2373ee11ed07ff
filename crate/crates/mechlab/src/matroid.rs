//! Matroids whose rank is pinned on a chosen family of sets.
//!
//! Given a family of `k` sets of size `s`, a subfamily kept at full rank,
//! a budget `b` and a truncation `d`, the rank of `S` is
//!
//! ```text
//! min( d, min over I ⊆ (family minus full-rank sets) of  b·|I| + |S \ ∪I| )
//! ```
//!
//! so a low-rank set `A` costs at most `b`, while sets that cannot be
//! cheaply covered keep their size. The formula is not a matroid for every
//! family; [`verify_matroid_axioms`] checks it, exhaustively on small ground
//! sets, and [`sample_rank_profile`] resamples until the check passes.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::rng;

/// Ground sets up to this size are checked over every subset.
pub const EXHAUSTIVE_GROUND: usize = 12;

/// Resampling attempts before [`sample_rank_profile`] gives up.
pub const DEFAULT_RETRIES: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetFamily {
    pub ground_size: usize,
    pub sets: Vec<Bundle>,
}

impl SetFamily {
    pub fn new(ground_size: usize, sets: Vec<Bundle>) -> Result<SetFamily> {
        if sets.is_empty() {
            return Err(Error::Parameter("a set family needs at least one set".into()));
        }
        let sets = sets
            .into_iter()
            .map(|s| s.resized(ground_size))
            .collect::<Result<Vec<_>>>()?;
        let s = sets[0].len();
        if sets.iter().any(|x| x.len() != s) {
            return Err(Error::Parameter("family sets must share one size".into()));
        }
        Ok(SetFamily { ground_size, sets })
    }

    pub fn set_size(&self) -> usize {
        self.sets[0].len()
    }

    /// Largest intersection between two distinct members of `idx`.
    pub fn max_overlap(&self, idx: &[usize]) -> usize {
        let mut best = 0;
        for (p, &i) in idx.iter().enumerate() {
            for &j in &idx[p + 1..] {
                best = best.max(self.sets[i].intersection(&self.sets[j]).len());
            }
        }
        best
    }
}

/// `⌈8·log₂ k⌉`, the default low-rank budget for a family of `k` sets.
pub fn default_budget(k: usize) -> usize {
    let k8 = (k as u128).pow(8);
    if k8 <= 1 {
        return 0;
    }
    // ceil(log2(k^8)) computed on the integer k^8.
    128 - (k8 - 1).leading_zeros() as usize
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankProfileMatroid {
    pub ground_size: usize,
    pub sets: Vec<Bundle>,
    /// Indices of the sets that keep full rank.
    pub full_rank: Vec<usize>,
    pub b: usize,
    pub d: usize,
    #[serde(skip)]
    low: Vec<Bundle>,
}

impl RankProfileMatroid {
    pub fn new(family: SetFamily, full_rank: Vec<usize>, b: usize, d: usize) -> Result<Self> {
        let s = family.set_size();
        if !(b < s && s <= d) {
            return Err(Error::Parameter(format!("need b < s <= d, got b={b}, s={s}, d={d}")));
        }
        if let Some(&i) = full_rank.iter().find(|&&i| i >= family.sets.len()) {
            return Err(Error::Parameter(format!("full-rank index {i} outside family")));
        }
        let mut full_rank = full_rank;
        full_rank.sort_unstable();
        full_rank.dedup();
        let mut m = RankProfileMatroid {
            ground_size: family.ground_size,
            sets: family.sets,
            full_rank,
            b,
            d,
            low: Vec::new(),
        };
        m.refresh();
        Ok(m)
    }

    /// Rebuilds cached data after deserialization.
    pub fn refresh(&mut self) {
        let g = self.ground_size;
        for s in self.sets.iter_mut() {
            *s = s.resized(g).expect("family set outside ground set");
        }
        self.low = (0..self.sets.len())
            .filter(|i| !self.full_rank.contains(i))
            .map(|i| self.sets[i])
            .collect();
    }

    pub fn family(&self) -> SetFamily {
        SetFamily { ground_size: self.ground_size, sets: self.sets.clone() }
    }

    pub fn rank(&self, s: &Bundle) -> usize {
        // Only low-rank sets meeting S can lower the cost.
        let rel: Vec<Bundle> = self.low.iter().filter(|a| !a.is_disjoint(s)).copied().collect();
        let mut best = s.len().min(self.d);
        let k = rel.len();
        for pick in 1u64..(1u64 << k) {
            let cost_sets = pick.count_ones() as usize * self.b;
            if cost_sets >= best {
                continue;
            }
            let mut covered = Bundle::empty(self.ground_size);
            for (j, a) in rel.iter().enumerate() {
                if pick >> j & 1 == 1 {
                    covered = covered.union(a);
                }
            }
            best = best.min(cost_sets + s.difference(&covered).len());
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum AxiomReport {
    Ok,
    NotNormalized { rank: i64 },
    NotMonotone { set: Vec<usize>, item: usize },
    NotSubmodular { set: Vec<usize>, x: usize, y: usize },
    StepTooLarge { set: Vec<usize>, item: usize },
}

impl AxiomReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, AxiomReport::Ok)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum AxiomMode {
    Exhaustive,
    Sampled { samples: usize, seed: u64 },
}

/// Checks normalization, monotonicity, submodularity and unit steps, in that
/// order, and returns the first failure.
pub fn verify_matroid_axioms(
    rank: &dyn Fn(&Bundle) -> i64,
    ground_size: usize,
    mode: AxiomMode,
) -> Result<AxiomReport> {
    let r0 = rank(&Bundle::empty(ground_size));
    if r0 != 0 {
        return Ok(AxiomReport::NotNormalized { rank: r0 });
    }
    match mode {
        AxiomMode::Exhaustive => {
            if ground_size > EXHAUSTIVE_GROUND {
                return Err(Error::Capability(format!(
                    "exhaustive axiom check limited to {EXHAUSTIVE_GROUND} elements, got {ground_size}"
                )));
            }
            let table: Vec<i64> = Bundle::all(ground_size).map(|s| rank(&s)).collect();
            let n = ground_size;
            let full = 1usize << n;
            for s in 0..full {
                for x in 0..n {
                    if s >> x & 1 == 0 && table[s | 1 << x] < table[s] {
                        return Ok(AxiomReport::NotMonotone { set: mask_items(s, n), item: x });
                    }
                }
            }
            for s in 0..full {
                for x in 0..n {
                    if s >> x & 1 == 1 {
                        continue;
                    }
                    for y in x + 1..n {
                        if s >> y & 1 == 1 {
                            continue;
                        }
                        if table[s | 1 << x] + table[s | 1 << y] < table[s | 1 << x | 1 << y] + table[s] {
                            return Ok(AxiomReport::NotSubmodular { set: mask_items(s, n), x, y });
                        }
                    }
                }
            }
            for s in 0..full {
                for x in 0..n {
                    if s >> x & 1 == 0 && table[s | 1 << x] - table[s] > 1 {
                        return Ok(AxiomReport::StepTooLarge { set: mask_items(s, n), item: x });
                    }
                }
            }
            Ok(AxiomReport::Ok)
        }
        AxiomMode::Sampled { samples, seed } => {
            if ground_size < 2 {
                return verify_matroid_axioms(rank, ground_size, AxiomMode::Exhaustive);
            }
            let mut r = rng::stream("matroid-axioms", seed, "sample");
            for _ in 0..samples {
                let mut s = Bundle::empty(ground_size);
                for i in 0..ground_size {
                    if r.random_bool(0.5) {
                        s.insert(i);
                    }
                }
                let outside: Vec<usize> = (0..ground_size).filter(|&i| !s.contains(i)).collect();
                if outside.is_empty() {
                    continue;
                }
                let x = outside[r.random_range(0..outside.len())];
                let rs = rank(&s);
                let rx = rank(&s.with(x));
                if rx < rs {
                    return Ok(AxiomReport::NotMonotone { set: s.to_vec(), item: x });
                }
                if outside.len() >= 2 {
                    let mut y = x;
                    while y == x {
                        y = outside[r.random_range(0..outside.len())];
                    }
                    let (x, y) = (x.min(y), x.max(y));
                    let lhs = rank(&s.with(x)) + rank(&s.with(y));
                    let rhs = rank(&s.with(x).with(y)) + rs;
                    if lhs < rhs {
                        return Ok(AxiomReport::NotSubmodular { set: s.to_vec(), x, y });
                    }
                }
                if rx - rs > 1 {
                    return Ok(AxiomReport::StepTooLarge { set: s.to_vec(), item: x });
                }
            }
            Ok(AxiomReport::Ok)
        }
    }
}

fn mask_items(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Checks a [`RankProfileMatroid`], exhaustively when the ground set allows.
pub fn verify_rank_profile(m: &RankProfileMatroid, samples: usize, seed: u64) -> Result<AxiomReport> {
    let f = |s: &Bundle| m.rank(s) as i64;
    let mode = if m.ground_size <= EXHAUSTIVE_GROUND {
        AxiomMode::Exhaustive
    } else {
        AxiomMode::Sampled { samples, seed }
    };
    verify_matroid_axioms(&f, m.ground_size, mode)
}

/// `k` sets of size `s`, each drawn uniformly without replacement from `[0, ground)`.
pub fn balcan_harvey_family(ground: usize, k: usize, s: usize, seed: u64) -> Result<SetFamily> {
    let mut r = rng::stream("set-family", seed, "sets");
    random_family(ground, k, s, &mut r)
}

pub(crate) fn random_family<R: Rng>(ground: usize, k: usize, s: usize, r: &mut R) -> Result<SetFamily> {
    if s > ground {
        return Err(Error::Parameter(format!("set size {s} exceeds ground size {ground}")));
    }
    if k == 0 {
        return Err(Error::Parameter("family needs k >= 1".into()));
    }
    let sets = (0..k)
        .map(|_| {
            let idx = sample(r, ground, s).into_vec();
            Bundle::from_items(ground, &idx)
        })
        .collect::<Result<Vec<_>>>()?;
    SetFamily::new(ground, sets)
}

/// Parameters for [`sample_rank_profile`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileParams {
    pub ground: usize,
    pub k: usize,
    pub s: usize,
    pub b: usize,
    pub d: usize,
    /// Indices of the sets kept at full rank.
    pub full_rank: Vec<usize>,
    pub retries: usize,
    pub samples: usize,
}

/// Draws families until the rank formula passes the axiom check.
///
/// Returns the matroid and the number of attempts used.
pub fn sample_rank_profile(p: &ProfileParams, seed: u64) -> Result<(RankProfileMatroid, usize)> {
    for attempt in 0..p.retries.max(1) {
        let mut r = rng::stream("rank-profile", seed, &format!("attempt-{attempt}"));
        let fam = random_family(p.ground, p.k, p.s, &mut r)?;
        let m = RankProfileMatroid::new(fam, p.full_rank.clone(), p.b, p.d)?;
        if verify_rank_profile(&m, p.samples, seed ^ attempt as u64)?.is_ok() {
            return Ok((m, attempt + 1));
        }
    }
    Err(Error::Generation(format!(
        "no family passed the matroid axioms after {} attempts",
        p.retries
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(ground: usize, sets: &[&[usize]]) -> SetFamily {
        SetFamily::new(ground, sets.iter().map(|s| Bundle::from_items(ground, s).unwrap()).collect()).unwrap()
    }

    #[test]
    fn uniform_matroid_passes() {
        let f = |s: &Bundle| s.len().min(2) as i64;
        assert_eq!(verify_matroid_axioms(&f, 5, AxiomMode::Exhaustive).unwrap(), AxiomReport::Ok);
    }

    #[test]
    fn square_of_size_fails_submodularity() {
        let f = |s: &Bundle| (s.len() * s.len()) as i64;
        let rep = verify_matroid_axioms(&f, 3, AxiomMode::Exhaustive).unwrap();
        assert!(matches!(rep, AxiomReport::NotSubmodular { .. }), "{rep:?}");
    }

    #[test]
    fn near_disjoint_profile_passes() {
        let f = fam(10, &[&[0, 1, 2], &[3, 4, 5], &[6, 7, 8]]);
        let m = RankProfileMatroid::new(f, vec![0], 1, 3).unwrap();
        assert!(verify_rank_profile(&m, 0, 0).unwrap().is_ok());
        assert_eq!(m.rank(&Bundle::empty(10)), 0);
        assert_eq!(m.rank(&Bundle::from_items(10, &[0, 1, 2]).unwrap()), 3);
        assert_eq!(m.rank(&Bundle::from_items(10, &[3, 4, 5]).unwrap()), 1);
    }

    #[test]
    fn pinned_ranks() {
        let f = fam(12, &[&[0, 1, 2, 3], &[3, 4, 5, 6], &[7, 8, 9, 10]]);
        let m = RankProfileMatroid::new(f, vec![0], 2, 4).unwrap();
        assert_eq!(m.rank(&m.sets[0]), 4);
        assert_eq!(m.rank(&m.sets[1]), 2);
        assert_eq!(m.rank(&m.sets[2]), 2);
    }

    #[test]
    fn budget_default() {
        assert_eq!(default_budget(1), 0);
        assert_eq!(default_budget(2), 8);
        assert_eq!(default_budget(3), 13);
        assert_eq!(default_budget(8), 24);
    }

    #[test]
    fn family_generation() {
        assert_eq!(balcan_harvey_family(5, 1, 2, 0).unwrap().sets.len(), 1);
        let a = balcan_harvey_family(27, 4, 3, 11).unwrap();
        let b = balcan_harvey_family(27, 4, 3, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.sets.iter().all(|s| s.len() == 3));
        assert!(balcan_harvey_family(3, 1, 4, 0).is_err());
    }

    #[test]
    fn parameter_invariants() {
        let f = fam(6, &[&[0, 1, 2]]);
        assert!(RankProfileMatroid::new(f.clone(), vec![], 3, 3).is_err());
        assert!(RankProfileMatroid::new(f.clone(), vec![], 1, 2).is_err());
        assert!(RankProfileMatroid::new(f, vec![4], 1, 3).is_err());
    }
}
