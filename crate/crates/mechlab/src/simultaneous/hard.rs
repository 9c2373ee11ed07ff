//! Hard instance distributions: binary "any of these sets" bidders in groups
//! sharing a center, and the matroid-rank variant.

use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde_json::{json, Value};

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::gs::AuctionInstance;
use crate::matroid::{random_family, verify_rank_profile, RankProfileMatroid, DEFAULT_RETRIES};
use crate::rat::{self, Rat};
use crate::rng;
use crate::valuation::Valuation;

/// `m^(p/q)` when it is an integer.
pub fn exact_root(m: usize, p: u32, q: u32) -> Option<usize> {
    let guess = (m as f64).powf(p as f64 / q as f64).round() as u128;
    for r in guess.saturating_sub(1)..=guess + 1 {
        if r.checked_pow(q)? == (m as u128).checked_pow(p)? {
            return usize::try_from(r).ok();
        }
    }
    None
}

fn nearest_root(m: usize, p: u32, q: u32) -> usize {
    (m as f64).powf(p as f64 / q as f64).round() as usize
}

/// Parameters of the general hard distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralParams {
    pub m: usize,
    /// Exponent as a fraction `p/q`.
    pub eps: (u32, u32),
    /// Sets per group family.
    pub t: usize,
    /// Bidders per group; `m` when absent.
    pub group_size: Option<usize>,
    /// Round non-integral powers instead of failing.
    pub round: bool,
}

impl GeneralParams {
    pub fn desk() -> GeneralParams {
        GeneralParams { m: 16, eps: (1, 2), t: 8, group_size: None, round: false }
    }
}

/// One draw from the general hard distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct HardGeneral {
    pub params: GeneralParams,
    pub seed: u64,
    pub instance: AuctionInstance,
    /// Private block of each group.
    pub private: Vec<Bundle>,
    pub center: Bundle,
    /// `families[j][k]`: the k-th set of group j; `families[j][special_set[j]]` is the private block.
    pub families: Vec<Vec<Bundle>>,
    pub special_set: Vec<usize>,
    /// `owner[j][k]`: the bidder interested in `families[j][k]`.
    pub owner: Vec<Vec<usize>>,
    /// Bidder indices of each group.
    pub groups: Vec<Vec<usize>>,
    /// Roundings applied, if any.
    pub rounding: Vec<String>,
}

impl HardGeneral {
    pub fn special_bidders(&self) -> Vec<usize> {
        (0..self.groups.len()).map(|j| self.owner[j][self.special_set[j]]).collect()
    }

    /// Each private block to its special bidder.
    pub fn specialized_allocation(&self) -> Vec<Bundle> {
        let m = self.params.m;
        let mut out = vec![Bundle::empty(m); self.instance.players.len()];
        for (j, &i) in self.special_bidders().iter().enumerate() {
            out[i] = self.private[j];
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let sets = |v: &[Bundle]| v.iter().map(|b| b.to_vec()).collect::<Vec<_>>();
        json!({
            "generator": "hard-general",
            "params": {
                "m": self.params.m,
                "eps": format!("{}/{}", self.params.eps.0, self.params.eps.1),
                "t": self.params.t,
                "group_size": self.groups.first().map_or(0, |g| g.len()),
            },
            "seed": self.seed,
            "rounding": self.rounding,
            "private": sets(&self.private),
            "center": self.center.to_vec(),
            "groups": self.groups,
            "special": self.special_bidders(),
            "m": self.instance.m,
            "players": self.instance.to_json()["players"],
        })
    }
}

/// Distinct random subsets of `pool` of size `size`, the first being `first`.
fn random_sets<R: Rng>(pool: &[usize], size: usize, count: usize, first: Bundle, m: usize, r: &mut R) -> Result<Vec<Bundle>> {
    let mut out = vec![first];
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > 1000 * count {
            return Err(Error::Generation(format!("could not draw {count} distinct sets of size {size} from {} items", pool.len())));
        }
        let pick: Vec<usize> = pool.choose_multiple(r, size).copied().collect();
        let b = Bundle::from_items(m, &pick)?;
        if !out.contains(&b) {
            out.push(b);
        }
    }
    Ok(out)
}

pub fn gen_hard_general(p: &GeneralParams, seed: u64) -> Result<HardGeneral> {
    let (num, den) = p.eps;
    if den == 0 || num == 0 || num >= den {
        return Err(Error::Parameter("the exponent must lie strictly between 0 and 1".into()));
    }
    if p.t < 2 {
        return Err(Error::Parameter("families need t >= 2".into()));
    }
    let m = p.m;
    let mut rounding = Vec::new();
    let size = match exact_root(m, num, den) {
        Some(s) => s,
        None if p.round => {
            let s = nearest_root(m, num, den).max(1);
            rounding.push(format!("m^eps = {m}^({num}/{den}) rounded to {s}"));
            s
        }
        None => return Err(Error::Parameter(format!("{m}^({num}/{den}) is not an integer; enable rounding"))),
    };
    let blocks = m / size;
    if blocks < 2 {
        return Err(Error::Parameter(format!("set size {size} leaves no room for a private block and a center among {m} items")));
    }
    let groups = blocks - 1;
    let center_size = m - groups * size;
    if center_size != size {
        if !p.round {
            return Err(Error::Parameter(format!("{m} items do not split into blocks of {size}")));
        }
        rounding.push(format!("center enlarged to {center_size} items"));
    }
    let group_size = p.group_size.unwrap_or(m);
    if group_size == 0 {
        return Err(Error::Parameter("groups need at least one bidder".into()));
    }
    let mut r = rng::stream("hard-general", seed, "instance");
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut r);
    let private: Vec<Bundle> = (0..groups).map(|j| Bundle::from_items(m, &perm[j * size..(j + 1) * size])).collect::<Result<_>>()?;
    let center = Bundle::from_items(m, &perm[groups * size..])?;
    let mut families = Vec::new();
    let mut special_set = Vec::new();
    let mut owner = Vec::new();
    let mut players = Vec::new();
    let mut group_ids = Vec::new();
    for block in &private {
        let pool = block.union(&center).to_vec();
        let mut fam = random_sets(&pool, size, p.t, *block, m, &mut r)?;
        fam.shuffle(&mut r);
        let s = fam.iter().position(|b| b == block).expect("private block is in its family");
        let own: Vec<usize> = (0..p.t).map(|_| r.random_range(0..group_size)).collect();
        let base = players.len();
        for i in 0..group_size {
            let sets: Vec<Bundle> = (0..p.t).filter(|&k| own[k] == i).map(|k| fam[k]).collect();
            players.push(Valuation::AnyOf { m, sets });
        }
        group_ids.push((base..base + group_size).collect::<Vec<_>>());
        owner.push(own.iter().map(|&i| base + i).collect());
        families.push(fam);
        special_set.push(s);
    }
    Ok(HardGeneral {
        params: p.clone(),
        seed,
        instance: AuctionInstance { m, players },
        private,
        center,
        families,
        special_set,
        owner,
        groups: group_ids,
        rounding,
    })
}

/// Largest number of distinct bidders that can each receive one of their
/// sets, the sets pairwise disjoint.
pub fn max_packing(cands: &[(usize, Bundle)]) -> (usize, Vec<(usize, Bundle)>) {
    struct Search<'a> {
        cands: &'a [(usize, Bundle)],
        smallest: usize,
        used: Vec<usize>,
        cur: Vec<(usize, Bundle)>,
        best: Vec<(usize, Bundle)>,
    }
    impl Search<'_> {
        fn go(&mut self, k: usize, taken: Bundle) {
            if self.cur.len() > self.best.len() {
                self.best = self.cur.clone();
            }
            let free = taken.universe() - taken.len();
            let room = if self.smallest == 0 { usize::MAX } else { free / self.smallest };
            if k == self.cands.len() || self.cur.len() + room.min(self.cands.len() - k) <= self.best.len() {
                return;
            }
            let (i, s) = self.cands[k];
            if !self.used.contains(&i) && s.is_disjoint(&taken) {
                self.used.push(i);
                self.cur.push((i, s));
                self.go(k + 1, taken.union(&s));
                self.cur.pop();
                self.used.pop();
            }
            self.go(k + 1, taken);
        }
    }
    let Some(&(_, first)) = cands.first() else { return (0, Vec::new()) };
    let smallest = cands.iter().map(|(_, s)| s.len()).min().unwrap_or(0);
    let mut s = Search { cands, smallest, used: Vec::new(), cur: Vec::new(), best: Vec::new() };
    s.go(0, Bundle::empty(first.universe()));
    (s.best.len(), s.best)
}

/// Optimal welfare of an instance whose bidders are all "any of these sets".
pub fn binary_optimum(inst: &AuctionInstance) -> Result<(Rat, Vec<Bundle>)> {
    let mut cands = Vec::new();
    for (i, v) in inst.players.iter().enumerate() {
        match v {
            Valuation::AnyOf { sets, .. } => cands.extend(sets.iter().map(|s| (i, *s))),
            other => return Err(Error::Mode(format!("bidder {i} is {}, not a set-list valuation", other.kind()))),
        }
    }
    let (w, pick) = max_packing(&cands);
    let mut bundles = vec![Bundle::empty(inst.m); inst.players.len()];
    for (i, s) in pick {
        bundles[i] = s;
    }
    Ok((rat::int(w as i64), bundles))
}

/// Best welfare minus the number of special bidders holding their private
/// block, over all allocations. The decomposition bound says this is at most 1.
pub fn welfare_beyond_specials(h: &HardGeneral) -> usize {
    let mut cands = Vec::new();
    for (j, fam) in h.families.iter().enumerate() {
        for (k, s) in fam.iter().enumerate() {
            if k != h.special_set[j] {
                cands.push((h.owner[j][k], *s));
            }
        }
    }
    max_packing(&cands).0
}

/// Parameters of the matroid hard distribution.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MatroidParams {
    pub m: usize,
    pub groups: usize,
    pub group_size: usize,
    /// Private block size, also the family set size.
    pub block: usize,
    /// Center size.
    pub center: usize,
    /// Ground set of each bidder's matroid: the private block plus the center.
    pub ground: usize,
    pub k: usize,
    pub b: usize,
    pub d: usize,
    /// Axiom samples per matroid when the ground set is too big to enumerate.
    pub samples: usize,
}

impl MatroidParams {
    /// Exponent formulas in `m`; `k`, `b` and `d` must be given since their
    /// defaults are astronomically large or exceed the set size at any
    /// practical `m`.
    pub fn from_exponents(m: usize, k: usize, b: usize, d: usize) -> Result<MatroidParams> {
        let root = |p, q| exact_root(m, p, q).ok_or_else(|| Error::Parameter(format!("{m}^({p}/{q}) is not an integer")));
        let (g, block, big, half) = (root(1, 8)?, root(1, 4)?, root(3, 4)?, root(1, 2)?);
        if big + 1 < half || big < block {
            return Err(Error::Parameter(format!("m = {m} is too small for the exponent formulas")));
        }
        let p = MatroidParams { m, groups: big - half + 1, group_size: g, block, center: big - block, ground: big, k, b, d, samples: 200 };
        p.check()?;
        Ok(p)
    }

    /// 256 items: 49 groups of 2, blocks of 4, center 60, k = 8, b = 2.
    pub fn desk() -> MatroidParams {
        MatroidParams::from_exponents(256, 8, 2, 4).expect("desk parameters are consistent")
    }

    fn check(&self) -> Result<()> {
        if self.groups * self.block + self.center != self.m {
            return Err(Error::Parameter(format!("{} groups of {} plus a center of {} is not {} items", self.groups, self.block, self.center, self.m)));
        }
        if self.block + self.center != self.ground {
            return Err(Error::Parameter("ground set must be a private block plus the center".into()));
        }
        if !(self.b < self.block && self.block <= self.d) {
            return Err(Error::Parameter(format!("need b < block <= d, got b={}, block={}, d={}", self.b, self.block, self.d)));
        }
        if self.k == 0 || self.group_size == 0 {
            return Err(Error::Parameter("need k >= 1 and nonempty groups".into()));
        }
        Ok(())
    }
}

/// One draw from the matroid hard distribution.
#[derive(Clone, Debug)]
pub struct HardMatroid {
    pub params: MatroidParams,
    pub seed: u64,
    pub instance: AuctionInstance,
    pub private: Vec<Bundle>,
    pub center: Bundle,
    pub groups: Vec<Vec<usize>>,
    pub special: Vec<usize>,
    /// Family draws needed per group before every bidder's matroid passed.
    pub attempts: Vec<usize>,
}

impl HardMatroid {
    /// Private blocks to the special bidders; the center spread over the
    /// other bidders, at most `b` items each, so every item adds 1.
    pub fn specialized_allocation(&self) -> Result<Vec<Bundle>> {
        let m = self.params.m;
        let mut out = vec![Bundle::empty(m); self.instance.players.len()];
        for (j, &i) in self.special.iter().enumerate() {
            out[i] = self.private[j];
        }
        let others: Vec<usize> = self.groups.iter().flatten().copied().filter(|i| !self.special.contains(i)).collect();
        let per = self.params.b;
        if others.len() * per < self.center.len() {
            return Err(Error::Infeasible(format!("{} non-special bidders cannot absorb a center of {}", others.len(), self.center.len())));
        }
        for (k, item) in self.center.items().enumerate() {
            out[others[k / per]].insert(item);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "generator": "hard-matroid",
            "params": self.params,
            "seed": self.seed,
            "private": self.private.iter().map(|b| b.to_vec()).collect::<Vec<_>>(),
            "center": self.center.to_vec(),
            "groups": self.groups,
            "special": self.special,
            "m": self.instance.m,
            "players": self.instance.to_json()["players"],
        })
    }
}

pub fn gen_hard_matroid(p: &MatroidParams, seed: u64) -> Result<HardMatroid> {
    p.check()?;
    let m = p.m;
    let mut r = rng::stream("hard-matroid", seed, "instance");
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut r);
    let private: Vec<Bundle> = (0..p.groups).map(|j| Bundle::from_items(m, &perm[j * p.block..(j + 1) * p.block])).collect::<Result<_>>()?;
    let center_items: Vec<usize> = perm[p.groups * p.block..].to_vec();
    let center = Bundle::from_items(m, &center_items)?;
    let mut players = Vec::new();
    let mut groups = Vec::new();
    let mut special = Vec::new();
    let mut attempts = Vec::new();
    for (j, block) in private.iter().enumerate() {
        let mut done = None;
        for attempt in 0..DEFAULT_RETRIES {
            let mut fr = rng::stream("hard-matroid", seed, &format!("group-{j}-attempt-{attempt}"));
            let fam = random_family(p.ground, p.k, p.block, &mut fr)?;
            // heavier overlaps let a low-rank set cut into the private block
            if 2 * fam.max_overlap(&(0..p.k).collect::<Vec<_>>()) > p.b {
                continue;
            }
            let owner: Vec<usize> = (0..p.k).map(|_| fr.random_range(0..p.group_size)).collect();
            let mats = (0..p.group_size)
                .map(|i| RankProfileMatroid::new(fam.clone(), (0..p.k).filter(|&a| owner[a] == i).collect(), p.b, p.d))
                .collect::<Result<Vec<_>>>()?;
            let mut ok = true;
            for (i, mat) in mats.iter().enumerate() {
                let check_seed = seed ^ ((j * 1000 + i) as u64) << 20 ^ attempt as u64;
                if !verify_rank_profile(mat, p.samples, check_seed)?.is_ok() {
                    ok = false;
                    break;
                }
            }
            if ok {
                done = Some((fam, owner, mats, attempt + 1));
                break;
            }
        }
        let Some((fam, owner, mats, used)) = done else {
            return Err(Error::Generation(format!("group {j}: no family with small overlaps passed the matroid axioms after {DEFAULT_RETRIES} draws")));
        };
        // one family set lands on the private block, the rest of the ground on the center
        let hit = r.random_range(0..p.k);
        let mut ground = vec![usize::MAX; p.ground];
        let mut block_items = block.to_vec();
        block_items.shuffle(&mut r);
        for (e, item) in fam.sets[hit].items().zip(block_items) {
            ground[e] = item;
        }
        let mut rest = center_items.clone();
        rest.shuffle(&mut r);
        let mut rest = rest.into_iter();
        for slot in ground.iter_mut().filter(|g| **g == usize::MAX) {
            *slot = rest.next().expect("ground = block + center");
        }
        let base = players.len();
        for mat in mats {
            players.push(Valuation::MatroidRank { m, matroid: Arc::new(mat), ground: ground.clone() });
        }
        groups.push((base..base + p.group_size).collect::<Vec<_>>());
        special.push(base + owner[hit]);
        attempts.push(used);
    }
    Ok(HardMatroid { params: p.clone(), seed, instance: AuctionInstance { m, players }, private, center, groups, special, attempts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gs::welfare_of;

    #[test]
    fn roots() {
        assert_eq!(exact_root(16, 1, 2), Some(4));
        assert_eq!(exact_root(256, 1, 8), Some(2));
        assert_eq!(exact_root(256, 3, 4), Some(64));
        assert_eq!(exact_root(10, 1, 2), None);
    }

    #[test]
    fn desk_general_shape() {
        let h = gen_hard_general(&GeneralParams::desk(), 3).unwrap();
        assert_eq!(h.instance.players.len(), 48);
        assert_eq!(h.private.len(), 3);
        assert_eq!(h.center.len(), 4);
        let w = welfare_of(&h.instance.players, &h.specialized_allocation());
        assert_eq!(w, rat::int(3));
    }

    #[test]
    fn rounding_is_reported() {
        let p = GeneralParams { m: 10, eps: (1, 2), t: 4, group_size: Some(2), round: false };
        assert!(gen_hard_general(&p, 0).is_err());
        let h = gen_hard_general(&GeneralParams { round: true, ..p }, 0).unwrap();
        assert!(!h.rounding.is_empty());
    }

    #[test]
    fn packing_small() {
        let b = |v: &[usize]| Bundle::from_items(4, v).unwrap();
        let cands = vec![(0, b(&[0, 1])), (1, b(&[1, 2])), (2, b(&[2, 3])), (0, b(&[3]))];
        assert_eq!(max_packing(&cands).0, 2);
    }
}
