//! Auctions of `m` identical items among bidders with concave count valuations.
//!
//! Covers the exact two-bidder optimum by binary search on marginals, VCG
//! payments, the maximal-in-range approximation scheme, the weighted hard
//! families and payment-based value reconstruction.

use std::cell::RefCell;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rat::{self, Rat};
use crate::valuation::Valuation;

/// Bit budget factor: family values must fit in `FAMILY_BIT_FACTOR · log₂ m` bits.
pub const FAMILY_BIT_FACTOR: u32 = 16;

/// Valuation over item counts `0..=m`, stored as cumulative values.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MarginalVector {
    values: Vec<Rat>,
}

impl MarginalVector {
    /// From marginals `v(1)-v(0), …, v(m)-v(m-1)`; they must be non-negative
    /// and non-increasing.
    pub fn new(marginals: Vec<Rat>) -> Result<MarginalVector> {
        let mv = MarginalVector::from_marginals_unchecked(marginals);
        if !mv.is_monotone() {
            return Err(Error::Parameter("marginals must be non-negative".into()));
        }
        if !mv.is_concave() {
            return Err(Error::Parameter("marginals must be non-increasing".into()));
        }
        Ok(mv)
    }

    pub fn from_ints(marginals: &[i64]) -> Result<MarginalVector> {
        MarginalVector::new(marginals.iter().map(|&x| rat::int(x)).collect())
    }

    fn from_marginals_unchecked(marginals: Vec<Rat>) -> MarginalVector {
        let mut values = Vec::with_capacity(marginals.len() + 1);
        values.push(rat::zero());
        for x in marginals {
            let next = values.last().unwrap() + x;
            values.push(next);
        }
        MarginalVector { values }
    }

    /// Any normalized monotone count valuation, concave or not.
    pub fn general(values: Vec<Rat>) -> Result<MarginalVector> {
        if values.first() != Some(&rat::zero()) {
            return Err(Error::Parameter("count valuation needs v(0) = 0".into()));
        }
        let mv = MarginalVector { values };
        if !mv.is_monotone() {
            return Err(Error::Parameter("count valuation must be non-decreasing".into()));
        }
        Ok(mv)
    }

    pub fn zero(m: usize) -> MarginalVector {
        MarginalVector { values: vec![rat::zero(); m + 1] }
    }

    pub fn items(&self) -> usize {
        self.values.len() - 1
    }

    pub fn value(&self, x: usize) -> &Rat {
        &self.values[x]
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }

    /// `v(x) - v(x-1)` for `x ≥ 1`.
    pub fn marginal(&self, x: usize) -> Rat {
        &self.values[x] - &self.values[x - 1]
    }

    pub fn marginals(&self) -> Vec<Rat> {
        (1..=self.items()).map(|x| self.marginal(x)).collect()
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn is_concave(&self) -> bool {
        let mg = self.marginals();
        mg.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn is_strictly_concave(&self) -> bool {
        let mg = self.marginals();
        mg.windows(2).all(|w| w[0] > w[1])
    }

    pub fn scaled(&self, factor: &Rat) -> MarginalVector {
        MarginalVector { values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// The same valuation over sets of identical items.
    pub fn lift(&self) -> Valuation {
        Valuation::Symmetric { m: self.items(), cumulative: self.values.clone() }
    }

    /// Largest value bit size against the family budget `FAMILY_BIT_FACTOR · log₂ m`.
    pub fn fits_bit_budget(&self, factor: u32) -> bool {
        let m = self.items().max(2);
        // floor(factor · log₂ m) = bitlen(m^factor) - 1
        let budget = BigInt::from(m).pow(factor).bits() - 1;
        self.values.iter().all(|v| rat::bit_size(v) <= budget)
    }
}

#[derive(Serialize, Deserialize)]
struct PlayerDoc {
    #[serde(with = "rat::text_vec")]
    marginals: Vec<Rat>,
}

/// Multi-unit instance `{m, players: [{marginals}]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MuInstance {
    pub m: usize,
    pub players: Vec<MarginalVector>,
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    m: usize,
    players: Vec<PlayerDoc>,
}

impl MuInstance {
    pub fn to_json(&self) -> serde_json::Value {
        let doc = InstanceDoc {
            m: self.m,
            players: self.players.iter().map(|p| PlayerDoc { marginals: p.marginals() }).collect(),
        };
        serde_json::to_value(doc).expect("instance serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<MuInstance> {
        let doc: InstanceDoc = serde_json::from_value(v.clone())?;
        let players = doc
            .players
            .into_iter()
            .map(|p| {
                if p.marginals.len() != doc.m {
                    return Err(Error::Dimension(format!("player has {} marginals for m = {}", p.marginals.len(), doc.m)));
                }
                MarginalVector::new(p.marginals)
            })
            .collect::<Result<Vec<_>>>()?;
        if players.is_empty() {
            return Err(Error::Input("instance has no players".into()));
        }
        Ok(MuInstance { m: doc.m, players })
    }
}

/// Value oracle that counts distinct queries.
pub struct QueryCounter<'a> {
    v: &'a MarginalVector,
    seen: RefCell<BTreeMap<usize, Rat>>,
}

impl<'a> QueryCounter<'a> {
    pub fn new(v: &'a MarginalVector) -> Self {
        QueryCounter { v, seen: RefCell::new(BTreeMap::new()) }
    }

    pub fn ask(&self, x: usize) -> Rat {
        self.seen.borrow_mut().entry(x).or_insert_with(|| self.v.value(x).clone()).clone()
    }

    pub fn count(&self) -> usize {
        self.seen.borrow().len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossingResult {
    /// Items to bidder A; bidder B receives the rest.
    pub s: usize,
    #[serde(with = "rat::text")]
    pub welfare: Rat,
    pub queries: usize,
}

/// Exact two-bidder optimum by binary search on the marginal crossing.
///
/// With both valuations concave, `f(s) = vA(s) + vB(m-s)` is concave, so the
/// first `s` with `f(s+1) ≤ f(s)` is the smallest maximizer. That rule also
/// settles plateaus: the search stops at their left end without a separate
/// boundary scan.
pub fn crossing_optimum(va: &MarginalVector, vb: &MarginalVector) -> Result<CrossingResult> {
    let m = va.items();
    if vb.items() != m {
        return Err(Error::Dimension(format!("bidders over {m} and {} items", vb.items())));
    }
    let a = QueryCounter::new(va);
    let b = QueryCounter::new(vb);
    // gain(s) = f(s+1) - f(s) = a'(s+1) - b'(m-s); non-increasing in s.
    let stops = |s: usize| -> bool {
        let da = a.ask(s + 1) - a.ask(s);
        let db = b.ask(m - s) - b.ask(m - s - 1);
        da <= db
    };
    let (mut lo, mut hi) = (0usize, m);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if stops(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let welfare = a.ask(lo) + b.ask(m - lo);
    Ok(CrossingResult { s: lo, welfare, queries: a.count() + b.count() })
}

/// Whether `queries ≤ 4·log₂ m + 8`, decided exactly as `2^(queries-8) ≤ m⁴`.
pub fn within_query_bound(queries: usize, m: usize) -> bool {
    if queries <= 8 {
        return true;
    }
    let m4 = (m.max(1) as u128).checked_pow(4).unwrap_or(u128::MAX);
    queries - 8 < 128 && 1u128 << (queries - 8) <= m4
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum CrossingVerdict {
    UniqueOptimum,
    Inconclusive,
}

/// The strict marginal crossing test at split `s` (bidder A gets `s`).
///
/// Interior splits need both strict inequalities; `s = 0` and `s = m` need
/// only the one that exists.
pub fn check_crossing_conditions(va: &MarginalVector, vb: &MarginalVector, s: usize) -> Result<CrossingVerdict> {
    let m = va.items();
    if vb.items() != m || s > m {
        return Err(Error::Dimension(format!("split {s} for {m} items")));
    }
    let left = s == m || vb.marginal(m - s) > va.marginal(s + 1);
    let right = s == 0 || va.marginal(s) > vb.marginal(m - s + 1);
    Ok(if left && right { CrossingVerdict::UniqueOptimum } else { CrossingVerdict::Inconclusive })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Payments {
    #[serde(with = "rat::text")]
    pub a: Rat,
    #[serde(with = "rat::text")]
    pub b: Rat,
}

/// VCG payments for the split `(oa, ob)`.
pub fn vcg_two_player(va: &MarginalVector, vb: &MarginalVector, oa: usize, ob: usize) -> Result<Payments> {
    let m = va.items();
    if vb.items() != m || oa + ob != m {
        return Err(Error::Infeasible(format!("split ({oa}, {ob}) of {m} items")));
    }
    Ok(Payments { a: vb.value(m) - vb.value(ob), b: va.value(m) - va.value(oa) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Allocation {
    pub shares: Vec<usize>,
    #[serde(with = "rat::text")]
    pub welfare: Rat,
}

/// Exact optimum by dynamic programming over (bidder, items used).
///
/// Items may stay unallocated. Among optimal choices each bidder takes the
/// fewest items, scanning bidders from last to first.
pub fn brute_optimum(vals: &[MarginalVector]) -> Result<Allocation> {
    let m = check_same_m(vals)?;
    if vals.len() * m > 10_000 {
        return Err(Error::Capability(format!("dynamic program limited to n·m ≤ 10000, got {}", vals.len() * m)));
    }
    let n = vals.len();
    if let Some(ints) = integer_values(vals) {
        return Ok(brute_optimum_int(&ints, m));
    }
    // best[i][u]: max welfare of bidders 0..i using at most u items.
    let mut best = vec![vec![rat::zero(); m + 1]; n + 1];
    let mut pick = vec![vec![0usize; m + 1]; n + 1];
    for i in 1..=n {
        for u in 0..=m {
            let mut top = best[i - 1][u].clone();
            let mut arg = 0;
            for x in 1..=u {
                let cand = &best[i - 1][u - x] + vals[i - 1].value(x);
                if cand > top {
                    top = cand;
                    arg = x;
                }
            }
            best[i][u] = top;
            pick[i][u] = arg;
        }
    }
    let mut shares = vec![0; n];
    let mut u = m;
    for i in (1..=n).rev() {
        shares[i - 1] = pick[i][u];
        u -= pick[i][u];
    }
    Ok(Allocation { shares, welfare: best[n][m].clone() })
}

/// Integer value tables when every value is an integer below 2^62, so that
/// any sum over at most 10000 bidders stays inside i128.
fn integer_values(vals: &[MarginalVector]) -> Option<Vec<Vec<i128>>> {
    use num_traits::ToPrimitive;
    let cap = 1i128 << 62;
    vals.iter()
        .map(|v| {
            (0..=v.items())
                .map(|x| {
                    let r = v.value(x);
                    if !r.is_integer() {
                        return None;
                    }
                    r.to_integer().to_i128().filter(|k| k.abs() < cap)
                })
                .collect()
        })
        .collect()
}

/// Same recursion as [`brute_optimum`] in machine integers.
fn brute_optimum_int(vals: &[Vec<i128>], m: usize) -> Allocation {
    let n = vals.len();
    let mut best = vec![vec![0i128; m + 1]; n + 1];
    let mut pick = vec![vec![0usize; m + 1]; n + 1];
    for i in 1..=n {
        let v = &vals[i - 1];
        for u in 0..=m {
            let mut top = best[i - 1][u];
            let mut arg = 0;
            for x in 1..=u {
                let cand = best[i - 1][u - x] + v[x];
                if cand > top {
                    top = cand;
                    arg = x;
                }
            }
            best[i][u] = top;
            pick[i][u] = arg;
        }
    }
    let mut shares = vec![0; n];
    let mut u = m;
    for i in (1..=n).rev() {
        shares[i - 1] = pick[i][u];
        u -= pick[i][u];
    }
    Allocation { shares, welfare: Rat::from_integer(best[n][m].into()) }
}

/// Exhaustive oracle over all splits with every item allocated; independent
/// of [`brute_optimum`] and exponential in `n`.
pub fn enumerate_optimum(vals: &[MarginalVector]) -> Result<Allocation> {
    let m = check_same_m(vals)?;
    let n = vals.len();
    let mut best: Option<Allocation> = None;
    let mut shares = vec![0usize; n];
    fn rec(i: usize, left: usize, vals: &[MarginalVector], shares: &mut Vec<usize>, best: &mut Option<Allocation>) {
        if i + 1 == vals.len() {
            shares[i] = left;
            let w = shares.iter().zip(vals).fold(rat::zero(), |acc, (&x, v)| acc + v.value(x));
            if best.as_ref().is_none_or(|b| w > b.welfare) {
                *best = Some(Allocation { shares: shares.clone(), welfare: w });
            }
            return;
        }
        for x in 0..=left {
            shares[i] = x;
            rec(i + 1, left - x, vals, shares, best);
        }
    }
    rec(0, m, vals, &mut shares, &mut best);
    best.ok_or_else(|| Error::Input("no bidders".into()))
}

fn check_same_m(vals: &[MarginalVector]) -> Result<usize> {
    let m = vals.first().ok_or_else(|| Error::Input("no bidders".into()))?.items();
    if vals.iter().any(|v| v.items() != m) {
        return Err(Error::Dimension("bidders disagree on m".into()));
    }
    Ok(m)
}

/// The range of the approximation scheme: `t` blocks of `q` items plus one
/// remainder block of `l = m - t·q` items.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BlockRange {
    pub m: usize,
    pub q: usize,
    pub t: usize,
    pub l: usize,
}

impl BlockRange {
    pub fn new(m: usize, q: usize) -> Result<BlockRange> {
        if q == 0 || q > m {
            return Err(Error::Parameter(format!("block size {q} for {m} items")));
        }
        let t = m / q;
        Ok(BlockRange { m, q, t, l: m - t * q })
    }

    /// Block size `⌊ε·m / n²⌋`, possibly zero.
    pub fn block_size(m: usize, n: usize, eps: &Rat) -> usize {
        let q = rat::floor(&(eps * rat::int(m as i64) / rat::int((n * n) as i64)));
        usize::try_from(q).unwrap_or(0)
    }

    /// Value queries each bidder answers: `v(zq)` and `v(zq + l)` for `z = 0..=t`.
    pub fn queries_per_bidder(&self) -> usize {
        2 * self.t + 2
    }

    /// Welfare-maximizing allocation inside the range.
    ///
    /// Dynamic program over bidders × blocks used × remainder used. Ties keep
    /// the earlier bidder's smaller share.
    pub fn optimize(&self, vals: &[MarginalVector]) -> Result<Allocation> {
        let m = check_same_m(vals)?;
        if m != self.m {
            return Err(Error::Dimension(format!("range over {} items, bidders over {m}", self.m)));
        }
        let n = vals.len();
        let t = self.t;
        let flags = if self.l > 0 { 2 } else { 1 };
        // best[i][u][f]: bidders 0..i used exactly u blocks and f remainders.
        let none: Option<Rat> = None;
        let mut best = vec![vec![vec![none; flags]; t + 1]; n + 1];
        let mut choice = vec![vec![vec![(0usize, 0usize); flags]; t + 1]; n + 1];
        best[0][0][0] = Some(rat::zero());
        for i in 0..n {
            for u in 0..=t {
                for f in 0..flags {
                    let Some(base) = best[i][u][f].clone() else { continue };
                    for z in 0..=(t - u) {
                        for g in 0..flags - f {
                            let share = z * self.q + g * self.l;
                            let cand = &base + vals[i].value(share);
                            let slot = &mut best[i + 1][u + z][f + g];
                            if slot.as_ref().is_none_or(|cur| cand > *cur) {
                                *slot = Some(cand);
                                choice[i + 1][u + z][f + g] = (z, g);
                            }
                        }
                    }
                }
            }
        }
        let mut top: Option<(Rat, usize, usize)> = None;
        for u in 0..=t {
            for f in 0..flags {
                if let Some(w) = &best[n][u][f] {
                    if top.as_ref().is_none_or(|(tw, _, _)| w > tw) {
                        top = Some((w.clone(), u, f));
                    }
                }
            }
        }
        let (welfare, mut u, mut f) = top.expect("empty range");
        let mut shares = vec![0; n];
        for i in (1..=n).rev() {
            let (z, g) = choice[i][u][f];
            shares[i - 1] = z * self.q + g * self.l;
            u -= z;
            f -= g;
        }
        Ok(Allocation { shares, welfare })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FptasResult {
    pub allocation: Allocation,
    pub queries: usize,
    /// Set when `⌊ε·m/n²⌋ = 0` and the exact dynamic program ran instead.
    pub exact_fallback: bool,
    pub range: Option<BlockRange>,
}

/// Maximal-in-range `(1-ε)`-approximation.
pub fn fptas_allocate(vals: &[MarginalVector], eps: &Rat) -> Result<FptasResult> {
    if *eps <= rat::zero() || *eps >= rat::one() {
        return Err(Error::Parameter(format!("epsilon must lie in (0, 1), got {}", rat::to_text(eps))));
    }
    let m = check_same_m(vals)?;
    let n = vals.len();
    let q = BlockRange::block_size(m, n, eps);
    if q == 0 {
        let allocation = brute_optimum(vals)?;
        return Ok(FptasResult { allocation, queries: n * (m + 1), exact_fallback: true, range: None });
    }
    let range = BlockRange::new(m, q)?;
    let allocation = range.optimize(vals)?;
    Ok(FptasResult { allocation, queries: n * range.queries_per_bidder(), exact_fallback: false, range: Some(range) })
}

/// VCG payments around any deterministic range optimizer.
///
/// Bidder `i` pays the best welfare the others could reach in the range
/// without `i`, minus what they get in the chosen allocation.
pub fn vcg_for_range<F>(vals: &[MarginalVector], optimize: F) -> Result<(Allocation, Vec<Rat>)>
where
    F: Fn(&[MarginalVector]) -> Result<Allocation>,
{
    let chosen = optimize(vals)?;
    let mut pays = Vec::with_capacity(vals.len());
    for i in 0..vals.len() {
        let mut without = vals.to_vec();
        without[i] = MarginalVector::zero(vals[i].items());
        let alt = optimize(&without)?;
        let others_now = &chosen.welfare - vals[i].value(chosen.shares[i]);
        pays.push(alt.welfare - others_now);
    }
    Ok((chosen, pays))
}

/// Parameters of the weighted hard families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum MuFamily {
    /// Steep up to a kink at `x_star`, then flat steps of the weight.
    D {
        m: usize,
        gamma: u64,
        x_star: usize,
        #[serde(with = "rat::text")]
        d_m: Rat,
    },
    /// Free marginal choice per count; `d[k]` is the choice for `x = k + 2`.
    ND {
        m: usize,
        gamma: u64,
        d: Vec<u64>,
        #[serde(with = "rat::text")]
        d_m: Rat,
    },
    /// Probe valuation pinning one marginal of `base` up to a `±1/(8m²)` nudge.
    P { base: Vec<String>, negative: bool, t_star: usize },
}

fn max_weight(m: usize) -> u64 {
    (m as u64).pow(5)
}

fn check_margin(d_m: &Rat) -> Result<()> {
    if *d_m != rat::frac(1, 2) && !d_m.is_one() {
        return Err(Error::Parameter(format!("top margin must be 1/2 or 1, got {}", rat::to_text(d_m))));
    }
    Ok(())
}

fn check_weight(m: usize, gamma: u64) -> Result<()> {
    if gamma == 0 || gamma > max_weight(m) {
        return Err(Error::Parameter(format!("weight {gamma} outside 1..={}", max_weight(m))));
    }
    Ok(())
}

/// Allowed marginal choices at count `x ∈ 2..m-1`: `m² - m·x ..= m² - m·(x-1)`.
pub fn nd_choices(m: usize, x: usize) -> std::ops::RangeInclusive<u64> {
    let (m, x) = (m as u64, x as u64);
    (m * m - m * x)..=(m * m - m * (x - 1))
}

/// Builds a family member.
pub fn gen_mu_family(p: &MuFamily) -> Result<MarginalVector> {
    match p {
        MuFamily::D { m, gamma, x_star, d_m } => {
            let m = *m;
            if m < 4 || *x_star < 2 || *x_star > m - 2 {
                return Err(Error::Parameter(format!("kink {x_star} outside 2..=m-2 for m = {m}")));
            }
            check_weight(m, *gamma)?;
            check_margin(d_m)?;
            let g = rat::int(*gamma as i64);
            let mi = m as i64;
            let mut marg = vec![&g * rat::int(3) * rat::pow(mi, 8)];
            for x in 2..m {
                marg.push(if x <= *x_star { &g * rat::int(mi * mi - mi + 1) } else { g.clone() });
            }
            marg.push(d_m.clone());
            MarginalVector::new(marg)
        }
        MuFamily::ND { m, gamma, d, d_m } => {
            let m = *m;
            if m < 3 || d.len() != m - 2 {
                return Err(Error::Parameter(format!("need {} interior marginals for m = {m}", m.saturating_sub(2))));
            }
            check_weight(m, *gamma)?;
            check_margin(d_m)?;
            let g = rat::int(*gamma as i64);
            let mut marg = vec![&g * rat::int(3) * rat::pow(m as i64, 8)];
            for (k, &dx) in d.iter().enumerate() {
                let x = k + 2;
                if !nd_choices(m, x).contains(&dx) {
                    return Err(Error::Parameter(format!("marginal {dx} outside the range for x = {x}")));
                }
                marg.push(&g * rat::int(dx as i64));
            }
            marg.push(d_m.clone());
            MarginalVector::new(marg)
        }
        MuFamily::P { base, negative, t_star } => {
            let base: Vec<Rat> = base.iter().map(|s| rat::parse(s)).collect::<Result<_>>()?;
            let base = MarginalVector::general(base)?;
            probe(&base, *negative, *t_star)
        }
    }
}

/// Probe built on `base`: huge marginals below `t_star`, then the base's
/// marginal at `m - t_star + 1` nudged by `∓1/(8m²)`, then flat.
pub fn probe(base: &MarginalVector, negative: bool, t_star: usize) -> Result<MarginalVector> {
    let m = base.items();
    if t_star == 0 || t_star > m {
        return Err(Error::Parameter(format!("probe count {t_star} outside 1..={m}")));
    }
    let nudge = rat::frac(1, 8 * (m * m) as i64);
    let huge = rat::pow(m as i64, 15);
    let mut values = vec![rat::zero()];
    for x in 1..=m {
        let prev = values[x - 1].clone();
        let step = if x < t_star {
            huge.clone()
        } else if x == t_star {
            let mid = base.value(m - x + 1) - base.value(m - x);
            if negative { mid - &nudge } else { mid + &nudge }
        } else {
            rat::zero()
        };
        values.push(prev + step);
    }
    MarginalVector::general(values)
}

/// Every member of the non-decisive family with weight `gamma`:
/// `2·(m+1)^(m-2)` valuations.
pub fn enumerate_nd(m: usize, gamma: u64) -> Result<Vec<MarginalVector>> {
    if m < 3 {
        return Err(Error::Parameter("family needs m >= 3".into()));
    }
    let count = (m as u128 + 1).checked_pow((m - 2) as u32).map(|c| 2 * c).filter(|&c| c <= 5_000_000);
    let Some(count) = count else {
        return Err(Error::Capability(format!("2·{}^{} members is too many to enumerate", m + 1, m - 2)));
    };
    let mut out = Vec::with_capacity(count as usize);
    let mut d: Vec<u64> = (2..m).map(|x| *nd_choices(m, x).start()).collect();
    loop {
        for d_m in [rat::frac(1, 2), rat::one()] {
            out.push(gen_mu_family(&MuFamily::ND { m, gamma, d: d.clone(), d_m })?);
        }
        // odometer over the interior choices
        let mut k = 0;
        loop {
            if k == d.len() {
                return Ok(out);
            }
            let x = k + 2;
            if d[k] < *nd_choices(m, x).end() {
                d[k] += 1;
                break;
            }
            d[k] = *nd_choices(m, x).start();
            k += 1;
        }
    }
}

/// Every member of the semi-decisive family with weight `gamma`.
pub fn enumerate_d(m: usize, gamma: u64) -> Result<Vec<MarginalVector>> {
    let mut out = Vec::new();
    for x_star in 2..=m.saturating_sub(2) {
        for d_m in [rat::frac(1, 2), rat::one()] {
            out.push(gen_mu_family(&MuFamily::D { m, gamma, x_star, d_m })?);
        }
    }
    Ok(out)
}

/// Recovers an integer value from a menu price: the unique integer within
/// `1/(8m)` of `v_m - price`.
pub fn reconstruct_value(price: &Rat, v_m: &Rat, m: usize) -> Result<BigInt> {
    if m == 0 {
        return Err(Error::Parameter("m must be positive".into()));
    }
    let slack = rat::frac(1, 8 * m as i64);
    let centre = v_m - price;
    let lo = &centre - &slack;
    let hi = &centre + &slack;
    // smallest integer >= lo
    let first = -rat::floor(&-lo);
    let first_r = Rat::from_integer(first.clone());
    if first_r > hi {
        return Err(Error::Reconstruction(format!("no integer within 1/(8m) of {}", rat::to_text(&centre))));
    }
    if &first_r + rat::one() <= hi {
        return Err(Error::Reconstruction(format!("several integers within 1/(8m) of {}", rat::to_text(&centre))));
    }
    Ok(first)
}

/// Price of `x` items offered to bidder B by two-bidder VCG when A reports `va`.
pub fn vcg_menu_price(va: &MarginalVector, x: usize) -> Rat {
    let m = va.items();
    va.value(m) - va.value(m - x)
}
