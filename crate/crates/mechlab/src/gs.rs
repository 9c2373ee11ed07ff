//! Gross-substitutes valuations: demand sets, the GS check, the one-item
//! extension, the hard families with two special items, and welfare
//! maximization (exhaustive and by an ascending auction).

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::rat::{self, int, pow, Rat};
use crate::valuation::{Valuation, MAX_EXHAUSTIVE_ITEMS};

/// Alice's special item.
pub const ITEM_A: usize = 0;
/// Bob's special item.
pub const ITEM_B: usize = 1;

/// Largest universe the GS check accepts.
pub const MAX_GS_ITEMS: usize = 12;

/// Cap on `(grid points) × 2^m` for the price-grid half of the GS check.
pub const GRID_BUDGET: u64 = 1 << 21;

fn tabulate(v: &Valuation) -> Vec<Rat> {
    let m = v.items();
    (0..1u64 << m).map(|mask| v.eval(&Bundle::from_mask(m, mask))).collect()
}

fn price_of(mask: u64, p: &[Rat]) -> Rat {
    (0..p.len()).filter(|j| mask >> j & 1 == 1).fold(rat::zero(), |acc, j| acc + &p[j])
}

/// Masks maximizing `value - price` over a tabulated valuation.
fn demand_masks(table: &[Rat], p: &[Rat]) -> Vec<u64> {
    let mut best: Option<Rat> = None;
    let mut out = Vec::new();
    for (mask, v) in table.iter().enumerate() {
        let u = v - price_of(mask as u64, p);
        match &best {
            Some(b) if u < *b => {}
            Some(b) if u == *b => out.push(mask as u64),
            _ => {
                best = Some(u);
                out.clear();
                out.push(mask as u64);
            }
        }
    }
    out
}

/// Every bundle maximizing `v(T) - Σ_{j∈T} p_j`, ties kept.
pub fn demand_set(v: &Valuation, p: &[Rat]) -> Result<Vec<Bundle>> {
    let m = v.items();
    if m > MAX_EXHAUSTIVE_ITEMS {
        return Err(Error::Capability(format!("demand sets are exhaustive; {m} items is too many")));
    }
    check_prices(m, p)?;
    Ok(demand_masks(&tabulate(v), p).into_iter().map(|k| Bundle::from_mask(m, k)).collect())
}

fn check_prices(m: usize, p: &[Rat]) -> Result<()> {
    if p.len() != m {
        return Err(Error::Dimension(format!("{} prices for {m} items", p.len())));
    }
    if p.iter().any(|x| *x < rat::zero()) {
        return Err(Error::Parameter("prices must be non-negative".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GsWitness {
    /// `bundle` is demanded at `prices`, but after raising `prices` to
    /// `raised` no demanded set keeps its items whose price did not move.
    Prices { prices: Vec<Rat>, raised: Vec<Rat>, bundle: Bundle },
    /// The local exchange inequalities fail at `base` with items `i, j, k`
    /// (`k` is `None` for the two-item inequality).
    Exchange { base: Bundle, i: usize, j: usize, k: Option<usize> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GsReport {
    Ok { grid_checked: bool },
    Violation(GsWitness),
    /// The two tests disagree; always a bug.
    Inconsistent { local_ok: bool, grid_ok: bool },
}

impl GsReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, GsReport::Ok { .. })
    }
}

/// Values scaled to integers: every value times twice the common
/// denominator, so midpoints between values stay integral.
fn integer_table(table: &[Rat]) -> Result<Vec<i128>> {
    let scale = Rat::from_integer(value_denominator(std::slice::from_ref(&table.to_vec())) * 2);
    table
        .iter()
        .map(|v| i128::try_from((v * &scale).to_integer()).map_err(|_| Error::Capability("values too large for the GS check".into())))
        .collect()
}

/// Local exchange test: for all `S` and distinct `i, j, k ∉ S`,
/// `v(S+ij) + v(S) ≤ v(S+i) + v(S+j)` and
/// `v(S+ij) + v(S+k) ≤ max(v(S+ik) + v(S+j), v(S+jk) + v(S+i))`.
fn local_exchange(table: &[i128], m: usize) -> Option<GsWitness> {
    for s in 0..1u64 << m {
        let v = |x: u64| table[(s | x) as usize];
        let out: Vec<usize> = (0..m).filter(|&i| s >> i & 1 == 0).collect();
        for (a, &i) in out.iter().enumerate() {
            for &j in &out[a + 1..] {
                let (bi, bj) = (1u64 << i, 1u64 << j);
                if v(bi | bj) + v(0) > v(bi) + v(bj) {
                    return Some(GsWitness::Exchange { base: Bundle::from_mask(m, s), i, j, k: None });
                }
                for &k in &out {
                    if k == i || k == j {
                        continue;
                    }
                    let bk = 1u64 << k;
                    let lhs = v(bi | bj) + v(bk);
                    let r1 = v(bi | bk) + v(bj);
                    let r2 = v(bj | bk) + v(bi);
                    if lhs > r1.max(r2) {
                        return Some(GsWitness::Exchange { base: Bundle::from_mask(m, s), i, j, k: Some(k) });
                    }
                }
            }
        }
    }
    None
}

/// Per-item price candidates: every marginal value of the item, midpoints
/// between consecutive ones, zero, and one unit above the largest.
fn price_candidates(table: &[i128], m: usize, j: usize) -> Vec<i128> {
    let mut marg: BTreeSet<i128> = BTreeSet::new();
    marg.insert(0);
    for s in 0..1u64 << m {
        if s >> j & 1 == 0 {
            let d = table[(s | 1 << j) as usize] - table[s as usize];
            if d >= 0 {
                marg.insert(d);
            }
        }
    }
    let sorted: Vec<i128> = marg.into_iter().collect();
    let mut out = Vec::with_capacity(sorted.len() * 2 + 1);
    for w in sorted.windows(2) {
        out.push(w[0]);
        // values are even, so the midpoint is exact
        out.push((w[0] + w[1]) / 2);
    }
    let top = *sorted.last().expect("zero is always present");
    out.push(top);
    out.push(top + 2);
    out
}

fn grid_size(cands: &[Vec<i128>]) -> u64 {
    cands.iter().fold(1u64, |acc, c| acc.saturating_mul(c.len() as u64))
}

fn int_demand(table: &[i128], p: &[i128], cost: &mut [i128]) -> Vec<u64> {
    for mask in 1..table.len() {
        let j = mask.trailing_zeros() as usize;
        cost[mask] = cost[mask & (mask - 1)] + p[j];
    }
    let best = table.iter().zip(cost.iter()).map(|(v, c)| v - c).max().expect("non-empty");
    (0..table.len()).filter(|&k| table[k] - cost[k] == best).map(|k| k as u64).collect()
}

/// Single-coordinate raises over the candidate grid. Raising several prices
/// at once is a chain of single raises, so these suffice at grid points.
/// The grid need not contain every critical price vector, so a clean grid
/// does not prove GS; a witness found here always is one.
fn grid_test(table: &[i128], m: usize, cands: &[Vec<i128>]) -> Option<GsWitness> {
    let sizes: Vec<usize> = cands.iter().map(|c| c.len()).collect();
    let mut cost = vec![0i128; table.len()];
    let demand: Vec<Vec<u64>> = crate::protocol::profiles(&sizes)
        .map(|idx| {
            let p: Vec<i128> = idx.iter().enumerate().map(|(j, &k)| cands[j][k]).collect();
            int_demand(table, &p, &mut cost)
        })
        .collect();
    // row-major strides, last item fastest
    let mut stride = vec![1usize; m];
    for j in (0..m.saturating_sub(1)).rev() {
        stride[j] = stride[j + 1] * sizes[j + 1];
    }
    for (flat, idx) in crate::protocol::profiles(&sizes).enumerate() {
        let here = &demand[flat];
        for j in 0..m {
            for up in idx[j] + 1..sizes[j] {
                let there = &demand[flat + (up - idx[j]) * stride[j]];
                for &s in here {
                    let keep = s & !(1u64 << j);
                    if !there.iter().any(|&t| keep & !t == 0) {
                        let price = |k: usize| -> Vec<Rat> { idx.iter().enumerate().map(|(i, &c)| Rat::from_integer(cands[i][if i == j { k } else { c }].into())).collect() };
                        return Some(GsWitness::Prices { prices: price(idx[j]), raised: price(up), bundle: Bundle::from_mask(m, s) });
                    }
                }
            }
        }
    }
    None
}

/// Gross-substitutes check by the local exchange inequalities and, when the
/// candidate price grid is small enough, by direct price raises over it.
///
/// For monotone valuations the exchange inequalities decide GS. The grid is a sound but partial
/// second opinion: a grid witness the exchange test misses means `Inconsistent`.
pub fn is_gross_substitutes(v: &Valuation) -> Result<GsReport> {
    let m = v.items();
    if m > MAX_GS_ITEMS {
        return Err(Error::Capability(format!("GS check limited to {MAX_GS_ITEMS} items, got {m}")));
    }
    let raw = tabulate(v);
    let table = integer_table(&raw)?;
    let local = local_exchange(&table, m);
    let cands: Vec<Vec<i128>> = (0..m).map(|j| price_candidates(&table, m, j)).collect();
    if grid_size(&cands).saturating_mul(1 << m) > GRID_BUDGET {
        return Ok(match local {
            None => GsReport::Ok { grid_checked: false },
            Some(w) => GsReport::Violation(w),
        });
    }
    let scale = Rat::from_integer(value_denominator(std::slice::from_ref(&raw)) * 2);
    let grid = grid_test(&table, m, &cands).map(|w| match w {
        GsWitness::Prices { prices, raised, bundle } => GsWitness::Prices {
            prices: prices.into_iter().map(|p| p / &scale).collect(),
            raised: raised.into_iter().map(|p| p / &scale).collect(),
            bundle,
        },
        other => other,
    });
    Ok(match (local, grid) {
        (None, None) => GsReport::Ok { grid_checked: true },
        (Some(_), Some(w)) => GsReport::Violation(w),
        (Some(w), None) => GsReport::Violation(w),
        (None, Some(_)) => GsReport::Inconsistent { local_ok: true, grid_ok: false },
    })
}

/// Adds one new item, worth `c` on top of whatever it joins.
pub fn gs_extend(v: &Valuation, c: Rat) -> Result<Valuation> {
    if c < rat::zero() {
        return Err(Error::Parameter(format!("extension value must be non-negative, got {}", rat::to_text(&c))));
    }
    let m = v.items();
    let mut extra = vec![rat::zero(); m + 1];
    extra[m] = c;
    Ok(Valuation::Sum {
        m: m + 1,
        parts: vec![Valuation::Embed { m: m + 1, items: (0..m).collect(), inner: Box::new(v.clone()) }, Valuation::additive(extra)],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Alice,
    Bob,
}

impl Role {
    fn own(self) -> usize {
        match self {
            Role::Alice => ITEM_A,
            Role::Bob => ITEM_B,
        }
    }
    fn other(self) -> usize {
        match self {
            Role::Alice => ITEM_B,
            Role::Bob => ITEM_A,
        }
    }
}

/// Members of the hard families. Items 0 and 1 are Alice's and Bob's special items.
#[derive(Clone, Debug, PartialEq)]
pub enum GsFamily {
    /// Additive: own special item `m^8`, other special item `noise`, items in
    /// `set` worth `weight·(m+2)`, all others `weight/2`.
    Decisive { role: Role, m: usize, weight: u64, set: Vec<usize>, half_noise: bool },
    /// `weight·(base(S∖{a,b}) + |S|) + m^8·[own ∈ S] + noise·[other ∈ S]`,
    /// with `base` a GS valuation over items `2..m` valued in `0..=m`.
    Blurred { role: Role, m: usize, weight: u64, base: Valuation, half_noise: bool },
    /// Additive probe: items of `set` worth `m^15`, `item` worth the marginal
    /// of `base` for it on top of `M∖set`, shifted by `±1/(8m²)`, others 0.
    Probe { base: Box<Valuation>, set: Vec<usize>, item: usize, negative: bool },
}

fn noise(half: bool) -> Rat {
    if half {
        rat::frac(1, 2)
    } else {
        rat::zero()
    }
}

fn check_m(m: usize) -> Result<()> {
    if m < 3 {
        return Err(Error::Parameter("the special-item families need m >= 3".into()));
    }
    Ok(())
}

/// Builds a family member as a valuation over `m` items.
pub fn gen_gs_family(f: &GsFamily) -> Result<Valuation> {
    match f {
        GsFamily::Decisive { role, m, weight, set, half_noise } => {
            check_m(*m)?;
            if *weight == 0 {
                return Err(Error::Parameter("weight must be at least 1".into()));
            }
            let g = int(*weight as i64);
            let mut vals = vec![&g / int(2); *m];
            for &x in set {
                if x >= *m || x == ITEM_A || x == ITEM_B {
                    return Err(Error::Parameter(format!("set item {x} must be an ordinary item")));
                }
                vals[x] = &g * int(*m as i64 + 2);
            }
            vals[role.own()] = pow(*m as i64, 8);
            vals[role.other()] = noise(*half_noise);
            Ok(Valuation::additive(vals))
        }
        GsFamily::Blurred { role, m, weight, base, half_noise } => {
            check_m(*m)?;
            if *weight == 0 {
                return Err(Error::Parameter("weight must be at least 1".into()));
            }
            if base.items() != m - 2 {
                return Err(Error::Dimension(format!("base must cover the {} ordinary items", m - 2)));
            }
            let table = tabulate(base);
            if table.iter().any(|x| !x.is_integer() || *x < rat::zero() || *x > int(*m as i64)) {
                return Err(Error::Parameter("base values must be integers in 0..=m".into()));
            }
            if !is_gross_substitutes(base)?.is_ok() {
                return Err(Error::Parameter("base valuation is not gross substitutes".into()));
            }
            let g = int(*weight as i64);
            let mut lin = vec![g.clone(); *m];
            lin[role.own()] = &g + pow(*m as i64, 8);
            lin[role.other()] = &g + noise(*half_noise);
            let blurred = Valuation::Embed { m: *m, items: (2..*m).collect(), inner: Box::new(base.clone()) }.scale_shift(g, rat::zero())?;
            Ok(Valuation::Sum { m: *m, parts: vec![blurred, Valuation::additive(lin)] })
        }
        GsFamily::Probe { base, set, item, negative } => {
            let m = base.items();
            check_m(m)?;
            if *item >= m || set.contains(item) || set.iter().any(|&x| x >= m) {
                return Err(Error::Parameter("probe item must lie outside the probe set".into()));
            }
            let big = pow(m as i64, 15);
            let mut rest = Bundle::full(m);
            for &x in set {
                rest.remove(x);
            }
            let shift = rat::frac(1, 8 * (m * m) as i64);
            let marginal = base.eval(&rest) - base.eval(&rest.without(*item));
            // the marginal of `item` on top of M∖set∖{item}
            let v_item = if *negative { marginal - shift } else { marginal + shift };
            if v_item < rat::zero() {
                return Err(Error::Parameter("probe item value would be negative".into()));
            }
            let mut vals = vec![rat::zero(); m];
            for &x in set {
                vals[x] = big.clone();
            }
            vals[*item] = v_item;
            Ok(Valuation::additive(vals))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WdpMode {
    Brute,
    Ascending,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GsAllocation {
    pub bundles: Vec<Bundle>,
    pub welfare: Rat,
}

/// Welfare-maximizing allocation; items may stay unallocated.
pub fn gs_welfare_max(vals: &[Valuation], mode: WdpMode) -> Result<GsAllocation> {
    let m = common_items(vals)?;
    match mode {
        WdpMode::Brute => {
            if m > MAX_GS_ITEMS || vals.len() > 6 {
                return Err(Error::Capability(format!("brute force limited to {MAX_GS_ITEMS} items and 6 bidders")));
            }
            Ok(brute(vals, m))
        }
        WdpMode::Ascending => {
            if m > MAX_GS_ITEMS {
                return Err(Error::Capability(format!("ascending auction limited to {MAX_GS_ITEMS} items")));
            }
            for (i, v) in vals.iter().enumerate() {
                if !is_gross_substitutes(v)?.is_ok() {
                    return Err(Error::Mode(format!("bidder {i} is not gross substitutes; the ascending auction may miss the optimum")));
                }
            }
            ascending(vals, m)
        }
    }
}

fn common_items(vals: &[Valuation]) -> Result<usize> {
    let m = vals.first().ok_or_else(|| Error::Input("no bidders".into()))?.items();
    if vals.iter().any(|v| v.items() != m) {
        return Err(Error::Dimension("bidders disagree on the item count".into()));
    }
    Ok(m)
}

/// Subset dynamic program, `n·3^m`.
fn brute(vals: &[Valuation], m: usize) -> GsAllocation {
    let full = (1u64 << m) - 1;
    let tables: Vec<Vec<Rat>> = vals.iter().map(tabulate).collect();
    // best[i][mask]: best welfare of the first i bidders using items of mask
    let mut best: Vec<Vec<Rat>> = vec![vec![rat::zero(); 1 << m]];
    let mut pick: Vec<Vec<u64>> = vec![vec![0; 1 << m]];
    for t in &tables {
        let prev = best.last().expect("seeded");
        let mut row = Vec::with_capacity(1 << m);
        let mut choice = Vec::with_capacity(1 << m);
        for mask in 0..=full {
            let mut sub = mask;
            let mut top: Option<(Rat, u64)> = None;
            loop {
                let w = &t[sub as usize] + &prev[(mask & !sub) as usize];
                if top.as_ref().is_none_or(|(b, _)| w > *b) {
                    top = Some((w, sub));
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & mask;
            }
            let (w, s) = top.expect("empty bundle always considered");
            row.push(w);
            choice.push(s);
        }
        best.push(row);
        pick.push(choice);
    }
    let mut bundles = vec![Bundle::empty(m); vals.len()];
    let mut mask = full;
    for i in (0..vals.len()).rev() {
        let s = pick[i + 1][mask as usize];
        bundles[i] = Bundle::from_mask(m, s);
        mask &= !s;
    }
    GsAllocation { bundles, welfare: best[vals.len()][full as usize].clone() }
}

/// Common denominator of all bundle values, i.e. the value granularity is `1/L`.
fn value_denominator(tables: &[Vec<Rat>]) -> num_bigint::BigInt {
    use num_integer::Integer;
    tables.iter().flatten().fold(num_bigint::BigInt::from(1), |acc, v| acc.lcm(v.denom()))
}

/// Ascending auction with personalized prices. A bidder pays `p_j` for items
/// it holds and `p_j + δ` for the rest, must keep what it holds, and takes
/// its lexicographically first demanded superset; items it takes from others
/// go up by `δ`. With `δ = g/(2mn)` for value granularity `g` the final
/// welfare is within `g/(2n)` of optimal, hence optimal.
///
/// Runs on integers: every value is scaled by `1/δ`, so `δ` becomes 1.
fn ascending(vals: &[Valuation], m: usize) -> Result<GsAllocation> {
    let n = vals.len();
    let tables: Vec<Vec<Rat>> = vals.iter().map(tabulate).collect();
    let scale = Rat::from_integer(value_denominator(&tables) * num_bigint::BigInt::from(2 * m.max(1) * n));
    let mut scaled: Vec<Vec<i128>> = Vec::with_capacity(n);
    for t in &tables {
        let row = t
            .iter()
            .map(|v| {
                let x = (v * &scale).to_integer();
                i128::try_from(x).map_err(|_| Error::Capability("values too large for the ascending auction".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        scaled.push(row);
    }
    let mut price = vec![0i128; m];
    let mut holds = vec![0u64; n];
    let mut owner: Vec<Option<usize>> = vec![None; m];
    let mut cost = vec![0i128; 1 << m];
    loop {
        let mut changed = false;
        for i in 0..n {
            for mask in 1..1usize << m {
                let j = mask.trailing_zeros() as usize;
                let pj = price[j] + i128::from(holds[i] >> j & 1 == 0);
                cost[mask] = cost[mask & (mask - 1)] + pj;
            }
            let best = (0..1usize << m).map(|k| scaled[i][k] - cost[k]).max().expect("non-empty");
            let held = holds[i] as usize;
            if scaled[i][held] - cost[held] == best {
                continue;
            }
            let Some(take) = (0..1usize << m).find(|&k| held & !k == 0 && scaled[i][k] - cost[k] == best) else {
                return Err(Error::Mode(format!("bidder {i} drops held items: valuation is not gross substitutes")));
            };
            let take = take as u64;
            for j in 0..m {
                if take >> j & 1 == 1 && holds[i] >> j & 1 == 0 {
                    if let Some(prev) = owner[j] {
                        holds[prev] &= !(1u64 << j);
                    }
                    owner[j] = Some(i);
                    price[j] += 1;
                }
            }
            holds[i] = take;
            changed = true;
        }
        if !changed {
            break;
        }
    }
    let welfare = (0..n).fold(rat::zero(), |acc, i| acc + &tables[i][holds[i] as usize]);
    Ok(GsAllocation { bundles: holds.iter().map(|&h| Bundle::from_mask(m, h)).collect(), welfare })
}

/// Welfare of an explicit allocation.
pub fn welfare_of(vals: &[Valuation], bundles: &[Bundle]) -> Rat {
    vals.iter().zip(bundles).fold(rat::zero(), |acc, (v, b)| acc + v.eval(b))
}

/// A combinatorial auction instance: `{m, players: [valuation...]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuctionInstance {
    pub m: usize,
    pub players: Vec<Valuation>,
}

impl AuctionInstance {
    pub fn to_json(&self) -> Value {
        json!({ "m": self.m, "players": self.players.iter().map(|v| v.to_json()).collect::<Vec<_>>() })
    }

    pub fn from_json(v: &Value) -> Result<AuctionInstance> {
        let m = v["m"].as_u64().ok_or_else(|| Error::Input("instance needs \"m\"".into()))? as usize;
        let players = v["players"]
            .as_array()
            .ok_or_else(|| Error::Input("instance needs \"players\"".into()))?
            .iter()
            .map(Valuation::from_json)
            .collect::<Result<Vec<_>>>()?;
        if players.iter().any(|p| p.items() != m) {
            return Err(Error::Dimension("player valuations must cover m items".into()));
        }
        Ok(AuctionInstance { m, players })
    }
}

pub fn random_additive<R: Rng>(m: usize, max: i64, r: &mut R) -> Valuation {
    Valuation::additive((0..m).map(|_| int(r.random_range(0..=max))).collect())
}

pub fn random_unit_demand<R: Rng>(m: usize, max: i64, r: &mut R) -> Valuation {
    Valuation::UnitDemand { values: (0..m).map(|_| int(r.random_range(0..=max))).collect() }
}

/// Each of `slots` slots takes at most one item; weights in `0..=max`.
pub fn random_assignment<R: Rng>(m: usize, slots: usize, max: i64, r: &mut R) -> Valuation {
    Valuation::Assignment { m, weights: (0..slots).map(|_| (0..m).map(|_| int(r.random_range(0..=max))).collect()).collect() }
}

/// A random gross-substitutes valuation: additive, unit demand, or an
/// assignment valuation with one to three slots.
pub fn random_gs<R: Rng>(m: usize, max: i64, r: &mut R) -> Valuation {
    match r.random_range(0..3) {
        0 => random_additive(m, max, r),
        1 => random_unit_demand(m, max, r),
        _ => {
            let slots = r.random_range(1..=3usize.min(m.max(1)));
            random_assignment(m, slots, max, r)
        }
    }
}

/// A monotone GS valuation over `k` items with integer values in `0..=cap`.
pub fn random_small_base<R: Rng>(k: usize, cap: i64, r: &mut R) -> Valuation {
    if r.random_bool(0.5) {
        random_unit_demand(k, cap, r)
    } else {
        let slots = r.random_range(1..=2usize);
        random_assignment(k, slots, cap / slots as i64, r)
    }
}
