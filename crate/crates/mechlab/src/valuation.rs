//! Valuation oracles over bundles.
//!
//! A [`Valuation`] maps every bundle of a fixed universe to an exact
//! non-negative rational. Values are computed on demand, so oracle kinds
//! (additive, matroid rank, compositions) scale past the table limit.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::matroid::RankProfileMatroid;
use crate::rat::{self, Rat};
use crate::rng;

/// Table valuations store `2^m` values; larger universes need an oracle kind.
pub const MAX_TABLE_ITEMS: usize = 24;

/// Universes up to this size are checked over every bundle.
pub const MAX_EXHAUSTIVE_ITEMS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub enum Valuation {
    /// One value per bundle, indexed by bitmask.
    Table { m: usize, values: Arc<Vec<Rat>> },
    Additive { values: Vec<Rat> },
    /// Depends only on the bundle size; `cumulative[x]` is the value of `x` items.
    Symmetric { m: usize, cumulative: Vec<Rat> },
    /// Highest single-item value in the bundle.
    UnitDemand { values: Vec<Rat> },
    /// Best assignment of bundle items to slots, at most one item per slot.
    Assignment { m: usize, weights: Vec<Vec<Rat>> },
    /// 1 when the bundle contains one of the listed sets, else 0.
    AnyOf { m: usize, sets: Vec<Bundle> },
    /// Rank of the bundle's preimage under `ground[g] = item`.
    MatroidRank { m: usize, matroid: Arc<RankProfileMatroid>, ground: Vec<usize> },
    Sum { m: usize, parts: Vec<Valuation> },
    /// `inner` evaluated on the preimage of the bundle under `items[j] = outer item`.
    Embed { m: usize, items: Vec<usize>, inner: Box<Valuation> },
    /// `weight · (1 + noise) · inner`.
    ScaleShift { weight: Rat, noise: Rat, inner: Box<Valuation> },
}

impl Valuation {
    pub fn items(&self) -> usize {
        match self {
            Valuation::Table { m, .. }
            | Valuation::Symmetric { m, .. }
            | Valuation::Assignment { m, .. }
            | Valuation::AnyOf { m, .. }
            | Valuation::MatroidRank { m, .. }
            | Valuation::Sum { m, .. }
            | Valuation::Embed { m, .. } => *m,
            Valuation::Additive { values } | Valuation::UnitDemand { values } => values.len(),
            Valuation::ScaleShift { inner, .. } => inner.items(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Valuation::Table { .. } => "table",
            Valuation::Additive { .. } => "additive",
            Valuation::Symmetric { .. } => "marginal-vector",
            Valuation::UnitDemand { .. } => "unit-demand",
            Valuation::Assignment { .. } => "assignment",
            Valuation::AnyOf { .. } => "any-of",
            Valuation::MatroidRank { .. } => "matroid-rank",
            Valuation::Sum { .. } => "sum",
            Valuation::Embed { .. } => "embed",
            Valuation::ScaleShift { .. } => "scaled-shifted",
        }
    }

    pub fn table(m: usize, values: Vec<Rat>) -> Result<Valuation> {
        if m > MAX_TABLE_ITEMS {
            return Err(Error::Capability(format!("table valuations limited to {MAX_TABLE_ITEMS} items")));
        }
        if values.len() != 1usize << m {
            return Err(Error::Dimension(format!("table over {m} items needs {} values, got {}", 1usize << m, values.len())));
        }
        Ok(Valuation::Table { m, values: Arc::new(values) })
    }

    /// Tabulates any valuation over a small universe.
    pub fn to_table(&self) -> Result<Valuation> {
        let m = self.items();
        if m > MAX_TABLE_ITEMS {
            return Err(Error::Capability(format!("table valuations limited to {MAX_TABLE_ITEMS} items")));
        }
        Valuation::table(m, Bundle::all(m).map(|s| self.eval(&s)).collect())
    }

    pub fn additive(values: Vec<Rat>) -> Valuation {
        Valuation::Additive { values }
    }

    /// Lifts a count valuation (`cumulative[0] = 0`) to sets of identical items.
    pub fn symmetric(cumulative: Vec<Rat>) -> Result<Valuation> {
        if cumulative.is_empty() {
            return Err(Error::Dimension("count valuation needs v(0)".into()));
        }
        Ok(Valuation::Symmetric { m: cumulative.len() - 1, cumulative })
    }

    pub fn scale_shift(&self, weight: Rat, noise: Rat) -> Result<Valuation> {
        if weight <= rat::zero() {
            return Err(Error::Parameter(format!("weight must be positive, got {}", rat::to_text(&weight))));
        }
        if noise < rat::zero() {
            return Err(Error::Parameter(format!("noise must be non-negative, got {}", rat::to_text(&noise))));
        }
        Ok(Valuation::ScaleShift { weight, noise, inner: Box::new(self.clone()) })
    }

    /// Exact value of `s`; the bundle must live in this valuation's universe.
    pub fn value(&self, s: &Bundle) -> Result<Rat> {
        if s.universe() != self.items() {
            return Err(Error::Dimension(format!(
                "bundle over {} items queried on a valuation over {}",
                s.universe(),
                self.items()
            )));
        }
        Ok(self.eval(s))
    }

    /// Like [`Valuation::value`], panicking on a universe mismatch.
    pub fn eval(&self, s: &Bundle) -> Rat {
        debug_assert_eq!(s.universe(), self.items(), "bundle universe mismatch");
        match self {
            Valuation::Table { values, .. } => values[s.mask() as usize].clone(),
            Valuation::Additive { values } => s.items().fold(rat::zero(), |acc, i| acc + &values[i]),
            Valuation::Symmetric { cumulative, .. } => cumulative[s.len()].clone(),
            Valuation::UnitDemand { values } => s.items().map(|i| values[i].clone()).max().unwrap_or_else(rat::zero),
            Valuation::Assignment { weights, .. } => assignment_value(weights, s),
            Valuation::AnyOf { sets, .. } => {
                if sets.iter().any(|t| t.is_subset(s)) {
                    rat::one()
                } else {
                    rat::zero()
                }
            }
            Valuation::MatroidRank { matroid, ground, .. } => {
                let mut pre = Bundle::empty(matroid.ground_size);
                for (g, &item) in ground.iter().enumerate() {
                    if s.contains(item) {
                        pre.insert(g);
                    }
                }
                rat::int(matroid.rank(&pre) as i64)
            }
            Valuation::Sum { parts, .. } => parts.iter().fold(rat::zero(), |acc, p| acc + p.eval(s)),
            Valuation::Embed { items, inner, .. } => {
                let mut pre = Bundle::empty(items.len());
                for (j, &item) in items.iter().enumerate() {
                    if s.contains(item) {
                        pre.insert(j);
                    }
                }
                inner.eval(&pre)
            }
            Valuation::ScaleShift { weight, noise, inner } => weight * (rat::one() + noise) * inner.eval(s),
        }
    }

    pub fn to_json(&self) -> Value {
        let texts = |v: &[Rat]| v.iter().map(rat::to_text).collect::<Vec<_>>();
        let payload = match self {
            Valuation::Table { values, .. } => json!(texts(values)),
            Valuation::Additive { values } | Valuation::UnitDemand { values } => json!(texts(values)),
            Valuation::Symmetric { cumulative, .. } => {
                let marg: Vec<Rat> = cumulative.windows(2).map(|w| &w[1] - &w[0]).collect();
                json!(texts(&marg))
            }
            Valuation::Assignment { weights, .. } => json!(weights.iter().map(|w| texts(w)).collect::<Vec<_>>()),
            Valuation::AnyOf { sets, .. } => json!(sets),
            Valuation::MatroidRank { matroid, ground, .. } => json!({ "matroid": matroid.as_ref(), "ground": ground }),
            Valuation::Sum { parts, .. } => json!(parts.iter().map(|p| p.to_json()).collect::<Vec<_>>()),
            Valuation::Embed { items, inner, .. } => json!({ "items": items, "inner": inner.to_json() }),
            Valuation::ScaleShift { weight, noise, inner } => json!({
                "weight": rat::to_text(weight),
                "noise": rat::to_text(noise),
                "inner": inner.to_json(),
            }),
        };
        json!({ "kind": self.kind(), "m": self.items(), "payload": payload })
    }

    pub fn from_json(v: &Value) -> Result<Valuation> {
        let doc: Doc = serde_json::from_value(v.clone())?;
        let m = doc.m;
        let p = doc.payload;
        let texts = |v: &Value| -> Result<Vec<Rat>> {
            let raw: Vec<String> = serde_json::from_value(v.clone())?;
            raw.iter().map(|s| rat::parse(s)).collect()
        };
        let check_len = |n: usize| -> Result<()> {
            if n != m {
                return Err(Error::Dimension(format!("payload has {n} entries for m = {m}")));
            }
            Ok(())
        };
        let out = match doc.kind.as_str() {
            "table" => Valuation::table(m, texts(&p)?)?,
            "additive" => {
                let values = texts(&p)?;
                check_len(values.len())?;
                Valuation::Additive { values }
            }
            "unit-demand" => {
                let values = texts(&p)?;
                check_len(values.len())?;
                Valuation::UnitDemand { values }
            }
            "marginal-vector" => {
                let marg = texts(&p)?;
                check_len(marg.len())?;
                let mut cumulative = vec![rat::zero()];
                for x in marg {
                    let next = cumulative.last().unwrap() + x;
                    cumulative.push(next);
                }
                Valuation::Symmetric { m, cumulative }
            }
            "assignment" => {
                let rows: Vec<Value> = serde_json::from_value(p)?;
                let weights = rows.iter().map(texts).collect::<Result<Vec<_>>>()?;
                for w in &weights {
                    check_len(w.len())?;
                }
                Valuation::Assignment { m, weights }
            }
            "any-of" => {
                let sets: Vec<Bundle> = serde_json::from_value(p)?;
                let sets = sets.iter().map(|s| s.resized(m)).collect::<Result<Vec<_>>>()?;
                Valuation::AnyOf { m, sets }
            }
            "matroid-rank" => {
                #[derive(Deserialize)]
                struct P {
                    matroid: RankProfileMatroid,
                    ground: Vec<usize>,
                }
                let mut q: P = serde_json::from_value(p)?;
                q.matroid.refresh();
                if q.ground.len() != q.matroid.ground_size || q.ground.iter().any(|&g| g >= m) {
                    return Err(Error::Dimension("matroid ground map does not fit the universe".into()));
                }
                Valuation::MatroidRank { m, matroid: Arc::new(q.matroid), ground: q.ground }
            }
            "sum" => {
                let parts: Vec<Value> = serde_json::from_value(p)?;
                let parts = parts.iter().map(Valuation::from_json).collect::<Result<Vec<_>>>()?;
                if parts.iter().any(|q| q.items() != m) {
                    return Err(Error::Dimension("sum parts must share the universe".into()));
                }
                Valuation::Sum { m, parts }
            }
            "embed" => {
                #[derive(Deserialize)]
                struct P {
                    items: Vec<usize>,
                    inner: Value,
                }
                let q: P = serde_json::from_value(p)?;
                let inner = Valuation::from_json(&q.inner)?;
                if inner.items() != q.items.len() || q.items.iter().any(|&i| i >= m) {
                    return Err(Error::Dimension("embedding does not fit the universe".into()));
                }
                Valuation::Embed { m, items: q.items, inner: Box::new(inner) }
            }
            "scaled-shifted" => {
                #[derive(Deserialize)]
                struct P {
                    weight: String,
                    noise: String,
                    inner: Value,
                }
                let q: P = serde_json::from_value(p)?;
                let inner = Valuation::from_json(&q.inner)?;
                check_len(inner.items())?;
                inner.scale_shift(rat::parse(&q.weight)?, rat::parse(&q.noise)?)?
            }
            other => return Err(Error::Input(format!("unknown valuation kind {other:?}"))),
        };
        Ok(out)
    }
}

#[derive(Deserialize, Serialize)]
struct Doc {
    kind: String,
    m: usize,
    payload: Value,
}

/// Max-weight matching of bundle items to slots, by dynamic programming over
/// used slots. Slot counts stay small in practice.
fn assignment_value(weights: &[Vec<Rat>], s: &Bundle) -> Rat {
    let k = weights.len();
    let mut best: Vec<Option<Rat>> = vec![None; 1 << k];
    best[0] = Some(rat::zero());
    for item in s.items() {
        let mut next = best.clone();
        for used in 0..(1usize << k) {
            let Some(base) = &best[used] else { continue };
            for (slot, w) in weights.iter().enumerate() {
                if used >> slot & 1 == 1 {
                    continue;
                }
                let cand = base + &w[item];
                let t = used | 1 << slot;
                if next[t].as_ref().is_none_or(|cur| cand > *cur) {
                    next[t] = Some(cand);
                }
            }
        }
        best = next;
    }
    best.into_iter().flatten().max().unwrap_or_else(rat::zero)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum MonotoneReport {
    Ok,
    NotNormalized { empty_value: String },
    Decreasing { smaller: Vec<usize>, larger: Vec<usize> },
}

impl MonotoneReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, MonotoneReport::Ok)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum CheckMode {
    Exhaustive,
    Sampled { samples: usize, seed: u64 },
}

/// Checks `v(∅) = 0` and `S ⊆ T ⇒ v(S) ≤ v(T)`.
///
/// Exhaustive mode compares every bundle with each one-item extension, which
/// covers all nested pairs by transitivity. Sampled mode walks random chains.
pub fn check_monotone_normalized(v: &Valuation, mode: CheckMode) -> Result<MonotoneReport> {
    let m = v.items();
    let e = v.eval(&Bundle::empty(m));
    if e != rat::zero() {
        return Ok(MonotoneReport::NotNormalized { empty_value: rat::to_text(&e) });
    }
    match mode {
        CheckMode::Exhaustive => {
            if m > MAX_EXHAUSTIVE_ITEMS {
                return Err(Error::Capability(format!("exhaustive check limited to {MAX_EXHAUSTIVE_ITEMS} items")));
            }
            let table: Vec<Rat> = Bundle::all(m).map(|s| v.eval(&s)).collect();
            for mask in 0..table.len() {
                for i in 0..m {
                    let up = mask | 1 << i;
                    if up != mask && table[up] < table[mask] {
                        let s = Bundle::from_mask(m, mask as u64);
                        return Ok(MonotoneReport::Decreasing { smaller: s.to_vec(), larger: s.with(i).to_vec() });
                    }
                }
            }
            Ok(MonotoneReport::Ok)
        }
        CheckMode::Sampled { samples, seed } => {
            let mut r = rng::stream("monotone", seed, "chain");
            for _ in 0..samples {
                let mut order: Vec<usize> = (0..m).collect();
                for i in (1..m).rev() {
                    order.swap(i, r.random_range(0..=i));
                }
                let mut s = Bundle::empty(m);
                let mut prev = rat::zero();
                for &i in &order {
                    let t = s.with(i);
                    let val = v.eval(&t);
                    if val < prev {
                        return Ok(MonotoneReport::Decreasing { smaller: s.to_vec(), larger: t.to_vec() });
                    }
                    s = t;
                    prev = val;
                }
            }
            Ok(MonotoneReport::Ok)
        }
    }
}
