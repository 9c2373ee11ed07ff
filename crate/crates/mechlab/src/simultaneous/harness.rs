//! Simultaneous algorithms: every bidder sends one message computed from its
//! own valuation, then a central allocator picks the allocation.

use std::sync::Arc;

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::gs::{welfare_of, AuctionInstance};
use crate::rat::Rat;
use crate::valuation::Valuation;

use super::hard::max_packing;

pub type Bits = Vec<bool>;

/// What a bidder sees when composing its message.
#[derive(Clone, Copy, Debug)]
pub struct PlayerView<'a> {
    pub player: usize,
    pub valuation: &'a Valuation,
    /// Whether this bidder is its group's special bidder. Real bidders
    /// cannot know this; only the diagnostic cheat reads it.
    pub special: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimOutput {
    pub bundles: Vec<Bundle>,
    /// Allocator remarks, e.g. grants it refused.
    pub notes: Vec<String>,
}

pub type MessageFn = dyn Fn(&PlayerView) -> Result<Bits> + Send + Sync;
pub type AllocateFn = dyn Fn(&[Bits]) -> Result<SimOutput> + Send + Sync;

#[derive(Clone)]
pub struct SimAlgorithm {
    pub name: String,
    /// Per-bidder message budget in bits; `None` is unbounded.
    pub budget: Option<usize>,
    pub message: Arc<MessageFn>,
    pub allocate: Arc<AllocateFn>,
}

impl std::fmt::Debug for SimAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SimAlgorithm({}, budget {:?})", self.name, self.budget)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimRun {
    pub bundles: Vec<Bundle>,
    pub welfare: Rat,
    pub max_bits: usize,
    pub notes: Vec<String>,
}

/// Collects every bidder's message, enforcing the budget, and allocates.
pub fn run_simultaneous(alg: &SimAlgorithm, inst: &AuctionInstance) -> Result<SimRun> {
    let mut msgs = Vec::with_capacity(inst.players.len());
    for (i, v) in inst.players.iter().enumerate() {
        let bits = (alg.message)(&PlayerView { player: i, valuation: v, special: false })?;
        if let Some(l) = alg.budget {
            if bits.len() > l {
                return Err(Error::Budget(format!("player {i} sent {} bits, budget is {l}", bits.len())));
            }
        }
        msgs.push(bits);
    }
    let out = (alg.allocate)(&msgs)?;
    if out.bundles.len() != inst.players.len() {
        return Err(Error::Infeasible(format!("{} bundles for {} bidders", out.bundles.len(), inst.players.len())));
    }
    let mut taken = Bundle::empty(inst.m);
    for (i, b) in out.bundles.iter().enumerate() {
        if b.universe() != inst.m {
            return Err(Error::Dimension(format!("bundle of bidder {i} has the wrong universe")));
        }
        if !b.is_disjoint(&taken) {
            return Err(Error::Infeasible(format!("bundle of bidder {i} overlaps an earlier one")));
        }
        taken = taken.union(b);
    }
    Ok(SimRun {
        welfare: welfare_of(&inst.players, &out.bundles),
        bundles: out.bundles,
        max_bits: msgs.iter().map(|m| m.len()).max().unwrap_or(0),
        notes: out.notes,
    })
}

pub fn encode(mut x: u64, width: usize) -> Bits {
    let mut out = Vec::with_capacity(width);
    for _ in 0..width {
        out.push(x & 1 == 1);
        x >>= 1;
    }
    out
}

pub fn decode(bits: &[bool]) -> u64 {
    bits.iter().rev().fold(0, |acc, &b| acc << 1 | u64::from(b))
}

fn set_list(v: &Valuation) -> &[Bundle] {
    match v {
        Valuation::AnyOf { sets, .. } => sets,
        _ => &[],
    }
}

fn smallest_set(v: &Valuation) -> Option<Bundle> {
    set_list(v).iter().min_by_key(|b| b.to_vec()).copied()
}

/// Sends nothing, allocates nothing.
pub fn silent(n: usize, m: usize) -> SimAlgorithm {
    SimAlgorithm {
        name: "silent".into(),
        budget: Some(0),
        message: Arc::new(|_| Ok(Vec::new())),
        allocate: Arc::new(move |_| Ok(SimOutput { bundles: vec![Bundle::empty(m); n], notes: Vec::new() })),
    }
}

/// Each bidder names one set it wants (a flag bit plus `m` item bits); the
/// allocator grants requests in bidder order while they stay disjoint.
pub fn top_set_first_come(m: usize) -> Result<SimAlgorithm> {
    if m > 64 {
        return Err(Error::Capability("set messages are limited to 64 items".into()));
    }
    Ok(SimAlgorithm {
        name: "top-set-first-come".into(),
        budget: Some(m + 1),
        message: Arc::new(move |view| {
            Ok(match smallest_set(view.valuation) {
                Some(s) => {
                    let mut b = vec![true];
                    b.extend(encode(s.mask(), m));
                    b
                }
                None => vec![false],
            })
        }),
        allocate: Arc::new(move |msgs| {
            let mut taken = Bundle::empty(m);
            let mut bundles = vec![Bundle::empty(m); msgs.len()];
            for (i, b) in msgs.iter().enumerate() {
                if b.first() == Some(&true) {
                    let s = Bundle::from_mask(m, decode(&b[1..]));
                    if s.is_disjoint(&taken) {
                        taken = taken.union(&s);
                        bundles[i] = s;
                    }
                }
            }
            Ok(SimOutput { bundles, notes: Vec::new() })
        }),
    })
}

/// Each bidder lists all its sets, `m` bits apiece; the allocator solves
/// the packing problem exactly.
pub fn exact_report(m: usize) -> Result<SimAlgorithm> {
    if m > 64 {
        return Err(Error::Capability("set messages are limited to 64 items".into()));
    }
    Ok(SimAlgorithm {
        name: "exact-report".into(),
        budget: None,
        message: Arc::new(move |view| {
            if !matches!(view.valuation, Valuation::AnyOf { .. }) {
                return Err(Error::Mode(format!("player {} is not a set-list bidder", view.player)));
            }
            Ok(set_list(view.valuation).iter().flat_map(|s| encode(s.mask(), m)).collect())
        }),
        allocate: Arc::new(move |msgs| {
            let mut cands = Vec::new();
            for (i, b) in msgs.iter().enumerate() {
                if b.len() % m != 0 {
                    return Err(Error::Input(format!("message of player {i} is not a whole number of sets")));
                }
                cands.extend(b.chunks(m).map(|c| (i, Bundle::from_mask(m, decode(c)))));
            }
            let mut bundles = vec![Bundle::empty(m); msgs.len()];
            for (i, s) in max_packing(&cands).1 {
                bundles[i] = s;
            }
            Ok(SimOutput { bundles, notes: Vec::new() })
        }),
    })
}

/// The lowest `bits` bits of the bidder's smallest set; allocates nothing.
pub fn truncated_report(bits: usize, n: usize, m: usize) -> SimAlgorithm {
    SimAlgorithm {
        name: format!("truncated-report-{bits}"),
        budget: Some(bits),
        message: Arc::new(move |view| Ok(encode(smallest_set(view.valuation).map_or(0, |s| s.mask()), bits))),
        allocate: Arc::new(move |_| Ok(SimOutput { bundles: vec![Bundle::empty(m); n], notes: Vec::new() })),
    }
}

/// One bit: "am I special?". Not computable from the bidder's own
/// valuation; exists to show what the frequency analysis flags.
pub fn oracle_cheat(n: usize, m: usize) -> SimAlgorithm {
    SimAlgorithm {
        name: "oracle-cheat".into(),
        budget: Some(1),
        message: Arc::new(|view| Ok(vec![view.special])),
        allocate: Arc::new(move |_| Ok(SimOutput { bundles: vec![Bundle::empty(m); n], notes: Vec::new() })),
    }
}
