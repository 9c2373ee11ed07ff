//! Turning a dominant-strategy mechanism into a simultaneous algorithm.
//!
//! Every bidder's valuation is a base valuation scaled by a weight and a
//! small noise: `weight · (1 + noise) · base`. Each bidder reports the
//! message it would send at a fixed vertex `x` of the mechanism together
//! with its weight, base set and noise; the allocator then hands a group's
//! special set to a bidder whenever some same-noise valuation at the lower
//! weight that sends the same message at `x` is sure to win a set it values.

use std::collections::HashMap;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::fixtures::direct_tree;
use crate::protocol::{play, profile_of, profiles, Behavior, Domains, Flags, Node, NodeId, Outcome, ProtocolTree, Share, Strategies};
use crate::rat::{self, ceil_log2, int, pow, Rat};
use crate::valuation::Valuation;

use super::harness::{decode, encode, Bits, SimAlgorithm, SimOutput};

/// One valuation of a bidder's domain, with the data it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceEntry {
    /// Label of the base valuation.
    pub base: String,
    /// Union of the base valuation's valuable sets.
    pub base_set: Bundle,
    pub weight: Rat,
    /// The noise is `noise_index / 4^m`.
    pub noise_index: u64,
    pub valuation: Valuation,
}

/// Per-bidder domains of weighted, noisy valuations.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSlice {
    pub m: usize,
    pub players: Vec<Vec<SliceEntry>>,
}

impl WeightedSlice {
    pub fn domains(&self) -> Domains {
        Domains { players: self.players.iter().map(|d| d.iter().map(|e| e.valuation.clone()).collect()).collect() }
    }

    /// Noise indices run over `0..=3^m`.
    pub fn noise_bits(&self) -> usize {
        ceil_log2(3u64.pow(self.m as u32) + 1) as usize
    }
}

impl SliceEntry {
    /// `weight · (1 + noise_index / 4^m) · inner`.
    pub fn new(base: &str, base_set: Bundle, weight: Rat, noise_index: u64, inner: &Valuation) -> Result<SliceEntry> {
        let m = base_set.universe();
        if noise_index > 3u64.pow(m as u32) {
            return Err(Error::Parameter(format!("noise index {noise_index} above 3^{m}")));
        }
        let noise = int(noise_index as i64) / pow(4, m as u32);
        Ok(SliceEntry { base: base.into(), base_set, weight: weight.clone(), noise_index, valuation: inner.scale_shift(weight, noise)? })
    }
}

/// The first vertex on the common path where some speaker's message
/// depends on its valuation; `None` when every profile reaches one leaf.
pub fn initial_vertex(tree: &ProtocolTree, strat: &Strategies, doms: &Domains) -> Result<Option<NodeId>> {
    let mut id = tree.root;
    loop {
        let Node::Internal { speakers, alphabets, children } = tree.node(id) else { return Ok(None) };
        let mut msgs = Vec::with_capacity(speakers.len());
        for &p in speakers {
            let mut sent = Vec::new();
            for b in &strat.players[p] {
                sent.push(*b.get(&id).ok_or(Error::IncompleteStrategy { player: p, node: id })?);
            }
            sent.dedup();
            if sent.len() > 1 || doms.players[p].is_empty() {
                return Ok(Some(id));
            }
            msgs.push(sent[0]);
        }
        id = children[crate::protocol::profile_index(alphabets, &msgs)];
    }
}

/// Weights `w` for which every bidder's `w` and `2w` valuations of equal
/// base and noise send different messages at `x`.
pub fn critical_weights(slice: &WeightedSlice, strat: &Strategies, x: NodeId) -> Vec<Rat> {
    let mut ws: Vec<Rat> = slice.players.iter().flatten().map(|e| e.weight.clone()).collect();
    ws.sort();
    ws.dedup();
    ws.into_iter()
        .filter(|w| {
            slice.players.iter().enumerate().all(|(i, dom)| {
                dom.iter().enumerate().filter(|(_, e)| e.weight == *w).all(|(k, _)| critical(slice, strat, x, i, k) == Some(true))
            })
        })
        .collect()
}

/// Whether entry `k` and its partner at the other weight of the pair
/// `(w, 2w)` send different messages at `x`; `None` without a partner.
fn critical(slice: &WeightedSlice, strat: &Strategies, x: NodeId, i: usize, k: usize) -> Option<bool> {
    let e = &slice.players[i][k];
    let two = int(2);
    let partner = slice.players[i].iter().position(|o| {
        o.base == e.base && o.noise_index == e.noise_index && (o.weight == &e.weight * &two || &o.weight * &two == e.weight)
    })?;
    Some(strat.players[i][k].get(&x) != strat.players[i][partner].get(&x))
}

fn check_common_prefix(tree: &ProtocolTree, strat: &Strategies, doms: &Domains, x: NodeId) -> Result<()> {
    const PROFILE_BUDGET: usize = 1 << 16;
    let sizes: Vec<usize> = doms.players.iter().map(|d| d.len()).collect();
    if doms.profiles() > PROFILE_BUDGET {
        return Err(Error::Capability(format!("{} profiles, the common-prefix check handles {PROFILE_BUDGET}", doms.profiles())));
    }
    for p in profiles(&sizes) {
        if !play(tree, strat, &p)?.path.contains(&x) {
            return Err(Error::Parameter(format!("vertex {x} is not on the path of profile {p:?}")));
        }
    }
    Ok(())
}

/// Lowest profit over the leaves `player` may reach from `id` while
/// following `plan`, provided every such leaf gives it a bundle `v` values
/// positively. `None` when some reachable leaf does not.
fn guaranteed_valuable(tree: &ProtocolTree, player: usize, plan: &Behavior, v: &Valuation, id: NodeId, memo: &mut HashMap<NodeId, Option<Rat>>) -> Result<Option<Rat>> {
    if let Some(r) = memo.get(&id) {
        return Ok(r.clone());
    }
    let r = match tree.node(id) {
        Node::Leaf(o) => (o.shares[player].value(v) > int(0)).then(|| o.profit(player, v)),
        Node::Internal { speakers, alphabets, children } => {
            let own = match speakers.iter().position(|&q| q == player) {
                Some(pos) => Some((pos, *plan.get(&id).ok_or(Error::IncompleteStrategy { player, node: id })?)),
                None => None,
            };
            let mut worst: Option<Rat> = None;
            let mut all = true;
            for (k, &c) in children.iter().enumerate() {
                if let Some((pos, z)) = own {
                    if profile_of(alphabets, k)[pos] != z {
                        continue;
                    }
                }
                match guaranteed_valuable(tree, player, plan, v, c, memo)? {
                    Some(p) => worst = Some(worst.map_or(p.clone(), |w| w.min(p))),
                    None => {
                        all = false;
                        break;
                    }
                }
            }
            if all { worst } else { None }
        }
    };
    memo.insert(id, r.clone());
    Ok(r)
}

struct Layout {
    /// Per bidder: its alphabet at `x`, or `None` if it does not speak there.
    alphabets: Vec<Option<usize>>,
    speakers: Vec<usize>,
    m: usize,
    noise_bits: usize,
}

impl Layout {
    fn z_bits(&self, i: usize) -> usize {
        self.alphabets[i].map_or(0, |a| ceil_log2(a as u64) as usize)
    }

    fn len(&self, i: usize) -> usize {
        self.z_bits(i) + 2 + self.m + self.noise_bits
    }
}

struct Report {
    z: Option<usize>,
    heavy: bool,
    critical: bool,
    base_set: Bundle,
    noise_index: u64,
}

fn parse(layout: &Layout, i: usize, b: &[bool]) -> Result<Report> {
    if b.len() != layout.len(i) {
        return Err(Error::Input(format!("message of player {i} has {} bits, expected {}", b.len(), layout.len(i))));
    }
    let zb = layout.z_bits(i);
    let z = layout.alphabets[i].map(|_| decode(&b[..zb]) as usize);
    let m = layout.m;
    Ok(Report {
        z,
        heavy: b[zb],
        critical: b[zb + 1],
        base_set: Bundle::from_mask(m, decode(&b[zb + 2..zb + 2 + m])),
        noise_index: decode(&b[zb + 2 + m..]),
    })
}

/// Builds the simultaneous algorithm from a mechanism, its dominant
/// strategies on the slice, the vertex `x` and the lower weight `alpha`.
///
/// Message blocks, in order: the message at `x` (absent if the bidder does
/// not speak there), one bit for the higher weight, one bit telling whether
/// the two weights send different messages at `x`, the base set (`m` bits)
/// and the noise index. Grants whose guaranteed profit is not positive are
/// refused and noted.
pub fn dsic_to_simultaneous(tree: &ProtocolTree, strat: &Strategies, slice: &WeightedSlice, x: NodeId, alpha: &Rat) -> Result<SimAlgorithm> {
    let doms = slice.domains();
    if doms.players.len() != tree.players || strat.players.len() != tree.players {
        return Err(Error::Dimension("tree, strategies and slice disagree on the player count".into()));
    }
    let Node::Internal { speakers, alphabets, .. } = tree.node(x) else {
        return Err(Error::Parameter(format!("vertex {x} is a leaf")));
    };
    check_common_prefix(tree, strat, &doms, x)?;
    if slice.m > 64 {
        return Err(Error::Capability("base sets are sent as at most 64 bits".into()));
    }
    let mut alph = vec![None; tree.players];
    for (&p, &a) in speakers.iter().zip(alphabets) {
        alph[p] = Some(a);
    }
    let layout = Arc::new(Layout { alphabets: alph, speakers: speakers.clone(), m: slice.m, noise_bits: slice.noise_bits() });
    let heavy = alpha * int(2);
    let tree = Arc::new(tree.clone());
    let strat = Arc::new(strat.clone());
    let slice = Arc::new(slice.clone());
    let alpha = alpha.clone();

    let message = {
        let (layout, strat, slice, heavy, alpha) = (layout.clone(), strat.clone(), slice.clone(), heavy.clone(), alpha.clone());
        move |view: &super::harness::PlayerView| -> Result<Bits> {
            let i = view.player;
            let dom = slice.players.get(i).ok_or_else(|| Error::Dimension(format!("no slice for player {i}")))?;
            let k = dom
                .iter()
                .position(|e| &e.valuation == view.valuation)
                .ok_or_else(|| Error::Input(format!("player {i}'s valuation is outside its slice")))?;
            let e = &dom[k];
            if e.weight != alpha && e.weight != heavy {
                return Err(Error::Input(format!("player {i}'s weight {} is neither {alpha} nor {heavy}", e.weight)));
            }
            let mut out = Vec::with_capacity(layout.len(i));
            if layout.alphabets[i].is_some() {
                let z = strat.players[i][k].get(&x).ok_or(Error::IncompleteStrategy { player: i, node: x })?;
                out.extend(encode(*z as u64, layout.z_bits(i)));
            }
            out.push(e.weight == heavy);
            out.push(critical(&slice, &strat, x, i, k) == Some(true));
            out.extend(encode(e.base_set.mask(), slice.m));
            out.extend(encode(e.noise_index, layout.noise_bits));
            Ok(out)
        }
    };

    let allocate = move |msgs: &[Bits]| -> Result<SimOutput> {
        let m = layout.m;
        let n = msgs.len();
        let mut out = SimOutput { bundles: vec![Bundle::empty(m); n], notes: Vec::new() };
        if n != tree.players {
            return Err(Error::Dimension(format!("{n} messages for {} players", tree.players)));
        }
        let reports = msgs.iter().enumerate().map(|(i, b)| parse(&layout, i, b)).collect::<Result<Vec<_>>>()?;
        let mut groups: Vec<Bundle> = reports.iter().map(|r| r.base_set).collect();
        groups.sort_by_key(|b| b.mask());
        groups.dedup();
        if groups.len() < 2 {
            out.notes.push("fewer than two base sets; center unknown".into());
            return Ok(out);
        }
        let center = groups.iter().skip(1).fold(groups[0], |acc, g| acc.intersection(g));
        let specials: Vec<Bundle> = groups.iter().map(|g| g.difference(&center)).collect();
        for a in 0..specials.len() {
            for b in a + 1..specials.len() {
                if specials[a].is_empty() || !specials[a].is_disjoint(&specials[b]) {
                    out.notes.push("base sets do not split into a center and disjoint special sets".into());
                    return Ok(out);
                }
            }
        }
        let zs: Vec<usize> = layout.speakers.iter().map(|&p| reports[p].z.expect("speaker has a message")).collect();
        let Node::Internal { alphabets, children, .. } = tree.node(x) else { unreachable!("checked above") };
        let below = children[crate::protocol::profile_index(alphabets, &zs)];
        let mut grantee: Vec<Option<usize>> = vec![None; groups.len()];
        for (i, r) in reports.iter().enumerate() {
            // the higher weight never wins; without a critical pair the
            // bidder would have been given the higher weight
            if r.heavy || !r.critical {
                continue;
            }
            let g = groups.iter().position(|b| *b == r.base_set).expect("collected above");
            let mut granted = false;
            for (k, e) in slice.players[i].iter().enumerate() {
                if e.weight != alpha || e.noise_index != r.noise_index {
                    continue;
                }
                if r.z.is_some() && strat.players[i][k].get(&x).copied() != r.z {
                    continue;
                }
                let mut memo = HashMap::new();
                match guaranteed_valuable(&tree, i, &strat.players[i][k], &e.valuation, below, &mut memo)? {
                    Some(p) if p > int(0) => {
                        granted = true;
                        break;
                    }
                    Some(p) => out.notes.push(format!(
                        "player {i}: valuation {k} is sure of a valuable set only at profit {}; grant refused",
                        rat::to_text(&p)
                    )),
                    None => {}
                }
            }
            if granted {
                if let Some(j) = grantee[g] {
                    return Err(Error::Infeasible(format!("special set of group {g} granted to players {j} and {i}")));
                }
                grantee[g] = Some(i);
                out.bundles[i] = specials[g];
            }
        }
        Ok(out)
    };

    Ok(SimAlgorithm { name: "dsic-reduction".into(), budget: None, message: Arc::new(message), allocate: Arc::new(allocate) })
}

/// A two-bidder, three-item example. Item 0 is bidder 0's special set,
/// item 1 bidder 1's, item 2 the shared center. Each bidder either wants
/// its special item or the center, at weight 1 or 2, with a fixed noise.
#[derive(Clone, Debug)]
pub struct Toy {
    pub slice: WeightedSlice,
    pub tree: ProtocolTree,
    pub strat: Strategies,
    pub alpha: Rat,
    /// Whether a phantom bidder bids each special item at its owner's
    /// weight-1 value, so the weight-1 owner wins it at zero profit.
    pub reserve: bool,
}

pub const TOY_ITEMS: usize = 3;
const CENTER: usize = 2;

/// Welfare-maximizing allocation with Clarke payments, by enumeration.
/// Ties go to the first allocation in item-major order; the phantom, if
/// any, takes part in the allocation but pays nothing.
fn vcg(vals: &[&Valuation], phantom: Option<&Valuation>, m: usize) -> Outcome {
    let n = vals.len();
    let mut bidders: Vec<&Valuation> = vals.to_vec();
    bidders.extend(phantom);
    let choices = bidders.len() + 1;
    let bundles_of = |code: usize| {
        let mut bs = vec![Bundle::empty(m); bidders.len()];
        let mut c = code;
        for j in 0..m {
            let who = c % choices;
            c /= choices;
            if who > 0 {
                bs[who - 1].insert(j);
            }
        }
        bs
    };
    let total = choices.pow(m as u32);
    let welfare_without = |bs: &[Bundle], skip: Option<usize>| -> Rat {
        bidders.iter().enumerate().filter(|(k, _)| Some(*k) != skip).map(|(k, v)| v.eval(&bs[k])).sum()
    };
    let mut best: Option<(Rat, Vec<Bundle>)> = None;
    for code in 0..total {
        let bs = bundles_of(code);
        let w = welfare_without(&bs, None);
        if best.as_ref().is_none_or(|(b, _)| w > *b) {
            best = Some((w, bs));
        }
    }
    let (_, chosen) = best.expect("at least one allocation");
    let payments = (0..n)
        .map(|i| {
            let alone = (0..total).map(|c| welfare_without(&bundles_of(c), Some(i))).max().expect("nonempty");
            alone - welfare_without(&chosen, Some(i))
        })
        .collect();
    Outcome { shares: chosen[..n].iter().map(|b| Share::Items(*b)).collect(), payments }
}

pub fn toy(reserve: bool) -> Result<Toy> {
    let m = TOY_ITEMS;
    let alpha = int(1);
    let center = Bundle::from_items(m, &[CENTER])?;
    let mut players = Vec::new();
    let mut noise = Vec::new();
    for i in 0..2 {
        let special = Bundle::from_items(m, &[i])?;
        let base_set = special.with(CENTER);
        let noise_index = i as u64 + 1;
        noise.push(int(noise_index as i64) / pow(4, m as u32));
        let bases = [("special", Valuation::AnyOf { m, sets: vec![special] }), ("plain", Valuation::AnyOf { m, sets: vec![center] })];
        let mut dom = Vec::new();
        for (label, inner) in &bases {
            for w in [alpha.clone(), &alpha * int(2)] {
                dom.push(SliceEntry::new(label, base_set, w, noise_index, inner)?);
            }
        }
        players.push(dom);
    }
    let slice = WeightedSlice { m, players };
    let phantom = reserve.then(|| Valuation::additive(vec![&alpha * (int(1) + &noise[0]), &alpha * (int(1) + &noise[1]), int(0)]));
    let doms = slice.domains();
    let (tree, strat) = direct_tree(m, &doms, Flags { normalized: true, no_negative_transfers: true }, |p| {
        let vals: Vec<&Valuation> = p.iter().enumerate().map(|(i, &k)| &doms.players[i][k]).collect();
        vcg(&vals, phantom.as_ref(), m)
    })?;
    Ok(Toy { slice, tree, strat, alpha, reserve })
}

impl Toy {
    pub fn special_set(&self, i: usize) -> Bundle {
        Bundle::from_items(TOY_ITEMS, &[i]).expect("toy item")
    }

    /// Every special-base bidder has the lower weight, and every bidder
    /// that wins a set it values does so at positive profit.
    pub fn preconditions_hold(&self, profile: &[usize]) -> Result<bool> {
        let o = play(&self.tree, &self.strat, profile)?.outcome;
        for (i, &k) in profile.iter().enumerate() {
            let e = &self.slice.players[i][k];
            if e.base == "special" && e.weight != self.alpha {
                return Ok(false);
            }
            if o.shares[i].value(&e.valuation) > int(0) && o.profit(i, &e.valuation) <= int(0) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn profiles(&self) -> Vec<Vec<usize>> {
        let sizes: Vec<usize> = self.slice.players.iter().map(|d| d.len()).collect();
        profiles(&sizes).collect()
    }
}

/// One profile of the toy run through both the mechanism and the reduction.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyCase {
    pub profile: Vec<usize>,
    pub preconditions: bool,
    pub mechanism: Vec<Bundle>,
    pub reduction: Vec<Bundle>,
    pub notes: Vec<String>,
    /// For special-base bidders: does the reduction grant the special set
    /// exactly when the mechanism allocates it?
    pub agrees: bool,
}

impl ToyCase {
    pub fn to_json(&self) -> Value {
        json!({
            "profile": self.profile,
            "preconditions": self.preconditions,
            "mechanism": self.mechanism.iter().map(|b| b.to_vec()).collect::<Vec<_>>(),
            "reduction": self.reduction.iter().map(|b| b.to_vec()).collect::<Vec<_>>(),
            "agrees": self.agrees,
            "notes": self.notes,
        })
    }
}

/// Runs the reduction on every profile of the toy.
pub fn toy_cases(t: &Toy) -> Result<Vec<ToyCase>> {
    let doms = t.slice.domains();
    let x = initial_vertex(&t.tree, &t.strat, &doms)?.ok_or_else(|| Error::Parameter("the toy never branches".into()))?;
    let alg = dsic_to_simultaneous(&t.tree, &t.strat, &t.slice, x, &t.alpha)?;
    let mut out = Vec::new();
    for p in t.profiles() {
        let inst = crate::gs::AuctionInstance { m: TOY_ITEMS, players: p.iter().enumerate().map(|(i, &k)| doms.players[i][k].clone()).collect() };
        let run = super::harness::run_simultaneous(&alg, &inst)?;
        let o = play(&t.tree, &t.strat, &p)?.outcome;
        let mechanism: Vec<Bundle> = o.shares.iter().map(|s| match s {
            Share::Items(b) => *b,
            Share::Units(_) => unreachable!("item shares"),
        }).collect();
        let agrees = (0..2).filter(|&i| t.slice.players[i][p[i]].base == "special").all(|i| {
            let a = t.special_set(i);
            a.is_subset(&mechanism[i]) == a.is_subset(&run.bundles[i])
        });
        out.push(ToyCase { preconditions: t.preconditions_hold(&p)?, profile: p, mechanism, reduction: run.bundles, notes: run.notes, agrees });
    }
    Ok(out)
}
