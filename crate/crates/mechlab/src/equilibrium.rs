//! Dominant-strategy and ex-post verification on finite domains.
//!
//! Dominance is checked against *every* behavior function of the opponents
//! on the tree, not only behaviors induced by their valuations.
//!
//! The fast check rests on one observation: once player `i` deviates at node
//! `u`, the honest and deviating continuations live in disjoint subtrees, so
//! the opponents may behave adversarially in one and cooperatively in the
//! other. Hence `σ` is dominant iff at every node `u` that `σ` can reach and
//! where `i` speaks, for every opponent profile at `u` and every other
//! message `z'`, the best leaf below `child(z')` is no better for `i` than the
//! worst `σ`-consistent leaf below `child(σ(u))`.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde_json::{json, Value};

use num_traits::Signed;

use crate::error::{Error, Result};
use crate::multiunit::{reconstruct_value, MarginalVector};
use crate::protocol::{
    evaluate, play, profile_index, profile_of, profiles, Behavior, Domains, Node, NodeId, Outcome, ProtocolTree, Share, Strategies,
};
use crate::rat::{self, Rat};
use crate::rng::with_pool;
use crate::valuation::Valuation;

/// Default cap on `(opponent behaviors) × (own behaviors)` for the oracle.
pub const ORACLE_BUDGET: u128 = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DominanceMode {
    /// Subtree min/max comparison at every divergence point.
    Stitch,
    /// Tries one-shot deviations that return to the honest plan, then stitches.
    Pruned,
    /// Enumerates every behavior function of everybody (tiny trees only).
    Oracle { budget: u128 },
}

/// A concrete counter-example to dominance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViolationCertificate {
    pub player: usize,
    pub valuation: usize,
    /// Where the deviation leaves the honest plan.
    pub node: NodeId,
    /// Opponent messages at `node`, in speaker order.
    pub others: Vec<usize>,
    pub honest_message: usize,
    pub deviant_message: usize,
    /// The deviating player's messages from `node` on; `σ` everywhere else.
    pub deviation: BTreeMap<NodeId, usize>,
    /// Opponent messages `(player, message)` per node; message 0 wherever unlisted.
    pub opponents: BTreeMap<NodeId, Vec<(usize, usize)>>,
    pub honest_profit: Rat,
    pub deviating_profit: Rat,
}

impl ViolationCertificate {
    /// `(player, valuation, node, others, deviant message)`: what stays fixed
    /// when all values and payments are scaled together.
    pub fn skeleton(&self) -> (usize, usize, NodeId, Vec<usize>, usize) {
        (self.player, self.valuation, self.node, self.others.clone(), self.deviant_message)
    }

    /// Plays the certificate's behaviors and returns `(honest, deviating)` profits.
    pub fn replay(&self, tree: &ProtocolTree, strat: &Strategies, doms: &Domains) -> Result<(Rat, Rat)> {
        let honest = &strat.players[self.player][self.valuation];
        let mut deviant = honest.clone();
        deviant.extend(self.deviation.iter().map(|(&n, &m)| (n, m)));
        let opp = opponent_behaviors(tree, &self.opponents);
        let v = &doms.players[self.player][self.valuation];
        let run = |mine: &Behavior| -> Result<Rat> {
            let bs: Vec<&Behavior> = (0..tree.players).map(|p| if p == self.player { mine } else { &opp[p] }).collect();
            Ok(evaluate(tree, &bs)?.outcome.profit(self.player, v))
        };
        Ok((run(honest)?, run(&deviant)?))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "player": self.player,
            "valuation": self.valuation,
            "node": self.node,
            "others": self.others,
            "honest_message": self.honest_message,
            "deviant_message": self.deviant_message,
            "deviation": self.deviation.iter().map(|(n, m)| (n.to_string(), json!(m))).collect::<serde_json::Map<_, _>>(),
            "opponents": self.opponents.iter().map(|(n, ms)| (n.to_string(), json!(ms))).collect::<serde_json::Map<_, _>>(),
            "honest_profit": rat::to_text(&self.honest_profit),
            "deviating_profit": rat::to_text(&self.deviating_profit),
        })
    }
}

/// Full behaviors for every player: listed messages, 0 elsewhere.
fn opponent_behaviors(tree: &ProtocolTree, listed: &BTreeMap<NodeId, Vec<(usize, usize)>>) -> Vec<Behavior> {
    let mut out = vec![Behavior::new(); tree.players];
    for (id, n) in tree.nodes.iter().enumerate() {
        if let Node::Internal { speakers, .. } = n {
            for &p in speakers {
                out[p].insert(id, 0);
            }
        }
    }
    for (&id, ms) in listed {
        for &(p, m) in ms {
            out[p].insert(id, m);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DominanceReport {
    Ok,
    Violation(Box<ViolationCertificate>),
}

impl DominanceReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, DominanceReport::Ok)
    }

    pub fn certificate(&self) -> Option<&ViolationCertificate> {
        match self {
            DominanceReport::Ok => None,
            DominanceReport::Violation(c) => Some(c),
        }
    }
}

/// Checks that every player's strategy is dominant for each of its valuations.
/// Reports the first violation by (player, valuation index, node id).
pub fn check_dominant(tree: &ProtocolTree, strat: &Strategies, doms: &Domains, mode: DominanceMode) -> Result<DominanceReport> {
    let all = violations(tree, strat, doms, mode)?;
    Ok(match all.into_iter().next() {
        Some(c) => DominanceReport::Violation(Box::new(c)),
        None => DominanceReport::Ok,
    })
}

/// The first violation for each violating (player, valuation), in order.
pub fn violations(tree: &ProtocolTree, strat: &Strategies, doms: &Domains, mode: DominanceMode) -> Result<Vec<ViolationCertificate>> {
    shapes(tree, strat, doms)?;
    if let DominanceMode::Oracle { budget } = mode {
        oracle_cost(tree, budget)?;
    }
    let jobs: Vec<(usize, usize)> = (0..tree.players).flat_map(|i| (0..doms.players[i].len()).map(move |k| (i, k))).collect();
    let found: Vec<Result<Option<ViolationCertificate>>> = with_pool(|| {
        jobs.par_iter()
            .map(|&(i, k)| match mode {
                DominanceMode::Stitch => stitch(tree, strat, doms, i, k, false),
                DominanceMode::Pruned => match stitch(tree, strat, doms, i, k, true)? {
                    Some(c) => Ok(Some(c)),
                    None => stitch(tree, strat, doms, i, k, false),
                },
                DominanceMode::Oracle { .. } => oracle(tree, strat, doms, i, k),
            })
            .collect()
    });
    let mut out = Vec::new();
    for f in found {
        if let Some(c) = f? {
            out.push(c);
        }
    }
    Ok(out)
}

fn shapes(tree: &ProtocolTree, strat: &Strategies, doms: &Domains) -> Result<()> {
    if doms.players.len() != tree.players || strat.players.len() != tree.players {
        return Err(Error::Dimension("strategies, domains and tree disagree on the player count".into()));
    }
    for i in 0..tree.players {
        if strat.players[i].len() != doms.players[i].len() {
            return Err(Error::Dimension(format!("player {i}: {} behaviors for {} valuations", strat.players[i].len(), doms.players[i].len())));
        }
    }
    Ok(())
}

/// Worst (`min`) or best (`max`) profit for `me` below a node, remembering
/// the opponents' choice at every node.
struct Extreme<'a> {
    tree: &'a ProtocolTree,
    me: usize,
    v: &'a Valuation,
    /// Own plan; `None` means the player is free too (best case only).
    plan: Option<&'a Behavior>,
    minimize: bool,
    memo: HashMap<NodeId, (Rat, usize)>,
}

impl Extreme<'_> {
    fn value(&mut self, id: NodeId) -> Result<Rat> {
        if let Some((r, _)) = self.memo.get(&id) {
            return Ok(r.clone());
        }
        let r = match &self.tree.nodes[id] {
            Node::Leaf(o) => (o.profit(self.me, self.v), 0),
            Node::Internal { speakers, alphabets, children } => {
                let pos = speakers.iter().position(|&p| p == self.me);
                let fixed = match (pos, self.plan) {
                    (Some(_), Some(plan)) => Some(*plan.get(&id).ok_or(Error::IncompleteStrategy { player: self.me, node: id })?),
                    _ => None,
                };
                let mut best: Option<(Rat, usize)> = None;
                for (k, &c) in children.iter().enumerate() {
                    if let (Some(p), Some(z)) = (pos, fixed) {
                        if profile_of(alphabets, k)[p] != z {
                            continue;
                        }
                    }
                    let x = self.value(c)?;
                    let better = match &best {
                        None => true,
                        Some((b, _)) => if self.minimize { x < *b } else { x > *b },
                    };
                    if better {
                        best = Some((x, k));
                    }
                }
                best.expect("non-empty alphabet")
            }
        };
        self.memo.insert(id, r.clone());
        Ok(r.0)
    }

    /// Follows the recorded choices from `id` to a leaf.
    fn trace(&self, mut id: NodeId, mine: &mut BTreeMap<NodeId, usize>, theirs: &mut BTreeMap<NodeId, Vec<(usize, usize)>>) {
        while let Node::Internal { speakers, alphabets, children } = &self.tree.nodes[id] {
            let k = self.memo[&id].1;
            let msgs = profile_of(alphabets, k);
            let mut opp = Vec::new();
            for (j, &p) in speakers.iter().enumerate() {
                if p == self.me {
                    if self.plan.is_none() {
                        mine.insert(id, msgs[j]);
                    }
                } else {
                    opp.push((p, msgs[j]));
                }
            }
            if !opp.is_empty() {
                theirs.insert(id, opp);
            }
            id = children[k];
        }
    }
}

/// Nodes reachable when `me` follows `plan` and everyone else is free,
/// together with the opponents' messages on the way there.
fn plan_reachable(tree: &ProtocolTree, me: usize, plan: &Behavior) -> Result<Vec<(NodeId, BTreeMap<NodeId, Vec<(usize, usize)>>)>> {
    let mut out = Vec::new();
    let mut stack = vec![(tree.root, BTreeMap::new())];
    while let Some((id, prefix)) = stack.pop() {
        if let Node::Internal { speakers, alphabets, children } = &tree.nodes[id] {
            let pos = speakers.iter().position(|&p| p == me);
            let z = match pos {
                Some(_) => Some(*plan.get(&id).ok_or(Error::IncompleteStrategy { player: me, node: id })?),
                None => None,
            };
            for (k, &c) in children.iter().enumerate().rev() {
                let msgs = profile_of(alphabets, k);
                if let (Some(p), Some(z)) = (pos, z) {
                    if msgs[p] != z {
                        continue;
                    }
                }
                let mut next: BTreeMap<NodeId, Vec<(usize, usize)>> = prefix.clone();
                let opp: Vec<(usize, usize)> = speakers.iter().zip(&msgs).filter(|(&p, _)| p != me).map(|(&p, &m)| (p, m)).collect();
                if !opp.is_empty() {
                    next.insert(id, opp);
                }
                stack.push((c, next));
            }
            out.push((id, prefix));
        }
    }
    out.sort_by_key(|(id, _)| *id);
    Ok(out)
}

fn stitch(tree: &ProtocolTree, strat: &Strategies, doms: &Domains, me: usize, k: usize, one_shot: bool) -> Result<Option<ViolationCertificate>> {
    let plan = &strat.players[me][k];
    let v = &doms.players[me][k];
    let mut worst = Extreme { tree, me, v, plan: Some(plan), minimize: true, memo: HashMap::new() };
    let mut best = Extreme { tree, me, v, plan: if one_shot { Some(plan) } else { None }, minimize: false, memo: HashMap::new() };
    for (u, prefix) in plan_reachable(tree, me, plan)? {
        let Node::Internal { speakers, alphabets, children } = &tree.nodes[u] else { continue };
        let Some(pos) = speakers.iter().position(|&p| p == me) else { continue };
        let honest = plan[&u];
        let opp_sizes: Vec<usize> = alphabets.iter().enumerate().filter(|(j, _)| *j != pos).map(|(_, &a)| a).collect();
        for others in profiles(&opp_sizes) {
            let at = |z: usize| {
                let mut msgs = others.clone();
                msgs.insert(pos, z);
                children[profile_index(alphabets, &msgs)]
            };
            let h = worst.value(at(honest))?;
            let mut pick: Option<(Rat, usize)> = None;
            for z in 0..alphabets[pos] {
                if z == honest {
                    continue;
                }
                let d = best.value(at(z))?;
                if d > h && pick.as_ref().is_none_or(|(b, _)| d >= *b) {
                    pick = Some((d, z));
                }
            }
            if let Some((d, z)) = pick {
                let mut opponents = prefix.clone();
                let opp_here: Vec<(usize, usize)> =
                    speakers.iter().enumerate().filter(|(j, _)| *j != pos).map(|(_, &p)| p).zip(others.iter().copied()).collect();
                if !opp_here.is_empty() {
                    opponents.insert(u, opp_here);
                }
                let mut deviation = BTreeMap::from([(u, z)]);
                worst.trace(at(honest), &mut BTreeMap::new(), &mut opponents);
                best.trace(at(z), &mut deviation, &mut opponents);
                return Ok(Some(ViolationCertificate {
                    player: me,
                    valuation: k,
                    node: u,
                    others,
                    honest_message: honest,
                    deviant_message: z,
                    deviation,
                    opponents,
                    honest_profit: h,
                    deviating_profit: d,
                }));
            }
        }
    }
    Ok(None)
}

fn oracle_cost(tree: &ProtocolTree, budget: u128) -> Result<()> {
    let mut total: u128 = 1;
    for n in &tree.nodes {
        if let Node::Internal { alphabets, .. } = n {
            for &a in alphabets {
                total = total.saturating_mul(a as u128);
            }
        }
    }
    if total > budget {
        return Err(Error::Capability(format!("oracle would enumerate {total} behavior combinations, budget {budget}")));
    }
    Ok(())
}

/// Every behavior function of `player`, as message vectors over `nodes`.
fn all_behaviors(tree: &ProtocolTree, player: usize) -> (Vec<NodeId>, Vec<usize>) {
    let mut nodes = Vec::new();
    let mut sizes = Vec::new();
    for (id, n) in tree.nodes.iter().enumerate() {
        if let Node::Internal { speakers, alphabets, .. } = n {
            if let Some(j) = speakers.iter().position(|&p| p == player) {
                nodes.push(id);
                sizes.push(alphabets[j]);
            }
        }
    }
    (nodes, sizes)
}

fn oracle(tree: &ProtocolTree, strat: &Strategies, doms: &Domains, me: usize, k: usize) -> Result<Option<ViolationCertificate>> {
    let plan = &strat.players[me][k];
    let v = &doms.players[me][k];
    let per_player: Vec<(Vec<NodeId>, Vec<usize>)> = (0..tree.players).map(|p| all_behaviors(tree, p)).collect();
    let opp_ids: Vec<usize> = (0..tree.players).filter(|&p| p != me).collect();
    let opp_sizes: Vec<usize> = opp_ids.iter().flat_map(|&p| per_player[p].1.iter().copied()).collect();
    let (my_nodes, my_sizes) = &per_player[me];
    for joint in profiles(&opp_sizes) {
        let mut bs = vec![Behavior::new(); tree.players];
        let mut at = 0;
        for &p in &opp_ids {
            for &id in &per_player[p].0 {
                bs[p].insert(id, joint[at]);
                at += 1;
            }
        }
        bs[me] = plan.clone();
        let honest_run = {
            let refs: Vec<&Behavior> = bs.iter().collect();
            evaluate(tree, &refs)?
        };
        let h = honest_run.outcome.profit(me, v);
        for mine in profiles(my_sizes) {
            bs[me] = my_nodes.iter().copied().zip(mine.iter().copied()).collect();
            let refs: Vec<&Behavior> = bs.iter().collect();
            let run = evaluate(tree, &refs)?;
            let d = run.outcome.profit(me, v);
            if d > h {
                // the divergence point is the first node on the deviating path where the messages differ
                let u = run
                    .path
                    .iter()
                    .copied()
                    .find(|id| bs[me].get(id).is_some_and(|m| plan.get(id) != Some(m)))
                    .expect("different outcome needs a divergence");
                let Node::Internal { speakers, .. } = &tree.nodes[u] else { unreachable!() };
                let others: Vec<usize> = speakers.iter().filter(|&&p| p != me).map(|&p| bs[p][&u]).collect();
                let start = run.path.iter().position(|&x| x == u).expect("divergence is on the path");
                let deviation = run.path[start..].iter().filter_map(|id| bs[me].get(id).map(|&m| (*id, m))).collect();
                let opponents = opp_ids
                    .iter()
                    .flat_map(|&p| bs[p].iter().filter(|(_, &m)| m != 0).map(move |(&id, &m)| (id, (p, m))))
                    .fold(BTreeMap::<NodeId, Vec<(usize, usize)>>::new(), |mut acc, (id, pm)| {
                        acc.entry(id).or_default().push(pm);
                        acc
                    });
                return Ok(Some(ViolationCertificate {
                    player: me,
                    valuation: k,
                    node: u,
                    others,
                    honest_message: plan[&u],
                    deviant_message: bs[me][&u],
                    deviation,
                    opponents,
                    honest_profit: h,
                    deviating_profit: d,
                }));
            }
        }
    }
    Ok(None)
}

/// An outcome for every valuation profile of a finite domain.
#[derive(Clone, Debug, PartialEq)]
pub struct SocialChoiceTable {
    pub items: usize,
    pub domains: Domains,
    /// Row-major over valuation-index profiles.
    pub outcomes: Vec<Outcome>,
}

impl SocialChoiceTable {
    pub fn from_fn(items: usize, domains: Domains, mut f: impl FnMut(&[usize]) -> Result<Outcome>) -> Result<SocialChoiceTable> {
        let sizes: Vec<usize> = domains.players.iter().map(|d| d.len()).collect();
        let outcomes = profiles(&sizes).map(|p| f(&p)).collect::<Result<Vec<_>>>()?;
        if outcomes.is_empty() {
            return Err(Error::Input("empty domain".into()));
        }
        Ok(SocialChoiceTable { items, domains, outcomes })
    }

    /// Composes a tree with its strategies.
    pub fn from_tree(tree: &ProtocolTree, strat: &Strategies, domains: &Domains) -> Result<SocialChoiceTable> {
        shapes(tree, strat, domains)?;
        SocialChoiceTable::from_fn(tree.items, domains.clone(), |p| Ok(play(tree, strat, p)?.outcome))
    }

    fn sizes(&self) -> Vec<usize> {
        self.domains.players.iter().map(|d| d.len()).collect()
    }

    pub fn outcome(&self, profile: &[usize]) -> &Outcome {
        &self.outcomes[profile_index(&self.sizes(), profile)]
    }

    pub fn to_json(&self) -> Value {
        let sizes = self.sizes();
        json!({
            "items": self.items,
            "domains": self.domains.to_json(),
            "outcomes": self.outcomes.iter().enumerate().map(|(k, o)| json!({
                "profile": profile_of(&sizes, k),
                "allocation": o.shares.iter().map(share_json).collect::<Vec<_>>(),
                "payments": o.payments.iter().map(rat::to_text).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<SocialChoiceTable> {
        let items = v["items"].as_u64().ok_or_else(|| Error::Input("table needs \"items\"".into()))? as usize;
        let domains = Domains::from_json(&v["domains"])?;
        let sizes: Vec<usize> = domains.players.iter().map(|d| d.len()).collect();
        let rows = v["outcomes"].as_array().ok_or_else(|| Error::Input("table needs \"outcomes\"".into()))?;
        let mut slots: Vec<Option<Outcome>> = vec![None; sizes.iter().product()];
        for r in rows {
            let profile: Vec<usize> = serde_json::from_value(r["profile"].clone())?;
            if profile.len() != sizes.len() || profile.iter().zip(&sizes).any(|(a, b)| a >= b) {
                return Err(Error::Input(format!("profile {profile:?} outside the domain")));
            }
            let shares = r["allocation"]
                .as_array()
                .ok_or_else(|| Error::Input("row needs \"allocation\"".into()))?
                .iter()
                .map(|s| share_from_json(s, items))
                .collect::<Result<Vec<_>>>()?;
            let payments: Vec<String> = serde_json::from_value(r["payments"].clone())?;
            let payments = payments.iter().map(|s| rat::parse(s)).collect::<Result<Vec<_>>>()?;
            if shares.len() != sizes.len() || payments.len() != sizes.len() {
                return Err(Error::Dimension(format!("row {profile:?} has the wrong player count")));
            }
            slots[profile_index(&sizes, &profile)] = Some(Outcome { shares, payments });
        }
        let outcomes = slots
            .into_iter()
            .enumerate()
            .map(|(k, o)| o.ok_or_else(|| Error::Input(format!("table misses profile {:?}", profile_of(&sizes, k)))))
            .collect::<Result<Vec<_>>>()?;
        Ok(SocialChoiceTable { items, domains, outcomes })
    }
}

pub(crate) fn share_json(s: &Share) -> Value {
    match s {
        Share::Items(b) => json!(b.to_vec()),
        Share::Units(x) => json!(x),
    }
}

pub(crate) fn share_from_json(v: &Value, items: usize) -> Result<Share> {
    match v {
        Value::Number(n) => Ok(Share::Units(n.as_u64().ok_or_else(|| Error::Input(format!("bad unit count {n}")))? as usize)),
        Value::Array(_) => Ok(Share::Items(crate::bundle::Bundle::from_items(items, &serde_json::from_value::<Vec<usize>>(v.clone())?)?)),
        other => Err(Error::Input(format!("bad allocation entry {other}"))),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExPostReport {
    Ok,
    /// Player `player` with valuation `truth` gains by reporting `lie` against `rest`.
    Violation { player: usize, truth: usize, lie: usize, rest: Vec<usize>, honest: Rat, deviating: Rat },
}

/// Truthful reporting is a best response to truthful opponents, checked for
/// every profile. The first witness by (player, truth, lie, others) is returned.
pub fn check_expost(table: &SocialChoiceTable) -> ExPostReport {
    let sizes = table.sizes();
    for i in 0..sizes.len() {
        let rest_sizes: Vec<usize> = sizes.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &s)| s).collect();
        for truth in 0..sizes[i] {
            let v = &table.domains.players[i][truth];
            for lie in 0..sizes[i] {
                if lie == truth {
                    continue;
                }
                for rest in profiles(&rest_sizes) {
                    let with = |r: usize| {
                        let mut p = rest.clone();
                        p.insert(i, r);
                        p
                    };
                    let honest = table.outcome(&with(truth)).profit(i, v);
                    let deviating = table.outcome(&with(lie)).profit(i, v);
                    if deviating > honest {
                        return ExPostReport::Violation { player: i, truth, lie, rest, honest, deviating };
                    }
                }
            }
        }
    }
    ExPostReport::Ok
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MenuReport {
    Ok,
    /// Valuation `valuation` receives `chosen` although `better` on the menu pays more.
    NotBestResponse { valuation: usize, chosen: Share, better: Share },
}

/// Price list facing player `i` when the others report `rest`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Menu {
    pub prices: BTreeMap<Share, Rat>,
    pub report: MenuReport,
}

/// Reads off the menu facing `i` at `rest` and checks every valuation of `i`
/// takes a profit-maximizing entry. Together these two facts are ex-post
/// incentive compatibility for `i` at `rest`.
pub fn taxation_menu(table: &SocialChoiceTable, i: usize, rest: &[usize]) -> Result<Menu> {
    let sizes = table.sizes();
    if i >= sizes.len() || rest.len() + 1 != sizes.len() {
        return Err(Error::Dimension("player or opponent profile does not fit the table".into()));
    }
    let with = |r: usize| {
        let mut p = rest.to_vec();
        p.insert(i, r);
        p
    };
    let mut prices: BTreeMap<Share, Rat> = BTreeMap::new();
    for k in 0..sizes[i] {
        let o = table.outcome(&with(k));
        match prices.get(&o.shares[i]) {
            Some(p) if *p != o.payments[i] => {
                return Err(Error::Taxation(format!(
                    "share {} costs {} and {}",
                    o.shares[i],
                    rat::to_text(p),
                    rat::to_text(&o.payments[i])
                )))
            }
            _ => {
                prices.insert(o.shares[i], o.payments[i].clone());
            }
        }
    }
    for k in 0..sizes[i] {
        let v = &table.domains.players[i][k];
        let chosen = table.outcome(&with(k)).shares[i];
        let got = chosen.value(v) - &prices[&chosen];
        if let Some((s, _)) = prices.iter().find(|(s, p)| s.value(v) - *p > got) {
            return Ok(Menu { report: MenuReport::NotBestResponse { valuation: k, chosen, better: *s }, prices });
        }
    }
    Ok(Menu { prices, report: MenuReport::Ok })
}

/// A two-player multi-unit mechanism: Alice and Bob valuations to
/// `(Alice's units, Bob's units, Alice pays, Bob pays)`.
pub type MuMechanism<'a> = dyn Fn(&MarginalVector, &MarginalVector) -> Result<(usize, usize, Rat, Rat)> + Sync + 'a;

/// Price the mechanism charges Bob for exactly `x` units against `va`,
/// probed with a Bob who values each of the first `x` units above
/// everything Alice could lose.
pub fn menu_price_probe(mech: &MuMechanism, va: &MarginalVector, x: usize) -> Result<Rat> {
    let m = va.items();
    let high = va.value(m).clone() + rat::one();
    let marg: Vec<Rat> = (0..m).map(|k| if k < x { high.clone() } else { rat::zero() }).collect();
    let vb = MarginalVector::new(marg)?;
    let (_, got, _, pay) = mech(va, &vb)?;
    if got != x {
        return Err(Error::Input(format!("probe for {x} units received {got}")));
    }
    Ok(pay)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SketchReport {
    Ok { checked: usize },
    OutsideInterval { alice: usize, units: usize, price: Rat },
    WrongReconstruction { alice: usize, units: usize },
}

/// For every Alice valuation and `x` in `1..m`, Bob's price for `x` units is
/// within `1/(8m)` of `v_A(m) - v_A(m-x)`, and `v_A(m-x)` is recovered
/// exactly from the price.
pub fn payments_sketch_check(mech: &MuMechanism, alice: &[MarginalVector]) -> Result<SketchReport> {
    let mut checked = 0;
    for (k, va) in alice.iter().enumerate() {
        let m = va.items();
        let slack = rat::frac(1, 8 * m as i64);
        for x in 1..m {
            let price = menu_price_probe(mech, va, x)?;
            let centre = va.value(m) - va.value(m - x);
            if (&price - &centre).abs() > slack {
                return Ok(SketchReport::OutsideInterval { alice: k, units: x, price });
            }
            match reconstruct_value(&price, va.value(m), m) {
                Ok(r) if Rat::from_integer(r.clone()) == *va.value(m - x) => {}
                _ => return Ok(SketchReport::WrongReconstruction { alice: k, units: m - x }),
            }
            checked += 1;
        }
    }
    Ok(SketchReport::Ok { checked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rat::int;

    #[test]
    fn single_leaf_is_vacuously_dominant() {
        let (t, s, d) = fixtures::single_leaf();
        assert!(check_dominant(&t, &s, &d, DominanceMode::Stitch).unwrap().is_ok());
        assert!(check_dominant(&t, &s, &d, DominanceMode::Oracle { budget: ORACLE_BUDGET }).unwrap().is_ok());
    }

    #[test]
    fn sealed_bid_second_price_is_dominant() {
        let (t, s, d) = fixtures::sealed_second_price(4);
        for mode in [DominanceMode::Stitch, DominanceMode::Pruned, DominanceMode::Oracle { budget: ORACLE_BUDGET }] {
            assert!(check_dominant(&t, &s, &d, mode).unwrap().is_ok(), "{mode:?}");
        }
    }

    #[test]
    fn serial_second_price_certificate() {
        let (t, s, d) = fixtures::serial_second_price();
        let c = check_dominant(&t, &s, &d, DominanceMode::Stitch).unwrap();
        let c = c.certificate().expect("violation");
        assert_eq!((c.player, c.honest_message, c.deviant_message), (0, 10, 11));
        assert_eq!((c.honest_profit.clone(), c.deviating_profit.clone()), (int(1), int(10)));
        let after_ten = t.child(t.root, &[10]);
        let after_eleven = t.child(t.root, &[11]);
        assert_eq!(c.opponents.get(&after_ten), Some(&vec![(1, 9)]));
        assert_eq!(c.opponents.get(&after_eleven), Some(&vec![(1, 0)]));
        assert_eq!(c.replay(&t, &s, &d).unwrap(), (int(1), int(10)));
    }

    #[test]
    fn oracle_refuses_large_trees() {
        let (t, s, d) = fixtures::serial_second_price();
        let r = check_dominant(&t, &s, &d, DominanceMode::Oracle { budget: ORACLE_BUDGET });
        assert!(matches!(r, Err(Error::Capability(_))));
    }

    #[test]
    fn first_price_table_fails_expost() {
        let doms = fixtures::single_item_domains(2, 3);
        let t = SocialChoiceTable::from_fn(1, doms, |p| Ok(fixtures::first_price_outcome(p))).unwrap();
        assert!(matches!(check_expost(&t), ExPostReport::Violation { .. }));
    }

    #[test]
    fn constant_table_passes_expost() {
        let doms = fixtures::single_item_domains(2, 3);
        let t = SocialChoiceTable::from_fn(1, doms, |_| Ok(fixtures::nobody(2, 1))).unwrap();
        assert_eq!(check_expost(&t), ExPostReport::Ok);
        let back = SocialChoiceTable::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn posted_price_menu() {
        let doms = fixtures::single_item_domains(1, 4);
        let t = SocialChoiceTable::from_fn(1, doms, |p| Ok(fixtures::posted_price_outcome(p[0], 2))).unwrap();
        let menu = taxation_menu(&t, 0, &[]).unwrap();
        assert_eq!(menu.report, MenuReport::Ok);
        assert_eq!(menu.prices.len(), 2);
        assert_eq!(menu.prices[&fixtures::item_share()], int(2));
    }

    #[test]
    fn inconsistent_menu_is_a_taxation_error() {
        let doms = fixtures::single_item_domains(1, 3);
        let t = SocialChoiceTable::from_fn(1, doms, |p| Ok(fixtures::pay_your_value(p[0]))).unwrap();
        assert!(matches!(taxation_menu(&t, 0, &[]), Err(Error::Taxation(_))));
    }
}
