//! Mechanisms as communication protocol trees.
//!
//! Each internal node names the players who speak there at once and the size
//! of each speaker's alphabet; messages are integers `0..size`. Children are
//! indexed by the joint message profile in row-major order (first speaker
//! most significant). Leaves carry an [`Outcome`].

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::rat::{self, ceil_log2, Rat};
use crate::valuation::Valuation;

/// Trees larger than this are rejected; the verifiers are exponential.
pub const MAX_NODES: usize = 1 << 18;

pub type NodeId = usize;

/// What one player receives: a set of items, or a number of identical units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Share {
    Items(Bundle),
    Units(usize),
}

impl Share {
    /// True when `self` contains `other` (superset, or at least as many units).
    pub fn covers(&self, other: &Share) -> bool {
        match (self, other) {
            (Share::Items(a), Share::Items(b)) => b.is_subset(a),
            (Share::Units(a), Share::Units(b)) => a >= b,
            _ => false,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Share::Items(b) => b.is_empty(),
            Share::Units(x) => *x == 0,
        }
    }

    /// An empty share of the same kind.
    pub fn nothing(&self) -> Share {
        match self {
            Share::Items(b) => Share::Items(Bundle::empty(b.universe())),
            Share::Units(_) => Share::Units(0),
        }
    }

    pub fn value(&self, v: &Valuation) -> Rat {
        match self {
            Share::Items(b) => v.eval(b),
            Share::Units(x) => v.eval(&Bundle::from_items(v.items(), &(0..*x).collect::<Vec<_>>()).expect("unit count exceeds universe")),
        }
    }

    fn to_json(self) -> Value {
        match self {
            Share::Items(b) => json!(b.to_vec()),
            Share::Units(x) => json!(x),
        }
    }

    fn from_json(v: &Value, items: usize) -> Result<Share> {
        match v {
            Value::Number(n) => Ok(Share::Units(n.as_u64().ok_or_else(|| Error::Input(format!("bad unit count {n}")))? as usize)),
            Value::Array(_) => {
                let list: Vec<usize> = serde_json::from_value(v.clone())?;
                Ok(Share::Items(Bundle::from_items(items, &list)?))
            }
            other => Err(Error::Input(format!("bad allocation entry {other}"))),
        }
    }
}

impl std::fmt::Display for Share {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Share::Items(b) => write!(f, "{b}"),
            Share::Units(x) => write!(f, "{x} units"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Outcome {
    pub shares: Vec<Share>,
    pub payments: Vec<Rat>,
}

impl Outcome {
    pub fn profit(&self, i: usize, v: &Valuation) -> Rat {
        self.shares[i].value(v) - &self.payments[i]
    }

    /// Pairwise disjoint item shares, or unit shares summing to at most `units`.
    pub fn is_feasible(&self, units: usize) -> bool {
        let mut seen: Option<Bundle> = None;
        let mut total = 0usize;
        for s in &self.shares {
            match s {
                Share::Items(b) => {
                    let acc = seen.get_or_insert(Bundle::empty(b.universe()));
                    if !acc.is_disjoint(b) {
                        return false;
                    }
                    *acc = acc.union(b);
                }
                Share::Units(x) => total += x,
            }
        }
        total <= units
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// An empty share always costs nothing.
    pub normalized: bool,
    /// Payments are never negative.
    pub no_negative_transfers: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Internal { speakers: Vec<usize>, alphabets: Vec<usize>, children: Vec<NodeId> },
    Leaf(Outcome),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolTree {
    pub players: usize,
    /// Item universe for item shares, or the unit supply for unit shares.
    pub items: usize,
    pub nodes: Vec<Node>,
    pub root: NodeId,
    pub flags: Flags,
}

pub fn profile_index(alphabets: &[usize], msgs: &[usize]) -> usize {
    msgs.iter().zip(alphabets).fold(0, |acc, (m, a)| acc * a + m)
}

pub fn profile_of(alphabets: &[usize], mut idx: usize) -> Vec<usize> {
    let mut out = vec![0; alphabets.len()];
    for k in (0..alphabets.len()).rev() {
        out[k] = idx % alphabets[k];
        idx /= alphabets[k];
    }
    out
}

/// Incremental construction; ids are handed out in insertion order.
#[derive(Default)]
pub struct TreeBuilder {
    nodes: Vec<Node>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        TreeBuilder::default()
    }

    pub fn leaf(&mut self, shares: Vec<Share>, payments: Vec<Rat>) -> NodeId {
        self.nodes.push(Node::Leaf(Outcome { shares, payments }));
        self.nodes.len() - 1
    }

    pub fn internal(&mut self, speakers: Vec<usize>, alphabets: Vec<usize>, children: Vec<NodeId>) -> NodeId {
        self.nodes.push(Node::Internal { speakers, alphabets, children });
        self.nodes.len() - 1
    }

    /// Reserves an id to be filled by [`TreeBuilder::set`].
    pub fn reserve(&mut self) -> NodeId {
        self.nodes.push(Node::Leaf(Outcome { shares: vec![], payments: vec![] }));
        self.nodes.len() - 1
    }

    pub fn set(&mut self, id: NodeId, node: Node) {
        self.nodes[id] = node;
    }

    pub fn finish(self, players: usize, items: usize, root: NodeId, flags: Flags) -> Result<ProtocolTree> {
        let t = ProtocolTree { players, items, nodes: self.nodes, root, flags };
        t.validate()?;
        Ok(t)
    }
}

impl ProtocolTree {
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn child(&self, id: NodeId, msgs: &[usize]) -> NodeId {
        match &self.nodes[id] {
            Node::Internal { alphabets, children, .. } => children[profile_index(alphabets, msgs)],
            Node::Leaf(_) => panic!("leaf {id} has no children"),
        }
    }

    /// Checks totality, ranges, acyclicity and reachability of every node.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.len() > MAX_NODES {
            return Err(Error::Capability(format!("{} nodes exceeds the cap of {MAX_NODES}", self.nodes.len())));
        }
        if self.root >= self.nodes.len() {
            return Err(Error::Input("root outside node list".into()));
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (id, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Internal { speakers, alphabets, children } => {
                    if speakers.is_empty() || speakers.len() != alphabets.len() {
                        return Err(Error::Input(format!("node {id}: speakers and alphabets disagree")));
                    }
                    if speakers.iter().any(|&p| p >= self.players) || speakers.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::Input(format!("node {id}: speakers must be distinct, sorted players")));
                    }
                    if alphabets.contains(&0) {
                        return Err(Error::Input(format!("node {id}: empty alphabet")));
                    }
                    let want: usize = alphabets.iter().product();
                    if children.len() != want {
                        return Err(Error::Input(format!("node {id}: {} children for {want} profiles", children.len())));
                    }
                    for &c in children {
                        if c >= self.nodes.len() {
                            return Err(Error::Input(format!("node {id}: child {c} missing")));
                        }
                        parents[c] += 1;
                    }
                }
                Node::Leaf(o) => {
                    if o.shares.len() != self.players || o.payments.len() != self.players {
                        return Err(Error::Input(format!("leaf {id}: outcome for wrong player count")));
                    }
                    if !o.is_feasible(self.items) {
                        return Err(Error::Infeasible(format!("leaf {id}")));
                    }
                    for i in 0..self.players {
                        if self.flags.normalized && o.shares[i].is_empty() && o.payments[i] != rat::zero() {
                            return Err(Error::Input(format!("leaf {id}: player {i} pays for nothing in a normalized mechanism")));
                        }
                        if self.flags.no_negative_transfers && o.payments[i] < rat::zero() {
                            return Err(Error::Input(format!("leaf {id}: negative payment")));
                        }
                    }
                }
            }
        }
        if parents[self.root] != 0 {
            return Err(Error::Input("root has a parent".into()));
        }
        for (id, &p) in parents.iter().enumerate() {
            if id != self.root && p != 1 {
                return Err(Error::Input(format!("node {id} has {p} parents")));
            }
        }
        // a single root with in-degree one elsewhere is a forest of one tree
        // plus possible cycles; walking from the root must reach everything
        if self.reachable().len() != self.nodes.len() {
            return Err(Error::Input("some nodes are unreachable or on a cycle".into()));
        }
        Ok(())
    }

    fn reachable(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut seen = vec![false; self.nodes.len()];
        let mut q = VecDeque::from([self.root]);
        seen[self.root] = true;
        while let Some(id) = q.pop_front() {
            out.push(id);
            if let Node::Internal { children, .. } = &self.nodes[id] {
                for &c in children {
                    if !seen[c] {
                        seen[c] = true;
                        q.push_back(c);
                    }
                }
            }
        }
        out
    }

    /// Bits spent at one node: `Σ ⌈log₂|alphabet|⌉` over its speakers.
    pub fn node_bits(&self, id: NodeId) -> u64 {
        match &self.nodes[id] {
            Node::Internal { alphabets, .. } => alphabets.iter().map(|&a| ceil_log2(a as u64) as u64).sum(),
            Node::Leaf(_) => 0,
        }
    }

    /// Largest bit cost over root-to-leaf paths.
    pub fn max_bits(&self) -> u64 {
        let mut best = vec![0u64; self.nodes.len()];
        for &id in self.reachable().iter().rev() {
            if let Node::Internal { children, .. } = &self.nodes[id] {
                best[id] = self.node_bits(id) + children.iter().map(|&c| best[c]).max().unwrap_or(0);
            }
        }
        best[self.root]
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn leaves_under(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(x) = stack.pop() {
            match &self.nodes[x] {
                Node::Leaf(_) => out.push(x),
                Node::Internal { children, .. } => stack.extend(children.iter().rev()),
            }
        }
        out
    }

    pub fn outcome(&self, id: NodeId) -> &Outcome {
        match &self.nodes[id] {
            Node::Leaf(o) => o,
            Node::Internal { .. } => panic!("node {id} is not a leaf"),
        }
    }

    /// Same tree renumbered breadth-first from the root, children in profile
    /// order. Returns the tree and the old-to-new id map.
    pub fn canonical(&self) -> (ProtocolTree, HashMap<NodeId, NodeId>) {
        let order = self.reachable();
        let map: HashMap<NodeId, NodeId> = order.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let nodes = order
            .iter()
            .map(|&old| match &self.nodes[old] {
                Node::Leaf(o) => Node::Leaf(o.clone()),
                Node::Internal { speakers, alphabets, children } => Node::Internal {
                    speakers: speakers.clone(),
                    alphabets: alphabets.clone(),
                    children: children.iter().map(|c| map[c]).collect(),
                },
            })
            .collect();
        (ProtocolTree { players: self.players, items: self.items, nodes, root: 0, flags: self.flags }, map)
    }

    pub fn to_json(&self) -> Value {
        let mut nodes = Vec::new();
        let mut leaves = Vec::new();
        for (id, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Internal { speakers, alphabets, children } => {
                    let kids: serde_json::Map<String, Value> = children
                        .iter()
                        .enumerate()
                        .map(|(k, &c)| {
                            let p = profile_of(alphabets, k).iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
                            (p, json!(c))
                        })
                        .collect();
                    nodes.push(json!({ "id": id, "speakers": speakers, "alphabets": alphabets, "children": kids }));
                }
                Node::Leaf(o) => leaves.push(json!({
                    "id": id,
                    "allocation": o.shares.iter().map(|s| s.to_json()).collect::<Vec<_>>(),
                    "payments": o.payments.iter().map(rat::to_text).collect::<Vec<_>>(),
                })),
            }
        }
        json!({
            "players": self.players,
            "items": self.items,
            "root": self.root,
            "nodes": nodes,
            "leaves": leaves,
            "flags": self.flags,
        })
    }

    pub fn from_json(v: &Value) -> Result<ProtocolTree> {
        #[derive(Deserialize)]
        struct NodeDoc {
            id: usize,
            speakers: Vec<usize>,
            alphabets: Vec<usize>,
            children: BTreeMap<String, usize>,
        }
        #[derive(Deserialize)]
        struct LeafDoc {
            id: usize,
            allocation: Vec<Value>,
            payments: Vec<String>,
        }
        #[derive(Deserialize)]
        struct Doc {
            players: usize,
            items: usize,
            #[serde(default)]
            root: usize,
            nodes: Vec<NodeDoc>,
            leaves: Vec<LeafDoc>,
            #[serde(default)]
            flags: Flags,
        }
        let doc: Doc = serde_json::from_value(v.clone())?;
        let total = doc.nodes.len() + doc.leaves.len();
        if total > MAX_NODES {
            return Err(Error::Capability(format!("{total} nodes exceeds the cap of {MAX_NODES}")));
        }
        let mut slots: Vec<Option<Node>> = vec![None; total];
        for n in doc.nodes {
            let want: usize = n.alphabets.iter().product();
            let mut children = vec![usize::MAX; want];
            for (key, c) in n.children {
                let msgs: Vec<usize> = key
                    .split(',')
                    .map(|s| s.trim().parse::<usize>().map_err(|_| Error::Input(format!("bad profile key {key:?}"))))
                    .collect::<Result<_>>()?;
                if msgs.len() != n.alphabets.len() || msgs.iter().zip(&n.alphabets).any(|(m, a)| m >= a) {
                    return Err(Error::Input(format!("node {}: profile {key:?} outside alphabets", n.id)));
                }
                children[profile_index(&n.alphabets, &msgs)] = c;
            }
            if children.contains(&usize::MAX) {
                return Err(Error::Input(format!("node {}: children map is not total", n.id)));
            }
            put(&mut slots, n.id, Node::Internal { speakers: n.speakers, alphabets: n.alphabets, children })?;
        }
        for l in doc.leaves {
            let shares = l.allocation.iter().map(|s| Share::from_json(s, doc.items)).collect::<Result<Vec<_>>>()?;
            let payments = l.payments.iter().map(|s| rat::parse(s)).collect::<Result<Vec<_>>>()?;
            put(&mut slots, l.id, Node::Leaf(Outcome { shares, payments }))?;
        }
        let nodes = slots
            .into_iter()
            .enumerate()
            .map(|(id, s)| s.ok_or_else(|| Error::Input(format!("node id {id} missing"))))
            .collect::<Result<Vec<_>>>()?;
        let t = ProtocolTree { players: doc.players, items: doc.items, nodes, root: doc.root, flags: doc.flags };
        t.validate()?;
        Ok(t)
    }
}

fn put(slots: &mut [Option<Node>], id: usize, n: Node) -> Result<()> {
    let slot = slots.get_mut(id).ok_or_else(|| Error::Input(format!("node id {id} out of range")))?;
    if slot.is_some() {
        return Err(Error::Input(format!("duplicate node id {id}")));
    }
    *slot = Some(n);
    Ok(())
}

/// A player's plan: the message sent at each node where the player speaks.
pub type Behavior = BTreeMap<NodeId, usize>;

/// `players[i][k]` is the behavior of player `i` with valuation `k` of its domain.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Strategies {
    pub players: Vec<Vec<Behavior>>,
}

/// `players[i]` lists player `i`'s possible valuations.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Domains {
    pub players: Vec<Vec<Valuation>>,
}

impl Strategies {
    pub fn behavior(&self, i: usize, k: usize) -> &Behavior {
        &self.players[i][k]
    }

    pub fn to_json(&self) -> Value {
        let players: Vec<Value> = self
            .players
            .iter()
            .enumerate()
            .map(|(i, bs)| {
                let vals: serde_json::Map<String, Value> = bs
                    .iter()
                    .enumerate()
                    .map(|(k, b)| {
                        let moves: serde_json::Map<String, Value> = b.iter().map(|(n, m)| (n.to_string(), json!(m))).collect();
                        (k.to_string(), Value::Object(moves))
                    })
                    .collect();
                json!({ "player": i, "valuations": vals })
            })
            .collect();
        json!(players)
    }

    pub fn from_json(v: &Value) -> Result<Strategies> {
        #[derive(Deserialize)]
        struct P {
            player: usize,
            valuations: BTreeMap<String, BTreeMap<String, usize>>,
        }
        let docs: Vec<P> = serde_json::from_value(v.clone())?;
        let n = docs.iter().map(|p| p.player + 1).max().unwrap_or(0);
        let mut players = vec![Vec::new(); n];
        for p in docs {
            let mut by_index: BTreeMap<usize, Behavior> = BTreeMap::new();
            for (k, moves) in p.valuations {
                let k: usize = k.parse().map_err(|_| Error::Input(format!("valuation id {k:?} is not an index")))?;
                let b = moves
                    .into_iter()
                    .map(|(node, msg)| Ok((node.parse().map_err(|_| Error::Input(format!("bad node id {node:?}")))?, msg)))
                    .collect::<Result<Behavior>>()?;
                by_index.insert(k, b);
            }
            if by_index.keys().copied().ne(0..by_index.len()) {
                return Err(Error::Input(format!("player {}: valuation ids must be 0..k", p.player)));
            }
            players[p.player] = by_index.into_values().collect();
        }
        Ok(Strategies { players })
    }
}

impl Domains {
    pub fn to_json(&self) -> Value {
        json!({ "players": self.players.iter().map(|d| d.iter().map(|v| v.to_json()).collect::<Vec<_>>()).collect::<Vec<_>>() })
    }

    pub fn from_json(v: &Value) -> Result<Domains> {
        #[derive(Deserialize)]
        struct Doc {
            players: Vec<Vec<Value>>,
        }
        let doc: Doc = serde_json::from_value(v.clone())?;
        let players = doc
            .players
            .iter()
            .map(|d| d.iter().map(Valuation::from_json).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Domains { players })
    }

    /// Number of valuation profiles.
    pub fn profiles(&self) -> usize {
        self.players.iter().map(|d| d.len()).product()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub leaf: NodeId,
    pub outcome: Outcome,
    pub bits: u64,
    pub path: Vec<NodeId>,
}

/// Follows the joint behaviors from the root to a leaf.
pub fn evaluate(tree: &ProtocolTree, behaviors: &[&Behavior]) -> Result<Evaluation> {
    if behaviors.len() != tree.players {
        return Err(Error::Dimension(format!("{} behaviors for {} players", behaviors.len(), tree.players)));
    }
    let mut id = tree.root;
    let mut bits = 0;
    let mut path = vec![id];
    loop {
        match &tree.nodes[id] {
            Node::Leaf(o) => return Ok(Evaluation { leaf: id, outcome: o.clone(), bits, path }),
            Node::Internal { speakers, alphabets, children } => {
                let mut msgs = Vec::with_capacity(speakers.len());
                for (&p, &a) in speakers.iter().zip(alphabets) {
                    let m = *behaviors[p].get(&id).ok_or(Error::IncompleteStrategy { player: p, node: id })?;
                    if m >= a {
                        return Err(Error::Input(format!("player {p} sends {m} at node {id}, alphabet has {a}")));
                    }
                    msgs.push(m);
                }
                bits += tree.node_bits(id);
                id = children[profile_index(alphabets, &msgs)];
                path.push(id);
            }
        }
    }
}

/// Outcome reached when every player follows its strategy for `profile`.
pub fn play(tree: &ProtocolTree, strat: &Strategies, profile: &[usize]) -> Result<Evaluation> {
    let bs: Vec<&Behavior> = profile.iter().enumerate().map(|(i, &k)| &strat.players[i][k]).collect();
    evaluate(tree, &bs)
}

/// Iterates all valuation-index profiles of `sizes` in lexicographic order.
pub fn profiles(sizes: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = if sizes.contains(&0) { 0 } else { sizes.iter().product() };
    (0..total).map(move |mut idx| {
        let mut out = vec![0; sizes.len()];
        for k in (0..sizes.len()).rev() {
            out[k] = idx % sizes[k];
            idx /= sizes[k];
        }
        out
    })
}

/// Drops never-sent messages and collapses nodes where nobody's message
/// depends on the valuation.
///
/// Speakers left with a single message stop speaking at that node; a node
/// left with no speakers is replaced by its only child. Returns the canonical
/// (breadth-first numbered) tree with the matching strategies.
pub fn minimize(tree: &ProtocolTree, strat: &Strategies, doms: &Domains) -> Result<(ProtocolTree, Strategies)> {
    check_shapes(tree, strat, doms)?;
    let mut out = TreeBuilder::new();
    let mut new_strat: Vec<Vec<Behavior>> = doms.players.iter().map(|d| vec![Behavior::new(); d.len()]).collect();
    let all: Vec<Vec<usize>> = doms.players.iter().map(|d| (0..d.len()).collect()).collect();
    let root = shrink(tree, strat, tree.root, all, &mut out, &mut new_strat)?;
    let raw = ProtocolTree { players: tree.players, items: tree.items, nodes: out.nodes, root, flags: tree.flags };
    let (canon, map) = raw.canonical();
    let strategies = Strategies {
        players: new_strat
            .into_iter()
            .map(|bs| bs.into_iter().map(|b| b.into_iter().map(|(n, m)| (map[&n], m)).collect()).collect())
            .collect(),
    };
    Ok((canon, strategies))
}

fn check_shapes(tree: &ProtocolTree, strat: &Strategies, doms: &Domains) -> Result<()> {
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

fn sent(strat: &Strategies, i: usize, k: usize, node: NodeId) -> Result<usize> {
    strat.players[i][k].get(&node).copied().ok_or(Error::IncompleteStrategy { player: i, node })
}

fn shrink(
    tree: &ProtocolTree,
    strat: &Strategies,
    mut id: NodeId,
    consistent: Vec<Vec<usize>>,
    out: &mut TreeBuilder,
    new_strat: &mut [Vec<Behavior>],
) -> Result<NodeId> {
    loop {
        let (speakers, alphabets, children) = match &tree.nodes[id] {
            Node::Leaf(o) => {
                out.nodes.push(Node::Leaf(o.clone()));
                return Ok(out.nodes.len() - 1);
            }
            Node::Internal { speakers, alphabets, children } => (speakers, alphabets, children),
        };
        let mut used: Vec<Vec<usize>> = Vec::with_capacity(speakers.len());
        for &p in speakers {
            let mut s = BTreeSet::new();
            for &k in &consistent[p] {
                s.insert(sent(strat, p, k, id)?);
            }
            used.push(s.into_iter().collect());
        }
        if used.iter().all(|u| u.len() == 1) {
            let msgs: Vec<usize> = used.iter().map(|u| u[0]).collect();
            id = children[profile_index(alphabets, &msgs)];
            continue;
        }
        let live: Vec<usize> = (0..speakers.len()).filter(|&k| used[k].len() > 1).collect();
        let new_speakers: Vec<usize> = live.iter().map(|&k| speakers[k]).collect();
        let new_alph: Vec<usize> = live.iter().map(|&k| used[k].len()).collect();
        let me = out.reserve();
        for &k in &live {
            let p = speakers[k];
            for &v in &consistent[p] {
                let m = sent(strat, p, v, id)?;
                let pos = used[k].iter().position(|&x| x == m).expect("sent message recorded");
                new_strat[p][v].insert(me, pos);
            }
        }
        let total: usize = new_alph.iter().product();
        let mut kids = Vec::with_capacity(total);
        for idx in 0..total {
            let reduced = profile_of(&new_alph, idx);
            let mut msgs: Vec<usize> = used.iter().map(|u| u[0]).collect();
            for (j, &k) in live.iter().enumerate() {
                msgs[k] = used[k][reduced[j]];
            }
            let mut next = consistent.clone();
            for (j, &k) in live.iter().enumerate() {
                let p = speakers[k];
                let want = used[k][reduced[j]];
                next[p] = consistent[p].iter().copied().filter(|&v| strat.players[p][v].get(&id) == Some(&want)).collect();
            }
            let c = shrink(tree, strat, children[profile_index(alphabets, &msgs)], next, out, new_strat)?;
            kids.push(c);
        }
        out.set(me, Node::Internal { speakers: new_speakers, alphabets: new_alph, children: kids });
        return Ok(me);
    }
}

/// Player `player`'s view at `base` with the other speakers' messages fixed.
#[derive(Clone, Debug)]
pub struct InducedTree<'a> {
    pub tree: &'a ProtocolTree,
    pub base: NodeId,
    pub player: usize,
    /// Messages of the other speakers at `base`, in speaker order.
    pub others: Vec<usize>,
    /// `(message of player, subtree root)` for every message of the player.
    pub subtrees: Vec<(usize, NodeId)>,
}

/// The induced tree of `player` at `base` given the others' messages `others`.
pub fn induced_tree<'a>(tree: &'a ProtocolTree, base: NodeId, player: usize, others: &[usize]) -> Result<InducedTree<'a>> {
    let Node::Internal { speakers, alphabets, children } = &tree.nodes[base] else {
        return Err(Error::NotASpeaker { player, node: base });
    };
    let pos = speakers.iter().position(|&p| p == player).ok_or(Error::NotASpeaker { player, node: base })?;
    if others.len() + 1 != speakers.len() {
        return Err(Error::Dimension(format!("{} opponent messages for {} other speakers", others.len(), speakers.len() - 1)));
    }
    let mut msgs: Vec<usize> = Vec::with_capacity(speakers.len());
    let mut it = others.iter();
    for k in 0..speakers.len() {
        if k == pos {
            msgs.push(0);
        } else {
            let m = *it.next().expect("length checked");
            if m >= alphabets[k] {
                return Err(Error::Input(format!("message {m} outside alphabet at node {base}")));
            }
            msgs.push(m);
        }
    }
    let subtrees = (0..alphabets[pos])
        .map(|z| {
            msgs[pos] = z;
            (z, children[profile_index(alphabets, &msgs)])
        })
        .collect();
    Ok(InducedTree { tree, base, player, others: others.to_vec(), subtrees })
}

/// Every opponent message profile at `base` for `player`.
pub fn opponent_profiles(tree: &ProtocolTree, base: NodeId, player: usize) -> Vec<Vec<usize>> {
    let Node::Internal { speakers, alphabets, .. } = &tree.nodes[base] else { return vec![] };
    let sizes: Vec<usize> = speakers.iter().zip(alphabets).filter(|(&p, _)| p != player).map(|(_, &a)| a).collect();
    profiles(&sizes).collect()
}

/// One leaf as seen by the induced tree's player.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewLeaf {
    pub subtree: usize,
    pub leaf: NodeId,
    pub share: Share,
    pub price: Rat,
}

impl InducedTree<'_> {
    pub fn leaves(&self) -> Vec<ViewLeaf> {
        let mut out = Vec::new();
        for (k, &(_, root)) in self.subtrees.iter().enumerate() {
            for leaf in self.tree.leaves_under(root) {
                let o = self.tree.outcome(leaf);
                out.push(ViewLeaf { subtree: k, leaf, share: o.shares[self.player], price: o.payments[self.player].clone() });
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UniquenessReport {
    Ok,
    Violation { share: Share, low: Rat, high: Rat, leaves: (NodeId, NodeId) },
}

/// A share that appears in two different subtrees must carry one price
/// across the whole induced tree.
pub fn check_payment_uniqueness(it: &InducedTree) -> UniquenessReport {
    let mut by_share: BTreeMap<Share, Vec<ViewLeaf>> = BTreeMap::new();
    for l in it.leaves() {
        by_share.entry(l.share).or_default().push(l);
    }
    for (share, ls) in by_share {
        let subtrees: BTreeSet<usize> = ls.iter().map(|l| l.subtree).collect();
        if subtrees.len() < 2 {
            continue;
        }
        let lo = ls.iter().min_by(|a, b| a.price.cmp(&b.price).then(a.leaf.cmp(&b.leaf))).expect("non-empty");
        let hi = ls.iter().max_by(|a, b| a.price.cmp(&b.price).then(b.leaf.cmp(&a.leaf))).expect("non-empty");
        if lo.price != hi.price {
            return UniquenessReport::Violation { share, low: lo.price.clone(), high: hi.price.clone(), leaves: (lo.leaf, hi.leaf) };
        }
    }
    UniquenessReport::Ok
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ContainmentReport {
    Ok,
    Violation { smaller: ViewLeaf, larger: ViewLeaf },
}

/// If `S` appears in one subtree at `p` and a superset in another at `p'`,
/// then `p' ≥ p`.
pub fn check_containment(it: &InducedTree) -> ContainmentReport {
    let ls = it.leaves();
    for a in &ls {
        for b in &ls {
            if a.subtree != b.subtree && b.share.covers(&a.share) && b.price < a.price {
                return ContainmentReport::Violation { smaller: a.clone(), larger: b.clone() };
            }
        }
    }
    ContainmentReport::Ok
}

/// Lowest price over leaves whose share contains `s`.
pub fn minimal_price(it: &InducedTree, s: &Share) -> Option<Rat> {
    it.leaves().into_iter().filter(|l| l.share.covers(s)).map(|l| l.price).min()
}

/// Whether the player can force a share containing `s` at price at most `p`.
///
/// Backward induction: at the base the player picks a message; below, nodes
/// where the player speaks take OR over its messages of AND over the others'
/// profiles, and other nodes take AND over all profiles.
pub fn is_decisive(it: &InducedTree, s: &Share, p: &Rat) -> bool {
    let mut memo = HashMap::new();
    it.subtrees.iter().any(|&(_, root)| forced(it.tree, it.player, root, &mut memo, &|o: &Outcome| {
        o.shares[it.player].covers(s) && o.payments[it.player] <= *p
    }))
}

/// Whether `player` can force a leaf satisfying `good` from `id` on.
pub fn forced(
    tree: &ProtocolTree,
    player: usize,
    id: NodeId,
    memo: &mut HashMap<NodeId, bool>,
    good: &dyn Fn(&Outcome) -> bool,
) -> bool {
    if let Some(&b) = memo.get(&id) {
        return b;
    }
    let r = match &tree.nodes[id] {
        Node::Leaf(o) => good(o),
        Node::Internal { speakers, alphabets, children } => match speakers.iter().position(|&q| q == player) {
            None => children.iter().all(|&c| forced(tree, player, c, memo, good)),
            Some(pos) => (0..alphabets[pos]).any(|z| {
                children
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| profile_of(alphabets, *k)[pos] == z)
                    .all(|(_, &c)| forced(tree, player, c, memo, good))
            }),
        },
    };
    memo.insert(id, r);
    r
}

/// Shares in the induced tree that are decisive at their minimal price.
pub fn decisive_shares(it: &InducedTree) -> Vec<(Share, Rat)> {
    let shares: BTreeSet<Share> = it.leaves().into_iter().map(|l| l.share).collect();
    let mut out = Vec::new();
    for s in shares {
        if let Some(p) = minimal_price(it, &s) {
            if is_decisive(it, &s, &p) {
                out.push((s, p));
            }
        }
    }
    out
}

/// Best profit the player can lock in: `max v(S) - p_S` over shares decisive
/// at their minimal price, or `None` when no share is decisive.
pub fn guaranteed_profit(it: &InducedTree, v: &Valuation) -> Option<Rat> {
    decisive_shares(it).into_iter().map(|(s, p)| s.value(v) - p).max()
}

/// Nodes where `player` first sends a message that depends on its valuation.
pub fn first_nontrivial_vertices(tree: &ProtocolTree, strat: &Strategies, player: usize) -> Vec<NodeId> {
    let mut out = Vec::new();
    let mut stack = vec![tree.root];
    while let Some(id) = stack.pop() {
        let Node::Internal { speakers, children, .. } = &tree.nodes[id] else { continue };
        if speakers.contains(&player) {
            let msgs: BTreeSet<Option<&usize>> = strat.players[player].iter().map(|b| b.get(&id)).collect();
            if msgs.len() > 1 {
                out.push(id);
                continue;
            }
        }
        stack.extend(children.iter().rev());
    }
    out.sort_unstable();
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpecialSubtree {
    pub player: usize,
    pub vertex: NodeId,
    pub others: Vec<usize>,
    /// The player's message leading to the one subtree allowed non-decisive leaves.
    pub message: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SemiSimReport {
    Ok(Vec<SpecialSubtree>),
    Violation { player: usize, vertex: NodeId, others: Vec<usize>, messages: (usize, usize), leaves: (NodeId, NodeId) },
}

/// At each player's first valuation-dependent vertex and every profile of
/// the others, at most one subtree may hold leaves whose share is not
/// decisive at its minimal price.
pub fn check_semi_simultaneous(tree: &ProtocolTree, strat: &Strategies, doms: &Domains) -> Result<SemiSimReport> {
    check_shapes(tree, strat, doms)?;
    let mut map = Vec::new();
    for player in 0..tree.players {
        for vertex in first_nontrivial_vertices(tree, strat, player) {
            for others in opponent_profiles(tree, vertex, player) {
                let it = induced_tree(tree, vertex, player, &others)?;
                let good: BTreeSet<Share> = decisive_shares(&it).into_iter().map(|(s, _)| s).collect();
                let mut bad: Vec<(usize, NodeId)> = Vec::new();
                for (k, &(z, root)) in it.subtrees.iter().enumerate() {
                    let first_bad = tree
                        .leaves_under(root)
                        .into_iter()
                        .find(|&l| !good.contains(&tree.outcome(l).shares[player]));
                    if let Some(l) = first_bad {
                        bad.push((k, l));
                        let _ = z;
                    }
                }
                match bad.as_slice() {
                    [] => map.push(SpecialSubtree { player, vertex, others, message: None }),
                    [(k, _)] => map.push(SpecialSubtree { player, vertex, others, message: Some(it.subtrees[*k].0) }),
                    [(k1, l1), (k2, l2), ..] => {
                        return Ok(SemiSimReport::Violation {
                            player,
                            vertex,
                            others,
                            messages: (it.subtrees[*k1].0, it.subtrees[*k2].0),
                            leaves: (*l1, *l2),
                        })
                    }
                }
            }
        }
    }
    Ok(SemiSimReport::Ok(map))
}
