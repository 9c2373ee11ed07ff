//! A three-bidder social choice function with a cheap ex-post protocol and
//! no cheap dominant-strategy one.
//!
//! Alice, Bob and Charlie are players 0, 1, 2; items 0, 1, 2 play the roles
//! of `a`, `b`, `c`. Each bidder's value for one singleton names a half-size
//! bundle by index, and a second bidder's value for that bundle decides
//! whether the third bidder wins its item.

use num_integer::binomial;

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::protocol::{Behavior, Flags, Node, NodeId, Outcome, ProtocolTree, Share, Strategies, TreeBuilder, MAX_NODES};
use crate::rat::{ceil_log2, int, Rat};
use crate::valuation::Valuation;

pub const ITEM_A: usize = 0;
pub const ITEM_B: usize = 1;
pub const ITEM_C: usize = 2;

pub const ALICE: usize = 0;
pub const BOB: usize = 1;
pub const CHARLIE: usize = 2;

/// Per player `p`: the item whose singleton value `p` announces, and the
/// player whose item depends on that announcement.
const ANNOUNCES: [usize; 3] = [ITEM_C, ITEM_A, ITEM_B];

fn check_m(m: usize) -> Result<()> {
    if m < 4 || m % 2 == 1 {
        return Err(Error::Parameter(format!("m = {m}: need an even m of at least 4")));
    }
    if m > 24 {
        return Err(Error::Capability(format!("m = {m}: bundle indices beyond 24 items are not supported")));
    }
    Ok(())
}

/// All bundles of `m/2` items, in lexicographic order of their sorted item
/// lists. Bundle `k` has index `k + 1`.
pub fn half_subsets(m: usize) -> Result<Vec<Bundle>> {
    check_m(m)?;
    let h = m / 2;
    let mut out = Vec::with_capacity(binomial(m, h));
    let mut pick: Vec<usize> = (0..h).collect();
    loop {
        out.push(Bundle::from_items(m, &pick)?);
        let Some(k) = (0..h).rev().find(|&k| pick[k] < m - h + k) else { break };
        pick[k] += 1;
        for l in k + 1..h {
            pick[l] = pick[l - 1] + 1;
        }
    }
    Ok(out)
}

/// 1-based index of a half-size bundle, or `None` for other sizes.
pub fn half_index(s: &Bundle) -> Option<usize> {
    let m = s.universe();
    let h = m / 2;
    if s.len() != h {
        return None;
    }
    // combinatorial number system, lexicographic variant
    let items = s.to_vec();
    let mut rank = 0;
    let mut prev = 0;
    for (k, &x) in items.iter().enumerate() {
        for y in prev..x {
            rank += binomial(m - 1 - y, h - 1 - k);
        }
        prev = x + 1;
    }
    Some(rank + 1)
}

fn integer_value(v: &Valuation, s: &Bundle, who: usize) -> Result<u64> {
    let r = v.eval(s);
    if !r.is_integer() || r < int(0) {
        return Err(Error::Input(format!("player {who} has non-integer or negative value {r} for {s}")));
    }
    u64::try_from(r.to_integer()).map_err(|_| Error::Input(format!("player {who}: value for {s} is too large")))
}

fn check_players(vals: [&Valuation; 3], m: usize) -> Result<()> {
    check_m(m)?;
    for (p, v) in vals.iter().enumerate() {
        if v.items() != m {
            return Err(Error::Dimension(format!("player {p} values {} items, expected {m}", v.items())));
        }
    }
    Ok(())
}

/// The outcome: zero payments, only items `a`, `b`, `c` ever allocated.
pub fn separation_f(va: &Valuation, vb: &Valuation, vc: &Valuation, m: usize) -> Result<Outcome> {
    let vals = [va, vb, vc];
    check_players(vals, m)?;
    let xs = half_subsets(m)?;
    let mut shares = vec![Bundle::empty(m); 3];
    for p in 0..3 {
        // p announces an index, q evaluates the indexed bundle, r may win
        let (q, r) = ((p + 1) % 3, (p + 2) % 3);
        let idx = integer_value(vals[p], &Bundle::from_items(m, &[ANNOUNCES[p]])?, p)? as usize;
        if idx == 0 || idx > xs.len() {
            continue;
        }
        if integer_value(vals[q], &xs[idx - 1], q)? < 1 {
            shares[r].insert(ANNOUNCES[p]);
        }
    }
    Ok(Outcome { shares: shares.into_iter().map(Share::Items).collect(), payments: vec![int(0); 3] })
}

/// Worst-case bits of the two-phase protocol: three values in `0..=2^m`,
/// then one bit each.
pub fn separation_bits(m: usize) -> u64 {
    3 * u64::from(ceil_log2((1u64 << m) + 1)) + 3
}

/// The two-phase protocol as a tree, with the truthful strategies of every
/// listed valuation. The first phase has one child per announced triple, so
/// the tree is explicit only for `m = 4`.
pub fn separation_protocol(m: usize, domains: &[Vec<Valuation>; 3]) -> Result<(ProtocolTree, Strategies)> {
    check_m(m)?;
    let alph = (1usize << m) + 1;
    if alph.pow(3) * 9 + 1 > MAX_NODES {
        return Err(Error::Capability(format!("the explicit protocol at m = {m} has more than {MAX_NODES} nodes")));
    }
    let xs = half_subsets(m)?;
    let k = xs.len();
    let mut b = TreeBuilder::new();
    let root = b.reserve();
    let mut firsts: Vec<NodeId> = Vec::with_capacity(alph.pow(3));
    for code in 0..alph.pow(3) {
        let ann = [code / (alph * alph), code / alph % alph, code % alph];
        let node = b.reserve();
        let mut leaves = Vec::with_capacity(8);
        for bits in 0..8usize {
            let said = [bits >> 2 & 1 == 1, bits >> 1 & 1 == 1, bits & 1 == 1];
            let mut shares = vec![Bundle::empty(m); 3];
            for p in 0..3 {
                let (q, r) = ((p + 1) % 3, (p + 2) % 3);
                if (1..=k).contains(&ann[p]) && said[q] {
                    shares[r].insert(ANNOUNCES[p]);
                }
            }
            leaves.push(b.leaf(shares.into_iter().map(Share::Items).collect(), vec![int(0); 3]));
        }
        b.set(node, Node::Internal { speakers: vec![0, 1, 2], alphabets: vec![2; 3], children: leaves });
        firsts.push(node);
    }
    b.set(root, Node::Internal { speakers: vec![0, 1, 2], alphabets: vec![alph; 3], children: firsts.clone() });
    let tree = b.finish(3, m, root, Flags { normalized: true, no_negative_transfers: true })?;

    let mut players = Vec::with_capacity(3);
    for (q, dom) in domains.iter().enumerate() {
        // q evaluates the bundle announced by p
        let p = (q + 2) % 3;
        let mut plans = Vec::with_capacity(dom.len());
        for v in dom {
            if v.items() != m {
                return Err(Error::Dimension(format!("player {q} values {} items, expected {m}", v.items())));
            }
            let own = integer_value(v, &Bundle::from_items(m, &[ANNOUNCES[q]])?, q)? as usize;
            if own >= alph {
                return Err(Error::Input(format!("player {q} announces {own}, above 2^{m}")));
            }
            let low: Vec<bool> = xs.iter().map(|x| integer_value(v, x, q).map(|y| y < 1)).collect::<Result<_>>()?;
            let mut plan = Behavior::from([(root, own)]);
            for (code, &node) in firsts.iter().enumerate() {
                let idx = [code / (alph * alph), code / alph % alph, code % alph][p];
                let bit = (1..=k).contains(&idx) && low[idx - 1];
                plan.insert(node, usize::from(bit));
            }
            plans.push(plan);
        }
        players.push(plans);
    }
    Ok((tree, Strategies { players }))
}

/// Plays the protocol message by message without building the tree.
/// Returns the outcome and the bits sent.
pub fn separation_run(va: &Valuation, vb: &Valuation, vc: &Valuation, m: usize) -> Result<(Outcome, u64)> {
    let vals = [va, vb, vc];
    check_players(vals, m)?;
    let xs = half_subsets(m)?;
    let width = u64::from(ceil_log2((1u64 << m) + 1));
    let mut ann = [0usize; 3];
    for p in 0..3 {
        let x = integer_value(vals[p], &Bundle::from_items(m, &[ANNOUNCES[p]])?, p)?;
        if x > 1 << m {
            return Err(Error::Input(format!("player {p} announces {x}, above 2^{m}")));
        }
        ann[p] = x as usize;
    }
    let mut said = [false; 3];
    for q in 0..3 {
        let idx = ann[(q + 2) % 3];
        said[q] = (1..=xs.len()).contains(&idx) && integer_value(vals[q], &xs[idx - 1], q)? < 1;
    }
    let mut shares = vec![Bundle::empty(m); 3];
    for p in 0..3 {
        if (1..=xs.len()).contains(&ann[p]) && said[(p + 1) % 3] {
            shares[(p + 2) % 3].insert(ANNOUNCES[p]);
        }
    }
    Ok((Outcome { shares: shares.into_iter().map(Share::Items).collect(), payments: vec![int(0); 3] }, 3 * width + 3))
}

/// Charlie's and Bob's valuations encoding an INDEX instance: Alice wins
/// item `a` exactly when `arr[j - 1]` is set.
///
/// Charlie values half-size bundle `T` at `1 - arr[index(T) - 1]`, smaller
/// bundles at 0 and larger ones at 1. Bob values every bundle holding `a` at
/// `j` and every other nonempty bundle at 1.
pub fn index_reduction(arr: &[bool], j: usize, m: usize) -> Result<(Valuation, Valuation)> {
    check_m(m)?;
    let k = binomial(m, m / 2);
    if arr.len() != k {
        return Err(Error::Dimension(format!("array has {} bits, expected {k}", arr.len())));
    }
    if j == 0 || j > k {
        return Err(Error::Parameter(format!("index {j} outside 1..={k}")));
    }
    let h = m / 2;
    let full = 1u64 << m;
    let mut charlie: Vec<Rat> = Vec::with_capacity(full as usize);
    let mut bob: Vec<Rat> = Vec::with_capacity(full as usize);
    for mask in 0..full {
        let s = Bundle::from_mask(m, mask);
        charlie.push(match s.len().cmp(&h) {
            std::cmp::Ordering::Less => int(0),
            std::cmp::Ordering::Greater => int(1),
            std::cmp::Ordering::Equal => int(i64::from(!arr[half_index(&s).expect("half size") - 1])),
        });
        bob.push(if s.contains(ITEM_A) {
            int(j as i64)
        } else if s.is_empty() {
            int(0)
        } else {
            int(1)
        });
    }
    Ok((Valuation::table(m, charlie)?, Valuation::table(m, bob)?))
}
