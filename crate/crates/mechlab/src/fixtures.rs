//! Small demonstration mechanisms with their domains and strategies.
//!
//! Every constructor returns `(tree, strategies, domains)`; player indices
//! are zero-based, so "player 1" of the usual second-price story is player 0.

use crate::bundle::Bundle;
use crate::protocol::{Behavior, Domains, Flags, Node, NodeId, Outcome, ProtocolTree, Share, Strategies, TreeBuilder};
use crate::rat::{int, zero, Rat};
use crate::valuation::Valuation;

pub type Fixture = (ProtocolTree, Strategies, Domains);

const CLEAN: Flags = Flags { normalized: true, no_negative_transfers: true };

pub fn item_share() -> Share {
    Share::Items(Bundle::full(1))
}

fn no_item() -> Share {
    Share::Items(Bundle::empty(1))
}

/// Nobody gets anything, nobody pays.
pub fn nobody(players: usize, items: usize) -> Outcome {
    Outcome { shares: vec![Share::Items(Bundle::empty(items)); players], payments: vec![zero(); players] }
}

/// Each of `players` values the single item at `0..levels`.
pub fn single_item_domains(players: usize, levels: usize) -> Domains {
    Domains { players: vec![(0..levels).map(|v| Valuation::additive(vec![int(v as i64)])).collect(); players] }
}

fn one_item_to(winner: usize, players: usize, price: Rat) -> Outcome {
    let mut o = nobody(players, 1);
    o.shares[winner] = item_share();
    o.payments[winner] = price;
    o
}

/// Highest bid wins (ties to the lower index) and pays its own bid.
pub fn first_price_outcome(bids: &[usize]) -> Outcome {
    let w = (0..bids.len()).rev().max_by_key(|&i| bids[i]).expect("some bidder");
    one_item_to(w, bids.len(), int(bids[w] as i64))
}

/// Highest bid wins (ties to the lower index) and pays the best other bid.
pub fn second_price_outcome(bids: &[usize]) -> Outcome {
    let w = (0..bids.len()).rev().max_by_key(|&i| bids[i]).expect("some bidder");
    let second = (0..bids.len()).filter(|&i| i != w).map(|i| bids[i]).max().unwrap_or(0);
    one_item_to(w, bids.len(), int(second as i64))
}

/// A lone buyer reporting `report` gets the item at `price` iff `report ≥ price`.
pub fn posted_price_outcome(report: usize, price: usize) -> Outcome {
    if report >= price {
        one_item_to(0, 1, int(price as i64))
    } else {
        nobody(1, 1)
    }
}

/// A lone buyer always gets the item and pays its report.
pub fn pay_your_value(report: usize) -> Outcome {
    one_item_to(0, 1, int(report as i64))
}

/// Everybody speaks once, at the same time, naming its valuation index.
pub fn direct_tree(items: usize, domains: &Domains, flags: Flags, f: impl Fn(&[usize]) -> Outcome) -> crate::Result<(ProtocolTree, Strategies)> {
    let sizes: Vec<usize> = domains.players.iter().map(|d| d.len()).collect();
    let mut b = TreeBuilder::new();
    let root = b.reserve();
    let kids: Vec<NodeId> = crate::protocol::profiles(&sizes).map(|p| { let o = f(&p); b.leaf(o.shares, o.payments) }).collect();
    let players: Vec<usize> = (0..sizes.len()).collect();
    b.set(root, Node::Internal { speakers: players.clone(), alphabets: sizes.clone(), children: kids });
    let tree = b.finish(sizes.len(), items, root, flags)?;
    let strat = Strategies { players: sizes.iter().map(|&s| (0..s).map(|k| Behavior::from([(root, k)])).collect()).collect() };
    Ok((tree, strat))
}

pub fn single_leaf() -> Fixture {
    let mut b = TreeBuilder::new();
    let l = b.leaf(vec![no_item(), no_item()], vec![zero(), zero()]);
    let t = b.finish(2, 1, l, CLEAN).expect("valid");
    let doms = single_item_domains(2, 2);
    (t, Strategies { players: vec![vec![Behavior::new(); 2]; 2] }, doms)
}

/// Sealed-bid second price, one item, two bidders, bids and values `0..levels`.
/// For one item this is also the VCG mechanism.
pub fn sealed_second_price(levels: usize) -> Fixture {
    let doms = single_item_domains(2, levels);
    let (t, s) = direct_tree(1, &doms, CLEAN, second_price_outcome).expect("valid");
    (t, s, doms)
}

fn serial_tree(first: usize, second: usize) -> (ProtocolTree, Vec<NodeId>) {
    let mut b = TreeBuilder::new();
    let root = b.reserve();
    let mut mids = Vec::new();
    for b1 in 0..first {
        let leaves: Vec<NodeId> = (0..second)
            .map(|b2| {
                // ties go to the first mover
                let o = if b1 >= b2 { one_item_to(0, 2, int(b2 as i64)) } else { one_item_to(1, 2, int(b1 as i64)) };
                b.leaf(o.shares, o.payments)
            })
            .collect();
        mids.push(b.internal(vec![1], vec![second], leaves));
    }
    b.set(root, Node::Internal { speakers: vec![0], alphabets: vec![first], children: mids.clone() });
    (b.finish(2, 1, root, CLEAN).expect("valid"), mids)
}

fn serial_strategies(root: NodeId, mids: &[NodeId], first_values: &[usize], second_values: usize) -> Strategies {
    Strategies {
        players: vec![
            first_values.iter().map(|&v| Behavior::from([(root, v)])).collect(),
            (0..second_values).map(|v| mids.iter().map(|&n| (n, v)).collect()).collect(),
        ],
    }
}

/// Second price run in turns: player 0 bids first (bids `0..=11`, value 10),
/// then player 1 sees that bid and bids in `0..=9`.
pub fn serial_second_price() -> Fixture {
    let (t, mids) = serial_tree(12, 10);
    let doms = Domains {
        players: vec![
            vec![Valuation::additive(vec![int(10)])],
            (0..10).map(|v| Valuation::additive(vec![int(v)])).collect(),
        ],
    };
    let s = serial_strategies(t.root, &mids, &[10], 10);
    (t, s, doms)
}

/// A serial second price small enough for the exhaustive oracle: values
/// `0..levels` for both, player 0 may overbid by one.
pub fn small_serial_second_price(levels: usize) -> Fixture {
    let (t, mids) = serial_tree(levels + 1, levels);
    let doms = single_item_domains(2, levels);
    let s = serial_strategies(t.root, &mids, &(0..levels).collect::<Vec<_>>(), levels);
    (t, s, doms)
}

/// The sealed second price behind a round where player 0 always says 0.
pub fn padded_second_price(levels: usize) -> Fixture {
    let doms = single_item_domains(2, levels);
    let mut b = TreeBuilder::new();
    let root = b.reserve();
    let mut copies = Vec::new();
    for _ in 0..2 {
        let kids: Vec<NodeId> = crate::protocol::profiles(&[levels, levels])
            .map(|p| {
                let o = second_price_outcome(&p);
                b.leaf(o.shares, o.payments)
            })
            .collect();
        copies.push(b.internal(vec![0, 1], vec![levels, levels], kids));
    }
    b.set(root, Node::Internal { speakers: vec![0], alphabets: vec![2], children: copies.clone() });
    let t = b.finish(2, 1, root, CLEAN).expect("valid");
    let s = Strategies {
        players: vec![
            (0..levels).map(|v| Behavior::from([(root, 0), (copies[0], v), (copies[1], v)])).collect(),
            (0..levels).map(|v| Behavior::from([(copies[0], v), (copies[1], v)])).collect(),
        ],
    };
    (t, s, doms)
}

/// Two bidders for the bundle of all `items` items. At each price `0..levels`
/// both say drop (0) or stay (1) at once. A lone stayer wins at the current
/// price; if both drop, or both stay at the top price, player 0 wins at the
/// current price. Values are `0..=levels`; the honest plan stays while the
/// value exceeds the price.
pub fn ascending_bundle_auction(items: usize, levels: usize) -> Fixture {
    let grand = Share::Items(Bundle::full(items));
    let empty = Share::Items(Bundle::empty(items));
    let win = |w: usize, p: usize| {
        let mut shares = vec![empty; 2];
        let mut pay = vec![zero(); 2];
        shares[w] = grand;
        pay[w] = int(p as i64);
        (shares, pay)
    };
    let mut b = TreeBuilder::new();
    let stages: Vec<NodeId> = (0..levels).map(|_| b.reserve()).collect();
    for p in 0..levels {
        // profile order: (drop,drop), (drop,stay), (stay,drop), (stay,stay)
        let (s, q) = win(0, p);
        let dd = b.leaf(s, q);
        let (s, q) = win(1, p);
        let ds = b.leaf(s, q);
        let (s, q) = win(0, p);
        let sd = b.leaf(s, q);
        let ss = if p + 1 < levels {
            stages[p + 1]
        } else {
            let (s, q) = win(0, p);
            b.leaf(s, q)
        };
        b.set(stages[p], Node::Internal { speakers: vec![0, 1], alphabets: vec![2, 2], children: vec![dd, ds, sd, ss] });
    }
    let t = b.finish(2, items, stages[0], CLEAN).expect("valid");
    let full = (1usize << items) - 1;
    let doms = Domains {
        players: vec![
            (0..=levels)
                .map(|v| {
                    let mut vals = vec![zero(); 1 << items];
                    vals[full] = int(v as i64);
                    Valuation::table(items, vals).expect("small table")
                })
                .collect();
            2
        ],
    };
    let plan = |v: usize| -> Behavior { stages.iter().enumerate().map(|(p, &n)| (n, usize::from(v > p))).collect() };
    let s = Strategies { players: vec![(0..=levels).map(plan).collect(); 2] };
    (t, s, doms)
}

/// Both players speak at the root with two messages each; player 0 then
/// picks between two leaves in each of the four subtrees.
pub fn figure_one() -> Fixture {
    let mut b = TreeBuilder::new();
    let root = b.reserve();
    let mut kids = Vec::new();
    for k in 0..4usize {
        let give = b.leaf(vec![item_share(), no_item()], vec![int(k as i64), zero()]);
        let keep = b.leaf(vec![no_item(), no_item()], vec![zero(), zero()]);
        kids.push(b.internal(vec![0], vec![2], vec![keep, give]));
    }
    b.set(root, Node::Internal { speakers: vec![0, 1], alphabets: vec![2, 2], children: kids.clone() });
    let t = b.finish(2, 1, root, CLEAN).expect("valid");
    let doms = single_item_domains(2, 2);
    let s = Strategies {
        players: vec![
            (0..2).map(|v| {
                let mut beh = Behavior::from([(root, v)]);
                beh.extend(kids.iter().map(|&n| (n, v)));
                beh
            }).collect(),
            (0..2).map(|v| Behavior::from([(root, v)])).collect(),
        ],
    };
    (t, s, doms)
}

/// Player 0 picks one of two rooms; in either, player 1 then decides whether
/// player 0 gets the item at price 1. Neither room lets player 0 lock in
/// anything, so two subtrees hold undecided leaves.
pub fn undecided_rooms() -> Fixture {
    let mut b = TreeBuilder::new();
    let root = b.reserve();
    let mut rooms = Vec::new();
    for _ in 0..2 {
        let sell = b.leaf(vec![item_share(), no_item()], vec![int(1), zero()]);
        let keep = b.leaf(vec![no_item(), no_item()], vec![zero(), zero()]);
        rooms.push(b.internal(vec![1], vec![2], vec![sell, keep]));
    }
    b.set(root, Node::Internal { speakers: vec![0], alphabets: vec![2], children: rooms.clone() });
    let t = b.finish(2, 1, root, CLEAN).expect("valid");
    let doms = single_item_domains(2, 2);
    let s = Strategies {
        players: vec![
            (0..2).map(|v| Behavior::from([(root, v)])).collect(),
            (0..2).map(|v| rooms.iter().map(|&n| (n, v)).collect()).collect(),
        ],
    };
    (t, s, doms)
}

/// One player, two messages, the item at price 1 or at price 2.
pub fn two_prices_for_one_item() -> Fixture {
    let mut b = TreeBuilder::new();
    let cheap = b.leaf(vec![item_share()], vec![int(1)]);
    let dear = b.leaf(vec![item_share()], vec![int(2)]);
    let root = b.internal(vec![0], vec![2], vec![cheap, dear]);
    let t = b.finish(1, 1, root, CLEAN).expect("valid");
    let doms = single_item_domains(1, 2);
    let s = Strategies { players: vec![(0..2).map(|v| Behavior::from([(root, v)])).collect()] };
    (t, s, doms)
}
