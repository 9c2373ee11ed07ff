use mechlab::bundle::Bundle;
use mechlab::equilibrium::{check_dominant, check_expost, DominanceMode, ExPostReport, SocialChoiceTable};
use mechlab::gs::{welfare_of, AuctionInstance};
use mechlab::protocol::{play, profiles, Domains, Share};
use mechlab::rat::int;
use mechlab::rng;
use mechlab::simultaneous::hard::{binary_optimum, welfare_beyond_specials};
use mechlab::simultaneous::harness::{exact_report, run_simultaneous, silent, top_set_first_come, truncated_report, oracle_cheat};
use mechlab::simultaneous::reduction::{dsic_to_simultaneous, toy, toy_cases};
use mechlab::simultaneous::separation::*;
use mechlab::simultaneous::stats::{frequent_message_stats, Frequency, GroupDistribution};
use mechlab::simultaneous::{gen_hard_general, gen_hard_matroid, GeneralParams, MatroidParams};
use mechlab::valuation::Valuation;
use rand::Rng;

#[test]
fn general_desk_instances_have_the_specialized_optimum() {
    for seed in 0..100 {
        let h = gen_hard_general(&GeneralParams::desk(), seed).unwrap();
        assert_eq!(h.instance.players.len(), 48);
        assert_eq!(h.private.len(), 3);
        for (j, fam) in h.families.iter().enumerate() {
            assert_eq!(fam.len(), 8);
            assert!(fam.iter().all(|s| s.len() == 4));
            assert_eq!(fam[h.special_set[j]], h.private[j]);
            // exactly one bidder of the group values the private block
            let holders = h.groups[j].iter().filter(|&&i| h.instance.players[i].eval(&h.private[j]) == int(1)).count();
            assert_eq!(holders, 1, "seed {seed}, group {j}");
        }
        assert_eq!(welfare_of(&h.instance.players, &h.specialized_allocation()), int(3), "seed {seed}");
    }
}

#[test]
fn general_instances_round_trip_and_regenerate() {
    for seed in [0, 7, 99] {
        let h = gen_hard_general(&GeneralParams::desk(), seed).unwrap();
        let doc = h.to_json();
        let back = AuctionInstance::from_json(&doc).unwrap();
        assert_eq!(back, h.instance);
        assert_eq!(gen_hard_general(&GeneralParams::desk(), seed).unwrap().to_json(), doc);
    }
    let a = gen_hard_general(&GeneralParams::desk(), 1).unwrap();
    let b = gen_hard_general(&GeneralParams::desk(), 2).unwrap();
    assert_ne!(a.instance, b.instance);
}

#[test]
fn matroid_desk_instances_use_every_item() {
    let p = MatroidParams::desk();
    assert_eq!((p.groups, p.group_size, p.block, p.center), (49, 2, 4, 60));
    for seed in 0..100 {
        let h = gen_hard_matroid(&p, seed).unwrap();
        let alloc = h.specialized_allocation().unwrap();
        assert_eq!(welfare_of(&h.instance.players, &alloc), int(256), "seed {seed}");
        for (j, g) in h.groups.iter().enumerate() {
            for &i in g {
                let r = h.instance.players[i].eval(&h.private[j]);
                if i == h.special[j] {
                    assert_eq!(r, int(p.block as i64));
                } else {
                    assert_eq!(r, int(p.b as i64), "seed {seed}: non-special bidder {i} on its block");
                }
            }
        }
    }
}

/// Two disjoint non-private family sets with different owners: the only way
/// the welfare beyond the special bidders can reach 2.
fn disjoint_pair(h: &mechlab::simultaneous::HardGeneral) -> bool {
    let mut sets = Vec::new();
    for (j, fam) in h.families.iter().enumerate() {
        for (k, s) in fam.iter().enumerate() {
            if k != h.special_set[j] {
                sets.push((h.owner[j][k], *s));
            }
        }
    }
    sets.iter().enumerate().any(|(a, (i, s))| sets[a + 1..].iter().any(|(i2, s2)| i != i2 && s.is_disjoint(s2)))
}

#[test]
fn decomposition_measure_matches_a_pairwise_scan() {
    let mut held = 0;
    for s in 0..200u64 {
        let h = gen_hard_general(&GeneralParams::desk(), s).unwrap();
        let beyond = welfare_beyond_specials(&h);
        assert_eq!(beyond >= 2, disjoint_pair(&h), "seed {s}");
        held += usize::from(beyond <= 1);
    }
    println!("decomposition bound held on {held}/200 seeds");
}

fn tiny_instance(seed: u64) -> AuctionInstance {
    let mut r = rng::stream("sim-suite", seed, "tiny");
    let m = 6;
    let players = (0..4)
        .map(|_| {
            let k = r.random_range(1..=3);
            let sets = (0..k).map(|_| Bundle::from_mask(m, r.random_range(1..1u64 << m))).collect();
            Valuation::AnyOf { m, sets }
        })
        .collect();
    AuctionInstance { m, players }
}

/// Independent optimum: every assignment of items to bidders or nobody.
fn brute_opt(inst: &AuctionInstance) -> mechlab::Rat {
    let n = inst.players.len();
    let mut best = int(0);
    for code in 0..(n + 1).pow(inst.m as u32) {
        let mut bs = vec![Bundle::empty(inst.m); n];
        let mut c = code;
        for j in 0..inst.m {
            if c % (n + 1) > 0 {
                bs[c % (n + 1) - 1].insert(j);
            }
            c /= n + 1;
        }
        best = best.max(welfare_of(&inst.players, &bs));
    }
    best
}

#[test]
fn simultaneous_welfare_never_beats_the_optimum() {
    for seed in 0..30 {
        let inst = tiny_instance(seed);
        let opt = brute_opt(&inst);
        assert_eq!(binary_optimum(&inst).unwrap().0, opt);
        assert_eq!(run_simultaneous(&exact_report(6).unwrap(), &inst).unwrap().welfare, opt);
        assert!(run_simultaneous(&top_set_first_come(6).unwrap(), &inst).unwrap().welfare <= opt);
        assert_eq!(run_simultaneous(&silent(4, 6), &inst).unwrap().welfare, int(0));
    }
}

#[test]
fn first_come_on_desk_instances() {
    let alg = top_set_first_come(16).unwrap();
    let mut total = int(0);
    for seed in 0..100 {
        let h = gen_hard_general(&GeneralParams::desk(), seed).unwrap();
        let run = run_simultaneous(&alg, &h.instance).unwrap();
        assert!(run.max_bits <= 17);
        let (opt, _) = binary_optimum(&h.instance).unwrap();
        assert!(opt >= int(3));
        assert!(run.welfare <= opt);
        total += run.welfare / opt;
    }
    println!("first-come mean ratio {}", total / int(100));
}

#[test]
fn frequent_tuples_stay_under_the_bias_bound() {
    let d = GroupDistribution::desk();
    let honest = frequent_message_stats(&truncated_report(1, 4, 8), &d, 10_000, 4, 7, 11).unwrap();
    assert!(honest.own_valuation_only);
    assert!(honest.tuples.iter().any(|t| t.class == Frequency::Frequent));
    assert!(honest.max_biased <= 16, "{}", honest.max_biased);
    assert!(!honest.flagged);
    let cheat = frequent_message_stats(&oracle_cheat(4, 8), &d, 10_000, 4, 7, 11).unwrap();
    assert!(cheat.flagged);
}

fn x_sets() -> Vec<Vec<usize>> {
    vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
}

/// Key singleton at `x`, other singletons 1, half-size bundle `k` at
/// `pattern >> k & 1`, larger bundles at 8.
fn keyed(key: usize, x: i64, pattern: u32) -> Valuation {
    let m = 4;
    let vals = (0..1u64 << m)
        .map(|mask| {
            let s = Bundle::from_mask(m, mask);
            match s.len() {
                0 => int(0),
                1 if s.contains(key) => int(x),
                1 => int(1),
                2 => {
                    let k = x_sets().iter().position(|v| *v == s.to_vec()).unwrap();
                    int(i64::from(pattern >> k & 1))
                }
                _ => int(8),
            }
        })
        .collect();
    Valuation::table(m, vals).unwrap()
}

/// The three rules, written out directly for four items.
fn rules(vals: [&Valuation; 3]) -> [Vec<usize>; 3] {
    let one = |i: usize| Bundle::from_items(4, &[i]).unwrap();
    let xs = x_sets();
    let mut out: [Vec<usize>; 3] = Default::default();
    let idx = |v: &Valuation, i| v.eval(&one(i)).to_integer().try_into().unwrap_or(usize::MAX);
    let low = |v: &Valuation, k: usize| v.eval(&Bundle::from_items(4, &xs[k - 1]).unwrap()) < int(1);
    // c to Charlie
    let k = idx(vals[0], 2);
    if (1..=6).contains(&k) && low(vals[1], k) {
        out[2].push(2);
    }
    // a to Alice
    let k = idx(vals[1], 0);
    if (1..=6).contains(&k) && low(vals[2], k) {
        out[0].push(0);
    }
    // b to Bob
    let k = idx(vals[2], 1);
    if (1..=6).contains(&k) && low(vals[0], k) {
        out[1].push(1);
    }
    out
}

#[test]
fn separation_f_matches_the_three_rules() {
    let patterns = [0u32, 0b111111, 0b101010, 0b010101, 0b001101];
    let per: Vec<Vec<Valuation>> =
        [2, 0, 1].iter().map(|&key| (0..=16).flat_map(|x| patterns.iter().map(move |&p| keyed(key, x, p))).collect()).collect();
    for va in &per[0] {
        for vb in &per[1] {
            for vc in &per[2] {
                let o = separation_f(va, vb, vc, 4).unwrap();
                let want = rules([va, vb, vc]);
                for p in 0..3 {
                    assert_eq!(o.shares[p], Share::Items(Bundle::from_items(4, &want[p]).unwrap()));
                    assert_eq!(o.payments[p], int(0));
                }
            }
        }
    }
}

#[test]
fn separation_run_agrees_with_f_on_larger_universes() {
    let mut r = rng::stream("sim-suite", 0, "separation-run");
    for m in [6, 8] {
        for _ in 0..50 {
            let vals: Vec<Valuation> = (0..3)
                .map(|_| Valuation::table(m, (0..1u64 << m).map(|mask| if mask == 0 { int(0) } else { int(r.random_range(0..=4)) }).collect()).unwrap())
                .collect();
            let (o, bits) = separation_run(&vals[0], &vals[1], &vals[2], m).unwrap();
            assert_eq!(o, separation_f(&vals[0], &vals[1], &vals[2], m).unwrap());
            assert!(bits <= 3 * m as u64 + 6);
            for s in &o.shares {
                let Share::Items(b) = s else { panic!() };
                assert!(b.is_subset(&Bundle::from_items(m, &[0, 1, 2]).unwrap()));
            }
        }
    }
}

#[test]
fn index_reduction_is_index() {
    let mut r = rng::stream("sim-suite", 0, "index");
    let va = keyed(2, 0, 0);
    let a = Share::Items(Bundle::from_items(4, &[ITEM_A]).unwrap());
    for _ in 0..3 {
        let arr: Vec<bool> = (0..6).map(|_| r.random_bool(0.5)).collect();
        for j in 1..=6 {
            let (vc, vb) = index_reduction(&arr, j, 4).unwrap();
            let o = separation_f(&va, &vb, &vc, 4).unwrap();
            assert_eq!(arr[j - 1], o.shares[ALICE] == a, "arr {arr:?}, j {j}");
        }
    }
    assert!(index_reduction(&[true; 6], 0, 4).is_err());
}

fn separation_domain(xs: &[i64], patterns: &[u32]) -> [Vec<Valuation>; 3] {
    [2, 0, 1].map(|key| xs.iter().flat_map(|&x| patterns.iter().map(move |&p| keyed(key, x, p))).collect())
}

#[test]
fn separation_protocol_is_expost_but_not_dominant() {
    let doms = separation_domain(&(0..=8).collect::<Vec<_>>(), &[0b101010, 0b010101]);
    let (tree, strat) = separation_protocol(4, &doms).unwrap();
    assert!(tree.max_bits() <= 18);
    let d = Domains { players: doms.to_vec() };
    let table = SocialChoiceTable::from_tree(&tree, &strat, &d).unwrap();
    assert_eq!(table.outcomes.len(), 18 * 18 * 18);
    for p in profiles(&[18, 18, 18]) {
        let want = separation_f(&d.players[0][p[0]], &d.players[1][p[1]], &d.players[2][p[2]], 4).unwrap();
        assert_eq!(table.outcome(&p), &want);
    }
    assert_eq!(check_expost(&table), ExPostReport::Ok);

    let tiny = separation_domain(&[1, 2], &[0b101010]);
    let (tree, strat) = separation_protocol(4, &tiny).unwrap();
    let d = Domains { players: tiny.to_vec() };
    let report = check_dominant(&tree, &strat, &d, DominanceMode::Stitch).unwrap();
    let cert = report.certificate().expect("the two-phase protocol is not dominant-strategy");
    let (honest, deviating) = cert.replay(&tree, &strat, &d).unwrap();
    assert!(deviating > honest);
}

#[test]
fn reduction_reproduces_special_allocations() {
    for reserve in [false, true] {
        let t = toy(reserve).unwrap();
        let cases = toy_cases(&t).unwrap();
        assert_eq!(cases.len(), 16);
        let good: Vec<_> = cases.iter().filter(|c| c.preconditions).collect();
        assert!(good.len() >= 4, "{} profiles meet the preconditions", good.len());
        for c in &good {
            assert!(c.agrees, "{c:?}");
        }
        for c in &cases {
            // no item twice
            let mut seen = Bundle::empty(3);
            for b in &c.reduction {
                assert!(b.is_disjoint(&seen));
                seen = seen.union(b);
            }
        }
    }
}

#[test]
fn zero_profit_grants_are_refused() {
    let t = toy(true).unwrap();
    let cases = toy_cases(&t).unwrap();
    let refused: Vec<_> = cases.iter().filter(|c| c.notes.iter().any(|n| n.contains("grant refused"))).collect();
    assert!(!refused.is_empty());
    for c in refused {
        assert!(!c.preconditions);
        // bidder 0 is special at weight 1: the mechanism sells it item 0 at its value
        if c.profile[0] == 0 {
            assert_eq!(c.mechanism[0], Bundle::from_items(3, &[0]).unwrap());
            assert!(c.reduction[0].is_empty());
        }
    }
    let o = play(&t.tree, &t.strat, &[0, 3]).unwrap().outcome;
    assert_eq!(o.profit(0, &t.slice.players[0][0].valuation), int(0));
}

#[test]
fn reduction_needs_a_common_vertex() {
    let t = toy(false).unwrap();
    let leaf = t.tree.leaves_under(t.tree.root)[0];
    assert!(dsic_to_simultaneous(&t.tree, &t.strat, &t.slice, leaf, &t.alpha).is_err());
}
