use std::collections::HashSet;

use mechlab::equilibrium::{check_dominant, check_expost, payments_sketch_check, DominanceMode, ExPostReport, SketchReport, SocialChoiceTable};
use mechlab::fixtures::direct_tree;
use mechlab::multiunit::*;
use mechlab::protocol::{Domains, Flags, Outcome, Share};
use mechlab::rat::{frac, int, Rat};
use mechlab::rng;
use rand::Rng;

fn random_concave(m: usize, max: i64, r: &mut rng::Stream) -> MarginalVector {
    let mut marg: Vec<i64> = (0..m).map(|_| r.random_range(0..=max)).collect();
    marg.sort_unstable_by(|a, b| b.cmp(a));
    MarginalVector::from_ints(&marg).unwrap()
}

/// Best split with every item allocated, by scanning all of them.
fn scan_splits(va: &MarginalVector, vb: &MarginalVector) -> Vec<Rat> {
    let m = va.items();
    (0..=m).map(|s| va.value(s) + vb.value(m - s)).collect()
}

#[test]
fn crossing_matches_brute_force() {
    let mut r = rng::stream("mu-suite", 0, "crossing");
    for k in 0..1000 {
        let m = if k < 100 { r.random_range(1..=16) } else { r.random_range(1..=1024) };
        let va = random_concave(m, 1 << 10, &mut r);
        let vb = random_concave(m, 1 << 10, &mut r);
        let c = crossing_optimum(&va, &vb).unwrap();
        let b = brute_optimum(&[va.clone(), vb.clone()]).unwrap();
        assert_eq!(c.welfare, b.welfare, "instance {k}");
        assert_eq!(c.welfare, scan_splits(&va, &vb).into_iter().max().unwrap());
        assert!(within_query_bound(c.queries, m), "instance {k}: {} queries at m = {m}", c.queries);
    }
}

#[test]
fn query_bound_is_exact() {
    // 4·log₂ 1024 + 8 = 48
    assert!(within_query_bound(48, 1024));
    assert!(!within_query_bound(49, 1024));
    // 4·log₂ 3 + 8 ≈ 14.34
    assert!(within_query_bound(14, 3));
    assert!(!within_query_bound(15, 3));
}

#[test]
fn strict_crossing_has_a_unique_maximizer() {
    let mut r = rng::stream("mu-suite", 0, "strict");
    let mut found = 0;
    while found < 1000 {
        let m = r.random_range(2..=40);
        let va = random_concave(m, 1 << 12, &mut r);
        let vb = random_concave(m, 1 << 12, &mut r);
        let s = crossing_optimum(&va, &vb).unwrap().s;
        if check_crossing_conditions(&va, &vb, s).unwrap() != CrossingVerdict::UniqueOptimum {
            continue;
        }
        found += 1;
        let f = scan_splits(&va, &vb);
        for (t, w) in f.iter().enumerate() {
            if t != s {
                assert!(*w < f[s], "split {t} ties the crossing split {s}");
            }
        }
        // leaving items unallocated never helps either
        let e = enumerate_optimum(&[va.clone(), vb.clone(), MarginalVector::zero(m)]).unwrap();
        assert_eq!(e.welfare, f[s]);
    }
}

/// Every non-increasing marginal sequence of length `m` over `levels`.
fn level_domain(m: usize, levels: &[i64]) -> Vec<MarginalVector> {
    fn rec(m: usize, levels: &[i64], cur: &mut Vec<i64>, out: &mut Vec<MarginalVector>) {
        if cur.len() == m {
            out.push(MarginalVector::from_ints(cur).unwrap());
            return;
        }
        for &l in levels {
            if cur.last().is_none_or(|&p| l <= p) {
                cur.push(l);
                rec(m, levels, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(m, levels, &mut Vec::new(), &mut out);
    out
}

fn units_outcome(shares: &[usize], payments: Vec<Rat>) -> Outcome {
    Outcome { shares: shares.iter().map(|&x| Share::Units(x)).collect(), payments }
}

#[test]
fn crossing_vcg_is_expost_on_three_levels() {
    let m = 6;
    let dom = level_domain(m, &[1, 2, 3]);
    assert_eq!(dom.len(), 28);
    let domains = Domains { players: vec![dom.iter().map(|v| v.lift()).collect(); 2] };
    let table = SocialChoiceTable::from_fn(m, domains, |p| {
        let (va, vb) = (&dom[p[0]], &dom[p[1]]);
        let c = crossing_optimum(va, vb)?;
        let pay = vcg_two_player(va, vb, c.s, m - c.s)?;
        Ok(units_outcome(&[c.s, m - c.s], vec![pay.a, pay.b]))
    })
    .unwrap();
    assert_eq!(check_expost(&table), ExPostReport::Ok);
}

#[test]
fn fptas_meets_its_guarantee() {
    let mut r = rng::stream("mu-suite", 0, "fptas");
    let epss = [frac(1, 2), frac(1, 4), frac(1, 8)];
    for k in 0..500 {
        let m = r.random_range(1..=60);
        let n = r.random_range(1..=4);
        let eps = &epss[k % 3];
        let vals: Vec<MarginalVector> = (0..n).map(|_| random_concave(m, 1000, &mut r)).collect();
        let f = fptas_allocate(&vals, eps).unwrap();
        let opt = brute_optimum(&vals).unwrap().welfare;
        assert!(f.allocation.welfare >= (int(1) - eps) * &opt, "instance {k}");
        assert!(f.allocation.shares.iter().sum::<usize>() <= m);
        if let Some(range) = f.range {
            // queries ≤ n·(2m/q + 2)
            assert!(f.queries * range.q <= n * (2 * m + 2 * range.q), "instance {k}");
        } else {
            assert!(f.exact_fallback);
        }
    }
}

#[test]
fn range_vcg_is_dominant_at_eight_units() {
    let m = 8;
    let range = BlockRange::new(m, 2).unwrap();
    let mut r = rng::stream("mu-suite", 0, "range-vcg");
    for n in [2, 3] {
        let per: Vec<Vec<MarginalVector>> = (0..n).map(|_| (0..3).map(|_| random_concave(m, 20, &mut r)).collect()).collect();
        let domains = Domains { players: per.iter().map(|d| d.iter().map(|v| v.lift()).collect()).collect() };
        let (tree, strat) = direct_tree(m, &domains, Flags { normalized: true, no_negative_transfers: true }, |p| {
            let vals: Vec<MarginalVector> = p.iter().enumerate().map(|(i, &k)| per[i][k].clone()).collect();
            let (alloc, pays) = vcg_for_range(&vals, |v| range.optimize(v)).unwrap();
            units_outcome(&alloc.shares, pays)
        })
        .unwrap();
        assert!(check_dominant(&tree, &strat, &domains, DominanceMode::Stitch).unwrap().is_ok(), "n = {n}");
    }
}

fn exact_vcg(va: &MarginalVector, vb: &MarginalVector) -> mechlab::Result<(usize, usize, Rat, Rat)> {
    let c = crossing_optimum(va, vb)?;
    let m = va.items();
    let p = vcg_two_player(va, vb, c.s, m - c.s)?;
    Ok((c.s, m - c.s, p.a, p.b))
}

#[test]
fn payments_are_sketches_on_both_families() {
    let m = 5;
    let mut alice = enumerate_nd(m, 1).unwrap();
    assert_eq!(alice.len(), 432);
    alice.extend(enumerate_d(m, 1).unwrap());
    let report = payments_sketch_check(&exact_vcg, &alice).unwrap();
    assert_eq!(report, SketchReport::Ok { checked: alice.len() * (m - 1) });
    let slack = frac(1, 8 * m as i64);
    for delta in [slack.clone(), -slack.clone(), frac(1, 80), -frac(1, 97)] {
        let nudged = move |va: &MarginalVector, vb: &MarginalVector| {
            let (a, b, pa, pb) = exact_vcg(va, vb)?;
            Ok((a, b, pa, pb + &delta))
        };
        assert!(matches!(payments_sketch_check(&nudged, &alice).unwrap(), SketchReport::Ok { .. }));
    }
    // just beyond the slack the interval check fires
    let far = slack + frac(1, 1000);
    let nudged = move |va: &MarginalVector, vb: &MarginalVector| {
        let (a, b, pa, pb) = exact_vcg(va, vb)?;
        Ok((a, b, pa, pb + &far))
    };
    assert!(matches!(payments_sketch_check(&nudged, &alice).unwrap(), SketchReport::OutsideInterval { .. }));
}

#[test]
fn reconstruction_round_trips_every_value() {
    let m = 5;
    let slack = frac(1, 8 * m as i64);
    let mut all = enumerate_nd(m, 1).unwrap();
    all.extend(enumerate_d(m, 1).unwrap());
    for va in &all {
        for x in 0..m {
            let price = vcg_menu_price(va, m - x);
            for delta in [int(0), slack.clone(), -slack.clone()] {
                let got = reconstruct_value(&(&price + &delta), va.value(m), m).unwrap();
                assert_eq!(Rat::from_integer(got), *va.value(x));
            }
        }
    }
}

#[test]
fn family_sizes() {
    for (m, want) in [(4, 50), (5, 432)] {
        let fam = enumerate_nd(m, 1).unwrap();
        assert_eq!(fam.len(), want);
        assert_eq!(fam.len(), 2 * (m + 1).pow(m as u32 - 2));
        let distinct: HashSet<&MarginalVector> = fam.iter().collect();
        assert_eq!(distinct.len(), want);
        for v in &fam {
            assert!(v.is_concave() && v.is_monotone());
            assert!(v.fits_bit_budget(FAMILY_BIT_FACTOR));
        }
    }
}
