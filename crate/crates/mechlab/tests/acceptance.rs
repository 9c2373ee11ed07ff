//! Acceptance run. Prints one PASS/FAIL line per criterion, with the clause
//! that failed and the measured value. Runs without the libtest harness so
//! the lines show up in plain `cargo test` output.

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mechlab::bundle::Bundle;
use mechlab::equilibrium::*;
use mechlab::fixtures::{self, direct_tree, Fixture};
use mechlab::gs::*;
use mechlab::matroid::{sample_rank_profile, verify_matroid_axioms, AxiomMode, AxiomReport, ProfileParams, RankProfileMatroid, DEFAULT_RETRIES};
use mechlab::multiunit::*;
use mechlab::protocol::*;
use mechlab::rat::{frac, int, pow, Rat};
use mechlab::rng;
use mechlab::simultaneous::hard::{binary_optimum, welfare_beyond_specials};
use mechlab::simultaneous::harness::{oracle_cheat, truncated_report};
use mechlab::simultaneous::reduction::{toy, toy_cases};
use mechlab::simultaneous::separation::*;
use mechlab::simultaneous::stats::{frequent_message_stats, Frequency, GroupDistribution};
use mechlab::simultaneous::{gen_hard_general, gen_hard_matroid, GeneralParams, MatroidParams};
use mechlab::valuation::Valuation;
use rand::Rng;

type Check = Result<(), String>;

/// Clauses measured and known to miss their threshold at desk scale. Each one
/// must still fail: a pass here means the list is stale.
const KNOWN_FAILURES: &[(u8, &str)] = &[(10, "welfare decomposition")];

struct Criterion {
    id: u8,
    title: &'static str,
    limit: Option<Duration>,
    run: fn() -> Vec<(&'static str, Check)>,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T>(r: mechlab::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Runs one clause, turning a panic into a failure.
fn clause(name: &'static str, f: impl FnOnce() -> Check) -> (&'static str, Check) {
    let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    (name, r)
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, title: "Vickrey demo", limit: secs(1), run: vickrey_demo },
        Criterion { id: 2, title: "exact multi-unit optimum", limit: secs(60), run: exact_multi_unit },
        Criterion { id: 3, title: "crossing split uniqueness", limit: None, run: crossing_uniqueness },
        Criterion { id: 4, title: "FPTAS", limit: secs(300), run: fptas },
        Criterion { id: 5, title: "payments as sketches", limit: secs(120), run: payment_sketches },
        Criterion { id: 6, title: "family cardinality", limit: None, run: family_cardinality },
        Criterion { id: 7, title: "gross substitutes", limit: secs(600), run: gross_substitutes },
        Criterion { id: 8, title: "protocol calculus", limit: secs(120), run: protocol_calculus },
        Criterion { id: 9, title: "matroid construction", limit: None, run: matroid_construction },
        Criterion { id: 10, title: "hard distributions", limit: secs(300), run: hard_distributions },
        Criterion { id: 11, title: "frequent messages", limit: None, run: frequent_messages },
        Criterion { id: 12, title: "separation construction", limit: secs(120), run: separation },
        Criterion { id: 13, title: "simultaneous reduction", limit: secs(60), run: reduction },
    ];
    // keep panics from failed clauses out of the report
    std::panic::set_hook(Box::new(|_| {}));
    let mut unexpected = 0;
    for c in &criteria {
        let start = Instant::now();
        let mut clauses = (c.run)();
        let took = start.elapsed();
        if let Some(limit) = c.limit {
            clauses.push(("time limit", ensure(took <= limit, || format!("{:.1} s over {} s", took.as_secs_f64(), limit.as_secs()))));
        }
        let failed: Vec<_> = clauses.iter().filter(|(_, r)| r.is_err()).collect();
        let verdict = if failed.is_empty() { "PASS" } else { "FAIL" };
        println!("{verdict} {:>2} {} ({} clauses, {:.2} s)", c.id, c.title, clauses.len(), took.as_secs_f64());
        for (name, r) in &clauses {
            let known = KNOWN_FAILURES.contains(&(c.id, *name));
            match r {
                Err(e) if known => println!("       {name}: {e} [known, see decisions ledger]"),
                Err(e) => {
                    unexpected += 1;
                    println!("       {name}: {e}");
                }
                Ok(()) if known => {
                    unexpected += 1;
                    println!("       {name}: passed but is listed as a known failure");
                }
                Ok(()) => {}
            }
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} unexpected clause results");
        ExitCode::FAILURE
    }
}

fn vickrey_demo() -> Vec<(&'static str, Check)> {
    vec![
        clause("sealed second price is dominant", || {
            let (t, s, d) = fixtures::sealed_second_price(4);
            ensure(d.players.iter().all(|p| p.len() == 4), || "bids are not 0..3".into())?;
            for mode in [DominanceMode::Stitch, DominanceMode::Oracle { budget: ORACLE_BUDGET }] {
                ensure(ok(check_dominant(&t, &s, &d, mode))?.is_ok(), || format!("{mode:?} found a violation"))?;
            }
            Ok(())
        }),
        clause("serial certificate", || {
            let (t, s, d) = fixtures::serial_second_price();
            let report = ok(check_dominant(&t, &s, &d, DominanceMode::Pruned))?;
            let c = report.certificate().ok_or("no violation found")?;
            ensure(c.player == 0 && c.node == t.root, || format!("player {} at node {}", c.player, c.node))?;
            ensure((c.honest_profit.clone(), c.deviating_profit.clone()) == (int(1), int(10)), || {
                format!("profits {} vs {}", c.honest_profit, c.deviating_profit)
            })?;
            // opponent: 9 right after a bid of 10, 0 everywhere else
            let after_ten = t.child(t.root, &[10]);
            let mut said_nine = false;
            for (node, msgs) in &c.opponents {
                for &(p, msg) in msgs {
                    let want = if *node == after_ten { 9 } else { 0 };
                    ensure(p == 1 && msg == want, || format!("opponent says {msg} at node {node}"))?;
                    said_nine |= *node == after_ten;
                }
            }
            ensure(said_nine, || "the opponent plan never answers a bid of 10".into())?;
            let replayed = ok(c.replay(&t, &s, &d))?;
            ensure(replayed == (int(1), int(10)), || format!("replay gives {replayed:?}"))
        }),
    ]
}

fn random_concave(m: usize, max: i64, r: &mut rng::Stream) -> MarginalVector {
    let mut marg: Vec<i64> = (0..m).map(|_| r.random_range(0..=max)).collect();
    marg.sort_unstable_by(|a, b| b.cmp(a));
    MarginalVector::from_ints(&marg).unwrap()
}

/// `queries ≤ 4·log₂ m + 8`, compared as `2^(queries − 8) ≤ m⁴`.
fn under_log_bound(queries: usize, m: usize) -> bool {
    queries <= 8 || (queries - 8 < 120 && 1u128 << (queries - 8) <= (m as u128).pow(4))
}

fn units_outcome(shares: &[usize], payments: Vec<Rat>) -> Outcome {
    Outcome { shares: shares.iter().map(|&x| Share::Units(x)).collect(), payments }
}

/// Every non-increasing marginal sequence of length `m` over `levels`.
fn level_domain(m: usize, levels: &[i64]) -> Vec<MarginalVector> {
    let mut seqs: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..m {
        let mut next = Vec::new();
        for cur in &seqs {
            for &l in levels.iter().filter(|&&l| cur.last().is_none_or(|&p| l <= p)) {
                next.push([cur.as_slice(), &[l]].concat());
            }
        }
        seqs = next;
    }
    seqs.iter().map(|v| MarginalVector::from_ints(v).unwrap()).collect()
}

fn exact_multi_unit() -> Vec<(&'static str, Check)> {
    vec![
        clause("crossing equals brute force", || {
            let mut r = rng::stream("acceptance", 2, "crossing");
            let mut worst = 0;
            for k in 0..1000 {
                let m = r.random_range(1..=1024);
                let va = random_concave(m, 1 << 10, &mut r);
                let vb = random_concave(m, 1 << 10, &mut r);
                let c = ok(crossing_optimum(&va, &vb))?;
                let b = ok(brute_optimum(&[va.clone(), vb.clone()]))?;
                ensure(c.welfare == b.welfare, || format!("instance {k}: {} vs {}", c.welfare, b.welfare))?;
                ensure(under_log_bound(c.queries, m), || format!("instance {k}: {} queries at m = {m}", c.queries))?;
                worst = worst.max(c.queries);
            }
            println!("       most value queries on one instance: {worst}");
            Ok(())
        }),
        clause("crossing VCG is ex-post on three levels", || {
            let m = 6;
            let dom = level_domain(m, &[1, 2, 3]);
            let domains = Domains { players: vec![dom.iter().map(|v| v.lift()).collect(); 2] };
            let table = ok(SocialChoiceTable::from_fn(m, domains, |p| {
                let (va, vb) = (&dom[p[0]], &dom[p[1]]);
                let c = crossing_optimum(va, vb)?;
                let pay = vcg_two_player(va, vb, c.s, m - c.s)?;
                Ok(units_outcome(&[c.s, m - c.s], vec![pay.a, pay.b]))
            }))?;
            ensure(check_expost(&table) == ExPostReport::Ok, || "ex-post violation".into())
        }),
    ]
}

fn crossing_uniqueness() -> Vec<(&'static str, Check)> {
    vec![clause("unique maximizer", || {
        let mut r = rng::stream("acceptance", 3, "strict");
        let mut found = 0;
        while found < 1000 {
            let m = r.random_range(2..=64);
            let va = random_concave(m, 1 << 12, &mut r);
            let vb = random_concave(m, 1 << 12, &mut r);
            let s = ok(crossing_optimum(&va, &vb))?.s;
            if ok(check_crossing_conditions(&va, &vb, s))? != CrossingVerdict::UniqueOptimum {
                continue;
            }
            found += 1;
            let w = |t: usize| va.value(t) + vb.value(m - t);
            let best = w(s);
            ensure((0..=m).all(|t| t == s || w(t) < best), || format!("instance {found}: a split ties ({s}, {})", m - s))?;
        }
        Ok(())
    })]
}

fn fptas() -> Vec<(&'static str, Check)> {
    vec![
        clause("ratio and query bound", || {
            let mut r = rng::stream("acceptance", 4, "fptas");
            let epss = [frac(1, 2), frac(1, 4), frac(1, 8)];
            let mut worst: Option<Rat> = None;
            for k in 0..500 {
                let m = r.random_range(1..=60);
                let n = r.random_range(1..=4);
                let eps = &epss[k % 3];
                let vals: Vec<MarginalVector> = (0..n).map(|_| random_concave(m, 1000, &mut r)).collect();
                let f = ok(fptas_allocate(&vals, eps))?;
                let opt = ok(brute_optimum(&vals))?.welfare;
                ensure(f.allocation.welfare >= (int(1) - eps) * &opt, || format!("instance {k}: {} against {opt}", f.allocation.welfare))?;
                if opt > int(0) {
                    let ratio = &f.allocation.welfare / &opt;
                    if worst.as_ref().is_none_or(|w| ratio < *w) {
                        worst = Some(ratio);
                    }
                }
                if let Some(range) = f.range {
                    ensure(f.queries * range.q <= n * (2 * m + 2 * range.q), || format!("instance {k}: {} queries, q = {}", f.queries, range.q))?;
                }
            }
            println!("       lowest welfare ratio: {}", worst.unwrap_or_else(|| int(1)));
            Ok(())
        }),
        clause("range VCG is dominant at m = 8", || {
            let m = 8;
            let range = ok(BlockRange::new(m, 2))?;
            let mut r = rng::stream("acceptance", 4, "range-vcg");
            for n in [2, 3] {
                let per: Vec<Vec<MarginalVector>> = (0..n).map(|_| (0..3).map(|_| random_concave(m, 20, &mut r)).collect()).collect();
                let domains = Domains { players: per.iter().map(|d| d.iter().map(|v| v.lift()).collect()).collect() };
                let (tree, strat) = ok(direct_tree(m, &domains, Flags { normalized: true, no_negative_transfers: true }, |p| {
                    let vals: Vec<MarginalVector> = p.iter().enumerate().map(|(i, &k)| per[i][k].clone()).collect();
                    let (alloc, pays) = vcg_for_range(&vals, |v| range.optimize(v)).unwrap();
                    units_outcome(&alloc.shares, pays)
                }))?;
                ensure(ok(check_dominant(&tree, &strat, &domains, DominanceMode::Stitch))?.is_ok(), || format!("violation with {n} players"))?;
            }
            Ok(())
        }),
    ]
}

type Vcg = (usize, usize, Rat, Rat);

fn exact_vcg(va: &MarginalVector, vb: &MarginalVector) -> mechlab::Result<Vcg> {
    let c = crossing_optimum(va, vb)?;
    let m = va.items();
    let p = vcg_two_player(va, vb, c.s, m - c.s)?;
    Ok((c.s, m - c.s, p.a, p.b))
}

fn both_families(m: usize) -> Vec<MarginalVector> {
    let mut all = enumerate_nd(m, 1).unwrap();
    all.extend(enumerate_d(m, 1).unwrap());
    all
}

fn payment_sketches() -> Vec<(&'static str, Check)> {
    let m = 5;
    let slack = frac(1, 8 * m as i64);
    let deltas = [int(0), slack.clone(), -slack.clone(), frac(1, 16 * m as i64), -frac(1, 97)];
    vec![
        clause("menu prices within the interval", || {
            let alice = both_families(m);
            for delta in deltas.clone() {
                let nudged = move |va: &MarginalVector, vb: &MarginalVector| {
                    let (a, b, pa, pb) = exact_vcg(va, vb)?;
                    Ok((a, b, pa, pb + &delta))
                };
                let report = ok(payments_sketch_check(&nudged, &alice))?;
                ensure(matches!(report, SketchReport::Ok { .. }), || format!("{report:?}"))?;
            }
            Ok(())
        }),
        clause("reconstruction round trip", || {
            let alice = both_families(m);
            println!("       {} valuations in the two families", alice.len());
            for va in &alice {
                // v(m) is the reference value passed in, and may be fractional
                for x in 0..m {
                    let price = vcg_menu_price(va, m - x);
                    for delta in &deltas {
                        let got = ok(reconstruct_value(&(&price + delta), va.value(m), m))?;
                        ensure(Rat::from_integer(got.clone()) == *va.value(x), || format!("v({x}) = {} came back as {got}", va.value(x)))?;
                    }
                }
            }
            Ok(())
        }),
    ]
}

fn family_cardinality() -> Vec<(&'static str, Check)> {
    vec![clause("sizes 50 and 432", || {
        for (m, want) in [(4usize, 50usize), (5, 432)] {
            let fam = ok(enumerate_nd(m, 1))?;
            ensure(fam.len() == want && want == 2 * (m + 1).pow(m as u32 - 2), || format!("m = {m}: {} members", fam.len()))?;
            let distinct: HashSet<&MarginalVector> = fam.iter().collect();
            ensure(distinct.len() == want, || format!("m = {m}: {} distinct", distinct.len()))?;
            for v in &fam {
                let marg: Vec<Rat> = (1..=m).map(|x| v.value(x) - v.value(x - 1)).collect();
                ensure(marg.windows(2).all(|w| w[0] >= w[1]) && marg.iter().all(|d| *d >= int(0)), || format!("not concave: {marg:?}"))?;
                ensure(v.fits_bit_budget(FAMILY_BIT_FACTOR), || "over the bit budget".into())?;
            }
        }
        Ok(())
    })]
}

fn gs_ok(v: &Valuation, what: &str) -> Check {
    let r = ok(is_gross_substitutes(v))?;
    ensure(r.is_ok(), || format!("{what}: {r:?}"))
}

fn ordinary_subsets(m: usize) -> Vec<Vec<usize>> {
    let k = m - 2;
    (0..1u64 << k).map(|mask| (0..k).filter(|j| mask >> j & 1 == 1).map(|j| j + 2).collect()).collect()
}

/// Every allocation of `m` items to two bidders, unallocated items allowed.
fn all_splits(m: usize) -> Vec<(Bundle, Bundle)> {
    (0..3usize.pow(m as u32))
        .map(|code| {
            let (mut a, mut b) = (Bundle::empty(m), Bundle::empty(m));
            let mut c = code;
            for j in 0..m {
                match c % 3 {
                    1 => a.insert(j),
                    2 => b.insert(j),
                    _ => {}
                }
                c /= 3;
            }
            (a, b)
        })
        .collect()
}

fn unique_split(va: &Valuation, vb: &Valuation, splits: &[(Bundle, Bundle)], want: (Bundle, Bundle)) -> Check {
    let target = va.eval(&want.0) + vb.eval(&want.1);
    for (a, b) in splits {
        ensure((*a, *b) == want || va.eval(a) + vb.eval(b) < target, || format!("{a} / {b} ties or beats {} / {}", want.0, want.1))?;
    }
    Ok(())
}

fn decisive(role: Role, m: usize, weight: u64) -> Vec<Valuation> {
    let mut out = Vec::new();
    for half_noise in [false, true] {
        for set in ordinary_subsets(m) {
            out.push(gen_gs_family(&GsFamily::Decisive { role, m, weight, set, half_noise }).unwrap());
        }
    }
    out
}

fn blurred(role: Role, m: usize, weight: u64, bases: usize, seed: u64) -> Vec<Valuation> {
    let mut r = rng::stream("acceptance", seed, "gs-bases");
    let bases: Vec<Valuation> = (0..bases).map(|_| random_small_base(m - 2, m as i64, &mut r)).collect();
    let mut out = Vec::new();
    for half_noise in [false, true] {
        for base in &bases {
            out.push(gen_gs_family(&GsFamily::Blurred { role, m, weight, base: base.clone(), half_noise }).unwrap());
        }
    }
    out
}

fn gross_substitutes() -> Vec<(&'static str, Check)> {
    vec![
        clause("fixtures accepted", || {
            let mut r = rng::stream("acceptance", 7, "fixtures");
            for m in 1..=6 {
                gs_ok(&random_additive(m, 5, &mut r), "additive")?;
                gs_ok(&random_unit_demand(m, 5, &mut r), "unit demand")?;
                let uniform: Vec<Rat> = (0..=m).map(|x| int(x.min(2) as i64)).collect();
                gs_ok(&ok(Valuation::symmetric(uniform))?, "uniform matroid")?;
            }
            for seed in 0..3 {
                let params = ProfileParams { ground: 8, k: 3, s: 3, b: 1, d: 3, full_rank: vec![0], retries: DEFAULT_RETRIES, samples: 0 };
                let (mat, _) = ok(sample_rank_profile(&params, seed))?;
                gs_ok(&Valuation::MatroidRank { m: 8, matroid: Arc::new(mat), ground: (0..8).collect() }, "rank profile matroid")?;
            }
            Ok(())
        }),
        clause("family members accepted", || {
            let mut count = 0;
            for m in 3..=8 {
                for role in [Role::Alice, Role::Bob] {
                    let mut members: Vec<Valuation> = decisive(role, m, 2).into_iter().step_by(if m > 6 { 5 } else { 1 }).collect();
                    members.extend(blurred(role, m, 3, 2, m as u64));
                    for v in &members {
                        gs_ok(v, &format!("member at m = {m}"))?;
                    }
                    count += members.len();
                }
            }
            println!("       {count} family members checked");
            Ok(())
        }),
        clause("complements rejected", || {
            let v = ok(Valuation::table(2, vec![int(0), int(0), int(0), int(1)]))?;
            ensure(!ok(is_gross_substitutes(&v))?.is_ok(), || "accepted".into())
        }),
        clause("extension keeps GS", || {
            let mut r = rng::stream("acceptance", 7, "extend");
            for k in 0..200 {
                let v = random_gs(4, 3, &mut r);
                let e = ok(gs_extend(&v, int((k % 3) as i64)))?;
                gs_ok(&e, &format!("extension {k}"))?;
            }
            Ok(())
        }),
        clause("ascending equals brute force", || {
            let mut r = rng::stream("acceptance", 7, "wdp");
            for k in 0..500 {
                let m = 1 + k % 8;
                let n = 1 + (k / 8) % 4;
                let vals: Vec<Valuation> = (0..n).map(|_| random_gs(m, 6, &mut r)).collect();
                let a = ok(gs_welfare_max(&vals, WdpMode::Ascending))?;
                let b = ok(gs_welfare_max(&vals, WdpMode::Brute))?;
                ensure(a.welfare == b.welfare, || format!("instance {k}: {} vs {}", a.welfare, b.welfare))?;
            }
            Ok(())
        }),
        clause("heavy Alice leaves only b", || {
            let m = 5;
            let want = (Bundle::full(m).without(mechlab::gs::ITEM_B), ok(Bundle::from_items(m, &[mechlab::gs::ITEM_B]))?);
            let splits = all_splits(m);
            let m2 = (m * m) as u64;
            let top: u64 = pow(m as i64, 5).to_integer().try_into().unwrap();
            for weight in [m2, m2 + 1, 2 * m2, m2 * m2, top] {
                let mut alices = decisive(Role::Alice, m, weight);
                alices.extend(blurred(Role::Alice, m, weight, 4, 1));
                for va in &alices {
                    for vb in &decisive(Role::Bob, m, 1) {
                        unique_split(va, vb, &splits, want)?;
                    }
                }
            }
            Ok(())
        }),
        clause("light Alice keeps only a", || {
            let m = 5;
            let want = (ok(Bundle::from_items(m, &[mechlab::gs::ITEM_A]))?, Bundle::full(m).without(mechlab::gs::ITEM_A));
            let splits = all_splits(m);
            let bobs = decisive(Role::Bob, m, pow(m as i64, 5).to_integer().try_into().unwrap());
            for weight in 1..=25 {
                let mut alices = decisive(Role::Alice, m, weight);
                alices.extend(blurred(Role::Alice, m, weight, 4, 2));
                for va in &alices {
                    for vb in &bobs {
                        unique_split(va, vb, &splits, want)?;
                    }
                }
            }
            Ok(())
        }),
    ]
}

fn fixture_corpus() -> Vec<(&'static str, Fixture)> {
    vec![
        ("sealed-3", fixtures::sealed_second_price(3)),
        ("sealed-4", fixtures::sealed_second_price(4)),
        ("ascending-2x3", fixtures::ascending_bundle_auction(2, 3)),
        ("ascending-1x4", fixtures::ascending_bundle_auction(1, 4)),
        ("single-leaf", fixtures::single_leaf()),
        ("padded-3", fixtures::padded_second_price(3)),
        ("serial", fixtures::serial_second_price()),
        ("small-serial", fixtures::small_serial_second_price(3)),
        ("figure-one", fixtures::figure_one()),
        ("rooms", fixtures::undecided_rooms()),
    ]
}

fn certified() -> Vec<(&'static str, Fixture)> {
    fixture_corpus().into_iter().filter(|(_, (t, s, d))| check_dominant(t, s, d, DominanceMode::Stitch).unwrap().is_ok()).collect()
}

fn every_induced_tree(t: &ProtocolTree) -> Vec<InducedTree<'_>> {
    let mut out = Vec::new();
    for (id, n) in t.nodes.iter().enumerate() {
        if let Node::Internal { speakers, .. } = n {
            for &p in speakers {
                for others in opponent_profiles(t, id, p) {
                    out.push(induced_tree(t, id, p, &others).unwrap());
                }
            }
        }
    }
    out
}

fn protocol_calculus() -> Vec<(&'static str, Check)> {
    vec![
        clause("minimize is idempotent and keeps outcomes", || {
            for (name, (t, s, d)) in fixture_corpus() {
                let (once, s1) = ok(minimize(&t, &s, &d))?;
                let (twice, s2) = ok(minimize(&once, &s1, &d))?;
                ensure(once == twice && s1 == s2, || format!("{name}: second pass changed the tree"))?;
                let sizes: Vec<usize> = d.players.iter().map(|p| p.len()).collect();
                for p in profiles(&sizes) {
                    let (a, b) = (ok(play(&t, &s, &p))?.outcome, ok(play(&once, &s1, &p))?.outcome);
                    ensure(a == b, || format!("{name}: outcome changed at {p:?}"))?;
                }
            }
            Ok(())
        }),
        clause("payment uniqueness on certified fixtures", || {
            let corpus = certified();
            ensure(corpus.len() >= 5, || format!("only {} fixtures certified", corpus.len()))?;
            for (name, (t, _, _)) in corpus {
                for it in every_induced_tree(&t) {
                    ensure(check_payment_uniqueness(&it) == UniquenessReport::Ok, || format!("{name} at {}", it.base))?;
                }
            }
            Ok(())
        }),
        clause("constructed payment violation caught", || {
            let (t, _, _) = fixtures::two_prices_for_one_item();
            let it = ok(induced_tree(&t, t.root, 0, &[]))?;
            ensure(matches!(check_payment_uniqueness(&it), UniquenessReport::Violation { .. }), || "missed".into())
        }),
        clause("containment on certified fixtures", || {
            for (name, (t, _, _)) in certified() {
                for it in every_induced_tree(&t) {
                    ensure(check_containment(&it) == ContainmentReport::Ok, || format!("{name} at {}", it.base))?;
                }
            }
            Ok(())
        }),
        clause("semi-simultaneity", || {
            for (name, (t, s, d)) in [("sealed", fixtures::sealed_second_price(3)), ("ascending", fixtures::ascending_bundle_auction(2, 3))] {
                let r = ok(check_semi_simultaneous(&t, &s, &d))?;
                ensure(matches!(r, SemiSimReport::Ok(_)), || format!("{name}: {r:?}"))?;
            }
            let (t, s, d) = fixtures::undecided_rooms();
            let r = ok(check_semi_simultaneous(&t, &s, &d))?;
            ensure(matches!(r, SemiSimReport::Violation { .. }), || format!("undecided rooms: {r:?}"))
        }),
    ]
}

fn matroid_params(seed: u64) -> ProfileParams {
    const SHAPES: [(usize, usize, usize, usize, usize); 5] = [(12, 4, 4, 3, 4), (12, 3, 3, 2, 3), (12, 6, 4, 3, 4), (10, 4, 3, 2, 3), (12, 8, 5, 4, 5)];
    let (ground, k, s, b, d) = SHAPES[seed as usize % SHAPES.len()];
    ProfileParams { ground, k, s, b, d, full_rank: vec![0], retries: DEFAULT_RETRIES, samples: 0 }
}

fn matroid_construction() -> Vec<(&'static str, Check)> {
    let families: Vec<Result<RankProfileMatroid, String>> = (0..50).map(|seed| ok(sample_rank_profile(&matroid_params(seed), seed)).map(|(m, _)| m)).collect();
    vec![
        clause("axioms hold exhaustively", || {
            for (seed, m) in families.iter().enumerate() {
                let m = m.as_ref().map_err(|e| format!("seed {seed}: {e}"))?;
                let rank = |s: &Bundle| m.rank(s) as i64;
                let r = ok(verify_matroid_axioms(&rank, m.ground_size, AxiomMode::Exhaustive))?;
                ensure(r == AxiomReport::Ok, || format!("seed {seed}: {r:?}"))?;
            }
            Ok(())
        }),
        clause("ranks on low-overlap families", || {
            let mut covered = 0;
            for (seed, m) in families.iter().enumerate() {
                let Ok(m) = m else { continue };
                let all: Vec<usize> = (0..m.sets.len()).collect();
                if 2 * m.family().max_overlap(&all) > m.b {
                    continue;
                }
                covered += 1;
                for (i, a) in m.sets.iter().enumerate() {
                    let want = if m.full_rank.contains(&i) { a.len() } else { m.b };
                    ensure(m.rank(a) == want, || format!("seed {seed}, set {i}: rank {} not {want}", m.rank(a)))?;
                }
            }
            println!("       {covered}/50 families have pairwise overlaps at most b/2");
            ensure(covered > 0, || "no family qualified".into())
        }),
    ]
}

fn hard_distributions() -> Vec<(&'static str, Check)> {
    vec![
        clause("general optimum at least 3", || {
            for seed in 0..100 {
                let h = ok(gen_hard_general(&GeneralParams::desk(), seed))?;
                let special = welfare_of(&h.instance.players, &h.specialized_allocation());
                ensure(special == int(3), || format!("seed {seed}: specialized welfare {special}"))?;
                let (opt, _) = ok(binary_optimum(&h.instance))?;
                ensure(opt >= int(3), || format!("seed {seed}: optimum {opt}"))?;
            }
            Ok(())
        }),
        clause("matroid specialized welfare equals item count", || {
            let p = MatroidParams::desk();
            for seed in 0..100 {
                let h = ok(gen_hard_matroid(&p, seed))?;
                let w = welfare_of(&h.instance.players, &ok(h.specialized_allocation())?);
                ensure(w == int(h.instance.m as i64), || format!("seed {seed}: {w} of {}", h.instance.m))?;
            }
            Ok(())
        }),
        clause("welfare decomposition", || {
            let held = (0..200u64).filter(|&s| welfare_beyond_specials(&gen_hard_general(&GeneralParams::desk(), s).unwrap()) <= 1).count();
            ensure(held * 100 >= 95 * 200, || format!("held on {held}/200 seeds, need 190"))
        }),
    ]
}

fn frequent_messages() -> Vec<(&'static str, Check)> {
    let d = GroupDistribution::desk();
    vec![
        clause("frequent tuples under the bias bound", || {
            let s = ok(frequent_message_stats(&truncated_report(1, 4, 8), &d, 10_000, 4, 7, 11))?;
            let frequent: Vec<_> = s.tuples.iter().filter(|t| t.class == Frequency::Frequent).collect();
            ensure(!frequent.is_empty(), || "no frequent tuple".into())?;
            for t in frequent {
                ensure(t.biased.iter().all(|&b| b <= 4 * 4), || format!("{:?}: {:?} biased sets", t.messages, t.biased))?;
            }
            ensure(!s.flagged, || "honest algorithm flagged".into())
        }),
        clause("cheat flagged", || {
            let s = ok(frequent_message_stats(&oracle_cheat(4, 8), &d, 10_000, 4, 7, 11))?;
            ensure(s.flagged, || "not flagged".into())
        }),
    ]
}

fn x_sets() -> Vec<Vec<usize>> {
    vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
}

/// Key singleton at `x`, other singletons 1, half-size bundle `k` at
/// `pattern >> k & 1`, larger bundles at 8.
fn keyed(key: usize, x: i64, pattern: u32) -> Valuation {
    let vals = (0..16u64)
        .map(|mask| {
            let s = Bundle::from_mask(4, mask);
            match s.len() {
                0 => int(0),
                1 if s.contains(key) => int(x),
                1 => int(1),
                2 => int(i64::from(pattern >> x_sets().iter().position(|v| *v == s.to_vec()).unwrap() & 1)),
                _ => int(8),
            }
        })
        .collect();
    Valuation::table(4, vals).unwrap()
}

/// The three allocation rules written out for four items.
fn rules(vals: [&Valuation; 3]) -> [Vec<usize>; 3] {
    let one = |i: usize| Bundle::from_items(4, &[i]).unwrap();
    let xs = x_sets();
    let index = |v: &Valuation, i| v.eval(&one(i)).to_integer().try_into().unwrap_or(usize::MAX);
    let low = |v: &Valuation, k: usize| v.eval(&Bundle::from_items(4, &xs[k - 1]).unwrap()) < int(1);
    let mut out: [Vec<usize>; 3] = Default::default();
    // (announcer, item it names an index with, tester, winner, item)
    for (announcer, tester, winner, item) in [(0, 1, 2, 2), (1, 2, 0, 0), (2, 0, 1, 1)] {
        let k = index(vals[announcer], [2, 0, 1][announcer]);
        if (1..=6).contains(&k) && low(vals[tester], k) {
            out[winner].push(item);
        }
    }
    out
}

fn separation_domain(xs: &[i64], patterns: &[u32]) -> [Vec<Valuation>; 3] {
    [2, 0, 1].map(|key| xs.iter().flat_map(|&x| patterns.iter().map(move |&p| keyed(key, x, p))).collect())
}

fn separation() -> Vec<(&'static str, Check)> {
    vec![
        clause("f follows the three rules", || {
            let doms = separation_domain(&(0..=16).collect::<Vec<_>>(), &[0, 0b111111, 0b101010, 0b010101, 0b001101]);
            for va in &doms[0] {
                for vb in &doms[1] {
                    for vc in &doms[2] {
                        let o = ok(separation_f(va, vb, vc, 4))?;
                        let want = rules([va, vb, vc]);
                        for p in 0..3 {
                            ensure(o.shares[p] == Share::Items(ok(Bundle::from_items(4, &want[p]))?), || format!("player {p}: {:?}", o.shares[p]))?;
                        }
                    }
                }
            }
            Ok(())
        }),
        clause("INDEX reduction", || {
            let mut r = rng::stream("acceptance", 12, "index");
            let va = keyed(2, 0, 0);
            let a = Share::Items(ok(Bundle::from_items(4, &[mechlab::simultaneous::separation::ITEM_A]))?);
            for _ in 0..3 {
                let arr: Vec<bool> = (0..6).map(|_| r.random_bool(0.5)).collect();
                for j in 1..=6 {
                    let (vc, vb) = ok(index_reduction(&arr, j, 4))?;
                    let o = ok(separation_f(&va, &vb, &vc, 4))?;
                    ensure(arr[j - 1] == (o.shares[ALICE] == a), || format!("arr {arr:?}, j {j}"))?;
                }
            }
            Ok(())
        }),
        clause("protocol is ex-post, not dominant", || {
            let doms = separation_domain(&(0..=8).collect::<Vec<_>>(), &[0b101010, 0b010101]);
            let (tree, strat) = ok(separation_protocol(4, &doms))?;
            ensure(tree.max_bits() <= 3 * 4 + 6, || format!("{} bits", tree.max_bits()))?;
            let d = Domains { players: doms.to_vec() };
            let table = ok(SocialChoiceTable::from_tree(&tree, &strat, &d))?;
            ensure(check_expost(&table) == ExPostReport::Ok, || "ex-post violation".into())?;
            let report = ok(check_dominant(&tree, &strat, &d, DominanceMode::Stitch))?;
            let cert = report.certificate().ok_or("no dominance violation")?;
            let (honest, deviating) = ok(cert.replay(&tree, &strat, &d))?;
            ensure(deviating > honest, || format!("replay gives {honest} vs {deviating}"))
        }),
    ]
}

fn reduction() -> Vec<(&'static str, Check)> {
    let toys: Vec<_> = [false, true].map(|reserve| toy(reserve).and_then(|t| toy_cases(&t).map(|c| (t, c)))).into_iter().collect();
    vec![
        clause("special allocations reproduced", || {
            for r in &toys {
                let (_, cases) = r.as_ref().map_err(|e| e.to_string())?;
                let good = cases.iter().filter(|c| c.preconditions).count();
                ensure(good > 0, || "no profile meets the preconditions".into())?;
                for c in cases.iter().filter(|c| c.preconditions) {
                    ensure(c.agrees, || format!("profile {:?}", c.profile))?;
                }
            }
            Ok(())
        }),
        clause("no special set allocated twice", || {
            for r in &toys {
                let (_, cases) = r.as_ref().map_err(|e| e.to_string())?;
                for c in cases {
                    let mut owner = BTreeMap::new();
                    for (i, b) in c.reduction.iter().enumerate() {
                        for j in b.items() {
                            ensure(owner.insert(j, i).is_none(), || format!("profile {:?}: item {j} twice", c.profile))?;
                        }
                    }
                }
            }
            Ok(())
        }),
        clause("zero-profit grants refused", || {
            let (_, cases) = toys[1].as_ref().map_err(|e| e.to_string())?;
            let refused: Vec<_> = cases.iter().filter(|c| c.notes.iter().any(|n| n.contains("grant refused"))).collect();
            ensure(!refused.is_empty(), || "nothing refused".into())?;
            for c in refused {
                for n in c.notes.iter().filter(|n| n.contains("grant refused")) {
                    let i: usize = n.trim_start_matches("player ").split(':').next().and_then(|x| x.parse().ok()).ok_or_else(|| format!("note {n:?}"))?;
                    ensure(c.reduction[i].is_empty(), || format!("profile {:?}: refused player {i} still holds {}", c.profile, c.reduction[i]))?;
                }
            }
            Ok(())
        }),
    ]
}
