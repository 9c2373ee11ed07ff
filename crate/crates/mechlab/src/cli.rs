//! Command implementations behind `mechlab`.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde_json::{json, Value};

use mechlab::bundle::Bundle;
use mechlab::equilibrium::{check_dominant, check_expost, DominanceMode, DominanceReport, ExPostReport, SocialChoiceTable, ORACLE_BUDGET};
use mechlab::experiment::{run_experiment, ExperimentConfig};
use mechlab::fixtures::{self, Fixture};
use mechlab::gs::{self, gen_gs_family, gs_welfare_max, is_gross_substitutes, AuctionInstance, GsFamily, GsReport, GsWitness, Role, WdpMode};
use mechlab::matroid::{sample_rank_profile, verify_matroid_axioms, AxiomMode, ProfileParams, RankProfileMatroid};
use mechlab::multiunit::{
    brute_optimum, crossing_optimum, enumerate_d, enumerate_nd, enumerate_optimum, fptas_allocate, reconstruct_value, vcg_menu_price, vcg_two_player,
    MuInstance, FAMILY_BIT_FACTOR,
};
use mechlab::protocol::{
    check_containment, check_payment_uniqueness, check_semi_simultaneous, induced_tree, opponent_profiles, ContainmentReport, Domains, Node, ProtocolTree,
    SemiSimReport, Share, Strategies, UniquenessReport,
};
use mechlab::rat::{self, int, Rat};
use mechlab::rng;
use mechlab::simultaneous::hard::{binary_optimum, gen_hard_general, gen_hard_matroid, GeneralParams, MatroidParams};
use mechlab::simultaneous::harness::{exact_report, oracle_cheat, run_simultaneous, silent, top_set_first_come, truncated_report, SimAlgorithm};
use mechlab::simultaneous::reduction::{toy, toy_cases};
use mechlab::simultaneous::separation::{half_subsets, index_reduction, separation_bits, separation_f, separation_run, ALICE, ITEM_A, ITEM_C};
use mechlab::simultaneous::stats::{frequent_message_stats, GroupDistribution};
use mechlab::valuation::{check_monotone_normalized, CheckMode};
use mechlab::{Error, Result, Valuation};

use crate::{Cli, Command, Common, FixtureName, Gs, MatroidCmd, MechArgs, Mu, Sim, SimAlg, Verify};

pub enum Status {
    Ok,
    Violation,
    Incomplete,
}

impl Status {
    fn from_ok(ok: bool) -> Status {
        if ok {
            Status::Ok
        } else {
            Status::Violation
        }
    }
}

pub fn run(cli: &Cli) -> Result<Status> {
    let c = &cli.common;
    match &cli.command {
        Command::Verify(v) => verify(v, c),
        Command::Mu(m) => mu(m, c),
        Command::Gs(g) => gs_cmd(g, c),
        Command::Sim(s) => sim(s, c),
        Command::Matroid(m) => matroid(m, c),
        Command::Run { config } => run_config(config, c),
        Command::Describe { file } => describe(file, c),
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn emit_text(c: &Common, text: &str) -> Result<()> {
    match &c.out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit(c: &Common, v: &Value) -> Result<()> {
    emit_text(c, &(serde_json::to_string_pretty(v)? + "\n"))
}

fn mode<'a>(c: &'a Common, default: &'a str) -> &'a str {
    c.mode.as_deref().unwrap_or(default)
}

fn bad_mode(m: &str, allowed: &str) -> Error {
    Error::Input(format!("unknown mode {m:?}; expected {allowed}"))
}

// ---- verify ----

fn fixture(name: FixtureName) -> Fixture {
    match name {
        FixtureName::SingleLeaf => fixtures::single_leaf(),
        FixtureName::SealedSecondPrice => fixtures::sealed_second_price(4),
        FixtureName::SerialSecondPrice => fixtures::serial_second_price(),
        FixtureName::SmallSerialSecondPrice => fixtures::small_serial_second_price(3),
        FixtureName::PaddedSecondPrice => fixtures::padded_second_price(3),
        FixtureName::AscendingBundle => fixtures::ascending_bundle_auction(2, 3),
        FixtureName::FigureOne => fixtures::figure_one(),
        FixtureName::UndecidedRooms => fixtures::undecided_rooms(),
        FixtureName::TwoPrices => fixtures::two_prices_for_one_item(),
    }
}

fn load_mech(a: &MechArgs) -> Result<Fixture> {
    if let Some(name) = a.fixture {
        let f = fixture(name);
        if let Some(dir) = &a.export {
            std::fs::create_dir_all(dir)?;
            for (file, v) in [("mech.json", f.0.to_json()), ("strategies.json", f.1.to_json()), ("domains.json", f.2.to_json())] {
                std::fs::write(dir.join(file), serde_json::to_string_pretty(&v)? + "\n")?;
            }
        }
        return Ok(f);
    }
    match (&a.mech, &a.strategies, &a.domains) {
        (Some(m), Some(s), Some(d)) => Ok((
            ProtocolTree::from_json(&read_json(m)?)?,
            Strategies::from_json(&read_json(s)?)?,
            Domains::from_json(&read_json(d)?)?,
        )),
        _ => Err(Error::Input("give <mech.json> <strategies.json> <domains.json> or --fixture".into())),
    }
}

fn share_json(s: &Share) -> Value {
    match s {
        Share::Items(b) => json!(b.to_vec()),
        Share::Units(x) => json!(x),
    }
}

fn verify(v: &Verify, c: &Common) -> Result<Status> {
    match v {
        Verify::Ds(a) => {
            let (t, s, d) = load_mech(a)?;
            let m = match mode(c, "stitch") {
                "stitch" => DominanceMode::Stitch,
                "pruned" => DominanceMode::Pruned,
                "oracle" => DominanceMode::Oracle { budget: ORACLE_BUDGET },
                other => return Err(bad_mode(other, "stitch|pruned|oracle")),
            };
            match check_dominant(&t, &s, &d, m)? {
                DominanceReport::Ok => {
                    emit(c, &json!({ "result": "ok" }))?;
                    Ok(Status::Ok)
                }
                DominanceReport::Violation(cert) => {
                    let (h, dv) = cert.replay(&t, &s, &d)?;
                    emit(c, &json!({
                        "result": "violation",
                        "certificate": cert.to_json(),
                        "replay": { "honest": rat::to_text(&h), "deviating": rat::to_text(&dv) },
                    }))?;
                    Ok(Status::Violation)
                }
            }
        }
        Verify::Expost { table, fixture: fx } => {
            let table = match (table, fx) {
                (Some(p), _) => SocialChoiceTable::from_json(&read_json(p)?)?,
                (None, Some(n)) => {
                    let (t, s, d) = fixture(*n);
                    SocialChoiceTable::from_tree(&t, &s, &d)?
                }
                (None, None) => return Err(Error::Input("give <table.json> or --fixture".into())),
            };
            match check_expost(&table) {
                ExPostReport::Ok => {
                    emit(c, &json!({ "result": "ok" }))?;
                    Ok(Status::Ok)
                }
                ExPostReport::Violation { player, truth, lie, rest, honest, deviating } => {
                    emit(c, &json!({
                        "result": "violation",
                        "player": player, "truth": truth, "lie": lie, "others": rest,
                        "honest": rat::to_text(&honest), "deviating": rat::to_text(&deviating),
                    }))?;
                    Ok(Status::Violation)
                }
            }
        }
        Verify::Semisim(a) => {
            let (t, s, d) = load_mech(a)?;
            match check_semi_simultaneous(&t, &s, &d)? {
                SemiSimReport::Ok(specials) => {
                    let list: Vec<Value> = specials
                        .iter()
                        .map(|x| json!({ "player": x.player, "vertex": x.vertex, "others": x.others, "message": x.message }))
                        .collect();
                    emit(c, &json!({ "result": "ok", "special_subtrees": list }))?;
                    Ok(Status::Ok)
                }
                SemiSimReport::Violation { player, vertex, others, messages, leaves } => {
                    emit(c, &json!({
                        "result": "violation", "player": player, "vertex": vertex, "others": others,
                        "messages": [messages.0, messages.1], "leaves": [leaves.0, leaves.1],
                    }))?;
                    Ok(Status::Violation)
                }
            }
        }
        Verify::Payments(a) => {
            let (t, _, _) = load_mech(a)?;
            let mut checked = 0usize;
            for (id, n) in t.nodes.iter().enumerate() {
                let Node::Internal { speakers, .. } = n else { continue };
                for &p in speakers {
                    for others in opponent_profiles(&t, id, p) {
                        let it = induced_tree(&t, id, p, &others)?;
                        checked += 1;
                        if let UniquenessReport::Violation { share, low, high, leaves } = check_payment_uniqueness(&it) {
                            emit(c, &json!({
                                "result": "violation", "check": "uniqueness", "player": p, "vertex": id, "others": others,
                                "share": share_json(&share), "low": rat::to_text(&low), "high": rat::to_text(&high),
                                "leaves": [leaves.0, leaves.1],
                            }))?;
                            return Ok(Status::Violation);
                        }
                        if let ContainmentReport::Violation { smaller, larger } = check_containment(&it) {
                            emit(c, &json!({
                                "result": "violation", "check": "containment", "player": p, "vertex": id, "others": others,
                                "smaller": { "leaf": smaller.leaf, "share": share_json(&smaller.share), "price": rat::to_text(&smaller.price) },
                                "larger": { "leaf": larger.leaf, "share": share_json(&larger.share), "price": rat::to_text(&larger.price) },
                            }))?;
                            return Ok(Status::Violation);
                        }
                    }
                }
            }
            emit(c, &json!({ "result": "ok", "induced_trees": checked }))?;
            Ok(Status::Ok)
        }
    }
}

// ---- mu ----

fn load_mu(path: &Path) -> Result<MuInstance> {
    MuInstance::from_json(&read_json(path)?)
}

fn mu(m: &Mu, c: &Common) -> Result<Status> {
    match m {
        Mu::Opt { instance } => {
            let inst = load_mu(instance)?;
            let out = match mode(c, "crossing") {
                "crossing" => {
                    let [a, b] = inst.players.as_slice() else {
                        return Err(Error::Input("crossing needs exactly two players".into()));
                    };
                    let r = crossing_optimum(a, b)?;
                    let pay = vcg_two_player(a, b, r.s, inst.m - r.s)?;
                    json!({
                        "mode": "crossing", "shares": [r.s, inst.m - r.s], "welfare": rat::to_text(&r.welfare),
                        "queries": r.queries, "payments": [rat::to_text(&pay.a), rat::to_text(&pay.b)],
                    })
                }
                "brute" => {
                    let r = brute_optimum(&inst.players)?;
                    json!({ "mode": "brute", "shares": r.shares, "welfare": rat::to_text(&r.welfare) })
                }
                "enumerate" => {
                    let r = enumerate_optimum(&inst.players)?;
                    json!({ "mode": "enumerate", "shares": r.shares, "welfare": rat::to_text(&r.welfare) })
                }
                other => return Err(bad_mode(other, "crossing|brute|enumerate")),
            };
            emit(c, &out)?;
            Ok(Status::Ok)
        }
        Mu::Fptas { instance, eps } => {
            let inst = load_mu(instance)?;
            let opt = brute_optimum(&inst.players)?.welfare;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["m", "n", "eps", "welfare", "opt", "ratio", "queries"])?;
            let mut ok = true;
            for e in eps {
                let e = rat::parse(e)?;
                let f = fptas_allocate(&inst.players, &e)?;
                let welfare = f.allocation.welfare;
                ok &= welfare >= (rat::one() - &e) * &opt;
                let ratio = if opt == rat::zero() { rat::one() } else { &welfare / &opt };
                w.write_record([
                    inst.m.to_string(),
                    inst.players.len().to_string(),
                    rat::to_text(&e),
                    rat::to_text(&welfare),
                    rat::to_text(&opt),
                    rat::to_text(&ratio),
                    f.queries.to_string(),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            emit_text(c, &String::from_utf8_lossy(&bytes))?;
            Ok(Status::from_ok(ok))
        }
        Mu::Families { m, gamma, family } => {
            let (fam, expected) = match family.as_str() {
                "nd" => {
                    let fam = enumerate_nd(*m, *gamma)?;
                    // enumeration succeeded, so the closed form fits
                    let expected = 2 * (*m as u64 + 1).pow(*m as u32 - 2);
                    (fam, Some(expected))
                }
                "d" => (enumerate_d(*m, *gamma)?, None),
                other => return Err(Error::Input(format!("unknown family {other:?}; expected nd|d"))),
            };
            let distinct = fam.iter().collect::<HashSet<_>>().len() == fam.len();
            let concave = fam.iter().all(|v| v.is_concave() && v.is_monotone());
            let fits = fam.iter().all(|v| v.fits_bit_budget(FAMILY_BIT_FACTOR));
            let count_ok = expected.is_none_or(|e| e == fam.len() as u64);
            emit(c, &json!({
                "family": family, "m": m, "gamma": gamma, "count": fam.len(), "expected": expected,
                "distinct": distinct, "decreasing_marginals": concave, "bit_budget": fits,
                "members": fam.iter().map(|v| v.values().iter().map(rat::to_text).collect::<Vec<_>>()).collect::<Vec<_>>(),
            }))?;
            Ok(Status::from_ok(distinct && concave && fits && count_ok))
        }
        Mu::Reconstruct { instance, perturb } => {
            let inst = load_mu(instance)?;
            let delta = rat::parse(perturb)?;
            let va = &inst.players[0];
            let mut rows = Vec::new();
            let mut ok = true;
            for x in 0..inst.m {
                let price = vcg_menu_price(va, inst.m - x) + &delta;
                let got = reconstruct_value(&price, va.value(inst.m), inst.m);
                let good = got.as_ref().is_ok_and(|g| Rat::from_integer(g.clone()) == *va.value(x));
                ok &= good;
                rows.push(json!({
                    "x": x, "value": rat::to_text(va.value(x)), "price": rat::to_text(&price),
                    "reconstructed": got.as_ref().map(|g| g.to_string()).unwrap_or_else(|e| format!("error: {e}")),
                    "match": good,
                }));
            }
            emit(c, &json!({ "perturbation": rat::to_text(&delta), "rows": rows }))?;
            Ok(Status::from_ok(ok))
        }
    }
}

// ---- gs ----

fn witness_json(w: &GsWitness) -> Value {
    let texts = |v: &[Rat]| v.iter().map(rat::to_text).collect::<Vec<_>>();
    match w {
        GsWitness::Prices { prices, raised, bundle } => json!({ "prices": texts(prices), "raised": texts(raised), "bundle": bundle.to_vec() }),
        GsWitness::Exchange { base, i, j, k } => json!({ "base": base.to_vec(), "i": i, "j": j, "k": k }),
    }
}

fn gs_report_json(r: &GsReport) -> Value {
    match r {
        GsReport::Ok { grid_checked } => json!({ "gross_substitutes": true, "grid_checked": grid_checked }),
        GsReport::Violation(w) => json!({ "gross_substitutes": false, "witness": witness_json(w) }),
        GsReport::Inconsistent { local_ok, grid_ok } => json!({ "gross_substitutes": null, "local_ok": local_ok, "grid_ok": grid_ok }),
    }
}

fn gs_cmd(g: &Gs, c: &Common) -> Result<Status> {
    match g {
        Gs::Check { valuation } => {
            let v = Valuation::from_json(&read_json(valuation)?)?;
            let r = is_gross_substitutes(&v)?;
            emit(c, &gs_report_json(&r))?;
            Ok(Status::from_ok(r.is_ok()))
        }
        Gs::Wdp { instance } => {
            let inst = AuctionInstance::from_json(&read_json(instance)?)?;
            let m = match mode(c, "ascending") {
                "brute" => WdpMode::Brute,
                "ascending" => WdpMode::Ascending,
                other => return Err(bad_mode(other, "brute|ascending")),
            };
            let a = gs_welfare_max(&inst.players, m)?;
            emit(c, &json!({
                "bundles": a.bundles.iter().map(|b| b.to_vec()).collect::<Vec<_>>(),
                "welfare": rat::to_text(&a.welfare),
            }))?;
            Ok(Status::Ok)
        }
        Gs::Families { m } => {
            let mut r = rng::stream("gs-families", c.seed, "bases");
            let ordinary: Vec<usize> = (2..*m).collect();
            let mut members = Vec::new();
            for role in [Role::Alice, Role::Bob] {
                for half_noise in [false, true] {
                    let k = r.random_range(0..=ordinary.len());
                    let set = rand::seq::index::sample(&mut r, ordinary.len(), k).into_iter().map(|i| ordinary[i]).collect();
                    members.push(gen_gs_family(&GsFamily::Decisive { role, m: *m, weight: r.random_range(1..=4), set, half_noise })?);
                    let base = gs::random_small_base(m.saturating_sub(2), *m as i64, &mut r);
                    members.push(gen_gs_family(&GsFamily::Blurred { role, m: *m, weight: r.random_range(1..=4), base, half_noise })?);
                }
            }
            let mut rows = Vec::new();
            let mut ok = true;
            for v in &members {
                let rep = is_gross_substitutes(v)?;
                ok &= rep.is_ok();
                rows.push(json!({ "valuation": v.to_json(), "check": gs_report_json(&rep) }));
            }
            emit(c, &json!({ "m": m, "seed": c.seed, "members": rows }))?;
            Ok(Status::from_ok(ok))
        }
    }
}

// ---- sim ----

fn parse_eps(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::Input(format!("eps must look like p/q, got {s:?}"));
    let (p, q) = s.split_once('/').ok_or_else(bad)?;
    Ok((p.trim().parse().map_err(|_| bad())?, q.trim().parse().map_err(|_| bad())?))
}

fn sim_alg(a: SimAlg, bits: usize, n: usize, m: usize) -> Result<SimAlgorithm> {
    match a {
        SimAlg::FirstCome => top_set_first_come(m),
        SimAlg::Silent => Ok(silent(n, m)),
        SimAlg::ExactReport => exact_report(m),
        SimAlg::Truncated => Ok(truncated_report(bits, n, m)),
        SimAlg::Cheat => Ok(oracle_cheat(n, m)),
    }
}

fn sim(s: &Sim, c: &Common) -> Result<Status> {
    match s {
        Sim::Gen { generator, m, t, eps, group_size, params } => {
            let doc = match generator.as_str() {
                "general" => {
                    let d = GeneralParams::desk();
                    let p = GeneralParams {
                        m: m.unwrap_or(d.m),
                        eps: eps.as_deref().map(parse_eps).transpose()?.unwrap_or(d.eps),
                        t: t.unwrap_or(d.t),
                        group_size: group_size.or(d.group_size),
                        round: false,
                    };
                    gen_hard_general(&p, c.seed)?.to_json()
                }
                "matroid" => {
                    let p: MatroidParams = match params {
                        Some(f) => serde_json::from_value(read_json(f)?)?,
                        None => MatroidParams::desk(),
                    };
                    gen_hard_matroid(&p, c.seed)?.to_json()
                }
                other => return Err(Error::Input(format!("unknown generator {other:?}; expected general|matroid"))),
            };
            emit(c, &doc)?;
            Ok(Status::Ok)
        }
        Sim::Run { instance, algorithm, bits } => {
            let doc = read_json(instance)?;
            let inst = AuctionInstance::from_json(&doc)?;
            let seed = doc["seed"].as_u64().unwrap_or(c.seed);
            let alg = sim_alg(*algorithm, *bits, inst.players.len(), inst.m)?;
            let run = run_simultaneous(&alg, &inst)?;
            let opt = match binary_optimum(&inst) {
                Ok((w, _)) => w,
                Err(Error::Mode(_)) => gs_welfare_max(&inst.players, WdpMode::Brute)?.welfare,
                Err(e) => return Err(e),
            };
            let ratio = if opt == rat::zero() { rat::one() } else { &run.welfare / &opt };
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["seed", "welfare", "opt", "ratio", "bits"])?;
            w.write_record([seed.to_string(), rat::to_text(&run.welfare), rat::to_text(&opt), rat::to_text(&ratio), run.max_bits.to_string()])?;
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            emit_text(c, &String::from_utf8_lossy(&bytes))?;
            Ok(Status::from_ok(run.welfare <= opt))
        }
        Sim::Stats { algorithm, samples, bits, factor } => {
            let d = GroupDistribution::desk();
            let per = bits / d.group_size;
            let alg = sim_alg(*algorithm, per.max(1), d.group_size, d.pool)?;
            let st = frequent_message_stats(&alg, &d, *samples, *bits, *factor, c.seed)?;
            emit(c, &serde_json::to_value(&st)?)?;
            Ok(Status::from_ok(!st.flagged))
        }
        Sim::Reduce { reserve } => {
            let t = toy(*reserve)?;
            let cases = toy_cases(&t)?;
            let ok = cases.iter().all(|k| !k.preconditions || k.agrees);
            emit(c, &json!({ "reserve": reserve, "cases": cases.iter().map(|k| k.to_json()).collect::<Vec<_>>() }))?;
            Ok(Status::from_ok(ok))
        }
        Sim::Sep { m, samples } => separation_checks(*m, *samples, c),
    }
}

/// Random integer table over `m` items with values in `0..=top`.
fn random_table(m: usize, top: i64, r: &mut rng::Stream) -> Result<Valuation> {
    Valuation::table(m, (0..1u64 << m).map(|k| if k == 0 { int(0) } else { int(r.random_range(0..=top)) }).collect())
}

fn separation_checks(m: usize, samples: usize, c: &Common) -> Result<Status> {
    let mut r = rng::stream("separation", c.seed, "valuations");
    let top = 1i64 << m;
    let mut agree = 0usize;
    let mut max_bits = 0u64;
    for _ in 0..samples {
        let vals = [random_table(m, top, &mut r)?, random_table(m, top, &mut r)?, random_table(m, top, &mut r)?];
        let f = separation_f(&vals[0], &vals[1], &vals[2], m)?;
        let (o, bits) = separation_run(&vals[0], &vals[1], &vals[2], m)?;
        max_bits = max_bits.max(bits);
        agree += usize::from(o == f);
    }
    // INDEX: Alice points Charlie at index j through item c; Bob's values hold j.
    let k = half_subsets(m)?.len();
    let alice = Valuation::table(
        m,
        (0..1u64 << m)
            .map(|mask| {
                let s = Bundle::from_mask(m, mask);
                match s.len() {
                    0 => int(0),
                    1 if s.contains(ITEM_C) => int(0),
                    1 => int(1),
                    l if l * 2 == m => int(0),
                    _ => int(top),
                }
            })
            .collect(),
    )?;
    let a = Share::Items(Bundle::from_items(m, &[ITEM_A])?);
    let mut index_ok = 0usize;
    let mut index_total = 0usize;
    let mut ri = rng::stream("separation", c.seed, "index");
    for _ in 0..3 {
        let arr: Vec<bool> = (0..k).map(|_| ri.random_bool(0.5)).collect();
        for j in 1..=k {
            let (vc, vb) = index_reduction(&arr, j, m)?;
            let o = separation_f(&alice, &vb, &vc, m)?;
            index_total += 1;
            index_ok += usize::from(arr[j - 1] == (o.shares[ALICE] == a));
        }
    }
    let bound = 3 * m as u64 + 6;
    emit(c, &json!({
        "m": m,
        "samples": samples,
        "run_matches_f": agree,
        "bits": separation_bits(m),
        "max_bits_seen": max_bits,
        "bit_bound": bound,
        "index_checked": index_total,
        "index_equivalent": index_ok,
    }))?;
    Ok(Status::from_ok(agree == samples && index_ok == index_total && separation_bits(m) <= bound))
}

// ---- matroid ----

fn matroid(cmd: &MatroidCmd, c: &Common) -> Result<Status> {
    match cmd {
        MatroidCmd::Gen { ground, k, s, b, d, full_rank, retries, samples } => {
            let p = ProfileParams { ground: *ground, k: *k, s: *s, b: *b, d: *d, full_rank: full_rank.clone(), retries: *retries, samples: *samples };
            let (mat, attempts) = sample_rank_profile(&p, c.seed)?;
            let mut doc = serde_json::to_value(&mat)?;
            doc["attempts"] = json!(attempts);
            doc["seed"] = json!(c.seed);
            emit(c, &doc)?;
            Ok(Status::Ok)
        }
        MatroidCmd::Verify { matroid } => {
            let mut mat: RankProfileMatroid = serde_json::from_value(read_json(matroid)?)?;
            mat.refresh();
            let am = match mode(c, "exhaustive") {
                "exhaustive" => AxiomMode::Exhaustive,
                "sampled" => AxiomMode::Sampled { samples: 5000, seed: c.seed },
                other => return Err(bad_mode(other, "exhaustive|sampled")),
            };
            let rep = verify_matroid_axioms(&|s: &Bundle| mat.rank(s) as i64, mat.ground_size, am)?;
            emit(c, &json!({ "ok": rep.is_ok(), "report": rep }))?;
            Ok(Status::from_ok(rep.is_ok()))
        }
    }
}

// ---- run ----

fn run_config(path: &Path, c: &Common) -> Result<Status> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir)?;
        let name = |ext: &str| -> PathBuf { dir.join(format!("{}.{ext}", cfg.experiment)) };
        cfg.out.csv = Some(name("csv"));
        cfg.out.summary = Some(name("summary.json"));
    }
    let report = run_experiment(&cfg, c.budget_ms)?;
    report.write(&cfg.out)?;
    println!("{}", serde_json::to_string_pretty(&report.summary())?);
    Ok(if report.violations() > 0 {
        Status::Violation
    } else if report.incomplete {
        Status::Incomplete
    } else {
        Status::Ok
    })
}

// ---- describe ----

fn describe(path: &Path, c: &Common) -> Result<Status> {
    let v = read_json(path)?;
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    let obj = v.as_object();
    let has = |k: &str| obj.is_some_and(|o| o.contains_key(k));
    let mut ok = true;
    if has("nodes") && has("leaves") {
        let t = ProtocolTree::from_json(&v)?;
        line("type: mechanism (protocol tree)".into());
        line(format!("players: {}, items: {}", t.players, t.items));
        line(format!("nodes: {} internal, {} leaves", t.nodes.len() - t.leaf_count(), t.leaf_count()));
        line(format!("bit depth: {}", t.max_bits()));
        line(format!("flags: normalized={}, no_negative_transfers={}", t.flags.normalized, t.flags.no_negative_transfers));
        let valid = t.validate();
        ok &= valid.is_ok();
        line(format!("structure: {}", valid.map_or_else(|e| format!("invalid ({e})"), |_| "valid".into())));
    } else if has("experiment") {
        let cfg = ExperimentConfig::from_json_str(&v.to_string())?;
        line("type: experiment config".into());
        line(format!("experiment: {}", cfg.experiment));
        line(format!("generator: {}", serde_json::to_string(&cfg.generator)?));
        line(format!("algorithm: {}", serde_json::to_string(&cfg.algorithm)?));
        line(format!("seeds: {}", cfg.seeds.to_vec().len()));
    } else if has("generator") && has("players") {
        let inst = AuctionInstance::from_json(&v)?;
        line("type: simultaneous instance".into());
        line(format!("family: {}", v["generator"].as_str().unwrap_or("?")));
        line(format!("seed: {}", v["seed"]));
        line(format!("n: {}, m: {}", inst.players.len(), inst.m));
        line(format!("params: {}", v["params"]));
        line(format!("special bidders: {}", v["special"]));
        let mut disjoint = true;
        let mut seen = Bundle::empty(inst.m);
        for p in v["private"].as_array().into_iter().flatten() {
            let b = Bundle::from_items(inst.m, &serde_json::from_value::<Vec<usize>>(p.clone())?)?;
            disjoint &= b.is_disjoint(&seen);
            seen = seen.union(&b);
        }
        ok &= disjoint;
        line(format!("private blocks disjoint: {disjoint}"));
    } else if has("ground_size") && has("sets") {
        let mut mat: RankProfileMatroid = serde_json::from_value(v.clone())?;
        mat.refresh();
        line("type: rank-profile matroid".into());
        line(format!("ground: {}, sets: {}, full rank: {:?}, b: {}, d: {}", mat.ground_size, mat.sets.len(), mat.full_rank, mat.b, mat.d));
        let rep = verify_matroid_axioms(&|s: &Bundle| mat.rank(s) as i64, mat.ground_size, AxiomMode::Sampled { samples: 2000, seed: c.seed })?;
        ok &= rep.is_ok();
        line(format!("axioms (sampled): {}", if rep.is_ok() { "ok".to_string() } else { format!("{rep:?}") }));
    } else if has("kind") && has("payload") {
        let val = Valuation::from_json(&v)?;
        line("type: valuation".into());
        line(format!("kind: {}, m: {}", val.kind(), val.items()));
        let mode = if val.items() <= 12 { CheckMode::Exhaustive } else { CheckMode::Sampled { samples: 2000, seed: c.seed } };
        let rep = check_monotone_normalized(&val, mode)?;
        ok &= rep.is_ok();
        line(format!("monotone and normalized: {}", if rep.is_ok() { "yes".to_string() } else { format!("no ({rep:?})") }));
    } else if has("outcomes") && has("domains") {
        let t = SocialChoiceTable::from_json(&v)?;
        line("type: social choice table".into());
        line(format!("domain sizes: {:?}", t.domains.players.iter().map(|d| d.len()).collect::<Vec<_>>()));
        let r = check_expost(&t);
        line(format!("ex-post: {}", if r == ExPostReport::Ok { "ok".to_string() } else { format!("{r:?}") }));
    } else if has("m") && has("players") {
        if v["players"].get(0).is_some_and(|p| p.get("marginals").is_some()) {
            let inst = MuInstance::from_json(&v)?;
            line("type: multi-unit instance".into());
            line(format!("n: {}, m: {}", inst.players.len(), inst.m));
            line("marginals: non-negative and non-increasing".into());
        } else {
            let inst = AuctionInstance::from_json(&v)?;
            line("type: combinatorial auction instance".into());
            line(format!("n: {}, m: {}", inst.players.len(), inst.m));
            line(format!("kinds: {:?}", inst.players.iter().map(|p| p.kind()).collect::<Vec<_>>()));
        }
    } else if has("players") {
        let d = Domains::from_json(&v)?;
        line("type: valuation domains".into());
        line(format!("domain sizes: {:?}", d.players.iter().map(|p| p.len()).collect::<Vec<_>>()));
    } else if v.as_array().is_some_and(|a| a.first().is_some_and(|p| p.get("valuations").is_some())) {
        let s = Strategies::from_json(&v)?;
        line("type: strategies".into());
        line(format!("behaviors per player: {:?}", s.players.iter().map(|p| p.len()).collect::<Vec<_>>()));
    } else {
        return Err(Error::Input(format!("{}: unknown schema", path.display())));
    }
    emit_text(c, &out)?;
    Ok(Status::from_ok(ok))
}

