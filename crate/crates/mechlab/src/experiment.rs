//! Seeded experiment runs: a JSON config names a generator, an algorithm
//! and a seed list; the runner fans out over seeds and merges results in
//! seed order, so output never depends on the worker count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::multiunit::{brute_optimum, crossing_optimum, fptas_allocate, MarginalVector};
use crate::rat::{self, int, Rat};
use crate::rng;
use crate::simultaneous::hard::binary_optimum;
use crate::simultaneous::harness::{exact_report, silent, top_set_first_come, truncated_report, SimAlgorithm};
use crate::simultaneous::{gen_hard_general, run_simultaneous, GeneralParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    /// `from..to`, end excluded.
    Range { from: u64, to: u64 },
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { from, to } => (*from..*to).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", content = "params", rename_all = "kebab-case")]
pub enum Generator {
    /// Random non-increasing integer marginals in `0..=max_marginal`.
    MuConcave { m: usize, players: Vec<usize>, max_marginal: i64 },
    /// The general hard distribution; `eps` is `"p/q"`.
    HardGeneral {
        m: usize,
        eps: String,
        t: usize,
        #[serde(default)]
        group_size: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Algorithm {
    Fptas { eps: Vec<String> },
    Crossing,
    FirstCome,
    Silent,
    ExactReport,
    Truncated { bits: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    /// Wall-clock limit; seeds not started in time are dropped.
    pub time_ms: Option<u64>,
    /// Most seeds to run.
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(flatten)]
    pub generator: Generator,
    pub algorithm: Algorithm,
    pub seeds: Seeds,
    #[serde(default)]
    pub out: Outputs,
    #[serde(default)]
    pub budget: Budget,
}

/// Which CSV layout a pipeline writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    MultiUnit,
    Simultaneous,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Input(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.to_vec().is_empty() {
            return Err(Error::Input("seed list is empty".into()));
        }
        for p in [&self.out.csv, &self.out.summary].into_iter().flatten() {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty());
            if let Some(d) = dir {
                if !d.is_dir() {
                    return Err(Error::Input(format!("output directory {} does not exist", d.display())));
                }
            }
        }
        match (&self.generator, &self.algorithm) {
            (Generator::MuConcave { m, players, max_marginal }, alg) => {
                if *m == 0 || players.is_empty() || players.contains(&0) || *max_marginal < 0 {
                    return Err(Error::Input("mu-concave needs m >= 1, positive player counts and max_marginal >= 0".into()));
                }
                match alg {
                    Algorithm::Fptas { eps } => {
                        if eps.is_empty() {
                            return Err(Error::Input("fptas needs at least one eps".into()));
                        }
                        for e in eps {
                            let r = rat::parse(e)?;
                            if r <= rat::zero() || r >= rat::one() {
                                return Err(Error::Input(format!("eps {e} outside (0, 1)")));
                            }
                        }
                    }
                    Algorithm::Crossing => {
                        if players.iter().any(|&n| n != 2) {
                            return Err(Error::Input("crossing runs on two players".into()));
                        }
                    }
                    other => return Err(Error::Input(format!("{other:?} does not run on multi-unit instances"))),
                }
            }
            (Generator::HardGeneral { .. }, Algorithm::Fptas { .. } | Algorithm::Crossing) => {
                return Err(Error::Input("multi-unit algorithms do not run on hard-general instances".into()));
            }
            (Generator::HardGeneral { .. }, _) => {
                self.general_params()?;
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        match self.generator {
            Generator::MuConcave { .. } => Layout::MultiUnit,
            Generator::HardGeneral { .. } => Layout::Simultaneous,
        }
    }

    fn general_params(&self) -> Result<GeneralParams> {
        let Generator::HardGeneral { m, eps, t, group_size } = &self.generator else {
            return Err(Error::Input("not a hard-general config".into()));
        };
        let bad = || Error::Input(format!("eps must look like p/q, got {eps:?}"));
        let (p, q) = eps.split_once('/').ok_or_else(bad)?;
        let eps = (p.trim().parse().map_err(|_| bad())?, q.trim().parse().map_err(|_| bad())?);
        Ok(GeneralParams { m: *m, eps, t: *t, group_size: *group_size, round: false })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Welfare,
    Opt,
    Ratio,
    Queries,
    Bits,
    Violations,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Welfare => "welfare",
            Metric::Opt => "opt",
            Metric::Ratio => "ratio",
            Metric::Queries => "queries",
            Metric::Bits => "bits",
            Metric::Violations => "violations",
        }
    }
}

/// One metric of one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    /// Summary group, e.g. `"n=2 eps=1/4"`.
    pub group: String,
    pub metric: Metric,
    pub value: Rat,
    pub wall_ms: u64,
}

/// One CSV line before formatting.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub eps: Rat,
    pub welfare: Rat,
    pub opt: Rat,
    pub queries: usize,
    pub bits: usize,
    pub violation: bool,
}

impl Record {
    pub fn ratio(&self) -> Rat {
        if self.opt == rat::zero() {
            rat::one()
        } else {
            &self.welfare / &self.opt
        }
    }

    fn group(&self, layout: Layout) -> String {
        match layout {
            Layout::MultiUnit => format!("n={} eps={}", self.n, rat::to_text(&self.eps)),
            Layout::Simultaneous => "all".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    pub layout: Layout,
    pub records: Vec<Record>,
    pub rows: Vec<ResultRow>,
    pub seeds_requested: usize,
    pub seeds_done: usize,
    pub incomplete: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stat {
    #[serde(with = "rat::text")]
    pub min: Rat,
    #[serde(with = "rat::text")]
    pub mean: Rat,
    #[serde(with = "rat::text")]
    pub max: Rat,
}

impl ExperimentReport {
    pub fn violations(&self) -> usize {
        self.records.iter().filter(|r| r.violation).count()
    }

    /// Min, mean and max per group and metric.
    pub fn stats(&self) -> BTreeMap<String, BTreeMap<&'static str, Stat>> {
        let mut acc: BTreeMap<String, BTreeMap<Metric, Vec<&Rat>>> = BTreeMap::new();
        for r in &self.rows {
            acc.entry(r.group.clone()).or_default().entry(r.metric).or_default().push(&r.value);
        }
        acc.into_iter()
            .map(|(g, ms)| {
                let stats = ms
                    .into_iter()
                    .map(|(m, vs)| {
                        let sum = vs.iter().fold(rat::zero(), |a, v| a + *v);
                        let stat = Stat {
                            min: vs.iter().min().map(|v| (*v).clone()).unwrap_or_default(),
                            mean: sum / int(vs.len() as i64),
                            max: vs.iter().max().map(|v| (*v).clone()).unwrap_or_default(),
                        };
                        (m.name(), stat)
                    })
                    .collect();
                (g, stats)
            })
            .collect()
    }

    pub fn summary(&self) -> Value {
        json!({
            "experiment": self.experiment,
            "records": self.records.len(),
            "seeds_requested": self.seeds_requested,
            "seeds_done": self.seeds_done,
            "incomplete": self.incomplete,
            "violations": self.violations(),
            "groups": self.stats(),
        })
    }

    pub fn csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        match self.layout {
            Layout::MultiUnit => {
                w.write_record(["m", "n", "eps", "welfare", "opt", "ratio", "queries"])?;
                for r in &self.records {
                    w.write_record([
                        r.m.to_string(),
                        r.n.to_string(),
                        rat::to_text(&r.eps),
                        rat::to_text(&r.welfare),
                        rat::to_text(&r.opt),
                        rat::to_text(&r.ratio()),
                        r.queries.to_string(),
                    ])?;
                }
            }
            Layout::Simultaneous => {
                w.write_record(["seed", "welfare", "opt", "ratio", "bits"])?;
                for r in &self.records {
                    w.write_record([
                        r.seed.to_string(),
                        rat::to_text(&r.welfare),
                        rat::to_text(&r.opt),
                        rat::to_text(&r.ratio()),
                        r.bits.to_string(),
                    ])?;
                }
            }
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    /// Writes whichever outputs the config names.
    pub fn write(&self, out: &Outputs) -> Result<()> {
        if let Some(p) = &out.csv {
            std::fs::write(p, self.csv_bytes()?)?;
        }
        if let Some(p) = &out.summary {
            std::fs::write(p, serde_json::to_string_pretty(&self.summary())? + "\n")?;
        }
        Ok(())
    }
}

/// Random instance with non-increasing integer marginals.
pub fn random_marginals(experiment: &str, seed: u64, label: &str, m: usize, max: i64) -> MarginalVector {
    let mut r = rng::stream(experiment, seed, label);
    let mut marg: Vec<i64> = (0..m).map(|_| r.random_range(0..=max)).collect();
    marg.sort_unstable_by(|a, b| b.cmp(a));
    MarginalVector::from_ints(&marg).expect("sorted non-negative marginals")
}

fn sim_algorithm(alg: &Algorithm, n: usize, m: usize) -> Result<SimAlgorithm> {
    match alg {
        Algorithm::FirstCome => top_set_first_come(m),
        Algorithm::Silent => Ok(silent(n, m)),
        Algorithm::ExactReport => exact_report(m),
        Algorithm::Truncated { bits } => Ok(truncated_report(*bits, n, m)),
        other => Err(Error::Input(format!("{other:?} is not a simultaneous algorithm"))),
    }
}

fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Record>> {
    let name = cfg.experiment.as_str();
    match (&cfg.generator, &cfg.algorithm) {
        (Generator::MuConcave { m, players, max_marginal }, alg) => {
            let mut out = Vec::new();
            for &n in players {
                let vals: Vec<MarginalVector> =
                    (0..n).map(|i| random_marginals(name, seed, &format!("n{n}-bidder{i}"), *m, *max_marginal)).collect();
                let opt = brute_optimum(&vals)?.welfare;
                match alg {
                    Algorithm::Fptas { eps } => {
                        for e in eps {
                            let eps = rat::parse(e)?;
                            let f = fptas_allocate(&vals, &eps)?;
                            let welfare = f.allocation.welfare;
                            let violation = welfare < (rat::one() - &eps) * &opt;
                            out.push(Record { seed, m: *m, n, eps, welfare, opt: opt.clone(), queries: f.queries, bits: 0, violation });
                        }
                    }
                    Algorithm::Crossing => {
                        let c = crossing_optimum(&vals[0], &vals[1])?;
                        let violation = c.welfare != opt;
                        out.push(Record { seed, m: *m, n, eps: rat::zero(), welfare: c.welfare, opt, queries: c.queries, bits: 0, violation });
                    }
                    other => return Err(Error::Input(format!("{other:?} does not run on multi-unit instances"))),
                }
            }
            Ok(out)
        }
        (Generator::HardGeneral { .. }, alg) => {
            let h = gen_hard_general(&cfg.general_params()?, seed)?;
            let n = h.instance.players.len();
            let m = h.instance.m;
            let run = run_simultaneous(&sim_algorithm(alg, n, m)?, &h.instance)?;
            let (opt, _) = binary_optimum(&h.instance)?;
            let violation = run.welfare > opt;
            Ok(vec![Record { seed, m, n, eps: rat::zero(), welfare: run.welfare, opt, queries: 0, bits: run.max_bits, violation }])
        }
    }
}

/// Runs every seed, keeping the longest prefix (in seed order) that
/// finished within the budget. `budget_ms` overrides the config's limit.
pub fn run_experiment(cfg: &ExperimentConfig, budget_ms: Option<u64>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let seeds = cfg.seeds.to_vec();
    let cap = cfg.budget.samples.unwrap_or(usize::MAX).min(seeds.len());
    let limit = budget_ms.or(cfg.budget.time_ms).map(Duration::from_millis);
    let start = Instant::now();
    let done: Vec<Option<Result<(Vec<Record>, u64)>>> = rng::with_pool(|| {
        seeds[..cap]
            .par_iter()
            .map(|&seed| {
                if limit.is_some_and(|l| start.elapsed() >= l) {
                    return None;
                }
                let t = Instant::now();
                let res = run_seed(cfg, seed);
                let ms = t.elapsed().as_millis() as u64;
                if limit.is_some_and(|l| start.elapsed() > l) {
                    return None;
                }
                Some(res.map(|r| (r, ms)))
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut rows = Vec::new();
    let mut seeds_done = 0;
    for d in done {
        let Some(res) = d else { break };
        let (recs, ms) = res?;
        seeds_done += 1;
        for r in recs {
            let group = r.group(cfg.layout());
            let mut push = |metric, value| rows.push(ResultRow { experiment: cfg.experiment.clone(), seed: r.seed, group: group.clone(), metric, value, wall_ms: ms });
            push(Metric::Welfare, r.welfare.clone());
            push(Metric::Opt, r.opt.clone());
            push(Metric::Ratio, r.ratio());
            match cfg.layout() {
                Layout::MultiUnit => push(Metric::Queries, int(r.queries as i64)),
                Layout::Simultaneous => push(Metric::Bits, int(r.bits as i64)),
            }
            push(Metric::Violations, int(i64::from(r.violation)));
            records.push(r);
        }
    }
    Ok(ExperimentReport {
        experiment: cfg.experiment.clone(),
        layout: cfg.layout(),
        records,
        rows,
        seeds_requested: seeds.len(),
        seeds_done,
        incomplete: seeds_done < seeds.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json_str(text)
    }

    #[test]
    fn empty_seed_list_is_a_load_error() {
        let e = cfg(r#"{"experiment":"x","generator":"mu-concave","params":{"m":4,"players":[2],"max_marginal":5},"algorithm":{"name":"crossing"},"seeds":[]}"#);
        assert!(matches!(e, Err(Error::Input(_))));
        let e = cfg(r#"{"experiment":"x","generator":"mu-concave","params":{"m":4,"players":[2],"max_marginal":5},"algorithm":{"name":"crossing"},"seeds":{"from":3,"to":3}}"#);
        assert!(matches!(e, Err(Error::Input(_))));
    }

    #[test]
    fn schema_errors_carry_a_location() {
        let e = cfg("{\"experiment\": \"x\",\n \"seeds\": [1,}").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = cfg(r#"{"experiment":"x","generator":"nope","params":{},"algorithm":{"name":"crossing"},"seeds":[1]}"#);
        assert!(e.is_err());
    }

    #[test]
    fn crossing_rows_match_the_optimum() {
        let c = cfg(r#"{"experiment":"x","generator":"mu-concave","params":{"m":30,"players":[2],"max_marginal":50},"algorithm":{"name":"crossing"},"seeds":[1,2,3]}"#).unwrap();
        let r = run_experiment(&c, None).unwrap();
        assert_eq!(r.records.len(), 3);
        assert!(r.records.iter().all(|x| x.welfare == x.opt));
        assert!(!r.incomplete);
        let text = String::from_utf8(r.csv_bytes().unwrap()).unwrap();
        assert!(text.starts_with("m,n,eps,welfare,opt,ratio,queries\n30,2,0,"));
    }

    #[test]
    fn sample_budget_truncates_and_flags() {
        let c = cfg(r#"{"experiment":"x","generator":"mu-concave","params":{"m":5,"players":[2],"max_marginal":5},"algorithm":{"name":"crossing"},"seeds":{"from":0,"to":10},"budget":{"samples":4}}"#).unwrap();
        let r = run_experiment(&c, None).unwrap();
        assert_eq!(r.seeds_done, 4);
        assert!(r.incomplete);
        assert_eq!(r.summary()["incomplete"], json!(true));
    }

    #[test]
    fn mean_is_exact() {
        let c = cfg(r#"{"experiment":"x","generator":"mu-concave","params":{"m":6,"players":[1],"max_marginal":9},"algorithm":{"name":"fptas","eps":["1/2"]},"seeds":[0,1,2]}"#).unwrap();
        let r = run_experiment(&c, None).unwrap();
        let s = r.stats();
        let w = &s["n=1 eps=1/2"]["welfare"];
        let sum = r.records.iter().fold(rat::zero(), |a, x| a + &x.welfare);
        assert_eq!(w.mean, sum / int(3));
    }
}
