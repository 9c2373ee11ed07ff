//! Empirical frequent-message analysis for one group of the general hard
//! distribution: which joint messages are frequent, and how much a frequent
//! joint message shifts each bidder's interest in each family set.

use std::collections::{BTreeMap, HashMap};

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::rat::{self, int, Rat};
use crate::rng;
use crate::valuation::Valuation;

use super::harness::{PlayerView, SimAlgorithm};

/// One group: `group_size` bidders, a family of `t` sets of size `set_size`
/// over `pool` items, each set owned by a uniformly random bidder, and a
/// uniformly random set marked as the private block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupDistribution {
    pub group_size: usize,
    pub t: usize,
    pub set_size: usize,
    pub pool: usize,
}

impl GroupDistribution {
    /// Group of 4 over 8 items, 8 sets of 4.
    pub fn desk() -> GroupDistribution {
        GroupDistribution { group_size: 4, t: 8, set_size: 4, pool: 8 }
    }

    pub fn family(&self, seed: u64) -> Result<Vec<Bundle>> {
        if self.set_size > self.pool || self.t == 0 || self.group_size == 0 || self.t > 64 {
            return Err(Error::Parameter("need set_size <= pool, 1 <= t <= 64 and a nonempty group".into()));
        }
        let mut r = rng::stream("frequent-messages", seed, "family");
        let items: Vec<usize> = (0..self.pool).collect();
        (0..self.t).map(|_| Bundle::from_items(self.pool, &items.choose_multiple(&mut r, self.set_size).copied().collect::<Vec<_>>())).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Frequent,
    /// Within a factor two of the threshold either way; not classified.
    Borderline,
    Rare,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TupleStats {
    /// One bitstring per bidder.
    pub messages: Vec<String>,
    pub count: usize,
    pub class: Frequency,
    /// Per bidder: sets whose conditional interest frequency exceeds the bias threshold.
    pub biased: Vec<usize>,
    /// Largest conditional interest frequency times the group size.
    #[serde(with = "rat::text")]
    pub max_lift: Rat,
    /// Largest conditional frequency with which one bidder is the special one.
    #[serde(with = "rat::text")]
    pub max_special: Rat,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MessageStats {
    pub algorithm: String,
    pub samples: usize,
    pub bits: usize,
    #[serde(with = "rat::text")]
    pub bias_threshold: Rat,
    /// `bits · group_size`: the most biased sets a frequent tuple may have per bidder.
    pub bound: usize,
    pub tuples: Vec<TupleStats>,
    pub max_biased: usize,
    /// No two samples gave one bidder the same valuation but different messages.
    pub own_valuation_only: bool,
    pub flagged: bool,
}

struct Sample {
    owned: Vec<u64>,
    special: usize,
    msgs: Vec<Vec<bool>>,
}

fn bitstring(b: &[bool]) -> String {
    b.iter().map(|&x| if x { '1' } else { '0' }).collect()
}

/// Samples the group `samples` times, runs the algorithm's message
/// function for every bidder, and tabulates joint messages. The joint
/// message may use at most `bits` bits; a tuple is frequent at probability
/// `4^-bits`. A set is biased for a bidder under a frequent tuple when the
/// conditional frequency of the bidder's interest in it exceeds
/// `factor / group_size` (the prior is `1 / group_size`).
pub fn frequent_message_stats(alg: &SimAlgorithm, dist: &GroupDistribution, samples: usize, bits: usize, factor: u32, seed: u64) -> Result<MessageStats> {
    if bits > 16 {
        return Err(Error::Capability("the frequency table is limited to 16 message bits".into()));
    }
    let fam = dist.family(seed)?;
    let g = dist.group_size;
    let draws: Vec<Result<Sample>> = rng::with_pool(|| {
        (0..samples)
            .into_par_iter()
            .map(|k| {
                let mut r = rng::stream("frequent-messages", seed, &format!("sample-{k}"));
                let owner: Vec<usize> = (0..dist.t).map(|_| r.random_range(0..g)).collect();
                let special = owner[r.random_range(0..dist.t)];
                let mut owned = vec![0u64; g];
                for (a, &i) in owner.iter().enumerate() {
                    owned[i] |= 1 << a;
                }
                let mut msgs = Vec::with_capacity(g);
                for i in 0..g {
                    let sets: Vec<Bundle> = (0..dist.t).filter(|&a| owned[i] >> a & 1 == 1).map(|a| fam[a]).collect();
                    let v = Valuation::AnyOf { m: dist.pool, sets };
                    msgs.push((alg.message)(&PlayerView { player: i, valuation: &v, special: i == special })?);
                }
                let total: usize = msgs.iter().map(|m| m.len()).sum();
                if total > bits {
                    return Err(Error::Budget(format!("group sent {total} bits, budget is {bits}")));
                }
                Ok(Sample { owned, special, msgs })
            })
            .collect()
    });
    let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
    // the tuple table and the own-valuation check, merged in sample order
    let mut table: BTreeMap<Vec<String>, (usize, Vec<Vec<usize>>, Vec<usize>)> = BTreeMap::new();
    let mut seen: Vec<HashMap<u64, Vec<bool>>> = vec![HashMap::new(); g];
    let mut own_valuation_only = true;
    for d in &draws {
        let key: Vec<String> = d.msgs.iter().map(|m| bitstring(m)).collect();
        let e = table.entry(key).or_insert_with(|| (0, vec![vec![0; dist.t]; g], vec![0; g]));
        e.0 += 1;
        e.2[d.special] += 1;
        for i in 0..g {
            for a in 0..dist.t {
                if d.owned[i] >> a & 1 == 1 {
                    e.1[i][a] += 1;
                }
            }
            match seen[i].get(&d.owned[i]) {
                Some(prev) if *prev != d.msgs[i] => own_valuation_only = false,
                Some(_) => {}
                None => {
                    seen[i].insert(d.owned[i], d.msgs[i].clone());
                }
            }
        }
    }
    let cut = Rat::new(1.into(), num_bigint::BigInt::from(4u64.pow(bits as u32)));
    let threshold = Rat::new(i64::from(factor).into(), (g as i64).into());
    let n = int(samples as i64);
    let mut tuples = Vec::new();
    for (messages, (count, member, special)) in table {
        let freq = int(count as i64) / &n;
        let class = if freq >= &cut * int(2) {
            Frequency::Frequent
        } else if freq < &cut / int(2) {
            Frequency::Rare
        } else {
            Frequency::Borderline
        };
        let c = int(count as i64);
        let biased = member.iter().map(|row| row.iter().filter(|&&k| int(k as i64) / &c > threshold).count()).collect();
        let top = member.iter().flatten().max().copied().unwrap_or(0);
        let max_lift = int(top as i64) * int(g as i64) / &c;
        let max_special = int(special.iter().max().copied().unwrap_or(0) as i64) / &c;
        tuples.push(TupleStats { messages, count, class, biased, max_lift, max_special });
    }
    let max_biased = tuples.iter().filter(|t| t.class == Frequency::Frequent).flat_map(|t| t.biased.iter().copied()).max().unwrap_or(0);
    let bound = bits * g;
    Ok(MessageStats {
        algorithm: alg.name.clone(),
        samples,
        bits,
        bias_threshold: threshold,
        bound,
        tuples,
        max_biased,
        own_valuation_only,
        flagged: max_biased >= bound || !own_valuation_only,
    })
}
