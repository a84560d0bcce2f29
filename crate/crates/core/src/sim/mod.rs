//! Forward-in-time simulation of single-parent lineages.
//!
//! Each replicate builds a pedigree from distinct founders, draws Q uniformly from the live
//! generations and counts the other live individuals whose profile matches Q's (`K_q`),
//! recording the meiosis distance of every matcher. Replicate `i` is seeded with
//! `seed + i`, so results do not depend on scheduling.

mod pedigree;

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::GDistribution;
use crate::model::{HaplotypeDatabase, MatchPlan, MatchPolicy, Panel};

pub use pedigree::{simulate_population, Individual, Pedigree};

/// Individuals per generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PopulationSchedule {
    Constant { size: usize },
    /// `round(initial * exp(rate * t))` in generation `t`, at least 1.
    Exponential { initial: usize, rate: f64 },
}

impl PopulationSchedule {
    pub fn size_at(&self, t: usize) -> usize {
        match *self {
            PopulationSchedule::Constant { size } => size,
            PopulationSchedule::Exponential { initial, rate } => {
                ((initial as f64) * (rate * t as f64).exp()).round().max(1.0) as usize
            }
        }
    }

    pub fn sizes(&self, generations: usize) -> Vec<usize> {
        (0..generations).map(|t| self.size_at(t)).collect()
    }
}

/// How Q is chosen in each replicate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QSelection {
    #[default]
    RandomIndividual,
}

fn default_dispersion() -> f64 {
    1.0
}

fn default_max_individuals() -> u64 {
    100_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub generations: usize,
    pub population: PopulationSchedule,
    /// 1 gives Wright-Fisher parent choice; larger values draw per-generation parent weights
    /// from a symmetric Dirichlet with concentration `1 / (dispersion - 1)`.
    #[serde(default = "default_dispersion")]
    pub offspring_dispersion: f64,
    pub panel: Panel,
    pub live_generations: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub q_selection: QSelection,
    #[serde(default = "default_max_individuals")]
    pub max_individuals: u64,
    #[serde(default)]
    pub match_policy: MatchPolicy,
}

impl SimConfig {
    /// Constant-size population with Wright-Fisher parent choice.
    pub fn constant(panel: Panel, size: usize, generations: usize, live_generations: usize) -> Self {
        Self {
            generations,
            population: PopulationSchedule::Constant { size },
            offspring_dispersion: 1.0,
            panel,
            live_generations,
            replicates: 1,
            seed: 0,
            q_selection: QSelection::RandomIndividual,
            max_individuals: default_max_individuals(),
            match_policy: MatchPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.generations == 0 {
            return Err(invalid("generations", "must be at least 1"));
        }
        if self.live_generations == 0 || self.live_generations > self.generations {
            return Err(invalid(
                "live_generations",
                format!("must be in 1..={} (generations)", self.generations),
            ));
        }
        if self.replicates == 0 {
            return Err(invalid("replicates", "must be at least 1"));
        }
        if !self.offspring_dispersion.is_finite() || self.offspring_dispersion < 1.0 {
            return Err(invalid(
                "offspring_dispersion",
                format!("{} must be a finite value >= 1", self.offspring_dispersion),
            ));
        }
        match self.population {
            PopulationSchedule::Constant { size: 0 } => {
                return Err(invalid("population.size", "must be at least 1"))
            }
            PopulationSchedule::Exponential { initial: 0, .. } => {
                return Err(invalid("population.initial", "must be at least 1"))
            }
            PopulationSchedule::Exponential { rate, .. } if !rate.is_finite() => {
                return Err(invalid("population.rate", "must be finite"))
            }
            _ => {}
        }
        let total: u64 = self
            .population
            .sizes(self.generations)
            .iter()
            .map(|&s| s as u64)
            .sum();
        if total > self.max_individuals {
            return Err(Error::ResourceLimit {
                requested: total,
                cap: self.max_individuals,
            });
        }
        Ok(())
    }

    fn plan(&self, subset: Option<&[usize]>) -> Result<MatchPlan> {
        MatchPlan::new(&self.panel, subset, self.match_policy)
    }
}

/// One simulated pedigree with its randomly chosen Q. `rng` continues the replicate's stream
/// for any further sampling.
pub struct Replicate {
    pub index: usize,
    pub pedigree: Pedigree,
    pub q: Individual,
    pub rng: ChaCha8Rng,
}

pub fn replicate_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64))
}

pub fn run_replicate(config: &SimConfig, index: usize) -> Result<Replicate> {
    let mut rng = replicate_rng(config.seed, index);
    let pedigree = simulate_population(config, &mut rng)?;
    let q = match config.q_selection {
        QSelection::RandomIndividual => {
            pedigree.live_individual(rng.random_range(0..pedigree.live_count()))
        }
    };
    Ok(Replicate {
        index,
        pedigree,
        q,
        rng,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchCount {
    pub k_q: u64,
    /// Each matcher with its meiosis distance to Q (`None`: different founder lineages).
    pub matchers: Vec<(Individual, Option<u32>)>,
}

/// Count live individuals other than `q` matching `q` under `plan`, tracing each matcher's
/// lineage back to its common ancestor with `q`.
pub fn count_matches(pedigree: &Pedigree, q: Individual, plan: &MatchPlan) -> MatchCount {
    let q_alleles = pedigree.haplotype(q);
    let matchers: Vec<(Individual, Option<u32>)> = (0..pedigree.live_count())
        .map(|k| pedigree.live_individual(k))
        .filter(|&x| x != q && plan.matches(q_alleles, pedigree.haplotype(x)))
        .map(|x| (x, pedigree.meiosis_distance(q, x)))
        .collect();
    MatchCount {
        k_q: matchers.len() as u64,
        matchers,
    }
}

/// A simple random sample of live individuals other than Q.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDatabase {
    pub members: Vec<Individual>,
    pub n: usize,
    pub k_q: u64,
}

impl SampledDatabase {
    pub fn to_database(&self, pedigree: &Pedigree, panel: &Panel) -> Result<HaplotypeDatabase> {
        HaplotypeDatabase::new(
            panel.clone(),
            self.members.iter().map(|&m| pedigree.to_haplotype(m)).collect(),
        )
    }
}

pub fn sample_database(
    pedigree: &Pedigree,
    q: Individual,
    n: usize,
    plan: &MatchPlan,
    rng: &mut ChaCha8Rng,
) -> Result<SampledDatabase> {
    if n == 0 {
        return Err(invalid("database size", "must be at least 1"));
    }
    let available = pedigree.live_count() - 1;
    if n > available {
        return Err(Error::SampleTooLarge {
            requested: n,
            available,
        });
    }
    let q_flat = pedigree.live_index(q);
    let q_alleles = pedigree.haplotype(q);
    let mut members = Vec::with_capacity(n);
    let mut k_q = 0;
    for k in index::sample(rng, available, n).into_iter() {
        let member = pedigree.live_individual(if k >= q_flat { k + 1 } else { k });
        if plan.matches(q_alleles, pedigree.haplotype(member)) {
            k_q += 1;
        }
        members.push(member);
    }
    Ok(SampledDatabase { members, n, k_q })
}

/// Retain only replicates whose sampled database of size `n` holds exactly `observed_k_q`
/// copies of Q's profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    pub n: usize,
    pub observed_k_q: u64,
    #[serde(default = "default_min_accepted")]
    pub min_accepted: usize,
}

fn default_min_accepted() -> usize {
    10
}

impl Conditioning {
    pub fn new(n: usize, observed_k_q: u64) -> Self {
        Self {
            n,
            observed_k_q,
            min_accepted: default_min_accepted(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatabaseRecord {
    pub n: usize,
    pub k_q: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub live_size: usize,
    pub q_generation: usize,
    pub k_q: u64,
    pub cross_founder_matches: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub database: Option<DatabaseRecord>,
    pub accepted: bool,
    #[serde(skip)]
    distances: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KqQuantiles {
    pub p50: u64,
    pub p95: u64,
    pub p99: u64,
}

/// Smallest value whose empirical CDF reaches `p`.
pub fn quantile(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutcome {
    pub replicates: Vec<ReplicateRecord>,
    pub accepted: usize,
    pub quantiles: KqQuantiles,
    pub mean_k_q: f64,
    /// K_q value -> number of accepted replicates.
    pub kq_histogram: BTreeMap<u64, u64>,
    /// Meiosis distance -> number of matchers at that distance, over accepted replicates.
    pub distance_histogram: BTreeMap<u32, u64>,
    pub cross_founder_matches: u64,
}

impl SimOutcome {
    fn from_records(replicates: Vec<ReplicateRecord>) -> Self {
        let kept: Vec<&ReplicateRecord> = replicates.iter().filter(|r| r.accepted).collect();
        let mut values: Vec<u64> = kept.iter().map(|r| r.k_q).collect();
        values.sort_unstable();
        let mut kq_histogram = BTreeMap::new();
        for &v in &values {
            *kq_histogram.entry(v).or_insert(0) += 1;
        }
        let mut distance_histogram = BTreeMap::new();
        for r in &kept {
            for &d in &r.distances {
                *distance_histogram.entry(d).or_insert(0) += 1;
            }
        }
        let mean_k_q = if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<u64>() as f64 / values.len() as f64
        };
        Self {
            accepted: kept.len(),
            quantiles: KqQuantiles {
                p50: quantile(&values, 0.5),
                p95: quantile(&values, 0.95),
                p99: quantile(&values, 0.99),
            },
            mean_k_q,
            kq_histogram,
            distance_histogram,
            cross_founder_matches: kept.iter().map(|r| r.cross_founder_matches).sum(),
            replicates,
        }
    }

    /// Accepted per-replicate K_q values in replicate order.
    pub fn k_q_values(&self) -> Vec<u64> {
        self.replicates
            .iter()
            .filter(|r| r.accepted)
            .map(|r| r.k_q)
            .collect()
    }

    /// The matcher meiosis-distance histogram as a distribution for `G`.
    pub fn g_distribution(&self) -> Result<GDistribution> {
        if self.distance_histogram.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        GDistribution::from_counts(self.distance_histogram.iter().map(|(&g, &c)| (g, c)))
    }
}

/// Distribution of `K_q` over replicates, optionally restricted to a locus subset and
/// conditioned on a sampled database count.
pub fn kq_distribution(
    config: &SimConfig,
    condition: Option<&Conditioning>,
    subset: Option<&[usize]>,
) -> Result<SimOutcome> {
    config.validate()?;
    let plan = config.plan(subset)?;
    let records = (0..config.replicates)
        .into_par_iter()
        .map(|i| {
            let mut rep = run_replicate(config, i)?;
            let counted = count_matches(&rep.pedigree, rep.q, &plan);
            let database = condition
                .map(|c| sample_database(&rep.pedigree, rep.q, c.n, &plan, &mut rep.rng))
                .transpose()?;
            let accepted = match (condition, &database) {
                (Some(c), Some(db)) => db.k_q == c.observed_k_q,
                _ => true,
            };
            Ok(ReplicateRecord {
                index: i,
                live_size: rep.pedigree.live_count(),
                q_generation: rep.q.generation,
                k_q: counted.k_q,
                cross_founder_matches: counted.matchers.iter().filter(|(_, d)| d.is_none()).count()
                    as u64,
                database: database.map(|db| DatabaseRecord { n: db.n, k_q: db.k_q }),
                accepted,
                distances: counted.matchers.iter().filter_map(|(_, d)| *d).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let outcome = SimOutcome::from_records(records);
    if let Some(c) = condition {
        if outcome.accepted < c.min_accepted {
            return Err(Error::ConditioningRejected {
                accepted: outcome.accepted,
                replicates: config.replicates,
                rate: outcome.accepted as f64 / config.replicates as f64,
                minimum: c.min_accepted,
            });
        }
    }
    Ok(outcome)
}

/// Pooled counts of (Q, X) pairs and matching pairs by meiosis distance.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MatchDecay {
    /// distance -> (pairs, matching pairs)
    pub by_distance: BTreeMap<u32, (u64, u64)>,
    pub cross_founder_pairs: u64,
    pub cross_founder_matches: u64,
}

impl MatchDecay {
    fn merge(mut self, other: MatchDecay) -> MatchDecay {
        for (g, (p, m)) in other.by_distance {
            let e = self.by_distance.entry(g).or_insert((0, 0));
            e.0 += p;
            e.1 += m;
        }
        self.cross_founder_pairs += other.cross_founder_pairs;
        self.cross_founder_matches += other.cross_founder_matches;
        self
    }
}

/// Which (Q, X) pairs a replicate contributes to [`match_decay`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairSampling {
    /// Q against every other live individual. Pairs from one replicate share lineage
    /// segments, so their match indicators are correlated.
    #[default]
    AllPairs,
    /// One uniformly chosen X per meiosis distance (and one cross-founder X). Pairs at a
    /// given distance then come from distinct replicates and are independent.
    OnePerDistance,
}

/// For every replicate, compare Q with other live individuals and tabulate matches by
/// meiosis distance.
pub fn match_decay(config: &SimConfig, subset: Option<&[usize]>, sampling: PairSampling) -> Result<MatchDecay> {
    config.validate()?;
    let plan = config.plan(subset)?;
    let parts = (0..config.replicates)
        .into_par_iter()
        .map(|i| {
            let mut rep = run_replicate(config, i)?;
            let ped = &rep.pedigree;
            let q_alleles = ped.haplotype(rep.q);
            let q_flat = ped.live_index(rep.q);
            let hit = |k: usize| plan.matches(q_alleles, ped.haplotype(ped.live_individual(k))) as u64;
            let mut groups: BTreeMap<Option<u32>, Vec<usize>> = BTreeMap::new();
            for (k, d) in ped.distances_from(rep.q).into_iter().enumerate() {
                if k != q_flat {
                    groups.entry(d).or_default().push(k);
                }
            }
            let mut decay = MatchDecay::default();
            for (d, members) in groups {
                let (pairs, matches) = match sampling {
                    PairSampling::AllPairs => (members.len() as u64, members.iter().map(|&k| hit(k)).sum()),
                    PairSampling::OnePerDistance => {
                        (1, hit(members[rep.rng.random_range(0..members.len())]))
                    }
                };
                match d {
                    Some(g) => {
                        let e = decay.by_distance.entry(g).or_insert((0, 0));
                        e.0 += pairs;
                        e.1 += matches;
                    }
                    None => {
                        decay.cross_founder_pairs += pairs;
                        decay.cross_founder_matches += matches;
                    }
                }
            }
            Ok(decay)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().fold(MatchDecay::default(), MatchDecay::merge))
}

#[cfg(test)]
mod tests;
