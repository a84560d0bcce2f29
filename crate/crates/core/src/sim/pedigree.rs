use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use super::SimConfig;
use crate::error::{Error, Result};
use crate::model::{Haplotype, MatchPlan, Panel};

/// Position of one individual: generation 0 holds the founders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct Individual {
    pub generation: usize,
    pub index: usize,
}

const NO_COALESCENCE: u32 = u32::MAX;

/// A simulated single-parent pedigree.
///
/// Parent links are kept for every generation; haplotypes only for the live generations.
#[derive(Debug, Clone)]
pub struct Pedigree {
    loci: usize,
    sizes: Vec<usize>,
    /// `parents[t][i]` is the index in generation `t - 1`; `parents[0]` is empty.
    parents: Vec<Vec<u32>>,
    live_first: usize,
    /// Flat allele storage, `loci` values per individual, one buffer per live generation.
    live: Vec<Vec<i32>>,
    /// Cumulative live counts, `live_offsets[k]` = individuals in live generations before `k`.
    live_offsets: Vec<usize>,
}

impl Pedigree {
    pub fn generations(&self) -> usize {
        self.sizes.len()
    }

    pub fn generation_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn loci(&self) -> usize {
        self.loci
    }

    pub fn first_live_generation(&self) -> usize {
        self.live_first
    }

    pub fn live_count(&self) -> usize {
        *self.live_offsets.last().unwrap_or(&0)
    }

    /// Map a flat live index (generation-major) to an individual.
    pub fn live_individual(&self, k: usize) -> Individual {
        let g = self.live_offsets.partition_point(|&off| off <= k) - 1;
        Individual {
            generation: self.live_first + g,
            index: k - self.live_offsets[g],
        }
    }

    pub fn live_index(&self, ind: Individual) -> usize {
        self.live_offsets[ind.generation - self.live_first] + ind.index
    }

    pub fn is_live(&self, ind: Individual) -> bool {
        ind.generation >= self.live_first
            && ind.generation < self.sizes.len()
            && ind.index < self.sizes[ind.generation]
    }

    /// Alleles of a live individual.
    pub fn haplotype(&self, ind: Individual) -> &[i32] {
        let buf = &self.live[ind.generation - self.live_first];
        &buf[ind.index * self.loci..(ind.index + 1) * self.loci]
    }

    pub fn to_haplotype(&self, ind: Individual) -> Haplotype {
        Haplotype::complete(self.haplotype(ind)).expect("simulated haplotypes are complete")
    }

    pub fn parent(&self, ind: Individual) -> Option<Individual> {
        (ind.generation > 0).then(|| Individual {
            generation: ind.generation - 1,
            index: self.parents[ind.generation][ind.index] as usize,
        })
    }

    /// Meioses from `a` up to the most recent common ancestor and down to `b`, or `None`
    /// when the lineages reach different founders.
    pub fn meiosis_distance(&self, a: Individual, b: Individual) -> Option<u32> {
        let (mut a, mut b) = (a, b);
        let mut steps = 0u32;
        while a.generation > b.generation {
            a = self.parent(a)?;
            steps += 1;
        }
        while b.generation > a.generation {
            b = self.parent(b)?;
            steps += 1;
        }
        while a != b {
            a = self.parent(a)?;
            b = self.parent(b)?;
            steps += 2;
        }
        Some(steps)
    }

    /// Meiosis distance from `q` to every live individual (flat live order), computed in one
    /// forward pass over the pedigree.
    pub fn distances_from(&self, q: Individual) -> Vec<Option<u32>> {
        let mut ancestors = vec![0usize; q.generation + 1];
        let mut cur = q;
        loop {
            ancestors[cur.generation] = cur.index;
            match self.parent(cur) {
                Some(p) => cur = p,
                None => break,
            }
        }
        let mut out = Vec::with_capacity(self.live_count());
        let mut prev: Vec<u32> = Vec::new();
        for t in 0..self.sizes.len() {
            let coal: Vec<u32> = (0..self.sizes[t])
                .map(|i| {
                    if t <= q.generation && ancestors[t] == i {
                        t as u32
                    } else if t == 0 {
                        NO_COALESCENCE
                    } else {
                        prev[self.parents[t][i] as usize]
                    }
                })
                .collect();
            if t >= self.live_first {
                out.extend(coal.iter().map(|&c| {
                    (c != NO_COALESCENCE).then(|| (t as u32 - c) + (q.generation as u32 - c))
                }));
            }
            prev = coal;
        }
        out
    }

    /// Number of children in generation `t + 1` of each parent in generation `t`.
    pub fn offspring_counts(&self, t: usize) -> Vec<u32> {
        let mut counts = vec![0u32; self.sizes[t]];
        if let Some(children) = self.parents.get(t + 1) {
            for &p in children {
                counts[p as usize] += 1;
            }
        }
        counts
    }

    /// Parent-to-child transfers between consecutive live generations and how many of them
    /// changed the profile under `plan`.
    pub fn germline_mismatches(&self, plan: &MatchPlan) -> (u64, u64) {
        let (mut transfers, mut mismatches) = (0u64, 0u64);
        for t in self.live_first + 1..self.sizes.len() {
            for i in 0..self.sizes[t] {
                let child = Individual { generation: t, index: i };
                let parent = self.parent(child).expect("t > 0");
                transfers += 1;
                if !plan.matches(self.haplotype(child), self.haplotype(parent)) {
                    mismatches += 1;
                }
            }
        }
        (transfers, mismatches)
    }
}

/// Draws the set of mutated loci for one transfer.
///
/// A uniform `u < μ` decides whether anything mutates; `u / μ` is then uniform and picks the
/// first mutated locus from its conditional distribution, and later loci mutate independently.
/// This gives exactly independent per-locus Bernoulli(μ_l) mutation with one draw in the
/// common no-mutation case.
struct MutationSampler {
    mu: Vec<f64>,
    any: f64,
    first_cdf: Vec<f64>,
}

impl MutationSampler {
    fn new(panel: &Panel) -> Self {
        let mu: Vec<f64> = panel.loci().iter().map(|l| l.mu).collect();
        let mut survive = 1.0;
        let mut first = Vec::with_capacity(mu.len());
        for &m in &mu {
            first.push(survive * m);
            survive *= 1.0 - m;
        }
        let any = 1.0 - survive;
        let mut acc = 0.0;
        let first_cdf = first
            .iter()
            .map(|p| {
                acc += p / any;
                acc
            })
            .collect();
        Self { mu, any, first_cdf }
    }

    #[inline]
    fn mutate(&self, alleles: &mut [i32], rng: &mut ChaCha8Rng) {
        let u: f64 = rng.random();
        if u >= self.any {
            return;
        }
        let v = u / self.any;
        let first = self
            .first_cdf
            .partition_point(|&c| c <= v)
            .min(self.mu.len() - 1);
        step(&mut alleles[first], rng);
        for (a, &mu) in alleles[first + 1..].iter_mut().zip(&self.mu[first + 1..]) {
            if rng.random::<f64>() < mu {
                step(a, rng);
            }
        }
    }
}

#[inline]
fn step(allele: &mut i32, rng: &mut ChaCha8Rng) {
    if rng.random::<bool>() {
        *allele += 1;
    } else {
        *allele -= 1;
    }
}

/// Founder allele spacing that keeps lineages from different founders apart at every locus.
///
/// Each lineage moves at most one step per generation, so spacing above `2 * generations`
/// rules out cross-founder matches; the second column of a duplicated pair is offset by half
/// the spacing so the pair's columns can never be confused either.
pub(crate) fn founder_spacing(generations: usize) -> i64 {
    (2 * (2 * generations as i64 + 1)).max(10)
}

fn founder_alleles(panel: &Panel, founders: usize, generations: usize) -> Result<Vec<i32>> {
    let spacing = founder_spacing(generations);
    let top = spacing * (founders as i64 + 1);
    if top > i32::MAX as i64 {
        return Err(Error::ResourceLimit {
            requested: top as u64,
            cap: i32::MAX as u64,
        });
    }
    let offsets: Vec<i64> = (0..panel.len())
        .map(|l| match panel.partner(l) {
            Some(p) if p < l => spacing / 2,
            _ => 0,
        })
        .collect();
    let mut out = Vec::with_capacity(founders * panel.len());
    for i in 0..founders {
        for &off in &offsets {
            out.push((spacing * (i as i64 + 1) + off) as i32);
        }
    }
    Ok(out)
}

enum ParentSampler {
    Uniform(usize),
    Weighted(Vec<f64>),
}

impl ParentSampler {
    fn new(parents: usize, dispersion: f64, rng: &mut ChaCha8Rng) -> Self {
        if dispersion <= 1.0 {
            return ParentSampler::Uniform(parents);
        }
        let gamma = Gamma::new(1.0 / (dispersion - 1.0), 1.0).expect("positive shape");
        let mut acc = 0.0;
        let cdf: Vec<f64> = (0..parents)
            .map(|_| {
                acc += gamma.sample(rng);
                acc
            })
            .collect();
        if acc > 0.0 {
            ParentSampler::Weighted(cdf)
        } else {
            ParentSampler::Uniform(parents)
        }
    }

    #[inline]
    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        match self {
            ParentSampler::Uniform(n) => rng.random_range(0..*n),
            ParentSampler::Weighted(cdf) => {
                let total = *cdf.last().expect("non-empty");
                let u = rng.random::<f64>() * total;
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
            }
        }
    }
}

/// Simulate one pedigree forward in time.
pub fn simulate_population(config: &SimConfig, rng: &mut ChaCha8Rng) -> Result<Pedigree> {
    config.validate()?;
    let panel = &config.panel;
    let loci = panel.len();
    let sizes = config.population.sizes(config.generations);
    let total: u64 = sizes.iter().map(|&s| s as u64).sum();
    if total > config.max_individuals {
        return Err(Error::ResourceLimit {
            requested: total,
            cap: config.max_individuals,
        });
    }
    let live_first = config.generations - config.live_generations;
    let sampler = MutationSampler::new(panel);

    let mut current = founder_alleles(panel, sizes[0], config.generations)?;
    let mut parents = Vec::with_capacity(sizes.len());
    parents.push(Vec::new());
    let mut live = Vec::with_capacity(config.live_generations);
    if live_first == 0 {
        live.push(current.clone());
    }
    for t in 1..sizes.len() {
        let chooser = ParentSampler::new(sizes[t - 1], config.offspring_dispersion, rng);
        let mut links = Vec::with_capacity(sizes[t]);
        let mut next = vec![0i32; sizes[t] * loci];
        for child in next.chunks_exact_mut(loci) {
            let p = chooser.sample(rng);
            links.push(p as u32);
            child.copy_from_slice(&current[p * loci..(p + 1) * loci]);
            sampler.mutate(child, rng);
        }
        parents.push(links);
        if t >= live_first {
            live.push(next.clone());
        }
        current = next;
    }
    let mut live_offsets = Vec::with_capacity(live.len() + 1);
    let mut acc = 0;
    live_offsets.push(0);
    for &size in &sizes[live_first..] {
        acc += size;
        live_offsets.push(acc);
    }
    Ok(Pedigree {
        loci,
        sizes,
        parents,
        live_first,
        live,
        live_offsets,
    })
}
