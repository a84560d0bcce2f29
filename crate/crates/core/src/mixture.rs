//! Two-contributor lineage-marker mixtures.
//!
//! Alleles are pooled per marker, where a marker is a single-copy locus or an unordered
//! duplicated pair. Peak heights are not modelled: a mixture is a set of alleles per marker.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::{Haplotype, HaplotypeDatabase, MatchPlan, Panel};
use crate::sim::{self, Individual, Pedigree, SimConfig};

/// A position in a mixture: one locus or a duplicated pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Marker {
    Single(usize),
    Pair(usize, usize),
}

impl Marker {
    pub fn loci(self) -> Vec<usize> {
        match self {
            Marker::Single(i) => vec![i],
            Marker::Pair(i, j) => vec![i, j],
        }
    }

    /// Alleles a single contributor carries at this marker.
    pub fn capacity(self) -> usize {
        match self {
            Marker::Single(_) => 1,
            Marker::Pair(..) => 2,
        }
    }

    fn label(self, panel: &Panel) -> String {
        match self {
            Marker::Single(i) => panel.loci()[i].name.clone(),
            Marker::Pair(i, j) => format!("{}/{}", panel.loci()[i].name, panel.loci()[j].name),
        }
    }
}

/// Markers of a panel in panel order; a pair sits at its first member's position.
pub fn markers(panel: &Panel) -> Vec<Marker> {
    (0..panel.len())
        .filter_map(|i| match panel.partner(i) {
            None => Some(Marker::Single(i)),
            Some(j) if i < j => Some(Marker::Pair(i, j)),
            Some(_) => None,
        })
        .collect()
}

/// Allele sets per marker; `None` where the mixture is unobserved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MixtureProfile {
    markers: Vec<Marker>,
    alleles: Vec<Option<Vec<i32>>>,
}

fn normalise(mut v: Vec<i32>) -> Option<Vec<i32>> {
    v.sort_unstable();
    v.dedup();
    (!v.is_empty()).then_some(v)
}

impl MixtureProfile {
    /// Build from per-locus allele lists; pair members are pooled.
    pub fn from_locus_alleles(panel: &Panel, per_locus: Vec<Vec<i32>>) -> Result<Self> {
        if per_locus.len() != panel.len() {
            return Err(Error::PanelMismatch {
                expected: panel.len(),
                got: per_locus.len(),
            });
        }
        let markers = markers(panel);
        let alleles: Vec<Option<Vec<i32>>> = markers
            .iter()
            .map(|m| normalise(m.loci().iter().flat_map(|&l| per_locus[l].iter().copied()).collect()))
            .collect();
        if alleles.iter().all(Option::is_none) {
            return Err(Error::EmptyHaplotype);
        }
        Ok(Self { markers, alleles })
    }

    pub fn markers(&self) -> &[Marker] {
        &self.markers
    }

    pub fn alleles(&self) -> &[Option<Vec<i32>>] {
        &self.alleles
    }

    /// Panel loci observed in the mixture.
    pub fn observed_loci(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .markers
            .iter()
            .zip(&self.alleles)
            .filter(|(_, a)| a.is_some())
            .flat_map(|(m, _)| m.loci())
            .collect();
        out.sort_unstable();
        out
    }

    fn check_panel(&self, panel: &Panel) -> Result<()> {
        if self.markers != markers(panel) {
            return Err(invalid("mixture", "mixture was built on a different panel"));
        }
        Ok(())
    }
}

/// Observed alleles of `h` at `marker`, or `None` unless every locus of the marker is observed.
fn marker_alleles(h: &Haplotype, marker: Marker) -> Option<Vec<i32>> {
    marker.loci().iter().map(|&l| h.get(l)).collect()
}

/// Per-marker union of two profiles' alleles.
pub fn mixture_union(a: &Haplotype, b: &Haplotype, panel: &Panel) -> Result<MixtureProfile> {
    a.check_panel(panel)?;
    b.check_panel(panel)?;
    let per_locus = (0..panel.len())
        .map(|l| a.get(l).into_iter().chain(b.get(l)).collect())
        .collect();
    MixtureProfile::from_locus_alleles(panel, per_locus)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Containment {
    pub contained: bool,
    /// Panel loci checked (observed in both), ascending.
    pub checked: Vec<usize>,
}

/// Whether every allele of `q` is present in the mixture, over markers observed in both.
pub fn mixture_contains(m: &MixtureProfile, q: &Haplotype, panel: &Panel) -> Result<Containment> {
    m.check_panel(panel)?;
    q.check_panel(panel)?;
    let mut checked = Vec::new();
    let mut contained = true;
    for (marker, set) in m.markers.iter().zip(&m.alleles) {
        let Some(set) = set else { continue };
        for l in marker.loci() {
            if let Some(a) = q.get(l) {
                checked.push(l);
                contained &= set.binary_search(&a).is_ok();
            }
        }
    }
    if checked.is_empty() {
        return Err(Error::NoComparableLoci);
    }
    checked.sort_unstable();
    Ok(Containment { contained, checked })
}

/// Allowed companion alleles at one marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Candidates {
    Single { locus: usize, alleles: Vec<i32> },
    /// Unordered pairs, each as `(low, high)`.
    Pair { loci: (usize, usize), pairs: Vec<(i32, i32)> },
}

impl Candidates {
    pub fn len(&self) -> usize {
        match self {
            Candidates::Single { alleles, .. } => alleles.len(),
            Candidates::Pair { pairs, .. } => pairs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn admits(&self, x: &Haplotype) -> bool {
        match self {
            Candidates::Single { locus, alleles } => {
                x.get(*locus).is_some_and(|a| alleles.contains(&a))
            }
            Candidates::Pair { loci: (i, j), pairs } => match (x.get(*i), x.get(*j)) {
                (Some(a), Some(b)) => pairs.contains(&crate::model::sorted_pair(a, b)),
                _ => false,
            },
        }
    }
}

/// Companion profiles that together with `q` explain the mixture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Companions {
    pub candidates: Vec<Candidates>,
    /// Product of per-marker candidate counts (saturating).
    pub count: u128,
    /// Markers not constraining the companion because the mixture or `q` is unobserved there.
    pub unconstrained: Vec<String>,
}

impl Companions {
    /// Whether `x` is one of the enumerated companions.
    pub fn admits(&self, x: &Haplotype) -> bool {
        self.candidates.iter().all(|c| c.admits(x))
    }

    /// Database profiles that are possible companions.
    pub fn in_database(&self, db: &HaplotypeDatabase) -> usize {
        db.haplotypes().iter().filter(|h| self.admits(h)).count()
    }
}

/// Enumerate the second contributor's possible alleles, marker by marker.
///
/// The companion must carry every mixture allele missing from `q` and nothing outside the
/// mixture. A marker needing more alleles than one contributor carries means the mixture
/// cannot come from `q` plus one other individual.
pub fn companion_count(m: &MixtureProfile, q: &Haplotype, panel: &Panel) -> Result<Companions> {
    if !mixture_contains(m, q, panel)?.contained {
        return Err(invalid("mixture", "the reference profile is not contained in the mixture"));
    }
    let mut candidates = Vec::new();
    let mut unconstrained = Vec::new();
    let mut count: u128 = 1;
    for (&marker, set) in m.markers.iter().zip(&m.alleles) {
        let (Some(set), Some(q_alleles)) = (set, marker_alleles(q, marker)) else {
            unconstrained.push(marker.label(panel));
            continue;
        };
        let residual: Vec<i32> = set.iter().copied().filter(|a| !q_alleles.contains(a)).collect();
        if residual.len() > marker.capacity() {
            return Err(Error::InconsistentMixture {
                locus: marker.label(panel),
                needed: residual.len(),
                capacity: marker.capacity(),
            });
        }
        let c = match marker {
            Marker::Single(locus) => Candidates::Single {
                locus,
                alleles: if residual.is_empty() { set.clone() } else { residual },
            },
            Marker::Pair(i, j) => {
                let mut pairs = Vec::new();
                for (x, &a) in set.iter().enumerate() {
                    for &b in &set[x..] {
                        if residual.iter().all(|r| *r == a || *r == b) {
                            pairs.push((a, b));
                        }
                    }
                }
                Candidates::Pair { loci: (i, j), pairs }
            }
        };
        count = count.saturating_mul(c.len() as u128);
        candidates.push(c);
    }
    Ok(Companions {
        candidates,
        count,
        unconstrained,
    })
}

/// A mixture on complete simulated haplotypes: sorted, deduplicated alleles per marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimMixture {
    markers: Vec<Marker>,
    sets: Vec<Vec<i32>>,
}

fn pooled(marker: Marker, a: &[i32], b: &[i32], out: &mut Vec<i32>) {
    out.clear();
    for l in marker.loci() {
        out.push(a[l]);
        out.push(b[l]);
    }
    out.sort_unstable();
    out.dedup();
}

impl SimMixture {
    /// Union of two complete haplotypes over `markers`.
    pub fn union(markers: &[Marker], a: &[i32], b: &[i32]) -> Self {
        let sets = markers
            .iter()
            .map(|&m| {
                let mut v = Vec::with_capacity(4);
                pooled(m, a, b, &mut v);
                v
            })
            .collect();
        Self {
            markers: markers.to_vec(),
            sets,
        }
    }

    /// Whether `union(q, x)` reproduces this mixture.
    pub fn explained_by(&self, q: &[i32], x: &[i32], scratch: &mut Vec<i32>) -> bool {
        self.markers.iter().zip(&self.sets).all(|(&m, set)| {
            pooled(m, q, x, scratch);
            scratch == set
        })
    }

    /// Whether every allele of `x` lies in the mixture.
    pub fn contains(&self, x: &[i32]) -> bool {
        self.markers
            .iter()
            .zip(&self.sets)
            .all(|(&m, set)| m.loci().iter().all(|&l| set.binary_search(&x[l]).is_ok()))
    }
}

/// Markers fully inside `subset` (all markers when `None`).
pub fn markers_within(panel: &Panel, subset: Option<&[usize]>) -> Result<Vec<Marker>> {
    // validates the subset the same way single-source matching does
    MatchPlan::new(panel, subset, Default::default())?;
    Ok(markers(panel)
        .into_iter()
        .filter(|m| subset.is_none_or(|s| m.loci().iter().all(|l| s.contains(l))))
        .collect())
}

/// Live individuals other than `q` whose union with `q` equals the mixture, and the number
/// whose profile is contained in the mixture.
pub fn count_mixture_matches(pedigree: &Pedigree, q: Individual, mixture: &SimMixture) -> (u64, u64) {
    let q_alleles = pedigree.haplotype(q);
    let mut scratch = Vec::with_capacity(4);
    let (mut explained, mut contained) = (0, 0);
    for k in 0..pedigree.live_count() {
        let x = pedigree.live_individual(k);
        if x == q {
            continue;
        }
        let xa = pedigree.haplotype(x);
        if mixture.explained_by(q_alleles, xa, &mut scratch) {
            explained += 1;
        }
        if mixture.contains(xa) {
            contained += 1;
        }
    }
    (explained, contained)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureReplicate {
    pub index: usize,
    pub live_size: usize,
    pub q: Individual,
    /// The true second contributor.
    pub u: Individual,
    /// Single-source count for comparison.
    pub k_q: u64,
    /// Individuals (other than Q) that could be the second contributor, the true one included.
    pub companions: u64,
    pub contained: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureSimOutcome {
    pub replicates: Vec<MixtureReplicate>,
    pub companion_histogram: BTreeMap<u64, u64>,
    pub kq_histogram: BTreeMap<u64, u64>,
    pub companion_median: u64,
    pub kq_median: u64,
}

/// Simulate two-person mixtures: in each replicate, Q and a second live individual `U` are
/// drawn, the mixture is their union over `subset`, and the individuals that could be the
/// second contributor are counted next to the single-source `K_q`.
pub fn simulate_mixture_matches(config: &SimConfig, subset: Option<&[usize]>) -> Result<MixtureSimOutcome> {
    config.validate()?;
    let plan = MatchPlan::new(&config.panel, subset, config.match_policy)?;
    let marks = markers_within(&config.panel, subset)?;
    let replicates = (0..config.replicates)
        .into_par_iter()
        .map(|i| {
            let mut rep = sim::run_replicate(config, i)?;
            let ped = &rep.pedigree;
            if ped.live_count() < 2 {
                return Err(invalid("population", "a mixture needs at least two live individuals"));
            }
            let q_flat = ped.live_index(rep.q);
            let mut u_flat = rep.rng.random_range(0..ped.live_count() - 1);
            if u_flat >= q_flat {
                u_flat += 1;
            }
            let u = ped.live_individual(u_flat);
            let mixture = SimMixture::union(&marks, ped.haplotype(rep.q), ped.haplotype(u));
            let (companions, contained) = count_mixture_matches(ped, rep.q, &mixture);
            Ok(MixtureReplicate {
                index: i,
                live_size: ped.live_count(),
                q: rep.q,
                u,
                k_q: sim::count_matches(ped, rep.q, &plan).k_q,
                companions,
                contained,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let hist = |f: fn(&MixtureReplicate) -> u64| {
        let mut h = BTreeMap::new();
        for r in &replicates {
            *h.entry(f(r)).or_insert(0u64) += 1;
        }
        h
    };
    let median = |f: fn(&MixtureReplicate) -> u64| {
        let mut v: Vec<u64> = replicates.iter().map(f).collect();
        v.sort_unstable();
        sim::quantile(&v, 0.5)
    };
    Ok(MixtureSimOutcome {
        companion_histogram: hist(|r| r.companions),
        kq_histogram: hist(|r| r.k_q),
        companion_median: median(|r| r.companions),
        kq_median: median(|r| r.k_q),
        replicates,
    })
}
