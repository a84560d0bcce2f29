//! Panels, haplotypes and databases.

mod matching;
mod presets;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use matching::{haplotype_match, MatchOutcome, MatchPlan, MatchPolicy};
pub(crate) use matching::sorted_pair;
pub use presets::{PresetInfo, NESTED_Y_BLOCKS, PRESETS};

/// One locus of a panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusSpec {
    pub name: String,
    /// Per-generation probability that the allele changes.
    pub mu: f64,
    /// Loci sharing a group label form an unordered duplicated pair (e.g. DYS385a/b).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duplicate_group: Option<String>,
}

impl LocusSpec {
    pub fn new(name: impl Into<String>, mu: f64) -> Self {
        Self {
            name: name.into(),
            mu,
            duplicate_group: None,
        }
    }

    pub fn duplicated(name: impl Into<String>, mu: f64, group: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            mu,
            duplicate_group: Some(group.into()),
        }
    }
}

#[derive(Deserialize)]
struct PanelFile {
    name: String,
    loci: Vec<LocusSpec>,
}

/// An ordered set of loci.
///
/// Construction validates the locus rates, name uniqueness and duplicate grouping, so every
/// `Panel` in circulation is well formed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PanelFile")]
pub struct Panel {
    name: String,
    loci: Vec<LocusSpec>,
    #[serde(skip)]
    pairs: Vec<(usize, usize)>,
}

impl TryFrom<PanelFile> for Panel {
    type Error = Error;

    fn try_from(file: PanelFile) -> Result<Self> {
        Panel::new(file.name, file.loci)
    }
}

impl Panel {
    pub fn new(name: impl Into<String>, loci: Vec<LocusSpec>) -> Result<Self> {
        let name = name.into();
        if loci.is_empty() {
            return Err(Error::InvalidPanel(format!("panel `{name}` has no loci")));
        }
        let mut seen = HashSet::new();
        let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, locus) in loci.iter().enumerate() {
            if !(0.0..1.0).contains(&locus.mu) {
                return Err(Error::InvalidPanel(format!(
                    "locus `{}` has mutation rate {} outside [0, 1)",
                    locus.name, locus.mu
                )));
            }
            if !seen.insert(locus.name.as_str()) {
                return Err(Error::InvalidPanel(format!(
                    "duplicate locus name `{}`",
                    locus.name
                )));
            }
            if let Some(group) = &locus.duplicate_group {
                groups.entry(group.as_str()).or_default().push(i);
            }
        }
        let mut pairs = Vec::with_capacity(groups.len());
        for (group, members) in groups {
            match members.as_slice() {
                &[a, b] => pairs.push((a, b)),
                _ => {
                    return Err(Error::InvalidPanel(format!(
                        "duplicate group `{group}` has {} loci, expected exactly 2",
                        members.len()
                    )))
                }
            }
        }
        pairs.sort_unstable();
        Ok(Self { name, loci, pairs })
    }

    /// Panel whose loci share `total_mu` equally: each locus gets `1 - (1 - total_mu)^(1/L)`.
    pub fn uniform(name: impl Into<String>, loci: &[(&str, Option<&str>)], total_mu: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&total_mu) {
            return Err(invalid("total mutation rate", format!("{total_mu} is outside [0, 1)")));
        }
        let per_locus = uniform_split(total_mu, loci.len());
        let specs = loci
            .iter()
            .map(|(locus, group)| LocusSpec {
                name: locus.to_string(),
                mu: per_locus,
                duplicate_group: group.map(str::to_string),
            })
            .collect();
        Panel::new(name, specs)
    }

    /// Built-in panel by key (see [`PRESETS`]).
    pub fn preset(key: &str) -> Option<Panel> {
        presets::build(key)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn loci(&self) -> &[LocusSpec] {
        &self.loci
    }

    pub fn len(&self) -> usize {
        self.loci.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loci.is_empty()
    }

    /// Index pairs of duplicated loci, each pair in panel order.
    pub fn duplicate_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// The other member of `locus`'s duplicate pair.
    pub fn partner(&self, locus: usize) -> Option<usize> {
        self.pairs.iter().find_map(|&(a, b)| match locus {
            l if l == a => Some(b),
            l if l == b => Some(a),
            _ => None,
        })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.loci.iter().position(|l| l.name == name)
    }

    /// Resolve locus names to sorted, deduplicated panel indices.
    pub fn subset_by_names<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        let mut idx = names
            .iter()
            .map(|n| {
                self.index_of(n.as_ref())
                    .ok_or_else(|| Error::UnknownLocus(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        idx.sort_unstable();
        idx.dedup();
        if idx.is_empty() {
            return Err(Error::EmptySubset);
        }
        Ok(idx)
    }

    /// Profile mutation rate `1 - Π (1 - μ_l)` over the panel or a subset of it.
    pub fn mutation_rate(&self, subset: Option<&[usize]>) -> Result<f64> {
        panel_mutation_rate(self, subset)
    }

    /// A copy of this panel with per-locus rates replaced.
    pub fn with_rates(&self, rates: &[f64]) -> Result<Panel> {
        if rates.len() != self.len() {
            return Err(Error::PanelMismatch {
                expected: self.len(),
                got: rates.len(),
            });
        }
        let loci = self
            .loci
            .iter()
            .zip(rates)
            .map(|(l, &mu)| LocusSpec { mu, ..l.clone() })
            .collect();
        Panel::new(self.name.clone(), loci)
    }
}

pub(crate) fn uniform_split(total_mu: f64, loci: usize) -> f64 {
    if loci == 0 {
        return 0.0;
    }
    1.0 - (1.0 - total_mu).powf(1.0 / loci as f64)
}

/// Profile mutation rate, assuming mutations are independent across loci.
pub fn panel_mutation_rate(panel: &Panel, subset: Option<&[usize]>) -> Result<f64> {
    let survive: f64 = match subset {
        None => panel.loci.iter().map(|l| 1.0 - l.mu).product(),
        Some([]) => return Err(Error::EmptySubset),
        Some(idx) => idx
            .iter()
            .map(|&i| {
                panel
                    .loci
                    .get(i)
                    .map(|l| 1.0 - l.mu)
                    .ok_or_else(|| invalid("locus subset", format!("index {i} is outside the panel")))
            })
            .product::<Result<f64>>()?,
    };
    Ok(1.0 - survive)
}

/// One allele (repeat count) per panel locus; `None` marks an unobserved locus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Haplotype {
    alleles: Vec<Option<i32>>,
}

impl Haplotype {
    pub fn new(alleles: Vec<Option<i32>>) -> Result<Self> {
        if alleles.iter().all(Option::is_none) {
            return Err(Error::EmptyHaplotype);
        }
        Ok(Self { alleles })
    }

    pub fn complete(alleles: &[i32]) -> Result<Self> {
        Self::new(alleles.iter().copied().map(Some).collect())
    }

    pub fn for_panel(alleles: Vec<Option<i32>>, panel: &Panel) -> Result<Self> {
        let h = Self::new(alleles)?;
        h.check_panel(panel)?;
        Ok(h)
    }

    pub fn check_panel(&self, panel: &Panel) -> Result<()> {
        if self.alleles.len() != panel.len() {
            return Err(Error::PanelMismatch {
                expected: panel.len(),
                got: self.alleles.len(),
            });
        }
        Ok(())
    }

    pub fn alleles(&self) -> &[Option<i32>] {
        &self.alleles
    }

    pub fn len(&self) -> usize {
        self.alleles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alleles.is_empty()
    }

    pub fn get(&self, locus: usize) -> Option<i32> {
        self.alleles.get(locus).copied().flatten()
    }

    pub fn is_complete(&self) -> bool {
        self.alleles.iter().all(Option::is_some)
    }

    pub fn observed_loci(&self) -> Vec<usize> {
        self.alleles
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|_| i))
            .collect()
    }

    /// Copy with only `keep` loci observed. Fails if nothing observed remains.
    pub fn restricted_to(&self, keep: &[usize]) -> Result<Self> {
        let alleles = self
            .alleles
            .iter()
            .enumerate()
            .map(|(i, a)| if keep.contains(&i) { *a } else { None })
            .collect();
        Self::new(alleles)
    }
}

/// An immutable, non-empty collection of haplotypes typed on one panel.
#[derive(Debug, Clone)]
pub struct HaplotypeDatabase {
    panel: Panel,
    haplotypes: Vec<Haplotype>,
}

impl HaplotypeDatabase {
    pub fn new(panel: Panel, haplotypes: Vec<Haplotype>) -> Result<Self> {
        if haplotypes.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        for h in &haplotypes {
            h.check_panel(&panel)?;
        }
        Ok(Self { panel, haplotypes })
    }

    pub fn panel(&self) -> &Panel {
        &self.panel
    }

    pub fn haplotypes(&self) -> &[Haplotype] {
        &self.haplotypes
    }

    pub fn len(&self) -> usize {
        self.haplotypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.haplotypes.is_empty()
    }

    /// Distinct stored profiles with their multiplicities, in first-seen order.
    pub fn profile_counts(&self) -> Vec<(&Haplotype, usize)> {
        let mut index: HashMap<&Haplotype, usize> = HashMap::new();
        let mut counts: Vec<(&Haplotype, usize)> = Vec::new();
        for h in &self.haplotypes {
            match index.get(h) {
                Some(&i) => counts[i].1 += 1,
                None => {
                    index.insert(h, counts.len());
                    counts.push((h, 1));
                }
            }
        }
        counts
    }

    pub fn distinct_profiles(&self) -> usize {
        self.profile_counts().len()
    }

    pub fn summarize(&self, q: &Haplotype, policy: MatchPolicy) -> Result<DatabaseSummary> {
        summarize_database(self, q, policy)
    }
}

/// Database counts used by the frequency-based estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatabaseSummary {
    pub n: u64,
    pub k_q: u64,
    /// Fraction of database profiles observed exactly once.
    pub kappa: f64,
    /// Number of distinct profiles observed exactly twice.
    pub doubleton_count: u64,
}

impl DatabaseSummary {
    /// Summary from raw counts, when the database itself is not at hand.
    pub fn from_counts(n: u64, k_q: u64, singletons: u64, doubleton_count: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDatabase);
        }
        if k_q > n {
            return Err(invalid("k_q", format!("{k_q} exceeds database size {n}")));
        }
        if singletons > n {
            return Err(invalid("singleton count", format!("{singletons} exceeds database size {n}")));
        }
        Ok(Self {
            n,
            k_q,
            kappa: singletons as f64 / n as f64,
            doubleton_count,
        })
    }

    pub fn singletons(&self) -> u64 {
        (self.kappa * self.n as f64).round() as u64
    }
}

/// Count `q` in the database and compute the singleton fraction.
///
/// Database profiles sharing no observed locus with `q` count as non-matches.
pub fn summarize_database(
    db: &HaplotypeDatabase,
    q: &Haplotype,
    policy: MatchPolicy,
) -> Result<DatabaseSummary> {
    q.check_panel(&db.panel)?;
    let mut k_q = 0u64;
    for h in &db.haplotypes {
        match haplotype_match(q, h, &db.panel, policy) {
            Ok(outcome) if outcome.is_match => k_q += 1,
            Ok(_) | Err(Error::NoComparableLoci) => {}
            Err(e) => return Err(e),
        }
    }
    let counts = db.profile_counts();
    let singletons = counts.iter().filter(|(_, c)| *c == 1).count() as u64;
    let doubletons = counts.iter().filter(|(_, c)| *c == 2).count() as u64;
    DatabaseSummary::from_counts(db.len() as u64, k_q, singletons, doubletons)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_locus(mu: f64) -> Panel {
        Panel::new("t", vec![LocusSpec::new("A", mu), LocusSpec::new("B", mu)]).unwrap()
    }

    #[test]
    fn mutation_rate_two_loci() {
        let mu = two_locus(0.01).mutation_rate(None).unwrap();
        assert!((mu - 0.0199).abs() < 1e-15);
    }

    #[test]
    fn mutation_rate_single_and_zero() {
        let p = Panel::new("one", vec![LocusSpec::new("A", 0.135)]).unwrap();
        assert!((p.mutation_rate(None).unwrap() - 0.135).abs() < 1e-15);
        assert_eq!(two_locus(0.0).mutation_rate(None).unwrap(), 0.0);
    }

    #[test]
    fn mutation_rate_empty_subset_errors() {
        assert!(matches!(
            two_locus(0.01).mutation_rate(Some(&[])),
            Err(Error::EmptySubset)
        ));
    }

    #[test]
    fn panel_validation() {
        assert!(Panel::new("x", vec![LocusSpec::new("A", 1.0)]).is_err());
        assert!(Panel::new("x", vec![LocusSpec::new("A", -0.1)]).is_err());
        assert!(Panel::new("x", vec![LocusSpec::new("A", 0.1), LocusSpec::new("A", 0.1)]).is_err());
        assert!(Panel::new("x", vec![LocusSpec::duplicated("A", 0.1, "g")]).is_err());
        let p = Panel::new(
            "x",
            vec![
                LocusSpec::duplicated("A", 0.1, "g"),
                LocusSpec::new("B", 0.1),
                LocusSpec::duplicated("C", 0.1, "g"),
            ],
        )
        .unwrap();
        assert_eq!(p.duplicate_pairs(), &[(0, 2)]);
        assert_eq!(p.partner(2), Some(0));
        assert_eq!(p.partner(1), None);
    }

    #[test]
    fn panel_json_round_trip_rebuilds_pairs() {
        let p = Panel::preset("yfiler-plus").unwrap();
        let back = Panel::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.duplicate_pairs().len(), 2);
    }

    #[test]
    fn haplotype_with_no_observed_loci_rejected() {
        assert!(matches!(Haplotype::new(vec![None, None]), Err(Error::EmptyHaplotype)));
    }

    fn db(panel: &Panel, rows: &[&[i32]]) -> HaplotypeDatabase {
        let hs = rows.iter().map(|r| Haplotype::complete(r).unwrap()).collect();
        HaplotypeDatabase::new(panel.clone(), hs).unwrap()
    }

    #[test]
    fn summary_all_distinct_q_absent() {
        let p = two_locus(0.01);
        let rows: Vec<[i32; 2]> = (0..10).map(|i| [i, i]).collect();
        let refs: Vec<&[i32]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = db(&p, &refs)
            .summarize(&Haplotype::complete(&[99, 99]).unwrap(), MatchPolicy::default())
            .unwrap();
        assert_eq!((s.n, s.k_q, s.kappa), (10, 0, 1.0));
    }

    #[test]
    fn summary_q_twice() {
        let p = two_locus(0.01);
        let s = db(&p, &[&[1, 2], &[1, 2], &[3, 4]])
            .summarize(&Haplotype::complete(&[1, 2]).unwrap(), MatchPolicy::default())
            .unwrap();
        assert_eq!((s.n, s.k_q, s.doubleton_count), (3, 2, 1));
        assert!((s.kappa - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.singletons(), 1);
    }

    #[test]
    fn summary_no_singletons() {
        let p = two_locus(0.01);
        let s = db(&p, &[&[5, 5], &[5, 5], &[5, 5], &[5, 5]])
            .summarize(&Haplotype::complete(&[1, 1]).unwrap(), MatchPolicy::default())
            .unwrap();
        assert_eq!((s.k_q, s.kappa), (0, 0.0));
    }

    #[test]
    fn summary_partial_query_uses_observed_loci() {
        let p = two_locus(0.01);
        let q = Haplotype::new(vec![Some(1), None]).unwrap();
        let s = db(&p, &[&[1, 2], &[1, 9], &[3, 4]])
            .summarize(&q, MatchPolicy::default())
            .unwrap();
        assert_eq!(s.k_q, 2);
    }
}
