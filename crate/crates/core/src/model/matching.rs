use serde::{Deserialize, Serialize};

use super::{Haplotype, Panel};
use crate::error::{invalid, Error, Result};

/// How unordered duplicated loci (DYS385a/b and similar) enter a comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchPolicy {
    /// Equal unordered pairs count as a match at both loci.
    #[default]
    UnorderedMatch,
    /// Duplicated pairs are left out of every comparison.
    IgnoreDuplicated,
}

impl MatchPolicy {
    pub fn describe(self) -> &'static str {
        match self {
            MatchPolicy::UnorderedMatch => {
                "duplicated loci compared as unordered pairs; an equal pair counts as a match at both loci"
            }
            MatchPolicy::IgnoreDuplicated => "duplicated loci ignored in matching",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchOutcome {
    pub is_match: bool,
    /// Panel indices that were compared, ascending.
    pub compared: Vec<usize>,
}

/// Compare two profiles on the loci observed in both.
///
/// A duplicated pair is compared only when both of its alleles are observed in both profiles.
pub fn haplotype_match(
    a: &Haplotype,
    b: &Haplotype,
    panel: &Panel,
    policy: MatchPolicy,
) -> Result<MatchOutcome> {
    a.check_panel(panel)?;
    b.check_panel(panel)?;
    let mut compared = Vec::new();
    let mut is_match = true;
    for i in 0..panel.len() {
        if panel.partner(i).is_some() {
            continue;
        }
        if let (Some(x), Some(y)) = (a.get(i), b.get(i)) {
            compared.push(i);
            is_match &= x == y;
        }
    }
    if policy == MatchPolicy::UnorderedMatch {
        for &(i, j) in panel.duplicate_pairs() {
            if let (Some(a1), Some(a2), Some(b1), Some(b2)) = (a.get(i), a.get(j), b.get(i), b.get(j)) {
                compared.push(i);
                compared.push(j);
                is_match &= sorted_pair(a1, a2) == sorted_pair(b1, b2);
            }
        }
    }
    if compared.is_empty() {
        return Err(Error::NoComparableLoci);
    }
    compared.sort_unstable();
    Ok(MatchOutcome { is_match, compared })
}

#[inline]
pub(crate) fn sorted_pair(x: i32, y: i32) -> (i32, i32) {
    if x <= y {
        (x, y)
    } else {
        (y, x)
    }
}

/// Precomputed comparison over fully observed allele slices, used in simulation loops.
///
/// Gives the same answer as [`haplotype_match`] on complete haplotypes restricted to the
/// plan's loci.
#[derive(Debug, Clone)]
pub struct MatchPlan {
    singles: Vec<usize>,
    pairs: Vec<(usize, usize)>,
}

impl MatchPlan {
    /// `subset` must not split a duplicated pair.
    pub fn new(panel: &Panel, subset: Option<&[usize]>, policy: MatchPolicy) -> Result<Self> {
        let selected: Vec<usize> = match subset {
            None => (0..panel.len()).collect(),
            Some([]) => return Err(Error::EmptySubset),
            Some(s) => {
                let mut s = s.to_vec();
                s.sort_unstable();
                s.dedup();
                if let Some(&bad) = s.iter().find(|&&i| i >= panel.len()) {
                    return Err(invalid("locus subset", format!("index {bad} is outside the panel")));
                }
                s
            }
        };
        let mut singles = Vec::new();
        let mut pairs = Vec::new();
        for &i in &selected {
            match panel.partner(i) {
                None => singles.push(i),
                Some(j) => {
                    if selected.binary_search(&j).is_err() {
                        return Err(invalid(
                            "locus subset",
                            format!(
                                "contains `{}` without its duplicate partner `{}`",
                                panel.loci()[i].name,
                                panel.loci()[j].name
                            ),
                        ));
                    }
                    if i < j && policy == MatchPolicy::UnorderedMatch {
                        pairs.push((i, j));
                    }
                }
            }
        }
        if singles.is_empty() && pairs.is_empty() {
            return Err(Error::NoComparableLoci);
        }
        Ok(Self { singles, pairs })
    }

    #[inline]
    pub fn matches(&self, a: &[i32], b: &[i32]) -> bool {
        self.singles.iter().all(|&i| a[i] == b[i])
            && self
                .pairs
                .iter()
                .all(|&(i, j)| sorted_pair(a[i], a[j]) == sorted_pair(b[i], b[j]))
    }

    pub fn compared_loci(&self) -> usize {
        self.singles.len() + 2 * self.pairs.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn yfp() -> Panel {
        Panel::preset("yfiler-plus").unwrap()
    }

    fn base() -> Vec<Option<i32>> {
        (0..27).map(|i| Some(10 + i)).collect()
    }

    #[test]
    fn identical_full_profiles_match_on_all_loci() {
        let p = yfp();
        let a = Haplotype::new(base()).unwrap();
        let out = haplotype_match(&a, &a, &p, MatchPolicy::default()).unwrap();
        assert!(out.is_match);
        assert_eq!(out.compared.len(), 27);
    }

    #[test]
    fn swapped_dys385_matches_by_default() {
        let p = yfp();
        let (a385, b385) = (p.index_of("DYS385a").unwrap(), p.index_of("DYS385b").unwrap());
        let mut x = base();
        let mut y = base();
        x[a385] = Some(11);
        x[b385] = Some(14);
        y[a385] = Some(14);
        y[b385] = Some(11);
        let (x, y) = (Haplotype::new(x).unwrap(), Haplotype::new(y).unwrap());
        assert!(haplotype_match(&x, &y, &p, MatchPolicy::UnorderedMatch).unwrap().is_match);
        let strict = haplotype_match(&x, &y, &p, MatchPolicy::IgnoreDuplicated).unwrap();
        assert!(strict.is_match);
        assert_eq!(strict.compared.len(), 23);
    }

    #[test]
    fn ignoring_duplicates_hides_a_pair_mismatch() {
        let p = yfp();
        let a385 = p.index_of("DYS385a").unwrap();
        let mut y = base();
        y[a385] = Some(99);
        let (x, y) = (Haplotype::new(base()).unwrap(), Haplotype::new(y).unwrap());
        assert!(!haplotype_match(&x, &y, &p, MatchPolicy::UnorderedMatch).unwrap().is_match);
        assert!(haplotype_match(&x, &y, &p, MatchPolicy::IgnoreDuplicated).unwrap().is_match);
    }

    #[test]
    fn partial_profile_compares_observed_loci() {
        let p = yfp();
        let mut a = base();
        for i in [0, 2, 4, 6, 8] {
            a[i] = None;
        }
        let a = Haplotype::new(a).unwrap();
        let b = Haplotype::new(base()).unwrap();
        let out = haplotype_match(&a, &b, &p, MatchPolicy::default()).unwrap();
        assert!(out.is_match);
        assert_eq!(out.compared.len(), 22);
    }

    #[test]
    fn disjoint_observation_errors() {
        let p = Panel::preset("powerplex-y").unwrap();
        let mut a = vec![None; 12];
        let mut b = vec![None; 12];
        a[0] = Some(1);
        b[1] = Some(1);
        let r = haplotype_match(&Haplotype::new(a).unwrap(), &Haplotype::new(b).unwrap(), &p, MatchPolicy::default());
        assert!(matches!(r, Err(Error::NoComparableLoci)));
    }

    #[test]
    fn plan_rejects_split_pair() {
        let p = yfp();
        let a385 = p.index_of("DYS385a").unwrap();
        assert!(MatchPlan::new(&p, Some(&[0, a385]), MatchPolicy::default()).is_err());
    }

    fn small_panel() -> Panel {
        use crate::model::LocusSpec;
        Panel::new(
            "p",
            vec![
                LocusSpec::new("A", 0.01),
                LocusSpec::duplicated("B1", 0.01, "b"),
                LocusSpec::new("C", 0.01),
                LocusSpec::duplicated("B2", 0.01, "b"),
            ],
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn symmetric_and_reflexive(
            a in proptest::collection::vec(proptest::option::weighted(0.8, 0i32..3), 4),
            b in proptest::collection::vec(proptest::option::weighted(0.8, 0i32..3), 4),
        ) {
            let p = small_panel();
            prop_assume!(a.iter().any(Option::is_some) && b.iter().any(Option::is_some));
            let ha = Haplotype::new(a).unwrap();
            let hb = Haplotype::new(b).unwrap();
            for policy in [MatchPolicy::UnorderedMatch, MatchPolicy::IgnoreDuplicated] {
                let ab = haplotype_match(&ha, &hb, &p, policy).ok();
                let ba = haplotype_match(&hb, &ha, &p, policy).ok();
                prop_assert_eq!(ab, ba);
            }
        }

        #[test]
        fn plan_agrees_with_general_match(
            a in proptest::collection::vec(0i32..3, 4),
            b in proptest::collection::vec(0i32..3, 4),
            subset_mask in 0u8..16,
        ) {
            let p = small_panel();
            let mut subset: Vec<usize> = (0..4).filter(|i| subset_mask & (1 << i) != 0).collect();
            // keep pairs whole
            if subset.contains(&1) != subset.contains(&3) {
                subset.retain(|&i| i != 1 && i != 3);
            }
            prop_assume!(!subset.is_empty());
            let plan = MatchPlan::new(&p, Some(&subset), MatchPolicy::UnorderedMatch).unwrap();
            let ha = Haplotype::complete(&a).unwrap().restricted_to(&subset).unwrap();
            let hb = Haplotype::complete(&b).unwrap();
            let general = haplotype_match(&ha, &hb, &p, MatchPolicy::UnorderedMatch).unwrap();
            prop_assert_eq!(plan.matches(&a, &b), general.is_match);
            prop_assert_eq!(plan.compared_loci(), general.compared.len());
            let full = Haplotype::complete(&a).unwrap();
            prop_assert!(haplotype_match(&full, &full, &p, MatchPolicy::UnorderedMatch).unwrap().is_match);
        }

        #[test]
        fn restricting_query_never_loses_matches(
            q in proptest::collection::vec(0i32..2, 4),
            rows in proptest::collection::vec(proptest::collection::vec(0i32..2, 4), 1..20),
            drop in 0usize..4,
        ) {
            use crate::model::HaplotypeDatabase;
            let p = small_panel();
            let db = HaplotypeDatabase::new(
                p.clone(),
                rows.iter().map(|r| Haplotype::complete(r).unwrap()).collect(),
            ).unwrap();
            let full = Haplotype::complete(&q).unwrap();
            let keep: Vec<usize> = (0..4).filter(|&i| i != drop).collect();
            let partial = full.restricted_to(&keep).unwrap();
            let k_full = db.summarize(&full, MatchPolicy::default()).unwrap().k_q;
            let k_part = db.summarize(&partial, MatchPolicy::default()).unwrap().k_q;
            prop_assert!(k_part >= k_full);
            let s = db.summarize(&full, MatchPolicy::default()).unwrap();
            let total: usize = db.profile_counts().iter().map(|(_, c)| c).sum();
            prop_assert_eq!(total as u64, s.n);
            prop_assert_eq!(s.singletons(), db.profile_counts().iter().filter(|(_, c)| *c == 1).count() as u64);
        }
    }
}
