use super::*;
use crate::model::LocusSpec;

fn tiny_panel(mu: f64) -> Panel {
    Panel::new(
        "tiny",
        vec![
            LocusSpec::new("A", mu),
            LocusSpec::duplicated("B1", mu, "B"),
            LocusSpec::duplicated("B2", mu, "B"),
            LocusSpec::new("C", mu),
        ],
    )
    .unwrap()
}

#[test]
fn no_mutation_single_founder_everyone_matches() {
    let mut cfg = SimConfig::constant(tiny_panel(0.0), 1, 6, 2);
    cfg.population = PopulationSchedule::Exponential { initial: 1, rate: 0.7 };
    let rep = run_replicate(&cfg, 0).unwrap();
    let ped = &rep.pedigree;
    let founder = ped.haplotype(rep.q).to_vec();
    for k in 0..ped.live_count() {
        assert_eq!(ped.haplotype(ped.live_individual(k)), founder.as_slice());
    }
    let plan = MatchPlan::new(&cfg.panel, None, MatchPolicy::default()).unwrap();
    let c = count_matches(ped, rep.q, &plan);
    assert_eq!(c.k_q as usize, ped.live_count() - 1);
    assert!(c.matchers.iter().all(|(_, d)| d.is_some()));
}

#[test]
fn single_generation_is_founders() {
    let cfg = SimConfig::constant(tiny_panel(0.1), 25, 1, 1);
    let rep = run_replicate(&cfg, 3).unwrap();
    assert_eq!(rep.pedigree.live_count(), 25);
    assert_eq!(rep.q.generation, 0);
    let plan = MatchPlan::new(&cfg.panel, None, MatchPolicy::default()).unwrap();
    assert_eq!(count_matches(&rep.pedigree, rep.q, &plan).k_q, 0);
}

#[test]
fn schedule_is_followed_exactly() {
    let mut cfg = SimConfig::constant(tiny_panel(0.01), 10, 12, 3);
    cfg.population = PopulationSchedule::Exponential { initial: 10, rate: 0.2 };
    let rep = run_replicate(&cfg, 0).unwrap();
    assert_eq!(rep.pedigree.generation_sizes(), cfg.population.sizes(12).as_slice());
    assert_eq!(cfg.population.size_at(5), (10.0 * 1.0f64.exp()).round() as usize);
    let live: usize = cfg.population.sizes(12)[9..].iter().sum();
    assert_eq!(rep.pedigree.live_count(), live);
}

#[test]
fn replicate_is_deterministic() {
    let mut cfg = SimConfig::constant(Panel::preset("yfiler-plus").unwrap(), 300, 30, 3);
    cfg.replicates = 6;
    cfg.seed = 99;
    let a = kq_distribution(&cfg, None, None).unwrap();
    let b = kq_distribution(&cfg, None, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.accepted, 6);
}

#[test]
fn forward_pass_distances_agree_with_tracing() {
    let mut cfg = SimConfig::constant(tiny_panel(0.05), 40, 25, 3);
    cfg.offspring_dispersion = 2.0;
    for i in 0..5 {
        let rep = run_replicate(&cfg, i).unwrap();
        let ped = &rep.pedigree;
        let all = ped.distances_from(rep.q);
        for (k, d) in all.iter().enumerate() {
            assert_eq!(*d, ped.meiosis_distance(rep.q, ped.live_individual(k)), "k = {k}");
        }
        assert_eq!(all[ped.live_index(rep.q)], Some(0));
    }
}

#[test]
fn parent_child_distance_is_one() {
    let cfg = SimConfig::constant(tiny_panel(0.05), 20, 5, 2);
    let rep = run_replicate(&cfg, 0).unwrap();
    let child = Individual { generation: 4, index: 3 };
    let parent = rep.pedigree.parent(child).unwrap();
    assert_eq!(rep.pedigree.meiosis_distance(child, parent), Some(1));
    assert_eq!(rep.pedigree.meiosis_distance(parent, child), Some(1));
}

#[test]
fn founders_never_produce_cross_lineage_matches() {
    let mut cfg = SimConfig::constant(tiny_panel(0.3), 200, 15, 3);
    cfg.replicates = 10;
    let decay = match_decay(&cfg, None, PairSampling::AllPairs).unwrap();
    assert!(decay.cross_founder_pairs > 0);
    assert_eq!(decay.cross_founder_matches, 0);
}

#[test]
fn one_pair_per_distance_per_replicate() {
    let mut cfg = SimConfig::constant(tiny_panel(0.3), 200, 15, 3);
    cfg.replicates = 10;
    let all = match_decay(&cfg, None, PairSampling::AllPairs).unwrap();
    let one = match_decay(&cfg, None, PairSampling::OnePerDistance).unwrap();
    assert_eq!(one.by_distance.keys().collect::<Vec<_>>(), all.by_distance.keys().collect::<Vec<_>>());
    for (g, (pairs, matches)) in &one.by_distance {
        assert!(*pairs <= 10 && matches <= pairs);
        assert!(*pairs <= all.by_distance[g].0);
    }
    assert!(one.cross_founder_pairs <= 10);
}

#[test]
fn subset_never_lowers_kq() {
    let panel = Panel::preset("yfiler-plus").unwrap();
    let subset: Vec<usize> = (0..12).filter(|&i| panel.partner(i).is_none()).collect();
    let mut cfg = SimConfig::constant(panel, 500, 40, 3);
    cfg.replicates = 10;
    let full = kq_distribution(&cfg, None, None).unwrap();
    let part = kq_distribution(&cfg, None, Some(&subset)).unwrap();
    for (a, b) in full.k_q_values().iter().zip(part.k_q_values()) {
        assert!(b >= *a);
    }
}

#[test]
fn census_database_reproduces_kq() {
    let cfg = SimConfig::constant(Panel::preset("powerplex-y").unwrap(), 200, 40, 3);
    let plan = MatchPlan::new(&cfg.panel, None, MatchPolicy::default()).unwrap();
    let mut rep = run_replicate(&cfg, 0).unwrap();
    let k = count_matches(&rep.pedigree, rep.q, &plan).k_q;
    let n = rep.pedigree.live_count() - 1;
    let db = sample_database(&rep.pedigree, rep.q, n, &plan, &mut rep.rng).unwrap();
    assert_eq!(db.k_q, k);
    assert!(!db.members.contains(&rep.q));
    let hdb = db.to_database(&rep.pedigree, &cfg.panel).unwrap();
    let summary = hdb.summarize(&rep.pedigree.to_haplotype(rep.q), MatchPolicy::default()).unwrap();
    assert_eq!(summary.k_q, k);
    assert!(sample_database(&rep.pedigree, rep.q, 0, &plan, &mut rep.rng).is_err());
    assert!(matches!(
        sample_database(&rep.pedigree, rep.q, n + 1, &plan, &mut rep.rng),
        Err(Error::SampleTooLarge { .. })
    ));
}

#[test]
fn sampled_count_follows_hypergeometric_mean() {
    // Fixed pedigree and Q; resample the database many times.
    let cfg = SimConfig::constant(Panel::preset("powerplex-y").unwrap(), 300, 60, 3);
    let plan = MatchPlan::new(&cfg.panel, None, MatchPolicy::default()).unwrap();
    let mut rep = (0..50)
        .map(|i| run_replicate(&cfg, i).unwrap())
        .find(|r| count_matches(&r.pedigree, r.q, &plan).k_q >= 5)
        .expect("some replicate has several matchers");
    let big_k = count_matches(&rep.pedigree, rep.q, &plan).k_q as f64;
    let pool = (rep.pedigree.live_count() - 1) as f64;
    let n = 100usize;
    let draws = 4000;
    let total: u64 = (0..draws)
        .map(|_| sample_database(&rep.pedigree, rep.q, n, &plan, &mut rep.rng).unwrap().k_q)
        .sum();
    let mean = total as f64 / draws as f64;
    let p = big_k / pool;
    let nf = n as f64;
    let var = nf * p * (1.0 - p) * (pool - nf) / (pool - 1.0);
    let se = (var / draws as f64).sqrt();
    assert!((mean - nf * p).abs() < 3.0 * se, "mean {mean} expected {}", nf * p);
}

#[test]
fn dispersion_inflates_offspring_variance() {
    fn pooled_variance(dispersion: f64) -> (f64, usize) {
        let mut cfg = SimConfig::constant(tiny_panel(0.0), 2000, 8, 1);
        cfg.offspring_dispersion = dispersion;
        let rep = run_replicate(&cfg, 0).unwrap();
        let counts: Vec<f64> = (0..7)
            .flat_map(|t| rep.pedigree.offspring_counts(t))
            .map(f64::from)
            .collect();
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<f64>() / n;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var, counts.len())
    }
    let (v1, n1) = pooled_variance(1.0);
    let (v3, n3) = pooled_variance(3.0);
    assert!(n1 >= 10_000 && n3 >= 10_000);
    // one-sided F test at 0.01 via the normal approximation of log(F)
    let z = (v3 / v1).ln() / (2.0 / n1 as f64 + 2.0 / n3 as f64).sqrt();
    assert!(z > 2.326, "variance ratio {} (z = {z})", v3 / v1);
}

#[test]
fn per_locus_mutation_marginals() {
    let panel = Panel::new(
        "rates",
        vec![LocusSpec::new("A", 0.02), LocusSpec::new("B", 0.1), LocusSpec::new("C", 0.3)],
    )
    .unwrap();
    let cfg = SimConfig::constant(panel.clone(), 20_000, 6, 6);
    let rep = run_replicate(&cfg, 1).unwrap();
    let ped = &rep.pedigree;
    let mut per_locus = [0u64; 3];
    let mut both_ab = 0u64;
    let mut transfers = 0u64;
    for t in 1..6 {
        for i in 0..20_000 {
            let c = Individual { generation: t, index: i };
            let p = ped.parent(c).unwrap();
            let (hc, hp) = (ped.haplotype(c), ped.haplotype(p));
            let changed: Vec<bool> = (0..3).map(|l| hc[l] != hp[l]).collect();
            for l in 0..3 {
                per_locus[l] += changed[l] as u64;
            }
            both_ab += (changed[0] && changed[1]) as u64;
            transfers += 1;
        }
    }
    let nt = transfers as f64;
    for (l, mu) in [0.02, 0.1, 0.3].into_iter().enumerate() {
        let se = (mu * (1.0 - mu) / nt).sqrt();
        assert!((per_locus[l] as f64 / nt - mu).abs() < 4.0 * se, "locus {l}");
    }
    let joint = 0.02 * 0.1;
    let se = (joint * (1.0 - joint) / nt).sqrt();
    assert!((both_ab as f64 / nt - joint).abs() < 4.0 * se);
}

#[test]
fn resource_cap_enforced() {
    let mut cfg = SimConfig::constant(tiny_panel(0.01), 1000, 100, 3);
    cfg.max_individuals = 50_000;
    assert!(matches!(run_replicate(&cfg, 0), Err(Error::ResourceLimit { .. })));
}

#[test]
fn config_validation() {
    let base = SimConfig::constant(tiny_panel(0.01), 10, 5, 3);
    let mut c = base.clone();
    c.live_generations = 6;
    assert!(c.validate().is_err());
    let mut c = base.clone();
    c.offspring_dispersion = 0.5;
    assert!(c.validate().is_err());
    let mut c = base.clone();
    c.population = PopulationSchedule::Constant { size: 0 };
    assert!(c.validate().is_err());
    assert!(base.validate().is_ok());
}

#[test]
fn impossible_conditioning_is_reported() {
    let mut cfg = SimConfig::constant(Panel::preset("yfiler-plus").unwrap(), 100, 20, 2);
    cfg.replicates = 5;
    let cond = Conditioning::new(50, 49);
    match kq_distribution(&cfg, Some(&cond), None) {
        Err(Error::ConditioningRejected { accepted, rate, .. }) => {
            assert_eq!(accepted, 0);
            assert_eq!(rate, 0.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn quantile_definition() {
    let v = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
    assert_eq!(quantile(&v, 0.5), 5);
    assert_eq!(quantile(&v, 0.95), 10);
    assert_eq!(quantile(&v, 0.0), 1);
    assert_eq!(quantile(&[], 0.5), 0);
}

#[test]
fn config_json_round_trip() {
    let mut cfg = SimConfig::constant(Panel::preset("yfiler").unwrap(), 1000, 50, 3);
    cfg.population = PopulationSchedule::Exponential { initial: 100, rate: 0.05 };
    let text = serde_json::to_string(&cfg).unwrap();
    let back: SimConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
}
