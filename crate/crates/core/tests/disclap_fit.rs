use lineage_core::disclap::{
    fit_em, fit_em_traced, select_clusters, Cluster, DiscLapModel, EmOptions, FitDiagnostics,
};
use lineage_core::{Haplotype, HaplotypeDatabase, LocusSpec, Panel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn panel(l: usize) -> Panel {
    Panel::new("synthetic", (0..l).map(|i| LocusSpec::new(format!("L{i}"), 0.003)).collect()).unwrap()
}

fn generator(clusters: Vec<Cluster>) -> DiscLapModel {
    let l = clusters[0].centers.len();
    DiscLapModel {
        panel: "synthetic".into(),
        loci: (0..l).map(|i| format!("L{i}")).collect(),
        clusters,
        diagnostics: FitDiagnostics { log_likelihood: 0.0, iterations: 0, converged: true, bic: 0.0, n: 0 },
    }
}

fn draw(model: &DiscLapModel, n: usize, seed: u64) -> HaplotypeDatabase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n).map(|_| Haplotype::complete(&model.sample(&mut rng)).unwrap()).collect();
    HaplotypeDatabase::new(panel(model.loci.len()), rows).unwrap()
}

fn one_cluster() -> DiscLapModel {
    generator(vec![Cluster {
        weight: 1.0,
        centers: vec![14, 13, 29, 23, 11],
        dispersions: vec![0.1, 0.2, 0.3, 0.15, 0.25],
    }])
}

fn two_clusters() -> DiscLapModel {
    generator(vec![
        Cluster { weight: 0.3, centers: vec![10, 10, 10, 10], dispersions: vec![0.2; 4] },
        Cluster { weight: 0.7, centers: vec![35, 30, 40, 32], dispersions: vec![0.25; 4] },
    ])
}

#[test]
fn single_cluster_recovery() {
    let truth = one_cluster();
    let db = draw(&truth, 1000, 11);
    let fit = fit_em(&db, 1, 0, &EmOptions::default()).unwrap();
    assert_eq!(fit.clusters[0].centers, truth.clusters[0].centers);
    for (p, t) in fit.clusters[0].dispersions.iter().zip(&truth.clusters[0].dispersions) {
        assert!((p - t).abs() < 0.05, "{p} vs {t}");
    }
}

#[test]
fn two_cluster_weights_recovered() {
    let truth = two_clusters();
    let db = draw(&truth, 1000, 12);
    let fit = fit_em(&db, 2, 0, &EmOptions::default()).unwrap();
    let mut weights: Vec<f64> = fit.clusters.iter().map(|c| c.weight).collect();
    weights.sort_by(f64::total_cmp);
    assert!((weights[0] - 0.3).abs() < 0.05 && (weights[1] - 0.7).abs() < 0.05, "{weights:?}");
}

#[test]
fn log_likelihood_never_decreases() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..50 {
        let l = rng.random_range(2..6);
        let c_true = rng.random_range(1..4);
        let clusters = (0..c_true)
            .map(|_| Cluster {
                weight: 1.0 / c_true as f64,
                centers: (0..l).map(|_| rng.random_range(8..30)).collect(),
                dispersions: (0..l).map(|_| rng.random_range(0.05..0.6)).collect(),
            })
            .collect();
        let db = draw(&generator(clusters), rng.random_range(30..300), case);
        let c = rng.random_range(1..5).min(db.distinct_profiles());
        let (_, trace) = fit_em_traced(&db, c, case, &EmOptions::default()).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "case {case}: {} -> {}", w[0], w[1]);
        }
    }
}

fn selection_rate(truth: &DiscLapModel, expected: usize) -> usize {
    (0..20u64)
        .filter(|&s| {
            let db = draw(truth, 1000, 1000 + s);
            let sel = select_clusters(&db, 3, s, 5, &EmOptions::default()).unwrap();
            sel.best.clusters.len() == expected
        })
        .count()
}

#[test]
fn bic_selects_one_cluster() {
    let hits = selection_rate(&one_cluster(), 1);
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn bic_selects_two_clusters() {
    let hits = selection_rate(&two_clusters(), 2);
    assert!(hits >= 18, "{hits}/20");
}
