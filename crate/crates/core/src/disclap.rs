//! Discrete Laplace mixture model for haplotype frequencies.
//!
//! Each cluster has a weight, an integer centre per locus and a dispersion per locus; loci
//! vary independently around the centre with a double-geometric distribution. Fitting is by
//! EM from k-medoids++ style seeding, and the number of clusters is chosen by BIC.
//! Duplicated loci are fitted as two ordered columns, as stored.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::{EstimateInputs, MatchProbabilityEstimate, Method};
use crate::model::{Haplotype, HaplotypeDatabase, Panel};

pub const P_MIN: f64 = 1e-6;
pub const P_MAX: f64 = 1.0 - 1e-6;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_RESTARTS: usize = 5;

/// `((1-p)/(1+p)) * p^|d|`.
pub fn disclap_pmf(d: i64, p: f64) -> f64 {
    if p == 0.0 {
        return if d == 0 { 1.0 } else { 0.0 };
    }
    (1.0 - p) / (1.0 + p) * p.powf(d.unsigned_abs() as f64)
}

fn log_pmf(d: i64, p: f64) -> f64 {
    ((1.0 - p) / (1.0 + p)).ln() + d.unsigned_abs() as f64 * p.ln()
}

/// Dispersion maximising the likelihood given the mean absolute displacement, clamped to
/// `[P_MIN, P_MAX]`.
pub fn disclap_p_mle(mean_abs_dev: f64) -> f64 {
    let m = mean_abs_dev.max(0.0);
    let p = if m == 0.0 {
        0.0
    } else {
        // ((1+m^2)^0.5 - 1)/m, written to avoid cancellation for small m
        m / ((1.0 + m * m).sqrt() + 1.0)
    };
    p.clamp(P_MIN, P_MAX)
}

/// Draw a displacement: the difference of two geometric counts.
pub fn sample_disclap<R: Rng + ?Sized>(rng: &mut R, p: f64) -> i64 {
    if p <= 0.0 {
        return 0;
    }
    let g = Geometric::new(1.0 - p).expect("p in (0,1)");
    g.sample(rng) as i64 - g.sample(rng) as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub weight: f64,
    pub centers: Vec<i32>,
    pub dispersions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub bic: f64,
    pub n: usize,
}

/// A fitted mixture, tied to a panel by name and locus order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscLapModel {
    pub panel: String,
    pub loci: Vec<String>,
    pub clusters: Vec<Cluster>,
    pub diagnostics: FitDiagnostics,
}

/// Free parameters of a `c`-cluster model over `loci` loci.
pub fn parameter_count(c: usize, loci: usize) -> usize {
    (c - 1) + 2 * c * loci
}

pub fn bic(log_likelihood: f64, c: usize, loci: usize, n: usize) -> f64 {
    -2.0 * log_likelihood + parameter_count(c, loci) as f64 * (n as f64).ln()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl DiscLapModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let model: DiscLapModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(invalid("clusters", "model has no clusters"));
        }
        let total: f64 = self.clusters.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("clusters", format!("weights sum to {total}")));
        }
        for c in &self.clusters {
            if c.centers.len() != self.loci.len() || c.dispersions.len() != self.loci.len() {
                return Err(invalid("clusters", "cluster length differs from the locus list"));
            }
            if !(0.0..=1.0).contains(&c.weight) {
                return Err(invalid("clusters", format!("weight {} outside [0,1]", c.weight)));
            }
            if let Some(p) = c.dispersions.iter().find(|p| !(P_MIN..=P_MAX).contains(*p)) {
                return Err(invalid("clusters", format!("dispersion {p} outside [{P_MIN}, {P_MAX}]")));
            }
        }
        Ok(())
    }

    /// Error unless `panel` has the model's name and locus order.
    pub fn check_panel(&self, panel: &Panel) -> Result<()> {
        let same = panel.name() == self.panel
            && panel.loci().iter().map(|l| l.name.as_str()).eq(self.loci.iter().map(String::as_str));
        if same {
            Ok(())
        } else {
            Err(Error::ModelPanelMismatch {
                model: self.panel.clone(),
                panel: panel.name().to_string(),
            })
        }
    }

    fn log_joint(&self, x: &[i32], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.clusters) {
            *o = if c.weight > 0.0 {
                c.weight.ln()
                    + x.iter()
                        .zip(&c.centers)
                        .zip(&c.dispersions)
                        .map(|((&a, &y), &p)| log_pmf(i64::from(a) - i64::from(y), p))
                        .sum::<f64>()
            } else {
                f64::NEG_INFINITY
            };
        }
    }

    /// Probability of a complete profile.
    pub fn probability(&self, alleles: &[i32]) -> f64 {
        let mut buf = vec![0.0; self.clusters.len()];
        self.log_joint(alleles, &mut buf);
        log_sum_exp(&buf).exp()
    }

    /// Log-likelihood of complete profiles.
    pub fn log_likelihood(&self, profiles: &[Vec<i32>]) -> f64 {
        let mut buf = vec![0.0; self.clusters.len()];
        profiles
            .iter()
            .map(|x| {
                self.log_joint(x, &mut buf);
                log_sum_exp(&buf)
            })
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i32> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.clusters.last().expect("validated");
        for c in &self.clusters {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        chosen
            .centers
            .iter()
            .zip(&chosen.dispersions)
            .map(|(&y, &p)| (i64::from(y) + sample_disclap(rng, p)) as i32)
            .collect()
    }
}

/// Stopping rule for EM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

/// Distinct complete profiles with multiplicities, in first-seen order.
struct Data {
    profiles: Vec<Vec<i32>>,
    counts: Vec<f64>,
    n: usize,
    loci: usize,
}

impl Data {
    fn from_db(db: &HaplotypeDatabase) -> Result<Self> {
        let mut index: HashMap<Vec<i32>, usize> = HashMap::new();
        let mut profiles = Vec::new();
        let mut counts: Vec<f64> = Vec::new();
        for (row, h) in db.haplotypes().iter().enumerate() {
            let x: Vec<i32> = h.alleles().iter().copied().collect::<Option<_>>().ok_or_else(|| {
                Error::PartialProfile(format!(
                    "database row {} is incomplete; the Discrete Laplace model needs full profiles",
                    row + 1
                ))
            })?;
            match index.get(&x) {
                Some(&i) => counts[i] += 1.0,
                None => {
                    index.insert(x.clone(), profiles.len());
                    profiles.push(x);
                    counts.push(1.0);
                }
            }
        }
        Ok(Self {
            profiles,
            counts,
            n: db.len(),
            loci: db.panel().len(),
        })
    }

    fn log_likelihood(&self, model: &DiscLapModel, buf: &mut [f64]) -> f64 {
        self.profiles
            .iter()
            .zip(&self.counts)
            .map(|(x, w)| {
                model.log_joint(x, buf);
                w * log_sum_exp(buf)
            })
            .sum()
    }
}

fn l1(a: &[i32], b: &[i32]) -> u64 {
    a.iter().zip(b).map(|(x, y)| (i64::from(*x) - i64::from(*y)).unsigned_abs()).sum()
}

/// k-medoids++ seeding on L1 distance, weighted by multiplicity. Returns profile indices.
fn seed_medoids(data: &Data, c: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let pick = |weights: &[f64], rng: &mut ChaCha8Rng| {
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            if *w > 0.0 {
                if u < *w {
                    return i;
                }
                u -= w;
            }
        }
        weights.iter().rposition(|w| *w > 0.0).expect("positive total")
    };
    let mut medoids = vec![pick(&data.counts, rng)];
    let mut nearest: Vec<u64> = data.profiles.iter().map(|x| l1(x, &data.profiles[medoids[0]])).collect();
    while medoids.len() < c {
        let weights: Vec<f64> = nearest.iter().zip(&data.counts).map(|(&d, w)| d as f64 * w).collect();
        let m = pick(&weights, rng);
        medoids.push(m);
        for (d, x) in nearest.iter_mut().zip(&data.profiles) {
            *d = (*d).min(l1(x, &data.profiles[m]));
        }
    }
    medoids
}

/// Smallest value whose cumulative weight reaches half the total.
fn weighted_median(pairs: &mut [(i32, f64)]) -> i32 {
    pairs.sort_unstable_by_key(|&(v, _)| v);
    let total: f64 = pairs.iter().map(|&(_, w)| w).sum();
    let mut acc = 0.0;
    for &(v, w) in pairs.iter() {
        acc += w;
        if acc >= 0.5 * total {
            return v;
        }
    }
    pairs.last().expect("non-empty").0
}

/// Maximisation step; clusters with no responsibility keep their previous parameters.
fn m_step(data: &Data, resp: &[Vec<f64>], model: &mut DiscLapModel) {
    let mut pairs: Vec<(i32, f64)> = Vec::with_capacity(data.profiles.len());
    for (k, cluster) in model.clusters.iter_mut().enumerate() {
        let w: Vec<f64> = resp.iter().zip(&data.counts).map(|(r, c)| r[k] * c).collect();
        let total: f64 = w.iter().sum();
        cluster.weight = total / data.n as f64;
        if total <= f64::MIN_POSITIVE {
            continue;
        }
        for l in 0..data.loci {
            pairs.clear();
            pairs.extend(data.profiles.iter().zip(&w).filter(|(_, &w)| w > 0.0).map(|(x, &w)| (x[l], w)));
            let y = weighted_median(&mut pairs);
            let mad = data
                .profiles
                .iter()
                .zip(&w)
                .map(|(x, w)| w * (i64::from(x[l]) - i64::from(y)).unsigned_abs() as f64)
                .sum::<f64>()
                / total;
            cluster.centers[l] = y;
            cluster.dispersions[l] = disclap_p_mle(mad);
        }
    }
    let s: f64 = model.clusters.iter().map(|c| c.weight).sum();
    for c in &mut model.clusters {
        c.weight /= s;
    }
}

fn e_step(data: &Data, model: &DiscLapModel, resp: &mut [Vec<f64>]) {
    for (x, r) in data.profiles.iter().zip(resp.iter_mut()) {
        model.log_joint(x, r);
        let z = log_sum_exp(r);
        for v in r.iter_mut() {
            *v = (*v - z).exp();
        }
    }
}

/// Fit a `num_clusters` model by EM, returning the model and the log-likelihood after every
/// iteration.
pub fn fit_em_traced(
    db: &HaplotypeDatabase,
    num_clusters: usize,
    seed: u64,
    options: &EmOptions,
) -> Result<(DiscLapModel, Vec<f64>)> {
    let data = Data::from_db(db)?;
    fit_data(&data, db.panel(), num_clusters, seed, options)
}

fn fit_data(
    data: &Data,
    panel: &Panel,
    c: usize,
    seed: u64,
    options: &EmOptions,
) -> Result<(DiscLapModel, Vec<f64>)> {
    if c == 0 {
        return Err(invalid("num_clusters", "must be at least 1"));
    }
    if c > data.profiles.len() {
        return Err(Error::TooManyClusters {
            requested: c,
            distinct: data.profiles.len(),
        });
    }
    if options.max_iter == 0 || options.rel_tol.is_nan() || options.rel_tol < 0.0 {
        return Err(invalid("options", "max_iter must be positive and rel_tol non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let medoids = seed_medoids(data, c, &mut rng);
    let mut resp: Vec<Vec<f64>> = data
        .profiles
        .iter()
        .map(|x| {
            let best = (0..c)
                .min_by_key(|&k| l1(x, &data.profiles[medoids[k]]))
                .expect("c >= 1");
            (0..c).map(|k| if k == best { 1.0 } else { 0.0 }).collect()
        })
        .collect();
    let mut model = DiscLapModel {
        panel: panel.name().to_string(),
        loci: panel.loci().iter().map(|l| l.name.clone()).collect(),
        clusters: medoids
            .iter()
            .map(|&m| Cluster {
                weight: 0.0,
                centers: data.profiles[m].clone(),
                dispersions: vec![P_MIN; data.loci],
            })
            .collect(),
        diagnostics: FitDiagnostics {
            log_likelihood: f64::NEG_INFINITY,
            iterations: 0,
            converged: false,
            bic: f64::INFINITY,
            n: data.n,
        },
    };
    m_step(data, &resp, &mut model);
    let mut buf = vec![0.0; c];
    let mut ll = data.log_likelihood(&model, &mut buf);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iter {
        iterations += 1;
        e_step(data, &model, &mut resp);
        m_step(data, &resp, &mut model);
        let next = data.log_likelihood(&model, &mut buf);
        trace.push(next);
        let gain = next - ll;
        ll = next;
        if gain <= options.rel_tol * ll.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    model.diagnostics = FitDiagnostics {
        log_likelihood: ll,
        iterations,
        converged,
        bic: bic(ll, c, data.loci, data.n),
        n: data.n,
    };
    Ok((model, trace))
}

/// Fit a `num_clusters` model by EM.
pub fn fit_em(
    db: &HaplotypeDatabase,
    num_clusters: usize,
    seed: u64,
    options: &EmOptions,
) -> Result<DiscLapModel> {
    fit_em_traced(db, num_clusters, seed, options).map(|(m, _)| m)
}

/// `Σ_c τ_c Π_l pmf(q_l − y_{c,l}, p_{c,l})` for a complete profile.
pub fn haplotype_probability(model: &DiscLapModel, q: &Haplotype) -> Result<MatchProbabilityEstimate> {
    if q.len() != model.loci.len() {
        return Err(Error::PanelMismatch {
            expected: model.loci.len(),
            got: q.len(),
        });
    }
    let x: Vec<i32> = q.alleles().iter().copied().collect::<Option<_>>().ok_or_else(|| {
        Error::PartialProfile(
            "the Discrete Laplace model needs a complete profile; use simulation for partial profiles"
                .to_string(),
        )
    })?;
    Ok(MatchProbabilityEstimate {
        value: model.probability(&x),
        method: Method::DiscreteLaplace,
        inputs: EstimateInputs::default(),
    })
}

/// Candidate fits considered by [`select_clusters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub best: DiscLapModel,
    /// Best fit for each cluster count tried, in order.
    pub fits: Vec<DiscLapModel>,
}

/// Fit 1..=`max_clusters` clusters, each with `restarts` seeds (`seed + r`), keeping the
/// highest-likelihood restart per cluster count and returning the lowest-BIC model overall.
/// Cluster counts above the number of distinct profiles are skipped.
pub fn select_clusters(
    db: &HaplotypeDatabase,
    max_clusters: usize,
    seed: u64,
    restarts: usize,
    options: &EmOptions,
) -> Result<Selection> {
    if max_clusters == 0 || restarts == 0 {
        return Err(invalid("max_clusters", "max_clusters and restarts must be at least 1"));
    }
    let data = Data::from_db(db)?;
    let top = max_clusters.min(data.profiles.len());
    let jobs: Vec<(usize, usize)> = (1..=top).flat_map(|c| (0..restarts).map(move |r| (c, r))).collect();
    let results: Vec<(usize, DiscLapModel)> = jobs
        .into_par_iter()
        .map(|(c, r)| fit_data(&data, db.panel(), c, seed.wrapping_add(r as u64), options).map(|(m, _)| (c, m)))
        .collect::<Result<_>>()?;
    let mut fits: Vec<DiscLapModel> = Vec::with_capacity(top);
    for c in 1..=top {
        let best = results
            .iter()
            .filter(|(k, _)| *k == c)
            .map(|(_, m)| m)
            .fold(None::<&DiscLapModel>, |acc, m| match acc {
                Some(a) if a.diagnostics.log_likelihood >= m.diagnostics.log_likelihood => Some(a),
                _ => Some(m),
            })
            .expect("restarts >= 1");
        fits.push(best.clone());
    }
    let best = fits
        .iter()
        .fold(None::<&DiscLapModel>, |acc, m| match acc {
            Some(a) if a.diagnostics.bic <= m.diagnostics.bic => Some(a),
            _ => Some(m),
        })
        .expect("top >= 1")
        .clone();
    Ok(Selection { best, fits })
}

/// [`select_clusters`] with default restarts and stopping rule.
pub fn select_clusters_bic(db: &HaplotypeDatabase, max_clusters: usize, seed: u64) -> Result<DiscLapModel> {
    select_clusters(db, max_clusters, seed, DEFAULT_RESTARTS, &EmOptions::default()).map(|s| s.best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LocusSpec;
    use proptest::prelude::*;

    fn panel(l: usize) -> Panel {
        Panel::new("toy", (0..l).map(|i| LocusSpec::new(format!("L{i}"), 0.002)).collect()).unwrap()
    }

    fn db_from(profiles: &[Vec<i32>]) -> HaplotypeDatabase {
        let l = profiles[0].len();
        HaplotypeDatabase::new(panel(l), profiles.iter().map(|x| Haplotype::complete(x).unwrap()).collect()).unwrap()
    }

    fn model(clusters: Vec<Cluster>) -> DiscLapModel {
        let l = clusters[0].centers.len();
        DiscLapModel {
            panel: "toy".into(),
            loci: (0..l).map(|i| format!("L{i}")).collect(),
            clusters,
            diagnostics: FitDiagnostics {
                log_likelihood: 0.0,
                iterations: 0,
                converged: true,
                bic: 0.0,
                n: 0,
            },
        }
    }

    fn loglik_p(m: f64, p: f64) -> f64 {
        ((1.0 - p) / (1.0 + p)).ln() + m * p.ln()
    }

    #[test]
    fn pmf_values() {
        assert_eq!(disclap_pmf(0, 0.0), 1.0);
        assert_eq!(disclap_pmf(3, 0.0), 0.0);
        assert!((disclap_pmf(1, 0.5) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(disclap_pmf(-2, 0.3), disclap_pmf(2, 0.3));
        let s: f64 = (-60..=60).map(|d| disclap_pmf(d, 0.5)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_sums_to_one_with_tail_bound() {
        for p in [P_MIN, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9] {
            let k = 400i64;
            let s: f64 = (-k..=k).map(|d| disclap_pmf(d, p)).sum();
            // mass beyond |d| > k is 2 p^(k+1) / (1+p)
            let tail = 2.0 * p.powi(k as i32 + 1) / (1.0 + p);
            assert!((s + tail - 1.0).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn mle_examples() {
        assert_eq!(disclap_p_mle(0.0), P_MIN);
        assert!((disclap_p_mle(4.0 / 3.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mle_round_trips_series_mean() {
        for i in 1..=9 {
            let p = i as f64 / 10.0;
            // E|D| by direct summation
            let m: f64 = (-2000i64..=2000).map(|d| d.unsigned_abs() as f64 * disclap_pmf(d, p)).sum();
            assert!((m - 2.0 * p / (1.0 - p * p)).abs() < 1e-10);
            assert!((disclap_p_mle(m) - p).abs() < 1e-10, "p={p}");
        }
    }

    #[test]
    fn mle_matches_grid_search() {
        for m in [0.1, 0.5, 1.0, 2.5, 10.0] {
            let grid = 1_000_000;
            let (mut best, mut best_ll) = (0.0, f64::NEG_INFINITY);
            for i in 1..grid {
                let p = i as f64 / grid as f64;
                let ll = loglik_p(m, p);
                if ll > best_ll {
                    best_ll = ll;
                    best = p;
                }
            }
            let p = disclap_p_mle(m);
            assert!((p - best).abs() <= 1e-6, "m={m}");
            assert!(loglik_p(m, p) >= best_ll - 1e-12);
        }
    }

    #[test]
    fn sampler_matches_pmf() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = 0.4;
        let n = 200_000;
        let mut counts = HashMap::new();
        for _ in 0..n {
            *counts.entry(sample_disclap(&mut rng, p)).or_insert(0u32) += 1;
        }
        for d in -3..=3 {
            let f = counts.get(&d).copied().unwrap_or(0) as f64 / n as f64;
            let e = disclap_pmf(d, p);
            assert!((f - e).abs() < 4.0 * (e * (1.0 - e) / n as f64).sqrt(), "d={d}");
        }
    }

    #[test]
    fn degenerate_database() {
        let db = db_from(&vec![vec![14, 13, 29]; 20]);
        let m = fit_em(&db, 1, 0, &EmOptions::default()).unwrap();
        assert_eq!(m.clusters.len(), 1);
        assert!((m.clusters[0].weight - 1.0).abs() < 1e-12);
        assert_eq!(m.clusters[0].centers, vec![14, 13, 29]);
        assert!(m.clusters[0].dispersions.iter().all(|&p| p == P_MIN));
        let q = Haplotype::complete(&[14, 13, 29]).unwrap();
        let pi = haplotype_probability(&m, &q).unwrap().value;
        let expected = ((1.0 - P_MIN) / (1.0 + P_MIN)).powi(3);
        assert!((pi - expected).abs() < 1e-14);
        assert!((pi - (1.0 - 3.0 * 2.0 * P_MIN)).abs() < 1e-10);
    }

    #[test]
    fn two_cluster_hand_expansion() {
        let m = model(vec![
            Cluster { weight: 0.5, centers: vec![10, 20], dispersions: vec![0.2, 0.3] },
            Cluster { weight: 0.5, centers: vec![12, 17], dispersions: vec![0.4, 0.1] },
        ]);
        let q = Haplotype::complete(&[10, 20]).unwrap();
        let expected = 0.5 * disclap_pmf(0, 0.2) * disclap_pmf(0, 0.3)
            + 0.5 * disclap_pmf(-2, 0.4) * disclap_pmf(3, 0.1);
        assert!((haplotype_probability(&m, &q).unwrap().value - expected).abs() < 1e-15);
    }

    #[test]
    fn enumerated_profile_space_sums_to_one() {
        let m = model(vec![
            Cluster { weight: 0.3, centers: vec![10, 20], dispersions: vec![0.2, 0.6] },
            Cluster { weight: 0.7, centers: vec![14, 15], dispersions: vec![0.5, 0.1] },
        ]);
        let mut total = 0.0;
        for a in -200..=240 {
            for b in -200..=240 {
                total += m.probability(&[a, b]);
            }
        }
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn partial_profiles_rejected() {
        let p = panel(2);
        let db = HaplotypeDatabase::new(
            p.clone(),
            vec![Haplotype::complete(&[1, 2]).unwrap(), Haplotype::new(vec![Some(1), None]).unwrap()],
        )
        .unwrap();
        assert!(matches!(fit_em(&db, 1, 0, &EmOptions::default()), Err(Error::PartialProfile(_))));
        let m = fit_em(&db_from(&[vec![1, 2], vec![1, 3]]), 1, 0, &EmOptions::default()).unwrap();
        let q = Haplotype::new(vec![Some(1), None]).unwrap();
        assert!(matches!(haplotype_probability(&m, &q), Err(Error::PartialProfile(_))));
    }

    #[test]
    fn too_many_clusters() {
        let db = db_from(&[vec![1, 2], vec![1, 2], vec![3, 4]]);
        assert!(matches!(
            fit_em(&db, 3, 0, &EmOptions::default()),
            Err(Error::TooManyClusters { requested: 3, distinct: 2 })
        ));
        // selection just stops at the number of distinct profiles
        let s = select_clusters(&db, 5, 0, 2, &EmOptions::default()).unwrap();
        assert_eq!(s.fits.len(), 2);
    }

    #[test]
    fn max_clusters_one_returns_single_fit() {
        let db = db_from(&[vec![1, 2], vec![1, 3], vec![2, 2], vec![9, 9]]);
        let m = select_clusters_bic(&db, 1, 3).unwrap();
        assert_eq!(m.clusters.len(), 1);
        let direct = fit_em(&db, 1, 3, &EmOptions::default()).unwrap();
        assert_eq!(m.diagnostics.log_likelihood, direct.diagnostics.log_likelihood);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let db = db_from(&[vec![1, 2], vec![1, 3], vec![2, 2], vec![9, 9], vec![8, 9]]);
        let m = fit_em(&db, 2, 1, &EmOptions::default()).unwrap();
        let back = DiscLapModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn panel_check() {
        let m = fit_em(&db_from(&[vec![1, 2], vec![1, 3]]), 1, 0, &EmOptions::default()).unwrap();
        assert!(m.check_panel(&panel(2)).is_ok());
        assert!(matches!(m.check_panel(&panel(3)), Err(Error::ModelPanelMismatch { .. })));
    }

    #[test]
    fn weighted_median_ties_go_low() {
        assert_eq!(weighted_median(&mut [(3, 1.0), (5, 1.0)]), 3);
        assert_eq!(weighted_median(&mut [(5, 1.0), (3, 1.0), (4, 0.5)]), 4);
        assert_eq!(weighted_median(&mut [(7, 3.0), (1, 1.0)]), 7);
    }

    proptest! {
        #[test]
        fn pmf_symmetric_and_bounded(d in -50i64..50, p in 0.0f64..0.999) {
            let v = disclap_pmf(d, p);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, disclap_pmf(-d, p));
        }

        #[test]
        fn mle_is_stationary(m in 0.01f64..50.0) {
            let p = disclap_p_mle(m);
            // the implied mean absolute deviation reproduces m
            prop_assert!((2.0 * p / (1.0 - p * p) - m).abs() < 1e-9 * m.max(1.0));
        }

        #[test]
        fn probability_in_unit_interval(
            profiles in proptest::collection::vec(proptest::collection::vec(8i32..14, 3), 4..30),
            q in proptest::collection::vec(0i32..20, 3),
            seed in 0u64..100,
        ) {
            let db = db_from(&profiles);
            let c = db.distinct_profiles().min(2);
            let m = fit_em(&db, c, seed, &EmOptions::default()).unwrap();
            let total: f64 = m.clusters.iter().map(|c| c.weight).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            let v = haplotype_probability(&m, &Haplotype::complete(&q).unwrap()).unwrap().value;
            prop_assert!(v > 0.0 && v <= 1.0);
        }
    }
}
