//! Closed-form match-probability estimators and likelihood ratios.
//!
//! Estimators are listed in order of increasing conservativeness at `k_q = 0`:
//! database frequency, singleton fraction (κ), add-one, add-two, upper confidence limit.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::DatabaseSummary;

pub const HYPOTHESIS_Q: &str = "H_Q: the DNA came from Q";
pub const HYPOTHESIS_X: &str = "H_X: the DNA came from an alternative individual X";

pub const DEFAULT_CONFIDENCE: f64 = 0.95;
pub const DEFAULT_UCL_TOLERANCE: f64 = 1e-10;

/// Likelihood ratio `1 / denominator` for `H_Q` against `H_X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrValue {
    pub lr: f64,
    pub denominator: f64,
    pub h_q: &'static str,
    pub h_x: &'static str,
}

impl LrValue {
    fn from_denominator(denominator: f64) -> Self {
        Self {
            lr: 1.0 / denominator,
            denominator,
            h_q: HYPOTHESIS_Q,
            h_x: HYPOTHESIS_X,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DatabaseFrequency,
    Kappa,
    AddOne,
    AddTwo,
    Ucl,
    DiscreteLaplace,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::DatabaseFrequency => "database frequency k/n",
            Method::Kappa => "singleton fraction (1-kappa)/n",
            Method::AddOne => "augmented (k+1)/(n+1)",
            Method::AddTwo => "augmented (k+2)/(n+2)",
            Method::Ucl => "binomial upper confidence limit",
            Method::DiscreteLaplace => "Discrete Laplace mixture",
        }
    }

    /// Forensic bodies whose published recommendations use this estimator.
    pub fn recommended_by(self) -> &'static [&'static str] {
        match self {
            Method::DatabaseFrequency => &["SWGDAM 2014 (Y, with theta)", "SWGDAM 2019 (mtDNA)"],
            Method::Kappa => &["ISFG Polish Speaking Working Group (Y)"],
            Method::AddOne => &[],
            Method::AddTwo => &["UK Forensic Regulator (Y)", "ISFG 2014 (mtDNA)"],
            Method::Ucl => &["SWGDAM 2014 (Y, with theta)", "SWGDAM 2019 (mtDNA)", "ISFG 2014 (mtDNA)"],
            Method::DiscreteLaplace => &["ISFG 2020 (Y)", "Germany (Y)", "Philippines (Y)"],
        }
    }
}

/// Inputs echoed with each estimate so it can be recomputed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EstimateInputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_q: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub augment: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// An estimate of the match probability π_q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchProbabilityEstimate {
    pub value: f64,
    pub method: Method,
    pub inputs: EstimateInputs,
}

impl MatchProbabilityEstimate {
    /// `1 / π̂`, or `None` when the estimate is zero.
    pub fn lr(&self) -> Option<LrValue> {
        (self.value > 0.0).then(|| LrValue::from_denominator(self.value))
    }
}

/// How many copies of `q` are added to the database before taking its frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Augment {
    None,
    One,
    Two,
}

impl Augment {
    pub fn copies(self) -> u64 {
        match self {
            Augment::None => 0,
            Augment::One => 1,
            Augment::Two => 2,
        }
    }

    fn method(self) -> Method {
        match self {
            Augment::None => Method::DatabaseFrequency,
            Augment::One => Method::AddOne,
            Augment::Two => Method::AddTwo,
        }
    }
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(name, format!("{p} is outside [0, 1]")));
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<()> {
    if !(0.0..1.0).contains(&mu) {
        return Err(invalid("mutation rate", format!("{mu} is outside [0, 1)")));
    }
    Ok(())
}

/// `(k_q + a) / (n + a)` with `a` copies of `q` added.
pub fn freq_estimate(summary: &DatabaseSummary, augment: Augment) -> MatchProbabilityEstimate {
    let a = augment.copies();
    MatchProbabilityEstimate {
        value: (summary.k_q + a) as f64 / (summary.n + a) as f64,
        method: augment.method(),
        inputs: EstimateInputs {
            k_q: Some(summary.k_q),
            n: Some(summary.n),
            augment: Some(a),
            ..Default::default()
        },
    }
}

/// `(1 - κ) / n`, defined only for profiles absent from the database.
pub fn kappa_estimate(summary: &DatabaseSummary) -> Result<MatchProbabilityEstimate> {
    if summary.k_q > 0 {
        return Err(Error::EstimatorNotApplicable {
            estimator: "kappa",
            reason: format!(
                "it is defined only for k_q = 0 (k_q = {}); use a frequency estimate or the UCL",
                summary.k_q
            ),
        });
    }
    Ok(MatchProbabilityEstimate {
        value: (1.0 - summary.kappa) / summary.n as f64,
        method: Method::Kappa,
        inputs: EstimateInputs {
            k_q: Some(summary.k_q),
            n: Some(summary.n),
            kappa: Some(summary.kappa),
            ..Default::default()
        },
    })
}

/// `P(X ≤ k)` for `X ~ Binomial(n, p)`, summed in log space.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let log_choose = log_binomial_coefficients(n, k);
    binomial_cdf_with(&log_choose, n, p)
}

fn log_binomial_coefficients(n: u64, k: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k as usize + 1);
    let mut acc = 0.0;
    out.push(acc);
    for x in 1..=k {
        acc += ((n - x + 1) as f64).ln() - (x as f64).ln();
        out.push(acc);
    }
    out
}

fn binomial_cdf_with(log_choose: &[f64], n: u64, p: f64) -> f64 {
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let terms = log_choose
        .iter()
        .enumerate()
        .map(|(x, lc)| lc + x as f64 * lp + (n - x as u64) as f64 * lq);
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    (max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()).exp().min(1.0)
}

/// Clopper-Pearson upper confidence limit: the largest π with
/// `P(X ≤ k_q | n, π) ≥ 1 - confidence`, located by bisection to `tolerance`.
pub fn ucl_estimate(
    summary: &DatabaseSummary,
    confidence: f64,
    tolerance: f64,
) -> Result<MatchProbabilityEstimate> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid("confidence", format!("{confidence} is outside (0, 1)")));
    }
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(invalid("tolerance", format!("{tolerance} must be positive")));
    }
    if summary.n == 0 {
        return Err(Error::EmptyDatabase);
    }
    let (k, n) = (summary.k_q, summary.n);
    let alpha = 1.0 - confidence;
    let value = if k >= n {
        1.0
    } else {
        let log_choose = log_binomial_coefficients(n, k);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > tolerance {
            let mid = 0.5 * (lo + hi);
            if binomial_cdf_with(&log_choose, n, mid) >= alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    Ok(MatchProbabilityEstimate {
        value,
        method: Method::Ucl,
        inputs: EstimateInputs {
            k_q: Some(k),
            n: Some(n),
            confidence: Some(confidence),
            ..Default::default()
        },
    })
}

/// A probability distribution over the meiosis distance `G ≥ 1` between Q and an alternative
/// source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GDistribution {
    support: Vec<(u32, f64)>,
}

impl GDistribution {
    /// Validates and, if the mass does not sum to one, renormalises with a warning.
    pub fn new(mut support: Vec<(u32, f64)>) -> Result<Self> {
        support.sort_by_key(|&(g, _)| g);
        for w in support.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(invalid("meiosis distribution", format!("g = {} appears twice", w[0].0)));
            }
        }
        for &(g, p) in &support {
            if g == 0 {
                return Err(invalid("meiosis distribution", "g must be at least 1"));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(invalid("meiosis distribution", format!("P(G={g}) = {p} is not a probability")));
            }
        }
        let total: f64 = support.iter().map(|&(_, p)| p).sum();
        if total <= 0.0 {
            return Err(Error::EmptyDistribution);
        }
        if (total - 1.0).abs() > 1e-9 {
            log::warn!("meiosis-distance probabilities sum to {total}; renormalising");
        }
        for (_, p) in &mut support {
            *p /= total;
        }
        Ok(Self { support })
    }

    pub fn point_mass(g: u32) -> Result<Self> {
        Self::new(vec![(g, 1.0)])
    }

    /// From counts, e.g. a simulated meiosis-distance histogram.
    pub fn from_counts(counts: impl IntoIterator<Item = (u32, u64)>) -> Result<Self> {
        Self::new(counts.into_iter().map(|(g, c)| (g, c as f64)).collect())
    }

    /// Zero out excluded distances (e.g. relatives ruled out as sources) and renormalise.
    pub fn exclude(&self, excluded: &[u32]) -> Result<Self> {
        let support: Vec<(u32, f64)> = self
            .support
            .iter()
            .map(|&(g, p)| (g, if excluded.contains(&g) { 0.0 } else { p }))
            .collect();
        if support.iter().all(|&(_, p)| p == 0.0) {
            return Err(Error::EmptyDistribution);
        }
        Self::new(support)
    }

    pub fn support(&self) -> &[(u32, f64)] {
        &self.support
    }

    pub fn total(&self) -> f64 {
        self.support.iter().map(|&(_, p)| p).sum()
    }
}

/// `1 / (1 - μ)^g` for a known meiosis distance.
pub fn lr_known_g(mu: f64, g: u32) -> Result<LrValue> {
    check_mu(mu)?;
    if g == 0 {
        return Err(invalid("g", "meiosis distance must be at least 1"));
    }
    Ok(LrValue::from_denominator((1.0 - mu).powi(g as i32)))
}

/// `1 / Σ_g (1 - μ)^g P(G = g)`.
pub fn lr_g_distribution(mu: f64, gdist: &GDistribution) -> Result<LrValue> {
    check_mu(mu)?;
    let denominator: f64 = gdist
        .support
        .iter()
        .map(|&(g, p)| (1.0 - mu).powi(g as i32) * p)
        .sum();
    Ok(LrValue::from_denominator(denominator))
}

/// Coancestry-adjusted LR `1 / (θ + (1 - θ) π_q)`.
pub fn theta_adjust(pi_q: f64, theta: f64) -> Result<LrValue> {
    check_probability("match probability", pi_q)?;
    if !(0.0..1.0).contains(&theta) {
        return Err(invalid("theta", format!("{theta} is outside [0, 1)")));
    }
    let denominator = theta + (1.0 - theta) * pi_q;
    if denominator <= 0.0 {
        return Err(invalid("theta", "theta and the match probability are both zero"));
    }
    Ok(LrValue::from_denominator(denominator))
}

/// `N / K_q`, valid only if the `K_q` matching individuals are well mixed among the `N`
/// alternative sources.
pub fn lr_from_kq(n_population: u64, k_q: u64) -> Result<LrValue> {
    if k_q == 0 {
        return Err(invalid("K_q", "must be at least 1"));
    }
    if k_q > n_population {
        return Err(invalid("K_q", format!("{k_q} exceeds the population size {n_population}")));
    }
    Ok(LrValue::from_denominator(k_q as f64 / n_population as f64))
}

pub const WELL_MIXED_CAVEAT: &str = "N/K_q assumes the matching individuals are well mixed in the \
population of alternative sources; matchers are typically relatives of Q, so this assumption rarely holds.";

/// Expected number of individuals matching both the lineage and the autosomal profile.
pub fn combine_autosomal(kq_bound: f64, autosomal_match_prob: f64) -> Result<f64> {
    if !kq_bound.is_finite() || kq_bound < 0.0 {
        return Err(invalid("K_q bound", format!("{kq_bound} must be non-negative")));
    }
    check_probability("autosomal match probability", autosomal_match_prob)?;
    Ok(kq_bound * autosomal_match_prob)
}
