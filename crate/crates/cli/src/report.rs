use std::fmt::Write as _;

use clap::ValueEnum;
use lineage_core::disclap::{haplotype_probability, DiscLapModel};
use lineage_core::estimators::{
    freq_estimate, kappa_estimate, lr_g_distribution, lr_known_g, theta_adjust, ucl_estimate, Augment,
    EstimateInputs, GDistribution, MatchProbabilityEstimate, DEFAULT_UCL_TOLERANCE,
};
use lineage_core::{DatabaseSummary, Error, Haplotype, HaplotypeDatabase, MatchPolicy, Panel};
use serde::Serialize;

use crate::exit;

/// Upper bound of the low-rate regime, per generation.
pub const LOW_RATE_LIMIT: f64 = 0.05;
/// Lower bound of the high-rate regime, per generation.
pub const HIGH_RATE_LIMIT: f64 = 0.1;

pub const CAVEAT_RELATEDNESS: &str = "Most individuals sharing Q's lineage profile are paternal \
(or maternal) relatives of Q. A match probability does not describe how many such relatives exist \
or how closely they are related to Q.";
pub const CAVEAT_SAMPLING_FRAME: &str = "The database may be drawn from a broadly-defined \
population that has a lower average relatedness with Q than the alternative sources of the DNA in \
this case, so database-based estimates can be anti-conservative.";
pub const CAVEAT_THETA: &str = "θ cannot be estimated from lineage-marker databases for the \
population relevant to a case. Any θ used is a judgement, and none is applied unless supplied.";
pub const CAVEAT_STRUCTURE: &str = "Likelihood ratios given a meiosis distance assume the stated \
alternative is related to Q as specified and ignore matches arising by parallel or back mutation.";

/// Estimators a report can include, in order of increasing conservativeness at `k_q = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Database relative frequency k_q/n.
    Naive,
    /// Singleton-fraction estimate (1-κ)/n, defined for k_q = 0 only.
    Kappa,
    /// (k_q+1)/(n+1).
    Add1,
    /// (k_q+2)/(n+2).
    Add2,
    /// Clopper-Pearson upper confidence limit.
    Ucl,
    /// Discrete Laplace mixture model (needs a fitted model).
    Disclap,
}

impl Estimator {
    pub const DATABASE: [Estimator; 5] =
        [Estimator::Naive, Estimator::Kappa, Estimator::Add1, Estimator::Add2, Estimator::Ucl];

    pub fn key(self) -> &'static str {
        match self {
            Estimator::Naive => "naive",
            Estimator::Kappa => "kappa",
            Estimator::Add1 => "add1",
            Estimator::Add2 => "add2",
            Estimator::Ucl => "ucl",
            Estimator::Disclap => "disclap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeKind {
    LowRate,
    Intermediate,
    HighRate,
}

impl RegimeKind {
    pub fn classify(mu: f64) -> Self {
        if mu < LOW_RATE_LIMIT {
            RegimeKind::LowRate
        } else if mu > HIGH_RATE_LIMIT {
            RegimeKind::HighRate
        } else {
            RegimeKind::Intermediate
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RegimeKind::LowRate => "low-rate",
            RegimeKind::Intermediate => "intermediate",
            RegimeKind::HighRate => "high-rate",
        }
    }

    pub fn recommendation(self) -> &'static str {
        match self {
            RegimeKind::LowRate => {
                "Database-based estimates with a θ adjustment may be adequate, although matching \
                 relatives of Q remain the main alternative sources."
            }
            RegimeKind::Intermediate => {
                "Report database-based estimates alongside the simulated number of matching \
                 relatives (`lineage simulate`)."
            }
            RegimeKind::HighRate => {
                "Most males matching Q are related to him within a few generations. Summarise the \
                 simulated number of matching individuals and their relatedness to Q \
                 (`lineage simulate`) rather than a database frequency."
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regime {
    pub kind: RegimeKind,
    /// Profile mutation rate over the loci observed in the query.
    pub mutation_rate: f64,
    pub recommendation: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub estimator: Estimator,
    pub method: &'static str,
    pub recommended_by: &'static [&'static str],
    pub pi_q: Option<f64>,
    /// `1 / pi_q`; absent when the estimate is zero.
    pub lr: Option<f64>,
    pub theta_lr: Option<f64>,
    pub inputs: Option<EstimateInputs>,
    pub error: Option<String>,
    #[serde(skip)]
    pub not_applicable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelatednessRow {
    pub description: String,
    pub mutation_rate: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceReport {
    pub panel: String,
    pub panel_loci: usize,
    pub match_policy: MatchPolicy,
    pub query: Vec<Option<i32>>,
    pub observed_loci: Vec<String>,
    pub database: DatabaseSummary,
    pub confidence: f64,
    pub theta: Option<f64>,
    pub regime: Regime,
    pub estimates: Vec<EstimateRow>,
    pub relatedness: Vec<RelatednessRow>,
    pub caveats: Vec<&'static str>,
}

/// Everything `evaluate` needs, already loaded.
pub struct EvaluateRequest<'a> {
    pub database: &'a HaplotypeDatabase,
    pub query: &'a Haplotype,
    pub estimators: Vec<Estimator>,
    pub confidence: f64,
    pub theta: Option<f64>,
    pub gdist: Option<&'a GDistribution>,
    pub meioses: Option<u32>,
    pub model: Option<&'a DiscLapModel>,
    pub policy: MatchPolicy,
}

fn row(estimator: Estimator, result: lineage_core::Result<MatchProbabilityEstimate>, theta: Option<f64>) -> EstimateRow {
    match result {
        Ok(e) => {
            let theta_result = theta.map(|t| theta_adjust(e.value, t));
            let (theta_lr, error) = match theta_result {
                Some(Ok(v)) => (Some(v.lr), None),
                Some(Err(err)) => (None, Some(err.to_string())),
                None => (None, None),
            };
            EstimateRow {
                estimator,
                method: e.method.name(),
                recommended_by: e.method.recommended_by(),
                pi_q: Some(e.value),
                lr: e.lr().map(|v| v.lr),
                theta_lr,
                inputs: Some(e.inputs),
                error,
                not_applicable: false,
            }
        }
        Err(err) => EstimateRow {
            estimator,
            method: method_of(estimator).name(),
            recommended_by: method_of(estimator).recommended_by(),
            pi_q: None,
            lr: None,
            theta_lr: None,
            inputs: None,
            not_applicable: matches!(err, Error::EstimatorNotApplicable { .. }),
            error: Some(err.to_string()),
        },
    }
}

fn method_of(estimator: Estimator) -> lineage_core::estimators::Method {
    use lineage_core::estimators::Method;
    match estimator {
        Estimator::Naive => Method::DatabaseFrequency,
        Estimator::Kappa => Method::Kappa,
        Estimator::Add1 => Method::AddOne,
        Estimator::Add2 => Method::AddTwo,
        Estimator::Ucl => Method::Ucl,
        Estimator::Disclap => Method::DiscreteLaplace,
    }
}

/// Build the report. Estimator failures are recorded in their rows; only errors in the
/// shared inputs (panel, database, query, θ) abort.
pub fn evaluate(req: &EvaluateRequest) -> anyhow::Result<EvidenceReport> {
    let panel: &Panel = req.database.panel();
    req.query.check_panel(panel)?;
    if let Some(t) = req.theta {
        theta_adjust(0.0, t)?;
    }
    let summary = req.database.summarize(req.query, req.policy)?;
    let observed = req.query.observed_loci();
    let mu = panel.mutation_rate(Some(&observed))?;
    let kind = RegimeKind::classify(mu);

    let mut wanted = req.estimators.clone();
    wanted.sort();
    wanted.dedup();
    let estimates = wanted
        .into_iter()
        .map(|e| {
            let result = match e {
                Estimator::Naive => Ok(freq_estimate(&summary, Augment::None)),
                Estimator::Kappa => kappa_estimate(&summary),
                Estimator::Add1 => Ok(freq_estimate(&summary, Augment::One)),
                Estimator::Add2 => Ok(freq_estimate(&summary, Augment::Two)),
                Estimator::Ucl => ucl_estimate(&summary, req.confidence, DEFAULT_UCL_TOLERANCE),
                Estimator::Disclap => match req.model {
                    Some(model) => model.check_panel(panel).and_then(|_| haplotype_probability(model, req.query)),
                    None => Err(lineage_core::error::Error::InvalidParameter {
                        name: "model",
                        reason: "the disclap estimator needs a fitted model (--model)".into(),
                    }),
                },
            };
            row(e, result, req.theta)
        })
        .collect();

    let mut relatedness = Vec::new();
    if let Some(g) = req.meioses {
        relatedness.push(RelatednessRow {
            description: format!("alternative source separated from Q by {g} meioses"),
            mutation_rate: mu,
            lr: lr_known_g(mu, g)?.lr,
        });
    }
    if let Some(dist) = req.gdist {
        relatedness.push(RelatednessRow {
            description: format!("meiosis distance distributed over {} values", dist.support().len()),
            mutation_rate: mu,
            lr: lr_g_distribution(mu, dist)?.lr,
        });
    }

    let mut caveats = vec![CAVEAT_RELATEDNESS, CAVEAT_SAMPLING_FRAME, CAVEAT_THETA];
    if !relatedness.is_empty() {
        caveats.push(CAVEAT_STRUCTURE);
    }
    Ok(EvidenceReport {
        panel: panel.name().to_string(),
        panel_loci: panel.len(),
        match_policy: req.policy,
        query: req.query.alleles().to_vec(),
        observed_loci: observed.iter().map(|&l| panel.loci()[l].name.clone()).collect(),
        database: summary,
        confidence: req.confidence,
        theta: req.theta,
        regime: Regime {
            kind,
            mutation_rate: mu,
            recommendation: kind.recommendation(),
        },
        estimates,
        relatedness,
        caveats,
    })
}

impl EvidenceReport {
    /// 0 normally; when every estimator row failed, 3 if all failures were inapplicable
    /// estimators and 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.estimates.is_empty() || self.estimates.iter().any(|r| r.pi_q.is_some()) {
            exit::SUCCESS
        } else if self.estimates.iter().all(|r| r.not_applicable) {
            exit::NOT_APPLICABLE
        } else {
            exit::INPUT_ERROR
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Panel: {} ({} loci, {} observed in the query)",
            self.panel,
            self.panel_loci,
            self.observed_loci.len()
        );
        let _ = writeln!(s, "Matching: {}", self.match_policy.describe());
        let d = &self.database;
        let _ = writeln!(
            s,
            "Database: n = {}, k_q = {}, singleton fraction = {:.6}, doubletons = {}",
            d.n, d.k_q, d.kappa, d.doubleton_count
        );
        let _ = writeln!(
            s,
            "Profile mutation rate: {:.4} per generation ({})",
            self.regime.mutation_rate,
            self.regime.kind.label()
        );
        let _ = writeln!(s, "  {}", self.regime.recommendation);
        let _ = writeln!(s);

        let theta_head = self.theta.map(|t| format!("LR (θ = {t})")).unwrap_or_default();
        let _ = writeln!(s, "{:<28} {:>14} {:>14} {:>16}", "Estimator", "pi_q", "LR", theta_head);
        for r in &self.estimates {
            match (&r.pi_q, &r.error) {
                (Some(pi), err) => {
                    let _ = writeln!(
                        s,
                        "{:<28} {:>14} {:>14} {:>16}",
                        r.method,
                        fmt_prob(*pi),
                        r.lr.map(fmt_lr).unwrap_or_else(|| "-".into()),
                        r.theta_lr.map(fmt_lr).unwrap_or_default()
                    );
                    if let Some(e) = err {
                        let _ = writeln!(s, "{:<28} {e}", "");
                    }
                }
                (None, err) => {
                    let label = if r.not_applicable { "not applicable" } else { "error" };
                    let _ = writeln!(
                        s,
                        "{:<28} {label}: {}",
                        r.method,
                        err.as_deref().unwrap_or("")
                    );
                }
            }
        }
        if self.estimates.iter().any(|r| r.pi_q.is_some()) {
            let _ = writeln!(s, "UCL confidence: {}", self.confidence);
        }
        if !self.relatedness.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "Relatedness-based likelihood ratios");
            for r in &self.relatedness {
                let _ = writeln!(s, "  {}: LR = {}", r.description, fmt_lr(r.lr));
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "Caveats");
        for c in &self.caveats {
            let _ = writeln!(s, "  - {c}");
        }
        s
    }
}

pub fn fmt_prob(p: f64) -> String {
    if p == 0.0 || p >= 1e-4 {
        format!("{p:.6}")
    } else {
        format!("{p:.4e}")
    }
}

pub fn fmt_lr(lr: f64) -> String {
    if lr < 1e6 {
        format!("{lr:.4}")
    } else {
        format!("{lr:.4e}")
    }
}
