use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use lineage_core::io::format_gdistribution;
use lineage_core::mixture::{simulate_mixture_matches, MixtureProfile};
use lineage_core::sim::{kq_distribution, Conditioning, KqQuantiles, PopulationSchedule, SimConfig};
use lineage_core::Panel;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::panels::resolve_panel;

pub const KQ_HISTOGRAM: &str = "kq_histogram.csv";
pub const SUMMARY: &str = "summary.json";
pub const MEIOSIS_DISTANCE: &str = "meiosis_distance.csv";
pub const MIXTURE_HISTOGRAM: &str = "mixture_histogram.csv";

pub const NOTE_PANMIXIA: &str = "Single panmictic population without structure or migration.";

/// A panel given by preset key or file name, or written inline.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PanelRef {
    Name(String),
    Inline(Panel),
}

/// Simulation config file: the simulator's fields plus an optional locus subset and
/// conditioning block.
#[derive(Debug, Deserialize)]
struct ConfigFile {
    panel: PanelRef,
    #[serde(default)]
    locus_subset: Option<Vec<String>>,
    #[serde(default)]
    condition: Option<Conditioning>,
    #[serde(flatten)]
    rest: Map<String, Value>,
}

#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub config: SimConfig,
    pub subset: Option<Vec<usize>>,
    pub condition: Option<Conditioning>,
}

impl SimulationPlan {
    pub fn parse(text: &str, preset_dir: Option<&Path>) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(text).context("invalid simulation config")?;
        let panel = match file.panel {
            PanelRef::Name(name) => resolve_panel(&name, preset_dir)?,
            PanelRef::Inline(panel) => panel,
        };
        let mut rest = file.rest;
        rest.insert("panel".into(), serde_json::to_value(&panel)?);
        let config: SimConfig = serde_json::from_value(Value::Object(rest)).context("invalid simulation config")?;
        config.validate()?;
        let subset = file
            .locus_subset
            .map(|names| config.panel.subset_by_names(&names))
            .transpose()?;
        Ok(Self {
            config,
            subset,
            condition: file.condition,
        })
    }

    pub fn load(path: &Path, preset_dir: Option<&Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, preset_dir).with_context(|| format!("in {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureSummary {
    pub loci: Vec<String>,
    pub companion_median: u64,
    pub companion_mean: f64,
    pub kq_median: u64,
    pub kq_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub panel: String,
    pub loci: Vec<String>,
    pub mutation_rate: f64,
    pub generations: usize,
    pub population: PopulationSchedule,
    pub offspring_dispersion: f64,
    pub live_generations: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<Conditioning>,
    pub accepted: usize,
    pub acceptance_rate: f64,
    pub quantiles: KqQuantiles,
    pub mean_k_q: f64,
    pub max_k_q: u64,
    pub cross_founder_matches: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureSummary>,
    pub notes: Vec<&'static str>,
}

fn histogram_csv<K: std::fmt::Display>(header: &str, hist: &BTreeMap<K, u64>) -> String {
    let mut s = format!("{header}\n");
    for (k, v) in hist {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Run the plan and write its output files into `out_dir`. With a mixture, its observed
/// loci define the markers used for the mixture comparison.
pub fn run(plan: &SimulationPlan, mixture: Option<&MixtureProfile>, out_dir: &Path) -> Result<SimulationSummary> {
    let config = &plan.config;
    let panel = &config.panel;
    let outcome = kq_distribution(config, plan.condition.as_ref(), plan.subset.as_deref())?;
    let loci_idx: Vec<usize> = plan.subset.clone().unwrap_or_else(|| (0..panel.len()).collect());
    let names = |idx: &[usize]| idx.iter().map(|&l| panel.loci()[l].name.clone()).collect::<Vec<_>>();

    let mixture_outcome = mixture
        .map(|m| {
            let loci = m.observed_loci();
            simulate_mixture_matches(config, Some(&loci)).map(|o| (loci, o))
        })
        .transpose()?;

    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write(out_dir, KQ_HISTOGRAM, &histogram_csv("k_q,count", &outcome.kq_histogram))?;
    let distances = match outcome.g_distribution() {
        Ok(dist) => format_gdistribution(&dist),
        Err(_) => "g,prob\n".to_string(),
    };
    write(out_dir, MEIOSIS_DISTANCE, &distances)?;

    let mixture_summary = match &mixture_outcome {
        Some((loci, o)) => {
            write(out_dir, MIXTURE_HISTOGRAM, &histogram_csv("companions,count", &o.companion_histogram))?;
            let mean = |f: fn(&lineage_core::mixture::MixtureReplicate) -> u64| {
                o.replicates.iter().map(f).sum::<u64>() as f64 / o.replicates.len() as f64
            };
            Some(MixtureSummary {
                loci: names(loci),
                companion_median: o.companion_median,
                companion_mean: mean(|r| r.companions),
                kq_median: o.kq_median,
                kq_mean: mean(|r| r.k_q),
            })
        }
        None => None,
    };

    let summary = SimulationSummary {
        panel: panel.name().to_string(),
        loci: names(&loci_idx),
        mutation_rate: panel.mutation_rate(Some(&loci_idx))?,
        generations: config.generations,
        population: config.population,
        offspring_dispersion: config.offspring_dispersion,
        live_generations: config.live_generations,
        replicates: config.replicates,
        seed: config.seed,
        condition: plan.condition,
        accepted: outcome.accepted,
        acceptance_rate: outcome.accepted as f64 / config.replicates as f64,
        quantiles: outcome.quantiles,
        mean_k_q: outcome.mean_k_q,
        max_k_q: outcome.kq_histogram.keys().next_back().copied().unwrap_or(0),
        cross_founder_matches: outcome.cross_founder_matches,
        mixture: mixture_summary,
        notes: vec![NOTE_PANMIXIA],
    };
    write(out_dir, SUMMARY, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    Ok(summary)
}

impl SimulationSummary {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Panel {} ({} loci, mutation rate {:.4}), {} generations, {} live, {} replicates, seed {}",
            self.panel,
            self.loci.len(),
            self.mutation_rate,
            self.generations,
            self.live_generations,
            self.replicates,
            self.seed
        );
        if self.condition.is_some() {
            let _ = writeln!(s, "Accepted {} of {} replicates ({:.3})", self.accepted, self.replicates, self.acceptance_rate);
        }
        let q = &self.quantiles;
        let _ = writeln!(
            s,
            "K_q: median {}, 95th percentile {}, 99th percentile {}, mean {:.3}, max {}",
            q.p50, q.p95, q.p99, self.mean_k_q, self.max_k_q
        );
        if let Some(m) = &self.mixture {
            let _ = writeln!(
                s,
                "Mixture on {} loci: companion median {} (mean {:.3}) against single-source K_q median {} (mean {:.3})",
                m.loci.len(),
                m.companion_median,
                m.companion_mean,
                m.kq_median,
                m.kq_mean
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "Note: {n}");
        }
        s
    }
}
