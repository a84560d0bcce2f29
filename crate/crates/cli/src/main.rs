use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lineage_core::disclap::{self, DiscLapModel, EmOptions};
use lineage_core::estimators::{theta_adjust, DEFAULT_CONFIDENCE};
use lineage_core::mixture::{companion_count, mixture_contains, Candidates};
use lineage_core::model::PRESETS;
use lineage_core::sim::Conditioning;
use lineage_core::{io, MatchPolicy, Panel};

use lineage_cli::exit;
use lineage_cli::panels::{resolve_panel, PRESET_DIR_ENV};
use lineage_cli::report::{evaluate, fmt_lr, fmt_prob, EvaluateRequest, Estimator};
use lineage_cli::simulate::{self, SimulationPlan};

#[derive(Parser)]
#[command(name = "lineage", version, about = "Evidence evaluation for Y-STR and mitochondrial lineage-marker profiles")]
struct Cli {
    /// Directory searched for NAME.json when --panel is neither a preset nor a file.
    #[arg(long, global = true, env = PRESET_DIR_ENV)]
    preset_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match-probability estimates and likelihood ratios for a database and a query profile.
    Evaluate(EvaluateArgs),
    /// Forward-in-time lineage simulation of the number of matching individuals.
    Simulate(SimulateArgs),
    /// Fit or query a Discrete Laplace mixture model.
    #[command(subcommand)]
    Disclap(DisclapCommand),
    /// Two-person mixture checks.
    #[command(subcommand)]
    Mixture(MixtureCommand),
    /// Built-in panels.
    #[command(subcommand)]
    Panels(PanelsCommand),
}

#[derive(Args)]
struct PanelArg {
    /// Preset key, panel file, or NAME in the preset directory.
    #[arg(long)]
    panel: String,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    database: PathBuf,
    /// One-row profile file with the same layout as the database.
    #[arg(long)]
    query: PathBuf,
    #[command(flatten)]
    panel: PanelArg,
    /// Estimators to report (default: all database-based ones, plus disclap with --model).
    #[arg(long, value_enum, value_delimiter = ',')]
    estimators: Vec<Estimator>,
    /// Confidence level of the upper confidence limit.
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE)]
    confidence: f64,
    /// Coancestry coefficient; adds θ-adjusted likelihood ratios.
    #[arg(long)]
    theta: Option<f64>,
    /// Distribution of the meiosis distance between Q and the alternative source (g,prob).
    #[arg(long)]
    gdist: Option<PathBuf>,
    /// Known meiosis distance between Q and the alternative source.
    #[arg(long)]
    meioses: Option<u32>,
    /// Fitted Discrete Laplace model (JSON).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Leave duplicated loci (DYS385a/b, ...) out of matching.
    #[arg(long)]
    strict_duplicates: bool,
    /// Write the report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Mixture file; its observed loci define the markers of simulated two-person mixtures.
    #[arg(long)]
    mixture: Option<PathBuf>,
    /// Keep only replicates whose sampled database of this size...
    #[arg(long, requires = "condition_kq")]
    condition_n: Option<usize>,
    /// ...holds exactly this many copies of Q's profile.
    #[arg(long, requires = "condition_n")]
    condition_kq: Option<u64>,
}

#[derive(Subcommand)]
enum DisclapCommand {
    /// Fit a model, choosing the number of clusters by BIC unless --clusters is given.
    Fit {
        #[arg(long)]
        database: PathBuf,
        #[command(flatten)]
        panel: PanelArg,
        #[arg(long, default_value_t = 5)]
        max_clusters: usize,
        #[arg(long, conflicts_with = "max_clusters")]
        clusters: Option<usize>,
        #[arg(long, default_value_t = disclap::DEFAULT_RESTARTS)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the model.
        #[arg(long)]
        out: PathBuf,
    },
    /// Probability of a query profile under a fitted model.
    Query {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[command(flatten)]
        panel: PanelArg,
        #[arg(long)]
        theta: Option<f64>,
    },
}

#[derive(Subcommand)]
enum MixtureCommand {
    /// Check that Q is contained in a mixture and enumerate possible second contributors.
    Check {
        /// Mixture file: database layout, alleles joined by "/".
        #[arg(long)]
        mixture: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[command(flatten)]
        panel: PanelArg,
        /// Count database profiles that could be the second contributor.
        #[arg(long)]
        database: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PanelsCommand {
    /// List preset keys.
    List,
    /// Print a panel as JSON, suitable as a starting point for a panel file.
    Show { name: String },
}

fn panel(arg: &PanelArg, dir: Option<&Path>) -> Result<Panel> {
    resolve_panel(&arg.panel, dir)
}

fn run_evaluate(args: EvaluateArgs, dir: Option<&Path>) -> Result<i32> {
    let panel = panel(&args.panel, dir)?;
    let database = io::read_database(&args.database, &panel)
        .with_context(|| format!("reading database {}", args.database.display()))?;
    let query =
        io::read_profile(&args.query, &panel).with_context(|| format!("reading query {}", args.query.display()))?;
    let gdist = args.gdist.as_ref().map(io::read_gdistribution).transpose()?;
    let model = args.model.as_ref().map(read_model).transpose()?;
    let estimators = if args.estimators.is_empty() {
        let mut all = Estimator::DATABASE.to_vec();
        if model.is_some() {
            all.push(Estimator::Disclap);
        }
        all
    } else {
        args.estimators
    };
    let report = evaluate(&EvaluateRequest {
        database: &database,
        query: &query,
        estimators,
        confidence: args.confidence,
        theta: args.theta,
        gdist: gdist.as_ref(),
        meioses: args.meioses,
        model: model.as_ref(),
        policy: policy(args.strict_duplicates),
    })?;
    print!("{}", report.render_text());
    if let Some(out) = args.out {
        std::fs::write(&out, report.to_json()? + "\n").with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(report.exit_code())
}

fn policy(strict: bool) -> MatchPolicy {
    if strict {
        MatchPolicy::IgnoreDuplicated
    } else {
        MatchPolicy::UnorderedMatch
    }
}

fn read_model(path: &PathBuf) -> Result<DiscLapModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    DiscLapModel::from_json(&text).with_context(|| format!("parsing model {}", path.display()))
}

fn run_simulate(args: SimulateArgs, dir: Option<&Path>) -> Result<i32> {
    let mut plan = SimulationPlan::load(&args.config, dir)?;
    if let Some(seed) = args.seed {
        plan.config.seed = seed;
    }
    if let (Some(n), Some(k)) = (args.condition_n, args.condition_kq) {
        plan.condition = Some(Conditioning::new(n, k));
    }
    let mixture = args
        .mixture
        .as_ref()
        .map(|p| io::read_mixture(p, &plan.config.panel))
        .transpose()?;
    let summary = simulate::run(&plan, mixture.as_ref(), &args.out)?;
    print!("{}", summary.render_text());
    println!("Wrote results to {}", args.out.display());
    Ok(exit::SUCCESS)
}

fn run_disclap(cmd: DisclapCommand, dir: Option<&Path>) -> Result<i32> {
    match cmd {
        DisclapCommand::Fit { database, panel: p, max_clusters, clusters, restarts, seed, out } => {
            let panel = panel(&p, dir)?;
            let db = io::read_database(&database, &panel)?;
            let model = match clusters {
                Some(c) => {
                    let fits: Vec<DiscLapModel> = (0..restarts.max(1))
                        .map(|r| disclap::fit_em(&db, c, seed.wrapping_add(r as u64), &EmOptions::default()))
                        .collect::<lineage_core::Result<_>>()?;
                    fits.into_iter()
                        .reduce(|a, b| if b.diagnostics.log_likelihood > a.diagnostics.log_likelihood { b } else { a })
                        .expect("at least one restart")
                }
                None => {
                    let sel = disclap::select_clusters(&db, max_clusters, seed, restarts, &EmOptions::default())?;
                    for m in &sel.fits {
                        println!(
                            "clusters {}: log-likelihood {:.4}, BIC {:.4}",
                            m.clusters.len(),
                            m.diagnostics.log_likelihood,
                            m.diagnostics.bic
                        );
                    }
                    sel.best
                }
            };
            let d = &model.diagnostics;
            println!(
                "Selected {} clusters: log-likelihood {:.4}, BIC {:.4}, {} iterations{}",
                model.clusters.len(),
                d.log_likelihood,
                d.bic,
                d.iterations,
                if d.converged { "" } else { " (iteration limit reached)" }
            );
            std::fs::write(&out, model.to_json()? + "\n").with_context(|| format!("writing {}", out.display()))?;
            println!("Wrote model to {}", out.display());
        }
        DisclapCommand::Query { model, query, panel: p, theta } => {
            let panel = panel(&p, dir)?;
            let model = read_model(&model)?;
            model.check_panel(&panel)?;
            let q = io::read_profile(&query, &panel)?;
            let est = disclap::haplotype_probability(&model, &q)?;
            println!("pi_q = {}", fmt_prob(est.value));
            if let Some(lr) = est.lr() {
                println!("LR = {}", fmt_lr(lr.lr));
            }
            if let Some(t) = theta {
                println!("LR (θ = {t}) = {}", fmt_lr(theta_adjust(est.value, t)?.lr));
            }
        }
    }
    Ok(exit::SUCCESS)
}

fn run_mixture(cmd: MixtureCommand, dir: Option<&Path>) -> Result<i32> {
    let MixtureCommand::Check { mixture, query, panel: p, database } = cmd;
    let panel = panel(&p, dir)?;
    let m = io::read_mixture(&mixture, &panel)?;
    let q = io::read_profile(&query, &panel)?;
    let contained = mixture_contains(&m, &q, &panel)?;
    println!(
        "Q {} contained in the mixture ({} loci checked)",
        if contained.contained { "is" } else { "is not" },
        contained.checked.len()
    );
    if !contained.contained {
        return Ok(exit::SUCCESS);
    }
    let companions = companion_count(&m, &q, &panel)?;
    for c in &companions.candidates {
        match c {
            Candidates::Single { locus, alleles } => {
                let list: Vec<String> = alleles.iter().map(i32::to_string).collect();
                println!("  {:<16} {}", panel.loci()[*locus].name, list.join(" | "));
            }
            Candidates::Pair { loci: (i, j), pairs } => {
                let list: Vec<String> = pairs.iter().map(|(a, b)| format!("{a},{b}")).collect();
                let name = format!("{}/{}", panel.loci()[*i].name, panel.loci()[*j].name);
                println!("  {name:<16} {}", list.join(" | "));
            }
        }
    }
    println!("Possible second-contributor profiles: {}", companions.count);
    if !companions.unconstrained.is_empty() {
        println!("Unconstrained markers: {}", companions.unconstrained.join(", "));
    }
    if let Some(path) = database {
        let db = io::read_database(&path, &panel)?;
        println!(
            "Database profiles that could be the second contributor: {} of {}",
            companions.in_database(&db),
            db.len()
        );
    }
    Ok(exit::SUCCESS)
}

fn run_panels(cmd: PanelsCommand, dir: Option<&Path>) -> Result<i32> {
    match cmd {
        PanelsCommand::List => {
            for p in PRESETS {
                println!("{:<14} {:>6.4}  {}", p.key, p.total_rate, p.description);
            }
        }
        PanelsCommand::Show { name } => println!("{}", resolve_panel(&name, dir)?.to_json()?),
    }
    Ok(exit::SUCCESS)
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    let not_applicable = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<lineage_core::Error>(),
            Some(lineage_core::Error::EstimatorNotApplicable { .. })
        )
    });
    if not_applicable {
        exit::NOT_APPLICABLE
    } else {
        exit::INPUT_ERROR
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let dir = cli.preset_dir.as_deref();
    let result = match cli.command {
        Command::Evaluate(a) => run_evaluate(a, dir),
        Command::Simulate(a) => run_simulate(a, dir),
        Command::Disclap(c) => run_disclap(c, dir),
        Command::Mixture(c) => run_mixture(c, dir),
        Command::Panels(c) => run_panels(c, dir),
    };
    let code = match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    };
    ExitCode::from(code as u8)
}
