use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("locus subset is empty")]
    EmptySubset,

    #[error("unknown locus `{0}`")]
    UnknownLocus(String),

    #[error("haplotype has {got} alleles but the panel has {expected} loci")]
    PanelMismatch { expected: usize, got: usize },

    #[error("haplotype has no observed loci")]
    EmptyHaplotype,

    #[error("no locus is observed in both profiles")]
    NoComparableLoci,

    #[error("database is empty")]
    EmptyDatabase,

    #[error("{estimator} estimator is not applicable: {reason}")]
    EstimatorNotApplicable {
        estimator: &'static str,
        reason: String,
    },

    #[error("meiosis-distance distribution has no probability mass left")]
    EmptyDistribution,

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: String,
        message: String,
    },

    #[error("line {line}, column {column}: intermediate allele `{value}` is not supported")]
    IntermediateAllele {
        line: usize,
        column: String,
        value: String,
    },

    #[error("header is missing panel loci: {}", .0.join(", "))]
    MissingLoci(Vec<String>),

    #[error("file contains no data rows")]
    EmptyFile,

    #[error("the Discrete Laplace model needs fully observed profiles ({0})")]
    PartialProfile(String),

    #[error("requested {requested} clusters but only {distinct} distinct profiles exist")]
    TooManyClusters { requested: usize, distinct: usize },

    #[error("model was fitted on panel `{model}` but panel `{panel}` was supplied")]
    ModelPanelMismatch { model: String, panel: String },

    #[error("simulation needs {requested} individuals, above the cap of {cap}")]
    ResourceLimit { requested: u64, cap: u64 },

    #[error(
        "conditioning accepted {accepted} of {replicates} replicates (rate {rate:.4}), \
         below the minimum of {minimum}"
    )]
    ConditioningRejected {
        accepted: usize,
        replicates: usize,
        rate: f64,
        minimum: usize,
    },

    #[error("sample of {requested} exceeds the {available} available individuals")]
    SampleTooLarge { requested: usize, available: usize },

    #[error(
        "mixture is inconsistent with two contributors at locus {locus}: \
         companion would need {needed} alleles but carries {capacity}"
    )]
    InconsistentMixture {
        locus: String,
        needed: usize,
        capacity: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
