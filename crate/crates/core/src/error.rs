use thiserror::Error;

/// Errors raised by the selection engine.
///
/// Every variant maps to a stable, upper-case code (see [`Error::code`]) that the
/// command-line front end prints on stderr.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate agent id `{0}`")]
    DuplicateId(String),
    #[error("agent `{agent}` has value `{value}` which is not admissible for feature `{feature}`")]
    InadmissibleValue {
        agent: String,
        feature: String,
        value: String,
    },
    #[error("blank cell for agent `{agent}`, feature `{feature}`")]
    BlankCell { agent: String, feature: String },
    #[error("quota row references unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("invalid quota for {feature}={value}: {reason}")]
    InvalidQuota {
        feature: String,
        value: String,
        reason: String,
    },
    #[error("infeasible quotas for feature `{feature}`: {reason}")]
    InfeasibleQuotas { feature: String, reason: String },
    #[error("invalid feature scheme: {0}")]
    InvalidScheme(String),
    #[error("invalid panel size k={k} for pool of {n}")]
    InvalidPanelSize { k: u32, n: usize },
    #[error("more than {0} valid panels; enumeration aborted")]
    CapExceeded(usize),
    #[error("invalid panel in distribution: {0}")]
    InvalidPanel(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("structurally excluded agents present: {0:?}")]
    StructuralExclusion(Vec<String>),
    #[error("truthful agents excluded by the misreport: {0:?}")]
    NoncoalitionExclusion(Vec<String>),
    #[error("coalition of size {size} exceeds max(0, n_min - k) = {limit}")]
    RestrictionViolated { size: usize, limit: usize },
    #[error("no valid panel exists")]
    NoValidPanel,
    #[error("no valid panel found after {0} restarts")]
    RestartLimit(usize),
    #[error("search space of {needed} evaluations exceeds budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("zero pool share for constrained pair {feature}={value}")]
    ZeroShare { feature: String, value: String },
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error("objective spec `{0}` not recognised")]
    ObjectiveSpec(String),
    #[error("linear program failed: {0}")]
    Numerical(String),
    #[error("column generation stopped at the column budget with pricing gap {0}")]
    NonConverged(f64),
    #[error("composition expansion needs {0} panels, above the cap")]
    ExpansionTooLarge(u128),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed input: {0}")]
    Malformed(String),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DuplicateId(_) => "DUPLICATE_ID",
            Error::InadmissibleValue { .. } => "INADMISSIBLE_VALUE",
            Error::BlankCell { .. } => "BLANK_CELL",
            Error::UnknownFeature(_) => "UNKNOWN_FEATURE",
            Error::InvalidQuota { .. } => "INVALID_QUOTA",
            Error::InfeasibleQuotas { .. } => "INFEASIBLE_QUOTAS",
            Error::InvalidScheme(_) => "INVALID_SCHEME",
            Error::InvalidPanelSize { .. } => "INVALID_K",
            Error::CapExceeded(_) => "CAP_EXCEEDED",
            Error::InvalidPanel(_) => "INVALID_PANEL",
            Error::InvalidDistribution(_) => "INVALID_DISTRIBUTION",
            Error::StructuralExclusion(_) => "STRUCTURAL_EXCLUSION",
            Error::NoncoalitionExclusion(_) => "NONCOALITION_EXCLUSION",
            Error::RestrictionViolated { .. } => "RESTRICTION_VIOLATED",
            Error::NoValidPanel => "NO_VALID_PANEL",
            Error::RestartLimit(_) => "RESTART_LIMIT",
            Error::BudgetExceeded { .. } => "BUDGET_EXCEEDED",
            Error::ZeroShare { .. } => "ZERO_SHARE",
            Error::Domain(_) => "DOMAIN",
            Error::ObjectiveSpec(_) => "OBJECTIVE_SPEC",
            Error::Numerical(_) => "NUMERICAL",
            Error::NonConverged(_) => "NONCONVERGED",
            Error::ExpansionTooLarge(_) => "EXPANSION_TOO_LARGE",
            Error::Io(_) => "IO",
            Error::Csv(_) => "CSV",
            Error::Json(_) => "JSON",
            Error::Malformed(_) => "MALFORMED",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
