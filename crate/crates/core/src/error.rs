use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial order {0} is out of range (supported: 1..=9)")]
    InvalidOrder(usize),
    #[error("Vandermonde matrix for order {order} is numerically singular (condition number {condition:e})")]
    SingularVandermonde { order: usize, condition: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mesh parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("element {element} references vertex {vertex}, but only {count} vertices exist")]
    VertexOutOfRange { element: usize, vertex: usize, count: usize },
    #[error("element {0} is degenerate (zero volume)")]
    DegenerateElement(usize),
    #[error("non-conforming mesh: face {face:?} is shared by {count} elements")]
    NonConforming { face: [usize; 3], count: usize },
    #[error("gather block {block} needs {needed} descriptors, budget is {budget}")]
    DescriptorBudget { block: usize, needed: usize, budget: usize },
    #[error("shared memory overflow: {requested} bytes requested, {capacity} available")]
    SharedOverflow { requested: usize, capacity: usize },
    #[error("block of {threads} threads exceeds the limit of {limit}")]
    TooManyThreads { threads: usize, limit: usize },
    #[error("barrier divergence in block {block}: {arrived} of {threads} threads reached barrier {barrier}")]
    BarrierDivergence { block: usize, barrier: usize, arrived: usize, threads: usize },
    #[error("strategy unavailable: {0}")]
    StrategyUnavailable(String),
    #[error("invalid kernel configuration: {0}")]
    InvalidConfig(String),
    #[error("no feasible configuration in tuning space")]
    EmptyTuneSpace,
    #[error("unstable run: energy grew by a factor of {growth:e} at step {step}")]
    Unstable { step: usize, growth: f64 },
    #[error("internal error: {0}")]
    Internal(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("TOML error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable kind, used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidOrder(_) => "invalid_order",
            Error::SingularVandermonde { .. } => "singular_vandermonde",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Parse { .. } => "parse",
            Error::VertexOutOfRange { .. } => "vertex_out_of_range",
            Error::DegenerateElement(_) => "degenerate_element",
            Error::NonConforming { .. } => "non_conforming",
            Error::DescriptorBudget { .. } => "descriptor_budget",
            Error::SharedOverflow { .. } => "shared_overflow",
            Error::TooManyThreads { .. } => "too_many_threads",
            Error::BarrierDivergence { .. } => "barrier_divergence",
            Error::StrategyUnavailable(_) => "strategy_unavailable",
            Error::InvalidConfig(_) => "invalid_config",
            Error::EmptyTuneSpace => "empty_tune_space",
            Error::Unstable { .. } => "unstable",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
            Error::Toml(_) => "toml",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
