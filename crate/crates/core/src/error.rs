use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown {what}: {key}")]
    Lookup { what: &'static str, key: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{index} undefined for {country} {year} age {age}: value {value}")]
    TransformDomain {
        index: &'static str,
        country: String,
        year: i32,
        age: String,
        value: f64,
    },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("missing value ('.') at line {line}, column {column}")]
    MissingData { line: usize, column: String },

    #[error("panel assembly failed: {}", .gaps.join("; "))]
    Assembly { gaps: Vec<String> },

    #[error("degenerate Lee-Carter fit: {0}")]
    DegenerateFit(String),

    #[error("kappa drift is zero; cannot rescale to unit drift")]
    DegenerateDrift,

    #[error("column {column} has zero variance")]
    ZeroVariance { column: usize },

    #[error("underdetermined fit: {points} points for {basis} basis functions")]
    Underdetermined { points: usize, basis: usize },

    #[error("only {distinct} distinct points for k = {k}")]
    ReducedK { distinct: usize, k: usize },

    #[error("score undefined: {0}")]
    UndefinedScore(String),

    #[error("pipeline failed for {country}: {source}")]
    Country {
        country: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by malformed or incomplete input data.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Format { .. }
            | Error::MissingData { .. }
            | Error::Assembly { .. }
            | Error::TransformDomain { .. }
            | Error::Csv(_) => true,
            Error::Country { source, .. } => source.is_data_error(),
            _ => false,
        }
    }

    /// True for failures of a numerical routine on otherwise valid input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::DegenerateFit(_)
            | Error::DegenerateDrift
            | Error::ZeroVariance { .. }
            | Error::Underdetermined { .. }
            | Error::ReducedK { .. }
            | Error::UndefinedScore(_) => true,
            Error::Country { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
