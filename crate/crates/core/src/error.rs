use crate::search::{Clique, SweepStep};

/// Renders up to eight offsets, then an ellipsis with the remainder count.
fn fmt_offsets(offsets: &[(i32, i32)]) -> String {
    if offsets.is_empty() {
        return "none".into();
    }
    let shown: Vec<String> =
        offsets.iter().take(8).map(|(dx, dy)| format!("({dx},{dy})")).collect();
    let mut s = shown.join(", ");
    if offsets.len() > 8 {
        s.push_str(&format!(", … {} more", offsets.len() - 8));
    }
    s
}

/// Unified error type for the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),

    #[error("order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("size limit: {0}")]
    SizeLimit(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("cache: {0}")]
    Cache(String),

    #[error("g-code geometry: {0}")]
    Geometry(String),

    #[error("duplicate stamp for pixel (row {row}, col {col})")]
    DuplicateStamp { row: usize, col: usize },

    #[error("machine envelope exceeded: {0}")]
    Envelope(String),

    #[error(
        "profile axes differ: absent from left {}; absent from right {}",
        fmt_offsets(missing_left),
        fmt_offsets(missing_right)
    )]
    AxisMismatch {
        /// Offsets present only in the right profile.
        missing_left: Vec<(i32, i32)>,
        /// Offsets present only in the left profile.
        missing_right: Vec<(i32, i32)>,
    },

    #[error("clique index {index} out of range: {available} cliques available")]
    CliqueIndex { index: usize, available: usize },

    /// Clique expansion budget ran out; `partial` holds every maximal clique
    /// reported before the cutoff.
    #[error("clique expansion budget exhausted after {calls} calls ({} cliques found)", partial.len())]
    BudgetExhausted { calls: u64, partial: Vec<Clique> },

    /// The threshold walked past -1 without reaching the target clique size.
    #[error("sweep exhausted at threshold -1 without a size-{target} clique")]
    SweepExhausted {
        target: usize,
        schedule: Vec<SweepStep>,
    },
}

/// Coarse classification used by callers that map errors to process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad inputs or contract violations.
    Validation,
    /// Filesystem, serialization, or cache failures.
    Io,
    /// A configured compute budget ran out.
    Budget,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Validation(_)
            | Error::OrderMismatch { .. }
            | Error::SizeLimit(_)
            | Error::Geometry(_)
            | Error::DuplicateStamp { .. }
            | Error::Envelope(_)
            | Error::AxisMismatch { .. }
            | Error::CliqueIndex { .. } => ErrorKind::Validation,
            Error::Io(_) | Error::Json(_) | Error::Cache(_) => ErrorKind::Io,
            Error::BudgetExhausted { .. } | Error::SweepExhausted { .. } => ErrorKind::Budget,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
