use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by mesh ingestion, space construction and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("degenerate element {element}: measure {measure:e}")]
    DegenerateElement { element: usize, measure: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported order m = {0} (patch size table covers 1..=3)")]
    UnsupportedOrder(usize),

    #[error("unsupported quadrature degree {degree} (max {max})")]
    UnsupportedDegree { degree: usize, max: usize },

    #[error("patch growth stalled for element {element}: {found} reachable elements, {requested} requested")]
    GrowthStall {
        element: usize,
        found: usize,
        requested: usize,
    },

    #[error("local least-squares problem on element {element} is rank deficient ({kind} space, rank {rank} < {expected})")]
    Unisolvence {
        element: usize,
        kind: &'static str,
        rank: usize,
        expected: usize,
    },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("solver setup failed: {0}")]
    Setup(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        source: Box<Error>,
    },
}

impl Error {
    /// Short category name, used by the CLI for diagnostics and exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } | Error::Topology(_) | Error::DegenerateElement { .. } => "mesh",
            Error::Contract(_) => "contract",
            Error::Config(_) | Error::UnsupportedOrder(_) | Error::UnsupportedDegree { .. } => {
                "config"
            }
            Error::GrowthStall { .. } | Error::Unisolvence { .. } => "space",
            Error::Internal(_) => "internal",
            Error::NonConvergence { .. } | Error::Setup(_) => "solver",
            Error::Input(_) => "input",
            Error::Write { .. } | Error::Io(_) => "io",
            Error::Context { source, .. } => source.category(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "mesh" => 2,
            "config" | "contract" | "input" => 3,
            "space" => 4,
            "solver" => 5,
            "io" => 6,
            _ => 70,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| Error::Context {
            context: what(),
            source: Box::new(e),
        })
    }
}
