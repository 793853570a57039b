use thiserror::Error;

/// Errors raised by the library. `exit_code` maps them onto the CLI contract.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("infeasible point: {0}")]
    Infeasible(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("newton did not converge: {0}")]
    NonConvergence(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag used in error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidKernel(_) => "invalid_kernel",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Data(_) => "data",
            Error::Index(_) => "index",
            Error::Infeasible(_) => "infeasible",
            Error::Singular(_) => "singular",
            Error::NonConvergence(_) => "non_convergence",
            Error::Numeric(_) => "numeric",
            Error::Resource(_) => "resource",
            Error::Io { .. } => "io",
        }
    }

    /// Prefixes the message with `ctx`, keeping the kind.
    pub fn context(self, ctx: &str) -> Error {
        let f = |m: String| format!("{ctx}: {m}");
        match self {
            Error::Domain(m) => Error::Domain(f(m)),
            Error::InvalidKernel(m) => Error::InvalidKernel(f(m)),
            Error::Config(m) => Error::Config(f(m)),
            Error::Parse { row, msg } => Error::Parse { row, msg: f(msg) },
            Error::Data(m) => Error::Data(f(m)),
            Error::Index(m) => Error::Index(f(m)),
            Error::Infeasible(m) => Error::Infeasible(f(m)),
            Error::Singular(m) => Error::Singular(f(m)),
            Error::NonConvergence(m) => Error::NonConvergence(f(m)),
            Error::Numeric(m) => Error::Numeric(f(m)),
            Error::Resource(m) => Error::Resource(f(m)),
            e @ Error::Io { .. } => e,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::InvalidKernel(_) | Error::Config(_) => 2,
            Error::Parse { .. } | Error::Data(_) | Error::Index(_) | Error::Io { .. } => 3,
            Error::Infeasible(_)
            | Error::Singular(_)
            | Error::NonConvergence(_)
            | Error::Numeric(_)
            | Error::Resource(_) => 4,
        }
    }
}
