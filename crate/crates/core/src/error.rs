use thiserror::Error;

/// Errors raised by the wayfinding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("link `{link}` references missing node `{node}`")]
    DanglingEndpoint { link: String, node: String },

    #[error("invalid link `{link}`: {reason}")]
    InvalidLink { link: String, reason: String },

    #[error("node `{node}` on floor {floor} outside declared range {lo}..={hi}")]
    FloorOutOfRange {
        node: String,
        floor: i32,
        lo: i32,
        hi: i32,
    },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("unknown link `{0}`")]
    UnknownLink(String),

    #[error("destination `{destination}` unreachable from `{origin}`")]
    Unreachable { origin: String, destination: String },

    #[error("invalid route: {0}")]
    InvalidRoute(String),

    #[error("origin-destination mismatch: expected {expected:?}, got {got:?}")]
    OdMismatch {
        expected: (String, String),
        got: (String, String),
    },

    #[error("route not in route set")]
    RouteNotInSet,

    #[error("trajectory: {0}")]
    Trajectory(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("non-positive path size {0} in a path-size model")]
    NonPositivePathSize(f64),

    #[error("non-finite utility in observation {0}")]
    NonFiniteUtility(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular information matrix: terms `{0}` and `{1}` are collinear")]
    SingularHessian(String, String),

    #[error("models are not nested: {0}")]
    NotNested(String),

    #[error("rank-deficient design: column `{column}` is a linear combination of {dependents:?}")]
    RankDeficient {
        column: String,
        dependents: Vec<String>,
    },

    #[error("not estimable: {rows} rows for {params} parameters")]
    NotEstimable { rows: usize, params: usize },

    #[error("invalid degrees of freedom: {0}")]
    InvalidDf(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("zero rank variance")]
    ZeroVariance,

    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
