use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// n·r exceeds the enumeration limit. Raise the limit explicitly to proceed.
    #[error("partition grid {n}x{r} has {cells} cells, above the limit of {limit}")]
    PartitionLimit {
        n: usize,
        r: usize,
        cells: usize,
        limit: usize,
    },

    #[error("grid index ({row}, {col}) out of range for a {n}x{r} grid")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n: usize,
        r: usize,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid hop graph: {0}")]
    InvalidGraph(String),

    /// Some free node is not connected to either terminal; the integral diverges.
    #[error("divergent integral: free node {node} is not connected to a terminal")]
    DivergentIntegral { node: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("path counting supports k <= {max}, got k = {k}")]
    PathLengthGuard { k: usize, max: usize },

    #[error("oracle supports at most {max} free nodes, graph has {p}")]
    OracleLimit { p: usize, max: usize },

    #[error("malformed closed form: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
