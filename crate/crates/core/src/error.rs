use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("voxel index ({i}, {j}, {k}) is outside a {n_cols}x{n_rows}x{n_bins} grid")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        k: usize,
        n_cols: usize,
        n_rows: usize,
        n_bins: usize,
    },

    #[error("invalid bandwidths ({h_x}, {h_y}, {h_t}): all must be positive and finite")]
    InvalidBandwidths { h_x: f64, h_y: f64, h_t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("incident {id} has non-finite coordinates")]
    NonFiniteIncident { id: String },

    #[error("density estimate over an empty incident list")]
    EmptyIncidents,

    #[error("leave-one-out needs at least 2 incidents, got {0}")]
    TooFewIncidents(usize),

    #[error("incident {id} at t = {t} lies after the reference time {t_ref}")]
    FutureIncident { id: String, t: f64, t_ref: f64 },

    #[error("land-use grid has no eligible cells")]
    NoEligibleCells,

    #[error("rasters are not aligned: {0}")]
    Misaligned(String),

    #[error("every lattice point has zero leave-one-out likelihood; widen the search bounds")]
    AllLatticeInfeasible,

    #[error("cluster {cluster}: rejection sampling gave up after {retries} draws")]
    RejectionLimit { cluster: usize, retries: usize },

    #[error("no test incidents fall inside the grid")]
    NoTestIncidents,

    #[error("prediction groups exceed the data window: {0}")]
    GroupsExceedWindow(String),

    #[error("curves do not share a scale lattice: {0}")]
    LatticeMismatch(String),

    #[error("{path}: missing or malformed header, expected `{expected}`")]
    MissingHeader { path: String, expected: String },

    #[error("{path}: duplicate incident id `{id}` on line {line}")]
    DuplicateId { path: String, id: String, line: usize },

    #[error("{path}: no valid rows")]
    NoValidRows { path: String },

    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
