use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("self-link undefined for node {0}")]
    SelfLink(usize),

    #[error("channel gain undefined at zero distance")]
    ZeroDistance,

    #[error("nodes {0} and {1} coincide (zero link distance)")]
    CoincidentNodes(usize, usize),

    #[error("invalid channel parameters: {0}")]
    InvalidChannel(String),

    #[error("invalid node set: {0}")]
    InvalidNodes(String),

    #[error("UAVs unreachable from the ground station: {stranded:?}")]
    Disconnected { stranded: Vec<usize> },

    #[error("power budget must be positive, got {0} W")]
    InvalidBudget(f64),

    #[error("relaxed link value {0} lies outside the open unit interval")]
    OutsideBarrierDomain(f64),

    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),

    #[error(
        "Newton iteration for UAV {uav} did not converge within {iterations} iterations \
         (last decrement {decrement:e})"
    )]
    NoConvergence {
        uav: usize,
        iterations: usize,
        decrement: f64,
    },

    #[error("oracle budget exceeded: {0}")]
    OracleBudget(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("UAV placement failed after {rounds} rounds: {reason}")]
    PlacementFailed { rounds: usize, reason: String },

    #[error("scenario seed {seed}, n = {n_uavs}: {source}")]
    Scenario {
        seed: u64,
        n_uavs: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Strips scenario context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Scenario { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn in_scenario(self, seed: u64, n_uavs: usize) -> Error {
        Error::Scenario {
            seed,
            n_uavs,
            source: Box::new(self),
        }
    }
}
