use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the simulation and genealogy routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    /// Every potential in a generation evaluated to zero.
    #[error("degenerate weights: all potentials are zero at generation {generation}")]
    DegenerateWeights { generation: usize },

    #[error("non-finite potential at generation {generation}, particle {particle}")]
    NonFinitePotential { generation: usize, particle: usize },

    /// The cumulative coalescence sum never reached the requested time.
    #[error("horizon exhausted: cumulative c_N reached {achieved} < {target}")]
    HorizonExhausted { target: f64, achieved: f64 },

    #[error("size guard: {what} = {value} exceeds the supported maximum {max}")]
    SizeGuard {
        what: &'static str,
        value: usize,
        max: usize,
    },

    #[error("integer overflow in {0}")]
    Overflow(&'static str),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Input(_) => "input",
            Error::DegenerateWeights { .. } => "degenerate_weights",
            Error::NonFinitePotential { .. } => "numeric",
            Error::HorizonExhausted { .. } => "horizon_exhausted",
            Error::SizeGuard { .. } => "size_guard",
            Error::Overflow(_) => "overflow",
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
