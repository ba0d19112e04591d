use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("offset estimation failed: {0}")]
    EstimationFailed(String),

    /// The equalizer normal equations could not be solved reliably.
    #[error("ill-conditioned system (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("gain estimate {magnitude:.3e} at bin {bin} is below the division guard")]
    DivisionGuard { bin: usize, magnitude: f64 },

    #[error("degenerate null-forming projection: the desired direction lies in the null space")]
    DegenerateProjection,

    #[error("desired-direction response is zero at bin {bin}")]
    ZeroDenominator { bin: usize },

    #[error("channel {channel}: {source}")]
    Channel { channel: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn in_channel(self, channel: usize) -> Self {
        Error::Channel {
            channel,
            source: Box::new(self),
        }
    }

    /// Strips channel context and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Channel { source, .. } => source.root(),
            other => other,
        }
    }
}
