use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration field is outside its admissible range.
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("distance {distance} m is below the reference distance {reference} m")]
    BelowReferenceDistance { distance: f64, reference: f64 },

    #[error("undefined SOP for zero signal")]
    ZeroSignalSop,

    #[error("beamformer infeasible: squared norm {norm_sq} exceeds p_max {p_max}")]
    InfeasibleBeamformer { norm_sq: f64, p_max: f64 },

    #[error("surrogate nonpositive; shrink step (value {0})")]
    SurrogateNonpositive(f64),

    #[error("non-finite value in {stage} at iteration {iteration}: {dump}")]
    NonFinite {
        stage: &'static str,
        iteration: usize,
        dump: String,
    },

    #[error("subproblem (k={k}, j={j}): {source}")]
    Subproblem {
        k: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("channel dump: {0}")]
    ChannelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
