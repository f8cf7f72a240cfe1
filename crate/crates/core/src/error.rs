use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inverted bounds: x_min = {x_min} must be < x_max = {x_max}")]
    InvertedBounds { x_min: f64, x_max: f64 },

    #[error("grid truncation: boundary amplitude {amplitude:e} exceeds {threshold:e}")]
    GridTruncation { amplitude: f64, threshold: f64 },

    #[error("stability guard: dt_pde = {dt} exceeds dx^2 m / hbar = {limit}")]
    StabilityGuard { dt: f64, limit: f64 },

    #[error("boundary leakage at t = {time}: boundary density {density:e} exceeds 1e-6")]
    BoundaryLeakage { time: f64, density: f64 },

    #[error("insufficient time slices: need at least {needed}, got {got}")]
    InsufficientTimeSlices { needed: usize, got: usize },

    #[error("density not normalized: integral = {0}")]
    NotNormalized(f64),

    #[error("field coverage: requested [{t_start}, {t_end}] outside stored [{t_min}, {t_max}]")]
    FieldCoverage {
        t_start: f64,
        t_end: f64,
        t_min: f64,
        t_max: f64,
    },

    #[error("time {t} outside range [{t_min}, {t_max}]")]
    TimeOutOfRange { t: f64, t_min: f64, t_max: f64 },

    #[error("no bracket: matching defect has equal signs at E_lo = {e_lo} ({d_lo:e}) and E_hi = {e_hi} ({d_hi:e})")]
    NoBracket {
        e_lo: f64,
        e_hi: f64,
        d_lo: f64,
        d_hi: f64,
    },

    #[error("node encountered: osmotic velocity develops a pole near x = {x} at E = {energy}")]
    NodeEncountered { x: f64, energy: f64 },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("horizon mismatch: {0}")]
    HorizonMismatch(String),

    #[error("degenerate segmentation: {0}")]
    DegenerateSegmentation(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
