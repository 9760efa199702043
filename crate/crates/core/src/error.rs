use thiserror::Error;

/// Stability estimate whose runtime monitor can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorItem {
    Positivity,
    L1Conservation,
    LinfBound,
    BvBound,
    EntropyInequality,
    ConvolutionFirstDifference,
    ConvolutionSecondDifference,
    ConvergenceFloor,
}

impl std::fmt::Display for MonitorItem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            MonitorItem::Positivity => "positivity",
            MonitorItem::L1Conservation => "L1 conservation",
            MonitorItem::LinfBound => "L-infinity bound",
            MonitorItem::BvBound => "BV bound",
            MonitorItem::EntropyInequality => "discrete entropy inequality",
            MonitorItem::ConvolutionFirstDifference => "convolution first-difference bound",
            MonitorItem::ConvolutionSecondDifference => "convolution second-difference bound",
            MonitorItem::ConvergenceFloor => "convergence-rate floor",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel support [{lo}, {hi}] contains no sample point at dx = {dx}")]
    InsufficientResolution { lo: f64, hi: f64, dx: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Godunov flux requires a nondecreasing local flux, component {component} is `{flux}`")]
    UnsupportedFlux { component: usize, flux: String },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("non-finite value in component {component}, cell {cell} at step {step}")]
    NonFiniteState { step: usize, component: usize, cell: usize },

    /// `step` is the table row for [`MonitorItem::ConvergenceFloor`].
    #[error("{item} violated at {} {step} (margin {margin:e})", if *item == MonitorItem::ConvergenceFloor { "table row" } else { "step" })]
    MonitorViolation {
        item: MonitorItem,
        step: usize,
        margin: f64,
    },

    #[error("solution reaches the boundary band: fraction {fraction:e} of the mass lies within one kernel width of the boundary")]
    SupportClipped { fraction: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("model `{0}` has no exact solution")]
    NoExactSolution(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for the command-line front end: 2 for a failed
    /// stability or rate check, 3 for bad input, 4 for a numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MonitorViolation { .. } => 2,
            Error::NonFiniteState { .. } | Error::SupportClipped { .. } => 4,
            _ => 3,
        }
    }
}
