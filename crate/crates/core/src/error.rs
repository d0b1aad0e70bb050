use thiserror::Error;

/// Errors surfaced by the estimation and control pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite integrand at ({u}, {v})")]
    NonFiniteIntegrand { u: f64, v: f64 },

    #[error("maximum iterations exceeded ({0})")]
    MaxIterationsExceeded(usize),

    #[error("singular Hessian (infeasible or degenerate constraint set)")]
    SingularHessian,

    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("degenerate sample: all {axis} values equal")]
    DegenerateSample { axis: &'static str },

    #[error("mean {mean} outside open support ({lo}, {hi})")]
    InfeasibleMean { mean: f64, lo: f64, hi: f64 },

    #[error("no copula-form density matches the requested dependence combination ({0})")]
    Infeasible(String),

    #[error("singular covariance matrix")]
    SingularCovariance,

    #[error("coverage never reaches target within the support (ucl searched up to {0})")]
    BracketFailure(f64),

    #[error("proposal envelope exceeded after {doublings} doublings")]
    EnvelopeExceeded { doublings: u32 },

    #[error("too few samples: {n} retained, floor is {floor}")]
    TooFewSamples { n: usize, floor: usize },

    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_stage(self, stage: usize) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
