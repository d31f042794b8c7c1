use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("empty data set")]
    EmptyData,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("empty slab: lo {lo} > hi {hi}")]
    EmptySlab { lo: f64, hi: f64 },

    #[error("infeasible projection: zero constraint direction with point outside the slab")]
    InfeasibleProjection,

    #[error("weight vector cannot shrink: have {have}, requested {requested}")]
    WeightShrink { have: usize, requested: usize },

    #[error("out-of-order sample: got t={got}, expected t={expected}")]
    OutOfOrder { got: i64, expected: i64 },

    #[error(
        "sigma/x_bar fixed point diverged after {iterations} iterations \
         (training data too sparse or gamma_star too large)"
    )]
    SigmaFixedPoint { iterations: usize },

    #[error(
        "x_bar denominator not positive: gamma_delta_bar too large for lambda2_star and gamma_g"
    )]
    XBarDenominator,

    #[error("stability slab empty at t={t}: lo {lo} > hi {hi}")]
    StabilitySlabEmpty { t: i64, lo: f64, hi: f64 },

    #[error("csv error at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
