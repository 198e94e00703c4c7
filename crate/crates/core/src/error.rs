use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("evaluation point outside convergence region: y = {0} must be > 0")]
    NonPositiveY(f64),

    #[error("time argument must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("weight is not dominant: {0}")]
    NotDominant(String),

    #[error("character formula requires level >= 1, got level {0}")]
    UnsupportedLevel(i64),

    #[error("partition table: p({0}) exceeds the exact 64-bit range (max index {1})")]
    PartitionOverflow(usize, usize),

    #[error("partition argument {0} exceeds the supported cap {1}")]
    PartitionCap(usize, usize),

    #[error("ill-conditioned evaluation: |denominator| = {0:e} below safety floor {1:e}")]
    IllConditioned(f64, f64),

    #[error("level mismatch: expected level {expected}, got {got}")]
    LevelMismatch { expected: i64, got: i64 },

    #[error("tilt must satisfy h2 > 0, got {0}")]
    BadTilt(f64),

    #[error("truncated row mass {defect:e} exceeds {limit:e}; depth_cut {depth_cut} too small")]
    DepthCutTooSmall {
        defect: f64,
        limit: f64,
        depth_cut: i64,
    },

    #[error("sinh overflow: |a|*pi = {0} beyond double range; use the factorized evaluation for a = n*pi/t")]
    SinhOverflow(f64),

    #[error("finite-difference step {step} too large for interior margin {margin}")]
    StepTooLarge { step: f64, margin: f64 },

    #[error("argument outside domain: {0}")]
    OutsideDomain(String),

    #[error("multiplicity arithmetic overflowed 64 bits at {0}")]
    MultiplicityOverflow(String),

    #[error("oracle truncation too small: {0}")]
    OracleTruncation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
