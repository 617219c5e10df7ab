use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("invalid B-spline spec: {0}")]
    InvalidSpec(String),
    #[error("input {x} outside domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("dataset: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error("no positive multiplier satisfies G * L <= 2^n for G = {grid}, n = {bits}")]
    Infeasible { grid: usize, bits: u32 },
    #[error("code {code} outside [0, {hi}]")]
    CodeOutOfRange { code: u32, hi: u32 },
    #[error("invalid quantization setting: {0}")]
    Invalid(String),
    #[error("sh-lut dump: {0}")]
    Dump(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CimError {
    #[error("DAC calibration failed at level {level}: {reason}")]
    Calibration { level: usize, reason: String },
    #[error("input code {x} outside [0, {max}]")]
    InputOutOfRange { x: u64, max: u64 },
    #[error("degenerate bit line: {0}")]
    Degenerate(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("{coeffs} coefficients do not fit in {rows} rows")]
    TooManyCoefficients { coeffs: usize, rows: usize },
    #[error("invalid mapping parameters: {0}")]
    Invalid(String),
    #[error("mapping plan format: {0}")]
    Format(String),
    #[error(transparent)]
    Cim(#[from] CimError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("missing or invalid technology parameter `{0}`")]
    MissingParam(String),
    #[error("inconsistent configuration: {0}")]
    Inconsistent(String),
}
