use thiserror::Error;

use crate::power::Level;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("negative level {0}")]
    NegativeLevel(Level),
    #[error("power must be at least 1, got {0}")]
    PowerBelowOne(f64),
    #[error("signal values are non-negative, got {0}")]
    NegativeSignal(i64),
    #[error("window lower level {low} exceeds upper level {high}")]
    InvertedWindow { low: Level, high: Level },
    #[error("value {value} does not fit the band layout of capacity {capacity}")]
    OutOfRange { value: u64, capacity: u64 },
    #[error("index {index} out of bounds for length {len}")]
    IndexOutOfBounds { index: usize, len: usize },
    #[error("{what}: expected {expected}, got {actual}")]
    CountMismatch { what: &'static str, expected: usize, actual: usize },
    #[error("invalid level literal {0:?}")]
    LevelParse(String),
    #[error("arithmetic overflow while computing {0}")]
    Overflow(&'static str),
    #[error("invalid sampler: {0}")]
    Sampler(String),
    #[error("coefficient {value} exceeds magnitude bound {bound}")]
    CoefficientBound { value: f64, bound: f64 },
    #[error("no non-degenerate channel found after {attempts} attempts")]
    Degenerate { attempts: usize },
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error("monotone index condition violated for k={k}: m(k,{a}) < m(k,{b})")]
    MonotoneIndex { k: usize, a: usize, b: usize },
    #[error("joint support needs {required} states, cap is {cap}")]
    SupportCap { required: u128, cap: u64 },
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("invalid joint table: {0}")]
    Table(String),
    #[error("unbounded region")]
    Unbounded,
    #[error("empty region")]
    EmptyRegion,
    #[error("degenerate half-plane with zero normal")]
    ZeroNormal,
    #[error("ledgers belong to different term dictionaries")]
    DictionaryMismatch,
    #[error("negative certificate weight {0}")]
    NegativeWeight(String),
    #[error("unknown built-in {0:?}")]
    UnknownBuiltin(String),
    #[error("{0}")]
    Invalid(String),
}
