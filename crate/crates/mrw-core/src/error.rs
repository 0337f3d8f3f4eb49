use thiserror::Error;

/// Errors produced by validation, regime dispatch and resource caps.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter {name} = {value} is outside [0, 1]")]
    ParamRange { name: &'static str, value: f64 },

    /// p = 1 together with q = 0 freezes the walk (every step repeats the
    /// first one), so the triple is rejected at construction.
    #[error("p = 1 and q = 0 give the frozen walk (X_n = X_1 for all n); rejected")]
    FrozenWalk,

    #[error("memory parameter a = {a} is outside {range}")]
    MemoryRange { a: f64, range: &'static str },

    #[error("state s_n = {s_n} is outside the support 0..={n}")]
    StateOutOfSupport { s_n: i64, n: u64 },

    #[error("{op}: n = {n} is below the minimum {min}")]
    NTooSmall { op: &'static str, n: u64, min: u64 },

    #[error("{op} requires the {expected} regime but a = {a} is {actual}")]
    RegimeMismatch {
        op: &'static str,
        expected: &'static str,
        actual: &'static str,
        a: f64,
    },

    #[error("{op}: degenerate parameters ({reason})")]
    Degenerate { op: &'static str, reason: &'static str },

    /// Closed forms with a (2a - 1) denominator cancel catastrophically near
    /// a = 1/2; callers fall back to the recursion route there.
    #[error("{op}: closed form unavailable within |a - 1/2| < {width} (a = {a})")]
    NearHalf { op: &'static str, a: f64, width: f64 },

    #[error("exact distribution needs O(n^2) work; n = {n} exceeds the cap {max}")]
    ResourceLimit { n: u64, max: u64 },

    #[error("sequence table covers n <= {covered}, requested n = {requested}")]
    TableTooShort { covered: u64, requested: u64 },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
