use alloc::string::String;

/// Errors raised by the numerical routines.
///
/// Certificate failures (a germ that is not regular, a ratio below its bound)
/// are reported as values, not errors; this type is for conditions that stop a
/// computation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("size limit exceeded: {what} = {value}, maximum is {max}")]
    SizeLimit { what: &'static str, value: u64, max: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("could not parse {field}: {reason}")]
    Parse { field: &'static str, reason: String },

    #[error("exponent range overflow while evaluating h_{n}")]
    Overflow { n: u32 },

    #[error("precision escalation failed at {bits} bits: {context}")]
    Escalation { bits: usize, context: String },

    #[error("unresolved window [{lo}, {hi}] for h_{n}")]
    UnresolvedWindow { n: u32, lo: String, hi: String },

    #[error("no zero of h_{n} found: {context}")]
    NotFound { n: u32, context: String },

    #[error("degenerate germ for h_{m}: {reason}")]
    DegenerateGerm { m: u32, reason: String },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
