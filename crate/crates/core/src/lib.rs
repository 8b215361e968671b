//! Thue–Morse trace polynomials in multiprecision arithmetic.
//!
//! The crate evaluates the trace polynomials `h_n` of the Thue–Morse
//! substitution pointwise and as truncated power series, isolates their real
//! zeros, certifies germs and their regularity against `2 cos x`, builds the
//! nested Cantor interval tree and reports the resulting dimension bound.
//!
//! Every certified value is computed at two precisions and accepted only when
//! the runs agree; see [`precision`].

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cantor;
pub mod error;
pub mod germ;
pub mod jet;
pub mod precision;
pub mod real;
pub mod rootfind;
pub mod spectrum;
pub mod tracepoly;

pub use error::{Error, Result};
pub use jet::Jet;
pub use real::{Real, Sign};
pub use tracepoly::ModelParams;
