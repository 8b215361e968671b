//! Dual-precision acceptance.
//!
//! Every certified quantity is computed twice, at `p` and `2p` bits. It is
//! accepted when the two runs agree to half the base precision; otherwise `p`
//! doubles, up to a fixed number of escalations.

use alloc::string::String;

use crate::error::{Error, Result};
use crate::real::Real;

/// Precision schedule for one certified computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ladder {
    /// Precision the caller works at; agreement is measured against it.
    pub base_bits: usize,
    /// First rung of the ladder (at least `base_bits`).
    pub start_bits: usize,
    pub max_escalations: u32,
}

fn round_up_word(bits: usize) -> usize {
    bits.div_ceil(64) * 64
}

impl Ladder {
    pub fn new(base_bits: usize, max_escalations: u32) -> Self {
        Ladder { base_bits, start_bits: round_up_word(base_bits), max_escalations }
    }

    /// Raises the first rung to `floor_bits` when that is above the base.
    pub fn with_floor(mut self, floor_bits: usize) -> Self {
        self.start_bits = round_up_word(self.start_bits.max(floor_bits));
        self
    }

    /// Runs `f` at `p` and `2p`, escalating until `accept(low, high)` holds.
    /// Returns the high-precision result and the `p` at which it was accepted.
    pub fn run<T>(
        &self,
        context: &str,
        mut f: impl FnMut(usize) -> Result<T>,
        mut accept: impl FnMut(&T, &T) -> bool,
    ) -> Result<(T, usize)> {
        let mut p = self.start_bits;
        for _ in 0..=self.max_escalations {
            let low = f(p)?;
            let high = f(2 * p)?;
            if accept(&low, &high) {
                return Ok((high, p));
            }
            p *= 2;
        }
        Err(Error::Escalation { bits: p, context: String::from(context) })
    }

    /// `2^-(base/2)`, the agreement threshold at this ladder's base precision.
    pub fn half_precision_eps(&self) -> Real {
        Real::one(64).mul_pow2(-((self.base_bits / 2) as i64))
    }
}

/// Guard precision for quantities derived from `h_n`.
///
/// Rounding errors in the trace recurrence grow by about a factor 4 per level
/// near the spectrum, so `2n` bits are lost by index `n`.
pub fn trace_floor(n: u32, base_bits: usize) -> usize {
    base_bits / 2 + 2 * n as usize + 64
}

/// `|a - b| <= eps * max(|b|, scale)`.
pub fn agree(a: &Real, b: &Real, scale: &Real, eps: &Real) -> bool {
    if !a.is_finite() || !b.is_finite() {
        return false;
    }
    let diff = (a - b).abs();
    let reference = b.abs().max(scale);
    diff <= eps * &reference
}
