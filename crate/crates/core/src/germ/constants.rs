//! The constant chain `δ0 = 10⁻²`, `δ1 = 10⁻⁴`, `δ2 = 10⁻¹⁶`, `K = 140`,
//! checked in exact rational arithmetic.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow};

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub lhs: BigRational,
    pub rhs: BigRational,
    pub strict: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsLedger {
    pub delta0: BigRational,
    pub delta1: BigRational,
    pub delta2: BigRational,
    pub k: u32,
    pub checks: Vec<InequalityCheck>,
}

impl ConstantsLedger {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

fn ten_pow(e: i32) -> BigRational {
    let ten = BigRational::from_integer(BigInt::from(10));
    if e >= 0 {
        Pow::pow(&ten, e as u32)
    } else {
        BigRational::one() / Pow::pow(&ten, (-e) as u32)
    }
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn check(name: &'static str, lhs: BigRational, rhs: BigRational, strict: bool) -> InequalityCheck {
    let holds = if strict { lhs < rhs } else { lhs <= rhs };
    InequalityCheck { name, lhs, rhs, strict, holds }
}

/// `20 δ1 ≤ δ0`, `400⁴ · 4 · 3 · δ2 ≤ δ1` and `3200 · 2^-((K-4)/2) < δ2`.
pub fn verify_constants() -> ConstantsLedger {
    let delta0 = ten_pow(-2);
    let delta1 = ten_pow(-4);
    let delta2 = ten_pow(-16);
    let k = 140u32;
    let half = (k - 4) / 2;
    let two_pow = BigRational::one() / Pow::pow(&int(2), half);
    let checks = vec![
        check("20*delta1 <= delta0", int(20) * &delta1, delta0.clone(), false),
        check("400^4*4*3*delta2 <= delta1", Pow::pow(&int(400), 4u32) * int(12) * &delta2, delta1.clone(), false),
        check("3200*2^(-(K-4)/2) < delta2", int(3200) * two_pow, delta2.clone(), true),
    ];
    ConstantsLedger { delta0, delta1, delta2, k, checks }
}
