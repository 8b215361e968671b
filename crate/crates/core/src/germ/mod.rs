//! Germs of trace-polynomial pairs and their regularity certificates.
//!
//! A pair `(P_{-1}, P_0)` has a ρ-germ at `x0` when
//! `P_{-1} = 2 - (ρ²/4)(x - x0)² + O(3)` and `P_0 = 2 - ρ²(x - x0)² + O(3)`.
//! Iterating the trace recurrence gives `P_k` with factor `2^k ρ`. Here the
//! pair is always a pair of consecutive trace polynomials, so `P_k = h_{m+k}`
//! where `m` is the index of `P_0`.

mod constants;
mod regularity;

pub use constants::{verify_constants, ConstantsLedger, InequalityCheck};
pub use regularity::{
    check_regularity, closeness, closeness_at, closeness_of, delta_chain, delta_pair, rescaled_delta, Closeness,
    DeltaJet, RegularityCertificate, RegularityReport,
};

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::precision::{agree, trace_floor};
use crate::real::Real;
use crate::rootfind::Enclosure;
use crate::tracepoly::{ModelParams, TraceJets};

/// How a germ was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum GermOrigin {
    /// `(h_4, h_5)` at `a_∅ = sqrt(2 + λ²)` with factor `2τ`.
    Base,
    /// Generated at a zero `x0` of `h_m` from `f_0 = h_m`, `f_1 = h_{m+1}`.
    FromZero(Box<ZeroGermDiagnostics>),
    /// Iterate of another germ.
    Iterate { k: u32 },
}

/// Quantities checked while generating a germ at a zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroGermDiagnostics {
    pub m: u32,
    /// `sqrt(2 - f_1) |f_0' f_1|` at the zero.
    pub rho_formula: Real,
    /// `sqrt(-c_2) / 2` from the second Taylor coefficient of `h_{m+4}`.
    pub rho_jet: Real,
    /// `|rho_jet / rho_formula - 1|`.
    pub rho_discrepancy: Real,
    /// `2 - f_1(x0)`.
    pub margin_below_two: Real,
    /// `|f_1(x0)|`.
    pub margin_nonzero: Real,
    /// `|f_0'(x0)|`.
    pub derivative: Real,
    /// Precision of the accepted dual evaluation.
    pub precision_bits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Germ {
    pub x0: Real,
    /// Uncertainty of `x0`; zero for closed-form centers up to rounding.
    pub x0_radius: Real,
    /// Scaling factor of `P_0`.
    pub rho: Real,
    /// Trace indices of `(P_{-1}, P_0)`.
    pub pair: (u32, u32),
    pub origin: GermOrigin,
}

impl Germ {
    /// Trace index of `P_k`.
    pub fn index(&self, k: i64) -> Result<u32> {
        let i = self.pair.1 as i64 + k;
        if i < 1 {
            return Err(Error::InvalidArgument(format!("P_{k} has trace index {i} below 1")));
        }
        u32::try_from(i).map_err(|_| Error::InvalidArgument(format!("P_{k} index out of range")))
    }

    /// Scaling factor `2^k ρ` of `P_k`.
    pub fn scale(&self, k: i64) -> Real {
        self.rho.mul_pow2(k)
    }

    /// The germ of `(P_{k-1}, P_k)` at the same point.
    pub fn iterate(&self, k: u32) -> Germ {
        Germ {
            x0: self.x0.clone(),
            x0_radius: self.x0_radius.clone(),
            rho: self.rho.mul_pow2(k as i64),
            pair: (self.pair.0 + k, self.pair.1 + k),
            origin: GermOrigin::Iterate { k },
        }
    }
}

/// `a_∅ = sqrt(2 + λ²)`, the positive zero of `h_1`.
pub fn initial_point_at(params: &ModelParams, bits: usize) -> Real {
    (&Real::from_i64(2, bits) + &params.lambda(bits).square()).sqrt()
}

pub fn initial_point(params: &ModelParams) -> Real {
    initial_point_at(params, params.precision_bits)
}

/// `τ = 8 (1 + 2λ²) sqrt((1 + λ²)(2 + λ²))`.
pub fn tau_at(params: &ModelParams, bits: usize) -> Real {
    let l2 = params.lambda(bits).square();
    let one = Real::one(bits);
    let two = Real::from_i64(2, bits);
    let root = (&(&one + &l2) * &(&two + &l2)).sqrt();
    (&(&one + &l2.mul_pow2(1)) * &root).mul_pow2(3)
}

pub fn tau(params: &ModelParams) -> Real {
    tau_at(params, params.precision_bits)
}

/// `(h_4, h_5)` at `a_∅` with factor `2τ`.
pub fn base_germ(params: &ModelParams) -> Germ {
    base_germ_at(params, params.precision_bits)
}

pub fn base_germ_at(params: &ModelParams, bits: usize) -> Germ {
    Germ {
        x0: initial_point_at(params, bits),
        x0_radius: Real::zero(bits),
        rho: tau_at(params, bits).mul_pow2(1),
        pair: (4, 5),
        origin: GermOrigin::Base,
    }
}

/// Relative disagreement between the formula and jet values of ρ above which
/// germ generation aborts.
pub const RHO_CONSISTENCY: f64 = 1e-8;

struct ZeroEval {
    rho: Real,
    rho_jet: Real,
    below_two: Real,
    f1_abs: Real,
    d0: Real,
}

fn zero_eval(m: u32, x0: &Real, params: &ModelParams, bits: usize) -> Result<ZeroEval> {
    let one = Real::one(bits);
    let mut jets = TraceJets::new(x0, &one, 2, params, bits).skip(m as usize - 1);
    let f0 = jets.next().expect("infinite");
    let f1 = jets.next().expect("infinite");
    let f4 = jets.nth(2).expect("infinite");
    if !(f0.is_finite() && f1.is_finite() && f4.is_finite()) {
        return Err(Error::Overflow { n: m + 4 });
    }
    let two = Real::from_i64(2, bits);
    let below_two = &two - f1.coeff(0);
    let d0 = f0.coeff(1).abs();
    let f1_abs = f1.coeff(0).abs();
    let rho = &below_two.abs().sqrt() * &(&d0 * &f1_abs);
    let rho_jet = (-f4.coeff(2)).abs().sqrt().mul_pow2(-1);
    Ok(ZeroEval { rho, rho_jet, below_two, f1_abs, d0 })
}

/// The germ of `(h_{m+3}, h_{m+4})` at the zero of `h_m` enclosed by `zero`,
/// with factor `2ρ`, `ρ = sqrt(2 - f_1) |f_0' f_1|`.
///
/// Fails with [`Error::DegenerateGerm`] when `h_{m+1}(x0) ≥ 2`, `h_{m+1}(x0)`
/// or `h_m'(x0)` vanishes to working tolerance, or when ρ from the formula and
/// from the second coefficient of `h_{m+4}` differ by more than
/// [`RHO_CONSISTENCY`].
pub fn germ_from_zero(m: u32, zero: &Enclosure, params: &ModelParams) -> Result<Germ> {
    if m == 0 {
        return Err(Error::InvalidArgument(String::from("trace index must be at least 1")));
    }
    if zero.n != m {
        return Err(Error::InvalidArgument(format!("enclosure is for h_{}, not h_{m}", zero.n)));
    }
    let base = params.precision_bits;
    let ladder = params.ladder().with_floor(trace_floor(m + 4, base).max(zero.lo.precision()));
    let x0 = zero.midpoint();
    let eps = ladder.half_precision_eps();
    let (ev, bits) = ladder.run(
        "germ generation",
        |p| zero_eval(m, &x0, params, p),
        |lo, hi| {
            agree(&lo.rho, &hi.rho, &Real::zero(64), &eps) && agree(&lo.rho_jet, &hi.rho_jet, &Real::zero(64), &eps)
        },
    )?;
    let tol = Real::one(64).mul_pow2(-((base / 4) as i64));
    let degenerate = |reason: &str| Err(Error::DegenerateGerm { m, reason: reason.into() });
    if ev.below_two <= tol {
        return degenerate("h_{m+1}(x0) is not below 2");
    }
    if ev.f1_abs <= tol {
        return degenerate("h_{m+1}(x0) vanishes");
    }
    if ev.d0 <= tol {
        return degenerate("h_m'(x0) vanishes");
    }
    let discrepancy = (&(&ev.rho_jet / &ev.rho) - &Real::one(bits)).abs();
    if discrepancy > Real::from_f64(RHO_CONSISTENCY, bits) {
        return Err(Error::DegenerateGerm {
            m,
            reason: format!(
                "scaling factor mismatch: formula {} vs jet {}",
                ev.rho.to_decimal_string(),
                ev.rho_jet.to_decimal_string()
            ),
        });
    }
    Ok(Germ {
        x0,
        x0_radius: zero.radius(),
        rho: ev.rho.mul_pow2(1),
        pair: (m + 3, m + 4),
        origin: GermOrigin::FromZero(Box::new(ZeroGermDiagnostics {
            m,
            rho_formula: ev.rho,
            rho_jet: ev.rho_jet,
            rho_discrepancy: discrepancy,
            margin_below_two: ev.below_two,
            margin_nonzero: ev.f1_abs,
            derivative: ev.d0,
            precision_bits: bits,
        })),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rootfind::{isolate_zeros, ScanPolicy};

    #[test]
    fn initial_points() {
        let p0 = ModelParams::from_integer(0, 256).unwrap();
        assert_eq!(initial_point(&p0), Real::from_i64(2, 256).sqrt());
        let p3 = ModelParams::from_integer(3, 256).unwrap();
        let a = initial_point(&p3);
        assert_eq!(a, Real::from_i64(11, 256).sqrt());
        let h1 = crate::tracepoly::eval_trace(1, &a, &p3).unwrap();
        assert!(h1.abs() <= Real::one(64).mul_pow2(-128));
    }

    #[test]
    fn tau_matches_closed_form() {
        let p3 = ModelParams::from_integer(3, 256).unwrap();
        let t = tau(&p3).to_f64();
        assert!((t - 8.0 * 19.0 * 110f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn germ_at_the_first_zero_is_the_base_germ() {
        let params = ModelParams::from_integer(3, 256).unwrap();
        let zs = isolate_zeros(1, (&Real::from_i64(3, 256), &Real::from_i64(4, 256)), &params, &ScanPolicy::default())
            .unwrap();
        let g = germ_from_zero(1, &zs[0], &params).unwrap();
        assert_eq!(g.pair, (4, 5));
        let base = base_germ(&params);
        assert!(agree(&g.rho, &base.rho, &Real::zero(64), &Real::one(64).mul_pow2(-100)));
        let GermOrigin::FromZero(d) = &g.origin else { panic!("origin") };
        assert!(d.rho_discrepancy < Real::from_f64(1e-10, 64));
    }
}
