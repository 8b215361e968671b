//! Zero isolation for `h_n` by certified sign changes.
//!
//! A sign is certified when evaluations at `p` and `2p` bits agree in sign and
//! to within half the value. Windows are scanned at a step tied to the local
//! frequency and brackets are refined by bisection.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::precision::{trace_floor, Ladder};
use crate::real::{Real, Sign};
use crate::tracepoly::{eval_trace_at, trace_jet_scaled, ModelParams};

/// How minimality of a directional zero was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Minimality {
    /// Not a directional query.
    NotApplicable,
    /// No sign change between the anchor and the bracket at scan resolution.
    Heuristic,
    /// Scan result confirmed by the cosine localization of a certified germ.
    Localized,
}

/// An interval `[lo, hi]` with a certified sign change of `h_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Enclosure {
    pub n: u32,
    pub lo: Real,
    pub hi: Real,
    pub certified: bool,
    /// Lower precision of the accepted dual-precision pair.
    pub precision_bits: usize,
    pub params: ModelParams,
    pub minimality: Minimality,
    /// The derivative at the midpoint is small compared to the bracket's
    /// secant slope, so the zero may be close to a tangency.
    pub suspect_tangent: bool,
}

impl Enclosure {
    /// An uncertified enclosure `[center - radius, center + radius]`.
    pub fn around(n: u32, center: &Real, radius: &Real, params: &ModelParams) -> Self {
        Enclosure {
            n,
            lo: center - radius,
            hi: center + radius,
            certified: false,
            precision_bits: params.precision_bits,
            params: params.clone(),
            minimality: Minimality::NotApplicable,
            suspect_tangent: false,
        }
    }

    pub fn width(&self) -> Real {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Real {
        (&self.lo + &self.hi).mul_pow2(-1)
    }

    pub fn radius(&self) -> Real {
        self.width().mul_pow2(-1)
    }

    pub fn contains(&self, x: &Real) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn overlaps(&self, other: &Enclosure) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Re-checks the sign change at twice the recorded precision.
    pub fn verify(&self) -> Result<bool> {
        let params = self.params.with_precision(2 * self.precision_bits);
        let a = certified_sign(self.n, &self.lo, &params)?;
        let b = certified_sign(self.n, &self.hi, &params)?;
        Ok(a != b && a != Sign::Zero && b != Sign::Zero)
    }

    /// Bisects to `target_width`.
    pub fn refine(&self, target_width: &Real) -> Result<Enclosure> {
        let s_lo = certified_sign(self.n, &self.lo, &self.params)?;
        let (lo, hi) = bisect(self.n, self.lo.clone(), self.hi.clone(), s_lo, target_width, &self.params)?;
        Ok(Enclosure { lo, hi, ..self.clone() })
    }
}

/// Scan settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPolicy {
    /// Scan step as a fraction of the predicted quarter period.
    pub step_fraction: f64,
    pub max_escalations: u32,
    /// Bisection stops below this width; `None` uses `2^-(P/2)` times the
    /// natural length scale of the query.
    pub target_width: Option<Real>,
    /// Directional searches give up after the predicted first zero plus this
    /// many half periods.
    pub search_halfperiods: u32,
}

impl Default for ScanPolicy {
    fn default() -> Self {
        ScanPolicy { step_fraction: 0.125, max_escalations: 4, target_width: None, search_halfperiods: 3 }
    }
}

impl ScanPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_fraction > 0.0 && self.step_fraction <= 0.25) {
            return Err(Error::InvalidArgument(format!(
                "step_fraction must lie in (0, 1/4], got {}",
                self.step_fraction
            )));
        }
        Ok(())
    }

    pub fn with_target_width(mut self, w: Real) -> Self {
        self.target_width = Some(w);
        self
    }
}

fn sign_ladder(n: u32, params: &ModelParams) -> Ladder {
    params.ladder().with_floor(trace_floor(n, params.precision_bits))
}

/// Working precision for positions and jets used with `h_n`.
pub fn working_bits(n: u32, params: &ModelParams) -> usize {
    sign_ladder(n, params).start_bits
}

/// Sign of `h_n(x)`, stable under precision doubling.
pub fn certified_sign(n: u32, x: &Real, params: &ModelParams) -> Result<Sign> {
    let ladder = sign_ladder(n, params);
    let (v, _) = ladder.run(
        "sign evaluation",
        |p| eval_trace_at(n, x, params, p),
        |lo, hi| {
            let s = hi.signum();
            s != Sign::Zero && lo.signum() == s && (lo - hi).abs() <= hi.abs().mul_pow2(-1)
        },
    )?;
    Ok(v.signum())
}

fn unresolved(n: u32, lo: &Real, hi: &Real) -> impl Fn(Error) -> Error {
    let (lo, hi) = (lo.to_decimal_string(), hi.to_decimal_string());
    move |e| match e {
        Error::Escalation { .. } => Error::UnresolvedWindow { n, lo: lo.clone(), hi: hi.clone() },
        other => other,
    }
}

fn bisect(n: u32, mut lo: Real, mut hi: Real, s_lo: Sign, target: &Real, params: &ModelParams) -> Result<(Real, Real)> {
    let bits = working_bits(n, params);
    lo = lo.with_precision(bits.max(lo.precision()));
    hi = hi.with_precision(bits.max(hi.precision()));
    while &hi - &lo > *target {
        let mid = (&lo + &hi).mul_pow2(-1);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = certified_sign(n, &mid, params).map_err(unresolved(n, &lo, &hi))?;
        if s == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Local angular frequency of `h_n` at `x`, from its second-order jet:
/// `max(|c1| / A, sqrt(|c2| / A))` with `A = max(|c0|, 2)`.
pub fn frequency_estimate(n: u32, x: &Real, params: &ModelParams) -> Result<Real> {
    let bits = working_bits(n, params);
    let jet = trace_jet_scaled(n, x, &Real::one(bits), 2, params, bits)?;
    let amp = jet.coeff(0).abs().max(&Real::from_i64(2, bits));
    let s1 = &jet.coeff(1).abs() / &amp;
    let s2 = (&jet.coeff(2).abs() / &amp).sqrt();
    Ok(s1.max(&s2))
}

fn quarter_period(s: &Real) -> Real {
    let bits = s.precision();
    &Real::pi(bits).mul_pow2(-1) / s
}

fn suspect_tangent(n: u32, lo: &Real, hi: &Real, params: &ModelParams) -> Result<bool> {
    let bits = working_bits(n, params);
    let mid = (lo + hi).mul_pow2(-1);
    let jet = trace_jet_scaled(n, &mid, &Real::one(bits), 2, params, bits)?;
    let secant = (&eval_trace_at(n, hi, params, bits)? - &eval_trace_at(n, lo, params, bits)?).abs();
    let width = hi - lo;
    Ok(&jet.coeff(1).abs() * &width < secant.mul_pow2(-10))
}

fn finish(n: u32, lo: Real, hi: Real, params: &ModelParams, minimality: Minimality) -> Result<Enclosure> {
    let suspect = suspect_tangent(n, &lo, &hi, params)?;
    Ok(Enclosure {
        n,
        lo,
        hi,
        certified: true,
        precision_bits: working_bits(n, params),
        params: params.clone(),
        minimality,
        suspect_tangent: suspect,
    })
}

/// All sign changes of `h_n` on `[lo, hi]`, ascending.
///
/// The step adapts to [`frequency_estimate`] and never exceeds 1/256 of the
/// window. Two zeros closer than the step are missed; every returned bracket
/// is a certified sign change.
pub fn isolate_zeros(
    n: u32,
    window: (&Real, &Real),
    params: &ModelParams,
    policy: &ScanPolicy,
) -> Result<Vec<Enclosure>> {
    policy.validate()?;
    let params = &params.clone().with_max_escalations(policy.max_escalations);
    let bits = working_bits(n, params);
    let (a, b) = (window.0.with_precision(bits), window.1.with_precision(bits));
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::InvalidArgument(String::from("window must be finite and nonempty")));
    }
    let span = &b - &a;
    let max_step = span.mul_pow2(-8);
    let min_step = span.mul_pow2(-40);
    let frac = Real::from_f64(policy.step_fraction, bits);
    let eps = Real::one(64).mul_pow2(-((params.precision_bits / 2) as i64));

    let mut out = Vec::new();
    let mut x = a.clone();
    let mut s_x = certified_sign(n, &x, params).map_err(unresolved(n, &a, &a))?;
    while x < b {
        let s = frequency_estimate(n, &x, params)?;
        let q = quarter_period(&s);
        let step = (&frac * &q).min(&max_step).max(&min_step);
        let next = (&x + &step).min(&b);
        let s_next = certified_sign(n, &next, params).map_err(unresolved(n, &x, &next))?;
        if s_next != s_x {
            let target = policy.target_width.clone().unwrap_or_else(|| &eps * &q.min(&span));
            let (lo, hi) = bisect(n, x.clone(), next.clone(), s_x, &target, params)?;
            out.push(finish(n, lo, hi, params, Minimality::NotApplicable)?);
        }
        x = next;
        s_x = s_next;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    After,
    Before,
}

/// Nearest zero of `h_n` strictly after (or before) `anchor`.
///
/// `scale_hint` is the local frequency `s`; zero means unknown, in which case
/// it is estimated from the jet at the anchor. The scan uses step
/// `step_fraction * (π/2)/s` and gives up after `(π/2)/s` plus
/// `search_halfperiods` half periods, or at `bound` if that comes first.
pub fn directional_zero(
    n: u32,
    anchor: &Real,
    direction: Direction,
    scale_hint: &Real,
    bound: Option<&Real>,
    params: &ModelParams,
    policy: &ScanPolicy,
) -> Result<Enclosure> {
    policy.validate()?;
    let params = &params.clone().with_max_escalations(policy.max_escalations);
    let bits = working_bits(n, params);
    let anchor = anchor.with_precision(bits.max(anchor.precision()));
    let s = if scale_hint.is_positive() {
        scale_hint.with_precision(bits)
    } else {
        frequency_estimate(n, &anchor, params)?
    };
    let q = quarter_period(&s);
    let step = &Real::from_f64(policy.step_fraction, bits) * &q;
    let reach = &q + &q.mul_pow2(1) * &Real::from_i64(policy.search_halfperiods as i64, bits);
    let signed = |d: &Real| match direction {
        Direction::After => d.clone(),
        Direction::Before => -d,
    };
    let mut limit = &anchor + &signed(&reach);
    if let Some(bd) = bound {
        let beyond = match direction {
            Direction::After => bd <= &anchor,
            Direction::Before => bd >= &anchor,
        };
        if beyond {
            return Err(Error::NotFound {
                n,
                context: String::from("search bound lies on the wrong side of the anchor"),
            });
        }
        limit = match direction {
            Direction::After => limit.min(bd),
            Direction::Before => limit.max(bd),
        };
    }
    let past = |x: &Real| match direction {
        Direction::After => x >= &limit,
        Direction::Before => x <= &limit,
    };

    let mut x = anchor.clone();
    let mut s_x = match certified_sign(n, &x, params) {
        Ok(Sign::Zero) | Err(Error::Escalation { .. }) => {
            x = &anchor + &signed(&step.mul_pow2(-4));
            certified_sign(n, &x, params).map_err(unresolved(n, &anchor, &x))?
        }
        other => other?,
    };
    let target = policy
        .target_width
        .clone()
        .unwrap_or_else(|| Real::one(64).mul_pow2(-((params.precision_bits / 2) as i64)) * q.clone());
    loop {
        if past(&x) {
            return Err(Error::NotFound {
                n,
                context: format!("no sign change within {} of the anchor", reach.to_decimal_string()),
            });
        }
        let mut next = &x + &signed(&step);
        if past(&next) {
            next = limit.clone();
        }
        let s_next = certified_sign(n, &next, params).map_err(unresolved(n, &x, &next))?;
        if s_next != s_x {
            let (lo, hi, s_lo) = match direction {
                Direction::After => (x, next, s_x),
                Direction::Before => (next, x, s_next),
            };
            let (mut lo, mut hi) = bisect(n, lo, hi, s_lo, &target, params)?;
            // Keep the bracket strictly on the requested side.
            while (direction == Direction::After && lo <= anchor) || (direction == Direction::Before && hi >= anchor) {
                let half = (&hi - &lo).mul_pow2(-1);
                let (l2, h2) = bisect(n, lo.clone(), hi.clone(), s_lo, &half, params)?;
                if l2 == lo && h2 == hi {
                    break;
                }
                lo = l2;
                hi = h2;
            }
            return finish(n, lo, hi, params, Minimality::Heuristic);
        }
        x = next;
        s_x = s_next;
    }
}

pub fn first_zero_after(
    n: u32,
    x0: &Real,
    scale_hint: &Real,
    params: &ModelParams,
    policy: &ScanPolicy,
) -> Result<Enclosure> {
    directional_zero(n, x0, Direction::After, scale_hint, None, params, policy)
}

pub fn last_zero_before(
    n: u32,
    y0: &Real,
    scale_hint: &Real,
    params: &ModelParams,
    policy: &ScanPolicy,
) -> Result<Enclosure> {
    directional_zero(n, y0, Direction::Before, scale_hint, None, params, policy)
}

/// [`first_zero_after`] restricted to `(x0, bound]`.
pub fn first_zero_after_within(
    n: u32,
    x0: &Real,
    bound: &Real,
    scale_hint: &Real,
    params: &ModelParams,
    policy: &ScanPolicy,
) -> Result<Enclosure> {
    directional_zero(n, x0, Direction::After, scale_hint, Some(bound), params, policy)
}

/// [`last_zero_before`] restricted to `[bound, y0)`.
pub fn last_zero_before_within(
    n: u32,
    y0: &Real,
    bound: &Real,
    scale_hint: &Real,
    params: &ModelParams,
    policy: &ScanPolicy,
) -> Result<Enclosure> {
    directional_zero(n, y0, Direction::Before, scale_hint, Some(bound), params, policy)
}
