//! Rescaled deviations `Δ_k` and (δ, β)-regularity prefix certificates.
//!
//! `Q_k(u) = P_k(u / (2^k ρ) + x0)` and `Δ_k = Q_k - 2 cos u`. A pair is
//! (δ, β)-regular when the coefficients of order `n ≥ 3` of `Δ_{-1}` and `Δ_0`
//! are bounded by `δ / β^n` and those of order 0 to 2 vanish. Only the prefix
//! up to a finite order is checked.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::precision::trace_floor;
use crate::real::Real;
use crate::tracepoly::{ModelParams, TraceJets};

use super::Germ;

/// A `Δ_k` jet together with its numerical error budget.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaJet {
    pub k: i64,
    pub jet: Jet,
    /// Per-coefficient discrepancy between the `p` and `2p` evaluations.
    pub error: Vec<Real>,
    /// Coefficients 0 to 2 count as zero up to this value.
    pub vanish_tol: Real,
    pub precision_bits: usize,
}

impl DeltaJet {
    pub fn order(&self) -> usize {
        self.jet.order()
    }

    /// Largest of `|c_0|, |c_1|, |c_2|`.
    pub fn low_order_size(&self) -> Real {
        let mut m = Real::zero(64);
        for n in 0..3.min(self.jet.order() + 1) {
            m = m.max(&self.jet.coeff(n).abs());
        }
        m
    }

    pub fn low_orders_vanish(&self) -> bool {
        (0..3.min(self.jet.order() + 1)).all(|n| {
            let c = &self.jet.coeff(n).abs() + &self.error[n];
            c <= self.vanish_tol
        })
    }
}

/// Minimum jet order accepted by [`rescaled_delta`].
pub const MIN_DELTA_ORDER: usize = 8;

fn raw_chain(germ: &Germ, ks: &[i64], order: usize, params: &ModelParams, bits: usize) -> Result<Vec<Jet>> {
    let mut wanted: Vec<(u32, usize)> =
        ks.iter().enumerate().map(|(i, &k)| germ.index(k).map(|n| (n, i))).collect::<Result<_>>()?;
    wanted.sort();
    let top = wanted.last().map(|w| w.0).unwrap_or(1);
    let mut out: Vec<Option<Jet>> = alloc::vec![None; ks.len()];
    let mut next = 0;
    let cosine = Jet::two_cos(order, bits);
    for (i, jet) in TraceJets::new(&germ.x0, &germ.rho, order, params, bits).enumerate().take(top as usize) {
        let n = i as u32 + 1;
        while next < wanted.len() && wanted[next].0 == n {
            if !jet.is_finite() {
                return Err(Error::Overflow { n });
            }
            let slot = wanted[next].1;
            let q = jet.rescale_pow2(-ks[slot]);
            out[slot] = Some(q.sub(&cosine));
            next += 1;
        }
    }
    Ok(out.into_iter().map(|j| j.expect("every index reached")).collect())
}

/// Guard precision for jets of `h_n` to the given order.
fn jet_floor(n: u32, order: usize, base_bits: usize) -> usize {
    trace_floor(n, base_bits) + 2 * order
}

/// `Δ_k` for every `k` in `ks`, from a single jet chain.
///
/// The chain runs at `p` and `2p`; it is accepted when every coefficient
/// agrees to `2^-(P/2) max(|c_n|, 4^-n)`.
pub fn delta_chain(germ: &Germ, ks: &[i64], order: usize, params: &ModelParams) -> Result<Vec<DeltaJet>> {
    if order < MIN_DELTA_ORDER {
        return Err(Error::InvalidArgument(format!("Δ jets need order at least {MIN_DELTA_ORDER}, got {order}")));
    }
    if ks.is_empty() {
        return Ok(Vec::new());
    }
    let top = ks.iter().map(|&k| germ.index(k)).collect::<Result<Vec<_>>>()?.into_iter().max().unwrap_or(1);
    let base = params.precision_bits;
    let ladder = params.ladder().with_floor(jet_floor(top, order, base).max(germ.x0.precision()));
    let eps = ladder.half_precision_eps();
    let mut p = ladder.start_bits;
    let mut accepted = None;
    for _ in 0..=ladder.max_escalations {
        let lo = raw_chain(germ, ks, order, params, p)?;
        let hi = raw_chain(germ, ks, order, params, 2 * p)?;
        if chains_agree(&lo, &hi, &eps) {
            accepted = Some((lo, hi));
            break;
        }
        p *= 2;
    }
    let Some((lo, hi)) = accepted else {
        return Err(Error::Escalation { bits: p, context: format!("Δ jet chain to h_{top}") });
    };
    let bits = p;
    let fine_bits = 2 * bits;
    let x0_err = &germ.x0_radius.abs() + &(&germ.x0.abs() * &Real::one(64).mul_pow2(-(bits as i64)));
    let two = Real::from_i64(2, fine_bits);
    let base_tol = two.mul_pow2(-((base / 3) as i64));
    Ok(hi
        .into_iter()
        .zip(lo)
        .zip(ks)
        .map(|((h, l), &k)| {
            let error = (0..=order).map(|n| (h.coeff(n) - l.coeff(n)).abs()).collect::<Vec<_>>();
            let center_err = &germ.scale(k) * &x0_err;
            let tol = &(&base_tol + &(&center_err * &Real::from_i64(3, 64)))
                + &error[..3].iter().fold(Real::zero(64), |a, e| a.max(e));
            DeltaJet { k, jet: h, error, vanish_tol: tol, precision_bits: bits }
        })
        .collect())
}

fn chains_agree(lo: &[Jet], hi: &[Jet], eps: &Real) -> bool {
    lo.iter().zip(hi).all(|(l, h)| {
        (0..=h.order()).all(|n| {
            let (a, b) = (l.coeff(n), h.coeff(n));
            if !(a.is_finite() && b.is_finite()) {
                return false;
            }
            let floor = Real::one(64).mul_pow2(-2 * n as i64);
            (a - b).abs() <= eps * &b.abs().max(&floor)
        })
    })
}

/// `Δ_k` at the germ's center, `k ≥ -1`.
pub fn rescaled_delta(k: i64, germ: &Germ, order: usize, params: &ModelParams) -> Result<DeltaJet> {
    if k < -1 {
        return Err(Error::InvalidArgument(format!("iterate index must be at least -1, got {k}")));
    }
    Ok(delta_chain(germ, &[k], order, params)?.remove(0))
}

/// `(Δ_{k-1}, Δ_k)`.
pub fn delta_pair(k: i64, germ: &Germ, order: usize, params: &ModelParams) -> Result<(DeltaJet, DeltaJet)> {
    if k < 0 {
        return Err(Error::InvalidArgument(format!("pair index must be at least 0, got {k}")));
    }
    let mut v = delta_chain(germ, &[k - 1, k], order, params)?;
    let d0 = v.pop().expect("two jets");
    let dm1 = v.pop().expect("two jets");
    Ok((dm1, d0))
}

/// A passed prefix check.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityCertificate {
    pub delta: Real,
    pub beta: Real,
    pub order_checked: usize,
    /// `min_n (δ/β^n - |c_n| - err_n) β^(n-3)` over both jets and
    /// `3 ≤ n ≤ N`; equals `δ/β³` for zero jets.
    pub margin: Real,
    /// Fitted geometric decay rate of the largest coefficient magnitudes over
    /// the upper half of the prefix. Evidence only.
    pub tail_ratio: Option<f64>,
}

/// Outcome of [`check_regularity`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub passed: bool,
    pub low_orders_vanish: bool,
    pub margin: Real,
    /// Jet (0 for `Δ_{-1}`, 1 for `Δ_0`) and order of the tightest coefficient.
    pub worst: (usize, usize),
    pub certificate: Option<RegularityCertificate>,
}

fn tail_ratio(pair: (&DeltaJet, &DeltaJet), n_max: usize) -> Option<f64> {
    let start = (n_max / 2).max(3);
    let pts: Vec<(f64, f64)> = (start..=n_max)
        .filter_map(|n| {
            let m = pair.0.jet.coeff(n).abs().max(&pair.1.jet.coeff(n).abs());
            let l = ln_abs(&m)?;
            Some((n as f64, l))
        })
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(libm::exp(sxy / sxx))
}

fn ln_abs(x: &Real) -> Option<f64> {
    if x.is_zero() || !x.is_finite() {
        return None;
    }
    let e = x.binary_exponent()? as i64;
    let m = x.mul_pow2(-e).abs().to_f64();
    Some(libm::log(m) + e as f64 * core::f64::consts::LN_2)
}

/// Checks `|c_n| + err_n ≤ δ / β^n` for `3 ≤ n ≤ N` in both jets, and that
/// orders 0 to 2 vanish.
///
/// # Panics
/// If either jet has order below `n_max`.
pub fn check_regularity(pair: (&DeltaJet, &DeltaJet), delta: &Real, beta: &Real, n_max: usize) -> RegularityReport {
    assert!(pair.0.order() >= n_max && pair.1.order() >= n_max, "jets shorter than the checked order");
    let bits = pair.1.precision_bits.max(delta.precision()).max(128);
    let delta = delta.with_precision(bits);
    let beta = beta.with_precision(bits);
    let vanish = pair.0.low_orders_vanish() && pair.1.low_orders_vanish();
    let mut margin: Option<Real> = None;
    let mut worst = (0, 3);
    let mut bound = &delta / &beta.powi(3);
    for n in 3..=n_max {
        // bound = δ/β^n, normaliser = β^(n-3)
        for (j, d) in [pair.0, pair.1].into_iter().enumerate() {
            let used = &d.jet.coeff(n).abs() + &d.error[n];
            let m = &(&bound - &used) * &beta.powi(n - 3);
            if margin.as_ref().is_none_or(|cur| m < *cur) {
                margin = Some(m);
                worst = (j, n);
            }
        }
        bound = &bound / &beta;
    }
    let margin = margin.unwrap_or_else(|| &delta / &beta.powi(3));
    let passed = vanish && !margin.is_negative();
    let certificate = passed.then(|| RegularityCertificate {
        delta: delta.clone(),
        beta: beta.clone(),
        order_checked: n_max,
        margin: margin.clone(),
        tail_ratio: tail_ratio(pair, n_max),
    });
    RegularityReport { passed, low_orders_vanish: vanish, margin, worst, certificate }
}

/// Closeness levels: weak is (1, 1), close is (10⁻⁴, 2), strong is (10⁻¹⁶, 4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Closeness {
    None,
    Weak,
    Close,
    Strong,
}

impl Closeness {
    pub fn as_str(self) -> &'static str {
        match self {
            Closeness::None => "none",
            Closeness::Weak => "weak",
            Closeness::Close => "close",
            Closeness::Strong => "strong",
        }
    }

    /// `(δ, β)` of the level; `None` has no parameters.
    pub fn parameters(self, bits: usize) -> Option<(Real, Real)> {
        let (d, b) = match self {
            Closeness::None => return None,
            Closeness::Weak => ("1", 1),
            Closeness::Close => ("1e-4", 2),
            Closeness::Strong => ("1e-16", 4),
        };
        Some((Real::parse(d, bits).expect("literal"), Real::from_i64(b, bits)))
    }
}

/// Strongest level passed by a Δ pair, with the report for that level (or for
/// the weak level when none passes).
pub fn closeness_of(pair: (&DeltaJet, &DeltaJet), n_max: usize) -> (Closeness, RegularityReport) {
    let bits = pair.1.precision_bits;
    let mut last = None;
    for level in [Closeness::Strong, Closeness::Close, Closeness::Weak] {
        let (d, b) = level.parameters(bits).expect("level has parameters");
        let report = check_regularity(pair, &d, &b, n_max);
        if report.passed {
            return (level, report);
        }
        last = Some(report);
    }
    (Closeness::None, last.expect("weak level checked"))
}

/// Closeness of the germ's own pair `(P_{-1}, P_0)`.
pub fn closeness(germ: &Germ, n_max: usize, params: &ModelParams) -> Result<(Closeness, RegularityReport)> {
    closeness_at(germ, 0, n_max, params)
}

/// Closeness of the iterate pair `(P_{k-1}, P_k)`.
pub fn closeness_at(germ: &Germ, k: i64, n_max: usize, params: &ModelParams) -> Result<(Closeness, RegularityReport)> {
    let (a, b) = delta_pair(k, germ, n_max.max(MIN_DELTA_ORDER), params)?;
    Ok(closeness_of((&a, &b), n_max))
}
