//! Thue–Morse trace polynomials.
//!
//! `h_1 = x^2 - λ^2 - 2`, `h_2 = (x^2 - λ^2)^2 - 4x^2 + 2` and
//! `h_{n+1} = h_{n-1}^2 (h_n - 2) + 2`. Values are computed by the recurrence;
//! [`eval_trace_oracle`] recomputes them as traces of transfer-matrix products
//! over the substitution word.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::precision::{agree, trace_floor, Ladder};
use crate::real::{Real, MIN_PRECISION_BITS};

/// Largest substitution depth [`tm_word`] will expand.
pub const MAX_WORD_DEPTH: u32 = 30;
/// Largest depth accepted by the matrix oracle.
pub const MAX_ORACLE_DEPTH: u32 = 20;

/// Coupling constant and arithmetic settings.
///
/// λ is kept as an exact rational and rounded afresh for every precision a
/// computation asks for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    lambda: BigRational,
    pub precision_bits: usize,
    pub max_escalations: u32,
}

impl ModelParams {
    pub const DEFAULT_MAX_ESCALATIONS: u32 = 4;

    pub fn new(lambda: BigRational, precision_bits: usize) -> Result<Self> {
        if precision_bits < MIN_PRECISION_BITS {
            return Err(Error::InvalidArgument(format!(
                "precision_bits must be at least {MIN_PRECISION_BITS}, got {precision_bits}"
            )));
        }
        Ok(ModelParams { lambda, precision_bits, max_escalations: Self::DEFAULT_MAX_ESCALATIONS })
    }

    /// Parses λ from a decimal (`0.75`, `3e-1`) or rational (`3/4`) string.
    pub fn parse(lambda: &str, precision_bits: usize) -> Result<Self> {
        let q = crate::real::parse_rational(lambda).map_err(|e| match e {
            Error::Parse { reason, .. } => Error::Parse { field: "lambda", reason },
            other => other,
        })?;
        Self::new(q, precision_bits)
    }

    pub fn from_integer(lambda: i64, precision_bits: usize) -> Result<Self> {
        Self::new(BigRational::from_integer(lambda.into()), precision_bits)
    }

    pub fn with_precision(&self, precision_bits: usize) -> Self {
        ModelParams { precision_bits: precision_bits.max(MIN_PRECISION_BITS), ..self.clone() }
    }

    pub fn with_max_escalations(mut self, max_escalations: u32) -> Self {
        self.max_escalations = max_escalations;
        self
    }

    pub fn lambda_exact(&self) -> &BigRational {
        &self.lambda
    }

    /// λ rounded to `bits`.
    pub fn lambda(&self, bits: usize) -> Real {
        Real::from_rational(&self.lambda, bits)
    }

    pub fn ladder(&self) -> Ladder {
        Ladder::new(self.precision_bits, self.max_escalations)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    A,
    B,
}

impl Letter {
    pub fn as_char(self) -> char {
        match self {
            Letter::A => 'a',
            Letter::B => 'b',
        }
    }
}

/// `σ^n(a)` for the substitution `a -> ab`, `b -> ba`.
pub fn tm_word(n: u32) -> Result<Vec<Letter>> {
    if n > MAX_WORD_DEPTH {
        return Err(Error::SizeLimit { what: "substitution depth", value: n as u64, max: MAX_WORD_DEPTH as u64 });
    }
    // The n-th letter is b exactly when n has an odd number of set bits.
    Ok((0u64..1 << n).map(|i| if i.count_ones() % 2 == 0 { Letter::A } else { Letter::B }).collect())
}

pub fn word_string(word: &[Letter]) -> String {
    word.iter().map(|l| l.as_char()).collect()
}

/// Order in which the transfer matrices of a word are multiplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProductOrder {
    /// `τ(a_1 ⋯ a_n) = τ(a_n) ⋯ τ(a_1)`.
    #[default]
    Reversed,
    /// `τ(a_1) ⋯ τ(a_n)`.
    Forward,
}

/// A real 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub a: Real,
    pub b: Real,
    pub c: Real,
    pub d: Real,
}

impl TransferMatrix {
    pub fn identity(bits: usize) -> Self {
        TransferMatrix { a: Real::one(bits), b: Real::zero(bits), c: Real::zero(bits), d: Real::one(bits) }
    }

    /// `τ(a) = [[x - λ, -1], [1, 0]]`, `τ(b) = [[x + λ, -1], [1, 0]]`.
    pub fn letter(letter: Letter, x: &Real, lambda: &Real) -> Self {
        let bits = x.precision().max(lambda.precision());
        let a = match letter {
            Letter::A => x - lambda,
            Letter::B => x + lambda,
        };
        TransferMatrix { a, b: Real::from_i64(-1, bits), c: Real::one(bits), d: Real::zero(bits) }
    }

    pub fn mul(&self, rhs: &TransferMatrix) -> TransferMatrix {
        TransferMatrix {
            a: &(&self.a * &rhs.a) + &(&self.b * &rhs.c),
            b: &(&self.a * &rhs.b) + &(&self.b * &rhs.d),
            c: &(&self.c * &rhs.a) + &(&self.d * &rhs.c),
            d: &(&self.c * &rhs.b) + &(&self.d * &rhs.d),
        }
    }

    pub fn trace(&self) -> Real {
        &self.a + &self.d
    }

    pub fn det(&self) -> Real {
        &(&self.a * &self.d) - &(&self.b * &self.c)
    }

    /// `|det - 1| <= 2^-(bits/2) * max(1, |a d|, |b c|)`.
    pub fn is_unimodular(&self, bits: usize) -> bool {
        let scale = (&self.a * &self.d).abs().max(&(&self.b * &self.c).abs()).max(&Real::one(64));
        let eps = Real::one(64).mul_pow2(-((bits / 2) as i64));
        (&self.det() - &Real::one(bits)).abs() <= &eps * &scale
    }

    pub fn product(word: &[Letter], x: &Real, lambda: &Real, order: ProductOrder) -> TransferMatrix {
        let bits = x.precision().max(lambda.precision());
        let ta = TransferMatrix::letter(Letter::A, x, lambda);
        let tb = TransferMatrix::letter(Letter::B, x, lambda);
        let mut m = TransferMatrix::identity(bits);
        for &l in word {
            let t = if l == Letter::A { &ta } else { &tb };
            m = match order {
                ProductOrder::Reversed => t.mul(&m),
                ProductOrder::Forward => m.mul(t),
            };
        }
        m
    }
}

fn check_index(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(String::from("trace index must be at least 1")));
    }
    Ok(())
}

/// `h_1(x), ..., h_n(x)` at `bits`, with λ rounded to the same precision.
pub fn trace_values_at(n: u32, x: &Real, params: &ModelParams, bits: usize) -> Result<Vec<Real>> {
    check_index(n)?;
    let x = x.with_precision(bits);
    let lambda = params.lambda(bits);
    let two = Real::from_i64(2, bits);
    let x2 = x.square();
    let l2 = lambda.square();
    let mut out = Vec::with_capacity(n as usize);
    out.push(&(&x2 - &l2) - &two);
    if n >= 2 {
        let h2 = &(&(&x2 - &l2).square() - &x2.mul_pow2(2)) + &two;
        out.push(h2);
    }
    for k in 2..n as usize {
        let next = &(&out[k - 2].square() * &(&out[k - 1] - &two)) + &two;
        if !next.is_finite() {
            return Err(Error::Overflow { n: k as u32 + 1 });
        }
        out.push(next);
    }
    if !out[0].is_finite() || out.get(1).is_some_and(|h| !h.is_finite()) {
        return Err(Error::Overflow { n: 1 });
    }
    Ok(out)
}

/// `h_1(x), ..., h_n(x)` at the working precision.
pub fn trace_values(n: u32, x: &Real, params: &ModelParams) -> Result<Vec<Real>> {
    trace_values_at(n, x, params, params.precision_bits)
}

/// `h_n(x)` by the recurrence at `bits`.
pub fn eval_trace_at(n: u32, x: &Real, params: &ModelParams, bits: usize) -> Result<Real> {
    check_index(n)?;
    let x = x.with_precision(bits);
    let lambda = params.lambda(bits);
    let two = Real::from_i64(2, bits);
    let x2 = x.square();
    let l2 = lambda.square();
    let h1 = &(&x2 - &l2) - &two;
    if n == 1 {
        return finite(h1, 1);
    }
    let mut prev = h1;
    let mut cur = &(&(&x2 - &l2).square() - &x2.mul_pow2(2)) + &two;
    for k in 2..n {
        let next = &(&prev.square() * &(&cur - &two)) + &two;
        if !next.is_finite() {
            return Err(Error::Overflow { n: k + 1 });
        }
        prev = cur;
        cur = next;
    }
    finite(cur, n)
}

fn finite(v: Real, n: u32) -> Result<Real> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow { n })
    }
}

/// `h_n(x)` by the recurrence at the working precision.
pub fn eval_trace(n: u32, x: &Real, params: &ModelParams) -> Result<Real> {
    eval_trace_at(n, x, params, params.precision_bits)
}

/// `h_n(x)` accepted under the dual-precision rule, with the guard floor for
/// index `n`. Returns the value and the precision `p` of the accepted pair.
pub fn certified_trace(n: u32, x: &Real, params: &ModelParams) -> Result<(Real, usize)> {
    let ladder = params.ladder().with_floor(trace_floor(n, params.precision_bits));
    let eps = ladder.half_precision_eps();
    let one = Real::one(64);
    ladder.run("trace evaluation", |p| eval_trace_at(n, x, params, p), |lo, hi| agree(lo, hi, &one, &eps))
}

/// Trace of `τ(σ^n(a))` as a matrix product; `n = 0` gives `x - λ`.
pub fn eval_trace_oracle(n: u32, x: &Real, params: &ModelParams) -> Result<Real> {
    eval_trace_oracle_with(n, x, params, ProductOrder::Reversed)
}

pub fn eval_trace_oracle_with(n: u32, x: &Real, params: &ModelParams, order: ProductOrder) -> Result<Real> {
    if n > MAX_ORACLE_DEPTH {
        return Err(Error::SizeLimit { what: "oracle depth", value: n as u64, max: MAX_ORACLE_DEPTH as u64 });
    }
    let bits = params.precision_bits;
    let word = tm_word(n)?;
    let m = TransferMatrix::product(&word, &x.with_precision(bits), &params.lambda(bits), order);
    finite(m.trace(), n)
}

/// Jets of `h_1, h_2, ...` in the variable `u = scale (x - center)`.
///
/// The iterator is infinite; entries that overflowed have non-finite
/// coefficients.
#[derive(Debug, Clone)]
pub struct TraceJets {
    prev: Option<Jet>,
    cur: Option<Jet>,
    seeds: [Option<Jet>; 2],
    two: Real,
}

impl TraceJets {
    pub fn new(center: &Real, scale: &Real, order: usize, params: &ModelParams, bits: usize) -> Self {
        let center = center.with_precision(bits);
        let scale = scale.with_precision(bits);
        let x = Jet::identity(order, &center, &scale, bits);
        let l2 = params.lambda(bits).square();
        let two = Real::from_i64(2, bits);
        let x2 = x.square();
        let shifted = x2.add_scalar(&-&l2);
        let h1 = shifted.add_scalar(&-&two);
        let h2 = shifted.square().sub(&x2.scale_by(&Real::from_i64(4, bits))).add_scalar(&two);
        TraceJets { prev: None, cur: None, seeds: [Some(h1), Some(h2)], two }
    }
}

impl Iterator for TraceJets {
    type Item = Jet;

    fn next(&mut self) -> Option<Jet> {
        for seed in &mut self.seeds {
            if let Some(j) = seed.take() {
                self.prev = self.cur.take();
                self.cur = Some(j.clone());
                return Some(j);
            }
        }
        let prev = self.prev.as_ref()?;
        let cur = self.cur.as_ref()?;
        let next = prev.square().mul(&cur.add_scalar(&-&self.two)).add_scalar(&self.two);
        self.prev = self.cur.replace(next.clone());
        Some(next)
    }
}

/// Jet of `h_n` in `u = scale (x - center)` to the given order at `bits`.
pub fn trace_jet_scaled(
    n: u32,
    center: &Real,
    scale: &Real,
    order: usize,
    params: &ModelParams,
    bits: usize,
) -> Result<Jet> {
    check_index(n)?;
    let jet = TraceJets::new(center, scale, order, params, bits).nth(n as usize - 1).expect("trace jets are infinite");
    if jet.is_finite() {
        Ok(jet)
    } else {
        Err(Error::Overflow { n })
    }
}

/// Taylor jet of `h_n` at `center`: coefficient `k` multiplies `(x - center)^k`.
pub fn trace_jet(n: u32, center: &Real, order: usize, params: &ModelParams) -> Result<Jet> {
    if order < 2 {
        return Err(Error::InvalidArgument(format!("jet order must be at least 2, got {order}")));
    }
    let bits = params.precision_bits;
    trace_jet_scaled(n, center, &Real::one(bits), order, params, bits)
}
