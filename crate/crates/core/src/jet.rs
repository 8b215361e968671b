//! Truncated power series around a center.
//!
//! A [`Jet`] of order `N` stores `N + 1` coefficients of a series in the
//! variable `u = scale * (x - center)`. Raw Taylor jets use `scale = 1`; the
//! rescaled jets used for germ certificates use the germ's scaling factor.
//! Multiplication is plain truncated convolution at working precision with no
//! tail bound.

use alloc::vec;
use alloc::vec::Vec;

use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub center: Real,
    pub scale: Real,
    coeffs: Vec<Real>,
}

impl Jet {
    /// # Panics
    /// If `coeffs` is empty.
    pub fn from_coeffs(center: Real, scale: Real, coeffs: Vec<Real>) -> Self {
        assert!(!coeffs.is_empty(), "a jet has at least one coefficient");
        Jet { center, scale, coeffs }
    }

    pub fn constant(c: &Real, order: usize, center: &Real, scale: &Real) -> Self {
        let bits = c.precision();
        let mut coeffs = vec![Real::zero(bits); order + 1];
        coeffs[0] = c.clone();
        Jet { center: center.clone(), scale: scale.clone(), coeffs }
    }

    /// The coordinate `x = center + u / scale` as a jet in `u`.
    pub fn identity(order: usize, center: &Real, scale: &Real, bits: usize) -> Self {
        let mut coeffs = vec![Real::zero(bits); order + 1];
        coeffs[0] = center.with_precision(bits);
        if order >= 1 {
            coeffs[1] = &Real::one(bits) / &scale.with_precision(bits);
        }
        Jet { center: center.clone(), scale: scale.clone(), coeffs }
    }

    /// `2 cos(u)` to the given order.
    pub fn two_cos(order: usize, bits: usize) -> Self {
        let mut coeffs = vec![Real::zero(bits); order + 1];
        let mut term = Real::from_i64(2, bits);
        for n in (0..=order).step_by(2) {
            coeffs[n] = term.clone();
            let step = Real::from_i64(((n + 1) * (n + 2)) as i64, bits);
            term = -(&term / &step);
        }
        Jet { center: Real::zero(bits), scale: Real::one(bits), coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Real] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> &Real {
        &self.coeffs[n]
    }

    pub fn precision(&self) -> usize {
        self.coeffs[0].precision()
    }

    pub fn into_coeffs(self) -> Vec<Real> {
        self.coeffs
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(&Real, &Real) -> Real) -> Jet {
        let order = self.order().min(other.order());
        let coeffs = (0..=order).map(|n| f(&self.coeffs[n], &other.coeffs[n])).collect();
        Jet { center: self.center.clone(), scale: self.scale.clone(), coeffs }
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add_scalar(&self, c: &Real) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] = &out.coeffs[0] + c;
        out
    }

    pub fn scale_by(&self, c: &Real) -> Jet {
        let coeffs = self.coeffs.iter().map(|a| a * c).collect();
        Jet { center: self.center.clone(), scale: self.scale.clone(), coeffs }
    }

    /// Truncated product, order `min(self.order, other.order)`.
    pub fn mul(&self, other: &Jet) -> Jet {
        let order = self.order().min(other.order());
        let bits = self.precision().max(other.precision());
        let mut coeffs = Vec::with_capacity(order + 1);
        for n in 0..=order {
            let mut acc = Real::zero(bits);
            for i in 0..=n {
                let (a, b) = (&self.coeffs[i], &other.coeffs[n - i]);
                if a.is_zero() || b.is_zero() {
                    continue;
                }
                acc = &acc + &(a * b);
            }
            coeffs.push(acc);
        }
        Jet { center: self.center.clone(), scale: self.scale.clone(), coeffs }
    }

    /// Truncated square using the symmetric half of the convolution.
    pub fn square(&self) -> Jet {
        let order = self.order();
        let bits = self.precision();
        let mut coeffs = Vec::with_capacity(order + 1);
        for n in 0..=order {
            let mut acc = Real::zero(bits);
            for i in 0..n.div_ceil(2) {
                let (a, b) = (&self.coeffs[i], &self.coeffs[n - i]);
                if a.is_zero() || b.is_zero() {
                    continue;
                }
                acc = &acc + &(a * b);
            }
            acc = acc.mul_pow2(1);
            if n % 2 == 0 {
                acc = &acc + &self.coeffs[n / 2].square();
            }
            coeffs.push(acc);
        }
        Jet { center: self.center.clone(), scale: self.scale.clone(), coeffs }
    }

    /// Substitutes `u -> 2^e u`: coefficient `n` is multiplied by `2^(e n)`.
    /// The variable's scale is divided by `2^e` accordingly.
    pub fn rescale_pow2(&self, e: i64) -> Jet {
        let coeffs = self.coeffs.iter().enumerate().map(|(n, c)| c.mul_pow2(e * n as i64)).collect();
        Jet { center: self.center.clone(), scale: self.scale.mul_pow2(-e), coeffs }
    }

    /// Keeps the first `order + 1` coefficients.
    pub fn truncate(&self, order: usize) -> Jet {
        let keep = (order + 1).min(self.coeffs.len());
        Jet { center: self.center.clone(), scale: self.scale.clone(), coeffs: self.coeffs[..keep].to_vec() }
    }

    pub fn with_precision(&self, bits: usize) -> Jet {
        Jet {
            center: self.center.clone(),
            scale: self.scale.clone(),
            coeffs: self.coeffs.iter().map(|c| c.with_precision(bits)).collect(),
        }
    }

    /// Horner evaluation at `u`.
    pub fn eval(&self, u: &Real) -> Real {
        let mut acc = Real::zero(self.precision());
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * u) + c;
        }
        acc
    }

    pub fn max_abs(&self) -> Real {
        let mut m = Real::zero(self.precision());
        for c in &self.coeffs {
            let a = c.abs();
            if a > m {
                m = a;
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(Real::is_finite)
    }
}
