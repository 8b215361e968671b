//! Approximant bands `{|h_n| ≤ 2}`, samples of the zero set and box counting.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::precision::{agree, Ladder};
use crate::real::{Real, Sign};
use crate::rootfind::{isolate_zeros, working_bits, Enclosure, ScanPolicy};
use crate::tracepoly::{eval_trace_at, trace_jet_scaled, ModelParams};

/// Fewest grid points accepted by [`approximant_bands`].
pub const MIN_RESOLUTION: usize = 256;
/// Highest level accepted by [`sigma_points`].
pub const MAX_SIGMA_LEVEL: u32 = 14;

/// A maximal closed interval on which `|h_n| ≤ 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub n: u32,
    pub lo: Real,
    pub hi: Real,
    /// Interior points where `|h_n|` touches 2 with zero derivative.
    pub tangencies: Vec<Real>,
    /// The band runs into the window's left edge.
    pub clipped_lo: bool,
    /// The band runs into the window's right edge.
    pub clipped_hi: bool,
    /// An edge could not be resolved and was moved outward to the last
    /// certified outside point.
    pub widened: bool,
}

impl Band {
    pub fn contains(&self, x: &Real, tol: &Real) -> bool {
        &(&self.lo - tol) <= x && x <= &(&self.hi + tol)
    }
}

struct Sampler<'a> {
    n: u32,
    params: &'a ModelParams,
    bits: usize,
    ladder: Ladder,
    eps: Real,
    two: Real,
}

impl<'a> Sampler<'a> {
    fn new(n: u32, params: &'a ModelParams) -> Self {
        let bits = working_bits(n, params);
        let ladder = params.ladder().with_floor(bits);
        Sampler {
            n,
            params,
            bits,
            eps: Real::one(64).mul_pow2(-((params.precision_bits / 2) as i64)),
            two: Real::from_i64(2, bits),
            ladder,
        }
    }

    fn value(&self, x: &Real) -> Result<Real> {
        eval_trace_at(self.n, x, self.params, self.bits)
    }

    /// `|h_n(x)| - 2` accepted under the dual-precision rule.
    fn excess(&self, x: &Real) -> Result<Real> {
        let eps = self.ladder.half_precision_eps();
        let one = Real::one(64);
        let (v, _) = self.ladder.run(
            "band edge",
            |p| Ok(&eval_trace_at(self.n, x, self.params, p)?.abs() - &Real::from_i64(2, p)),
            |a, b| agree(a, b, &one, &eps),
        )?;
        Ok(v)
    }

    fn slope_sign(&self, x: &Real) -> Result<Sign> {
        let jet = trace_jet_scaled(self.n, x, &Real::one(self.bits), 2, self.params, self.bits)?;
        Ok(jet.coeff(1).signum())
    }

    /// Edge between an inside point and an outside point, returned on the
    /// outside (closed band). `widened` if the excess could not be certified.
    fn edge(&self, inside: &Real, outside: &Real) -> Result<(Real, bool)> {
        let (mut inn, mut out) = (inside.clone(), outside.clone());
        let floor = inn.abs().max(&Real::one(64)).mul_pow2(-(self.bits as i64 - 8));
        loop {
            match self.excess(&out) {
                Ok(g) if g <= self.eps => return Ok((out, false)),
                Ok(_) => {}
                Err(Error::Escalation { .. }) => return Ok((out, true)),
                Err(e) => return Err(e),
            }
            if (&out - &inn).abs() <= floor {
                return Ok((out, false));
            }
            let mid = (&inn + &out).mul_pow2(-1);
            match self.excess(&mid) {
                Ok(g) if g.is_positive() => out = mid,
                Ok(_) => inn = mid,
                Err(Error::Escalation { .. }) => return Ok((out, true)),
                Err(e) => return Err(e),
            }
        }
    }

    /// Zero of `h_n'` between two points of opposite slope.
    fn critical(&self, a: &Real, b: &Real, s_a: Sign) -> Result<Real> {
        let (mut lo, mut hi) = (a.clone(), b.clone());
        let floor = lo.abs().max(&Real::one(64)).mul_pow2(-(self.params.precision_bits as i64 / 2));
        while &hi - &lo > floor {
            let mid = (&lo + &hi).mul_pow2(-1);
            let s = self.slope_sign(&mid)?;
            if s == Sign::Zero {
                return Ok(mid);
            }
            if s == s_a {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((&lo + &hi).mul_pow2(-1))
    }
}

/// Bands of `h_n` on `window` from a grid of `resolution + 1` points.
///
/// Between grid points the only structure detected is a single critical
/// point of `h_n`: a maximum of `|h_n|` above 2 splits a band, one that
/// touches 2 is recorded as a tangency, and a minimum below 2 between two
/// outside points opens a narrow band.
pub fn approximant_bands(n: u32, window: (&Real, &Real), params: &ModelParams, resolution: usize) -> Result<Vec<Band>> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!("resolution must be at least {MIN_RESOLUTION}, got {resolution}")));
    }
    let sm = Sampler::new(n, params);
    let bits = sm.bits;
    let (a, b) = (window.0.with_precision(bits), window.1.with_precision(bits));
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::InvalidArgument(String::from("window must be finite and nonempty")));
    }
    let span = &b - &a;
    let denom = Real::from_i64(resolution as i64, bits);
    let xs: Vec<Real> = (0..=resolution)
        .map(|i| if i == resolution { b.clone() } else { &a + &(&(&span * &Real::from_i64(i as i64, bits)) / &denom) })
        .collect();
    let mut inside = Vec::with_capacity(xs.len());
    let mut slopes = Vec::with_capacity(xs.len());
    for x in &xs {
        inside.push(sm.value(x)?.abs() <= &sm.two + &sm.eps);
        slopes.push(sm.slope_sign(x)?);
    }

    let mut bands = Vec::new();
    let mut open: Option<Band> = None;
    let new_band = |lo: Real, clipped: bool, widened: bool| Band {
        n,
        lo: lo.clone(),
        hi: lo,
        tangencies: Vec::new(),
        clipped_lo: clipped,
        clipped_hi: false,
        widened,
    };
    if inside[0] {
        open = Some(new_band(a.clone(), true, false));
    }
    for i in 0..resolution {
        let (x, y) = (&xs[i], &xs[i + 1]);
        let critical = if slopes[i] == Sign::Zero && i > 0 {
            Some(x.clone())
        } else if slopes[i] != Sign::Zero && slopes[i + 1] != Sign::Zero && slopes[i] != slopes[i + 1] {
            Some(sm.critical(x, y, slopes[i])?)
        } else {
            None
        };
        let crit_excess = match &critical {
            Some(c) => Some(sm.value(c)?.abs() - sm.two.clone()),
            None => None,
        };
        match (inside[i], inside[i + 1]) {
            (true, true) => {
                if let (Some(c), Some(g)) = (&critical, &crit_excess) {
                    if g.abs() <= sm.eps {
                        open.as_mut().expect("band open").tangencies.push(c.clone());
                    } else if g.is_positive() {
                        let (hi, w1) = sm.edge(x, c)?;
                        let mut band = open.take().expect("band open");
                        band.hi = hi;
                        band.widened |= w1;
                        bands.push(band);
                        let (lo, w2) = sm.edge(y, c)?;
                        open = Some(new_band(lo, false, w2));
                    }
                }
            }
            (true, false) => {
                let (hi, w) = sm.edge(x, y)?;
                let mut band = open.take().expect("band open");
                band.hi = hi;
                band.widened |= w;
                bands.push(band);
            }
            (false, true) => {
                let (lo, w) = sm.edge(y, x)?;
                open = Some(new_band(lo, false, w));
            }
            (false, false) => {
                if let (Some(c), Some(g)) = (&critical, &crit_excess) {
                    if g.abs() <= sm.eps {
                        let mut band = new_band(c.clone(), false, false);
                        band.tangencies.push(c.clone());
                        bands.push(band);
                    } else if g.is_negative() {
                        let (lo, w1) = sm.edge(c, x)?;
                        let (hi, w2) = sm.edge(c, y)?;
                        let mut band = new_band(lo, false, w1 || w2);
                        band.hi = hi;
                        bands.push(band);
                    }
                }
            }
        }
    }
    if let Some(mut band) = open {
        band.hi = b.clone();
        band.clipped_hi = true;
        bands.push(band);
    }
    Ok(bands)
}

/// A zero of one or more `h_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPoint {
    pub enclosure: Enclosure,
    /// Every level whose enclosure overlapped this one, ascending.
    pub levels: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSample {
    pub points: Vec<SigmaPoint>,
    pub n_max: u32,
    pub window: (Real, Real),
}

/// Zeros of `h_1, ..., h_{n_max}` on `window`, merged where enclosures
/// overlap.
pub fn sigma_points(
    n_max: u32,
    window: (&Real, &Real),
    params: &ModelParams,
    policy: &ScanPolicy,
) -> Result<SigmaSample> {
    if n_max == 0 || n_max > MAX_SIGMA_LEVEL {
        return Err(Error::SizeLimit { what: "sigma level", value: n_max as u64, max: MAX_SIGMA_LEVEL as u64 });
    }
    let mut all: Vec<SigmaPoint> = Vec::new();
    for n in 1..=n_max {
        for enclosure in isolate_zeros(n, window, params, policy)? {
            all.push(SigmaPoint { enclosure, levels: alloc::vec![n] });
        }
    }
    all.sort_by(|p, q| p.enclosure.lo.partial_cmp(&q.enclosure.lo).expect("finite"));
    let mut merged: Vec<SigmaPoint> = Vec::new();
    for p in all {
        match merged.last_mut() {
            Some(last) if last.enclosure.overlaps(&p.enclosure) => {
                if p.enclosure.width() < last.enclosure.width() {
                    last.enclosure = p.enclosure;
                }
                last.levels.extend(p.levels);
                last.levels.sort_unstable();
                last.levels.dedup();
            }
            _ => merged.push(p),
        }
    }
    Ok(SigmaSample { points: merged, n_max, window: (window.0.clone(), window.1.clone()) })
}

impl SigmaSample {
    pub fn midpoints(&self) -> Vec<Real> {
        self.points.iter().map(|p| p.enclosure.midpoint()).collect()
    }
}

/// How `N(ε)` is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoxCounting {
    /// Occupied half-open boxes `[origin + iε, origin + (i+1)ε)`.
    #[default]
    Mesh,
    /// Fewest half-open intervals of length `ε` covering the points, found by
    /// a left-to-right sweep. Independent of grid alignment.
    MinimalCover,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxCountOptions {
    /// Smallest point set accepted.
    pub min_points: usize,
    /// Left edge of the box grid; defaults to the smallest point.
    pub origin: Option<Real>,
    pub method: BoxCounting,
}

impl Default for BoxCountOptions {
    fn default() -> Self {
        BoxCountOptions { min_points: 100, origin: None, method: BoxCounting::Mesh }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxDimension {
    /// Least-squares slope of `ln N(ε)` against `ln(1/ε)`.
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual of the fit.
    pub residual: f64,
    /// Slope with the grid shifted by half a box; equal to `slope` for
    /// [`BoxCounting::MinimalCover`].
    pub offset_slope: f64,
    /// `(ε, N(ε))` for each scale.
    pub counts: Vec<(Real, usize)>,
}

fn ln_real(x: &Real) -> f64 {
    let e = x.binary_exponent().unwrap_or(0) as i64;
    libm::log(x.mul_pow2(-e).to_f64()) + e as f64 * core::f64::consts::LN_2
}

fn count_boxes(sorted: &[Real], origin: &Real, eps: &Real) -> usize {
    let mut count = 0;
    let mut last: Option<Real> = None;
    for x in sorted {
        let idx = (&(x - origin) / eps).floor();
        if last.as_ref() != Some(&idx) {
            count += 1;
            last = Some(idx);
        }
    }
    count
}

fn minimal_cover(sorted: &[Real], eps: &Real) -> usize {
    let mut count = 0;
    let mut end: Option<Real> = None;
    for x in sorted {
        if end.as_ref().is_none_or(|e| x >= e) {
            count += 1;
            end = Some(x + eps);
        }
    }
    count
}

fn fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    (slope, intercept, libm::sqrt(rss / n))
}

/// Box-counting slope over the given scales. Needs at least four scales
/// spanning two decades.
pub fn box_dimension(points: &[Real], scales: &[Real], opts: &BoxCountOptions) -> Result<BoxDimension> {
    if points.len() < opts.min_points {
        return Err(Error::InvalidArgument(format!(
            "box counting needs at least {} points, got {}",
            opts.min_points,
            points.len()
        )));
    }
    if scales.len() < 4 || scales.iter().any(|s| !s.is_positive()) {
        return Err(Error::InvalidArgument(String::from("box counting needs at least four positive scales")));
    }
    let smallest = scales.iter().fold(scales[0].clone(), |m, s| m.min(s));
    let largest = scales.iter().fold(scales[0].clone(), |m, s| m.max(s));
    if ln_real(&largest) - ln_real(&smallest) < 2.0 * core::f64::consts::LN_10 {
        return Err(Error::InvalidArgument(String::from("scales must span at least two decades")));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    if sorted.first() == sorted.last() {
        return Err(Error::InvalidArgument(String::from("degenerate point set")));
    }
    let origin = opts.origin.clone().unwrap_or_else(|| sorted[0].clone());
    let xs: Vec<f64> = scales.iter().map(|e| -ln_real(e)).collect();
    let mut counts = Vec::with_capacity(scales.len());
    let mut ys = Vec::with_capacity(scales.len());
    let mut ys_off = Vec::with_capacity(scales.len());
    for eps in scales {
        let shifted = &origin - &eps.mul_pow2(-1);
        let (c, c_off) = match opts.method {
            BoxCounting::Mesh => (count_boxes(&sorted, &origin, eps), count_boxes(&sorted, &shifted, eps)),
            BoxCounting::MinimalCover => {
                let c = minimal_cover(&sorted, eps);
                (c, c)
            }
        };
        ys.push(libm::log(c as f64));
        ys_off.push(libm::log(c_off as f64));
        counts.push((eps.clone(), c));
    }
    let (slope, intercept, residual) = fit(&xs, &ys);
    let (offset_slope, _, _) = fit(&xs, &ys_off);
    Ok(BoxDimension { slope, intercept, residual, offset_slope, counts })
}

/// `count` scales from `hi` down to `lo`, evenly spaced in `ln`.
pub fn geometric_scales(hi: &Real, lo: &Real, count: usize) -> Vec<Real> {
    let bits = hi.precision().max(lo.precision());
    let count = count.max(2);
    let ratio = lo / hi;
    let step = libm::exp(ln_real(&ratio) / (count - 1) as f64);
    let mut e = hi.with_precision(bits);
    let factor = Real::from_f64(step, bits);
    (0..count)
        .map(|_| {
            let cur = e.clone();
            e = &e * &factor;
            cur
        })
        .collect()
}
