//! The nested interval tree and its dimension bound.
//!
//! `I_∅ = [a_∅, b_∅]` with `b_∅` the first zero of `h_{K+5}` after `a_∅`. A
//! node `I_w` of generation `g` is cut with `h_n`, `n = (g+2)K + 5`: `b_{w0}`
//! is the first zero of `h_n` after `a_w` and `a_{w1}` the last zero before
//! `b_w`. Each child is expected to keep at least `2.1^-K` of its parent.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Pow;

use crate::error::{Error, Result};
use crate::germ::{base_germ_at, closeness_at, germ_from_zero, Closeness, Germ, RegularityReport};
use crate::real::Real;
use crate::rootfind::{certified_sign, directional_zero, working_bits, Direction, Enclosure, Minimality, ScanPolicy};
use crate::tracepoly::{eval_trace_at, ModelParams};

/// Schedule constant used for the full construction.
pub const FULL_SCHEDULE_K: u32 = 140;

/// Localization tolerance `δ0` for directional zeros.
pub const LOCALIZATION_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Side {
    /// `[a_∅, b_∅]` to the right of `a_∅ = sqrt(2 + λ²)`.
    #[default]
    Right,
    /// The mirror image, to the left of `-a_∅`.
    Left,
}

/// A tree endpoint: a certified zero and the germ it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint {
    pub enclosure: Enclosure,
    pub germ: Germ,
}

impl Endpoint {
    pub fn point(&self) -> Real {
        self.enclosure.midpoint()
    }

    /// Index of the polynomial this endpoint is a zero of.
    pub fn index(&self) -> u32 {
        self.enclosure.n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeFlag {
    /// A child ratio is below `2.1^-K`; `child` is 0 or 1.
    RatioBelowBound { child: u8 },
    /// The children do not leave a positive gap.
    GapNotPositive,
    /// The cut could not be computed.
    SplitFailed(String),
    /// An endpoint pair failed the strong prefix certificate; `endpoint` is 0
    /// for `a`, 1 for `b`.
    CascadeFailed { endpoint: u8, level: Closeness },
    /// An endpoint's sign certificate did not survive precision doubling.
    EndpointUnverified { endpoint: u8 },
}

/// Closeness of `(h_{n-1}, h_n)`, `n = (g+2)K + 5`, at both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeCheck {
    pub index: u32,
    pub levels: [Closeness; 2],
    pub reports: [RegularityReport; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CantorNode {
    /// Binary word over `{0, 1}`.
    pub word: String,
    pub gen: u32,
    pub a: Endpoint,
    pub b: Endpoint,
    /// Index of the polynomial that produced this node's newest endpoint.
    pub poly_index: u32,
    /// `|I_{w0}| / |I_w|` once split.
    pub left_ratio: Option<Real>,
    /// `|I_{w1}| / |I_w|` once split.
    pub right_ratio: Option<Real>,
    /// `a_{w1} - b_{w0}` once split.
    pub gap: Option<Real>,
    /// Positions of the children in [`CantorTree::nodes`].
    pub children: Option<(usize, usize)>,
    pub cascade: Option<CascadeCheck>,
    pub flags: Vec<NodeFlag>,
}

impl CantorNode {
    pub fn length(&self) -> Real {
        &self.b.point() - &self.a.point()
    }

    /// Shortest bracket among the two endpoint enclosures.
    pub fn endpoint_width(&self) -> Real {
        self.a.enclosure.width().max(&self.b.enclosure.width())
    }

    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

/// `2.1^-K` as an exact rational.
pub fn ratio_bound_exact(k: u32) -> BigRational {
    Pow::pow(BigRational::new(BigInt::from(10), BigInt::from(21)), k)
}

pub fn ratio_bound(k: u32, bits: usize) -> Real {
    Real::from_rational(&ratio_bound_exact(k), bits)
}

/// Smallest base precision accepted for a tree: `128 + 2K(depth + 2)`.
pub fn required_precision(k: u32, depth: u32) -> usize {
    128 + 2 * (k as usize) * (depth as usize + 2)
}

/// Index of the polynomial cutting generation `gen`.
pub fn cut_index(k: u32, gen: u32) -> u32 {
    (gen + 2) * k + 5
}

/// Endpoint refinement width that keeps `s (x - x0)` below `2^-(P/2)` for
/// germ scales up to generation `depth + 2`.
pub fn endpoint_width(params: &ModelParams, k: u32, depth: u32) -> Real {
    let bits = params.precision_bits;
    let tau2 = crate::germ::tau_at(params, bits).mul_pow2(1);
    let s_deep = tau2.mul_pow2(((depth + 2) * k) as i64);
    let q = &Real::pi(bits).mul_pow2(-1) / &s_deep;
    q.mul_pow2(-((bits / 2) as i64))
}

fn check_k(k: u32) -> Result<()> {
    if k < 4 {
        return Err(Error::InvalidArgument(format!("schedule constant K must be at least 4, got {k}")));
    }
    Ok(())
}

fn initial_endpoint(params: &ModelParams, side: Side) -> Result<Endpoint> {
    let bits = working_bits(1, params);
    let mut germ = base_germ_at(params, bits);
    if side == Side::Left {
        germ.x0 = -&germ.x0;
    }
    let radius = germ.x0.abs().mul_pow2(-(bits as i64 - 8));
    let mut enclosure = Enclosure::around(1, &germ.x0, &radius, params);
    let s_lo = certified_sign(1, &enclosure.lo, params)?;
    let s_hi = certified_sign(1, &enclosure.hi, params)?;
    enclosure.certified = s_lo != s_hi;
    enclosure.precision_bits = bits;
    germ.x0_radius = radius;
    Ok(Endpoint { enclosure, germ })
}

/// `|s |t - x0| - π/2| ≤ δ0` at the enclosure midpoint `t`.
pub fn is_localized(enclosure: &Enclosure, x0: &Real, s: &Real) -> bool {
    let bits = s.precision();
    let reach = (&(&enclosure.midpoint() - x0).abs() * s).with_precision(bits);
    let off = (&reach - &Real::pi(bits).mul_pow2(-1)).abs();
    off <= Real::from_f64(LOCALIZATION_TOL, bits)
}

/// Finds the zero of `h_n` next to `from` in `direction`, bounded by `bound`,
/// and generates its germ.
fn cut(
    n: u32,
    from: &Endpoint,
    direction: Direction,
    bound: Option<&Real>,
    params: &ModelParams,
    policy: &ScanPolicy,
    localize: bool,
) -> Result<Endpoint> {
    let k = n as i64 - from.germ.pair.1 as i64;
    let s = from.germ.scale(k);
    let x0 = from.point();
    let mut enclosure = directional_zero(n, &x0, direction, &s, bound, params, policy)?;
    if localize && is_localized(&enclosure, &x0, &s) {
        enclosure.minimality = Minimality::Localized;
    }
    let germ = germ_from_zero(n, &enclosure, params)?;
    Ok(Endpoint { enclosure, germ })
}

/// `I_∅` for the given side.
pub fn build_root(params: &ModelParams, k: u32, side: Side, policy: &ScanPolicy) -> Result<CantorNode> {
    check_k(k)?;
    let n = cut_index(k, 0) - k;
    let start = initial_endpoint(params, side)?;
    let (a, b) = match side {
        Side::Right => {
            let b = cut(n, &start, Direction::After, None, params, policy, false)?;
            (start, b)
        }
        Side::Left => {
            let a = cut(n, &start, Direction::Before, None, params, policy, false)?;
            (a, start)
        }
    };
    let mut flags = Vec::new();
    if !a.enclosure.certified {
        flags.push(NodeFlag::EndpointUnverified { endpoint: 0 });
    }
    if !b.enclosure.certified {
        flags.push(NodeFlag::EndpointUnverified { endpoint: 1 });
    }
    Ok(CantorNode {
        word: String::new(),
        gen: 0,
        a,
        b,
        poly_index: n,
        left_ratio: None,
        right_ratio: None,
        gap: None,
        children: None,
        cascade: None,
        flags,
    })
}

/// Closeness of the pair ending at `h_n` at both endpoints of `node`.
pub fn cascade_check(node: &CantorNode, n: u32, order: usize, params: &ModelParams) -> Result<CascadeCheck> {
    let mut levels = [Closeness::None; 2];
    let mut reports = Vec::with_capacity(2);
    for (i, e) in [&node.a, &node.b].into_iter().enumerate() {
        let k = n as i64 - e.germ.pair.1 as i64;
        let (level, report) = closeness_at(&e.germ, k, order, params)?;
        levels[i] = level;
        reports.push(report);
    }
    let reports: [RegularityReport; 2] = reports.try_into().expect("two endpoints");
    Ok(CascadeCheck { index: n, levels, reports })
}

/// Result of cutting one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub left: CantorNode,
    pub right: CantorNode,
    pub left_ratio: Real,
    pub right_ratio: Real,
    pub gap: Real,
    pub flags: Vec<NodeFlag>,
}

/// Cuts `node` with `h_{(g+2)K+5}`. When `localize` is set, the new
/// endpoints' minimality is upgraded if they sit within `δ0` of the predicted
/// quarter period.
pub fn split_node(
    node: &CantorNode,
    params: &ModelParams,
    k: u32,
    policy: &ScanPolicy,
    localize: bool,
) -> Result<Split> {
    check_k(k)?;
    let n = cut_index(k, node.gen);
    let b0 = cut(n, &node.a, Direction::After, Some(&node.b.point()), params, policy, localize)?;
    let a1 = cut(n, &node.b, Direction::Before, Some(&node.a.point()), params, policy, localize)?;
    let len = node.length();
    let left_len = &b0.point() - &node.a.point();
    let right_len = &node.b.point() - &a1.point();
    let left_ratio = &left_len / &len;
    let right_ratio = &right_len / &len;
    let gap = &a1.enclosure.lo - &b0.enclosure.hi;
    let bound = ratio_bound(k, left_ratio.precision());
    let mut flags = Vec::new();
    if left_ratio < bound {
        flags.push(NodeFlag::RatioBelowBound { child: 0 });
    }
    if right_ratio < bound {
        flags.push(NodeFlag::RatioBelowBound { child: 1 });
    }
    if !gap.is_positive() {
        flags.push(NodeFlag::GapNotPositive);
    }
    let child = |suffix: char, a: Endpoint, b: Endpoint| {
        let mut word = node.word.clone();
        word.push(suffix);
        CantorNode {
            word,
            gen: node.gen + 1,
            a,
            b,
            poly_index: n,
            left_ratio: None,
            right_ratio: None,
            gap: None,
            children: None,
            cascade: None,
            flags: Vec::new(),
        }
    };
    let left = child('0', node.a.clone(), b0);
    let right = child('1', a1, node.b.clone());
    Ok(Split { left, right, left_ratio, right_ratio, gap, flags })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeOptions {
    pub depth: u32,
    pub side: Side,
    /// Jet order for the regularity cascade; `None` skips it.
    pub certify_order: Option<usize>,
    pub policy: ScanPolicy,
}

impl Default for TreeOptions {
    fn default() -> Self {
        TreeOptions { depth: 2, side: Side::Right, certify_order: None, policy: ScanPolicy::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CantorTree {
    pub k: u32,
    pub depth: u32,
    pub side: Side,
    pub params: ModelParams,
    /// Breadth-first; the root is at position 0.
    pub nodes: Vec<CantorNode>,
    /// Closeness of `(h_{K+4}, h_{K+5})` at the initial point.
    pub root_closeness: Option<(Closeness, RegularityReport)>,
    /// `K` is below the full schedule, so the regularity guarantees behind
    /// the ratio bound do not apply.
    pub exploratory: bool,
}

impl CantorTree {
    pub fn root(&self) -> &CantorNode {
        &self.nodes[0]
    }

    pub fn flagged(&self) -> impl Iterator<Item = &CantorNode> {
        self.nodes.iter().filter(|n| n.is_flagged())
    }

    pub fn is_clean(&self) -> bool {
        self.flagged().next().is_none()
    }

    /// Every recorded split ratio, in node order (left child first).
    pub fn ratios(&self) -> Vec<Real> {
        let mut out = Vec::new();
        for n in &self.nodes {
            out.extend(n.left_ratio.iter().cloned());
            out.extend(n.right_ratio.iter().cloned());
        }
        out
    }

    /// Distinct endpoint positions, ascending.
    pub fn endpoints(&self) -> Vec<Real> {
        let mut pts: Vec<Real> = Vec::new();
        for n in &self.nodes {
            pts.push(n.a.point());
            pts.push(n.b.point());
        }
        pts.sort_by(|x, y| x.partial_cmp(y).expect("finite endpoints"));
        pts.dedup();
        pts
    }

    /// One box scale per pair of consecutive generations: the geometric mean
    /// of their mean interval lengths.
    pub fn generation_scales(&self) -> Vec<Real> {
        let means: Vec<Real> = (0..=self.depth)
            .filter_map(|g| {
                let lens: Vec<Real> = self.nodes.iter().filter(|n| n.gen == g).map(CantorNode::length).collect();
                let first = lens.first()?.clone();
                let sum = lens[1..].iter().fold(first, |acc, l| &acc + l);
                Some(&sum / &Real::from_i64(lens.len() as i64, sum.precision()))
            })
            .collect();
        means.windows(2).map(|w| (&w[0] * &w[1]).sqrt()).collect()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &CantorNode> {
        self.nodes.iter().filter(|n| n.children.is_none())
    }
}

/// Builds the tree to `opts.depth` generations.
///
/// Requires `params.precision_bits ≥ 128 + 2K(depth + 2)`. A node whose cut
/// fails stays a leaf with [`NodeFlag::SplitFailed`].
pub fn build_tree(params: &ModelParams, k: u32, opts: &TreeOptions) -> Result<CantorTree> {
    check_k(k)?;
    let need = required_precision(k, opts.depth);
    if params.precision_bits < need {
        return Err(Error::InvalidArgument(format!(
            "tree of depth {} with K = {k} needs at least {need} bits, got {}",
            opts.depth, params.precision_bits
        )));
    }
    let mut policy = opts.policy.clone();
    if policy.target_width.is_none() {
        policy.target_width = Some(endpoint_width(params, k, opts.depth));
    }
    let root = build_root(params, k, opts.side, &policy)?;
    let root_closeness = match opts.certify_order {
        Some(order) => {
            let at = match opts.side {
                Side::Right => &root.a,
                Side::Left => &root.b,
            };
            Some(closeness_at(&at.germ, k as i64, order, params)?)
        }
        None => None,
    };
    let mut root = root;
    if root_closeness.as_ref().is_some_and(|(level, _)| *level >= Closeness::Close) {
        let (from, new) = match opts.side {
            Side::Right => (&root.a, &root.b),
            Side::Left => (&root.b, &root.a),
        };
        let s = from.germ.scale(k as i64);
        if is_localized(&new.enclosure, &from.point(), &s) {
            let hit = match opts.side {
                Side::Right => &mut root.b,
                Side::Left => &mut root.a,
            };
            hit.enclosure.minimality = Minimality::Localized;
        }
    }
    let mut nodes = alloc::vec![root];
    let mut i = 0;
    while i < nodes.len() {
        let gen = nodes[i].gen;
        let n = cut_index(k, gen);
        let mut localize = false;
        if let Some(order) = opts.certify_order {
            let check = cascade_check(&nodes[i], n, order, params)?;
            for (e, level) in check.levels.iter().enumerate() {
                if *level < Closeness::Strong {
                    nodes[i].flags.push(NodeFlag::CascadeFailed { endpoint: e as u8, level: *level });
                }
            }
            localize = check.levels.iter().all(|l| *l >= Closeness::Close);
            nodes[i].cascade = Some(check);
        }
        if gen < opts.depth {
            match split_node(&nodes[i], params, k, &policy, localize) {
                Ok(split) => {
                    let at = nodes.len();
                    let node = &mut nodes[i];
                    node.left_ratio = Some(split.left_ratio);
                    node.right_ratio = Some(split.right_ratio);
                    node.gap = Some(split.gap);
                    node.flags.extend(split.flags);
                    node.children = Some((at, at + 1));
                    nodes.push(split.left);
                    nodes.push(split.right);
                }
                Err(e) => nodes[i].flags.push(NodeFlag::SplitFailed(format!("{e}"))),
            }
        }
        i += 1;
    }
    Ok(CantorTree {
        k,
        depth: opts.depth,
        side: opts.side,
        params: params.clone(),
        nodes,
        root_closeness,
        exploratory: k < FULL_SCHEDULE_K,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionReport {
    pub k: u32,
    pub depth: u32,
    pub min_ratio: Real,
    /// `ln 2 / (K ln 2.1)`.
    pub theoretical_bound: Real,
    /// `ln 2 / (-ln min_ratio)`; withheld when any gap check failed.
    pub empirical_bound: Option<Real>,
    pub all_ratios_pass: bool,
    pub gaps_positive: bool,
    pub exploratory: bool,
}

/// Precision of the logarithms in [`DimensionReport`].
pub const REPORT_BITS: usize = 256;

/// `ln 2 / (K ln 2.1)` at `bits`.
pub fn theoretical_bound(k: u32, bits: usize) -> Real {
    let ln2 = Real::from_i64(2, bits).ln();
    let ln21 = Real::parse("2.1", bits).expect("literal").ln();
    &ln2 / &(&Real::from_i64(k as i64, bits) * &ln21)
}

/// `ln 2 / (-ln r)`.
pub fn empirical_bound(min_ratio: &Real, bits: usize) -> Real {
    let ln2 = Real::from_i64(2, bits).ln();
    &ln2 / &(-min_ratio.with_precision(bits).ln())
}

pub fn dimension_report(tree: &CantorTree) -> Result<DimensionReport> {
    if tree.depth == 0 {
        return Err(Error::InvalidArgument(String::from("dimension report needs a tree of depth at least 1")));
    }
    let ratios = tree.ratios();
    let Some(first) = ratios.first() else {
        return Err(Error::InvalidArgument(String::from("tree has no recorded splits")));
    };
    let min_ratio = ratios.iter().fold(first.clone(), |m, r| m.min(r));
    let bound = ratio_bound(tree.k, min_ratio.precision());
    let all_ratios_pass = ratios.iter().all(|r| *r >= bound);
    let gaps_positive = tree.nodes.iter().filter_map(|n| n.gap.as_ref()).all(Real::is_positive);
    let empirical = (gaps_positive && min_ratio.is_positive()).then(|| empirical_bound(&min_ratio, REPORT_BITS));
    Ok(DimensionReport {
        k: tree.k,
        depth: tree.depth,
        min_ratio,
        theoretical_bound: theoretical_bound(tree.k, REPORT_BITS),
        empirical_bound: empirical,
        all_ratios_pass,
        gaps_positive,
        exploratory: tree.exploratory,
    })
}

/// `count` evenly spaced samples `(x, h_m(x))` across `node`, `m` its newest
/// endpoint index.
pub fn node_samples(node: &CantorNode, params: &ModelParams, count: usize) -> Result<Vec<(Real, Real)>> {
    let m = node.poly_index;
    let bits = working_bits(m, params);
    let a = node.a.point().with_precision(bits);
    let len = node.length().with_precision(bits);
    let steps = count.max(2) - 1;
    (0..=steps)
        .map(|i| {
            let x = &a + &(&len * &(&Real::from_i64(i as i64, bits) / &Real::from_i64(steps as i64, bits)));
            let y = eval_trace_at(m, &x, params, bits)?;
            Ok((x, y))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_and_schedule() {
        assert_eq!(required_precision(140, 2), 1248);
        assert_eq!(cut_index(140, 0), 285);
        let t = theoretical_bound(140, 256).to_f64();
        assert!((t - 0.006_673_1).abs() < 1e-7);
        let r = ratio_bound(140, 256);
        let e = empirical_bound(&r, 256);
        assert!((&e - &theoretical_bound(140, 256)).abs() < Real::one(64).mul_pow2(-200));
    }

    #[test]
    fn small_tree_nests() {
        let params = ModelParams::from_integer(3, 256).unwrap();
        let tree = build_tree(&params, 6, &TreeOptions { depth: 2, ..TreeOptions::default() }).unwrap();
        assert_eq!(tree.nodes.len(), 7);
        assert!(tree.exploratory);
        for node in &tree.nodes {
            assert!(node.a.point() < node.b.point());
            if let Some((l, r)) = node.children {
                let (l, r) = (&tree.nodes[l], &tree.nodes[r]);
                assert_eq!(l.a, node.a);
                assert_eq!(r.b, node.b);
                assert!(l.b.point() < r.a.point());
            }
        }
        let left =
            build_tree(&params, 6, &TreeOptions { depth: 1, side: Side::Left, ..TreeOptions::default() }).unwrap();
        let right = build_tree(&params, 6, &TreeOptions { depth: 1, ..TreeOptions::default() }).unwrap();
        let d = &left.root().a.point() + &right.root().b.point();
        assert!(d.abs() < Real::one(64).mul_pow2(-100));
    }

    #[test]
    fn precision_precondition() {
        let params = ModelParams::from_integer(3, 256).unwrap();
        assert!(build_tree(&params, 140, &TreeOptions::default()).is_err());
    }
}
