//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use tmtrace_core::cantor::{
    build_tree, dimension_report, is_localized, ratio_bound, required_precision, theoretical_bound, CantorTree,
    TreeOptions,
};
use tmtrace_core::germ::{
    base_germ, check_regularity, closeness_at, delta_chain, delta_pair, germ_from_zero, verify_constants, Closeness,
    GermOrigin,
};
use tmtrace_core::rootfind::{first_zero_after, isolate_zeros, ScanPolicy};
use tmtrace_core::spectrum::{box_dimension, BoxCountOptions, BoxCounting};
use tmtrace_core::tracepoly::{certified_trace, eval_trace, eval_trace_oracle};
use tmtrace_core::{ModelParams, Real};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn pow2(e: i64) -> Real {
    Real::one(64).mul_pow2(e)
}

fn oracle_equivalence() -> Outcome {
    let tol = pow2(-128);
    let mut worst = 0f64;
    for lambda in [0i64, 1, 3] {
        let params = ModelParams::from_integer(lambda, 256).map_err(err)?;
        let half = lambda + 3;
        for n in 1..=12u32 {
            for j in 1..=20i64 {
                // x = -half + 2 half f, f = (7919 j mod 1000) / 1000
                let f = rat((7919 * j + 37 * n as i64) % 1000, 1000);
                let xq = rat(-half, 1) + rat(2 * half, 1) * f;
                let x = Real::from_rational(&xq, 256);
                let fast = eval_trace(n, &x, &params).map_err(err)?;
                let slow = eval_trace_oracle(n, &x, &params).map_err(err)?;
                let rel = &(&fast - &slow).abs() / &slow.abs().max(&Real::one(256));
                worst = worst.max(rel.to_f64());
                ensure(rel <= tol, || format!("lambda {lambda}, n {n}, x {}: relative gap {}", x, rel))?;
            }
        }
    }
    Ok(format!("720 points, worst relative gap {worst:.3e}"))
}

fn zero_propagation() -> Outcome {
    let params = ModelParams::from_integer(3, 256).map_err(err)?;
    let (lo, hi) = (Real::from_i64(-6, 256), Real::from_i64(6, 256));
    let tol = Real::parse("1e-25", 256).map_err(err)?;
    let mut checked = 0;
    let mut worst = 0f64;
    for n in 1..=6u32 {
        let zeros = isolate_zeros(n, (&lo, &hi), &params, &ScanPolicy::default()).map_err(err)?;
        ensure(zeros.len() == 1usize << n, || format!("h_{n} has {} zeros on [-6, 6]", zeros.len()))?;
        // h_1..h_3 have fewer than ten zeros; every zero is used then.
        let step = (zeros.len() / 10).max(1);
        for z in zeros.iter().step_by(step).take(10) {
            ensure(z.certified, || format!("zero of h_{n} near {} not certified", z.midpoint()))?;
            let x = z.midpoint();
            for m in n + 2..=n + 6 {
                let (v, _) = certified_trace(m, &x, &params).map_err(err)?;
                let gap = (&v - &Real::from_i64(2, 256)).abs();
                worst = worst.max(gap.to_f64());
                ensure(gap <= tol, || format!("h_{m} - 2 = {gap} at the zero {x} of h_{n}"))?;
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} zeros, worst |h - 2| = {worst:.3e}"))
}

fn base_certificate() -> Outcome {
    let vanish = Real::parse("1e-20", 64).map_err(err)?;
    let mut details = Vec::new();
    for lambda in [0i64, 1, 3] {
        let params = ModelParams::from_integer(lambda, 256).map_err(err)?;
        let germ = base_germ(&params);
        let (dm1, d0) = delta_pair(0, &germ, 40, &params).map_err(err)?;
        let one = Real::one(256);
        let report = check_regularity((&dm1, &d0), &one, &one, 40);
        ensure(report.passed, || format!("lambda {lambda}: (1,1) fails, margin {}", report.margin))?;
        let low = dm1.low_order_size().max(&d0.low_order_size());
        ensure(low <= vanish, || format!("lambda {lambda}: low orders reach {low}"))?;
        details.push(format!("lambda {lambda} margin {:.4}", report.margin.to_f64()));
    }
    Ok(details.join(", "))
}

fn decay_chain() -> Outcome {
    let params = ModelParams::from_integer(3, 256).map_err(err)?;
    let germ = base_germ(&params);
    let ks: Vec<i64> = (-1..=13).collect();
    let chain = delta_chain(&germ, &ks, 40, &params).map_err(err)?;
    let at = |k: i64| &chain[(k + 1) as usize];
    let four = Real::from_i64(4, 256);
    for k in 4..=12i64 {
        let delta = &Real::from_i64(3200, 256) * &pow2(-k).sqrt();
        let report = check_regularity((at(k - 1), at(k)), &delta, &four, 40);
        ensure(report.passed, || format!("k {k}: (3200 2^(-k/2), 4) fails, margin {}", report.margin))?;
    }
    let two = Real::from_i64(2, 256);
    let mut implications = 0;
    for delta in ["1e-2", "1e-4"] {
        let d = Real::parse(delta, 256).map_err(err)?;
        let passes = |k: i64| check_regularity((at(k - 1), at(k)), &d, &two, 40).passed;
        for k in 0..13i64 {
            if passes(k) {
                ensure(passes(k + 1), || format!("({delta},2) holds at k {k} but not at k {}", k + 1))?;
                implications += 1;
            }
        }
    }
    ensure(implications > 0, || "no pair on the chain passes (delta,2)".into())?;
    Ok(format!("k = 4..12 pass; {implications} stability steps checked"))
}

fn constants() -> Outcome {
    let ledger = verify_constants();
    for c in &ledger.checks {
        ensure(c.holds, || format!("{} fails: {} vs {}", c.name, c.lhs, c.rhs))?;
    }
    let sides: Vec<String> = ledger.checks.iter().map(|c| format!("{} vs {}", c.lhs, c.rhs)).collect();
    Ok(sides.join("; "))
}

fn full_tree() -> Result<CantorTree, String> {
    let bits = required_precision(140, 2).max(1024);
    let params = ModelParams::from_integer(3, bits).map_err(err)?;
    let opts = TreeOptions { depth: 2, certify_order: Some(40), ..Default::default() };
    build_tree(&params, 140, &opts).map_err(err)
}

fn full_schedule(tree: &CantorTree) -> Outcome {
    ensure(tree.nodes.len() == 7, || format!("{} nodes", tree.nodes.len()))?;
    for node in &tree.nodes {
        ensure(!node.is_flagged(), || format!("node {:?} flagged: {:?}", node.word, node.flags))?;
    }
    let bound = ratio_bound(140, 256);
    let ratios = tree.ratios();
    // Three split nodes give six child ratios.
    ensure(ratios.len() == 6, || format!("{} ratios", ratios.len()))?;
    for r in &ratios {
        ensure(*r >= bound, || format!("ratio {r} below 2.1^-140"))?;
    }
    for node in &tree.nodes {
        if let Some(gap) = &node.gap {
            ensure(gap.is_positive(), || format!("gap of node {:?} is {gap}", node.word))?;
        }
        for e in [&node.a, &node.b] {
            ensure(e.enclosure.certified, || format!("endpoint of node {:?} not certified", node.word))?;
            let verified = e.enclosure.verify().map_err(err)?;
            ensure(verified, || format!("endpoint of node {:?} fails at doubled precision", node.word))?;
        }
        let cascade = node.cascade.as_ref().ok_or_else(|| format!("node {:?} has no cascade check", node.word))?;
        ensure(cascade.levels.iter().all(|l| *l == Closeness::Strong), || {
            format!("node {:?} cascade {:?}", node.word, cascade.levels)
        })?;
    }
    let scaled: Vec<String> = ratios.iter().map(|r| format!("{:.7}", r.mul_pow2(140).to_f64())).collect();
    Ok(format!("6 ratios x 2^140 = [{}], 14 endpoint pairs strong", scaled.join(", ")))
}

/// `ln z = 2 atanh((z - 1)/(z + 1))` summed in exact rationals until the
/// next term is below `2^-200`.
fn ln_oracle(z: &BigRational) -> BigRational {
    let y = (z - BigRational::one()) / (z + BigRational::one());
    let y2 = &y * &y;
    let eps = BigRational::new(BigInt::one(), BigInt::one() << 200);
    let mut term = y.clone();
    let mut sum = BigRational::zero();
    let mut k = 0i64;
    while term.clone() * BigRational::from_integer(BigInt::from(2)) > eps {
        sum += &term / BigRational::from_integer(BigInt::from(2 * k + 1));
        term *= &y2;
        k += 1;
    }
    sum * BigRational::from_integer(BigInt::from(2))
}

fn dimension(tree: &CantorTree) -> Outcome {
    let oracle = ln_oracle(&rat(2, 1)) / (BigRational::from_integer(BigInt::from(140)) * ln_oracle(&rat(21, 10)));
    let oracle = Real::from_rational(&oracle, 256);
    let computed = theoretical_bound(140, 256);
    let gap = (&computed - &oracle).abs();
    ensure(gap <= Real::parse("1e-12", 256).map_err(err)?, || format!("bound {computed} vs oracle {oracle}"))?;
    let report = dimension_report(tree).map_err(err)?;
    let empirical = report.empirical_bound.clone().ok_or("empirical bound withheld")?;
    ensure(empirical >= report.theoretical_bound, || {
        format!("empirical {empirical} below theoretical {}", report.theoretical_bound)
    })?;
    Ok(format!(
        "theoretical {:.13} (oracle gap {:.1e}), empirical {:.13}",
        computed.to_f64(),
        gap.to_f64(),
        empirical.to_f64()
    ))
}

fn middle_thirds_dimension() -> Result<f64, String> {
    let bits = 128;
    let depth = 10u32;
    // Midpoints of the 2^depth intervals of generation `depth`.
    let mut lefts = vec![BigRational::zero()];
    let mut len = BigRational::one();
    let third = rat(1, 3);
    for _ in 0..depth {
        len *= &third;
        lefts = lefts.iter().flat_map(|a| [a.clone(), a + &len * BigRational::from_integer(BigInt::from(2))]).collect();
    }
    let half = &len / BigRational::from_integer(BigInt::from(2));
    let points: Vec<Real> = lefts.iter().map(|a| Real::from_rational(&(a + &half), bits)).collect();
    let scales: Vec<Real> = (1..=8).map(|j| Real::from_rational(&third.pow(j), bits)).collect();
    let opts = BoxCountOptions { origin: Some(Real::zero(bits)), ..Default::default() };
    let d = box_dimension(&points, &scales, &opts).map_err(err)?;
    Ok(d.slope)
}

fn exploratory_consistency() -> Outcome {
    let params = ModelParams::from_integer(3, required_precision(8, 5).max(256)).map_err(err)?;
    let tree = build_tree(&params, 8, &TreeOptions { depth: 5, ..Default::default() }).map_err(err)?;
    let report = dimension_report(&tree).map_err(err)?;
    let empirical = report.empirical_bound.clone().ok_or("empirical bound withheld")?.to_f64();
    let points = tree.endpoints();
    let scales = tree.generation_scales();
    let origin = Some(tree.root().a.point());
    let cover = BoxCountOptions { min_points: points.len(), origin: origin.clone(), method: BoxCounting::MinimalCover };
    let d = box_dimension(&points, &scales, &cover).map_err(err)?;
    let mesh = BoxCountOptions { min_points: points.len(), origin, method: BoxCounting::Mesh };
    let m = box_dimension(&points, &scales, &mesh).map_err(err)?;
    ensure(d.slope >= empirical, || {
        format!("box dimension {} below empirical bound {empirical} (counts {:?})", d.slope, counts(&d))
    })?;
    let cantor = middle_thirds_dimension()?;
    ensure((cantor - 0.6309).abs() <= 0.05, || format!("middle-thirds estimate {cantor}"))?;
    Ok(format!(
        "cover slope {:.8} >= empirical {empirical:.8} (counts {:?}); mesh slope {:.4}, offset {:.4}; middle thirds {cantor:.4}",
        d.slope,
        counts(&d),
        m.slope,
        m.offset_slope
    ))
}

fn counts(d: &tmtrace_core::spectrum::BoxDimension) -> Vec<usize> {
    d.counts.iter().map(|c| c.1).collect()
}

fn localization() -> Outcome {
    let params = ModelParams::from_integer(3, 512).map_err(err)?;
    let germ = base_germ(&params);
    let half_pi = Real::pi(512).mul_pow2(-1);
    let mut sampled = 0;
    let mut worst = 0f64;
    let mut k = 0i64;
    while sampled < 20 {
        ensure(k <= 60, || format!("only {sampled} close germs up to k = 60"))?;
        let (level, _) = closeness_at(&germ, k, 40, &params).map_err(err)?;
        if level >= Closeness::Close {
            let s = germ.scale(k);
            let n = germ.index(k).map_err(err)?;
            let y = first_zero_after(n, &germ.x0, &s, &params, &ScanPolicy::default()).map_err(err)?;
            let off = (&(&(&y.midpoint() - &germ.x0) * &s) - &half_pi).abs();
            worst = worst.max(off.to_f64());
            ensure(is_localized(&y, &germ.x0, &s), || format!("k {k}: |s(y - x0) - pi/2| = {off}"))?;
            sampled += 1;
        }
        k += 1;
    }
    Ok(format!("20 germs up to k = {}, worst offset {worst:.3e}", k - 1))
}

fn scaling_factor() -> Outcome {
    let params = ModelParams::from_integer(3, 1024).map_err(err)?;
    let germ = base_germ(&params);
    let (level, _) = closeness_at(&germ, 140, 40, &params).map_err(err)?;
    ensure(level == Closeness::Strong, || format!("pair at k = 140 is only {}", level.as_str()))?;
    let a = germ.scale(140);
    let n = germ.index(140).map_err(err)?;
    let y = first_zero_after(n, &germ.x0, &a, &params, &ScanPolicy::default()).map_err(err)?;
    let g = germ_from_zero(n, &y, &params).map_err(err)?;
    let GermOrigin::FromZero(diag) = &g.origin else {
        return Err("germ has no zero diagnostics".into());
    };
    ensure(diag.rho_discrepancy <= Real::parse("1e-8", 64).map_err(err)?, || {
        format!("rho formula {} vs jet {}", diag.rho_formula, diag.rho_jet)
    })?;
    let off = (&(&diag.rho_formula / &a.mul_pow2(3)) - &Real::one(1024)).abs();
    ensure(off < Real::parse("1e-14", 64).map_err(err)?, || format!("|rho/(8a) - 1| = {off}"))?;
    Ok(format!("rho discrepancy {:.1e}, |rho/(8a) - 1| = {:.3e}", diag.rho_discrepancy.to_f64(), off.to_f64()))
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS {name} ({secs:.1}s): {detail}");
            true
        }
        Err(reason) => {
            println!("FAIL {name} ({secs:.1}s): {reason}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= run("1 oracle equivalence", oracle_equivalence);
    ok &= run("2 zero propagation", zero_propagation);
    ok &= run("3 base pair (1,1) certificate", base_certificate);
    ok &= run("4 iterate decay and (delta,2) stability", decay_chain);
    ok &= run("5 constants", constants);
    let start = Instant::now();
    let tree = full_tree();
    println!("     full-schedule tree built in {:.1}s", start.elapsed().as_secs_f64());
    match &tree {
        Ok(t) => {
            ok &= run("6 full-schedule tree", || full_schedule(t));
            ok &= run("7 dimension bounds", || dimension(t));
        }
        Err(e) => {
            println!("FAIL 6 full-schedule tree: {e}");
            println!("FAIL 7 dimension bounds: no tree");
            ok = false;
        }
    }
    ok &= run("8 exploratory box dimension", exploratory_consistency);
    ok &= run("9 directional-zero localization", localization);
    ok &= run("10 scaling factor at the strong pair", scaling_factor);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
