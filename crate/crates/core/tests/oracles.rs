use num_bigint::BigInt;
use num_rational::BigRational;
use tmtrace_core::germ::{base_germ, germ_from_zero, tau, GermOrigin};
use tmtrace_core::rootfind::{isolate_zeros, ScanPolicy};
use tmtrace_core::spectrum::approximant_bands;
use tmtrace_core::tracepoly::{eval_trace_at, trace_jet};
use tmtrace_core::{Error, ModelParams, Real};

fn pow2(e: i64) -> Real {
    Real::one(64).mul_pow2(e)
}

#[test]
fn zero_coupling_traces_are_chebyshev() {
    // At λ = 0 both letters give the same matrix, so h_n(2 cos θ) = 2 cos(2^n θ).
    let bits = 256;
    let params = ModelParams::from_integer(0, bits).unwrap();
    for n in 1..=10u32 {
        for t in [1i64, 7, 13, 29, 31] {
            let theta = Real::from_rational(&BigRational::new(BigInt::from(t), BigInt::from(37)), bits);
            let x = theta.cos().mul_pow2(1);
            let expect = theta.mul_pow2(n as i64).cos().mul_pow2(1);
            let got = eval_trace_at(n, &x, &params, bits).unwrap();
            assert!((&got - &expect).abs() <= pow2(-200), "n {n} theta {t}/37: {got} vs {expect}");
        }
    }
}

#[test]
fn jet_coefficients_match_finite_differences() {
    let bits = 512;
    let params = ModelParams::parse("7/5", bits).unwrap();
    let e = Real::one(bits).mul_pow2(-80);
    for n in [2u32, 5, 8] {
        let x = Real::parse("0.731", bits).unwrap();
        let jet = trace_jet(n, &x, 2, &params).unwrap();
        let h = |y: &Real| eval_trace_at(n, y, &params, bits).unwrap();
        let (plus, minus, mid) = (h(&(&x + &e)), h(&(&x - &e)), h(&x));
        let d1 = &(&plus - &minus) / &e.mul_pow2(1);
        let d2 = &(&(&plus + &minus) - &mid.mul_pow2(1)) / &(&e * &e).mul_pow2(1);
        let scale = jet.coeff(1).abs().max(&Real::one(bits));
        assert!((&d1 - jet.coeff(1)).abs() <= &scale * &pow2(-120), "n {n} first derivative");
        let scale = jet.coeff(2).abs().max(&Real::one(bits));
        assert!((&d2 - jet.coeff(2)).abs() <= &scale * &pow2(-120), "n {n} second coefficient");
        assert_eq!(jet.coeff(0), &mid);
    }
}

#[test]
fn quartic_zeros_at_zero_coupling() {
    // h_2 = x^4 - 4x^2 + 2 at λ = 0, so x^2 = 2 ± sqrt 2.
    let bits = 256;
    let params = ModelParams::from_integer(0, bits).unwrap();
    let w = Real::from_i64(3, bits);
    let zeros = isolate_zeros(2, (&-&w, &w), &params, &ScanPolicy::default()).unwrap();
    let r2 = Real::from_i64(2, bits).sqrt();
    let two = Real::from_i64(2, bits);
    let big = (&two + &r2).sqrt();
    let small = (&two - &r2).sqrt();
    let expect = [-&big, -&small, small.clone(), big.clone()];
    assert_eq!(zeros.len(), 4);
    for (z, x) in zeros.iter().zip(&expect) {
        assert!(z.certified);
        assert!((&z.midpoint() - x).abs() <= pow2(-120), "{} vs {x}", z.midpoint());
    }
}

#[test]
fn base_germ_coefficients_follow_tau() {
    // P_{-1} = h_4 = 2 - τ² (x - a)² + ..., P_0 = h_5 = 2 - 4τ² (x - a)² + ...
    for lambda in [0i64, 1, 3] {
        let params = ModelParams::from_integer(lambda, 256).unwrap();
        let g = base_germ(&params);
        let t2 = tau(&params).square();
        for (n, factor) in [(4u32, 1i64), (5, 4)] {
            let jet = trace_jet(n, &g.x0, 2, &params).unwrap();
            let want = -&(&t2 * &Real::from_i64(factor, 256));
            let rel = (&(jet.coeff(2) / &want) - &Real::one(256)).abs();
            assert!(rel <= pow2(-100), "lambda {lambda} h_{n}: {} vs {want}", jet.coeff(2));
            assert!((jet.coeff(0) - &Real::from_i64(2, 256)).abs() <= pow2(-100));
            assert!(jet.coeff(1).abs() <= pow2(-90));
        }
    }
}

#[test]
fn germ_scaling_factors_agree_with_jets() {
    let params = ModelParams::from_integer(1, 256).unwrap();
    let w = Real::from_i64(4, 256);
    let mut generated = 0;
    for m in 2..=4u32 {
        for z in isolate_zeros(m, (&-&w, &w), &params, &ScanPolicy::default()).unwrap() {
            match germ_from_zero(m, &z, &params) {
                Ok(g) => {
                    let GermOrigin::FromZero(d) = &g.origin else { panic!("origin") };
                    assert!(d.rho_discrepancy <= Real::parse("1e-10", 64).unwrap(), "m {m}: {}", d.rho_discrepancy);
                    assert_eq!(g.pair, (m + 3, m + 4));
                    generated += 1;
                }
                Err(Error::DegenerateGerm { reason, .. }) => assert!(!reason.contains("mismatch"), "{reason}"),
                Err(e) => panic!("{e}"),
            }
        }
    }
    assert!(generated >= 10, "only {generated} germs");
}

#[test]
fn bands_are_symmetric_and_contain_zeros() {
    let params = ModelParams::from_integer(1, 256).unwrap();
    let w = Real::from_i64(4, 256);
    for n in 2..=4u32 {
        let bands = approximant_bands(n, (&-&w, &w), &params, 1024).unwrap();
        let tol = pow2(-60);
        for (b, m) in bands.iter().zip(bands.iter().rev()) {
            assert!((&b.lo + &m.hi).abs() <= tol, "h_{n}: [{}, {}] vs [{}, {}]", b.lo, b.hi, m.lo, m.hi);
        }
        for z in isolate_zeros(n, (&-&w, &w), &params, &ScanPolicy::default()).unwrap() {
            assert!(bands.iter().any(|b| b.contains(&z.midpoint(), &tol)), "h_{n} zero {} outside bands", z.midpoint());
        }
    }
}
