mod common;

use common::{rel, solved};
use pmresp_core::error::Error;
use pmresp_core::observable::Observable;
use pmresp_core::pipeline::PipelineConfig;
use pmresp_core::response::{
    expectation_kac, response_density, response_kac, secant_inconsistency, sweep, sweep_to_csv, Route,
    ROUTE_TOLERANCE,
};
use proptest::prelude::*;

#[test]
fn constant_observable_is_trivial() {
    let s = solved(0.6);
    let k = s.response_kac(&Observable::one()).unwrap();
    assert!((k.expectation - 1.0).abs() <= 1e-14);
    assert!(k.derivative.abs() <= 1e-8);
    let d = s.response_density(&Observable::one()).unwrap();
    assert!((d.expectation - 1.0).abs() <= 1e-12);
    assert!(d.derivative.abs() <= 1e-8);
    assert_eq!(k.route, Route::KacQuotient);
    assert_eq!(d.route, Route::DensityIntegral);
}

#[test]
fn routes_agree_on_smooth_observables() {
    let obs = [
        Observable::identity(),
        Observable::cosine(1.0),
        Observable::polynomial(vec![0.2, -1.0, 3.0]).unwrap(),
        Observable::c1("exp", f64::exp, f64::exp),
    ];
    for a in [0.3, 0.65] {
        let s = solved(a);
        for phi in &obs {
            let (k, d, gap) = s.cross_check(phi).unwrap();
            assert!(gap <= ROUTE_TOLERANCE, "alpha {a}, {}: {gap}", phi.name);
            assert!((k.expectation - d.expectation).abs() <= 1e-6, "alpha {a}, {}", phi.name);
        }
    }
}

#[test]
fn free_functions_match_the_solved_bundle() {
    let s = solved(0.5);
    let phi = Observable::identity();
    let e = expectation_kac(s.alpha(), &phi, s.pair(), &s.plan()).unwrap();
    let k = response_kac(s.alpha(), &phi, s.pair(), &s.plan()).unwrap();
    let d = response_density(s.alpha(), &phi, s.pair(), &s.norm).unwrap();
    assert!((e - s.response_kac(&phi).unwrap().expectation).abs() <= 1e-15);
    assert_eq!(k.derivative, s.response_kac(&phi).unwrap().derivative);
    assert!(rel(d.derivative, k.derivative) <= ROUTE_TOLERANCE);
}

#[test]
fn derivative_matches_differences_at_second_order() {
    let a = 0.4;
    let phi = Observable::cosine(1.0);
    let d = solved(a).response(&phi).unwrap().derivative;
    let fd = |eps: f64| {
        let up = solved(a + eps).response(&phi).unwrap().expectation;
        let down = solved(a - eps).response(&phi).unwrap().expectation;
        (up - down) / (2.0 * eps)
    };
    let (e1, e2) = ((fd(2e-2) - d).abs(), (fd(1e-2) - d).abs());
    assert!(e2 <= 1e-4 * (1.0 + d.abs()));
    assert!((3.0..5.0).contains(&(e1 / e2)), "{e1} {e2}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scale_and_shift(c in -5.0f64..5.0, shift in -5.0f64..5.0) {
        let s = solved(0.5);
        let phi = Observable::cosine(1.0);
        let base = s.response_kac(&phi).unwrap();
        let scaled = s.response_kac(&phi.scaled(c)).unwrap();
        prop_assert!((scaled.derivative - c * base.derivative).abs() <= 1e-12 * (1.0 + c.abs()));
        prop_assert!((scaled.expectation - c * base.expectation).abs() <= 1e-12 * (1.0 + c.abs()));
        let moved = s.response_kac(&phi.shifted(shift)).unwrap();
        prop_assert!((moved.derivative - base.derivative).abs() <= 1e-8 * (1.0 + shift.abs()));
        prop_assert!((moved.expectation - base.expectation - shift).abs() <= 1e-12 * (1.0 + shift.abs()));
    }
}

#[test]
fn singular_observables_use_the_density_route() {
    let s = solved(0.5);
    let phi = Observable::power(-0.1).unwrap();
    assert!(matches!(s.response_kac(&phi), Err(Error::Precondition(_))));
    let r = s.response(&phi).unwrap();
    assert_eq!(r.route, Route::DensityIntegral);
    assert!(r.expectation > 1.0 && r.derivative.is_finite());
    // q too small for the parameter: x^{-0.1} in L^1.2 but alpha = 0.5 needs q > 2
    let weak = Observable::singular("weak", 1.2, 0.1, |x| x.powf(-0.1)).unwrap();
    match s.response_density(&weak) {
        Err(Error::Precondition(msg)) => assert!(msg.contains("needs q > 2"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn sweep_is_self_consistent() {
    let phi = Observable::identity();
    let cfg = PipelineConfig::default();
    let coarse = sweep(&[0.32, 0.36, 0.40], &phi, &cfg).unwrap();
    let fine = sweep(&[0.34, 0.36, 0.38], &phi, &cfg).unwrap();
    let (c, f) = (secant_inconsistency(&coarse).unwrap(), secant_inconsistency(&fine).unwrap());
    assert!((3.0..5.0).contains(&(c / f)), "{c} {f}");
    assert!(coarse.iter().all(|r| r.route_gap.unwrap() <= ROUTE_TOLERANCE));

    let flat = sweep(&[0.2, 0.5, 0.8], &Observable::constant(2.0), &cfg).unwrap();
    for row in &flat {
        let r = row.result.as_ref().unwrap();
        assert!((r.expectation - 2.0).abs() <= 1e-12);
        assert!(r.derivative.abs() <= 1e-8);
    }
    let mut buf = Vec::new();
    sweep_to_csv(&flat, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("alpha,expectation,derivative,residual,tail"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn sweep_validation_and_per_point_failures() {
    let phi = Observable::identity();
    let cfg = PipelineConfig::default();
    assert!(sweep(&[], &phi, &cfg).is_err());
    assert!(sweep(&[0.5, 0.4], &phi, &cfg).is_err());
    assert!(sweep(&[0.5, 1.0], &phi, &cfg).is_err());
    // x^{-0.1} with q = 1.5 is fine at alpha = 0.2 and rejected at 0.5
    let sing = Observable::singular("s", 1.5, 0.1, |x| x.powf(-0.1)).unwrap();
    let rows = sweep(&[0.2, 0.5], &sing, &cfg).unwrap();
    assert!(rows[0].result.is_ok());
    assert!(matches!(rows[1].result, Err(Error::Precondition(_))));
    assert!(secant_inconsistency(&rows).is_none());
}
