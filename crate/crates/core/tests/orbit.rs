mod common;

use common::alpha;
use pmresp_core::branches::{da_induced_observable, eval_branch, induced_observable};
use pmresp_core::observable::Observable;
use pmresp_core::orbit::{branch_points, inverse_orbit, left_inverse, map_t, return_time, InverseOrbitState};
use proptest::prelude::*;

fn orbit(a: f64, z: f64, r: usize) -> Vec<InverseOrbitState> {
    inverse_orbit(alpha(a), z, r).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orbit_state_invariants(a in 0.05f64..0.95, z in 0.01f64..=1.0) {
        let states = orbit(a, z, 300);
        prop_assert_eq!(states[0].z, z);
        for w in states.windows(2) {
            let (s, t) = (&w[0], &w[1]);
            prop_assert!(t.z > 0.0 && t.z <= 0.5);
            if s.r >= 1 {
                prop_assert!(t.z < s.z);
            }
            // z_r = z_{r+1} (1 + 2^alpha z_{r+1}^alpha)
            let back = t.z * (1.0 + (2.0 * t.z).powf(a));
            prop_assert!((back - s.z).abs() <= 1e-14, "r = {}: {} vs {}", t.r, back, s.z);
            prop_assert!(t.dz > 0.0 && t.dz <= 1.0);
            prop_assert!(t.d2z <= 0.0);
            prop_assert!(t.da_z >= 0.0);
        }
    }

    #[test]
    fn dz_matches_product_formula(a in 0.05f64..0.95, z in 0.5f64..=1.0) {
        let states = orbit(a, z, 50);
        let mut prod = 1.0;
        for s in &states[1..] {
            prod /= 1.0 + (a + 1.0) * (2.0 * s.z).powf(a);
            prop_assert!((s.dz - prod).abs() <= 1e-12 * prod);
        }
    }

    #[test]
    fn map_inverts_left_branch(a in 0.01f64..0.99, v in 0.0f64..=1.0) {
        let w = left_inverse(alpha(a), v).unwrap();
        prop_assert!((0.0..=0.5).contains(&w));
        prop_assert!((map_t(alpha(a), w).unwrap() - v).abs() <= 1e-14);
    }

    #[test]
    fn return_time_matches_partition(a in 0.1f64..0.9, x in 0.5f64..1.0) {
        prop_assume!(x > 0.5);
        let part = branch_points(alpha(a), 400).unwrap();
        let k = part.ys.windows(2).position(|y| x < y[0] && x > y[1]);
        prop_assume!(k.is_some());
        prop_assert_eq!(return_time(alpha(a), x).unwrap(), k.unwrap() + 1);
    }

    #[test]
    fn branch_fields_are_orbit_reads(a in 0.1f64..0.9, z in 0.5f64..=1.0, r in 0usize..200) {
        let b = eval_branch(alpha(a), r, z).unwrap();
        let s = orbit(a, z, r)[r];
        prop_assert_eq!(b.inv, 0.5 * (s.z + 1.0));
        prop_assert_eq!(b.weight, 0.5 * s.dz);
        prop_assert!(b.weight > 0.0 && b.weight <= 0.5);
        prop_assert!(b.da_inv >= 0.0);
        let part = branch_points(alpha(a), r + 1).unwrap();
        prop_assert!(b.inv <= part.ys[r] + 1e-15 && b.inv >= part.ys[r + 1] - 1e-15);
    }
}

/// Largest error of a central difference in alpha over depths `1..=r`.
fn fd_errors(a: f64, z: f64, r: usize, eps: f64) -> [f64; 3] {
    let c = orbit(a, z, r);
    let p = orbit(a + eps, z, r);
    let m = orbit(a - eps, z, r);
    let mut err = [0.0f64; 3];
    for k in 1..=r {
        let fd = |f: fn(&InverseOrbitState) -> f64| (f(&p[k]) - f(&m[k])) / (2.0 * eps);
        let scale = c[k].dz;
        err[0] = err[0].max((fd(|s| s.z) - c[k].da_z).abs());
        err[1] = err[1].max((fd(|s| s.dz) - c[k].da_dz).abs() / scale);
        err[2] = err[2].max((fd(|s| s.d2z) - c[k].da_d2z).abs() / scale);
    }
    err
}

#[test]
fn alpha_derivatives_converge_at_second_order() {
    for (a, z) in [(0.3, 0.6), (0.5, 0.9), (0.8, 0.5)] {
        let e1 = fd_errors(a, z, 200, 2e-3);
        let e2 = fd_errors(a, z, 200, 1e-3);
        for k in 0..3 {
            let ratio = e1[k] / e2[k];
            assert!((3.5..4.5).contains(&ratio), "alpha {a}, field {k}: ratio {ratio}");
        }
        // the example step is still in the O(eps^2) regime
        let e = fd_errors(a, z, 200, 1e-4);
        for k in 0..3 {
            assert!(e[k] <= e2[k] / 50.0 || e[k] < 1e-9, "alpha {a}, field {k}: {e:?} vs {e2:?}");
        }
    }
}

#[test]
fn spatial_derivatives_match_differences_in_z() {
    let (a, z, h) = (0.6, 0.7, 1e-4);
    let c = orbit(a, z, 100);
    let p = orbit(a, z + h, 100);
    let m = orbit(a, z - h, 100);
    for k in 1..=100 {
        let d1 = (p[k].z - m[k].z) / (2.0 * h);
        let d2 = (p[k].dz - m[k].dz) / (2.0 * h);
        let d3 = (p[k].d2z - m[k].d2z) / (2.0 * h);
        assert!((d1 - c[k].dz).abs() <= 1e-7 * c[k].dz);
        assert!((d2 - c[k].d2z).abs() <= 1e-6 * c[k].dz);
        assert!((d3 - c[k].d3z).abs() <= 1e-5 * c[k].dz);
    }
}

#[test]
fn second_branch_point_example() {
    let part = branch_points(alpha(0.5), 2).unwrap();
    // bisection oracle on w (1 + sqrt(2 w)) = 1/2
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * (1.0 + (2.0 * mid).sqrt()) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((part.xs[2] - lo).abs() < 1e-14);
    assert!((part.xs[2] - 0.2849).abs() < 1e-4);
}

#[test]
fn induced_observable_examples() {
    let a = alpha(0.4);
    for r in [0, 1, 7, 40] {
        let tau = induced_observable(&Observable::one(), a, r, 0.8).unwrap();
        assert_eq!(tau, (r + 1) as f64);
        assert_eq!(da_induced_observable(&Observable::one(), a, r, 0.8).unwrap(), 0.0);
    }
    let phi = Observable::cosine(1.0);
    let v = induced_observable(&phi, a, 0, 0.6).unwrap();
    assert_eq!(v, phi.eval(0.8));
}

#[test]
fn induced_observable_grows_at_most_linearly() {
    // |d_alpha Phi_r| <= C ||phi||_C1 (r + 1) with C fitted at shallow depth
    let phi = Observable::identity();
    let a = alpha(0.6);
    let fit: f64 = (0..20)
        .map(|r| da_induced_observable(&phi, a, r, 0.5).unwrap().abs() / (r + 1) as f64)
        .fold(0.0, f64::max);
    for r in [100, 1000, 5000] {
        for z in [0.5, 0.75, 1.0] {
            let d = da_induced_observable(&phi, a, r, z).unwrap().abs();
            assert!(d <= 2.0 * fit.max(1e-3) * (r + 1) as f64);
        }
    }
}
