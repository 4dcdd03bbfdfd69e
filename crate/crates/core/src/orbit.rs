//! The intermittent map, its left branch, and backward orbits under that
//! branch together with their spatial and parameter derivatives.
//!
//! Every branch quantity of the induced map is a linear read-off of the
//! backward orbit `z_r = E^{-r}(z)`, where `E(w) = w (1 + (2w)^alpha)` is the
//! left branch. Derivatives are propagated in ratio form (`z_r''/z_r'`,
//! `z_r'''/z_r'`, `d_alpha z_r'/z_r'`, `d_alpha z_r''/z_r'`): these stay O(1)
//! while `z_r'` itself decays like `r^{-(1+1/alpha)}`.

use crate::error::{Error, Result};

/// Parameter of the map family, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize)]
pub struct ParamAlpha(f64);

impl ParamAlpha {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::Domain {
                what: "alpha",
                value: alpha,
                domain: "(0, 1)",
            })
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Shift by `delta`, failing if the result leaves (0, 1).
    pub fn offset(self, delta: f64) -> Result<Self> {
        Self::new(self.0 + delta)
    }
}

impl std::fmt::Display for ParamAlpha {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Derivatives smaller than this are flushed to zero.
pub const FLUSH_THRESHOLD: f64 = 1e-300;

fn check_unit(what: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: x,
            domain: "[0, 1]",
        })
    }
}

#[inline]
pub(crate) fn map_raw(alpha: f64, x: f64) -> f64 {
    if x <= 0.5 {
        x * (1.0 + (2.0 * x).powf(alpha))
    } else {
        2.0 * x - 1.0
    }
}

/// `T_alpha(x)`: `x (1 + 2^alpha x^alpha)` on `[0, 1/2]`, `2x - 1` on `(1/2, 1]`.
pub fn map_t(alpha: ParamAlpha, x: f64) -> Result<f64> {
    check_unit("x", x)?;
    Ok(map_raw(alpha.get(), x).min(1.0))
}

/// Safeguarded Newton for `w (1 + (2w)^alpha) = v` on `[0, min(v, 1/2)]`.
pub(crate) fn left_inverse_raw(alpha: f64, v: f64) -> Option<f64> {
    if v <= 0.0 {
        return Some(0.0);
    }
    let mut lo = 0.0_f64;
    let mut hi = v.min(0.5);
    let mut w = v / (1.0 + (2.0 * v).powf(alpha));
    for _ in 0..200 {
        let s = (2.0 * w).powf(alpha);
        let f = w * (1.0 + s) - v;
        if f == 0.0 {
            return Some(w);
        }
        if f > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let mut next = w - f / (1.0 + (1.0 + alpha) * s);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - w).abs();
        w = next;
        if step <= 4.0 * f64::EPSILON * w || hi - lo <= 4.0 * f64::EPSILON * w {
            return Some(w);
        }
    }
    None
}

/// Inverse of the left branch: the unique `w` in `[0, 1/2]` with `E_alpha(w) = v`.
pub fn left_inverse(alpha: ParamAlpha, v: f64) -> Result<f64> {
    check_unit("v", v)?;
    left_inverse_raw(alpha.get(), v).ok_or(Error::Convergence {
        alpha: alpha.get(),
        value: v,
    })
}

/// Backward-orbit point `z_r` with its derivatives in `z` (primes) and `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct InverseOrbitState {
    pub r: usize,
    pub z0: f64,
    pub z: f64,
    pub dz: f64,
    pub d2z: f64,
    pub d3z: f64,
    pub da_z: f64,
    pub da_dz: f64,
    pub da_d2z: f64,
    /// `z_r'' / z_r'`
    pub d2z_ratio: f64,
    /// `z_r''' / z_r'`
    pub d3z_ratio: f64,
    /// `d_alpha z_r' / z_r'`
    pub da_dz_ratio: f64,
    /// `d_alpha z_r'' / z_r'`
    pub da_d2z_ratio: f64,
    /// Set once `z_r'` dropped below [`FLUSH_THRESHOLD`] and was replaced by 0.
    pub flushed: bool,
}

impl InverseOrbitState {
    pub fn base(z: f64) -> Self {
        Self {
            r: 0,
            z0: z,
            z,
            dz: 1.0,
            d2z: 0.0,
            d3z: 0.0,
            da_z: 0.0,
            da_dz: 0.0,
            da_d2z: 0.0,
            d2z_ratio: 0.0,
            d3z_ratio: 0.0,
            da_dz_ratio: 0.0,
            da_d2z_ratio: 0.0,
            flushed: false,
        }
    }

    /// `(2 z_r)^alpha`, the small parameter of the near-fixed-point asymptotics.
    #[inline]
    pub fn s(&self, alpha: f64) -> f64 {
        (2.0 * self.z).powf(alpha)
    }

    /// Advance one step along the backward orbit.
    pub(crate) fn step(&self, alpha: f64) -> Option<Self> {
        let w = left_inverse_raw(alpha, self.z)?;
        if w <= 0.0 {
            return None;
        }
        let l = (2.0 * w).ln();
        let s = (alpha * l).exp();
        let den = 1.0 + (1.0 + alpha) * s;
        let a1 = alpha * (alpha + 1.0);
        // A = alpha (alpha+1) 2^alpha w^(alpha-1) and its partials
        let big_a = a1 * s / w;
        let da_big_a = (2.0 * alpha + 1.0 + a1 * l) * s / w;
        let dw_big_a = (alpha - 1.0) * big_a / w;
        let da_den = s * (1.0 + (alpha + 1.0) * l);
        let dw_den = big_a;

        let mut dz = self.dz / den;
        let mut flushed = self.flushed;
        if dz < FLUSH_THRESHOLD {
            dz = 0.0;
            flushed = true;
        }
        let da_z = (self.da_z - s * w * l) / den;
        let d2 = self.d2z_ratio - big_a * dz / den;
        let d3 = self.d3z_ratio - (dw_big_a * dz * dz + 3.0 * big_a * d2 * dz) / den;
        let b = self.da_dz_ratio - (s + (alpha + 1.0) * s * l + big_a * da_z) / den;
        let g = self.da_d2z_ratio
            - ((da_big_a + dw_big_a * da_z) * dz
                + 2.0 * big_a * b * dz
                + (da_den + dw_den * da_z) * d2)
                / den;
        Some(Self {
            r: self.r + 1,
            z0: self.z0,
            z: w,
            dz,
            d2z: d2 * dz,
            d3z: d3 * dz,
            da_z,
            da_dz: b * dz,
            da_d2z: g * dz,
            d2z_ratio: d2,
            d3z_ratio: d3,
            da_dz_ratio: b,
            da_d2z_ratio: g,
            flushed,
        })
    }
}

/// Streaming backward orbit; yields `r = 0, 1, 2, ...` without allocating.
#[derive(Debug, Clone)]
pub struct InverseOrbit {
    alpha: f64,
    next: Option<InverseOrbitState>,
}

impl InverseOrbit {
    pub fn new(alpha: ParamAlpha, z: f64) -> Result<Self> {
        if !(z.is_finite() && z > 0.0 && z <= 1.0) {
            return Err(Error::Domain {
                what: "z",
                value: z,
                domain: "(0, 1]",
            });
        }
        Ok(Self::new_unchecked(alpha.get(), z))
    }

    pub(crate) fn new_unchecked(alpha: f64, z: f64) -> Self {
        Self {
            alpha,
            next: Some(InverseOrbitState::base(z)),
        }
    }
}

impl Iterator for InverseOrbit {
    type Item = InverseOrbitState;

    fn next(&mut self) -> Option<InverseOrbitState> {
        let cur = self.next.take()?;
        self.next = cur.step(self.alpha);
        Some(cur)
    }
}

/// States `r = 0..=r_max` of the backward orbit of `z`.
pub fn inverse_orbit(alpha: ParamAlpha, z: f64, r_max: usize) -> Result<Vec<InverseOrbitState>> {
    let states: Vec<_> = InverseOrbit::new(alpha, z)?.take(r_max + 1).collect();
    if states.len() != r_max + 1 {
        return Err(Error::Convergence {
            alpha: alpha.get(),
            value: states.last().map_or(z, |s| s.z),
        });
    }
    Ok(states)
}

/// Preimage chain `x_0 = 1, x_1 = 1/2, x_{k+1} = E^{-1}(x_k)` and `y_k = (1 + x_k)/2`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BranchPartition {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl BranchPartition {
    /// Index `r` with `x` in `(y_{r+1}, y_r]`, if within the computed range.
    pub fn branch_of(&self, x: f64) -> Option<usize> {
        self.ys.windows(2).position(|w| x > w[1] && x <= w[0])
    }
}

pub fn branch_points(alpha: ParamAlpha, k_max: usize) -> Result<BranchPartition> {
    if k_max < 1 {
        return Err(Error::Precondition("k_max must be at least 1".into()));
    }
    let mut xs = Vec::with_capacity(k_max + 1);
    xs.push(1.0);
    xs.push(0.5);
    while xs.len() <= k_max {
        let last = *xs.last().unwrap();
        xs.push(left_inverse(alpha, last)?);
    }
    let ys = xs.iter().map(|x| 0.5 * (1.0 + x)).collect();
    Ok(BranchPartition { xs, ys })
}

pub const RETURN_TIME_CAP: usize = 1_000_000;

/// First return time of `x` in `(1/2, 1]` to `[1/2, 1]`.
pub fn return_time(alpha: ParamAlpha, x: f64) -> Result<usize> {
    if !(x.is_finite() && x > 0.5 && x <= 1.0) {
        return Err(Error::Domain {
            what: "x",
            value: x,
            domain: "(1/2, 1]",
        });
    }
    let a = alpha.get();
    let mut y = 2.0 * x - 1.0;
    let mut k = 1;
    while y < 0.5 {
        if k >= RETURN_TIME_CAP {
            return Err(Error::IterationCap {
                cap: RETURN_TIME_CAP,
                context: format!("x = {x} is too close to a branch endpoint"),
            });
        }
        y = map_raw(a, y);
        k += 1;
    }
    Ok(k)
}

/// `1` for `r <= e`, `ln r` otherwise.
pub fn logg(r: u64) -> f64 {
    if (r as f64) <= std::f64::consts::E {
        1.0
    } else {
        (r as f64).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha(a: f64) -> ParamAlpha {
        ParamAlpha::new(a).unwrap()
    }

    #[test]
    fn alpha_rejects_endpoints() {
        assert!(ParamAlpha::new(0.0).is_err());
        assert!(ParamAlpha::new(1.0).is_err());
        assert!(ParamAlpha::new(f64::NAN).is_err());
        assert!(ParamAlpha::new(0.3).is_ok());
    }

    #[test]
    fn map_examples() {
        for a in [0.1, 0.5, 0.9] {
            assert_eq!(map_t(alpha(a), 0.75).unwrap(), 0.5);
            assert_eq!(map_t(alpha(a), 0.5).unwrap(), 1.0);
        }
        let v = map_t(alpha(0.5), 0.25).unwrap();
        assert!((v - 0.4267766953).abs() < 1e-10);
        assert!(map_t(alpha(0.5), 1.5).is_err());
        assert!(map_t(alpha(0.5), f64::NAN).is_err());
    }

    #[test]
    fn left_inverse_examples() {
        for a in [0.1, 0.5, 0.9] {
            assert!((left_inverse(alpha(a), 1.0).unwrap() - 0.5).abs() < 1e-14);
            assert_eq!(left_inverse(alpha(a), 0.0).unwrap(), 0.0);
        }
        let w = left_inverse(alpha(0.5), 0.4267766953).unwrap();
        assert!((w - 0.25).abs() < 1e-10);
        assert!(left_inverse(alpha(0.5), -0.1).is_err());
    }

    #[test]
    fn left_inverse_tiny_arguments_are_relative_accurate() {
        for v in [1e-30, 1e-200, 3e-12] {
            let w = left_inverse_raw(0.7, v).unwrap();
            let back = map_raw(0.7, w);
            assert!(((back - v) / v).abs() < 1e-14);
        }
    }

    #[test]
    fn base_state() {
        let s = &inverse_orbit(alpha(0.4), 0.8, 0).unwrap()[0];
        assert_eq!((s.z, s.dz, s.d2z, s.d3z), (0.8, 1.0, 0.0, 0.0));
        assert_eq!((s.da_z, s.da_dz, s.da_d2z), (0.0, 0.0, 0.0));
    }

    #[test]
    fn branch_points_examples() {
        let p = branch_points(alpha(0.5), 6).unwrap();
        assert_eq!(p.xs[0], 1.0);
        assert_eq!(p.xs[1], 0.5);
        assert_eq!(p.ys[1], 0.75);
        assert!((map_raw(0.5, p.xs[2]) - 0.5).abs() < 1e-12);
        // bisection oracle for w (1 + sqrt(2) sqrt(w)) = 1/2
        let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * (1.0 + 2f64.sqrt() * mid.sqrt()) > 0.5 {
                hi = mid
            } else {
                lo = mid
            }
        }
        assert!((p.xs[2] - lo).abs() < 1e-12);
        assert!((p.xs[2] - 0.2849).abs() < 1e-4);
        assert!(p.xs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn return_time_examples() {
        for a in [0.2, 0.8] {
            assert_eq!(return_time(alpha(a), 0.76).unwrap(), 1);
            assert_eq!(return_time(alpha(a), 0.99).unwrap(), 1);
        }
        assert!(return_time(alpha(0.5), 0.5).is_err());
    }

    #[test]
    fn logg_examples() {
        assert_eq!(logg(0), 1.0);
        assert_eq!(logg(1), 1.0);
        assert_eq!(logg(2), 1.0);
        assert!((logg(10) - 2.302585093).abs() < 1e-9);
    }
}
