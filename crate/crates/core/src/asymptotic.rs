//! Summation of slowly decaying backward-orbit series near the neutral
//! fixed point.
//!
//! Close to 0 the left branch is conjugate to the time-one map of the flow
//! `dw/dt = -psi(w)`, where `psi` is the generator of `E^{-1}`. Writing
//! `s = (2w)^alpha`, `psi(w) = w (s + c1 s^2 + c2 s^3 + c3 s^4 + c4 s^5 + ...)`.
//! For the tail `A_F(v) = sum_{k>=1} (E^{-k})'(v) F(E^{-k}(v))`, Euler-Maclaurin
//! along the flow gives
//!
//! `A_F(v) = (1/psi(v)) int_0^v F - F(v)/2 + (F psi)'(v)/12 + O(s^4)`.
//!
//! The rule is linear in `F`, so it reduces to a list of points and weights.
//! Points and weights are carried as duals in `alpha`, which yields the
//! parameter derivative of any tail for free.

use crate::dual::Dual;
use crate::quadrature::unit_rule;

/// Largest `(2v)^alpha` at which the tail rule is used.
pub const S_MAX: f64 = 2e-3;

const GAUSS_ORDER: usize = 48;
const FD_STEP: f64 = 0.02;

fn generator_coeffs(a: Dual) -> [Dual; 4] {
    let a1 = a + 1.0;
    let a2 = a * a;
    let a3 = a2 * a;
    [
        a1 * (-0.5),
        a1 * (a * 5.0 + 4.0) / 12.0,
        -(a1 * a1 * (a * 5.0 + 3.0)) / 12.0,
        a1 * (a3 * 107.0 + a2 * 263.0 + a * 202.0 + 48.0) / 240.0,
    ]
}

/// Generator of the left inverse branch, truncated after the `s^5` term.
pub fn generator(alpha: Dual, w: Dual) -> Dual {
    let s = (alpha * (w * 2.0).ln()).exp();
    let [c1, c2, c3, c4] = generator_coeffs(alpha);
    w * s * (((((c4 * s) + c3) * s + c2) * s + c1) * s + 1.0)
}

/// Point/weight form of the tail sum `A_F(v)`.
#[derive(Debug, Clone)]
pub struct TailRule {
    pub points: Vec<Dual>,
    pub weights: Vec<Dual>,
}

impl TailRule {
    /// Rule for base point `v`. Both `alpha` and `v` may carry a derivative.
    pub fn new(alpha: Dual, v: Dual) -> Self {
        let gl = unit_rule(GAUSS_ORDER);
        let mut points = Vec::with_capacity(GAUSS_ORDER + 5);
        let mut weights = Vec::with_capacity(GAUSS_ORDER + 5);
        let psi_v = generator(alpha, v);
        let inv_psi = psi_v.recip();
        // w = v y^q flattens the endpoint behaviour of the integrand
        let q = (1.0 - alpha).recip() * 2.0;
        for (&y, &c) in gl.nodes.iter().zip(&gl.weights) {
            let yq = (q * y.ln()).exp();
            points.push(v * yq);
            weights.push(v * q * yq * (c / y) * inv_psi);
        }
        points.push(v);
        weights.push(Dual::constant(-0.5));
        let d = v * FD_STEP;
        for (k, coef) in [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)] {
            let x = v + d * k;
            points.push(x);
            weights.push(generator(alpha, x) * coef / (d * 144.0));
        }
        Self { points, weights }
    }

    /// Rule for a plain base point with the derivative carried in `alpha`.
    pub fn plain(alpha: f64, v: f64) -> Self {
        Self::new(Dual::variable(alpha), Dual::constant(v))
    }

    pub fn apply(&self, mut f: impl FnMut(Dual) -> Dual) -> Dual {
        let mut acc = Dual::default();
        for (&p, &w) in self.points.iter().zip(&self.weights) {
            acc += w * f(p);
        }
        acc
    }

    pub fn apply_re(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w.re * f(p.re))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Whether the tail rule is accurate at base point `v`.
#[inline]
pub fn tail_applies(alpha: f64, v: f64) -> bool {
    (2.0 * v).powf(alpha) <= S_MAX
}

/// Base point with `(2v)^alpha = s`.
pub fn base_point(alpha: f64, s: f64) -> f64 {
    0.5 * s.powf(1.0 / alpha)
}
