//! Invariant density on the whole interval, pulled back from the induced
//! density along the left branch:
//! `g(z) = sum_{k>=0} h((z_k+1)/2) z_k' / 2` and `rho = g / int_0^1 g`.

use std::io::Write;

use crate::asymptotic::{TailRule, S_MAX};
use crate::density::DensityPair;
use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::function_space::SampledFunction;
use crate::orbit::{InverseOrbit, ParamAlpha};
use crate::parallel::par_map;
use crate::quadrature::GradedRule;

pub const SERIES_CAP: usize = 10_000_000;
pub const DEFAULT_SERIES_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct UnitDensityEval {
    pub z: f64,
    pub g: f64,
    pub da_g: f64,
    pub rho: f64,
    pub da_rho: f64,
    pub terms_used: usize,
    pub tail_estimate: f64,
}

/// `int_0^1 g`, written as `int tau d mu` (with `mu` normalized on I), and
/// its parameter derivative.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KacNormalizer {
    pub value: f64,
    pub da_value: f64,
}

/// `h`, `h'` and `d_alpha h` ready for pointwise evaluation.
#[derive(Debug, Clone)]
pub struct InducedDensity {
    pub alpha: ParamAlpha,
    h: SampledFunction,
    h1: SampledFunction,
    dh: SampledFunction,
}

impl InducedDensity {
    pub fn new(alpha: ParamAlpha, pair: &DensityPair) -> Result<Self> {
        Ok(Self {
            alpha,
            h: pair.h.clone(),
            h1: pair.h.derivative(1)?,
            dh: pair.dh()?.clone(),
        })
    }

    pub fn h(&self) -> &SampledFunction {
        &self.h
    }

    /// `h_alpha(x)` where `x` moves with alpha at rate `x.eps`.
    #[inline]
    pub fn eval_dual(&self, x: Dual) -> Dual {
        let [h, h1, dh] = self
            .h
            .grid()
            .eval_many(x.re, [self.h.values(), self.h1.values(), self.dh.values()]);
        Dual::new(h, dh + h1 * x.eps)
    }

    /// `g` and `d_alpha g` at `z` in (0, 1].
    pub fn g(&self, z: f64, tol: f64) -> Result<UnitDensityEval> {
        if !(z.is_finite() && z > 0.0 && z <= 1.0) {
            return Err(Error::Domain {
                what: "z",
                value: z,
                domain: "(0, 1]",
            });
        }
        let a = self.alpha.get();
        let half = |p: Dual| self.eval_dual(Dual::new(0.5 * (p.re + 1.0), 0.5 * p.eps)) * 0.5;
        let mut acc = Dual::default();
        for st in InverseOrbit::new_unchecked(a, z) {
            let w = Dual::new(st.dz, st.da_dz);
            let zk = Dual::new(st.z, st.da_z);
            let fk = half(zk);
            acc += w * fk;
            let mut terms = st.r + 1;
            let s = st.s(a);
            // the tail is about z_k' f(z_k) / s; the rule misses O(s^4) of it
            let estimate = (st.dz * fk.re).abs() * s.powi(3);
            if st.dz == 0.0 || (s <= S_MAX && estimate <= tol) {
                if st.dz > 0.0 {
                    let rule = TailRule::new(Dual::variable(a), zk);
                    acc += w * rule.apply(half);
                    terms += rule.len();
                }
                return Ok(UnitDensityEval {
                    z,
                    g: acc.re,
                    da_g: acc.eps,
                    rho: f64::NAN,
                    da_rho: f64::NAN,
                    terms_used: terms,
                    tail_estimate: estimate,
                });
            }
            if st.r >= SERIES_CAP {
                return Err(Error::TruncationCap {
                    cap: SERIES_CAP,
                    z,
                    partial: acc.re,
                });
            }
        }
        Err(Error::Convergence { alpha: a, value: z })
    }

    pub fn rho(&self, norm: &KacNormalizer, z: f64, tol: f64) -> Result<UnitDensityEval> {
        let e = self.g(z, tol)?;
        Ok(with_rho(e, norm))
    }
}

fn with_rho(mut e: UnitDensityEval, norm: &KacNormalizer) -> UnitDensityEval {
    // int_I h dm = 1 with m normalized on I, so int_0^1 g = value / 2
    let v = norm.value;
    e.rho = 2.0 * e.g / v;
    e.da_rho = 2.0 * (e.da_g * v - e.g * norm.da_value) / (v * v);
    e
}

/// `g` and `d_alpha g` at the nodes of the graded rule on (0, 1].
#[derive(Debug, Clone)]
pub struct UnitDensityTable {
    pub rule: &'static GradedRule,
    pub g: Vec<f64>,
    pub da_g: Vec<f64>,
    /// Evaluations at the innermost cutoff `c` and at `2c`, used to
    /// integrate over `(0, c]`.
    pub tip: [UnitDensityEval; 2],
    pub alpha: f64,
}

/// `int_0^c y` for `y(z) = z^{-e} (P + Q ln z)` fitted through `(c, y1)` and `(2c, y2)`.
fn log_power_remainder(c: f64, e: f64, y1: f64, y2: f64) -> f64 {
    let (l1, l2) = (c.ln(), (2.0 * c).ln());
    let (u1, u2) = (y1 * c.powf(e), y2 * (2.0 * c).powf(e));
    let q = (u2 - u1) / (l2 - l1);
    let p = u1 - q * l1;
    c.powf(1.0 - e) / (1.0 - e) * (p + q * (l1 - 1.0 / (1.0 - e)))
}

impl UnitDensityTable {
    pub fn new(density: &InducedDensity, tol: f64) -> Result<Self> {
        let rule = GradedRule::standard();
        let evals = par_map(0..rule.points.len(), |i| density.g(rule.points[i], tol));
        let evals: Vec<UnitDensityEval> = evals.into_iter().collect::<Result<_>>()?;
        let tip = [density.g(rule.cutoff, tol)?, density.g(2.0 * rule.cutoff, tol)?];
        Ok(Self {
            rule,
            g: evals.iter().map(|e| e.g).collect(),
            da_g: evals.iter().map(|e| e.da_g).collect(),
            tip,
            alpha: density.alpha.get(),
        })
    }

    /// `(int_0^1 f g, int_0^1 f d_alpha g)` for `f ~ x^{-p}` near 0.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, p: f64) -> Result<(f64, f64)> {
        let mut v = 0.0;
        let mut dv = 0.0;
        for (((&x, &w), &g), &dg) in self
            .rule
            .points
            .iter()
            .zip(&self.rule.weights)
            .zip(&self.g)
            .zip(&self.da_g)
        {
            let fx = f(x);
            v += w * fx * g;
            dv += w * fx * dg;
        }
        let exponent = self.alpha + p;
        if exponent >= 1.0 {
            return Err(Error::Quadrature(format!(
                "integrand ~ x^-{exponent} is not integrable at 0"
            )));
        }
        // g ~ z^-alpha and d_alpha g ~ z^-alpha (P + Q ln z) near 0
        let [t1, t2] = &self.tip;
        let (f1, f2) = (f(t1.z), f(t2.z));
        v += log_power_remainder(t1.z, exponent, f1 * t1.g, f2 * t2.g);
        dv += log_power_remainder(t1.z, exponent, f1 * t1.da_g, f2 * t2.da_g);
        if !(v.is_finite() && dv.is_finite()) {
            return Err(Error::Quadrature("non-finite integral".into()));
        }
        Ok((v, dv))
    }

    pub fn normalizer(&self) -> Result<KacNormalizer> {
        let (v, dv) = self.integrate(|_| 1.0, 0.0)?;
        let norm = KacNormalizer {
            value: 2.0 * v,
            da_value: 2.0 * dv,
        };
        if norm.value < 1.0 - 1e-8 {
            return Err(Error::Quadrature(format!(
                "normalizer {} below 1; the induced density is not resolved",
                norm.value
            )));
        }
        Ok(norm)
    }
}

pub fn eval_g(alpha: ParamAlpha, pair: &DensityPair, z: f64, tol: f64) -> Result<UnitDensityEval> {
    InducedDensity::new(alpha, pair)?.g(z, tol)
}

pub fn kac_normalizer(alpha: ParamAlpha, pair: &DensityPair, tol: f64) -> Result<KacNormalizer> {
    let d = InducedDensity::new(alpha, pair)?;
    UnitDensityTable::new(&d, tol)?.normalizer()
}

pub fn eval_rho(
    alpha: ParamAlpha,
    pair: &DensityPair,
    norm: &KacNormalizer,
    z: f64,
) -> Result<UnitDensityEval> {
    InducedDensity::new(alpha, pair)?.rho(norm, z, DEFAULT_SERIES_TOL)
}

/// `rho` and `d_alpha rho` on a list of points, evaluated in parallel.
pub fn profile(
    density: &InducedDensity,
    norm: &KacNormalizer,
    zs: &[f64],
    tol: f64,
) -> Result<Vec<UnitDensityEval>> {
    par_map(0..zs.len(), |i| density.rho(norm, zs[i], tol))
        .into_iter()
        .collect()
}

/// `n` points log-spaced from `z_min` to 1.
pub fn graded_grid(n: usize, z_min: f64) -> Vec<f64> {
    let lo = z_min.ln();
    (0..n)
        .map(|i| (lo * (1.0 - i as f64 / (n - 1) as f64)).exp())
        .collect()
}

pub fn profile_to_csv(rows: &[UnitDensityEval], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "z,rho,da_rho")?;
    for e in rows {
        writeln!(out, "{:.16e},{:.16e},{:.16e}", e.z, e.rho, e.da_rho)?;
    }
    Ok(())
}
