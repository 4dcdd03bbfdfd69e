//! Observables on [0, 1]: smooth ones with a derivative, or ones with an
//! integrable power singularity at the origin.

use std::fmt;
use std::sync::Arc;

use crate::dual::Dual;
use crate::error::{Error, Result};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum ObservableKind {
    C1,
    /// In `L^q[0, 1]`, possibly unbounded at 0.
    LqSingular { q: f64 },
}

#[derive(Clone)]
pub struct Observable {
    pub name: String,
    pub kind: ObservableKind,
    eval: RealFn,
    deriv: Option<RealFn>,
    /// `max(||phi||_inf, ||phi'||_inf)` for the C1 kind.
    pub c1_norm: Option<f64>,
    /// Exponent `p` of the `x^{-p}` blow-up at 0, if any.
    pub singular_exponent: f64,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("c1_norm", &self.c1_norm)
            .finish()
    }
}

impl Observable {
    pub fn c1(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let eval: RealFn = Arc::new(eval);
        let deriv: RealFn = Arc::new(deriv);
        let c1_norm = sampled_c1_norm(&*eval, &*deriv);
        Self {
            name: name.into(),
            kind: ObservableKind::C1,
            eval,
            deriv: Some(deriv),
            c1_norm: Some(c1_norm),
            singular_exponent: 0.0,
        }
    }

    pub fn singular(
        name: impl Into<String>,
        q: f64,
        singular_exponent: f64,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(q > 1.0) {
            return Err(Error::Domain {
                what: "q",
                value: q,
                domain: "(1, inf]",
            });
        }
        if !(0.0..1.0).contains(&singular_exponent) || singular_exponent * q >= 1.0 {
            return Err(Error::Precondition(format!(
                "x^-{singular_exponent} is not in L^{q}"
            )));
        }
        Ok(Self {
            name: name.into(),
            kind: ObservableKind::LqSingular { q },
            eval: Arc::new(eval),
            deriv: None,
            c1_norm: None,
            singular_exponent,
        })
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        let mut o = Self::c1(format!("const:{c}"), move |_| c, |_| 0.0);
        o.c1_norm = Some(c.abs());
        o
    }

    pub fn identity() -> Self {
        Self::c1("x", |x| x, |_| 1.0)
    }

    /// `cos(2 pi k x)`
    pub fn cosine(k: f64) -> Self {
        let w = 2.0 * std::f64::consts::PI * k;
        let mut o = Self::c1(format!("cos:{k}"), move |x| (w * x).cos(), move |x| -w * (w * x).sin());
        o.c1_norm = Some(1.0_f64.max(w.abs()));
        o
    }

    /// `x^p`. Smooth for `p = 0` or `p >= 1`, singular for `p < 0`.
    pub fn power(p: f64) -> Result<Self> {
        if !p.is_finite() || p <= -1.0 {
            return Err(Error::Domain {
                what: "power",
                value: p,
                domain: "(-1, inf)",
            });
        }
        let name = format!("pow:{p}");
        if p == 0.0 {
            return Ok(Self::one());
        }
        if p >= 1.0 {
            let mut o = Self::c1(name, move |x| x.powf(p), move |x| p * x.powf(p - 1.0));
            o.c1_norm = Some(p.max(1.0));
            return Ok(o);
        }
        if p > 0.0 {
            // bounded but not differentiable at 0
            return Self::singular(name, f64::INFINITY, 0.0, move |x| x.powf(p));
        }
        let q = 0.99 / -p;
        Self::singular(name, q, -p, move |x| x.powf(p))
    }

    /// `sum_k coeffs[k] x^k`
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parse("polynomial needs finite coefficients".into()));
        }
        let name = format!(
            "poly:{}",
            coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
        );
        let c2 = coeffs.clone();
        Ok(Self::c1(
            name,
            move |x| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            move |x| {
                c2.iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
            },
        ))
    }

    /// Parse `NAME[:params]`, e.g. `x`, `one`, `cos:2`, `pow:-0.1`, `poly:1,0,3`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, params) = match text.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (text.trim(), None),
        };
        let nums = |p: Option<&str>| -> Result<Vec<f64>> {
            p.map(|s| {
                s.split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::Parse(format!("bad number '{t}' in '{text}': {e}")))
                    })
                    .collect()
            })
            .unwrap_or(Ok(Vec::new()))
        };
        let single = |p: Option<&str>, default: Option<f64>| -> Result<f64> {
            let v = nums(p)?;
            match (v.as_slice(), default) {
                ([x], _) => Ok(*x),
                ([], Some(d)) => Ok(d),
                _ => Err(Error::Parse(format!("'{text}' takes exactly one parameter"))),
            }
        };
        match name {
            "one" => Ok(Self::one()),
            "const" => Ok(Self::constant(single(params, None)?)),
            "x" => Ok(Self::identity()),
            "cos" => Ok(Self::cosine(single(params, Some(1.0))?)),
            "pow" => Self::power(single(params, None)?),
            "poly" => Self::polynomial(nums(params)?),
            _ => Err(Error::Parse(format!(
                "unknown observable '{name}' (expected one, const, x, cos, pow, poly)"
            ))),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn deriv(&self, x: f64) -> Option<f64> {
        self.deriv.as_ref().map(|d| d(x))
    }

    pub fn is_c1(&self) -> bool {
        matches!(self.kind, ObservableKind::C1)
    }

    /// Value and derivative at a point carrying a parameter derivative.
    /// Requires the C1 kind.
    #[inline]
    pub fn eval_dual(&self, x: Dual) -> Dual {
        let d = self
            .deriv
            .as_ref()
            .expect("eval_dual needs a differentiable observable");
        Dual::new((self.eval)(x.re), d(x.re) * x.eps)
    }

    pub fn require_c1(&self) -> Result<()> {
        if self.is_c1() {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "observable '{}' is not C1; use the density route",
                self.name
            )))
        }
    }

    /// `c * phi`
    pub fn scaled(&self, c: f64) -> Self {
        let (e, d) = (self.eval.clone(), self.deriv.clone());
        Self {
            name: format!("{c}*({})", self.name),
            kind: self.kind,
            eval: Arc::new(move |x| c * e(x)),
            deriv: d.map(|d| Arc::new(move |x| c * d(x)) as RealFn),
            c1_norm: self.c1_norm.map(|n| n * c.abs()),
            singular_exponent: self.singular_exponent,
        }
    }

    /// `phi + c`
    pub fn shifted(&self, c: f64) -> Self {
        let e = self.eval.clone();
        Self {
            name: format!("({})+{c}", self.name),
            kind: self.kind,
            eval: Arc::new(move |x| e(x) + c),
            deriv: self.deriv.clone(),
            c1_norm: self.c1_norm.map(|n| n + c.abs()),
            singular_exponent: self.singular_exponent,
        }
    }
}

fn sampled_c1_norm(f: &dyn Fn(f64) -> f64, d: &dyn Fn(f64) -> f64) -> f64 {
    (0..=2000)
        .map(|i| i as f64 / 2000.0)
        .fold(0.0_f64, |m, x| m.max(f(x).abs()).max(d(x).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_builtins() {
        assert_eq!(Observable::parse("x").unwrap().eval(0.3), 0.3);
        assert_eq!(Observable::parse("one").unwrap().eval(0.3), 1.0);
        assert_eq!(Observable::parse("const:2.5").unwrap().eval(0.9), 2.5);
        let c = Observable::parse("cos:1").unwrap();
        assert!((c.eval(0.5) + 1.0).abs() < 1e-15);
        assert!((c.c1_norm.unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        let p = Observable::parse("poly:1,0,3").unwrap();
        assert_eq!(p.eval(2.0), 13.0);
        assert_eq!(p.deriv(2.0), Some(12.0));
        let s = Observable::parse("pow:-0.1").unwrap();
        assert!(matches!(s.kind, ObservableKind::LqSingular { q } if (q - 9.9).abs() < 1e-12));
        assert!(s.require_c1().is_err());
    }

    #[test]
    fn parse_errors() {
        for bad in ["nope", "cos:a", "const", "const:1,2", "poly:", "pow:-1.5"] {
            assert!(Observable::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn dual_evaluation_uses_chain_rule() {
        let c = Observable::cosine(1.0);
        let v = c.eval_dual(Dual::new(0.2, 0.5));
        assert!((v.eps - 0.5 * c.deriv(0.2).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn scale_and_shift() {
        let x = Observable::identity();
        assert_eq!(x.scaled(3.0).eval(0.5), 1.5);
        assert_eq!(x.scaled(3.0).deriv(0.5), Some(3.0));
        assert_eq!(x.shifted(2.0).eval(0.5), 2.5);
        assert_eq!(x.shifted(2.0).deriv(0.5), Some(1.0));
    }
}
