//! Forward-mode dual numbers carrying one directional derivative.
//!
//! Used wherever a closed-form expression has to be differentiated with
//! respect to the map parameter: the `eps` part holds d/dalpha.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    #[inline]
    pub const fn new(re: f64, eps: f64) -> Self {
        Self { re, eps }
    }

    #[inline]
    pub const fn constant(re: f64) -> Self {
        Self { re, eps: 0.0 }
    }

    #[inline]
    pub const fn variable(re: f64) -> Self {
        Self { re, eps: 1.0 }
    }

    #[inline]
    pub fn ln(self) -> Self {
        Self::new(self.re.ln(), self.eps / self.re)
    }

    #[inline]
    pub fn exp(self) -> Self {
        let e = self.re.exp();
        Self::new(e, e * self.eps)
    }

    #[inline]
    pub fn recip(self) -> Self {
        Self::new(1.0 / self.re, -self.eps / (self.re * self.re))
    }

    /// `self^p` for a positive base.
    #[inline]
    pub fn powd(self, p: Dual) -> Self {
        let v = self.re.powf(p.re);
        Self::new(v, v * (p.eps * self.re.ln() + p.re * self.eps / self.re))
    }

    #[inline]
    pub fn powf(self, p: f64) -> Self {
        let v = self.re.powf(p);
        Self::new(v, p * self.re.powf(p - 1.0) * self.eps)
    }

    #[inline]
    pub fn scale(self, c: f64) -> Self {
        Self::new(self.re * c, self.eps * c)
    }
}

impl From<f64> for Dual {
    fn from(x: f64) -> Self {
        Self::constant(x)
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, o: Dual) {
        self.re += o.re;
        self.eps += o.eps;
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.re;
        Dual::new(self.re * inv, (self.eps * o.re - self.re * o.eps) * inv * inv)
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.eps)
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: f64) -> Dual {
        Dual::new(self.re + o, self.eps)
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: f64) -> Dual {
        Dual::new(self.re - o, self.eps)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: f64) -> Dual {
        self.scale(o)
    }
}

impl Div<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: f64) -> Dual {
        self.scale(1.0 / o)
    }
}

impl Mul<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        o.scale(self)
    }
}

impl Add<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        o + self
    }
}

impl Div<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        o.recip().scale(self)
    }
}

impl Sub<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self - o.re, -o.eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn chain_rule_matches_finite_difference() {
        let x = 0.37;
        let f = |d: Dual| (d * d + 1.0).ln() / (d.exp() + 2.0) + d.powd(d * 0.5) - 3.0 / d;
        let g = |x: f64| (x * x + 1.0).ln() / (x.exp() + 2.0) + x.powf(x * 0.5) - 3.0 / x;
        let got = f(Dual::variable(x));
        assert!((got.re - g(x)).abs() < 1e-15);
        assert!((got.eps - fd(g, x)).abs() < 1e-8);
    }

    #[test]
    fn powf_and_recip() {
        let d = Dual::variable(2.0).powf(1.5).recip();
        assert!((d.eps - fd(|x| 1.0 / x.powf(1.5), 2.0)).abs() < 1e-9);
    }
}
