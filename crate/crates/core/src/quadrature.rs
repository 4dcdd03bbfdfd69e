//! Gauss-Legendre rules and the graded rule used for integrals over (0, 1]
//! whose integrands blow up like `x^{-p}` at the origin.

use std::sync::OnceLock;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `(P_n(t), P_n'(t))` by the three-term recurrence.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to [0, 1].
#[derive(Debug, Clone)]
pub struct UnitRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnitRule {
    pub fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Self {
            nodes: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
            weights: w.iter().map(|w| 0.5 * w).collect(),
        }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(a + len * t))
            .sum::<f64>()
            * len
    }
}

pub(crate) fn unit_rule(n: usize) -> &'static UnitRule {
    static R16: OnceLock<UnitRule> = OnceLock::new();
    static R24: OnceLock<UnitRule> = OnceLock::new();
    static R48: OnceLock<UnitRule> = OnceLock::new();
    match n {
        16 => R16.get_or_init(|| UnitRule::new(16)),
        24 => R24.get_or_init(|| UnitRule::new(24)),
        48 => R48.get_or_init(|| UnitRule::new(48)),
        _ => panic!("no cached rule of order {n}"),
    }
}

/// Composite rule on (0, 1]: one panel on [1/2, 1] and dyadic panels
/// `[2^{-k-1}, 2^{-k}]` toward the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Left end of the innermost panel; the integral over `(0, cutoff]` is
    /// handled by [`GradedRule::remainder`].
    pub cutoff: f64,
}

pub const GRADED_LEVELS: usize = 60;

impl GradedRule {
    pub fn new(levels: usize) -> Self {
        let outer = unit_rule(24);
        let inner = unit_rule(16);
        let mut points = Vec::with_capacity(24 + 16 * levels);
        let mut weights = Vec::with_capacity(points.capacity());
        for (t, w) in outer.nodes.iter().zip(&outer.weights) {
            points.push(0.5 + 0.5 * t);
            weights.push(0.5 * w);
        }
        let mut hi = 0.5;
        for _ in 0..levels {
            let lo = 0.5 * hi;
            for (t, w) in inner.nodes.iter().zip(&inner.weights) {
                points.push(lo + (hi - lo) * t);
                weights.push((hi - lo) * w);
            }
            hi = lo;
        }
        Self {
            points,
            weights,
            cutoff: hi,
        }
    }

    pub fn standard() -> &'static GradedRule {
        static RULE: OnceLock<GradedRule> = OnceLock::new();
        RULE.get_or_init(|| GradedRule::new(GRADED_LEVELS))
    }

    /// Estimate of `int_0^cutoff f` when `f ~ value_at_cutoff * (x/cutoff)^{-p}`.
    pub fn remainder(&self, value_at_cutoff: f64, p: f64) -> f64 {
        value_at_cutoff * self.cutoff / (1.0 - p)
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}
