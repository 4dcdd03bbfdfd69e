//! Chebyshev-Lobatto collocation on I = [1/2, 1].

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};

pub const I_LO: f64 = 0.5;
pub const I_HI: f64 = 1.0;
/// Length of I.
pub const I_LEN: f64 = I_HI - I_LO;

pub const MIN_NODES: usize = 8;
pub const DEFAULT_NODES: usize = 128;

/// Node layout shared by every function sampled at the same resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebGrid {
    pub nodes: Vec<f64>,
    bary: Vec<f64>,
    /// Quadrature weights for the normalized measure m (they sum to 1).
    pub m_weights: Vec<f64>,
    /// First- and second-derivative matrices, row-major.
    diff: Vec<f64>,
    diff2: Vec<f64>,
}

impl ChebGrid {
    pub fn new(n: usize) -> Result<Arc<Self>> {
        if n < MIN_NODES {
            return Err(Error::Domain {
                what: "node count",
                value: n as f64,
                domain: "[8, inf)",
            });
        }
        let m = (n - 1) as f64;
        let pi = std::f64::consts::PI;
        // sine form keeps the layout symmetric to the last bit
        let nodes: Vec<f64> = (0..n)
            .map(|j| {
                let t = (pi * (m - 2.0 * j as f64) / (2.0 * m)).sin();
                0.75 - 0.25 * t
            })
            .collect();
        let bary: Vec<f64> = (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n - 1 {
                    0.5 * sign
                } else {
                    sign
                }
            })
            .collect();
        let mut diff = vec![0.0; n * n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let d = (bary[j] / bary[i]) / (nodes[i] - nodes[j]);
                    diff[i * n + j] = d;
                    diag -= d;
                }
            }
            diff[i * n + i] = diag;
        }
        // second-derivative matrix from the closed form, more accurate than D*D
        let mut diff2 = vec![0.0; n * n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let d = 2.0 * diff[i * n + j] * (diff[i * n + i] - 1.0 / (nodes[i] - nodes[j]));
                    diff2[i * n + j] = d;
                    diag -= d;
                }
            }
            diff2[i * n + i] = diag;
        }
        Ok(Arc::new(Self {
            m_weights: clenshaw_curtis(n),
            nodes,
            bary,
            diff,
            diff2,
        }))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn diff_matrix(&self) -> &[f64] {
        &self.diff
    }

    /// Barycentric interpolation weights at `x`: `f(x) = sum_j row[j] f_j`.
    pub fn interp_row(&self, x: f64, row: &mut [f64]) {
        debug_assert_eq!(row.len(), self.len());
        let mut total = 0.0;
        for (j, (&xj, &bj)) in self.nodes.iter().zip(&self.bary).enumerate() {
            let d = x - xj;
            if d == 0.0 {
                row.iter_mut().for_each(|r| *r = 0.0);
                row[j] = 1.0;
                return;
            }
            let c = bj / d;
            row[j] = c;
            total += c;
        }
        let inv = 1.0 / total;
        row.iter_mut().for_each(|r| *r *= inv);
    }

    /// Interpolate several value vectors at `x` sharing one weight pass.
    pub fn eval_many<const K: usize>(&self, x: f64, values: [&[f64]; K]) -> [f64; K] {
        let mut num = [0.0; K];
        let mut total = 0.0;
        for (j, (&xj, &bj)) in self.nodes.iter().zip(&self.bary).enumerate() {
            let d = x - xj;
            if d == 0.0 {
                return values.map(|v| v[j]);
            }
            let c = bj / d;
            total += c;
            for k in 0..K {
                num[k] += c * values[k][j];
            }
        }
        num.map(|v| v / total)
    }

    fn apply_diff(&self, values: &[f64], order: usize) -> Vec<f64> {
        let n = self.len();
        let mat = if order == 2 { &self.diff2 } else { &self.diff };
        (0..n)
            .map(|i| {
                mat[i * n..(i + 1) * n]
                    .iter()
                    .zip(values)
                    .map(|(d, v)| d * v)
                    .sum()
            })
            .collect()
    }
}

/// Clenshaw-Curtis weights at the Lobatto nodes, scaled so they sum to 1.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let m = n - 1;
    let pi = std::f64::consts::PI;
    let mut w = vec![0.0; n];
    for (j, wj) in w.iter_mut().enumerate() {
        let theta = pi * j as f64 / m as f64;
        let mut s = 1.0;
        for k in 1..=m / 2 {
            let b = if 2 * k == m { 1.0 } else { 2.0 };
            s -= b * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
        }
        let c = if j == 0 || j == m { 1.0 } else { 2.0 };
        // weights on [-1, 1] sum to 2; halve for the normalized measure
        *wj = 0.5 * c * s / m as f64;
    }
    w
}

/// A smooth function on I represented by its values at Chebyshev-Lobatto nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Arc<ChebGrid>,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Arc<ChebGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: "sample value",
                value: *bad,
                domain: "finite reals",
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Arc<ChebGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes.iter().map(|&x| f(x)).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &Arc<ChebGrid>, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    pub(crate) fn from_values_unchecked(grid: Arc<ChebGrid>, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<ChebGrid> {
        &self.grid
    }

    pub fn nodes(&self) -> &[f64] {
        &self.grid.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Barycentric evaluation at `x` in I.
    pub fn interpolate(&self, x: f64) -> Result<f64> {
        if !(x.is_finite() && (I_LO..=I_HI).contains(&x)) {
            return Err(Error::Domain {
                what: "x",
                value: x,
                domain: "[1/2, 1]",
            });
        }
        Ok(self.eval(x))
    }

    /// Unchecked evaluation; callers guarantee `x` lies in I.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.grid.eval_many(x, [&self.values])[0]
    }

    pub fn derivative(&self, order: usize) -> Result<Self> {
        if !(order == 1 || order == 2) {
            return Err(Error::Precondition(format!(
                "derivative order must be 1 or 2, got {order}"
            )));
        }
        let v = self.grid.apply_diff(&self.values, order);
        Ok(Self::from_values_unchecked(self.grid.clone(), v))
    }

    /// Integral against the normalized Lebesgue measure on I.
    pub fn integrate_m(&self) -> f64 {
        self.grid
            .m_weights
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values_unchecked(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.len(), other.len());
        let v = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values_unchecked(self.grid.clone(), v)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Sup norms on an oversampled uniform grid of `10 N` points.
    pub fn norms(&self) -> NormReport {
        let d1 = self.derivative(1).expect("order 1");
        let d2 = self.derivative(2).expect("order 2");
        let n = 10 * self.len();
        let (mut c0, mut c1, mut c2) = (0.0_f64, 0.0_f64, 0.0_f64);
        let (mut l, mut p) = (0.0_f64, 0.0_f64);
        let mut positive = true;
        for i in 0..n {
            let x = I_LO + I_LEN * i as f64 / (n - 1) as f64;
            let [f, f1, f2] = self.grid.eval_many(x, [&self.values, &d1.values, &d2.values]);
            c0 = c0.max(f.abs());
            c1 = c1.max(f1.abs());
            c2 = c2.max(f2.abs());
            if f > 0.0 {
                l = l.max((f1 / f).abs());
                p = p.max((f2 / f).abs());
            } else {
                positive = false;
            }
        }
        NormReport {
            c0,
            c1,
            c2,
            l: positive.then_some(l),
            p: positive.then_some(p),
        }
    }

    pub fn to_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "node,value")?;
        for (x, v) in self.nodes().iter().zip(&self.values) {
            writeln!(out, "{x:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

/// Sup norms of `f, f', f''` and the log-derivative norms for positive `f`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct NormReport {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// `||f'/f||_inf`
    pub l: Option<f64>,
    /// `||f''/f||_inf`
    pub p: Option<f64>,
}

impl NormReport {
    pub fn c1_norm(&self) -> f64 {
        self.c0.max(self.c1)
    }

    pub fn c2_norm(&self) -> f64 {
        self.c0.max(self.c1).max(self.c2)
    }

    /// `(L, P)`, or an error if the function is not positive on I.
    pub fn log_norms(&self) -> Result<(f64, f64)> {
        match (self.l, self.p) {
            (Some(l), Some(p)) => Ok((l, p)),
            _ => Err(Error::Precondition(
                "L and P norms need a positive function".into(),
            )),
        }
    }
}
