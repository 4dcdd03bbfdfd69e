//! Invariant density of the induced map and its parameter derivative.

use crate::error::{Error, Result};
use crate::function_space::SampledFunction;
use crate::transfer::TransferOperator;

pub const MAX_ITERATIONS: usize = 10_000;
/// Term-ratio level at which the derivative series is deemed non-geometric.
pub const STALL_RATIO: f64 = 0.999;
pub const STALL_RUN: usize = 50;
pub const MAX_SERIES_TERMS: usize = 100_000;

/// `h_alpha` and, once filled, `d_alpha h_alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPair {
    pub h: SampledFunction,
    pub dh: Option<SampledFunction>,
    pub iterations: usize,
    pub residual: f64,
    pub series_terms: usize,
    pub series_tail: f64,
}

impl DensityPair {
    pub fn dh(&self) -> Result<&SampledFunction> {
        self.dh
            .as_ref()
            .ok_or_else(|| Error::Precondition("derivative density not solved".into()))
    }
}

fn max_abs_diff(a: &SampledFunction, b: &SampledFunction) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Power iteration `h <- P h` from `h = 1`, renormalized every step.
pub fn solve_h(op: &TransferOperator, tol: f64) -> Result<DensityPair> {
    if !(tol > 0.0) {
        return Err(Error::Domain {
            what: "tol",
            value: tol,
            domain: "(0, inf)",
        });
    }
    let mut h = SampledFunction::constant(op.grid(), 1.0);
    let mut trace = Vec::new();
    for it in 1..=MAX_ITERATIONS {
        let ph = op.apply_p(&h);
        let mass = ph.integrate_m();
        let next = ph.scaled(1.0 / mass);
        let residual = max_abs_diff(&op.apply_p(&next), &next);
        h = next;
        trace.push(residual);
        if residual <= tol {
            log::debug!("alpha = {}: h converged in {it} iterations, residual {residual:e}", op.alpha);
            return Ok(DensityPair {
                h,
                dh: None,
                iterations: it,
                residual,
                series_terms: 0,
                series_tail: 0.0,
            });
        }
        // stagnation at roundoff level: no point iterating further
        if it > 200 && trace[it - 1] >= trace[it - 101] {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: trace.len(),
        residual: *trace.last().unwrap_or(&f64::NAN),
        trace,
    })
}

/// `||f||_{C^1}` evaluated at the nodes.
fn c1_at_nodes(f: &SampledFunction) -> f64 {
    let d = f.derivative(1).expect("order 1");
    f.sup().max(d.sup())
}

/// Neumann series `sum_k P^k Q h` for the parameter derivative of `h`.
///
/// Each term is projected back onto zero mean along `h`; in exact arithmetic
/// this changes nothing, in floating point it stops the mean from drifting.
pub fn solve_dh(op: &TransferOperator, pair: DensityPair, tol: f64) -> Result<DensityPair> {
    if !(tol > 0.0) {
        return Err(Error::Domain {
            what: "tol",
            value: tol,
            domain: "(0, inf)",
        });
    }
    let h = &pair.h;
    let project = |f: SampledFunction| {
        let m = f.integrate_m();
        f.zip_with(h, |a, b| a - m * b)
    };
    let n = h.len();
    let mut sum = vec![0.0; n];
    let mut comp = vec![0.0; n];
    let mut term = project(op.apply_q(h));
    let mut prev = c1_at_nodes(&term);
    let mut run = 0;
    let mut k = 0;
    let mut last_norm = prev;
    while k < MAX_SERIES_TERMS {
        // Neumaier summation per node
        for ((s, c), &t) in sum.iter_mut().zip(comp.iter_mut()).zip(term.values()) {
            let y = *s + t;
            if s.abs() >= t.abs() {
                *c += (*s - y) + t;
            } else {
                *c += (t - y) + *s;
            }
            *s = y;
        }
        k += 1;
        if last_norm < tol {
            break;
        }
        term = project(op.apply_p(&term));
        let norm = c1_at_nodes(&term);
        let ratio = if prev > 0.0 { norm / prev } else { 0.0 };
        run = if ratio > STALL_RATIO { run + 1 } else { 0 };
        if run >= STALL_RUN {
            return Err(Error::NonGeometric { term: k, ratio });
        }
        prev = norm;
        last_norm = norm;
    }
    let dh: Vec<f64> = sum.iter().zip(&comp).map(|(s, c)| s + c).collect();
    let dh = SampledFunction::new(h.grid().clone(), dh)?;
    log::debug!("alpha = {}: dh series used {k} terms, tail {last_norm:e}", op.alpha);
    Ok(DensityPair {
        dh: Some(dh),
        series_terms: k,
        series_tail: last_norm,
        ..pair
    })
}

/// `||P^k f||_inf` for `k = 0..=n`, for a mean-zero `f`.
pub fn contraction_probe(op: &TransferOperator, f: &SampledFunction, n: usize) -> Result<Vec<f64>> {
    let mean = f.integrate_m();
    if mean.abs() > 1e-10 {
        return Err(Error::Precondition(format!(
            "contraction probe needs a mean-zero function, got mean {mean:e}"
        )));
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut g = f.clone();
    out.push(g.sup());
    for _ in 0..n {
        g = op.apply_p(&g);
        out.push(g.sup());
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against the index, over entries above `floor`.
pub fn fitted_rate(values: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > floor)
        .map(|(i, &v)| (i as f64, v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((sxy / sxx).exp())
}
