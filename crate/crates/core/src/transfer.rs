//! Transfer operator `P_alpha` of the induced map and its parameter
//! derivative `Q_alpha`, assembled as matrices on the collocation grid.

use std::sync::Arc;

use crate::asymptotic::{TailRule, S_MAX};
use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::function_space::{ChebGrid, SampledFunction};
use crate::orbit::{logg, InverseOrbit, ParamAlpha};
use crate::parallel::par_map;

/// How the branch series beyond `r_max` is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum TailMode {
    /// Neglect branches beyond `r_max`.
    Drop,
    /// Sum branches beyond `r_max` with the asymptotic tail rule.
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TruncationPlan {
    pub r_max: usize,
    /// Estimate of the neglected (or mis-summed) branch mass.
    pub tail_bound: f64,
    pub mode: TailMode,
}

/// Largest cutoff a dropped-tail plan may ask for.
pub const DROP_CAP: usize = 50_000_000;

/// `sup_{z in I} z_r' * r^{(alpha+1)/alpha}` over a sample of depths.
pub fn fitted_decay_constant(alpha: ParamAlpha) -> f64 {
    let a = alpha.get();
    let p = (a + 1.0) / a;
    let mut c = 0.0_f64;
    for z in [0.5, 0.75, 1.0] {
        for s in InverseOrbit::new_unchecked(a, z).take(4001).skip(1) {
            c = c.max(s.dz * (s.r as f64).powf(p));
        }
    }
    c
}

/// `int_R^inf x^{-p} (ln x)^3 dx` for `p > 1`.
pub(crate) fn log3_tail(r: f64, p: f64) -> f64 {
    let k = p - 1.0;
    let l = r.ln().max(1.0);
    r.powf(-k) * (l.powi(3) / k + 3.0 * l * l / (k * k) + 6.0 * l / k.powi(3) + 6.0 / k.powi(4))
}

/// Fitted bound on `sum_{r>R} C r^{-(alpha+1)/alpha + e} (logg r)^3`.
pub fn tail_estimate(c: f64, alpha: f64, weight_exponent: f64, r: usize) -> f64 {
    let p = (alpha + 1.0) / alpha - weight_exponent;
    let r = (r.max(3)) as f64;
    c * (logg(r as u64).powi(3) * r.powf(-p) + log3_tail(r, p))
}

/// Smallest cutoff whose dropped tail is below `tol`.
pub fn plan_truncation(alpha: ParamAlpha, tol: f64, weight_exponent: f64) -> Result<TruncationPlan> {
    if !(tol > 0.0) {
        return Err(Error::Domain {
            what: "tol",
            value: tol,
            domain: "(0, inf)",
        });
    }
    let a = alpha.get();
    if !(0.0..1.0 / a).contains(&weight_exponent) {
        return Err(Error::Infeasible(format!(
            "weighted branch series diverges for alpha = {a}, exponent = {weight_exponent}"
        )));
    }
    let c = fitted_decay_constant(alpha);
    let bound = |r: usize| tail_estimate(c, a, weight_exponent, r);
    let mut hi = 4usize;
    while bound(hi) >= tol {
        hi *= 2;
        if hi > DROP_CAP {
            return Err(Error::Infeasible(format!(
                "dropping the tail below {tol:e} needs more than {DROP_CAP} branches at alpha = {a}"
            )));
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if bound(mid) < tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(TruncationPlan {
        r_max: hi,
        tail_bound: bound(hi),
        mode: TailMode::Drop,
    })
}

impl TruncationPlan {
    /// Explicit branches up to the depth where every base point in I is in the
    /// asymptotic regime, the rest summed by the tail rule.
    pub fn accelerated(alpha: ParamAlpha) -> Self {
        let a = alpha.get();
        // z_r is increasing in z, so z = 1 is the slowest orbit
        let mut r_max = 0;
        for s in InverseOrbit::new_unchecked(a, 1.0) {
            r_max = s.r;
            if s.s(a) <= S_MAX {
                break;
            }
        }
        // rule error is O(s^4) relative to the tail it replaces
        let c = fitted_decay_constant(alpha);
        Self {
            r_max,
            tail_bound: tail_estimate(c, a, 0.0, r_max) * S_MAX.powi(4),
            mode: TailMode::Asymptotic,
        }
    }
}

/// `P_alpha` and `Q_alpha` as dense matrices on a collocation grid.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    pub alpha: ParamAlpha,
    pub plan: TruncationPlan,
    grid: Arc<ChebGrid>,
    p: Vec<f64>,
    q: Vec<f64>,
}

struct NodeRows {
    p: Vec<f64>,
    q_val: Vec<f64>,
    q_der: Vec<f64>,
}

impl TransferOperator {
    pub fn new(alpha: ParamAlpha, grid: &Arc<ChebGrid>, plan: TruncationPlan) -> Result<Self> {
        let n = grid.len();
        let a = alpha.get();
        let rows = par_map(0..n, |i| node_rows(a, grid, grid.nodes[i], &plan));
        let rows: Vec<NodeRows> = rows.into_iter().collect::<Result<_>>()?;
        let d = grid.diff_matrix();
        let mut p = vec![0.0; n * n];
        let mut q = vec![0.0; n * n];
        for (i, row) in rows.iter().enumerate() {
            p[i * n..(i + 1) * n].copy_from_slice(&row.p);
            // h'(x) = b(x)^T D h, so the derivative part enters through D^T
            let qi = &mut q[i * n..(i + 1) * n];
            qi.copy_from_slice(&row.q_val);
            for (k, &c) in row.q_der.iter().enumerate() {
                if c != 0.0 {
                    for (qj, dkj) in qi.iter_mut().zip(&d[k * n..(k + 1) * n]) {
                        *qj += c * dkj;
                    }
                }
            }
        }
        Ok(Self {
            alpha,
            plan,
            grid: grid.clone(),
            p,
            q,
        })
    }

    pub fn grid(&self) -> &Arc<ChebGrid> {
        &self.grid
    }

    fn matvec(&self, m: &[f64], h: &SampledFunction) -> SampledFunction {
        let n = self.grid.len();
        let v = h.values();
        let out = (0..n)
            .map(|i| m[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect();
        SampledFunction::from_values_unchecked(self.grid.clone(), out)
    }

    pub fn apply_p(&self, h: &SampledFunction) -> SampledFunction {
        self.matvec(&self.p, h)
    }

    pub fn apply_q(&self, h: &SampledFunction) -> SampledFunction {
        self.matvec(&self.q, h)
    }

    /// Row-major matrix of `P_alpha` on the grid values.
    pub fn p_matrix(&self) -> &[f64] {
        &self.p
    }
}

fn node_rows(a: f64, grid: &ChebGrid, z: f64, plan: &TruncationPlan) -> Result<NodeRows> {
    let n = grid.len();
    let mut rows = NodeRows {
        p: vec![0.0; n],
        q_val: vec![0.0; n],
        q_der: vec![0.0; n],
    };
    let mut b = vec![0.0; n];
    let mut add = |rows: &mut NodeRows, x: f64, cp: f64, cq: f64, cd: f64| {
        grid.interp_row(x, &mut b);
        for j in 0..n {
            rows.p[j] += cp * b[j];
            rows.q_val[j] += cq * b[j];
            rows.q_der[j] += cd * b[j];
        }
    };
    let mut last = None;
    for s in InverseOrbit::new_unchecked(a, z).take(plan.r_max + 1) {
        let w = 0.5 * s.dz;
        add(&mut rows, 0.5 * (s.z + 1.0), w, 0.5 * s.da_dz, w * 0.5 * s.da_z);
        last = Some(s);
    }
    let last = last.ok_or(Error::Convergence { alpha: a, value: z })?;
    if last.r != plan.r_max {
        return Err(Error::Convergence {
            alpha: a,
            value: last.z,
        });
    }
    if plan.mode == TailMode::Asymptotic && last.dz > 0.0 {
        let rule = TailRule::new(Dual::variable(a), Dual::new(last.z, last.da_z));
        let wz = Dual::new(last.dz, last.da_dz);
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            // tail term z_R' w_k h((1+p_k)/2) / 2
            let c = wz * w;
            add(&mut rows, 0.5 * (p.re + 1.0), 0.5 * c.re, 0.5 * c.eps, 0.25 * c.re * p.eps);
        }
    }
    Ok(rows)
}

/// `P_alpha h` with a freshly assembled operator.
pub fn apply_p(alpha: ParamAlpha, h: &SampledFunction, plan: TruncationPlan) -> Result<SampledFunction> {
    Ok(TransferOperator::new(alpha, h.grid(), plan)?.apply_p(h))
}

/// `Q_alpha h` with a freshly assembled operator.
pub fn apply_q(alpha: ParamAlpha, h: &SampledFunction, plan: TruncationPlan) -> Result<SampledFunction> {
    Ok(TransferOperator::new(alpha, h.grid(), plan)?.apply_q(h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha(a: f64) -> ParamAlpha {
        ParamAlpha::new(a).unwrap()
    }

    #[test]
    fn plan_examples() {
        let p = plan_truncation(alpha(0.5), 1e-10, 0.0).unwrap();
        assert!(p.tail_bound < 1e-10);
        let lo = plan_truncation(alpha(0.25), 1e-4, 0.0).unwrap();
        let hi = plan_truncation(alpha(0.75), 1e-4, 0.0).unwrap();
        assert!(lo.r_max < hi.r_max);
        let c = fitted_decay_constant(alpha(0.5));
        let mut prev = f64::INFINITY;
        for r in [10, 100, 1000, 10_000] {
            let t = tail_estimate(c, 0.5, 0.0, r);
            assert!(t < prev);
            prev = t;
        }
        assert!(plan_truncation(alpha(0.5), 0.0, 0.0).is_err());
        assert!(plan_truncation(alpha(0.8), 1e-12, 1.3).is_err());
    }

    #[test]
    fn accelerated_plan_reaches_the_asymptotic_regime() {
        for a in [0.2, 0.5, 0.8] {
            let plan = TruncationPlan::accelerated(alpha(a));
            let last = InverseOrbit::new_unchecked(a, 1.0).nth(plan.r_max).unwrap();
            assert!(last.s(a) <= S_MAX);
            assert!(plan.tail_bound < 1e-10);
        }
    }
}
