//! Expectations `int phi d nu_alpha` and their parameter derivatives.
//!
//! Two independent routes:
//! * Kac quotient: `int Phi d mu / int tau d mu` on the induced system,
//!   differentiated branch by branch;
//! * density integral: `int_0^1 phi rho` and `int_0^1 phi d_alpha rho`.

use std::io::Write;

use serde::Serialize;

use crate::asymptotic::TailRule;
use crate::density::DensityPair;
use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::observable::{Observable, ObservableKind};
use crate::orbit::{InverseOrbit, ParamAlpha};
use crate::parallel::par_map;
use crate::pipeline::{PipelineConfig, Solved};
use crate::transfer::{TailMode, TruncationPlan};
use crate::unit_density::{InducedDensity, KacNormalizer, UnitDensityTable, DEFAULT_SERIES_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    KacQuotient,
    DensityIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    /// Fixed-point residual of the induced density.
    pub residual: f64,
    /// Last term norm of the derivative series.
    pub series_tail: f64,
    /// Branch-series truncation estimate.
    pub truncation_tail: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponseResult {
    pub alpha: f64,
    pub expectation: f64,
    pub derivative: f64,
    pub route: Route,
    pub diagnostics: Diagnostics,
}

fn diagnostics(pair: &DensityPair, plan: &TruncationPlan) -> Diagnostics {
    Diagnostics {
        residual: pair.residual,
        series_tail: pair.series_tail,
        truncation_tail: plan.tail_bound,
    }
}

/// Kac numerator `int Phi h dm` and denominator `int tau h dm`, with their
/// parameter derivatives in the dual parts.
pub fn kac_sums(
    density: &InducedDensity,
    phi: &Observable,
    plan: &TruncationPlan,
) -> Result<(Dual, Dual)> {
    phi.require_c1()?;
    let a = density.alpha.get();
    let grid = density.h().grid().clone();
    let per_node = par_map(0..grid.len(), |i| kac_node(density, phi, plan, a, grid.nodes[i]));
    let mut num = Dual::default();
    let mut den = Dual::default();
    for (w, r) in grid.m_weights.iter().zip(per_node) {
        let (n, d) = r?;
        num += n * *w;
        den += d * *w;
    }
    Ok((num, den))
}

fn kac_node(
    density: &InducedDensity,
    phi: &Observable,
    plan: &TruncationPlan,
    a: f64,
    z: f64,
) -> Result<(Dual, Dual)> {
    let ad = Dual::variable(a);
    let lift = |p: Dual| Dual::new(0.5 * (p.re + 1.0), 0.5 * p.eps);
    let f = |p: Dual| density.eval_dual(lift(p)) * 0.5;
    let mut num = Dual::default();
    let mut den = Dual::default();
    // running sum of phi(z_j), j = 1..r
    let mut excursion = Dual::default();
    let mut last = None;
    for st in InverseOrbit::new_unchecked(a, z).take(plan.r_max + 1) {
        let zr = Dual::new(st.z, st.da_z);
        if st.r >= 1 {
            excursion += phi.eval_dual(zr);
        }
        let mass = Dual::new(st.dz, st.da_dz) * f(zr);
        num += mass * (phi.eval_dual(lift(zr)) + excursion);
        den += mass * (st.r as f64 + 1.0);
        last = Some(st);
    }
    let st = last.ok_or(Error::Convergence { alpha: a, value: z })?;
    if st.r != plan.r_max {
        return Err(Error::Convergence { alpha: a, value: st.z });
    }
    if plan.mode == TailMode::Asymptotic && st.dz > 0.0 {
        let w = Dual::new(st.dz, st.da_dz);
        let rule = TailRule::new(ad, Dual::new(st.z, st.da_z));
        let a_f = rule.apply(f);
        let a_f_phi = rule.apply(|p| f(p) * phi.eval_dual(lift(p)));
        // excursions that start beyond the cutoff: sum_j phi(z_j) sum_{r>=j} ...
        let mut a_phi_inner = Dual::default();
        let mut a_one_inner = Dual::default();
        for (&p, &wt) in rule.points.iter().zip(&rule.weights) {
            let inner = f(p) + TailRule::new(ad, p).apply(f);
            a_phi_inner += wt * phi.eval_dual(p) * inner;
            a_one_inner += wt * inner;
        }
        let r = st.r as f64;
        num += w * (a_f_phi + excursion * a_f + a_phi_inner);
        den += w * (a_f * (r + 1.0) + a_one_inner);
    }
    Ok((num, den))
}

fn lenient_density(alpha: ParamAlpha, pair: &DensityPair) -> Result<InducedDensity> {
    if pair.dh.is_some() {
        return InducedDensity::new(alpha, pair);
    }
    let mut p = pair.clone();
    p.dh = Some(pair.h.scaled(0.0));
    InducedDensity::new(alpha, &p)
}

pub fn expectation_kac(
    alpha: ParamAlpha,
    phi: &Observable,
    pair: &DensityPair,
    plan: &TruncationPlan,
) -> Result<f64> {
    let (n, d) = kac_sums(&lenient_density(alpha, pair)?, phi, plan)?;
    Ok(n.re / d.re)
}

pub fn response_kac(
    alpha: ParamAlpha,
    phi: &Observable,
    pair: &DensityPair,
    plan: &TruncationPlan,
) -> Result<ResponseResult> {
    let density = InducedDensity::new(alpha, pair)?;
    response_kac_with(&density, phi, pair, plan)
}

fn response_kac_with(
    density: &InducedDensity,
    phi: &Observable,
    pair: &DensityPair,
    plan: &TruncationPlan,
) -> Result<ResponseResult> {
    let (n, d) = kac_sums(density, phi, plan)?;
    let q = n / d;
    Ok(ResponseResult {
        alpha: density.alpha.get(),
        expectation: q.re,
        derivative: q.eps,
        route: Route::KacQuotient,
        diagnostics: diagnostics(pair, plan),
    })
}

fn check_q(alpha: ParamAlpha, phi: &Observable) -> Result<()> {
    if let ObservableKind::LqSingular { q } = phi.kind {
        let need = 1.0 / (1.0 - alpha.get());
        if q <= need {
            return Err(Error::Precondition(format!(
                "observable '{}' has q = {q}, alpha = {} needs q > {need}",
                phi.name, alpha
            )));
        }
    }
    Ok(())
}

fn response_density_with(
    table: &UnitDensityTable,
    norm: &KacNormalizer,
    alpha: ParamAlpha,
    phi: &Observable,
    diag: Diagnostics,
) -> Result<ResponseResult> {
    check_q(alpha, phi)?;
    let (v, dv) = table.integrate(|x| phi.eval(x), phi.singular_exponent)?;
    // rho = 2 g / value
    let c = norm.value;
    Ok(ResponseResult {
        alpha: alpha.get(),
        expectation: 2.0 * v / c,
        derivative: 2.0 * (dv * c - v * norm.da_value) / (c * c),
        route: Route::DensityIntegral,
        diagnostics: diag,
    })
}

pub fn response_density(
    alpha: ParamAlpha,
    phi: &Observable,
    pair: &DensityPair,
    norm: &KacNormalizer,
) -> Result<ResponseResult> {
    check_q(alpha, phi)?;
    let density = InducedDensity::new(alpha, pair)?;
    let table = UnitDensityTable::new(&density, DEFAULT_SERIES_TOL)?;
    let diag = Diagnostics {
        residual: pair.residual,
        series_tail: pair.series_tail,
        truncation_tail: 0.0,
    };
    response_density_with(&table, norm, alpha, phi, diag)
}

impl Solved {
    pub fn response_kac(&self, phi: &Observable) -> Result<ResponseResult> {
        response_kac_with(&self.density, phi, self.pair(), &self.plan())
    }

    pub fn response_density(&self, phi: &Observable) -> Result<ResponseResult> {
        let diag = diagnostics(self.pair(), &self.plan());
        response_density_with(&self.table, &self.norm, self.alpha(), phi, diag)
    }

    /// Kac route for smooth observables, density route otherwise.
    pub fn response(&self, phi: &Observable) -> Result<ResponseResult> {
        if phi.is_c1() {
            self.response_kac(phi)
        } else {
            self.response_density(phi)
        }
    }

    /// `(Kac, density)` results and their derivative gap relative to `1 + |d|`.
    pub fn cross_check(&self, phi: &Observable) -> Result<(ResponseResult, ResponseResult, f64)> {
        let k = self.response_kac(phi)?;
        let d = self.response_density(phi)?;
        let gap = (k.derivative - d.derivative).abs() / (1.0 + k.derivative.abs());
        Ok((k, d, gap))
    }
}

/// Route agreement threshold, relative to `1 + |derivative|`.
pub const ROUTE_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub result: std::result::Result<ResponseResult, Error>,
    /// Derivative gap between the two routes, when both apply.
    pub route_gap: Option<f64>,
}

/// Responses on a strictly increasing grid inside (0, 1). Failures are
/// recorded per point; the sweep continues.
pub fn sweep(alphas: &[f64], phi: &Observable, cfg: &PipelineConfig) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() {
        return Err(Error::Precondition("empty parameter grid".into()));
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("parameter grid must be strictly increasing".into()));
    }
    for &a in alphas {
        ParamAlpha::new(a)?;
    }
    cfg.validate()?;
    let rows = par_map(0..alphas.len(), |i| {
        let a = alphas[i];
        let run = || -> Result<(ResponseResult, Option<f64>)> {
            let solved = Solved::new(ParamAlpha::new(a)?, cfg)?;
            if phi.is_c1() {
                let (k, _, gap) = solved.cross_check(phi)?;
                if gap > ROUTE_TOLERANCE {
                    log::warn!("alpha = {a}: derivative routes differ by {gap:e}");
                }
                Ok((k, Some(gap)))
            } else {
                Ok((solved.response_density(phi)?, None))
            }
        };
        match run() {
            Ok((r, gap)) => SweepRow {
                alpha: a,
                result: Ok(r),
                route_gap: gap,
            },
            Err(e) => {
                log::error!("alpha = {a}: {e}");
                SweepRow {
                    alpha: a,
                    result: Err(e),
                    route_gap: None,
                }
            }
        }
    });
    Ok(rows)
}

/// `max_i |d_i - (E_{i+1} - E_{i-1}) / (a_{i+1} - a_{i-1})|` over interior
/// points with all three neighbours solved.
pub fn secant_inconsistency(rows: &[SweepRow]) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for w in rows.windows(3) {
        if let (Ok(l), Ok(m), Ok(r)) = (&w[0].result, &w[1].result, &w[2].result) {
            let secant = (r.expectation - l.expectation) / (r.alpha - l.alpha);
            let e = (m.derivative - secant).abs();
            worst = Some(worst.map_or(e, |x: f64| x.max(e)));
        }
    }
    worst
}

pub fn sweep_to_csv(rows: &[SweepRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "alpha,expectation,derivative,residual,tail")?;
    for row in rows {
        match &row.result {
            Ok(r) => writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                row.alpha, r.expectation, r.derivative, r.diagnostics.residual, r.diagnostics.series_tail
            )?,
            Err(_) => writeln!(out, "{:.16e},nan,nan,nan,nan", row.alpha)?,
        }
    }
    Ok(())
}
