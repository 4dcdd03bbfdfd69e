//! Central finite differences of pipeline quantities.

use crate::error::{Error, Result};
use crate::observable::Observable;
use crate::orbit::ParamAlpha;
use crate::pipeline::{InducedSolution, PipelineConfig};
use crate::response::expectation_kac;
use crate::transfer::TruncationPlan;
use crate::unit_density::{InducedDensity, UnitDensityTable};

/// A scalar that depends on the parameter.
#[derive(Debug, Clone)]
pub enum Quantity {
    /// `h_alpha` at a collocation node.
    HAtNode(usize),
    /// The pull-back series `g_alpha(z)`.
    GAt(f64),
    /// `int phi d nu_alpha`.
    Expectation(Observable),
    /// A value that does not depend on the parameter.
    Constant(f64),
}

fn value_only(alpha: ParamAlpha, cfg: &PipelineConfig, plan: TruncationPlan) -> Result<InducedDensity> {
    let mut pair = InducedSolution::solve_h_only(alpha, cfg, plan)?.pair;
    // g and the expectation only read h; a zero derivative keeps the types happy
    pair.dh = Some(pair.h.scaled(0.0));
    InducedDensity::new(alpha, &pair)
}

/// The quantity at one parameter value, using `plan` for the branch cutoff.
pub fn evaluate(q: &Quantity, alpha: ParamAlpha, cfg: &PipelineConfig, plan: TruncationPlan) -> Result<f64> {
    match q {
        Quantity::Constant(c) => Ok(*c),
        Quantity::HAtNode(i) => {
            let sol = InducedSolution::solve_h_only(alpha, cfg, plan)?;
            sol.pair.h.values().get(*i).copied().ok_or(Error::Domain {
                what: "node index",
                value: *i as f64,
                domain: "[0, nodes)",
            })
        }
        Quantity::GAt(z) => Ok(value_only(alpha, cfg, plan)?.g(*z, cfg.unit_tol)?.g),
        Quantity::Expectation(phi) if phi.is_c1() => {
            let pair = InducedSolution::solve_h_only(alpha, cfg, plan)?.pair;
            expectation_kac(alpha, phi, &pair, &plan)
        }
        Quantity::Expectation(phi) => {
            let d = value_only(alpha, cfg, plan)?;
            let table = UnitDensityTable::new(&d, cfg.unit_tol)?;
            let norm = table.normalizer()?;
            let (v, _) = table.integrate(|x| phi.eval(x), phi.singular_exponent)?;
            Ok(2.0 * v / norm.value)
        }
    }
}

/// `(q(alpha + eps) - q(alpha - eps)) / (2 eps)`, with the branch cutoff of
/// the centre held fixed on both sides.
pub fn fd_oracle(q: &Quantity, alpha: f64, eps: f64, cfg: &PipelineConfig) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain {
            what: "eps",
            value: eps,
            domain: "(0, inf)",
        });
    }
    let centre = ParamAlpha::new(alpha)?;
    let (lo, hi) = (centre.offset(-eps)?, centre.offset(eps)?);
    if let Quantity::Constant(_) = q {
        return Ok(0.0);
    }
    let plan = cfg.plan(centre)?;
    let up = evaluate(q, hi, cfg, plan)?;
    let down = evaluate(q, lo, cfg, plan)?;
    Ok((up - down) / (2.0 * eps))
}
