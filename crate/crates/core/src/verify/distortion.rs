//! Distortion bounds for `P_alpha` on positive test functions, regularity
//! propagation, the `C^2` operator bound and the coupling envelope.

use std::sync::Arc;

use crate::error::Result;
use crate::function_space::{ChebGrid, SampledFunction};
use crate::transfer::TransferOperator;

use super::{AuditConstants, AuditRecord, Witness};

const COUPLING_STEPS: usize = 40;

/// `1`, `e^z` and `1 + 2 (z - 3/4)^2` sampled on `grid`.
pub fn regular_samples(grid: &Arc<ChebGrid>) -> Vec<(&'static str, SampledFunction)> {
    vec![
        ("one", SampledFunction::constant(grid, 1.0)),
        ("exp", SampledFunction::from_fn(grid, f64::exp)),
        ("quad", SampledFunction::from_fn(grid, |z| 1.0 + 2.0 * (z - 0.75).powi(2))),
    ]
}

pub fn distortion_audit(op: &TransferOperator, c: &AuditConstants) -> Result<Vec<AuditRecord>> {
    let a = op.alpha.get();
    let at = Witness { alpha: a, z: f64::NAN, r: 0 };
    let mut out = Vec::new();
    let samples = regular_samples(op.grid());
    for (name, h) in &samples {
        let ph = op.apply_p(h);
        let nh = h.norms();
        let np = ph.norms();
        let (lh, ph_) = nh.log_norms()?;
        let (lp, pp) = np.log_norms()?;
        out.push(
            AuditRecord::new(format!("distortion.L[{a}, {name}]"), c.sigma * lh + c.k0 - lp)
                .param("h_L", lh)
                .param("Ph_L", lp)
                .witness(at),
        );
        out.push(
            AuditRecord::new(
                format!("distortion.P[{a}, {name}]"),
                c.sigma * c.sigma * ph_ + 3.0 * c.sigma * c.k0 * lh + c.k0 - pp,
            )
            .param("h_P", ph_)
            .param("Ph_P", pp)
            .witness(at),
        );
        if lh <= c.k_l {
            out.push(AuditRecord::new(format!("regularity.propagation[{a}, {name}]"), c.k_l - lp).witness(at));
        }
        out.push(
            AuditRecord::new(format!("K6.bound[{a}, {name}]"), c.k6 * nh.c2_norm() - np.c2_norm())
                .param("h_c2", nh.c2_norm())
                .param("Ph_c2", np.c2_norm())
                .witness(at),
        );
    }

    // two regular densities with equal means couple at the K5 (1-theta)^n rate
    let f = &samples[1].1;
    let g = &samples[2].1;
    let (mf, mg) = (f.integrate_m(), g.integrate_m());
    let mut d = f.zip_with(g, |x, y| x / mf - y / mg);
    let d0 = d.norms().c1_norm();
    let ln_rate = (-c.theta).ln_1p();
    let mut worst = f64::INFINITY;
    let mut worst_n = 0;
    for n in 0..=COUPLING_STEPS {
        let dn = d.norms().c1_norm();
        if dn > 0.0 {
            let slack = c.ln_k5 + n as f64 * ln_rate + d0.ln() - dn.ln();
            if slack < worst {
                worst = slack;
                worst_n = n;
            }
        }
        d = op.apply_p(&d);
    }
    out.push(
        AuditRecord::new(format!("coupling[{a}]"), worst)
            .param("log_slack", worst)
            .param("steps", COUPLING_STEPS as f64)
            .witness(Witness { r: worst_n, ..at }),
    );
    Ok(out)
}
