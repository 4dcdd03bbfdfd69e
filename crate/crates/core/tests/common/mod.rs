#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use pmresp_core::orbit::ParamAlpha;
use pmresp_core::pipeline::{PipelineConfig, Solved};

pub fn alpha(a: f64) -> ParamAlpha {
    ParamAlpha::new(a).unwrap()
}

/// Solved pipeline at `a` with the default configuration, shared across the
/// tests of one binary.
pub fn solved(a: f64) -> Arc<Solved> {
    static CACHE: OnceLock<Mutex<BTreeMap<u64, Arc<OnceLock<Arc<Solved>>>>>> = OnceLock::new();
    let slot = CACHE
        .get_or_init(Default::default)
        .lock()
        .unwrap()
        .entry(a.to_bits())
        .or_default()
        .clone();
    slot.get_or_init(|| Arc::new(Solved::new(alpha(a), &PipelineConfig::default()).unwrap()))
        .clone()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

/// `sum_r int_{branch r} Phi_r h dm` over the first `r_max` branches of the
/// return partition, where `Phi_r` is the Birkhoff sum of `phi` over one
/// excursion (`phi = None` counts steps). Branches are located through the
/// preimage chain and excursions are followed with the forward map.
pub fn branch_sum(
    a: f64,
    h: &pmresp_core::function_space::SampledFunction,
    phi: Option<&pmresp_core::observable::Observable>,
    r_max: usize,
) -> f64 {
    use pmresp_core::orbit::{branch_points, map_t};
    use pmresp_core::quadrature::UnitRule;
    let rule = UnitRule::new(8);
    let part = branch_points(alpha(a), r_max + 1).unwrap();
    let mut total = 0.0;
    for r in 0..=r_max {
        // y = (1 + x) / 2 sweeps branch r as x runs over (x_{r+1}, x_r); dm = dx
        let (lo, hi) = (part.xs[r + 1], part.xs[r]);
        let v = rule.integrate(lo, hi, |x| {
            let y = 0.5 * (1.0 + x);
            let sum = match phi {
                None => (r + 1) as f64,
                Some(phi) => {
                    let mut s = phi.eval(y);
                    let mut w = x;
                    for _ in 0..r {
                        s += phi.eval(w);
                        w = map_t(alpha(a), w).unwrap();
                    }
                    s
                }
            };
            sum * h.eval(y)
        });
        total += v;
    }
    total
}
