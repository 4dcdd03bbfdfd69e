//! Browser bindings for the density and response pipeline. Every function
//! returns a flat `Float64Array` of fixed-width rows.

use pmresp_core::observable::Observable;
use pmresp_core::orbit::ParamAlpha;
use pmresp_core::pipeline::{PipelineConfig, Solved};
use pmresp_core::unit_density::{graded_grid, profile};
use wasm_bindgen::prelude::*;

/// Smaller than the command-line default so a solve stays interactive.
const DEMO_NODES: usize = 48;

fn config(nodes: usize) -> PipelineConfig {
    PipelineConfig {
        nodes: if nodes == 0 { DEMO_NODES } else { nodes },
        tol: 1e-11,
        series_tol: 1e-11,
        ..PipelineConfig::default()
    }
}

fn solve(alpha: f64, nodes: usize) -> Result<Solved, pmresp_core::error::Error> {
    Solved::new(ParamAlpha::new(alpha)?, &config(nodes))
}

/// Rows `(node, h, dh)` of the induced density on `[1/2, 1]`.
pub fn induced_density_rows(alpha: f64, nodes: usize) -> Result<Vec<f64>, pmresp_core::error::Error> {
    let s = solve(alpha, nodes)?;
    let pair = s.pair();
    let dh = pair.dh()?;
    Ok(pair
        .h
        .nodes()
        .iter()
        .zip(pair.h.values())
        .zip(dh.values())
        .flat_map(|((x, h), d)| [*x, *h, *d])
        .collect())
}

/// Rows `(z, rho, da_rho)` on `points` log-spaced abscissae from `z_min` to 1.
pub fn unit_density_rows(alpha: f64, points: usize, z_min: f64) -> Result<Vec<f64>, pmresp_core::error::Error> {
    if points < 2 || !(z_min > 0.0 && z_min < 1.0) {
        return Err(pmresp_core::error::Error::Precondition(
            "need at least 2 points and 0 < z_min < 1".into(),
        ));
    }
    let s = solve(alpha, 0)?;
    let zs = graded_grid(points, z_min);
    let rows = profile(&s.density, &s.norm, &zs, s.config.unit_tol)?;
    Ok(rows.iter().flat_map(|e| [e.z, e.rho, e.da_rho]).collect())
}

/// Rows `(alpha, expectation, derivative)` for `count` parameters from `a0` to `a1`.
pub fn response_rows(obs: &str, a0: f64, a1: f64, count: usize) -> Result<Vec<f64>, pmresp_core::error::Error> {
    let phi = Observable::parse(obs)?;
    if count < 2 || !(a1 > a0) {
        return Err(pmresp_core::error::Error::Precondition(
            "need at least 2 points and a0 < a1".into(),
        ));
    }
    let mut out = Vec::with_capacity(3 * count);
    for i in 0..count {
        let a = a0 + (a1 - a0) * i as f64 / (count - 1) as f64;
        let r = solve(a, 0)?.response(&phi)?;
        out.extend([a, r.expectation, r.derivative]);
    }
    Ok(out)
}

fn js(e: pmresp_core::error::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn induced_density(alpha: f64, nodes: usize) -> Result<Vec<f64>, JsError> {
    induced_density_rows(alpha, nodes).map_err(js)
}

#[wasm_bindgen]
pub fn unit_density_profile(alpha: f64, points: usize, z_min: f64) -> Result<Vec<f64>, JsError> {
    unit_density_rows(alpha, points, z_min).map_err(js)
}

#[wasm_bindgen]
pub fn response_curve(obs: &str, a0: f64, a1: f64, count: usize) -> Result<Vec<f64>, JsError> {
    response_rows(obs, a0, a1, count).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_have_fixed_width() {
        let h = induced_density_rows(0.4, 32).unwrap();
        assert_eq!(h.len(), 3 * 32);
        assert!(h.chunks(3).all(|r| r[1] > 0.0));
        let rho = unit_density_rows(0.4, 10, 1e-4).unwrap();
        assert_eq!(rho.len(), 30);
        let resp = response_rows("x", 0.3, 0.4, 2).unwrap();
        assert_eq!(resp.len(), 6);
        assert_eq!(resp[0], 0.3);
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(induced_density_rows(1.2, 0).is_err());
        assert!(unit_density_rows(0.4, 1, 1e-4).is_err());
        assert!(response_rows("nope", 0.3, 0.4, 3).is_err());
        assert!(response_rows("x", 0.4, 0.3, 3).is_err());
    }
}
