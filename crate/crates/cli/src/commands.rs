
use anyhow::Context;
use pmresp_core::observable::Observable;
use pmresp_core::pipeline::Solved;
use pmresp_core::response::{secant_inconsistency, sweep, sweep_to_csv, ResponseResult, SweepRow};
use pmresp_core::unit_density::{graded_grid, profile, profile_to_csv};
use pmresp_core::verify::{mc_full_map, mc_induced_map, run_audit_suite, McReport};
use serde::Serialize;
use serde_json::json;

use crate::config::{McMode, RunConfig};
use crate::output::{write_csv, write_json};
use crate::{Command, Failure};

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<(), Failure> {
    match cmd {
        Command::Density => density(cfg),
        Command::Response => response(cfg),
        Command::Sweep => sweep_cmd(cfg),
        Command::Verify => verify(cfg),
        Command::Mc => mc(cfg),
    }
}

fn solve(cfg: &RunConfig) -> Result<Solved, Failure> {
    let alpha = cfg.single_alpha().map_err(Failure::Config)?;
    let s = Solved::new(alpha, &cfg.pipeline())?;
    log::info!(
        "alpha = {alpha}: h in {} iterations (residual {:e}), dh in {} terms",
        s.pair().iterations,
        s.pair().residual,
        s.pair().series_terms
    );
    Ok(s)
}

fn density(cfg: &RunConfig) -> Result<(), Failure> {
    let cmd = Command::Density;
    let s = solve(cfg)?;
    let pair = s.pair();
    let dh = pair.dh()?;
    write_csv(cmd, cfg, "induced_density.csv", |w| {
        writeln!(w, "node,h,dh")?;
        for ((x, h), d) in pair.h.nodes().iter().zip(pair.h.values()).zip(dh.values()) {
            writeln!(w, "{x:.16e},{h:.16e},{d:.16e}")?;
        }
        Ok(())
    })?;

    let zs = graded_grid(cfg.profile_points, cfg.profile_z_min);
    let rows = profile(&s.density, &s.norm, &zs, cfg.unit_tol)?;
    write_csv(cmd, cfg, "unit_density.csv", |w| profile_to_csv(&rows, w))?;

    let (v, dv) = s.table.integrate(|_| 1.0, 0.0)?;
    let c = s.norm.value;
    let summary = json!({
        "alpha": s.alpha().get(),
        "nodes": cfg.nodes,
        "plan": s.plan(),
        "iterations": pair.iterations,
        "residual": pair.residual,
        "series_terms": pair.series_terms,
        "series_tail": pair.series_tail,
        "normalizer": s.norm,
        "integral_rho": 2.0 * v / c,
        "integral_da_rho": 2.0 * (dv * c - v * s.norm.da_value) / (c * c),
        "h_min": pair.h.min_value(),
        "h_integral": pair.h.integrate_m(),
    });
    write_json(cmd, cfg, "summary.json", &summary)?;
    Ok(())
}

fn response(cfg: &RunConfig) -> Result<(), Failure> {
    let cmd = Command::Response;
    let phi = cfg.observable().map_err(Failure::Config)?;
    let s = solve(cfg)?;
    #[derive(Serialize)]
    struct Out {
        observable: String,
        result: ResponseResult,
        density_route: Option<ResponseResult>,
        route_gap: Option<f64>,
    }
    let out = if phi.is_c1() {
        let (k, d, gap) = s.cross_check(&phi)?;
        if gap > pmresp_core::response::ROUTE_TOLERANCE {
            log::warn!("derivative routes differ by {gap:e}");
        }
        Out {
            observable: phi.name.clone(),
            result: k,
            density_route: Some(d),
            route_gap: Some(gap),
        }
    } else {
        Out {
            observable: phi.name.clone(),
            result: s.response_density(&phi)?,
            density_route: None,
            route_gap: None,
        }
    };
    let row = SweepRow {
        alpha: out.result.alpha,
        result: Ok(out.result),
        route_gap: out.route_gap,
    };
    write_csv(cmd, cfg, "response.csv", |w| sweep_to_csv(std::slice::from_ref(&row), w))?;
    write_json(cmd, cfg, "response.json", &out)?;
    Ok(())
}

fn sweep_cmd(cfg: &RunConfig) -> Result<(), Failure> {
    let cmd = Command::Sweep;
    let phi: Observable = cfg.observable().map_err(Failure::Config)?;
    let grid = cfg.grid().map_err(Failure::Config)?;
    let rows = sweep(&grid, &phi, &cfg.pipeline())?;
    write_csv(cmd, cfg, "sweep.csv", |w| sweep_to_csv(&rows, w))?;
    let failures: Vec<_> = rows
        .iter()
        .filter_map(|r| r.result.as_ref().err().map(|e| json!({"alpha": r.alpha, "error": e.to_string()})))
        .collect();
    let max_gap = rows.iter().filter_map(|r| r.route_gap).fold(None, |m: Option<f64>, g| {
        Some(m.map_or(g, |m| m.max(g)))
    });
    let summary = json!({
        "observable": phi.name,
        "points": rows.len(),
        "secant_inconsistency": secant_inconsistency(&rows),
        "max_route_gap": max_gap,
        "failures": failures,
    });
    write_json(cmd, cfg, "sweep.json", &summary)?;
    if !failures.is_empty() {
        return Err(Failure::Numerical(anyhow::anyhow!(
            "{} of {} sweep points failed",
            failures.len(),
            rows.len()
        )));
    }
    Ok(())
}

fn verify(cfg: &RunConfig) -> Result<(), Failure> {
    let audit = cfg.audit().map_err(Failure::Config)?;
    let report = run_audit_suite(&audit)?;
    write_json(Command::Verify, cfg, "audit.json", &report)?;
    for r in report.failures() {
        eprintln!("FAIL {} (margin {:e})", r.check, r.margin);
    }
    let failed = report.failures().count();
    if failed > 0 {
        return Err(Failure::Audit(failed));
    }
    Ok(())
}

fn mc(cfg: &RunConfig) -> Result<(), Failure> {
    let alpha = cfg.single_alpha().map_err(Failure::Config)?;
    let phi = cfg.observable().map_err(Failure::Config)?;
    let (report, reference): (McReport, f64) = match cfg.mc_mode {
        McMode::Full => {
            let r = mc_full_map(alpha, &phi, cfg.mc_steps, cfg.mc_burn_in, cfg.seed)?;
            (r, solve(cfg)?.response(&phi)?.expectation)
        }
        McMode::Induced => {
            let r = mc_induced_map(alpha, cfg.mc_steps, cfg.seed)?;
            (r, solve(cfg)?.norm.value)
        }
    };
    if !report.reliable {
        log::warn!("alpha = {alpha}: correlations are not summable; the error bar is not reliable");
    }
    let z = (report.estimate - reference).abs() / report.batch_std_error;
    let out = json!({
        "mode": cfg.mc_mode,
        "report": report,
        "reference": reference,
        "z_score": z,
    });
    write_json(Command::Mc, cfg, "mc.json", &out).context("writing mc.json")?;
    Ok(())
}
