use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pmresp_core::observable::Observable;
use pmresp_core::orbit::ParamAlpha;
use pmresp_core::pipeline::{PipelineConfig, TailChoice};
use pmresp_core::verify::AuditConfig;
use serde::{Deserialize, Serialize};

use crate::Flags;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    /// Birkhoff average of the observable along the full map.
    Full,
    /// Return times and visit frequencies of the induced map.
    Induced,
}

/// Everything a run depends on. Read from `--config`, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: Option<f64>,
    /// `A:B:STEP`, both ends included.
    pub alpha_grid: Option<String>,
    pub obs: String,
    pub nodes: usize,
    pub tol: f64,
    pub series_tol: f64,
    pub unit_tol: f64,
    /// Drop branches below this tail instead of using the asymptotic tail rule.
    pub truncation_tol: Option<f64>,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out: PathBuf,
    pub profile_points: usize,
    pub profile_z_min: f64,
    pub mc_mode: McMode,
    pub mc_steps: usize,
    pub mc_burn_in: usize,
    pub audit_alphas: Vec<f64>,
    pub audit_z_points: usize,
    pub audit_r_max: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        let a = AuditConfig::default();
        Self {
            alpha: None,
            alpha_grid: None,
            obs: "x".into(),
            nodes: p.nodes,
            tol: p.tol,
            series_tol: p.series_tol,
            unit_tol: p.unit_tol,
            truncation_tol: None,
            seed: 0,
            jobs: None,
            out: PathBuf::from("."),
            profile_points: 200,
            profile_z_min: 1e-6,
            mc_mode: McMode::Full,
            mc_steps: 1_000_000,
            mc_burn_in: pmresp_core::verify::DEFAULT_BURN_IN,
            audit_alphas: a.alphas,
            audit_z_points: a.z_points,
            audit_r_max: a.r_max,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
        }
    }

    pub fn apply(&mut self, f: &Flags) {
        if let Some(a) = f.alpha {
            self.alpha = Some(a);
        }
        if let Some(g) = &f.alpha_grid {
            self.alpha_grid = Some(g.clone());
        }
        if let Some(o) = &f.obs {
            self.obs = o.clone();
        }
        if let Some(n) = f.nodes {
            self.nodes = n;
        }
        if let Some(t) = f.tol {
            self.tol = t;
        }
        if let Some(t) = f.series_tol {
            self.series_tol = t;
        }
        if let Some(s) = f.seed {
            self.seed = s;
        }
        if let Some(j) = f.jobs {
            self.jobs = Some(j);
        }
        if let Some(o) = &f.out {
            self.out = o.clone();
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            nodes: self.nodes,
            tol: self.tol,
            series_tol: self.series_tol,
            unit_tol: self.unit_tol,
            tail: match self.truncation_tol {
                Some(tol) => TailChoice::Drop { tol },
                None => TailChoice::Asymptotic,
            },
        }
    }

    /// Checks that do not need a solve.
    pub fn validate(&self) -> Result<()> {
        self.pipeline().validate()?;
        if let Some(a) = self.alpha {
            ParamAlpha::new(a)?;
        }
        if self.alpha_grid.is_some() {
            self.grid()?;
        }
        if let Some(t) = self.truncation_tol {
            if !(t > 0.0 && t.is_finite()) {
                bail!("truncation_tol must be positive, got {t}");
            }
        }
        if self.jobs == Some(0) {
            bail!("jobs must be at least 1");
        }
        if self.profile_points < 2 || !(self.profile_z_min > 0.0 && self.profile_z_min < 1.0) {
            bail!("profile needs at least 2 points and 0 < profile_z_min < 1");
        }
        for &a in &self.audit_alphas {
            ParamAlpha::new(a)?;
        }
        self.observable()?;
        Ok(())
    }

    pub fn observable(&self) -> Result<Observable> {
        Ok(Observable::parse(&self.obs)?)
    }

    pub fn single_alpha(&self) -> Result<ParamAlpha> {
        match self.alpha {
            Some(a) => Ok(ParamAlpha::new(a)?),
            None => bail!("this command needs --alpha"),
        }
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        match &self.alpha_grid {
            Some(g) => parse_grid(g),
            None => bail!("this command needs --alpha-grid A:B:STEP"),
        }
    }

    pub fn audit(&self) -> Result<AuditConfig> {
        let alphas = if self.alpha_grid.is_some() {
            self.grid()?
        } else if let Some(a) = self.alpha {
            vec![a]
        } else {
            self.audit_alphas.clone()
        };
        Ok(AuditConfig {
            alphas,
            z_points: self.audit_z_points,
            r_max: self.audit_r_max,
            phi: self.observable()?,
            pipeline: self.pipeline(),
            ..AuditConfig::default()
        })
    }
}

/// `A:B:STEP` to `A, A + STEP, ..., B`. The end point must lie on the grid.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        bail!("alpha grid '{text}' is not of the form A:B:STEP");
    };
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .with_context(|| format!("bad number '{s}' in alpha grid '{text}'"))
    };
    let (a, b, step) = (num(a)?, num(b)?, num(step)?);
    if !(step > 0.0 && step.is_finite()) || !(b >= a) {
        bail!("alpha grid '{text}' needs A <= B and STEP > 0");
    }
    let n = ((b - a) / step).round();
    if ((a + n * step) - b).abs() > 1e-9 * step.max(1.0) {
        bail!("alpha grid '{text}': B is not A plus a whole number of steps");
    }
    let grid: Vec<f64> = (0..=n as usize).map(|i| a + i as f64 * step).collect();
    for &x in &grid {
        ParamAlpha::new(x)?;
    }
    Ok(grid)
}
