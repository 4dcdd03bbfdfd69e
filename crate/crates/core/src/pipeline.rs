//! End-to-end solve at one parameter value.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{solve_dh, solve_h, DensityPair};
use crate::error::{Error, Result};
use crate::function_space::{ChebGrid, DEFAULT_NODES};
use crate::orbit::ParamAlpha;
use crate::transfer::{plan_truncation, TransferOperator, TruncationPlan};
use crate::unit_density::{InducedDensity, KacNormalizer, UnitDensityTable, DEFAULT_SERIES_TOL};

pub const MIN_PIPELINE_NODES: usize = 32;
pub const MAX_PIPELINE_NODES: usize = 512;

/// How the branch series is cut off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TailChoice {
    /// Explicit branches plus the asymptotic tail rule.
    Asymptotic,
    /// Drop branches once the fitted tail is below `tol`.
    Drop { tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub nodes: usize,
    /// Fixed-point residual target for `h`.
    pub tol: f64,
    /// Term-norm cutoff of the derivative series.
    pub series_tol: f64,
    /// Truncation target of the pull-back series for `g`.
    pub unit_tol: f64,
    pub tail: TailChoice,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_NODES,
            tol: 1e-12,
            series_tol: 1e-12,
            unit_tol: DEFAULT_SERIES_TOL,
            tail: TailChoice::Asymptotic,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(MIN_PIPELINE_NODES..=MAX_PIPELINE_NODES).contains(&self.nodes) {
            return Err(Error::Domain {
                what: "nodes",
                value: self.nodes as f64,
                domain: "[32, 512]",
            });
        }
        for (what, v) in [
            ("tol", self.tol),
            ("series_tol", self.series_tol),
            ("unit_tol", self.unit_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    what,
                    value: v,
                    domain: "(0, inf)",
                });
            }
        }
        Ok(())
    }

    pub fn plan(&self, alpha: ParamAlpha) -> Result<TruncationPlan> {
        match self.tail {
            TailChoice::Asymptotic => Ok(TruncationPlan::accelerated(alpha)),
            TailChoice::Drop { tol } => plan_truncation(alpha, tol, 0.0),
        }
    }
}

/// Operator and induced density pair at one parameter value.
#[derive(Debug, Clone)]
pub struct InducedSolution {
    pub alpha: ParamAlpha,
    pub op: TransferOperator,
    pub pair: DensityPair,
}

impl InducedSolution {
    pub fn solve(alpha: ParamAlpha, cfg: &PipelineConfig) -> Result<Self> {
        let plan = cfg.plan(alpha)?;
        Self::solve_with_plan(alpha, cfg, plan)
    }

    /// Solve with an explicit plan, e.g. to hold the cutoff fixed across a
    /// finite-difference stencil.
    pub fn solve_with_plan(alpha: ParamAlpha, cfg: &PipelineConfig, plan: TruncationPlan) -> Result<Self> {
        cfg.validate()?;
        let grid = ChebGrid::new(cfg.nodes)?;
        Self::solve_on(alpha, &grid, cfg, plan, true)
    }

    /// Like [`InducedSolution::solve_with_plan`] without the derivative series.
    pub fn solve_h_only(alpha: ParamAlpha, cfg: &PipelineConfig, plan: TruncationPlan) -> Result<Self> {
        cfg.validate()?;
        let grid = ChebGrid::new(cfg.nodes)?;
        Self::solve_on(alpha, &grid, cfg, plan, false)
    }

    fn solve_on(
        alpha: ParamAlpha,
        grid: &Arc<ChebGrid>,
        cfg: &PipelineConfig,
        plan: TruncationPlan,
        with_dh: bool,
    ) -> Result<Self> {
        let op = TransferOperator::new(alpha, grid, plan)?;
        let mut pair = solve_h(&op, cfg.tol)?;
        if with_dh {
            pair = solve_dh(&op, pair, cfg.series_tol)?;
        }
        Ok(Self { alpha, op, pair })
    }
}

/// Everything needed for expectations and responses at one parameter value.
#[derive(Debug, Clone)]
pub struct Solved {
    pub induced: InducedSolution,
    pub density: InducedDensity,
    pub table: UnitDensityTable,
    pub norm: KacNormalizer,
    pub config: PipelineConfig,
}

impl Solved {
    pub fn new(alpha: ParamAlpha, cfg: &PipelineConfig) -> Result<Self> {
        let plan = cfg.plan(alpha)?;
        Self::with_plan(alpha, cfg, plan)
    }

    pub fn with_plan(alpha: ParamAlpha, cfg: &PipelineConfig, plan: TruncationPlan) -> Result<Self> {
        Self::from_induced(InducedSolution::solve_with_plan(alpha, cfg, plan)?, cfg)
    }

    pub fn from_induced(induced: InducedSolution, cfg: &PipelineConfig) -> Result<Self> {
        let density = InducedDensity::new(induced.alpha, &induced.pair)?;
        let table = UnitDensityTable::new(&density, cfg.unit_tol)?;
        let norm = table.normalizer()?;
        Ok(Self {
            induced,
            density,
            table,
            norm,
            config: *cfg,
        })
    }

    pub fn alpha(&self) -> ParamAlpha {
        self.induced.alpha
    }

    pub fn pair(&self) -> &DensityPair {
        &self.induced.pair
    }

    pub fn plan(&self) -> TruncationPlan {
        self.induced.op.plan
    }
}
