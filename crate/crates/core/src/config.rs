//! Strict JSON problem configuration.

use crate::bconvex::BAffinePiece;
use crate::benefit::BenefitFunction;
use crate::domain::{Ball, Grid, Placement, Region};
use crate::error::{Error, Result};
use crate::expr::{Expr, Scope};
use crate::solver::{Method, ProblemSpec, SolverOptions, Tolerances};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Bilinear,
    QuadraticDistance,
    UserDefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenefitConfig {
    pub family: FamilyName,
    /// required for `user_defined`, in `x1..xn`, `y1..yn`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball: Option<Ball>,
}

impl RegionConfig {
    pub fn build(&self) -> Result<Region> {
        Region::new(self.lo.clone(), self.hi.clone(), self.ball.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlacementName {
    #[default]
    CellCentered,
    Vertex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub counts: Vec<usize>,
    #[serde(default)]
    pub placement: PlacementName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullConfig {
    pub y: Vec<f64>,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_menu_size")]
    pub menu_size: usize,
    #[serde(default)]
    pub max_pieces: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_multi_start")]
    pub multi_start: usize,
    /// vertex lattice counts for the price menu; defaults by dimension
    #[serde(default)]
    pub price_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_method() -> Method {
    Method::Convex
}

fn default_menu_size() -> usize {
    64
}

fn default_multi_start() -> usize {
    4
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: default_method(),
            menu_size: default_menu_size(),
            max_pieces: None,
            seed: 0,
            multi_start: default_multi_start(),
            price_grid: None,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    1000
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            samples: default_samples(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub radii: Vec<f64>,
    pub points: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            radii: vec![0.01, 0.02, 0.03, 0.04, 0.05],
            points: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub benefit: BenefitConfig,
    pub x_domain: RegionConfig,
    pub y_domain: RegionConfig,
    pub grid: GridConfig,
    /// density `f(x)` in `x1..xn`
    pub density: String,
    pub lambda: f64,
    /// cost `c(y)` in `y1..yn`
    pub cost: String,
    pub null_product: NullConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default)]
    pub scan: ScanConfig,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }

    pub fn dim(&self) -> usize {
        self.x_domain.lo.len()
    }

    pub fn benefit(&self) -> Result<Arc<BenefitFunction>> {
        let x = self
            .x_domain
            .build()
            .map_err(|e| Error::Config(format!("x_domain: {e}")))?;
        let y = self
            .y_domain
            .build()
            .map_err(|e| Error::Config(format!("y_domain: {e}")))?;
        let b = match (self.benefit.family, &self.benefit.expr) {
            (FamilyName::Bilinear, None) => BenefitFunction::bilinear(x, y)?,
            (FamilyName::QuadraticDistance, None) => BenefitFunction::quadratic_distance(x, y)?,
            (FamilyName::UserDefined, Some(src)) => BenefitFunction::user_defined(src, x, y)?,
            (FamilyName::UserDefined, None) => {
                return Err(Error::Config("benefit.expr is required for user_defined".into()))
            }
            (_, Some(_)) => return Err(Error::Config("benefit.expr is only allowed for user_defined".into())),
        };
        let b = match self.benefit.fd_step {
            Some(h) => b.with_fd_step(h)?,
            None => b,
        };
        Ok(Arc::new(b))
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut o = SolverOptions::new(self.dim());
        o.method = self.solver.method;
        o.menu_size = self.solver.menu_size;
        o.max_pieces = self.solver.max_pieces;
        o.seed = self.solver.seed;
        o.multi_start = self.solver.multi_start;
        if let Some(p) = &self.solver.price_grid {
            o.price_grid = p.clone();
        }
        o.tolerances = self.solver.tolerances.clone();
        o
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let n = self.dim();
        let benefit = self.benefit()?;
        let placement = match self.grid.placement {
            PlacementName::CellCentered => Placement::CellCentered,
            PlacementName::Vertex => Placement::Vertex,
        };
        let grid = Grid::new(benefit.x_domain().clone(), self.grid.counts.clone(), placement)
            .map_err(|e| Error::Config(format!("grid: {e}")))?;
        let density = Expr::parse(&self.density, n, Scope::X)?;
        let cost = Expr::parse(&self.cost, n, Scope::Y)?;
        if self.solver.menu_size == 0 {
            return Err(Error::Config("solver.menu_size must be positive".into()));
        }
        ProblemSpec::new(
            benefit,
            grid,
            density,
            self.lambda,
            cost,
            BAffinePiece::null(self.null_product.y.clone(), self.null_product.a),
            self.solver_options(),
        )
    }
}
